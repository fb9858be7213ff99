#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace crowdrank {

// log(sum_i exp(logits[i])) with the maximum factored out.
inline double log_sum_exp(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("log_sum_exp: no logits");
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - top);
    return top + std::log(sum);
}

// Max-subtracted softmax. Entries are renormalized once so the sum is 1 to
// within a few ulps regardless of how far apart the logits are.
inline std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: no logits");
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - top);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

}  // namespace crowdrank
