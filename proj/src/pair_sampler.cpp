#include "crowdrank/pair_sampler.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "crowdrank/numeric.hpp"
#include "crowdrank/rng.hpp"

namespace crowdrank {

FeatureIndex l2_normalize(std::vector<std::string> ids, std::vector<std::vector<double>> vectors) {
    if (ids.size() != vectors.size()) throw std::invalid_argument("l2_normalize: ids and vectors differ in length");
    if (vectors.size() < 2) throw std::invalid_argument("l2_normalize: need at least two feature rows");
    const std::size_t dim = vectors.front().size();
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        auto& row = vectors[i];
        if (row.size() != dim || dim == 0)
            throw std::invalid_argument("l2_normalize: feature '" + ids[i] + "' has dimension " +
                                        std::to_string(row.size()) + ", expected " + std::to_string(dim));
        double norm_sq = 0.0;
        for (double v : row) {
            if (!std::isfinite(v)) throw std::invalid_argument("l2_normalize: feature '" + ids[i] + "' is not finite");
            norm_sq += v * v;
        }
        if (norm_sq == 0.0) throw std::invalid_argument("l2_normalize: feature '" + ids[i] + "' is all zero");
        const double norm = std::sqrt(norm_sq);
        for (double& v : row) v /= norm;
    }
    FeatureIndex index;
    index.ids_ = std::move(ids);
    index.rows_ = std::move(vectors);
    return index;
}

std::vector<double> partner_probs_from_logits(std::size_t source, const std::vector<double>& logits) {
    if (source >= logits.size()) throw std::out_of_range("pair sampler: source index out of range");
    if (logits.size() < 2) throw std::invalid_argument("pair sampler: need at least two items");
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < logits.size(); ++j)
        if (j != source && logits[j] > top) top = logits[j];
    std::vector<double> probs(logits.size(), 0.0);
    double sum = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        if (j == source) continue;
        probs[j] = std::exp(logits[j] - top);
        sum += probs[j];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

std::vector<double> pair_sampling_probs(std::size_t source, const FeatureIndex& index) {
    if (source >= index.size()) throw std::out_of_range("pair_sampling_probs: source index out of range");
    const auto& rows = index.rows();
    const auto& f = rows[source];
    std::vector<double> logits(rows.size(), 0.0);
    for (std::size_t j = 0; j < rows.size(); ++j) {
        double dot = 0.0;
        for (std::size_t d = 0; d < f.size(); ++d) dot += f[d] * rows[j][d];
        logits[j] = dot;
    }
    return partner_probs_from_logits(source, logits);
}

std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(const FeatureIndex& index,
                                                              const SamplerOptions& options) {
    if (options.pairs_per_item < 1) throw std::invalid_argument("sample_pairs: pairs_per_item must be >= 1");
    const std::size_t n = index.size();
    if (n < 2) throw std::invalid_argument("sample_pairs: need at least two items");
    if (options.dedupe && options.pairs_per_item > n - 1)
        throw std::invalid_argument("sample_pairs: cannot draw " + std::to_string(options.pairs_per_item) +
                                    " distinct partners from " + std::to_string(n - 1) + " items");

    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(n * options.pairs_per_item);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> probs = pair_sampling_probs(i, index);
        Rng rng(Rng::derive_seed(options.seed, i));
        for (std::size_t k = 0; k < options.pairs_per_item; ++k) {
            const std::size_t j = rng.categorical(probs);
            out.emplace_back(i, j);
            if (options.dedupe) probs[j] = 0.0;  // categorical() renormalizes
        }
    }
    return out;
}

}  // namespace crowdrank
