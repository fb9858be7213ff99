#include "crowdrank/hybrid_loss.hpp"

#include <cmath>
#include <string>

#include "crowdrank/numeric.hpp"

namespace crowdrank {

namespace {

// Logits -(x - a_i)^2 shifted so the nearest anchor has logit exactly 0.
// The shift is folded in algebraically, (x - a_m)^2 - (x - a_i)^2 =
// (a_i - a_m)(2x - a_i - a_m), which stays accurate for |x| ~ 1e6 where the
// raw squares would be ~1e12 and lose every low-order digit.
std::vector<double> kernel_logits(double x, std::span<const double> anchors) {
    if (anchors.empty()) throw std::invalid_argument("kernel_logits: no anchors");
    std::size_t nearest = 0;
    for (std::size_t i = 1; i < anchors.size(); ++i)
        if (std::abs(x - anchors[i]) < std::abs(x - anchors[nearest])) nearest = i;
    const double am = anchors[nearest];
    std::vector<double> z(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i)
        z[i] = i == nearest ? 0.0 : (anchors[i] - am) * (2.0 * x - anchors[i] - am);
    return z;
}

struct KernelTerm {
    double loss = 0.0;
    std::vector<double> probs;
};

KernelTerm kernel_cross_entropy(double x, std::span<const double> anchors, std::span<const double> target) {
    const auto z = kernel_logits(x, anchors);
    return {cross_entropy_from_logits(z, target), softmax(z)};
}

// d loss / d logit_i = p_i - target_i; d logit_i / dx = -2 (x - a_i).
double d_position(double x, std::span<const double> anchors, const std::vector<double>& probs,
                  std::span<const double> target) {
    double g = 0.0;
    for (std::size_t i = 0; i < anchors.size(); ++i) g += (probs[i] - target[i]) * (-2.0) * (x - anchors[i]);
    return g;
}

double d_anchor(double x, double anchor, double prob, double target) {
    return (prob - target) * 2.0 * (x - anchor);
}

void check_inputs(const RatingDistribution& g1, const RatingDistribution& g2, const RatingDistribution& r,
                  const StandardScores& standard) {
    if (g1.size() != kGlobalLevels || g2.size() != kGlobalLevels)
        throw DataError("hybrid_loss: global distributions need " + std::to_string(kGlobalLevels) + " buckets");
    if (r.size() != kPairwiseLevels)
        throw DataError("hybrid_loss: relative distribution needs " + std::to_string(kPairwiseLevels) + " buckets");
    if (standard.global_anchors.size() != kGlobalLevels)
        throw DataError("hybrid_loss: expected " + std::to_string(kGlobalLevels) + " global anchors");
}

}  // namespace

std::array<double, kPairwiseLevels> relative_anchor_vector(const StandardScores& standard) {
    const double d1 = std::exp(standard.relative_log_gaps[0]);
    const double d2 = d1 + std::exp(standard.relative_log_gaps[1]);
    return {-d2, -d1, 0.0, d1, d2};
}

std::vector<double> global_probs(double score, std::span<const double> anchors) {
    return softmax(kernel_logits(score, anchors));
}

std::vector<double> pairwise_probs(double delta, std::span<const double> anchors) {
    return softmax(kernel_logits(delta, anchors));
}

double cross_entropy_from_logits(std::span<const double> logits, std::span<const double> target) {
    if (logits.size() != target.size())
        throw DataError("cross entropy: prediction has " + std::to_string(logits.size()) +
                        " buckets, target has " + std::to_string(target.size()));
    double dot = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i)
        if (target[i] != 0.0) dot += target[i] * logits[i];
    return log_sum_exp(logits) - dot;
}

double cross_entropy(std::span<const double> pred, const RatingDistribution& target) {
    if (pred.size() != target.size())
        throw DataError("cross entropy: prediction has " + std::to_string(pred.size()) +
                        " buckets, target has " + std::to_string(target.size()));
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (target[i] == 0.0) continue;
        if (!(pred[i] > 0.0)) throw DataError("cross entropy: zero predicted probability under target mass");
        loss -= target[i] * std::log(pred[i]);
    }
    return loss;
}

AdaptiveWeight adaptive_weight(const RatingDistribution& first, const RatingDistribution& second) {
    if (first.size() != second.size()) throw DataError("adaptive_weight: distributions differ in length");
    double raw = 0.0;
    for (std::size_t i = 0; i < first.size(); ++i) {
        const double d = first[i] - second[i];
        raw += d * d;
    }
    return {raw, std::min(raw, 1.0)};
}

const char* to_string(Supervision supervision) {
    switch (supervision) {
        case Supervision::Hybrid: return "hybrid";
        case Supervision::GlobalOnly: return "global";
        case Supervision::PairwiseOnly: return "pairwise";
    }
    return "?";
}

Supervision parse_supervision(const std::string& text) {
    if (text == "hybrid") return Supervision::Hybrid;
    if (text == "global") return Supervision::GlobalOnly;
    if (text == "pairwise") return Supervision::PairwiseOnly;
    throw DataError("unknown supervision '" + text + "' (expected hybrid, global or pairwise)");
}

LossBundle hybrid_loss(const ScorePair& scores, const RatingDistribution& global_first,
                       const RatingDistribution& global_second, const RatingDistribution& relative,
                       const StandardScores& standard, Supervision supervision) {
    check_inputs(global_first, global_second, relative, standard);
    const std::span<const double> g_anchors(standard.global_anchors);
    const auto r_anchors = relative_anchor_vector(standard);
    const double s1 = scores.first;
    const double s2 = scores.second;
    const double ds = scores.delta();

    const auto t1 = kernel_cross_entropy(s1, g_anchors, global_first.probs());
    const auto t2 = kernel_cross_entropy(s2, g_anchors, global_second.probs());
    const auto tr = kernel_cross_entropy(ds, r_anchors, relative.probs());

    LossBundle out;
    out.global_first = t1.loss;
    out.global_second = t2.loss;
    out.relative = tr.loss;
    const auto weight = adaptive_weight(global_first, global_second);
    out.lambda_raw = weight.raw;
    switch (supervision) {
        case Supervision::Hybrid: out.lambda = weight.effective; break;
        case Supervision::GlobalOnly: out.lambda = 1.0; break;
        case Supervision::PairwiseOnly: out.lambda = 0.0; break;
    }
    const double wg = out.lambda;
    const double wr = 1.0 - out.lambda;
    out.total = wg * (out.global_first + out.global_second) + wr * out.relative;

    auto& g = out.grads;
    const double d_delta = d_position(ds, r_anchors, tr.probs, relative.probs());
    g.d_first = wg * d_position(s1, g_anchors, t1.probs, global_first.probs()) + wr * d_delta;
    g.d_second = wg * d_position(s2, g_anchors, t2.probs, global_second.probs()) - wr * d_delta;

    g.d_global_anchors.assign(kGlobalLevels, 0.0);
    for (std::size_t i = 0; i < kGlobalLevels; ++i) {
        g.d_global_anchors[i] = wg * (d_anchor(s1, g_anchors[i], t1.probs[i], global_first[i]) +
                                      d_anchor(s2, g_anchors[i], t2.probs[i], global_second[i]));
    }

    std::array<double, kPairwiseLevels> d_r{};
    for (std::size_t k = 0; k < kPairwiseLevels; ++k)
        d_r[k] = wr * d_anchor(ds, r_anchors[k], tr.probs[k], relative[k]);
    // anchors (-d2, -d1, 0, d1, d2); d1 = e^a, d2 = e^a + e^b
    const double d_d1 = d_r[3] - d_r[1];
    const double d_d2 = d_r[4] - d_r[0];
    const double ea = std::exp(standard.relative_log_gaps[0]);
    const double eb = std::exp(standard.relative_log_gaps[1]);
    g.d_relative_log_gaps = {ea * (d_d1 + d_d2), eb * d_d2};
    return out;
}

LossGradients hybrid_loss_backward(const ScorePair& scores, const RatingDistribution& global_first,
                                   const RatingDistribution& global_second, const RatingDistribution& relative,
                                   const StandardScores& standard, Supervision supervision) {
    return hybrid_loss(scores, global_first, global_second, relative, standard, supervision).grads;
}

}  // namespace crowdrank
