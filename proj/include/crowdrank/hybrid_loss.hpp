#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "crowdrank/rating_data.hpp"

namespace crowdrank {

/// Learnable anchors that turn a score (or a score gap) into rating-bucket
/// probabilities through a Gaussian-kernel softmax.
///
/// The relative anchors are stored as two log gaps (a, b):
///   d1 = exp(a), d2 = exp(a) + exp(b), anchors = (-d2, -d1, 0, d1, d2)
/// so the ordering 0 < d1 < d2 holds for every parameter value and no
/// projection step is needed after an update.
struct StandardScores {
    std::vector<double> global_anchors{1.0, 2.0, 3.0};
    std::array<double, 2> relative_log_gaps{0.0, 0.0};

    /// Anchors at the bucket values: (1,2,3) and (-2,-1,0,1,2).
    static StandardScores initial() { return {}; }
};

struct ScorePair {
    double first = 0.0;
    double second = 0.0;
    double delta() const { return first - second; }
};

/// Relative anchors ordered by label -2..+2.
std::array<double, kPairwiseLevels> relative_anchor_vector(const StandardScores& standard);

/// p_i proportional to exp(-(s - anchors[i])^2).
std::vector<double> global_probs(double score, std::span<const double> anchors);

/// p_k proportional to exp(-(delta - anchors[k])^2), k ordered -R..R.
std::vector<double> pairwise_probs(double delta, std::span<const double> anchors);

/// -sum_i target_i log pred_i. Throws DataError on length mismatch or a
/// non-positive predicted entry carrying target mass.
double cross_entropy(std::span<const double> pred, const RatingDistribution& target);

/// Cross entropy of softmax(logits) against target, evaluated as
/// logsumexp(z) - sum_i target_i z_i so far-off logits never hit log(0).
double cross_entropy_from_logits(std::span<const double> logits, std::span<const double> target);

struct AdaptiveWeight {
    double raw = 0.0;        ///< squared L2 distance of the two global distributions, in [0, 2]
    double effective = 0.0;  ///< min(raw, 1), the weight actually applied
};

AdaptiveWeight adaptive_weight(const RatingDistribution& first, const RatingDistribution& second);

/// Which supervision terms a training run uses. Hybrid mixes both per pair
/// with the adaptive weight; the single-source variants fix the weight at 1
/// (global only) or 0 (pairwise only).
enum class Supervision { Hybrid, GlobalOnly, PairwiseOnly };
const char* to_string(Supervision supervision);
Supervision parse_supervision(const std::string& text);

struct LossGradients {
    double d_first = 0.0;
    double d_second = 0.0;
    std::vector<double> d_global_anchors;
    std::array<double, 2> d_relative_log_gaps{0.0, 0.0};
};

struct LossBundle {
    double total = 0.0;
    double global_first = 0.0;   ///< cross entropy of the first item's global ratings
    double global_second = 0.0;  ///< cross entropy of the second item's global ratings
    double relative = 0.0;       ///< cross entropy of the pair's relative ratings
    double lambda_raw = 0.0;
    double lambda = 0.0;  ///< weight used in the total
    LossGradients grads;
};

/// Per-pair loss lambda * (Lg1 + Lg2) + (1 - lambda) * Lr with analytic
/// gradients. Lambda depends only on crowd data and carries no gradient.
LossBundle hybrid_loss(const ScorePair& scores, const RatingDistribution& global_first,
                       const RatingDistribution& global_second, const RatingDistribution& relative,
                       const StandardScores& standard, Supervision supervision = Supervision::Hybrid);

/// Gradient part of hybrid_loss.
LossGradients hybrid_loss_backward(const ScorePair& scores, const RatingDistribution& global_first,
                                   const RatingDistribution& global_second, const RatingDistribution& relative,
                                   const StandardScores& standard, Supervision supervision = Supervision::Hybrid);

}  // namespace crowdrank
