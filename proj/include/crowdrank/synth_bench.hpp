#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "crowdrank/evaluator.hpp"
#include "crowdrank/hybrid_loss.hpp"
#include "crowdrank/rating_data.hpp"
#include "crowdrank/trainer.hpp"

namespace crowdrank {

/// Synthetic crowd: latent attractiveness per item, noisy raters that bucket
/// latent (+ noise) by cut points, and inputs that are an affine function of
/// the latent plus isotropic noise.
struct SynthConfig {
    int n_items = 500;
    InputKind input_kind = InputKind::FeatureVector;
    /// Feature length, or image height x width x channels.
    Shape input_shape{1, 1, 16};
    double latent_min = 0.0;
    double latent_max = 1.0;
    double rater_noise_sigma = 0.1;
    /// Standard deviation of the isotropic noise added to every input entry.
    double input_noise_sigma = 0.05;
    int raters_global = 10;
    int raters_pairwise = 5;
    std::array<double, 2> global_cut_points{0.35, 0.7};
    std::array<double, 4> pairwise_cut_points{-0.35, -0.1, 0.1, 0.35};
    double test_fraction = 0.2;
    int pairs_per_item = 5;
    int n_clips = 20;
    int frames_per_clip = 12;
    std::uint64_t seed = 7;

    void validate() const;
};

/// input = offset + latent * direction + noise, entrywise. Image inputs are
/// clamped to [0,1] after the noise is added.
struct LatentEmbedding {
    std::vector<double> offset;
    std::vector<double> direction;
};

struct SynthClip {
    std::string id;
    std::vector<ItemInput> frames;
    std::vector<double> latents;
    std::size_t peak = 0;  ///< frame with the highest latent
};

struct SynthDataset {
    Dataset dataset;
    std::vector<double> latents;  ///< parallel to dataset.items()
    LatentEmbedding embedding;
    std::vector<SynthClip> clips;
};

SynthDataset generate(const SynthConfig& config);

/// Network plan matching the generated inputs: default_features or default_image.
NetworkPlan benchmark_plan(const SynthConfig& config);

/// Schedule used for the synthetic benchmark. Same two-stage shape as the
/// defaults, but base_lr 1e-2: the small from-scratch network does not move
/// at 1e-6 within eight epochs.
TrainConfig benchmark_train_config();

/// Bucket index of `value` under increasing cut points (value == cut goes up).
template <std::size_t N>
std::size_t bucket_of(double value, const std::array<double, N>& cuts) {
    std::size_t b = 0;
    while (b < N && value >= cuts[b]) ++b;
    return b;
}

/// Exact probability of each rater bucket for value = mean + N(0, sigma^2).
template <std::size_t N>
std::array<double, N + 1> bucket_probabilities(double mean, double sigma, const std::array<double, N>& cuts) {
    std::array<double, N + 1> probs{};
    if (sigma == 0.0) {
        probs[bucket_of(mean, cuts)] = 1.0;
        return probs;
    }
    // P(value < c) = Phi((c - mean) / sigma)
    auto below = [&](double c) { return 0.5 * std::erfc(-(c - mean) / (sigma * std::sqrt(2.0))); };
    double prev = 0.0;
    for (std::size_t b = 0; b < N; ++b) {
        const double cdf = below(cuts[b]);
        probs[b] = cdf - prev;
        prev = cdf;
    }
    probs[N] = 1.0 - prev;
    return probs;
}

/// Per-pair loss recomputed term by term from its definition, sharing no code
/// with hybrid_loss. Used as the independent oracle for the loss head.
double brute_force_loss(double s1, double s2, const std::vector<double>& global_first,
                        const std::vector<double>& global_second, const std::vector<double>& relative,
                        const StandardScores& standard);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Spearman correlation between model scores and latents on the test split.
double rank_recovery_report(const ScoreNetwork& network, const SynthDataset& data);

std::vector<AnnotatedClip> annotated_clips(const SynthDataset& data);

}  // namespace crowdrank
