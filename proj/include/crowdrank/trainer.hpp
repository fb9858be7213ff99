#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "crowdrank/hybrid_loss.hpp"
#include "crowdrank/rating_data.hpp"
#include "crowdrank/score_net.hpp"

namespace crowdrank {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two-stage SGD schedule. Stage 1 trains with the backbone frozen at base_lr;
/// stage 2 trains everything with lr = base_lr * decay_factor^floor(epoch / decay_every).
struct TrainConfig {
    int stage1_epochs = 2;
    int stage2_epochs = 6;
    double base_lr = 1e-6;
    double decay_factor = 0.1;
    int decay_every = 2;
    int batch_size = 16;
    std::uint64_t seed = 0;
    Supervision supervision = Supervision::Hybrid;
    /// Worker threads for per-pair gradients. Results are bitwise identical
    /// for any value because per-pair gradients are reduced in pair order.
    int threads = 1;

    void validate() const;
};

double lr_at(int stage, int epoch_in_stage, const TrainConfig& config);

struct EpochRecord {
    int stage = 1;
    int epoch_in_stage = 0;
    double learning_rate = 0.0;
    double mean_total = 0.0;
    double mean_global = 0.0;  ///< mean of (Lg1 + Lg2) / 2
    double mean_relative = 0.0;
    double mean_lambda = 0.0;
};

/// Network plus standard scores, everything needed to score and evaluate.
struct Model {
    ScoreNetwork network;
    StandardScores standard;
};

/// Fresh model: seeded network weights, initial anchors, and the final bias set
/// to the mean global anchor so untrained scores sit mid-scale.
Model initial_model(const NetworkPlan& plan, std::uint64_t seed);

/// Mean per-pair losses over the pairs of one split at fixed parameters.
struct PairLossSummary {
    double total = 0.0;
    double global = 0.0;  ///< mean of (Lg1 + Lg2) / 2
    double relative = 0.0;
    double lambda = 0.0;
    std::size_t pairs = 0;
};
PairLossSummary mean_pair_loss(const Model& model, const Dataset& dataset, Split split,
                               Supervision supervision = Supervision::Hybrid);

struct TrainResult {
    Model model;
    std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&, const Model&)>;

/// Trains on the pairs whose members are both in the train split.
/// Throws DataError before any update if a pair references a missing item, crosses
/// the split, or an item input does not fit the plan; throws TrainingError on a
/// non-finite loss, naming the pair.
TrainResult train(const Dataset& dataset, Model initial, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace crowdrank
