#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "crowdrank/hybrid_loss.hpp"
#include "crowdrank/rating_data.hpp"
#include "crowdrank/trainer.hpp"

namespace crowdrank {

class EvaluationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Distribution matching
// ---------------------------------------------------------------------------

struct CrossEntropySummary {
    double mean_global = 0.0;    ///< per-item global cross entropy, averaged over items
    double mean_relative = 0.0;  ///< per-pair relative cross entropy, averaged over pairs
    std::size_t item_count = 0;
    std::size_t pair_count = 0;
};

/// Mean of -sum target log pred over matched lists.
double mean_cross_entropy(const std::vector<std::vector<double>>& predictions,
                          const std::vector<RatingDistribution>& targets);

/// Scores every item of `split` once, then averages the global cross entropy over
/// those items and the relative cross entropy over the split's pairs.
CrossEntropySummary average_cross_entropies(const Model& model, const Dataset& dataset, Split split);

// ---------------------------------------------------------------------------
// Global metric
// ---------------------------------------------------------------------------

/// True iff the share of 3-star votes is strictly greater than p_a.
bool global_binary_label(const GlobalVotes& votes, double p_a);
std::vector<bool> global_binary_labels(const std::vector<GlobalVotes>& votes, double p_a);

struct RocPoint {
    double threshold = 0.0;  ///< items scoring >= threshold are called positive
    double false_positive_rate = 0.0;
    double true_positive_rate = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  ///< from (0,0) at threshold +inf to (1,1)
    double auc = 0.0;
};

/// ROC over all distinct score thresholds; tied scores form one step. AUC by
/// trapezoid rule. Throws EvaluationError unless both classes are present.
RocCurve roc(const std::vector<double>& scores, const std::vector<bool>& labels);

// ---------------------------------------------------------------------------
// Pairwise metric
// ---------------------------------------------------------------------------

enum class PairwiseVerdict { FirstBetter, Equal, SecondBetter };
const char* to_string(PairwiseVerdict verdict);

/// FirstBetter if p_more - p_less > p_b, SecondBetter if p_less - p_more > p_b.
PairwiseVerdict pairwise_ground_truth(const PairwiseVotes& votes, double p_b);

enum class VerdictMode {
    /// Sign of the expected relative label under the predicted distribution,
    /// Equal when |E| <= tau.
    ExpectedLabel,
    /// Group the five predicted buckets into {-2,-1}, {0}, {+1,+2} and take the
    /// heaviest group (ties resolve to Equal).
    ArgmaxGroup,
    /// Score-only rule: Equal when |s1 - s2| <= tau, else the sign of s1 - s2.
    ScoreThreshold,
};
const char* to_string(VerdictMode mode);
VerdictMode parse_verdict_mode(const std::string& text);

struct VerdictRule {
    VerdictMode mode = VerdictMode::ExpectedLabel;
    double tau = 0.0;
};

/// Expected relative label sum_k k * p_k for the score pair.
double expected_relative_label(const ScorePair& scores, const StandardScores& standard);

PairwiseVerdict pairwise_predict(const ScorePair& scores, const StandardScores& standard, const VerdictRule& rule);

/// Quantity the rule thresholds: |E| for ExpectedLabel, |s1 - s2| for ScoreThreshold.
double verdict_statistic(const ScorePair& scores, const StandardScores& standard, VerdictMode mode);

/// Fraction of matching verdicts. With decided_only, pairs whose ground truth is
/// Equal are excluded. Throws EvaluationError when nothing is left to score.
double verdict_accuracy(const std::vector<PairwiseVerdict>& predicted, const std::vector<PairwiseVerdict>& truth,
                        bool decided_only = false);

/// Best tau for `mode` over 50 evenly spaced values from 0 to the 95th
/// percentile of the mode's statistic on the validation pairs. Ties go to the
/// smallest tau.
double select_tau(const std::vector<ScorePair>& validation_scores, const std::vector<PairwiseVerdict>& validation_truth,
                  const StandardScores& standard, VerdictMode mode, bool decided_only = false);

struct PairwiseAccuracyOptions {
    std::vector<double> p_b_values{0.3, 0.4, 0.5, 0.6};
    VerdictRule rule;
    /// Grid-search tau per p_b on the validation pairs. Always on for ScoreThreshold.
    bool tune_tau = false;
    bool decided_only = false;
};

struct PairwiseAccuracy {
    double p_b = 0.0;
    double tau = 0.0;
    double accuracy = 0.0;
    std::size_t scored_pairs = 0;
};

/// Accuracy per p_b on `pairs`, with tau tuned on `validation` where requested.
std::vector<PairwiseAccuracy> pairwise_accuracy(const std::vector<ScorePair>& scores,
                                                const std::vector<PairwiseVotes>& votes,
                                                const std::vector<ScorePair>& validation_scores,
                                                const std::vector<PairwiseVotes>& validation_votes,
                                                const StandardScores& standard, const PairwiseAccuracyOptions& options);

// ---------------------------------------------------------------------------
// Sequences
// ---------------------------------------------------------------------------

struct SequenceScores {
    std::vector<double> raw;
    std::vector<double> normalized;  ///< min-max to [0,1]; all 0.5 for a constant clip
    std::size_t peak_index = 0;      ///< argmax of raw, lowest index on ties
};

SequenceScores normalize_sequence(std::vector<double> raw);
SequenceScores score_sequence(const std::vector<Tensor>& frames, const ScoreNetwork& network);

struct AnnotatedClip {
    std::string id;
    std::vector<Tensor> frames;
    std::vector<std::size_t> peaks;
};

/// Mean normalized score at the annotated peak frames, over all clips.
double peak_score_report(const std::vector<AnnotatedClip>& clips, const ScoreNetwork& network);

// ---------------------------------------------------------------------------
// Full report
// ---------------------------------------------------------------------------

/// Scores for every item of the dataset keyed by id.
std::unordered_map<std::string, double> score_items(const ScoreNetwork& network, const Dataset& dataset,
                                                    std::optional<Split> split = std::nullopt);

struct EvaluationOptions {
    Split split = Split::Test;
    double p_a = 0.2;
    PairwiseAccuracyOptions pairwise;
};

struct EvaluationReport {
    CrossEntropySummary cross_entropy;
    double p_a = 0.0;
    RocCurve roc;
    std::vector<PairwiseAccuracy> pairwise;
    VerdictMode mode = VerdictMode::ExpectedLabel;
    bool decided_only = false;
    /// Where tau was tuned: "train" pairs, or the evaluated pairs when no train pairs exist.
    std::string validation_source;
};

/// Cross entropies, ROC at p_a and pairwise accuracies on `options.split`. Tau
/// tuning uses the train-split pairs as validation when evaluating the test split.
EvaluationReport evaluate(const Model& model, const Dataset& dataset, const EvaluationOptions& options);

}  // namespace crowdrank
