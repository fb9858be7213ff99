#include "crowdrank/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crowdrank {

double mean_cross_entropy(const std::vector<std::vector<double>>& predictions,
                          const std::vector<RatingDistribution>& targets) {
    if (predictions.size() != targets.size()) throw EvaluationError("mean_cross_entropy: list lengths differ");
    if (predictions.empty()) throw EvaluationError("mean_cross_entropy: nothing to average");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) sum += cross_entropy(predictions[i], targets[i]);
    return sum / static_cast<double>(predictions.size());
}

std::unordered_map<std::string, double> score_items(const ScoreNetwork& network, const Dataset& dataset,
                                                    std::optional<Split> split) {
    std::unordered_map<std::string, double> scores;
    for (const auto& item : dataset.items()) {
        if (split && item.split != *split) continue;
        scores.emplace(item.id, network.forward(item.input.tensor));
    }
    return scores;
}

CrossEntropySummary average_cross_entropies(const Model& model, const Dataset& dataset, Split split) {
    const auto item_idx = dataset.items_in(split);
    const auto pair_idx = dataset.pairs_in(split);
    if (item_idx.empty()) throw EvaluationError(std::string("no items in the ") + to_string(split) + " split");
    if (pair_idx.empty()) throw EvaluationError(std::string("no pairs in the ") + to_string(split) + " split");
    const auto scores = score_items(model.network, dataset, split);

    std::vector<std::vector<double>> preds;
    std::vector<RatingDistribution> targets;
    for (std::size_t i : item_idx) {
        const auto& item = dataset.items()[i];
        preds.push_back(global_probs(scores.at(item.id), model.standard.global_anchors));
        targets.push_back(votes_to_distribution(item.global_votes));
    }
    CrossEntropySummary out;
    out.mean_global = mean_cross_entropy(preds, targets);
    out.item_count = item_idx.size();

    preds.clear();
    targets.clear();
    const auto anchors = relative_anchor_vector(model.standard);
    for (std::size_t k : pair_idx) {
        const auto& pair = dataset.pairs()[k];
        preds.push_back(pairwise_probs(scores.at(pair.first_id) - scores.at(pair.second_id), anchors));
        targets.push_back(votes_to_distribution(pair.votes));
    }
    out.mean_relative = mean_cross_entropy(preds, targets);
    out.pair_count = pair_idx.size();
    return out;
}

bool global_binary_label(const GlobalVotes& votes, double p_a) {
    const int total = votes.total();
    if (total < 1) throw DataError("empty votes");
    return static_cast<double>(votes.counts[2]) / total > p_a;
}

std::vector<bool> global_binary_labels(const std::vector<GlobalVotes>& votes, double p_a) {
    std::vector<bool> labels;
    labels.reserve(votes.size());
    for (const auto& v : votes) labels.push_back(global_binary_label(v, p_a));
    return labels;
}

RocCurve roc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw EvaluationError("roc: scores and labels differ in length");
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0)
        throw EvaluationError("roc: labels are single-class (" + std::to_string(positives) + " positive, " +
                              std::to_string(negatives) + " negative)");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == threshold; ++i) (labels[order[i]] ? tp : fp)++;
        curve.points.push_back({threshold, static_cast<double>(fp) / static_cast<double>(negatives),
                                static_cast<double>(tp) / static_cast<double>(positives)});
    }
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        curve.auc += (b.false_positive_rate - a.false_positive_rate) * 0.5 * (a.true_positive_rate + b.true_positive_rate);
    }
    return curve;
}

const char* to_string(PairwiseVerdict verdict) {
    switch (verdict) {
        case PairwiseVerdict::FirstBetter: return "first_better";
        case PairwiseVerdict::Equal: return "equal";
        case PairwiseVerdict::SecondBetter: return "second_better";
    }
    return "?";
}

PairwiseVerdict pairwise_ground_truth(const PairwiseVotes& votes, double p_b) {
    const int total = votes.total();
    if (total < 1) throw DataError("empty votes");
    // One division of the integer margin, so a margin of exactly p_b compares equal.
    const int margin = (votes.counts[3] + votes.counts[4]) - (votes.counts[0] + votes.counts[1]);
    const double share = static_cast<double>(margin) / total;
    if (share > p_b) return PairwiseVerdict::FirstBetter;
    if (-share > p_b) return PairwiseVerdict::SecondBetter;
    return PairwiseVerdict::Equal;
}

const char* to_string(VerdictMode mode) {
    switch (mode) {
        case VerdictMode::ExpectedLabel: return "distribution";
        case VerdictMode::ArgmaxGroup: return "argmax-group";
        case VerdictMode::ScoreThreshold: return "score-threshold";
    }
    return "?";
}

VerdictMode parse_verdict_mode(const std::string& text) {
    if (text == "distribution" || text == "expected-label") return VerdictMode::ExpectedLabel;
    if (text == "argmax-group") return VerdictMode::ArgmaxGroup;
    if (text == "score-threshold") return VerdictMode::ScoreThreshold;
    throw EvaluationError("unknown verdict mode '" + text + "' (expected distribution, argmax-group or score-threshold)");
}

double expected_relative_label(const ScorePair& scores, const StandardScores& standard) {
    const auto p = pairwise_probs(scores.delta(), relative_anchor_vector(standard));
    // Pair terms symmetrically so that a zero gap gives exactly zero.
    return 2.0 * (p[4] - p[0]) + (p[3] - p[1]);
}

double verdict_statistic(const ScorePair& scores, const StandardScores& standard, VerdictMode mode) {
    if (mode == VerdictMode::ScoreThreshold) return std::abs(scores.delta());
    return std::abs(expected_relative_label(scores, standard));
}

PairwiseVerdict pairwise_predict(const ScorePair& scores, const StandardScores& standard, const VerdictRule& rule) {
    switch (rule.mode) {
        case VerdictMode::ScoreThreshold: {
            const double d = scores.delta();
            if (std::abs(d) <= rule.tau) return PairwiseVerdict::Equal;
            return d > 0.0 ? PairwiseVerdict::FirstBetter : PairwiseVerdict::SecondBetter;
        }
        case VerdictMode::ExpectedLabel: {
            const double e = expected_relative_label(scores, standard);
            if (std::abs(e) <= rule.tau) return PairwiseVerdict::Equal;
            return e > 0.0 ? PairwiseVerdict::FirstBetter : PairwiseVerdict::SecondBetter;
        }
        case VerdictMode::ArgmaxGroup: {
            const auto p = pairwise_probs(scores.delta(), relative_anchor_vector(standard));
            const double less = p[0] + p[1];
            const double more = p[3] + p[4];
            if (more > less && more > p[2]) return PairwiseVerdict::FirstBetter;
            if (less > more && less > p[2]) return PairwiseVerdict::SecondBetter;
            return PairwiseVerdict::Equal;
        }
    }
    return PairwiseVerdict::Equal;
}

double verdict_accuracy(const std::vector<PairwiseVerdict>& predicted, const std::vector<PairwiseVerdict>& truth,
                        bool decided_only) {
    if (predicted.size() != truth.size()) throw EvaluationError("verdict_accuracy: list lengths differ");
    std::size_t hits = 0, counted = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (decided_only && truth[i] == PairwiseVerdict::Equal) continue;
        ++counted;
        hits += predicted[i] == truth[i] ? 1 : 0;
    }
    if (counted == 0) throw EvaluationError("verdict_accuracy: no pairs to score");
    return static_cast<double>(hits) / static_cast<double>(counted);
}

namespace {

double percentile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<PairwiseVerdict> predict_all(const std::vector<ScorePair>& scores, const StandardScores& standard,
                                         const VerdictRule& rule) {
    std::vector<PairwiseVerdict> out;
    out.reserve(scores.size());
    for (const auto& s : scores) out.push_back(pairwise_predict(s, standard, rule));
    return out;
}

}  // namespace

double select_tau(const std::vector<ScorePair>& validation_scores, const std::vector<PairwiseVerdict>& validation_truth,
                  const StandardScores& standard, VerdictMode mode, bool decided_only) {
    if (validation_scores.empty()) throw EvaluationError("select_tau: no validation pairs");
    std::vector<double> stats;
    for (const auto& s : validation_scores) stats.push_back(verdict_statistic(s, standard, mode));
    const double top = percentile(stats, 0.95);
    constexpr int kGrid = 50;
    double best_tau = 0.0, best_acc = -1.0;
    for (int g = 0; g < kGrid; ++g) {
        const double tau = top * static_cast<double>(g) / (kGrid - 1);
        const double acc =
            verdict_accuracy(predict_all(validation_scores, standard, {mode, tau}), validation_truth, decided_only);
        if (acc > best_acc) {
            best_acc = acc;
            best_tau = tau;
        }
    }
    return best_tau;
}

std::vector<PairwiseAccuracy> pairwise_accuracy(const std::vector<ScorePair>& scores,
                                                const std::vector<PairwiseVotes>& votes,
                                                const std::vector<ScorePair>& validation_scores,
                                                const std::vector<PairwiseVotes>& validation_votes,
                                                const StandardScores& standard, const PairwiseAccuracyOptions& options) {
    if (scores.empty()) throw EvaluationError("pairwise_accuracy: no pairs");
    if (scores.size() != votes.size()) throw EvaluationError("pairwise_accuracy: scores and votes differ in length");
    if (validation_scores.size() != validation_votes.size())
        throw EvaluationError("pairwise_accuracy: validation scores and votes differ in length");
    const bool tune = options.tune_tau || options.rule.mode == VerdictMode::ScoreThreshold;

    std::vector<PairwiseAccuracy> out;
    for (double p_b : options.p_b_values) {
        std::vector<PairwiseVerdict> truth;
        for (const auto& v : votes) truth.push_back(pairwise_ground_truth(v, p_b));
        VerdictRule rule = options.rule;
        if (tune && options.rule.mode != VerdictMode::ArgmaxGroup) {
            std::vector<PairwiseVerdict> val_truth;
            for (const auto& v : validation_votes) val_truth.push_back(pairwise_ground_truth(v, p_b));
            rule.tau = select_tau(validation_scores, val_truth, standard, rule.mode, options.decided_only);
        }
        PairwiseAccuracy acc;
        acc.p_b = p_b;
        acc.tau = rule.tau;
        acc.accuracy = verdict_accuracy(predict_all(scores, standard, rule), truth, options.decided_only);
        acc.scored_pairs = options.decided_only
                               ? static_cast<std::size_t>(std::count_if(truth.begin(), truth.end(), [](auto v) {
                                     return v != PairwiseVerdict::Equal;
                                 }))
                               : truth.size();
        out.push_back(acc);
    }
    return out;
}

SequenceScores normalize_sequence(std::vector<double> raw) {
    if (raw.empty()) throw EvaluationError("score_sequence: empty sequence");
    SequenceScores out;
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it, hi = *hi_it;
    out.peak_index = static_cast<std::size_t>(std::max_element(raw.begin(), raw.end()) - raw.begin());
    out.normalized.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (hi > lo) {
            // Exact 0 at the minimum and 1 at the maximum.
            out.normalized[i] = raw[i] == hi ? 1.0 : (raw[i] - lo) / (hi - lo);
        } else {
            out.normalized[i] = 0.5;
        }
    }
    out.raw = std::move(raw);
    return out;
}

SequenceScores score_sequence(const std::vector<Tensor>& frames, const ScoreNetwork& network) {
    if (frames.empty()) throw EvaluationError("score_sequence: empty sequence");
    std::vector<double> raw;
    raw.reserve(frames.size());
    for (const auto& f : frames) raw.push_back(network.forward(f));
    return normalize_sequence(std::move(raw));
}

double peak_score_report(const std::vector<AnnotatedClip>& clips, const ScoreNetwork& network) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& clip : clips) {
        if (clip.peaks.empty()) throw EvaluationError("clip '" + clip.id + "' has no annotated peak");
        const auto seq = score_sequence(clip.frames, network);
        for (std::size_t peak : clip.peaks) {
            if (peak >= clip.frames.size())
                throw EvaluationError("clip '" + clip.id + "' peak index " + std::to_string(peak) + " out of range");
            sum += seq.normalized[peak];
            ++count;
        }
    }
    if (count == 0) throw EvaluationError("peak_score_report: no clips");
    return sum / static_cast<double>(count);
}

EvaluationReport evaluate(const Model& model, const Dataset& dataset, const EvaluationOptions& options) {
    dataset.validate();
    EvaluationReport report;
    report.cross_entropy = average_cross_entropies(model, dataset, options.split);
    report.p_a = options.p_a;
    report.mode = options.pairwise.rule.mode;
    report.decided_only = options.pairwise.decided_only;

    const auto scores = score_items(model.network, dataset);
    std::vector<double> item_scores;
    std::vector<GlobalVotes> item_votes;
    for (std::size_t i : dataset.items_in(options.split)) {
        item_scores.push_back(scores.at(dataset.items()[i].id));
        item_votes.push_back(dataset.items()[i].global_votes);
    }
    const auto labels = global_binary_labels(item_votes, options.p_a);
    report.roc = roc(item_scores, labels);

    auto collect = [&](Split split, std::vector<ScorePair>& s, std::vector<PairwiseVotes>& v) {
        for (std::size_t k : dataset.pairs_in(split)) {
            const auto& pair = dataset.pairs()[k];
            s.push_back({scores.at(pair.first_id), scores.at(pair.second_id)});
            v.push_back(pair.votes);
        }
    };
    std::vector<ScorePair> eval_scores, val_scores;
    std::vector<PairwiseVotes> eval_votes, val_votes;
    collect(options.split, eval_scores, eval_votes);
    const Split other = options.split == Split::Test ? Split::Train : Split::Test;
    if (options.split == Split::Test) collect(other, val_scores, val_votes);
    if (val_scores.empty()) {
        val_scores = eval_scores;
        val_votes = eval_votes;
        report.validation_source = to_string(options.split);
    } else {
        report.validation_source = to_string(other);
    }
    report.pairwise =
        pairwise_accuracy(eval_scores, eval_votes, val_scores, val_votes, model.standard, options.pairwise);
    return report;
}

}  // namespace crowdrank
