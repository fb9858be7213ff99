#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace crowdrank {

/// Unit-norm appearance features used to pick which items get compared.
class FeatureIndex {
public:
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<std::vector<double>>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }

private:
    friend FeatureIndex l2_normalize(std::vector<std::string> ids,
                                     std::vector<std::vector<double>> vectors);
    std::vector<std::string> ids_;
    std::vector<std::vector<double>> rows_;
};

/// Scales each row to unit Euclidean norm. Throws std::invalid_argument on an
/// all-zero row (naming its id), ragged rows, or fewer than two rows.
FeatureIndex l2_normalize(std::vector<std::string> ids, std::vector<std::vector<double>> vectors);

/// Probability that item j is drawn as the partner of source item i:
/// softmax over j != i of the dot products f_i . f_j. Entry i is 0.
std::vector<double> pair_sampling_probs(std::size_t source, const FeatureIndex& index);

/// Same softmax applied to arbitrary similarity logits, excluding `source`.
std::vector<double> partner_probs_from_logits(std::size_t source, const std::vector<double>& logits);

struct SamplerOptions {
    std::size_t pairs_per_item = 5;
    std::uint64_t seed = 0;
    /// Reject and redraw partners already drawn for the same source.
    bool dedupe = false;
};

/// pairs_per_item independent draws per source item, in source order then draw
/// order. Each source uses its own stream derived from (seed, source), so the
/// list is reproducible and can be produced in parallel.
std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(const FeatureIndex& index,
                                                              const SamplerOptions& options);

}  // namespace crowdrank
