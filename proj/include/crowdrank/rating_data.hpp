#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "crowdrank/tensor.hpp"

namespace crowdrank {

/// Number of absolute rating levels (1 to 3 stars).
inline constexpr std::size_t kGlobalLevels = 3;
/// Number of relative rating levels, labels -2..+2.
inline constexpr std::size_t kPairwiseLevels = 5;
/// Largest relative label magnitude, (kPairwiseLevels - 1) / 2.
inline constexpr int kRelativeRadius = 2;

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raw star votes for one item; counts[i] is the number of (i + 1)-star votes.
struct GlobalVotes {
    std::array<int, kGlobalLevels> counts{};
    int total() const;
    friend bool operator==(const GlobalVotes&, const GlobalVotes&) = default;
};

/// Raw relative votes for one pair; counts[k] holds label k - 2, so
/// counts[4] counts "first item much better".
struct PairwiseVotes {
    std::array<int, kPairwiseLevels> counts{};
    int total() const;
    friend bool operator==(const PairwiseVotes&, const PairwiseVotes&) = default;
};

enum class RatingKind { Global, Pairwise };

/// Normalized probability vector over ordered rating buckets together with the
/// numeric value of each bucket ({1,2,3} or {-2,...,2}).
class RatingDistribution {
public:
    /// Validates: entries in [0,1], sum within 1e-12 of 1, length 3 or 5 per kind.
    RatingDistribution(RatingKind kind, std::vector<double> probs);

    static RatingDistribution global(std::vector<double> probs) {
        return RatingDistribution(RatingKind::Global, std::move(probs));
    }
    static RatingDistribution pairwise(std::vector<double> probs) {
        return RatingDistribution(RatingKind::Pairwise, std::move(probs));
    }

    RatingKind kind() const { return kind_; }
    const std::vector<double>& probs() const { return probs_; }
    const std::vector<double>& bucket_values() const { return bucket_values_; }
    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }

    /// Same distribution with the relative buckets mirrored (label k -> -k).
    RatingDistribution reversed() const;

private:
    RatingKind kind_;
    std::vector<double> probs_;
    std::vector<double> bucket_values_;
};

RatingDistribution votes_to_distribution(const GlobalVotes& votes);
RatingDistribution votes_to_distribution(const PairwiseVotes& votes);

/// Expected bucket value.
double mean_rating(const RatingDistribution& dist);

/// Shannon entropy in nats, 0 log 0 taken as 0.
double entropy(const RatingDistribution& dist);

/// Population standard deviation of the individual numeric votes.
double rating_deviation(const GlobalVotes& votes);
double rating_deviation(const PairwiseVotes& votes);

/// Per-item or per-pair (mean, deviation) summary. Binning is left to callers.
struct RatingSummary {
    double mean = 0.0;
    double deviation = 0.0;
};
RatingSummary summarize(const GlobalVotes& votes);
RatingSummary summarize(const PairwiseVotes& votes);

enum class Split { Train, Test };
const char* to_string(Split split);
Split parse_split(const std::string& text);

enum class InputKind { Image, FeatureVector };

/// Model input: a feature vector (stored 1 x 1 x D) or an image tensor.
struct ItemInput {
    InputKind kind = InputKind::FeatureVector;
    Tensor tensor;
    /// Tensor file the image came from, if any. Empty for feature vectors.
    std::string source_path;

    static ItemInput features(std::vector<double> values);
    static ItemInput image(Tensor tensor, std::string source_path = {});
};

struct ItemRecord {
    std::string id;
    ItemInput input;
    GlobalVotes global_votes;
    Split split = Split::Train;
};

struct PairRecord {
    std::string first_id;
    std::string second_id;
    PairwiseVotes votes;
};

/// Items and pairs with an id index. validate() enforces the cross-record
/// invariants: unique ids, pairs referencing existing distinct items of one split.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<ItemRecord> items, std::vector<PairRecord> pairs);

    const std::vector<ItemRecord>& items() const { return items_; }
    const std::vector<PairRecord>& pairs() const { return pairs_; }

    /// Throws DataError naming the offending record.
    void validate() const;

    std::optional<std::size_t> find(const std::string& id) const;
    const ItemRecord& item(const std::string& id) const;

    std::vector<std::size_t> items_in(Split split) const;
    /// Pairs whose members both belong to `split` (call validate() first).
    std::vector<std::size_t> pairs_in(Split split) const;

private:
    std::vector<ItemRecord> items_;
    std::vector<PairRecord> pairs_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Ordinal comparison of two items from the first item's point of view.
enum class AgreementLabel { Better = 0, Equal = 1, Worse = 2 };
const char* to_string(AgreementLabel label);

AgreementLabel agreement_label_global(double ave_first, double ave_second, double c_g);

/// Positive ave_p means the first item is preferred, matching the vote labels.
AgreementLabel agreement_label_pairwise(double ave_p, double c_p);

/// Rows indexed by the global-rating label, columns by the pairwise label.
struct AgreementConfusion {
    std::array<std::array<std::size_t, 3>, 3> counts{};
    /// Row-normalized; unsupported rows are all zero.
    std::array<std::array<double, 3>, 3> matrix{};
    std::array<bool, 3> unsupported{};
    double agreement_rate = 0.0;
    std::size_t pair_count = 0;
};

AgreementConfusion agreement_confusion(const std::vector<PairRecord>& pairs, const Dataset& dataset,
                                       double c_g, double c_p);

}  // namespace crowdrank
