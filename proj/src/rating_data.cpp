#include "crowdrank/rating_data.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace crowdrank {

namespace {

template <std::size_t N>
int checked_total(const std::array<int, N>& counts) {
    int total = 0;
    for (int c : counts) {
        if (c < 0) throw DataError("negative vote count");
        total += c;
    }
    return total;
}

std::vector<double> bucket_values_for(RatingKind kind) {
    if (kind == RatingKind::Global) return {1.0, 2.0, 3.0};
    return {-2.0, -1.0, 0.0, 1.0, 2.0};
}

template <std::size_t N>
std::vector<double> normalize_counts(const std::array<int, N>& counts) {
    const int total = checked_total(counts);
    if (total < 1) throw DataError("empty votes");
    std::vector<double> probs(N);
    for (std::size_t i = 0; i < N; ++i) probs[i] = static_cast<double>(counts[i]) / total;
    return probs;
}

template <std::size_t N>
double vote_deviation(const std::array<int, N>& counts, const std::vector<double>& values) {
    const int total = checked_total(counts);
    if (total < 1) throw DataError("empty votes");
    double mean = 0.0;
    for (std::size_t i = 0; i < N; ++i) mean += counts[i] * values[i];
    mean /= total;
    double var = 0.0;
    for (std::size_t i = 0; i < N; ++i) var += counts[i] * (values[i] - mean) * (values[i] - mean);
    return std::sqrt(var / total);
}

}  // namespace

int GlobalVotes::total() const { return checked_total(counts); }
int PairwiseVotes::total() const { return checked_total(counts); }

RatingDistribution::RatingDistribution(RatingKind kind, std::vector<double> probs)
    : kind_(kind), probs_(std::move(probs)), bucket_values_(bucket_values_for(kind)) {
    if (probs_.size() != bucket_values_.size()) {
        std::ostringstream msg;
        msg << "rating distribution needs " << bucket_values_.size() << " buckets, got "
            << probs_.size();
        throw DataError(msg.str());
    }
    double sum = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("rating probability outside [0,1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw DataError("rating probabilities do not sum to 1");
}

RatingDistribution RatingDistribution::reversed() const {
    std::vector<double> flipped(probs_.rbegin(), probs_.rend());
    return RatingDistribution(kind_, std::move(flipped));
}

RatingDistribution votes_to_distribution(const GlobalVotes& votes) {
    return RatingDistribution::global(normalize_counts(votes.counts));
}

RatingDistribution votes_to_distribution(const PairwiseVotes& votes) {
    return RatingDistribution::pairwise(normalize_counts(votes.counts));
}

double mean_rating(const RatingDistribution& dist) {
    const auto& p = dist.probs();
    const auto& v = dist.bucket_values();
    return std::inner_product(p.begin(), p.end(), v.begin(), 0.0);
}

double entropy(const RatingDistribution& dist) {
    double h = 0.0;
    for (double p : dist.probs())
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

double rating_deviation(const GlobalVotes& votes) {
    return vote_deviation(votes.counts, bucket_values_for(RatingKind::Global));
}

double rating_deviation(const PairwiseVotes& votes) {
    return vote_deviation(votes.counts, bucket_values_for(RatingKind::Pairwise));
}

RatingSummary summarize(const GlobalVotes& votes) {
    return {mean_rating(votes_to_distribution(votes)), rating_deviation(votes)};
}

RatingSummary summarize(const PairwiseVotes& votes) {
    return {mean_rating(votes_to_distribution(votes)), rating_deviation(votes)};
}

const char* to_string(Split split) { return split == Split::Train ? "train" : "test"; }

Split parse_split(const std::string& text) {
    if (text == "train") return Split::Train;
    if (text == "test") return Split::Test;
    throw DataError("unknown split '" + text + "' (expected train or test)");
}

ItemInput ItemInput::features(std::vector<double> values) {
    ItemInput in;
    in.kind = InputKind::FeatureVector;
    in.tensor = Tensor::vector(std::move(values));
    return in;
}

ItemInput ItemInput::image(Tensor tensor, std::string source_path) {
    ItemInput in;
    in.kind = InputKind::Image;
    in.tensor = std::move(tensor);
    in.source_path = std::move(source_path);
    return in;
}

Dataset::Dataset(std::vector<ItemRecord> items, std::vector<PairRecord> pairs)
    : items_(std::move(items)), pairs_(std::move(pairs)) {
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (!index_.emplace(items_[i].id, i).second)
            throw DataError("duplicate item id '" + items_[i].id + "'");
    }
}

void Dataset::validate() const {
    for (const auto& item : items_) {
        if (item.global_votes.total() < 1)
            throw DataError("item '" + item.id + "' has no global votes");
    }
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
        const auto& pair = pairs_[k];
        const std::string name =
            "pair " + std::to_string(k) + " (" + pair.first_id + ", " + pair.second_id + ")";
        if (pair.first_id == pair.second_id) throw DataError(name + " compares an item with itself");
        auto a = find(pair.first_id);
        auto b = find(pair.second_id);
        if (!a) throw DataError(name + " references missing item '" + pair.first_id + "'");
        if (!b) throw DataError(name + " references missing item '" + pair.second_id + "'");
        if (items_[*a].split != items_[*b].split) throw DataError(name + " crosses the train/test split");
        if (pair.votes.total() < 1) throw DataError(name + " has no votes");
    }
}

std::optional<std::size_t> Dataset::find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const ItemRecord& Dataset::item(const std::string& id) const {
    auto idx = find(id);
    if (!idx) throw DataError("unknown item id '" + id + "'");
    return items_[*idx];
}

std::vector<std::size_t> Dataset::items_in(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items_.size(); ++i)
        if (items_[i].split == split) out.push_back(i);
    return out;
}

std::vector<std::size_t> Dataset::pairs_in(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < pairs_.size(); ++k)
        if (item(pairs_[k].first_id).split == split && item(pairs_[k].second_id).split == split)
            out.push_back(k);
    return out;
}

const char* to_string(AgreementLabel label) {
    switch (label) {
        case AgreementLabel::Better: return "better";
        case AgreementLabel::Equal: return "equal";
        case AgreementLabel::Worse: return "worse";
    }
    return "?";
}

AgreementLabel agreement_label_global(double ave_first, double ave_second, double c_g) {
    if (std::abs(ave_first - ave_second) <= c_g) return AgreementLabel::Equal;
    return ave_first > ave_second ? AgreementLabel::Better : AgreementLabel::Worse;
}

AgreementLabel agreement_label_pairwise(double ave_p, double c_p) {
    if (std::abs(ave_p) <= c_p) return AgreementLabel::Equal;
    return ave_p > 0.0 ? AgreementLabel::Better : AgreementLabel::Worse;
}

AgreementConfusion agreement_confusion(const std::vector<PairRecord>& pairs, const Dataset& dataset,
                                       double c_g, double c_p) {
    if (pairs.empty()) throw DataError("agreement_confusion: no pairs");
    AgreementConfusion out;
    for (const auto& pair : pairs) {
        const double g1 = mean_rating(votes_to_distribution(dataset.item(pair.first_id).global_votes));
        const double g2 = mean_rating(votes_to_distribution(dataset.item(pair.second_id).global_votes));
        const double p = mean_rating(votes_to_distribution(pair.votes));
        const auto row = static_cast<std::size_t>(agreement_label_global(g1, g2, c_g));
        const auto col = static_cast<std::size_t>(agreement_label_pairwise(p, c_p));
        ++out.counts[row][col];
    }
    std::size_t diagonal = 0;
    for (std::size_t r = 0; r < 3; ++r) {
        const std::size_t support = out.counts[r][0] + out.counts[r][1] + out.counts[r][2];
        out.unsupported[r] = support == 0;
        for (std::size_t c = 0; c < 3; ++c)
            out.matrix[r][c] = support == 0 ? 0.0 : static_cast<double>(out.counts[r][c]) / support;
        diagonal += out.counts[r][r];
    }
    out.pair_count = pairs.size();
    out.agreement_rate = static_cast<double>(diagonal) / static_cast<double>(pairs.size());
    return out;
}

}  // namespace crowdrank
