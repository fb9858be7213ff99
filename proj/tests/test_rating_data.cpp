#include <doctest.h>

#include <cmath>
#include <numeric>

#include "crowdrank/rating_data.hpp"
#include "crowdrank/rng.hpp"
#include "support.hpp"

using namespace crowdrank;
using crowdrank::testing::feature_item;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

AgreementLabel mirror(AgreementLabel label) {
    if (label == AgreementLabel::Better) return AgreementLabel::Worse;
    if (label == AgreementLabel::Worse) return AgreementLabel::Better;
    return label;
}

}  // namespace

TEST_CASE("votes_to_distribution normalizes counts") {
    CHECK(votes_to_distribution(GlobalVotes{{0, 0, 10}}).probs() == std::vector<double>{0.0, 0.0, 1.0});
    CHECK(votes_to_distribution(GlobalVotes{{2, 3, 5}}).probs() == std::vector<double>{0.2, 0.3, 0.5});
    const auto uniform = votes_to_distribution(PairwiseVotes{{1, 1, 1, 1, 1}});
    for (double p : uniform.probs()) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(uniform.bucket_values() == std::vector<double>{-2, -1, 0, 1, 2});
}

TEST_CASE("votes_to_distribution rejects empty and negative votes") {
    CHECK_THROWS_AS(votes_to_distribution(GlobalVotes{{0, 0, 0}}), DataError);
    CHECK_THROWS_AS(votes_to_distribution(PairwiseVotes{{0, 0, 0, 0, 0}}), DataError);
    CHECK_THROWS_AS(votes_to_distribution(GlobalVotes{{1, -1, 3}}), DataError);
}

TEST_CASE("RatingDistribution validates its probabilities") {
    CHECK_THROWS_AS(RatingDistribution::global({0.5, 0.5}), DataError);
    CHECK_THROWS_AS(RatingDistribution::global({0.5, 0.6, -0.1}), DataError);
    CHECK_THROWS_AS(RatingDistribution::global({0.5, 0.5, 1e-9}), DataError);
    CHECK_THROWS_AS(RatingDistribution::pairwise({0.2, 0.2, 0.2, 0.2, 0.2 + 1e-10}), DataError);
    CHECK_NOTHROW(RatingDistribution::pairwise({0.1, 0.2, 0.4, 0.2, 0.1}));
}

TEST_CASE("reversed mirrors relative buckets") {
    const auto d = RatingDistribution::pairwise({0.1, 0.2, 0.3, 0.15, 0.25});
    CHECK(d.reversed().probs() == std::vector<double>{0.25, 0.15, 0.3, 0.2, 0.1});
}

TEST_CASE("property: distributions sum to 1 and are scale invariant") {
    Rng rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        GlobalVotes g;
        PairwiseVotes p;
        for (auto& c : g.counts) c = static_cast<int>(rng.below(40));
        for (auto& c : p.counts) c = static_cast<int>(rng.below(40));
        if (g.total() == 0) g.counts[0] = 1;
        if (p.total() == 0) p.counts[2] = 1;
        const auto gd = votes_to_distribution(g);
        const auto pd = votes_to_distribution(p);
        CHECK(std::abs(sum(gd.probs()) - 1.0) <= 1e-12);
        CHECK(std::abs(sum(pd.probs()) - 1.0) <= 1e-12);

        const int k = 1 + static_cast<int>(rng.below(9));
        GlobalVotes gk = g;
        PairwiseVotes pk = p;
        for (auto& c : gk.counts) c *= k;
        for (auto& c : pk.counts) c *= k;
        const auto gdk = votes_to_distribution(gk).probs();
        const auto pdk = votes_to_distribution(pk).probs();
        for (std::size_t i = 0; i < gdk.size(); ++i) CHECK(gdk[i] == doctest::Approx(gd[i]).epsilon(1e-15));
        for (std::size_t i = 0; i < pdk.size(); ++i) CHECK(pdk[i] == doctest::Approx(pd[i]).epsilon(1e-15));

        const double gm = mean_rating(gd);
        const double pm = mean_rating(pd);
        CHECK(gm >= 1.0);
        CHECK(gm <= 3.0);
        CHECK(pm >= -2.0);
        CHECK(pm <= 2.0);
    }
}

TEST_CASE("mean_rating") {
    CHECK(mean_rating(RatingDistribution::global({0, 0, 1})) == 3.0);
    CHECK(mean_rating(RatingDistribution::global({0.5, 0, 0.5})) == 2.0);
    CHECK(mean_rating(RatingDistribution::pairwise({0, 0, 1, 0, 0})) == 0.0);
}

TEST_CASE("entropy in nats") {
    CHECK(entropy(RatingDistribution::global({0, 1, 0})) == 0.0);
    CHECK(entropy(RatingDistribution::global({1.0 / 3, 1.0 / 3, 1.0 / 3})) == doctest::Approx(std::log(3.0)));
}

TEST_CASE("rating_deviation is the population standard deviation of the votes") {
    CHECK(rating_deviation(GlobalVotes{{0, 10, 0}}) == 0.0);
    CHECK(rating_deviation(GlobalVotes{{5, 0, 5}}) == doctest::Approx(1.0).epsilon(1e-15));
    // Votes {1, 2, 3}: mean 2, squared deviations 1, 0, 1 over 3 votes.
    CHECK(rating_deviation(GlobalVotes{{1, 1, 1}}) == doctest::Approx(0.816496580927726).epsilon(1e-14));
    CHECK(rating_deviation(PairwiseVotes{{1, 0, 0, 0, 1}}) == doctest::Approx(2.0).epsilon(1e-15));

    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        GlobalVotes v;
        for (auto& c : v.counts) c = static_cast<int>(rng.below(6));
        if (v.total() == 0) v.counts[1] = 1;
        std::vector<double> votes;
        for (int b = 0; b < 3; ++b)
            for (int n = 0; n < v.counts[b]; ++n) votes.push_back(b + 1.0);
        const double m = sum(votes) / static_cast<double>(votes.size());
        double ss = 0.0;
        for (double x : votes) ss += (x - m) * (x - m);
        const auto s = summarize(v);
        CHECK(s.mean == doctest::Approx(m).epsilon(1e-13));
        CHECK(s.deviation == doctest::Approx(std::sqrt(ss / static_cast<double>(votes.size()))).epsilon(1e-12));
    }
}

TEST_CASE("agreement labels") {
    CHECK(agreement_label_global(2.5, 2.0, 0.3) == AgreementLabel::Better);
    CHECK(agreement_label_global(2.0, 2.2, 0.3) == AgreementLabel::Equal);
    CHECK(agreement_label_global(1.0, 3.0, 0.3) == AgreementLabel::Worse);
    CHECK(agreement_label_pairwise(0.1, 0.2) == AgreementLabel::Equal);
    CHECK(agreement_label_pairwise(1.5, 0.2) == AgreementLabel::Better);
    CHECK(agreement_label_pairwise(-0.8, 0.2) == AgreementLabel::Worse);
}

TEST_CASE("property: global agreement labels mirror and bands are monotone") {
    Rng rng(5);
    for (int trial = 0; trial < 5000; ++trial) {
        const double a = rng.uniform(1, 3), b = rng.uniform(1, 3), c = rng.uniform(0, 1);
        CHECK(agreement_label_global(b, a, c) == mirror(agreement_label_global(a, b, c)));
        const double wider = c + rng.uniform(0, 1);
        if (agreement_label_global(a, b, c) == AgreementLabel::Equal)
            CHECK(agreement_label_global(a, b, wider) == AgreementLabel::Equal);
        const double p = rng.uniform(-2, 2);
        if (agreement_label_pairwise(p, c) == AgreementLabel::Equal)
            CHECK(agreement_label_pairwise(p, wider) == AgreementLabel::Equal);
    }
}

TEST_CASE("agreement_confusion") {
    SUBCASE("consistent unanimous pairs give the identity") {
        Dataset ds({feature_item("lo", {1}, {{10, 0, 0}}), feature_item("mid", {1}, {{0, 10, 0}}),
                    feature_item("mid2", {1}, {{0, 10, 0}}), feature_item("hi", {1}, {{0, 0, 10}})},
                   {{"hi", "lo", {{0, 0, 0, 0, 5}}}, {"lo", "hi", {{5, 0, 0, 0, 0}}}, {"mid", "mid2", {{0, 0, 5, 0, 0}}}});
        const auto& pairs = ds.pairs();
        const auto c = agreement_confusion(pairs, ds, 0.3, 0.2);
        for (int r = 0; r < 3; ++r)
            for (int col = 0; col < 3; ++col) CHECK(c.matrix[r][col] == (r == col ? 1.0 : 0.0));
        CHECK(c.agreement_rate == 1.0);
        CHECK(c.pair_count == 3);
    }
    SUBCASE("global Better with pairwise Equal") {
        Dataset ds({feature_item("a", {1}, {{0, 0, 10}}), feature_item("b", {1}, {{10, 0, 0}})},
                   {{"a", "b", {{0, 0, 5, 0, 0}}}});
        const auto c = agreement_confusion(ds.pairs(), ds, 0.3, 0.2);
        CHECK(c.matrix[0] == std::array<double, 3>{0, 1, 0});
        CHECK(c.unsupported == std::array<bool, 3>{false, true, true});
        CHECK(c.matrix[1] == std::array<double, 3>{0, 0, 0});
        CHECK(c.agreement_rate == 0.0);
    }
    SUBCASE("rows sum to one or are flagged") {
        Rng rng(8);
        std::vector<ItemRecord> items;
        for (int i = 0; i < 30; ++i) {
            GlobalVotes v;
            for (auto& c : v.counts) c = static_cast<int>(rng.below(5));
            v.counts[1] += 1;
            items.push_back(feature_item("i" + std::to_string(i), {1}, v));
        }
        std::vector<PairRecord> pairs;
        for (int k = 0; k < 100; ++k) {
            const auto a = rng.below(30), b = (a + 1 + rng.below(29)) % 30;
            PairwiseVotes v;
            for (auto& c : v.counts) c = static_cast<int>(rng.below(3));
            v.counts[2] += 1;
            pairs.push_back({"i" + std::to_string(a), "i" + std::to_string(b), v});
        }
        Dataset ds(std::move(items), pairs);
        const auto c = agreement_confusion(pairs, ds, 0.3, 0.2);
        for (int r = 0; r < 3; ++r) {
            const double row = c.matrix[r][0] + c.matrix[r][1] + c.matrix[r][2];
            if (c.unsupported[r])
                CHECK(row == 0.0);
            else
                CHECK(std::abs(row - 1.0) <= 1e-12);
        }
    }
    CHECK_THROWS_AS(agreement_confusion({}, Dataset{}, 0.3, 0.2), DataError);
}

TEST_CASE("Dataset validation names the offending record") {
    auto item = [](std::string id, Split s) { return feature_item(std::move(id), {1.0}, {{0, 1, 0}}, s); };
    CHECK_THROWS_AS(Dataset({item("a", Split::Train), item("a", Split::Train)}, {}), DataError);

    Dataset self_pair({item("a", Split::Train)}, {{"a", "a", {{0, 0, 1, 0, 0}}}});
    CHECK_THROWS_WITH_AS(self_pair.validate(), doctest::Contains("itself"), DataError);

    Dataset missing({item("a", Split::Train)}, {{"a", "ghost", {{0, 0, 1, 0, 0}}}});
    CHECK_THROWS_WITH_AS(missing.validate(), doctest::Contains("ghost"), DataError);

    Dataset cross({item("a", Split::Train), item("b", Split::Test)}, {{"a", "b", {{0, 0, 1, 0, 0}}}});
    CHECK_THROWS_WITH_AS(cross.validate(), doctest::Contains("split"), DataError);

    Dataset ok({item("a", Split::Train), item("b", Split::Train), item("c", Split::Test), item("d", Split::Test)},
               {{"a", "b", {{0, 0, 1, 0, 0}}}, {"c", "d", {{0, 1, 0, 0, 0}}}});
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.items_in(Split::Test) == std::vector<std::size_t>{2, 3});
    CHECK(ok.pairs_in(Split::Train) == std::vector<std::size_t>{0});
    CHECK(ok.find("zzz") == std::nullopt);
}

TEST_CASE("split names round trip") {
    CHECK(parse_split("train") == Split::Train);
    CHECK(parse_split(to_string(Split::Test)) == Split::Test);
    CHECK_THROWS_AS(parse_split("validation"), DataError);
}
