#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "trustgrid/recommender.hpp"

using namespace trustgrid;

namespace {

constexpr UserId X{1}, W{2}, Z{3}, V{4}, Q{5};
constexpr ItemId ITEM{100}, OTHER{101};

Dataset ratings_abc() {
    return Dataset::build({{W, ITEM, 4}, {Z, ITEM, 2}, {V, ITEM, 5}, {X, OTHER, 3}, {Q, OTHER, 1}},
                          {});
}

NetworkState with_table(std::vector<TrustEntry> entries) {
    std::vector<TrustTable> ts;
    ts.emplace_back(X, std::move(entries));
    for (UserId u : {W, Z, V, Q}) ts.emplace_back(u, std::vector<TrustEntry>{});
    std::sort(ts.begin(), ts.end(),
              [](const TrustTable& a, const TrustTable& b) { return a.owner() < b.owner(); });
    return NetworkState{std::move(ts), 1, true};
}

std::vector<std::pair<UserId, double>> key(const std::vector<Contributor>& cs) {
    std::vector<std::pair<UserId, double>> out;
    for (const auto& c : cs) out.emplace_back(c.user, c.trust);
    return out;
}

}  // namespace

TEST(NeighborhoodRaters, IntersectsTableWithRaters) {
    const auto d = ratings_abc();
    const auto s = with_table({{W, 0.9, Origin::direct, 1}, {Z, 0.3, Origin::inferred, 2}});
    const auto cs = neighborhood_raters(s, X, ITEM, d);
    ASSERT_EQ(cs.size(), 2u);
    EXPECT_EQ(cs[0], (Contributor{W, 0.9, 4}));
    EXPECT_EQ(cs[1], (Contributor{Z, 0.3, 2}));
}

TEST(NeighborhoodRaters, SkipsDistrustedAndUnrated) {
    const auto d = ratings_abc();
    const auto s = with_table({{W, -0.9, Origin::direct, 1}, {Z, -0.3, Origin::inferred, 2}});
    EXPECT_TRUE(neighborhood_raters(s, X, ITEM, d).empty());
    const auto t = with_table({{W, 0.9, Origin::direct, 1}});
    const auto d2 = Dataset::build({{W, OTHER, 4}}, {}, {X, Z, V, Q}, {ITEM});
    EXPECT_TRUE(neighborhood_raters(t, X, ITEM, d2).empty());
    EXPECT_THROW(neighborhood_raters(t, UserId{77}, ITEM, d2), UnknownUser);
}

TEST(Recommend, WeightedAverageOverContributors) {
    const auto d = ratings_abc();
    const auto s = with_table({{W, 0.9, Origin::direct, 1}, {Z, 0.3, Origin::inferred, 2}});
    const auto r = recommend(s, X, ITEM, d);
    ASSERT_TRUE(r.has_value());
    EXPECT_NEAR(r->predicted, 3.5, 1e-12);
    EXPECT_NEAR(r->confidence, 0.6, 1e-12);
    EXPECT_NEAR(r->rating_recall, 2.0 / 3.0, 1e-15);
    EXPECT_EQ(r->depth, 1);
    EXPECT_EQ(r->contributors.size(), 2u);
}

TEST(Recommend, SingleContributorAndEmptySet) {
    const auto d = ratings_abc();
    const auto s = with_table({{V, 0.8, Origin::inferred, 3}});
    const auto r = recommend(s, X, ITEM, d);
    ASSERT_TRUE(r.has_value());
    EXPECT_DOUBLE_EQ(r->predicted, 5.0);
    EXPECT_EQ(r->depth, 3);
    EXPECT_EQ(recommend(with_table({}), X, ITEM, d), std::nullopt);
    EXPECT_THROW(recommend(s, X, ItemId{999}, d), UnknownItem);
}

TEST(Recommend, OwnRatingIsNeverUsed) {
    const auto d = Dataset::build({{X, ITEM, 1}, {W, ITEM, 5}}, {}, {Z, V, Q});
    const auto s = with_table({{W, 0.9, Origin::direct, 1}});
    const auto r = recommend(s, X, ITEM, d);
    ASSERT_TRUE(r.has_value());
    EXPECT_DOUBLE_EQ(r->predicted, 5.0);
    EXPECT_DOUBLE_EQ(r->rating_recall, 1.0);
}

TEST(Confidence, Cases) {
    EXPECT_NEAR(confidence({{W, 0.9, 4}, {Z, 0.3, 2}}), 0.6, 1e-12);
    EXPECT_NEAR(confidence({{W, 0.8, 3}, {Z, 0.8, 3}}), 8e5, 1e-6);
    EXPECT_NEAR(confidence({{W, 0.5, 4}}), 0.5 / 1e-6, 1e-6);
    EXPECT_THROW(confidence({}), EmptyContributors);
}

TEST(RecommenderProperty, PredictionIsConvexAndScaleInvariant) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> trust(0.01, 1.0), scale(0.1, 10.0);
    std::uniform_int_distribution<int> rating(1, 5), count(1, 8);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<Contributor> cs;
        const int n = count(rng);
        for (int k = 0; k < n; ++k) cs.push_back({UserId{std::uint64_t(k + 1)}, trust(rng), rating(rng)});
        const double p = trust_weighted_rating(cs);
        const auto [lo, hi] = std::minmax_element(cs.begin(), cs.end(), [](auto& a, auto& b) {
            return a.rating < b.rating;
        });
        EXPECT_GE(p, lo->rating - 1e-12);
        EXPECT_LE(p, hi->rating + 1e-12);

        const double c = scale(rng);
        auto scaled = cs;
        for (auto& x : scaled) x.trust *= c;
        EXPECT_NEAR(trust_weighted_rating(scaled), p, 1e-12);
        EXPECT_NEAR(confidence(scaled), c * confidence(cs), 1e-9 * c * confidence(cs));

        auto boosted = cs;
        std::max_element(boosted.begin(), boosted.end(), [](auto& a, auto& b) {
            return a.rating < b.rating;
        })->trust += 0.5;
        EXPECT_GE(trust_weighted_rating(boosted), p - 1e-12);
    }
}

TEST(RecommenderProperty, RecallIsOneExactlyWhenAllRatersTrusted) {
    const auto d = ratings_abc();
    const auto all = with_table(
        {{W, 0.9, Origin::direct, 1}, {Z, 0.3, Origin::direct, 1}, {V, 0.7, Origin::inferred, 2}});
    EXPECT_DOUBLE_EQ(recommend(all, X, ITEM, d)->rating_recall, 1.0);
    const auto some = with_table({{W, 0.9, Origin::direct, 1}, {V, -0.7, Origin::inferred, 2}});
    const double recall = recommend(some, X, ITEM, d)->rating_recall;
    EXPECT_GT(recall, 0.0);
    EXPECT_LT(recall, 1.0);
    EXPECT_EQ(key(recommend(some, X, ITEM, d)->contributors),
              (std::vector<std::pair<UserId, double>>{{W, 0.9}}));
}
