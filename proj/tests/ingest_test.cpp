#include <sstream>

#include <gtest/gtest.h>

#include "trustgrid/ingest.hpp"

using namespace trustgrid;

TEST(ParseRatings, ReadsWhitespaceSeparatedTriples) {
    std::istringstream in("# user item rating\n1 100 5\n2\t101  3\n\n");
    const auto rs = parse_ratings(in);
    ASSERT_EQ(rs.size(), 2u);
    EXPECT_EQ(rs[0], (RatingRecord{1, 100, 5}));
    EXPECT_EQ(rs[1], (RatingRecord{2, 101, 3}));
}

TEST(ParseRatings, EmptyInputGivesNoRecords) {
    std::istringstream in("");
    EXPECT_TRUE(parse_ratings(in).empty());
}

TEST(ParseRatings, RejectsOutOfRangeWithLineNumber) {
    std::istringstream in("1 100 5\n1 100 9\n");
    try {
        parse_ratings(in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(ParseRatings, RejectsMalformedLines) {
    for (const char* text : {"1 100\n", "1 100 4 7\n", "a 100 4\n", "1 100 4.5\n", "-1 2 3\n"}) {
        std::istringstream in(text);
        EXPECT_THROW(parse_ratings(in), ParseError) << text;
    }
}

TEST(ParseTrust, ReadsBinaryAndSignedValues) {
    std::istringstream in("7 9 1\n7 10 -0.5\n");
    const auto ts = parse_trust(in);
    ASSERT_EQ(ts.size(), 2u);
    EXPECT_EQ(ts[0], (TrustRecord{7, 9, 1.0}));
    EXPECT_EQ(ts[1], (TrustRecord{7, 10, -0.5}));
}

TEST(ParseTrust, RejectsOutOfRange) {
    std::istringstream in("7 9 2\n");
    EXPECT_THROW(parse_trust(in), ParseError);
    std::istringstream nan("7 9 nan\n");
    EXPECT_THROW(parse_trust(nan), ParseError);
}

TEST(ParseTrust, RecordCountMatchesDataLines) {
    std::ostringstream text;
    std::size_t data_lines = 0;
    for (int k = 0; k < 200; ++k) {
        if (k % 7 == 0) {
            text << "# comment " << k << '\n';
        } else {
            text << k << ' ' << k + 1 << ' ' << (k % 3 == 0 ? "-0.25" : "1") << '\n';
            ++data_lines;
        }
    }
    std::istringstream in(text.str());
    EXPECT_EQ(parse_trust(in).size(), data_lines);
}

TEST(DatasetStats, CountsAndAverages) {
    EXPECT_EQ(dataset_stats(Dataset{}).n_users, 0u);
    EXPECT_EQ(dataset_stats(Dataset{}).avg_ratings_per_user, 0.0);

    const auto d = Dataset::build({{UserId{1}, ItemId{1}, 3}, {UserId{2}, ItemId{1}, 4}}, {});
    const auto s = dataset_stats(d);
    EXPECT_EQ(s.n_users, 2u);
    EXPECT_EQ(s.n_items, 1u);
    EXPECT_EQ(s.n_ratings, 2u);
    EXPECT_DOUBLE_EQ(s.avg_ratings_per_user, 1.0);
    EXPECT_DOUBLE_EQ(s.avg_ratings_per_item, 2.0);
    EXPECT_DOUBLE_EQ(s.avg_neighbors, 0.0);
}

TEST(Synthetic, RejectsInvalidParameters) {
    SyntheticSpec spec;
    spec.n_users = 0;
    EXPECT_THROW(generate_synthetic(spec), ValidationError);
    spec = {};
    spec.avg_out_degree = 0.0;
    EXPECT_THROW(generate_synthetic(spec), ValidationError);
}

TEST(Synthetic, IsDeterministicPerSeed) {
    SyntheticSpec spec;
    spec.n_users = 300;
    spec.n_items = 500;
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    EXPECT_TRUE(std::equal(a.ratings().begin(), a.ratings().end(), b.ratings().begin(),
                           b.ratings().end()));
    EXPECT_TRUE(std::equal(a.trust_edges().begin(), a.trust_edges().end(),
                           b.trust_edges().begin(), b.trust_edges().end()));
    spec.rng_seed = 2;
    const auto c = generate_synthetic(spec);
    EXPECT_FALSE(std::equal(a.trust_edges().begin(), a.trust_edges().end(),
                            c.trust_edges().begin(), c.trust_edges().end()));
}

TEST(Synthetic, RealisedDegreeNearTarget) {
    SyntheticSpec spec;
    spec.n_users = 2000;
    spec.avg_out_degree = 10.0;
    spec.rng_seed = 1;
    const auto s = dataset_stats(generate_synthetic(spec));
    EXPECT_EQ(s.n_users, 2000u);
    EXPECT_GE(s.avg_neighbors, 8.0);
    EXPECT_LE(s.avg_neighbors, 12.0);
    EXPECT_GE(s.avg_ratings_per_user, 12.0);
    EXPECT_LE(s.avg_ratings_per_user, 18.0);
}

TEST(Synthetic, EmitsOnlyValidEdges) {
    for (auto mode : {TrustValueMode::binary, TrustValueMode::uniform_signed}) {
        SyntheticSpec spec;
        spec.n_users = 400;
        spec.trust_value_mode = mode;
        spec.rng_seed = 11;
        BuildWarnings warn;
        const auto d = generate_synthetic(spec, &warn);
        EXPECT_EQ(warn, BuildWarnings{});
        for (const auto& e : d.trust_edges()) {
            EXPECT_NE(e.source, e.target);
            EXPECT_TRUE(valid_trust(e.value));
            EXPECT_NE(e.value, 0.0);
            if (mode == TrustValueMode::binary) {
                EXPECT_EQ(e.value, 1.0);
            }
        }
    }
}

TEST(FormatReal, RoundTripsExactly) {
    for (double v : {0.1, 1.0 / 3.0, 0.8 * 0.8 * 0.8, -0.7333333333333334, 1e-300, 0.0}) {
        double back = 0.0;
        ASSERT_TRUE(detail::parse_number(format_real(v), back));
        EXPECT_EQ(back, v);
    }
}
