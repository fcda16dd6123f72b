#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "core.hpp"
#include "random.hpp"

namespace trustgrid {

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

struct RatingRecord {
    std::uint64_t user = 0;
    std::uint64_t item = 0;
    int value = 0;
    friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

struct TrustRecord {
    std::uint64_t source = 0;
    std::uint64_t target = 0;
    double value = 0.0;
    friend bool operator==(const TrustRecord&, const TrustRecord&) = default;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

/// True for blank lines and '#' comments.
inline bool skippable(std::string_view line) {
    for (char c : line) {
        if (c == '#') return true;
        if (c != ' ' && c != '\t' && c != '\r') return false;
    }
    return true;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if constexpr (std::is_floating_point_v<T>) {
        if (!s.empty() && s.front() == '+') ++first;
    }
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

template <class Fn>
void for_each_data_line(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (skippable(line)) continue;
        fn(lineno, split_ws(line));
    }
}

}  // namespace detail

/// Parses `user item rating` lines. Ratings must be integers in [1,5].
inline std::vector<RatingRecord> parse_ratings(std::istream& in) {
    std::vector<RatingRecord> out;
    detail::for_each_data_line(in, [&](std::size_t lineno, const auto& f) {
        if (f.size() != 3)
            throw ParseError(lineno, "expected 3 fields (user item rating), got " +
                                         std::to_string(f.size()));
        RatingRecord r;
        if (!detail::parse_number(f[0], r.user)) throw ParseError(lineno, "bad user id");
        if (!detail::parse_number(f[1], r.item)) throw ParseError(lineno, "bad item id");
        if (!detail::parse_number(f[2], r.value)) throw ParseError(lineno, "bad rating value");
        if (!valid_rating(r.value))
            throw ParseError(lineno, "rating " + std::to_string(r.value) + " outside [1,5]");
        out.push_back(r);
    });
    return out;
}

/// Parses `source target value` lines. Values must lie in [-1,1].
inline std::vector<TrustRecord> parse_trust(std::istream& in) {
    std::vector<TrustRecord> out;
    detail::for_each_data_line(in, [&](std::size_t lineno, const auto& f) {
        if (f.size() != 3)
            throw ParseError(lineno, "expected 3 fields (source target value), got " +
                                         std::to_string(f.size()));
        TrustRecord t;
        if (!detail::parse_number(f[0], t.source)) throw ParseError(lineno, "bad source id");
        if (!detail::parse_number(f[1], t.target)) throw ParseError(lineno, "bad target id");
        if (!detail::parse_number(f[2], t.value) || !std::isfinite(t.value))
            throw ParseError(lineno, "bad trust value");
        if (!valid_trust(t.value))
            throw ParseError(lineno, "trust " + std::string(f[2]) + " outside [-1,1]");
        out.push_back(t);
    });
    return out;
}

inline Dataset build_dataset(const std::vector<RatingRecord>& ratings,
                             const std::vector<TrustRecord>& trust,
                             BuildWarnings* warnings = nullptr) {
    std::vector<Rating> rs;
    rs.reserve(ratings.size());
    for (const auto& r : ratings) rs.push_back({UserId{r.user}, ItemId{r.item}, r.value});
    std::vector<TrustEdge> es;
    es.reserve(trust.size());
    for (const auto& t : trust) es.push_back({UserId{t.source}, UserId{t.target}, t.value});
    return Dataset::build(std::move(rs), std::move(es), {}, {}, warnings);
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

/// Loads a dataset from a ratings file and/or a trust file. Either path may
/// be empty.
inline Dataset load_dataset(const std::string& ratings_path, const std::string& trust_path,
                            BuildWarnings* warnings = nullptr) {
    std::vector<RatingRecord> ratings;
    std::vector<TrustRecord> trust;
    if (!ratings_path.empty()) {
        auto in = open_input(ratings_path);
        try {
            ratings = parse_ratings(in);
        } catch (const ParseError& e) {
            throw ParseError(e.line(), ratings_path + ": " + e.what());
        }
    }
    if (!trust_path.empty()) {
        auto in = open_input(trust_path);
        try {
            trust = parse_trust(in);
        } catch (const ParseError& e) {
            throw ParseError(e.line(), trust_path + ": " + e.what());
        }
    }
    return build_dataset(ratings, trust, warnings);
}

/// Shortest decimal that parses back to the same double.
inline std::string format_real(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline void write_ratings(std::ostream& out, const Dataset& d) {
    for (const auto& r : d.ratings())
        out << r.user.value << ' ' << r.item.value << ' ' << r.value << '\n';
}

inline void write_trust(std::ostream& out, const Dataset& d) {
    for (const auto& e : d.trust_edges())
        out << e.source.value << ' ' << e.target.value << ' ' << format_real(e.value) << '\n';
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct DatasetStats {
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    std::size_t n_ratings = 0;
    std::size_t n_trust_edges = 0;
    double avg_neighbors = 0.0;
    double avg_ratings_per_user = 0.0;
    double avg_ratings_per_item = 0.0;
};

inline DatasetStats dataset_stats(const Dataset& d) {
    DatasetStats s;
    s.n_users = d.users().size();
    s.n_items = d.items().size();
    s.n_ratings = d.ratings().size();
    s.n_trust_edges = d.trust_edges().size();
    auto ratio = [](std::size_t a, std::size_t b) {
        return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
    };
    s.avg_neighbors = ratio(s.n_trust_edges, s.n_users);
    s.avg_ratings_per_user = ratio(s.n_ratings, s.n_users);
    s.avg_ratings_per_item = ratio(s.n_ratings, s.n_items);
    return s;
}

// ---------------------------------------------------------------------------
// Synthetic datasets
// ---------------------------------------------------------------------------

enum class TrustValueMode { binary, uniform_signed };

/// Parameters of the synthetic generator. Defaults follow the Epinions
/// averages (about 10 trusted neighbours and 15 ratings per user).
///
/// Users sit on a ring. A `locality` fraction of trust edges points to users
/// within a small window on the ring, the rest to uniform random users. Each
/// user's taste is a direction on the same ring, so users who trust each other
/// tend to rate alike, while long-range edges carry unrelated tastes.
struct SyntheticSpec {
    std::size_t n_users = 2000;
    std::size_t n_items = 6000;
    double avg_out_degree = 10.0;
    double avg_ratings_per_user = 15.0;
    TrustValueMode trust_value_mode = TrustValueMode::binary;
    std::uint64_t rng_seed = 1;
    double locality = 0.9;

    void validate() const {
        if (n_users == 0) throw ValidationError("synthetic generator: n_users must be > 0");
        if (n_items == 0) throw ValidationError("synthetic generator: n_items must be > 0");
        if (!(avg_out_degree > 0.0))
            throw ValidationError("synthetic generator: avg_out_degree must be > 0");
        if (!(avg_ratings_per_user > 0.0))
            throw ValidationError("synthetic generator: avg_ratings_per_user must be > 0");
        if (!(locality >= 0.0 && locality <= 1.0))
            throw ValidationError("synthetic generator: locality must lie in [0,1]");
    }
};

inline Dataset generate_synthetic(const SyntheticSpec& spec, BuildWarnings* warnings = nullptr) {
    spec.validate();
    Rng rng(spec.rng_seed);
    const std::size_t n = spec.n_users;
    const std::size_t m = spec.n_items;
    constexpr double kTwoPi = 2.0 * std::numbers::pi;

    std::vector<UserId> users(n);
    for (std::size_t u = 0; u < n; ++u) users[u] = UserId{u + 1};
    std::vector<ItemId> items(m);
    for (std::size_t i = 0; i < m; ++i) items[i] = ItemId{i + 1};

    // Trust edges.
    std::vector<TrustEdge> edges;
    const auto window = static_cast<std::int64_t>(std::max(2.0, std::ceil(spec.avg_out_degree)));
    std::vector<std::size_t> chosen;
    for (std::size_t u = 0; u < n; ++u) {
        if (n == 1) break;
        // Poisson-like spread of out-degrees: geometric count around the mean.
        const double p = 1.0 / (1.0 + spec.avg_out_degree);
        double x = rng.uniform();
        while (x <= 0.0) x = rng.uniform();
        auto degree = static_cast<std::size_t>(std::floor(std::log(x) / std::log1p(-p)));
        degree = std::min(degree, n - 1);
        chosen.clear();
        std::size_t attempts = 0;
        while (chosen.size() < degree && attempts < 50 * (degree + 1)) {
            ++attempts;
            std::size_t v;
            if (rng.bernoulli(spec.locality)) {
                const auto span = static_cast<std::uint64_t>(2 * window + 1);
                const std::int64_t off = static_cast<std::int64_t>(rng.below(span)) - window;
                const auto sn = static_cast<std::int64_t>(n);
                v = static_cast<std::size_t>(((static_cast<std::int64_t>(u) + off) % sn + sn) % sn);
            } else {
                v = static_cast<std::size_t>(rng.below(n));
            }
            if (v == u || std::find(chosen.begin(), chosen.end(), v) != chosen.end()) continue;
            chosen.push_back(v);
        }
        std::sort(chosen.begin(), chosen.end());
        for (std::size_t v : chosen) {
            double value = 1.0;
            if (spec.trust_value_mode == TrustValueMode::uniform_signed) {
                do value = rng.uniform(-1.0, 1.0);
                while (value == 0.0);
            }
            edges.push_back({users[u], users[v], value});
        }
    }

    // Items: base quality, a taste direction and a popularity skew.
    std::vector<double> quality(m), direction(m);
    for (std::size_t i = 0; i < m; ++i) {
        quality[i] = rng.normal(3.6, 0.6);
        direction[i] = rng.uniform(0.0, kTwoPi);
    }

    std::vector<Rating> ratings;
    constexpr double kTasteAmplitude = 1.5;
    constexpr double kNoise = 0.5;
    std::vector<std::size_t> picked;
    for (std::size_t u = 0; u < n; ++u) {
        const double taste = kTwoPi * static_cast<double>(u) / static_cast<double>(n);
        const auto count = std::min<std::size_t>(
            rng.geometric_at_least_one(spec.avg_ratings_per_user), m);
        picked.clear();
        std::size_t attempts = 0;
        while (picked.size() < count && attempts < 50 * (count + 1)) {
            ++attempts;
            const double r = rng.uniform();
            const auto i = std::min(m - 1, static_cast<std::size_t>(r * r * static_cast<double>(m)));
            if (std::find(picked.begin(), picked.end(), i) != picked.end()) continue;
            picked.push_back(i);
        }
        std::sort(picked.begin(), picked.end());
        for (std::size_t i : picked) {
            const double raw = quality[i] + kTasteAmplitude * std::cos(taste - direction[i]) +
                               rng.normal(0.0, kNoise);
            const int value = std::clamp(static_cast<int>(std::lround(raw)), kMinRating, kMaxRating);
            ratings.push_back({users[u], items[i], value});
        }
    }

    return Dataset::build(std::move(ratings), std::move(edges), std::move(users),
                          std::move(items), warnings);
}

}  // namespace trustgrid
