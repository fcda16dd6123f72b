#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ingest.hpp"
#include "propagation.hpp"

namespace trustgrid {

class VersionError : public Error {
public:
    using Error::Error;
};

/// A persisted network state together with the parameters that produced it.
struct Snapshot {
    NetworkState state;
    double lambda = 0.0;
    double store_threshold = 0.0;
    friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

inline constexpr std::string_view kSnapshotMagic = "trustgrid-snapshot";
inline constexpr std::string_view kSnapshotVersion = "v1";

/// Text layout:
///
///     trustgrid-snapshot v1 round=<k> lambda=<v> threshold=<v>
///     converged=<0|1> nodes=<n>
///     <owner> <target> <trust> <direct|inferred> <hops>     (one per entry)
///     <owner> <target> retired                              (one per retired target)
///     <owner>                                               (owner with neither)
///
/// Owners appear in ascending order; reals use the shortest round-trip form.
inline void save_snapshot(std::ostream& out, const NetworkState& state, double lambda,
                          double store_threshold) {
    out << kSnapshotMagic << ' ' << kSnapshotVersion << " round=" << state.round
        << " lambda=" << format_real(lambda) << " threshold=" << format_real(store_threshold)
        << '\n';
    out << "converged=" << (state.converged ? 1 : 0) << " nodes=" << state.tables.size() << '\n';
    for (const auto& t : state.tables) {
        if (t.empty() && t.retired().empty()) {
            out << t.owner().value << '\n';
            continue;
        }
        for (const auto& e : t.entries())
            out << t.owner().value << ' ' << e.target.value << ' ' << format_real(e.trust) << ' '
                << to_string(e.origin) << ' ' << e.hops << '\n';
        for (UserId r : t.retired()) out << t.owner().value << ' ' << r.value << " retired\n";
    }
}

inline void save_snapshot(const std::string& path, const NetworkState& state, double lambda,
                          double store_threshold) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    save_snapshot(out, state, lambda, store_threshold);
    if (!out) throw IoError("write failed: " + path);
}

namespace detail {

template <class T>
T header_value(std::string_view token, std::string_view key, std::size_t line) {
    if (!token.starts_with(key) || token.size() <= key.size() || token[key.size()] != '=')
        throw ParseError(line, "expected " + std::string(key) + "=<value>");
    T v{};
    if (!parse_number(token.substr(key.size() + 1), v))
        throw ParseError(line, "bad value for " + std::string(key));
    return v;
}

}  // namespace detail

inline Snapshot load_snapshot(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw VersionError("empty snapshot");
    auto head = detail::split_ws(line);
    if (head.size() < 2 || head[0] != kSnapshotMagic)
        throw VersionError("not a trustgrid snapshot");
    if (head[1] != kSnapshotVersion)
        throw VersionError("unsupported snapshot version " + std::string(head[1]));
    if (head.size() != 5) throw ParseError(1, "malformed snapshot header");

    Snapshot snap;
    snap.state.round = detail::header_value<std::size_t>(head[2], "round", 1);
    snap.lambda = detail::header_value<double>(head[3], "lambda", 1);
    snap.store_threshold = detail::header_value<double>(head[4], "threshold", 1);

    if (!std::getline(in, line)) throw ParseError(2, "missing node count line");
    auto meta = detail::split_ws(line);
    if (meta.size() != 2) throw ParseError(2, "malformed node count line");
    const int converged = detail::header_value<int>(meta[0], "converged", 2);
    const auto nodes = detail::header_value<std::size_t>(meta[1], "nodes", 2);
    snap.state.converged = converged != 0;

    std::vector<TrustEntry> entries;
    std::vector<UserId> retired;
    std::optional<UserId> owner;
    auto flush = [&] {
        if (owner) snap.state.tables.emplace_back(*owner, std::move(entries), std::move(retired));
        entries.clear();
        retired.clear();
    };

    std::size_t lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::skippable(line)) continue;
        auto f = detail::split_ws(line);
        UserId o;
        if (!detail::parse_number(f[0], o.value)) throw ParseError(lineno, "bad owner id");
        if (!owner || *owner != o) {
            if (owner && o < *owner) throw ParseError(lineno, "owners out of order");
            flush();
            owner = o;
        }
        if (f.size() == 1) continue;
        if (f.size() == 3 && f[2] == "retired") {
            UserId r;
            if (!detail::parse_number(f[1], r.value)) throw ParseError(lineno, "bad target id");
            retired.push_back(r);
            continue;
        }
        if (f.size() != 5) throw ParseError(lineno, "expected 5 fields");
        TrustEntry e;
        if (!detail::parse_number(f[1], e.target.value)) throw ParseError(lineno, "bad target id");
        if (!detail::parse_number(f[2], e.trust)) throw ParseError(lineno, "bad trust value");
        if (f[3] == "direct")
            e.origin = Origin::direct;
        else if (f[3] == "inferred")
            e.origin = Origin::inferred;
        else
            throw ParseError(lineno, "bad origin '" + std::string(f[3]) + "'");
        if (!detail::parse_number(f[4], e.hops) || e.hops == 0)
            throw ParseError(lineno, "bad hop count");
        entries.push_back(e);
    }
    flush();
    if (snap.state.tables.size() != nodes)
        throw ParseError(lineno, "node count mismatch: header says " + std::to_string(nodes) +
                                     ", found " + std::to_string(snap.state.tables.size()));
    return snap;
}

inline Snapshot load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return load_snapshot(in);
}

/// Checks that a loaded state belongs to the dataset: one table per user and
/// direct entries equal to the dataset's edges.
inline void check_snapshot_matches(const NetworkState& state, const Dataset& d) {
    if (state.tables.size() != d.users().size())
        throw ValidationError("snapshot has " + std::to_string(state.tables.size()) +
                              " nodes, dataset has " + std::to_string(d.users().size()) +
                              " users");
    for (const auto& t : state.tables) {
        if (!d.has_user(t.owner()))
            throw ValidationError("snapshot node " + std::to_string(t.owner().value) +
                                  " is not a dataset user");
        const auto edges = d.out_edges(t.owner());
        std::size_t k = 0;
        for (const auto& e : t.entries()) {
            if (e.origin != Origin::direct) continue;
            if (k >= edges.size() || edges[k].target != e.target || edges[k].value != e.trust)
                throw ValidationError("snapshot direct entries of node " +
                                      std::to_string(t.owner().value) +
                                      " differ from the trust file");
            ++k;
        }
        if (k != edges.size())
            throw ValidationError("snapshot direct entries of node " +
                                  std::to_string(t.owner().value) + " differ from the trust file");
    }
}

}  // namespace trustgrid
