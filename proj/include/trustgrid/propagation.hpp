#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "core.hpp"

namespace trustgrid {

enum class Origin : std::uint8_t { direct, inferred };

inline const char* to_string(Origin o) { return o == Origin::direct ? "direct" : "inferred"; }

struct TrustEntry {
    UserId target;
    double trust = 0.0;
    Origin origin = Origin::direct;
    std::uint32_t hops = 1;
    friend bool operator==(const TrustEntry&, const TrustEntry&) = default;
};

/// One node's neighbourhood: direct and inferred entries, ascending by target.
///
/// `retired` lists targets whose inferred entry was once dropped for falling
/// below the store threshold. If such a target is admitted again its entry is
/// kept from then on, so an entry can flap out at most once.
class TrustTable {
public:
    TrustTable() = default;
    TrustTable(UserId owner, std::vector<TrustEntry> entries, std::vector<UserId> retired = {})
        : owner_(owner), entries_(std::move(entries)), retired_(std::move(retired)) {
        std::sort(entries_.begin(), entries_.end(),
                  [](const TrustEntry& a, const TrustEntry& b) { return a.target < b.target; });
        std::sort(retired_.begin(), retired_.end());
        retired_.erase(std::unique(retired_.begin(), retired_.end()), retired_.end());
    }

    UserId owner() const noexcept { return owner_; }
    std::span<const TrustEntry> entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    const TrustEntry* find(UserId target) const noexcept {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), target,
                                   [](const TrustEntry& e, UserId t) { return e.target < t; });
        return (it != entries_.end() && it->target == target) ? &*it : nullptr;
    }

    std::span<const UserId> retired() const noexcept { return retired_; }
    bool is_retired(UserId target) const noexcept {
        return std::binary_search(retired_.begin(), retired_.end(), target);
    }

    std::size_t inferred_count() const noexcept {
        return static_cast<std::size_t>(std::count_if(
            entries_.begin(), entries_.end(),
            [](const TrustEntry& e) { return e.origin == Origin::inferred; }));
    }

    friend bool operator==(const TrustTable&, const TrustTable&) = default;

private:
    UserId owner_;
    std::vector<TrustEntry> entries_;
    std::vector<UserId> retired_;
};

struct PropagationConfig {
    double lambda = 0.8;           // damping per hop
    double store_threshold = 0.7;  // positive inferred values below this are not stored
    std::size_t max_rounds = 50;
    double tolerance = 1e-6;
    std::size_t jobs = 1;          // worker threads per round

    void validate() const {
        if (!(lambda > 0.0 && lambda <= 1.0))
            throw ValidationError("lambda must lie in (0,1], got " + std::to_string(lambda));
        if (!(store_threshold >= 0.0 && store_threshold <= 1.0))
            throw ValidationError("store threshold must lie in [0,1], got " +
                                  std::to_string(store_threshold));
        if (!(tolerance >= 0.0))
            throw ValidationError("tolerance must be non-negative");
    }
};

/// Every node's table after `round` synchronous rounds. Tables are ordered by
/// owner and there is exactly one per dataset user.
struct NetworkState {
    std::vector<TrustTable> tables;
    std::size_t round = 0;
    bool converged = false;

    const TrustTable* find_table(UserId owner) const noexcept {
        auto it = std::lower_bound(tables.begin(), tables.end(), owner,
                                   [](const TrustTable& t, UserId o) { return t.owner() < o; });
        return (it != tables.end() && it->owner() == owner) ? &*it : nullptr;
    }

    const TrustTable& table(UserId owner) const {
        if (const auto* t = find_table(owner)) return *t;
        throw UnknownUser(owner.value);
    }

    std::size_t total_entries() const noexcept {
        std::size_t n = 0;
        for (const auto& t : tables) n += t.size();
        return n;
    }

    std::size_t inferred_entries() const noexcept {
        std::size_t n = 0;
        for (const auto& t : tables) n += t.inferred_count();
        return n;
    }

    friend bool operator==(const NetworkState&, const NetworkState&) = default;
};

/// Outcome of one synchronous round.
struct RoundStats {
    std::size_t round = 0;  // round number just completed (1-based)
    double max_change = 0.0;
    std::size_t entries_added = 0;
    std::size_t entries_removed = 0;
};

struct RoundResult {
    NetworkState state;
    RoundStats stats;
};

inline NetworkState init_network(const Dataset& d) {
    NetworkState s;
    s.tables.reserve(d.users().size());
    for (UserId u : d.users()) {
        std::vector<TrustEntry> entries;
        for (const auto& e : d.out_edges(u))
            entries.push_back({e.target, e.value, Origin::direct, 1});
        s.tables.emplace_back(u, std::move(entries));
    }
    return s;
}

namespace detail {

struct Accumulator {
    double weighted = 0.0;  // sum of trust(X,i) * trust(i,Y)
    double weight = 0.0;    // sum of trust(X,i)
    std::uint32_t min_hops = std::numeric_limits<std::uint32_t>::max();
};

inline bool is_direct_neighbor(const TrustTable& own, UserId y) {
    const auto* e = own.find(y);
    return e != nullptr && e->origin == Origin::direct;
}

/// Recomputes one node's table from its own direct entries and the tables its
/// positively trusted direct neighbours published in the previous round. The
/// node sees nothing else of the network.
template <class NeighborLookup>
TrustTable recompute_table(const TrustTable& own, NeighborLookup&& published,
                           const PropagationConfig& cfg,
                           std::unordered_map<UserId, Accumulator>& acc) {
    acc.clear();
    const UserId x = own.owner();
    for (const auto& link : own.entries()) {
        if (link.origin != Origin::direct || !(link.trust > 0.0)) continue;
        const TrustTable* nt = published(link.target);
        if (nt == nullptr) continue;
        for (const auto& e : nt->entries()) {
            if (e.target == x || is_direct_neighbor(own, e.target)) continue;
            auto& a = acc[e.target];
            a.weighted += link.trust * e.trust;
            a.weight += link.trust;
            a.min_hops = std::min(a.min_hops, e.hops);
        }
    }

    std::vector<TrustEntry> out;
    out.reserve(own.size() + acc.size());
    for (const auto& e : own.entries())
        if (e.origin == Origin::direct) out.push_back(e);
    std::vector<UserId> retired(own.retired().begin(), own.retired().end());
    for (const auto& [target, a] : acc) {
        const double value = cfg.lambda * a.weighted / a.weight;
        const TrustEntry* before = own.find(target);
        const bool present = before != nullptr && before->origin == Origin::inferred;
        if (value >= cfg.store_threshold || value < 0.0 || (present && own.is_retired(target)))
            out.push_back({target, value, Origin::inferred, a.min_hops + 1});
        else if (present)
            retired.push_back(target);
    }
    return TrustTable(x, std::move(out), std::move(retired));
}

/// Compares the inferred entries of two versions of a table.
inline void diff_inferred(const TrustTable& before, const TrustTable& after, RoundStats& stats) {
    auto b = before.entries().begin(), be = before.entries().end();
    auto a = after.entries().begin(), ae = after.entries().end();
    auto skip_direct = [](auto& it, auto end) {
        while (it != end && it->origin == Origin::direct) ++it;
    };
    skip_direct(b, be);
    skip_direct(a, ae);
    while (b != be || a != ae) {
        if (a == ae || (b != be && b->target < a->target)) {
            stats.max_change = std::max(stats.max_change, std::abs(b->trust));
            ++stats.entries_removed;
            ++b;
        } else if (b == be || a->target < b->target) {
            stats.max_change = std::max(stats.max_change, std::abs(a->trust));
            ++stats.entries_added;
            ++a;
        } else {
            stats.max_change = std::max(stats.max_change, std::abs(a->trust - b->trust));
            ++a;
            ++b;
        }
        skip_direct(b, be);
        skip_direct(a, ae);
    }
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += jobs) fn(i, w);
        });
    }
    for (auto& t : workers) t.join();
}

}  // namespace detail

/// Trust from x to y by one application of the damped weighted average over
/// x's positively trusted direct neighbours that hold an entry for y.
/// Returns nullopt when no such neighbour exists.
inline std::optional<double> infer_trust(UserId x, UserId y, const NetworkState& state,
                                         double lambda) {
    const TrustTable& own = state.table(x);
    double weighted = 0.0, weight = 0.0;
    for (const auto& link : own.entries()) {
        if (link.origin != Origin::direct || !(link.trust > 0.0)) continue;
        const TrustTable* nt = state.find_table(link.target);
        if (nt == nullptr) continue;
        if (const auto* e = nt->find(y)) {
            weighted += link.trust * e->trust;
            weight += link.trust;
        }
    }
    if (weight == 0.0) return std::nullopt;
    return lambda * weighted / weight;
}

/// One synchronous round: every node reads only the round-k tables and writes
/// its round-k+1 table. Direct entries are carried over untouched.
inline RoundResult run_round(const NetworkState& state, const Dataset& d,
                             const PropagationConfig& cfg) {
    (void)d;  // tables already mirror the dataset's edges
    const std::size_t n = state.tables.size();
    const std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);

    RoundResult result;
    result.state.tables.resize(n);
    std::vector<RoundStats> per_worker(jobs);
    std::vector<std::unordered_map<UserId, detail::Accumulator>> scratch(jobs);

    auto published = [&state](UserId u) { return state.find_table(u); };
    detail::parallel_for(n, jobs, [&](std::size_t k, std::size_t w) {
        result.state.tables[k] =
            detail::recompute_table(state.tables[k], published, cfg, scratch[w]);
        detail::diff_inferred(state.tables[k], result.state.tables[k], per_worker[w]);
    });

    result.state.round = state.round + 1;
    result.state.converged = false;
    result.stats.round = result.state.round;
    for (const auto& s : per_worker) {
        result.stats.max_change = std::max(result.stats.max_change, s.max_change);
        result.stats.entries_added += s.entries_added;
        result.stats.entries_removed += s.entries_removed;
    }
    return result;
}

/// Runs rounds until the largest change is within tolerance (and no entry was
/// added or removed) or max_rounds is reached.
inline NetworkState propagate(const Dataset& d, const PropagationConfig& cfg,
                              std::vector<RoundStats>* trace = nullptr) {
    cfg.validate();
    NetworkState state = init_network(d);
    while (state.round < cfg.max_rounds) {
        RoundResult r = run_round(state, d, cfg);
        state = std::move(r.state);
        if (trace) trace->push_back(r.stats);
        if (r.stats.max_change <= cfg.tolerance && r.stats.entries_added == 0 &&
            r.stats.entries_removed == 0) {
            state.converged = true;
            break;
        }
    }
    return state;
}

inline std::optional<TrustEntry> query_trust(const NetworkState& state, UserId x, UserId y) {
    const TrustTable& t = state.table(x);
    if (const auto* e = t.find(y)) return *e;
    return std::nullopt;
}

}  // namespace trustgrid
