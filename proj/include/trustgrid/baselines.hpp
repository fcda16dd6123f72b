#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "core.hpp"

namespace trustgrid {

// ---------------------------------------------------------------------------
// TidalTrust
// ---------------------------------------------------------------------------

struct TidalResult {
    std::optional<double> predicted;
    int depth = -1;                         // -1: no rater reachable
    std::vector<Contributor> raters_considered;
    std::size_t queries_issued = 0;         // nodes whose neighbour lists were fetched
};

/// Breadth-first search from a source over positively trusted edges, kept
/// level by level so the shortest-path DAG can be read back for any sink.
class TidalSearch {
public:
    TidalSearch(const Dataset& d, UserId source) : data_(&d), source_(source) {
        if (!d.has_user(source)) throw UnknownUser(source.value);
        depth_.emplace(source, 0);
        frontier_.push_back(source);
    }

    UserId source() const noexcept { return source_; }
    int current_depth() const noexcept { return level_; }
    bool exhausted() const noexcept { return frontier_.empty(); }
    std::size_t queries_issued() const noexcept { return queries_; }

    std::optional<int> depth_of(UserId u) const {
        auto it = depth_.find(u);
        if (it == depth_.end()) return std::nullopt;
        return it->second;
    }

    /// Expands the current frontier by one level.
    void expand() {
        std::vector<UserId> next;
        for (UserId u : frontier_) {
            ++queries_;
            for (const auto& e : data_->out_edges(u)) {
                if (!(e.value > 0.0)) continue;
                auto [it, fresh] = depth_.emplace(e.target, level_ + 1);
                if (fresh) next.push_back(e.target);
                if (it->second == level_ + 1) preds_[e.target].push_back({u, e.value});
            }
        }
        frontier_ = std::move(next);
        ++level_;
    }

    /// Expands until the sink is reached or the graph is exhausted.
    bool reach(UserId sink) {
        while (!depth_.contains(sink) && !exhausted()) expand();
        return depth_.contains(sink);
    }

    /// Inferred trust in a sink that has already been reached: a weighted
    /// average of the trust each shortest-path successor has in the sink,
    /// restricted to edges at or above the strongest path's weakest link.
    std::optional<double> trust_in(UserId sink) const {
        auto dit = depth_.find(sink);
        if (dit == depth_.end() || sink == source_) return std::nullopt;
        const int d = dit->second;

        // Nodes of the shortest-path DAG that lead to the sink, with successor links.
        struct Link {
            UserId to;
            double weight;
        };
        std::unordered_map<UserId, std::vector<Link>> succ;
        std::vector<std::vector<UserId>> by_level(static_cast<std::size_t>(d) + 1);
        std::unordered_set<UserId> seen{sink};
        by_level[static_cast<std::size_t>(d)].push_back(sink);
        for (int lvl = d; lvl > 0; --lvl) {
            for (UserId v : by_level[static_cast<std::size_t>(lvl)]) {
                auto pit = preds_.find(v);
                if (pit == preds_.end()) continue;
                for (const auto& p : pit->second) {
                    succ[p.from].push_back({v, p.weight});
                    if (seen.insert(p.from).second)
                        by_level[static_cast<std::size_t>(lvl - 1)].push_back(p.from);
                }
            }
        }

        // Strength of the best path: max over paths of the minimum edge weight.
        std::unordered_map<UserId, double> best{{sink, std::numeric_limits<double>::infinity()}};
        for (int lvl = d - 1; lvl >= 0; --lvl) {
            for (UserId v : by_level[static_cast<std::size_t>(lvl)]) {
                double b = -std::numeric_limits<double>::infinity();
                for (const auto& l : succ[v]) b = std::max(b, std::min(l.weight, best.at(l.to)));
                best[v] = b;
            }
        }
        const double max_strength = best.at(source_);

        std::unordered_map<UserId, double> trust;
        for (int lvl = d - 1; lvl >= 0; --lvl) {
            for (UserId v : by_level[static_cast<std::size_t>(lvl)]) {
                if (lvl == d - 1) {
                    // Direct statement about the sink.
                    for (const auto& l : succ[v])
                        if (l.to == sink) trust[v] = l.weight;
                    continue;
                }
                double num = 0.0, den = 0.0;
                for (const auto& l : succ[v]) {
                    if (l.weight < max_strength) continue;
                    auto t = trust.find(l.to);
                    if (t == trust.end()) continue;
                    num += l.weight * t->second;
                    den += l.weight;
                }
                if (den > 0.0) trust[v] = num / den;
            }
        }
        auto it = trust.find(source_);
        if (it == trust.end()) return std::nullopt;
        return it->second;
    }

private:
    struct Pred {
        UserId from;
        double weight;
    };
    const Dataset* data_;
    UserId source_;
    int level_ = 0;
    std::size_t queries_ = 0;
    std::vector<UserId> frontier_;
    std::unordered_map<UserId, int> depth_;
    std::unordered_map<UserId, std::vector<Pred>> preds_;
};

inline std::optional<double> tidal_trust_infer(UserId source, UserId sink, const Dataset& d) {
    if (source == sink) throw ValidationError("tidal_trust_infer: source equals sink");
    if (!d.has_user(sink)) throw UnknownUser(sink.value);
    TidalSearch search(d, source);
    if (!search.reach(sink)) return std::nullopt;
    return search.trust_in(sink);
}

/// Raters at the minimum depth holding a rating, narrowed to those with the
/// highest inferred trust, averaged with trust weights.
inline TidalResult tidal_trust_recommend(UserId source, ItemId item, const RatingView& view) {
    const Dataset& d = view.dataset();
    TidalResult result;
    if (!d.has_item(item)) throw UnknownItem(item.value);

    std::vector<ItemRating> raters;
    view.for_each_rater(item, [&](const ItemRating& r) {
        if (r.user != source) raters.push_back(r);
    });

    TidalSearch search(d, source);
    std::vector<ItemRating> at_depth;
    while (at_depth.empty() && !raters.empty() && !search.exhausted()) {
        search.expand();
        for (const auto& r : raters)
            if (search.depth_of(r.user) == search.current_depth()) at_depth.push_back(r);
    }
    result.queries_issued = search.queries_issued();
    if (at_depth.empty()) return result;

    std::vector<Contributor> scored;
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& r : at_depth) {
        if (auto t = search.trust_in(r.user)) {
            scored.push_back({r.user, *t, r.value});
            top = std::max(top, *t);
        }
    }
    if (scored.empty()) return result;

    constexpr double kTieTolerance = 1e-12;
    double num = 0.0, den = 0.0;
    for (const auto& c : scored) {
        if (c.trust < top - kTieTolerance) continue;
        result.raters_considered.push_back(c);
        num += c.trust * c.rating;
        den += c.trust;
    }
    result.predicted = std::clamp(num / den, double(kMinRating), double(kMaxRating));
    result.depth = search.current_depth();
    return result;
}

// ---------------------------------------------------------------------------
// MoleTrust
// ---------------------------------------------------------------------------

struct MoleScores {
    UserId source;
    int horizon = 3;
    std::unordered_map<UserId, double> scores;
    std::unordered_map<UserId, int> levels;  // BFS level of every scored node
};

/// Level-by-level walk from the source. Only edges from level i to level i+1
/// are used, which removes cycles. A node's score is the average of its
/// predecessors' statements about it, weighted by the predecessors' scores;
/// only positively scored nodes are expanded.
inline MoleScores mole_trust_scores(UserId source, const Dataset& d, int horizon = 3) {
    if (horizon < 1) throw ValidationError("MoleTrust horizon must be >= 1");
    if (!d.has_user(source)) throw UnknownUser(source.value);

    MoleScores out;
    out.source = source;
    out.horizon = horizon;

    std::unordered_map<UserId, int> level{{source, 0}};
    std::vector<std::pair<UserId, double>> frontier{{source, 1.0}};
    for (int lvl = 0; lvl < horizon && !frontier.empty(); ++lvl) {
        std::unordered_map<UserId, std::pair<double, double>> acc;  // num, den
        std::vector<UserId> next;
        for (const auto& [u, score] : frontier) {
            if (!(score > 0.0)) continue;
            for (const auto& e : d.out_edges(u)) {
                auto [it, fresh] = level.emplace(e.target, lvl + 1);
                if (fresh) next.push_back(e.target);
                if (it->second != lvl + 1) continue;
                auto& a = acc[e.target];
                a.first += score * e.value;
                a.second += score;
            }
        }
        std::sort(next.begin(), next.end());
        frontier.clear();
        for (UserId w : next) {
            const auto& a = acc.at(w);
            const double s = a.first / a.second;
            out.scores.emplace(w, s);
            out.levels.emplace(w, lvl + 1);
            frontier.emplace_back(w, s);
        }
    }
    return out;
}

struct WeightedPrediction {
    std::optional<double> predicted;
    std::vector<Contributor> contributors;
};

/// Mean-centred weighted prediction: the user's mean plus the weighted
/// average deviation of weighted raters from their own means, clamped to the
/// rating scale.
inline WeightedPrediction weighted_deviation_predict(
    UserId a, ItemId i, const std::unordered_map<UserId, double>& weights,
    const RatingView& view) {
    WeightedPrediction out;
    double num = 0.0, den = 0.0;
    view.for_each_rater(i, [&](const ItemRating& r) {
        if (r.user == a) return;
        auto w = weights.find(r.user);
        if (w == weights.end() || !(w->second > 0.0)) return;
        num += w->second * (r.value - view.mean_rating(r.user));
        den += w->second;
        out.contributors.push_back({r.user, w->second, r.value});
    });
    if (out.contributors.empty()) return out;
    double mean_a;
    try {
        mean_a = view.mean_rating(a);
    } catch (const NoRatings&) {
        out.contributors.clear();
        return out;
    }
    out.predicted = std::clamp(mean_a + num / den, double(kMinRating), double(kMaxRating));
    return out;
}

inline std::optional<double> mole_trust_predict(UserId a, ItemId i,
                                                const std::unordered_map<UserId, double>& weights,
                                                const RatingView& view) {
    return weighted_deviation_predict(a, i, weights, view).predicted;
}

// ---------------------------------------------------------------------------
// Correlation CF and simple average
// ---------------------------------------------------------------------------

/// Pearson correlation over co-rated items. nullopt when fewer than two items
/// are shared or either side has no variance on them.
inline std::optional<double> pearson_similarity(UserId u, UserId v, const RatingView& view) {
    const Dataset& d = view.dataset();
    const auto ru = d.ratings_of(u);
    const auto rv = d.ratings_of(v);
    std::vector<std::pair<int, int>> common;
    auto a = ru.begin();
    auto b = rv.begin();
    while (a != ru.end() && b != rv.end()) {
        if (a->item < b->item) {
            ++a;
        } else if (b->item < a->item) {
            ++b;
        } else {
            if (!view.is_hidden(u, a->item) && !view.is_hidden(v, b->item))
                common.emplace_back(a->value, b->value);
            ++a;
            ++b;
        }
    }
    if (common.size() < 2) return std::nullopt;
    double mu = 0.0, mv = 0.0;
    for (auto [x, y] : common) {
        mu += x;
        mv += y;
    }
    mu /= static_cast<double>(common.size());
    mv /= static_cast<double>(common.size());
    double cov = 0.0, vu = 0.0, vv = 0.0;
    for (auto [x, y] : common) {
        cov += (x - mu) * (y - mv);
        vu += (x - mu) * (x - mu);
        vv += (y - mv) * (y - mv);
    }
    if (vu == 0.0 || vv == 0.0) return std::nullopt;
    return std::clamp(cov / std::sqrt(vu * vv), -1.0, 1.0);
}

/// Correlation-based CF: the mean-centred formula with positive Pearson
/// similarities as weights.
inline WeightedPrediction correlation_cf_predict(UserId a, ItemId i, const RatingView& view) {
    std::unordered_map<UserId, double> weights;
    view.for_each_rater(i, [&](const ItemRating& r) {
        if (r.user == a) return;
        if (auto s = pearson_similarity(a, r.user, view); s && *s > 0.0) weights.emplace(r.user, *s);
    });
    return weighted_deviation_predict(a, i, weights, view);
}

inline std::optional<double> simple_average(ItemId item, const RatingView& view,
                                            std::optional<UserId> exclude = std::nullopt) {
    double sum = 0.0;
    std::size_t n = 0;
    view.for_each_rater(item, [&](const ItemRating& r) {
        if (exclude && r.user == *exclude) return;
        sum += r.value;
        ++n;
    });
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

}  // namespace trustgrid
