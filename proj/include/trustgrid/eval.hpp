#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "baselines.hpp"
#include "core.hpp"
#include "propagation.hpp"
#include "random.hpp"
#include "recommender.hpp"

namespace trustgrid {

class UnknownMethod : public Error {
public:
    explicit UnknownMethod(std::string_view name)
        : Error("unknown method '" + std::string(name) + "' (expected proposed|tidal|mole|avg|cf)") {}
};

class UnknownView : public Error {
public:
    explicit UnknownView(std::string_view name)
        : Error("unknown view '" + std::string(name) +
                "' (expected all|cold_start|heavy_raters|opinionated|niche_items|"
                "controversial_items)") {}
};

class EmptyInput : public Error {
public:
    explicit EmptyInput(std::string_view what) : Error(std::string(what) + ": empty input") {}
};

enum class Method { proposed, tidal, mole, avg, cf };

inline constexpr std::string_view method_name(Method m) {
    switch (m) {
        case Method::proposed: return "proposed";
        case Method::tidal: return "tidal";
        case Method::mole: return "mole";
        case Method::avg: return "avg";
        case Method::cf: return "cf";
    }
    return "?";
}

inline Method parse_method(std::string_view s) {
    for (Method m : {Method::proposed, Method::tidal, Method::mole, Method::avg, Method::cf})
        if (method_name(m) == s) return m;
    throw UnknownMethod(s);
}

/// Methods that search the trust network and so report a depth.
inline constexpr bool has_depth(Method m) {
    return m == Method::proposed || m == Method::tidal || m == Method::mole;
}

// ---------------------------------------------------------------------------
// Views
// ---------------------------------------------------------------------------

enum class ViewKind { all, cold_start, heavy_raters, opinionated, niche_items, controversial_items };

inline constexpr ViewKind kAllViews[] = {ViewKind::all,         ViewKind::cold_start,
                                         ViewKind::heavy_raters, ViewKind::opinionated,
                                         ViewKind::niche_items,  ViewKind::controversial_items};

inline constexpr std::string_view view_name(ViewKind v) {
    switch (v) {
        case ViewKind::all: return "all";
        case ViewKind::cold_start: return "cold_start";
        case ViewKind::heavy_raters: return "heavy_raters";
        case ViewKind::opinionated: return "opinionated";
        case ViewKind::niche_items: return "niche_items";
        case ViewKind::controversial_items: return "controversial_items";
    }
    return "?";
}

inline ViewKind parse_view(std::string_view s) {
    for (ViewKind v : kAllViews)
        if (view_name(v) == s) return v;
    throw UnknownView(s);
}

/// Classifies (user, item) pairs into views using per-user and per-item
/// rating counts and standard deviations over the full dataset.
///
///   cold_start           user gave 1 to 4 ratings
///   heavy_raters         user gave more than 10 ratings
///   opinionated          user gave more than 4 ratings with std dev > 1.5
///   niche_items          item received fewer than 5 ratings
///   controversial_items  item ratings have std dev > 1.5
class ViewClassifier {
public:
    explicit ViewClassifier(const Dataset& d) : data_(&d) {
        users_.resize(d.users().size());
        for (std::size_t k = 0; k < d.users().size(); ++k) {
            const auto rs = d.ratings_of(d.users()[k]);
            std::vector<int> v;
            for (const auto& r : rs) v.push_back(r.value);
            users_[k] = summarize(v);
        }
        items_.resize(d.items().size());
        for (std::size_t k = 0; k < d.items().size(); ++k) {
            std::vector<int> v;
            for (const auto& r : d.item_raters(d.items()[k])) v.push_back(r.value);
            items_[k] = summarize(v);
        }
    }

    bool contains(ViewKind view, UserId u, ItemId i) const {
        const auto& us = users_[data_->user_index(u)];
        const auto& is = items_[data_->item_index(i)];
        switch (view) {
            case ViewKind::all: return true;
            case ViewKind::cold_start: return us.count >= 1 && us.count <= 4;
            case ViewKind::heavy_raters: return us.count > 10;
            case ViewKind::opinionated: return us.count > 4 && us.stddev > 1.5;
            case ViewKind::niche_items: return is.count < 5;
            case ViewKind::controversial_items: return is.stddev > 1.5;
        }
        return false;
    }

private:
    struct Profile {
        std::size_t count = 0;
        double stddev = 0.0;
    };

    // Population standard deviation.
    static Profile summarize(const std::vector<int>& v) {
        Profile p;
        p.count = v.size();
        if (v.empty()) return p;
        double mean = 0.0;
        for (int x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (int x : v) ss += (x - mean) * (x - mean);
        p.stddev = std::sqrt(ss / static_cast<double>(v.size()));
        return p;
    }

    const Dataset* data_;
    std::vector<Profile> users_;
    std::vector<Profile> items_;
};

// ---------------------------------------------------------------------------
// Configuration and per-rating results
// ---------------------------------------------------------------------------

struct SampleSpec {
    double fraction = 1.0;
    std::uint64_t seed = 42;
};

inline const std::vector<double>& default_delta_thresholds() {
    static const std::vector<double> t{0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    return t;
}

struct EvalConfig {
    PropagationConfig propagation;
    int mole_horizon = 3;
    SampleSpec sample;
    std::vector<double> delta_thresholds = default_delta_thresholds();
    bool compute_deltas = true;  // also run avg and cf per held-out rating
    std::size_t jobs = 1;
};

/// Outcome of predicting one hidden rating.
struct HeldOut {
    UserId user;
    ItemId item;
    int actual = 0;
    std::optional<double> predicted;
    std::optional<int> depth;  // -1 for a miss; empty for methods without depth
    std::optional<double> rating_recall;
    std::size_t queries = 0;   // network node expansions spent on the query
    std::optional<double> delta_a;
    std::optional<double> delta_cf;

    std::optional<double> error() const {
        if (!predicted) return std::nullopt;
        return std::abs(*predicted - actual);
    }
};

/// Uniform sample of ratings in dataset order. fraction >= 1 keeps all.
inline std::vector<Rating> sample_ratings(const Dataset& d, const SampleSpec& s) {
    std::vector<Rating> out;
    if (s.fraction >= 1.0) {
        out.assign(d.ratings().begin(), d.ratings().end());
        return out;
    }
    Rng rng(s.seed);
    for (const auto& r : d.ratings())
        if (rng.bernoulli(s.fraction)) out.push_back(r);
    return out;
}

inline std::vector<TrustEdge> sample_edges(const Dataset& d, const SampleSpec& s) {
    std::vector<TrustEdge> out;
    if (s.fraction >= 1.0) {
        out.assign(d.trust_edges().begin(), d.trust_edges().end());
        return out;
    }
    Rng rng(s.seed);
    for (const auto& e : d.trust_edges())
        if (rng.bernoulli(s.fraction)) out.push_back(e);
    return out;
}

/// Shared read-only inputs for a leave-one-out run.
struct EvalContext {
    const Dataset* dataset = nullptr;
    const NetworkState* state = nullptr;  // required for Method::proposed
    EvalConfig config;
};

inline double recall_of(std::size_t used, const RatingView& view, UserId u, ItemId i) {
    std::size_t others = view.rater_count(i);
    if (view.rating(u, i)) --others;
    return others == 0 ? 0.0 : static_cast<double>(used) / static_cast<double>(others);
}

/// Hides one rating and asks the method to predict it.
inline HeldOut predict_held_out(Method method, const Rating& r, const EvalContext& ctx) {
    const Dataset& d = *ctx.dataset;
    const RatingView view(d, r.user, r.item);
    HeldOut h;
    h.user = r.user;
    h.item = r.item;
    h.actual = r.value;
    if (has_depth(method)) h.depth = -1;

    switch (method) {
        case Method::proposed: {
            if (ctx.state == nullptr) throw Error("proposed method needs a propagated network");
            if (auto rec = recommend(*ctx.state, r.user, r.item, view)) {
                h.predicted = rec->predicted;
                h.depth = rec->depth;
                h.rating_recall = rec->rating_recall;
            }
            break;
        }
        case Method::tidal: {
            auto t = tidal_trust_recommend(r.user, r.item, view);
            h.queries = t.queries_issued;
            if (t.predicted) {
                h.predicted = t.predicted;
                h.depth = t.depth;
                h.rating_recall = recall_of(t.raters_considered.size(), view, r.user, r.item);
            }
            break;
        }
        case Method::mole: {
            const auto scores = mole_trust_scores(r.user, d, ctx.config.mole_horizon);
            h.queries = scores.levels.size();
            auto p = weighted_deviation_predict(r.user, r.item, scores.scores, view);
            if (p.predicted) {
                h.predicted = p.predicted;
                int depth = ctx.config.mole_horizon;
                for (const auto& c : p.contributors) depth = std::min(depth, scores.levels.at(c.user));
                h.depth = depth;
                h.rating_recall = recall_of(p.contributors.size(), view, r.user, r.item);
            }
            break;
        }
        case Method::avg: {
            h.predicted = simple_average(r.item, view, r.user);
            if (h.predicted) h.rating_recall = 1.0;
            break;
        }
        case Method::cf: {
            auto p = correlation_cf_predict(r.user, r.item, view);
            if (p.predicted) {
                h.predicted = p.predicted;
                h.rating_recall = recall_of(p.contributors.size(), view, r.user, r.item);
            }
            break;
        }
    }

    if (ctx.config.compute_deltas) {
        if (auto avg = simple_average(r.item, view, r.user)) h.delta_a = std::abs(r.value - *avg);
        if (auto cf = correlation_cf_predict(r.user, r.item, view).predicted)
            h.delta_cf = std::abs(r.value - *cf);
    }
    return h;
}

inline std::vector<HeldOut> run_held_out(Method method, const std::vector<Rating>& ratings,
                                         const EvalContext& ctx) {
    std::vector<HeldOut> out(ratings.size());
    detail::parallel_for(ratings.size(), ctx.config.jobs, [&](std::size_t k, std::size_t) {
        out[k] = predict_held_out(method, ratings[k], ctx);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline double mae(const std::vector<double>& errors) {
    if (errors.empty()) throw EmptyInput("mae");
    double s = 0.0;
    for (double e : errors) s += std::abs(e);
    return s / static_cast<double>(errors.size());
}

/// Mean of per-user MAEs, so every user weighs the same regardless of how
/// many predictions they received. Users with no errors are skipped.
inline double maue(const std::vector<std::vector<double>>& per_user_errors) {
    double s = 0.0;
    std::size_t users = 0;
    for (const auto& errs : per_user_errors) {
        if (errs.empty()) continue;
        s += mae(errs);
        ++users;
    }
    if (users == 0) throw EmptyInput("maue");
    return s / static_cast<double>(users);
}

struct Coverage {
    std::optional<double> ratings;  // predicted / attempted
    std::optional<double> users;    // users with >= 1 prediction / users with >= 1 attempt
};

inline Coverage coverage_metrics(const std::vector<HeldOut>& results) {
    Coverage c;
    if (results.empty()) return c;
    std::size_t predicted = 0;
    std::map<UserId, bool> hit;
    for (const auto& h : results) {
        if (h.predicted) ++predicted;
        hit[h.user] = hit[h.user] || h.predicted.has_value();
    }
    c.ratings = static_cast<double>(predicted) / static_cast<double>(results.size());
    std::size_t covered = 0;
    for (const auto& [u, ok] : hit) covered += ok ? 1 : 0;
    c.users = static_cast<double>(covered) / static_cast<double>(hit.size());
    return c;
}

struct DeltaTriple {
    double delta_a = 0.0;
    double delta_r = 0.0;
    double delta_cf = 0.0;
};

struct DeltaPoint {
    double min_delta_a = 0.0;
    std::optional<double> mean_delta_r;
    std::optional<double> mean_delta_a;
    std::optional<double> mean_delta_cf;
    std::size_t n = 0;
};

/// For each threshold, the mean deviations over the held-out ratings whose
/// distance from the item average is at least that threshold.
inline std::vector<DeltaPoint> delta_curve(const std::vector<DeltaTriple>& triples,
                                           const std::vector<double>& thresholds) {
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw ValidationError("delta_curve thresholds must be ascending");
    std::vector<DeltaPoint> curve;
    for (double tau : thresholds) {
        DeltaPoint p;
        p.min_delta_a = tau;
        double r = 0.0, a = 0.0, cf = 0.0;
        for (const auto& t : triples) {
            if (t.delta_a < tau) continue;
            r += t.delta_r;
            a += t.delta_a;
            cf += t.delta_cf;
            ++p.n;
        }
        if (p.n > 0) {
            const auto n = static_cast<double>(p.n);
            p.mean_delta_r = r / n;
            p.mean_delta_a = a / n;
            p.mean_delta_cf = cf / n;
        }
        curve.push_back(p);
    }
    return curve;
}

/// Triples for held-out ratings where the item average, the method and the
/// correlation CF all produced a prediction.
inline std::vector<DeltaTriple> delta_triples(const std::vector<HeldOut>& results) {
    std::vector<DeltaTriple> out;
    for (const auto& h : results)
        if (h.predicted && h.delta_a && h.delta_cf) out.push_back({*h.delta_a, *h.error(), *h.delta_cf});
    return out;
}

/// Per-attempt depth counts; -1 counts misses.
inline std::map<int, std::size_t> depth_histogram(const std::vector<HeldOut>& results) {
    std::map<int, std::size_t> hist;
    for (const auto& h : results)
        if (h.depth) ++hist[*h.depth];
    return hist;
}

/// For each user, the largest depth at which one of their items was found;
/// histogram over users. Users with only misses are left out.
inline std::map<int, std::size_t> max_depth_per_user(const std::vector<HeldOut>& results) {
    std::map<UserId, int> deepest;
    for (const auto& h : results) {
        if (!h.depth || *h.depth < 0) continue;
        auto [it, fresh] = deepest.emplace(h.user, *h.depth);
        if (!fresh) it->second = std::max(it->second, *h.depth);
    }
    std::map<int, std::size_t> hist;
    for (const auto& [u, d] : deepest) ++hist[d];
    return hist;
}

/// Mean network queries per recommendation keyed by the depth of the hit.
inline std::map<int, double> queries_by_depth(const std::vector<HeldOut>& results) {
    std::map<int, std::pair<double, std::size_t>> acc;
    for (const auto& h : results) {
        if (!h.depth || *h.depth < 0) continue;
        auto& a = acc[*h.depth];
        a.first += static_cast<double>(h.queries);
        ++a.second;
    }
    std::map<int, double> out;
    for (const auto& [d, a] : acc) out[d] = a.first / static_cast<double>(a.second);
    return out;
}

struct EvalReport {
    std::string method;
    std::string view;
    std::size_t n_attempted = 0;
    std::size_t n_predicted = 0;
    std::optional<double> mae;
    std::optional<double> maue;
    std::optional<double> ratings_coverage;
    std::optional<double> users_coverage;
    std::optional<double> mean_rating_recall;
    std::map<int, std::size_t> depth_histogram;
    std::map<int, std::size_t> max_depth_histogram;
    std::map<int, double> queries_by_depth;
    std::vector<DeltaPoint> delta_curve;
};

inline EvalReport summarize(Method method, ViewKind view, const std::vector<HeldOut>& all,
                            const ViewClassifier& views, const std::vector<double>& thresholds) {
    std::vector<HeldOut> results;
    for (const auto& h : all)
        if (views.contains(view, h.user, h.item)) results.push_back(h);

    EvalReport rep;
    rep.method = std::string(method_name(method));
    rep.view = std::string(view_name(view));
    rep.n_attempted = results.size();

    std::vector<double> errors;
    std::map<UserId, std::vector<double>> per_user;
    double recall_sum = 0.0;
    for (const auto& h : results) {
        if (!h.predicted) continue;
        ++rep.n_predicted;
        errors.push_back(*h.error());
        per_user[h.user].push_back(*h.error());
        recall_sum += h.rating_recall.value_or(0.0);
    }
    if (!errors.empty()) {
        rep.mae = mae(errors);
        std::vector<std::vector<double>> grouped;
        for (auto& [u, e] : per_user) grouped.push_back(std::move(e));
        rep.maue = maue(grouped);
        rep.mean_rating_recall = recall_sum / static_cast<double>(rep.n_predicted);
    }
    const auto cov = coverage_metrics(results);
    rep.ratings_coverage = cov.ratings;
    rep.users_coverage = cov.users;
    rep.depth_histogram = depth_histogram(results);
    rep.max_depth_histogram = max_depth_per_user(results);
    rep.queries_by_depth = queries_by_depth(results);
    rep.delta_curve = delta_curve(delta_triples(results), thresholds);
    return rep;
}

inline EvalContext make_context(const Dataset& d, Method method, const EvalConfig& config,
                                const NetworkState* state, std::optional<NetworkState>& owned) {
    EvalContext ctx{&d, state, config};
    if (method == Method::proposed && state == nullptr) {
        PropagationConfig pc = config.propagation;
        pc.jobs = config.jobs;
        owned = propagate(d, pc);
        ctx.state = &*owned;
    }
    return ctx;
}

/// Leave-one-out over the (sampled) ratings, one report per requested view.
/// For the proposed method the trust network is propagated once: hiding a
/// rating does not change any trust edge.
inline std::vector<EvalReport> evaluate_views(const Dataset& d, Method method,
                                              const EvalConfig& config,
                                              const std::vector<ViewKind>& views,
                                              const NetworkState* state = nullptr) {
    std::optional<NetworkState> owned;
    const EvalContext ctx = make_context(d, method, config, state, owned);
    const auto held = run_held_out(method, sample_ratings(d, config.sample), ctx);
    const ViewClassifier classifier(d);
    std::vector<EvalReport> out;
    for (ViewKind v : views) out.push_back(summarize(method, v, held, classifier, config.delta_thresholds));
    return out;
}

inline EvalReport leave_one_out_ratings(const Dataset& d, Method method, const EvalConfig& config,
                                        const NetworkState* state = nullptr) {
    return evaluate_views(d, method, config, {ViewKind::all}, state).front();
}

inline EvalReport leave_one_out_ratings(const Dataset& d, std::string_view method,
                                        const EvalConfig& config,
                                        const NetworkState* state = nullptr) {
    return leave_one_out_ratings(d, parse_method(method), config, state);
}

// ---------------------------------------------------------------------------
// Leave-one-out on trust edges
// ---------------------------------------------------------------------------

struct TrustHeldOut {
    TrustEdge edge;
    std::optional<double> inferred;
};

struct TrustLooReport {
    std::size_t n_attempted = 0;
    std::size_t n_predicted = 0;
    std::optional<double> coverage;
    std::optional<double> mae;
    std::vector<TrustHeldOut> results;
};

/// Removes each (sampled) edge in turn, re-propagates, and compares the
/// inferred value for the pair with the removed one.
inline TrustLooReport leave_one_out_trust(const Dataset& d, const PropagationConfig& config,
                                          const SampleSpec& sample = {}, std::size_t jobs = 1) {
    const auto edges = sample_edges(d, sample);
    TrustLooReport rep;
    rep.results.resize(edges.size());
    PropagationConfig pc = config;
    pc.jobs = 1;
    detail::parallel_for(edges.size(), jobs, [&](std::size_t k, std::size_t) {
        const auto& e = edges[k];
        const Dataset reduced = d.without_trust_edge(e.source, e.target);
        const NetworkState state = propagate(reduced, pc);
        rep.results[k].edge = e;
        if (auto q = query_trust(state, e.source, e.target)) rep.results[k].inferred = q->trust;
    });
    rep.n_attempted = edges.size();
    std::vector<double> errors;
    for (const auto& r : rep.results)
        if (r.inferred) errors.push_back(std::abs(*r.inferred - r.edge.value));
    rep.n_predicted = errors.size();
    if (rep.n_attempted > 0)
        rep.coverage = static_cast<double>(rep.n_predicted) / static_cast<double>(rep.n_attempted);
    if (!errors.empty()) rep.mae = mae(errors);
    return rep;
}

}  // namespace trustgrid
