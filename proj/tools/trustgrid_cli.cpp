// trustgrid command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trustgrid/report.hpp"
#include "trustgrid/trustgrid.hpp"

namespace tg = trustgrid;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

// key=value logs on stderr, one event per line.
void log(std::string_view level, std::string_view msg, const json& fields = json::object()) {
    std::cerr << "level=" << level << " msg=\"" << msg << '"';
    for (const auto& [k, v] : fields.items()) std::cerr << ' ' << k << '=' << v.dump();
    std::cerr << '\n';
}

struct Options {
    std::string ratings;
    std::string trust;
    std::string snapshot;
    std::string out;
    tg::PropagationConfig prop;
    std::size_t jobs = 1;

    // synth
    tg::SyntheticSpec synth;
    std::string trust_mode = "binary";
    std::string out_ratings;
    std::string out_trust;

    // recommend / trust
    std::uint64_t user = 0;
    std::uint64_t item = 0;
    std::uint64_t from = 0;
    std::uint64_t to = 0;
    std::string method = "proposed";
    int horizon = 3;
    bool leave_one_out = false;

    // evaluate
    std::string view = "all";
    double sample = 1.0;
    std::uint64_t seed = 42;
};

void add_dataset_flags(CLI::App* cmd, Options& o, bool ratings_required, bool trust_required) {
    auto* r = cmd->add_option("--ratings", o.ratings, "ratings file: user item rating");
    auto* t = cmd->add_option("--trust", o.trust, "trust file: source target value");
    if (ratings_required) r->required();
    if (trust_required) t->required();
}

void add_propagation_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--lambda", o.prop.lambda, "damping factor in (0,1]")->capture_default_str();
    cmd->add_option("--threshold", o.prop.store_threshold, "store threshold for inferred trust")
        ->capture_default_str();
    cmd->add_option("--max-rounds", o.prop.max_rounds, "round limit")->capture_default_str();
    cmd->add_option("--tol", o.prop.tolerance, "convergence tolerance")->capture_default_str();
    cmd->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
}

json propagation_json(const tg::PropagationConfig& p) {
    return {{"lambda", p.lambda},
            {"threshold", p.store_threshold},
            {"max_rounds", p.max_rounds},
            {"tol", p.tolerance}};
}

tg::Dataset load(const Options& o) {
    tg::BuildWarnings warn;
    auto d = tg::load_dataset(o.ratings, o.trust, &warn);
    if (warn.duplicate_ratings || warn.duplicate_edges || warn.self_edges)
        log("warn", "input records adjusted",
            {{"duplicate_ratings", warn.duplicate_ratings},
             {"duplicate_edges", warn.duplicate_edges},
             {"self_edges_dropped", warn.self_edges}});
    return d;
}

void print_config(std::ostream& out, const std::string& command, const json& config) {
    out << "# " << command << ' ' << config.dump() << '\n';
}

/// Network state for the proposed method, loaded from the snapshot cache when
/// present, otherwise propagated (and cached if a snapshot path was given).
tg::NetworkState network_for(const tg::Dataset& d, const Options& o) {
    tg::PropagationConfig pc = o.prop;
    pc.jobs = o.jobs;
    if (!o.snapshot.empty() && std::filesystem::exists(o.snapshot)) {
        auto snap = tg::load_snapshot(o.snapshot);
        if (snap.lambda != pc.lambda || snap.store_threshold != pc.store_threshold)
            throw tg::ValidationError("snapshot " + o.snapshot + " was built with lambda=" +
                                      tg::format_real(snap.lambda) + " threshold=" +
                                      tg::format_real(snap.store_threshold) +
                                      "; rerun propagate or pass matching flags");
        tg::check_snapshot_matches(snap.state, d);
        log("info", "loaded snapshot", {{"path", o.snapshot}, {"round", snap.state.round}});
        return std::move(snap.state);
    }
    auto state = tg::propagate(d, pc);
    log("info", "propagated", {{"rounds", state.round}, {"converged", state.converged}});
    if (!o.snapshot.empty()) {
        tg::save_snapshot(o.snapshot, state, pc.lambda, pc.store_threshold);
        log("info", "wrote snapshot", {{"path", o.snapshot}});
    }
    return state;
}

/// Writes to --out when given, otherwise to stdout.
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
    if (path.empty()) {
        fn(std::cout);
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw tg::IoError("cannot write " + path);
    fn(f);
}

int cmd_synth(const Options& o) {
    tg::SyntheticSpec spec = o.synth;
    if (o.trust_mode == "binary")
        spec.trust_value_mode = tg::TrustValueMode::binary;
    else if (o.trust_mode == "uniform_signed")
        spec.trust_value_mode = tg::TrustValueMode::uniform_signed;
    else
        throw tg::ValidationError("unknown trust mode '" + o.trust_mode + "'");
    const auto d = tg::generate_synthetic(spec);

    auto write = [&](const std::string& path, auto&& writer) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw tg::IoError("cannot write " + path);
        f << "# trustgrid synth users=" << spec.n_users << " items=" << spec.n_items
          << " degree=" << tg::format_real(spec.avg_out_degree)
          << " ratings_per_user=" << tg::format_real(spec.avg_ratings_per_user)
          << " trust_mode=" << o.trust_mode << " locality=" << tg::format_real(spec.locality)
          << " seed=" << spec.rng_seed << '\n';
        writer(f, d);
    };
    write(o.out_ratings, [](std::ostream& f, const tg::Dataset& ds) { tg::write_ratings(f, ds); });
    write(o.out_trust, [](std::ostream& f, const tg::Dataset& ds) { tg::write_trust(f, ds); });
    const auto s = tg::dataset_stats(d);
    std::cout << "users " << s.n_users << "\nitems " << s.n_items << "\nratings " << s.n_ratings
              << "\ntrust_edges " << s.n_trust_edges << '\n';
    return 0;
}

void print_stats(std::ostream& out, const tg::DatasetStats& s) {
    out << "users " << s.n_users << '\n'
        << "items " << s.n_items << '\n'
        << "ratings " << s.n_ratings << '\n'
        << "trust_edges " << s.n_trust_edges << '\n'
        << "avg_neighbors " << tg::format_real(s.avg_neighbors) << '\n'
        << "avg_ratings_per_user " << tg::format_real(s.avg_ratings_per_user) << '\n'
        << "avg_ratings_per_item " << tg::format_real(s.avg_ratings_per_item) << '\n';
}

int cmd_stats(const Options& o) {
    const auto d = load(o);
    print_stats(std::cout, tg::dataset_stats(d));
    return 0;
}

int cmd_ingest(const Options& o) {
    tg::BuildWarnings warn;
    const auto d = tg::load_dataset(o.ratings, o.trust, &warn);
    std::cout << "duplicate_ratings " << warn.duplicate_ratings << '\n'
              << "duplicate_edges " << warn.duplicate_edges << '\n'
              << "self_edges_dropped " << warn.self_edges << '\n';
    print_stats(std::cout, tg::dataset_stats(d));
    if (!o.out_ratings.empty())
        emit(o.out_ratings, [&](std::ostream& f) { tg::write_ratings(f, d); });
    if (!o.out_trust.empty()) emit(o.out_trust, [&](std::ostream& f) { tg::write_trust(f, d); });
    return 0;
}

int cmd_propagate(const Options& o) {
    const auto d = load(o);
    tg::PropagationConfig pc = o.prop;
    pc.jobs = o.jobs;
    std::vector<tg::RoundStats> trace;
    const auto state = tg::propagate(d, pc, &trace);
    print_config(std::cout, "propagate", propagation_json(pc));
    for (const auto& r : trace)
        std::cout << "round " << r.round << " max_change " << tg::format_real(r.max_change)
                  << " added " << r.entries_added << " removed " << r.entries_removed << '\n';
    std::cout << "rounds " << state.round << '\n'
              << "converged " << (state.converged ? "true" : "false") << '\n'
              << "direct_entries " << state.total_entries() - state.inferred_entries() << '\n'
              << "inferred_entries " << state.inferred_entries() << '\n';
    if (!o.snapshot.empty()) {
        tg::save_snapshot(o.snapshot, state, pc.lambda, pc.store_threshold);
        log("info", "wrote snapshot", {{"path", o.snapshot}});
    }
    return 0;
}

void print_contributors(const std::vector<tg::Contributor>& cs) {
    for (const auto& c : cs)
        std::cout << "contributor " << c.user.value << " trust " << tg::format_real(c.trust)
                  << " rating " << c.rating << '\n';
}

int cmd_recommend(const Options& o) {
    const auto d = load(o);
    const auto method = tg::parse_method(o.method);
    const tg::UserId user{o.user};
    const tg::ItemId item{o.item};
    if (!d.has_user(user)) throw tg::UnknownUser(user.value);
    if (!d.has_item(item)) throw tg::UnknownItem(item.value);

    json cfg = propagation_json(o.prop);
    cfg["method"] = o.method;
    cfg["user"] = o.user;
    cfg["item"] = o.item;
    if (method == tg::Method::mole) cfg["horizon"] = o.horizon;

    std::optional<double> predicted;
    std::optional<double> confidence;
    std::optional<double> recall;
    std::optional<int> depth;
    std::vector<tg::Contributor> contributors;
    const tg::RatingView view(d);

    switch (method) {
        case tg::Method::proposed: {
            const auto state = network_for(d, o);
            if (auto rec = tg::recommend(state, user, item, view)) {
                predicted = rec->predicted;
                confidence = rec->confidence;
                recall = rec->rating_recall;
                depth = rec->depth;
                contributors = rec->contributors;
            }
            break;
        }
        case tg::Method::tidal: {
            auto t = tg::tidal_trust_recommend(user, item, view);
            predicted = t.predicted;
            contributors = t.raters_considered;
            if (predicted) depth = t.depth;
            break;
        }
        case tg::Method::mole: {
            const auto scores = tg::mole_trust_scores(user, d, o.horizon);
            auto p = tg::weighted_deviation_predict(user, item, scores.scores, view);
            predicted = p.predicted;
            contributors = p.contributors;
            break;
        }
        case tg::Method::avg: predicted = tg::simple_average(item, view, user); break;
        case tg::Method::cf: {
            auto p = tg::correlation_cf_predict(user, item, view);
            predicted = p.predicted;
            contributors = p.contributors;
            break;
        }
    }
    if (predicted && !recall && method != tg::Method::avg)
        recall = tg::recall_of(contributors.size(), view, user, item);

    print_config(std::cout, "recommend", cfg);
    std::cout << "predicted " << (predicted ? tg::format_real(*predicted) : "none") << '\n'
              << "confidence " << (confidence ? tg::format_real(*confidence) : "none") << '\n'
              << "contributors " << contributors.size() << '\n'
              << "rating_recall " << (recall ? tg::format_real(*recall) : "none") << '\n'
              << "depth " << (depth ? std::to_string(*depth) : "none") << '\n';
    print_contributors(contributors);
    return 0;
}

int cmd_trust(const Options& o) {
    const auto d = load(o);
    json cfg = propagation_json(o.prop);
    if (o.leave_one_out) {
        cfg["sample"] = o.sample;
        cfg["seed"] = o.seed;
        const auto rep = tg::leave_one_out_trust(d, o.prop, {o.sample, o.seed}, o.jobs);
        print_config(std::cout, "trust --leave-one-out", cfg);
        auto show = [](const std::optional<double>& v) {
            return v ? tg::format_real(*v) : std::string("none");
        };
        std::cout << "attempted " << rep.n_attempted << '\n'
                  << "predicted " << rep.n_predicted << '\n'
                  << "coverage " << show(rep.coverage) << '\n'
                  << "mae " << show(rep.mae) << '\n';
        return 0;
    }

    const tg::UserId from{o.from};
    const tg::UserId to{o.to};
    if (!d.has_user(from)) throw tg::UnknownUser(from.value);
    if (!d.has_user(to)) throw tg::UnknownUser(to.value);
    cfg["method"] = o.method;
    cfg["from"] = o.from;
    cfg["to"] = o.to;

    const auto method = tg::parse_method(o.method);
    print_config(std::cout, "trust", cfg);
    switch (method) {
        case tg::Method::proposed: {
            const auto state = network_for(d, o);
            if (auto e = tg::query_trust(state, from, to))
                std::cout << "trust " << tg::format_real(e->trust) << '\n'
                          << "origin " << tg::to_string(e->origin) << '\n'
                          << "hops " << e->hops << '\n';
            else
                std::cout << "trust none\n";
            break;
        }
        case tg::Method::tidal: {
            auto t = from == to ? std::nullopt : tg::tidal_trust_infer(from, to, d);
            std::cout << "trust " << (t ? tg::format_real(*t) : "none") << '\n';
            break;
        }
        case tg::Method::mole: {
            const auto s = tg::mole_trust_scores(from, d, o.horizon);
            auto it = s.scores.find(to);
            std::cout << "trust " << (it != s.scores.end() ? tg::format_real(it->second) : "none")
                      << '\n';
            break;
        }
        default: throw tg::ValidationError("trust supports --method proposed|tidal|mole");
    }
    return 0;
}

int cmd_evaluate(const Options& o) {
    const auto d = load(o);
    tg::EvalConfig cfg;
    cfg.propagation = o.prop;
    cfg.mole_horizon = o.horizon;
    cfg.sample = {o.sample, o.seed};
    cfg.jobs = o.jobs;

    std::vector<tg::Method> methods;
    if (o.method == "all")
        methods = {tg::Method::proposed, tg::Method::tidal, tg::Method::mole, tg::Method::avg,
                   tg::Method::cf};
    else
        methods = {tg::parse_method(o.method)};

    std::vector<tg::ViewKind> views;
    if (o.view == "all-views")
        views.assign(std::begin(tg::kAllViews), std::end(tg::kAllViews));
    else
        views = {tg::parse_view(o.view)};

    std::optional<tg::NetworkState> state;
    std::vector<tg::EvalReport> reports;
    for (auto m : methods) {
        if (m == tg::Method::proposed && !state) state = network_for(d, o);
        log("info", "evaluating", {{"method", tg::method_name(m)}});
        auto r = tg::evaluate_views(d, m, cfg, views, state ? &*state : nullptr);
        reports.insert(reports.end(), r.begin(), r.end());
    }

    const json config = tg::to_json(cfg);
    print_config(std::cout, "evaluate", config);
    tg::write_table(std::cout, reports);
    for (const auto& r : reports) {
        if (r.view != "all" && views.size() > 1) continue;
        std::cout << '\n';
        tg::write_depth_table(std::cout, r);
        tg::write_delta_table(std::cout, r);
    }
    if (!o.out.empty()) {
        emit(o.out, [&](std::ostream& f) {
            for (const auto& r : reports) f << tg::to_json(r, config).dump() << '\n';
        });
        log("info", "wrote report", {{"path", o.out}, {"records", reports.size()}});
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trustgrid: trust propagation and trust-aware recommendation"};
    app.require_subcommand(1);
    Options o;

    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
    synth->add_option("--users", o.synth.n_users)->capture_default_str();
    synth->add_option("--items", o.synth.n_items)->capture_default_str();
    synth->add_option("--degree", o.synth.avg_out_degree, "mean trust out-degree")
        ->capture_default_str();
    synth->add_option("--ratings-per-user", o.synth.avg_ratings_per_user)->capture_default_str();
    synth->add_option("--trust-mode", o.trust_mode, "binary|uniform_signed")->capture_default_str();
    synth->add_option("--locality", o.synth.locality, "fraction of edges to ring neighbours")
        ->capture_default_str();
    synth->add_option("--seed", o.synth.rng_seed)->capture_default_str();
    synth->add_option("--out-ratings", o.out_ratings)->required();
    synth->add_option("--out-trust", o.out_trust)->required();

    auto* ingest = app.add_subcommand("ingest", "parse and validate input files");
    add_dataset_flags(ingest, o, false, false);
    ingest->add_option("--out-ratings", o.out_ratings, "write normalised ratings");
    ingest->add_option("--out-trust", o.out_trust, "write normalised trust edges");

    auto* stats = app.add_subcommand("stats", "dataset counts and averages");
    add_dataset_flags(stats, o, false, false);

    auto* prop = app.add_subcommand("propagate", "run trust propagation to convergence");
    add_dataset_flags(prop, o, false, true);
    add_propagation_flags(prop, o);
    prop->add_option("--snapshot", o.snapshot, "write the converged network here");

    auto* rec = app.add_subcommand("recommend", "predict one user's rating of one item");
    add_dataset_flags(rec, o, true, true);
    add_propagation_flags(rec, o);
    rec->add_option("--user", o.user)->required();
    rec->add_option("--item", o.item)->required();
    rec->add_option("--method", o.method, "proposed|tidal|mole|avg|cf")->capture_default_str();
    rec->add_option("--horizon", o.horizon, "MoleTrust horizon")->capture_default_str();
    rec->add_option("--snapshot", o.snapshot, "snapshot cache for the proposed method");

    auto* trust = app.add_subcommand("trust", "query inferred trust or run trust leave-one-out");
    add_dataset_flags(trust, o, false, true);
    add_propagation_flags(trust, o);
    trust->add_option("--from", o.from);
    trust->add_option("--to", o.to);
    trust->add_option("--method", o.method, "proposed|tidal|mole")->capture_default_str();
    trust->add_option("--horizon", o.horizon, "MoleTrust horizon")->capture_default_str();
    trust->add_option("--snapshot", o.snapshot, "snapshot cache for the proposed method");
    trust->add_flag("--leave-one-out", o.leave_one_out, "hide each trust edge and predict it");
    trust->add_option("--sample", o.sample, "fraction of edges")->capture_default_str();
    trust->add_option("--seed", o.seed)->capture_default_str();

    auto* eval = app.add_subcommand("evaluate", "leave-one-out evaluation on ratings");
    add_dataset_flags(eval, o, true, true);
    add_propagation_flags(eval, o);
    eval->add_option("--method", o.method, "proposed|tidal|mole|avg|cf|all")->capture_default_str();
    eval->add_option("--view", o.view,
                     "all|cold_start|heavy_raters|opinionated|niche_items|controversial_items|"
                     "all-views")
        ->capture_default_str();
    eval->add_option("--sample", o.sample, "fraction of ratings to hold out")->capture_default_str();
    eval->add_option("--seed", o.seed, "sampling seed")->capture_default_str();
    eval->add_option("--horizon", o.horizon, "MoleTrust horizon")->capture_default_str();
    eval->add_option("--out", o.out, "line-delimited JSON report");
    eval->add_option("--snapshot", o.snapshot, "snapshot cache for the proposed method");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (trust->parsed() && !o.leave_one_out && (trust->count("--from") == 0 || trust->count("--to") == 0)) {
            std::cerr << "trust: --from and --to are required unless --leave-one-out is given\n";
            return kExitUsage;
        }
        if (synth->parsed()) return cmd_synth(o);
        if (ingest->parsed()) return cmd_ingest(o);
        if (stats->parsed()) return cmd_stats(o);
        if (prop->parsed()) return cmd_propagate(o);
        if (rec->parsed()) return cmd_recommend(o);
        if (trust->parsed()) return cmd_trust(o);
        if (eval->parsed()) return cmd_evaluate(o);
    } catch (const tg::Error& e) {
        log("error", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        log("error", e.what());
        return kExitData;
    }
    return kExitUsage;
}
