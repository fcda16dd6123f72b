#pragma once

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "eval.hpp"

namespace trustgrid {

namespace detail {

inline nlohmann::json opt(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class V>
nlohmann::json keyed(const std::map<int, V>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : m) j[std::to_string(k)] = v;
    return j;
}

inline std::string fixed(const std::optional<double>& v, int precision = 4) {
    if (!v) return "-";
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << *v;
    return s.str();
}

}  // namespace detail

/// One machine-readable record per (method, view). Field names:
///
///   method, view, n_attempted, n_predicted, mae, maue, ratings_coverage,
///   users_coverage, mean_rating_recall, depth_histogram,
///   max_depth_histogram, queries_by_depth, delta_curve, config
///
/// delta_curve items carry min_delta_a, mean_delta_r, mean_delta_a,
/// mean_delta_cf and n. Undefined metrics are null.
inline nlohmann::json to_json(const EvalReport& r, const nlohmann::json& config = nullptr) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : r.delta_curve)
        curve.push_back({{"min_delta_a", p.min_delta_a},
                         {"mean_delta_r", detail::opt(p.mean_delta_r)},
                         {"mean_delta_a", detail::opt(p.mean_delta_a)},
                         {"mean_delta_cf", detail::opt(p.mean_delta_cf)},
                         {"n", p.n}});
    nlohmann::json j = nlohmann::json::object();
    j["method"] = r.method;
    j["view"] = r.view;
    j["n_attempted"] = r.n_attempted;
    j["n_predicted"] = r.n_predicted;
    j["mae"] = detail::opt(r.mae);
    j["maue"] = detail::opt(r.maue);
    j["ratings_coverage"] = detail::opt(r.ratings_coverage);
    j["users_coverage"] = detail::opt(r.users_coverage);
    j["mean_rating_recall"] = detail::opt(r.mean_rating_recall);
    j["depth_histogram"] = detail::keyed(r.depth_histogram);
    j["max_depth_histogram"] = detail::keyed(r.max_depth_histogram);
    j["queries_by_depth"] = detail::keyed(r.queries_by_depth);
    j["delta_curve"] = curve;
    j["config"] = config;
    return j;
}

inline nlohmann::json to_json(const EvalConfig& c, std::string_view extra_key = {},
                              const nlohmann::json& extra = nullptr) {
    nlohmann::json j{{"lambda", c.propagation.lambda},
                     {"threshold", c.propagation.store_threshold},
                     {"max_rounds", c.propagation.max_rounds},
                     {"tol", c.propagation.tolerance},
                     {"mole_horizon", c.mole_horizon},
                     {"sample", c.sample.fraction},
                     {"seed", c.sample.seed},
                     {"delta_thresholds", c.delta_thresholds}};
    if (!extra_key.empty()) j[std::string(extra_key)] = extra;
    return j;
}

inline void write_table(std::ostream& out, const std::vector<EvalReport>& reports) {
    out << std::left << std::setw(10) << "method" << std::setw(21) << "view" << std::right
        << std::setw(9) << "attempts" << std::setw(10) << "predicted" << std::setw(9) << "rat.cov"
        << std::setw(9) << "usr.cov" << std::setw(8) << "MAE" << std::setw(8) << "MAUE"
        << std::setw(9) << "recall" << '\n';
    for (const auto& r : reports) {
        out << std::left << std::setw(10) << r.method << std::setw(21) << r.view << std::right
            << std::setw(9) << r.n_attempted << std::setw(10) << r.n_predicted << std::setw(9)
            << detail::fixed(r.ratings_coverage, 3) << std::setw(9)
            << detail::fixed(r.users_coverage, 3) << std::setw(8) << detail::fixed(r.mae, 3)
            << std::setw(8) << detail::fixed(r.maue, 3) << std::setw(9)
            << detail::fixed(r.mean_rating_recall, 3) << '\n';
    }
}

inline void write_delta_table(std::ostream& out, const EvalReport& r) {
    out << "delta curve (" << r.method << ", " << r.view << ")\n";
    out << std::setw(8) << "min_da" << std::setw(8) << "n" << std::setw(9) << "mean_dr"
        << std::setw(9) << "mean_da" << std::setw(9) << "mean_dcf" << '\n';
    for (const auto& p : r.delta_curve)
        out << std::setw(8) << detail::fixed(p.min_delta_a, 1) << std::setw(8) << p.n << std::setw(9)
            << detail::fixed(p.mean_delta_r, 3) << std::setw(9) << detail::fixed(p.mean_delta_a, 3)
            << std::setw(9) << detail::fixed(p.mean_delta_cf, 3) << '\n';
}

inline void write_depth_table(std::ostream& out, const EvalReport& r) {
    if (r.depth_histogram.empty()) return;
    out << "depth histogram (" << r.method << ", " << r.view << "; -1 = not found)\n";
    for (const auto& [d, n] : r.depth_histogram) {
        out << std::setw(4) << d << std::setw(10) << n;
        if (auto q = r.queries_by_depth.find(d); q != r.queries_by_depth.end())
            out << "   avg queries " << detail::fixed(q->second, 2);
        out << '\n';
    }
    if (!r.max_depth_histogram.empty()) {
        out << "max depth per user\n";
        for (const auto& [d, n] : r.max_depth_histogram)
            out << std::setw(4) << d << std::setw(10) << n << '\n';
    }
}

}  // namespace trustgrid
