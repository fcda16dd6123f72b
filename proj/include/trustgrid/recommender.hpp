#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

#include "core.hpp"
#include "propagation.hpp"

namespace trustgrid {

class EmptyContributors : public Error {
public:
    EmptyContributors() : Error("confidence needs at least one contributor") {}
};

inline constexpr double kVarianceFloor = 1e-6;

struct Recommendation {
    UserId user;
    ItemId item;
    double predicted = 0.0;
    double confidence = 0.0;
    std::vector<Contributor> contributors;
    double rating_recall = 0.0;  // contributors / other raters of the item
    int depth = 0;               // smallest hop count among contributors
};

/// Members of x's table with positive trust that rated the item. x's own
/// rating never appears.
inline std::vector<Contributor> neighborhood_raters(const NetworkState& state, UserId x, ItemId item,
                                                    const RatingView& view) {
    const TrustTable& table = state.table(x);
    std::vector<Contributor> out;
    view.for_each_rater(item, [&](const ItemRating& r) {
        if (r.user == x) return;
        const auto* e = table.find(r.user);
        if (e != nullptr && e->trust > 0.0) out.push_back({r.user, e->trust, r.value});
    });
    return out;
}

/// Mean contributor trust over the population variance of their ratings,
/// with the variance floored at kVarianceFloor.
inline double confidence(const std::vector<Contributor>& contributors) {
    if (contributors.empty()) throw EmptyContributors();
    const auto n = static_cast<double>(contributors.size());
    double trust_sum = 0.0, rating_sum = 0.0;
    for (const auto& c : contributors) {
        trust_sum += c.trust;
        rating_sum += c.rating;
    }
    const double mean_rating = rating_sum / n;
    double var = 0.0;
    for (const auto& c : contributors) var += (c.rating - mean_rating) * (c.rating - mean_rating);
    var /= n;
    return (trust_sum / n) / std::max(var, kVarianceFloor);
}

/// Trust-weighted average of the ratings in x's augmented neighbourhood.
inline double trust_weighted_rating(const std::vector<Contributor>& contributors) {
    double num = 0.0, den = 0.0;
    for (const auto& c : contributors) {
        num += c.trust * c.rating;
        den += c.trust;
    }
    return std::clamp(num / den, double(kMinRating), double(kMaxRating));
}

inline std::optional<Recommendation> recommend(const NetworkState& state, UserId x, ItemId item,
                                               const RatingView& view) {
    if (!view.dataset().has_item(item)) throw UnknownItem(item.value);
    auto contributors = neighborhood_raters(state, x, item, view);
    if (contributors.empty()) return std::nullopt;

    Recommendation rec;
    rec.user = x;
    rec.item = item;
    rec.predicted = trust_weighted_rating(contributors);
    rec.confidence = confidence(contributors);

    std::size_t others = view.rater_count(item);
    if (view.rating(x, item)) --others;
    rec.rating_recall = static_cast<double>(contributors.size()) / static_cast<double>(others);

    const TrustTable& table = state.table(x);
    rec.depth = std::numeric_limits<int>::max();
    for (const auto& c : contributors)
        rec.depth = std::min(rec.depth, static_cast<int>(table.find(c.user)->hops));
    rec.contributors = std::move(contributors);
    return rec;
}

}  // namespace trustgrid
