#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace trustgrid {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base of every error raised by the library. The CLI maps these to exit
/// code 2 (data error).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownUser : public Error {
public:
    explicit UnknownUser(std::uint64_t id)
        : Error("unknown user " + std::to_string(id)), id_(id) {}
    std::uint64_t id() const noexcept { return id_; }

private:
    std::uint64_t id_;
};

class UnknownItem : public Error {
public:
    explicit UnknownItem(std::uint64_t id)
        : Error("unknown item " + std::to_string(id)), id_(id) {}
    std::uint64_t id() const noexcept { return id_; }

private:
    std::uint64_t id_;
};

class NoRatings : public Error {
public:
    explicit NoRatings(std::uint64_t user)
        : Error("user " + std::to_string(user) + " has no ratings") {}
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Identifiers
// ---------------------------------------------------------------------------

struct UserId {
    std::uint64_t value = 0;
    friend constexpr auto operator<=>(UserId, UserId) = default;
};

struct ItemId {
    std::uint64_t value = 0;
    friend constexpr auto operator<=>(ItemId, ItemId) = default;
};

inline constexpr int kMinRating = 1;
inline constexpr int kMaxRating = 5;

struct Rating {
    UserId user;
    ItemId item;
    int value = 0;
    friend bool operator==(const Rating&, const Rating&) = default;
};

struct TrustEdge {
    UserId source;
    UserId target;
    double value = 0.0;
    friend bool operator==(const TrustEdge&, const TrustEdge&) = default;
};

/// (rater, value) pair as seen from an item.
struct ItemRating {
    UserId user;
    int value = 0;
    friend bool operator==(const ItemRating&, const ItemRating&) = default;
};

/// A rater whose opinion entered a prediction, with the trust (or weight)
/// it was given.
struct Contributor {
    UserId user;
    double trust = 0.0;
    int rating = 0;
    friend bool operator==(const Contributor&, const Contributor&) = default;
};

inline bool valid_rating(int v) noexcept { return v >= kMinRating && v <= kMaxRating; }
inline bool valid_trust(double v) noexcept { return v >= -1.0 && v <= 1.0; }

}  // namespace trustgrid

template <>
struct std::hash<trustgrid::UserId> {
    std::size_t operator()(trustgrid::UserId u) const noexcept {
        return std::hash<std::uint64_t>{}(u.value);
    }
};

template <>
struct std::hash<trustgrid::ItemId> {
    std::size_t operator()(trustgrid::ItemId i) const noexcept {
        return std::hash<std::uint64_t>{}(i.value);
    }
};

namespace trustgrid {

/// Counters for input records that were accepted but altered during
/// construction.
struct BuildWarnings {
    std::size_t duplicate_ratings = 0;  // later occurrence replaced an earlier one
    std::size_t duplicate_edges = 0;
    std::size_t self_edges = 0;         // dropped
    friend bool operator==(const BuildWarnings&, const BuildWarnings&) = default;
};

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// Immutable store of users, items, ratings and directed trust edges.
///
/// Ratings are kept sorted by (user, item) and edges by (source, target), so
/// per-user slices are contiguous spans. A second index holds the raters of
/// each item sorted by user.
class Dataset {
public:
    Dataset() = default;

    /// Builds a dataset. Users and items referenced by ratings or edges are
    /// added implicitly; `extra_users` / `extra_items` register ids that have
    /// no records. Duplicate (user, item) ratings and duplicate edges keep the
    /// last occurrence. Self edges are dropped. Out-of-range values throw
    /// ValidationError.
    static Dataset build(std::vector<Rating> ratings,
                         std::vector<TrustEdge> edges,
                         std::vector<UserId> extra_users = {},
                         std::vector<ItemId> extra_items = {},
                         BuildWarnings* warnings = nullptr) {
        BuildWarnings local;
        BuildWarnings& warn = warnings ? *warnings : local;

        for (const auto& r : ratings)
            if (!valid_rating(r.value))
                throw ValidationError("rating value " + std::to_string(r.value) + " for user " +
                                      std::to_string(r.user.value) + " outside [1,5]");
        for (const auto& e : edges)
            if (!valid_trust(e.value))
                throw ValidationError("trust value " + std::to_string(e.value) + " on edge " +
                                      std::to_string(e.source.value) + "->" +
                                      std::to_string(e.target.value) + " outside [-1,1]");

        Dataset d;

        // Last occurrence wins: stable sort, then keep the last of each run.
        std::stable_sort(ratings.begin(), ratings.end(), [](const Rating& a, const Rating& b) {
            return std::pair(a.user, a.item) < std::pair(b.user, b.item);
        });
        for (std::size_t i = 0; i < ratings.size(); ++i) {
            if (i + 1 < ratings.size() && ratings[i + 1].user == ratings[i].user &&
                ratings[i + 1].item == ratings[i].item) {
                ++warn.duplicate_ratings;
                continue;
            }
            d.ratings_.push_back(ratings[i]);
        }

        std::erase_if(edges, [&](const TrustEdge& e) {
            if (e.source != e.target) return false;
            ++warn.self_edges;
            return true;
        });
        std::stable_sort(edges.begin(), edges.end(), [](const TrustEdge& a, const TrustEdge& b) {
            return std::pair(a.source, a.target) < std::pair(b.source, b.target);
        });
        for (std::size_t i = 0; i < edges.size(); ++i) {
            if (i + 1 < edges.size() && edges[i + 1].source == edges[i].source &&
                edges[i + 1].target == edges[i].target) {
                ++warn.duplicate_edges;
                continue;
            }
            d.edges_.push_back(edges[i]);
        }

        std::vector<UserId> users = std::move(extra_users);
        std::vector<ItemId> items = std::move(extra_items);
        for (const auto& r : d.ratings_) {
            users.push_back(r.user);
            items.push_back(r.item);
        }
        for (const auto& e : d.edges_) {
            users.push_back(e.source);
            users.push_back(e.target);
        }
        std::sort(users.begin(), users.end());
        users.erase(std::unique(users.begin(), users.end()), users.end());
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
        d.users_ = std::move(users);
        d.items_ = std::move(items);

        d.user_index_.reserve(d.users_.size());
        for (std::size_t i = 0; i < d.users_.size(); ++i) d.user_index_.emplace(d.users_[i], i);
        d.item_index_.reserve(d.items_.size());
        for (std::size_t i = 0; i < d.items_.size(); ++i) d.item_index_.emplace(d.items_[i], i);

        d.rating_offsets_ = offsets_by(d.users_.size(), d.ratings_,
                                       [&](const Rating& r) { return d.user_index_.at(r.user); });
        d.edge_offsets_ = offsets_by(d.users_.size(), d.edges_,
                                     [&](const TrustEdge& e) { return d.user_index_.at(e.source); });

        // Item index: counting sort by item, users stay ascending because
        // ratings_ is ordered by user first.
        d.item_offsets_.assign(d.items_.size() + 1, 0);
        for (const auto& r : d.ratings_) ++d.item_offsets_[d.item_index_.at(r.item) + 1];
        for (std::size_t i = 0; i < d.items_.size(); ++i)
            d.item_offsets_[i + 1] += d.item_offsets_[i];
        d.item_raters_.resize(d.ratings_.size());
        std::vector<std::size_t> cursor(d.item_offsets_.begin(), d.item_offsets_.end() - 1);
        for (const auto& r : d.ratings_)
            d.item_raters_[cursor[d.item_index_.at(r.item)]++] = ItemRating{r.user, r.value};

        return d;
    }

    std::span<const UserId> users() const noexcept { return users_; }
    std::span<const ItemId> items() const noexcept { return items_; }
    std::span<const Rating> ratings() const noexcept { return ratings_; }
    std::span<const TrustEdge> trust_edges() const noexcept { return edges_; }

    bool has_user(UserId u) const noexcept { return user_index_.contains(u); }
    bool has_item(ItemId i) const noexcept { return item_index_.contains(i); }

    /// Dense position of a user in users(); throws UnknownUser.
    std::size_t user_index(UserId u) const {
        auto it = user_index_.find(u);
        if (it == user_index_.end()) throw UnknownUser(u.value);
        return it->second;
    }

    std::size_t item_index(ItemId i) const {
        auto it = item_index_.find(i);
        if (it == item_index_.end()) throw UnknownItem(i.value);
        return it->second;
    }

    /// The user's ratings, ascending by item.
    std::span<const Rating> ratings_of(UserId u) const {
        const auto k = user_index(u);
        return std::span(ratings_).subspan(rating_offsets_[k],
                                           rating_offsets_[k + 1] - rating_offsets_[k]);
    }

    /// The user's outgoing trust edges, ascending by target.
    std::span<const TrustEdge> out_edges(UserId u) const {
        const auto k = user_index(u);
        return std::span(edges_).subspan(edge_offsets_[k], edge_offsets_[k + 1] - edge_offsets_[k]);
    }

    /// All (user, value) pairs rating the item, ascending by user.
    std::span<const ItemRating> item_raters(ItemId i) const {
        const auto k = item_index(i);
        return std::span(item_raters_).subspan(item_offsets_[k],
                                               item_offsets_[k + 1] - item_offsets_[k]);
    }

    std::optional<int> rating(UserId u, ItemId i) const {
        const auto rs = ratings_of(u);
        auto it = std::lower_bound(rs.begin(), rs.end(), i,
                                   [](const Rating& r, ItemId item) { return r.item < item; });
        if (it == rs.end() || it->item != i) return std::nullopt;
        return it->value;
    }

    std::optional<double> direct_trust(UserId source, UserId target) const {
        if (!has_user(target)) throw UnknownUser(target.value);
        const auto es = out_edges(source);
        auto it = std::lower_bound(es.begin(), es.end(), target,
                                   [](const TrustEdge& e, UserId t) { return e.target < t; });
        if (it == es.end() || it->target != target) return std::nullopt;
        return it->value;
    }

    /// Copy of this dataset without the edge source -> target.
    Dataset without_trust_edge(UserId source, UserId target) const {
        std::vector<TrustEdge> edges;
        edges.reserve(edges_.size());
        for (const auto& e : edges_)
            if (e.source != source || e.target != target) edges.push_back(e);
        return build(ratings_, std::move(edges), users_, items_);
    }

private:
    template <class T, class KeyFn>
    static std::vector<std::size_t> offsets_by(std::size_t n, const std::vector<T>& sorted,
                                               KeyFn key) {
        std::vector<std::size_t> off(n + 1, 0);
        for (const auto& x : sorted) ++off[key(x) + 1];
        for (std::size_t i = 0; i < n; ++i) off[i + 1] += off[i];
        return off;
    }

    std::vector<UserId> users_;
    std::vector<ItemId> items_;
    std::vector<Rating> ratings_;
    std::vector<TrustEdge> edges_;
    std::unordered_map<UserId, std::size_t> user_index_;
    std::unordered_map<ItemId, std::size_t> item_index_;
    std::vector<std::size_t> rating_offsets_;
    std::vector<std::size_t> edge_offsets_;
    std::vector<std::size_t> item_offsets_;
    std::vector<ItemRating> item_raters_;
};

// ---------------------------------------------------------------------------
// Rating view with an optional hidden rating
// ---------------------------------------------------------------------------

/// Read access to a dataset's ratings with at most one (user, item) rating
/// hidden. Leave-one-out evaluation runs every predictor through this view so
/// the held-out value never leaks into means, similarities or rater sets.
class RatingView {
public:
    RatingView(const Dataset& d) : data_(&d) {}  // NOLINT: implicit by intent
    RatingView(const Dataset& d, UserId hidden_user, ItemId hidden_item)
        : data_(&d), hidden_(std::pair(hidden_user, hidden_item)) {}

    const Dataset& dataset() const noexcept { return *data_; }
    bool is_hidden(UserId u, ItemId i) const noexcept {
        return hidden_ && hidden_->first == u && hidden_->second == i;
    }
    std::optional<std::pair<UserId, ItemId>> hidden() const noexcept { return hidden_; }

    std::optional<int> rating(UserId u, ItemId i) const {
        if (is_hidden(u, i)) return std::nullopt;
        return data_->rating(u, i);
    }

    template <class Fn>
    void for_each_rater(ItemId i, Fn&& fn) const {
        for (const auto& r : data_->item_raters(i))
            if (!is_hidden(r.user, i)) fn(r);
    }

    template <class Fn>
    void for_each_rating_of(UserId u, Fn&& fn) const {
        for (const auto& r : data_->ratings_of(u))
            if (!is_hidden(u, r.item)) fn(r);
    }

    std::size_t rater_count(ItemId i) const {
        std::size_t n = data_->item_raters(i).size();
        if (hidden_ && hidden_->second == i && data_->rating(hidden_->first, i)) --n;
        return n;
    }

    /// Mean of the user's visible ratings; throws NoRatings when none remain.
    double mean_rating(UserId u) const {
        double sum = 0.0;
        std::size_t n = 0;
        for_each_rating_of(u, [&](const Rating& r) {
            sum += r.value;
            ++n;
        });
        if (n == 0) throw NoRatings(u.value);
        return sum / static_cast<double>(n);
    }

private:
    const Dataset* data_;
    std::optional<std::pair<UserId, ItemId>> hidden_;
};

// ---------------------------------------------------------------------------
// Accessors
// ---------------------------------------------------------------------------

inline double mean_rating(const Dataset& d, UserId user) {
    if (!d.has_user(user)) throw UnknownUser(user.value);
    return RatingView(d).mean_rating(user);
}

inline std::vector<ItemRating> item_raters(const Dataset& d, ItemId item) {
    const auto rs = d.item_raters(item);
    return {rs.begin(), rs.end()};
}

inline std::optional<double> direct_trust(const Dataset& d, UserId source, UserId target) {
    return d.direct_trust(source, target);
}

}  // namespace trustgrid
