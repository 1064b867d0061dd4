/**
 * @file grid.hpp
 * @brief Uniform-grid discretization of open sets in R^1 / R^2 and node-set algebra.
 *
 * A domain lives on a tensor grid covering an axis-aligned bounding box. Grid
 * nodes strictly inside the box that belong to the open set are the omega
 * nodes. The closure adds every grid neighbour (including diagonal ones) of an
 * omega node, so the boundary layer is defined combinatorially. Cells whose
 * corners are all closure nodes carry the gradient terms; every closure node
 * gets the trapezoidal weight h^N * (#incident cells) / 2^N.
 */
#pragma once

#include "relcap/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iterator>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace relcap {

/// Global (lexicographic, x fastest) index of a node in the bounding-box grid.
using NodeIndex = std::int64_t;

using Point = std::array<double, 2>;

/// Axis-aligned extents; only the first `dimension` entries are meaningful.
struct Box {
    Point lo{0.0, 0.0};
    Point hi{1.0, 1.0};
};

enum class ShapeKind { rectangle, rectangles, mask };

/// Description of Omega on a uniform grid.
struct DomainSpec {
    int dimension = 2;
    Box box;
    double h = 0.0625;
    ShapeKind shape = ShapeKind::rectangle;
    /// rectangle: at most one open rectangle (defaults to the box interior);
    /// rectangles: Omega is the union of these open rectangles.
    std::vector<Box> rectangles;
    /// mask: explicit per-grid-node membership (nonzero = in Omega) ...
    std::vector<std::uint8_t> node_mask;
    /// ... or a point predicate. Used only when node_mask is empty.
    std::function<bool(const Point&)> predicate;
};

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 1469598103934665603ULL) {
    auto bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = seed;
    for (std::size_t i = 0; i < n; ++i) {
        hash ^= bytes[i];
        hash *= 1099511628211ULL;
    }
    return hash;
}

template <class T>
std::uint64_t fnv1a_value(const T& value, std::uint64_t seed) {
    return fnv1a(&value, sizeof(T), seed);
}

}  // namespace detail

/// One grid cell: closure-local indices of its corners ordered (00, 10, 01, 11).
/// In 1D only the first two entries are used.
struct Cell {
    std::array<int, 4> corner{-1, -1, -1, -1};
    NodeIndex origin = 0;  // global index of the lower-left corner
};

/// Immutable discretized domain. Shared between threads through DomainPtr.
class GridDomain {
public:
    int dimension() const { return dim_; }
    double spacing() const { return h_; }
    const Box& box() const { return box_; }
    /// Nodes per axis (second entry is 1 in 1D).
    const std::array<NodeIndex, 2>& counts() const { return counts_; }
    NodeIndex grid_size() const { return counts_[0] * counts_[1]; }

    /// h^N, the area (length) of one cell.
    double cell_measure() const { return dim_ == 1 ? h_ : h_ * h_; }

    Point coordinate(NodeIndex g) const {
        const NodeIndex i = g % counts_[0];
        const NodeIndex j = g / counts_[0];
        Point x{box_.lo[0] + static_cast<double>(i) * h_, 0.0};
        if (dim_ == 2) x[1] = box_.lo[1] + static_cast<double>(j) * h_;
        return x;
    }

    std::array<NodeIndex, 2> multi_index(NodeIndex g) const { return {g % counts_[0], g / counts_[0]}; }
    NodeIndex global_index(NodeIndex i, NodeIndex j = 0) const { return i + j * counts_[0]; }

    /// Closure nodes, sorted by global index. GridFunction values follow this order.
    std::span<const NodeIndex> closure_nodes() const { return closure_; }
    std::span<const NodeIndex> omega_nodes() const { return omega_; }
    std::span<const NodeIndex> boundary_nodes() const { return boundary_; }
    std::size_t num_closure() const { return closure_.size(); }

    /// Position of a global node in the closure ordering, or -1.
    int local(NodeIndex g) const {
        if (g < 0 || g >= grid_size()) return -1;
        return local_[static_cast<std::size_t>(g)];
    }
    bool in_closure(NodeIndex g) const { return local(g) >= 0; }
    bool in_omega(NodeIndex g) const {
        return g >= 0 && g < grid_size() && omega_mask_[static_cast<std::size_t>(g)] != 0;
    }
    /// Omega flag per closure node (closure order).
    bool local_in_omega(int l) const { return in_omega(closure_[static_cast<std::size_t>(l)]); }

    /// Quadrature weight per closure node.
    std::span<const double> weights() const { return weights_; }
    std::span<const Cell> cells() const { return cells_; }

    /// Sum of all closure weights: the integral of the constant 1 over the union of cells.
    double mass() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }
    /// Sum of weights over omega nodes only.
    double omega_mass() const {
        double m = 0.0;
        for (std::size_t l = 0; l < closure_.size(); ++l)
            if (in_omega(closure_[l])) m += weights_[l];
        return m;
    }

    /// Structural fingerprint; equal for domains built from identical specs.
    std::uint64_t id() const { return id_; }

    /// Snap a point to the nearest grid node index (no closure check).
    std::optional<NodeIndex> nearest_grid_node(const Point& x) const {
        NodeIndex idx[2] = {0, 0};
        for (int k = 0; k < dim_; ++k) {
            const double t = (x[static_cast<std::size_t>(k)] - box_.lo[static_cast<std::size_t>(k)]) / h_;
            const auto r = static_cast<NodeIndex>(std::llround(t));
            if (r < 0 || r >= counts_[static_cast<std::size_t>(k)]) return std::nullopt;
            idx[k] = r;
        }
        return global_index(idx[0], idx[1]);
    }

private:
    friend GridDomain make_grid_domain(const DomainSpec& spec);

    int dim_ = 1;
    double h_ = 0.0;
    Box box_;
    std::array<NodeIndex, 2> counts_{1, 1};
    std::vector<std::uint8_t> omega_mask_;
    std::vector<int> local_;
    std::vector<NodeIndex> closure_, omega_, boundary_;
    std::vector<double> weights_;
    std::vector<Cell> cells_;
    std::uint64_t id_ = 0;
};

using DomainPtr = std::shared_ptr<const GridDomain>;

namespace detail {

inline bool open_contains(const Box& r, const Point& x, int dim, double slack) {
    for (int k = 0; k < dim; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        if (!(x[kk] > r.lo[kk] + slack && x[kk] < r.hi[kk] - slack)) return false;
    }
    return true;
}

}  // namespace detail

/// Discretize `spec`. Throws BadSpec / EmptyDomain.
inline GridDomain make_grid_domain(const DomainSpec& spec) {
    if (spec.dimension != 1 && spec.dimension != 2)
        throw BadSpec("dimension must be 1 or 2, got " + std::to_string(spec.dimension));
    if (!(spec.h > 0.0) || !std::isfinite(spec.h)) throw BadSpec("spacing h must be positive");

    GridDomain d;
    d.dim_ = spec.dimension;
    d.h_ = spec.h;
    d.box_ = spec.box;
    const int dim = spec.dimension;

    for (int k = 0; k < dim; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const double extent = spec.box.hi[kk] - spec.box.lo[kk];
        if (!(extent > 0.0)) throw BadSpec("bounding box is empty along axis " + std::to_string(k));
        if (spec.h > extent) throw BadSpec("h exceeds the bounding box extent");
        const double steps = extent / spec.h;
        const double rounded = std::round(steps);
        if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, rounded))
            throw BadSpec("box extent along axis " + std::to_string(k) + " is not a multiple of h");
        d.counts_[kk] = static_cast<NodeIndex>(rounded) + 1;
    }
    if (dim == 1) {
        d.box_.lo[1] = d.box_.hi[1] = 0.0;
        d.counts_[1] = 1;
    }

    const NodeIndex n = d.grid_size();
    if (spec.shape == ShapeKind::mask && !spec.node_mask.empty() &&
        static_cast<NodeIndex>(spec.node_mask.size()) != n)
        throw BadSpec("node mask has " + std::to_string(spec.node_mask.size()) + " entries, grid has " +
                      std::to_string(n));
    if (spec.shape == ShapeKind::mask && spec.node_mask.empty() && !spec.predicate)
        throw BadSpec("mask shape needs a node mask or a predicate");
    if (spec.shape == ShapeKind::rectangles && spec.rectangles.empty())
        throw BadSpec("rectangles shape needs at least one rectangle");
    if (spec.shape == ShapeKind::rectangle && spec.rectangles.size() > 1)
        throw BadSpec("rectangle shape takes at most one rectangle");

    const double slack = 1e-9 * spec.h;
    auto in_shape = [&](NodeIndex g, const Point& x) {
        switch (spec.shape) {
            case ShapeKind::rectangle:
                return detail::open_contains(spec.rectangles.empty() ? spec.box : spec.rectangles.front(), x, dim,
                                             slack);
            case ShapeKind::rectangles:
                return std::any_of(spec.rectangles.begin(), spec.rectangles.end(),
                                   [&](const Box& r) { return detail::open_contains(r, x, dim, slack); });
            case ShapeKind::mask:
                if (!spec.node_mask.empty()) return spec.node_mask[static_cast<std::size_t>(g)] != 0;
                return spec.predicate(x);
        }
        return false;
    };

    d.omega_mask_.assign(static_cast<std::size_t>(n), 0);
    for (NodeIndex g = 0; g < n; ++g) {
        const auto [i, j] = d.multi_index(g);
        const bool strictly_inside =
            i > 0 && i < d.counts_[0] - 1 && (dim == 1 || (j > 0 && j < d.counts_[1] - 1));
        if (strictly_inside && in_shape(g, d.coordinate(g))) d.omega_mask_[static_cast<std::size_t>(g)] = 1;
    }

    std::vector<std::uint8_t> closure_mask(d.omega_mask_);
    const NodeIndex jr = dim == 2 ? 1 : 0;
    for (NodeIndex g = 0; g < n; ++g) {
        if (!d.omega_mask_[static_cast<std::size_t>(g)]) continue;
        const auto [i, j] = d.multi_index(g);
        for (NodeIndex dj = -jr; dj <= jr; ++dj)
            for (NodeIndex di = -1; di <= 1; ++di)
                closure_mask[static_cast<std::size_t>(d.global_index(i + di, j + dj))] = 1;
    }

    d.local_.assign(static_cast<std::size_t>(n), -1);
    for (NodeIndex g = 0; g < n; ++g) {
        if (!closure_mask[static_cast<std::size_t>(g)]) continue;
        d.local_[static_cast<std::size_t>(g)] = static_cast<int>(d.closure_.size());
        d.closure_.push_back(g);
        (d.omega_mask_[static_cast<std::size_t>(g)] ? d.omega_ : d.boundary_).push_back(g);
    }
    if (d.omega_.empty()) throw EmptyDomain("no grid node lies inside the open set");

    // Cells with all corners in the closure.
    d.weights_.assign(d.closure_.size(), 0.0);
    const double corner_share = d.cell_measure() / (dim == 1 ? 2.0 : 4.0);
    for (NodeIndex j = 0; j + jr < d.counts_[1]; ++j) {
        for (NodeIndex i = 0; i + 1 < d.counts_[0]; ++i) {
            Cell c;
            c.origin = d.global_index(i, j);
            c.corner[0] = d.local(d.global_index(i, j));
            c.corner[1] = d.local(d.global_index(i + 1, j));
            if (dim == 2) {
                c.corner[2] = d.local(d.global_index(i, j + 1));
                c.corner[3] = d.local(d.global_index(i + 1, j + 1));
            }
            const int ncorners = dim == 1 ? 2 : 4;
            if (std::any_of(c.corner.begin(), c.corner.begin() + ncorners, [](int l) { return l < 0; })) continue;
            for (int k = 0; k < ncorners; ++k) d.weights_[static_cast<std::size_t>(c.corner[static_cast<std::size_t>(k)])] += corner_share;
            d.cells_.push_back(c);
        }
    }

    std::uint64_t id = detail::fnv1a_value(d.dim_, 1469598103934665603ULL);
    id = detail::fnv1a_value(d.h_, id);
    id = detail::fnv1a(&d.box_, sizeof(Box), id);
    id = detail::fnv1a(d.omega_mask_.data(), d.omega_mask_.size(), id);
    d.id_ = id;
    return d;
}

/// Build and validate a domain.
inline DomainPtr build_domain(const DomainSpec& spec) { return std::make_shared<const GridDomain>(make_grid_domain(spec)); }

/// Convenience: the open rectangle (box interior) on a uniform grid.
inline DomainSpec rectangle_spec(int dimension, Box box, double h) {
    DomainSpec s;
    s.dimension = dimension;
    s.box = box;
    s.h = h;
    s.shape = ShapeKind::rectangle;
    return s;
}

inline DomainSpec unit_interval_spec(double h) { return rectangle_spec(1, Box{{0.0, 0.0}, {1.0, 0.0}}, h); }
inline DomainSpec unit_square_spec(double h) { return rectangle_spec(2, Box{{0.0, 0.0}, {1.0, 1.0}}, h); }

inline void require_same_domain(const GridDomain& a, const GridDomain& b, const char* what) {
    if (a.id() != b.id()) throw DomainMismatch(what);
}

// ---------------------------------------------------------------------------
// Node sets
// ---------------------------------------------------------------------------

/// A set of closure nodes of one domain (sorted, unique global indices).
class NodeSet {
public:
    NodeSet() = default;
    explicit NodeSet(DomainPtr domain) : domain_(std::move(domain)) {}

    /// Validates membership; throws OutOfDomain.
    NodeSet(DomainPtr domain, std::vector<NodeIndex> members) : domain_(std::move(domain)), members_(std::move(members)) {
        std::sort(members_.begin(), members_.end());
        members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
        for (NodeIndex g : members_)
            if (!domain_->in_closure(g)) throw OutOfDomain("node " + std::to_string(g) + " is not a closure node");
    }

    const DomainPtr& domain() const { return domain_; }
    std::span<const NodeIndex> members() const { return members_; }
    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    bool contains(NodeIndex g) const { return std::binary_search(members_.begin(), members_.end(), g); }

    /// Membership flag per closure node (closure order).
    std::vector<std::uint8_t> local_mask() const {
        std::vector<std::uint8_t> m(domain_->num_closure(), 0);
        for (NodeIndex g : members_) m[static_cast<std::size_t>(domain_->local(g))] = 1;
        return m;
    }

    friend bool operator==(const NodeSet& a, const NodeSet& b) {
        return a.domain_->id() == b.domain_->id() && a.members_ == b.members_;
    }

private:
    DomainPtr domain_;
    std::vector<NodeIndex> members_;
};

namespace detail {

inline void check_pair(const NodeSet& a, const NodeSet& b) {
    require_same_domain(*a.domain(), *b.domain(), "node sets live on different domains");
}

template <class Op>
NodeSet set_op(const NodeSet& a, const NodeSet& b, Op op) {
    check_pair(a, b);
    std::vector<NodeIndex> out;
    op(a.members().begin(), a.members().end(), b.members().begin(), b.members().end(), std::back_inserter(out));
    return NodeSet(a.domain(), std::move(out));
}

}  // namespace detail

inline NodeSet unite(const NodeSet& a, const NodeSet& b) {
    return detail::set_op(a, b, [](auto... args) { return std::set_union(args...); });
}
inline NodeSet intersect(const NodeSet& a, const NodeSet& b) {
    return detail::set_op(a, b, [](auto... args) { return std::set_intersection(args...); });
}
inline NodeSet subtract(const NodeSet& a, const NodeSet& b) {
    return detail::set_op(a, b, [](auto... args) { return std::set_difference(args...); });
}
inline bool is_subset(const NodeSet& a, const NodeSet& b) {
    detail::check_pair(a, b);
    return std::includes(b.members().begin(), b.members().end(), a.members().begin(), a.members().end());
}

/// Node-set selectors.
namespace select {

struct Explicit {
    std::vector<NodeIndex> indices;
};
/// Closed Euclidean ball.
struct Ball {
    Point center{};
    double radius = 0.0;
};
/// Closed axis-aligned box.
struct BoxSel {
    Box box;
};
/// {x : normal . x <= offset}
struct HalfSpace {
    Point normal{1.0, 0.0};
    double offset = 0.0;
};
/// The single closure node closest to a point (lowest index on ties).
struct Nearest {
    Point point{};
};
struct Boundary {};
struct Closure {};
struct Omega {};
struct Empty {};

}  // namespace select

namespace detail {

template <class Pred>
NodeSet filter_closure(const DomainPtr& d, Pred pred) {
    std::vector<NodeIndex> out;
    for (NodeIndex g : d->closure_nodes())
        if (pred(d->coordinate(g))) out.push_back(g);
    return NodeSet(d, std::move(out));
}

inline double distance(const Point& a, const Point& b, int dim) {
    double s = 0.0;
    for (int k = 0; k < dim; ++k) {
        const double t = a[static_cast<std::size_t>(k)] - b[static_cast<std::size_t>(k)];
        s += t * t;
    }
    return std::sqrt(s);
}

}  // namespace detail

inline NodeSet node_set(const DomainPtr& d, const select::Explicit& sel) { return NodeSet(d, sel.indices); }
inline NodeSet node_set(const DomainPtr& d, const select::Closure&) {
    auto c = d->closure_nodes();
    return NodeSet(d, {c.begin(), c.end()});
}
inline NodeSet node_set(const DomainPtr& d, const select::Omega&) {
    auto c = d->omega_nodes();
    return NodeSet(d, {c.begin(), c.end()});
}
inline NodeSet node_set(const DomainPtr& d, const select::Boundary&) {
    auto c = d->boundary_nodes();
    return NodeSet(d, {c.begin(), c.end()});
}
inline NodeSet node_set(const DomainPtr& d, const select::Empty&) { return NodeSet(d); }
inline NodeSet node_set(const DomainPtr& d, const select::Ball& sel) {
    const double tol = 1e-9 * d->spacing();
    return detail::filter_closure(
        d, [&](const Point& x) { return detail::distance(x, sel.center, d->dimension()) <= sel.radius + tol; });
}
inline NodeSet node_set(const DomainPtr& d, const select::BoxSel& sel) {
    const double tol = 1e-9 * d->spacing();
    return detail::filter_closure(d, [&](const Point& x) {
        for (int k = 0; k < d->dimension(); ++k) {
            const auto kk = static_cast<std::size_t>(k);
            if (x[kk] < sel.box.lo[kk] - tol || x[kk] > sel.box.hi[kk] + tol) return false;
        }
        return true;
    });
}
inline NodeSet node_set(const DomainPtr& d, const select::HalfSpace& sel) {
    const double tol = 1e-9 * d->spacing();
    return detail::filter_closure(d, [&](const Point& x) {
        double s = 0.0;
        for (int k = 0; k < d->dimension(); ++k) s += sel.normal[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k)];
        return s <= sel.offset + tol;
    });
}
inline NodeSet node_set(const DomainPtr& d, const select::Nearest& sel) {
    NodeIndex best = -1;
    double best_dist = 0.0;
    for (NodeIndex g : d->closure_nodes()) {
        const double dist = detail::distance(d->coordinate(g), sel.point, d->dimension());
        if (best < 0 || dist < best_dist - 1e-12 * d->spacing()) {
            best = g;
            best_dist = dist;
        }
    }
    return NodeSet(d, {best});
}

/// All closure nodes within Euclidean distance `radius` of some node of `a`.
inline NodeSet dilate(const NodeSet& a, double radius) {
    if (radius < 0.0) throw Error("dilate: radius must be nonnegative");
    const auto& d = a.domain();
    if (radius == 0.0 || a.empty()) return a;
    const double h = d->spacing();
    const double tol = 1e-9 * h;
    const auto reach = static_cast<NodeIndex>(std::floor(radius / h + 1e-9));
    const NodeIndex jr = d->dimension() == 2 ? reach : 0;
    std::vector<std::uint8_t> hit(static_cast<std::size_t>(d->grid_size()), 0);
    for (NodeIndex g : a.members()) {
        const auto [i, j] = d->multi_index(g);
        const Point x = d->coordinate(g);
        for (NodeIndex dj = -jr; dj <= jr; ++dj) {
            const NodeIndex jj = j + dj;
            if (jj < 0 || jj >= d->counts()[1]) continue;
            for (NodeIndex di = -reach; di <= reach; ++di) {
                const NodeIndex ii = i + di;
                if (ii < 0 || ii >= d->counts()[0]) continue;
                const NodeIndex q = d->global_index(ii, jj);
                if (!d->in_closure(q)) continue;
                if (detail::distance(d->coordinate(q), x, d->dimension()) <= radius + tol)
                    hit[static_cast<std::size_t>(q)] = 1;
            }
        }
    }
    std::vector<NodeIndex> out;
    for (NodeIndex g : d->closure_nodes())
        if (hit[static_cast<std::size_t>(g)]) out.push_back(g);
    return NodeSet(d, std::move(out));
}

/// Re-express `a` on another domain sharing the same grid lattice (same h, aligned
/// nodes). Throws OutOfDomain if a node has no closure counterpart in `target`.
inline NodeSet transfer(const NodeSet& a, const DomainPtr& target) {
    const auto& src = *a.domain();
    if (src.dimension() != target->dimension() || src.spacing() != target->spacing())
        throw DomainMismatch("transfer needs identical dimension and spacing");
    std::vector<NodeIndex> out;
    out.reserve(a.size());
    for (NodeIndex g : a.members()) {
        const Point x = src.coordinate(g);
        auto q = target->nearest_grid_node(x);
        if (!q || detail::distance(target->coordinate(*q), x, src.dimension()) > 1e-9 * src.spacing() ||
            !target->in_closure(*q))
            throw OutOfDomain("node at (" + std::to_string(x[0]) + ", " + std::to_string(x[1]) +
                              ") has no closure counterpart in the target domain");
        out.push_back(*q);
    }
    return NodeSet(target, std::move(out));
}

}  // namespace relcap
