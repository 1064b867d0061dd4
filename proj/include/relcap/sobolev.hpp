/**
 * @file sobolev.hpp
 * @brief Discrete W^{1,p} calculus on a GridDomain.
 *
 * Energy of a nodal function u:
 *
 *     E_p(u) = sum_cells h^N * avg_corners |g_c(u)|^p  +  sum_nodes w_i |u_i|^p
 *
 * where g_c is the gradient seen from cell corner c: the difference quotients
 * along the two cell edges meeting at c (1D: the single edge). Every gradient
 * component is a difference of two grid-adjacent nodes, so nodewise clamping
 * never increases the energy.
 */
#pragma once

#include "relcap/grid.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace relcap {

/// Exponent p in the supported range [1.1, 10] together with p' = p / (p - 1).
class PExponent {
public:
    static constexpr double min_value = 1.1;
    static constexpr double max_value = 10.0;

    explicit PExponent(double p) : p_(p) {
        if (!(p >= min_value && p <= max_value))
            throw BadExponent("p = " + std::to_string(p) + " is outside the valid range [1.1, 10]");
    }
    double value() const { return p_; }
    double conjugate() const { return p_ / (p_ - 1.0); }
    bool is_quadratic() const { return p_ == 2.0; }

private:
    double p_;
};

/// Nodal values on the closure nodes of a domain (closure order).
class GridFunction {
public:
    GridFunction() = default;
    explicit GridFunction(DomainPtr d, double fill = 0.0) : domain_(std::move(d)), values_(domain_->num_closure(), fill) {}
    GridFunction(DomainPtr d, std::vector<double> values) : domain_(std::move(d)), values_(std::move(values)) {
        if (values_.size() != domain_->num_closure())
            throw DomainMismatch("grid function has " + std::to_string(values_.size()) + " values, domain has " +
                                 std::to_string(domain_->num_closure()) + " closure nodes");
        for (double v : values_)
            if (!std::isfinite(v)) throw Error("grid function values must be finite");
    }

    /// Sample a callable f(Point) at every closure node.
    template <class F>
    static GridFunction sample(DomainPtr d, F&& f) {
        std::vector<double> v;
        v.reserve(d->num_closure());
        for (NodeIndex g : d->closure_nodes()) v.push_back(f(d->coordinate(g)));
        return GridFunction(std::move(d), std::move(v));
    }

    const DomainPtr& domain() const { return domain_; }
    std::span<const double> values() const { return values_; }
    std::vector<double>& mutable_values() { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t l) const { return values_[l]; }
    double& operator[](std::size_t l) { return values_[l]; }
    /// Value at a global node index (must be a closure node).
    double at(NodeIndex g) const {
        const int l = domain_->local(g);
        if (l < 0) throw OutOfDomain("node " + std::to_string(g) + " is not a closure node");
        return values_[static_cast<std::size_t>(l)];
    }

private:
    DomainPtr domain_;
    std::vector<double> values_;
};

/// Nodal weights representing a functional on grid functions (a discrete measure
/// when all weights are nonnegative).
class DiscreteMeasure {
public:
    DiscreteMeasure() = default;
    explicit DiscreteMeasure(DomainPtr d) : domain_(std::move(d)), weights_(domain_->num_closure(), 0.0) {}
    DiscreteMeasure(DomainPtr d, std::vector<double> weights, bool nonneg = false)
        : domain_(std::move(d)), weights_(std::move(weights)), nonneg_(nonneg) {
        if (weights_.size() != domain_->num_closure()) throw DomainMismatch("measure size does not match the domain");
        for (double w : weights_) {
            if (!std::isfinite(w)) throw Error("measure weights must be finite");
            if (nonneg_ && w < -1e-12) throw NegativeMeasure("weight " + std::to_string(w) + " in a nonnegative measure");
        }
    }

    const DomainPtr& domain() const { return domain_; }
    std::span<const double> weights() const { return weights_; }
    bool nonneg() const { return nonneg_; }
    double total_mass() const {
        double s = 0.0;
        for (double w : weights_) s += w;
        return s;
    }
    /// Sum of weights over the nodes of `a`.
    double mass_of(const NodeSet& a) const {
        require_same_domain(*domain_, *a.domain(), "measure and node set");
        double s = 0.0;
        for (NodeIndex g : a.members()) s += weights_[static_cast<std::size_t>(domain_->local(g))];
        return s;
    }
    DiscreteMeasure scaled(double c) const {
        std::vector<double> w(weights_);
        for (double& x : w) x *= c;
        return DiscreteMeasure(domain_, std::move(w), nonneg_ && c >= 0.0);
    }

    static DiscreteMeasure point_mass(DomainPtr d, NodeIndex g, double mass) {
        DiscreteMeasure m(d);
        const int l = d->local(g);
        if (l < 0) throw OutOfDomain("point mass outside the closure");
        m.weights_[static_cast<std::size_t>(l)] = mass;
        m.nonneg_ = mass >= 0.0;
        return m;
    }
    /// The quadrature weights themselves (the discrete Lebesgue measure of Omega-bar).
    static DiscreteMeasure quadrature(DomainPtr d) {
        auto w = d->weights();
        return DiscreteMeasure(d, {w.begin(), w.end()}, true);
    }

private:
    DomainPtr domain_;
    std::vector<double> weights_;
    bool nonneg_ = false;
};

/// One gradient sample: `components` difference quotients (a -> b) / h with weight `weight`.
struct Stencil {
    double weight = 0.0;
    int components = 1;
    std::array<int, 2> from{-1, -1};
    std::array<int, 2> to{-1, -1};
};

/// Visit every corner-gradient stencil of the domain.
template <class F>
void for_each_stencil(const GridDomain& d, F&& f) {
    const double h = d.spacing();
    if (d.dimension() == 1) {
        for (const Cell& c : d.cells()) f(Stencil{h, 1, {c.corner[0], -1}, {c.corner[1], -1}});
        return;
    }
    const double w = 0.25 * h * h;
    for (const Cell& c : d.cells()) {
        const int n00 = c.corner[0], n10 = c.corner[1], n01 = c.corner[2], n11 = c.corner[3];
        f(Stencil{w, 2, {n00, n00}, {n10, n01}});
        f(Stencil{w, 2, {n00, n10}, {n10, n11}});
        f(Stencil{w, 2, {n01, n00}, {n11, n01}});
        f(Stencil{w, 2, {n01, n10}, {n11, n11}});
    }
}

/// Gradient vector of a stencil applied to nodal values.
inline Point stencil_gradient(const Stencil& s, std::span<const double> u, double h) {
    Point g{0.0, 0.0};
    for (int k = 0; k < s.components; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        g[kk] = (u[static_cast<std::size_t>(s.to[kk])] - u[static_cast<std::size_t>(s.from[kk])]) / h;
    }
    return g;
}

namespace detail {

/// |xi|^{p-2} with the convention that the product |xi|^{p-2} xi vanishes at xi = 0.
inline double flux_factor(double norm_sq, double p) {
    if (norm_sq == 0.0) return 0.0;
    return std::pow(norm_sq, 0.5 * (p - 2.0));
}

inline double power_of_norm(double norm_sq, double p) {
    if (norm_sq == 0.0) return 0.0;
    return std::pow(norm_sq, 0.5 * p);
}

inline void require_same(const DomainPtr& a, const DomainPtr& b, const char* what) {
    if (!a || !b) throw DomainMismatch(std::string(what) + ": missing domain");
    require_same_domain(*a, *b, what);
}

}  // namespace detail

/// Gradient of u on one cell: one vector per cell corner (a single vector in 1D).
struct CellGradient {
    NodeIndex origin = 0;
    int count = 1;
    std::array<Point, 4> corner{};

    Point mean() const {
        Point m{0.0, 0.0};
        for (int c = 0; c < count; ++c)
            for (std::size_t k = 0; k < 2; ++k) m[k] += corner[static_cast<std::size_t>(c)][k] / count;
        return m;
    }
};

inline std::vector<CellGradient> gradient(const GridFunction& u) {
    const GridDomain& d = *u.domain();
    std::vector<CellGradient> out;
    out.reserve(d.cells().size());
    std::size_t cell = 0;
    int slot = 0;
    const int per_cell = d.dimension() == 1 ? 1 : 4;
    for_each_stencil(d, [&](const Stencil& s) {
        if (slot == 0) {
            out.push_back(CellGradient{d.cells()[cell].origin, per_cell, {}});
        }
        out.back().corner[static_cast<std::size_t>(slot)] = stencil_gradient(s, u.values(), d.spacing());
        if (++slot == per_cell) {
            slot = 0;
            ++cell;
        }
    });
    return out;
}

/// Discrete ||u||^p_{W^{1,p}}: gradient term on cells plus nodal L^p term.
inline double sobolev_energy(const GridFunction& u, const PExponent& pe) {
    const GridDomain& d = *u.domain();
    const double p = pe.value();
    const auto vals = u.values();
    double grad_term = 0.0;
    for_each_stencil(d, [&](const Stencil& s) {
        const Point g = stencil_gradient(s, vals, d.spacing());
        grad_term += s.weight * detail::power_of_norm(g[0] * g[0] + g[1] * g[1], p);
    });
    double mass_term = 0.0;
    const auto w = d.weights();
    for (std::size_t l = 0; l < vals.size(); ++l) mass_term += w[l] * detail::power_of_norm(vals[l] * vals[l], p);
    return grad_term + mass_term;
}

enum class LatticeOp { max, min };

inline GridFunction lattice(const GridFunction& u, const GridFunction& v, LatticeOp op) {
    detail::require_same(u.domain(), v.domain(), "lattice operands");
    std::vector<double> out(u.size());
    for (std::size_t l = 0; l < out.size(); ++l) out[l] = op == LatticeOp::max ? std::max(u[l], v[l]) : std::min(u[l], v[l]);
    return GridFunction(u.domain(), std::move(out));
}

/// min(max(u, 0), 1) nodewise.
inline GridFunction truncate(const GridFunction& u) {
    std::vector<double> out(u.values().begin(), u.values().end());
    for (double& x : out) x = std::clamp(x, 0.0, 1.0);
    return GridFunction(u.domain(), std::move(out));
}

/// u^+ = max(u, 0) nodewise.
inline GridFunction positive_part(const GridFunction& u) {
    std::vector<double> out(u.values().begin(), u.values().end());
    for (double& x : out) x = std::max(x, 0.0);
    return GridFunction(u.domain(), std::move(out));
}

/// mu(u) = sum_i mu_i u_i.
inline double dual_pair(const DiscreteMeasure& mu, const GridFunction& u) {
    detail::require_same(mu.domain(), u.domain(), "dual pairing");
    double s = 0.0;
    const auto w = mu.weights();
    for (std::size_t l = 0; l < u.size(); ++l) s += w[l] * u[l];
    return s;
}

/// <F(u), v> = sum_stencils wt |grad u|^{p-2} grad u . grad v + sum_i w_i |u_i|^{p-2} u_i v_i.
/// This is the Gateaux derivative of E_p at u in direction v, divided by p.
inline double euler_lagrange_apply(const GridFunction& u, const GridFunction& v, const PExponent& pe) {
    detail::require_same(u.domain(), v.domain(), "Euler-Lagrange pairing");
    const GridDomain& d = *u.domain();
    const double p = pe.value();
    double s = 0.0;
    for_each_stencil(d, [&](const Stencil& st) {
        const Point gu = stencil_gradient(st, u.values(), d.spacing());
        const Point gv = stencil_gradient(st, v.values(), d.spacing());
        const double f = detail::flux_factor(gu[0] * gu[0] + gu[1] * gu[1], p);
        s += st.weight * f * (gu[0] * gv[0] + gu[1] * gv[1]);
    });
    const auto w = d.weights();
    for (std::size_t l = 0; l < u.size(); ++l) s += w[l] * detail::flux_factor(u[l] * u[l], p) * u[l] * v[l];
    return s;
}

/// All nodal pairings <F(u), delta_i> at once (closure order).
inline std::vector<double> nodal_pairings(const GridFunction& u, const PExponent& pe) {
    const GridDomain& d = *u.domain();
    const double p = pe.value();
    const double h = d.spacing();
    std::vector<double> out(u.size(), 0.0);
    for_each_stencil(d, [&](const Stencil& st) {
        const Point g = stencil_gradient(st, u.values(), h);
        const double f = st.weight * detail::flux_factor(g[0] * g[0] + g[1] * g[1], p) / h;
        for (int k = 0; k < st.components; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            out[static_cast<std::size_t>(st.to[kk])] += f * g[kk];
            out[static_cast<std::size_t>(st.from[kk])] -= f * g[kk];
        }
    });
    const auto w = d.weights();
    for (std::size_t l = 0; l < u.size(); ++l) out[l] += w[l] * detail::flux_factor(u[l] * u[l], p) * u[l];
    return out;
}

}  // namespace relcap
