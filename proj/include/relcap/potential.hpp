/**
 * @file potential.hpp
 * @brief W^{1,p} potentials of nodal functionals, capacitary measures and energies.
 */
#pragma once

#include "relcap/capacity.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace relcap {

namespace detail {
inline std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}
}  // namespace detail

struct PotentialResult {
    GridFunction potential;
    /// (1/p) E_p(u) - mu(u) at the returned potential.
    double objective = 0.0;
    /// max_i |<F(u), delta_i> - mu_i|.
    double el_residual = 0.0;
    /// mu(u), which equals E_p(mu) = ||mu||_*^{p'} at the exact potential.
    double energy = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Minimize (1/p) E_p(v) - mu(v) over all grid functions.
inline PotentialResult solve_potential(const DomainPtr& domain, const DiscreteMeasure& mu, const PExponent& p,
                                       const SolverOptions& opts = {}) {
    detail::require_same(domain, mu.domain(), "solve_potential");
    opts.validate(p);
    detail::ObstacleProblem prob{domain, p.value(), std::vector<std::uint8_t>(domain->num_closure(), 0),
                                 std::vector<double>(mu.weights().begin(), mu.weights().end())};
    auto out = detail::minimize(prob, opts);
    PotentialResult res;
    res.potential = GridFunction(domain, std::move(out.u));
    res.energy = dual_pair(mu, res.potential);
    res.objective = sobolev_energy(res.potential, p) / p.value() - res.energy;
    res.el_residual = out.residual;
    res.iterations = out.iterations;
    res.converged = out.converged;
    return res;
}

/// E_p(mu) = ||mu||^{p'} computed as mu(u) at the potential u of mu.
inline double energy(const DomainPtr& domain, const DiscreteMeasure& mu, const PExponent& p,
                     const SolverOptions& opts = {}) {
    const auto r = solve_potential(domain, mu, p, opts);
    if (!r.converged)
        throw NonConvergence("potential solve for the energy stopped at residual " + detail::sci(r.el_residual));
    return r.energy;
}

struct CapacitaryMeasureResult {
    DiscreteMeasure mu;
    CapacityResult cap;
};

/// mu_i = <F(e_A), delta_i> for every closure node. Weights in [-10 tol, 0) are
/// floored to zero; anything below -10 tol raises NegativeMeasure.
inline CapacitaryMeasureResult capacitary_measure(const DomainPtr& domain, const NodeSet& a, const PExponent& p,
                                                  const SolverOptions& opts = {}) {
    auto cap = capacity(domain, a, p, opts);
    if (!cap.converged)
        throw NonConvergence("capacity solve stopped at KKT residual " + detail::sci(cap.kkt_residual));
    const double tol = cap.tolerance;
    std::vector<double> w = nodal_pairings(cap.extremal, p);
    for (std::size_t l = 0; l < w.size(); ++l) {
        if (w[l] < -10.0 * tol)
            throw NegativeMeasure("weight " + detail::sci(w[l]) + " at node " +
                                  std::to_string(domain->closure_nodes()[l]));
        w[l] = std::max(w[l], 0.0);
    }
    return {DiscreteMeasure(domain, std::move(w), true), std::move(cap)};
}

struct EnergyBound {
    double lhs = 0.0;  // mu(A)^p
    double rhs = 0.0;  // E(mu)^{p-1} Cap(A)
    bool holds = false;
};

/// mu(A)^p <= E(mu)^{p-1} Cap(A) for a nonnegative measure.
inline EnergyBound energy_capacity_bound(const DiscreteMeasure& mu, const NodeSet& a, const PExponent& p,
                                         const SolverOptions& opts = {}) {
    for (double w : mu.weights())
        if (w < 0.0) throw NegativeMeasure("energy_capacity_bound needs a nonnegative measure");
    detail::require_same(mu.domain(), a.domain(), "energy_capacity_bound");
    const double e = energy(mu.domain(), mu, p, opts);
    const auto cap = capacity(a.domain(), a, p, opts);
    if (!cap.converged) throw NonConvergence("capacity solve in energy_capacity_bound");
    EnergyBound b;
    b.lhs = std::pow(mu.mass_of(a), p.value());
    b.rhs = std::pow(e, p.value() - 1.0) * cap.value;
    b.holds = b.lhs <= b.rhs * (1.0 + 1e-6) + 1e-9;
    return b;
}

/// Max nodal deviation between potentials started from u = 0 and u = 1.
inline double potential_uniqueness_check(const DomainPtr& domain, const DiscreteMeasure& mu, const PExponent& p,
                                         SolverOptions opts = {}) {
    opts.initial_guess = InitialGuess::zeros;
    const auto r1 = solve_potential(domain, mu, p, opts);
    opts.initial_guess = InitialGuess::ones;
    const auto r2 = solve_potential(domain, mu, p, opts);
    if (!r1.converged || !r2.converged) throw NonConvergence("potential uniqueness check: a solve did not converge");
    double dev = 0.0;
    for (std::size_t l = 0; l < r1.potential.size(); ++l)
        dev = std::max(dev, std::abs(r1.potential[l] - r2.potential[l]));
    return dev;
}

}  // namespace relcap
