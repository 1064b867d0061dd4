/**
 * @file capacity.hpp
 * @brief Relative p-capacity of node sets and their capacitary extremals.
 *
 * Cap(A) = min { E_p(u) : u_i >= 1 for every node i of A }. The minimizer is the
 * extremal e_A; it satisfies 0 <= e_A <= 1 and e_A = 1 on A, and is certified by
 * the exact variational-inequality residual returned in CapacityResult.
 */
#pragma once

#include "relcap/solver.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace relcap {

struct CapacityResult {
    double value = 0.0;
    GridFunction extremal;
    double kkt_residual = 0.0;
    /// Nodes of A with a strictly positive multiplier.
    NodeSet active_set;
    /// <F(e_A), delta_i> for each node of A, in the order of A.members().
    std::vector<double> multipliers;
    int iterations = 0;
    bool converged = false;
    double tolerance = 0.0;
};

struct KktReport {
    double residual = 0.0;
    std::vector<double> multipliers;  // one per node of A, in member order
};

/// Exact optimality residual of a candidate extremal u for the set A.
/// Throws Infeasible if u drops below 0.9 on A.
inline KktReport kkt_residual(const GridFunction& u, const NodeSet& a, const PExponent& p) {
    detail::require_same(u.domain(), a.domain(), "kkt_residual");
    const GridDomain& d = *u.domain();
    for (NodeIndex g : a.members())
        if (u.at(g) < 1.0 - 0.1)
            throw Infeasible("candidate value " + std::to_string(u.at(g)) + " at node " + std::to_string(g) +
                             " is not admissible for the obstacle");
    const auto r = nodal_pairings(u, p);
    const auto mask = a.local_mask();
    KktReport out;
    out.residual = detail::optimality_residual(u.values(), r, mask);
    out.multipliers.reserve(a.size());
    for (NodeIndex g : a.members()) out.multipliers.push_back(r[static_cast<std::size_t>(d.local(g))]);
    return out;
}

/// Compute Cap_{p,Omega}(A) and the extremal. Non-convergence is reported through
/// `converged = false` with the last iterate.
inline CapacityResult capacity(const DomainPtr& domain, const NodeSet& a, const PExponent& p,
                               const SolverOptions& opts = {}) {
    detail::require_same(domain, a.domain(), "capacity");
    opts.validate(p);
    CapacityResult res;
    res.tolerance = opts.resolved_tolerance(p);
    if (a.empty()) {
        res.extremal = GridFunction(domain, 0.0);
        res.active_set = NodeSet(domain);
        res.converged = true;
        return res;
    }

    detail::ObstacleProblem prob{domain, p.value(), a.local_mask(), std::vector<double>(domain->num_closure(), 0.0), true};
    auto out = detail::minimize(prob, opts);

    res.extremal = GridFunction(domain, std::move(out.u));
    res.value = sobolev_energy(res.extremal, p);
    res.kkt_residual = out.residual;
    res.iterations = out.iterations;
    res.converged = out.converged;
    std::vector<NodeIndex> active;
    for (NodeIndex g : a.members()) {
        const double lambda = out.residual_vector[static_cast<std::size_t>(domain->local(g))];
        res.multipliers.push_back(lambda);
        if (lambda > 0.0) active.push_back(g);
    }
    res.active_set = NodeSet(domain, std::move(active));
    return res;
}

/// Max nodal deviation between extremals started from u = 0 and from u = 1.
/// Throws NonConvergence if either run fails.
inline double capacity_uniqueness_check(const DomainPtr& domain, const NodeSet& a, const PExponent& p,
                                        SolverOptions opts = {}) {
    if (a.empty()) return 0.0;
    opts.initial_guess = InitialGuess::zeros;
    const auto r1 = capacity(domain, a, p, opts);
    opts.initial_guess = InitialGuess::ones;
    const auto r2 = capacity(domain, a, p, opts);
    if (!r1.converged || !r2.converged) throw NonConvergence("capacity uniqueness check: a solve did not converge");
    double dev = 0.0;
    for (std::size_t l = 0; l < r1.extremal.size(); ++l) dev = std::max(dev, std::abs(r1.extremal[l] - r2.extremal[l]));
    return dev;
}

/// Deviation threshold 10 * tol^{min(1/2, 1/p)} from the p-dependent uniform-convexity modulus.
inline double uniqueness_threshold(double tolerance, const PExponent& p) {
    return 10.0 * std::pow(tolerance, std::min(0.5, 1.0 / p.value()));
}

}  // namespace relcap
