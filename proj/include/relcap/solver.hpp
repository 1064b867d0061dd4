/**
 * @file solver.hpp
 * @brief Shared minimization engine for capacity and potential problems.
 *
 * Solves
 *
 *     min_u  (1/p) E_p(u) - b . u     subject to  u_i >= 1 for constrained nodes i,
 *
 * with E_p the discrete Sobolev energy. For p != 2 the power |xi|^p is replaced
 * by the smooth convex surrogate (|xi|^2 + eps^2)^{p/2} inside the iteration,
 * but termination is always decided with the exact map |xi|^{p-2} xi (zero at
 * xi = 0). When the surrogate optimum is reached without meeting the exact
 * criterion, eps is reduced and the iteration continues.
 */
#pragma once

#include "relcap/sobolev.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace relcap {

enum class Algorithm {
    automatic,                       ///< active_set_p2 when p = 2, projected_newton otherwise
    active_set_p2,                   ///< primal-dual active set on the linear complementarity system
    projected_newton,                ///< bound-constrained Newton with Armijo search along the projection arc
    projected_gradient,              ///< projected gradient with Armijo backtracking
    projected_gradient_accelerated,  ///< FISTA-type acceleration, restarted on active-set changes
};

enum class InitialGuess { zeros, ones_on_A, ones, supplied };

/// Summary of one completed minimization, passed to SolverOptions::observer.
struct SolveRecord {
    bool obstacle = false;  // capacity-type (constrained) problem
    double p = 2.0;
    std::uint64_t domain_id = 0;
    std::uint64_t input_hash = 0;  // constrained mask and load
    Algorithm algorithm = Algorithm::automatic;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

struct SolverOptions {
    /// Exact-map KKT residual target. Defaults to 1e-8 for p = 2 and 1e-6 otherwise.
    std::optional<double> tolerance;
    /// Defaults: 100 (active set), 300 (Newton), 50000 (gradient methods).
    std::optional<int> max_iterations;
    double epsilon_reg = 1e-8;
    Algorithm algorithm = Algorithm::automatic;
    InitialGuess initial_guess = InitialGuess::zeros;
    std::optional<GridFunction> supplied_guess;
    /// Called after every solve, possibly from several threads at once.
    std::function<void(const SolveRecord&)> observer;

    double resolved_tolerance(const PExponent& p) const {
        if (tolerance) return *tolerance;
        return p.is_quadratic() ? 1e-8 : 1e-6;
    }
    Algorithm resolved_algorithm(const PExponent& p) const {
        if (algorithm == Algorithm::automatic) return p.is_quadratic() ? Algorithm::active_set_p2 : Algorithm::projected_newton;
        return algorithm;
    }
    int resolved_max_iterations(Algorithm a) const {
        if (max_iterations) return *max_iterations;
        switch (a) {
            case Algorithm::active_set_p2: return 100;
            case Algorithm::projected_gradient:
            case Algorithm::projected_gradient_accelerated: return 50000;
            default: return 300;
        }
    }
    void validate(const PExponent& p) const {
        if (tolerance && !(*tolerance > 0.0)) throw InvalidOptions("tolerance must be positive");
        if (!(epsilon_reg >= 0.0)) throw InvalidOptions("epsilon_reg must be nonnegative");
        if (max_iterations && *max_iterations < 0) throw InvalidOptions("max_iterations must be nonnegative");
        if (algorithm == Algorithm::active_set_p2 && !p.is_quadratic())
            throw InvalidOptions("active_set_p2 is only valid for p = 2");
        if (initial_guess == InitialGuess::supplied && !supplied_guess)
            throw InvalidOptions("initial_guess = supplied without a grid function");
    }
};

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::automatic: return "automatic";
        case Algorithm::active_set_p2: return "active_set_p2";
        case Algorithm::projected_newton: return "projected_newton";
        case Algorithm::projected_gradient: return "projected_gradient";
        case Algorithm::projected_gradient_accelerated: return "projected_gradient_accelerated";
    }
    return "?";
}

inline const char* to_string(InitialGuess g) {
    switch (g) {
        case InitialGuess::zeros: return "zeros";
        case InitialGuess::ones_on_A: return "ones_on_A";
        case InitialGuess::ones: return "ones";
        case InitialGuess::supplied: return "supplied";
    }
    return "?";
}

namespace detail {

/// Minimization problem in closure-local coordinates.
struct ObstacleProblem {
    DomainPtr domain;
    double p = 2.0;
    std::vector<std::uint8_t> constrained;  // u_i >= 1 where set
    std::vector<double> load;               // linear term b
    /// The obstacle is known to be attained on every constrained node (zero load:
    /// truncation at 1 never increases the energy), so Newton may hold them at 1.
    bool pinned = false;
};

struct SolveOutcome {
    std::vector<double> u;
    std::vector<double> residual_vector;  // exact F(u) - b per node
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Exact optimality residual given the nodal vector r = F(u) - b.
inline double optimality_residual(std::span<const double> u, std::span<const double> r,
                                  std::span<const std::uint8_t> constrained) {
    double res = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!constrained[i]) {
            res = std::max(res, std::abs(r[i]));
        } else {
            res = std::max({res, std::max(0.0, -r[i]), std::abs(r[i] * (u[i] - 1.0)), std::max(0.0, 1.0 - u[i])});
        }
    }
    return res;
}

class Engine {
public:
    explicit Engine(const ObstacleProblem& prob) : prob_(prob), d_(*prob.domain), n_(d_.num_closure()) {
        for_each_stencil(d_, [&](const Stencil& s) { stencils_.push_back(s); });
    }

    std::size_t size() const { return n_; }

    void project(std::vector<double>& u) const {
        for (std::size_t i = 0; i < n_; ++i)
            if (prob_.constrained[i]) u[i] = std::max(u[i], 1.0);
    }

    /// Exact nodal vector F(u) - b.
    std::vector<double> exact_residual_vector(std::span<const double> u) const {
        GridFunction uf(prob_.domain, std::vector<double>(u.begin(), u.end()));
        auto r = nodal_pairings(uf, PExponent(prob_.p));
        for (std::size_t i = 0; i < n_; ++i) r[i] -= prob_.load[i];
        return r;
    }

    double exact_residual(std::span<const double> u, std::vector<double>* rvec = nullptr) const {
        auto r = exact_residual_vector(u);
        const double res = optimality_residual(u, r, prob_.constrained);
        if (rvec) *rvec = std::move(r);
        return res;
    }

    /// Regularized objective (1/p) E_eps(u) - b.u.
    double objective(std::span<const double> u, double eps) const {
        const double p = prob_.p;
        const double h = d_.spacing();
        const double shift = p == 2.0 ? 0.0 : std::pow(eps * eps, 0.5 * p);
        double e = 0.0;
        for (const Stencil& s : stencils_) {
            const Point g = stencil_gradient(s, u, h);
            e += s.weight * (surrogate(g[0] * g[0] + g[1] * g[1], eps) - shift);
        }
        const auto w = d_.weights();
        double lin = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            e += w[i] * (surrogate(u[i] * u[i], eps) - shift);
            lin += prob_.load[i] * u[i];
        }
        return e / p - lin;
    }

    /// objective(v) - objective(u), summed term by term to limit cancellation.
    double objective_change(std::span<const double> u, std::span<const double> v, double eps) const {
        const double h = d_.spacing();
        double e = 0.0;
        for (const Stencil& s : stencils_) {
            const Point gu = stencil_gradient(s, u, h);
            const Point gv = stencil_gradient(s, v, h);
            e += s.weight *
                 (surrogate(gv[0] * gv[0] + gv[1] * gv[1], eps) - surrogate(gu[0] * gu[0] + gu[1] * gu[1], eps));
        }
        const auto w = d_.weights();
        double lin = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (u[i] == v[i]) continue;
            e += w[i] * (surrogate(v[i] * v[i], eps) - surrogate(u[i] * u[i], eps));
            lin += prob_.load[i] * (v[i] - u[i]);
        }
        return e / prob_.p - lin;
    }

    /// Gradient of the regularized objective.
    std::vector<double> gradient(std::span<const double> u, double eps) const {
        const double h = d_.spacing();
        std::vector<double> g(n_, 0.0);
        for (const Stencil& s : stencils_) {
            const Point gr = stencil_gradient(s, u, h);
            const double f = s.weight * flux(gr[0] * gr[0] + gr[1] * gr[1], eps) / h;
            for (int k = 0; k < s.components; ++k) {
                const auto kk = static_cast<std::size_t>(k);
                g[static_cast<std::size_t>(s.to[kk])] += f * gr[kk];
                g[static_cast<std::size_t>(s.from[kk])] -= f * gr[kk];
            }
        }
        const auto w = d_.weights();
        for (std::size_t i = 0; i < n_; ++i) g[i] += w[i] * flux(u[i] * u[i], eps) * u[i] - prob_.load[i];
        return g;
    }

    /// Hessian of the regularized objective.
    Eigen::SparseMatrix<double> hessian(std::span<const double> u, double eps) const {
        const double h = d_.spacing();
        const double p = prob_.p;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(stencils_.size() * 16 + n_);
        for (const Stencil& s : stencils_) {
            const Point g = stencil_gradient(s, u, h);
            const double nsq = g[0] * g[0] + g[1] * g[1];
            double a = 0.0, b = 0.0;  // d2phi = a I + b g g^T
            hessian_coeffs(nsq, eps, p, a, b);
            const int m = s.components;
            for (int k = 0; k < m; ++k) {
                for (int l = 0; l < m; ++l) {
                    const auto kk = static_cast<std::size_t>(k), ll = static_cast<std::size_t>(l);
                    const double c = s.weight * ((k == l ? a : 0.0) + b * g[kk] * g[ll]) / (h * h);
                    if (c == 0.0) continue;
                    const int tk = s.to[kk], fk = s.from[kk], tl = s.to[ll], fl = s.from[ll];
                    trip.emplace_back(tk, tl, c);
                    trip.emplace_back(fk, fl, c);
                    trip.emplace_back(tk, fl, -c);
                    trip.emplace_back(fk, tl, -c);
                }
            }
        }
        const auto w = d_.weights();
        for (std::size_t i = 0; i < n_; ++i) {
            double a = 0.0, b = 0.0;
            hessian_coeffs(u[i] * u[i], eps, p, a, b);
            trip.emplace_back(static_cast<int>(i), static_cast<int>(i), w[i] * (a + b * u[i] * u[i]));
        }
        Eigen::SparseMatrix<double> H(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        H.setFromTriplets(trip.begin(), trip.end());
        return H;
    }

    double p() const { return prob_.p; }
    const ObstacleProblem& problem() const { return prob_; }

private:
    double surrogate(double nsq, double eps) const {
        const double p = prob_.p;
        if (p == 2.0) return nsq;
        const double t = nsq + eps * eps;
        return t == 0.0 ? 0.0 : std::pow(t, 0.5 * p);
    }
    // (1/p) d/dxi of the surrogate, divided by xi.
    double flux(double nsq, double eps) const {
        const double p = prob_.p;
        if (p == 2.0) return 1.0;
        const double t = nsq + eps * eps;
        return t == 0.0 ? 0.0 : std::pow(t, 0.5 * (p - 2.0));
    }
    static void hessian_coeffs(double nsq, double eps, double p, double& a, double& b) {
        if (p == 2.0) {
            a = 1.0;
            b = 0.0;
            return;
        }
        const double t = nsq + eps * eps;
        if (t == 0.0) {
            a = b = 0.0;
            return;
        }
        a = std::pow(t, 0.5 * (p - 2.0));
        b = (p - 2.0) * std::pow(t, 0.5 * (p - 4.0));
    }

    const ObstacleProblem& prob_;
    const GridDomain& d_;
    std::size_t n_;
    std::vector<Stencil> stencils_;
};

/// Solve H_FF x_F = rhs_F for the free variables; returns false on factorization failure.
inline bool solve_reduced(const Eigen::SparseMatrix<double>& H, const std::vector<int>& free_index,
                          const std::vector<int>& free_nodes, const Eigen::VectorXd& rhs, Eigen::VectorXd& x) {
    const auto nf = static_cast<Eigen::Index>(free_nodes.size());
    if (nf == 0) {
        x.resize(0);
        return true;
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(H.nonZeros()));
    for (int col = 0; col < H.outerSize(); ++col) {
        const int fc = free_index[static_cast<std::size_t>(col)];
        if (fc < 0) continue;
        for (Eigen::SparseMatrix<double>::InnerIterator it(H, col); it; ++it) {
            const int fr = free_index[static_cast<std::size_t>(it.row())];
            if (fr >= 0) trip.emplace_back(fr, fc, it.value());
        }
    }
    Eigen::SparseMatrix<double> Hff(nf, nf);
    Hff.setFromTriplets(trip.begin(), trip.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Hff);
    if (ldlt.info() != Eigen::Success) return false;
    x = ldlt.solve(rhs);
    return ldlt.info() == Eigen::Success && x.allFinite();
}

inline std::vector<double> initial_vector(const ObstacleProblem& prob, const SolverOptions& opts) {
    const std::size_t n = prob.domain->num_closure();
    std::vector<double> u(n, 0.0);
    switch (opts.initial_guess) {
        case InitialGuess::zeros: break;
        case InitialGuess::ones_on_A:
            for (std::size_t i = 0; i < n; ++i)
                if (prob.constrained[i]) u[i] = 1.0;
            break;
        case InitialGuess::ones: std::fill(u.begin(), u.end(), 1.0); break;
        case InitialGuess::supplied: {
            const GridFunction& s = *opts.supplied_guess;
            require_same(s.domain(), prob.domain, "supplied initial guess");
            u.assign(s.values().begin(), s.values().end());
            break;
        }
    }
    return u;
}

inline SolveOutcome finish(const Engine& eng, std::vector<double> u, int it, double tol) {
    SolveOutcome out;
    out.residual = eng.exact_residual(u, &out.residual_vector);
    out.u = std::move(u);
    out.iterations = it;
    out.converged = out.residual <= tol;
    return out;
}

/// Primal-dual active set method for p = 2 (linear complementarity with an M-matrix).
inline SolveOutcome solve_active_set(const Engine& eng, std::vector<double> u, double tol, int max_it) {
    const auto& prob = eng.problem();
    const std::size_t n = eng.size();
    const auto H = eng.hessian(u, 0.0);
    std::vector<std::uint8_t> active(prob.constrained);  // start with every obstacle node active
    int it = 0;
    for (; it < max_it; ++it) {
        std::vector<int> free_index(n, -1), free_nodes;
        for (std::size_t i = 0; i < n; ++i) {
            if (active[i]) {
                u[i] = 1.0;
            } else {
                free_index[i] = static_cast<int>(free_nodes.size());
                free_nodes.push_back(static_cast<int>(i));
            }
        }
        // H_FF u_F = b_F - H_FA 1
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(free_nodes.size()));
        for (std::size_t k = 0; k < free_nodes.size(); ++k) rhs[static_cast<Eigen::Index>(k)] = prob.load[static_cast<std::size_t>(free_nodes[k])];
        for (int col = 0; col < H.outerSize(); ++col) {
            if (!active[static_cast<std::size_t>(col)]) continue;
            for (Eigen::SparseMatrix<double>::InnerIterator itr(H, col); itr; ++itr) {
                const int fr = free_index[static_cast<std::size_t>(itr.row())];
                if (fr >= 0) rhs[fr] -= itr.value();
            }
        }
        Eigen::VectorXd x;
        if (!solve_reduced(H, free_index, free_nodes, rhs, x)) break;
        for (std::size_t k = 0; k < free_nodes.size(); ++k) u[static_cast<std::size_t>(free_nodes[k])] = x[static_cast<Eigen::Index>(k)];

        const auto r = eng.exact_residual_vector(u);
        std::vector<std::uint8_t> next(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (!prob.constrained[i]) continue;
            const double lambda = active[i] ? r[i] : 0.0;
            next[i] = lambda + (1.0 - u[i]) > 0.0 ? 1 : 0;
        }
        if (next == active) {
            ++it;
            break;
        }
        active = std::move(next);
    }
    return finish(eng, std::move(u), it, tol);
}

/// Smallest regularization the continuation may reach.
inline constexpr double epsilon_floor = 1e-200;
/// Regularization at which the continuation starts (never below the requested value).
inline constexpr double epsilon_start = 10.0;

/// Projected Newton method (Bertsekas) on the regularized objective, with
/// continuation in eps: each stage is solved loosely, the last one until the
/// exact residual meets the tolerance.
inline SolveOutcome solve_projected_newton(const Engine& eng, std::vector<double> u, double tol, int max_it,
                                           double eps_target) {
    const auto& prob = eng.problem();
    const std::size_t n = eng.size();
    eng.project(u);
    const bool smooth = eng.p() == 2.0 || eps_target == 0.0;
    double eps = eng.p() == 2.0 ? 0.0 : std::max(eps_target, eps_target > 0.0 ? epsilon_start : 0.0);
    auto sharpen = [&] {
        if (smooth || eps <= epsilon_floor) return false;
        eps = eps > eps_target ? std::max(eps * 0.1, eps_target) : std::max(eps * 1e-2, epsilon_floor);
        return true;
    };

    int it = 0, stalled = 0;
    double res = eng.exact_residual(u);
    std::vector<double> trial(n), dir(n);
    for (; it < max_it && res > tol; ++it) {
        const auto g = eng.gradient(u, eps);

        double pg_norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double step = prob.constrained[i] ? u[i] - std::max(u[i] - g[i], 1.0) : g[i];
            pg_norm = std::max(pg_norm, std::abs(step));
        }
        const double stage_tol = eps > eps_target ? tol : 1e-3 * tol;
        if (pg_norm <= stage_tol && sharpen()) continue;

        // Variables held at the bound: at (or within delta of) the obstacle with an outward gradient.
        const double delta = std::min(1e-3, pg_norm);
        std::vector<int> free_index(n, -1), free_nodes;
        std::vector<std::uint8_t> bound(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (prob.constrained[i] && (prob.pinned || (u[i] <= 1.0 + delta && g[i] > 0.0))) {
                bound[i] = 1;
            } else {
                free_index[i] = static_cast<int>(free_nodes.size());
                free_nodes.push_back(static_cast<int>(i));
            }
        }

        const auto H = eng.hessian(u, eps);
        std::fill(dir.begin(), dir.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            if (bound[i]) dir[i] = 1.0 - u[i];
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(free_nodes.size()));
        for (std::size_t k = 0; k < free_nodes.size(); ++k)
            rhs[static_cast<Eigen::Index>(k)] = -g[static_cast<std::size_t>(free_nodes[k])];
        for (int col = 0; col < H.outerSize(); ++col) {
            if (!bound[static_cast<std::size_t>(col)] || dir[static_cast<std::size_t>(col)] == 0.0) continue;
            for (Eigen::SparseMatrix<double>::InnerIterator itr(H, col); itr; ++itr) {
                const int fr = free_index[static_cast<std::size_t>(itr.row())];
                if (fr >= 0) rhs[fr] -= itr.value() * dir[static_cast<std::size_t>(col)];
            }
        }
        Eigen::VectorXd x;
        bool newton_ok = solve_reduced(H, free_index, free_nodes, rhs, x);
        if (newton_ok) {
            double slope = 0.0;
            for (std::size_t k = 0; k < free_nodes.size(); ++k) {
                const auto i = static_cast<std::size_t>(free_nodes[k]);
                dir[i] = x[static_cast<Eigen::Index>(k)];
                slope += g[i] * dir[i];
            }
            newton_ok = slope < 0.0 || free_nodes.empty();
        }
        if (!newton_ok) {
            // Diagonally scaled steepest descent.
            for (int i : free_nodes) {
                const double diag = H.coeff(i, i);
                dir[static_cast<std::size_t>(i)] = -g[static_cast<std::size_t>(i)] / (diag > 0.0 ? diag : 1.0);
            }
        }

        // Cap the free part of the step; nearly singular Hessians (p > 2 near u = 0) produce huge steps.
        double unorm = 1.0, dnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) unorm = std::max(unorm, std::abs(u[i]));
        for (int i : free_nodes) dnorm = std::max(dnorm, std::abs(dir[static_cast<std::size_t>(i)]));
        if (dnorm > 10.0 * unorm)
            for (int i : free_nodes) dir[static_cast<std::size_t>(i)] *= 10.0 * unorm / dnorm;
        double slope = 0.0;
        for (int i : free_nodes) slope += g[static_cast<std::size_t>(i)] * dir[static_cast<std::size_t>(i)];

        double alpha = 1.0;
        bool accepted = false;
        while (alpha > 1e-16) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] + alpha * dir[i];
            eng.project(trial);
            double decrease = -alpha * slope;
            for (std::size_t i = 0; i < n; ++i)
                if (bound[i]) decrease += g[i] * (u[i] - trial[i]);
            if (eng.objective_change(u, trial, eps) <= -1e-4 * decrease) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // Objective differences at rounding level cannot rank the iterates any
            // more; backtrack on the exact residual instead.
            for (alpha = 1.0; alpha > 1e-4 && !accepted; alpha *= 0.5) {
                for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] + alpha * dir[i];
                eng.project(trial);
                accepted = eng.exact_residual(trial) < 0.9 * res;
            }
        }
        if (!accepted) {
            if (sharpen()) continue;
            break;
        }
        u.swap(trial);
        const double prev = res;
        res = eng.exact_residual(u);
        // Stalled at this regularization level: the surrogate optimum is resolved as far as rounding allows.
        stalled = res >= 0.999 * prev ? stalled + 1 : 0;
        if (stalled >= 5) {
            stalled = 0;
            if (!sharpen()) break;
        }
    }
    return finish(eng, std::move(u), it, tol);
}

/// Projected gradient with Armijo backtracking; optional FISTA acceleration.
inline SolveOutcome solve_projected_gradient(const Engine& eng, std::vector<double> u, double tol, int max_it,
                                             double eps0, bool accelerated) {
    const auto& prob = eng.problem();
    const std::size_t n = eng.size();
    eng.project(u);
    double eps = eng.p() == 2.0 ? 0.0 : eps0;
    const double eps_floor = eps0 > 0.0 ? epsilon_floor : 0.0;

    // Initial step from the Hessian diagonal.
    double step = 1.0;
    {
        const auto H = eng.hessian(u, std::max(eps, 1e-3));
        double dmax = 0.0;
        for (std::size_t i = 0; i < n; ++i) dmax = std::max(dmax, H.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
        if (dmax > 0.0) step = 1.0 / (4.0 * dmax);
    }

    std::vector<double> y(u), prev(u), trial(n);
    double t = 1.0;
    int it = 0;
    double res = eng.exact_residual(u);
    auto active_of = [&](const std::vector<double>& v) {
        std::vector<std::uint8_t> a(n, 0);
        for (std::size_t i = 0; i < n; ++i) a[i] = prob.constrained[i] && v[i] <= 1.0;
        return a;
    };
    auto active = active_of(u);
    for (; it < max_it && res > tol; ++it) {
        const auto g = eng.gradient(y, eps);
        const double fy = eng.objective(y, eps);
        double pg_norm = 0.0;
        for (;;) {
            double quad = 0.0, lin = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                trial[i] = y[i] - step * g[i];
                if (prob.constrained[i]) trial[i] = std::max(trial[i], 1.0);
                const double dlt = trial[i] - y[i];
                lin += g[i] * dlt;
                quad += dlt * dlt;
            }
            pg_norm = std::sqrt(quad) / step;
            const double ft = eng.objective(trial, eps);
            if (ft <= fy + lin + quad / (2.0 * step) + 1e-15 * std::abs(fy) || step < 1e-30) break;
            step *= 0.5;
        }
        if (eps > eps_floor && pg_norm <= 1e-3 * tol) eps = std::max(eps * 1e-2, eps_floor);

        prev.swap(u);
        u = trial;
        auto now_active = active_of(u);
        if (accelerated) {
            const bool restart = now_active != active || eng.objective(u, eps) > eng.objective(prev, eps);
            if (restart) {
                t = 1.0;
                y = u;
            } else {
                const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
                for (std::size_t i = 0; i < n; ++i) y[i] = u[i] + ((t - 1.0) / tn) * (u[i] - prev[i]);
                eng.project(y);
                t = tn;
            }
        } else {
            y = u;
        }
        active = std::move(now_active);
        step *= 1.1;
        res = eng.exact_residual(u);
    }
    return finish(eng, std::move(u), it, tol);
}

/// Fingerprint of (domain, constrained mask, load); reported with every solve.
inline std::uint64_t problem_hash(const ObstacleProblem& prob) {
    std::uint64_t h = fnv1a(prob.constrained.data(), prob.constrained.size(), prob.domain->id());
    return fnv1a(prob.load.data(), prob.load.size() * sizeof(double), h);
}

inline SolveOutcome minimize(const ObstacleProblem& prob, const SolverOptions& opts) {
    const PExponent pe(prob.p);
    opts.validate(pe);
    const Engine eng(prob);
    const double tol = opts.resolved_tolerance(pe);
    const Algorithm alg = opts.resolved_algorithm(pe);
    const int max_it = opts.resolved_max_iterations(alg);
    auto u = initial_vector(prob, opts);
    SolveOutcome out;
    switch (alg) {
        case Algorithm::active_set_p2: out = solve_active_set(eng, std::move(u), tol, max_it); break;
        case Algorithm::projected_gradient:
            out = solve_projected_gradient(eng, std::move(u), tol, max_it, opts.epsilon_reg, false);
            break;
        case Algorithm::projected_gradient_accelerated:
            out = solve_projected_gradient(eng, std::move(u), tol, max_it, opts.epsilon_reg, true);
            break;
        default: out = solve_projected_newton(eng, std::move(u), tol, max_it, opts.epsilon_reg); break;
    }
    if (opts.observer) {
        SolveRecord rec;
        rec.obstacle = std::find(prob.constrained.begin(), prob.constrained.end(), 1) != prob.constrained.end();
        rec.p = prob.p;
        rec.domain_id = prob.domain->id();
        rec.input_hash = problem_hash(prob);
        rec.algorithm = alg;
        rec.iterations = out.iterations;
        rec.residual = out.residual;
        rec.converged = out.converged;
        opts.observer(rec);
    }
    return out;
}

}  // namespace detail
}  // namespace relcap
