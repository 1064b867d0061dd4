/**
 * @file propcheck.hpp
 * @brief Randomized and structured verification of capacity theorems.
 *
 * Every check produces a PropertyReport. A trial records (lhs, rhs) with
 * slack = rhs - lhs, so a holding inequality has slack >= 0; a trial is a
 * violation only when slack < -tolerance. Solves that fail to converge are
 * recorded as skipped and never counted as passes.
 *
 * Randomness is derived from (seed, trial index) alone, so reports do not
 * depend on the number of worker threads.
 */
#pragma once

#include "relcap/potential.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace relcap {

struct TrialRecord {
    int trial = 0;
    std::string inputs_hash;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    enum class Status { ok, violation, skipped } status = Status::ok;
    std::string note;
};

inline const char* to_string(TrialRecord::Status s) {
    switch (s) {
        case TrialRecord::Status::ok: return "ok";
        case TrialRecord::Status::violation: return "violation";
        case TrialRecord::Status::skipped: return "skipped";
    }
    return "?";
}

struct PropertyReport {
    std::string property_name;
    double p = 0.0;
    std::uint64_t seed = 0;
    double tolerance = 0.0;
    int trials = 0;
    int violations = 0;
    int skipped = 0;
    /// Most negative slack over evaluated trials (0 if none).
    double worst_margin = 0.0;
    std::vector<TrialRecord> records;
    /// Check-specific scalars (e.g. "sup_ratio").
    std::map<std::string, double> summary;
    std::string note;

    bool passed() const { return violations == 0; }
};

struct CheckOptions {
    SolverOptions solver;
    /// Overrides the per-check default (a multiple of the solver tolerance).
    std::optional<double> slack_tolerance;
    int jobs = 1;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Engine-exact uniform doubles (std distributions are implementation-defined).
class TrialRng {
public:
    TrialRng(std::uint64_t seed, std::uint64_t trial) : eng_(splitmix64(seed ^ splitmix64(trial + 1))) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)) % (hi - lo + 1); }

private:
    std::mt19937_64 eng_;
};

inline TrialRecord trial(int t, std::string hash, double lhs, double rhs, double slack) {
    TrialRecord r;
    r.trial = t;
    r.inputs_hash = std::move(hash);
    r.lhs = lhs;
    r.rhs = rhs;
    r.slack = slack;
    return r;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::uint64_t set_hash(const NodeSet& a, std::uint64_t seed = 1469598103934665603ULL) {
    seed = fnv1a_value(a.domain()->id(), seed);
    return fnv1a(a.members().data(), a.members().size() * sizeof(NodeIndex), seed);
}

/// Run fn(t) for t in [0, n) on `jobs` threads; results are stored by index.
inline std::vector<TrialRecord> run_trials(int n, int jobs, const std::function<TrialRecord(int)>& fn) {
    std::vector<TrialRecord> out(static_cast<std::size_t>(std::max(n, 0)));
    if (jobs <= 1 || n <= 1) {
        for (int t = 0; t < n; ++t) out[static_cast<std::size_t>(t)] = fn(t);
        return out;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(jobs, n); ++w) {
        pool.emplace_back([&] {
            for (int t = next++; t < n; t = next++) {
                try {
                    out[static_cast<std::size_t>(t)] = fn(t);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

inline PropertyReport summarize(std::string name, double p, std::uint64_t seed, double tol,
                                std::vector<TrialRecord> records) {
    PropertyReport r;
    r.property_name = std::move(name);
    r.p = p;
    r.seed = seed;
    r.tolerance = tol;
    bool any = false;
    for (auto& rec : records) {
        ++r.trials;
        if (rec.status == TrialRecord::Status::skipped) {
            ++r.skipped;
            continue;
        }
        rec.status = rec.slack < -tol ? TrialRecord::Status::violation : TrialRecord::Status::ok;
        if (rec.status == TrialRecord::Status::violation) ++r.violations;
        r.worst_margin = any ? std::min(r.worst_margin, rec.slack) : rec.slack;
        any = true;
    }
    r.records = std::move(records);
    return r;
}

inline TrialRecord skipped(int t, std::string hash, std::string why) {
    TrialRecord rec;
    rec.trial = t;
    rec.inputs_hash = std::move(hash);
    rec.status = TrialRecord::Status::skipped;
    rec.note = std::move(why);
    return rec;
}

/// Capacity value or nullopt when the solve did not converge.
inline std::optional<double> cap_value(const NodeSet& a, const PExponent& p, const SolverOptions& opts) {
    auto r = capacity(a.domain(), a, p, opts);
    if (!r.converged) return std::nullopt;
    return r.value;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Random node sets
// ---------------------------------------------------------------------------

/// Union of 1-4 random balls / boxes intersected with the closure. About one in
/// six sets is restricted to boundary nodes. May be empty. With `region`, shapes
/// are centered in that box and the result is clipped to it (no boundary-only sets).
inline NodeSet random_node_set(const DomainPtr& d, detail::TrialRng& rng, const Box* region = nullptr) {
    const Box& bx = region ? *region : d->box();
    const int dim = d->dimension();
    double extent = bx.hi[0] - bx.lo[0];
    if (dim == 2) extent = std::min(extent, bx.hi[1] - bx.lo[1]);
    auto random_point = [&] {
        Point x{rng.uniform(bx.lo[0], bx.hi[0]), 0.0};
        if (dim == 2) x[1] = rng.uniform(bx.lo[1], bx.hi[1]);
        return x;
    };
    const bool boundary_only = rng.uniform() < 1.0 / 6.0 && !region;
    const int pieces = rng.integer(1, 4);
    NodeSet out(d);
    for (int k = 0; k < pieces; ++k) {
        if (rng.uniform() < 0.5) {
            out = unite(out, node_set(d, select::Ball{random_point(), rng.uniform(0.0, 0.25 * extent)}));
        } else {
            const Point c = random_point();
            Box b;
            for (int a = 0; a < dim; ++a) {
                const double half = rng.uniform(0.0, 0.15 * extent);
                b.lo[static_cast<std::size_t>(a)] = c[static_cast<std::size_t>(a)] - half;
                b.hi[static_cast<std::size_t>(a)] = c[static_cast<std::size_t>(a)] + half;
            }
            out = unite(out, node_set(d, select::BoxSel{b}));
        }
    }
    if (boundary_only) out = intersect(out, node_set(d, select::Boundary{}));
    if (region) out = intersect(out, node_set(d, select::BoxSel{*region}));
    return out;
}

/// Random nonempty set (falls back to the nearest node of a random point).
inline NodeSet random_nonempty_node_set(const DomainPtr& d, detail::TrialRng& rng) {
    for (int attempt = 0; attempt < 16; ++attempt) {
        auto a = random_node_set(d, rng);
        if (!a.empty()) return a;
    }
    const Box& bx = d->box();
    return node_set(d, select::Nearest{{rng.uniform(bx.lo[0], bx.hi[0]), rng.uniform(bx.lo[1], bx.hi[1])}});
}

/// Random set inside a closed box K (for comparisons on a fixed compact); empty only
/// when repeated draws miss every node of K.
inline NodeSet random_node_set_in(const DomainPtr& d, const Box& k, detail::TrialRng& rng) {
    NodeSet a = random_node_set(d, rng, &k);
    for (int attempt = 0; attempt < 16 && a.empty(); ++attempt) a = random_node_set(d, rng, &k);
    return a;
}

/// Increasing chain of `steps` sets starting from the empty set.
inline std::vector<NodeSet> random_chain(const DomainPtr& d, int steps, std::uint64_t seed) {
    detail::TrialRng rng(seed, 0);
    std::vector<NodeSet> chain{NodeSet(d)};
    while (static_cast<int>(chain.size()) < steps) chain.push_back(unite(chain.back(), random_node_set(d, rng)));
    return chain;
}

// ---------------------------------------------------------------------------
// Choquet properties
// ---------------------------------------------------------------------------

/// A subset of B implies Cap(A) <= Cap(B). Trial 0 uses A = empty, trial 1 uses A = B.
inline PropertyReport check_monotonicity(const DomainPtr& d, const PExponent& p, int trials, std::uint64_t seed,
                                         const CheckOptions& opts = {}) {
    const double tol = opts.slack_tolerance.value_or(2.0 * opts.solver.resolved_tolerance(p));
    auto recs = detail::run_trials(trials, opts.jobs, [&](int t) {
        detail::TrialRng rng(seed, static_cast<std::uint64_t>(t));
        NodeSet b = random_nonempty_node_set(d, rng);
        NodeSet a = t == 0 ? NodeSet(d) : t == 1 ? b : intersect(b, random_node_set(d, rng));
        if (t >= 2 && rng.uniform() < 0.5) a = subtract(b, random_node_set(d, rng));
        const auto hash = detail::hash_hex(detail::set_hash(b, detail::set_hash(a)));
        const auto ca = detail::cap_value(a, p, opts.solver), cb = detail::cap_value(b, p, opts.solver);
        if (!ca || !cb) return detail::skipped(t, hash, "non-convergence");
        return detail::trial(t, hash, *ca, *cb, *cb - *ca);
    });
    return detail::summarize("monotonicity", p.value(), seed, tol, std::move(recs));
}

/// Cap(M1 u M2) + Cap(M1 n M2) <= Cap(M1) + Cap(M2).
inline PropertyReport check_strong_subadditivity(const DomainPtr& d, const PExponent& p, int trials,
                                                 std::uint64_t seed, const CheckOptions& opts = {}) {
    const double tol = opts.slack_tolerance.value_or(4.0 * opts.solver.resolved_tolerance(p));
    auto recs = detail::run_trials(trials, opts.jobs, [&](int t) {
        detail::TrialRng rng(seed, static_cast<std::uint64_t>(t));
        NodeSet m1 = random_nonempty_node_set(d, rng);
        NodeSet m2 = t == 0 ? m1 : random_node_set(d, rng);
        const auto hash = detail::hash_hex(detail::set_hash(m2, detail::set_hash(m1)));
        const auto c1 = detail::cap_value(m1, p, opts.solver), c2 = detail::cap_value(m2, p, opts.solver);
        const auto cu = detail::cap_value(unite(m1, m2), p, opts.solver);
        const auto ci = detail::cap_value(intersect(m1, m2), p, opts.solver);
        if (!c1 || !c2 || !cu || !ci) return detail::skipped(t, hash, "non-convergence");
        const double lhs = *cu + *ci, rhs = *c1 + *c2;
        return detail::trial(t, hash, lhs, rhs, rhs - lhs);
    });
    return detail::summarize("strong_subadditivity", p.value(), seed, tol, std::move(recs));
}

/// Cap(A_1 u ... u A_k) <= sum_j Cap(A_j) for k <= k_max (finite truncation of the
/// countable statement; on a finite grid the union stabilizes after finitely many terms).
inline PropertyReport check_countable_subadditivity(const DomainPtr& d, const PExponent& p, int k_max, int trials,
                                                    std::uint64_t seed, const CheckOptions& opts = {}) {
    if (k_max < 1) throw Error("k_max must be at least 1");
    const double stol = opts.solver.resolved_tolerance(p);
    auto recs = detail::run_trials(trials, opts.jobs, [&](int t) {
        detail::TrialRng rng(seed, static_cast<std::uint64_t>(t));
        const int k = t == 0 ? 1 : rng.integer(1, k_max);
        std::vector<NodeSet> family;
        if (t == 1) {
            family.assign(static_cast<std::size_t>(k_max), random_nonempty_node_set(d, rng));
        } else {
            for (int j = 0; j < k; ++j) family.push_back(random_node_set(d, rng));
        }
        NodeSet all(d);
        std::uint64_t h = 1469598103934665603ULL;
        for (const auto& a : family) {
            all = unite(all, a);
            h = detail::set_hash(a, h);
        }
        const auto hash = detail::hash_hex(h);
        double sum = 0.0;
        for (const auto& a : family) {
            const auto c = detail::cap_value(a, p, opts.solver);
            if (!c) return detail::skipped(t, hash, "non-convergence");
            sum += *c;
        }
        const auto cu = detail::cap_value(all, p, opts.solver);
        if (!cu) return detail::skipped(t, hash, "non-convergence");
        TrialRecord rec = detail::trial(t, hash, *cu, sum, sum - *cu);
        rec.note = "k=" + std::to_string(family.size());
        // Per-trial tolerance k * tol is folded into the slack so one report tolerance applies.
        if (!opts.slack_tolerance) rec.slack += (static_cast<double>(family.size()) - 1.0) * stol;
        return rec;
    });
    return detail::summarize("countable_subadditivity", p.value(), seed, opts.slack_tolerance.value_or(stol),
                             std::move(recs));
}

/// Cap(dilate(A, r)) is nonincreasing as r decreases and equals Cap(A) once r < h.
inline PropertyReport check_outer_regularity(const DomainPtr& d, const NodeSet& a, const PExponent& p,
                                             const std::vector<double>& radii, const CheckOptions& opts = {}) {
    for (std::size_t k = 1; k < radii.size(); ++k)
        if (!(radii[k] < radii[k - 1])) throw Error("outer regularity: radii must be strictly decreasing");
    const double tol = opts.slack_tolerance.value_or(2.0 * opts.solver.resolved_tolerance(p));
    const auto base = detail::cap_value(a, p, opts.solver);
    const std::string hash = detail::hash_hex(detail::set_hash(a));
    std::vector<std::optional<double>> caps(radii.size());
    detail::run_trials(static_cast<int>(radii.size()), opts.jobs, [&](int k) {
        caps[static_cast<std::size_t>(k)] = detail::cap_value(dilate(a, radii[static_cast<std::size_t>(k)]), p, opts.solver);
        return TrialRecord{};
    });
    std::vector<TrialRecord> recs;
    int t = 0;
    for (std::size_t k = 0; k < radii.size(); ++k) {
        if (k > 0) {
            if (!caps[k] || !caps[k - 1]) {
                recs.push_back(detail::skipped(t++, hash, "non-convergence"));
            } else {
                TrialRecord rec = detail::trial(t++, hash, *caps[k], *caps[k - 1], *caps[k - 1] - *caps[k]);
                rec.note = "r=" + std::to_string(radii[k]) + " vs " + std::to_string(radii[k - 1]);
                recs.push_back(rec);
            }
        }
        if (radii[k] < d->spacing()) {
            if (!caps[k] || !base) {
                recs.push_back(detail::skipped(t++, hash, "non-convergence"));
            } else {
                TrialRecord rec = detail::trial(t++, hash, *caps[k], *base, 0.0 - std::abs(*caps[k] - *base));
                rec.note = "r=" + std::to_string(radii[k]) + " < h: equality with Cap(A)";
                recs.push_back(rec);
            }
        }
    }
    auto rep = detail::summarize("outer_regularity", p.value(), 0, tol, std::move(recs));
    if (base) rep.summary["cap_A"] = *base;
    return rep;
}

/// Along an increasing chain Cap is nondecreasing and the last value equals Cap of the union.
inline PropertyReport check_increasing_limit(const DomainPtr& d, const std::vector<NodeSet>& chain, const PExponent& p,
                                             const CheckOptions& opts = {}) {
    if (chain.empty()) throw Error("increasing limit: empty chain");
    NodeSet all(d);
    for (std::size_t k = 0; k < chain.size(); ++k) {
        if (k > 0 && !is_subset(chain[k - 1], chain[k])) throw Error("increasing limit: chain is not increasing");
        all = unite(all, chain[k]);
    }
    const double tol = opts.slack_tolerance.value_or(2.0 * opts.solver.resolved_tolerance(p));
    std::vector<std::optional<double>> caps(chain.size());
    detail::run_trials(static_cast<int>(chain.size()), opts.jobs, [&](int k) {
        caps[static_cast<std::size_t>(k)] = detail::cap_value(chain[static_cast<std::size_t>(k)], p, opts.solver);
        return TrialRecord{};
    });
    const auto cu = detail::cap_value(all, p, opts.solver);
    std::vector<TrialRecord> recs;
    int t = 0;
    for (std::size_t k = 1; k < chain.size(); ++k) {
        const auto hash = detail::hash_hex(detail::set_hash(chain[k]));
        if (!caps[k] || !caps[k - 1]) {
            recs.push_back(detail::skipped(t++, hash, "non-convergence"));
            continue;
        }
        recs.push_back(detail::trial(t++, hash, *caps[k - 1], *caps[k], *caps[k] - *caps[k - 1]));
    }
    const auto hash = detail::hash_hex(detail::set_hash(all));
    if (!caps.back() || !cu) {
        recs.push_back(detail::skipped(t, hash, "non-convergence"));
    } else {
        TrialRecord rec = detail::trial(t, hash, *caps.back(), *cu, 0.0 - std::abs(*caps.back() - *cu));
        rec.note = "limit equals capacity of the union";
        recs.push_back(rec);
    }
    auto rep = detail::summarize("increasing_limit", p.value(), 0, tol, std::move(recs));
    for (std::size_t k = 0; k < caps.size(); ++k)
        if (caps[k]) rep.summary["cap_" + std::to_string(k)] = *caps[k];
    return rep;
}

// ---------------------------------------------------------------------------
// Domain comparisons
// ---------------------------------------------------------------------------

namespace detail {

/// Record the sup ratio and, with a calibrated constant, one extra record that
/// fails when the sup ratio moved more than 5% away from it.
inline void finish_ratio_report(PropertyReport& rep, std::optional<double> calibrated) {
    double sup = 0.0;
    for (const auto& r : rep.records)
        if (r.status != TrialRecord::Status::skipped) sup = std::max(sup, r.lhs / r.rhs);
    rep.summary["sup_ratio"] = sup;
    if (!calibrated) return;
    rep.summary["calibrated_constant"] = *calibrated;
    TrialRecord rec = detail::trial(static_cast<int>(rep.records.size()), hash_hex(fnv1a_value(*calibrated, 0)), sup, *calibrated,
                    0.05 * *calibrated - std::abs(sup - *calibrated));
    rec.note = "sup ratio against the calibrated constant";
    rec.status = rec.slack < 0.0 ? TrialRecord::Status::violation : TrialRecord::Status::ok;
    if (rec.slack < 0.0) ++rep.violations;
    rep.worst_margin = std::min(rep.worst_margin, rec.slack);
    ++rep.trials;
    rep.records.push_back(rec);
}

/// Every omega node of U must be an omega node of V on a common lattice.
inline void require_nested(const DomainPtr& u, const DomainPtr& v) {
    auto omega_u = node_set(u, select::Omega{});
    auto in_v = transfer(omega_u, v);
    for (NodeIndex g : in_v.members())
        if (!v->in_omega(g)) throw DomainMismatch("U is not contained in V on the common grid");
}

}  // namespace detail

/// Cap_{p,U}(A) <= Cap_{p,V}(A) for A in closure(U) whenever U is contained in V.
inline PropertyReport check_domain_monotonicity(const DomainSpec& u_spec, const DomainSpec& v_spec, const PExponent& p,
                                                int trials, std::uint64_t seed, const CheckOptions& opts = {}) {
    const auto u = build_domain(u_spec);
    const auto v = build_domain(v_spec);
    detail::require_nested(u, v);
    const double tol = opts.slack_tolerance.value_or(2.0 * opts.solver.resolved_tolerance(p));
    auto recs = detail::run_trials(trials, opts.jobs, [&](int t) {
        detail::TrialRng rng(seed, static_cast<std::uint64_t>(t));
        const NodeSet a = t == 0 ? NodeSet(u) : random_node_set(u, rng);
        const auto hash = detail::hash_hex(detail::set_hash(a));
        const auto cu = detail::cap_value(a, p, opts.solver);
        const auto cv = detail::cap_value(transfer(a, v), p, opts.solver);
        if (!cu || !cv) return detail::skipped(t, hash, "non-convergence");
        return detail::trial(t, hash, *cu, *cv, *cv - *cu);
    });
    return detail::summarize("domain_monotonicity", p.value(), seed, tol, std::move(recs));
}

/// sup over random nonempty A in closure(U) of Cap_{p,V}(A) / Cap_{p,U}(A) for an
/// extension domain U inside V. With a calibrated constant C, a trial violates when
/// its ratio exceeds 1.05 C, and the sup ratio must stay within 5% of C.
inline PropertyReport check_extension_comparison(const DomainSpec& u_spec, const DomainSpec& v_spec,
                                                 const PExponent& p, int trials, std::uint64_t seed,
                                                 std::optional<double> calibrated = std::nullopt,
                                                 const CheckOptions& opts = {}) {
    const auto u = build_domain(u_spec);
    const auto v = build_domain(v_spec);
    detail::require_nested(u, v);
    auto recs = detail::run_trials(trials, opts.jobs, [&](int t) {
        detail::TrialRng rng(seed, static_cast<std::uint64_t>(t));
        const NodeSet a = t == 0 ? node_set(u, select::Closure{}) : random_nonempty_node_set(u, rng);
        const auto hash = detail::hash_hex(detail::set_hash(a));
        const auto cu = detail::cap_value(a, p, opts.solver);
        const auto cv = detail::cap_value(transfer(a, v), p, opts.solver);
        if (!cu || !cv || !(*cu > 0.0)) return detail::skipped(t, hash, "non-convergence");
        TrialRecord rec = detail::trial(t, hash, *cv, *cu, 0.0);
        rec.note = "ratio=" + std::to_string(*cv / *cu);
        if (calibrated) rec.slack = 1.05 * *calibrated - *cv / *cu;
        return rec;
    });
    auto rep = detail::summarize("extension_comparison", p.value(), seed, 0.0, std::move(recs));
    detail::finish_ratio_report(rep, calibrated);
    return rep;
}

/// sup over random A in the compact box K of Cap_q(A) / Cap_p(A)^{q/p}, q <= p.
/// Calibration works as in check_extension_comparison.
inline PropertyReport check_pq_comparison(const DomainPtr& d, const PExponent& q, const PExponent& p, const Box& k,
                                          int trials, std::uint64_t seed,
                                          std::optional<double> calibrated = std::nullopt,
                                          const CheckOptions& opts = {}) {
    if (q.value() > p.value()) throw Error("pq comparison needs q <= p");
    auto recs = detail::run_trials(trials, opts.jobs, [&](int t) {
        detail::TrialRng rng(seed, static_cast<std::uint64_t>(t));
        const NodeSet a = t == 0 ? NodeSet(d) : random_node_set_in(d, k, rng);
        const auto hash = detail::hash_hex(detail::set_hash(a));
        if (a.empty()) return detail::skipped(t, hash, "empty set: both capacities vanish");
        const auto cq = detail::cap_value(a, q, opts.solver);
        const auto cp = detail::cap_value(a, p, opts.solver);
        if (!cq || !cp) return detail::skipped(t, hash, "non-convergence");
        const double denom = std::pow(*cp, q.value() / p.value());
        TrialRecord rec = detail::trial(t, hash, *cq, denom, 0.0);
        rec.note = "ratio=" + std::to_string(*cq / denom);
        if (calibrated) rec.slack = 1.05 * *calibrated - *cq / denom;
        return rec;
    });
    auto rep = detail::summarize("pq_comparison", p.value(), seed, 0.0, std::move(recs));
    rep.summary["q"] = q.value();
    detail::finish_ratio_report(rep, calibrated);
    return rep;
}

// ---------------------------------------------------------------------------
// Duality and energy
// ---------------------------------------------------------------------------

/// Cap(A) = ||e_A||^p = mu_A(e_A) = E(mu_A) for random sets, plus positivity and
/// complementary slackness of mu_A. Slack is -max(relative gaps).
inline PropertyReport check_duality_chain(const DomainPtr& d, const PExponent& p, int trials, std::uint64_t seed,
                                          double rel_tol = 1e-5, const CheckOptions& opts = {}) {
    auto recs = detail::run_trials(trials, opts.jobs, [&](int t) {
        detail::TrialRng rng(seed, static_cast<std::uint64_t>(t));
        const NodeSet a = random_nonempty_node_set(d, rng);
        const auto hash = detail::hash_hex(detail::set_hash(a));
        try {
            const auto cm = capacitary_measure(d, a, p, opts.solver);
            const double cap = cm.cap.value;
            const double scale = std::max(1.0, cap);
            const double e = energy(d, cm.mu, p, opts.solver);
            const double pair = dual_pair(cm.mu, cm.cap.extremal);
            const double norm = sobolev_energy(cm.cap.extremal, p);
            double gap = std::max({std::abs(cap - e), std::abs(cap - pair), std::abs(cap - norm)}) / scale;
            // Raw (unfloored) pairings for positivity and support.
            const auto raw = nodal_pairings(cm.cap.extremal, p);
            double min_w = 0.0, slackness = 0.0;
            for (std::size_t l = 0; l < raw.size(); ++l) {
                min_w = std::min(min_w, raw[l]);
                if (cm.cap.extremal[l] < 1.0 - 10.0 * cm.cap.tolerance) slackness = std::max(slackness, std::abs(raw[l]));
            }
            TrialRecord rec = detail::trial(t, hash, gap, rel_tol, rel_tol - gap);
            if (min_w < -1e-7) rec.slack = std::min(rec.slack, min_w + 1e-7);
            if (slackness > 1e-5) rec.slack = std::min(rec.slack, 1e-5 - slackness);
            rec.note = "cap=" + std::to_string(cap) + " min_weight=" + std::to_string(min_w) +
                       " slackness=" + std::to_string(slackness);
            return rec;
        } catch (const NonConvergence& ex) {
            return detail::skipped(t, hash, ex.what());
        } catch (const NegativeMeasure& ex) {
            TrialRecord rec = detail::trial(t, hash, 0.0, 0.0, -1.0);
            rec.note = ex.what();
            return rec;
        }
    });
    return detail::summarize("duality_chain", p.value(), seed, 0.0, std::move(recs));
}

/// Random nonnegative measure on the closure: a few point masses plus a smooth bump.
inline DiscreteMeasure random_measure(const DomainPtr& d, detail::TrialRng& rng) {
    std::vector<double> w(d->num_closure(), 0.0);
    const auto qw = d->weights();
    const Box& bx = d->box();
    const Point c{rng.uniform(bx.lo[0], bx.hi[0]), rng.uniform(bx.lo[1], bx.hi[1])};
    const double width = rng.uniform(0.05, 0.5);
    const double amp = rng.uniform(0.0, 2.0);
    for (std::size_t l = 0; l < w.size(); ++l) {
        const Point x = d->coordinate(d->closure_nodes()[l]);
        const double r = detail::distance(x, c, d->dimension());
        w[l] = amp * qw[l] * std::exp(-(r * r) / (width * width));
    }
    const int points = rng.integer(0, 3);
    for (int k = 0; k < points; ++k) {
        const auto l = static_cast<std::size_t>(rng.integer(0, static_cast<int>(w.size()) - 1));
        w[l] += rng.uniform(0.0, 0.05);
    }
    return DiscreteMeasure(d, std::move(w), true);
}

/// mu(A)^p <= E(mu)^{p-1} Cap(A) for random nonnegative measures and sets. Odd
/// trials use the capacitary measure of A, where equality must hold to `eq_rel_tol`.
inline PropertyReport check_energy_bound(const DomainPtr& d, const PExponent& p, int trials, std::uint64_t seed,
                                         double eq_rel_tol = 1e-5, const CheckOptions& opts = {}) {
    auto recs = detail::run_trials(trials, opts.jobs, [&](int t) {
        detail::TrialRng rng(seed, static_cast<std::uint64_t>(t));
        const NodeSet a = random_nonempty_node_set(d, rng);
        const auto hash = detail::hash_hex(detail::set_hash(a));
        try {
            const bool capacitary = t % 2 == 1;
            const DiscreteMeasure mu = capacitary ? capacitary_measure(d, a, p, opts.solver).mu : random_measure(d, rng);
            const auto b = energy_capacity_bound(mu, a, p, opts.solver);
            TrialRecord rec = detail::trial(t, hash, b.lhs, b.rhs, b.rhs * (1.0 + 1e-6) + 1e-9 - b.lhs);
            if (capacitary) {
                const double rel = std::abs(b.lhs - b.rhs) / std::max(b.rhs, 1e-300);
                rec.note = "capacitary measure, relative gap " + std::to_string(rel);
                if (rel > eq_rel_tol) rec.slack = std::min(rec.slack, eq_rel_tol - rel);
            }
            return rec;
        } catch (const NonConvergence& ex) {
            return detail::skipped(t, hash, ex.what());
        } catch (const NegativeMeasure& ex) {
            TrialRecord rec = detail::trial(t, hash, 0.0, 0.0, -1.0);
            rec.note = ex.what();
            return rec;
        }
    });
    return detail::summarize("energy_bound", p.value(), seed, 0.0, std::move(recs));
}

// ---------------------------------------------------------------------------
// Refinement studies and the W^{1,p}_0 trace diagnostic
// ---------------------------------------------------------------------------

struct RefinementRow {
    double h = 0.0;
    double value = 0.0;
    bool converged = false;
    double error = std::numeric_limits<double>::quiet_NaN();  // vs the reference, when given
};

struct RefinementStudy {
    std::vector<RefinementRow> rows;
    /// Strictly decreasing values along the list.
    bool strictly_decreasing = false;
    /// Values bounded away from zero with the last relative change below 1%.
    bool stabilized = false;
    /// |error| strictly decreasing (only meaningful with a reference).
    bool error_decreasing = false;
};

/// Capacity of the closure node nearest `point` for each spacing in `h_list`.
inline RefinementStudy refinement_study(DomainSpec base, const Point& point, const PExponent& p,
                                        const std::vector<double>& h_list, std::optional<double> reference = std::nullopt,
                                        const SolverOptions& opts = {}) {
    RefinementStudy st;
    for (double h : h_list) {
        base.h = h;
        const auto d = build_domain(base);
        const auto a = node_set(d, select::Nearest{point});
        const Point x = d->coordinate(a.members().front());
        if (detail::distance(x, point, d->dimension()) > 0.5 * h * std::sqrt(static_cast<double>(d->dimension())) + 1e-12)
            throw OutOfDomain("point is not in the closure of the domain");
        const auto r = capacity(d, a, p, opts);
        RefinementRow row{h, r.value, r.converged};
        if (reference) row.error = r.value - *reference;
        st.rows.push_back(row);
    }
    st.strictly_decreasing = st.rows.size() >= 2;
    st.error_decreasing = reference.has_value() && st.rows.size() >= 2;
    double vmin = std::numeric_limits<double>::infinity(), vmax = 0.0;
    for (std::size_t k = 0; k < st.rows.size(); ++k) {
        vmin = std::min(vmin, st.rows[k].value);
        vmax = std::max(vmax, st.rows[k].value);
        if (k == 0) continue;
        if (!(st.rows[k].value < st.rows[k - 1].value)) st.strictly_decreasing = false;
        if (reference && !(std::abs(st.rows[k].error) < std::abs(st.rows[k - 1].error))) st.error_decreasing = false;
    }
    if (st.rows.size() >= 2) {
        const double last = st.rows.back().value, prev = st.rows[st.rows.size() - 2].value;
        st.stabilized = vmin >= 0.5 * vmax && std::abs(last - prev) <= 0.01 * std::abs(last);
    }
    return st;
}

/// Single-point capacity under refinement: decays for N = 2, p <= 2; stays positive in 1D.
inline RefinementStudy polar_refinement_study(const DomainSpec& base, const Point& point, const PExponent& p,
                                              const std::vector<double>& h_list, const SolverOptions& opts = {}) {
    return refinement_study(base, point, p, h_list, std::nullopt, opts);
}

struct W1p0Result {
    NodeSet exceptional;  // boundary nodes with |u| > delta
    double capacity = 0.0;
    bool member = false;
    bool converged = true;
};

/// Discrete trace diagnostic: u counts as a W^{1,p}_0 member when the boundary
/// nodes where |u| exceeds delta form a set of capacity at most eps_member.
inline W1p0Result w1p0_membership(const GridFunction& u, const PExponent& p, double delta, double eps_member,
                                  const SolverOptions& opts = {}) {
    if (!(delta > 0.0)) throw Error("w1p0 threshold delta must be positive");
    const auto& d = u.domain();
    std::vector<NodeIndex> s;
    for (NodeIndex g : d->boundary_nodes())
        if (std::abs(u.at(g)) > delta) s.push_back(g);
    W1p0Result r;
    r.exceptional = NodeSet(d, std::move(s));
    const auto cap = capacity(d, r.exceptional, p, opts);
    r.capacity = cap.value;
    r.converged = cap.converged;
    r.member = r.capacity <= eps_member;
    return r;
}

}  // namespace relcap
