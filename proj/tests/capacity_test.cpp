#include "relcap/capacity.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace relcap;

namespace {

// Symmetric extremal (t, 1, t) on {0, 1/2, 1}: minimize 2^p (1-t)^p + t^p / 2 + 1/2.
double three_node_t(double p) {
    const double r = std::pow(2.0, (p + 1.0) / (p - 1.0));
    return r / (1.0 + r);
}
double three_node_value(double p) {
    const double t = three_node_t(p);
    return std::pow(2.0 * (1.0 - t), p) + 0.5 * std::pow(t, p) + 0.5;
}

}  // namespace

TEST(Capacity, ThreeNodeQuadratic) {
    auto d = build_domain(unit_interval_spec(0.5));
    const auto a = node_set(d, select::Nearest{{0.5, 0.0}});
    const auto r = capacity(d, a, PExponent(2.0));
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.value, 17.0 / 18.0, 1e-10);
    EXPECT_NEAR(r.extremal[0], 8.0 / 9.0, 1e-10);
    EXPECT_NEAR(r.extremal[1], 1.0, 1e-10);
    EXPECT_NEAR(r.extremal[2], 8.0 / 9.0, 1e-10);
    ASSERT_EQ(r.multipliers.size(), 1u);
    EXPECT_NEAR(r.multipliers[0], 17.0 / 18.0, 1e-10);
}

TEST(Capacity, ThreeNodeGeneralExponent) {
    auto d = build_domain(unit_interval_spec(0.5));
    const auto a = node_set(d, select::Nearest{{0.5, 0.0}});
    for (double p : {1.5, 3.0, 4.0}) {
        SolverOptions o;
        o.tolerance = 1e-10;
        const auto r = capacity(d, a, PExponent(p), o);
        ASSERT_TRUE(r.converged) << p;
        EXPECT_NEAR(r.value, three_node_value(p), 1e-9) << p;
        EXPECT_NEAR(r.extremal[0], three_node_t(p), 1e-7) << p;
    }
}

TEST(Capacity, EmptySetIsZero) {
    auto d = build_domain(unit_square_spec(0.125));
    const auto r = capacity(d, NodeSet(d), PExponent(3.0));
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.value, 0.0);
    for (double x : r.extremal.values()) EXPECT_EQ(x, 0.0);
}

TEST(Capacity, WholeClosureGivesConstantOne) {
    auto d = build_domain(unit_square_spec(0.125));
    const auto a = node_set(d, select::Closure{});
    for (double p : {1.5, 2.0, 3.0}) {
        const auto r = capacity(d, a, PExponent(p));
        ASSERT_TRUE(r.converged);
        for (double x : r.extremal.values()) EXPECT_NEAR(x, 1.0, 1e-8);
        EXPECT_NEAR(r.value, d->mass(), 1e-10 * d->mass());
    }
}

TEST(Capacity, ExtremalBoundsAndResidual) {
    auto d = build_domain(unit_square_spec(0.0625));
    const auto a = unite(node_set(d, select::Ball{{0.3, 0.4}, 0.15}), node_set(d, select::Nearest{{0.8, 0.8}}));
    for (double p : {1.5, 2.0, 3.0}) {
        const PExponent pe(p);
        const auto r = capacity(d, a, pe);
        ASSERT_TRUE(r.converged) << p;
        for (NodeIndex g : a.members()) EXPECT_NEAR(r.extremal.at(g), 1.0, 1e-12);
        for (double x : r.extremal.values()) {
            EXPECT_GE(x, -1e-12);
            EXPECT_LE(x, 1.0 + 1e-12);
        }
        EXPECT_LE(kkt_residual(r.extremal, a, pe).residual, r.tolerance);
        EXPECT_NEAR(r.value, sobolev_energy(r.extremal, pe), 1e-14);
        for (double m : r.multipliers) EXPECT_GE(m, -r.tolerance);
    }
}

TEST(Capacity, OneDimensionalClosedForm) {
    // u'' = u with natural boundary conditions and u(1/2) = 1 gives 2 tanh(1/2).
    const double exact = 2.0 * std::tanh(0.5);
    double prev = 1.0;
    for (int k = 4; k <= 10; ++k) {
        const double h = std::ldexp(1.0, -k);
        auto d = build_domain(unit_interval_spec(h));
        const auto r = capacity(d, node_set(d, select::Nearest{{0.5, 0.0}}), PExponent(2.0));
        ASSERT_TRUE(r.converged);
        const double err = std::abs(r.value - exact);
        EXPECT_LT(err, prev);
        prev = err;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(Capacity, AlgorithmsAgree) {
    auto d = build_domain(unit_square_spec(0.125));
    const auto a = node_set(d, select::BoxSel{Box{{0.25, 0.25}, {0.5, 0.375}}});
    for (double p : {2.0, 3.0}) {
        const PExponent pe(p);
        SolverOptions ref;
        ref.tolerance = 1e-9;
        const double v = capacity(d, a, pe, ref).value;
        for (Algorithm alg : {Algorithm::projected_newton, Algorithm::projected_gradient,
                              Algorithm::projected_gradient_accelerated}) {
            SolverOptions o;
            o.algorithm = alg;
            o.tolerance = 1e-7;
            const auto r = capacity(d, a, pe, o);
            ASSERT_TRUE(r.converged) << to_string(alg) << " p=" << p;
            EXPECT_NEAR(r.value, v, 1e-5) << to_string(alg) << " p=" << p;
        }
    }
}

TEST(Capacity, InitialGuessesAgree) {
    auto d = build_domain(unit_square_spec(0.0625));
    const auto a = node_set(d, select::HalfSpace{{1.0, 1.0}, 0.4});
    for (double p : {1.5, 2.0, 3.0}) {
        const PExponent pe(p);
        SolverOptions o;
        const double dev = capacity_uniqueness_check(d, a, pe, o);
        EXPECT_LE(dev, uniqueness_threshold(o.resolved_tolerance(pe), pe)) << p;
    }
}

TEST(Capacity, SuppliedGuess) {
    auto d = build_domain(unit_square_spec(0.125));
    const auto a = node_set(d, select::Nearest{{0.5, 0.5}});
    const PExponent pe(3.0);
    const auto first = capacity(d, a, pe);
    SolverOptions o;
    o.initial_guess = InitialGuess::supplied;
    o.supplied_guess = first.extremal;
    const auto again = capacity(d, a, pe, o);
    ASSERT_TRUE(again.converged);
    EXPECT_LE(again.iterations, 1);
    EXPECT_NEAR(again.value, first.value, 1e-12);
}

TEST(Capacity, NonConvergenceIsReported) {
    auto d = build_domain(unit_square_spec(0.125));
    const auto a = node_set(d, select::Nearest{{0.5, 0.5}});
    SolverOptions o;
    o.max_iterations = 0;
    const auto r = capacity(d, a, PExponent(3.0), o);
    EXPECT_FALSE(r.converged);
    EXPECT_THROW(capacity_uniqueness_check(d, a, PExponent(3.0), o), NonConvergence);
}

TEST(Capacity, OptionValidation) {
    auto d = build_domain(unit_square_spec(0.125));
    const auto a = node_set(d, select::Nearest{{0.5, 0.5}});
    SolverOptions o;
    o.algorithm = Algorithm::active_set_p2;
    EXPECT_THROW(capacity(d, a, PExponent(3.0), o), InvalidOptions);
    o = {};
    o.tolerance = 0.0;
    EXPECT_THROW(capacity(d, a, PExponent(2.0), o), InvalidOptions);
    o = {};
    o.initial_guess = InitialGuess::supplied;
    EXPECT_THROW(capacity(d, a, PExponent(2.0), o), InvalidOptions);
    auto e = build_domain(unit_square_spec(0.25));
    EXPECT_THROW(capacity(e, a, PExponent(2.0)), DomainMismatch);
}

TEST(Capacity, KktRejectsInfeasibleCandidate) {
    auto d = build_domain(unit_interval_spec(0.5));
    const auto a = node_set(d, select::Nearest{{0.5, 0.0}});
    EXPECT_THROW(kkt_residual(GridFunction(d, 0.0), a, PExponent(2.0)), Infeasible);
}

TEST(Capacity, ObserverSeesEverySolve) {
    auto d = build_domain(unit_square_spec(0.125));
    int calls = 0;
    SolverOptions o;
    o.observer = [&](const SolveRecord& rec) {
        ++calls;
        EXPECT_TRUE(rec.obstacle);
        EXPECT_EQ(rec.domain_id, d->id());
        EXPECT_TRUE(rec.converged);
    };
    capacity(d, node_set(d, select::Nearest{{0.5, 0.5}}), PExponent(2.0), o);
    capacity(d, node_set(d, select::Nearest{{0.25, 0.5}}), PExponent(3.0), o);
    EXPECT_EQ(calls, 2);
}
