#include "relcap/propcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace relcap;

namespace {

DomainPtr square(double h = 0.125) { return build_domain(unit_square_spec(h)); }

void expect_same_records(const PropertyReport& a, const PropertyReport& b) {
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        EXPECT_EQ(a.records[k].inputs_hash, b.records[k].inputs_hash);
        EXPECT_EQ(a.records[k].lhs, b.records[k].lhs);
        EXPECT_EQ(a.records[k].rhs, b.records[k].rhs);
        EXPECT_EQ(a.records[k].slack, b.records[k].slack);
    }
}

}  // namespace

TEST(TrialRng, Reproducible) {
    detail::TrialRng a(42, 3), b(42, 3), c(42, 4);
    for (int k = 0; k < 10; ++k) {
        const double x = a.uniform();
        EXPECT_EQ(x, b.uniform());
        EXPECT_GE(x, 0.0);
        EXPECT_LT(x, 1.0);
    }
    EXPECT_NE(a.uniform(), c.uniform());
}

TEST(RandomSets, StayInRegion) {
    auto d = square();
    const Box k{{0.25, 0.25}, {0.75, 0.75}};
    const auto region = node_set(d, select::BoxSel{k});
    for (int t = 0; t < 20; ++t) {
        detail::TrialRng rng(7, static_cast<std::uint64_t>(t));
        EXPECT_TRUE(is_subset(random_node_set_in(d, k, rng), region));
        detail::TrialRng rng2(7, static_cast<std::uint64_t>(t));
        EXPECT_FALSE(random_nonempty_node_set(d, rng2).empty());
    }
}

TEST(RandomSets, ChainIsIncreasing) {
    auto d = square();
    const auto chain = random_chain(d, 5, 3);
    ASSERT_EQ(chain.size(), 5u);
    EXPECT_TRUE(chain.front().empty());
    for (std::size_t k = 1; k < chain.size(); ++k) EXPECT_TRUE(is_subset(chain[k - 1], chain[k]));
}

TEST(Summarize, CountsViolations) {
    std::vector<TrialRecord> recs{detail::trial(0, "a", 1.0, 2.0, 1.0), detail::trial(1, "b", 2.0, 1.0, -1.0),
                                  detail::trial(2, "c", 1.0, 1.0, -1e-9), detail::skipped(3, "d", "why")};
    const auto r = detail::summarize("demo", 2.0, 1, 1e-8, recs);
    EXPECT_EQ(r.trials, 4);
    EXPECT_EQ(r.violations, 1);
    EXPECT_EQ(r.skipped, 1);
    EXPECT_DOUBLE_EQ(r.worst_margin, -1.0);
    EXPECT_FALSE(r.passed());
    EXPECT_EQ(r.records[1].status, TrialRecord::Status::violation);
    EXPECT_EQ(r.records[2].status, TrialRecord::Status::ok);
}

TEST(Choquet, SmallRunsHold) {
    auto d = square();
    for (double p : {1.5, 2.0, 3.0}) {
        const PExponent pe(p);
        CheckOptions o;
        o.jobs = 4;
        o.slack_tolerance = 1e-6;
        EXPECT_EQ(check_monotonicity(d, pe, 10, 1, o).violations, 0) << p;
        EXPECT_EQ(check_strong_subadditivity(d, pe, 10, 2, o).violations, 0) << p;
        EXPECT_EQ(check_countable_subadditivity(d, pe, 4, 6, 3, o).violations, 0) << p;
    }
}

TEST(Choquet, ParallelMatchesSerial) {
    auto d = square();
    CheckOptions serial, parallel;
    parallel.jobs = 4;
    const PExponent pe(3.0);
    expect_same_records(check_strong_subadditivity(d, pe, 8, 9, serial),
                        check_strong_subadditivity(d, pe, 8, 9, parallel));
}

TEST(Choquet, OuterRegularityReachesCapacity) {
    auto d = square();
    const auto a = node_set(d, select::Nearest{{0.5, 0.5}});
    const auto r = check_outer_regularity(d, a, PExponent(2.0), {0.4, 0.3, 0.2, 0.1, 0.05});
    EXPECT_EQ(r.violations, 0);
    EXPECT_THROW(check_outer_regularity(d, a, PExponent(2.0), {0.1, 0.2}), Error);
}

TEST(Choquet, IncreasingLimit) {
    auto d = square();
    const auto r = check_increasing_limit(d, random_chain(d, 5, 11), PExponent(1.5));
    EXPECT_EQ(r.violations, 0);
    EXPECT_EQ(r.skipped, 0);
}

TEST(DomainComparison, Monotonicity) {
    const auto u = unit_square_spec(0.125);
    const auto v = rectangle_spec(2, Box{{-1.0, -1.0}, {2.0, 2.0}}, 0.125);
    const auto r = check_domain_monotonicity(u, v, PExponent(2.0), 6, 4);
    EXPECT_EQ(r.violations, 0);
    EXPECT_THROW(check_domain_monotonicity(v, u, PExponent(2.0), 1, 4), Error);
}

TEST(DomainComparison, ExtensionRatioAtLeastOne) {
    const auto u = unit_square_spec(0.125);
    const auto v = rectangle_spec(2, Box{{-1.0, -1.0}, {2.0, 2.0}}, 0.125);
    const auto r = check_extension_comparison(u, v, PExponent(2.0), 5, 4);
    EXPECT_GE(r.summary.at("sup_ratio"), 1.0);
    const auto far = check_extension_comparison(u, v, PExponent(2.0), 5, 4, 1000.0);
    EXPECT_GT(far.violations, 0);
}

TEST(DomainComparison, PqRequiresOrder) {
    auto d = square();
    const Box k{{0.25, 0.25}, {0.75, 0.75}};
    EXPECT_THROW(check_pq_comparison(d, PExponent(3.0), PExponent(2.0), k, 1, 1), Error);
    const auto r = check_pq_comparison(d, PExponent(1.5), PExponent(3.0), k, 4, 1);
    EXPECT_EQ(r.violations, 0);
    EXPECT_GT(r.summary.at("sup_ratio"), 0.0);
}

TEST(Duality, ChainAndEnergyBound) {
    auto d = square();
    CheckOptions o;
    o.solver.tolerance = 1e-8;
    o.jobs = 4;
    for (double p : {1.5, 2.0, 3.0}) {
        const PExponent pe(p);
        const auto chain = check_duality_chain(d, pe, 4, 21, 1e-5, o);
        EXPECT_EQ(chain.violations, 0) << p;
        EXPECT_EQ(chain.skipped, 0) << p;
        const auto bound = check_energy_bound(d, pe, 6, 22, 1e-5, o);
        EXPECT_EQ(bound.violations, 0) << p;
        EXPECT_EQ(bound.skipped, 0) << p;
    }
}

TEST(RandomMeasure, Nonnegative) {
    auto d = square();
    detail::TrialRng rng(1, 1);
    const auto mu = random_measure(d, rng);
    EXPECT_TRUE(mu.nonneg());
    for (double w : mu.weights()) EXPECT_GE(w, 0.0);
}

TEST(Refinement, OneDimensionalConverges) {
    const double exact = 2.0 * std::tanh(0.5);
    const auto st = refinement_study(unit_interval_spec(0.25), {0.5, 0.0}, PExponent(2.0),
                                     {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128}, exact);
    EXPECT_TRUE(st.error_decreasing);
    EXPECT_TRUE(st.stabilized);
    EXPECT_LT(std::abs(st.rows.back().error), 1e-3);
}

TEST(Refinement, PlanarPointDecays) {
    const auto st = polar_refinement_study(unit_square_spec(0.125), {0.5, 0.5}, PExponent(2.0),
                                           {1.0 / 8, 1.0 / 16, 1.0 / 32});
    EXPECT_TRUE(st.strictly_decreasing);
}

TEST(Refinement, PointOutsideThrows) {
    EXPECT_THROW(refinement_study(unit_square_spec(0.125), {5.0, 5.0}, PExponent(2.0), {0.125}), OutOfDomain);
}

TEST(W1p0, BubbleIsMemberConstantIsNot) {
    auto d = square(0.0625);
    const PExponent pe(2.0);
    const auto bubble = GridFunction::sample(d, [](const Point& x) { return x[0] * (1 - x[0]) * x[1] * (1 - x[1]); });
    const auto in = w1p0_membership(bubble, pe, 1e-3, 1e-6);
    EXPECT_TRUE(in.member);
    EXPECT_TRUE(in.exceptional.empty());
    const auto out = w1p0_membership(GridFunction(d, 1.0), pe, 1e-3, 1e-6);
    EXPECT_FALSE(out.member);
    EXPECT_EQ(out.exceptional.size(), d->boundary_nodes().size());
}
