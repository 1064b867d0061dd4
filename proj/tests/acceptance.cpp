// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "relcap/relcap.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include <sys/wait.h>
#include <unistd.h>

using namespace relcap;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
const std::vector<double> exponents{1.5, 2.0, 3.0};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

void fail(Outcome& o, const std::string& why) {
    o.pass = false;
    o.detail += (o.detail.empty() ? "" : "; ") + why;
}

void note(Outcome& o, const std::string& what) { o.detail += (o.detail.empty() ? "" : "; ") + what; }

/// Counts converged solves whose reported residual exceeds `tol`.
struct ResidualAudit {
    double tol = 0.0;
    std::atomic<int> solves{0}, bad{0};
    std::function<void(const SolveRecord&)> observer() {
        return [this](const SolveRecord& r) {
            ++solves;
            if (r.converged && !(r.residual <= tol)) ++bad;
        };
    }
};

void require_report(Outcome& o, const PropertyReport& r, bool allow_skips = false) {
    if (r.violations > 0) fail(o, r.property_name + " p=" + fmt(r.p) + ": " + std::to_string(r.violations) + " violations");
    if (!allow_skips && r.skipped > 0)
        fail(o, r.property_name + " p=" + fmt(r.p) + ": " + std::to_string(r.skipped) + " skipped");
}

DomainPtr square16() { return build_domain(unit_square_spec(1.0 / 16)); }

Outcome gate_tanh() {
    Outcome o;
    const double exact = 2.0 * std::tanh(0.5);
    double prev = std::numeric_limits<double>::infinity(), last = 0.0;
    for (int k = 4; k <= 10; ++k) {
        auto d = build_domain(unit_interval_spec(std::ldexp(1.0, -k)));
        const auto r = capacity(d, node_set(d, select::Nearest{{0.5, 0.0}}), PExponent(2.0));
        if (!r.converged) fail(o, "k=" + std::to_string(k) + " did not converge");
        const double err = std::abs(r.value - exact);
        if (!(err < prev)) fail(o, "error not decreasing at k=" + std::to_string(k));
        prev = err;
        last = r.value;
    }
    if (!(prev <= 1e-3)) fail(o, "error " + fmt(prev) + " at h=1/1024");
    note(o, "Cap(h=1/1024)=" + std::to_string(last) + " err=" + fmt(prev));
    return o;
}

Outcome gate_three_node() {
    Outcome o;
    auto d = build_domain(unit_interval_spec(0.5));
    const auto r = capacity(d, node_set(d, select::Nearest{{0.5, 0.0}}), PExponent(2.0));
    const double dv = std::abs(r.value - 17.0 / 18.0);
    const double du = std::max({std::abs(r.extremal[0] - 8.0 / 9.0), std::abs(r.extremal[1] - 1.0),
                                std::abs(r.extremal[2] - 8.0 / 9.0)});
    if (!r.converged || dv > 1e-10 || du > 1e-10) fail(o, "value err " + fmt(dv) + " extremal err " + fmt(du));
    note(o, "value err " + fmt(dv) + ", extremal err " + fmt(du));
    return o;
}

Outcome gate_constant_one() {
    Outcome o;
    std::vector<DomainSpec> specs{unit_square_spec(1.0 / 16), unit_interval_spec(1.0 / 32)};
    DomainSpec l = unit_square_spec(0.125);
    l.shape = ShapeKind::rectangles;
    l.rectangles = {Box{{0.0, 0.0}, {1.0, 0.5}}, Box{{0.0, 0.0}, {0.5, 1.0}}};
    specs.push_back(l);
    DomainSpec disc = rectangle_spec(2, Box{{-1.0, -1.0}, {1.0, 1.0}}, 0.125);
    disc.shape = ShapeKind::mask;
    disc.predicate = [](const Point& x) { return x[0] * x[0] + x[1] * x[1] < 0.8; };
    specs.push_back(disc);
    double worst_u = 0.0, worst_v = 0.0;
    for (const auto& s : specs) {
        auto d = build_domain(s);
        for (double p : exponents) {
            const auto r = capacity(d, node_set(d, select::Closure{}), PExponent(p));
            if (!r.converged) fail(o, "no convergence");
            for (double x : r.extremal.values()) worst_u = std::max(worst_u, std::abs(x - 1.0));
            worst_v = std::max(worst_v, std::abs(r.value - d->mass()) / d->mass());
        }
    }
    if (worst_u > 1e-8) fail(o, "extremal deviates by " + fmt(worst_u));
    if (worst_v > 1e-10) fail(o, "value deviates by " + fmt(worst_v) + " relative");
    note(o, "4 grids x 3 exponents, max |e-1|=" + fmt(worst_u) + ", max rel value err=" + fmt(worst_v));
    return o;
}

Outcome gate_choquet() {
    Outcome o;
    auto d = square16();
    ResidualAudit audit;
    int reports = 0;
    for (double p : exponents) {
        const PExponent pe(p);
        CheckOptions opts;
        opts.jobs = jobs;
        opts.slack_tolerance = 1e-6;
        audit.tol = opts.solver.resolved_tolerance(pe);
        opts.solver.observer = audit.observer();
        require_report(o, check_monotonicity(d, pe, 50, 2024, opts));
        require_report(o, check_strong_subadditivity(d, pe, 100, 2025, opts));
        require_report(o, check_countable_subadditivity(d, pe, 5, 30, 2026, opts));
        const std::vector<double> radii{0.25, 0.1875, 0.125, 0.0625, 0.03125, 0.0};
        for (const char* expr : {"ball 0.5 0.5 0.15", "nearest 0.25 0.75", "box 0 0 0.25 0.125 + nearest 0.8 0.8"})
            require_report(o, check_outer_regularity(d, node_set_from_string(d, expr), pe, radii, opts));
        for (std::uint64_t seed : {7u, 8u, 9u})
            require_report(o, check_increasing_limit(d, random_chain(d, 6, seed), pe, opts));
        reports += 9;
    }
    if (audit.bad > 0) fail(o, std::to_string(audit.bad.load()) + " solves above tolerance");
    note(o, std::to_string(reports) + " reports, " + std::to_string(audit.solves.load()) + " solves");
    return o;
}

Outcome gate_duality() {
    Outcome o;
    auto d = square16();
    ResidualAudit audit;
    audit.tol = 1e-8;
    double worst = 1.0;
    for (double p : exponents) {
        CheckOptions opts;
        opts.jobs = jobs;
        opts.solver.tolerance = 1e-8;
        opts.solver.observer = audit.observer();
        const auto r = check_duality_chain(d, PExponent(p), 20, 31, 1e-5, opts);
        require_report(o, r);
        worst = std::min(worst, r.worst_margin);
    }
    if (audit.bad > 0) fail(o, std::to_string(audit.bad.load()) + " solves above tolerance");
    note(o, "20 sets x 3 exponents, worst margin " + fmt(worst));
    return o;
}

Outcome gate_energy_bound() {
    Outcome o;
    auto d = square16();
    ResidualAudit audit;
    audit.tol = 1e-8;
    double worst = 1.0;
    for (double p : exponents) {
        CheckOptions opts;
        opts.jobs = jobs;
        opts.solver.tolerance = 1e-8;
        opts.solver.observer = audit.observer();
        const auto r = check_energy_bound(d, PExponent(p), 100, 41, 1e-5, opts);
        require_report(o, r);
        worst = std::min(worst, r.worst_margin);
    }
    if (audit.bad > 0) fail(o, std::to_string(audit.bad.load()) + " solves above tolerance");
    note(o, "100 trials x 3 exponents, worst margin " + fmt(worst));
    return o;
}

GridFunction random_function(const DomainPtr& d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(d->num_closure());
    for (double& x : v) x = u(rng);
    return GridFunction(d, std::move(v));
}

Outcome gate_residuals() {
    Outcome o;
    auto d = square16();
    int solves = 0;
    double worst_ratio = 0.0;
    for (double p : exponents) {
        const PExponent pe(p);
        const SolverOptions opts;
        const double tol = opts.resolved_tolerance(pe);
        for (int t = 0; t < 10; ++t) {
            detail::TrialRng rng(51, static_cast<std::uint64_t>(t));
            const auto a = random_nonempty_node_set(d, rng);
            const auto r = capacity(d, a, pe, opts);
            if (!r.converged) continue;
            const double res = kkt_residual(r.extremal, a, pe).residual;
            worst_ratio = std::max(worst_ratio, res / tol);
            ++solves;
            const auto mu = random_measure(d, rng);
            const auto pr = solve_potential(d, mu, pe, opts);
            if (!pr.converged) continue;
            const auto pair = nodal_pairings(pr.potential, pe);
            double el = 0.0;
            for (std::size_t l = 0; l < pair.size(); ++l) el = std::max(el, std::abs(pair[l] - mu.weights()[l]));
            worst_ratio = std::max(worst_ratio, el / tol);
            ++solves;
        }
    }
    if (worst_ratio > 1.0) fail(o, "recomputed residual exceeds tolerance by factor " + fmt(worst_ratio));
    if (solves < 50) fail(o, "only " + std::to_string(solves) + " of 60 solves converged");

    std::mt19937_64 rng(52);
    double worst_fd = 0.0;
    for (auto spec : {unit_interval_spec(1.0 / 16), unit_square_spec(0.125)}) {
        auto dd = build_domain(spec);
        for (double p : {1.5, 2.0, 3.0, 4.0}) {
            const PExponent pe(p);
            for (int t = 0; t < 10; ++t) {
                const auto u = random_function(dd, rng);
                const auto v = random_function(dd, rng);
                const double s = 1e-5;
                std::vector<double> up(u.size()), um(u.size());
                for (std::size_t l = 0; l < u.size(); ++l) {
                    up[l] = u[l] + s * v[l];
                    um[l] = u[l] - s * v[l];
                }
                const double fd =
                    (sobolev_energy(GridFunction(dd, up), pe) - sobolev_energy(GridFunction(dd, um), pe)) / (2.0 * s * p);
                const double an = euler_lagrange_apply(u, v, pe);
                worst_fd = std::max(worst_fd, std::abs(fd - an) / std::max(1.0, std::abs(an)));
            }
        }
    }
    if (worst_fd > 1e-4) fail(o, "finite-difference mismatch " + fmt(worst_fd));
    note(o, std::to_string(solves) + " solves, worst residual/tol " + fmt(worst_ratio) + ", worst FD rel err " + fmt(worst_fd));
    return o;
}

Outcome gate_uniqueness() {
    Outcome o;
    auto d = square16();
    int fixtures = 0;
    double worst = 0.0;
    const SolverOptions opts;
    const std::vector<std::pair<const char*, double>> sets{
        {"ball 0.5 0.5 0.2", 1.5}, {"nearest 0.3 0.3", 2.0}, {"box 0 0 1 0.125", 3.0},
        {"halfspace 1 1 0.5 + nearest 0.9 0.9", 1.5}, {"ball 0.2 0.7 0.1 + ball 0.7 0.2 0.1", 3.0}};
    for (const auto& [expr, p] : sets) {
        const PExponent pe(p);
        const double dev = capacity_uniqueness_check(d, node_set_from_string(d, expr), pe, opts);
        const double thr = uniqueness_threshold(opts.resolved_tolerance(pe), pe);
        worst = std::max(worst, dev / thr);
        ++fixtures;
    }
    for (int k = 0; k < 5; ++k) {
        const PExponent pe(exponents[static_cast<std::size_t>(k) % exponents.size()]);
        detail::TrialRng rng(61, static_cast<std::uint64_t>(k));
        const double dev = potential_uniqueness_check(d, random_measure(d, rng), pe, opts);
        worst = std::max(worst, dev / uniqueness_threshold(opts.resolved_tolerance(pe), pe));
        ++fixtures;
    }
    if (worst > 1.0) fail(o, "deviation exceeds threshold by factor " + fmt(worst));
    note(o, std::to_string(fixtures) + " fixtures, worst deviation/threshold " + fmt(worst));
    return o;
}

Outcome gate_polar() {
    Outcome o;
    std::vector<double> hs;
    for (int k = 3; k <= 7; ++k) hs.push_back(std::ldexp(1.0, -k));
    const auto st = polar_refinement_study(unit_square_spec(0.125), {0.5, 0.5}, PExponent(2.0), hs);
    if (!st.strictly_decreasing) fail(o, "2D values not strictly decreasing");
    std::string vals;
    for (const auto& r : st.rows) {
        vals += (vals.empty() ? "" : " ") + fmt(r.value);
        if (!r.converged) fail(o, "2D solve did not converge");
    }
    std::vector<double> hs1;
    for (int k = 4; k <= 10; ++k) hs1.push_back(std::ldexp(1.0, -k));
    const double exact = 2.0 * std::tanh(0.5);
    const auto one = refinement_study(unit_interval_spec(0.25), {0.5, 0.0}, PExponent(2.0), hs1, exact);
    if (!one.error_decreasing || !one.stabilized || std::abs(one.rows.back().error) > 1e-3)
        fail(o, "1D values do not settle at 2 tanh(1/2)");
    note(o, "2D: " + vals + "; 1D last " + std::to_string(one.rows.back().value));
    return o;
}

Outcome gate_domains() {
    Outcome o;
    const auto u = unit_square_spec(0.125);
    const auto v = rectangle_spec(2, Box{{-1.0, -1.0}, {2.0, 2.0}}, 0.125);
    const auto ext = Json::parse(read_file(fs::path(RELCAP_FIXTURES) / "calibration-extension_comparison.json"));
    const auto pq = Json::parse(read_file(fs::path(RELCAP_FIXTURES) / "calibration-pq_comparison.json"));
    auto constant = [](const Json& fx, double p) {
        for (const auto& e : fx.at("constants"))
            if (e.at("p").get<double>() == p) return e.at("sup_ratio").get<double>();
        throw Error("fixture has no constant for p = " + std::to_string(p));
    };
    std::string ratios;
    for (double p : exponents) {
        const PExponent pe(p);
        CheckOptions opts;
        opts.jobs = jobs;
        opts.slack_tolerance = 1e-6;
        require_report(o, check_domain_monotonicity(u, v, pe, 50, 11, opts));
        CheckOptions plain;
        plain.jobs = jobs;
        const auto r = check_extension_comparison(u, v, pe, ext.at("trials").get<int>(), ext.at("seed").get<std::uint64_t>(),
                                                  constant(ext, p), plain);
        require_report(o, r);
        ratios += " ext(p=" + fmt(p) + ")=" + fmt(r.summary.at("sup_ratio")) + "/" + fmt(constant(ext, p));
    }
    {
        CheckOptions plain;
        plain.jobs = jobs;
        auto d = square16();
        const double q = pq.at("q").get<double>();
        const auto r = check_pq_comparison(d, PExponent(q), PExponent(3.0), Box{{0.25, 0.25}, {0.75, 0.75}},
                                           pq.at("trials").get<int>(), pq.at("seed").get<std::uint64_t>(), constant(pq, 3.0),
                                           plain);
        // Trial 0 uses the empty set on purpose; both capacities vanish there.
        require_report(o, r, true);
        if (r.skipped > 1) fail(o, "pq comparison skipped " + std::to_string(r.skipped) + " trials");
        ratios += " pq=" + fmt(r.summary.at("sup_ratio")) + "/" + fmt(constant(pq, 3.0));
    }
    note(o, "domain monotonicity 50 trials x 3;" + ratios);
    return o;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RELCAP_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Every file in `a` equals its twin in `b`; the manifest is compared without its header.
bool same_tree(const fs::path& a, const fs::path& b, std::string& why, int& files) {
    for (const auto& e : fs::directory_iterator(a)) {
        const auto name = e.path().filename();
        if (!fs::exists(b / name)) {
            why = name.string() + " missing in rerun";
            return false;
        }
        std::string x = read_file(e.path()), y = read_file(b / name);
        if (name == "manifest.json") {
            auto jx = Json::parse(x), jy = Json::parse(y);
            jx.erase("header");
            jy.erase("header");
            x = jx.dump();
            y = jy.dump();
        }
        if (x != y) {
            why = name.string() + " differs";
            return false;
        }
        ++files;
    }
    return true;
}

Outcome gate_reproducible() {
    Outcome o;
    const auto root = fs::temp_directory_path() / ("relcap_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    {
        std::ofstream(root / "check.cfg") << "domain.h = 0.0625\np = 1.5 2 3\nseed = 99\ncheck.trials = 10\n";
    }
    const std::string cfgs = RELCAP_CONFIGS;
    const std::vector<std::pair<std::string, std::string>> runs{
        {"capacity", "capacity --config " + cfgs + "/square_capacity.cfg"},
        {"potential", "potential --config " + cfgs + "/potential.cfg"},
        {"strong", "check strong_subadditivity --config " + (root / "check.cfg").string()},
        {"energy", "check energy_bound --config " + (root / "check.cfg").string()}};
    int files = 0;
    for (const auto& [name, args] : runs) {
        const auto a = root / (name + "-1"), b = root / (name + "-2");
        const int ca = run_cli(args + " --jobs 1 --out " + a.string());
        const int cb = run_cli(args + " --jobs 3 --out " + b.string());
        if (ca != cb) fail(o, name + ": exit codes " + std::to_string(ca) + " vs " + std::to_string(cb));
        std::string why;
        if (!fs::exists(a) || !same_tree(a, b, why, files)) fail(o, name + ": " + (why.empty() ? "no output" : why));
    }
    fs::remove_all(root);
    note(o, std::to_string(files) + " files compared across reruns with 1 and 3 workers");
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1D closed-form benchmark", gate_tanh},
        {"tiny-grid exactness", gate_three_node},
        {"constant-one identity", gate_constant_one},
        {"Choquet suite", gate_choquet},
        {"duality chain", gate_duality},
        {"energy bound", gate_energy_bound},
        {"Euler-Lagrange residuals", gate_residuals},
        {"uniqueness", gate_uniqueness},
        {"polar refinement", gate_polar},
        {"domain monotonicity and comparison constants", gate_domains},
        {"reproducibility", gate_reproducible},
    };
    int failures = 0;
    for (const auto& [name, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
