// relcap command-line driver.
//
//   relcap capacity  --config run.cfg [--seed N] [--out DIR] [--jobs J]
//   relcap potential --config run.cfg ...
//   relcap measure   --config run.cfg ...
//   relcap check <property> --config run.cfg [--calibrate] ...
//   relcap refine    --config run.cfg ...
//   relcap emit      --config run.cfg ...
//
// Exit codes: 0 ok, 1 property violation, 2 bad config, 3 solver non-convergence.

#include "relcap/manifest.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <set>

namespace {

using namespace relcap;

enum Exit { ok = 0, violation = 1, bad_config = 2, nonconvergence = 3 };

const std::set<std::string> domain_keys = {"dimension", "h", "box", "shape", "rectangles", "mask"};
const std::set<std::string> plain_keys = {
    "p", "q", "seed", "out", "jobs",
    "solver.tolerance", "solver.max_iterations", "solver.epsilon", "solver.algorithm", "solver.initial_guess",
    "capacity.set", "capacity.field_csv",
    "measure.kind", "measure.point", "measure.mass", "measure.set", "measure.file",
    "check.property", "check.trials", "check.k_max", "check.slack_tolerance", "check.set", "check.radii",
    "check.chain", "check.chain_steps", "check.compact", "check.calibration", "check.calibrated_constant",
    "check.rel_tol", "check.delta", "check.eps_member", "check.function",
    "refine.h", "refine.point", "refine.reference",
    "emit.source", "emit.set", "emit.file"};

/// Unknown keys are rejected before anything is solved.
void validate_keys(const Config& c) {
    for (const auto& [key, e] : c.entries()) {
        if (plain_keys.count(key)) continue;
        if (key.rfind("set.", 0) == 0 && key.size() > 4 && key.find('.', 4) == std::string::npos) continue;
        bool known = false;
        for (const char* prefix : {"domain.", "outer."})
            if (key.rfind(prefix, 0) == 0 && domain_keys.count(key.substr(std::string(prefix).size()))) known = true;
        if (!known) throw ConfigError(c.where(key) + "unknown key '" + key + "'");
    }
}

struct Run {
    Config cfg;
    std::filesystem::path config_path;
    std::string command;
    std::uint64_t seed = 0;
    int jobs = 1;
    DomainPtr domain;
    std::vector<PExponent> ps;
    SolverOptions solver;
    Manifest* manifest = nullptr;

    NodeSet named_set(const std::string& name) const {
        const std::string key = "set." + name;
        if (!cfg.has(key)) throw ConfigError(cfg.origin() + ": set '" + name + "' is not defined (expected key " + key + ")");
        return node_set_from_string(domain, cfg.str(key), &cfg, key);
    }

    Json inputs() const {
        return Json{{"config", config_path.filename().string()},
                    {"config_sha256", sha256_hex(read_file(config_path))},
                    {"seed", seed},
                    {"domain_id", detail::hash_hex(domain->id())}};
    }
};

std::string p_tag(const Run&, const PExponent& p) { return "p" + format_double(p.value()); }

/// Run fn(p) for every exponent; solves run concurrently, results come back in order.
template <class F>
auto for_each_p(const Run& run, F&& fn) {
    using R = decltype(fn(run.ps.front()));
    std::vector<std::optional<R>> out(run.ps.size());
    detail::run_trials(static_cast<int>(run.ps.size()), run.jobs, [&](int k) {
        out[static_cast<std::size_t>(k)] = fn(run.ps[static_cast<std::size_t>(k)]);
        return TrialRecord{};
    });
    std::vector<R> res;
    for (auto& r : out) res.push_back(std::move(*r));
    return res;
}

int cmd_capacity(Run& run) {
    const std::string set_name = run.cfg.str("capacity.set", "A");
    const NodeSet a = run.named_set(set_name);
    const bool csv = run.cfg.boolean("capacity.field_csv", false);
    const auto results = for_each_p(run, [&](const PExponent& p) { return capacity(run.domain, a, p, run.solver); });
    int code = ok;
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& r = results[k];
        const auto& p = run.ps[k];
        run.manifest->write("capacity-" + p_tag(run, p) + ".json", dump(to_json(r, a, p)));
        if (csv) run.manifest->write("extremal-" + p_tag(run, p) + ".csv", field_csv(r.extremal));
        std::cout << "capacity " << set_name << " p=" << format_double(p.value()) << " value=" << format_double(r.value)
                  << " residual=" << format_double(r.kkt_residual) << (r.converged ? "" : " NOT CONVERGED") << "\n";
        if (!r.converged) code = nonconvergence;
    }
    return code;
}

DiscreteMeasure measure_from_config(const Run& run, const PExponent& p) {
    const Config& c = run.cfg;
    const std::string kind = c.str("measure.kind", "quadrature");
    if (kind == "quadrature") return DiscreteMeasure::quadrature(run.domain).scaled(c.real("measure.mass", 1.0));
    if (kind == "point") {
        const auto x = c.reals("measure.point");
        if (x.size() != static_cast<std::size_t>(run.domain->dimension()))
            throw ConfigError(c.where("measure.point") + "point has the wrong dimension");
        const auto n = node_set(run.domain, select::Nearest{{x[0], x.size() > 1 ? x[1] : 0.0}});
        return DiscreteMeasure::point_mass(run.domain, n.members().front(), c.real("measure.mass", 1.0));
    }
    if (kind == "set") {
        // Quadrature weights restricted to the nodes of the set.
        const auto a = run.named_set(c.str("measure.set"));
        std::vector<double> w(run.domain->num_closure(), 0.0);
        const auto qw = run.domain->weights();
        for (NodeIndex g : a.members()) {
            const auto l = static_cast<std::size_t>(run.domain->local(g));
            w[l] = qw[l] * c.real("measure.mass", 1.0);
        }
        return DiscreteMeasure(run.domain, std::move(w), c.real("measure.mass", 1.0) >= 0.0);
    }
    if (kind == "capacitary") return capacitary_measure(run.domain, run.named_set(c.str("measure.set")), p, run.solver).mu;
    if (kind == "file") {
        const auto path = run.config_path.parent_path() / c.str("measure.file");
        return measure_from_csv(run.domain, read_file(path));
    }
    throw ConfigError(c.where("measure.kind") + "unknown measure kind '" + kind +
                      "' (expected quadrature, point, set, capacitary or file)");
}

int cmd_potential(Run& run) {
    struct Out {
        DiscreteMeasure mu;
        PotentialResult r;
    };
    const auto results = for_each_p(run, [&](const PExponent& p) {
        auto mu = measure_from_config(run, p);
        auto r = solve_potential(run.domain, mu, p, run.solver);
        return Out{std::move(mu), std::move(r)};
    });
    int code = ok;
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& [mu, r] = results[k];
        const auto& p = run.ps[k];
        run.manifest->write("potential-" + p_tag(run, p) + ".json", dump(to_json(r, mu, p)));
        run.manifest->write("potential-" + p_tag(run, p) + ".csv", field_csv(r.potential));
        std::cout << "potential p=" << format_double(p.value()) << " energy=" << format_double(r.energy)
                  << " residual=" << format_double(r.el_residual) << (r.converged ? "" : " NOT CONVERGED") << "\n";
        if (!r.converged) code = nonconvergence;
    }
    return code;
}

int cmd_measure(Run& run) {
    const std::string set_name = run.cfg.str("measure.set", "A");
    const NodeSet a = run.named_set(set_name);
    const auto results = for_each_p(run, [&](const PExponent& p) { return capacitary_measure(run.domain, a, p, run.solver); });
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& r = results[k];
        const auto& p = run.ps[k];
        Json j = to_json(r.cap, a, p);
        j["format"] = "relcap/capacitary_measure";
        j["measure"] = to_json(r.mu);
        run.manifest->write("measure-" + p_tag(run, p) + ".json", dump(j));
        run.manifest->write("measure-" + p_tag(run, p) + ".csv", measure_csv(r.mu));
        std::cout << "capacitary measure " << set_name << " p=" << format_double(p.value())
                  << " mass=" << format_double(r.mu.total_mass()) << " cap=" << format_double(r.cap.value) << "\n";
    }
    return ok;
}

std::optional<double> calibration_constant(const Run& run, const std::string& property, const PExponent& p) {
    const Config& c = run.cfg;
    if (c.has("check.calibrated_constant")) return c.real("check.calibrated_constant");
    if (!c.has("check.calibration")) return std::nullopt;
    const auto path = run.config_path.parent_path() / c.str("check.calibration");
    const Json j = Json::parse(read_file(path));
    if (j.value("format", std::string()) != "relcap/calibration" || j.value("version", 0) != json_format_version)
        throw ConfigError(path.string() + ": not a relcap/calibration fixture");
    if (j.at("property").get<std::string>() != property)
        throw ConfigError(path.string() + ": fixture is for " + j.at("property").get<std::string>());
    for (const auto& e : j.at("constants"))
        if (e.at("p").get<double>() == p.value()) return e.at("sup_ratio").get<double>();
    throw ConfigError(path.string() + ": no constant for p = " + format_double(p.value()));
}

Box compact_from_config(const Run& run) {
    const auto v = run.cfg.reals("check.compact");
    const int dim = run.domain->dimension();
    if (v.size() != static_cast<std::size_t>(2 * dim))
        throw ConfigError(run.cfg.where("check.compact") + "compact box needs lower and upper corner");
    Box b{{v[0], dim == 2 ? v[1] : 0.0}, {v[static_cast<std::size_t>(dim)], dim == 2 ? v[3] : 0.0}};
    return b;
}

GridFunction function_from_config(const Run& run) {
    const auto tok = Config::split(run.cfg.str("check.function", "zero"));
    const std::string kind = tok.empty() ? "" : tok.front();
    const auto& d = run.domain;
    if (kind == "zero") return GridFunction(d, 0.0);
    if (kind == "one") return GridFunction(d, 1.0);
    if (kind == "bubble") {
        // Product of x(1-x)-type factors relative to the bounding box.
        const Box b = d->box();
        return GridFunction::sample(d, [&](const Point& x) {
            double v = 1.0;
            for (int k = 0; k < d->dimension(); ++k) {
                const auto kk = static_cast<std::size_t>(k);
                v *= (x[kk] - b.lo[kk]) * (b.hi[kk] - x[kk]);
            }
            return v;
        });
    }
    if (kind == "file" && tok.size() == 2)
        return field_from_csv(d, read_file(run.config_path.parent_path() / tok[1]));
    throw ConfigError(run.cfg.where("check.function") + "expected zero, one, bubble or 'file <csv>'");
}

int cmd_check(Run& run, std::string property, bool calibrate) {
    const Config& c = run.cfg;
    if (property.empty()) property = c.str("check.property", "");
    if (property.empty()) throw ConfigError("no property given (positional argument or check.property)");
    CheckOptions opts;
    opts.solver = run.solver;
    opts.jobs = run.jobs;
    if (c.has("check.slack_tolerance")) opts.slack_tolerance = c.real("check.slack_tolerance");
    const int trials = static_cast<int>(c.integer("check.trials", 50));
    if (trials < 0) throw ConfigError(c.where("check.trials") + "trials must be nonnegative");

    if (property == "w1p0") {
        const auto u = function_from_config(run);
        int code = ok;
        for (const auto& p : run.ps) {
            const auto r = w1p0_membership(u, p, c.real("check.delta", 1e-8), c.real("check.eps_member", 1e-6), run.solver);
            Json j{{"format", "relcap/w1p0"},
                   {"version", json_format_version},
                   {"p", p.value()},
                   {"exceptional_set", to_json(r.exceptional)},
                   {"capacity", r.capacity},
                   {"member", r.member},
                   {"converged", r.converged},
                   {"note", "discrete diagnostic: boundary nodes with |u| > delta form a set of capacity <= eps_member"}};
            run.manifest->write("check-w1p0-" + p_tag(run, p) + ".json", dump(j));
            std::cout << "w1p0 p=" << format_double(p.value()) << " exceptional=" << r.exceptional.size()
                      << " capacity=" << format_double(r.capacity) << " member=" << (r.member ? "true" : "false") << "\n";
            if (!r.converged) code = nonconvergence;
        }
        return code;
    }

    std::vector<PropertyReport> reports;
    for (const auto& p : run.ps) {
        if (property == "monotonicity") {
            reports.push_back(check_monotonicity(run.domain, p, trials, run.seed, opts));
        } else if (property == "strong_subadditivity") {
            reports.push_back(check_strong_subadditivity(run.domain, p, trials, run.seed, opts));
        } else if (property == "countable_subadditivity") {
            reports.push_back(check_countable_subadditivity(run.domain, p, static_cast<int>(c.integer("check.k_max", 5)),
                                                            trials, run.seed, opts));
        } else if (property == "outer_regularity") {
            const auto radii = c.reals("check.radii");
            reports.push_back(check_outer_regularity(run.domain, run.named_set(c.str("check.set", "A")), p, radii, opts));
        } else if (property == "increasing_limit") {
            std::vector<NodeSet> chain;
            if (c.has("check.chain")) {
                for (const auto& name : Config::split(c.str("check.chain"))) chain.push_back(run.named_set(name));
            } else {
                chain = random_chain(run.domain, static_cast<int>(c.integer("check.chain_steps", 6)), run.seed);
            }
            reports.push_back(check_increasing_limit(run.domain, chain, p, opts));
        } else if (property == "domain_monotonicity" || property == "extension_comparison") {
            const auto u = domain_spec_from_config(c, "domain");
            const auto v = domain_spec_from_config(c, "outer");
            if (property == "domain_monotonicity")
                reports.push_back(check_domain_monotonicity(u, v, p, trials, run.seed, opts));
            else
                reports.push_back(check_extension_comparison(u, v, p, trials, run.seed,
                                                             calibrate ? std::nullopt : calibration_constant(run, property, p), opts));
        } else if (property == "pq_comparison") {
            const PExponent q(c.real("q"));
            reports.push_back(check_pq_comparison(run.domain, q, p, compact_from_config(run), trials, run.seed,
                                                  calibrate ? std::nullopt : calibration_constant(run, property, p), opts));
        } else if (property == "duality_chain") {
            reports.push_back(check_duality_chain(run.domain, p, trials, run.seed, c.real("check.rel_tol", 1e-5), opts));
        } else if (property == "energy_bound") {
            reports.push_back(check_energy_bound(run.domain, p, trials, run.seed, c.real("check.rel_tol", 1e-5), opts));
        } else {
            throw ConfigError("unknown property '" + property +
                              "' (monotonicity, strong_subadditivity, countable_subadditivity, outer_regularity, "
                              "increasing_limit, domain_monotonicity, extension_comparison, pq_comparison, "
                              "duality_chain, energy_bound, w1p0)");
        }
    }

    int code = ok;
    Json constants = Json::array();
    for (std::size_t k = 0; k < reports.size(); ++k) {
        const auto& r = reports[k];
        const auto stem = "check-" + property + "-" + p_tag(run, run.ps[k]);
        run.manifest->write(stem + ".json", dump(to_json(r)));
        run.manifest->write(stem + ".csv", records_csv(r));
        std::cout << property << " p=" << format_double(r.p) << " trials=" << r.trials << " violations=" << r.violations
                  << " skipped=" << r.skipped << " worst_margin=" << format_double(r.worst_margin);
        if (r.summary.count("sup_ratio")) std::cout << " sup_ratio=" << format_double(r.summary.at("sup_ratio"));
        std::cout << "\n";
        if (r.violations > 0) code = violation;
        const bool unsolved = std::any_of(r.records.begin(), r.records.end(), [](const TrialRecord& t) {
            return t.status == TrialRecord::Status::skipped && t.note.rfind("non-convergence", 0) == 0;
        });
        if (r.violations == 0 && unsolved && code == ok) code = nonconvergence;
        if (r.summary.count("sup_ratio"))
            constants.push_back(Json{{"p", r.p}, {"sup_ratio", r.summary.at("sup_ratio")}});
    }
    if (calibrate) {
        if (constants.empty()) throw ConfigError("--calibrate applies to extension_comparison and pq_comparison");
        Json fx{{"format", "relcap/calibration"}, {"version", json_format_version}, {"property", property},
                {"seed", run.seed}, {"trials", trials}, {"constants", constants}};
        if (property == "pq_comparison") fx["q"] = c.real("q");
        run.manifest->write("calibration-" + property + ".json", dump(fx));
    }
    return code;
}

int cmd_refine(Run& run) {
    const Config& c = run.cfg;
    const auto hs = c.reals("refine.h");
    if (hs.empty()) throw ConfigError(c.where("refine.h") + "no spacings given");
    const auto x = c.reals("refine.point");
    if (x.size() != static_cast<std::size_t>(run.domain->dimension()))
        throw ConfigError(c.where("refine.point") + "point has the wrong dimension");
    std::optional<double> reference;
    if (c.has("refine.reference")) reference = c.real("refine.reference");
    const DomainSpec base = domain_spec_from_config(c, "domain");
    int code = ok;
    for (const auto& p : run.ps) {
        const auto st = refinement_study(base, {x[0], x.size() > 1 ? x[1] : 0.0}, p, hs, reference, run.solver);
        run.manifest->write("refine-" + p_tag(run, p) + ".json", dump(to_json(st, p.value())));
        run.manifest->write("refine-" + p_tag(run, p) + ".csv", refinement_csv(st));
        for (const auto& row : st.rows) {
            std::cout << "h=" << format_double(row.h) << " value=" << format_double(row.value);
            if (reference) std::cout << " error=" << format_double(row.error);
            std::cout << "\n";
            if (!row.converged) code = nonconvergence;
        }
    }
    return code;
}

int cmd_emit(Run& run) {
    const Config& c = run.cfg;
    const std::string source = c.str("emit.source", "extremal");
    GridFunction u;
    if (source == "extremal") {
        const auto r = capacity(run.domain, run.named_set(c.str("emit.set", "A")), run.ps.front(), run.solver);
        if (!r.converged) throw NonConvergence("extremal for emit");
        u = r.extremal;
    } else if (source == "potential") {
        const auto mu = measure_from_config(run, run.ps.front());
        const auto r = solve_potential(run.domain, mu, run.ps.front(), run.solver);
        if (!r.converged) throw NonConvergence("potential for emit");
        u = r.potential;
    } else if (source == "file") {
        u = grid_function_from_json(Json::parse(read_file(run.config_path.parent_path() / c.str("emit.file"))));
    } else {
        throw ConfigError(c.where("emit.source") + "expected extremal, potential or file");
    }
    run.manifest->write("field.json", dump(to_json(u)));
    run.manifest->write("field.csv", field_csv(u));
    std::cout << "field with " << u.size() << " nodes\n";
    return ok;
}

int dispatch(const std::string& command, const std::string& config_path, std::optional<std::uint64_t> seed,
             std::optional<std::string> out, std::optional<int> jobs, const std::string& property, bool calibrate) {
    Run run;
    run.command = command;
    run.config_path = config_path;
    run.cfg = Config::load(config_path);
    validate_keys(run.cfg);
    run.seed = seed ? *seed : static_cast<std::uint64_t>(run.cfg.integer("seed", 1));
    run.jobs = jobs ? *jobs : static_cast<int>(run.cfg.integer("jobs", 1));
    if (run.jobs < 1) throw ConfigError("jobs must be at least 1");
    for (double p : run.cfg.has("p") ? run.cfg.reals("p") : std::vector<double>{2.0}) run.ps.emplace_back(p);
    if (run.ps.empty()) throw ConfigError(run.cfg.where("p") + "no exponent given");
    run.solver = solver_options_from_config(run.cfg);
    for (const auto& p : run.ps) run.solver.validate(p);
    run.domain = build_domain(domain_spec_from_config(run.cfg, "domain"));

    // --out is relative to the working directory, the config key to the config file.
    Manifest manifest(out ? std::filesystem::path(*out)
                          : run.config_path.parent_path() / run.cfg.str("out", "relcap-out"));
    run.manifest = &manifest;
    run.solver.observer = manifest.observer();

    int code = ok;
    if (command == "capacity") code = cmd_capacity(run);
    else if (command == "potential") code = cmd_potential(run);
    else if (command == "measure") code = cmd_measure(run);
    else if (command == "check") code = cmd_check(run, property, calibrate);
    else if (command == "refine") code = cmd_refine(run);
    else if (command == "emit") code = cmd_emit(run);
    Json inputs = run.inputs();
    if (command == "check") inputs["property"] = property.empty() ? run.cfg.str("check.property", "") : property;
    manifest.finish(command, inputs);
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relcap: discrete relative p-capacity lab"};
    app.require_subcommand(1);

    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> jobs;
    std::string property;
    bool calibrate = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "key-value config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "random seed (overrides the config)");
        sub->add_option("--out", out, "output directory (overrides the config)");
        sub->add_option("--jobs", jobs, "worker threads (overrides the config)");
    };
    std::vector<std::pair<std::string, CLI::App*>> subs;
    for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
             {"capacity", "capacity and extremal of a node set"},
             {"potential", "potential and energy of a nodal measure"},
             {"measure", "capacitary measure of a node set"},
             {"check", "randomized or structured property check"},
             {"refine", "single-node capacity under mesh refinement"},
             {"emit", "write a grid function as CSV and JSON"}}) {
        auto* sub = app.add_subcommand(name, help);
        add_common(sub);
        if (name == "check") {
            sub->add_option("property", property, "property name (or check.property in the config)");
            sub->add_flag("--calibrate", calibrate, "write a calibration fixture from this run");
        }
        subs.emplace_back(name, sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : bad_config;
    }

    std::string command;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) command = name;

    try {
        return dispatch(command, config, seed, out, jobs, property, calibrate);
    } catch (const NonConvergence& e) {
        std::cerr << "relcap: " << e.what() << "\n";
        return nonconvergence;
    } catch (const NegativeMeasure& e) {
        std::cerr << "relcap: " << e.what() << "\n";
        return nonconvergence;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "relcap: malformed JSON input: " << e.what() << "\n";
        return bad_config;
    } catch (const Error& e) {
        std::cerr << "relcap: " << e.what() << "\n";
        return bad_config;
    } catch (const std::exception& e) {
        std::cerr << "relcap: " << e.what() << "\n";
        return bad_config;
    }
}
