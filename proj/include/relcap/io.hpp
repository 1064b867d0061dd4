/**
 * @file io.hpp
 * @brief Key-value configs, JSON and CSV serialization, atomic file writes.
 *
 * JSON layouts carry a "format" tag and a "version" number. Doubles are written
 * in shortest round-trip form, so reading a file back reproduces every value bit
 * for bit.
 */
#pragma once

#include "relcap/propcheck.hpp"

#include <json.hpp>

#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace relcap {

inline constexpr int json_format_version = 1;

// ---------------------------------------------------------------------------
// Key-value config files
// ---------------------------------------------------------------------------

/// Parsed `key = value` lines. '#' starts a comment; keys are dotted names.
class Config {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static Config parse(std::string_view text, std::string origin = "<config>") {
        Config c;
        c.origin_ = std::move(origin);
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t end = std::min(text.find('\n', pos), text.size());
            std::string line(text.substr(pos, end - pos));
            pos = end + 1;
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw ConfigError(c.where(line_no) + "expected 'key = value'");
            const std::string key = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            if (key.empty()) throw ConfigError(c.where(line_no) + "empty key");
            for (char ch : key)
                if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.'))
                    throw ConfigError(c.where(line_no) + "invalid character in key '" + key + "'");
            if (c.entries_.count(key)) throw ConfigError(c.where(line_no) + "duplicate key '" + key + "'");
            c.entries_[key] = {value, line_no};
        }
        return c;
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot read " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path.string());
    }

    const std::map<std::string, Entry>& entries() const { return entries_; }
    const std::string& origin() const { return origin_; }
    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    void set(const std::string& key, std::string value) { entries_[key] = {std::move(value), 0}; }

    std::string str(const std::string& key) const { return entry(key).value; }
    std::string str(const std::string& key, const std::string& fallback) const { return has(key) ? str(key) : fallback; }

    double real(const std::string& key) const {
        const auto v = reals(key);
        if (v.size() != 1) throw ConfigError(where(key) + "expected one number for '" + key + "'");
        return v.front();
    }
    double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

    std::vector<double> reals(const std::string& key) const {
        const auto& e = entry(key);
        std::vector<double> out;
        for (const auto& tok : split(e.value)) out.push_back(to_double(tok, key));
        return out;
    }

    long long integer(const std::string& key) const {
        const auto& e = entry(key);
        long long v = 0;
        const auto& s = e.value;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size())
            throw ConfigError(where(key) + "expected an integer for '" + key + "', got '" + s + "'");
        return v;
    }
    long long integer(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto s = str(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError(where(key) + "expected true/false for '" + key + "'");
    }

    /// Keys starting with `prefix` followed by a dot, with the prefix removed.
    std::vector<std::string> children(const std::string& prefix) const {
        std::vector<std::string> out;
        const std::string pre = prefix + ".";
        for (const auto& [k, e] : entries_)
            if (k.rfind(pre, 0) == 0) out.push_back(k.substr(pre.size()));
        return out;
    }

    std::string where(const std::string& key) const {
        const auto it = entries_.find(key);
        return where(it == entries_.end() ? 0 : it->second.line);
    }
    std::string where(int line) const { return origin_ + (line > 0 ? ":" + std::to_string(line) : "") + ": "; }

    static std::vector<std::string> split(const std::string& s) {
        std::vector<std::string> out;
        std::istringstream in(s);
        for (std::string tok; in >> tok;) out.push_back(tok);
        return out;
    }

    double to_double(const std::string& tok, const std::string& key) const {
        double v = 0.0;
        const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (r.ec != std::errc() || r.ptr != tok.data() + tok.size() || !std::isfinite(v))
            throw ConfigError(where(key) + "expected a number for '" + key + "', got '" + tok + "'");
        return v;
    }

private:
    const Entry& entry(const std::string& key) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) throw ConfigError(origin_ + ": missing key '" + key + "'");
        return it->second;
    }
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    std::string origin_;
    std::map<std::string, Entry> entries_;
};

/// Read a DomainSpec from keys under `prefix` (dimension, h, box, shape, rectangles, mask).
inline DomainSpec domain_spec_from_config(const Config& c, const std::string& prefix = "domain") {
    DomainSpec s;
    s.dimension = static_cast<int>(c.integer(prefix + ".dimension", 2));
    if (s.dimension != 1 && s.dimension != 2)
        throw ConfigError(c.where(prefix + ".dimension") + "dimension must be 1 or 2");
    s.h = c.real(prefix + ".h");
    auto read_box = [&](const std::vector<double>& v, const std::string& key) {
        const std::size_t need = static_cast<std::size_t>(2 * s.dimension);
        if (v.size() != need)
            throw ConfigError(c.where(key) + "a box needs " + std::to_string(need) + " numbers (lower corner, upper corner)");
        Box b{{0.0, 0.0}, {0.0, 0.0}};
        for (int k = 0; k < s.dimension; ++k) {
            b.lo[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k)];
            b.hi[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k + s.dimension)];
        }
        return b;
    };
    const std::string box_key = prefix + ".box";
    if (c.has(box_key)) {
        s.box = read_box(c.reals(box_key), box_key);
    } else {
        s.box = s.dimension == 1 ? Box{{0.0, 0.0}, {1.0, 0.0}} : Box{{0.0, 0.0}, {1.0, 1.0}};
    }
    const std::string shape = c.str(prefix + ".shape", "rectangle");
    if (shape == "rectangle") {
        s.shape = ShapeKind::rectangle;
    } else if (shape == "rectangles") {
        s.shape = ShapeKind::rectangles;
        const std::string key = prefix + ".rectangles";
        std::string all = c.str(key);
        std::stringstream ss(all);
        for (std::string part; std::getline(ss, part, ';');) {
            std::vector<double> v;
            for (const auto& tok : Config::split(part)) v.push_back(c.to_double(tok, key));
            if (!v.empty()) s.rectangles.push_back(read_box(v, key));
        }
        if (s.rectangles.empty()) throw ConfigError(c.where(key) + "no rectangles given");
    } else if (shape == "mask") {
        s.shape = ShapeKind::mask;
        const std::string key = prefix + ".mask";
        for (char ch : c.str(key)) {
            if (ch == '0' || ch == '1') s.node_mask.push_back(static_cast<std::uint8_t>(ch - '0'));
            else if (ch != ' ' && ch != '\t')
                throw ConfigError(c.where(key) + "mask entries must be 0 or 1");
        }
    } else {
        throw ConfigError(c.where(prefix + ".shape") + "unknown shape '" + shape +
                          "' (expected rectangle, rectangles or mask)");
    }
    return s;
}

/// Node-set expression: terms joined by '+', each one of
///   ball x [y] r | box lo.. hi.. | halfspace nx [ny] c | nearest x [y] |
///   nodes i j ... | boundary | closure | omega | empty
inline NodeSet node_set_from_string(const DomainPtr& d, const std::string& expr, const Config* c = nullptr,
                                    const std::string& key = "set") {
    auto fail = [&](const std::string& msg) -> ConfigError {
        return ConfigError((c ? c->where(key) : std::string()) + "set '" + key + "': " + msg);
    };
    const int dim = d->dimension();
    NodeSet out(d);
    std::stringstream ss(expr);
    bool any = false;
    for (std::string term; std::getline(ss, term, '+');) {
        auto tok = Config::split(term);
        if (tok.empty()) throw fail("empty term");
        any = true;
        const std::string kind = tok.front();
        std::vector<double> v;
        if (kind != "nodes") {
            for (std::size_t k = 1; k < tok.size(); ++k) {
                double x = 0.0;
                const auto r = std::from_chars(tok[k].data(), tok[k].data() + tok[k].size(), x);
                if (r.ec != std::errc() || r.ptr != tok[k].data() + tok[k].size()) throw fail("bad number '" + tok[k] + "'");
                v.push_back(x);
            }
        }
        auto need = [&](std::size_t n) {
            if (v.size() != n) throw fail("'" + kind + "' takes " + std::to_string(n) + " numbers");
        };
        auto point = [&](std::size_t at) {
            Point x{v[at], 0.0};
            if (dim == 2) x[1] = v[at + 1];
            return x;
        };
        const auto n = static_cast<std::size_t>(dim);
        NodeSet part(d);
        if (kind == "ball") {
            need(n + 1);
            part = node_set(d, select::Ball{point(0), v[n]});
        } else if (kind == "box") {
            need(2 * n);
            Box b{point(0), point(n)};
            part = node_set(d, select::BoxSel{b});
        } else if (kind == "halfspace") {
            need(n + 1);
            part = node_set(d, select::HalfSpace{point(0), v[n]});
        } else if (kind == "nearest") {
            need(n);
            part = node_set(d, select::Nearest{point(0)});
        } else if (kind == "nodes") {
            std::vector<NodeIndex> idx;
            for (std::size_t k = 1; k < tok.size(); ++k) {
                NodeIndex g = 0;
                const auto r = std::from_chars(tok[k].data(), tok[k].data() + tok[k].size(), g);
                if (r.ec != std::errc() || r.ptr != tok[k].data() + tok[k].size()) throw fail("bad node index '" + tok[k] + "'");
                idx.push_back(g);
            }
            part = NodeSet(d, std::move(idx));
        } else if (kind == "boundary" || kind == "closure" || kind == "omega" || kind == "empty") {
            need(0);
            if (kind == "boundary") part = node_set(d, select::Boundary{});
            if (kind == "closure") part = node_set(d, select::Closure{});
            if (kind == "omega") part = node_set(d, select::Omega{});
        } else {
            throw fail("unknown selector '" + kind + "'");
        }
        out = unite(out, part);
    }
    if (!any) throw fail("empty expression");
    return out;
}

inline Algorithm algorithm_from_string(const std::string& s) {
    for (auto a : {Algorithm::automatic, Algorithm::active_set_p2, Algorithm::projected_newton,
                   Algorithm::projected_gradient, Algorithm::projected_gradient_accelerated})
        if (s == to_string(a)) return a;
    throw ConfigError("unknown algorithm '" + s + "'");
}

inline InitialGuess initial_guess_from_string(const std::string& s) {
    for (auto g : {InitialGuess::zeros, InitialGuess::ones_on_A, InitialGuess::ones})
        if (s == to_string(g)) return g;
    throw ConfigError("unknown initial guess '" + s + "'");
}

/// solver.tolerance, solver.max_iterations, solver.epsilon, solver.algorithm, solver.initial_guess
inline SolverOptions solver_options_from_config(const Config& c, const std::string& prefix = "solver") {
    SolverOptions o;
    if (c.has(prefix + ".tolerance")) o.tolerance = c.real(prefix + ".tolerance");
    if (c.has(prefix + ".max_iterations")) o.max_iterations = static_cast<int>(c.integer(prefix + ".max_iterations"));
    o.epsilon_reg = c.real(prefix + ".epsilon", o.epsilon_reg);
    if (c.has(prefix + ".algorithm")) o.algorithm = algorithm_from_string(c.str(prefix + ".algorithm"));
    if (c.has(prefix + ".initial_guess")) o.initial_guess = initial_guess_from_string(c.str(prefix + ".initial_guess"));
    return o;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

using Json = nlohmann::ordered_json;

namespace detail {

inline Json header(const char* kind) { return Json{{"format", std::string("relcap/") + kind}, {"version", json_format_version}}; }

inline void check_header(const Json& j, const char* kind) {
    const std::string want = std::string("relcap/") + kind;
    if (!j.is_object() || j.value("format", std::string()) != want)
        throw ConfigError("expected a " + want + " document");
    if (j.value("version", 0) != json_format_version)
        throw ConfigError("unsupported " + want + " version " + std::to_string(j.value("version", 0)));
}

inline Json box_json(const Box& b, int dim) {
    Json lo = Json::array(), hi = Json::array();
    for (int k = 0; k < dim; ++k) {
        lo.push_back(b.lo[static_cast<std::size_t>(k)]);
        hi.push_back(b.hi[static_cast<std::size_t>(k)]);
    }
    return Json{{"lo", lo}, {"hi", hi}};
}

inline Box box_from_json(const Json& j, int dim) {
    Box b{{0.0, 0.0}, {0.0, 0.0}};
    for (int k = 0; k < dim; ++k) {
        b.lo[static_cast<std::size_t>(k)] = j.at("lo").at(static_cast<std::size_t>(k)).get<double>();
        b.hi[static_cast<std::size_t>(k)] = j.at("hi").at(static_cast<std::size_t>(k)).get<double>();
    }
    return b;
}

inline std::string id_hex(std::uint64_t id) { return hash_hex(id); }

}  // namespace detail

/// A domain as (dimension, h, box, omega mask as grid-node string, sorted closure ids).
inline Json to_json(const GridDomain& d) {
    Json j = detail::header("domain");
    j["dimension"] = d.dimension();
    j["h"] = d.spacing();
    j["box"] = detail::box_json(d.box(), d.dimension());
    j["counts"] = Json::array({d.counts()[0], d.counts()[1]});
    std::string mask(static_cast<std::size_t>(d.grid_size()), '0');
    for (NodeIndex g : d.omega_nodes()) mask[static_cast<std::size_t>(g)] = '1';
    j["omega_mask"] = mask;
    j["closure_size"] = d.num_closure();
    j["id"] = detail::id_hex(d.id());
    return j;
}

inline DomainPtr domain_from_json(const Json& j) {
    detail::check_header(j, "domain");
    DomainSpec s;
    s.dimension = j.at("dimension").get<int>();
    s.h = j.at("h").get<double>();
    s.box = detail::box_from_json(j.at("box"), s.dimension);
    s.shape = ShapeKind::mask;
    for (char ch : j.at("omega_mask").get<std::string>()) s.node_mask.push_back(ch == '1' ? 1 : 0);
    auto d = build_domain(s);
    if (j.contains("id") && j["id"].get<std::string>() != detail::id_hex(d->id()))
        throw ConfigError("domain id mismatch after reconstruction");
    return d;
}

inline Json to_json(const NodeSet& a) {
    Json j = detail::header("nodeset");
    j["domain_id"] = detail::id_hex(a.domain()->id());
    j["nodes"] = a.members();
    return j;
}

inline NodeSet node_set_from_json(const DomainPtr& d, const Json& j) {
    detail::check_header(j, "nodeset");
    if (j.at("domain_id").get<std::string>() != detail::id_hex(d->id()))
        throw DomainMismatch("node set belongs to another domain");
    return NodeSet(d, j.at("nodes").get<std::vector<NodeIndex>>());
}

inline Json to_json(const GridFunction& u) {
    Json j = detail::header("gridfunction");
    j["domain"] = to_json(*u.domain());
    j["nodes"] = std::vector<NodeIndex>(u.domain()->closure_nodes().begin(), u.domain()->closure_nodes().end());
    j["values"] = std::vector<double>(u.values().begin(), u.values().end());
    return j;
}

inline GridFunction grid_function_from_json(const Json& j) {
    detail::check_header(j, "gridfunction");
    auto d = domain_from_json(j.at("domain"));
    const auto nodes = j.at("nodes").get<std::vector<NodeIndex>>();
    if (!std::equal(nodes.begin(), nodes.end(), d->closure_nodes().begin(), d->closure_nodes().end()))
        throw DomainMismatch("grid function node list does not match its domain");
    return GridFunction(d, j.at("values").get<std::vector<double>>());
}

inline Json to_json(const DiscreteMeasure& mu) {
    Json j = detail::header("measure");
    j["domain_id"] = detail::id_hex(mu.domain()->id());
    j["nonnegative"] = mu.nonneg();
    j["nodes"] = std::vector<NodeIndex>(mu.domain()->closure_nodes().begin(), mu.domain()->closure_nodes().end());
    j["weights"] = std::vector<double>(mu.weights().begin(), mu.weights().end());
    j["total_mass"] = mu.total_mass();
    return j;
}

inline DiscreteMeasure measure_from_json(const DomainPtr& d, const Json& j) {
    detail::check_header(j, "measure");
    if (j.at("domain_id").get<std::string>() != detail::id_hex(d->id()))
        throw DomainMismatch("measure belongs to another domain");
    return DiscreteMeasure(d, j.at("weights").get<std::vector<double>>(), j.value("nonnegative", false));
}

inline Json to_json(const SolverOptions& o, const PExponent& p) {
    const Algorithm a = o.resolved_algorithm(p);
    return Json{{"tolerance", o.resolved_tolerance(p)},
                {"max_iterations", o.resolved_max_iterations(a)},
                {"epsilon", o.epsilon_reg},
                {"algorithm", to_string(a)},
                {"initial_guess", to_string(o.initial_guess)}};
}

inline Json to_json(const CapacityResult& r, const NodeSet& a, const PExponent& p) {
    Json j = detail::header("capacity");
    j["p"] = p.value();
    j["set"] = to_json(a);
    if (!a.empty())
        j["input_hash"] = detail::hash_hex(detail::problem_hash(
            {a.domain(), p.value(), a.local_mask(), std::vector<double>(a.domain()->num_closure(), 0.0), true}));
    j["value"] = r.value;
    j["kkt_residual"] = r.kkt_residual;
    j["tolerance"] = r.tolerance;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["active_set"] = r.active_set.members();
    j["multipliers"] = r.multipliers;
    j["extremal"] = to_json(r.extremal);
    return j;
}

inline Json to_json(const PotentialResult& r, const DiscreteMeasure& mu, const PExponent& p) {
    Json j = detail::header("potential");
    j["p"] = p.value();
    j["measure"] = to_json(mu);
    j["input_hash"] = detail::hash_hex(detail::problem_hash(
        {mu.domain(), p.value(), std::vector<std::uint8_t>(mu.domain()->num_closure(), 0),
         std::vector<double>(mu.weights().begin(), mu.weights().end())}));
    j["energy"] = r.energy;
    j["objective"] = r.objective;
    j["el_residual"] = r.el_residual;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["potential"] = to_json(r.potential);
    return j;
}

inline Json to_json(const PropertyReport& r) {
    Json j = detail::header("property");
    j["property_name"] = r.property_name;
    j["p"] = r.p;
    j["seed"] = r.seed;
    j["tolerance"] = r.tolerance;
    j["trials"] = r.trials;
    j["violations"] = r.violations;
    j["skipped"] = r.skipped;
    j["worst_margin"] = r.worst_margin;
    j["passed"] = r.passed();
    Json summary = Json::object();
    for (const auto& [k, v] : r.summary) summary[k] = v;
    j["summary"] = summary;
    if (!r.note.empty()) j["note"] = r.note;
    Json recs = Json::array();
    for (const auto& t : r.records) {
        Json e{{"trial", t.trial}, {"inputs_hash", t.inputs_hash}, {"lhs", t.lhs},
               {"rhs", t.rhs},     {"slack", t.slack},             {"status", to_string(t.status)}};
        if (!t.note.empty()) e["note"] = t.note;
        recs.push_back(std::move(e));
    }
    j["records"] = recs;
    return j;
}

inline Json to_json(const RefinementStudy& st, double p) {
    Json j = detail::header("refinement");
    j["p"] = p;
    Json rows = Json::array();
    for (const auto& r : st.rows) {
        Json e{{"h", r.h}, {"value", r.value}, {"converged", r.converged}};
        if (!std::isnan(r.error)) e["error"] = r.error;
        rows.push_back(std::move(e));
    }
    j["rows"] = rows;
    j["strictly_decreasing"] = st.strictly_decreasing;
    j["stabilized"] = st.stabilized;
    j["error_decreasing"] = st.error_decreasing;
    return j;
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

/// node,x[,y],value per closure node.
inline std::string field_csv(const GridFunction& u) {
    const auto& d = *u.domain();
    std::string out = d.dimension() == 1 ? "node,x,value\n" : "node,x,y,value\n";
    for (std::size_t l = 0; l < u.size(); ++l) {
        const NodeIndex g = d.closure_nodes()[l];
        const Point x = d.coordinate(g);
        out += std::to_string(g) + "," + format_double(x[0]) + ",";
        if (d.dimension() == 2) out += format_double(x[1]) + ",";
        out += format_double(u[l]) + "\n";
    }
    return out;
}

namespace detail {

inline std::vector<std::vector<std::string>> csv_rows(const std::string& text, std::size_t columns, const char* what) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        if (cells.size() != columns)
            throw ConfigError(std::string(what) + " CSV line " + std::to_string(line_no) + ": expected " +
                              std::to_string(columns) + " columns");
        rows.push_back(std::move(cells));
    }
    return rows;
}

template <class T>
T parse_cell(const std::string& s, const char* what) {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ConfigError(std::string(what) + " CSV: cannot parse '" + s + "'");
    return v;
}

}  // namespace detail

/// Read a field written by field_csv back onto `d`; every closure node must appear once.
inline GridFunction field_from_csv(const DomainPtr& d, const std::string& text) {
    const std::size_t cols = d->dimension() == 1 ? 3 : 4;
    std::vector<double> v(d->num_closure(), 0.0);
    std::vector<std::uint8_t> seen(d->num_closure(), 0);
    for (const auto& row : detail::csv_rows(text, cols, "field")) {
        const auto g = detail::parse_cell<NodeIndex>(row[0], "field");
        const int l = d->local(g);
        if (l < 0) throw OutOfDomain("field CSV node " + std::to_string(g));
        v[static_cast<std::size_t>(l)] = detail::parse_cell<double>(row.back(), "field");
        seen[static_cast<std::size_t>(l)] = 1;
    }
    for (auto s : seen)
        if (!s) throw ConfigError("field CSV does not cover every closure node");
    return GridFunction(d, std::move(v));
}

/// node,weight for every node with nonzero weight.
inline std::string measure_csv(const DiscreteMeasure& mu) {
    std::string out = "node,weight\n";
    const auto& d = *mu.domain();
    for (std::size_t l = 0; l < mu.weights().size(); ++l)
        if (mu.weights()[l] != 0.0) out += std::to_string(d.closure_nodes()[l]) + "," + format_double(mu.weights()[l]) + "\n";
    return out;
}

inline DiscreteMeasure measure_from_csv(const DomainPtr& d, const std::string& text) {
    std::vector<double> w(d->num_closure(), 0.0);
    bool nonneg = true;
    for (const auto& row : detail::csv_rows(text, 2, "measure")) {
        const auto g = detail::parse_cell<NodeIndex>(row[0], "measure");
        const int l = d->local(g);
        if (l < 0) throw OutOfDomain("measure CSV node " + std::to_string(g));
        w[static_cast<std::size_t>(l)] += detail::parse_cell<double>(row[1], "measure");
    }
    for (double x : w) nonneg = nonneg && x >= 0.0;
    return DiscreteMeasure(d, std::move(w), nonneg);
}

inline std::string records_csv(const PropertyReport& r) {
    std::string out = "trial,inputs_hash,lhs,rhs,slack,status\n";
    for (const auto& t : r.records)
        out += std::to_string(t.trial) + "," + t.inputs_hash + "," + format_double(t.lhs) + "," + format_double(t.rhs) +
               "," + format_double(t.slack) + "," + to_string(t.status) + "\n";
    return out;
}

inline std::string refinement_csv(const RefinementStudy& st) {
    std::string out = "h,value,error\n";
    for (const auto& r : st.rows)
        out += format_double(r.h) + "," + format_double(r.value) + "," + (std::isnan(r.error) ? "" : format_double(r.error)) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Write through a temporary file in the same directory, then rename over the target.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw Error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot move " + tmp.string() + " to " + path.string());
    }
}

}  // namespace relcap
