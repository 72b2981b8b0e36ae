#pragma once

// JSON run configuration: schema validation (all violations collected, not
// just the first), defaults filled and echoed back, and builders that turn a
// validated config into Grid / MediumFields / SolverConfig / sources.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kwk/experiments.hpp"
#include "kwk/solver.hpp"

namespace kwk {

using json = nlohmann::json;

struct FieldSpec {
    std::string kind = "constant";  // constant | gaussian-blob | sinusoid | random-fourier | zero
    double value = 0.0;
    double base = 0.0;
    double amplitude = 0.0;
    std::array<double, 3> center{0.0, 0.0, 0.0};
    double width = 0.1;
    std::array<int, 3> periods{1, 0, 0};
    double phase = 0.0;
    int max_mode = 3;
};

struct VectorFieldSpec {
    std::string kind = "zero";  // zero | gradient-blob
    double amplitude = 0.0;
    std::array<double, 3> center{0.0, 0.0, 0.0};
    double width = 0.1;
};

struct SourceSpec {
    std::string kind = "tone";  // tone | table
    std::array<double, 3> position{0.0, 0.0, 0.0};
    double amplitude = 0.0;
    double frequency = 0.0;
    double dt = 0.0;
    std::vector<double> values;
};

struct ExperimentSpec {
    std::string preset;  // "desk" | "paper" | "" (explicit parameters)
    int n_elements = 8;
    int n_sources = 4;
    std::array<double, 3> center{0.15, 0.15, 0.0};
    double radius = 0.08;
    double frequency = 25e3;
    double amplitude = 0.0;
};

struct RunConfig {
    std::vector<int> grid_dims;
    std::vector<double> grid_spacing;

    FieldSpec rho0, c0sq, b_over_a;
    std::string absorption_kind = "none";
    std::optional<double> alpha0_db;
    std::optional<double> alpha0_internal;
    double y = 1.5;
    std::optional<double> tau, eta;  // absent = auto
    std::optional<double> c0_ref;

    SolverConfig solver;
    FieldSpec sigma0;
    VectorFieldSpec u0, d0;
    std::vector<SourceSpec> sources;
    std::vector<std::array<double, 3>> probe_positions;
    int probe_stride = 1;
    int store_stride = 1;
    std::string output_dir = "out";
    std::uint64_t seed = 1;

    std::optional<ExperimentSpec> experiment;
    std::optional<std::vector<double>> sweep_mu;

    json canonical;  // defaults filled, for echo and hashing
};

namespace cfgdetail {

struct Check {
    std::vector<std::string>* errs;
    void fail(const std::string& path, const std::string& msg) const {
        errs->push_back(path + ": " + msg);
    }
};

inline void reject_unknown(const json& obj, const std::string& path,
                           std::initializer_list<const char*> allowed, Check& ck) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) ck.fail(path + "." + it.key(), "unknown key");
    }
}

inline double num(const json& obj, const std::string& path, const char* key, double dflt,
                  Check& ck, bool required = false) {
    if (!obj.contains(key)) {
        if (required) ck.fail(path + "." + key, "missing required field");
        return dflt;
    }
    if (!obj[key].is_number()) {
        ck.fail(path + "." + key, "expected a number");
        return dflt;
    }
    return obj[key].get<double>();
}

inline int integer(const json& obj, const std::string& path, const char* key, int dflt, Check& ck,
                   bool required = false) {
    if (!obj.contains(key)) {
        if (required) ck.fail(path + "." + key, "missing required field");
        return dflt;
    }
    if (!obj[key].is_number_integer()) {
        ck.fail(path + "." + key, "expected an integer");
        return dflt;
    }
    return obj[key].get<int>();
}

inline std::string str(const json& obj, const std::string& path, const char* key,
                       const std::string& dflt, Check& ck, bool required = false) {
    if (!obj.contains(key)) {
        if (required) ck.fail(path + "." + key, "missing required field");
        return dflt;
    }
    if (!obj[key].is_string()) {
        ck.fail(path + "." + key, "expected a string");
        return dflt;
    }
    return obj[key].get<std::string>();
}

template <typename T, std::size_t N>
inline std::array<T, N> fixed_array(const json& obj, const std::string& path, const char* key,
                                    std::array<T, N> dflt, int want, Check& ck) {
    if (!obj.contains(key)) return dflt;
    const json& a = obj[key];
    if (!a.is_array() || static_cast<int>(a.size()) > static_cast<int>(N) ||
        (want > 0 && static_cast<int>(a.size()) != want)) {
        ck.fail(path + "." + key, "expected an array of length " + std::to_string(want));
        return dflt;
    }
    std::array<T, N> out = dflt;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number()) {
            ck.fail(path + "." + key, "expected numeric entries");
            return dflt;
        }
        out[i] = a[i].get<T>();
    }
    return out;
}

inline FieldSpec field_spec(const json& obj, const std::string& path, int ndim, Check& ck,
                            bool allow_zero) {
    FieldSpec fs;
    if (!obj.is_object()) {
        ck.fail(path, "expected an object");
        return fs;
    }
    reject_unknown(obj, path,
                   {"kind", "value", "base", "amplitude", "center", "width", "periods", "phase",
                    "max_mode"},
                   ck);
    fs.kind = str(obj, path, "kind", "constant", ck);
    const bool known = fs.kind == "constant" || fs.kind == "gaussian-blob" ||
                       fs.kind == "sinusoid" || fs.kind == "random-fourier" ||
                       (allow_zero && fs.kind == "zero");
    if (!known) ck.fail(path + ".kind", "unknown field kind '" + fs.kind + "'");
    fs.value = num(obj, path, "value", 0.0, ck, fs.kind == "constant");
    fs.base = num(obj, path, "base", 0.0, ck);
    fs.amplitude = num(obj, path, "amplitude", 0.0, ck);
    fs.center = fixed_array<double, 3>(obj, path, "center", fs.center, ndim, ck);
    fs.width = num(obj, path, "width", 0.1, ck);
    fs.periods = fixed_array<int, 3>(obj, path, "periods", fs.periods, ndim, ck);
    fs.phase = num(obj, path, "phase", 0.0, ck);
    fs.max_mode = integer(obj, path, "max_mode", 3, ck);
    return fs;
}

inline VectorFieldSpec vector_field_spec(const json& obj, const std::string& path, int ndim,
                                         Check& ck) {
    VectorFieldSpec vs;
    if (!obj.is_object()) {
        ck.fail(path, "expected an object");
        return vs;
    }
    reject_unknown(obj, path, {"kind", "amplitude", "center", "width"}, ck);
    vs.kind = str(obj, path, "kind", "zero", ck);
    if (vs.kind != "zero" && vs.kind != "gradient-blob")
        ck.fail(path + ".kind", "unknown vector field kind '" + vs.kind + "'");
    vs.amplitude = num(obj, path, "amplitude", 0.0, ck);
    vs.center = fixed_array<double, 3>(obj, path, "center", vs.center, ndim, ck);
    vs.width = num(obj, path, "width", 0.1, ck);
    return vs;
}

inline json field_spec_json(const FieldSpec& fs) {
    json j{{"kind", fs.kind}};
    if (fs.kind == "constant") j["value"] = fs.value;
    if (fs.kind == "gaussian-blob" || fs.kind == "random-fourier" || fs.kind == "sinusoid") {
        j["base"] = fs.base;
        j["amplitude"] = fs.amplitude;
    }
    if (fs.kind == "gaussian-blob") {
        j["center"] = fs.center;
        j["width"] = fs.width;
    }
    if (fs.kind == "sinusoid") {
        j["periods"] = fs.periods;
        j["phase"] = fs.phase;
    }
    if (fs.kind == "random-fourier") j["max_mode"] = fs.max_mode;
    return j;
}

inline json vector_field_spec_json(const VectorFieldSpec& vs) {
    json j{{"kind", vs.kind}};
    if (vs.kind == "gradient-blob") {
        j["amplitude"] = vs.amplitude;
        j["center"] = vs.center;
        j["width"] = vs.width;
    }
    return j;
}

}  // namespace cfgdetail

// Parses and validates UTF-8 JSON text. Throws validation_error whose
// message lists every schema violation found, with field paths.
inline RunConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw validation_error(std::string("config: JSON syntax error: ") + e.what());
    }
    std::vector<std::string> errs;
    cfgdetail::Check ck{&errs};
    RunConfig rc;

    if (!root.is_object()) throw validation_error("config: top level must be an object");
    cfgdetail::reject_unknown(root, "config",
                              {"grid", "media", "solver", "initial", "sources", "probes",
                               "output", "seed", "experiment", "sweep"},
                              ck);

    // grid
    int ndim = 2;
    if (!root.contains("grid") || !root["grid"].is_object()) {
        ck.fail("config.grid", "missing required object");
    } else {
        const json& g = root["grid"];
        cfgdetail::reject_unknown(g, "config.grid", {"dims", "spacing"}, ck);
        if (!g.contains("dims") || !g["dims"].is_array() || g["dims"].empty() ||
            g["dims"].size() > 3) {
            ck.fail("config.grid.dims", "expected an array of 1..3 integers");
        } else {
            for (const auto& v : g["dims"]) {
                if (!v.is_number_integer() || v.get<int>() < 2)
                    ck.fail("config.grid.dims", "extents must be integers >= 2");
                else
                    rc.grid_dims.push_back(v.get<int>());
            }
            ndim = static_cast<int>(rc.grid_dims.size());
        }
        if (!g.contains("spacing") || !g["spacing"].is_array() ||
            g["spacing"].size() != rc.grid_dims.size()) {
            ck.fail("config.grid.spacing", "expected an array matching dims");
        } else {
            for (const auto& v : g["spacing"]) {
                if (!v.is_number() || !(v.get<double>() > 0.0))
                    ck.fail("config.grid.spacing", "spacings must be positive numbers");
                else
                    rc.grid_spacing.push_back(v.get<double>());
            }
        }
    }

    // media
    if (!root.contains("media") || !root["media"].is_object()) {
        ck.fail("config.media", "missing required object");
    } else {
        const json& m = root["media"];
        cfgdetail::reject_unknown(m, "config.media", {"rho0", "c0sq", "b_over_a", "absorption"},
                                  ck);
        rc.rho0 = m.contains("rho0") ? cfgdetail::field_spec(m["rho0"], "config.media.rho0", ndim,
                                                             ck, false)
                                     : (ck.fail("config.media.rho0", "missing"), FieldSpec{});
        rc.c0sq = m.contains("c0sq") ? cfgdetail::field_spec(m["c0sq"], "config.media.c0sq", ndim,
                                                             ck, false)
                                     : (ck.fail("config.media.c0sq", "missing"), FieldSpec{});
        if (m.contains("b_over_a"))
            rc.b_over_a = cfgdetail::field_spec(m["b_over_a"], "config.media.b_over_a", ndim, ck,
                                                false);
        else
            rc.b_over_a.value = 0.0;
        if (m.contains("absorption")) {
            const json& ab = m["absorption"];
            const std::string path = "config.media.absorption";
            cfgdetail::reject_unknown(
                ab, path, {"kind", "alpha0_db_cm_mhzy", "alpha0_internal", "y", "tau", "eta",
                           "c0_ref"},
                ck);
            rc.absorption_kind = cfgdetail::str(ab, path, "kind", "none", ck);
            if (rc.absorption_kind != "none" && rc.absorption_kind != "modified-l" &&
                rc.absorption_kind != "original-ltilde")
                ck.fail(path + ".kind", "unknown absorption kind '" + rc.absorption_kind + "'");
            if (ab.contains("alpha0_db_cm_mhzy"))
                rc.alpha0_db = cfgdetail::num(ab, path, "alpha0_db_cm_mhzy", 0.0, ck);
            if (ab.contains("alpha0_internal"))
                rc.alpha0_internal = cfgdetail::num(ab, path, "alpha0_internal", 0.0, ck);
            if (rc.alpha0_db && rc.alpha0_internal)
                ck.fail(path, "give either alpha0_db_cm_mhzy or alpha0_internal, not both");
            rc.y = cfgdetail::num(ab, path, "y", 1.5, ck);
            if (!(rc.y > 1.0 && rc.y < 3.0)) ck.fail(path + ".y", "y out of (1,3)");
            if (ab.contains("tau")) {
                if (ab["tau"].is_number())
                    rc.tau = ab["tau"].get<double>();
                else if (!(ab["tau"].is_string() && ab["tau"] == "auto"))
                    ck.fail(path + ".tau", "expected a number or \"auto\"");
            }
            if (ab.contains("eta")) {
                if (ab["eta"].is_number())
                    rc.eta = ab["eta"].get<double>();
                else if (!(ab["eta"].is_string() && ab["eta"] == "auto"))
                    ck.fail(path + ".eta", "expected a number or \"auto\"");
            }
            if (ab.contains("c0_ref")) rc.c0_ref = cfgdetail::num(ab, path, "c0_ref", 0.0, ck);
        }
    }

    // solver
    if (!root.contains("solver") || !root["solver"].is_object()) {
        ck.fail("config.solver", "missing required object");
    } else {
        const json& s = root["solver"];
        const std::string path = "config.solver";
        cfgdetail::reject_unknown(s, path,
                                  {"mu", "dt", "t_end", "n_modes", "picard_tol",
                                   "picard_max_iters", "linear_mode", "cg_tol", "store_stride"},
                                  ck);
        rc.solver.mu = cfgdetail::num(s, path, "mu", 0.0, ck);
        rc.solver.dt = cfgdetail::num(s, path, "dt", 0.0, ck, true);
        rc.solver.t_end = cfgdetail::num(s, path, "t_end", 0.0, ck, true);
        rc.solver.n_modes = cfgdetail::integer(s, path, "n_modes", 0, ck, true);
        rc.solver.picard_tol = cfgdetail::num(s, path, "picard_tol", 1e-10, ck);
        rc.solver.picard_max_iters = cfgdetail::integer(s, path, "picard_max_iters", 50, ck);
        rc.solver.cg_tol = cfgdetail::num(s, path, "cg_tol", 1e-12, ck);
        rc.store_stride = cfgdetail::integer(s, path, "store_stride", 1, ck);
        if (s.contains("linear_mode")) {
            if (!s["linear_mode"].is_boolean())
                ck.fail(path + ".linear_mode", "expected a boolean");
            else
                rc.solver.linear_mode = s["linear_mode"].get<bool>();
        }
        if (!(rc.solver.dt > 0.0)) ck.fail(path + ".dt", "must be > 0");
        if (!(rc.solver.t_end >= rc.solver.dt)) ck.fail(path + ".t_end", "must be >= dt");
        if (rc.solver.n_modes < 1) ck.fail(path + ".n_modes", "must be >= 1");
        if (!(rc.solver.picard_tol > 0.0)) ck.fail(path + ".picard_tol", "must be > 0");
        if (!(rc.solver.cg_tol > 0.0)) ck.fail(path + ".cg_tol", "must be > 0");
        if (rc.solver.mu < 0.0) ck.fail(path + ".mu", "must be >= 0");
    }

    // initial
    if (root.contains("initial")) {
        const json& in = root["initial"];
        cfgdetail::reject_unknown(in, "config.initial", {"sigma0", "u0", "d0"}, ck);
        if (in.contains("sigma0"))
            rc.sigma0 = cfgdetail::field_spec(in["sigma0"], "config.initial.sigma0", ndim, ck,
                                              true);
        else
            rc.sigma0.kind = "zero";
        if (in.contains("u0"))
            rc.u0 = cfgdetail::vector_field_spec(in["u0"], "config.initial.u0", ndim, ck);
        if (in.contains("d0"))
            rc.d0 = cfgdetail::vector_field_spec(in["d0"], "config.initial.d0", ndim, ck);
    } else {
        rc.sigma0.kind = "zero";
    }

    // sources
    if (root.contains("sources")) {
        if (!root["sources"].is_array()) {
            ck.fail("config.sources", "expected an array");
        } else {
            int i = 0;
            for (const auto& s : root["sources"]) {
                const std::string path = "config.sources[" + std::to_string(i++) + "]";
                SourceSpec ss;
                if (!s.is_object()) {
                    ck.fail(path, "expected an object");
                    continue;
                }
                cfgdetail::reject_unknown(
                    s, path, {"kind", "position", "amplitude", "frequency", "dt", "values"}, ck);
                ss.kind = cfgdetail::str(s, path, "kind", "tone", ck);
                if (ss.kind != "tone" && ss.kind != "table")
                    ck.fail(path + ".kind", "unknown source kind '" + ss.kind + "'");
                ss.position = cfgdetail::fixed_array<double, 3>(s, path, "position", ss.position,
                                                                ndim, ck);
                ss.amplitude = cfgdetail::num(s, path, "amplitude", 0.0, ck, true);
                if (ss.kind == "tone")
                    ss.frequency = cfgdetail::num(s, path, "frequency", 0.0, ck, true);
                if (ss.kind == "table") {
                    ss.dt = cfgdetail::num(s, path, "dt", 0.0, ck, true);
                    if (!s.contains("values") || !s["values"].is_array() || s["values"].size() < 2)
                        ck.fail(path + ".values", "expected an array of at least 2 samples");
                    else
                        for (const auto& v : s["values"]) {
                            if (!v.is_number())
                                ck.fail(path + ".values", "expected numeric entries");
                            else
                                ss.values.push_back(v.get<double>());
                        }
                }
                rc.sources.push_back(std::move(ss));
            }
        }
    }

    // probes
    if (root.contains("probes")) {
        const json& p = root["probes"];
        cfgdetail::reject_unknown(p, "config.probes", {"positions", "stride"}, ck);
        if (p.contains("positions")) {
            if (!p["positions"].is_array()) {
                ck.fail("config.probes.positions", "expected an array of positions");
            } else {
                for (const auto& pos : p["positions"]) {
                    std::array<double, 3> xyz{0, 0, 0};
                    if (!pos.is_array() || static_cast<int>(pos.size()) != ndim) {
                        ck.fail("config.probes.positions", "each position needs " +
                                                               std::to_string(ndim) + " numbers");
                        continue;
                    }
                    for (std::size_t a = 0; a < pos.size(); ++a) xyz[a] = pos[a].get<double>();
                    rc.probe_positions.push_back(xyz);
                }
            }
        }
        rc.probe_stride = cfgdetail::integer(p, "config.probes", "stride", 1, ck);
        if (rc.probe_stride < 1) ck.fail("config.probes.stride", "must be >= 1");
    }

    // output, seed
    if (root.contains("output")) {
        cfgdetail::reject_unknown(root["output"], "config.output", {"directory"}, ck);
        rc.output_dir = cfgdetail::str(root["output"], "config.output", "directory", "out", ck);
    }
    if (root.contains("seed")) {
        if (!root["seed"].is_number_integer() || root["seed"].get<std::int64_t>() < 0)
            ck.fail("config.seed", "expected a nonnegative integer");
        else
            rc.seed = root["seed"].get<std::uint64_t>();
    }

    // experiment
    if (root.contains("experiment")) {
        const json& e = root["experiment"];
        const std::string path = "config.experiment";
        ExperimentSpec es;
        cfgdetail::reject_unknown(
            e, path,
            {"preset", "n_elements", "n_sources", "center", "radius", "frequency", "amplitude"},
            ck);
        es.preset = cfgdetail::str(e, path, "preset", "", ck);
        if (!es.preset.empty() && es.preset != "desk" && es.preset != "paper")
            ck.fail(path + ".preset", "unknown preset '" + es.preset + "'");
        es.n_elements = cfgdetail::integer(e, path, "n_elements", 8, ck);
        es.n_sources = cfgdetail::integer(e, path, "n_sources", 4, ck);
        es.center = cfgdetail::fixed_array<double, 3>(e, path, "center", es.center, ndim, ck);
        es.radius = cfgdetail::num(e, path, "radius", es.radius, ck);
        es.frequency = cfgdetail::num(e, path, "frequency", es.frequency, ck);
        es.amplitude = cfgdetail::num(e, path, "amplitude", es.amplitude, ck);
        rc.experiment = es;
    }

    // sweep
    if (root.contains("sweep")) {
        const json& sw = root["sweep"];
        cfgdetail::reject_unknown(sw, "config.sweep", {"mu_values"}, ck);
        std::vector<double> mus;
        if (!sw.contains("mu_values") || !sw["mu_values"].is_array()) {
            ck.fail("config.sweep.mu_values", "expected an array of viscosities");
        } else {
            for (const auto& v : sw["mu_values"]) {
                if (!v.is_number() || v.get<double>() < 0.0)
                    ck.fail("config.sweep.mu_values", "viscosities must be >= 0");
                else
                    mus.push_back(v.get<double>());
            }
        }
        rc.sweep_mu = mus;
    }

    if (!errs.empty()) {
        std::string msg = "config validation failed:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw validation_error(msg);
    }

    // canonical echo with defaults filled
    json c;
    c["grid"] = {{"dims", rc.grid_dims}, {"spacing", rc.grid_spacing}};
    c["media"]["rho0"] = cfgdetail::field_spec_json(rc.rho0);
    c["media"]["c0sq"] = cfgdetail::field_spec_json(rc.c0sq);
    c["media"]["b_over_a"] = cfgdetail::field_spec_json(rc.b_over_a);
    json ab{{"kind", rc.absorption_kind}, {"y", rc.y}};
    if (rc.alpha0_db) ab["alpha0_db_cm_mhzy"] = *rc.alpha0_db;
    if (rc.alpha0_internal) ab["alpha0_internal"] = *rc.alpha0_internal;
    ab["tau"] = rc.tau ? json(*rc.tau) : json("auto");
    ab["eta"] = rc.eta ? json(*rc.eta) : json("auto");
    if (rc.c0_ref) ab["c0_ref"] = *rc.c0_ref;
    c["media"]["absorption"] = ab;
    c["solver"] = {{"mu", rc.solver.mu},
                   {"dt", rc.solver.dt},
                   {"t_end", rc.solver.t_end},
                   {"n_modes", rc.solver.n_modes},
                   {"picard_tol", rc.solver.picard_tol},
                   {"picard_max_iters", rc.solver.picard_max_iters},
                   {"linear_mode", rc.solver.linear_mode},
                   {"cg_tol", rc.solver.cg_tol},
                   {"store_stride", rc.store_stride}};
    c["initial"] = {{"sigma0", cfgdetail::field_spec_json(rc.sigma0)},
                    {"u0", cfgdetail::vector_field_spec_json(rc.u0)},
                    {"d0", cfgdetail::vector_field_spec_json(rc.d0)}};
    c["sources"] = json::array();
    for (const auto& s : rc.sources) {
        json js{{"kind", s.kind}, {"position", s.position}, {"amplitude", s.amplitude}};
        if (s.kind == "tone") js["frequency"] = s.frequency;
        if (s.kind == "table") {
            js["dt"] = s.dt;
            js["values"] = s.values;
        }
        c["sources"].push_back(js);
    }
    c["probes"] = {{"positions", rc.probe_positions}, {"stride", rc.probe_stride}};
    c["output"] = {{"directory", rc.output_dir}};
    c["seed"] = rc.seed;
    if (rc.experiment) {
        const auto& es = *rc.experiment;
        c["experiment"] = {{"preset", es.preset},     {"n_elements", es.n_elements},
                           {"n_sources", es.n_sources}, {"center", es.center},
                           {"radius", es.radius},     {"frequency", es.frequency},
                           {"amplitude", es.amplitude}};
    }
    if (rc.sweep_mu) c["sweep"] = {{"mu_values", *rc.sweep_mu}};
    rc.canonical = std::move(c);
    return rc;
}

// Non-throwing validation: returns the violation list (empty = valid).
inline std::vector<std::string> validate_config_text(const std::string& text) {
    try {
        parse_config(text);
        return {};
    } catch (const validation_error& e) {
        std::vector<std::string> out;
        std::string msg = e.what();
        std::size_t pos = 0;
        while ((pos = msg.find("\n  - ", pos)) != std::string::npos) {
            pos += 5;
            const std::size_t end = msg.find('\n', pos);
            out.push_back(msg.substr(pos, end == std::string::npos ? end : end - pos));
        }
        if (out.empty()) out.push_back(msg);
        return out;
    }
}

// -- builders --------------------------------------------------------------

inline Grid make_grid(const RunConfig& rc) { return Grid(rc.grid_dims, rc.grid_spacing); }

inline Vec make_field(const FieldSpec& fs, const Grid& g, std::uint64_t seed) {
    if (fs.kind == "zero") return Vec::Zero(g.cells());
    if (fs.kind == "constant") return phantom_constant(g, fs.value);
    if (fs.kind == "gaussian-blob")
        return phantom_gaussian_blob(g, fs.base, fs.amplitude, fs.center, fs.width);
    if (fs.kind == "sinusoid")
        return phantom_sinusoid(g, fs.base, fs.amplitude, fs.periods, fs.phase);
    if (fs.kind == "random-fourier")
        return phantom_random_fourier(g, fs.base, fs.amplitude, fs.max_mode, seed);
    throw validation_error("make_field: unknown kind '" + fs.kind + "'");
}

inline FaceField make_vector_field(const VectorFieldSpec& vs, const Grid& g) {
    if (vs.kind == "zero") return FaceField(g);
    Vec blob = phantom_gaussian_blob(g, 0.0, vs.amplitude, vs.center, vs.width);
    return grad(g, blob);
}

inline MediumFields make_media(const RunConfig& rc, const Grid& g) {
    MediumFields m;
    m.rho0 = make_field(rc.rho0, g, rc.seed);
    m.c0sq = make_field(rc.c0sq, g, rc.seed + 1);
    m.b_over_a = make_field(rc.b_over_a, g, rc.seed + 2);
    m.y = rc.y;
    if (rc.absorption_kind == "modified-l")
        m.absorption = AbsorptionKind::ModifiedL;
    else if (rc.absorption_kind == "original-ltilde")
        m.absorption = AbsorptionKind::OriginalLtilde;
    else
        m.absorption = AbsorptionKind::None;
    m.alpha0 = rc.alpha0_internal ? *rc.alpha0_internal
                                  : (rc.alpha0_db ? db_to_internal_alpha(*rc.alpha0_db, rc.y) : 0.0);
    const double c0_ref = rc.c0_ref ? *rc.c0_ref : std::sqrt(m.c0sq.maxCoeff());
    if (rc.tau && rc.eta) {
        m.tau = *rc.tau;
        m.eta = *rc.eta;
    } else {
        auto [tau, eta] = default_tau_eta(c0_ref, m.y, m.alpha0, &m.notes);
        m.tau = rc.tau.value_or(tau);
        m.eta = rc.eta.value_or(eta);
    }
    m.refresh_flags();
    return m;
}

inline std::int64_t position_to_cell(const Grid& g, const std::array<double, 3>& pos) {
    int idx[3] = {0, 0, 0};
    for (int a = 0; a < g.ndim; ++a) {
        if (pos[a] < 0.0 || pos[a] > g.length(a))
            throw validation_error("position outside the domain on axis " + std::to_string(a));
        idx[a] = std::clamp(static_cast<int>(pos[a] / g.spacing[a]), 0, g.dims[a] - 1);
    }
    return g.cell_index(idx[0], idx[1], idx[2]);
}

inline SourceTerm make_sources(const RunConfig& rc, const Grid& g) {
    if (rc.sources.empty()) return SourceTerm::zero();
    // All configured sources must share the waveform kind; tones may combine
    // only at a common frequency, otherwise use tables.
    const auto& first = rc.sources.front();
    std::vector<SourceTerm::MaskPoint> pts;
    for (const auto& s : rc.sources) {
        if (s.kind != first.kind)
            throw validation_error("sources: mixed source kinds are not supported");
        pts.push_back({position_to_cell(g, s.position), s.amplitude});
    }
    if (first.kind == "tone") {
        for (const auto& s : rc.sources)
            if (s.frequency != first.frequency)
                throw validation_error(
                    "sources: tone sources must share one frequency; use tables otherwise");
        return SourceTerm::tone(std::move(pts), first.frequency);
    }
    for (const auto& s : rc.sources)
        if (s.dt != first.dt || s.values != first.values)
            throw validation_error("sources: table sources must share one table");
    return SourceTerm::tabulated(std::move(pts), first.values, first.dt);
}

inline InitialData make_initial(const RunConfig& rc, const Grid& g) {
    InitialData init;
    if (rc.sigma0.kind != "zero") {
        init.sigma0 = make_field(rc.sigma0, g, rc.seed + 3);
        init.sigma0.array() -= init.sigma0.mean();  // density data are zero-mean by compatibility
    }
    init.u0 = make_vector_field(rc.u0, g);
    init.d0 = make_vector_field(rc.d0, g);
    return init;
}

inline ProbeSet make_probes(const RunConfig& rc, const Grid& g) {
    ProbeSet ps;
    ps.stride = rc.probe_stride;
    for (const auto& pos : rc.probe_positions) ps.cells.push_back(position_to_cell(g, pos));
    return ps;
}

}  // namespace kwk
