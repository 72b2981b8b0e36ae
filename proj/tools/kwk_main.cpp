// kwk command-line front end.
//
//   kwk simulate <config>          run one simulation, write trajectory + energy report
//   kwk experiment ring <config>   ring-array experiment, linear + nonlinear regimes
//   kwk sweep viscosity <config>   vanishing-viscosity sweep
//   kwk check invariants <config>  diagnostics suite (sandwich, projection
//                                  stability, superposition, identity refinement)
//   kwk convert alpha --db V --y Y absorption unit conversion
//
// Exit codes: 0 success, 1 validation error, 2 numerical failure.

#include <chrono>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "kwk/config.hpp"
#include "kwk/diagnostics.hpp"
#include "kwk/experiments.hpp"
#include "kwk/io.hpp"

namespace {

using namespace kwk;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t media_hash(const MediumFields& m) {
    std::uint64_t h = hash_field(m.rho0);
    h = hash_field(m.c0sq, h);
    h = hash_field(m.b_over_a, h);
    const double scalars[4] = {m.alpha0, m.y, m.tau, m.eta};
    return fnv1a64(scalars, sizeof(scalars), h);
}

void write_metadata(const std::string& dir, const RunConfig& rc, const MediumFields& m,
                    const json& extra = json::object()) {
    json meta = extra;
    meta["config_hash"] = fnv1a64(rc.canonical.dump());
    meta["media_hash"] = media_hash(m);
    meta["wall_clock_unix_s"] =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    for (const auto& note : m.notes) meta["media_notes"].push_back(note);
    std::ofstream out(dir + "/metadata.json");
    out << meta.dump(2) << "\n";
}

void write_energy_csv(const std::string& path, const EnergyReport& rep) {
    CsvWriter csv(path, {"t_s", "E", "D", "L_monitor", "residual", "rhs1", "rhs2"});
    for (std::size_t k = 0; k < rep.t.size(); ++k)
        csv.row({rep.t[k], rep.energy[k], rep.dissipation[k], rep.l_monitor[k], rep.residual[k],
                 rep.rhs1[k], rep.rhs2[k]});
}

void write_traces_csv(const std::string& path, const DataMatrix& dm, double dt, int stride) {
    std::vector<std::string> header{"label"};
    for (int j = 0; j < dm.rows.cols(); ++j)
        header.push_back("p_Pa_t" + format_double(j * dt * stride));
    CsvWriter csv(path, header);
    std::vector<double> rowbuf(dm.rows.cols());
    for (int i = 0; i < dm.rows.rows(); ++i) {
        Eigen::VectorXd r = dm.rows.row(i);
        csv.labeled_row(dm.labels[i], r.data(), r.size());
    }
}

void write_spectrum_csv(const std::string& path, const Vec& normalized, const Vec& raw) {
    CsvWriter csv(path, {"index", "sigma", "sigma_over_sigma1"});
    for (int i = 0; i < normalized.size(); ++i)
        csv.row({static_cast<double>(i + 1), raw[i], normalized[i]});
}

int cmd_simulate(const std::string& cfg_path, bool json_out) {
    RunConfig rc = parse_config(read_file(cfg_path));
    Grid g = make_grid(rc);
    MediumFields m = make_media(rc, g);
    SourceTerm src = make_sources(rc, g);
    Problem pb(g, m, rc.solver.n_modes, std::move(src));
    InitialData init = make_initial(rc, g);
    ProbeSet probes = make_probes(rc, g);

    Trajectory tr = run(pb, rc.solver, init, probes, rc.store_stride);
    EnergyReport rep = energy_dissipation(pb, tr, rc.solver);
    MediaValidityReport mv = validate_media(m, g, m.y);

    ensure_dir(rc.output_dir);
    {
        std::vector<std::string> header{"t_s"};
        for (std::size_t j = 0; j < probes.cells.size(); ++j)
            header.push_back("p_probe" + std::to_string(j) + "_Pa");
        CsvWriter csv(rc.output_dir + "/probes.csv", header);
        for (std::size_t k = 0; k < tr.probe_times.size(); ++k) {
            std::vector<double> row{tr.probe_times[k]};
            for (int j = 0; j < tr.probe_p.rows(); ++j)
                row.push_back(tr.probe_p(j, static_cast<int>(k)));
            csv.row(row);
        }
    }
    write_energy_csv(rc.output_dir + "/energy.csv", rep);
    if (!tr.samples.empty()) {
        const auto& last = tr.samples.back();
        write_field_snapshot(rc.output_dir + "/sigma_final", g,
                             pb.bases.weighted.reconstruct(last.sigma_modal), "sigma", last.t);
        write_field_snapshot(rc.output_dir + "/p_final", g,
                             pb.bases.weighted.reconstruct(last.p_modal), "p_Pa", last.t);
    }
    {
        std::ofstream echo(rc.output_dir + "/config_echo.json");
        echo << rc.canonical.dump(2) << "\n";
    }
    json summary{{"steps", tr.steps},
                 {"halved_steps", tr.halved_steps},
                 {"min_a", tr.min_a},
                 {"min_b", tr.min_b},
                 {"sup_energy", rep.sup_energy},
                 {"sup_L", rep.sup_l},
                 {"integrated_abs_residual", rep.integrated_abs_residual},
                 {"delta_rc", mv.delta_rc},
                 {"y_analysis_window", mv.y_in_analysis_window},
                 {"y_inviscid_window", mv.y_in_inviscid_window}};
    if (rep.first_l_violation) summary["first_L_violation_s"] = *rep.first_l_violation;
    write_metadata(rc.output_dir, rc, m, {{"command", "simulate"}});
    if (json_out)
        std::cout << summary.dump(2) << "\n";
    else {
        std::cout << "simulate: " << tr.steps << " steps, sup E = " << rep.sup_energy
                  << ", sup L = " << rep.sup_l << ", outputs in " << rc.output_dir << "\n";
        for (const auto& note : m.notes) std::cerr << "note: " << note << "\n";
        for (const auto& note : mv.notes) std::cerr << "note: " << note << "\n";
    }
    return 0;
}

int cmd_experiment_ring(const std::string& cfg_path, bool json_out) {
    RunConfig rc = parse_config(read_file(cfg_path));
    if (!rc.experiment)
        throw validation_error("experiment ring: config has no experiment block");
    Grid g = make_grid(rc);
    MediumFields m = make_media(rc, g);
    const auto& es = *rc.experiment;

    RingParams rp;
    rp.center = es.center;
    rp.radius = es.radius;
    rp.n_elements = es.n_elements;
    rp.n_sources = es.n_sources;
    rp.tone_hz = es.frequency;
    rp.amplitude = es.amplitude;
    std::vector<std::string> warnings;
    RunPlan plan = build_ring_experiment(g, m, rp, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

    Problem pb(g, m, rc.solver.n_modes);
    ensure_dir(rc.output_dir);

    json summary{{"command", "experiment ring"},
                 {"runs", plan.runs.size()},
                 {"traces", plan.total_traces}};
    for (const bool linear : {true, false}) {
        SolverConfig sc = rc.solver;
        sc.linear_mode = linear;
        DataMatrix dm = run_experiment(pb, sc, plan);
        Vec spec_norm = svd_spectrum(dm.rows);
        Eigen::BDCSVD<Mat> svd(dm.rows);
        Vec raw = svd.singularValues();

        const std::string dir = rc.output_dir + (linear ? "/linear" : "/nonlinear");
        ensure_dir(dir);
        write_traces_csv(dir + "/traces.csv", dm, sc.dt, rc.probe_stride);
        write_spectrum_csv(dir + "/singular_values.csv", spec_norm, raw);

        const int idx = std::min<int>(28, static_cast<int>(spec_norm.size()) - 1);
        summary[linear ? "linear" : "nonlinear"] = {
            {"sigma29_over_sigma1", spec_norm[idx]},
            {"rows", dm.rows.rows()},
            {"cols", dm.rows.cols()}};
    }
    const double lin = summary["linear"]["sigma29_over_sigma1"].get<double>();
    const double non = summary["nonlinear"]["sigma29_over_sigma1"].get<double>();
    summary["cliff_ratio"] = non / std::max(lin, 1e-300);
    write_metadata(rc.output_dir, rc, m, summary);
    if (json_out)
        std::cout << summary.dump(2) << "\n";
    else
        std::cout << "experiment ring: " << plan.total_traces
                  << " traces; sigma29/sigma1 linear = " << lin << ", nonlinear = " << non
                  << ", outputs in " << rc.output_dir << "\n";
    return 0;
}

int cmd_sweep_viscosity(const std::string& cfg_path, bool json_out) {
    RunConfig rc = parse_config(read_file(cfg_path));
    if (!rc.sweep_mu) throw validation_error("sweep viscosity: config has no sweep block");
    Grid g = make_grid(rc);
    MediumFields m = make_media(rc, g);
    Problem pb(g, m, rc.solver.n_modes, make_sources(rc, g));
    InitialData init = make_initial(rc, g);

    SweepReport rep = viscosity_sweep(pb, rc.solver, init, *rc.sweep_mu);

    ensure_dir(rc.output_dir);
    {
        CsvWriter csv(rc.output_dir + "/sweep_report.csv",
                      {"mu_Pa_s", "dist_to_next", "dist_to_mu0", "sup_energy"});
        for (const auto& e : rep.entries)
            csv.row({e.mu, e.dist_to_next, e.dist_to_inviscid, e.sup_energy});
    }
    json summary{{"command", "sweep viscosity"},
                 {"distances_decreasing", rep.distances_decreasing},
                 {"energy_spread", rep.energy_spread}};
    write_metadata(rc.output_dir, rc, m, summary);
    if (json_out)
        std::cout << summary.dump(2) << "\n";
    else
        std::cout << "sweep viscosity: distances "
                  << (rep.distances_decreasing ? "decreasing" : "NOT decreasing")
                  << ", energy spread " << rep.energy_spread << ", outputs in " << rc.output_dir
                  << "\n";
    return 0;
}

struct CheckResult {
    std::string name;
    bool pass;
    std::string detail;
};

int cmd_check_invariants(const std::string& cfg_path, bool json_out) {
    RunConfig rc = parse_config(read_file(cfg_path));
    Grid g = make_grid(rc);
    MediumFields m = make_media(rc, g);
    std::vector<CheckResult> results;

    // 1. eigenvalue sandwich on a dense-solvable grid
    {
        std::vector<int> dims;
        std::vector<double> sp;
        for (int a = 0; a < g.ndim; ++a) {
            dims.push_back(std::min(g.dims[a], 16));
            sp.push_back(g.length(a) / dims.back());
        }
        Grid gs(dims, sp);
        Vec rho = m.rho0_constant
                      ? phantom_random_fourier(gs, mean_value(m.rho0), 0.2 * mean_value(m.rho0), 3,
                                               rc.seed)
                      : make_field(rc.rho0, gs, rc.seed);
        SandwichResult sr = check_eigen_sandwich(gs, rho, std::min<int>(50, gs.cells() - 2));
        std::ostringstream os;
        os << "ratios in [" << sr.lower << ", " << sr.upper << "]";
        if (!sr.passed) os << ", first violation at k=" << sr.first_violation;
        results.push_back({"eigenvalue-sandwich", sr.passed, os.str()});
    }

    // 2. Ritz projection stability, 20 random inputs
    {
        std::vector<int> dims;
        std::vector<double> sp;
        for (int a = 0; a < g.ndim; ++a) {
            dims.push_back(std::min(g.dims[a], 14));
            sp.push_back(g.length(a) / dims.back());
        }
        Grid gs(dims, sp);
        Vec rho = m.rho0_constant
                      ? phantom_random_fourier(gs, mean_value(m.rho0), 0.15 * mean_value(m.rho0),
                                               2, rc.seed + 11)
                      : make_field(rc.rho0, gs, rc.seed);
        const auto n = static_cast<int>(gs.cells() - 1);
        BasisPair bp = make_basis_pair(gs, rho, n);
        const double rmax = rho.maxCoeff(), rmin = rho.minCoeff();
        const double cprod = rmax / rmin;  // ||rho0||_inf * ||1/rho0||_inf
        const double y = m.y;
        std::mt19937_64 rng(rc.seed + 17);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        bool ok = true;
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            Vec gg(gs.cells());
            for (auto i = 0; i < gg.size(); ++i) gg[i] = unif(rng);
            gg.array() -= gg.mean();
            Vec pg = bp.weighted.reconstruct(ritz_project(bp.weighted, gg));
            const double r1 =
                norm_faces(gs, grad(gs, pg)) / std::max(norm_faces(gs, grad(gs, gg)), 1e-300);
            double ratios[3] = {r1 / std::sqrt(cprod), 0.0, 0.0};
            int q = 1;
            for (double gam : {y / 4.0, (y + 1.0) / 4.0}) {
                const double num = norm_cells(gs, frac_apply(bp.neumann, gam, pg));
                const double den = std::max(norm_cells(gs, frac_apply(bp.neumann, gam, gg)), 1e-300);
                ratios[q++] = (num / den) / std::pow(cprod, gam);
            }
            for (double r : ratios) {
                worst = std::max(worst, r);
                if (r > 1.0 + 1e-9) ok = false;
            }
        }
        std::ostringstream os;
        os << "worst ratio/bound = " << worst;
        results.push_back({"ritz-projection-stability", ok, os.str()});
    }

    // 3. superposition in linear mode (and nonlinear deviation when enabled)
    {
        SolverConfig sc = rc.solver;
        sc.t_end = std::min(sc.t_end, 60 * sc.dt);
        sc.linear_mode = true;
        const std::int64_t steps = sc.steps();
        ProbeSet probes;
        probes.cells = {g.cell_index(g.dims[0] / 3, g.dims[1] / 2),
                        g.cell_index(2 * g.dims[0] / 3, g.dims[1] / 3)};
        (void)steps;
        const double amp = 0.01 * mean_value(Vec(m.c0sq.array() * m.rho0.array()));
        SourceTerm sa = SourceTerm::tone({{g.cell_index(g.dims[0] / 4, g.dims[1] / 4), amp}},
                                         1.0 / (16 * sc.dt));
        SourceTerm sb = SourceTerm::tone({{g.cell_index(3 * g.dims[0] / 4, g.dims[1] / 2), amp}},
                                         1.0 / (16 * sc.dt));
        SourceTerm sab = SourceTerm::tone({{g.cell_index(g.dims[0] / 4, g.dims[1] / 4), amp},
                                           {g.cell_index(3 * g.dims[0] / 4, g.dims[1] / 2), amp}},
                                          1.0 / (16 * sc.dt));
        Problem base(g, m, sc.n_modes);
        Mat pa = run(Problem(base, sa), sc, InitialData{}, probes, 0).probe_p;
        Mat pb_ = run(Problem(base, sb), sc, InitialData{}, probes, 0).probe_p;
        Mat pab = run(Problem(base, sab), sc, InitialData{}, probes, 0).probe_p;
        const double rel = (pab - pa - pb_).norm() / std::max(pab.norm(), 1e-300);
        const bool ok = rel <= 1e-8;
        std::ostringstream os;
        os << "linear-mode relative deviation = " << rel;
        results.push_back({"superposition", ok, os.str()});
    }

    // 4. energy-identity residual refinement (3 halvings)
    {
        SolverConfig sc = rc.solver;
        sc.t_end = std::min(sc.t_end, 40 * sc.dt);
        InitialData init = make_initial(rc, g);
        if (!init.sigma0.size()) {
            init.sigma0 = phantom_gaussian_blob(
                g, 0.0, 0.01, {0.4 * g.length(0), 0.5 * g.length(1), 0.0}, 0.15 * g.length(0));
            init.sigma0.array() -= init.sigma0.mean();
        }
        Problem pb(g, m, rc.solver.n_modes, make_sources(rc, g));
        std::vector<double> resids;
        for (int r = 0; r < 3; ++r) {
            Trajectory tr = run(pb, sc, init, ProbeSet{}, 1);
            resids.push_back(energy_dissipation(pb, tr, sc).integrated_abs_residual);
            sc.dt *= 0.5;
        }
        bool ok = true;
        std::ostringstream os;
        os << "ratios:";
        for (std::size_t i = 0; i + 1 < resids.size(); ++i) {
            const double ratio = resids[i] / std::max(resids[i + 1], 1e-300);
            os << " " << ratio;
            if (ratio < 1.5 || ratio > 2.7) ok = false;
        }
        results.push_back({"identity-residual-refinement", ok, os.str()});
    }

    bool all = true;
    json jres = json::array();
    for (const auto& r : results) {
        all = all && r.pass;
        jres.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
        if (!json_out)
            std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.detail
                      << ")\n";
    }
    if (json_out)
        std::cout << json{{"command", "check invariants"}, {"all_pass", all}, {"checks", jres}}
                         .dump(2)
                  << "\n";
    return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kwk: spectral Galerkin simulator for first-order nonlinear acoustics "
                 "with power-law absorption"};
    app.require_subcommand(1);
    bool json_out = false;
    app.add_flag("--json", json_out, "machine-readable JSON summary on stdout");

    std::string cfg;
    auto* sim = app.add_subcommand("simulate", "run one simulation from a config file");
    sim->add_option("config", cfg, "JSON config path")->required();

    auto* exp = app.add_subcommand("experiment", "stacked-measurement experiments");
    exp->require_subcommand(1);
    auto* ring = exp->add_subcommand("ring", "ring-array singles vs pairs, linear and nonlinear");
    ring->add_option("config", cfg, "JSON config path")->required();

    auto* swp = app.add_subcommand("sweep", "parameter sweeps");
    swp->require_subcommand(1);
    auto* visc = swp->add_subcommand("viscosity", "vanishing-viscosity sweep");
    visc->add_option("config", cfg, "JSON config path")->required();

    auto* chk = app.add_subcommand("check", "self-checks");
    chk->require_subcommand(1);
    auto* inv = chk->add_subcommand("invariants", "run the diagnostics suite");
    inv->add_option("config", cfg, "JSON config path")->required();

    auto* cnv = app.add_subcommand("convert", "unit conversions");
    cnv->require_subcommand(1);
    auto* alpha = cnv->add_subcommand("alpha", "dB/cm/MHz^y -> internal Np (rad/s)^-y / m");
    double alpha_db = 0.0, yval = 1.5;
    alpha->add_option("--db", alpha_db, "absorption in dB/cm/MHz^y")->required();
    alpha->add_option("--y", yval, "power-law exponent")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) return cmd_simulate(cfg, json_out);
        if (*ring) return cmd_experiment_ring(cfg, json_out);
        if (*visc) return cmd_sweep_viscosity(cfg, json_out);
        if (*inv) return cmd_check_invariants(cfg, json_out);
        if (*alpha) {
            const double v = kwk::db_to_internal_alpha(alpha_db, yval);
            if (json_out)
                std::cout << kwk::json{{"alpha0_internal", v}}.dump() << "\n";
            else
                std::cout << kwk::format_double(v) << "\n";
            return 0;
        }
    } catch (const kwk::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const kwk::numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
