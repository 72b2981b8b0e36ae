#pragma once

// Time integration of the semi-discrete Galerkin system. Each step is
// backward Euler: an implicit velocity substep (conjugate gradients in the
// rho0-weighted inner product), then a Picard fixed point for the coupled
// (sigma, p) modal update in which sigma_t enters the absorption operator as
// the backward difference quotient. Velocity lives on grid faces; sigma and
// p live in the weighted eigenbasis; the coupling projects through (., w_i)
// inner products every step.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kwk/physics.hpp"

namespace kwk {

struct SolverConfig {
    double mu = 0.0;      // viscosity, >= 0
    double dt = 0.0;      // s
    double t_end = 0.0;   // s
    int n_modes = 0;      // Galerkin dimension
    double picard_tol = 1e-10;
    int picard_max_iters = 50;
    bool linear_mode = false;  // freeze a = b = 1 for superposition experiments
    double cg_tol = 1e-12;

    void validate() const {
        if (!(dt > 0.0)) throw validation_error("solver: dt must be > 0");
        if (!(t_end >= dt)) throw validation_error("solver: t_end must be >= dt");
        if (n_modes < 1) throw validation_error("solver: n_modes must be >= 1");
        if (!(picard_tol > 0.0) || !(cg_tol > 0.0))
            throw validation_error("solver: tolerances must be > 0");
        if (mu < 0.0) throw validation_error("solver: mu must be >= 0");
    }

    std::int64_t steps() const {
        const auto k = static_cast<std::int64_t>(std::llround(t_end / dt));
        if (k < 1 || std::abs(k * dt - t_end) > 1e-9 * std::max(t_end, dt))
            throw validation_error("solver: t_end must be an integer multiple of dt");
        return k;
    }
};

// Immutable per-run context; safe to share across concurrent simulations.
struct Problem {
    Grid grid;
    MediumFields media;
    BasisPair bases;
    MediaGradients mgrad;
    SourceTerm source;

    Vec c2rho;  // c0^2 * rho0, cached
    bool c2rho_constant = false;
    FaceField inv_rho_faces;  // 1/rho0 at faces (matches the weighted operator)
    FaceField rho_faces;

    Problem(Grid g, MediumFields m, int n_modes, SourceTerm src = SourceTerm::zero())
        : grid(std::move(g)), media(std::move(m)), source(std::move(src)) {
        media.validate(grid);
        media.refresh_flags();
        bases = make_basis_pair(grid, media.rho0, n_modes);
        mgrad = MediaGradients(grid, media);
        finish_setup();
    }

    // Same grid/media/bases, different source; avoids re-running eigensolves.
    Problem(const Problem& base, SourceTerm src)
        : grid(base.grid), media(base.media), bases(base.bases), mgrad(base.mgrad),
          source(std::move(src)) {
        finish_setup();
    }

private:
    void finish_setup() {
        c2rho = media.c0sq.array() * media.rho0.array();
        c2rho_constant = MediumFields::is_constant(c2rho);
        inv_rho_faces = cell_to_face(grid, Vec(media.rho0.cwiseInverse()));
        rho_faces = FaceField(grid);
        for (int a = 0; a < grid.ndim; ++a)
            rho_faces.c[a] = inv_rho_faces.c[a].cwiseInverse();
    }
};

struct SimState {
    FaceField u;      // m/s
    Vec sigma_modal;  // dimensionless
    Vec p_modal;      // Pa
    FaceField iu;     // running time integral of u, m
    FaceField d0;     // initial displacement, enters h through iu + d0
    double t = 0.0;
};

struct InitialData {
    FaceField u0;
    FaceField d0;
    Vec sigma0;
};

struct ProbeSet {
    std::vector<std::int64_t> cells;
    int stride = 1;
};

struct TrajectorySample {
    double t;
    Vec sigma_modal;
    Vec p_modal;
    FaceField u;
    FaceField iu;
};

struct Trajectory {
    Grid grid;
    double dt = 0.0;
    std::int64_t steps = 0;
    int store_stride = 1;
    int probe_stride = 1;
    std::vector<TrajectorySample> samples;
    FaceField d0;  // constant over the run; needed to rebuild h
    std::vector<std::int64_t> probe_cells;
    std::vector<double> probe_times;
    Mat probe_p;  // one row per probe, one column per recorded time
    double min_a = 1.0, min_b = 1.0;
    int halved_steps = 0;
    std::uint64_t config_hash = 0, media_hash = 0;
};

// Picard non-convergence; run() retries the step once at dt/2.
class step_failure : public numerical_error {
public:
    step_failure(const std::string& msg, double residual)
        : numerical_error(msg), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

namespace detail {

inline double rel_change(const Vec& a, const Vec& b) {
    const double denom = std::max({a.norm(), b.norm(), 1e-300});
    return (a - b).norm() / denom;
}

}  // namespace detail

inline SimState init_state(const Problem& pb, const SolverConfig& sc, const InitialData& init) {
    const Grid& g = pb.grid;
    SimState st;
    st.u = init.u0.c[0].size() ? init.u0 : FaceField(g);
    st.iu = FaceField(g);
    st.d0 = init.d0.c[0].size() ? init.d0 : FaceField(g);
    st.t = 0.0;

    Vec sigma0 = init.sigma0.size() ? init.sigma0 : Vec(Vec::Zero(g.cells()));
    if (sigma0.size() != g.cells())
        throw validation_error("init_state: sigma0 size does not match the grid");
    sigma0 = kwk::detail::remove_mean_checked(sigma0, "init_state(sigma0)");
    st.sigma_modal = pb.bases.weighted.project(sigma0);

    // p(0) from the pressure-density relation, with sigma_t(0) supplied by
    // the mass equation at t = 0.
    Vec sig_rec = pb.bases.weighted.reconstruct(st.sigma_modal);
    Vec du = div(g, st.u);
    Vec a_field = sc.linear_mode ? Vec(Vec::Ones(g.cells())) : a_of(sig_rec);
    Vec rhs = (a_field.array() * du.array()).matrix();
    Vec xi_t0 = -pb.bases.weighted.project(rhs);
    if (!pb.mgrad.trivial)
        xi_t0 += pb.bases.weighted.project(g_of(g, st.u, pb.mgrad));

    Vec ell = apply_absorption(pb.media.absorption, st.sigma_modal, xi_t0, pb.media, pb.bases);
    Vec b_field = sc.linear_mode ? Vec(Vec::Ones(g.cells())) : b_of(sig_rec, pb.media.b_over_a);
    Vec pgrid = (pb.c2rho.array() * b_field.array() * sig_rec.array()).matrix();
    st.p_modal = pb.bases.weighted.project(pgrid) - ell;
    if (!pb.mgrad.trivial) {
        Vec h0 = h_of(g, st.iu, st.d0, pb.media, pb.mgrad);
        st.p_modal += pb.bases.weighted.project(h0);
    }
    return st;
}

// Backward-Euler velocity update. Solves
//   (I - mu dt (1/rho0) grad div) u_new = u + dt (1/rho0)(f - grad p)
// by conjugate gradients in the rho0-weighted inner product; mu = 0
// short-circuits to the explicit update.
inline FaceField velocity_substep(const Problem& pb, const SolverConfig& sc, const FaceField& u,
                                  const Vec& p_modal, double t_new, double dt) {
    const Grid& g = pb.grid;
    Vec pgrid = pb.bases.weighted.reconstruct(p_modal);
    FaceField gp = grad(g, pgrid);

    FaceField rhs = u;
    FaceField f(g);
    if (!pb.source.is_zero()) pb.source.eval(t_new, g, f);
    for (int a = 0; a < g.ndim; ++a)
        rhs.c[a] += dt * pb.inv_rho_faces.c[a].cwiseProduct(f.c[a] - gp.c[a]);

    if (sc.mu == 0.0) return rhs;

    const double mudt = sc.mu * dt;
    auto apply_op = [&](const FaceField& x) {
        Vec dx = div(g, x);
        FaceField gdx = grad(g, dx);
        FaceField out = x;
        for (int a = 0; a < g.ndim; ++a)
            out.c[a] -= mudt * pb.inv_rho_faces.c[a].cwiseProduct(gdx.c[a]);
        return out;
    };
    auto ip = [&](const FaceField& x, const FaceField& z) {
        double s = 0.0;
        for (int a = 0; a < g.ndim; ++a)
            s += (pb.rho_faces.c[a].array() * x.c[a].array() * z.c[a].array()).sum();
        return g.cell_volume() * s;
    };

    FaceField x = u;  // warm start
    FaceField r = rhs;
    r -= apply_op(x);
    FaceField p = r;
    double rs = ip(r, r);
    const double target = sc.cg_tol * sc.cg_tol * std::max(ip(rhs, rhs), 1e-300);
    std::int64_t nfaces = 0;
    for (int a = 0; a < g.ndim; ++a) nfaces += g.faces(a);
    const auto max_iters =
        static_cast<std::int64_t>(10.0 * std::sqrt(static_cast<double>(nfaces))) + 10;
    std::int64_t it = 0;
    while (rs > target) {
        if (++it > max_iters)
            throw numerical_error("velocity_substep: CG failed to reach tolerance, residual " +
                                  std::to_string(std::sqrt(rs)));
        FaceField ap = apply_op(p);
        const double alpha = rs / ip(p, ap);
        for (int a = 0; a < g.ndim; ++a) {
            x.c[a] += alpha * p.c[a];
            r.c[a] -= alpha * ap.c[a];
        }
        const double rs_new = ip(r, r);
        const double beta = rs_new / rs;
        for (int a = 0; a < g.ndim; ++a) p.c[a] = r.c[a] + beta * p.c[a];
        rs = rs_new;
    }
    return x;
}

// Picard iteration for the coupled (sigma, p) update given the new velocity:
//   sigma step: sigma_new = sigma_old - dt Proj[a(sigma*) div u - g(u)]
//   p step:     p = Proj[c0^2 rho0 b(sigma*) sigma_new] - L sigma_new + Proj[h(u)]
// with sigma_t inside L taken as (sigma_new - sigma_old)/dt. In linear mode
// the map is affine and converges immediately.
inline std::pair<Vec, Vec> sigma_pressure_substep(const Problem& pb, const SolverConfig& sc,
                                                  const SimState& state, const FaceField& u_new,
                                                  double dt, Vec* sigma_rec_out = nullptr) {
    const Grid& g = pb.grid;
    const auto& wb = pb.bases.weighted;
    const Vec& xi_prev = state.sigma_modal;

    Vec du = div(g, u_new);
    Vec g_proj, h_proj;
    if (!pb.mgrad.trivial) {
        g_proj = wb.project(g_of(g, u_new, pb.mgrad));
        h_proj = wb.project(h_of(g, state.iu, state.d0, pb.media, pb.mgrad));
    }

    Vec du_proj_linear;
    if (sc.linear_mode) du_proj_linear = wb.project(du);

    Vec xi_star = xi_prev;
    Vec p_star = state.p_modal;
    double resid = 0.0;
    for (int iter = 1; iter <= sc.picard_max_iters; ++iter) {
        Vec xi_new;
        Vec sigma_star_rec;
        if (sc.linear_mode) {
            xi_new = xi_prev - dt * du_proj_linear;
        } else {
            sigma_star_rec = wb.reconstruct(xi_star);
            Vec adu = (a_of(sigma_star_rec).array() * du.array()).matrix();
            xi_new = xi_prev - dt * wb.project(adu);
        }
        if (g_proj.size()) xi_new += dt * g_proj;

        Vec xi_t = (xi_new - xi_prev) / dt;
        Vec ell = apply_absorption(pb.media.absorption, xi_new, xi_t, pb.media, pb.bases);

        Vec p_new;
        Vec sigma_new_rec;
        if (sc.linear_mode && pb.c2rho_constant) {
            p_new = pb.c2rho[0] * xi_new - ell;
        } else {
            sigma_new_rec = wb.reconstruct(xi_new);
            Vec b_field =
                sc.linear_mode ? Vec(Vec::Ones(g.cells())) : b_of(sigma_star_rec, pb.media.b_over_a);
            Vec pgrid = (pb.c2rho.array() * b_field.array() * sigma_new_rec.array()).matrix();
            p_new = wb.project(pgrid) - ell;
        }
        if (h_proj.size()) p_new += h_proj;

        resid = std::max(detail::rel_change(xi_new, xi_star), detail::rel_change(p_new, p_star));
        xi_star = std::move(xi_new);
        p_star = std::move(p_new);
        if (resid < sc.picard_tol) {
            if (sigma_rec_out) {
                *sigma_rec_out =
                    sigma_new_rec.size() ? std::move(sigma_new_rec) : wb.reconstruct(xi_star);
            }
            return {std::move(xi_star), std::move(p_star)};
        }
    }
    throw step_failure("sigma_pressure_substep: Picard did not converge within " +
                           std::to_string(sc.picard_max_iters) + " iterations, residual " +
                           std::to_string(resid),
                       resid);
}

struct StepStats {
    double min_a = 1.0;
    double min_b = 1.0;
};

// One full time step: velocity substep with the current p, then the
// (sigma, p) substep with the new u, then trapezoidal Iu accumulation.
inline StepStats step(const Problem& pb, const SolverConfig& sc, SimState& state, double dt) {
    const double t_new = state.t + dt;
    FaceField u_new = velocity_substep(pb, sc, state.u, state.p_modal, t_new, dt);
    Vec sigma_rec;
    auto [xi_sigma, xi_p] = sigma_pressure_substep(pb, sc, state, u_new, dt, &sigma_rec);

    StepStats stats;
    if (!sc.linear_mode) {
        stats.min_a = a_of(Vec(sigma_rec)).minCoeff();
        stats.min_b = b_of(sigma_rec, pb.media.b_over_a).minCoeff();
    }

    for (int a = 0; a < pb.grid.ndim; ++a)
        state.iu.c[a] += 0.5 * dt * (state.u.c[a] + u_new.c[a]);
    state.u = std::move(u_new);
    state.sigma_modal = std::move(xi_sigma);
    state.p_modal = std::move(xi_p);
    state.t = t_new;
    return stats;
}

// Eigenvector values at probe cells, one row per probe: probe pressures are
// then a small modal contraction instead of a full-grid reconstruction.
inline Mat probe_rows(const SpectralBasis& b, const std::vector<std::int64_t>& cells) {
    Mat r(static_cast<int>(cells.size()), b.n);
    for (std::size_t j = 0; j < cells.size(); ++j) {
        if (cells[j] < 0 || cells[j] >= b.grid.cells())
            throw validation_error("probe cell index out of range");
        if (b.analytic) {
            auto c = b.grid.cell_coords(cells[j]);
            for (int k = 0; k < b.n; ++k) {
                double p = 1.0;
                for (int a = 0; a < b.grid.ndim; ++a) p *= b.cos1d[a](c[a], b.modes[k][a]);
                r(static_cast<int>(j), k) = p;
            }
        } else {
            r.row(static_cast<int>(j)) = b.W.row(cells[j]);
        }
    }
    return r;
}

// Deterministic full run; identical inputs give identical trajectories.
// A step whose Picard iteration fails is retried once as two dt/2 substeps;
// a second failure aborts.
inline Trajectory run(const Problem& pb, const SolverConfig& sc, const InitialData& init,
                      const ProbeSet& probes, int store_stride = 1) {
    sc.validate();
    pb.source.check_coverage(sc.t_end);
    const std::int64_t steps = sc.steps();
    if (probes.stride < 1) throw validation_error("run: probe stride must be >= 1");
    if (steps % probes.stride != 0)
        throw validation_error("run: probe stride must divide the step count");
    if (store_stride > 0 && steps % store_stride != 0)
        throw validation_error("run: store stride must divide the step count");

    Trajectory traj;
    traj.grid = pb.grid;
    traj.dt = sc.dt;
    traj.steps = steps;
    traj.store_stride = store_stride;
    traj.probe_stride = probes.stride;
    traj.probe_cells = probes.cells;

    SimState state = init_state(pb, sc, init);
    traj.d0 = state.d0;

    Mat prows;
    const auto n_probes = static_cast<int>(probes.cells.size());
    const auto n_records = static_cast<std::int64_t>(steps / probes.stride) + 1;
    if (n_probes > 0) {
        prows = probe_rows(pb.bases.weighted, probes.cells);
        traj.probe_p.resize(n_probes, n_records);
    }
    traj.probe_times.reserve(static_cast<std::size_t>(n_records));

    auto record_probe = [&](std::int64_t col) {
        traj.probe_times.push_back(state.t);
        if (n_probes > 0) traj.probe_p.col(col) = prows * state.p_modal;
    };
    auto record_sample = [&]() {
        traj.samples.push_back({state.t, state.sigma_modal, state.p_modal, state.u, state.iu});
    };

    record_probe(0);
    if (store_stride > 0) record_sample();

    std::int64_t probe_col = 1;
    for (std::int64_t k = 1; k <= steps; ++k) {
        StepStats stats;
        try {
            stats = step(pb, sc, state, sc.dt);
        } catch (const step_failure&) {
            // state is untouched on substep failure; retry as two half steps
            stats = step(pb, sc, state, 0.5 * sc.dt);
            StepStats s2 = step(pb, sc, state, 0.5 * sc.dt);
            stats.min_a = std::min(stats.min_a, s2.min_a);
            stats.min_b = std::min(stats.min_b, s2.min_b);
            ++traj.halved_steps;
        }
        traj.min_a = std::min(traj.min_a, stats.min_a);
        traj.min_b = std::min(traj.min_b, stats.min_b);
        if (traj.min_a <= 0.0 || traj.min_b <= 0.0)
            throw numerical_error("run: nondegeneracy violated at t = " + std::to_string(state.t) +
                                  " (min a = " + std::to_string(traj.min_a) +
                                  ", min b = " + std::to_string(traj.min_b) + ")");
        if (k % probes.stride == 0) record_probe(probe_col++);
        if (store_stride > 0 && k % store_stride == 0) record_sample();
    }
    return traj;
}

}  // namespace kwk
