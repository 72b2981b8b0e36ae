#pragma once

// Post-processing over stored trajectories: the energy and dissipation
// functionals, the per-step energy-identity residual with its rhs1/rhs2
// decomposition, the smallness monitor, the weak-form residual panel, and
// the weighted/unweighted eigenvalue sandwich check.
//
// Every integral is evaluated through the same discrete operators the
// solver uses, with products averaged to faces so that the discrete product
// rule  grad(ab) = avg(a) grad(b) + grad(a) avg(b)  is exact. The algebraic
// cancellations behind the energy identity then hold exactly in space, and
// the reported residual measures time discretization alone (first order).

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "kwk/solver.hpp"

namespace kwk {

// Discrete H^s norm squared: ||v||^2 + ||(-Delta_N)^{s/2} v0||^2 with the
// mean removed from the fractional part.
inline double hs_norm_sq(const Grid& g, const SpectralBasis& neumann, double s, const Vec& v) {
    const double m = mean_value(v);
    Vec v0 = v.array() - m;
    Vec xi = neumann.project(v0);
    double frac = 0.0;
    for (int k = 0; k < neumann.n; ++k) frac += std::pow(neumann.lam[k], s) * xi[k] * xi[k];
    return dot_cells(g, v, v) + frac;
}

struct EnergyReport {
    std::vector<double> t;
    std::vector<double> energy;       // E(t)
    std::vector<double> dissipation;  // D(t), running
    std::vector<double> l_monitor;    // smallness functional L(t)
    std::vector<double> residual;     // per-step energy-identity defect (0 at t=0)
    std::vector<double> rhs1;
    std::vector<double> rhs2;
    double integrated_abs_residual = 0.0;
    double sup_energy = 0.0;
    double sup_l = 0.0;
    std::optional<double> first_l_violation;  // first sample time with L > r
};

namespace detail {

// sigma_t at sample k as a backward difference of modal coefficients.
inline Vec modal_backward_diff(const Trajectory& tr, std::size_t k) {
    const double dt = tr.samples[k].t - tr.samples[k - 1].t;
    return (tr.samples[k].sigma_modal - tr.samples[k - 1].sigma_modal) / dt;
}

}  // namespace detail

// E(t) = ||u||^2_{H(div)} + ||grad sigma||^2 + ||sigma||^2_{H^{(y+1)/2}}.
inline double energy_at(const Problem& pb, const TrajectorySample& s) {
    const Grid& g = pb.grid;
    Vec du = div(g, s.u);
    Vec sig = pb.bases.weighted.reconstruct(s.sigma_modal);
    FaceField gs = grad(g, sig);
    double e = dot_faces(g, s.u, s.u) + dot_cells(g, du, du);
    e += dot_faces(g, gs, gs);
    e += hs_norm_sq(g, pb.bases.neumann, (pb.media.y + 1.0) / 2.0, sig);
    return e;
}

// The six-term smallness functional
//   L = ||sigma||_inf + 2||sigma_t||_{L2(0,t;L3)} + 2||grad sigma||_{L3}
//       + 1/2 ||(B/A) c0^2 sigma_t||_{L2(0,t;L6)}
//       + ||grad[c0^2 b(sigma)]||_{L2} + ||c0^2 b(sigma) grad ln rho0||_{L2}.
struct SmallnessAccumulator {
    double int_sigt_l3_sq = 0.0;
    double int_bc2_sigt_l6_sq = 0.0;
    double prev_t = 0.0;
    bool first = true;

    double eval(const Problem& pb, const TrajectorySample& s, const Vec* sigma_t_rec) {
        const Grid& g = pb.grid;
        Vec sig = pb.bases.weighted.reconstruct(s.sigma_modal);
        const double term1 = sig.size() ? sig.cwiseAbs().maxCoeff() : 0.0;

        if (!first && sigma_t_rec) {
            const double dt = s.t - prev_t;
            const double l3 = lp_norm_cells(g, *sigma_t_rec, 3.0);
            Vec bc2 =
                (pb.media.b_over_a.array() * pb.media.c0sq.array() * sigma_t_rec->array()).matrix();
            const double l6 = lp_norm_cells(g, bc2, 6.0);
            int_sigt_l3_sq += dt * l3 * l3;
            int_bc2_sigt_l6_sq += dt * l6 * l6;
        }
        first = false;
        prev_t = s.t;

        FaceField gs = grad(g, sig);
        Vec gs_mag = face_magnitude_to_cell(g, gs);
        const double term3 = 2.0 * lp_norm_cells(g, gs_mag, 3.0);

        Vec b_field = b_of(sig, pb.media.b_over_a);
        Vec c2b = (pb.media.c0sq.array() * b_field.array()).matrix();
        FaceField gc2b = grad(g, c2b);
        const double term5 = norm_faces(g, gc2b);

        Vec lnr_mag = face_magnitude_to_cell(g, pb.mgrad.grad_ln_rho0);
        Vec t6 = (c2b.array() * lnr_mag.array()).matrix();
        const double term6 = norm_cells(g, t6);

        return term1 + 2.0 * std::sqrt(int_sigt_l3_sq) + term3 +
               0.5 * std::sqrt(int_bc2_sigt_l6_sq) + term5 + term6;
    }
};

// Full per-sample report: E, running D, L, and the energy-identity residual
// with its rhs1/rhs2 split. Exact running integrals need stride-1 samples;
// coarser strides degrade to trapezoids over what was stored.
inline EnergyReport energy_dissipation(const Problem& pb, const Trajectory& tr,
                                       const SolverConfig& sc, double smallness_r = 0.25) {
    const Grid& g = pb.grid;
    const auto& wb = pb.bases.weighted;
    const auto& nb = pb.bases.neumann;
    const double y = pb.media.y;
    EnergyReport rep;
    const std::size_t m = tr.samples.size();
    if (m == 0) return rep;

    SmallnessAccumulator acc;
    double diss = 0.0;
    double prev_diss_rate = 0.0;
    Vec ip_modal = Vec::Zero(wb.n);  // running integral of p, modal, trapezoid

    // Terms carried across samples for backward differences.
    double prev_ea = 0.0, prev_eb = 0.0, prev_fr = 0.0;

    for (std::size_t k = 0; k < m; ++k) {
        const auto& s = tr.samples[k];
        Vec sig = wb.reconstruct(s.sigma_modal);
        Vec du = div(g, s.u);
        Vec a_field = sc.linear_mode ? Vec(Vec::Ones(g.cells())) : a_of(sig);
        Vec b_field = sc.linear_mode ? Vec(Vec::Ones(g.cells())) : b_of(sig, pb.media.b_over_a);
        FaceField gsig = grad(g, sig);

        // (1/2)||sqrt(a) div u||^2 and (1/2)||c0 sqrt(b) grad sigma||^2 with
        // the face value of c0^2 b taken as avg(1/rho0) * avg(rho0 c0^2 b),
        // the combination the discrete product rule produces.
        const double ea = 0.5 * dot_cells(g, Vec(a_field.array() * du.array()), du);
        Vec rbc2 = (pb.media.rho0.array() * pb.media.c0sq.array() * b_field.array()).matrix();
        FaceField rbc2_f = cell_to_face(g, rbc2);
        double eb = 0.0;
        for (int a = 0; a < g.ndim; ++a)
            eb += (pb.inv_rho_faces.c[a].array() * rbc2_f.c[a].array() * gsig.c[a].array() *
                   gsig.c[a].array())
                      .sum();
        eb *= 0.5 * g.cell_volume();

        Vec xi_n = pb.bases.to_neumann(s.sigma_modal);
        double fr = 0.0;
        for (int i = 0; i < nb.n; ++i) fr += std::pow(nb.lam[i], (y + 1.0) / 2.0) * xi_n[i] * xi_n[i];

        rep.t.push_back(s.t);
        rep.energy.push_back(energy_at(pb, s));

        Vec sigma_t_rec;
        double diss_rate = 0.0;
        if (k > 0) {
            Vec xi_t = detail::modal_backward_diff(tr, k);
            sigma_t_rec = wb.reconstruct(xi_t);
            const double dt = s.t - tr.samples[k - 1].t;

            // dissipation integrand: mu ||grad div u||^2 + ||sigma_t||^2_{H^{y/2}} + ||grad It p||^2
            FaceField gdu = grad(g, du);
            diss_rate = sc.mu * dot_faces(g, gdu, gdu);
            diss_rate += hs_norm_sq(g, nb, y / 2.0, sigma_t_rec);
            ip_modal += 0.5 * dt * (tr.samples[k - 1].p_modal + s.p_modal);
            FaceField gip = grad(g, Vec(wb.reconstruct(ip_modal)));
            diss_rate += dot_faces(g, gip, gip);
            diss += 0.5 * dt * (prev_diss_rate + diss_rate);

            // --- energy identity at level k -------------------------------
            Vec xi_tn = pb.bases.to_neumann(xi_t);
            const double lhs_rate_a = (ea - prev_ea) / dt;
            const double lhs_rate_b = (eb - prev_eb) / dt;
            const double lhs_rate_fr = (fr - prev_fr) / dt;

            FaceField gdu_w = gdu;  // sqrt(a/rho0) grad(div u), squared with face avg of a
            FaceField a_faces = cell_to_face(g, a_field);
            double mu_term = 0.0;
            for (int a = 0; a < g.ndim; ++a)
                mu_term += (pb.inv_rho_faces.c[a].array() * a_faces.c[a].array() *
                            gdu_w.c[a].array() * gdu_w.c[a].array())
                               .sum();
            mu_term *= sc.mu * g.cell_volume();

            double frac_diss = 0.0;
            for (int i = 0; i < nb.n; ++i)
                frac_diss += std::pow(nb.lam[i], y / 2.0) * xi_tn[i] * xi_tn[i];
            const double lhs = lhs_rate_a + lhs_rate_b + mu_term +
                               pb.media.alpha0 * (2.0 * pb.media.tau * frac_diss +
                                                  pb.media.eta * lhs_rate_fr);

            // rhs1. The f term is -int (1/rho0) f . grad(a div u), brought
            // onto cells by the exact discrete integration by parts.
            double r1 = 0.0;
            FaceField f_faces(g);
            if (!pb.source.is_zero()) {
                pb.source.eval(s.t, g, f_faces);
                for (int a = 0; a < g.ndim; ++a)
                    f_faces.c[a].array() *= pb.inv_rho_faces.c[a].array();
                Vec divf = div(g, f_faces);
                r1 += dot_cells(g, Vec(a_field.array() * du.array()), divf);
            }
            if (!sc.linear_mode) {
                // (1/2) c0^2 b' sigma_t |grad sigma|^2 at faces
                Vec bprime_rate =
                    (pb.media.rho0.array() * pb.media.c0sq.array() * 0.5 *
                     pb.media.b_over_a.array() * sigma_t_rec.array())
                        .matrix();
                FaceField bpr_f = cell_to_face(g, bprime_rate);
                double tb = 0.0;
                for (int a = 0; a < g.ndim; ++a)
                    tb += (pb.inv_rho_faces.c[a].array() * bpr_f.c[a].array() *
                           gsig.c[a].array() * gsig.c[a].array())
                              .sum();
                r1 += 0.5 * tb * g.cell_volume();

                // - sigma (grad[c0^2 b] + c0^2 b grad ln rho0) . grad sigma_t
                //   == - avg(sigma) (1/rho0) grad(rho0 c0^2 b) . grad sigma_t
                FaceField grbc2 = grad(g, rbc2);
                FaceField sig_f = cell_to_face(g, sig);
                FaceField gsig_t = grad(g, sigma_t_rec);
                double tc = 0.0;
                for (int a = 0; a < g.ndim; ++a)
                    tc += (sig_f.c[a].array() * pb.inv_rho_faces.c[a].array() *
                           grbc2.c[a].array() * gsig_t.c[a].array())
                              .sum();
                r1 -= tc * g.cell_volume();

                // (1/2) a' sigma_t |div u|^2
                r1 += dot_cells(g, Vec(sigma_t_rec.array() * du.array()), du);

                // - mu (1/rho0) grad(div u) . grad(a) avg(div u): the cross
                // term of the discrete product rule, moved off the mu
                // dissipation norm.
                FaceField ga = grad(g, a_field);
                FaceField du_f = cell_to_face(g, du);
                double td = 0.0;
                for (int a = 0; a < g.ndim; ++a)
                    td += (pb.inv_rho_faces.c[a].array() * gdu.c[a].array() * ga.c[a].array() *
                           du_f.c[a].array())
                              .sum();
                r1 -= sc.mu * td * g.cell_volume();
            }

            // rhs2: all terms carry g or h; zero for constant rho0
            double r2 = 0.0;
            if (!pb.mgrad.trivial) {
                Vec h_cells = h_of(g, s.iu, tr.d0, pb.media, pb.mgrad);
                FaceField gh = grad(g, h_cells);
                FaceField gsig_t = grad(g, sigma_t_rec);
                double th = 0.0;
                for (int a = 0; a < g.ndim; ++a)
                    th += (pb.inv_rho_faces.c[a].array() * gh.c[a].array() *
                           gsig_t.c[a].array())
                              .sum();
                r2 -= th * g.cell_volume();

                // Ritz projection of g substituted through the pressure
                // relation: (1/rho0) grad Pg . grad[c0^2 rho0 b sigma + h]
                // plus the absorption pairing.
                Vec g_cells = g_of(g, s.u, pb.mgrad);
                Vec pg_modal = wb.project(g_cells);  // Ritz projection coefficients
                Vec pg_rec = wb.reconstruct(pg_modal);
                FaceField gpg = grad(g, pg_rec);
                Vec target = (rbc2.array() * sig.array()).matrix() + h_cells;
                FaceField gtarget = grad(g, target);
                double tg = 0.0;
                for (int a = 0; a < g.ndim; ++a)
                    tg += (pb.inv_rho_faces.c[a].array() * gpg.c[a].array() *
                           gtarget.c[a].array())
                              .sum();
                r2 += tg * g.cell_volume();

                Vec pg_n = pb.bases.to_neumann(pg_modal);
                double tf = 0.0;
                for (int i = 0; i < nb.n; ++i)
                    tf += (pb.media.tau * std::pow(nb.lam[i], y / 2.0) * xi_tn[i] +
                           pb.media.eta * std::pow(nb.lam[i], (y + 1.0) / 2.0) * xi_n[i]) *
                          pg_n[i];
                r2 += 2.0 * pb.media.alpha0 * tf;
            }

            rep.rhs1.push_back(r1);
            rep.rhs2.push_back(r2);
            rep.residual.push_back(lhs - r1 - r2);
            rep.integrated_abs_residual += dt * std::abs(lhs - r1 - r2);
        } else {
            rep.rhs1.push_back(0.0);
            rep.rhs2.push_back(0.0);
            rep.residual.push_back(0.0);
        }
        rep.dissipation.push_back(diss);
        prev_diss_rate = diss_rate;
        prev_ea = ea;
        prev_eb = eb;
        prev_fr = fr;

        const double l = acc.eval(pb, s, k > 0 ? &sigma_t_rec : nullptr);
        rep.l_monitor.push_back(l);
        if (l > smallness_r && !rep.first_l_violation) rep.first_l_violation = s.t;
    }
    rep.sup_energy = *std::max_element(rep.energy.begin(), rep.energy.end());
    rep.sup_l = *std::max_element(rep.l_monitor.begin(), rep.l_monitor.end());
    return rep;
}

// Per-step signed residual series alone (convenience wrapper).
inline std::vector<double> energy_identity_residual(const Problem& pb, const Trajectory& tr,
                                                    const SolverConfig& sc) {
    return energy_dissipation(pb, tr, sc).residual;
}

struct SmallnessResult {
    std::vector<double> t;
    std::vector<double> l;
    double sup_l = 0.0;
    bool stayed_below = true;
    std::optional<double> first_violation;
};

inline SmallnessResult smallness_monitor(const Problem& pb, const Trajectory& tr,
                                         const SolverConfig& sc, double r) {
    EnergyReport rep = energy_dissipation(pb, tr, sc, r);
    SmallnessResult out;
    out.t = rep.t;
    out.l = rep.l_monitor;
    out.sup_l = rep.sup_l;
    out.first_violation = rep.first_l_violation;
    out.stayed_below = !rep.first_l_violation.has_value();
    return out;
}

// -- weak-form residual ---------------------------------------------------

struct WeakFormResidual {
    double momentum = 0.0;  // time-integrated momentum group
    double mass = 0.0;
    double pressure = 0.0;  // time-integrated pressure-density group
};

// Assembles the three grouped residuals of the time-integrated weak form
// against a fixed panel: the first `n_modes` weighted basis modes crossed
// with `n_hats` interior temporal hat functions. Requires stored samples.
inline WeakFormResidual weak_form_residual(const Problem& pb, const Trajectory& tr,
                                           const SolverConfig& sc, int n_modes = 10,
                                           int n_hats = 5) {
    const Grid& g = pb.grid;
    const auto& wb = pb.bases.weighted;
    const auto& nb = pb.bases.neumann;
    const double y = pb.media.y;
    n_modes = std::min(n_modes, wb.n);
    const std::size_t m = tr.samples.size();
    if (m < 3) throw validation_error("weak_form_residual: trajectory too short");
    const double t_end = tr.samples.back().t;

    // Temporal hats peaked at j T/(n_hats+1).
    auto hat = [&](int j, double t) {
        const double tj = (j + 1) * t_end / (n_hats + 1);
        const double w = t_end / (n_hats + 1);
        return std::max(0.0, 1.0 - std::abs(t - tj) / w);
    };

    // Running integrals (trapezoid over samples).
    Vec ip = Vec::Zero(wb.n);
    Vec ibs = Vec::Zero(g.cells());   // It (b(sigma) sigma) in grid space
    Vec ih = Vec::Zero(g.cells());    // It h
    FaceField ifc(g);                 // It f
    Vec isig = Vec::Zero(wb.n);       // It sigma (modal)

    std::vector<Vec> prev_vals;  // previous integrands
    Vec prev_bs, prev_h;
    FaceField prev_f(g);

    WeakFormResidual out;
    Mat r_mo = Mat::Zero(n_modes, n_hats);
    Mat r_ma = Mat::Zero(n_modes, n_hats);
    Mat r_pd = Mat::Zero(n_modes, n_hats);

    // Precompute grad w_i for the momentum test functions.
    std::vector<FaceField> gw(n_modes);
    std::vector<Vec> w_cells(n_modes);
    for (int i = 0; i < n_modes; ++i) {
        w_cells[i] = wb.eigenvector(i);
        gw[i] = grad(g, w_cells[i]);
    }
    Vec xi_sig0 = tr.samples[0].sigma_modal;
    const FaceField& u0 = tr.samples[0].u;

    for (std::size_t k = 0; k < m; ++k) {
        const auto& s = tr.samples[k];
        Vec sig = wb.reconstruct(s.sigma_modal);
        Vec b_field = sc.linear_mode ? Vec(Vec::Ones(g.cells())) : b_of(sig, pb.media.b_over_a);
        Vec bs = (b_field.array() * sig.array()).matrix();
        Vec h_cells = pb.mgrad.trivial ? Vec(Vec::Zero(g.cells()))
                                       : h_of(g, s.iu, tr.d0, pb.media, pb.mgrad);
        FaceField f_faces(g);
        if (!pb.source.is_zero()) pb.source.eval(s.t, g, f_faces);

        if (k > 0) {
            const double dt = s.t - tr.samples[k - 1].t;
            ip += 0.5 * dt * (tr.samples[k - 1].p_modal + s.p_modal);
            isig += 0.5 * dt * (tr.samples[k - 1].sigma_modal + s.sigma_modal);
            ibs += 0.5 * dt * (prev_bs + bs);
            ih += 0.5 * dt * (prev_h + h_cells);
            for (int a = 0; a < g.ndim; ++a)
                ifc.c[a] += 0.5 * dt * (prev_f.c[a] + f_faces.c[a]);

            // momentum integrand: rho0 (u - u0) + grad It p - mu grad(div u) - It f
            Vec ip_rec = wb.reconstruct(ip);
            FaceField gip = grad(g, ip_rec);
            Vec du = div(g, s.u);
            FaceField gdu = grad(g, du);
            FaceField mom(g);
            for (int a = 0; a < g.ndim; ++a)
                mom.c[a] = pb.rho_faces.c[a].cwiseProduct(s.u.c[a] - u0.c[a]) + gip.c[a] -
                           sc.mu * gdu.c[a] - ifc.c[a];

            // mass integrand: sigma_t + a(sigma) div u - g(u)
            Vec xi_t = detail::modal_backward_diff(tr, k);
            Vec sigma_t_rec = wb.reconstruct(xi_t);
            Vec a_field = sc.linear_mode ? Vec(Vec::Ones(g.cells())) : a_of(sig);
            Vec mass = sigma_t_rec + (a_field.array() * du.array()).matrix();
            if (!pb.mgrad.trivial) mass -= g_of(g, s.u, pb.mgrad);

            // pressure integrand tested with Delta_{1/rho0} w_i = -lam_i w_i
            Vec pd_cells = wb.reconstruct(ip) -
                           (pb.media.c0sq.array() * pb.media.rho0.array() * ibs.array()).matrix() -
                           ih;
            Vec pd_modal = wb.project(pd_cells);
            Vec dsig_modal = s.sigma_modal - xi_sig0;
            Vec dsig_n = pb.bases.to_neumann(dsig_modal);
            Vec isig_n = pb.bases.to_neumann(isig);

            for (int i = 0; i < n_modes; ++i) {
                const double mom_i = dot_faces(g, mom, gw[i]);
                const double mass_i = dot_cells(g, mass, w_cells[i]);
                double pd_i = -wb.lam[i] * pd_modal[i];
                // + 2 alpha0 [tau <N^{y/4}(sig - sig0), N^{y/4} w_i> + eta <N^{(y+1)/4} It sig, ...>]
                Vec wi_n = pb.bases.to_neumann(Vec(Vec::Unit(wb.n, i)));
                double fr = 0.0;
                for (int q = 0; q < nb.n; ++q)
                    fr += (pb.media.tau * std::pow(nb.lam[q], y / 2.0) * dsig_n[q] +
                           pb.media.eta * std::pow(nb.lam[q], (y + 1.0) / 2.0) * isig_n[q]) *
                          wi_n[q];
                pd_i += 2.0 * pb.media.alpha0 * fr;
                for (int j = 0; j < n_hats; ++j) {
                    const double w = dt * hat(j, s.t);
                    r_mo(i, j) += w * mom_i;
                    r_ma(i, j) += w * mass_i;
                    r_pd(i, j) += w * pd_i;
                }
            }
        }
        prev_bs = std::move(bs);
        prev_h = std::move(h_cells);
        prev_f = std::move(f_faces);
    }
    out.momentum = r_mo.norm();
    out.mass = r_ma.norm();
    out.pressure = r_pd.norm();
    return out;
}

// -- eigenvalue sandwich --------------------------------------------------

struct SandwichResult {
    bool passed = true;
    double lower = 0.0, upper = 0.0;  // bounds on mu_k / lam_k
    std::vector<double> ratio;        // per k
    int first_violation = -1;
};

// Dense spectra of -Delta_N and -Delta_{1/rho0}; in terms of the inverse
// (compact) operators' eigenvalues the two-sided bound reads
//   (1/||M^{-1}||^2) mu_k <= lam_k <= ||M||^2 mu_k,
// which for the forward ascending eigenvalues is
//   min rho0 <= mu_k / lam_k <= max rho0.
inline SandwichResult check_eigen_sandwich(const Grid& g, const Vec& rho0, int k_max,
                                           double bound_scale = 1.0) {
    SandwichResult res;
    res.lower = rho0.minCoeff();
    res.upper = rho0.maxCoeff() * bound_scale;

    LinOperator an = build_laplacian(g);
    LinOperator aw = build_laplacian(g, Vec(rho0.cwiseInverse()));
    Eigen::SelfAdjointEigenSolver<Mat> en(an.dense());
    Eigen::SelfAdjointEigenSolver<Mat> ew(aw.dense());
    if (en.info() != Eigen::Success || ew.info() != Eigen::Success)
        throw numerical_error("check_eigen_sandwich: dense eigensolve failed");

    const double slack = 1e-9;  // roundoff margin on the bound
    for (int k = 1; k <= k_max && k < g.cells(); ++k) {
        const double mu = en.eigenvalues()[k];
        const double lam = ew.eigenvalues()[k];
        const double r = mu / lam;
        res.ratio.push_back(r);
        if (r < res.lower * (1.0 - slack) || r > res.upper * (1.0 + slack)) {
            res.passed = false;
            if (res.first_violation < 0) res.first_violation = k;
        }
    }
    return res;
}

// Data-norm aggregate on the right side of the uniform energy bound; used by
// tests that assert boundedness of E + D against a fitted constant.
inline double energy_bound_aggregate(const Problem& pb, const SolverConfig& sc,
                                     const InitialData& init, double t_end) {
    const Grid& g = pb.grid;
    double agg = 0.0;
    if (!pb.source.is_zero()) {
        // ||div(rho0^{-1} f)||^2_{L2(L2)} + ||It f||^2_{L2(L2)} by step quadrature
        const double dt = sc.dt;
        FaceField itf(g), f_prev(g), f(g);
        pb.source.eval(0.0, g, f_prev);
        double i1 = 0.0, i2 = 0.0;
        for (double t = dt; t <= t_end + 0.5 * dt; t += dt) {
            pb.source.eval(t, g, f);
            for (int a = 0; a < g.ndim; ++a)
                itf.c[a] += 0.5 * dt * (f_prev.c[a] + f.c[a]);
            FaceField wf = f;
            for (int a = 0; a < g.ndim; ++a) wf.c[a].array() *= pb.inv_rho_faces.c[a].array();
            Vec dwf = div(g, wf);
            i1 += dt * dot_cells(g, dwf, dwf);
            i2 += dt * dot_faces(g, itf, itf);
            f_prev = f;
        }
        agg += i1 + i2;
    }
    FaceField u0 = init.u0.c[0].size() ? init.u0 : FaceField(g);
    Vec du0 = div(g, u0);
    agg += dot_faces(g, u0, u0) + dot_cells(g, du0, du0);
    Vec sig0 = init.sigma0.size() ? init.sigma0 : Vec(Vec::Zero(g.cells()));
    Vec b0 = b_of(sig0, pb.media.b_over_a);
    FaceField gs0 = grad(g, sig0);
    FaceField cb = cell_to_face(g, Vec((pb.media.c0sq.array() * b0.array()).matrix()));
    double e0 = 0.0;
    for (int a = 0; a < g.ndim; ++a)
        e0 += (cb.c[a].array() * gs0.c[a].array() * gs0.c[a].array()).sum();
    agg += e0 * g.cell_volume();
    agg += hs_norm_sq(g, pb.bases.neumann, (pb.media.y + 1.0) / 2.0, sig0);
    if (!pb.mgrad.trivial) {
        FaceField d0 = init.d0.c[0].size() ? init.d0 : FaceField(g);
        Vec hd = h_of(g, FaceField(g), d0, pb.media, pb.mgrad);
        FaceField ghd = grad(g, hd);
        agg += dot_faces(g, ghd, ghd);
    }
    return agg;
}

}  // namespace kwk
