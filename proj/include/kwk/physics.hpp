#pragma once

// Constitutive pieces of the first-order system: the coefficient functions
// a(sigma) = 1 + 2 sigma and b(sigma) = 1 + (B/2A) sigma, the heterogeneity
// couplings g(u) = -u . grad ln rho0 and h(u) = c0^2 (It u + d0) . grad rho0,
// momentum source terms, and both absorption operators.

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "kwk/basis.hpp"
#include "kwk/media.hpp"

namespace kwk {

inline Vec a_of(const Vec& sigma) { return (1.0 + 2.0 * sigma.array()).matrix(); }
inline double a_of(double sigma) { return 1.0 + 2.0 * sigma; }

inline Vec b_of(const Vec& sigma, const Vec& b_over_a) {
    return (1.0 + 0.5 * b_over_a.array() * sigma.array()).matrix();
}
inline double b_of(double sigma, double b_over_a) { return 1.0 + 0.5 * b_over_a * sigma; }

// Media-derived gradients used by g and h; built once per run.
struct MediaGradients {
    FaceField grad_ln_rho0;
    FaceField grad_rho0;
    bool trivial = true;  // grad rho0 == 0

    MediaGradients() = default;
    MediaGradients(const Grid& g, const MediumFields& m) {
        grad_rho0 = grad(g, m.rho0);
        Vec lnr = m.rho0.array().log();
        grad_ln_rho0 = grad(g, lnr);
        trivial = true;
        for (int a = 0; a < g.ndim; ++a)
            if (grad_rho0.c[a].size() && grad_rho0.c[a].cwiseAbs().maxCoeff() > 0.0) trivial = false;
    }
};

// g(u) = -u . grad ln rho0, collocated at cell centers.
inline Vec g_of(const Grid& g, const FaceField& u, const MediaGradients& mg) {
    if (mg.trivial) return Vec::Zero(g.cells());
    return -face_dot_to_cell(g, u, mg.grad_ln_rho0);
}

// h(u) = c0^2 (It u + d0) . grad rho0 with It u accumulated by the solver.
inline Vec h_of(const Grid& g, const FaceField& iu, const FaceField& d0, const MediumFields& m,
                const MediaGradients& mg) {
    if (mg.trivial) return Vec::Zero(g.cells());
    FaceField disp = iu;
    disp += d0;
    Vec dotted = face_dot_to_cell(g, disp, mg.grad_rho0);
    return (m.c0sq.array() * dotted.array()).matrix();
}

// Momentum source f(x,t). The mask forms act as small expanding pistons:
// f = grad(phi(t)) with phi a per-cell amplitude bump, which radiates
// isotropically and respects the no-penetration closure. A custom face-field
// callback is available for manufactured-solution tests.
struct SourceTerm {
    struct MaskPoint {
        std::int64_t cell = 0;
        double amplitude = 0.0;
    };

    enum class Kind { Zero, Tone, Table, Custom } kind = Kind::Zero;
    std::vector<MaskPoint> masks;
    double frequency = 0.0;   // tone
    std::vector<double> table;  // tabulated drive, sampled at table_dt
    double table_dt = 0.0;
    std::function<void(double, const Grid&, FaceField&)> custom;

    static SourceTerm zero() { return {}; }

    static SourceTerm tone(std::vector<MaskPoint> pts, double freq_hz) {
        SourceTerm s;
        s.kind = Kind::Tone;
        s.masks = std::move(pts);
        s.frequency = freq_hz;
        return s;
    }

    static SourceTerm tabulated(std::vector<MaskPoint> pts, std::vector<double> values,
                                double dt_table) {
        if (!(dt_table > 0.0) || values.size() < 2)
            throw validation_error("source table: need dt > 0 and at least two samples");
        SourceTerm s;
        s.kind = Kind::Table;
        s.masks = std::move(pts);
        s.table = std::move(values);
        s.table_dt = dt_table;
        return s;
    }

    static SourceTerm custom_faces(std::function<void(double, const Grid&, FaceField&)> fn) {
        SourceTerm s;
        s.kind = Kind::Custom;
        s.custom = std::move(fn);
        return s;
    }

    bool is_zero() const { return kind == Kind::Zero; }

    // Time coverage check against the simulation window.
    void check_coverage(double t_end) const {
        if (kind == Kind::Table && table_dt * (static_cast<double>(table.size()) - 1) < t_end)
            throw validation_error("source table does not cover the simulation window");
    }

    double waveform(double t) const {
        if (kind == Kind::Tone) return std::sin(2.0 * M_PI * frequency * t);
        if (kind == Kind::Table) {
            const double s = t / table_dt;
            const auto i = static_cast<std::size_t>(s);
            if (i + 1 >= table.size()) return table.back();
            const double w = s - static_cast<double>(i);
            return (1.0 - w) * table[i] + w * table[i + 1];
        }
        return 0.0;
    }

    void eval(double t, const Grid& g, FaceField& out) const {
        out.setZero();
        if (kind == Kind::Zero) return;
        if (kind == Kind::Custom) {
            custom(t, g, out);
            return;
        }
        const double w = waveform(t);
        Vec phi = Vec::Zero(g.cells());
        for (const auto& mp : masks) phi[mp.cell] += mp.amplitude * w;
        out = grad(g, phi);
    }
};

// Modal coefficients (weighted basis) of the absorption term standing in the
// pressure-density relation p = c0^2 rho0 b(sigma) sigma - L + h.
//
//   ModifiedL:      L = -2 alpha0 (-Delta_{1/rho0})^{-1} [tau (-Delta)^{y/2} sigma_t
//                                                         + eta (-Delta)^{(y+1)/2} sigma]
//   OriginalLtilde: L = c0^2 * 2 alpha0 [ -c0^{y-1} (-Delta)^{y/2-1} (rho0 sigma)_t
//                                         + c0^y tan(pi y/2) (-Delta)^{(y+1)/2-1} (rho0 sigma) ],
//                   the c0 factors multiplying pointwise in grid space between
//                   the fractional applications (commutator error accepted).
inline Vec apply_absorption(AbsorptionKind kind, const Vec& xi_sigma, const Vec& xi_sigma_t,
                            const MediumFields& m, const BasisPair& bases) {
    const int n = bases.weighted.n;
    if (kind == AbsorptionKind::None || m.alpha0 == 0.0) return Vec::Zero(n);
    const double y = m.y;

    if (kind == AbsorptionKind::ModifiedL) {
        Vec zt = frac_modal(bases.neumann, y / 2.0, bases.to_neumann(xi_sigma_t));
        Vec zs = frac_modal(bases.neumann, (y + 1.0) / 2.0, bases.to_neumann(xi_sigma));
        Vec z = bases.from_neumann_adj(Vec(m.tau * zt + m.eta * zs));
        return -2.0 * m.alpha0 * frac_modal(bases.weighted, -1.0, z);
    }

    // OriginalLtilde
    if (std::abs(y - 2.0) < 1e-12)
        throw validation_error("apply_absorption: original-ltilde has a tan pole at y = 2");
    const Grid& g = bases.weighted.grid;
    Vec c0 = m.c0sq.cwiseSqrt();
    auto frac_zero_mean = [&](double gamma, Vec v) {
        v.array() -= mean_value(v);  // rho0*sigma need not be zero-mean; act on the fluctuation
        return frac_apply(bases.neumann, gamma, v);
    };
    Vec rho_sig = m.rho0.array() * bases.weighted.reconstruct(xi_sigma).array();
    Vec rho_sig_t = m.rho0.array() * bases.weighted.reconstruct(xi_sigma_t).array();
    Vec term = -c0.array().pow(y - 1.0) * frac_zero_mean(y / 2.0 - 1.0, rho_sig_t).array() +
               std::tan(M_PI * y / 2.0) * c0.array().pow(y) *
                   frac_zero_mean((y + 1.0) / 2.0 - 1.0, rho_sig).array();
    Vec l_grid = 2.0 * m.alpha0 * m.c0sq.array() * term.array();
    return bases.weighted.project(l_grid);
}

}  // namespace kwk
