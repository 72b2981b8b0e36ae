#pragma once

// Material coefficient fields (rho0, c0^2, B/A), absorption parameters,
// unit conversion for the power-law absorption magnitude, and the
// validity / smallness report on the coefficient gradients.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "kwk/basis.hpp"
#include "kwk/grid.hpp"

namespace kwk {

enum class AbsorptionKind { ModifiedL, OriginalLtilde, None };

inline std::string to_string(AbsorptionKind k) {
    switch (k) {
        case AbsorptionKind::ModifiedL: return "modified-l";
        case AbsorptionKind::OriginalLtilde: return "original-ltilde";
        default: return "none";
    }
}

struct MediumFields {
    Vec rho0;      // kg/m^3
    Vec c0sq;      // m^2/s^2
    Vec b_over_a;  // dimensionless
    double alpha0 = 0.0;  // Np * (rad/s)^{-y} / m, internal convention
    double y = 1.5;
    double tau = 1.0;
    double eta = 1.0;
    AbsorptionKind absorption = AbsorptionKind::None;
    std::vector<std::string> notes;  // conventions and warnings picked up during setup

    bool rho0_constant = false;

    void validate(const Grid& g) const {
        if (rho0.size() != g.cells() || c0sq.size() != g.cells() || b_over_a.size() != g.cells())
            throw validation_error("media: field sizes do not match the grid");
        if (rho0.minCoeff() <= 0.0) throw validation_error("media: rho0 must be positive");
        if (c0sq.minCoeff() <= 0.0) throw validation_error("media: c0^2 must be positive");
        if (!(tau > 0.0) || !(eta > 0.0)) throw validation_error("media: tau, eta must be positive");
        if (!(y > 1.0 && y < 3.0)) throw validation_error("media: y out of (1,3)");
        if (absorption == AbsorptionKind::OriginalLtilde && std::abs(y - 2.0) < 1e-12)
            throw validation_error("media: original-ltilde has a tan pole at y = 2");
    }

    static bool is_constant(const Vec& v) {
        const double lo = v.minCoeff(), hi = v.maxCoeff();
        return (hi - lo) <= 1e-13 * std::max(std::abs(hi), std::abs(lo));
    }
    void refresh_flags() { rho0_constant = is_constant(rho0); }
};

// dB/cm/MHz^y -> Np * (rad/s)^{-y} / m.
inline double db_to_internal_alpha(double alpha_db, double y) {
    if (!(y > 1.0 && y < 3.0))
        throw validation_error("db_to_internal_alpha: y out of (1,3)");
    if (alpha_db < 0.0)
        throw validation_error("db_to_internal_alpha: alpha must be >= 0");
    return alpha_db * (100.0 / 8.686) * std::pow(2.0 * M_PI * 1e6, -y);
}

// Map the dispersion coefficients of the original absorption operator onto
// the (tau, eta) of the modified one: tau = c^{y-1}, eta = -c^y tan(pi y/2)
// when positive (y in (1,2)); for y in (2,3) the sign convention is
// ambiguous against tau, eta > 0, so |tan| is used and a warning recorded.
inline std::pair<double, double> default_tau_eta(double c0_ref, double y, double /*alpha0*/,
                                                 std::vector<std::string>* notes = nullptr) {
    if (!(c0_ref > 0.0)) throw validation_error("default_tau_eta: c0_ref must be positive");
    if (std::abs(y - 2.0) < 1e-12)
        throw validation_error("default_tau_eta: tan pole at y = 2; set eta manually");
    const double tau = std::pow(c0_ref, y - 1.0);
    const double t = std::tan(M_PI * y / 2.0);
    double eta = -std::pow(c0_ref, y) * t;
    if (eta <= 0.0) {
        eta = std::pow(c0_ref, y) * std::abs(t);
        if (notes)
            notes->push_back("default_tau_eta: tan(pi y/2) > 0 for y = " + std::to_string(y) +
                             "; eta set to |tan| branch");
    }
    if (notes && std::abs(y - 2.0) < 0.05)
        notes->push_back("default_tau_eta: y near 2, eta = " + std::to_string(eta) +
                         " is ill-conditioned (tan pole)");
    if (notes)
        notes->push_back("default_tau_eta: tau/eta mapping is this simulator's convention, "
                         "not a k-Wave calibration");
    return {tau, eta};
}

struct MediaValidityReport {
    double delta_rc = 0.0;       // smallness aggregate of the coefficient gradients
    double term_grad_c2gradrho = 0.0;
    double term_c2gradrho_l3 = 0.0;
    double term_gradlnrho_hs = 0.0;
    bool y_in_analysis_window = false;    // y > d-1 and 2 <= y <= 3
    bool y_in_inviscid_window = false;    // y > d
    bool y_in_experiment_window = false;  // 1 < y < 3
    std::vector<std::string> notes;
};

// Discrete surrogates of the coefficient-smallness terms
//   ||grad[c0^2 grad rho0]||_2 + ||c0^2 grad rho0||_3 + ||grad ln rho0||_{H^{(y+1)/2}},
// plus the y-window flags. Gradients are centered differences; the
// fractional Sobolev seminorm runs through the Neumann eigenbasis
// componentwise with the mean removed first.
inline MediaValidityReport validate_media(const MediumFields& m, const Grid& g, double y,
                                          int frac_modes = 0) {
    m.validate(g);
    MediaValidityReport rep;
    const int d = g.ndim;
    rep.y_in_analysis_window = (y > d - 1) && (y >= 2.0) && (y <= 3.0);
    rep.y_in_inviscid_window = y > d;
    rep.y_in_experiment_window = (y > 1.0) && (y < 3.0);
    if (!rep.y_in_analysis_window)
        rep.notes.push_back("y outside the analysis window (y > d-1, 2 <= y <= 3)");
    if (!rep.y_in_inviscid_window)
        rep.notes.push_back("y outside the inviscid-limit window (y > d)");

    FaceField grho = grad(g, m.rho0);
    FaceField c2f = cell_to_face(g, m.c0sq);
    FaceField c2grho = grho;
    for (int a = 0; a < d; ++a) c2grho.c[a].array() *= c2f.c[a].array();

    // ||grad[c0^2 grad rho0]||_2: Frobenius over axis pairs, via cell-averaged
    // components re-differentiated.
    double frob = 0.0;
    for (int a = 0; a < d; ++a) {
        Vec comp = face_component_to_cell(g, c2grho, a);
        FaceField dcomp = grad(g, comp);
        frob += dot_faces(g, dcomp, dcomp);
    }
    rep.term_grad_c2gradrho = std::sqrt(frob);

    Vec mag = face_magnitude_to_cell(g, c2grho);
    rep.term_c2gradrho_l3 = lp_norm_cells(g, mag, 3.0);

    // ||grad ln rho0||_{H^{(y+1)/2}} componentwise.
    Vec lnr = m.rho0.array().log();
    FaceField glnr = grad(g, lnr);
    double hs_sq = 0.0;
    if (!MediumFields::is_constant(m.rho0)) {
        const int nmodes = frac_modes > 0
                               ? frac_modes
                               : static_cast<int>(std::min<std::int64_t>(g.cells() - 1, 512));
        SpectralBasis nb = eigenbasis(build_laplacian(g), nmodes);
        const double s = (y + 1.0) / 2.0;
        for (int a = 0; a < d; ++a) {
            Vec comp = face_component_to_cell(g, glnr, a);
            const double mval = mean_value(comp);
            Vec comp0 = comp.array() - mval;
            Vec fr = frac_apply(nb, s / 2.0, comp0);
            hs_sq += dot_cells(g, comp, comp) + dot_cells(g, fr, fr);
        }
    }
    rep.term_gradlnrho_hs = std::sqrt(hs_sq);

    rep.delta_rc = rep.term_grad_c2gradrho + rep.term_c2gradrho_l3 + rep.term_gradlnrho_hs;
    return rep;
}

// -- phantom generators --------------------------------------------------

inline Vec phantom_constant(const Grid& g, double value) {
    return Vec::Constant(g.cells(), value);
}

inline Vec phantom_gaussian_blob(const Grid& g, double base, double amplitude,
                                 const std::array<double, 3>& center, double width) {
    Vec out(g.cells());
    for (std::int64_t i = 0; i < g.cells(); ++i) {
        double r2 = 0.0;
        for (int a = 0; a < g.ndim; ++a) {
            const double dx = g.coord(i, a) - center[a];
            r2 += dx * dx;
        }
        out[i] = base + amplitude * std::exp(-0.5 * r2 / (width * width));
    }
    return out;
}

inline Vec phantom_sinusoid(const Grid& g, double base, double amplitude,
                            const std::array<int, 3>& periods, double phase) {
    Vec out(g.cells());
    for (std::int64_t i = 0; i < g.cells(); ++i) {
        double s = phase;
        for (int a = 0; a < g.ndim; ++a)
            s += 2.0 * M_PI * periods[a] * g.coord(i, a) / g.length(a);
        out[i] = base + amplitude * std::sin(s);
    }
    return out;
}

// Smooth random field from a few low cosine modes, values mapped into
// [base - amplitude, base + amplitude]. Deterministic in the seed.
inline Vec phantom_random_fourier(const Grid& g, double base, double amplitude, int max_mode,
                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Vec out = Vec::Zero(g.cells());
    std::array<int, 3> k{0, 0, 0};
    for (k[0] = 0; k[0] <= max_mode; ++k[0])
        for (k[1] = 0; k[1] <= (g.ndim > 1 ? max_mode : 0); ++k[1])
            for (k[2] = 0; k[2] <= (g.ndim > 2 ? max_mode : 0); ++k[2]) {
                if (k[0] + k[1] + k[2] == 0) continue;
                const double coef = unif(rng);
                for (std::int64_t i = 0; i < g.cells(); ++i) {
                    double p = coef;
                    for (int a = 0; a < g.ndim; ++a)
                        p *= std::cos(k[a] * M_PI * g.coord(i, a) / g.length(a));
                    out[i] += p;
                }
            }
    const double lo = out.minCoeff(), hi = out.maxCoeff();
    const double span = std::max(hi - lo, 1e-300);
    for (std::int64_t i = 0; i < g.cells(); ++i)
        out[i] = base - amplitude + 2.0 * amplitude * (out[i] - lo) / span;
    return out;
}

}  // namespace kwk
