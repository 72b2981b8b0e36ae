#pragma once

// Eigenbases of the (weighted) Neumann Laplacian restricted to zero-mean
// functions, spectral fractional powers, and the Ritz projection.
//
// Two realizations sit behind one interface:
//   * analytic: constant-coefficient operators diagonalize in the tensor
//     cosine basis, so eigenpairs are exact and projections are separable
//     cosine transforms (the fast path used by constant-rho0 media);
//   * dense: a symmetric eigensolve of the assembled operator, for
//     variable coefficients at desk scale.
//
// Eigenvalues are sorted ascending with the zero mode excluded; ties are
// broken by lexicographic comparison of eigenvector entries after sign
// normalization (first nonzero entry positive), so mode ordering is
// reproducible across runs and realizations.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "kwk/operators.hpp"

namespace kwk {

struct SpectralBasis {
    Grid grid;
    int n = 0;
    Vec lam;        // ascending, strictly positive
    bool analytic = false;

    // analytic path
    double weight_scale = 1.0;                   // A = weight_scale * (tensor Neumann op)
    std::array<Mat, 3> cos1d;                    // per-axis sampled cosine modes, columns k
    std::array<Vec, 3> lam1d;                    // per-axis discrete eigenvalues
    std::vector<std::array<int, 3>> modes;       // retained tensor indices

    // dense path
    Mat W;                                       // N x n, columns M-orthonormal

    double mass() const { return grid.cell_volume(); }

    Vec project(const Vec& v) const {
        if (!analytic) return mass() * (W.transpose() * v);
        Vec full = forward_full(v);
        Vec xi(n);
        for (int k = 0; k < n; ++k) xi[k] = full[mode_linear(k)];
        return xi;
    }

    Vec reconstruct(const Vec& xi) const {
        if (!analytic) return W * xi;
        Vec full = Vec::Zero(grid.cells());
        for (int k = 0; k < n; ++k) full[mode_linear(k)] = xi[k];
        return inverse_full(full);
    }

    Vec eigenvector(int k) const {
        if (!analytic) return W.col(k);
        const auto& m = modes[k];
        const std::int64_t nc = grid.cells();
        Vec out(nc);
        for (std::int64_t i = 0; i < nc; ++i) {
            auto c = grid.cell_coords(i);
            double p = 1.0;
            for (int a = 0; a < grid.ndim; ++a) p *= cos1d[a](c[a], m[a]);
            out[i] = p;
        }
        return out;
    }

    // -- analytic internals ---------------------------------------------

    std::int64_t mode_linear(int k) const {
        const auto& m = modes[k];
        return grid.cell_index(m[0], m[1], m[2]);
    }

    // All-mode forward transform: xi(k) = (v, w_k)_M for every tensor mode.
    Vec forward_full(const Vec& v) const {
        const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
        Mat px = grid.spacing[0] * cos1d[0].transpose();
        Eigen::Map<const Mat> v0(v.data(), nx, std::int64_t(ny) * nz);
        Mat s1 = px * v0;
        if (grid.ndim == 1) return Vec(Eigen::Map<Vec>(s1.data(), s1.size()));
        Mat py = grid.spacing[1] * cos1d[1].transpose();
        Mat s2(nx, std::int64_t(ny) * nz);
        for (int z = 0; z < nz; ++z)
            s2.middleCols(std::int64_t(z) * ny, ny) =
                s1.middleCols(std::int64_t(z) * ny, ny) * py.transpose();
        if (grid.ndim == 2) return Vec(Eigen::Map<Vec>(s2.data(), s2.size()));
        Mat pz = grid.spacing[2] * cos1d[2].transpose();
        Eigen::Map<Mat> s2m(s2.data(), std::int64_t(nx) * ny, nz);
        Mat s3 = s2m * pz.transpose();
        return Vec(Eigen::Map<Vec>(s3.data(), s3.size()));
    }

    Vec inverse_full(const Vec& xi) const {
        const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
        Eigen::Map<const Mat> x0(xi.data(), nx, std::int64_t(ny) * nz);
        Mat s1 = cos1d[0] * x0;
        if (grid.ndim == 1) return Vec(Eigen::Map<Vec>(s1.data(), s1.size()));
        Mat s2(nx, std::int64_t(ny) * nz);
        for (int z = 0; z < nz; ++z)
            s2.middleCols(std::int64_t(z) * ny, ny) =
                s1.middleCols(std::int64_t(z) * ny, ny) * cos1d[1].transpose();
        if (grid.ndim == 2) return Vec(Eigen::Map<Vec>(s2.data(), s2.size()));
        Eigen::Map<Mat> s2m(s2.data(), std::int64_t(nx) * ny, nz);
        Mat s3 = s2m * cos1d[2].transpose();
        return Vec(Eigen::Map<Vec>(s3.data(), s3.size()));
    }
};

namespace detail {

// k-th eigenvalue of the 1D cell-centered Neumann Laplacian, exact for the
// [1 -1; -1 2 -1; ...] stencil: (2/h^2)(1 - cos(k pi / N)).
inline Vec neumann_eigs_1d(int n, double h) {
    Vec lam(n);
    for (int k = 0; k < n; ++k) lam[k] = (2.0 / (h * h)) * (1.0 - std::cos(k * M_PI / n));
    return lam;
}

// M-orthonormal sampled cosine modes, column k: sqrt((k==0?1:2)/(N h)) cos(k pi (i+1/2)/N).
inline Mat cosine_modes_1d(int n, double h) {
    Mat c(n, n);
    for (int k = 0; k < n; ++k) {
        const double s = std::sqrt((k == 0 ? 1.0 : 2.0) / (n * h));
        for (int i = 0; i < n; ++i) c(i, k) = s * std::cos(k * M_PI * (i + 0.5) / n);
    }
    return c;
}

inline void sign_normalize(Eigen::Ref<Vec> col) {
    const double amax = col.cwiseAbs().maxCoeff();
    for (std::int64_t i = 0; i < col.size(); ++i) {
        if (std::abs(col[i]) > 1e-12 * amax) {
            if (col[i] < 0.0) col = -col;
            return;
        }
    }
}

inline bool lex_less(const Vec& a, const Vec& b) {
    for (std::int64_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return false;
}

}  // namespace detail

inline SpectralBasis eigenbasis(const LinOperator& op, int n) {
    const Grid& g = op.grid();
    const std::int64_t nc = g.cells();
    if (n < 1 || n > nc - 1)
        throw validation_error("eigenbasis: mode count must be in [1, N-1], got " +
                               std::to_string(n));

    SpectralBasis b;
    b.grid = g;
    b.n = n;

    if (op.constant_weight()) {
        b.analytic = true;
        b.weight_scale = op.weight_value();
        for (int a = 0; a < g.ndim; ++a) {
            b.lam1d[a] = detail::neumann_eigs_1d(g.dims[a], g.spacing[a]);
            b.cos1d[a] = detail::cosine_modes_1d(g.dims[a], g.spacing[a]);
        }
        std::vector<std::array<int, 3>> all;
        all.reserve(nc - 1);
        for (std::int64_t i = 1; i < nc; ++i) all.push_back(g.cell_coords(i));
        auto lam_of = [&](const std::array<int, 3>& m) {
            double s = 0.0;
            for (int a = 0; a < g.ndim; ++a) s += b.lam1d[a][m[a]];
            return b.weight_scale * s;
        };
        // Entries of the tensor eigenvector, materialized only to break ties.
        auto materialize = [&](const std::array<int, 3>& m) {
            Vec v(nc);
            for (std::int64_t i = 0; i < nc; ++i) {
                auto c = g.cell_coords(i);
                double p = 1.0;
                for (int a = 0; a < g.ndim; ++a) p *= b.cos1d[a](c[a], m[a]);
                v[i] = p;
            }
            return v;
        };
        std::stable_sort(all.begin(), all.end(), [&](const auto& ma, const auto& mb) {
            const double la = lam_of(ma), lb = lam_of(mb);
            const double tol = 1e-12 * std::max({1.0, la, lb});
            if (la < lb - tol) return true;
            if (lb < la - tol) return false;
            return detail::lex_less(materialize(ma), materialize(mb));
        });
        all.resize(n);
        b.modes = std::move(all);
        b.lam.resize(n);
        for (int k = 0; k < n; ++k) b.lam[k] = lam_of(b.modes[k]);
        return b;
    }

    // Dense symmetric eigensolve; exactness over scalability at desk scale.
    Mat a = op.dense();
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    if (es.info() != Eigen::Success)
        throw numerical_error("eigenbasis: dense eigensolve failed to converge");
    Vec ev = es.eigenvalues();
    Mat evec = es.eigenvectors();
    const double lam_max = std::max(1.0, ev[nc - 1]);
    if (std::abs(ev[0]) > 1e-9 * lam_max)
        throw numerical_error("eigenbasis: smallest eigenvalue " + std::to_string(ev[0]) +
                              " is not a zero mode; operator does not annihilate constants");

    const double inv_sqrt_dv = 1.0 / std::sqrt(g.cell_volume());
    std::vector<std::int64_t> order(nc - 1);
    std::iota(order.begin(), order.end(), 1);
    for (std::int64_t j = 1; j < nc; ++j) {
        detail::sign_normalize(evec.col(j));
    }
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t i, std::int64_t j) {
        const double li = ev[i], lj = ev[j];
        const double tol = 1e-12 * std::max({1.0, li, lj});
        if (li < lj - tol) return true;
        if (lj < li - tol) return false;
        return detail::lex_less(evec.col(i), evec.col(j));
    });

    b.lam.resize(n);
    b.W.resize(nc, n);
    for (int k = 0; k < n; ++k) {
        b.lam[k] = ev[order[k]];
        b.W.col(k) = evec.col(order[k]) * inv_sqrt_dv;
    }
    // Residual gate; dense solves can silently lose accuracy on bad inputs.
    const double rtol = 1e-8 * std::max(1.0, ev[nc - 1]);
    for (int k = 0; k < n; ++k) {
        const double resid = norm_cells(g, Vec(op.apply(b.W.col(k)) - b.lam[k] * b.W.col(k)));
        if (resid > rtol)
            throw numerical_error("eigenbasis: eigensolve residual " + std::to_string(resid) +
                                  " above tolerance for mode " + std::to_string(k));
    }
    return b;
}

namespace detail {

inline Vec remove_mean_checked(const Vec& v, const char* who) {
    const double m = mean_value(v);
    const double scale = std::max(1.0, v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
    if (std::abs(m) > 1e-8 * scale)
        throw validation_error(std::string(who) + ": input mean " + std::to_string(m) +
                               " exceeds zero-mean tolerance");
    return v.array() - m;
}

}  // namespace detail

// Spectral fractional power over the retained modes:
// A^gamma v = sum_i lam_i^gamma (v, w_i) w_i.  Modal truncation is the
// Galerkin projection; gamma = 0 is the plain projection onto span(basis).
inline Vec frac_apply(const SpectralBasis& b, double gamma, const Vec& v) {
    if (gamma < 0.0 && b.lam[0] < 1e-14)
        throw validation_error("frac_apply: negative power with near-zero smallest eigenvalue");
    Vec v0 = detail::remove_mean_checked(v, "frac_apply");
    Vec xi = b.project(v0);
    if (gamma != 0.0)
        for (int k = 0; k < b.n; ++k) xi[k] *= std::pow(b.lam[k], gamma);
    return b.reconstruct(xi);
}

// Same power applied directly to modal coefficients.
inline Vec frac_modal(const SpectralBasis& b, double gamma, const Vec& xi) {
    Vec out = xi;
    if (gamma != 0.0)
        for (int k = 0; k < b.n; ++k) out[k] *= std::pow(b.lam[k], gamma);
    return out;
}

// Ritz projection onto span(basis) w.r.t. the weighted-gradient form. The
// eigenbasis diagonalizes the form, so the coefficients are plain L2 inner
// products (g, w_i).
inline Vec ritz_project(const SpectralBasis& b, const Vec& g) {
    Vec g0 = detail::remove_mean_checked(g, "ritz_project");
    return b.project(g0);
}

// The two bases the solver needs side by side: eigenbasis of -Delta_{1/rho0}
// (carries sigma and p) and of -Delta_N (carries the fractional powers),
// plus the dense n x n change of basis between their modal spaces. For
// constant rho0 the bases coincide and the change of basis is the identity.
struct BasisPair {
    SpectralBasis weighted;
    SpectralBasis neumann;
    bool same = false;
    Mat n_from_w;  // xi_N = n_from_w * xi_W; adjoint maps back

    Vec to_neumann(const Vec& xi_w) const { return same ? xi_w : Vec(n_from_w * xi_w); }
    Vec from_neumann_adj(const Vec& xi_n) const {
        return same ? xi_n : Vec(n_from_w.transpose() * xi_n);
    }
};

inline BasisPair make_basis_pair(const Grid& g, const Vec& rho0, int n) {
    BasisPair bp;
    Vec inv_rho = rho0.cwiseInverse();
    LinOperator aw = build_laplacian(g, inv_rho);
    bp.weighted = eigenbasis(aw, n);
    LinOperator an = build_laplacian(g);
    bp.neumann = eigenbasis(an, n);
    bp.same = aw.constant_weight();
    if (!bp.same) {
        bp.n_from_w.resize(n, n);
        for (int j = 0; j < n; ++j)
            bp.n_from_w.col(j) = bp.neumann.project(bp.weighted.eigenvector(j));
    }
    return bp;
}

}  // namespace kwk
