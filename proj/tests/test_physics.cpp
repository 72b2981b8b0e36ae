#include <catch2/catch_amalgamated.hpp>

#include "kwk/physics.hpp"

using namespace kwk;

namespace {
MediumFields const_media(const Grid& g, double rho = 1.0, double c2 = 1.0, double ba = 7.0) {
    MediumFields m;
    m.rho0 = phantom_constant(g, rho);
    m.c0sq = phantom_constant(g, c2);
    m.b_over_a = phantom_constant(g, ba);
    m.y = 1.5;
    m.tau = 1.0;
    m.eta = 1.0;
    m.refresh_flags();
    return m;
}
}  // namespace

TEST_CASE("a(sigma) = 1 + 2 sigma") {
    REQUIRE(a_of(0.0) == 1.0);
    REQUIRE(a_of(0.1) == Catch::Approx(1.2));
    REQUIRE(a_of(-0.5) == Catch::Approx(0.0).margin(1e-15));  // degeneracy root
}

TEST_CASE("b(sigma) = 1 + (B/2A) sigma") {
    REQUIRE(b_of(0.0, 7.0) == 1.0);
    REQUIRE(b_of(0.1, 7.0) == Catch::Approx(1.35));
    Grid g({8}, {0.125});
    Vec sig = phantom_sinusoid(g, 0.0, 0.3, {1, 0, 0}, 0.2);
    Vec b0 = b_of(sig, Vec(Vec::Zero(g.cells())));
    REQUIRE((b0.array() - 1.0).abs().maxCoeff() == 0.0);  // B/A = 0 -> linear medium
}

TEST_CASE("g(u) vanishes iff grad rho0 vanishes") {
    Grid g({12, 10}, {0.1, 0.1});
    MediumFields m = const_media(g);
    MediaGradients mg(g, m);
    REQUIRE(mg.trivial);
    FaceField u(g);
    for (int a = 0; a < 2; ++a) u.c[a].setOnes();
    REQUIRE(g_of(g, u, mg).cwiseAbs().maxCoeff() == 0.0);

    MediumFields m2 = const_media(g);
    m2.rho0 = phantom_gaussian_blob(g, 1.0, 0.2, {0.6, 0.5, 0.0}, 0.3);
    m2.refresh_flags();
    MediaGradients mg2(g, m2);
    REQUIRE_FALSE(mg2.trivial);
    REQUIRE(g_of(g, u, mg2).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("g(u) = -u . grad ln rho0: directional derivative case") {
    // ln rho0 = x1  =>  g = -u1 on interior cells
    const int n = 16;
    Grid g({n, 6}, {1.0 / n, 0.2});
    MediumFields m = const_media(g);
    for (std::int64_t i = 0; i < g.cells(); ++i) m.rho0[i] = std::exp(g.coord(i, 0));
    m.refresh_flags();
    MediaGradients mg(g, m);
    FaceField u(g);
    u.c[0].setOnes();  // e1
    Vec gv = g_of(g, u, mg);
    for (std::int64_t i = 0; i < g.cells(); ++i) {
        auto c = g.cell_coords(i);
        if (c[0] == 0 || c[0] == n - 1) continue;  // boundary closure halves the stencil
        REQUIRE(gv[i] == Catch::Approx(-1.0).epsilon(1e-3));
    }
}

TEST_CASE("g(u) converges at second order in the interior") {
    auto interior_error = [](int n) {
        Grid g({n, n}, {1.0 / n, 1.0 / n});
        MediumFields m = const_media(g);
        for (std::int64_t i = 0; i < g.cells(); ++i) {
            const double x = g.coord(i, 0), y = g.coord(i, 1);
            m.rho0[i] = std::exp(0.3 * std::sin(2 * M_PI * x) * std::cos(M_PI * y));
        }
        m.refresh_flags();
        MediaGradients mg(g, m);
        Vec phi(g.cells());
        for (std::int64_t i = 0; i < g.cells(); ++i) {
            const double x = g.coord(i, 0), y = g.coord(i, 1);
            phi[i] = std::cos(M_PI * x) * std::cos(M_PI * y);
        }
        FaceField u = grad(g, phi);
        Vec gv = g_of(g, u, mg);
        double emax = 0.0;
        for (std::int64_t i = 0; i < g.cells(); ++i) {
            auto c = g.cell_coords(i);
            if (c[0] < 2 || c[0] > n - 3 || c[1] < 2 || c[1] > n - 3) continue;
            const double x = g.coord(i, 0), y = g.coord(i, 1);
            const double ux = -M_PI * std::sin(M_PI * x) * std::cos(M_PI * y);
            const double uy = -M_PI * std::cos(M_PI * x) * std::sin(M_PI * y);
            const double lx = 0.3 * 2 * M_PI * std::cos(2 * M_PI * x) * std::cos(M_PI * y);
            const double ly = -0.3 * M_PI * std::sin(2 * M_PI * x) * std::sin(M_PI * y);
            emax = std::max(emax, std::abs(gv[i] + ux * lx + uy * ly));
        }
        return emax;
    };
    const double e1 = interior_error(24), e2 = interior_error(48);
    REQUIRE(e1 / e2 > 3.0);  // O(h^2)
    REQUIRE(e1 / e2 < 5.2);
}

TEST_CASE("h(u): zero cases and linear growth under constant velocity") {
    Grid g({16, 12}, {1.0 / 16, 1.0 / 12});
    MediumFields m = const_media(g);
    MediaGradients mg(g, m);
    FaceField zero(g);
    REQUIRE(h_of(g, zero, zero, m, mg).cwiseAbs().maxCoeff() == 0.0);  // const rho0

    MediumFields m2 = const_media(g, 1.0, 2.0);
    for (std::int64_t i = 0; i < g.cells(); ++i) m2.rho0[i] = 1.0 + 0.5 * g.coord(i, 1);
    m2.refresh_flags();
    MediaGradients mg2(g, m2);
    REQUIRE(h_of(g, zero, zero, m2, mg2).cwiseAbs().maxCoeff() == 0.0);  // t = 0, d0 = 0

    // Iu = t * u with constant u: h grows linearly with slope c0^2 (u . grad rho0)
    FaceField u(g);
    u.c[1].setOnes();
    auto h_at = [&](double t) {
        FaceField iu = u;
        iu *= t;
        return h_of(g, iu, zero, m2, mg2);
    };
    Vec h1 = h_at(1.0), h2 = h_at(2.0);
    REQUIRE((h2 - 2.0 * h1).cwiseAbs().maxCoeff() < 1e-12);
    // interior slope: c0^2 * d(rho0)/dy = 2.0 * 0.5 = 1
    for (std::int64_t i = 0; i < g.cells(); ++i) {
        auto c = g.cell_coords(i);
        if (c[1] == 0 || c[1] == 11) continue;
        REQUIRE(h1[i] == Catch::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("apply_absorption: zero when alpha0 = 0, modal formula for constant rho0") {
    Grid g({24, 24}, {1.0 / 24, 1.0 / 24});
    MediumFields m = const_media(g, 1.0, 1.0);
    m.y = 1.5;
    m.alpha0 = 0.0;
    m.absorption = AbsorptionKind::ModifiedL;
    BasisPair bp = make_basis_pair(g, m.rho0, 50);
    Vec xi = Vec::Unit(50, 7), xit = Vec::Unit(50, 7) * 3.0;
    REQUIRE(apply_absorption(m.absorption, xi, xit, m, bp).cwiseAbs().maxCoeff() == 0.0);

    m.alpha0 = 0.3;
    Vec got = apply_absorption(AbsorptionKind::ModifiedL, xi, xit, m, bp);
    // -2 alpha0 lam_k^{-1} (tau lam_k^{y/2} cdot + eta lam_k^{(y+1)/2} c)
    const double lam = bp.weighted.lam[7];
    const double expect =
        -2.0 * m.alpha0 / lam * (m.tau * std::pow(lam, 0.75) * 3.0 + m.eta * std::pow(lam, 1.25));
    REQUIRE(got[7] == Catch::Approx(expect).epsilon(1e-12));
    for (int k = 0; k < 50; ++k)
        if (k != 7) REQUIRE(std::abs(got[k]) < 1e-12 * std::abs(expect));
}

TEST_CASE("apply_absorption matches a dense operator-composition oracle, variable rho0") {
    Grid g({10, 8}, {0.1, 0.125});
    MediumFields m = const_media(g, 1.0, 1.0);
    m.rho0 = phantom_gaussian_blob(g, 1.0, 0.15, {0.5, 0.5, 0.0}, 0.3);
    m.refresh_flags();
    m.y = 2.25;
    m.alpha0 = 0.4;
    m.tau = 1.3;
    m.eta = 0.8;
    const int nmodes = 30;
    BasisPair bp = make_basis_pair(g, m.rho0, nmodes);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Vec xi(nmodes), xit(nmodes);
    for (int k = 0; k < nmodes; ++k) {
        xi[k] = unif(rng);
        xit[k] = unif(rng);
    }
    Vec got = apply_absorption(AbsorptionKind::ModifiedL, xi, xit, m, bp);

    // oracle: compose the three spectral operators densely via materialized bases
    Mat wn(g.cells(), nmodes), vn(g.cells(), nmodes);
    for (int k = 0; k < nmodes; ++k) {
        wn.col(k) = bp.weighted.eigenvector(k);
        vn.col(k) = bp.neumann.eigenvector(k);
    }
    const double dv = g.cell_volume();
    auto frac_n = [&](double gam, const Vec& grid_vec) {
        Vec c = dv * (vn.transpose() * grid_vec);
        for (int k = 0; k < nmodes; ++k) c[k] *= std::pow(bp.neumann.lam[k], gam);
        return Vec(vn * c);
    };
    Vec z = m.tau * frac_n(m.y / 2.0, Vec(wn * xit)) +
            m.eta * frac_n((m.y + 1.0) / 2.0, Vec(wn * xi));
    Vec cw = dv * (wn.transpose() * z);
    for (int k = 0; k < nmodes; ++k) cw[k] /= bp.weighted.lam[k];
    Vec expect = -2.0 * m.alpha0 * cw;
    REQUIRE((got - expect).cwiseAbs().maxCoeff() <=
            1e-10 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
}

TEST_CASE("apply_absorption is linear in (sigma, sigma_t)") {
    Grid g({16, 16}, {1.0 / 16, 1.0 / 16});
    MediumFields m = const_media(g, 1.2, 2.0);
    m.y = 1.5;
    m.alpha0 = 0.2;
    BasisPair bp = make_basis_pair(g, m.rho0, 40);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Vec x1(40), t1(40), x2(40), t2(40);
    for (int k = 0; k < 40; ++k) {
        x1[k] = unif(rng); t1[k] = unif(rng); x2[k] = unif(rng); t2[k] = unif(rng);
    }
    for (auto kind : {AbsorptionKind::ModifiedL, AbsorptionKind::OriginalLtilde}) {
        Vec sum = apply_absorption(kind, Vec(x1 + x2), Vec(t1 + t2), m, bp);
        Vec parts = apply_absorption(kind, x1, t1, m, bp) + apply_absorption(kind, x2, t2, m, bp);
        REQUIRE((sum - parts).cwiseAbs().maxCoeff() <=
                1e-10 * std::max(1.0, parts.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("original-ltilde dispersion prefactor at y = 1.5 (tan(3 pi/4) = -1)") {
    Grid g({20, 20}, {1.0 / 20, 1.0 / 20});
    const double c2 = 4.0;  // c0 = 2
    MediumFields m = const_media(g, 1.0, c2);
    m.y = 1.5;
    m.alpha0 = 0.25;
    BasisPair bp = make_basis_pair(g, m.rho0, 30);
    Vec xi = Vec::Unit(30, 5);
    Vec zero = Vec::Zero(30);
    // sigma_t = 0 isolates the dispersion part:
    // c0^2 * 2 alpha0 * c0^y tan(pi y/2) * lam^{(y+1)/2-1} (rho0 = 1)
    Vec got = apply_absorption(AbsorptionKind::OriginalLtilde, xi, zero, m, bp);
    const double lam = bp.neumann.lam[5];
    const double c0 = std::sqrt(c2);
    const double expect = c2 * 2.0 * m.alpha0 * (-std::pow(c0, 1.5)) * std::pow(lam, 0.25);
    REQUIRE(got[5] == Catch::Approx(expect).epsilon(1e-10));

    // y = 2 is a pole for this operator
    MediumFields m2 = m;
    m2.y = 2.0;
    REQUIRE_THROWS_AS(apply_absorption(AbsorptionKind::OriginalLtilde, xi, zero, m2, bp),
                      validation_error);
}

TEST_CASE("modified-L commutes with Neumann fractional powers for constant rho0") {
    Grid g({18, 18}, {1.0 / 18, 1.0 / 18});
    MediumFields m = const_media(g, 1.0, 1.0);
    m.y = 1.5;
    m.alpha0 = 0.1;
    BasisPair bp = make_basis_pair(g, m.rho0, 40);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Vec xi(40), xit(40);
    for (int k = 0; k < 40; ++k) {
        xi[k] = unif(rng);
        xit[k] = unif(rng);
    }
    const double gam = 0.6;
    Vec first = apply_absorption(AbsorptionKind::ModifiedL, frac_modal(bp.neumann, gam, xi),
                                 frac_modal(bp.neumann, gam, xit), m, bp);
    Vec second = frac_modal(bp.neumann, gam,
                            apply_absorption(AbsorptionKind::ModifiedL, xi, xit, m, bp));
    REQUIRE((first - second).cwiseAbs().maxCoeff() <=
            1e-9 * std::max(1.0, second.cwiseAbs().maxCoeff()));
}

TEST_CASE("source term: coverage check and piston structure") {
    Grid g({12, 12}, {0.1, 0.1});
    SourceTerm tab = SourceTerm::tabulated({{g.cell_index(6, 6), 1.0}}, {0.0, 1.0, 0.0}, 0.5);
    REQUIRE_NOTHROW(tab.check_coverage(0.9));
    REQUIRE_THROWS_AS(tab.check_coverage(1.5), validation_error);
    REQUIRE(tab.waveform(0.25) == Catch::Approx(0.5));  // linear interpolation

    SourceTerm tone = SourceTerm::tone({{g.cell_index(3, 4), 2.0}}, 1.0);
    FaceField f(g);
    tone.eval(0.25, g, f);  // sin(pi/2) = 1
    Vec divf = div(g, f);
    // piston f = grad(phi): nonzero only around the mask cell
    REQUIRE(std::abs(divf[g.cell_index(3, 4)]) > 0.0);
    REQUIRE(divf.sum() == Catch::Approx(0.0).margin(1e-12));
}
