#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "kwk/basis.hpp"
#include "kwk/operators.hpp"

using namespace kwk;

namespace {

Vec random_zero_mean(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Vec v(g.cells());
    for (auto i = 0; i < v.size(); ++i) v[i] = unif(rng);
    v.array() -= v.mean();
    return v;
}

// Independent dense assembly of -div(w grad), for oracle comparisons.
Mat dense_laplacian_oracle(const Grid& g, const Vec* weight) {
    const auto n = g.cells();
    Mat a = Mat::Zero(n, n);
    for (int ax = 0; ax < g.ndim; ++ax) {
        const double ih2 = 1.0 / (g.spacing[ax] * g.spacing[ax]);
        detail::for_each_face(g, ax, [&](std::int64_t, std::int64_t l, std::int64_t r) {
            const double w = weight ? 0.5 * ((*weight)[l] + (*weight)[r]) : 1.0;
            a(l, l) += w * ih2;
            a(r, r) += w * ih2;
            a(l, r) -= w * ih2;
            a(r, l) -= w * ih2;
        });
    }
    return a;
}

}  // namespace

TEST_CASE("1D Neumann stencil, N=4") {
    const double h = 0.5;
    Grid g({4}, {h});
    Mat a = build_laplacian(g).dense();
    Mat expect(4, 4);
    expect << 1, -1, 0, 0, -1, 2, -1, 0, 0, -1, 2, -1, 0, 0, -1, 1;
    expect /= h * h;
    REQUIRE((a - expect).cwiseAbs().maxCoeff() < 1e-14);

    // constants in the kernel
    Vec ones = Vec::Ones(4);
    REQUIRE(build_laplacian(g).apply(ones).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("constant weight 1/rho0 with rho0 = 2 halves the operator") {
    Grid g({6, 5}, {0.2, 0.3});
    Vec w = Vec::Constant(g.cells(), 0.5);
    Mat aw = build_laplacian(g, w).dense();
    Mat an = build_laplacian(g).dense();
    REQUIRE((aw - 0.5 * an).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("nonpositive weight rejected with the offending index") {
    Grid g({4, 3}, {1.0, 1.0});
    Vec w = Vec::Ones(g.cells());
    w[g.cell_index(2, 1)] = -0.25;
    REQUIRE_THROWS_MATCHES(build_laplacian(g, w), validation_error,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("(2,1,0)")));
}

TEST_CASE("1D N=64 discrete eigenvalues (2/h^2)(1 - cos(k pi/N))") {
    const int n = 64;
    const double h = 1.0 / n;
    Grid g({n}, {h});
    auto op = build_laplacian(g);
    auto basis = eigenbasis(op, n - 1);

    // analytic formula
    for (int k = 1; k < n; ++k) {
        const double expect = (2.0 / (h * h)) * (1.0 - std::cos(k * M_PI / n));
        REQUIRE(std::abs(basis.lam[k - 1] - expect) < 1e-10 * std::max(1.0, expect));
    }
    // dense symmetric eigensolve as oracle
    Eigen::SelfAdjointEigenSolver<Mat> es(dense_laplacian_oracle(g, nullptr));
    for (int k = 1; k < n; ++k)
        REQUIRE(std::abs(basis.lam[k - 1] - es.eigenvalues()[k]) < 1e-8);
}

TEST_CASE("dense-path eigenvectors match sampled cosines in 1D") {
    const int n = 32;
    const double h = 1.0 / n;
    Grid g({n}, {h});
    // Force the dense path by dropping the constant-weight flag.
    auto op0 = build_laplacian(g);
    LinOperator op(g, op0.face_weight(), /*constant_weight=*/false, 1.0);
    auto basis = eigenbasis(op, 10);
    for (int k = 1; k <= 10; ++k) {
        Vec cosine(n);
        for (int i = 0; i < n; ++i) cosine[i] = std::cos(k * M_PI * (i + 0.5) / n);
        cosine /= norm_cells(g, cosine);
        Vec got = basis.eigenvector(k - 1);
        const double corr = std::abs(dot_cells(g, got, cosine)) /
                            (norm_cells(g, got) * norm_cells(g, cosine));
        REQUIRE(corr >= 1.0 - 1e-8);
    }
}

TEST_CASE("SpectralBasis invariants: orthonormality, zero mean, residual") {
    Grid g({12, 10}, {1.0 / 12, 1.0 / 10});
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(900.0, 1100.0);
    Vec rho(g.cells());
    for (auto i = 0; i < rho.size(); ++i) rho[i] = unif(rng);
    auto op = build_laplacian(g, Vec(rho.cwiseInverse()));
    const int n = 40;
    auto b = eigenbasis(op, n);

    Mat w(g.cells(), n);
    for (int k = 0; k < n; ++k) w.col(k) = b.eigenvector(k);
    Mat gram = g.cell_volume() * w.transpose() * w;
    REQUIRE((gram - Mat::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10);
    for (int k = 0; k < n; ++k) {
        REQUIRE(std::abs(mean_value(w.col(k))) <= 1e-10);
        Vec resid = op.apply(w.col(k)) - b.lam[k] * w.col(k);
        REQUIRE(resid.norm() <= 1e-8);
    }
    // ascending, strictly positive
    REQUIRE(b.lam[0] > 0.0);
    for (int k = 1; k < n; ++k) REQUIRE(b.lam[k] >= b.lam[k - 1]);
}

TEST_CASE("completeness: n = N-1 reproduces any zero-mean vector") {
    Grid g({9, 7}, {0.11, 0.13});
    auto basis = eigenbasis(build_laplacian(g), static_cast<int>(g.cells() - 1));
    Vec v = random_zero_mean(g, 17);
    Vec rec = basis.reconstruct(basis.project(v));
    REQUIRE((rec - v).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("deterministic mode ordering on a symmetric grid") {
    Grid g({16, 16}, {1.0 / 16, 1.0 / 16});
    auto b1 = eigenbasis(build_laplacian(g), 30);
    auto b2 = eigenbasis(build_laplacian(g), 30);
    for (int k = 0; k < 30; ++k) {
        REQUIRE(b1.lam[k] == b2.lam[k]);
        REQUIRE((b1.eigenvector(k) - b2.eigenvector(k)).cwiseAbs().maxCoeff() == 0.0);
        // sign normalization: first nonzero entry positive
        Vec v = b1.eigenvector(k);
        for (auto i = 0; i < v.size(); ++i) {
            if (std::abs(v[i]) > 1e-12 * v.cwiseAbs().maxCoeff()) {
                REQUIRE(v[i] > 0.0);
                break;
            }
        }
    }
}

TEST_CASE("operator symmetry on random zero-mean inputs") {
    Grid g({11, 8}, {0.09, 0.12});
    Vec rho = 1000.0 * Vec::Ones(g.cells());
    rho += 50.0 * random_zero_mean(g, 23);
    auto op = build_laplacian(g, Vec(rho.cwiseInverse()));
    for (int trial = 0; trial < 5; ++trial) {
        Vec x = random_zero_mean(g, 100 + trial);
        Vec y = random_zero_mean(g, 200 + trial);
        const double lhs = dot_cells(g, op.apply(x), y);
        const double rhs = dot_cells(g, x, op.apply(y));
        REQUIRE(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, x.norm() * y.norm()));
    }
}

TEST_CASE("frac_apply: gamma = 0 projects, gamma = 1 scales eigenvectors") {
    Grid g({20}, {0.05});
    auto basis = eigenbasis(build_laplacian(g), 12);
    Vec v = Vec::Zero(g.cells());
    for (int k = 0; k < 12; ++k) v += (k + 1) * basis.eigenvector(k);
    REQUIRE((frac_apply(basis, 0.0, v) - v).cwiseAbs().maxCoeff() <= 1e-10);

    Vec w4 = basis.eigenvector(4);
    REQUIRE((frac_apply(basis, 1.0, w4) - basis.lam[4] * w4).cwiseAbs().maxCoeff() <=
            1e-10 * basis.lam[4]);
}

TEST_CASE("frac_apply matches the dense matrix power oracle") {
    SECTION("constant coefficients, 1D N = 256") {
        Grid g({256}, {1.0 / 256});
        auto op = build_laplacian(g);
        auto basis = eigenbasis(op, 255);
        Eigen::SelfAdjointEigenSolver<Mat> es(dense_laplacian_oracle(g, nullptr));
        Vec v = random_zero_mean(g, 5);
        for (double gamma : {0.5, 0.75}) {
            Vec expect = Vec::Zero(g.cells());
            for (int k = 1; k < 256; ++k) {
                Vec ev = es.eigenvectors().col(k);
                expect += std::pow(es.eigenvalues()[k], gamma) * ev.dot(v) * ev;
            }
            Vec got = frac_apply(basis, gamma, v);
            REQUIRE((got - expect).cwiseAbs().maxCoeff() <=
                    1e-9 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
        }
    }
    SECTION("variable weight, 2D") {
        Grid g({12, 12}, {1.0 / 12, 1.0 / 12});
        std::mt19937_64 rng(31);
        std::uniform_real_distribution<double> unif(0.8, 1.2);
        Vec w(g.cells());
        for (auto i = 0; i < w.size(); ++i) w[i] = unif(rng);
        auto op = build_laplacian(g, w);
        const int nfull = static_cast<int>(g.cells() - 1);
        auto basis = eigenbasis(op, nfull);
        Eigen::SelfAdjointEigenSolver<Mat> es(dense_laplacian_oracle(g, &w));
        Vec v = random_zero_mean(g, 6);
        for (double gamma : {0.75, -1.0}) {
            Vec expect = Vec::Zero(g.cells());
            for (auto k = 1; k < g.cells(); ++k) {
                Vec ev = es.eigenvectors().col(k);
                expect += std::pow(es.eigenvalues()[k], gamma) * ev.dot(v) * ev;
            }
            Vec got = frac_apply(basis, gamma, v);
            REQUIRE((got - expect).cwiseAbs().maxCoeff() <=
                    1e-9 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("frac_apply semigroup and inverse properties") {
    Grid g({14, 9}, {0.08, 0.1});
    auto basis = eigenbasis(build_laplacian(g), 35);
    Vec v = Vec::Zero(g.cells());
    for (int k = 0; k < 35; ++k) v += std::cos(1.7 * k) * basis.eigenvector(k);

    Vec ab = frac_apply(basis, 0.4, frac_apply(basis, 0.35, v));
    Vec once = frac_apply(basis, 0.75, v);
    REQUIRE((ab - once).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, once.cwiseAbs().maxCoeff()));

    Vec inv = frac_apply(basis, -1.0, frac_apply(basis, 1.0, v));
    REQUIRE((inv - v).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("frac_apply input validation") {
    Grid g({16}, {1.0 / 16});
    auto basis = eigenbasis(build_laplacian(g), 8);
    Vec bad = Vec::Ones(g.cells());  // mean 1
    REQUIRE_THROWS_AS(frac_apply(basis, 0.5, bad), validation_error);

    // near-zero smallest eigenvalue forbids negative powers
    Grid ghuge({4}, {1e9});
    auto tiny = eigenbasis(build_laplacian(ghuge), 3);
    REQUIRE(tiny.lam[0] < 1e-14);
    Vec v = random_zero_mean(ghuge, 9);
    REQUIRE_THROWS_AS(frac_apply(tiny, -1.0, v), validation_error);
}

TEST_CASE("eigenvalue sandwich for variable rho0 in [800, 1200]") {
    Grid g({10, 10}, {0.1, 0.1});
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unif(800.0, 1200.0);
    Vec rho(g.cells());
    for (auto i = 0; i < rho.size(); ++i) rho[i] = unif(rng);
    auto bw = eigenbasis(build_laplacian(g, Vec(rho.cwiseInverse())), 50);
    auto bn = eigenbasis(build_laplacian(g), 50);
    for (int k = 0; k < 50; ++k) {
        const double ratio = bn.lam[k] / bw.lam[k];
        REQUIRE(ratio >= rho.minCoeff() * (1 - 1e-9));
        REQUIRE(ratio <= rho.maxCoeff() * (1 + 1e-9));
    }
}

TEST_CASE("ritz_project: idempotence and coincidence with spectral truncation") {
    Grid g({15, 11}, {1.0 / 15, 1.0 / 11});
    Vec rho = Vec::Constant(g.cells(), 2.5);
    BasisPair bp = make_basis_pair(g, rho, 30);
    REQUIRE(bp.same);

    Vec v = Vec::Zero(g.cells());
    for (int k = 0; k < 30; ++k) v += std::sin(0.9 * k + 1.0) * bp.weighted.eigenvector(k);
    Vec rec = bp.weighted.reconstruct(ritz_project(bp.weighted, v));
    REQUIRE((rec - v).cwiseAbs().maxCoeff() <= 1e-10);

    // constant rho0: Ritz projection == cosine-mode truncation
    Vec gvec = random_zero_mean(g, 77);
    Vec xi_w = ritz_project(bp.weighted, gvec);
    Vec xi_n = bp.neumann.project(gvec);
    REQUIRE((xi_w - xi_n).cwiseAbs().maxCoeff() <=
            1e-11 * std::max(1.0, xi_n.cwiseAbs().maxCoeff()));
}

TEST_CASE("ritz projection gradient stability bound") {
    Grid g({12, 9}, {1.0 / 12, 1.0 / 9});
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> unif(800.0, 1200.0);
    Vec rho(g.cells());
    for (auto i = 0; i < rho.size(); ++i) rho[i] = unif(rng);
    BasisPair bp = make_basis_pair(g, rho, 40);
    const double bound = std::sqrt(rho.maxCoeff() / rho.minCoeff());
    for (int trial = 0; trial < 20; ++trial) {
        Vec gvec = random_zero_mean(g, 500 + trial);
        Vec pg = bp.weighted.reconstruct(ritz_project(bp.weighted, gvec));
        const double num = norm_faces(g, grad(g, pg));
        const double den = norm_faces(g, grad(g, gvec));
        REQUIRE(num <= bound * den * (1 + 1e-9));
    }
}
