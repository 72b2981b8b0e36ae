#pragma once

// Weighted Neumann Laplacians  A = -div(w grad .)  on zero-mean grid
// functions, sign convention A >= 0. Face weights are arithmetic means of
// the cell weight, so A = D^T diag(w_f) D up to the mass scaling: symmetric,
// nonnegative, constants in the kernel.

#include <cmath>
#include <optional>
#include <sstream>

#include "kwk/grid.hpp"

namespace kwk {

class LinOperator {
public:
    LinOperator(Grid g, FaceField face_weight, bool constant_weight, double weight_value)
        : grid_(std::move(g)),
          w_(std::move(face_weight)),
          const_weight_(constant_weight),
          wvalue_(weight_value) {}

    const Grid& grid() const { return grid_; }
    const FaceField& face_weight() const { return w_; }
    bool constant_weight() const { return const_weight_; }
    double weight_value() const { return wvalue_; }

    Vec apply(const Vec& v) const {
        FaceField gv = grad(grid_, v);
        for (int a = 0; a < grid_.ndim; ++a) gv.c[a].array() *= w_.c[a].array();
        return -div(grid_, gv);
    }

    // Weighted Dirichlet form <w grad v, grad z>_faces = <A v, z>_cells.
    double form(const Vec& v, const Vec& z) const { return dot_cells(grid_, apply(v), z); }

    Mat dense() const {
        const std::int64_t n = grid_.cells();
        if (n > 8192)
            throw validation_error("LinOperator::dense: grid too large for dense assembly (N=" +
                                   std::to_string(n) + ", cap 8192)");
        Mat m(n, n);
        Vec e = Vec::Zero(n);
        for (std::int64_t j = 0; j < n; ++j) {
            e[j] = 1.0;
            m.col(j) = apply(e);
            e[j] = 0.0;
        }
        return m;
    }

private:
    Grid grid_;
    FaceField w_;
    bool const_weight_;
    double wvalue_;
};

// weight: optional cell field (e.g. 1/rho0), strictly positive. Absent
// weight gives the unweighted Neumann Laplacian.
inline LinOperator build_laplacian(const Grid& g, const std::optional<Vec>& weight = std::nullopt) {
    FaceField wf(g);
    bool constant = true;
    double value = 1.0;
    if (weight) {
        const Vec& w = *weight;
        if (w.size() != g.cells())
            throw validation_error("build_laplacian: weight size " + std::to_string(w.size()) +
                                   " != cell count " + std::to_string(g.cells()));
        for (std::int64_t i = 0; i < w.size(); ++i) {
            if (!(w[i] > 0.0)) {
                auto c = g.cell_coords(i);
                std::ostringstream os;
                os << "build_laplacian: nonpositive weight " << w[i] << " at grid index ("
                   << c[0] << "," << c[1] << "," << c[2] << ")";
                throw validation_error(os.str());
            }
        }
        value = w[0];
        const double lo = w.minCoeff(), hi = w.maxCoeff();
        constant = (hi - lo) <= 1e-13 * std::max(std::abs(hi), std::abs(lo));
        wf = cell_to_face(g, w);
    } else {
        for (int a = 0; a < g.ndim; ++a) wf.c[a].setOnes();
    }
    return LinOperator(g, std::move(wf), constant, value);
}

}  // namespace kwk
