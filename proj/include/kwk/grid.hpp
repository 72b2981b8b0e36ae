#pragma once

// Rectangular cell-centered grids and the mimetic gradient/divergence pair.
//
// Scalars live at cell centers x_i = (i + 1/2) h. Vector fields live on the
// interior faces between cells; boundary faces carry the normal component,
// which is pinned to zero by the reflecting (no-flux / no-penetration)
// closure, so they are not stored. With this arrangement the discrete
// operators satisfy  <grad s, v>_faces = -<s, div v>_cells  exactly, which
// the energy diagnostics rely on.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "kwk/errors.hpp"

namespace kwk {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Grid {
    std::array<int, 3> dims{1, 1, 1};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    int ndim = 0;

    Grid() = default;
    Grid(std::vector<int> extents, std::vector<double> h) {
        if (extents.empty() || extents.size() > 3 || extents.size() != h.size())
            throw validation_error("grid: need 1..3 axes with matching spacing");
        ndim = static_cast<int>(extents.size());
        for (int a = 0; a < ndim; ++a) {
            if (extents[a] < 2)
                throw validation_error("grid: extent must be >= 2 on axis " + std::to_string(a));
            if (!(h[a] > 0.0))
                throw validation_error("grid: spacing must be > 0 on axis " + std::to_string(a));
            dims[a] = extents[a];
            spacing[a] = h[a];
        }
    }

    std::int64_t cells() const {
        return std::int64_t(dims[0]) * dims[1] * dims[2];
    }
    // Interior-face count of the `axis` component.
    std::int64_t faces(int axis) const {
        std::int64_t f = 1;
        for (int a = 0; a < 3; ++a) f *= (a == axis) ? dims[a] - 1 : dims[a];
        return f;
    }
    double cell_volume() const {
        double v = 1.0;
        for (int a = 0; a < ndim; ++a) v *= spacing[a];
        return v;
    }
    double length(int axis) const { return dims[axis] * spacing[axis]; }

    std::int64_t cell_index(int ix, int iy = 0, int iz = 0) const {
        return ix + std::int64_t(dims[0]) * (iy + std::int64_t(dims[1]) * iz);
    }
    std::array<int, 3> cell_coords(std::int64_t idx) const {
        std::array<int, 3> c;
        c[0] = static_cast<int>(idx % dims[0]);
        c[1] = static_cast<int>((idx / dims[0]) % dims[1]);
        c[2] = static_cast<int>(idx / (std::int64_t(dims[0]) * dims[1]));
        return c;
    }
    // Cell-center coordinate of cell idx along axis a.
    double coord(std::int64_t idx, int a) const {
        return (cell_coords(idx)[a] + 0.5) * spacing[a];
    }

    bool same_shape(const Grid& o) const {
        return ndim == o.ndim && dims == o.dims && spacing == o.spacing;
    }
};

// One Vec per active axis; component a has grid.faces(a) entries and is
// indexed like a cell array with extent dims[a]-1 along axis a.
struct FaceField {
    std::array<Vec, 3> c;

    FaceField() = default;
    explicit FaceField(const Grid& g) {
        for (int a = 0; a < g.ndim; ++a) c[a] = Vec::Zero(g.faces(a));
    }
    void setZero() {
        for (auto& v : c)
            if (v.size()) v.setZero();
    }
    FaceField& operator+=(const FaceField& o) {
        for (int a = 0; a < 3; ++a)
            if (c[a].size()) c[a] += o.c[a];
        return *this;
    }
    FaceField& operator-=(const FaceField& o) {
        for (int a = 0; a < 3; ++a)
            if (c[a].size()) c[a] -= o.c[a];
        return *this;
    }
    FaceField& operator*=(double s) {
        for (auto& v : c)
            if (v.size()) v *= s;
        return *this;
    }
};

namespace detail {

// Iterate faces of one axis; fn(face_linear_index, left_cell, right_cell).
template <typename F>
inline void for_each_face(const Grid& g, int axis, F&& fn) {
    const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
    const std::int64_t sx = 1, sy = nx, sz = std::int64_t(nx) * ny;
    const std::int64_t stride = (axis == 0) ? sx : (axis == 1) ? sy : sz;
    const int fx = (axis == 0) ? nx - 1 : nx;
    const int fy = (axis == 1) ? ny - 1 : ny;
    const int fz = (axis == 2) ? nz - 1 : nz;
    std::int64_t f = 0;
    for (int iz = 0; iz < fz; ++iz)
        for (int iy = 0; iy < fy; ++iy)
            for (int ix = 0; ix < fx; ++ix, ++f) {
                const std::int64_t left = g.cell_index(ix, iy, iz);
                fn(f, left, left + stride);
            }
}

}  // namespace detail

// grad: cell scalar -> interior faces, (v_right - v_left)/h.
inline FaceField grad(const Grid& g, const Vec& v) {
    FaceField out(g);
    for (int a = 0; a < g.ndim; ++a) {
        const double ih = 1.0 / g.spacing[a];
        Vec& comp = out.c[a];
        detail::for_each_face(g, a, [&](std::int64_t f, std::int64_t l, std::int64_t r) {
            comp[f] = (v[r] - v[l]) * ih;
        });
    }
    return out;
}

// div: faces -> cells, with zero flux through boundary faces. Face f sits
// to the right of cell l and to the left of cell r.
inline Vec div(const Grid& g, const FaceField& u) {
    Vec out = Vec::Zero(g.cells());
    for (int a = 0; a < g.ndim; ++a) {
        const double ih = 1.0 / g.spacing[a];
        const Vec& comp = u.c[a];
        detail::for_each_face(g, a, [&](std::int64_t f, std::int64_t l, std::int64_t r) {
            out[l] += comp[f] * ih;
            out[r] -= comp[f] * ih;
        });
    }
    return out;
}

// Arithmetic mean of a cell scalar on interior faces.
inline FaceField cell_to_face(const Grid& g, const Vec& v) {
    FaceField out(g);
    for (int a = 0; a < g.ndim; ++a) {
        Vec& comp = out.c[a];
        detail::for_each_face(g, a, [&](std::int64_t f, std::int64_t l, std::int64_t r) {
            comp[f] = 0.5 * (v[l] + v[r]);
        });
    }
    return out;
}

// Cell-centered dot product of two face fields. Per axis the two adjacent
// face products are averaged; absent boundary faces contribute zero, which
// is the no-penetration closure.
inline Vec face_dot_to_cell(const Grid& g, const FaceField& u, const FaceField& w) {
    Vec out = Vec::Zero(g.cells());
    for (int a = 0; a < g.ndim; ++a) {
        const Vec& ua = u.c[a];
        const Vec& wa = w.c[a];
        detail::for_each_face(g, a, [&](std::int64_t f, std::int64_t l, std::int64_t r) {
            const double p = 0.5 * ua[f] * wa[f];
            out[l] += p;
            out[r] += p;
        });
    }
    return out;
}

// Cell-centered average of one face component (signed).
inline Vec face_component_to_cell(const Grid& g, const FaceField& u, int axis) {
    Vec out = Vec::Zero(g.cells());
    const Vec& ua = u.c[axis];
    detail::for_each_face(g, axis, [&](std::int64_t f, std::int64_t l, std::int64_t r) {
        out[l] += 0.5 * ua[f];
        out[r] += 0.5 * ua[f];
    });
    return out;
}

// Cell-centered vector magnitude of a face field (component-wise average).
inline Vec face_magnitude_to_cell(const Grid& g, const FaceField& u) {
    Vec sq = Vec::Zero(g.cells());
    for (int a = 0; a < g.ndim; ++a) {
        const Vec& ua = u.c[a];
        detail::for_each_face(g, a, [&](std::int64_t f, std::int64_t l, std::int64_t r) {
            const double p = 0.5 * ua[f] * ua[f];
            sq[l] += p;
            sq[r] += p;
        });
    }
    return sq.cwiseSqrt();
}

inline double dot_cells(const Grid& g, const Vec& a, const Vec& b) {
    return g.cell_volume() * a.dot(b);
}

inline double dot_faces(const Grid& g, const FaceField& a, const FaceField& b) {
    double s = 0.0;
    for (int ax = 0; ax < g.ndim; ++ax) s += a.c[ax].dot(b.c[ax]);
    return g.cell_volume() * s;
}

inline double norm_cells(const Grid& g, const Vec& a) {
    return std::sqrt(dot_cells(g, a, a));
}

inline double norm_faces(const Grid& g, const FaceField& a) {
    return std::sqrt(dot_faces(g, a, a));
}

inline double mean_value(const Vec& v) {
    return v.size() ? v.mean() : 0.0;
}

// Discrete L^p norm over cells with cell-volume weights.
inline double lp_norm_cells(const Grid& g, const Vec& v, double p) {
    const double dv = g.cell_volume();
    double s = 0.0;
    for (std::int64_t i = 0; i < v.size(); ++i) s += std::pow(std::abs(v[i]), p) * dv;
    return std::pow(s, 1.0 / p);
}

}  // namespace kwk
