#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "detail/parallel.hpp"
#include "field.hpp"

namespace r3s2 {

/// Spatial boundary rule for shifted samples that leave the grid.
enum class Boundary { reflecting, periodic, zero };
enum class Side { forward, backward, central };
/// cotangent: Laplace-Beltrami with cotangent weights (default).
/// interpolated: three-point differences along A4, A5 with spherical interpolation.
enum class AngularScheme { cotangent, interpolated };

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct SpatialTap {
    std::array<int, 3> offset;
    double w;
};

/**
 * @brief Interpolation footprints of all left-invariant shifts.
 *
 * spatial[l][p][s]: trilinear taps for y + s h R_{n_l} e_{p+1}, s = +1 (index 0) or -1 (index 1).
 * angular[l][p][s]: tessellation weights for R_{n_l} R_{e_{p+1}, s h_a} e_z, p = 0 (A4), 1 (A5).
 */
struct Stencils {
    std::shared_ptr<const Tessellation> tess;
    double h = 1;    ///< spatial step (same units as the field spacing)
    double h_a = 0;  ///< angular step
    std::vector<std::array<std::array<std::vector<SpatialTap>, 2>, 3>> spatial;
    std::vector<std::array<std::array<InterpolationWeights, 2>, 2>> angular;
};

/// Precomputes every shift footprint; h_a <= 0 selects the tessellation's angular_step.
inline Stencils make_stencils(std::shared_ptr<const Tessellation> tess, double grid_h, double h_a = 0, double step = 0) {
    Stencils S;
    S.tess = tess;
    S.h = step > 0 ? step : grid_h;
    S.h_a = h_a > 0 ? h_a : tess->angular_step;
    const int No = tess->size();
    S.spatial.resize(No);
    S.angular.resize(No);
    const double ratio = S.h / grid_h;
    for (int l = 0; l < No; ++l) {
        const Mat3 R = rotation_onto(tess->vertices[l]);
        for (int p = 0; p < 3; ++p) {
            for (int s = 0; s < 2; ++s) {
                const Vec3 d = (s == 0 ? 1.0 : -1.0) * ratio * R.col(p);
                std::array<int, 3> base;
                std::array<double, 3> frac;
                for (int k = 0; k < 3; ++k) {
                    double f = std::floor(d[k]);
                    base[k] = static_cast<int>(f);
                    frac[k] = d[k] - f;
                }
                auto& taps = S.spatial[l][p][s];
                for (int c = 0; c < 8; ++c) {
                    double w = 1;
                    std::array<int, 3> off;
                    for (int k = 0; k < 3; ++k) {
                        int bit = (c >> k) & 1;
                        off[k] = base[k] + bit;
                        w *= bit ? frac[k] : 1 - frac[k];
                    }
                    if (w != 0) taps.push_back({off, w});
                }
            }
        }
        if (tess->has_triangles()) {
            for (int p = 0; p < 2; ++p)
                for (int s = 0; s < 2; ++s) {
                    const double a = (s == 0 ? 1.0 : -1.0) * S.h_a;
                    const Mat3 Q = p == 0 ? rot_x(a) : rot_y(a);
                    S.angular[l][p][s] = tess->interpolate(R * Q.col(2));
                }
        }
    }
    return S;
}

namespace detail {

/// Maps a possibly out-of-range index; -1 means "outside, value zero".
inline int map_index(int i, int n, Boundary b) {
    if (i >= 0 && i < n) return i;
    switch (b) {
        case Boundary::periodic: return ((i % n) + n) % n;
        case Boundary::reflecting: {
            int m = ((i % (2 * n)) + 2 * n) % (2 * n);  // half-sample symmetric
            return m < n ? m : 2 * n - 1 - m;
        }
        case Boundary::zero: return -1;
    }
    return -1;
}

inline long neighbor_voxel(const OrientationField& U, const std::array<int, 3>& c, const std::array<int, 3>& off, Boundary b) {
    int x = map_index(c[0] + off[0], U.dims[0], b);
    int y = map_index(c[1] + off[1], U.dims[1], b);
    int z = map_index(c[2] + off[2], U.dims[2], b);
    if (x < 0 || y < 0 || z < 0) return -1;
    return static_cast<long>(U.voxel_index(x, y, z));
}

inline double spatial_sample(const OrientationField& U, const std::vector<double>& data, std::size_t v, int l,
                             const std::vector<SpatialTap>& taps, Boundary b) {
    const auto c = U.voxel_coords(v);
    const int No = U.directions();
    double s = 0;
    for (const auto& t : taps) {
        long nv = neighbor_voxel(U, c, t.offset, b);
        if (nv >= 0) s += t.w * data[static_cast<std::size_t>(nv) * No + l];
    }
    return s;
}

inline double angular_sample(const double* u, const InterpolationWeights& w) {
    return w.weight[0] * u[w.vertex[0]] + w.weight[1] * u[w.vertex[1]] + w.weight[2] * u[w.vertex[2]];
}

}  // namespace detail

/// (S U)(y, n_l) for the shift of generator i in {1..5} in direction sign (+1 or -1).
inline OrientationField shift(const OrientationField& U, const Stencils& S, int i, int sign, Boundary b) {
    OrientationField out = U;
    const int No = U.directions();
    const int s = sign > 0 ? 0 : 1;
    parallel_for(U.voxels(), [&](std::size_t v) {
        for (int l = 0; l < No; ++l) {
            double val;
            if (i <= 3)
                val = detail::spatial_sample(U, U.data, v, l, S.spatial[l][i - 1][s], b);
            else
                val = detail::angular_sample(&U.data[v * No], S.angular[l][i - 4][s]);
            out.data[v * No + l] = val;
        }
    });
    return out;
}

/// Discrete left-invariant derivative A_i U, i in {1..5}.
inline OrientationField apply_A(int i, Side side, const OrientationField& U, const Stencils& S,
                                Boundary b = Boundary::reflecting) {
    if (i < 1 || i > 5) throw Error("apply_A: generator index must be in 1..5");
    const double step = i <= 3 ? S.h : S.h_a;
    OrientationField out = U;
    if (side == Side::forward) {
        OrientationField p = shift(U, S, i, +1, b);
        for (std::size_t k = 0; k < U.size(); ++k) out.data[k] = (p.data[k] - U.data[k]) / step;
    } else if (side == Side::backward) {
        OrientationField m = shift(U, S, i, -1, b);
        for (std::size_t k = 0; k < U.size(); ++k) out.data[k] = (U.data[k] - m.data[k]) / step;
    } else {
        OrientationField p = shift(U, S, i, +1, b), m = shift(U, S, i, -1, b);
        for (std::size_t k = 0; k < U.size(); ++k) out.data[k] = (p.data[k] - m.data[k]) / (2 * step);
    }
    out.is_signed = true;
    return out;
}

/// (S_+ U - 2U + S_- U) / step^2 along generator i.
inline OrientationField second_difference(int i, const OrientationField& U, const Stencils& S,
                                          Boundary b = Boundary::reflecting) {
    const double step = i <= 3 ? S.h : S.h_a;
    OrientationField p = shift(U, S, i, +1, b), m = shift(U, S, i, -1, b);
    OrientationField out = U;
    for (std::size_t k = 0; k < U.size(); ++k) out.data[k] = (p.data[k] - 2 * U.data[k] + m.data[k]) / (step * step);
    out.is_signed = true;
    return out;
}

inline OrientationField second_difference_A3(const OrientationField& U, const Stencils& S,
                                             Boundary b = Boundary::reflecting) {
    return second_difference(3, U, S, b);
}

/// Angular Laplace-Beltrami (A4)^2 + (A5)^2 applied per voxel.
inline OrientationField laplace_beltrami(const OrientationField& U, const Stencils& S,
                                         AngularScheme scheme = AngularScheme::cotangent) {
    if (scheme == AngularScheme::interpolated) {
        OrientationField a = second_difference(4, U, S), c = second_difference(5, U, S);
        for (std::size_t k = 0; k < U.size(); ++k) a.data[k] += c.data[k];
        return a;
    }
    const Tessellation& T = *U.tess;
    const int No = U.directions();
    OrientationField out = U;
    out.is_signed = true;
    parallel_for(U.voxels(), [&](std::size_t v) {
        const double* u = &U.data[v * No];
        for (int l = 0; l < No; ++l) {
            double s = 0;
            for (const auto& nb : T.laplacian[l]) s += nb.weight * (u[nb.vertex] - u[l]);
            out.data[v * No + l] = s / T.measures[l];
        }
    });
    return out;
}

/// Coefficients of the linear left-invariant generator.
struct GeneratorSpec {
    double D11 = 0, D33 = 0, D44 = 0;
    double a3 = 0;  ///< convection along A3, discretized upwind
    AngularScheme angular = AngularScheme::cotangent;
};

/**
 * @brief Sparse matrix of D11(A1^2+A2^2) + D33 A3^2 + D44 Delta_S2 - a3 A3.
 *
 * Second derivatives use three-point differences (S_+ - 2I + S_-)/h^2, so every row of
 * I + dt J is non-negative up to the explicit stability bound. Convection uses the
 * backward difference for a3 > 0 and the forward one for a3 < 0.
 */
inline SparseMatrix assemble_generator(const GeneratorSpec& g, const OrientationField& geom, const Stencils& S,
                                       Boundary b = Boundary::reflecting) {
    const int No = geom.directions();
    const std::size_t n = geom.size();
    const Tessellation& T = *geom.tess;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n * 12);
    const double h2 = S.h * S.h, ha2 = S.h_a * S.h_a;
    for (std::size_t v = 0; v < geom.voxels(); ++v) {
        const auto c = geom.voxel_coords(v);
        for (int l = 0; l < No; ++l) {
            const long row = static_cast<long>(v * No + l);
            double diag = 0;
            auto add_spatial = [&](const std::vector<SpatialTap>& taps, double coef) {
                for (const auto& t : taps) {
                    long nv = detail::neighbor_voxel(geom, c, t.offset, b);
                    if (nv >= 0) trip.emplace_back(row, nv * No + l, coef * t.w);
                }
            };
            const double Dp[3] = {g.D11, g.D11, g.D33};
            for (int p = 0; p < 3; ++p) {
                if (Dp[p] == 0) continue;
                add_spatial(S.spatial[l][p][0], Dp[p] / h2);
                add_spatial(S.spatial[l][p][1], Dp[p] / h2);
                diag -= 2 * Dp[p] / h2;
            }
            if (g.a3 > 0) {
                add_spatial(S.spatial[l][2][1], g.a3 / S.h);
                diag -= g.a3 / S.h;
            } else if (g.a3 < 0) {
                add_spatial(S.spatial[l][2][0], -g.a3 / S.h);
                diag += g.a3 / S.h;
            }
            if (g.D44 != 0) {
                const long vb = static_cast<long>(v * No);
                if (g.angular == AngularScheme::cotangent) {
                    double s = 0;
                    for (const auto& nb : T.laplacian[l]) {
                        trip.emplace_back(row, vb + nb.vertex, g.D44 * nb.weight / T.measures[l]);
                        s += nb.weight;
                    }
                    diag -= g.D44 * s / T.measures[l];
                } else {
                    for (int p = 0; p < 2; ++p)
                        for (int s = 0; s < 2; ++s) {
                            const auto& w = S.angular[l][p][s];
                            for (int k = 0; k < 3; ++k) trip.emplace_back(row, vb + w.vertex[k], g.D44 * w.weight[k] / ha2);
                        }
                    diag -= 4 * g.D44 / ha2;
                }
            }
            if (diag != 0) trip.emplace_back(row, row, diag);
        }
    }
    SparseMatrix J(static_cast<long>(n), static_cast<long>(n));
    J.setFromTriplets(trip.begin(), trip.end());
    J.makeCompressed();
    return J;
}

/// y = M x, rows split over workers; each row sums in a fixed order.
inline void spmv(const SparseMatrix& M, const std::vector<double>& x, std::vector<double>& y) {
    y.resize(static_cast<std::size_t>(M.rows()));
    const int* outer = M.outerIndexPtr();
    const int* inner = M.innerIndexPtr();
    const double* val = M.valuePtr();
    parallel_for(static_cast<std::size_t>(M.rows()), [&](std::size_t r) {
        double s = 0;
        for (int k = outer[r]; k < outer[r + 1]; ++k) s += val[k] * x[inner[k]];
        y[r] = s;
    }, 2048);
}

/// The same generator applied through shift and difference calls (no matrix).
inline OrientationField apply_generator(const GeneratorSpec& g, const OrientationField& U, const Stencils& S,
                                        Boundary b = Boundary::reflecting) {
    OrientationField out(U.dims, U.h, U.tess, 0.0);
    out.is_signed = true;
    auto acc = [&](const OrientationField& f, double c) {
        for (std::size_t k = 0; k < U.size(); ++k) out.data[k] += c * f.data[k];
    };
    if (g.D11 != 0) {
        acc(second_difference(1, U, S, b), g.D11);
        acc(second_difference(2, U, S, b), g.D11);
    }
    if (g.D33 != 0) acc(second_difference_A3(U, S, b), g.D33);
    if (g.a3 > 0) acc(apply_A(3, Side::backward, U, S, b), -g.a3);
    if (g.a3 < 0) acc(apply_A(3, Side::forward, U, S, b), -g.a3);
    if (g.D44 != 0) acc(laplace_beltrami(U, S, g.angular), g.D44);
    return out;
}

}  // namespace r3s2
