#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fd_operators.hpp"

namespace r3s2 {

/// Second-chart angles of n, with the limit (+-pi/2, 0) at the chart singularity n = +-e_x.
inline NormalAngles kernel_angles(const Vec3& n) {
    if (std::hypot(n.y(), n.z()) < 1e-12) return {n.x() > 0 ? 0.5 * kPi : -0.5 * kPi, 0.0};
    return angles_from_normal(n);
}

/**
 * @brief k-step resolvent of the Heisenberg-approximated completion kernel.
 *
 * 3/(4 (D44 pi)^2) lambda^k z^(k-5)/(k-1)! e^(-lambda z)
 *   exp(-(12(x - z b/2)^2 + z^2 b^2)/(4 z^3 D44)) exp(-(12(y + z g/2)^2 + z^2 g^2)/(4 z^3 D44)),
 * and 0 for z <= 0.
 */
inline double kresolvent_kernel(double x, double y, double z, double beta, double gamma, double lambda, int k,
                                double D44) {
    if (k < 1) throw Error("kresolvent_kernel needs k >= 1");
    if (z <= 0) return 0.0;
    const double pre = 3 / (4 * (D44 * kPi) * (D44 * kPi)) * std::pow(lambda, k) * std::pow(z, k - 5) / std::tgamma(k);
    const double ex = (12 * (x - 0.5 * z * beta) * (x - 0.5 * z * beta) + z * z * beta * beta) / (4 * z * z * z * D44);
    const double ey = (12 * (y + 0.5 * z * gamma) * (y + 0.5 * z * gamma) + z * z * gamma * gamma) / (4 * z * z * z * D44);
    return pre * std::exp(-lambda * z - ex - ey);
}

inline double kresolvent_kernel(const Vec3& y, const Vec3& n, double lambda, int k, double D44) {
    const NormalAngles a = kernel_angles(n);
    return kresolvent_kernel(y.x(), y.y(), y.z(), a.beta, a.gamma, lambda, k, D44);
}

/**
 * @brief SE(2) hypoelliptic heat kernel estimate p_t(x, y, theta), x along the fibre.
 *
 * 1/(4 pi t^2 D33 D44) exp(-1/(4 t c^2) sqrt((th^2/D44 + (th y/2 + q x)^2/D33)^2 + (-x th/2 + q y)^2/(D33 D44)))
 * with q = (th/2)/tan(th/2). For |th| < pi/10 q comes from its Taylor series through th^6, which
 * meets the closed form to 1e-10 at the switch; the shorter guard cos(th/2)/(1 - th^2/24) is off
 * by th^4/1920 there and makes the kernel jump.
 */
inline double se2_kernel_estimate(double x, double y, double theta, double t, double D33, double D44, double c = 1) {
    const double t2 = theta * theta;
    const double q = std::abs(theta) < kPi / 10 ? 1 - t2 / 12 - t2 * t2 / 720 - t2 * t2 * t2 / 30240
                                                : 0.5 * theta / std::tan(0.5 * theta);
    const double a = theta * theta / D44 + (0.5 * theta * y + q * x) * (0.5 * theta * y + q * x) / D33;
    const double b = (-0.5 * x * theta + q * y) * (-0.5 * x * theta + q * y) / (D33 * D44);
    return std::exp(-std::sqrt(a * a + b) / (4 * t * c * c)) / (4 * kPi * t * t * D33 * D44);
}

/// N(D33, D44, t) = sqrt(pi) t sqrt(t D33) sqrt(D33 D44) / (8 sqrt 2)
inline double enhancement_normalization(double t, double D33, double D44) {
    return std::sqrt(kPi) * t * std::sqrt(t * D33) * std::sqrt(D33 * D44) / (8 * std::sqrt(2.0));
}

/// Product approximation N p(z/2, x, b) p(z/2, -y, g) of the contour-enhancement kernel.
inline double enhancement_kernel(double x, double y, double z, double beta, double gamma, double t, double D33,
                                 double D44, double c = 1) {
    return enhancement_normalization(t, D33, D44) * se2_kernel_estimate(0.5 * z, x, beta, t, D33, D44, c) *
           se2_kernel_estimate(0.5 * z, -y, gamma, t, D33, D44, c);
}

inline double enhancement_kernel(const Vec3& y, const Vec3& n, double t, double D33, double D44, double c = 1) {
    const NormalAngles a = kernel_angles(n);
    return enhancement_kernel(y.x(), y.y(), y.z(), a.beta, a.gamma, t, D33, D44, c);
}

/// (4 pi t^2 D33 D44)^-2 exp(-|g|^2 / (4t))
inline double gaussian_estimate_kernel(const SE3& g, double t, double D33, double D44) {
    const double pre = 1 / (4 * kPi * t * t * D33 * D44);
    return pre * pre * std::exp(-weighted_modulus(g, D33, D44) / (4 * t));
}

/**
 * Section (y, R_x(gamma) R_y(beta)) of n. The rotation vector comes from the quaternion
 * (cg cb, cb sg, cg sb, sg sb) of half angles, which stays defined up to the half turn at n = -e_z
 * where the matrix logarithm gives up.
 */
inline double gaussian_estimate_kernel(const Vec3& y, const Vec3& n, double t, double D33, double D44) {
    const NormalAngles a = kernel_angles(n);
    const double cb = std::cos(0.5 * a.beta), sb = std::sin(0.5 * a.beta);
    const double cg = std::cos(0.5 * a.gamma), sg = std::sin(0.5 * a.gamma);
    const Vec3 v(cb * sg, cg * sb, sg * sb);
    const double vn = v.norm(), q = 2 * std::atan2(vn, cg * cb);
    LieVector c;
    c.tail<3>() = vn > 0 ? Vec3(q / vn * v) : Vec3::Zero();
    c.head<3>() = detail::translation_log(c.tail<3>(), y);
    const double pre = 1 / (4 * kPi * t * t * D33 * D44);
    return pre * pre * std::exp(-weighted_modulus(c, D33, D44) / (4 * t));
}

/**
 * @brief Average of p(R_{e_z,a} y, R_{e_z,a} n) over a in [0, 2 pi), by the trapezoid rule.
 *
 * The closed-form kernels above are written in the alpha~ = 0 section and are not exactly
 * invariant under rotations about e_z, so the group convolution would depend on the choice
 * of R_n'. Averaging projects them onto invariant kernels. The result is exactly invariant
 * under multiples of 2 pi / samples; for other angles the error falls off once the samples
 * resolve the kernel's angular width (about 4e-4 of the peak at 64 samples for D44 = 0.04).
 */
inline KernelFn alpha_average(KernelFn p, int samples = 64) {
    if (samples < 1) throw Error("alpha_average needs at least one sample");
    std::vector<Mat3> Q(samples);
    for (int i = 0; i < samples; ++i) Q[i] = rot_z(2 * kPi * i / samples);
    return [p = std::move(p), Q = std::move(Q)](const Vec3& y, const Vec3& n) {
        double s = 0;
        for (const Mat3& q : Q) s += p(q * y, q * n);
        return s / static_cast<double>(Q.size());
    };
}

/// Kernel mass sum_d sum_l p(h d, n_l) delta_l h^3 over offsets |d|_inf <= r.
inline double kernel_window_mass(const KernelFn& p, const Tessellation& T, double h, int r) {
    const int No = T.size();
    std::vector<double> slab(2 * r + 1, 0.0);
    parallel_for(slab.size(), [&](std::size_t i) {
        const int dx = static_cast<int>(i) - r;
        double s = 0;
        for (int dy = -r; dy <= r; ++dy)
            for (int dz = -r; dz <= r; ++dz)
                for (int l = 0; l < No; ++l) s += p(h * Vec3(dx, dy, dz), T.vertices[l]) * T.measures[l];
        slab[i] = s;
    }, 1);
    double m = 0;
    for (double s : slab) m += s;
    return m * h * h * h;
}

/**
 * @brief Smallest window radius holding `fraction` of the kernel mass found within max_radius.
 *
 * Used with the Gaussian estimate to pick a default convolution window.
 */
inline int kernel_window_radius(const KernelFn& p, const Tessellation& T, double h, double fraction = 0.99,
                                int max_radius = 12) {
    const int R = max_radius, No = T.size();
    // ring[r] = mass on offsets with |d|_inf == r
    std::vector<double> ring(R + 1, 0.0);
    std::vector<std::vector<double>> part(2 * R + 1, std::vector<double>(R + 1, 0.0));
    parallel_for(part.size(), [&](std::size_t i) {
        const int dx = static_cast<int>(i) - R;
        for (int dy = -R; dy <= R; ++dy)
            for (int dz = -R; dz <= R; ++dz) {
                const int r = std::max({std::abs(dx), std::abs(dy), std::abs(dz)});
                for (int l = 0; l < No; ++l) part[i][r] += p(h * Vec3(dx, dy, dz), T.vertices[l]) * T.measures[l];
            }
    }, 1);
    for (const auto& pr : part)
        for (int r = 0; r <= R; ++r) ring[r] += pr[r];
    double total = 0;
    for (double m : ring) total += m;
    double acc = 0;
    for (int r = 0; r <= R; ++r) {
        acc += ring[r];
        if (acc >= fraction * total) return r;
    }
    return R;
}

/**
 * @brief Linear group convolution sum_{y',l'} p(R_{n'}^T (y - y'), R_{n'}^T n_l) U(y', n_l') delta_l' h^3.
 *
 * Offsets |y - y'|_inf <= radius voxels. With check_window the kernel mass outside the
 * window (measured against a window of radius 2 radius + 1) must stay below 1%, else
 * WindowTooSmall.
 */
inline OrientationField r3s2_convolve(const OrientationField& U, const KernelFn& p, int radius,
                                      Boundary b = Boundary::periodic, bool check_window = true) {
    const Tessellation& T = *U.tess;
    const int No = U.directions();
    if (check_window) {
        const double inner = kernel_window_mass(p, T, U.h, radius);
        const double outer = kernel_window_mass(p, T, U.h, 2 * radius + 1);
        if (outer > 0 && outer - inner > 0.01 * outer) throw WindowTooSmall("kernel mass outside the window exceeds 1%");
    }
    std::vector<std::array<int, 3>> offs;
    for (int dx = -radius; dx <= radius; ++dx)
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dz = -radius; dz <= radius; ++dz) offs.push_back({dx, dy, dz});
    const std::size_t D = offs.size(), NN = std::size_t(No) * No;
    // K[(d * No + l') * No + l], already multiplied by delta_l' h^3
    std::vector<double> K(D * NN);
    std::vector<Mat3> Rt(No);
    for (int l = 0; l < No; ++l) Rt[l] = rotation_onto(T.vertices[l]).transpose();
    const double h3 = U.h * U.h * U.h;
    parallel_for(D, [&](std::size_t d) {
        const Vec3 y = U.h * Vec3(offs[d][0], offs[d][1], offs[d][2]);
        for (int lp = 0; lp < No; ++lp) {
            const Vec3 ry = Rt[lp] * y;
            double* row = &K[(d * No + lp) * No];
            for (int l = 0; l < No; ++l) row[l] = p(ry, Rt[lp] * T.vertices[l]) * T.measures[lp] * h3;
        }
    }, 1);
    std::vector<char> active(U.voxels(), 0);
    for (std::size_t v = 0; v < U.voxels(); ++v)
        for (int l = 0; l < No && !active[v]; ++l) active[v] = U.data[v * No + l] != 0;

    OrientationField out(U.dims, U.h, U.tess, 0.0);
    out.is_signed = U.is_signed;
    parallel_for(U.voxels(), [&](std::size_t v) {
        const auto c = U.voxel_coords(v);
        double* o = &out.data[v * No];
        for (std::size_t d = 0; d < D; ++d) {
            long src = detail::neighbor_voxel(U, c, {-offs[d][0], -offs[d][1], -offs[d][2]}, b);
            if (src < 0 || !active[src]) continue;
            const double* u = &U.data[static_cast<std::size_t>(src) * No];
            for (int lp = 0; lp < No; ++lp) {
                if (u[lp] == 0) continue;
                const double* row = &K[(d * No + lp) * No];
                for (int l = 0; l < No; ++l) o[l] += row[l] * u[lp];
            }
        }
    }, 1);
    return out;
}

/// Unit point source at (voxel, direction l), scaled so that its mass is 1.
inline OrientationField delta_field(std::array<int, 3> dims, double h, std::shared_ptr<const Tessellation> t,
                                    std::array<int, 3> voxel, int l) {
    OrientationField U(dims, h, std::move(t));
    U.at(voxel[0], voxel[1], voxel[2], l) = 1 / (U.tess->measures[l] * h * h * h);
    return U;
}

/// Samples p(y - y0, n_l) on the grid around voxel y0 (for inspection and comparisons).
inline OrientationField sample_kernel(const KernelFn& p, std::array<int, 3> dims, double h,
                                      std::shared_ptr<const Tessellation> t, std::array<int, 3> origin) {
    OrientationField K(dims, h, std::move(t));
    const int No = K.directions();
    parallel_for(K.voxels(), [&](std::size_t v) {
        const auto c = K.voxel_coords(v);
        const Vec3 y = h * Vec3(c[0] - origin[0], c[1] - origin[1], c[2] - origin[2]);
        for (int l = 0; l < No; ++l) K.data[v * No + l] = p(y, K.tess->vertices[l]);
    }, 1);
    return K;
}

}  // namespace r3s2
