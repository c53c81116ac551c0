#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "diffusion.hpp"

namespace r3s2 {

enum class MorphMode { erosion, dilation };

struct MorphParams {
    double D11 = 0, D44 = 0;
    double eta = 1;  ///< Hamiltonian exponent, eta >= 1/2
    double t = 0, dt = 0;
    Boundary boundary = Boundary::reflecting;
    double h_a = 0;  ///< 0 selects the tessellation's angular_step
    // adaptive angular erosion: D44(U) = phi(Delta_LB U - c), phi(x) = D44 sign(x) |x|^phi_exponent
    double c = 0;
    double phi_exponent = 1.0 / 3.0;
};

namespace detail {

/// Upwind one-sided slope magnitude: erosion pulls from the lower side, dilation from the higher.
inline double upwind_slope(double fwd, double bwd, MorphMode mode) {
    return mode == MorphMode::erosion ? std::max({bwd, -fwd, 0.0}) : std::max({fwd, -bwd, 0.0});
}

struct MorphRates {
    std::vector<double> H;     ///< weighted squared gradient per point
    std::vector<double> cfl;   ///< dt * cfl <= 1 keeps the step monotone
};

/**
 * Squared upwind gradients. angular_coef, when given, replaces D44 pointwise and its sign
 * selects dilation (< 0) or erosion (> 0).
 */
inline MorphRates morph_rates(const OrientationField& W, const Stencils& S, const MorphParams& p, MorphMode mode,
                              const std::vector<double>* angular_coef = nullptr) {
    const int No = W.directions();
    MorphRates r;
    r.H.assign(W.size(), 0.0);
    r.cfl.assign(W.size(), 0.0);
    parallel_for(W.voxels(), [&](std::size_t v) {
        const double* u = &W.data[v * No];
        for (int l = 0; l < No; ++l) {
            const std::size_t k = v * No + l;
            double H = 0, lin = 0;
            MorphMode m = mode;
            double D44 = p.D44;
            if (angular_coef) {
                D44 = std::abs((*angular_coef)[k]);
                m = (*angular_coef)[k] < 0 ? MorphMode::dilation : MorphMode::erosion;
            }
            if (p.D11 > 0 && !angular_coef) {
                for (int q = 0; q < 2; ++q) {
                    double sp = spatial_sample(W, W.data, v, l, S.spatial[l][q][0], p.boundary);
                    double sm = spatial_sample(W, W.data, v, l, S.spatial[l][q][1], p.boundary);
                    double g = upwind_slope((sp - u[l]) / S.h, (u[l] - sm) / S.h, m);
                    H += p.D11 * g * g;
                    lin += p.D11 * g / S.h;
                }
            }
            if (D44 > 0) {
                for (int q = 0; q < 2; ++q) {
                    double sp = angular_sample(u, S.angular[l][q][0]);
                    double sm = angular_sample(u, S.angular[l][q][1]);
                    double g = upwind_slope((sp - u[l]) / S.h_a, (u[l] - sm) / S.h_a, m);
                    H += D44 * g * g;
                    lin += D44 * g / S.h_a;
                }
            }
            r.H[k] = H;
            r.cfl[k] = H > 0 ? std::pow(H, p.eta - 1) * lin : 0.0;
        }
    });
    return r;
}

inline double max_of(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m = std::max(m, x);
    return m;
}

/**
 * Integrates to p.t; each step is cut further when the explicit upwind step would lose
 * monotonicity. dt = 0 leaves the whole interval to those cuts, i.e. 0.9 of the local bound.
 */
template <class StepFn>
OrientationField march(const OrientationField& U, const MorphParams& p, StepFn&& one_step) {
    if (p.t <= 0) return U;
    if (p.dt < 0) throw Error("morphology needs dt >= 0");
    const long n = p.dt > 0 ? static_cast<long>(std::ceil(p.t / p.dt - 1e-9)) : 1;
    const double dt = p.t / static_cast<double>(n);
    OrientationField W = U;
    for (long s = 0; s < n; ++s) {
        double left = dt;
        while (left > 0) left -= one_step(W, left);
    }
    return W;
}

}  // namespace detail

/**
 * @brief One explicit upwind step W -/+ dt/(2 eta) (D11(g1^2+g2^2) + D44(g4^2+g5^2))^eta.
 *
 * g_i are one-sided differences chosen in the upwind direction; both are discarded at a
 * local extremum of the respective sign, which keeps the scheme monotone.
 */
inline OrientationField upwind_step(const OrientationField& W, const MorphParams& p, MorphMode mode, double dt,
                                    const Stencils& S) {
    const auto r = detail::morph_rates(W, S, p, mode);
    OrientationField out = W;
    const double sgn = mode == MorphMode::erosion ? -1.0 : 1.0;
    for (std::size_t k = 0; k < W.size(); ++k)
        if (r.H[k] > 0) out.data[k] += sgn * dt / (2 * p.eta) * std::pow(r.H[k], p.eta);
    return out;
}

inline OrientationField run_morphology(const OrientationField& U, const MorphParams& p, MorphMode mode) {
    if (p.eta < 0.5) throw Error("eta must be at least 1/2");
    const Stencils S = make_stencils(U.tess, U.h, p.h_a);
    const double sgn = mode == MorphMode::erosion ? -1.0 : 1.0;
    return detail::march(U, p, [&](OrientationField& W, double left) {
        const auto r = detail::morph_rates(W, S, p, mode);
        const double c = detail::max_of(r.cfl);
        const double dt = c > 0 ? std::min(left, 0.9 / c) : left;
        for (std::size_t k = 0; k < W.size(); ++k)
            if (r.H[k] > 0) W.data[k] += sgn * dt / (2 * p.eta) * std::pow(r.H[k], p.eta);
        return dt;
    });
}

inline OrientationField run_erosion(const OrientationField& U, const MorphParams& p) {
    return run_morphology(U, p, MorphMode::erosion);
}
inline OrientationField run_dilation(const OrientationField& U, const MorphParams& p) {
    return run_morphology(U, p, MorphMode::dilation);
}

/**
 * @brief Angular erosion with data-driven coefficient phi(Delta_LB W - c).
 *
 * Positive coefficient erodes, negative dilates, on the angular terms only.
 */
inline OrientationField run_adaptive_erosion(const OrientationField& U, const MorphParams& p) {
    const Stencils S = make_stencils(U.tess, U.h, p.h_a);
    return detail::march(U, p, [&](OrientationField& W, double left) {
        OrientationField L = laplace_beltrami(W, S);
        std::vector<double> coef(W.size());
        for (std::size_t k = 0; k < W.size(); ++k) {
            double s = L.data[k] - p.c;
            coef[k] = p.D44 * (s < 0 ? -1.0 : 1.0) * std::pow(std::abs(s), p.phi_exponent);
        }
        const auto r = detail::morph_rates(W, S, p, MorphMode::erosion, &coef);
        const double c = detail::max_of(r.cfl);
        const double dt = c > 0 ? std::min(left, 0.9 / c) : left;
        for (std::size_t k = 0; k < W.size(); ++k)
            if (r.H[k] > 0) W.data[k] += (coef[k] < 0 ? 1.0 : -1.0) * dt / (2 * p.eta) * std::pow(r.H[k], p.eta);
        return dt;
    });
}

// ---------------------------------------------------------------------------
// Analytic erosion kernels

namespace detail {
inline double weighted(double num, double D) {
    if (num == 0) return 0;
    return D > 0 ? num / D : std::numeric_limits<double>::infinity();
}
}  // namespace detail

/**
 * @brief Local erosion kernel k_t at (y, n~(beta, gamma)), log taken on the alpha~ = 0 section.
 *
 * rho = sqrt(((c1^2+c2^2)/D11 + (c4^2+c5^2)/D44)^2 + c3^2/(D11 D44));
 * k = (2eta-1)/(2eta) t^(-1/(2eta-1)) rho^(eta/(2eta-1)) for eta > 1/2, and the flat
 * indicator (0 if rho <= t^2, else infinity) for eta = 1/2.
 */
inline double morph_kernel(const Vec3& y, double beta, double gamma, double t, const MorphParams& p) {
    const LieVector c = log_section(y, beta, gamma);
    const double a = detail::weighted(c[0] * c[0] + c[1] * c[1], p.D11) + detail::weighted(c[3] * c[3] + c[4] * c[4], p.D44);
    const double b = detail::weighted(c[2] * c[2], p.D11 * p.D44);
    const double rho = std::sqrt(a * a + b);
    if (p.eta <= 0.5) return rho <= t * t ? 0.0 : std::numeric_limits<double>::infinity();
    const double e = 2 * p.eta - 1;
    return (e / (2 * p.eta)) * std::pow(t, -1 / e) * std::pow(rho, p.eta / e);
}

/// Same kernel for a direction vector; +infinity outside the second chart (rotations beyond 90 degrees).
inline double morph_kernel(const Vec3& y, const Vec3& n, double t, const MorphParams& p) {
    if (n.z() <= 0 || std::hypot(n.y(), n.z()) < 1e-12) return std::numeric_limits<double>::infinity();
    const NormalAngles a = angles_from_normal(n);
    if (std::abs(a.beta) >= 0.5 * kPi - 1e-9 || std::abs(a.gamma) >= 0.5 * kPi - 1e-9)
        return std::numeric_limits<double>::infinity();
    return morph_kernel(y, a.beta, a.gamma, t, p);
}

/**
 * @brief Accuracy surface m of the kernel approximation.
 *
 * m = ((d_b s)^2 + cos^-2(b) (d_g s)^2) / (4 s), s = c4^2 + c5^2 of log_section, with central
 * differences. Returns 1 at the origin (limit).
 */
inline double kernel_accuracy_m(double beta, double gamma, double step = 1e-5) {
    auto s = [](double b, double g) {
        const LieVector c = log_section(Vec3::Zero(), b, g);
        return c[3] * c[3] + c[4] * c[4];
    };
    const double s0 = s(beta, gamma);
    if (s0 == 0) return 1.0;
    const double db = (s(beta + step, gamma) - s(beta - step, gamma)) / (2 * step);
    const double dg = (s(beta, gamma + step) - s(beta, gamma - step)) / (2 * step);
    const double cb = std::cos(beta);
    return 0.25 * (db * db + dg * dg / (cb * cb)) / s0;
}

// ---------------------------------------------------------------------------
// Morphological convolution

namespace detail {
struct KernelTap {
    int dvox;  ///< index into the offset list
    int lp;    ///< source direction l'
    double k;
};
}  // namespace detail

/**
 * @brief (k (-) U)(y,n) = min over (y',n') of U(y',n') + k(R_{n'}^T (y - y'), R_{n'}^T n); dilation takes
 * the max of U - k.
 *
 * Sources are searched within `radius` voxels; kernel values above the range of U are
 * skipped because they can never attain the extremum.
 */
inline OrientationField morph_convolve(const OrientationField& U, const KernelFn& k, MorphMode mode, int radius,
                                       Boundary b = Boundary::periodic) {
    const int No = U.directions();
    const Tessellation& T = *U.tess;
    const double range = U.max() - U.min();
    std::vector<std::array<int, 3>> offs;
    for (int dx = -radius; dx <= radius; ++dx)
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dz = -radius; dz <= radius; ++dz) offs.push_back({dx, dy, dz});
    std::vector<Mat3> Rt(No);
    for (int l = 0; l < No; ++l) Rt[l] = rotation_onto(T.vertices[l]).transpose();
    std::vector<std::vector<detail::KernelTap>> taps(No);
    parallel_for(No, [&](std::size_t l) {
        for (int d = 0; d < static_cast<int>(offs.size()); ++d) {
            const Vec3 y = U.h * Vec3(offs[d][0], offs[d][1], offs[d][2]);  // y - y'
            for (int lp = 0; lp < No; ++lp) {
                const double kv = k(Rt[lp] * y, Rt[lp] * T.vertices[l]);
                if (kv <= range) taps[l].push_back({d, lp, kv});
            }
        }
    }, 1);
    OrientationField out = U;
    const double sgn = mode == MorphMode::erosion ? 1.0 : -1.0;
    parallel_for(U.voxels(), [&](std::size_t v) {
        const auto c = U.voxel_coords(v);
        for (int l = 0; l < No; ++l) {
            double best = sgn * U.data[v * No + l];  // the unity element always contributes
            for (const auto& t : taps[l]) {
                const auto& o = offs[t.dvox];
                long src = detail::neighbor_voxel(U, c, {-o[0], -o[1], -o[2]}, b);
                if (src < 0) continue;
                best = std::min(best, sgn * U.data[static_cast<std::size_t>(src) * No + t.lp] + t.k);
            }
            out.data[v * No + l] = sgn * best;
        }
    });
    return out;
}

}  // namespace r3s2
