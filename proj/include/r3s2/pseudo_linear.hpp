#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>

#include "diffusion.hpp"

namespace r3s2 {

inline constexpr double kSmallBalance = 1e-8;

/// chi_C(I) = (e^{CI} - 1)/(e^C - 1); the expansion I + C I(I-1)/2 for |C| < 1e-8.
inline double chi(double I, double C) {
    if (std::abs(C) < kSmallBalance) return I + 0.5 * C * I * (I - 1);
    return std::expm1(C * I) / std::expm1(C);
}

inline double chi_inv(double J, double C) {
    if (std::abs(C) < kSmallBalance) return J - 0.5 * C * J * (J - 1);
    return std::log1p(J * std::expm1(C)) / C;
}

namespace detail {

struct Range {
    double lo, span;
};

inline Range normalize(OrientationField& V) {
    const double lo = V.min(), span = V.max() - lo;
    if (span > 0)
        for (double& x : V.data) x = (x - lo) / span;
    return {lo, span};
}

inline void restore(OrientationField& V, Range r) {
    if (r.span > 0)
        for (double& x : V.data) x = r.lo + r.span * x;
    else
        for (double& x : V.data) x = r.lo;
}

}  // namespace detail

/**
 * @brief chi_C^{-1} o diffusion o chi_C on the globally [0,1]-normalized field, rescaled back.
 *
 * Convection is ignored (a3 = 0).
 */
inline OrientationField run_pseudolinear_conjugated(const OrientationField& U, double C, const DiffusionParams& p) {
    if (C == 0) return run_enhancement(U, p);
    OrientationField V = U;
    const auto r = detail::normalize(V);
    if (r.span == 0) return U;
    for (double& x : V.data) x = chi(x, C);
    V = run_enhancement(V, p);
    for (double& x : V.data) x = chi_inv(std::clamp(x, 0.0, 1.0), C);
    detail::restore(V, r);
    return V;
}

/**
 * @brief Euler scheme for dV/dt = sum D^ii (A_i^2 V + C (A_i V)^2) on the normalized field.
 *
 * Each difference V_j - V_i of the linear generator J is replaced by expm1(C (V_j - V_i))/C,
 * which is the exact change of variables of the linear scheme and is upwind for the squared
 * gradient: larger neighbours pull harder than smaller ones push (dilation for C > 0).
 * Throws UnstableStep when dt sum_j J_ij e^{C (V_j - V_i)} exceeds 1 somewhere.
 */
inline OrientationField run_pseudolinear_direct(const OrientationField& U, double C, const DiffusionParams& p) {
    if (C == 0) return run_enhancement(U, p);
    DiffusionParams q = p;
    q.a3 = 0;
    const double ha = detail::angular_step_of(q, *U.tess);
    auto [n, dt] = detail::time_grid(q, stability_dt(q, U.h, ha));
    const Stencils S = make_stencils(U.tess, U.h, ha);
    const SparseMatrix J = assemble_generator(detail::generator_of(q), U, S, q.boundary);

    OrientationField V = U;
    const auto range = detail::normalize(V);
    if (range.span == 0) return U;
    std::vector<double> next(V.size());
    std::atomic<bool> unstable{false};
    for (long step = 0; step < n; ++step) {
        parallel_for(V.size(), [&](std::size_t i) {
            const double vi = V.data[i];
            double rate = 0, diag = 0, rowsum = 0;
            for (SparseMatrix::InnerIterator it(J, static_cast<Eigen::Index>(i)); it; ++it) {
                rowsum += it.value();
                if (static_cast<std::size_t>(it.col()) == i) continue;
                const double d = C * (V.data[it.col()] - vi);
                rate += it.value() * std::expm1(d);
                diag += it.value() * std::exp(d);
            }
            // absorbing boundaries leave a negative row sum; the missing neighbours hold zero
            if (rowsum < 0) {
                rate -= rowsum * std::expm1(-C * vi);
                diag -= rowsum * std::exp(-C * vi);
            }
            if (dt * diag > 1 + 1e-12) unstable = true;
            next[i] = vi + dt * rate / C;
        });
        if (unstable) throw UnstableStep("pseudo-linear step violates the gradient-dependent bound");
        V.data.swap(next);
    }
    detail::restore(V, range);
    return V;
}

}  // namespace r3s2
