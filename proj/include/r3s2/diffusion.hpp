#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "fd_operators.hpp"

namespace r3s2 {

struct DiffusionParams {
    double D11 = 0, D33 = 0, D44 = 0;
    double a3 = 0;  ///< convection along A3 (completion)
    double t = 0;
    double dt = 0;  ///< 0 selects 0.9 x stability_dt
    double K = 0;   ///< Perona-Malik contrast
    Boundary boundary = Boundary::reflecting;
    double h_a = 0;  ///< 0 selects the tessellation's angular_step
    AngularScheme angular = AngularScheme::cotangent;
};

/**
 * @brief Largest Euler step with a non-negative update matrix (Gerschgorin).
 *
 * 1 / ((4 D11 + 2 D33)/h^2 + 4 D44/h_a^2 + |a3|/h)
 */
inline double stability_dt(const DiffusionParams& p, double h, double h_a) {
    const double den = (4 * p.D11 + 2 * p.D33) / (h * h) + 4 * p.D44 / (h_a * h_a) + std::abs(p.a3) / h;
    if (den <= 0) throw AllZeroCoefficients("all diffusion and convection coefficients are zero");
    return 1 / den;
}

namespace detail {

inline double angular_step_of(const DiffusionParams& p, const Tessellation& t) {
    return p.h_a > 0 ? p.h_a : t.angular_step;
}

/// Step count and effective step for reaching p.t; throws UnstableStep above the bound.
inline std::pair<long, double> time_grid(const DiffusionParams& p, double bound) {
    double dt = p.dt > 0 ? p.dt : 0.9 * bound;
    if (dt > bound * (1 + 1e-12)) throw UnstableStep("time step exceeds the stability bound");
    if (p.t <= 0) return {0, dt};
    long n = static_cast<long>(std::ceil(p.t / dt - 1e-9));
    return {n, p.t / static_cast<double>(n)};
}

inline GeneratorSpec generator_of(const DiffusionParams& p) {
    return {p.D11, p.D33, p.D44, p.a3, p.angular};
}

}  // namespace detail

/**
 * @brief Explicit Euler propagator W <- (I + dt J) W for a fixed linear generator.
 *
 * Build once, then step as often as needed; all runs on one instance share its time grid.
 */
class LinearEvolution {
public:
    LinearEvolution(const OrientationField& geom, const DiffusionParams& p) : params_(p) {
        const double ha = detail::angular_step_of(p, *geom.tess);
        stencils_ = make_stencils(geom.tess, geom.h, ha);
        bound_ = stability_dt(p, geom.h, ha);
        dt_ = p.dt > 0 ? p.dt : 0.9 * bound_;
        if (dt_ > bound_ * (1 + 1e-12)) throw UnstableStep("time step exceeds the stability bound");
        J_ = assemble_generator(detail::generator_of(p), geom, stencils_, p.boundary);
        SparseMatrix I(J_.rows(), J_.cols());
        I.setIdentity();
        E_ = I + dt_ * J_;
        E_.makeCompressed();
    }

    double dt() const { return dt_; }
    double bound() const { return bound_; }
    const SparseMatrix& generator() const { return J_; }
    const Stencils& stencils() const { return stencils_; }

    void step(std::vector<double>& w, std::vector<double>& tmp) const {
        spmv(E_, w, tmp);
        w.swap(tmp);
    }

    /// Runs `steps` Euler steps; observer(step, W) is called after each one.
    OrientationField run(const OrientationField& U, long steps,
                         const std::function<void(long, const OrientationField&)>& observer = {}) const {
        OrientationField W = U;
        std::vector<double> tmp;
        for (long k = 0; k < steps; ++k) {
            step(W.data, tmp);
            if (observer) observer(k + 1, W);
        }
        if (params_.a3 != 0 || !U.is_signed) W.is_signed = U.is_signed;
        return W;
    }

private:
    DiffusionParams params_;
    Stencils stencils_;
    double bound_ = 0, dt_ = 0;
    SparseMatrix J_, E_;
};

/// Evolves to time p.t with the effective step t / ceil(t / dt).
inline OrientationField run_linear(const OrientationField& U, const DiffusionParams& p,
                                   const std::function<void(long, const OrientationField&)>& observer = {}) {
    const double ha = detail::angular_step_of(p, *U.tess);
    auto [n, dt] = detail::time_grid(p, stability_dt(p, U.h, ha));
    if (n == 0) return U;
    DiffusionParams q = p;
    q.dt = dt;
    return LinearEvolution(U, q).run(U, n, observer);
}

/// Contour enhancement: dW/dt = (D11(A1^2+A2^2) + D33 A3^2 + D44 Delta_S2) W.
inline OrientationField run_enhancement(const OrientationField& U, DiffusionParams p,
                                        const std::function<void(long, const OrientationField&)>& observer = {}) {
    p.a3 = 0;
    return run_linear(U, p, observer);
}

/// Contour completion: dW/dt = (-a3 A3 + D44 Delta_S2) W with upwind convection.
inline OrientationField run_completion(const OrientationField& U, const DiffusionParams& p,
                                       const std::function<void(long, const OrientationField&)>& observer = {}) {
    if (!(p.a3 > 0)) throw Error("completion needs a3 > 0");
    return run_linear(U, p, observer);
}

namespace detail {

/**
 * Stopped trajectory sum_m P(M = m) W(m dt) for a negative binomial step count M with k
 * successes and per-step stopping probability q = lambda dt / (1 + lambda dt). This is the
 * Euler-step counterpart of a Gamma(k, lambda) lifetime: for k = 1 the sum equals
 * (I - J/lambda)^{-1} U exactly, because sum_m q (1-q)^m (I + dt J)^m = (I - (1-q) dt J / q)^{-1}.
 * Summation stops once the remaining tail is below 1e-10; the tail goes onto the last sample.
 */
inline OrientationField stopped_trajectory(const OrientationField& U, double lambda, int k, const DiffusionParams& p) {
    DiffusionParams q = p;
    q.t = 0;
    LinearEvolution ev(U, q);
    const double stop = lambda * ev.dt() / (1 + lambda * ev.dt());
    const double lq = std::log(stop), l1q = std::log1p(-stop);
    OrientationField W = U, acc(U.dims, U.h, U.tess, 0.0);
    acc.is_signed = U.is_signed;
    std::vector<double> tmp;
    double left = 1;
    for (long m = 0;; ++m) {
        const double pm = std::exp(std::lgamma(m + k) - std::lgamma(k) - std::lgamma(m + 1.0) + k * lq + m * l1q);
        const bool last = left - pm < 1e-10 && m + 1 >= k / stop;
        const double w = last ? left : pm;
        for (std::size_t i = 0; i < acc.size(); ++i) acc.data[i] += w * W.data[i];
        if (last) break;
        left -= pm;
        ev.step(W.data, tmp);
    }
    return acc;
}

}  // namespace detail

/**
 * @brief Resolvent lambda (lambda I - Q)^{-1} U via the geometrically weighted Euler trajectory.
 *
 * Equals the expected state of the evolution stopped at a random time with mean 1/lambda.
 */
inline OrientationField resolvent(const OrientationField& U, double lambda, const DiffusionParams& p) {
    if (!(lambda > 0)) throw Error("resolvent needs lambda > 0");
    return detail::stopped_trajectory(U, lambda, 1, p);
}

/// k-fold resolvent; the lifetime is Gamma(k, lambda) distributed.
inline OrientationField k_step(const OrientationField& U, double lambda, int k, const DiffusionParams& p) {
    if (k < 1) throw Error("k_step needs k >= 1");
    OrientationField W = U;
    for (int i = 0; i < k; ++i) W = resolvent(W, lambda, p);
    return W;
}

/// Single trajectory weighted by the discrete Gamma(k, lambda) law (equivalent to k_step).
inline OrientationField gamma_weighted(const OrientationField& U, double lambda, int k, const DiffusionParams& p) {
    if (k < 1 || !(lambda > 0)) throw Error("gamma_weighted needs k >= 1 and lambda > 0");
    return detail::stopped_trajectory(U, lambda, k, p);
}

/**
 * @brief Perona-Malik type diffusion along A3 with conductivity D33 exp(-(|A3 W|/K)^2).
 *
 * Flux form [D~(y+h/2)(S+W - W) - D~(y-h/2)(W - S-W)]/h^2. The pointwise conductivity uses
 * max(|A3f W|, |A3b W|); its half-grid values are means of the point and its shifted neighbour.
 */
inline OrientationField run_perona_malik(const OrientationField& U, const DiffusionParams& p,
                                         const std::function<void(long, const OrientationField&)>& observer = {}) {
    if (!(p.K > 0)) throw Error("Perona-Malik needs K > 0");
    const double ha = detail::angular_step_of(p, *U.tess);
    DiffusionParams lin = p;
    lin.a3 = 0;
    auto [n, dt] = detail::time_grid(lin, stability_dt(lin, U.h, ha));
    const Stencils S = make_stencils(U.tess, U.h, ha);
    // Angular and A1/A2 parts stay linear.
    GeneratorSpec rest{p.D11, 0, p.D44, 0, p.angular};
    const SparseMatrix Jr = assemble_generator(rest, U, S, p.boundary);
    const int No = U.directions();
    const double h = S.h;
    OrientationField W = U;
    std::vector<double> sp(U.size()), sm(U.size()), cond(U.size()), cp(U.size()), cm(U.size()), lin_part;
    for (long step = 0; step < n; ++step) {
        parallel_for(U.voxels(), [&](std::size_t v) {
            for (int l = 0; l < No; ++l) {
                const std::size_t k = v * No + l;
                sp[k] = detail::spatial_sample(W, W.data, v, l, S.spatial[l][2][0], p.boundary);
                sm[k] = detail::spatial_sample(W, W.data, v, l, S.spatial[l][2][1], p.boundary);
                const double g = std::max(std::abs(sp[k] - W.data[k]), std::abs(W.data[k] - sm[k])) / (h * p.K);
                cond[k] = p.D33 * std::exp(-g * g);
            }
        });
        parallel_for(U.voxels(), [&](std::size_t v) {
            for (int l = 0; l < No; ++l) {
                const std::size_t k = v * No + l;
                cp[k] = 0.5 * (cond[k] + detail::spatial_sample(W, cond, v, l, S.spatial[l][2][0], p.boundary));
                cm[k] = 0.5 * (cond[k] + detail::spatial_sample(W, cond, v, l, S.spatial[l][2][1], p.boundary));
            }
        });
        spmv(Jr, W.data, lin_part);
        for (std::size_t k = 0; k < W.size(); ++k)
            W.data[k] += dt * ((cp[k] * (sp[k] - W.data[k]) - cm[k] * (W.data[k] - sm[k])) / (h * h) + lin_part[k]);
        if (observer) observer(step + 1, W);
    }
    return W;
}

}  // namespace r3s2
