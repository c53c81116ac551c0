#pragma once

#include <cmath>
#include <ostream>
#include <vector>

#include "se3.hpp"

namespace r3s2 {

using Vec2 = Eigen::Vector2d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using RowVec6 = Eigen::Matrix<double, 1, 6>;

/// Initial data of a stationary curve of int sqrt(kappa^2 + beta^2) ds; z is the normalized curvature.
struct GeodesicInit {
    double beta = 0.1;
    Vec2 z0 = Vec2::Zero();
    Vec2 dz0 = Vec2::Zero();  ///< z'(0)
    double L = 1;
    double ds = 0.01;
};

/// z(s) = cosh(beta s) z0 + sinh(beta s)/beta z0'
inline Vec2 z_of_s(const GeodesicInit& g, double s) {
    return std::cosh(g.beta * s) * g.z0 + std::sinh(g.beta * s) / g.beta * g.dz0;
}

inline Vec2 dz_of_s(const GeodesicInit& g, double s) {
    return g.beta * std::sinh(g.beta * s) * g.z0 + std::cosh(g.beta * s) * g.dz0;
}

/// Wronskian det(z0 | z0'); zero exactly for planar curves.
inline double wronskian(const GeodesicInit& g) { return g.z0.x() * g.dz0.y() - g.z0.y() * g.dz0.x(); }

/// c from |z'|^2 + beta^2 (1 - |z|^2) = c^2 beta^2 (constant along the curve).
inline double momentum_c(const GeodesicInit& g) {
    return std::sqrt(g.dz0.squaredNorm() + g.beta * g.beta * (1 - g.z0.squaredNorm())) / g.beta;
}

/// Curvature vector beta z / sqrt(1 - |z|^2) in the (A1, A2) frame.
inline Vec2 curvature_vector(const GeodesicInit& g, double s) {
    const Vec2 z = z_of_s(g, s);
    const double r2 = z.squaredNorm();
    if (r2 >= 1) throw CurvatureBlowup("|z(s)| reached 1, curvature is unbounded");
    return g.beta * z / std::sqrt(1 - r2);
}

struct CurvatureTorsion {
    double kappa = 0, tau = 0;
};

/// kappa = beta |z|/sqrt(1 - |z|^2), tau = det(z0|z0')/|z|^2
inline CurvatureTorsion kappa_tau(const GeodesicInit& g, double s) {
    const Vec2 z = z_of_s(g, s);
    const double r2 = z.squaredNorm();
    if (r2 >= 1) throw CurvatureBlowup("|z(s)| reached 1, curvature is unbounded");
    return {g.beta * std::sqrt(r2 / (1 - r2)), r2 > 0 ? wronskian(g) / r2 : 0.0};
}

/// Rejects initial data whose closed-form z leaves the unit disc on [0, L].
inline void check_admissible(const GeodesicInit& g) {
    if (!(g.beta > 0)) throw Error("geodesic needs beta > 0");
    if (!(g.L >= 0) || !(g.ds > 0)) throw Error("geodesic needs L >= 0 and ds > 0");
    const long n = std::max(100L, static_cast<long>(std::ceil(10 * g.L / g.ds)));
    for (long i = 0; i <= n; ++i)
        if (z_of_s(g, g.L * i / n).squaredNorm() >= 1) throw CurvatureBlowup("|z(s)| reaches 1 within [0, L]");
}

struct CurveSample {
    double s;
    Vec3 x;
    Mat3 R;  ///< columns A1, A2, T: the SE(3) part of the curve
    Vec3 T, N, B;
    double kappa, tau;
};

/**
 * @brief Integrates the moving frame along the stationary curve with RK4 and step ds.
 *
 * The state is the rotation [A1 A2 T] with A1' = -k2 T, A2' = k1 T, T' = k2 A1 - k1 A2 and
 * x' = T, starting from x = 0, [A1 A2 T] = I. This is the Frenet system written in the
 * frame that stays smooth where kappa passes through zero; N and B follow as
 * N = (k2 A1 - k1 A2)/kappa and B = (k1 A1 + k2 A2)/kappa (kept from the last sample when kappa = 0).
 * The frame is re-orthonormalized after every step.
 */
inline std::vector<CurveSample> integrate_frenet(const GeodesicInit& g) {
    check_admissible(g);
    const long n = static_cast<long>(std::ceil(g.L / g.ds - 1e-9));
    const double h = n > 0 ? g.L / static_cast<double>(n) : 0.0;
    using State = Eigen::Matrix<double, 12, 1>;
    auto rhs = [&](double s, const State& y) {
        const Vec2 k = curvature_vector(g, s);
        const Vec3 A1 = y.segment<3>(3), A2 = y.segment<3>(6), T = y.segment<3>(9);
        State d;
        d.segment<3>(0) = T;
        d.segment<3>(3) = -k.y() * T;
        d.segment<3>(6) = k.x() * T;
        d.segment<3>(9) = k.y() * A1 - k.x() * A2;
        return d;
    };
    State y;
    y << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;

    // Direction of z used for N, B where kappa vanishes.
    Vec2 dir = g.z0.norm() > 0 ? Vec2(g.z0.normalized()) : g.dz0.norm() > 0 ? Vec2(g.dz0.normalized()) : Vec2(1, 0);
    std::vector<CurveSample> out;
    auto record = [&](double s) {
        CurveSample c;
        c.s = s;
        c.x = y.segment<3>(0);
        c.R.col(0) = y.segment<3>(3);
        c.R.col(1) = y.segment<3>(6);
        c.R.col(2) = y.segment<3>(9);
        c.T = c.R.col(2);
        const Vec2 z = z_of_s(g, s);
        if (z.norm() > 0) dir = z.normalized();
        c.N = dir.y() * c.R.col(0) - dir.x() * c.R.col(1);
        c.B = dir.x() * c.R.col(0) + dir.y() * c.R.col(1);
        const auto kt = kappa_tau(g, s);
        c.kappa = kt.kappa;
        c.tau = kt.tau;
        out.push_back(c);
    };
    record(0);
    for (long i = 0; i < n; ++i) {
        const double s = i * h;
        const State k1 = rhs(s, y), k2 = rhs(s + 0.5 * h, y + 0.5 * h * k1), k3 = rhs(s + 0.5 * h, y + 0.5 * h * k2),
                    k4 = rhs(s + h, y + h * k3);
        y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        // Gram-Schmidt on (T, A1), then A2 = T x A1
        Vec3 T = y.segment<3>(9).normalized();
        Vec3 A1 = y.segment<3>(3);
        A1 = (A1 - A1.dot(T) * T).normalized();
        y.segment<3>(9) = T;
        y.segment<3>(3) = A1;
        y.segment<3>(6) = T.cross(A1);
        record((i + 1) * h);
    }
    return out;
}

/// Costate (lambda_1..lambda_6) = (-z2', z1', beta sqrt(1-|z|^2), z1, z2, 0).
inline RowVec6 costate(const GeodesicInit& g, double s) {
    const Vec2 z = z_of_s(g, s), dz = dz_of_s(g, s);
    RowVec6 l;
    l << -dz.y(), dz.x(), g.beta * std::sqrt(1 - z.squaredNorm()), z.x(), z.y(), 0;
    return l;
}

/// m(g) = [[R, sigma_x R], [0, R]] with sigma_x y = x cross y.
inline Mat6 momentum_rep(const SE3& g) {
    Mat6 m = Mat6::Zero();
    m.block<3, 3>(0, 0) = g.R;
    m.block<3, 3>(0, 3) = hat(g.x) * g.R;
    m.block<3, 3>(3, 3) = g.R;
    return m;
}

/// max over samples of |lambda(s) m(g(s)^-1) - lambda(0)|
inline double momentum_check(const std::vector<CurveSample>& curve, const GeodesicInit& g) {
    const RowVec6 l0 = costate(g, 0);
    double worst = 0;
    for (const auto& c : curve) {
        const RowVec6 mu = costate(g, c.s) * momentum_rep(inverse(SE3{c.x, c.R}));
        worst = std::max(worst, (mu - l0).cwiseAbs().maxCoeff());
    }
    return worst;
}

/// Drift of lambda1^2+lambda2^2+lambda3^2 = c^2 beta^2 and lambda3^2/beta^2 + lambda4^2 + lambda5^2 = 1.
inline std::pair<double, double> preservation_drift(const GeodesicInit& g, const std::vector<CurveSample>& curve) {
    const double cb2 = std::pow(momentum_c(g) * g.beta, 2);
    double d1 = 0, d2 = 0;
    for (const auto& c : curve) {
        const RowVec6 l = costate(g, c.s);
        d1 = std::max(d1, std::abs(l[0] * l[0] + l[1] * l[1] + l[2] * l[2] - cb2));
        d2 = std::max(d2, std::abs(l[2] * l[2] / (g.beta * g.beta) + l[3] * l[3] + l[4] * l[4] - 1));
    }
    return {d1, d2};
}

/// Largest deviation of [A1 A2 T] from orthonormality over the curve.
inline double frame_drift(const std::vector<CurveSample>& curve) {
    double worst = 0;
    for (const auto& c : curve) {
        Mat3 F;
        F << c.T, c.N, c.B;
        worst = std::max(worst, (c.R.transpose() * c.R - Mat3::Identity()).cwiseAbs().maxCoeff());
        worst = std::max(worst, (F.transpose() * F - Mat3::Identity()).cwiseAbs().maxCoeff());
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Planar closed form (W = 0)

/**
 * @brief The rigid motion h0 = (x0_bar, R0_bar) that maps the curve onto the normal form x~.
 *
 * For z0' != 0: x0_bar = (0, W sqrt(c^2 b^2 - |z0'|^2)/(c^2 b^2 |z0'|), z0.z0'/(c b |z0'|)) and
 * R0_bar the matrix with rows (-z0'_2, z0'_1, r)/(cb), -(z0'_1, z0'_2, 0)/|z0'|,
 * (z0'_2 r, -z0'_1 r, |z0'|^2)/(cb |z0'|), r = sqrt(c^2 b^2 - |z0'|^2).
 * For z0' = 0 the limit z0' -> 0 along z0 is used: x0_bar = (0, 0, |z0|/(c b)).
 */
inline SE3 normal_form_motion(const GeodesicInit& g) {
    const double c = momentum_c(g), cb = c * g.beta;
    const double W = wronskian(g);
    const double dn = g.dz0.norm();
    SE3 h;
    if (dn == 0) {
        // limit z0' = eps z0 of the general case; eps -> 0 from either side gives the same curve
        const double zn = g.z0.norm();
        const Vec2 d = zn > 0 ? Vec2(g.z0 / zn) : Vec2(1, 0);
        h.x = Vec3(0, 0, zn / cb);
        h.R << 0, 0, 1,
               -d.x(), -d.y(), 0,
               d.y(), -d.x(), 0;
        return h;
    }
    const double r = std::sqrt(std::max(cb * cb - dn * dn, 0.0));
    const double p1 = g.dz0.x(), p2 = g.dz0.y();
    h.x = Vec3(0, W * r / (cb * cb * dn), g.z0.dot(g.dz0) / (cb * dn));
    h.R << -p2 / cb, p1 / cb, r / cb,
           -p1 / dn, -p2 / dn, 0,
           p2 * r / (cb * dn), -p1 * r / (cb * dn), dn / cb;
    return h;
}

/// int_0^s sqrt(1 - |z(t)|^2) dt by composite Gauss-Legendre (5 nodes per panel).
inline double planar_arc_integral(const GeodesicInit& g, double s, int panels = 2000) {
    static const double xs[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640, 0.9061798459386640};
    static const double ws[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
                                 0.2369268850561891};
    const double hp = s / panels;
    double sum = 0;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * hp;
        for (int k = 0; k < 5; ++k)
            sum += ws[k] * std::sqrt(1 - z_of_s(g, mid + 0.5 * hp * xs[k]).squaredNorm());
    }
    return 0.5 * hp * sum;
}

/**
 * @brief Spatial curve of a planar stationary curve (W = 0, c <= 1) from the closed form.
 *
 * x~(s) = x0_bar_1 + (1/c) int_0^s sqrt(1-|z|^2), y~ = 0, z~(s) = z~(0) |z(s)|/|z0|, and
 * x(s) = R0_bar^T (x~(s) - x0_bar).
 */
inline Vec3 planar_closed_form(const GeodesicInit& g, double s) {
    if (std::abs(wronskian(g)) > 1e-14) throw Error("closed form needs a planar curve (W = 0)");
    const double c = momentum_c(g);
    if (c > 1 + 1e-12) throw Error("closed form implemented for c <= 1");
    const SE3 h = normal_form_motion(g);
    const double zn0 = g.z0.norm();
    const Vec3 xt(h.x.x() + planar_arc_integral(g, s) / c, 0, zn0 > 0 ? h.x.z() * z_of_s(g, s).norm() / zn0 : h.x.z());
    return h.R.transpose() * (xt - h.x);
}

/// x~(s) - x~(0) for z0' = -beta z0: s + (u0 - u + log((1+u)/(1+u0)))/beta, u = sqrt(1 - |z0|^2 e^{-2 beta s}).
inline double planar_decay_xtilde(double beta, double z0norm, double s) {
    const double u0 = std::sqrt(1 - z0norm * z0norm);
    const double u = std::sqrt(1 - z0norm * z0norm * std::exp(-2 * beta * s));
    return s + (u0 - u + std::log((1 + u) / (1 + u0))) / beta;
}

// ---------------------------------------------------------------------------
// Exponential curves

struct SpiralCurvature {
    Vec3 kappa;  ///< curvature vector d^2x/ds^2
    Vec3 tau;    ///< torsion vector
};

/**
 * @brief Curvature and torsion vectors of the spatial part of s -> exp(t c), in arc length.
 *
 * kappa(t) = (cos(t q) c2 x c1 + sin(t q)/q c2 x (c2 x c1)) / |c1|^2 with q = |c2|, i.e.
 * R(t)(c2 x c1)/|c1|^2; tau = |c1 . c2| / |c1|^2 kappa.
 */
inline SpiralCurvature exponential_curve_curvature(const LieVector& c, double t) {
    const Vec3 c1 = c.head<3>(), c2 = c.tail<3>();
    const double v2 = c1.squaredNorm();
    if (v2 == 0) throw ZeroSpatialVelocity("exponential curve without spatial velocity");
    const double q = c2.norm();
    const Vec3 w = c2.cross(c1);
    const double sq = q > 0 ? std::sin(t * q) / q : t;
    SpiralCurvature out;
    out.kappa = (std::cos(t * q) * w + sq * c2.cross(w)) / v2;
    out.tau = std::abs(c1.dot(c2)) / v2 * out.kappa;
    return out;
}

/// CSV rows s,x,y,z,kappa,tau
inline void write_curve_csv(std::ostream& os, const std::vector<CurveSample>& curve) {
    os.precision(17);
    os << "s,x,y,z,kappa,tau\n";
    for (const auto& c : curve)
        os << c.s << ',' << c.x.x() << ',' << c.x.y() << ',' << c.x.z() << ',' << c.kappa << ',' << c.tau << '\n';
}

}  // namespace r3s2
