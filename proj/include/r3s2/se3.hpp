#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "errors.hpp"

namespace r3s2 {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using LieVector = Eigen::Matrix<double, 6, 1>;

inline constexpr double kPi = std::numbers::pi;

/// Below this rotation angle the exp/log quotients switch to Taylor series.
inline constexpr double kSmallAngle = 1e-6;
/// log_se3 refuses rotation angles within this distance of pi.
inline constexpr double kBranchMargin = 1e-6;

/** @brief Rigid motion g = (x, R) acting as y -> R y + x. */
struct SE3 {
    Vec3 x = Vec3::Zero();
    Mat3 R = Mat3::Identity();

    static SE3 identity() { return {}; }
    Vec3 act(const Vec3& y) const { return R * y + x; }
    Mat4 homogeneous() const {
        Mat4 m = Mat4::Identity();
        m.topLeftCorner<3, 3>() = R;
        m.topRightCorner<3, 1>() = x;
        return m;
    }
};

/// (x,R)(x',R') = (x + R x', R R')
inline SE3 compose(const SE3& a, const SE3& b) { return {a.x + a.R * b.x, a.R * b.R}; }
inline SE3 operator*(const SE3& a, const SE3& b) { return compose(a, b); }
inline SE3 inverse(const SE3& g) { return {-(g.R.transpose() * g.x), g.R.transpose()}; }

inline Mat3 hat(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

inline Mat3 rot_x(double a) {
    double c = std::cos(a), s = std::sin(a);
    Mat3 m;
    m << 1, 0, 0, 0, c, -s, 0, s, c;
    return m;
}
inline Mat3 rot_y(double a) {
    double c = std::cos(a), s = std::sin(a);
    Mat3 m;
    m << c, 0, s, 0, 1, 0, -s, 0, c;
    return m;
}
inline Mat3 rot_z(double a) {
    double c = std::cos(a), s = std::sin(a);
    Mat3 m;
    m << c, -s, 0, s, c, 0, 0, 0, 1;
    return m;
}

/// First chart: R = Rz(gamma) Ry(beta) Rz(alpha), beta in [0, pi].
struct EulerAngles1 {
    double alpha = 0, beta = 0, gamma = 0;
};
/// Second chart: R = Rx(gamma) Ry(beta) Rz(alpha), beta in [-pi, pi), gamma in (-pi/2, pi/2).
struct EulerAngles2 {
    double alpha = 0, beta = 0, gamma = 0;
};

inline Mat3 from_chart1(const EulerAngles1& a) { return rot_z(a.gamma) * rot_y(a.beta) * rot_z(a.alpha); }
inline Mat3 from_chart2(const EulerAngles2& a) { return rot_x(a.gamma) * rot_y(a.beta) * rot_z(a.alpha); }

/// Throws ChartSingularity when beta is within tol of 0 or pi.
inline EulerAngles1 to_chart1(const Mat3& R, double tol = 1e-9) {
    double sb = std::hypot(R(0, 2), R(1, 2));
    if (sb < tol) throw ChartSingularity("chart 1 is singular at beta in {0, pi}");
    EulerAngles1 a;
    a.beta = std::atan2(sb, R(2, 2));
    a.gamma = std::atan2(R(1, 2), R(0, 2));
    a.alpha = std::atan2(R(2, 1), -R(2, 0));
    return a;
}

/// n~(beta, gamma) = R_x(gamma) R_y(beta) e_z
inline Vec3 n_tilde(double beta, double gamma) {
    return {std::sin(beta), -std::cos(beta) * std::sin(gamma), std::cos(beta) * std::cos(gamma)};
}

struct NormalAngles {
    double beta = 0, gamma = 0;
};

/**
 * @brief Second-chart angles (beta, gamma) with n~(beta, gamma) = n.
 *
 * gamma is taken in [-pi/2, pi/2] so that cos(gamma) >= 0; the sign of n3 then selects
 * |beta| <= pi/2 or the back hemisphere |beta| > pi/2. Throws ChartSingularity near +-e_x.
 */
inline NormalAngles angles_from_normal(const Vec3& n, double tol = 1e-12) {
    double cb = std::hypot(n.y(), n.z());
    if (cb < tol) throw ChartSingularity("second chart is singular at n = +-e_x");
    NormalAngles a;
    if (n.z() >= 0) {
        a.beta = std::atan2(n.x(), cb);
        a.gamma = std::atan2(-n.y(), n.z());
    } else {
        a.beta = std::atan2(n.x(), -cb);
        if (a.beta >= kPi) a.beta -= 2 * kPi;
        a.gamma = std::atan2(n.y(), -n.z());
    }
    return a;
}

inline EulerAngles2 to_chart2(const Mat3& R) {
    NormalAngles na = angles_from_normal(R.col(2), 1e-9);
    double s = std::cos(na.beta) >= 0 ? 1.0 : -1.0;
    return {std::atan2(-R(0, 1) * s, R(0, 0) * s), na.beta, na.gamma};
}

/** @brief Group exponential exp(t * sum c^i A_i). */
inline SE3 exp_se3(const LieVector& c, double t = 1.0) {
    const Vec3 c1 = c.head<3>(), c2 = c.tail<3>();
    const double q = c2.norm();
    const Mat3 W = hat(c2);
    const Mat3 W2 = W * W;
    const double qt = q * t;
    double a, b, s1, s2;  // R = I + a W + b W^2,  x = t c1 + s1 W c1 + s2 W^2 c1
    if (qt < kSmallAngle) {
        const double t2 = t * t, q2 = q * q;
        a = t * (1 - q2 * t2 / 6 + q2 * q2 * t2 * t2 / 120);
        b = t2 * (0.5 - q2 * t2 / 24 + q2 * q2 * t2 * t2 / 720);
        s1 = t2 * (0.5 - q2 * t2 / 24 + q2 * q2 * t2 * t2 / 720);
        s2 = t2 * t * (1.0 / 6 - q2 * t2 / 120 + q2 * q2 * t2 * t2 / 5040);
    } else {
        const double sn = std::sin(qt), cs = std::cos(qt);
        a = sn / q;
        b = (1 - cs) / (q * q);
        s1 = b;
        s2 = (t - sn / q) / (q * q);
    }
    SE3 g;
    g.R = Mat3::Identity() + a * W + b * W2;
    g.x = t * c1 + s1 * (W * c1) + s2 * (W2 * c1);
    return g;
}

namespace detail {
/// Rotation vector (axis times angle) of R, angle < pi - kBranchMargin.
inline Vec3 rotation_log(const Mat3& R) {
    const Vec3 w(0.5 * (R(2, 1) - R(1, 2)), 0.5 * (R(0, 2) - R(2, 0)), 0.5 * (R(1, 0) - R(0, 1)));
    const double cq = std::clamp(0.5 * (R.trace() - 1), -1.0, 1.0);
    const double sq = w.norm();
    const double q = std::atan2(sq, cq);
    if (q >= kPi - kBranchMargin) throw AngleOutOfBranch("rotation angle too close to pi for the principal log");
    if (q < kSmallAngle) return (1 + q * q / 6 + 7 * q * q * q * q / 360) * w;
    if (q < 2.5) return (q / sq) * w;
    // Near pi the antisymmetric part is small; take the axis from the symmetric part.
    Mat3 B = 0.5 * (R + R.transpose()) - cq * Mat3::Identity();
    int k;
    B.diagonal().maxCoeff(&k);
    Vec3 u = B.col(k) / std::sqrt(B(k, k));
    if (u.dot(w) < 0) u = -u;
    return q * u.normalized();
}

/// V^{-1} x with V the left Jacobian, i.e. x - 1/2 c2 x x + q^-2 (1 - (q/2) cot(q/2)) c2 x (c2 x x).
inline Vec3 translation_log(const Vec3& c2, const Vec3& x) {
    const double q = c2.norm();
    double k;
    if (q < kSmallAngle)
        k = 1.0 / 12 + q * q / 720 + q * q * q * q / 30240;
    else
        k = (1 - 0.5 * q / std::tan(0.5 * q)) / (q * q);
    const Vec3 cx = c2.cross(x);
    return x - 0.5 * cx + k * c2.cross(cx);
}
}  // namespace detail

/** @brief Principal logarithm; throws AngleOutOfBranch for rotation angles near pi. */
inline LieVector log_se3(const SE3& g) {
    const Vec3 c2 = detail::rotation_log(g.R);
    LieVector c;
    c.head<3>() = detail::translation_log(c2, g.x);
    c.tail<3>() = c2;
    return c;
}

/**
 * @brief Logarithm of the section (y, R_x(gamma) R_y(beta)), i.e. second chart with alpha~ = 0.
 *
 * c2 = (q/sin q)(sin g cos^2(b/2), sin b cos^2(g/2), sin g sin b / 2), q the rotation angle.
 */
inline LieVector log_section(const Vec3& y, double beta, double gamma, double eps = 1e-9) {
    if (std::abs(beta) >= 0.5 * kPi - eps || std::abs(gamma) >= 0.5 * kPi - eps)
        throw ChartSingularity("log_section outside the second-chart domain");
    const double sb = std::sin(beta), sg = std::sin(gamma);
    const double cb2 = 0.5 * (1 + std::cos(beta)), cg2 = 0.5 * (1 + std::cos(gamma));
    const Vec3 w(sg * cb2, sb * cg2, 0.5 * sg * sb);
    const double sq = w.norm();
    const double cq = 0.5 * (std::cos(beta) + std::cos(gamma) + std::cos(beta) * std::cos(gamma) - 1);
    const double q = std::atan2(sq, cq);
    const double f = q < kSmallAngle ? 1 + q * q / 6 + 7 * q * q * q * q / 360 : q / sq;
    const Vec3 c2 = f * w;
    LieVector c;
    c.head<3>() = detail::translation_log(c2, y);
    c.tail<3>() = c2;
    return c;
}

/**
 * @brief A rotation R_n with R_n e_z = n, built without trigonometry.
 *
 * For (n1,n2) != 0 this is the minimal rotation about e_z x n. At n = -e_z we return
 * R_x(pi); the alternative -I is not a rotation.
 */
inline Mat3 rotation_onto(const Vec3& n) {
    const double n1 = n.x(), n2 = n.y(), n3 = n.z();
    const double r2 = n1 * n1 + n2 * n2;
    if (r2 == 0) return n3 > 0 ? Mat3::Identity() : rot_x(kPi);
    // 1 - n1^2/(1+n3) written in the form that stays accurate for n3 -> -1
    const double a = (n2 * n2 + n1 * n1 * n3) / r2;
    const double b = n1 * n2 * (n3 - 1) / r2;
    const double c = (n1 * n1 + n2 * n2 * n3) / r2;
    Mat3 R;
    R << a, b, n1, b, c, n2, -n1, -n2, n3;
    return R;
}

/**
 * @brief Squared weighted modulus |g|^2 entering the Gaussian kernel estimate.
 *
 * sqrt((c1^2+c2^2)/(D33 D44) + c6^2/D44 + (c3^2/D33 + (c4^2+c5^2)/D44)^2)
 */
inline double weighted_modulus(const LieVector& c, double D33, double D44) {
    const double a = (c[0] * c[0] + c[1] * c[1]) / (D33 * D44) + c[5] * c[5] / D44;
    const double b = c[2] * c[2] / D33 + (c[3] * c[3] + c[4] * c[4]) / D44;
    return std::sqrt(a + b * b);
}

inline double weighted_modulus(const SE3& g, double D33, double D44) { return weighted_modulus(log_se3(g), D33, D44); }

}  // namespace r3s2
