#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <utility>
#include <vector>

#include "se3.hpp"

namespace r3s2 {

inline constexpr int kMaxTessellationOrder = 6;

/// Three (vertex, weight) pairs of a containing triangle.
struct InterpolationWeights {
    int triangle = -1;
    std::array<int, 3> vertex{};
    std::array<double, 3> weight{};
};

/// Off-diagonal entry of the angular Laplacian.
struct AngularNeighbor {
    int vertex;
    double weight;
};

/**
 * @brief Icosahedral sampling of S^2 with per-vertex surface measures.
 *
 * Vertex 0 is e_z and vertex 1 is -e_z. Triangles are oriented counter-clockwise seen
 * from outside. Immutable once built; share it through shared_ptr.
 */
class Tessellation {
public:
    int order = 0;  ///< -1 for an explicit direction list without triangles
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<double> measures;                  ///< delta(n_k), steradians
    std::vector<std::vector<int>> vertex_triangles;  ///< incident triangles, ascending
    std::vector<std::array<int, 2>> edges;
    double mean_edge_length = 0;
    /// Cotangent weights w_kj of the Laplace-Beltrami operator, (L f)_k = sum_j w_kj (f_j - f_k) / delta_k.
    std::vector<std::vector<AngularNeighbor>> laplacian;
    /// Largest angular step h_a for which max_k sum_j w_kj / delta_k <= 4 / h_a^2.
    double angular_step = 0;

    int size() const { return static_cast<int>(vertices.size()); }
    bool has_triangles() const { return !triangles.empty(); }

    int nearest(const Vec3& n) const {
        int best = 0;
        double bd = -2;
        for (int k = 0; k < size(); ++k) {
            double d = vertices[k].dot(n);
            if (d > bd) bd = d, best = k;
        }
        return best;
    }

    /**
     * @brief Barycentric weights of the radial projection of n onto its containing triangle.
     *
     * The containing triangle is searched among those incident to the nearest vertex first.
     * Points on shared edges go to the lowest-index triangle.
     */
    InterpolationWeights interpolate(const Vec3& n) const {
        if (!has_triangles()) throw Error("interpolation needs a triangulated tessellation");
        auto try_tri = [&](int t, InterpolationWeights& out) {
            const auto& tri = triangles[t];
            const Vec3 &a = vertices[tri[0]], &b = vertices[tri[1]], &c = vertices[tri[2]];
            double w0 = n.dot(b.cross(c)), w1 = n.dot(c.cross(a)), w2 = n.dot(a.cross(b));
            const double tol = -1e-14;
            if (w0 < tol || w1 < tol || w2 < tol) return false;
            w0 = std::max(w0, 0.0), w1 = std::max(w1, 0.0), w2 = std::max(w2, 0.0);
            double s = w0 + w1 + w2;
            if (s <= 0) return false;
            out.triangle = t;
            out.vertex = tri;
            out.weight = {w0 / s, w1 / s, w2 / s};
            return true;
        };
        InterpolationWeights out;
        for (int t : vertex_triangles[nearest(n)])
            if (try_tri(t, out)) return out;
        for (int t = 0; t < static_cast<int>(triangles.size()); ++t)
            if (try_tri(t, out)) return out;
        throw Error("no containing triangle found; is n a unit vector?");
    }

    /// Debug dump: "v,index,x,y,z" rows then "t,index,i,j,k" rows.
    void write_csv(std::ostream& os) const {
        os.precision(17);
        for (int k = 0; k < size(); ++k)
            os << "v," << k << ',' << vertices[k].x() << ',' << vertices[k].y() << ',' << vertices[k].z() << '\n';
        for (std::size_t t = 0; t < triangles.size(); ++t)
            os << "t," << t << ',' << triangles[t][0] << ',' << triangles[t][1] << ',' << triangles[t][2] << '\n';
    }
};

/// Area of the spherical triangle with unit vertices a,b,c (L'Huilier's spherical-excess formula).
inline double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    auto arc = [](const Vec3& u, const Vec3& v) { return std::atan2(u.cross(v).norm(), u.dot(v)); };
    const double sa = arc(b, c), sb = arc(a, c), sc = arc(a, b);
    const double s = 0.5 * (sa + sb + sc);
    const double p = std::tan(0.5 * s) * std::tan(0.5 * (s - sa)) * std::tan(0.5 * (s - sb)) * std::tan(0.5 * (s - sc));
    return 4 * std::atan(std::sqrt(std::max(p, 0.0)));
}

/// delta(n_k) = 1/3 of the area of all incident spherical triangles.
inline std::vector<double> surface_measures(const Tessellation& t) {
    std::vector<double> d(t.vertices.size(), 0.0);
    for (const auto& tri : t.triangles) {
        double A = spherical_triangle_area(t.vertices[tri[0]], t.vertices[tri[1]], t.vertices[tri[2]]);
        for (int v : tri) d[v] += A / 3;
    }
    return d;
}

namespace detail {

inline void finish_tessellation(Tessellation& T) {
    const int N = T.size();
    T.vertex_triangles.assign(N, {});
    for (int t = 0; t < static_cast<int>(T.triangles.size()); ++t)
        for (int v : T.triangles[t]) T.vertex_triangles[v].push_back(t);
    T.measures = surface_measures(T);

    std::map<std::pair<int, int>, double> cot;
    for (const auto& tri : T.triangles) {
        for (int k = 0; k < 3; ++k) {
            int i = tri[k], j = tri[(k + 1) % 3], m = tri[(k + 2) % 3];
            Vec3 u = T.vertices[i] - T.vertices[m], v = T.vertices[j] - T.vertices[m];
            cot[{std::min(i, j), std::max(i, j)}] += 0.5 * u.dot(v) / u.cross(v).norm();
        }
    }
    T.edges.clear();
    T.laplacian.assign(N, {});
    double len = 0;
    for (const auto& [e, w] : cot) {
        T.edges.push_back({e.first, e.second});
        len += std::atan2(T.vertices[e.first].cross(T.vertices[e.second]).norm(),
                          T.vertices[e.first].dot(T.vertices[e.second]));
        T.laplacian[e.first].push_back({e.second, w});
        T.laplacian[e.second].push_back({e.first, w});
    }
    T.mean_edge_length = len / static_cast<double>(T.edges.size());
    double worst = 0;
    for (int k = 0; k < N; ++k) {
        double s = 0;
        for (const auto& nb : T.laplacian[k]) s += nb.weight;
        worst = std::max(worst, s / T.measures[k]);
    }
    T.angular_step = std::sqrt(4 / worst);
}

}  // namespace detail

/**
 * @brief Icosahedron with every face split into (o+1)^2 triangles, projected to S^2.
 *
 * N_o = 2 + 10 (o+1)^2. Throws OrderTooLarge for o > 6.
 */
inline Tessellation build_tessellation(int o) {
    if (o < 0) throw Error("tessellation order must be non-negative");
    if (o > kMaxTessellationOrder) throw OrderTooLarge("tessellation order above 6");
    const int m = o + 1;

    // Base icosahedron with vertices at the poles and two rings of five.
    std::vector<Vec3> base;
    base.emplace_back(0, 0, 1);
    base.emplace_back(0, 0, -1);
    const double zr = 1 / std::sqrt(5.0), rr = 2 / std::sqrt(5.0);
    for (int k = 0; k < 5; ++k) base.emplace_back(rr * std::cos(2 * kPi * k / 5), rr * std::sin(2 * kPi * k / 5), zr);
    for (int k = 0; k < 5; ++k)
        base.emplace_back(rr * std::cos(2 * kPi * (k + 0.5) / 5), rr * std::sin(2 * kPi * (k + 0.5) / 5), -zr);
    std::vector<std::array<int, 3>> faces;
    for (int k = 0; k < 5; ++k) {
        int u0 = 2 + k, u1 = 2 + (k + 1) % 5, l0 = 7 + k, l1 = 7 + (k + 1) % 5;
        faces.push_back({0, u0, u1});
        faces.push_back({u0, l0, u1});
        faces.push_back({u1, l0, l1});
        faces.push_back({1, l1, l0});
    }
    for (auto& f : faces) {
        const Vec3 &a = base[f[0]], &b = base[f[1]], &c = base[f[2]];
        if ((b - a).cross(c - a).dot(a + b + c) < 0) std::swap(f[1], f[2]);
    }

    Tessellation T;
    T.order = o;
    std::vector<Vec3> planar = base;
    // Interior points of every edge, generated from its lower-index end.
    std::map<std::pair<int, int>, std::vector<int>> edge_points;
    auto edge_point = [&](int a, int b, int k) -> int {  // k-th point from a towards b, 0 < k < m
        auto key = std::make_pair(std::min(a, b), std::max(a, b));
        auto it = edge_points.find(key);
        if (it == edge_points.end()) {
            std::vector<int> ids;
            for (int i = 1; i < m; ++i) {
                planar.push_back(base[key.first] + (base[key.second] - base[key.first]) * (double(i) / m));
                ids.push_back(static_cast<int>(planar.size()) - 1);
            }
            it = edge_points.emplace(key, std::move(ids)).first;
        }
        return a == key.first ? it->second[k - 1] : it->second[m - k - 1];
    };
    for (const auto& f : faces) {
        const int A = f[0], B = f[1], C = f[2];
        // grid point (i, j) = A + i/m (B - A) + j/m (C - A)
        std::vector<std::vector<int>> id(m + 1, std::vector<int>(m + 1, -1));
        for (int i = 0; i <= m; ++i) {
            for (int j = 0; i + j <= m; ++j) {
                int v;
                if (i == 0 && j == 0) v = A;
                else if (i == m) v = B;
                else if (j == m) v = C;
                else if (j == 0) v = edge_point(A, B, i);
                else if (i == 0) v = edge_point(A, C, j);
                else if (i + j == m) v = edge_point(B, C, j);
                else {
                    planar.push_back(base[A] + (base[B] - base[A]) * (double(i) / m) + (base[C] - base[A]) * (double(j) / m));
                    v = static_cast<int>(planar.size()) - 1;
                }
                id[i][j] = v;
            }
        }
        for (int i = 0; i < m; ++i) {
            for (int j = 0; i + j < m; ++j) {
                T.triangles.push_back({id[i][j], id[i + 1][j], id[i][j + 1]});
                if (i + j < m - 1) T.triangles.push_back({id[i + 1][j], id[i + 1][j + 1], id[i][j + 1]});
            }
        }
    }
    T.vertices.reserve(planar.size());
    for (const auto& p : planar) T.vertices.push_back(p.normalized());
    detail::finish_tessellation(T);
    return T;
}

/// Unit direction list without triangulation (used for files with explicit directions).
inline Tessellation tessellation_from_directions(const std::vector<Vec3>& dirs) {
    Tessellation T;
    T.order = -1;
    T.vertices = dirs;  // stored as given so files round-trip bit for bit
    T.measures.assign(dirs.size(), 4 * kPi / static_cast<double>(dirs.size()));
    T.vertex_triangles.assign(dirs.size(), {});
    T.laplacian.assign(dirs.size(), {});
    return T;
}

inline std::shared_ptr<const Tessellation> make_tessellation(int o) {
    return std::make_shared<const Tessellation>(build_tessellation(o));
}

}  // namespace r3s2
