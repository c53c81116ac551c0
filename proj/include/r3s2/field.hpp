#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "sphere_grid.hpp"

namespace r3s2 {

/**
 * @brief Scalar field U(y, n_l) on a voxel grid times the tessellation directions.
 *
 * Voxel (x,y,z) sits at position h*(x,y,z). Layout index ((x*Ny + y)*Nz + z)*N_o + l.
 */
struct OrientationField {
    std::array<int, 3> dims{0, 0, 0};
    double h = 1;
    std::shared_ptr<const Tessellation> tess;
    std::vector<double> data;
    bool is_signed = false;  ///< set once values may be negative (erosions of signed input)

    OrientationField() = default;
    OrientationField(std::array<int, 3> d, double spacing, std::shared_ptr<const Tessellation> t, double value = 0)
        : dims(d), h(spacing), tess(std::move(t)) {
        data.assign(static_cast<std::size_t>(voxels()) * directions(), value);
    }

    int directions() const { return tess ? tess->size() : 0; }
    std::size_t voxels() const { return std::size_t(dims[0]) * dims[1] * dims[2]; }
    std::size_t size() const { return data.size(); }
    std::size_t voxel_index(int x, int y, int z) const { return (std::size_t(x) * dims[1] + y) * dims[2] + z; }
    std::size_t index(int x, int y, int z, int l) const { return voxel_index(x, y, z) * directions() + l; }
    double& at(int x, int y, int z, int l) { return data[index(x, y, z, l)]; }
    double at(int x, int y, int z, int l) const { return data[index(x, y, z, l)]; }
    std::array<int, 3> voxel_coords(std::size_t v) const {
        int z = static_cast<int>(v % dims[2]);
        int y = static_cast<int>((v / dims[2]) % dims[1]);
        int x = static_cast<int>(v / (std::size_t(dims[2]) * dims[1]));
        return {x, y, z};
    }
    Vec3 position(std::size_t v) const {
        auto c = voxel_coords(v);
        return h * Vec3(c[0], c[1], c[2]);
    }
    bool same_grid(const OrientationField& o) const {
        return dims == o.dims && h == o.h && directions() == o.directions();
    }

    /// sum_y sum_l U(y, n_l) delta(n_l) h^3
    double mass() const {
        const int No = directions();
        double m = 0;
        for (std::size_t v = 0; v < voxels(); ++v) {
            double s = 0;
            for (int l = 0; l < No; ++l) s += data[v * No + l] * tess->measures[l];
            m += s;
        }
        return m * h * h * h;
    }
    double min() const { return *std::min_element(data.begin(), data.end()); }
    double max() const { return *std::max_element(data.begin(), data.end()); }
    double max_abs() const {
        double m = 0;
        for (double v : data) m = std::max(m, std::abs(v));
        return m;
    }
};

/// Kernel p(y, n) on R^3 x S^2 relative to the unity element (0, e_z).
using KernelFn = std::function<double(const Vec3& y, const Vec3& n)>;

/// max |a - b| / max |a|
inline double rel_linf(const OrientationField& a, const OrientationField& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
    double s = a.max_abs();
    return s > 0 ? d / s : d;
}

// ---------------------------------------------------------------------------
// Grey-value transforms

/// Per voxel ((U - min)/(max - min))^2 over directions; voxels with max == min become 0.
inline OrientationField minmax_sharpen(const OrientationField& U) {
    OrientationField V = U;
    const int No = U.directions();
    for (std::size_t v = 0; v < U.voxels(); ++v) {
        const double* u = &U.data[v * No];
        auto [lo, hi] = std::minmax_element(u, u + No);
        double a = *lo, r = *hi - *lo;
        for (int l = 0; l < No; ++l) {
            double s = r > 0 ? (u[l] - a) / r : 0.0;
            V.data[v * No + l] = s * s;
        }
    }
    V.is_signed = false;
    return V;
}

inline OrientationField power_transform(const OrientationField& U, double p) {
    if (p < 1) throw Error("power_transform needs p >= 1");
    OrientationField V = U;
    for (double& x : V.data) {
        if (x < 0) throw NegativeInput("power_transform of a negative value");
        x = std::pow(x, p);
    }
    return V;
}

// ---------------------------------------------------------------------------
// DTI

struct DtiVolume {
    std::array<int, 3> dims{0, 0, 0};
    double h = 1;
    std::vector<Mat3> tensors;  ///< voxel order as in OrientationField
};

/// U(y, n) = 3 / (4 pi sum_y trace D(y) h^3) * n^T D(y) n
inline OrientationField dti_to_field(const DtiVolume& D, std::shared_ptr<const Tessellation> t) {
    double tr = 0;
    for (const auto& T : D.tensors) {
        if ((T - T.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, T.cwiseAbs().maxCoeff()))
            throw NonSPD("DTI tensor is not symmetric");
        Eigen::SelfAdjointEigenSolver<Mat3> es(T, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() <= 0) throw NonSPD("DTI tensor is not positive definite");
        tr += T.trace();
    }
    OrientationField U(D.dims, D.h, std::move(t));
    const double c = 3 / (4 * kPi * tr * D.h * D.h * D.h);
    const int No = U.directions();
    for (std::size_t v = 0; v < U.voxels(); ++v)
        for (int l = 0; l < No; ++l) {
            const Vec3& n = U.tess->vertices[l];
            U.data[v * No + l] = c * n.dot(D.tensors[v] * n);
        }
    return U;
}

// ---------------------------------------------------------------------------
// Glyphs

struct GlyphVertex {
    std::size_t voxel;
    int l;
    Vec3 p;
};

/// Points y + mu U(y, n_l) n_l for each requested voxel.
inline std::vector<GlyphVertex> export_glyphs(const OrientationField& U, double mu, const std::vector<std::size_t>& voxels) {
    if (!(mu > 0)) throw Error("glyph scale mu must be positive");
    std::vector<GlyphVertex> out;
    const int No = U.directions();
    for (std::size_t v : voxels) {
        const Vec3 y = U.position(v);
        for (int l = 0; l < No; ++l) out.push_back({v, l, y + mu * U.data[v * No + l] * U.tess->vertices[l]});
    }
    return out;
}

/// One record per vertex: voxel-index, l, x, y, z
inline void write_glyphs_csv(std::ostream& os, const std::vector<GlyphVertex>& g) {
    os.precision(17);
    for (const auto& r : g) os << r.voxel << ',' << r.l << ',' << r.p.x() << ',' << r.p.y() << ',' << r.p.z() << '\n';
}

/// Wavefront OBJ with one surface per voxel, faces from the tessellation triangles.
inline void write_glyphs_obj(std::ostream& os, const std::vector<GlyphVertex>& g, const Tessellation& t) {
    os.precision(17);
    for (const auto& r : g) os << "v " << r.p.x() << ' ' << r.p.y() << ' ' << r.p.z() << '\n';
    const std::size_t No = t.vertices.size();
    for (std::size_t base = 0; base + No <= g.size(); base += No)
        for (const auto& tri : t.triangles)
            os << "f " << base + tri[0] + 1 << ' ' << base + tri[1] + 1 << ' ' << base + tri[2] + 1 << '\n';
}

// ---------------------------------------------------------------------------
// Binary file format "R3S2F\x01"

inline constexpr char kFieldMagic[6] = {'R', '3', 'S', '2', 'F', '\x01'};
inline constexpr std::uint32_t kExplicitDirections = 0xFFFFFFFFu;

namespace detail {
template <class T>
void put_le(std::ostream& os, T v) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U u = std::bit_cast<U>(v);
    char b[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
    os.write(b, sizeof(U));
}
template <class T>
T get_le(std::istream& is) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    unsigned char b[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(U))) throw FormatError("truncated field file");
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(b[i]) << (8 * i);
    return std::bit_cast<T>(u);
}
}  // namespace detail

inline void write_field(std::ostream& os, const OrientationField& U) {
    os.write(kFieldMagic, 6);
    for (int d : U.dims) detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(U.directions()));
    const bool expl = U.tess->order < 0;
    detail::put_le<std::uint32_t>(os, expl ? kExplicitDirections : static_cast<std::uint32_t>(U.tess->order));
    if (expl)
        for (const auto& n : U.tess->vertices)
            for (int k = 0; k < 3; ++k) detail::put_le<double>(os, n[k]);
    detail::put_le<double>(os, U.h);
    for (double v : U.data) detail::put_le<float>(os, static_cast<float>(v));
    if (!os) throw FormatError("write failed");
}

inline OrientationField read_field(std::istream& is) {
    char magic[6];
    if (!is.read(magic, 6) || std::memcmp(magic, kFieldMagic, 6) != 0) throw FormatError("bad magic, not an R3S2F file");
    std::array<int, 3> dims;
    for (int& d : dims) d = static_cast<int>(detail::get_le<std::uint32_t>(is));
    const std::uint32_t No = detail::get_le<std::uint32_t>(is);
    const std::uint32_t order = detail::get_le<std::uint32_t>(is);
    std::shared_ptr<const Tessellation> tess;
    if (order == kExplicitDirections) {
        std::vector<Vec3> dirs(No);
        for (auto& n : dirs)
            for (int k = 0; k < 3; ++k) n[k] = detail::get_le<double>(is);
        tess = std::make_shared<const Tessellation>(tessellation_from_directions(dirs));
    } else {
        if (order > static_cast<std::uint32_t>(kMaxTessellationOrder)) throw FormatError("tessellation order out of range");
        tess = make_tessellation(static_cast<int>(order));
        if (static_cast<std::uint32_t>(tess->size()) != No) throw FormatError("N_o does not match the tessellation order");
    }
    const double h = detail::get_le<double>(is);
    if (!(h > 0)) throw FormatError("non-positive spacing");
    for (int d : dims)
        if (d <= 0 || d > 4096) throw FormatError("implausible grid dimension");
    OrientationField U(dims, h, tess);
    for (double& v : U.data) {
        v = detail::get_le<float>(is);
        if (!std::isfinite(v)) throw FormatError("non-finite value in field data");
        if (v < 0) U.is_signed = true;
    }
    return U;
}

inline void save_field(const std::string& path, const OrientationField& U) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    write_field(f, U);
}

inline OrientationField load_field(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    return read_field(f);
}

}  // namespace r3s2
