#pragma once

#include <cmath>
#include <cstdint>
#include <mutex>
#include <random>
#include <vector>

#include "field.hpp"
#include "fd_operators.hpp"

namespace r3s2 {

/// Left-invariant random walk G_{k+1} = G_k exp(ds a + sqrt(ds) sigma eps).
struct WalkParams {
    double a3 = 0;                   ///< drift along A3
    double D11 = 0, D33 = 0, D44 = 0;  ///< sigma_ii = sqrt(2 D^ii); D22 = D11, D55 = D44
    double ds = 0.01;
    long steps = 100;
    long samples = 100000;
    std::uint64_t seed = 1;
};

namespace detail {
/// Independent generator for walk `index`; the stream depends only on (seed, index).
inline std::mt19937_64 walk_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}
}  // namespace detail

/// Endpoint of walk `index`, started at `start`.
inline SE3 sample_walk(const WalkParams& p, std::uint64_t index, const SE3& start = SE3::identity()) {
    if (!(p.ds > 0)) throw Error("walk step ds must be positive");
    auto rng = detail::walk_rng(p.seed, index);
    std::normal_distribution<double> N01;
    const double r = std::sqrt(p.ds);
    const double s1 = std::sqrt(2 * p.D11) * r, s3 = std::sqrt(2 * p.D33) * r, s4 = std::sqrt(2 * p.D44) * r;
    SE3 g = start;
    LieVector c;
    for (long k = 0; k < p.steps; ++k) {
        const double e1 = N01(rng), e2 = N01(rng), e3 = N01(rng), e4 = N01(rng), e5 = N01(rng);
        c << s1 * e1, s1 * e2, p.ds * p.a3 + s3 * e3, s4 * e4, s4 * e5, 0;
        g = g * exp_se3(c);
    }
    return g;
}

struct EmpiricalKernel {
    OrientationField field;
    long escaped = 0;  ///< walks that ended outside the grid (only without wrap)
};

/**
 * @brief Histogram of walk endpoints binned into voxels times nearest directions.
 *
 * Walks start at voxel `origin` with orientation n_{l0}. Each hit adds 1/(M delta_l h^3), so
 * the field integrates to the fraction of walks that stayed on the grid (all of them with wrap).
 */
inline EmpiricalKernel empirical_kernel(const WalkParams& p, std::array<int, 3> dims, double h,
                                        std::shared_ptr<const Tessellation> tess, std::array<int, 3> origin,
                                        int l0 = 0, bool wrap = false) {
    EmpiricalKernel out{OrientationField(dims, h, tess), 0};
    OrientationField& U = out.field;
    const int No = U.directions();
    const SE3 start{Vec3::Zero(), rotation_onto(tess->vertices[l0])};
    std::vector<long> counts(U.size(), 0);
    std::mutex mu;
    const std::size_t chunks = std::max<std::size_t>(1, thread_count()) * 8;
    parallel_for(chunks, [&](std::size_t ch) {
        std::vector<std::pair<std::size_t, long>> hits;
        long esc = 0;
        const long lo = static_cast<long>(ch * p.samples / chunks), hi = static_cast<long>((ch + 1) * p.samples / chunks);
        for (long w = lo; w < hi; ++w) {
            const SE3 g = sample_walk(p, static_cast<std::uint64_t>(w), start);
            std::array<int, 3> v;
            bool inside = true;
            for (int d = 0; d < 3; ++d) {
                long i = origin[d] + std::lround(g.x[d] / h);
                if (wrap) i = ((i % dims[d]) + dims[d]) % dims[d];
                if (i < 0 || i >= dims[d]) inside = false;
                v[d] = static_cast<int>(i);
            }
            if (!inside) {
                ++esc;
                continue;
            }
            hits.emplace_back(U.index(v[0], v[1], v[2], tess->nearest(g.R.col(2))), 1);
        }
        std::lock_guard<std::mutex> lock(mu);
        for (const auto& [k, n] : hits) counts[k] += n;
        out.escaped += esc;
    }, 1);
    const double M = static_cast<double>(p.samples), h3 = h * h * h;
    for (std::size_t k = 0; k < U.size(); ++k)
        U.data[k] = static_cast<double>(counts[k]) / (M * tess->measures[k % No] * h3);
    return out;
}

}  // namespace r3s2
