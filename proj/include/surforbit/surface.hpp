// A surface is an atlas of charts plus an optional mesh that carries the
// topology. Geometry is immutable after construction and safe to share.
#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "surforbit/chart.hpp"
#include "surforbit/errors.hpp"
#include "surforbit/mesh.hpp"
#include "surforbit/vec.hpp"

namespace surforbit {

template <std::size_t N>
struct Surface {
    std::vector<Chart<N>> charts;
    Mesh mesh;                   // topology only; may be empty for ad-hoc surfaces
    double boundary_tol = 1e-8;  // |b| below this counts as on the boundary
};

using Surface1 = Surface<1>;
using Surface2 = Surface<2>;

// Point frame: embedded position, unit surface normal, and (for boundary
// points) the in-surface outward boundary normal nu.
struct TangentFrame {
    Vec3 q{};
    Vec3 n{};
    std::optional<Vec3> nu;
};

// Outward in-surface boundary normal: -grad b raised with the inverse metric,
// embedded and normalized. Points in the direction of decreasing b, i.e. out
// of the surface.
template <std::size_t N>
inline TangentFrame boundary_frame(const Surface<N>& surface, const Chart<N>& chart,
                                   const Vec<N>& u) {
    const double b = chart.boundary(u);
    if (std::abs(b) > surface.boundary_tol)
        throw Error("boundary_frame: point is not on the boundary (b = " + std::to_string(b) +
                    ") in chart '" + chart.name + "'");
    TangentFrame frame;
    frame.q = embed_point(chart, u);
    frame.n = chart_normal(chart, u);

    const Vec<N> db = chart_boundary_grad(chart, u);
    if (norm(db) <= 1e-7)
        throw IrregularBoundaryError("grad b vanishes on the boundary of chart '" +
                                     chart.name + "'");
    const auto metric = metric_and_christoffel(chart, u);
    Vec<N> nu_coords;
    for (std::size_t i = 0; i < N; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < N; ++j) s -= metric.g_inv(i, j) * db[j];
        nu_coords[i] = s;
    }
    Vec3 nu{};
    for (std::size_t i = 0; i < N; ++i) nu += nu_coords[i] * metric.partials[i];
    frame.nu = normalized(nu);
    return frame;
}

// Chart coordinates of an embedded point/velocity pair. The velocity is
// projected onto the tangent space spanned by the chart partials.
template <std::size_t N>
struct ChartCoords {
    Vec<N> u;
    Vec<N> du;
};

template <std::size_t N>
inline std::optional<ChartCoords<N>> express_in_chart(const Chart<N>& chart, const Vec3& q,
                                                      const Vec3& p,
                                                      double position_tol = 1e-8,
                                                      std::optional<Vec<N>> guess = std::nullopt) {
    auto u = invert_chart(chart, q, guess);
    if (!u) return std::nullopt;
    if (norm(chart.embed(*u) - q) > position_tol) return std::nullopt;
    auto J = chart_jacobian(chart, *u);
    Mat<N, N> JtJ;
    Vec<N> rhs;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) JtJ(i, j) = dot(J[i], J[j]);
        rhs[i] = dot(J[i], p);
    }
    auto du = solve_linear(JtJ, rhs);
    if (!du) return std::nullopt;
    return ChartCoords<N>{*u, *du};
}

// Index of the first chart that covers q comfortably, falling back to plain
// validity; nullopt when the atlas does not cover q.
template <std::size_t N>
inline std::optional<std::size_t> find_covering_chart(const Surface<N>& surface, const Vec3& q,
                                                      double position_tol = 1e-8) {
    std::optional<std::size_t> valid_only;
    for (std::size_t c = 0; c < surface.charts.size(); ++c) {
        auto u = invert_chart(surface.charts[c], q);
        if (!u) continue;
        if (norm(surface.charts[c].embed(*u) - q) > position_tol) continue;
        if (surface.charts[c].comfort(*u)) return c;
        if (!valid_only) valid_only = c;
    }
    return valid_only;
}

// Evenly spaced points along every boundary loop of every chart.
template <std::size_t N>
struct BoundarySample {
    std::size_t chart;
    Vec<N> u;
    double loop_angle;
    std::size_t loop_index;
};

template <std::size_t N>
inline std::vector<BoundarySample<N>> sample_boundary(const Surface<N>& surface,
                                                      std::size_t count) {
    std::vector<std::pair<std::size_t, std::size_t>> loops;  // (chart, loop)
    for (std::size_t c = 0; c < surface.charts.size(); ++c)
        for (std::size_t l = 0; l < surface.charts[c].boundary_loops.size(); ++l)
            loops.emplace_back(c, l);
    std::vector<BoundarySample<N>> samples;
    if (loops.empty() || count == 0) return samples;
    const std::size_t per_loop = std::max<std::size_t>(1, count / loops.size());
    constexpr double tau = 2.0 * 3.14159265358979323846;
    for (auto [c, l] : loops) {
        for (std::size_t k = 0; k < per_loop; ++k) {
            double ang = tau * static_cast<double>(k) / static_cast<double>(per_loop);
            samples.push_back({c, surface.charts[c].boundary_loops[l](ang), ang, l});
        }
    }
    return samples;
}

// Deterministic low-discrepancy interior points (b > margin) of chart 0.
template <std::size_t N>
inline std::vector<Vec<N>> sample_interior(const Surface<N>& surface, std::size_t count,
                                           double b_margin = 0.0) {
    const Chart<N>& chart = surface.charts.front();
    std::vector<Vec<N>> points;
    unsigned long long index = 0;
    while (points.size() < count && index < 1000 * (count + 16)) {
        auto h = halton<N>(index++);
        Vec<N> u;
        for (std::size_t i = 0; i < N; ++i)
            u[i] = (2.0 * h[i] - 1.0) * chart.sample_halfwidth;
        if (chart.valid(u) && chart.boundary(u) > b_margin) points.push_back(u);
    }
    if (points.size() < count)
        throw Error("interior sampling failed to reach the requested count");
    return points;
}

}  // namespace surforbit
