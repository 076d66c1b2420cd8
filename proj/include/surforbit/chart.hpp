// Charts describe the configuration surface locally: an embedding of a plane
// (or line, for one-degree-of-freedom problems) region into R^3 together with
// a signed boundary function b, positive inside the surface and zero on its
// boundary. Every chart is valid slightly beyond {b >= 0}, which lets
// trajectories be followed a short way past the boundary.
//
// Analytic derivative callbacks are optional; central differences with step
// fd_step (1e-5 x domain diameter by default) fill the gaps.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "surforbit/errors.hpp"
#include "surforbit/vec.hpp"

namespace surforbit {

// Packed index into the upper triangle of a symmetric N x N arrangement.
template <std::size_t N>
constexpr std::size_t sym_index(std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return i * N - i * (i - 1) / 2 + (j - i);
}

template <std::size_t N>
constexpr std::size_t sym_count = N * (N + 1) / 2;

template <std::size_t N>
struct Chart {
    using Point = Vec<N>;
    using Partials = std::array<Vec3, N>;                  // dr/du^i
    using SecondPartials = std::array<Vec3, sym_count<N>>; // d2r/du^i du^j, packed

    std::string name;
    double fd_step = 1e-5;          // central-difference step, pre-scaled
    double extension_margin = 0.0;  // how far past the boundary the chart extends

    std::function<Vec3(const Point&)> embed;
    std::function<Partials(const Point&)> jacobian;        // optional
    std::function<SecondPartials(const Point&)> second;    // optional
    std::function<double(const Point&)> boundary;          // b(u)
    std::function<Point(const Point&)> boundary_grad;      // optional
    std::function<bool(const Point&)> valid;
    std::function<bool(const Point&)> comfort;             // inner 80% of validity
    std::function<Point(const Vec3&)> invert_guess;        // optional Newton seed
    std::function<Vec3(const Point&)> normal_override;     // required when N == 1
    std::vector<std::function<Point(double)>> boundary_loops;  // angle -> u on {b=0}

    // Box half-width around the origin that contains the part mapping into M;
    // used by the deterministic samplers.
    double sample_halfwidth = 1.0;
};

using Chart1 = Chart<1>;
using Chart2 = Chart<2>;

template <std::size_t N>
inline Vec3 embed_point(const Chart<N>& chart, const Vec<N>& u) {
    if (!chart.valid(u)) {
        throw ChartDomainError("point outside validity set of chart '" + chart.name + "'");
    }
    return chart.embed(u);
}

// Raw evaluation without the validity gate, for derivative stencils that may
// poke marginally past the validity edge.
template <std::size_t N>
inline typename Chart<N>::Partials chart_jacobian(const Chart<N>& chart, const Vec<N>& u) {
    if (chart.jacobian) return chart.jacobian(u);
    typename Chart<N>::Partials J;
    const double h = chart.fd_step;
    for (std::size_t i = 0; i < N; ++i) {
        Vec<N> up = u, um = u;
        up[i] += h;
        um[i] -= h;
        J[i] = (chart.embed(up) - chart.embed(um)) / (2.0 * h);
    }
    return J;
}

template <std::size_t N>
inline typename Chart<N>::SecondPartials chart_second_partials(const Chart<N>& chart,
                                                               const Vec<N>& u) {
    if (chart.second) return chart.second(u);
    typename Chart<N>::SecondPartials S;
    const double h = chart.fd_step;
    if (chart.jacobian) {
        for (std::size_t j = 0; j < N; ++j) {
            Vec<N> up = u, um = u;
            up[j] += h;
            um[j] -= h;
            auto Jp = chart.jacobian(up), Jm = chart.jacobian(um);
            for (std::size_t i = 0; i <= j; ++i)
                S[sym_index<N>(i, j)] = (Jp[i] - Jm[i]) / (2.0 * h);
        }
        return S;
    }
    const Vec3 r0 = chart.embed(u);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = i; j < N; ++j) {
            Vec3 d;
            if (i == j) {
                Vec<N> up = u, um = u;
                up[i] += h;
                um[i] -= h;
                d = (chart.embed(up) - 2.0 * r0 + chart.embed(um)) / (h * h);
            } else {
                Vec<N> upp = u, upm = u, ump = u, umm = u;
                upp[i] += h; upp[j] += h;
                upm[i] += h; upm[j] -= h;
                ump[i] -= h; ump[j] += h;
                umm[i] -= h; umm[j] -= h;
                d = (chart.embed(upp) - chart.embed(upm) - chart.embed(ump) +
                     chart.embed(umm)) / (4.0 * h * h);
            }
            S[sym_index<N>(i, j)] = d;
        }
    }
    return S;
}

template <std::size_t N>
inline Vec<N> chart_boundary_grad(const Chart<N>& chart, const Vec<N>& u) {
    if (chart.boundary_grad) return chart.boundary_grad(u);
    Vec<N> g;
    const double h = chart.fd_step;
    for (std::size_t i = 0; i < N; ++i) {
        Vec<N> up = u, um = u;
        up[i] += h;
        um[i] -= h;
        g[i] = (chart.boundary(up) - chart.boundary(um)) / (2.0 * h);
    }
    return g;
}

// First fundamental form and Christoffel symbols of the embedding at u.
template <std::size_t N>
struct Metric {
    Mat<N, N> g;
    Mat<N, N> g_inv;
    double det = 0.0;
    // gamma[k](i,j) = Gamma^k_ij
    std::array<Mat<N, N>, N> gamma;
    typename Chart<N>::Partials partials;
};

template <std::size_t N>
inline Mat<N, N> metric_only(const Chart<N>& chart, const Vec<N>& u,
                             typename Chart<N>::Partials* partials_out = nullptr) {
    auto J = chart_jacobian(chart, u);
    Mat<N, N> g;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) g(i, j) = dot(J[i], J[j]);
    if (partials_out) *partials_out = J;
    return g;
}

template <std::size_t N>
inline Metric<N> metric_and_christoffel(const Chart<N>& chart, const Vec<N>& u) {
    Metric<N> m;
    m.g = metric_only(chart, u, &m.partials);

    if constexpr (N == 1) {
        m.det = m.g(0, 0);
        if (m.det <= 1e-12)
            throw DegenerateChartError("degenerate metric in chart '" + chart.name + "'");
        m.g_inv(0, 0) = 1.0 / m.det;
    } else {
        static_assert(N == 2, "charts are 1- or 2-dimensional");
        m.det = m.g(0, 0) * m.g(1, 1) - m.g(0, 1) * m.g(1, 0);
        if (m.det <= 1e-12)
            throw DegenerateChartError("degenerate metric in chart '" + chart.name + "'");
        const double inv = 1.0 / m.det;
        m.g_inv(0, 0) = m.g(1, 1) * inv;
        m.g_inv(1, 1) = m.g(0, 0) * inv;
        m.g_inv(0, 1) = -m.g(0, 1) * inv;
        m.g_inv(1, 0) = -m.g(1, 0) * inv;
    }

    auto S = chart_second_partials(chart, u);
    // Gamma^k_ij = g^{kl} <r_ij, r_l>
    for (std::size_t k = 0; k < N; ++k)
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = i; j < N; ++j) {
                double s = 0.0;
                for (std::size_t l = 0; l < N; ++l)
                    s += m.g_inv(k, l) * dot(S[sym_index<N>(i, j)], m.partials[l]);
                m.gamma[k](i, j) = s;
                m.gamma[k](j, i) = s;
            }
    return m;
}

// Unit surface normal. For N == 2 this is the normalized cross product of the
// coordinate partials; one-dimensional charts must supply normal_override.
template <std::size_t N>
inline Vec3 chart_normal(const Chart<N>& chart, const Vec<N>& u) {
    if (chart.normal_override) return chart.normal_override(u);
    if constexpr (N == 2) {
        auto J = chart_jacobian(chart, u);
        return normalized(cross(J[0], J[1]));
    } else {
        throw Error("chart '" + chart.name + "' has no normal definition");
    }
}

// Nearest-point inversion by Gauss-Newton on |r(u) - q|^2. Returns nullopt
// when the iteration leaves the validity set or fails to settle.
template <std::size_t N>
inline std::optional<Vec<N>> invert_chart(const Chart<N>& chart, const Vec3& q,
                                          std::optional<Vec<N>> guess = std::nullopt,
                                          double step_tol = 1e-13, int max_iter = 60) {
    Vec<N> u;
    if (guess)
        u = *guess;
    else if (chart.invert_guess)
        u = chart.invert_guess(q);
    // else start from the origin

    for (int it = 0; it < max_iter; ++it) {
        if (!chart.valid(u)) return std::nullopt;
        const Vec3 r = chart.embed(u);
        auto J = chart_jacobian(chart, u);
        Mat<N, N> JtJ;
        Vec<N> rhs;
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = 0; j < N; ++j) JtJ(i, j) = dot(J[i], J[j]);
            rhs[i] = dot(J[i], q - r);
        }
        auto delta = solve_linear(JtJ, rhs);
        if (!delta) return std::nullopt;
        u += *delta;
        if (norm(*delta) <= step_tol * (1.0 + norm(u))) {
            if (!chart.valid(u)) return std::nullopt;
            return u;
        }
    }
    return std::nullopt;
}

}  // namespace surforbit
