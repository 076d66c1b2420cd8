// Equations of motion for a unit-mass point constrained to the surface,
// written in chart coordinates so the constraint force is eliminated:
//
//   u''^k = -Gamma^k_ij u'^i u'^j + g^{kl} (F_total - gamma * p) . r_l
//
// with F_total the applied force plus gravity (plus the frame inertia force
// for scenarios simulated in the frame of a moving surface) and
// -gamma(t,q,p) * p the friction-like force.
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "surforbit/errors.hpp"
#include "surforbit/surface.hpp"

namespace surforbit {

struct FrictionModel {
    // Coefficient of the friction-like force -p * gamma(t, q, p), 1/seconds.
    std::function<double(double, const Vec3&, const Vec3&)> gamma;
    // Declared lower-bound data: gamma >= gamma_min whenever |p| > threshold_speed.
    double threshold_speed = 0.0;
    double gamma_min = 0.0;
};

struct ForcingLaw {
    // Applied force per unit mass, excluding gravity. T-periodic in t.
    std::function<Vec3(double, const Vec3&, const Vec3&)> force;
    double period = 1.0;
    // Declared bound on |force + gravity|.
    double f_max = 0.0;
    // For moving-frame scenarios: the prescribed frame acceleration a(t);
    // `force` already contains the inertia force -a(t).
    bool moving_frame = false;
    std::function<Vec3(double)> frame_accel;
};

struct SamplingParams {
    int time_samples = 64;
    int boundary_samples = 256;
    int speed_samples = 17;
    int interior_samples = 128;
    int shell_samples = 10000;
    int agreement_samples = 1000;
};

template <std::size_t N>
struct Scenario {
    static constexpr std::size_t dim = N;

    std::string name;
    Surface<N> surface;
    ForcingLaw forcing;
    FrictionModel friction;
    Vec3 gravity{{0.0, 0.0, -9.81}};
    double solver_tol = 1e-9;
    int seed_count = 64;
    SamplingParams sampling;
    // Flat key=value document this scenario was built from (config echo).
    std::vector<std::pair<std::string, std::string>> source_doc;

    double period() const { return forcing.period; }
};

using Scenario1 = Scenario<1>;
using Scenario2 = Scenario<2>;

// Time, active chart, chart coordinates and velocities.
template <std::size_t N>
struct ChartState {
    double t = 0.0;
    std::size_t chart = 0;
    Vec<N> u{};
    Vec<N> du{};
};

template <std::size_t N>
struct EmbeddedState {
    Vec3 q{};
    Vec3 p{};
};

template <std::size_t N>
inline EmbeddedState<N> embedded_state(const Scenario<N>& scenario, const ChartState<N>& s) {
    const Chart<N>& chart = scenario.surface.charts[s.chart];
    EmbeddedState<N> e;
    e.q = chart.embed(s.u);
    auto J = chart_jacobian(chart, s.u);
    for (std::size_t i = 0; i < N; ++i) e.p += s.du[i] * J[i];
    return e;
}

template <std::size_t N>
inline Vec3 total_force(const Scenario<N>& scenario, double t, const Vec3& q, const Vec3& p) {
    Vec3 f = scenario.forcing.force(t, q, p) + scenario.gravity;
    if (!all_finite(f))
        throw ScenarioError("non-finite force evaluation in scenario '" + scenario.name + "'");
    return f;
}

// Chart-coordinate accelerations; lambda never appears.
template <std::size_t N>
inline Vec<N> chart_accel(const Scenario<N>& scenario, const Chart<N>& chart, double t,
                          const Vec<N>& u, const Vec<N>& du) {
    const auto m = metric_and_christoffel(chart, u);
    const Vec3 q = chart.embed(u);
    Vec3 p{};
    for (std::size_t i = 0; i < N; ++i) p += du[i] * m.partials[i];

    const Vec3 f_total = total_force(scenario, t, q, p);
    const double gam = scenario.friction.gamma(t, q, p);
    if (!std::isfinite(gam))
        throw ScenarioError("non-finite friction coefficient in scenario '" + scenario.name +
                            "'");
    const Vec3 f = f_total - gam * p;

    Vec<N> cov;
    for (std::size_t l = 0; l < N; ++l) cov[l] = dot(f, m.partials[l]);

    Vec<N> acc = m.g_inv * cov;
    for (std::size_t k = 0; k < N; ++k) {
        double quad = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) quad += m.gamma[k](i, j) * du[i] * du[j];
        acc[k] -= quad;
    }
    if (!all_finite(acc))
        throw ScenarioError("non-finite acceleration in scenario '" + scenario.name + "'");
    return acc;
}

inline double kinetic_energy(const Vec3& p) { return 0.5 * dot(p, p); }

// Kinetic energy in chart coordinates, 0.5 * du^T g du.
template <std::size_t N>
inline double kinetic_energy_chart(const Chart<N>& chart, const Vec<N>& u, const Vec<N>& du) {
    auto g = metric_only(chart, u);
    double e = 0.0;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) e += du[i] * g(i, j) * du[j];
    return 0.5 * e;
}

// d/dt of the kinetic energy along the flow: (p, F_total) - |p|^2 gamma.
// The constraint term lambda (p, n_q) drops because p is tangent.
template <std::size_t N>
inline double kinetic_energy_rate(const Scenario<N>& scenario, double t, const Vec3& q,
                                  const Vec3& p) {
    return dot(p, total_force(scenario, t, q, p)) -
           dot(p, p) * scenario.friction.gamma(t, q, p);
}

}  // namespace surforbit
