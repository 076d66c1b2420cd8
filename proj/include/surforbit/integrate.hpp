// Adaptive Dormand-Prince RK5(4) integration of the chart-coordinate ODE,
// with chart switching when a trajectory drifts out of the active chart's
// comfort zone and bisection-localized events for boundary crossing (b = 0)
// and kinetic-energy-ceiling crossing (|p|^2/2 = c).
//
// Everything here is deterministic: fixed evaluation order, no time-based
// seeding, so identical inputs give bit-identical trajectories.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "surforbit/dynamics.hpp"
#include "surforbit/errors.hpp"

namespace surforbit {

enum class Termination {
    reached_t_end,
    exited_m,
    energy_ceiling,
    left_atlas,
};

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::reached_t_end: return "reached t_end";
        case Termination::exited_m: return "exited M";
        case Termination::energy_ceiling: return "energy ceiling";
        case Termination::left_atlas: return "left chart atlas";
    }
    return "?";
}

template <std::size_t N>
struct StepRecord {
    ChartState<N> state;
    double step_size = 0.0;      // size of the step that produced this state
    double error_estimate = 0.0; // absolute mixed-norm estimate of that step
};

template <std::size_t N>
struct TrajectorySegment {
    std::vector<StepRecord<N>> steps;  // includes the initial state
    Termination reason = Termination::reached_t_end;

    const ChartState<N>& last() const { return steps.back().state; }
};

struct IntegratorOptions {
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
    double h_init = 0.0;  // 0: choose automatically
    double h_min = 1e-14;
    bool boundary_event = false;
    std::optional<double> energy_ceiling;  // event on |p|^2/2 = c when set
    bool allow_chart_switch = true;
    double event_time_tol = 1e-12;
    long max_steps = 50'000'000;

    IntegratorOptions with_tol(double tol) const {
        IntegratorOptions o = *this;
        o.abs_tol = o.rel_tol = tol;
        return o;
    }
};

namespace detail {

// Dormand-Prince 5(4) coefficients.
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                            e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;
};

template <std::size_t N>
struct Phase {
    Vec<N> u, du;

    Phase& axpy(double a, const Phase& o) {
        for (std::size_t i = 0; i < N; ++i) {
            u[i] += a * o.u[i];
            du[i] += a * o.du[i];
        }
        return *this;
    }
};

}  // namespace detail

template <std::size_t N>
struct StepOutcome {
    ChartState<N> state;          // state after the step (same chart)
    double error_estimate = 0.0;  // |y5 - y4| mixed norm
    double scaled_error = 0.0;    // error / (atol + rtol |y|), RMS
};

// One embedded RK5(4) step. Returns nullopt when a stage leaves the chart's
// validity set (caller shrinks the step or switches chart).
template <std::size_t N>
inline std::optional<StepOutcome<N>> rk_step(const Scenario<N>& scenario,
                                             const ChartState<N>& s, double h,
                                             const IntegratorOptions& opt = {}) {
    using D = detail::Dopri5;
    const Chart<N>& chart = scenario.surface.charts[s.chart];

    auto deriv = [&](double t, const detail::Phase<N>& y,
                     detail::Phase<N>& out) -> bool {
        if (!chart.valid(y.u)) return false;
        out.u = y.du;
        out.du = chart_accel(scenario, chart, t, y.u, y.du);
        return true;
    };

    const detail::Phase<N> y0{s.u, s.du};
    detail::Phase<N> k1, k2, k3, k4, k5, k6, k7;
    detail::Phase<N> w;

    if (!deriv(s.t, y0, k1)) return std::nullopt;
    w = y0; w.axpy(h * D::a21, k1);
    if (!deriv(s.t + D::c2 * h, w, k2)) return std::nullopt;
    w = y0; w.axpy(h * D::a31, k1).axpy(h * D::a32, k2);
    if (!deriv(s.t + D::c3 * h, w, k3)) return std::nullopt;
    w = y0; w.axpy(h * D::a41, k1).axpy(h * D::a42, k2).axpy(h * D::a43, k3);
    if (!deriv(s.t + D::c4 * h, w, k4)) return std::nullopt;
    w = y0; w.axpy(h * D::a51, k1).axpy(h * D::a52, k2).axpy(h * D::a53, k3).axpy(h * D::a54, k4);
    if (!deriv(s.t + D::c5 * h, w, k5)) return std::nullopt;
    w = y0; w.axpy(h * D::a61, k1).axpy(h * D::a62, k2).axpy(h * D::a63, k3)
             .axpy(h * D::a64, k4).axpy(h * D::a65, k5);
    if (!deriv(s.t + h, w, k6)) return std::nullopt;

    detail::Phase<N> y5 = y0;
    y5.axpy(h * D::b1, k1).axpy(h * D::b3, k3).axpy(h * D::b4, k4)
      .axpy(h * D::b5, k5).axpy(h * D::b6, k6);
    if (!deriv(s.t + h, y5, k7)) return std::nullopt;

    detail::Phase<N> y4 = y0;
    y4.axpy(h * D::e1, k1).axpy(h * D::e3, k3).axpy(h * D::e4, k4)
      .axpy(h * D::e5, k5).axpy(h * D::e6, k6).axpy(h * D::e7, k7);

    StepOutcome<N> out;
    out.state = ChartState<N>{s.t + h, s.chart, y5.u, y5.du};
    double err2 = 0.0, raw2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        double eu = y5.u[i] - y4.u[i];
        double ed = y5.du[i] - y4.du[i];
        raw2 += eu * eu + ed * ed;
        double su = opt.abs_tol + opt.rel_tol * std::max(std::abs(y0.u[i]), std::abs(y5.u[i]));
        double sd = opt.abs_tol + opt.rel_tol * std::max(std::abs(y0.du[i]), std::abs(y5.du[i]));
        err2 += (eu / su) * (eu / su) + (ed / sd) * (ed / sd);
    }
    out.error_estimate = std::sqrt(raw2);
    out.scaled_error = std::sqrt(err2 / (2.0 * N));
    return out;
}

namespace detail {

// First other chart covering the state, preferring comfortable coverage.
template <std::size_t N>
inline std::optional<ChartState<N>> reexpress_elsewhere(const Surface<N>& surface,
                                                        const Scenario<N>& scenario,
                                                        const ChartState<N>& s) {
    auto e = embedded_state(scenario, s);
    std::optional<ChartState<N>> valid_only;
    for (std::size_t c = 0; c < surface.charts.size(); ++c) {
        if (c == s.chart) continue;
        auto coords = express_in_chart(surface.charts[c], e.q, e.p, 1e-8);
        if (!coords) continue;
        if (surface.charts[c].comfort(coords->u))
            return ChartState<N>{s.t, c, coords->u, coords->du};
        if (!valid_only && surface.charts[c].valid(coords->u))
            valid_only = ChartState<N>{s.t, c, coords->u, coords->du};
    }
    return valid_only;
}

}  // namespace detail

// Re-expresses a state in the first chart that covers it comfortably. The
// embedded point and velocity are preserved; identity when the current chart
// is already comfortable.
template <std::size_t N>
inline ChartState<N> switch_chart(const Surface<N>& surface, const Scenario<N>& scenario,
                                  const ChartState<N>& s) {
    const Chart<N>& current = surface.charts[s.chart];
    if (current.comfort(s.u)) return s;
    auto other = detail::reexpress_elsewhere(surface, scenario, s);
    if (other && surface.charts[other->chart].comfort(other->u)) return *other;
    if (current.valid(s.u)) return s;  // tolerable: still inside the active chart
    if (other) return *other;
    throw AtlasError("no chart of the atlas covers the current point");
}

namespace detail {

template <std::size_t N>
inline double boundary_value(const Scenario<N>& scenario, const ChartState<N>& s) {
    return scenario.surface.charts[s.chart].boundary(s.u);
}

template <std::size_t N>
inline double ceiling_value(const Scenario<N>& scenario, const ChartState<N>& s, double c) {
    const Chart<N>& chart = scenario.surface.charts[s.chart];
    return c - kinetic_energy_chart(chart, s.u, s.du);
}

// Bisect the event time inside an accepted step [s0, s0 + h]. The event
// function g is positive at the start and non-positive at the end; sub-states
// are produced by a single RK step from s0 (no dense output). Returns the
// state on the non-positive side of the crossing.
template <std::size_t N, typename EventFn>
inline ChartState<N> localize_event(const Scenario<N>& scenario, const ChartState<N>& s0,
                                    double h, const ChartState<N>& end_state,
                                    const IntegratorOptions& opt, const EventFn& g) {
    double lo = 0.0, hi = h;
    ChartState<N> hi_state = end_state;
    while (hi - lo > opt.event_time_tol) {
        double mid = 0.5 * (lo + hi);
        auto probe = rk_step(scenario, s0, mid, opt);
        if (!probe) {  // stage left validity; event is earlier
            hi = mid;
            continue;
        }
        if (g(probe->state) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
            hi_state = probe->state;
        }
    }
    return hi_state;
}

}  // namespace detail

// Adaptive integration from state0 to t_end or the first enabled event.
template <std::size_t N>
inline TrajectorySegment<N> integrate(const Scenario<N>& scenario, const ChartState<N>& state0,
                                      double t_end, const IntegratorOptions& opt = {}) {
    TrajectorySegment<N> traj;
    ChartState<N> s = state0;
    if (!scenario.surface.charts[s.chart].valid(s.u))
        throw ChartDomainError("initial state outside chart validity in scenario '" +
                               scenario.name + "'");
    traj.steps.push_back({s, 0.0, 0.0});
    if (t_end <= s.t) return traj;

    const double span = t_end - s.t;
    double h = opt.h_init > 0.0 ? opt.h_init : span * 1e-3;
    h = std::min(h, span);

    long n_steps = 0;
    int rescues = 0;
    while (s.t < t_end) {
        if (++n_steps > opt.max_steps)
            throw NumericalError("step budget exhausted in scenario '" + scenario.name + "'");
        bool final_step = false;
        if (s.t + h >= t_end - 1e-15 * std::abs(t_end)) {
            h = t_end - s.t;
            final_step = true;
        }

        auto attempt = rk_step(scenario, s, h, opt);
        if (!attempt) {
            // A stage left the chart. Hop to a chart that covers the point
            // comfortably (only from an uncomfortable one, so two charts
            // cannot trade the state back and forth), else shrink the step.
            if (opt.allow_chart_switch && scenario.surface.charts.size() > 1 &&
                !scenario.surface.charts[s.chart].comfort(s.u)) {
                auto other = detail::reexpress_elsewhere(scenario.surface, scenario, s);
                if (other && scenario.surface.charts[other->chart].comfort(other->u)) {
                    s = *other;
                    continue;
                }
            }
            h *= 0.5;
            if (h < opt.h_min) {
                // Last resort before giving up: any valid chart, at most once
                // per position.
                if (opt.allow_chart_switch && rescues < 2) {
                    auto other = detail::reexpress_elsewhere(scenario.surface, scenario, s);
                    if (other) {
                        ++rescues;
                        s = *other;
                        h = span * 1e-6;
                        continue;
                    }
                }
                if (detail::boundary_value(scenario, s) <= 0.0) {
                    traj.reason = Termination::left_atlas;
                    return traj;
                }
                std::ostringstream diag;
                diag << "step size underflow at t = " << s.t << ", u = " << s.u
                     << " in scenario '" << scenario.name << "'";
                throw NumericalError(diag.str());
            }
            continue;
        }
        rescues = 0;

        if (attempt->scaled_error > 1.0) {
            double shrink = 0.9 * std::pow(attempt->scaled_error, -0.2);
            h *= std::clamp(shrink, 0.2, 0.9);
            if (h < opt.h_min)
                throw NumericalError("step size underflow (error control) in scenario '" +
                                     scenario.name + "'");
            continue;
        }

        ChartState<N> next = attempt->state;

        // Events, boundary first.
        if (opt.boundary_event) {
            double b_old = detail::boundary_value(scenario, s);
            double b_new = detail::boundary_value(scenario, next);
            if (b_old > 0.0 && b_new <= 0.0) {
                auto hit = detail::localize_event(
                    scenario, s, h, next, opt,
                    [&](const ChartState<N>& x) { return detail::boundary_value(scenario, x); });
                traj.steps.push_back({hit, hit.t - s.t, attempt->error_estimate});
                traj.reason = Termination::exited_m;
                return traj;
            }
        }
        if (opt.energy_ceiling) {
            const double c = *opt.energy_ceiling;
            double g_old = detail::ceiling_value(scenario, s, c);
            double g_new = detail::ceiling_value(scenario, next, c);
            if (g_old > 0.0 && g_new <= 0.0) {
                auto hit = detail::localize_event(
                    scenario, s, h, next, opt, [&](const ChartState<N>& x) {
                        return detail::ceiling_value(scenario, x, c);
                    });
                traj.steps.push_back({hit, hit.t - s.t, attempt->error_estimate});
                traj.reason = Termination::energy_ceiling;
                return traj;
            }
        }

        s = next;
        traj.steps.push_back({s, h, attempt->error_estimate});
        if (final_step) break;

        double grow = attempt->scaled_error > 0.0
                          ? 0.9 * std::pow(attempt->scaled_error, -0.2)
                          : 5.0;
        h *= std::clamp(grow, 0.2, 5.0);

        if (opt.allow_chart_switch && !scenario.surface.charts[s.chart].comfort(s.u)) {
            try {
                s = switch_chart(scenario.surface, scenario, s);
            } catch (const AtlasError&) {
                traj.reason = Termination::left_atlas;
                return traj;
            }
        }
    }
    traj.reason = Termination::reached_t_end;
    return traj;
}

// Fixed-step driver, used by convergence studies and very short probe runs.
// No events, no chart switching, no error control.
template <std::size_t N>
inline TrajectorySegment<N> integrate_fixed(const Scenario<N>& scenario,
                                            const ChartState<N>& state0, double t_end,
                                            long n_steps) {
    TrajectorySegment<N> traj;
    ChartState<N> s = state0;
    traj.steps.push_back({s, 0.0, 0.0});
    const double h = (t_end - s.t) / static_cast<double>(n_steps);
    IntegratorOptions opt;  // tolerances only scale the reported error
    for (long i = 0; i < n_steps; ++i) {
        auto out = rk_step(scenario, s, h, opt);
        if (!out)
            throw ChartDomainError("fixed-step trajectory left the chart in scenario '" +
                                   scenario.name + "'");
        s = out->state;
        traj.steps.push_back({s, h, out->error_estimate});
    }
    return traj;
}

// CSV export: one row per accepted step.
template <std::size_t N>
inline std::string trajectory_csv(const Scenario<N>& scenario, const TrajectorySegment<N>& traj) {
    std::string out = "t,qx,qy,qz,px,py,pz,kinetic_energy,b\n";
    char buf[360];
    for (const auto& rec : traj.steps) {
        auto e = embedded_state(scenario, rec.state);
        double ke = kinetic_energy(e.p);
        double b = scenario.surface.charts[rec.state.chart].boundary(rec.state.u);
        std::snprintf(buf, sizeof buf,
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", rec.state.t,
                      e.q[0], e.q[1], e.q[2], e.p[0], e.p[1], e.p[2], ke, b);
        out += buf;
    }
    return out;
}

}  // namespace surforbit
