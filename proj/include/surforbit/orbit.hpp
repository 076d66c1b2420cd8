// Periodic orbits as fixed points of the time-T map. A damped Newton
// iteration on the chart-coordinate defect P(x) - x (finite-difference
// Jacobian) runs from a deterministic multistart seed set inside the block;
// a weighted fixed-point iteration serves as fallback when Newton stalls.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "surforbit/hypotheses.hpp"
#include "surforbit/integrate.hpp"

namespace surforbit {

template <std::size_t N>
struct PoincareResult {
    ChartState<N> initial;
    ChartState<N> final_state;
    std::optional<Vec<2 * N>> defect;  // present iff the map reached t0 + T
    double min_b = 0.0;
    double max_kinetic_energy = 0.0;
    Termination reason = Termination::reached_t_end;
    TrajectorySegment<N> trajectory;
};

template <std::size_t N>
struct PeriodicOrbit {
    ChartState<N> fixed_point;
    double residual = 0.0;        // |P(x) - x| in chart units
    double clearance = 0.0;       // min over [0,T] of the boundary function b
    double energy_margin = 0.0;   // c - max |p|^2/2
    int newton_iterations = 0;
    int seed_index = -1;
    std::vector<std::string> iteration_log;  // one line per Newton/fallback step
    TrajectorySegment<N> trajectory;
};

template <std::size_t N>
struct SeedDiagnostic {
    int seed = 0;
    ChartState<N> start;
    std::string outcome;
    double best_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

template <std::size_t N>
struct OrbitSearchResult {
    std::vector<PeriodicOrbit<N>> orbits;  // best residual first
    std::vector<SeedDiagnostic<N>> seeds;
    bool hypotheses_passed = false;
    double ceiling_c = 0.0;
};

struct OrbitNotFound : Error {
    std::string diagnostics;
    bool hypotheses_passed = false;
    OrbitNotFound(const std::string& msg, std::string diag, bool hyp)
        : Error(msg), diagnostics(std::move(diag)), hypotheses_passed(hyp) {}
};

namespace detail {

template <std::size_t N>
inline Vec<2 * N> pack_state(const ChartState<N>& s) {
    Vec<2 * N> x;
    for (std::size_t i = 0; i < N; ++i) {
        x[i] = s.u[i];
        x[N + i] = s.du[i];
    }
    return x;
}

template <std::size_t N>
inline ChartState<N> unpack_state(const Vec<2 * N>& x, double t, std::size_t chart) {
    ChartState<N> s;
    s.t = t;
    s.chart = chart;
    for (std::size_t i = 0; i < N; ++i) {
        s.u[i] = x[i];
        s.du[i] = x[N + i];
    }
    return s;
}

}  // namespace detail

// Integrates one period and expresses the defect in the initial chart.
template <std::size_t N>
inline PoincareResult<N> poincare_map(const Scenario<N>& scenario, const ChartState<N>& state0,
                                      const IntegratorOptions& options = {}) {
    PoincareResult<N> result;
    result.initial = state0;
    IntegratorOptions opt = options;
    opt.boundary_event = true;
    result.trajectory = integrate(scenario, state0, state0.t + scenario.period(), opt);
    result.reason = result.trajectory.reason;
    result.final_state = result.trajectory.last();

    double min_b = std::numeric_limits<double>::infinity();
    double max_ke = 0.0;
    for (const auto& rec : result.trajectory.steps) {
        const Chart<N>& chart = scenario.surface.charts[rec.state.chart];
        min_b = std::min(min_b, chart.boundary(rec.state.u));
        max_ke = std::max(max_ke, kinetic_energy_chart(chart, rec.state.u, rec.state.du));
    }
    result.min_b = min_b;
    result.max_kinetic_energy = max_ke;

    if (result.reason != Termination::reached_t_end) return result;

    ChartState<N> final_in_chart = result.final_state;
    if (final_in_chart.chart != state0.chart) {
        auto e = embedded_state(scenario, final_in_chart);
        auto coords = express_in_chart(scenario.surface.charts[state0.chart], e.q, e.p, 1e-8);
        if (!coords) {
            // The end state is not covered by the seed chart, so the map is
            // undefined as a map on that chart's coordinates.
            result.reason = Termination::left_atlas;
            return result;
        }
        final_in_chart = ChartState<N>{final_in_chart.t, state0.chart, coords->u, coords->du};
        result.final_state = final_in_chart;
    }
    Vec<2 * N> defect;
    for (std::size_t i = 0; i < N; ++i) {
        defect[i] = final_in_chart.u[i] - state0.u[i];
        defect[N + i] = final_in_chart.du[i] - state0.du[i];
    }
    result.defect = defect;
    return result;
}

struct OrbitSearchOptions {
    int seed_count = 64;
    double residual_tol = 1e-8;
    int max_newton_iterations = 40;
    int max_damping_halvings = 8;
    double jacobian_step = 1e-6;
    int fallback_iterations = 128;
    double clearance_tol = 1e-7;   // orbits grazing closer than this are rejected
    double dedupe_tol = 1e-6;
    double seed_energy_fraction = 0.5;  // seeds have |p|^2/2 <= fraction * c
    bool override_hypotheses = false;
    IntegratorOptions integrator;
};

namespace detail {

// Periodic solution of the dynamics linearized at the chart origin, solved
// as a linear boundary value problem over one period: integrate a particular
// solution and the fundamental matrix with fixed-step RK4, then solve
// (I - Phi(T)) x = x_p(T). Near an equilibrium this lands close to the true
// orbit and makes an excellent shooting seed; it never leaves the surface
// because the linear system knows no boundary.
template <std::size_t N>
inline std::optional<ChartState<N>> linear_response_seed(const Scenario<N>& scenario) {
    const Chart<N>& chart = scenario.surface.charts.front();
    const Vec<N> origin{};
    if (!chart.valid(origin) || chart.boundary(origin) <= 0.0) return std::nullopt;

    constexpr std::size_t M = 2 * N;
    constexpr std::size_t W = M * (M + 1);  // particular solution + M columns
    const double T = scenario.period();
    const double eps = 1e-6;

    try {
        auto deriv = [&](double t, const std::array<double, W>& y, std::array<double, W>& out) {
            const Vec<N> a0 = chart_accel(scenario, chart, t, origin, origin);
            std::array<Vec<N>, M> jac_cols;
            for (std::size_t k = 0; k < M; ++k) {
                Vec<N> up{}, um{}, vp{}, vm{};
                if (k < N) {
                    up[k] = eps;
                    um[k] = -eps;
                } else {
                    vp[k - N] = eps;
                    vm[k - N] = -eps;
                }
                jac_cols[k] = (chart_accel(scenario, chart, t, up, vp) -
                               chart_accel(scenario, chart, t, um, vm)) /
                              (2.0 * eps);
            }
            auto apply = [&](const double* x, double* dx, bool forced) {
                for (std::size_t i = 0; i < N; ++i) dx[i] = x[N + i];
                for (std::size_t i = 0; i < N; ++i) {
                    double s = forced ? a0[i] : 0.0;
                    for (std::size_t k = 0; k < M; ++k) s += jac_cols[k][i] * x[k];
                    dx[N + i] = s;
                }
            };
            apply(y.data(), out.data(), true);
            for (std::size_t c = 0; c < M; ++c)
                apply(y.data() + M * (c + 1), out.data() + M * (c + 1), false);
        };

        std::array<double, W> y{};
        for (std::size_t k = 0; k < M; ++k) y[M + k * M + k] = 1.0;  // Phi(0) = I

        const int steps = 512;
        const double h = T / steps;
        std::array<double, W> k1, k2, k3, k4, tmp;
        for (int it = 0; it < steps; ++it) {
            const double t = T * it / steps;
            deriv(t, y, k1);
            for (std::size_t i = 0; i < W; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
            deriv(t + 0.5 * h, tmp, k2);
            for (std::size_t i = 0; i < W; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
            deriv(t + 0.5 * h, tmp, k3);
            for (std::size_t i = 0; i < W; ++i) tmp[i] = y[i] + h * k3[i];
            deriv(t + h, tmp, k4);
            for (std::size_t i = 0; i < W; ++i)
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        Mat<M, M> lhs;
        Vec<M> rhs;
        for (std::size_t i = 0; i < M; ++i) {
            rhs[i] = y[i];
            for (std::size_t j = 0; j < M; ++j)
                lhs(i, j) = (i == j ? 1.0 : 0.0) - y[M * (j + 1) + i];
        }
        auto x = solve_linear(lhs, rhs);
        if (!x) return std::nullopt;
        ChartState<N> seed = unpack_state<N>(*x, 0.0, 0);
        if (!chart.valid(seed.u) || chart.boundary(seed.u) <= 0.0) return std::nullopt;
        return seed;
    } catch (const Error&) {
        return std::nullopt;
    }
}

// Deterministic seed states in chart 0: the linearized periodic response and
// the rest state first, then a low-discrepancy set biased toward small
// speeds.
template <std::size_t N>
inline std::vector<ChartState<N>> orbit_seeds(const Scenario<N>& scenario, double ceiling_c,
                                              const OrbitSearchOptions& opt) {
    const Chart<N>& chart = scenario.surface.charts.front();
    std::vector<ChartState<N>> seeds;
    const double speed_max =
        std::isfinite(ceiling_c) ? std::sqrt(2.0 * opt.seed_energy_fraction * ceiling_c) : 1.0;

    if (auto warm = linear_response_seed(scenario)) seeds.push_back(*warm);

    ChartState<N> rest{0.0, 0, {}, {}};
    if (chart.valid(rest.u) && chart.boundary(rest.u) > 0.0) seeds.push_back(rest);

    unsigned long long index = 0;
    const double b_center = chart.boundary(Vec<N>{});
    while (static_cast<int>(seeds.size()) < opt.seed_count &&
           index < 1000ull * (opt.seed_count + 16)) {
        auto h = halton<4>(index++);
        Vec<N> u;
        for (std::size_t i = 0; i < N; ++i)
            u[i] = (2.0 * h[i] - 1.0) * chart.sample_halfwidth;
        if (!chart.valid(u) || chart.boundary(u) < 0.05 * b_center) continue;

        auto J = chart_jacobian(chart, u);
        auto basis = detail::tangent_basis<N>(J);
        const double speed = speed_max * h[3] * h[3];
        Vec3 p;
        if constexpr (N == 1) {
            p = (h[2] < 0.5 ? -speed : speed) * basis[0];
        } else {
            const double ang = 2.0 * 3.14159265358979323846 * h[2];
            p = speed * (std::cos(ang) * basis[0] + std::sin(ang) * basis[1]);
        }
        Mat<N, N> JtJ;
        Vec<N> rhs;
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = 0; j < N; ++j) JtJ(i, j) = dot(J[i], J[j]);
            rhs[i] = dot(J[i], p);
        }
        auto du = solve_linear(JtJ, rhs);
        if (!du) continue;
        seeds.push_back(ChartState<N>{0.0, 0, u, *du});
    }
    return seeds;
}

}  // namespace detail

// Multistart shooting. Throws OrbitNotFound when no seed converges to a
// verified orbit.
template <std::size_t N>
inline OrbitSearchResult<N> find_orbit(const Scenario<N>& scenario,
                                       const HypothesisReport& report,
                                       const OrbitSearchOptions& options = {}) {
    if (!report.pass && !options.override_hypotheses)
        throw OrbitNotFound("hypotheses failed for scenario '" + scenario.name +
                                "'; pass --force to search anyway",
                            to_text(report), false);

    OrbitSearchResult<N> result;
    result.hypotheses_passed = report.pass;
    double ceiling_c = report.ceiling_c;
    if (!(ceiling_c > 0.0)) ceiling_c = std::numeric_limits<double>::infinity();
    result.ceiling_c = ceiling_c;

    OrbitSearchOptions opt = options;
    opt.integrator.abs_tol = opt.integrator.rel_tol = scenario.solver_tol;
    opt.seed_count = scenario.seed_count;

    auto seeds = detail::orbit_seeds(scenario, ceiling_c, opt);

    auto evaluate = [&](const Vec<2 * N>& x) -> std::optional<PoincareResult<N>> {
        ChartState<N> s = detail::unpack_state<N>(x, 0.0, 0);
        if (!scenario.surface.charts[0].valid(s.u)) return std::nullopt;
        auto pr = poincare_map(scenario, s, opt.integrator);
        if (!pr.defect) return std::nullopt;
        return pr;
    };

    for (int si = 0; si < static_cast<int>(seeds.size()); ++si) {
        SeedDiagnostic<N> diag;
        diag.seed = si;
        diag.start = seeds[si];

        Vec<2 * N> x = detail::pack_state(seeds[si]);
        auto base = evaluate(x);
        if (!base) {
            diag.outcome = "trajectory left the block before one period";
            result.seeds.push_back(diag);
            continue;
        }
        double residual = norm(*base->defect);
        diag.best_residual = residual;
        std::vector<std::string> log;
        char logbuf[96];
        std::snprintf(logbuf, sizeof logbuf, "seed: residual %.3e", residual);
        log.push_back(logbuf);

        bool converged = residual < opt.residual_tol;
        int iters = 0;
        while (!converged && iters < opt.max_newton_iterations) {
            ++iters;
            // Finite-difference Jacobian of the defect, one column per
            // coordinate (2N extra integrations per iteration).
            Mat<2 * N, 2 * N> jac;
            bool jac_ok = true;
            for (std::size_t k = 0; k < 2 * N && jac_ok; ++k) {
                Vec<2 * N> xp = x;
                xp[k] += opt.jacobian_step;
                auto col = evaluate(xp);
                if (!col) {
                    jac_ok = false;
                    break;
                }
                for (std::size_t r = 0; r < 2 * N; ++r)
                    jac(r, k) = ((*col->defect)[r] - (*base->defect)[r]) / opt.jacobian_step;
            }
            std::optional<Vec<2 * N>> step;
            if (jac_ok) step = solve_linear(jac, -1.0 * (*base->defect));

            bool improved = false;
            if (step) {
                double alpha = 1.0;
                for (int halving = 0; halving <= opt.max_damping_halvings; ++halving) {
                    Vec<2 * N> xt = x + alpha * (*step);
                    auto trial = evaluate(xt);
                    if (trial && norm(*trial->defect) < residual) {
                        x = xt;
                        base = trial;
                        residual = norm(*trial->defect);
                        improved = true;
                        std::snprintf(logbuf, sizeof logbuf,
                                      "newton %d: residual %.3e (alpha %.3g)", iters, residual,
                                      alpha);
                        log.push_back(logbuf);
                        break;
                    }
                    alpha *= 0.5;
                }
            }
            if (!improved) {
                // Newton stalled: averaged fixed-point iteration, which
                // contracts for dissipative time-T maps.
                std::snprintf(logbuf, sizeof logbuf, "newton %d: stalled, averaging", iters);
                log.push_back(logbuf);
                bool fp_progress = false;
                int fp_done = 0;
                for (int fp = 0; fp < opt.fallback_iterations; ++fp) {
                    Vec<2 * N> xt = 0.5 * (x + detail::pack_state(base->final_state));
                    auto trial = evaluate(xt);
                    if (!trial) break;
                    x = xt;
                    base = trial;
                    double r = norm(*trial->defect);
                    if (r < residual) fp_progress = true;
                    residual = r;
                    fp_done = fp + 1;
                    if (residual < opt.residual_tol) break;
                }
                std::snprintf(logbuf, sizeof logbuf, "fixed-point x%d: residual %.3e", fp_done,
                              residual);
                log.push_back(logbuf);
                if (residual < opt.residual_tol) {
                    converged = true;
                    break;
                }
                if (!fp_progress) break;  // give up on this seed
            }
            diag.best_residual = std::min(diag.best_residual, residual);
            if (residual < opt.residual_tol) converged = true;
        }
        diag.iterations = iters;
        diag.best_residual = std::min(diag.best_residual, residual);

        if (!converged) {
            diag.outcome = "did not converge";
            result.seeds.push_back(diag);
            continue;
        }

        PeriodicOrbit<N> orbit;
        orbit.fixed_point = detail::unpack_state<N>(x, 0.0, 0);
        orbit.residual = residual;
        orbit.clearance = base->min_b;
        orbit.energy_margin = std::isfinite(ceiling_c)
                                  ? ceiling_c - base->max_kinetic_energy
                                  : std::numeric_limits<double>::infinity();
        orbit.newton_iterations = iters;
        orbit.seed_index = si;
        orbit.iteration_log = log;
        orbit.trajectory = base->trajectory;

        if (!(orbit.clearance > opt.clearance_tol)) {
            diag.outcome = "converged to a boundary-grazing orbit (rejected)";
            result.seeds.push_back(diag);
            continue;
        }
        if (!(orbit.energy_margin > 0.0)) {
            diag.outcome = "converged outside the energy ceiling (rejected)";
            result.seeds.push_back(diag);
            continue;
        }
        diag.outcome = "converged";
        result.seeds.push_back(diag);

        // Deduplicate against already-found orbits.
        bool merged = false;
        for (auto& existing : result.orbits) {
            double dist = norm_inf(detail::pack_state(existing.fixed_point) -
                                   detail::pack_state(orbit.fixed_point));
            if (dist < opt.dedupe_tol) {
                if (orbit.residual < existing.residual) existing = orbit;
                merged = true;
                break;
            }
        }
        if (!merged) result.orbits.push_back(orbit);
    }

    std::sort(result.orbits.begin(), result.orbits.end(),
              [](const PeriodicOrbit<N>& a, const PeriodicOrbit<N>& b) {
                  if (a.residual != b.residual) return a.residual < b.residual;
                  return detail::pack_state(a.fixed_point).v <
                         detail::pack_state(b.fixed_point).v;
              });

    if (result.orbits.empty()) {
        std::ostringstream diag;
        diag << "hypotheses " << (report.pass ? "passed" : "FAILED") << "; "
             << seeds.size() << " seeds tried:\n";
        for (const auto& s : result.seeds)
            diag << "  seed " << s.seed << ": " << s.outcome
                 << " (best residual " << s.best_residual << ", " << s.iterations
                 << " iterations)\n";
        throw OrbitNotFound("no periodic orbit found for scenario '" + scenario.name + "'",
                            diag.str(), report.pass);
    }
    return result;
}

struct VerificationRecord {
    bool pass = false;
    double residual_tight = 0.0;      // defect norm at 100x tighter tolerance
    double reproduction_error = 0.0;  // re-integration end-state difference
    double min_b = 0.0;
    double max_kinetic_energy = 0.0;
    std::optional<double> offending_time;
    std::string message;
};

// Re-integration at tightened tolerance plus containment and classifier
// checks along the stored trajectory.
template <std::size_t N>
inline VerificationRecord verify_orbit(const Scenario<N>& scenario,
                                       const PeriodicOrbit<N>& orbit, double ceiling_c,
                                       double base_tol,
                                       double periodicity_tol = 1e-6) {
    VerificationRecord rec;

    IntegratorOptions same;
    same.abs_tol = same.rel_tol = base_tol;
    auto same_run = poincare_map(scenario, orbit.fixed_point, same);
    if (same_run.reason != Termination::reached_t_end) {
        rec.message = "re-integration terminated early: " + std::string(to_string(same_run.reason));
        return rec;
    }
    rec.reproduction_error =
        norm_inf(detail::pack_state(same_run.final_state) -
                 detail::pack_state(orbit.trajectory.last()));
    if (rec.reproduction_error > 10.0 * base_tol) {
        rec.message = "stored trajectory is not reproducible";
        return rec;
    }

    IntegratorOptions tight;
    tight.abs_tol = tight.rel_tol = base_tol * 0.01;
    auto tight_run = poincare_map(scenario, orbit.fixed_point, tight);
    if (tight_run.reason != Termination::reached_t_end || !tight_run.defect) {
        rec.message = "tightened re-integration terminated early: " +
                      std::string(to_string(tight_run.reason));
        return rec;
    }
    rec.residual_tight = norm(*tight_run.defect);
    rec.min_b = tight_run.min_b;
    rec.max_kinetic_energy = tight_run.max_kinetic_energy;

    if (rec.residual_tight > periodicity_tol) {
        rec.message = "periodicity residual at tightened tolerance too large";
        return rec;
    }
    if (!(rec.min_b > 0.0)) {
        for (const auto& s : tight_run.trajectory.steps)
            if (scenario.surface.charts[s.state.chart].boundary(s.state.u) <= 0.0) {
                rec.offending_time = s.state.t;
                break;
            }
        rec.message = "orbit touches the boundary";
        return rec;
    }
    if (!(rec.max_kinetic_energy < ceiling_c)) {
        rec.message = "orbit escapes the kinetic energy ceiling";
        return rec;
    }
    // The exit classifier must see only interior states along the orbit.
    for (const auto& s : tight_run.trajectory.steps) {
        const Chart<N>& chart = scenario.surface.charts[s.state.chart];
        const double b = chart.boundary(s.state.u);
        const double ke = kinetic_energy_chart(chart, s.state.u, s.state.du);
        if (!(b > scenario.surface.boundary_tol) || !(ke < ceiling_c)) {
            rec.offending_time = s.state.t;
            rec.message = "exit classifier triggered along the orbit";
            return rec;
        }
    }
    rec.pass = true;
    rec.message = "verified";
    return rec;
}

// ---- serialization ----

template <std::size_t N>
inline nlohmann::ordered_json to_json(const Scenario<N>& scenario, const PeriodicOrbit<N>& o,
                                      const VerificationRecord* verification = nullptr,
                                      const std::string& trajectory_path = "") {
    auto e = embedded_state(scenario, o.fixed_point);
    nlohmann::ordered_json j{
        {"chart", scenario.surface.charts[o.fixed_point.chart].name},
        {"u", std::vector<double>(o.fixed_point.u.v.begin(), o.fixed_point.u.v.end())},
        {"du", std::vector<double>(o.fixed_point.du.v.begin(), o.fixed_point.du.v.end())},
        {"q", {e.q[0], e.q[1], e.q[2]}},
        {"p", {e.p[0], e.p[1], e.p[2]}},
        {"residual", o.residual},
        {"boundary_clearance", o.clearance},
        {"energy_margin", o.energy_margin},
        {"newton_iterations", o.newton_iterations},
        {"seed_index", o.seed_index},
        {"iteration_log", o.iteration_log},
        {"trajectory_steps", o.trajectory.steps.size()}};
    if (!trajectory_path.empty()) j["trajectory_csv"] = trajectory_path;
    if (verification) {
        j["verification"] = {{"pass", verification->pass},
                             {"residual_tight", verification->residual_tight},
                             {"min_b", verification->min_b},
                             {"max_kinetic_energy", verification->max_kinetic_energy},
                             {"message", verification->message}};
    }
    return j;
}

}  // namespace surforbit
