// Executable checks for the four existence conditions, plus the kinetic
// energy ceiling construction and the exit-set classifier for the block
//
//   W = { 0 <= t <= T, q in M, |p|^2/2 <= c }.
//
// The checks are falsification scans over deterministic sample grids: they
// verify declared bounds rather than prove them. Every sampled violation is
// recorded with its (t, q, p), up to a configurable cap.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "surforbit/dynamics.hpp"
#include "surforbit/integrate.hpp"
#include "surforbit/mesh.hpp"

namespace surforbit {

struct CheckSample {
    double t = 0.0;
    Vec3 q{};
    Vec3 p{};
    double value = 0.0;
};

struct SubReport {
    std::string name;
    bool pass = false;
    double statistic = 0.0;        // extremal sampled value (min gamma, max |F|, min mu, ...)
    double abs_max = 0.0;          // largest |value| seen over the grid
    double bound = 0.0;            // declared bound or tolerance it is compared against
    long total_samples = 0;
    long violations_total = 0;
    long indeterminate_total = 0;
    std::vector<CheckSample> violations;  // capped at violation_cap
    std::optional<CheckSample> worst;
    std::string note;
};

struct HypothesisReport {
    std::string scenario;
    int chi = 0;
    bool chi_nonzero = false;
    int boundary_loops = 0;
    double declared_threshold_speed = 0.0;  // d
    double declared_gamma_min = 0.0;
    double declared_f_max = 0.0;
    SubReport friction;
    SubReport force;
    SubReport tangency;
    SubReport shell;  // dissipation on the energy shell |p|^2/2 = c
    double ceiling_c = 0.0;
    double speed_cap = 0.0;  // sqrt(2c); condition-4 samples are capped here
    bool pass = false;
};

// Energy level at which dissipation beats the forcing:
//   c = (kappa * max(d, F_max / gamma_min))^2 / 2,  kappa = 1.1.
// On the shell |p| = kappa * max(d, F_max/gamma_min) we then have
// |p|^2 gamma >= |p|^2 gamma_min > |p| F_max >= (p, F).
inline double energy_ceiling(double threshold_speed, double gamma_min, double f_max,
                             double kappa = 1.1) {
    if (!(gamma_min > 0.0))
        throw ScenarioError("friction lower bound must be positive (hypothesis 2 fails)");
    if (!(threshold_speed >= 0.0) || !std::isfinite(f_max) || f_max < 0.0)
        throw ScenarioError("invalid declared bounds for the energy ceiling");
    const double v = kappa * std::max(threshold_speed, f_max / gamma_min);
    return 0.5 * v * v;
}

template <std::size_t N>
struct BlockSpec {
    double period = 1.0;
    double ceiling_c = 0.0;
    const Surface<N>* surface = nullptr;
    double tangency_tol = 1e-6;   // |(nu, p)| below tol*(1+|p|) counts as tangent
    double boundary_tol = 1e-8;
};

template <std::size_t N>
inline BlockSpec<N> make_block(const Scenario<N>& scenario) {
    BlockSpec<N> block;
    block.period = scenario.period();
    block.ceiling_c = energy_ceiling(scenario.friction.threshold_speed,
                                     scenario.friction.gamma_min, scenario.forcing.f_max);
    const double v = std::max(scenario.friction.threshold_speed,
                              scenario.forcing.f_max / scenario.friction.gamma_min);
    if (!(block.ceiling_c > 0.5 * v * v))
        throw ScenarioError("energy ceiling must exceed max(d, F_max/gamma_min)^2 / 2");
    block.surface = &scenario.surface;
    block.boundary_tol = scenario.surface.boundary_tol;
    return block;
}

enum class ExitClass { interior, essential_exit, entry, tangent };

inline const char* to_string(ExitClass c) {
    switch (c) {
        case ExitClass::interior: return "interior";
        case ExitClass::essential_exit: return "essential-exit";
        case ExitClass::entry: return "entry";
        case ExitClass::tangent: return "tangent";
    }
    return "?";
}

// Tangent states count as essential exits (condition 4 forces them out), so
// the essential exit set is { q in boundary, (nu, p) >= 0 }.
inline bool is_essential_exit(ExitClass c) {
    return c == ExitClass::essential_exit || c == ExitClass::tangent;
}

// Classifies a block point by the sign of (nu_q, p) at the boundary. Points
// on the energy shell with q interior are interior: the shell flows inward.
template <std::size_t N>
inline ExitClass classify_exit(const BlockSpec<N>& block, double t, const Vec3& q,
                               const Vec3& p) {
    if (t < -1e-12 || t > block.period + 1e-12)
        throw Error("classify_exit: time outside the block interval");
    const double ke = kinetic_energy(p);
    if (ke > block.ceiling_c * (1.0 + 1e-9))
        throw Error("classify_exit: kinetic energy above the block ceiling");

    const Surface<N>& surface = *block.surface;
    for (std::size_t c = 0; c < surface.charts.size(); ++c) {
        const Chart<N>& chart = surface.charts[c];
        auto u = invert_chart(chart, q);
        if (!u || norm(chart.embed(*u) - q) > 1e-8) continue;
        const double b = chart.boundary(*u);
        if (b < -block.boundary_tol)
            throw Error("classify_exit: point lies outside M");
        if (b > block.boundary_tol) return ExitClass::interior;
        auto frame = boundary_frame(surface, chart, *u);
        const double s = dot(*frame.nu, p);
        const double tol = block.tangency_tol * (1.0 + norm(p));
        if (s > tol) return ExitClass::essential_exit;
        if (s < -tol) return ExitClass::entry;
        return ExitClass::tangent;
    }
    throw AtlasError("classify_exit: no chart covers the point");
}

namespace detail {

inline void record_violation(SubReport& rep, const CheckSample& s, long cap) {
    ++rep.violations_total;
    if (static_cast<long>(rep.violations.size()) < cap) rep.violations.push_back(s);
}

// Orthonormal tangent basis from the chart partials (Gram-Schmidt).
template <std::size_t N>
inline std::array<Vec3, N> tangent_basis(const typename Chart<N>::Partials& J) {
    std::array<Vec3, N> e;
    e[0] = normalized(J[0]);
    if constexpr (N == 2) {
        Vec3 w = J[1] - dot(J[1], e[0]) * e[0];
        e[1] = normalized(w);
    }
    return e;
}

// Deterministic states on the energy shell |p|^2/2 = level.
template <std::size_t N>
inline std::vector<std::pair<double, std::pair<Vec<N>, Vec3>>> shell_states(
    const Scenario<N>& scenario, double level, long count) {
    const Chart<N>& chart = scenario.surface.charts.front();
    const double speed = std::sqrt(2.0 * level);
    std::vector<std::pair<double, std::pair<Vec<N>, Vec3>>> out;
    unsigned long long index = 0;
    while (static_cast<long>(out.size()) < count && index < 1000ull * (count + 16)) {
        auto h = halton<4>(index++);
        Vec<N> u;
        for (std::size_t i = 0; i < N; ++i)
            u[i] = (2.0 * h[i] - 1.0) * chart.sample_halfwidth;
        if (!chart.valid(u) || chart.boundary(u) < 0.0) continue;
        auto J = chart_jacobian(chart, u);
        auto basis = tangent_basis<N>(J);
        Vec3 p;
        if constexpr (N == 1) {
            p = (h[2] < 0.5 ? -speed : speed) * basis[0];
        } else {
            const double ang = 2.0 * 3.14159265358979323846 * h[2];
            p = speed * (std::cos(ang) * basis[0] + std::sin(ang) * basis[1]);
        }
        out.push_back({scenario.period() * h[3], {u, p}});
    }
    if (static_cast<long>(out.size()) < count)
        throw Error("shell sampling failed to reach the requested count");
    return out;
}

}  // namespace detail

struct CheckOptions {
    long violation_cap = 1000;
    double friction_slack = 1e-6;   // pass iff min gamma >= gamma_min * (1 - slack)
    double force_slack = 1e-6;      // pass iff max |F| <= F_max * (1 + slack)
    double tangency_margin = 1e-6;  // mu must strictly exceed this
    double probe_horizon_frac = 1e-3;  // behavioral probe length, fraction of T
    int probe_steps = 8;
    double exit_threshold = -1e-10;    // b below this counts as having left M
};

// Condition 2: sampled friction coefficient on |p| > d stays above gamma_min.
template <std::size_t N>
inline SubReport check_friction_bound(const Scenario<N>& scenario,
                                      const CheckOptions& opt = {}) {
    SubReport rep;
    rep.name = "friction bound";
    rep.bound = scenario.friction.gamma_min;
    const double T = scenario.period();
    const double d = scenario.friction.threshold_speed;
    double c;
    try {
        c = energy_ceiling(d, scenario.friction.gamma_min, scenario.forcing.f_max);
    } catch (const ScenarioError& e) {
        rep.pass = false;
        rep.note = e.what();
        return rep;
    }
    const double p_max = std::sqrt(2.0 * c);
    const auto& sampling = scenario.sampling;
    auto interior = sample_interior(scenario.surface, sampling.interior_samples);
    const Chart<N>& chart = scenario.surface.charts.front();

    double min_gamma = std::numeric_limits<double>::infinity();
    for (int it = 0; it < sampling.time_samples; ++it) {
        const double t = T * it / sampling.time_samples;
        for (std::size_t iq = 0; iq < interior.size(); ++iq) {
            auto J = chart_jacobian(chart, interior[iq]);
            auto basis = detail::tangent_basis<N>(J);
            const Vec3 q = chart.embed(interior[iq]);
            for (int is = 0; is < sampling.speed_samples; ++is) {
                // speeds strictly above d, up to the shell speed
                const double frac = (is + 1.0) / sampling.speed_samples;
                const double speed = d + frac * (p_max - d);
                auto dir = halton<2>(iq * sampling.speed_samples + is);
                Vec3 p;
                if constexpr (N == 1) {
                    p = (dir[0] < 0.5 ? -speed : speed) * basis[0];
                } else {
                    const double ang = 2.0 * 3.14159265358979323846 * dir[0];
                    p = speed * (std::cos(ang) * basis[0] + std::sin(ang) * basis[1]);
                }
                const double g = scenario.friction.gamma(t, q, p);
                ++rep.total_samples;
                rep.abs_max = std::max(rep.abs_max, std::abs(g));
                if (g < min_gamma) {
                    min_gamma = g;
                    rep.worst = CheckSample{t, q, p, g};
                }
                if (g < scenario.friction.gamma_min * (1.0 - opt.friction_slack))
                    detail::record_violation(rep, {t, q, p, g}, opt.violation_cap);
            }
        }
    }
    rep.statistic = min_gamma;
    rep.pass = rep.violations_total == 0;
    return rep;
}

// Condition 3: sampled |F_total| stays below the declared F_max.
template <std::size_t N>
inline SubReport check_force_bound(const Scenario<N>& scenario, const CheckOptions& opt = {}) {
    SubReport rep;
    rep.name = "force bound";
    rep.bound = scenario.forcing.f_max;
    const double T = scenario.period();
    const auto& sampling = scenario.sampling;
    auto interior = sample_interior(scenario.surface, sampling.interior_samples);
    const Chart<N>& chart = scenario.surface.charts.front();

    double max_f = 0.0;
    for (int it = 0; it < sampling.time_samples; ++it) {
        const double t = T * it / sampling.time_samples;
        for (std::size_t iq = 0; iq < interior.size(); ++iq) {
            const Vec3 q = chart.embed(interior[iq]);
            const Vec3 p{};  // force laws here do not depend on p
            const double f = norm(total_force(scenario, t, q, p));
            ++rep.total_samples;
            rep.abs_max = std::max(rep.abs_max, f);
            if (f > max_f) {
                max_f = f;
                rep.worst = CheckSample{t, q, p, f};
            }
            if (f > scenario.forcing.f_max * (1.0 + opt.force_slack))
                detail::record_violation(rep, {t, q, p, f}, opt.violation_cap);
        }
    }
    rep.statistic = max_f;
    rep.pass = rep.violations_total == 0;
    return rep;
}

// Condition 4: every solution starting tangent to the boundary leaves M.
//
// For each sampled (t0, q0, p0) with q0 on the boundary and p0 tangent to it,
// the outward force margin
//
//   mu = (nu_q, F_total(t0,q0,p0) - gamma * p0)
//
// must strictly exceed the margin tolerance: mu is the outward acceleration
// the forces impose on top of the purely geometric motion, and it is what
// drives the b < 0 crossing for tangent starts. Each sample is additionally
// confirmed behaviorally: a short integration must take b negative.
template <std::size_t N>
inline SubReport check_external_tangency(const Scenario<N>& scenario, double ceiling_c,
                                         const CheckOptions& opt = {}) {
    SubReport rep;
    rep.name = "external tangency";
    rep.bound = opt.tangency_margin;
    const double T = scenario.period();
    const auto& sampling = scenario.sampling;
    const double p_max = std::sqrt(2.0 * ceiling_c);

    auto boundary = sample_boundary(scenario.surface, sampling.boundary_samples);
    if (boundary.empty()) {
        rep.note = "surface has no boundary loops registered";
        rep.pass = false;
        return rep;
    }

    // Tangent speeds: symmetric about zero (both directions along the
    // boundary), always including the zero-velocity state. One-dimensional
    // configuration spaces have a zero-dimensional boundary, so only p0 = 0.
    std::vector<double> speeds;
    if constexpr (N == 1) {
        speeds.push_back(0.0);
    } else {
        const int ns = std::max(1, sampling.speed_samples | 1);  // odd => includes 0
        for (int k = 0; k < ns; ++k)
            speeds.push_back(p_max * (2.0 * k / (ns - 1.0) - 1.0));
        if (ns == 1) speeds = {0.0};
    }

    double min_mu = std::numeric_limits<double>::infinity();
    const double horizon = opt.probe_horizon_frac * T;

    for (int it = 0; it < sampling.time_samples; ++it) {
        const double t0 = T * it / sampling.time_samples;
        for (const auto& bs : boundary) {
            const Chart<N>& chart = scenario.surface.charts[bs.chart];
            auto frame = boundary_frame(scenario.surface, chart, bs.u);

            // Boundary tangent direction (embedded) via the loop closure.
            Vec3 tau{};
            if constexpr (N == 2) {
                const double dth = 1e-6;
                const auto& loop = chart.boundary_loops[bs.loop_index];
                Vec<N> up = loop(bs.loop_angle + dth), um = loop(bs.loop_angle - dth);
                auto J = chart_jacobian(chart, bs.u);
                Vec<N> du_dth = (up - um) / (2.0 * dth);
                for (std::size_t i = 0; i < N; ++i) tau += du_dth[i] * J[i];
                tau = normalized(tau);
            }

            for (double speed : speeds) {
                const Vec3 p0 = speed * tau;
                const double gam = scenario.friction.gamma(t0, frame.q, p0);
                const double mu =
                    dot(*frame.nu, total_force(scenario, t0, frame.q, p0) - gam * p0);
                ++rep.total_samples;
                rep.abs_max = std::max(rep.abs_max, std::abs(mu));
                if (mu < min_mu) {
                    min_mu = mu;
                    rep.worst = CheckSample{t0, frame.q, p0, mu};
                }
                bool sample_ok = mu > opt.tangency_margin;
                if (std::abs(mu - opt.tangency_margin) <= 1e-12 * (1.0 + opt.tangency_margin)) {
                    ++rep.indeterminate_total;  // exactly at tolerance: fail-safe
                    sample_ok = false;
                }

                if (sample_ok) {
                    // Behavioral confirmation: b must go negative shortly.
                    ChartState<N> probe{t0, bs.chart, bs.u, {}};
                    if constexpr (N == 2) {
                        auto coords =
                            express_in_chart(chart, frame.q, p0, 1e-6, std::optional(bs.u));
                        if (coords) probe.du = coords->du;
                    }
                    // shorten the horizon for fast samples so the probe stays
                    // within the chart's extension margin
                    double tau = horizon;
                    const double u_speed = norm(probe.du);
                    if (u_speed * tau > 0.4 * chart.extension_margin)
                        tau = 0.4 * chart.extension_margin / u_speed;
                    auto seg = integrate_fixed(scenario, probe, t0 + tau, opt.probe_steps);
                    double min_b = std::numeric_limits<double>::infinity();
                    for (std::size_t k = 1; k < seg.steps.size(); ++k)
                        min_b = std::min(min_b, chart.boundary(seg.steps[k].state.u));
                    if (!(min_b < opt.exit_threshold)) sample_ok = false;
                }
                if (!sample_ok)
                    detail::record_violation(rep, {t0, frame.q, p0, mu}, opt.violation_cap);
            }
        }
    }
    rep.statistic = min_mu;
    rep.pass = rep.violations_total == 0 && rep.indeterminate_total == 0;
    if (rep.indeterminate_total > 0)
        rep.note = "samples at the margin tolerance recorded as indeterminate";
    return rep;
}

// Assertable form of the dissipation lemma: on the shell |p|^2/2 = c the
// kinetic energy decreases along the flow.
template <std::size_t N>
inline SubReport check_shell_dissipation(const Scenario<N>& scenario, double ceiling_c,
                                         const CheckOptions& opt = {}) {
    SubReport rep;
    rep.name = "shell dissipation";
    rep.bound = 0.0;
    const Chart<N>& chart = scenario.surface.charts.front();
    auto states = detail::shell_states(scenario, ceiling_c, scenario.sampling.shell_samples);
    double max_rate = -std::numeric_limits<double>::infinity();
    for (const auto& [t, up] : states) {
        const Vec3 q = chart.embed(up.first);
        const double rate = kinetic_energy_rate(scenario, t, q, up.second);
        ++rep.total_samples;
        rep.abs_max = std::max(rep.abs_max, std::abs(rate));
        if (rate > max_rate) {
            max_rate = rate;
            rep.worst = CheckSample{t, q, up.second, rate};
        }
        if (!(rate < 0.0))
            detail::record_violation(rep, {t, q, up.second, rate}, opt.violation_cap);
    }
    rep.statistic = max_rate;
    rep.pass = rep.violations_total == 0;
    return rep;
}

// Runs all four conditions plus the ceiling construction.
template <std::size_t N>
inline HypothesisReport check_all(const Scenario<N>& scenario, const CheckOptions& opt = {}) {
    HypothesisReport report;
    report.scenario = scenario.name;
    report.declared_threshold_speed = scenario.friction.threshold_speed;
    report.declared_gamma_min = scenario.friction.gamma_min;
    report.declared_f_max = scenario.forcing.f_max;

    if (scenario.surface.mesh.empty()) {
        report.chi = 0;
        report.chi_nonzero = false;
    } else {
        report.chi = euler_characteristic(scenario.surface.mesh);
        report.boundary_loops = boundary_loop_count(scenario.surface.mesh);
        report.chi_nonzero = report.chi != 0;
    }

    report.friction = check_friction_bound(scenario, opt);
    report.force = check_force_bound(scenario, opt);

    bool ceiling_ok = true;
    try {
        report.ceiling_c = energy_ceiling(scenario.friction.threshold_speed,
                                          scenario.friction.gamma_min, scenario.forcing.f_max);
        report.speed_cap = std::sqrt(2.0 * report.ceiling_c);
    } catch (const ScenarioError& e) {
        ceiling_ok = false;
        report.tangency.name = "external tangency";
        report.tangency.note = std::string("skipped: ") + e.what();
        report.shell.name = "shell dissipation";
        report.shell.note = report.tangency.note;
    }
    if (ceiling_ok) {
        report.tangency = check_external_tangency(scenario, report.ceiling_c, opt);
        report.shell = check_shell_dissipation(scenario, report.ceiling_c, opt);
    }

    report.pass = report.chi_nonzero && ceiling_ok && report.friction.pass &&
                  report.force.pass && report.tangency.pass && report.shell.pass;
    return report;
}

// Behavioral agreement between the exit classifier and the flow: outside a
// declared near-tangency band, essential-exit states must leave M within a
// short horizon and entry states must stay. The band accounts for states
// whose tiny normal velocity is overpowered by the outward force within the
// horizon; it is reported, not hidden.
struct AgreementReport {
    long total = 0;
    long excluded_in_band = 0;
    long disagreements = 0;
    double band = 0.0;     // |(nu, p)| below this is excluded from the equivalence
    double horizon = 0.0;
    std::vector<CheckSample> failures;
};

template <std::size_t N>
inline AgreementReport check_classifier_agreement(const Scenario<N>& scenario,
                                                  const BlockSpec<N>& block, long samples,
                                                  const CheckOptions& opt = {}) {
    AgreementReport rep;
    rep.horizon = opt.probe_horizon_frac * scenario.period();
    rep.band = 2.0 * scenario.forcing.f_max * rep.horizon;

    const long per_point = 8;
    const long n_points = std::max<long>(1, samples / per_point);
    auto boundary = sample_boundary(scenario.surface, n_points);
    const double v_norm_max = std::min(std::sqrt(2.0 * block.ceiling_c), 5.0);
    const double v_tan_max = std::min(std::sqrt(2.0 * block.ceiling_c) / 4.0, 5.0);

    long draw = 0;
    for (const auto& bs : boundary) {
        const Chart<N>& chart = scenario.surface.charts[bs.chart];
        auto frame = boundary_frame(scenario.surface, chart, bs.u);
        for (long k = 0; k < per_point && rep.total < samples; ++k) {
            auto h = halton<3>(draw++);
            const double s_nu = (2.0 * h[0] - 1.0) * v_norm_max;
            Vec3 p = s_nu * (*frame.nu);
            if constexpr (N == 2) {
                // add a component along the boundary tangent
                Vec3 tangent = cross(frame.n, *frame.nu);
                p += (2.0 * h[1] - 1.0) * v_tan_max * tangent;
            }
            ++rep.total;
            if (std::abs(s_nu) <= rep.band) {
                ++rep.excluded_in_band;
                continue;
            }
            ExitClass cls = classify_exit(block, 0.0, frame.q, p);

            ChartState<N> probe{0.0, bs.chart, bs.u, {}};
            auto coords = express_in_chart(chart, frame.q, p, 1e-6, std::optional(bs.u));
            if (!coords) continue;
            probe.du = coords->du;
            auto seg = integrate_fixed(scenario, probe, rep.horizon, opt.probe_steps);
            double min_b = std::numeric_limits<double>::infinity();
            for (std::size_t i = 1; i < seg.steps.size(); ++i)
                min_b = std::min(min_b, chart.boundary(seg.steps[i].state.u));
            const bool exited = min_b < opt.exit_threshold;

            if (is_essential_exit(cls) != exited) {
                ++rep.disagreements;
                if (rep.failures.size() < 64)
                    rep.failures.push_back({0.0, frame.q, p, min_b});
            }
        }
    }
    return rep;
}

// ---- serialization ----

inline nlohmann::ordered_json to_json(const CheckSample& s) {
    return {{"t", s.t},
            {"q", {s.q[0], s.q[1], s.q[2]}},
            {"p", {s.p[0], s.p[1], s.p[2]}},
            {"value", s.value}};
}

inline nlohmann::ordered_json to_json(const SubReport& r) {
    nlohmann::ordered_json j{{"name", r.name},
                             {"pass", r.pass},
                             {"statistic", r.statistic},
                             {"abs_max", r.abs_max},
                             {"bound", r.bound},
                             {"total_samples", r.total_samples},
                             {"violations_total", r.violations_total},
                             {"indeterminate_total", r.indeterminate_total}};
    if (r.worst) j["worst_sample"] = to_json(*r.worst);
    if (!r.note.empty()) j["note"] = r.note;
    nlohmann::ordered_json v = nlohmann::ordered_json::array();
    for (const auto& s : r.violations) v.push_back(to_json(s));
    j["violations_recorded"] = v;
    return j;
}

inline nlohmann::ordered_json to_json(const HypothesisReport& r) {
    return {{"scenario", r.scenario},
            {"verdict", r.pass ? "pass" : "fail"},
            {"euler_characteristic", r.chi},
            {"chi_nonzero", r.chi_nonzero},
            {"boundary_loops", r.boundary_loops},
            {"declared",
             {{"threshold_speed_d", r.declared_threshold_speed},
              {"gamma_min", r.declared_gamma_min},
              {"f_max", r.declared_f_max}}},
            {"ceiling_c", r.ceiling_c},
            {"speed_cap", r.speed_cap},
            {"friction", to_json(r.friction)},
            {"force", to_json(r.force)},
            {"tangency", to_json(r.tangency)},
            {"shell", to_json(r.shell)}};
}

inline std::string to_text(const HypothesisReport& r) {
    std::ostringstream os;
    auto line = [&](const SubReport& s, const std::string& extra) {
        os << "  [" << (s.pass ? "PASS" : "FAIL") << "] " << s.name << ": " << extra;
        if (s.violations_total > 0) os << "  (" << s.violations_total << " violations)";
        if (!s.note.empty()) os << "  -- " << s.note;
        os << "\n";
    };
    os << "hypothesis report for scenario '" << r.scenario << "'\n";
    os << "  [" << (r.chi_nonzero ? "PASS" : "FAIL")
       << "] Euler-Poincare characteristic: chi = " << r.chi
       << " (boundary loops: " << r.boundary_loops << ")\n";
    {
        std::ostringstream d;
        d << "min gamma = " << r.friction.statistic << " vs declared " << r.friction.bound;
        line(r.friction, d.str());
    }
    {
        std::ostringstream d;
        d << "max |F| = " << r.force.statistic << " vs declared " << r.force.bound;
        line(r.force, d.str());
    }
    {
        std::ostringstream d;
        d << "min outward margin mu = " << r.tangency.statistic << " vs tolerance "
          << r.tangency.bound;
        line(r.tangency, d.str());
    }
    {
        std::ostringstream d;
        d << "max dE/dt on the shell = " << r.shell.statistic << " (must be < 0)";
        line(r.shell, d.str());
    }
    os << "  energy ceiling c = " << r.ceiling_c << " (speed cap " << r.speed_cap << ")\n";
    os << "  verdict: " << (r.pass ? "PASS" : "FAIL") << "\n";
    return os.str();
}

}  // namespace surforbit
