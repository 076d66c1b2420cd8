#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "surforbit/integrate.hpp"
#include "surforbit/scenarios.hpp"

using namespace surforbit;

namespace {

Scenario<2> hemisphere(std::vector<std::pair<std::string, std::string>> overrides = {}) {
    return std::get<Scenario<2>>(builtin_scenario("hemisphere_pendulum", std::move(overrides)));
}

}  // namespace

TEST_CASE("free motion on a flat chart is a straight line") {
    auto sc = std::get<Scenario<2>>(builtin_scenario("flat_disk"));
    sc.friction.gamma = [](double, const Vec3&, const Vec3&) { return 0.0; };
    ChartState<2> s{0.0, 0, Vec2{{-0.5, 0.0}}, Vec2{{0.25, 0.1}}};
    auto seg = integrate_fixed(sc, s, 2.0, 100);
    auto end = seg.last();
    CHECK(std::abs(end.u[0] - (-0.5 + 0.25 * 2.0)) < 1e-13);
    CHECK(std::abs(end.u[1] - 0.2) < 1e-13);
    CHECK(std::abs(end.du[0] - 0.25) < 1e-14);
}

TEST_CASE("one-step error estimate scales like the fifth power of h") {
    auto sc = hemisphere();
    ChartState<2> s{0.0, 0, Vec2{{0.3, 0.1}}, Vec2{{0.2, -0.3}}};
    IntegratorOptions opt;
    auto big = rk_step(sc, s, 0.1, opt);
    auto small = rk_step(sc, s, 0.05, opt);
    REQUIRE(big);
    REQUIRE(small);
    double ratio = small->error_estimate / big->error_estimate;
    CHECK(ratio < std::pow(2.0, -5.0) * 1.5);
    CHECK(ratio > std::pow(2.0, -5.0) / 1.5);
}

TEST_CASE("frictionless unforced flow is time-reversible") {
    auto sc = hemisphere({{"forcing.ax", "0"}, {"forcing.ay", "0"}});
    sc.friction.gamma = [](double, const Vec3&, const Vec3&) { return 0.0; };
    ChartState<2> s{0.0, 0, Vec2{{0.4, -0.2}}, Vec2{{0.3, 0.1}}};
    IntegratorOptions opt;
    auto fwd = rk_step(sc, s, 0.02, opt);
    REQUIRE(fwd);
    ChartState<2> flipped = fwd->state;
    flipped.du = -1.0 * flipped.du;
    flipped.t = 0.0;  // autonomous
    auto back = rk_step(sc, flipped, 0.02, opt);
    REQUIRE(back);
    CHECK(norm(back->state.u - s.u) < 1e-9);
    CHECK(norm(back->state.du + s.du) < 1e-9);
}

TEST_CASE("equilibrium stays put over a full period") {
    auto sc = hemisphere({{"forcing.ax", "0"}, {"forcing.ay", "0"}});
    ChartState<2> apex{0.0, 0, {}, {}};
    IntegratorOptions opt;
    opt.boundary_event = true;
    auto seg = integrate(sc, apex, sc.period(), opt);
    CHECK(seg.reason == Termination::reached_t_end);
    CHECK(norm(seg.last().u) < 1e-10);
    CHECK(norm(seg.last().du) < 1e-10);
}

TEST_CASE("boundary crossing event is localized") {
    auto sc = hemisphere();
    ChartState<2> s{0.0, 0, Vec2{{1.45, 0.0}}, Vec2{{2.0, 0.0}}};
    IntegratorOptions opt;
    opt.boundary_event = true;
    auto seg = integrate(sc, s, 5.0, opt);
    REQUIRE(seg.reason == Termination::exited_m);
    const auto& chart = sc.surface.charts[0];
    double b_final = chart.boundary(seg.last().u);
    CHECK(b_final <= 0.0);
    CHECK(std::abs(b_final) < 1e-8);
    REQUIRE(seg.steps.size() >= 2);
    double b_prev = chart.boundary(seg.steps[seg.steps.size() - 2].state.u);
    CHECK(b_prev > 0.0);
}

TEST_CASE("energy ceiling event") {
    auto sc = hemisphere();
    IntegratorOptions opt;
    opt.energy_ceiling = 0.05;
    // starts at the apex nearly at rest; the forcing pumps energy in
    ChartState<2> s{0.0, 0, Vec2{{0, 0}}, Vec2{{0.05, 0.0}}};
    auto seg = integrate(sc, s, 3.0, opt);
    REQUIRE(seg.reason == Termination::energy_ceiling);
    const auto& chart = sc.surface.charts[0];
    double ke = kinetic_energy_chart(chart, seg.last().u, seg.last().du);
    CHECK(std::abs(ke - 0.05) < 1e-8);
}

TEST_CASE("zero-length integration returns the initial state") {
    auto sc = hemisphere();
    ChartState<2> s{0.0, 0, Vec2{{0.1, 0.1}}, Vec2{{0, 0}}};
    auto seg = integrate(sc, s, 0.0, IntegratorOptions{});
    CHECK(seg.reason == Termination::reached_t_end);
    CHECK(seg.steps.size() == 1);
}

TEST_CASE("dissipative decay on the unforced surface") {
    auto sc = hemisphere({{"forcing.ax", "0"}, {"forcing.ay", "0"}, {"gravity", "0"}});
    ChartState<2> s{0.0, 0, Vec2{{0.5, 0.2}}, Vec2{{0.4, -0.3}}};
    IntegratorOptions opt;
    auto seg = integrate(sc, s, 2.0, opt);
    const auto& chart = sc.surface.charts[0];
    double e0 = kinetic_energy_chart(chart, s.u, s.du);
    double e1 = kinetic_energy_chart(chart, seg.last().u, seg.last().du);
    CHECK(e1 < e0);
}

TEST_CASE("composition of integrations") {
    // Well-conditioned comparison needs a contracting flow; heavy damping
    // kills the inverted-pendulum saddle amplification.
    auto damped = hemisphere({{"friction.gamma", "100"}, {"friction.gamma_min", "100"}});
    ChartState<2> s{0.0, 0, Vec2{{0.05, 0.02}}, Vec2{{0.1, -0.05}}};
    IntegratorOptions opt;
    opt.abs_tol = opt.rel_tol = 1e-9;
    auto whole = integrate(damped, s, 2.0, opt);
    auto first = integrate(damped, s, 1.0, opt);
    auto second = integrate(damped, first.last(), 2.0, opt);
    double diff = std::max(norm_inf(whole.last().u - second.last().u),
                           norm_inf(whole.last().du - second.last().du));
    CHECK(diff < 5.0 * opt.abs_tol);

    // At the default friction the comparison inherits the saddle
    // amplification e^(2 lambda T) ~ 5e2; keep a regression bound.
    auto sc = hemisphere();
    ChartState<2> s2{0.0, 0, Vec2{{1.1e-3, 0.0}}, Vec2{{0.0637, 0.0}}};
    auto w2 = integrate(sc, s2, 2.0, opt);
    auto f2 = integrate(sc, s2, 1.0, opt);
    auto s2b = integrate(sc, f2.last(), 2.0, opt);
    double diff2 = std::max(norm_inf(w2.last().u - s2b.last().u),
                            norm_inf(w2.last().du - s2b.last().du));
    CHECK(diff2 < 1000.0 * opt.abs_tol);
}

TEST_CASE("global convergence order of the fixed-step scheme") {
    auto sc = hemisphere();
    ChartState<2> s{0.0, 0, Vec2{{0.02, 0.01}}, Vec2{{-0.01, 0.02}}};
    auto ref = integrate_fixed(sc, s, 1.0, 4096).last();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (long steps : {16L, 32L, 64L, 128L}) {
        auto run = integrate_fixed(sc, s, 1.0, steps).last();
        double err = std::max(norm_inf(run.u - ref.u), norm_inf(run.du - ref.du));
        double lx = std::log10(1.0 / steps), ly = std::log10(err);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly; ++n;
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope > 4.5);
    CHECK(slope < 5.5);
}

TEST_CASE("adaptive error estimates stay within tolerance") {
    auto sc = hemisphere();
    ChartState<2> s{0.0, 0, Vec2{{0.02, 0.01}}, Vec2{{0.05, 0.0}}};
    IntegratorOptions opt;
    opt.abs_tol = opt.rel_tol = 1e-9;
    auto seg = integrate(sc, s, 1.0, opt);
    REQUIRE(seg.steps.size() > 2);
    for (std::size_t i = 1; i < seg.steps.size(); ++i) {
        CHECK(seg.steps[i].state.t > seg.steps[i - 1].state.t);  // strictly increasing
        // absolute estimate bounded by the mixed tolerance scale
        CHECK(seg.steps[i].error_estimate < 4.0 * opt.abs_tol);
    }
}

TEST_CASE("tangency is preserved along trajectories") {
    auto sc = hemisphere();
    ChartState<2> s{0.0, 0, Vec2{{0.02, 0.01}}, Vec2{{0.05, 0.0}}};
    auto seg = integrate(sc, s, 1.0, IntegratorOptions{});
    for (const auto& rec : seg.steps) {
        auto e = embedded_state(sc, rec.state);
        auto n = chart_normal(sc.surface.charts[rec.state.chart], rec.state.u);
        CHECK(std::abs(dot(e.p, n)) < 1e-8 * (1.0 + norm(e.p)));
    }
}

TEST_CASE("chart switching") {
    auto sc = hemisphere();

    // comfortable point: identity
    ChartState<2> inside{0.0, 0, Vec2{{0.3, 0.2}}, Vec2{{0.1, 0.0}}};
    auto same = switch_chart(sc.surface, sc, inside);
    CHECK(same.chart == 0);
    CHECK(same.u == inside.u);

    // a point outside the stereographic chart's comfort zone hops to the
    // polar chart with the embedded state preserved
    ChartState<2> far{0.0, 1, Vec2{{1.3, 0.0}}, Vec2{{0.2, 0.1}}};
    REQUIRE(sc.surface.charts[1].valid(far.u));
    REQUIRE_FALSE(sc.surface.charts[1].comfort(far.u));
    auto e0 = embedded_state(sc, far);
    auto moved = switch_chart(sc.surface, sc, far);
    CHECK(moved.chart == 0);
    auto e1 = embedded_state(sc, moved);
    CHECK(norm(e1.q - e0.q) < 1e-10);
    CHECK(norm(e1.p - e0.p) < 1e-10);
}

TEST_CASE("chart transition velocities follow the transition Jacobian") {
    auto sc = hemisphere();
    const auto& polar = sc.surface.charts[0];
    const auto& stereo = sc.surface.charts[1];

    // transition map u (polar) -> v (stereo), differentiated numerically
    auto transition = [&](const Vec2& u) {
        auto v = invert_chart(stereo, polar.embed(u));
        REQUIRE(v);
        return *v;
    };
    Vec2 u0{{1.1, 0.4}};
    Vec2 du{{0.37, -0.21}};
    const double h = 1e-6;
    Mat<2, 2> J;
    for (std::size_t j = 0; j < 2; ++j) {
        Vec2 up = u0, um = u0;
        up[j] += h;
        um[j] -= h;
        Vec2 vp = transition(up), vm = transition(um);
        for (std::size_t i = 0; i < 2; ++i) J(i, j) = (vp[i] - vm[i]) / (2.0 * h);
    }
    Vec2 dv_fd = J * du;

    ChartState<2> s{0.0, 0, u0, du};
    auto e = embedded_state(sc, s);
    auto coords = express_in_chart(stereo, e.q, e.p);
    REQUIRE(coords);
    CHECK(norm(coords->du - dv_fd) < 1e-6 * (1.0 + norm(dv_fd)));
}

TEST_CASE("integration is deterministic") {
    auto sc = hemisphere();
    ChartState<2> s{0.0, 0, Vec2{{0.015, -0.01}}, Vec2{{0.04, 0.02}}};
    IntegratorOptions opt;
    opt.boundary_event = true;
    auto a = integrate(sc, s, 1.0, opt);
    auto b = integrate(sc, s, 1.0, opt);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].state.u == b.steps[i].state.u);    // bitwise
        CHECK(a.steps[i].state.du == b.steps[i].state.du);  // bitwise
        CHECK(a.steps[i].state.t == b.steps[i].state.t);
    }
}

TEST_CASE("trajectory CSV export") {
    auto sc = hemisphere();
    ChartState<2> s{0.0, 0, Vec2{{0.01, 0.0}}, Vec2{{0.0, 0.0}}};
    auto seg = integrate(sc, s, 0.25, IntegratorOptions{});
    std::string csv = trajectory_csv(sc, seg);
    std::istringstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,qx,qy,qz,px,py,pz,kinetic_energy,b");
    long rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == static_cast<long>(seg.steps.size()));
}

TEST_CASE("mid-run chart switching matches a single-chart integration") {
    // A state below the equator expressed in the stereographic chart drifts
    // out of that chart's comfort zone; the integrator hops to the polar
    // chart mid-run. The embedded end state must match a run done entirely
    // in the polar chart.
    auto sc = hemisphere();
    ChartState<2> in_stereo{0.0, 1, Vec2{{1.1, 0.0}}, Vec2{{1.5, 0.3}}};
    auto e0 = embedded_state(sc, in_stereo);
    auto coords = express_in_chart(sc.surface.charts[0], e0.q, e0.p);
    REQUIRE(coords);
    ChartState<2> in_polar{0.0, 0, coords->u, coords->du};

    IntegratorOptions opt;
    auto a = integrate(sc, in_stereo, 0.4, opt);
    auto b = integrate(sc, in_polar, 0.4, opt);
    CHECK(a.steps.front().state.chart == 1);
    CHECK(a.last().chart == 0);  // switched
    CHECK(a.reason == b.reason);
    auto ea = embedded_state(sc, a.last());
    auto eb = embedded_state(sc, b.last());
    CHECK(norm(ea.q - eb.q) < 1e-8);
    CHECK(norm(ea.p - eb.p) < 1e-7);
}

TEST_CASE("unresolvable stiffness raises a diagnostic error") {
    auto sc = std::get<Scenario<2>>(builtin_scenario("flat_disk"));
    // oscillation violent enough that the error estimate exceeds the
    // tolerance at every representable step size
    sc.forcing.force = [](double t, const Vec3&, const Vec3&) {
        return Vec3{{1e8 * std::sin(1e16 * t), 0.0, 0.0}};
    };
    ChartState<2> s{0.0, 0, Vec2{{0.1, 0.0}}, Vec2{{0.0, 0.0}}};
    using Catch::Matchers::ContainsSubstring;
    CHECK_THROWS_MATCHES(integrate(sc, s, 1.0, IntegratorOptions{}), NumericalError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("underflow")));
}

TEST_CASE("switch_chart reports an exhausted atlas") {
    auto sc = std::get<Scenario<2>>(builtin_scenario("figure1_surface"));
    REQUIRE(sc.surface.charts.size() == 1);
    // a coordinate the lone chart does not cover
    ChartState<2> outside{0.0, 0, Vec2{{2.9, 0.0}}, Vec2{{0, 0}}};
    REQUIRE_FALSE(sc.surface.charts[0].valid(outside.u));
    CHECK_THROWS_AS(switch_chart(sc.surface, sc, outside), AtlasError);
}

TEST_CASE("half-circle scenario integrates in one dimension") {
    auto sc1 = std::get<Scenario<1>>(builtin_scenario("half_circle_pendulum"));
    ChartState<1> s{0.0, 0, Vec1{{0.3}}, Vec1{{0.0}}};
    IntegratorOptions opt;
    opt.boundary_event = true;
    auto seg = integrate(sc1, s, 5.0, opt);
    // the pendulum started 0.3 rad off the apex falls and exits
    CHECK(seg.reason == Termination::exited_m);
    CHECK(std::abs(sc1.surface.charts[0].boundary(seg.last().u)) < 1e-8);
}
