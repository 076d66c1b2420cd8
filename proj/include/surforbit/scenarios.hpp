// Built-in scenario library and the flat key=value config format.
//
// Surfaces:
//   half_circle     1-DOF pendulum bob on the upper half circle of radius L
//   hemisphere      upper half sphere of radius L (geodesic polar chart plus
//                   a stereographic chart for switching)
//   figure1         dome of revolution, vertical at its horizontal boundary
//                   circle and locally above it; bump parameter deforms it
//                   away from the round hemisphere
//   flat_disk       horizontal disk (gravity normal to the surface; the
//                   external-tangency condition fails identically)
//   flat_annulus    horizontal annulus (chi = 0, so the topology condition
//                   fails too)
//
// Forcing is a horizontal pivot/frame acceleration a(t) given by expressions
// in t; the scenarios are simulated in the frame of the surface, so the
// applied force is the inertia force -a(t) and the surface stays fixed.
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "surforbit/dynamics.hpp"
#include "surforbit/expr.hpp"
#include "surforbit/mesh.hpp"

namespace surforbit {

// ---------------------------------------------------------------------------
// Flat key=value document
// ---------------------------------------------------------------------------

struct ConfigDoc {
    std::vector<std::pair<std::string, std::string>> entries;

    std::optional<std::string> get(const std::string& key) const {
        std::optional<std::string> found;  // later entries win
        for (const auto& [k, v] : entries)
            if (k == key) found = v;
        return found;
    }
    void set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : entries)
            if (k == key) {
                v = value;
                return;
            }
        entries.emplace_back(key, value);
    }
    bool has(const std::string& key) const { return get(key).has_value(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace detail

inline ConfigDoc parse_config(const std::string& text, const std::string& source = "<config>") {
    ConfigDoc doc;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'",
                              line_no, 1);
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key", line_no, 1);
        if (value.empty())
            throw ConfigError(source + ":" + std::to_string(line_no) + ": empty value for '" +
                                  key + "'",
                              line_no, static_cast<int>(eq + 2));
        doc.entries.emplace_back(key, value);
    }
    return doc;
}

inline std::string serialize_config(const ConfigDoc& doc) {
    std::string out;
    for (const auto& [k, v] : doc.entries) out += k + " = " + v + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Chart factories
// ---------------------------------------------------------------------------

namespace detail {

// sin(sqrt(w))/sqrt(w) and derivatives in w, stable through w = 0.
inline double sinc_w(double w) {
    if (w < 0.25) {
        double term = 1.0, sum = 0.0;
        for (int k = 0; k < 12; ++k) {
            sum += term;
            term *= -w / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
        }
        return sum;
    }
    double s = std::sqrt(w);
    return std::sin(s) / s;
}

inline double sinc_w_d1(double w) {
    if (w < 0.25) {
        // sum_k (-1)^k k w^{k-1} / (2k+1)!
        double sum = 0.0, pw = 1.0;  // w^{k-1} starting at k=1
        double fact = 6.0;           // (2k+1)! at k=1
        double sign = -1.0;
        for (int k = 1; k < 13; ++k) {
            sum += sign * k * pw / fact;
            pw *= w;
            sign = -sign;
            fact *= (2.0 * k + 2.0) * (2.0 * k + 3.0);
        }
        return sum;
    }
    return (std::cos(std::sqrt(w)) - sinc_w(w)) / (2.0 * w);
}

inline double sinc_w_d2(double w) {
    if (w < 0.25) {
        double sum = 0.0, pw = 1.0;  // w^{k-2} starting at k=2
        double fact = 120.0;         // (2k+1)! at k=2
        double sign = 1.0;
        for (int k = 2; k < 14; ++k) {
            sum += sign * k * (k - 1.0) * pw / fact;
            pw *= w;
            sign = -sign;
            fact *= (2.0 * k + 2.0) * (2.0 * k + 3.0);
        }
        return sum;
    }
    return -(0.5 * sinc_w(w) + 3.0 * sinc_w_d1(w)) / (2.0 * w);
}

inline double cosr_w(double w) { return std::cos(std::sqrt(w)); }   // cos(sqrt(w))
inline double cosr_w_d1(double w) { return -0.5 * sinc_w(w); }
inline double cosr_w_d2(double w) { return -0.5 * sinc_w_d1(w); }

}  // namespace detail

// Dome of revolution in geodesic-polar-style coordinates: psi = |u| is the
// profile angle, the embedding is
//   (x, y) = R sin(psi) * u/|u|,   z = R cos(psi) (1 + beta sin^2(psi)),
// smooth through the apex u = 0. The boundary sits at psi = pi/2, where the
// profile tangent is vertical for every beta; beta = 0 is the hemisphere.
inline Chart2 dome_chart(double radius, double beta, double margin,
                         const std::string& name) {
    const double psi_b = 1.5707963267948966;
    const double s_valid = (psi_b + margin) / 0.8;
    const double s_comfort = psi_b + margin;
    const double R = radius;

    Chart2 chart;
    chart.name = name;
    chart.extension_margin = margin;
    chart.sample_halfwidth = psi_b;
    chart.fd_step = 1e-5 * (2.0 * s_valid);

    auto h0 = [R, beta](double w) {
        double c = detail::cosr_w(w);
        return R * ((1.0 + beta) * c - beta * c * c * c);
    };
    auto h1 = [R, beta](double w) {
        double c = detail::cosr_w(w);
        return R * detail::cosr_w_d1(w) * ((1.0 + beta) - 3.0 * beta * c * c);
    };
    auto h2 = [R, beta](double w) {
        double c = detail::cosr_w(w);
        double c1 = detail::cosr_w_d1(w);
        return R * (detail::cosr_w_d2(w) * ((1.0 + beta) - 3.0 * beta * c * c) -
                    6.0 * beta * c * c1 * c1);
    };

    chart.embed = [R, h0](const Vec2& u) {
        double w = dot(u, u);
        double f = R * detail::sinc_w(w);
        return Vec3{{f * u[0], f * u[1], h0(w)}};
    };
    chart.jacobian = [R, h1](const Vec2& u) {
        double w = dot(u, u);
        double f = detail::sinc_w(w), f1 = detail::sinc_w_d1(w);
        Chart2::Partials J;
        for (std::size_t j = 0; j < 2; ++j) {
            Vec3 col{};
            for (std::size_t i = 0; i < 2; ++i)
                col[i] = R * (f * (i == j ? 1.0 : 0.0) + 2.0 * f1 * u[i] * u[j]);
            col[2] = 2.0 * h1(w) * u[j];
            J[j] = col;
        }
        return J;
    };
    chart.second = [R, h1, h2](const Vec2& u) {
        double w = dot(u, u);
        double f1 = detail::sinc_w_d1(w), f2 = detail::sinc_w_d2(w);
        Chart2::SecondPartials S;
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t k = j; k < 2; ++k) {
                Vec3 d{};
                for (std::size_t i = 0; i < 2; ++i) {
                    double dij = (i == j) ? 1.0 : 0.0;
                    double dik = (i == k) ? 1.0 : 0.0;
                    double djk = (j == k) ? 1.0 : 0.0;
                    d[i] = R * (2.0 * f1 * (dij * u[k] + dik * u[j] + djk * u[i]) +
                                4.0 * f2 * u[i] * u[j] * u[k]);
                }
                d[2] = 2.0 * h1(w) * ((j == k) ? 1.0 : 0.0) + 4.0 * h2(w) * u[j] * u[k];
                S[sym_index<2>(j, k)] = d;
            }
        return S;
    };
    chart.boundary = [psi_b](const Vec2& u) { return 0.5 * (psi_b * psi_b - dot(u, u)); };
    chart.boundary_grad = [](const Vec2& u) { return Vec2{{-u[0], -u[1]}}; };
    chart.valid = [s_valid](const Vec2& u) { return dot(u, u) < s_valid * s_valid; };
    chart.comfort = [s_comfort](const Vec2& u) { return dot(u, u) < s_comfort * s_comfort; };
    chart.invert_guess = [R](const Vec3& q) {
        double rho = std::hypot(q[0], q[1]);
        double psi = std::atan2(rho, q[2]);
        if (rho < 1e-14 * R) return Vec2{{0.0, 0.0}};
        return Vec2{{psi * q[0] / rho, psi * q[1] / rho}};
    };
    chart.boundary_loops = {[psi_b](double ang) {
        return Vec2{{psi_b * std::cos(ang), psi_b * std::sin(ang)}};
    }};
    return chart;
}

// Stereographic projection of the radius-L sphere from the south pole:
// u = 0 is the north pole, |u| = 1 the equator.
inline Chart2 stereographic_chart(double radius, const std::string& name) {
    const double L = radius;
    // validity chosen so the comfort zone ends well inside the polar chart's
    // comfort zone; switching then always has a comfortable target
    const double r_valid = 1.5, r_comfort = 1.2;

    Chart2 chart;
    chart.name = name;
    chart.extension_margin = r_comfort - 1.0;
    chart.sample_halfwidth = 1.0;
    chart.fd_step = 1e-5 * (2.0 * r_valid);

    chart.embed = [L](const Vec2& u) {
        double D = 1.0 + dot(u, u);
        return Vec3{{2.0 * L * u[0] / D, 2.0 * L * u[1] / D, L * (2.0 / D - 1.0)}};
    };
    chart.jacobian = [L](const Vec2& u) {
        double D = 1.0 + dot(u, u);
        Chart2::Partials J;
        for (std::size_t j = 0; j < 2; ++j) {
            Vec3 col{};
            for (std::size_t i = 0; i < 2; ++i)
                col[i] = 2.0 * L * ((i == j ? 1.0 : 0.0) / D - 2.0 * u[i] * u[j] / (D * D));
            col[2] = -4.0 * L * u[j] / (D * D);
            J[j] = col;
        }
        return J;
    };
    chart.second = [L](const Vec2& u) {
        double D = 1.0 + dot(u, u);
        double D2 = D * D, D3 = D2 * D;
        Chart2::SecondPartials S;
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t k = j; k < 2; ++k) {
                Vec3 d{};
                for (std::size_t i = 0; i < 2; ++i) {
                    double dij = (i == j) ? 1.0 : 0.0;
                    double dik = (i == k) ? 1.0 : 0.0;
                    double djk = (j == k) ? 1.0 : 0.0;
                    d[i] = -4.0 * L * (dij * u[k] + dik * u[j] + djk * u[i]) / D2 +
                           16.0 * L * u[i] * u[j] * u[k] / D3;
                }
                d[2] = -4.0 * L * ((j == k) ? 1.0 : 0.0) / D2 + 16.0 * L * u[j] * u[k] / D3;
                S[sym_index<2>(j, k)] = d;
            }
        return S;
    };
    chart.boundary = [](const Vec2& u) { return 0.5 * (1.0 - dot(u, u)); };
    chart.boundary_grad = [](const Vec2& u) { return Vec2{{-u[0], -u[1]}}; };
    chart.valid = [r_valid](const Vec2& u) { return dot(u, u) < r_valid * r_valid; };
    chart.comfort = [r_comfort](const Vec2& u) { return dot(u, u) < r_comfort * r_comfort; };
    chart.invert_guess = [L](const Vec3& q) {
        double denom = L + q[2];
        if (denom < 0.05 * L) denom = 0.05 * L;
        return Vec2{{q[0] / denom, q[1] / denom}};
    };
    chart.boundary_loops = {[](double ang) { return Vec2{{std::cos(ang), std::sin(ang)}}; }};
    return chart;
}

// Upper half circle of radius L in the xz-plane; u[0] is the angle from the
// upward vertical. One degree of freedom, boundary = two horizontal points.
inline Chart1 half_circle_chart(double radius, double margin, const std::string& name) {
    const double L = radius;
    const double th_b = 1.5707963267948966;
    const double th_valid = (th_b + margin) / 0.8;
    const double th_comfort = th_b + margin;

    Chart1 chart;
    chart.name = name;
    chart.extension_margin = margin;
    chart.sample_halfwidth = th_b;
    chart.fd_step = 1e-5 * (2.0 * th_valid);

    chart.embed = [L](const Vec1& u) {
        return Vec3{{L * std::sin(u[0]), 0.0, L * std::cos(u[0])}};
    };
    chart.jacobian = [L](const Vec1& u) {
        return Chart1::Partials{Vec3{{L * std::cos(u[0]), 0.0, -L * std::sin(u[0])}}};
    };
    chart.second = [L](const Vec1& u) {
        return Chart1::SecondPartials{Vec3{{-L * std::sin(u[0]), 0.0, -L * std::cos(u[0])}}};
    };
    chart.boundary = [th_b](const Vec1& u) { return 0.5 * (th_b * th_b - u[0] * u[0]); };
    chart.boundary_grad = [](const Vec1& u) { return Vec1{{-u[0]}}; };
    chart.valid = [th_valid](const Vec1& u) { return std::abs(u[0]) < th_valid; };
    chart.comfort = [th_comfort](const Vec1& u) { return std::abs(u[0]) < th_comfort; };
    chart.normal_override = [](const Vec1& u) {
        return Vec3{{std::sin(u[0]), 0.0, std::cos(u[0])}};
    };
    chart.invert_guess = [](const Vec3& q) { return Vec1{{std::atan2(q[0], q[2])}}; };
    chart.boundary_loops = {[th_b](double) { return Vec1{{th_b}}; },
                            [th_b](double) { return Vec1{{-th_b}}; }};
    return chart;
}

// Horizontal disk of radius R in the z = 0 plane.
inline Chart2 flat_disk_chart(double radius, double margin, const std::string& name) {
    const double R = radius;
    const double r_valid = (R + margin) / 0.8;
    const double r_comfort = R + margin;

    Chart2 chart;
    chart.name = name;
    chart.extension_margin = margin;
    chart.sample_halfwidth = R;
    chart.fd_step = 1e-5 * (2.0 * r_valid);

    chart.embed = [](const Vec2& u) { return Vec3{{u[0], u[1], 0.0}}; };
    chart.jacobian = [](const Vec2&) {
        return Chart2::Partials{Vec3{{1.0, 0.0, 0.0}}, Vec3{{0.0, 1.0, 0.0}}};
    };
    chart.second = [](const Vec2&) { return Chart2::SecondPartials{}; };
    chart.boundary = [R](const Vec2& u) { return 0.5 * (R * R - dot(u, u)); };
    chart.boundary_grad = [](const Vec2& u) { return Vec2{{-u[0], -u[1]}}; };
    chart.valid = [r_valid](const Vec2& u) { return dot(u, u) < r_valid * r_valid; };
    chart.comfort = [r_comfort](const Vec2& u) { return dot(u, u) < r_comfort * r_comfort; };
    chart.invert_guess = [](const Vec3& q) { return Vec2{{q[0], q[1]}}; };
    chart.boundary_loops = {[R](double ang) { return Vec2{{R * std::cos(ang), R * std::sin(ang)}}; }};
    return chart;
}

// Horizontal annulus; b vanishes on both circles and is positive between.
inline Chart2 flat_annulus_chart(double r_inner, double r_outer, double margin,
                                 const std::string& name) {
    const double wi = r_inner * r_inner, wo = r_outer * r_outer;
    const double K = wo - wi;
    const double lo_valid = std::max(0.05 * r_inner, r_inner - margin / 0.8);
    const double hi_valid = (r_outer + margin) / 0.8;
    const double lo_comfort = std::max(lo_valid * 1.1, r_inner - margin);
    const double hi_comfort = r_outer + margin;

    Chart2 chart;
    chart.name = name;
    chart.extension_margin = margin;
    chart.sample_halfwidth = r_outer;
    chart.fd_step = 1e-5 * (2.0 * hi_valid);

    chart.embed = [](const Vec2& u) { return Vec3{{u[0], u[1], 0.0}}; };
    chart.jacobian = [](const Vec2&) {
        return Chart2::Partials{Vec3{{1.0, 0.0, 0.0}}, Vec3{{0.0, 1.0, 0.0}}};
    };
    chart.second = [](const Vec2&) { return Chart2::SecondPartials{}; };
    chart.boundary = [wi, wo, K](const Vec2& u) {
        double w = dot(u, u);
        return (wo - w) * (w - wi) / (2.0 * K);
    };
    chart.boundary_grad = [wi, wo, K](const Vec2& u) {
        double w = dot(u, u);
        double db_dw = (wo + wi - 2.0 * w) / (2.0 * K);
        return Vec2{{2.0 * db_dw * u[0], 2.0 * db_dw * u[1]}};
    };
    chart.valid = [lo_valid, hi_valid](const Vec2& u) {
        double r = norm(u);
        return r > lo_valid && r < hi_valid;
    };
    chart.comfort = [lo_comfort, hi_comfort](const Vec2& u) {
        double r = norm(u);
        return r > lo_comfort && r < hi_comfort;
    };
    chart.invert_guess = [](const Vec3& q) { return Vec2{{q[0], q[1]}}; };
    chart.boundary_loops = {
        [r_outer](double ang) { return Vec2{{r_outer * std::cos(ang), r_outer * std::sin(ang)}}; },
        [r_inner](double ang) { return Vec2{{r_inner * std::cos(ang), r_inner * std::sin(ang)}}; }};
    return chart;
}

// ---------------------------------------------------------------------------
// Scenario construction from a config document
// ---------------------------------------------------------------------------

using AnyScenario = std::variant<Scenario<1>, Scenario<2>>;

inline const std::vector<std::string>& builtin_scenario_names() {
    static const std::vector<std::string> names{
        "half_circle_pendulum", "hemisphere_pendulum", "figure1_surface", "flat_disk",
        "flat_annulus"};
    return names;
}

inline ConfigDoc builtin_doc(const std::string& name) {
    ConfigDoc doc;
    bool known = false;
    for (const auto& n : builtin_scenario_names()) known = known || n == name;
    if (!known) throw ConfigError("unknown built-in scenario '" + name + "'");

    doc.set("scenario.kind", name);
    doc.set("period", "1");
    doc.set("gravity", "9.81");
    doc.set("surface.length", "1");
    doc.set("surface.margin", "0.35");
    if (name == "figure1_surface") doc.set("surface.bump", "0.3");
    if (name == "flat_annulus") doc.set("surface.inner_radius", "0.5");
    doc.set("surface.mesh_refinement", "16");
    if (name == "flat_disk" || name == "flat_annulus") {
        doc.set("forcing.ax", "0");
    } else {
        doc.set("forcing.ax", "0.5*sin(2*pi*t/T)");
    }
    if (name != "half_circle_pendulum") doc.set("forcing.ay", "0");
    doc.set("friction.gamma", "0.1");
    doc.set("friction.d", "0.1");
    doc.set("friction.gamma_min", "0.1");
    doc.set("solver.tol", "1e-9");
    doc.set("seeds.count", "64");
    doc.set("sampling.time", "64");
    doc.set("sampling.boundary", "256");
    doc.set("sampling.speeds", "17");
    doc.set("sampling.interior", "128");
    doc.set("sampling.shell", "10000");
    return doc;
}

namespace detail {

struct Validator {
    std::vector<std::string> problems;
    const ConfigDoc& doc;
    std::set<std::string> consumed;

    explicit Validator(const ConfigDoc& d) : doc(d) {}

    std::optional<std::string> take(const std::string& key) {
        consumed.insert(key);
        return doc.get(key);
    }

    double number(const std::string& key, double fallback) {
        auto v = take(key);
        if (!v) return fallback;
        try {
            std::size_t used = 0;
            double x = std::stod(*v, &used);
            if (used != v->size()) throw std::invalid_argument("trailing characters");
            return x;
        } catch (const std::exception&) {
            problems.push_back("key '" + key + "': not a number: '" + *v + "'");
            return fallback;
        }
    }

    long integer(const std::string& key, long fallback) {
        double x = number(key, static_cast<double>(fallback));
        long i = static_cast<long>(x);
        if (static_cast<double>(i) != x)
            problems.push_back("key '" + key + "': not an integer");
        return i;
    }

    std::optional<expr::Expression> expression(const std::string& key,
                                               const std::string& fallback) {
        auto v = take(key);
        std::string text = v ? *v : fallback;
        try {
            return expr::Expression::parse(text);
        } catch (const ConfigError& e) {
            problems.push_back("key '" + key + "': " + e.what());
            return std::nullopt;
        }
    }

    void require(bool cond, const std::string& msg) {
        if (!cond) problems.push_back(msg);
    }

    void finish(const std::string& source) {
        for (const auto& [k, v] : doc.entries)
            if (!consumed.count(k) && k != "label")
                problems.push_back("unknown key '" + k + "'");
        if (!problems.empty()) {
            std::string msg = source + ": invalid scenario config:";
            for (const auto& p : problems) msg += "\n  - " + p;
            throw ConfigError(msg);
        }
    }
};

inline double sampled_max_accel(const std::vector<expr::Expression>& comps, double period) {
    double m = 0.0;
    for (int i = 0; i < 4096; ++i) {
        double t = period * i / 4096.0;
        double s2 = 0.0;
        for (const auto& c : comps) {
            double v = c(t, period);
            s2 += v * v;
        }
        m = std::max(m, std::sqrt(s2));
    }
    return m;
}

template <std::size_t N>
inline void fill_common(Validator& val, Scenario<N>& sc, const ConfigDoc& doc,
                        const std::string& source) {
    sc.source_doc = doc.entries;

    const double period = val.number("period", 1.0);
    val.require(period > 0.0, "period must be positive");
    sc.forcing.period = period > 0.0 ? period : 1.0;

    const double g = val.number("gravity", 9.81);
    val.require(std::isfinite(g), "gravity must be finite");
    sc.gravity = Vec3{{0.0, 0.0, -g}};

    // Pivot (frame) acceleration, horizontal by construction.
    std::vector<expr::Expression> accel;
    auto ax = val.expression("forcing.ax", "0");
    if (ax) accel.push_back(*ax);
    if constexpr (N == 2) {
        auto ay = val.expression("forcing.ay", "0");
        if (ay) accel.push_back(*ay);
    }
    if (accel.size() == (N == 1 ? 1u : 2u)) {
        const double T = sc.forcing.period;
        // T-periodicity of the forcing, sampled.
        for (const auto& comp : accel)
            for (int i = 0; i < 64; ++i) {
                double t = T * i / 64.0;
                double a0 = comp(t, T), a1 = comp(t + T, T);
                if (std::abs(a1 - a0) > 1e-12 * std::max(1.0, std::abs(a0))) {
                    val.require(false, "forcing acceleration is not T-periodic (key forcing.ax/ay)");
                    break;
                }
            }
        expr::Expression ax_e = accel[0];
        expr::Expression ay_e = accel.size() > 1 ? accel[1] : expr::Expression::parse("0");
        sc.forcing.moving_frame = true;
        sc.forcing.frame_accel = [ax_e, ay_e, T](double t) {
            return Vec3{{ax_e(t, T), ay_e(t, T), 0.0}};
        };
        sc.forcing.force = [ax_e, ay_e, T](double t, const Vec3&, const Vec3&) {
            return Vec3{{-ax_e(t, T), -ay_e(t, T), 0.0}};
        };
        const double a_max = sampled_max_accel(accel, T);
        sc.forcing.f_max = val.number("forcing.fmax", (std::abs(g) + a_max) * 1.0000001);
        val.require(sc.forcing.f_max >= 0.0 && std::isfinite(sc.forcing.f_max),
                    "forcing.fmax must be finite and non-negative");
    }

    auto gamma = val.expression("friction.gamma", "0.1");
    if (gamma) {
        const double T = sc.forcing.period;
        expr::Expression ge = *gamma;
        for (int i = 0; i < 64; ++i) {
            double t = T * i / 64.0;
            if (std::abs(ge(t + T, T) - ge(t, T)) > 1e-12 * std::max(1.0, std::abs(ge(t, T)))) {
                val.require(false, "friction.gamma is not T-periodic");
                break;
            }
        }
        sc.friction.gamma = [ge, T](double t, const Vec3&, const Vec3&) { return ge(t, T); };
        double sampled_min = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 4096; ++i) sampled_min = std::min(sampled_min, ge(T * i / 4096.0, T));
        sc.friction.gamma_min = val.number("friction.gamma_min", sampled_min * (1.0 - 1e-4));
        sc.friction.threshold_speed = val.number("friction.d", 0.1);
        val.require(sc.friction.threshold_speed >= 0.0, "friction.d must be non-negative");
    }

    sc.solver_tol = val.number("solver.tol", 1e-9);
    val.require(sc.solver_tol > 0.0 && sc.solver_tol <= 1e-2,
                "solver.tol must lie in (0, 1e-2]");
    sc.seed_count = static_cast<int>(val.integer("seeds.count", 64));
    val.require(sc.seed_count > 0, "seeds.count must be positive");

    sc.sampling.time_samples = static_cast<int>(val.integer("sampling.time", 64));
    sc.sampling.boundary_samples = static_cast<int>(val.integer("sampling.boundary", 256));
    sc.sampling.speed_samples = static_cast<int>(val.integer("sampling.speeds", 17));
    sc.sampling.interior_samples = static_cast<int>(val.integer("sampling.interior", 128));
    sc.sampling.shell_samples = static_cast<int>(val.integer("sampling.shell", 10000));
    val.require(sc.sampling.time_samples > 0 && sc.sampling.boundary_samples > 0 &&
                    sc.sampling.speed_samples > 0 && sc.sampling.interior_samples > 0 &&
                    sc.sampling.shell_samples > 0,
                "sampling densities must be positive");
    (void)source;
}

inline Mesh mesh_from_config(Validator& val, const std::function<Mesh()>& builtin_mesh) {
    auto path = val.take("surface.mesh");
    if (!path) return builtin_mesh();
    if (!std::filesystem::exists(*path)) {
        val.require(false, "surface.mesh: file does not exist: '" + *path + "'");
        return Mesh{};
    }
    return load_mesh(*path);
}

}  // namespace detail

inline AnyScenario build_scenario(const ConfigDoc& doc, const std::string& source = "<config>") {
    auto kind_opt = doc.get("scenario.kind");
    if (!kind_opt) throw ConfigError(source + ": missing required key 'scenario.kind'");
    const std::string kind = *kind_opt;

    detail::Validator val(doc);
    val.take("scenario.kind");

    const double length = val.number("surface.length", 1.0);
    val.require(length > 0.0, "surface.length must be positive");
    const double margin = val.number("surface.margin", 0.35);
    val.require(margin > 0.01 && margin < 1.0, "surface.margin must lie in (0.01, 1)");
    const long refine = val.integer("surface.mesh_refinement", 16);
    val.require(refine >= 3, "surface.mesh_refinement must be at least 3");
    const int rings = std::max(3, static_cast<int>(refine) / 2);
    const int sectors = std::max(6, static_cast<int>(refine));

    if (kind == "half_circle_pendulum") {
        Scenario<1> sc;
        sc.name = kind;
        auto chart = half_circle_chart(length, margin, "half_circle");
        sc.surface.charts = {chart};
        sc.surface.mesh = detail::mesh_from_config(val, [&] {
            return path_mesh(static_cast<int>(refine), [&](double f) {
                return chart.embed(Vec1{{-1.5707963267948966 + f * 3.141592653589793}});
            });
        });
        detail::fill_common(val, sc, doc, source);
        val.finish(source);
        return sc;
    }

    Scenario<2> sc;
    sc.name = kind;
    if (kind == "hemisphere_pendulum") {
        auto chart = dome_chart(length, 0.0, margin, "hemisphere_polar");
        auto stereo = stereographic_chart(length, "hemisphere_stereo");
        stereo.boundary_loops.clear();  // the boundary is registered once, on the polar chart
        sc.surface.charts = {chart, stereo};
        sc.surface.mesh = detail::mesh_from_config(val, [&] {
            return disk_mesh(rings, sectors, [&](double f, double ang) {
                double psi = f * 1.5707963267948966;
                return chart.embed(Vec2{{psi * std::cos(ang), psi * std::sin(ang)}});
            });
        });
    } else if (kind == "figure1_surface") {
        const double bump = val.number("surface.bump", 0.3);
        val.require(bump >= 0.0 && bump < 0.45, "surface.bump must lie in [0, 0.45)");
        auto chart = dome_chart(length, bump, margin, "figure1_polar");
        sc.surface.charts = {chart};
        sc.surface.mesh = detail::mesh_from_config(val, [&] {
            return disk_mesh(rings, sectors, [&](double f, double ang) {
                double psi = f * 1.5707963267948966;
                return chart.embed(Vec2{{psi * std::cos(ang), psi * std::sin(ang)}});
            });
        });
    } else if (kind == "flat_disk") {
        auto chart = flat_disk_chart(length, margin, "disk");
        sc.surface.charts = {chart};
        sc.surface.mesh = detail::mesh_from_config(val, [&] {
            return disk_mesh(rings, sectors, [&](double f, double ang) {
                return chart.embed(Vec2{{length * f * std::cos(ang), length * f * std::sin(ang)}});
            });
        });
    } else if (kind == "flat_annulus") {
        const double inner = val.number("surface.inner_radius", 0.5);
        val.require(inner > 0.0 && inner < length,
                    "surface.inner_radius must lie in (0, surface.length)");
        auto chart = flat_annulus_chart(inner, length, margin, "annulus");
        sc.surface.charts = {chart};
        sc.surface.mesh = detail::mesh_from_config(val, [&] {
            return annulus_mesh(std::max(2, rings / 2), sectors, [&](double f, double ang) {
                double r = inner + f * (length - inner);
                return chart.embed(Vec2{{r * std::cos(ang), r * std::sin(ang)}});
            });
        });
    } else {
        throw ConfigError(source + ": unknown scenario.kind '" + kind + "'");
    }
    detail::fill_common(val, sc, doc, source);
    val.finish(source);
    return sc;
}

inline AnyScenario builtin_scenario(
    const std::string& name,
    const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
    ConfigDoc doc = builtin_doc(name);
    for (const auto& [k, v] : overrides) doc.set(k, v);
    return build_scenario(doc, "builtin:" + name);
}

inline AnyScenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario config '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    ConfigDoc doc = parse_config(buffer.str(), path);
    return build_scenario(doc, path);
}

// The config echo of a scenario, serializable back to a file.
template <std::size_t N>
inline ConfigDoc scenario_config(const Scenario<N>& scenario) {
    ConfigDoc doc;
    doc.entries = scenario.source_doc;
    return doc;
}

}  // namespace surforbit
