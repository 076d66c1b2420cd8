// surforbit command-line tool.
//
// Subcommands:
//   check             run the existence-condition checks on a scenario
//   find-orbit        check, then shoot for the T-periodic orbit and verify it
//   simulate          integrate from an initial state and export the trajectory
//   euler-char        Euler characteristic and boundary loops of a mesh
//   export-plot-data  derive plot series from a trajectory CSV
//
// Exit codes: 0 success, 1 hypothesis/verification failure, 2 usage error,
// 3 numerical failure. Output files are written once, atomically, at the end.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "surforbit/surforbit.hpp"

namespace fs = std::filesystem;
using namespace surforbit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitHypothesis = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
    std::string scenario;
    std::string out_dir;
    double tol = 0.0;   // 0: keep the scenario's tolerance
    int seeds = 0;      // 0: keep the scenario's seed count
    bool force = false;
    double t_end = -1.0;
    std::vector<double> state;
};

AnyScenario resolve_scenario(const CommonArgs& args) {
    const auto& names = builtin_scenario_names();
    bool is_builtin = false;
    for (const auto& n : names) is_builtin = is_builtin || n == args.scenario;

    std::vector<std::pair<std::string, std::string>> overrides;
    if (args.tol > 0.0) overrides.emplace_back("solver.tol", detail::format_double(args.tol));
    if (args.seeds > 0) overrides.emplace_back("seeds.count", std::to_string(args.seeds));

    if (is_builtin) return builtin_scenario(args.scenario, overrides);
    if (!fs::exists(args.scenario))
        throw ConfigError("scenario '" + args.scenario +
                          "' is neither a built-in name nor an existing config file");
    AnyScenario any = load_scenario(args.scenario);
    if (!overrides.empty()) {
        std::visit(
            [&](auto& sc) {
                ConfigDoc doc = scenario_config(sc);
                for (const auto& [k, v] : overrides) doc.set(k, v);
                any = build_scenario(doc, args.scenario);
            },
            any);
    }
    return any;
}

// Collected outputs, flushed atomically on success.
struct OutputSet {
    std::vector<std::pair<fs::path, std::string>> files;

    void add(const fs::path& p, std::string content) {
        files.emplace_back(p, std::move(content));
    }
    void flush() {
        for (const auto& [p, content] : files) atomic_write_file(p, content);
        for (const auto& [p, content] : files)
            std::cout << "wrote " << p.string() << "\n";
    }
};

template <std::size_t N>
int run_check(const Scenario<N>& sc, const CommonArgs& args) {
    auto report = check_all(sc);
    std::cout << to_text(report);
    if (!args.out_dir.empty()) {
        OutputSet out;
        out.add(fs::path(args.out_dir) / "hypotheses.json", to_json(report).dump(2) + "\n");
        out.add(fs::path(args.out_dir) / "hypotheses.txt", to_text(report));
        out.flush();
    }
    return report.pass ? kExitOk : kExitHypothesis;
}

template <std::size_t N>
int run_find_orbit(const Scenario<N>& sc, const CommonArgs& args) {
    auto report = check_all(sc);
    std::cout << to_text(report);
    OutputSet out;
    if (!args.out_dir.empty())
        out.add(fs::path(args.out_dir) / "hypotheses.json", to_json(report).dump(2) + "\n");

    if (!report.pass && !args.force) {
        std::cout << "hypotheses failed; orbit search not performed (use --force to override)\n";
        out.flush();
        return kExitHypothesis;
    }

    OrbitSearchOptions opt;
    opt.override_hypotheses = args.force;
    auto result = find_orbit(sc, report, opt);  // throws OrbitNotFound -> exit 3

    const auto& best = result.orbits.front();
    double ceiling = result.ceiling_c;
    auto verification = verify_orbit(sc, best, ceiling, sc.solver_tol);

    std::cout << "found " << result.orbits.size() << " orbit(s); best residual "
              << best.residual << ", boundary clearance " << best.clearance
              << ", energy margin " << best.energy_margin << "\n";
    std::cout << "verification: " << verification.message
              << " (tightened residual " << verification.residual_tight << ")\n";

    if (!args.out_dir.empty()) {
        nlohmann::ordered_json j;
        j["scenario"] = sc.name;
        j["hypotheses_passed"] = result.hypotheses_passed;
        j["ceiling_c"] = ceiling;
        nlohmann::ordered_json orbits = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < result.orbits.size(); ++i) {
            const auto& o = result.orbits[i];
            orbits.push_back(to_json(sc, o, i == 0 ? &verification : nullptr,
                                     i == 0 ? "trajectory.csv" : ""));
        }
        j["orbits"] = orbits;
        nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
        for (const auto& s : result.seeds)
            seeds.push_back({{"seed", s.seed},
                             {"outcome", s.outcome},
                             {"best_residual", s.best_residual},
                             {"iterations", s.iterations}});
        j["seeds"] = seeds;
        out.add(fs::path(args.out_dir) / "orbit.json", j.dump(2) + "\n");
        out.add(fs::path(args.out_dir) / "trajectory.csv", trajectory_csv(sc, best.trajectory));
    }
    out.flush();
    return verification.pass ? kExitOk : kExitHypothesis;
}

template <std::size_t N>
int run_simulate(const Scenario<N>& sc, const CommonArgs& args) {
    ChartState<N> state;
    if (!args.state.empty()) {
        const Vec3 q{{args.state[0], args.state[1], args.state[2]}};
        const Vec3 p{{args.state[3], args.state[4], args.state[5]}};
        const double t0 = args.state[6];
        // First chart that covers the projected point comfortably wins; the
        // velocity is projected onto the tangent plane there.
        std::optional<ChartState<N>> found;
        for (std::size_t c = 0; c < sc.surface.charts.size() && !found; ++c) {
            auto u = invert_chart(sc.surface.charts[c], q);
            if (!u) continue;
            if (norm(sc.surface.charts[c].embed(*u) - q) > 1e-6) continue;  // projection tolerance
            if (!sc.surface.charts[c].comfort(*u)) continue;
            auto coords =
                express_in_chart(sc.surface.charts[c], sc.surface.charts[c].embed(*u), p, 1e-6, u);
            if (coords) found = ChartState<N>{t0, c, coords->u, coords->du};
        }
        if (!found)
            throw ConfigError("initial state is farther than 1e-6 from the surface");
        state = *found;
    } else {
        state = ChartState<N>{0.0, 0, {}, {}};
        if (!sc.surface.charts[0].valid(state.u) || sc.surface.charts[0].boundary(state.u) <= 0.0) {
            state.u[0] = 0.75 * sc.surface.charts[0].sample_halfwidth;
            if (!sc.surface.charts[0].valid(state.u))
                throw ConfigError("no default initial state available; pass --state");
        }
    }

    const double duration = args.t_end >= 0.0 ? args.t_end : sc.period();
    IntegratorOptions opt;
    opt.abs_tol = opt.rel_tol = sc.solver_tol;
    opt.boundary_event = true;
    auto seg = integrate(sc, state, state.t + duration, opt);
    std::cout << "integrated " << seg.steps.size() - 1 << " steps; termination: "
              << to_string(seg.reason) << "\n";

    OutputSet out;
    fs::path dir = args.out_dir.empty() ? fs::path(".") : fs::path(args.out_dir);
    out.add(dir / "trajectory.csv", trajectory_csv(sc, seg));
    out.flush();
    return kExitOk;
}

int run_euler_char(const std::string& mesh_path, const CommonArgs& args) {
    Mesh mesh;
    if (!mesh_path.empty()) {
        mesh = load_mesh(mesh_path);
    } else if (!args.scenario.empty()) {
        auto any = resolve_scenario(args);
        std::visit([&](const auto& sc) { mesh = sc.surface.mesh; }, any);
    } else {
        throw ConfigError("euler-char needs --mesh or --scenario");
    }
    validate_mesh(mesh);
    int chi = euler_characteristic(mesh);
    int loops = boundary_loop_count(mesh);
    std::size_t edges = detail::edge_face_counts(mesh).size();
    std::cout << "vertices: " << mesh.vertices.size() << "\n"
              << "edges: " << edges << "\n"
              << "faces: " << mesh.faces.size() << "\n"
              << "euler_characteristic: " << chi << "\n"
              << "boundary_loops: " << loops << "\n"
              << "exit_index: " << exit_index(mesh, loops) << "\n";
    return kExitOk;
}

int run_export_plot_data(const std::string& input, const CommonArgs& args) {
    std::string content = read_file(input);
    std::istringstream in(content);
    std::string header;
    if (!std::getline(in, header) ||
        header != "t,qx,qy,qz,px,py,pz,kinetic_energy,b")
        throw ConfigError("input is not a trajectory CSV (unexpected header)");

    std::string energy = "t,kinetic_energy\n";
    std::string boundary = "t,b\n";
    std::string path3d = "qx,qy,qz\n";
    std::string line;
    long rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double v[9];
        int got = std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg", &v[0], &v[1],
                              &v[2], &v[3], &v[4], &v[5], &v[6], &v[7], &v[8]);
        if (got != 9) throw ConfigError("malformed trajectory row: '" + line + "'");
        char buf[200];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", v[0], v[7]);
        energy += buf;
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", v[0], v[8]);
        boundary += buf;
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", v[1], v[2], v[3]);
        path3d += buf;
        ++rows;
    }
    if (rows == 0) throw ConfigError("trajectory CSV has no data rows");

    OutputSet out;
    fs::path dir = args.out_dir.empty() ? fs::path(".") : fs::path(args.out_dir);
    out.add(dir / "energy.csv", energy);
    out.add(dir / "boundary.csv", boundary);
    out.add(dir / "path3d.csv", path3d);
    out.flush();
    std::cout << "exported " << rows << " rows\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"periodic orbits of a forced massive point on a surface with boundary"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string mesh_path, input_path;

    auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
        if (needs_scenario)
            cmd->add_option("--scenario", args.scenario, "built-in scenario name or config path")
                ->required();
        cmd->add_option("--out", args.out_dir, "output directory for written artifacts");
        cmd->add_option("--tol", args.tol, "integrator tolerance override");
        return cmd;
    };

    auto* cmd_check = add_common(app.add_subcommand("check", "run the existence checks"), true);

    auto* cmd_orbit =
        add_common(app.add_subcommand("find-orbit", "find and verify the periodic orbit"), true);
    cmd_orbit->add_option("--seeds", args.seeds, "number of shooting seeds");
    cmd_orbit->add_flag("--force", args.force, "search even when the checks fail");

    auto* cmd_sim = add_common(app.add_subcommand("simulate", "integrate a trajectory"), true);
    cmd_sim->add_option("--t-end", args.t_end, "integration duration in seconds (default: one period)");
    cmd_sim->add_option("--state", args.state,
                        "initial state: qx qy qz px py pz t0 (projected onto the surface)")
        ->expected(7);

    auto* cmd_euler = app.add_subcommand("euler-char", "Euler characteristic of a mesh");
    cmd_euler->add_option("--mesh", mesh_path, "mesh file (v/f/l records)");
    cmd_euler->add_option("--scenario", args.scenario, "use a scenario's mesh instead");

    auto* cmd_plot =
        app.add_subcommand("export-plot-data", "derive plot series from a trajectory CSV");
    cmd_plot->add_option("--input", input_path, "trajectory CSV path")->required();
    cmd_plot->add_option("--out", args.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (cmd_euler->parsed()) return run_euler_char(mesh_path, args);
        if (cmd_plot->parsed()) return run_export_plot_data(input_path, args);

        AnyScenario any = resolve_scenario(args);
        return std::visit(
            [&](const auto& sc) -> int {
                if (cmd_check->parsed()) return run_check(sc, args);
                if (cmd_orbit->parsed()) return run_find_orbit(sc, args);
                if (cmd_sim->parsed()) return run_simulate(sc, args);
                return kExitUsage;
            },
            any);
    } catch (const OrbitNotFound& e) {
        std::cerr << "error: " << e.what() << "\n" << e.diagnostics;
        return kExitNumerical;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const MeshError& e) {
        std::cerr << "mesh error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
