#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "surforbit/io.hpp"
#include "surforbit/mesh.hpp"
#include "surforbit/scenarios.hpp"

using namespace surforbit;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string output;
};

fs::path work_dir() {
    auto dir = fs::temp_directory_path() / "surforbit_cli_tests";
    fs::create_directories(dir);
    return dir;
}

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    fs::path log = work_dir() / ("cli_out_" + std::to_string(counter++) + ".log");
    std::string cmd = std::string(SURFORBIT_CLI_PATH) + " " + args + " > " + log.string() +
                      " 2>&1";
    int status = std::system(cmd.c_str());
    int code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    return {code, read_file(log)};
}

// Config with coarse sampling so CLI round trips stay quick.
fs::path small_config(const std::string& kind, const std::string& stem,
                      const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    ConfigDoc doc = builtin_doc(kind);
    doc.set("sampling.time", "8");
    doc.set("sampling.boundary", "24");
    doc.set("sampling.speeds", "5");
    doc.set("sampling.interior", "32");
    doc.set("sampling.shell", "400");
    doc.set("seeds.count", "8");
    for (const auto& [k, v] : extra) doc.set(k, v);
    fs::path p = work_dir() / (stem + ".cfg");
    atomic_write_file(p, serialize_config(doc));
    return p;
}

long csv_rows(const fs::path& p) {
    std::istringstream in(read_file(p));
    std::string line;
    long rows = -1;  // don't count the header
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    return rows;
}

}  // namespace

TEST_CASE("cli: help and usage errors") {
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("check --help").code == 0);
    CHECK(run_cli("check --scenario hemisphere_pendulum --no-such-flag").code == 2);
    CHECK(run_cli("").code == 2);             // missing subcommand
    CHECK(run_cli("check").code == 2);        // missing --scenario
}

TEST_CASE("cli: check verdicts drive the exit code") {
    auto ok = small_config("hemisphere_pendulum", "hemi_ok");
    auto r = run_cli("check --scenario " + ok.string());
    CHECK(r.code == 0);
    CHECK_THAT(r.output, Catch::Matchers::ContainsSubstring("chi = 1"));
    CHECK_THAT(r.output, Catch::Matchers::ContainsSubstring("verdict: PASS"));

    auto disk = small_config("flat_disk", "disk");
    auto rd = run_cli("check --scenario " + disk.string());
    CHECK(rd.code == 1);
    CHECK_THAT(rd.output, Catch::Matchers::ContainsSubstring("FAIL] external tangency"));

    CHECK(run_cli("check --scenario /no/such/file.cfg").code == 2);
}

TEST_CASE("cli: check writes machine-readable reports") {
    auto ok = small_config("half_circle_pendulum", "hc_report");
    fs::path out = work_dir() / "check_out";
    fs::remove_all(out);
    auto r = run_cli("check --scenario " + ok.string() + " --out " + out.string());
    CHECK(r.code == 0);
    CHECK(fs::exists(out / "hypotheses.json"));
    CHECK(fs::exists(out / "hypotheses.txt"));
    auto json_text = read_file(out / "hypotheses.json");
    CHECK_THAT(json_text, Catch::Matchers::ContainsSubstring("\"verdict\": \"pass\""));
}

TEST_CASE("cli: find-orbit on the half circle") {
    auto cfg = small_config("half_circle_pendulum", "hc_orbit");
    fs::path out = work_dir() / "orbit_out";
    fs::remove_all(out);
    auto r = run_cli("find-orbit --scenario " + cfg.string() + " --out " + out.string());
    CHECK(r.code == 0);
    CHECK(fs::exists(out / "orbit.json"));
    CHECK(fs::exists(out / "trajectory.csv"));
    CHECK(fs::exists(out / "hypotheses.json"));
    CHECK_THAT(r.output, Catch::Matchers::ContainsSubstring("verification: verified"));
    CHECK(csv_rows(out / "trajectory.csv") > 10);

    // tolerance and seed overrides are accepted
    auto r2 = run_cli("find-orbit --scenario " + cfg.string() + " --tol 1e-10 --seeds 4");
    CHECK(r2.code == 0);
}

TEST_CASE("cli: find-orbit returns the equilibrium of the unforced pendulum") {
    auto cfg = small_config("hemisphere_pendulum", "hemi_unforced",
                            {{"forcing.ax", "0"}, {"forcing.ay", "0"}});
    fs::path out = work_dir() / "orbit_unforced";
    fs::remove_all(out);
    auto r = run_cli("find-orbit --scenario " + cfg.string() + " --out " + out.string());
    CHECK(r.code == 0);
    auto j = read_file(out / "orbit.json");
    CHECK_THAT(j, Catch::Matchers::ContainsSubstring("\"residual\""));
    // the apex equilibrium: fixed point at the chart origin
    CHECK_THAT(r.output, Catch::Matchers::ContainsSubstring("best residual 0"));
}

TEST_CASE("cli: find-orbit refuses failed hypotheses without --force") {
    auto ring = small_config("flat_annulus", "ring_orbit");
    auto r = run_cli("find-orbit --scenario " + ring.string());
    CHECK(r.code == 1);
    CHECK_THAT(r.output, Catch::Matchers::ContainsSubstring("not performed"));
}

TEST_CASE("cli: find-orbit --force searches despite failed hypotheses") {
    // On the flat disk the existence conditions fail, but rest points are
    // genuine periodic solutions; the forced search finds one.
    auto disk = small_config("flat_disk", "disk_forced");
    fs::path out = work_dir() / "orbit_forced";
    fs::remove_all(out);
    auto r = run_cli("find-orbit --scenario " + disk.string() + " --force --out " + out.string());
    CHECK(r.code == 0);
    auto j = read_file(out / "orbit.json");
    CHECK_THAT(j, Catch::Matchers::ContainsSubstring("\"hypotheses_passed\": false"));
}

TEST_CASE("cli: simulate") {
    auto cfg = small_config("hemisphere_pendulum", "hemi_sim",
                            {{"forcing.ax", "0"}, {"forcing.ay", "0"}});
    fs::path out = work_dir() / "sim_out";
    fs::remove_all(out);

    // apex rest state: every row identical
    auto r = run_cli("simulate --scenario " + cfg.string() + " --state 0 0 1 0 0 0 0 --t-end 1 --out " +
                     out.string());
    CHECK(r.code == 0);
    CHECK_THAT(r.output, Catch::Matchers::ContainsSubstring("reached t_end"));
    {
        std::istringstream in(read_file(out / "trajectory.csv"));
        std::string header, first, line;
        std::getline(in, header);
        std::getline(in, first);
        long rows = 1;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            ++rows;
            // identical apart from the leading time column
            CHECK(line.substr(line.find(',')) == first.substr(first.find(',')));
        }
        CHECK(rows > 1);
    }

    // zero duration: a single row
    fs::path out0 = work_dir() / "sim_out0";
    fs::remove_all(out0);
    auto r0 = run_cli("simulate --scenario " + cfg.string() + " --state 0 0 1 0 0 0 0 --t-end 0 --out " +
                      out0.string());
    CHECK(r0.code == 0);
    CHECK(csv_rows(out0 / "trajectory.csv") == 1);

    // outward boundary-directed state (inside M, aimed down-slope) exits M
    fs::path oute = work_dir() / "sim_oute";
    fs::remove_all(oute);
    auto re = run_cli("simulate --scenario " + cfg.string() +
                      " --state 0.98544972998846018 0 0.16996714290024104"
                      " 0.33993428580048208 0 -1.9708994599769204 0 --t-end 2 --out " +
                      oute.string());
    CHECK(re.code == 0);
    CHECK_THAT(re.output, Catch::Matchers::ContainsSubstring("exited M"));
    {
        std::istringstream in(read_file(oute / "trajectory.csv"));
        std::string line, last;
        std::getline(in, line);  // header
        while (std::getline(in, line))
            if (!line.empty()) last = line;
        double b = 1.0;
        auto pos = last.rfind(',');
        REQUIRE(pos != std::string::npos);
        b = std::stod(last.substr(pos + 1));
        CHECK(b <= 0.0);
        CHECK(std::abs(b) < 1e-8);
    }

    // off-surface start is rejected
    auto rbad = run_cli("simulate --scenario " + cfg.string() + " --state 0 0 1.5 0 0 0 0");
    CHECK(rbad.code == 2);
}

TEST_CASE("cli: euler-char") {
    fs::path mesh_path = work_dir() / "oct.obj";
    atomic_write_file(mesh_path, serialize_mesh(octahedron_mesh()));
    auto r = run_cli("euler-char --mesh " + mesh_path.string());
    CHECK(r.code == 0);
    CHECK_THAT(r.output, Catch::Matchers::ContainsSubstring("euler_characteristic: 2"));
    CHECK_THAT(r.output, Catch::Matchers::ContainsSubstring("boundary_loops: 0"));

    auto cfg = small_config("flat_annulus", "ring_chi");
    auto rs = run_cli("euler-char --scenario " + cfg.string());
    CHECK(rs.code == 0);
    CHECK_THAT(rs.output, Catch::Matchers::ContainsSubstring("euler_characteristic: 0"));
    CHECK_THAT(rs.output, Catch::Matchers::ContainsSubstring("boundary_loops: 2"));

    // invalid mesh file
    fs::path bad = work_dir() / "bad.obj";
    atomic_write_file(bad, "v 0 0 0\nf 1 2 3\n");
    CHECK(run_cli("euler-char --mesh " + bad.string()).code == 2);
    CHECK(run_cli("euler-char").code == 2);
}

TEST_CASE("cli: export-plot-data") {
    // unforced, gravity-free: pure friction decay along the circle
    auto cfg = small_config("half_circle_pendulum", "hc_plot",
                            {{"forcing.ax", "0"}, {"gravity", "0"}});
    fs::path simdir = work_dir() / "plot_sim";
    fs::remove_all(simdir);
    REQUIRE(run_cli("simulate --scenario " + cfg.string() +
                    " --state 0 0 1 0.5 0 0 0 --t-end 1 --out " + simdir.string())
                .code == 0);

    fs::path plotdir = work_dir() / "plot_out";
    fs::remove_all(plotdir);
    auto r = run_cli("export-plot-data --input " + (simdir / "trajectory.csv").string() +
                     " --out " + plotdir.string());
    CHECK(r.code == 0);
    long n1 = csv_rows(plotdir / "energy.csv");
    long n2 = csv_rows(plotdir / "boundary.csv");
    long n3 = csv_rows(plotdir / "path3d.csv");
    CHECK(n1 == csv_rows(simdir / "trajectory.csv"));
    CHECK(n1 == n2);
    CHECK(n1 == n3);

    // the unforced pendulum released inside dissipates: energy non-increasing
    // (checked on the emitted file)
    {
        std::istringstream in(read_file(plotdir / "energy.csv"));
        std::string line;
        std::getline(in, line);  // header
        double prev = -1.0;
        bool first = true;
        while (std::getline(in, line)) {
            double t, e;
            REQUIRE(std::sscanf(line.c_str(), "%lg,%lg", &t, &e) == 2);
            if (!first) CHECK(e <= prev + 1e-9);
            prev = e;
            first = false;
        }
    }

    // header-only input: usage error
    fs::path empty = work_dir() / "empty.csv";
    atomic_write_file(empty, "t,qx,qy,qz,px,py,pz,kinetic_energy,b\n");
    CHECK(run_cli("export-plot-data --input " + empty.string()).code == 2);

    // malformed input
    fs::path mal = work_dir() / "mal.csv";
    atomic_write_file(mal, "t,qx,qy,qz,px,py,pz,kinetic_energy,b\n1,2,3\n");
    CHECK(run_cli("export-plot-data --input " + mal.string()).code == 2);

    CHECK(run_cli("export-plot-data --input /no/such.csv").code == 2);
}
