#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "samcirt/samcirt.hpp"

using namespace samcirt;
namespace fs = std::filesystem;

namespace {

const fs::path kCli = SAMCIRT_CLI_PATH;
const fs::path kScenarios = SAMCIRT_SCENARIO_DIR;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("samcirt_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

/// Runs the CLI with `args`; stdout and stderr go to `log`.
int run(const std::string& args, const fs::path& log) {
    const std::string cmd = kCli.string() + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

} // namespace

TEST(Cli, SimulateWritesArtifactsAndManifest) {
    const fs::path d = scratch("simulate");
    ASSERT_EQ(run("simulate --scenario " + (kScenarios / "scaling_2d.json").string() + " --out " + (d / "sim").string(),
                  d / "log"),
              0)
        << slurp(d / "log");
    for (const char* f : {"projections.raw", "projections.json", "phantom.raw", "phantom.json", "motion.json",
                          "manifest.json"})
        EXPECT_TRUE(fs::exists(d / "sim" / f)) << f;
    const auto m = io::read_json(d / "sim" / "manifest.json");
    EXPECT_EQ(m["command"], "simulate");
    EXPECT_EQ(m["seed"], 3);
    EXPECT_TRUE(m.contains("wall_seconds"));
    EXPECT_TRUE(m.contains("version"));
    for (const auto& o : m["outputs"]) EXPECT_TRUE(fs::exists(o.get<std::string>()));
    const ProjStack b = io::read_projstack(d / "sim" / "projections");
    EXPECT_EQ(b.subscan_bounds, (std::vector<IndexRange>{{0, 16}, {16, 17}}));
}

TEST(Cli, KnownMotionRoundTripRecoversImage) {
    const fs::path d = scratch("known");
    ASSERT_EQ(run("simulate --scenario " + (kScenarios / "rigid_2d_known.json").string() + " --out " +
                      (d / "sim").string(),
                  d / "log"),
              0);
    ASSERT_EQ(run("reconstruct --data " + (d / "sim").string() + " --known-motion " + (d / "sim" / "motion.json").string() +
                      " --iters 100 --init-iters 0 --out " + (d / "rec").string(),
                  d / "log"),
              0)
        << slurp(d / "log");
    const Volume truth = io::read_volume(d / "sim" / "phantom");
    const Volume rec = io::read_volume(d / "rec" / "volume");
    EXPECT_LE(norm(subtract(rec.data, truth.data)) / norm(truth.data), 0.02);
}

TEST(Cli, ReconstructWritesHistory) {
    const fs::path d = scratch("history");
    ASSERT_EQ(run("simulate --scenario " + (kScenarios / "rigid_2d_known.json").string() + " --out " +
                      (d / "sim").string(),
                  d / "log"),
              0);
    ASSERT_EQ(run("reconstruct --data " + (d / "sim").string() +
                      " --model rigid --iters 90 --c-x 1 --c-theta 0.001 --c-t 0.1 --out " + (d / "rec").string(),
                  d / "log"),
              0)
        << slurp(d / "log");
    const std::string csv = slurp(d / "rec" / "history.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,objective,gamma_x,gamma_p,p0_0,p0_1,p0_2,p1_0,p1_1,p1_2");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 91);
    const auto summary = io::read_json(d / "rec" / "summary.json");
    EXPECT_LT(summary["final_objective"].get<double>(), summary["initial_objective"].get<double>());
    EXPECT_EQ(io::trajectory_from_json(io::read_json(d / "rec" / "motion.json")).size(), 2u);
}

TEST(Cli, PartitionPlanFeedsReconstruct) {
    const fs::path d = scratch("plan");
    ASSERT_EQ(run("simulate --scenario " + (kScenarios / "events_2d.json").string() + " --out " + (d / "sim").string(),
                  d / "log"),
              0);
    ASSERT_EQ(run("partition --data " + (d / "sim").string() + " --lambda 1000 --out " + (d / "plan.json").string(),
                  d / "log"),
              0)
        << slurp(d / "log");
    const SubscanPlan plan = io::plan_from_json(io::read_json(d / "plan.json"));
    const auto subs = plan_to_subscans(plan);
    std::set<std::size_t> starts;
    for (const auto& r : subs) starts.insert(r.begin);
    EXPECT_TRUE(starts.count(15) || starts.count(16));
    EXPECT_TRUE(starts.count(30) || starts.count(31));
    EXPECT_TRUE(fs::exists(d / "plan.manifest.json"));

    ASSERT_EQ(run("reconstruct --data " + (d / "sim").string() + " --plan " + (d / "plan.json").string() +
                      " --iters 20 --out " + (d / "rec").string(),
                  d / "log"),
              0)
        << slurp(d / "log");
    const auto summary = io::read_json(d / "rec" / "summary.json");
    EXPECT_EQ(io::ranges_from_json(summary["subscan_bounds"]), subs);
}

TEST(Cli, CheckSuitesPass) {
    const fs::path d = scratch("check");
    for (const char* suite : {"adjoint", "gradient", "partition"}) {
        EXPECT_EQ(run(std::string("check ") + suite + " --out " + (d / (std::string(suite) + ".json")).string(), d / "log"),
                  0)
            << suite << "\n"
            << slurp(d / "log");
        EXPECT_EQ(slurp(d / "log").find("FAIL"), std::string::npos);
    }
}

TEST(Cli, RegisterRecoversScaling) {
    const fs::path d = scratch("register");
    const Volume x1 = make_phantom({PhantomKind::gaussian_blobs, Grid::make_3d(24, 24, 24), 2, 1.0, 6});
    const Volume x2 = warp_apply(x1, AffineParams{MotionModel{MotionKind::scaling, 3}, {0.97, 0.93, 1.05}},
                                 InterpKernel::cubic);
    io::write_volume(d / "a", x1);
    io::write_volume(d / "b", x2);
    ASSERT_EQ(run("register --source " + (d / "a").string() + " --target " + (d / "b").string() +
                      " --model scaling --out " + (d / "reg.json").string(),
                  d / "log"),
              0)
        << slurp(d / "log");
    const auto p = io::params_from_json(io::read_json(d / "reg.json")["params"]);
    EXPECT_NEAR(p.raw[0], 0.97, 0.02);
    EXPECT_NEAR(p.raw[1], 0.93, 0.02);
    EXPECT_NEAR(p.raw[2], 1.05, 0.02);
}

TEST(Cli, ExportSliceWritesPgmAndRaw) {
    const fs::path d = scratch("export");
    const Volume v = make_phantom({PhantomKind::shepp_logan, Grid::make_3d(20, 16, 12), 0, 1.0, 0});
    io::write_volume(d / "v", v);
    ASSERT_EQ(run("export-slice --volume " + (d / "v").string() + " --axis z --out " + (d / "s.pgm").string(), d / "log"),
              0)
        << slurp(d / "log");
    const std::string pgm = slurp(d / "s.pgm");
    EXPECT_EQ(pgm.substr(0, 13), "P5\n20 16\n255\n");
    EXPECT_EQ(pgm.size(), 13u + 20 * 16);
    ASSERT_EQ(run("export-slice --volume " + (d / "v").string() + " --axis x --index 3 --out " + (d / "s.raw").string(),
                  d / "log"),
              0);
    EXPECT_EQ(fs::file_size(d / "s.raw"), 16u * 12 * 4);
}

TEST(Cli, FailuresExitNonzeroWithDiagnostic) {
    const fs::path d = scratch("fail");
    EXPECT_NE(run("simulate --bogus-flag", d / "log"), 0);
    EXPECT_NE(run("frobnicate", d / "log"), 0);
    EXPECT_NE(run("reconstruct --data " + (d / "nowhere").string() + " --dims 8 8 --out " + (d / "rec").string(),
                  d / "log"),
              0);
    EXPECT_NE(slurp(d / "log").find("io:"), std::string::npos);
    io::write_atomic(d / "bad.json", R"({"phantom": {"dims": [4, 4]}, "geometry": {"angles": [0]}})");
    EXPECT_NE(run("simulate --scenario " + (d / "bad.json").string() + " --out " + (d / "o").string(), d / "log"), 0);
    EXPECT_NE(slurp(d / "log").find("simulation:"), std::string::npos);
}

TEST(Cli, OutputsIndependentOfThreadCount) {
    const fs::path d = scratch("threads");
    const std::string scen = (kScenarios / "scaling_2d.json").string();
    for (const char* t : {"1", "3"}) {
        const fs::path o = d / t;
        ASSERT_EQ(run(std::string("--threads ") + t + " --seed 17 simulate --scenario " + scen + " --out " +
                          (o / "sim").string(),
                      d / "log"),
                  0);
        ASSERT_EQ(run(std::string("--threads ") + t + " reconstruct --data " + (o / "sim").string() +
                          " --model scaling --iters 15 --out " + (o / "rec").string(),
                      d / "log"),
                  0);
    }
    for (const char* f : {"sim/projections.raw", "sim/phantom.raw", "sim/motion.json", "rec/volume.raw",
                          "rec/motion.json", "rec/history.csv", "rec/summary.json"})
        EXPECT_EQ(slurp(d / "1" / f), slurp(d / "3" / f)) << f;
}
