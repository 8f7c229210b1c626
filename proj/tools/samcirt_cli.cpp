// samcirt: simulate, partition, reconstruct, register, check, export-slice.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "samcirt/samcirt.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace samcirt;

#ifndef SAMCIRT_VERSION
#define SAMCIRT_VERSION "0.0.0"
#endif

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
};

struct Manifest {
    std::string command;
    json config = json::object();
    json inputs = json::array();
    json outputs = json::array();
    std::uint64_t seed = 0;

    void write(const fs::path& path, double seconds) const {
        for (const auto& o : outputs)
            check(fs::exists(o.get<std::string>()), "cli", "missing output " + o.get<std::string>());
        json j{{"command", command},
               {"config", config},
               {"inputs", inputs},
               {"outputs", outputs},
               {"seed", seed},
               {"version", SAMCIRT_VERSION},
               {"threads", parallel::thread_count()},
               {"wall_seconds", seconds}};
        io::write_json(path, j);
    }
};

/// `path` may name a directory holding projections.{raw,json} or a base
/// path with or without extension.
fs::path stack_base(const fs::path& path) {
    if (fs::is_directory(path)) return path / "projections";
    if (path.extension() == ".json" || path.extension() == ".raw") return fs::path(path).replace_extension();
    return path;
}

fs::path volume_base(const fs::path& path) {
    if (path.extension() == ".json" || path.extension() == ".raw") return fs::path(path).replace_extension();
    return path;
}

/// Manifest location for a command whose output is a single file.
fs::path sibling_manifest(const fs::path& out) {
    return out.parent_path() / (out.stem().string() + ".manifest.json");
}

void add_volume_outputs(Manifest& m, const fs::path& base) {
    m.outputs.push_back(io::with_ext(base, ".raw").string());
    m.outputs.push_back(io::with_ext(base, ".json").string());
}

Grid grid_from_dims(const std::vector<std::size_t>& dims) {
    check(dims.size() == 2 || dims.size() == 3, "cli", "--dims takes 2 or 3 extents");
    return dims.size() == 2 ? Grid::make_2d(dims[0], dims[1]) : Grid::make_3d(dims[0], dims[1], dims[2]);
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
    std::string scenario, out;
};

int run_simulate(const SimulateArgs& a, const Globals& g) {
    const auto t0 = std::chrono::steady_clock::now();
    Scenario sc = scenario_from_json(io::read_json(a.scenario));
    if (g.seed) sc.seed = sc.phantom.seed = *g.seed;
    fs::create_directories(a.out);
    const fs::path out(a.out);

    const Volume phantom = make_phantom(sc.phantom);
    const ProjStack b = simulate_scan(phantom, sc.scan, sc.schedule, sc.seed);
    io::write_projstack(out / "projections", b);
    io::write_volume(out / "phantom", phantom);
    io::write_json(out / "motion.json", io::trajectory_to_json(sc.schedule.params));

    Manifest m{"simulate"};
    m.seed = sc.seed;
    m.config = io::read_json(a.scenario);
    m.inputs.push_back(a.scenario);
    add_volume_outputs(m, out / "projections");
    add_volume_outputs(m, out / "phantom");
    m.outputs.push_back((out / "motion.json").string());
    m.write(out / "manifest.json", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << "simulated " << b.geometry.n_angles() << " projections in " << b.n_subscans() << " subscans -> "
              << a.out << "\n";
    return 0;
}

// ---- partition --------------------------------------------------------------

struct PartitionArgs {
    std::string data, out;
    double lambda = 100.0;
    std::optional<double> epsilon;
    double window = 1.5, k1 = 0.01, k2 = 0.03;
};

int run_partition(const PartitionArgs& a, const Globals& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path base = stack_base(a.data);
    const ProjStack b = io::read_projstack(base);
    check(b.geometry.n_angles() >= 2, "cli", "partition needs at least two projections");
    const auto [lo, hi] = std::minmax_element(b.data.data.begin(), b.data.data.end());
    SsimParams prm{a.window, a.k1, a.k2, *hi - *lo > 0.0 ? *hi - *lo : 1.0};
    const SubscanPlan plan = partition_exact(adjacent_ssim(b.data, prm), a.lambda, a.epsilon);

    json j = io::to_json(plan);
    j["subscan_bounds"] = io::ranges_to_json(plan_to_subscans(plan));
    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    io::write_json(out, j);

    Manifest m{"partition"};
    m.seed = g.seed.value_or(0);
    m.config = {{"lambda", a.lambda}, {"window", a.window}, {"k1", a.k1}, {"k2", a.k2}};
    if (a.epsilon) m.config["epsilon"] = *a.epsilon;
    m.inputs.push_back(io::with_ext(base, ".json").string());
    m.outputs.push_back(out.string());
    m.write(sibling_manifest(out), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << "partition: " << plan.n_segments() << " segments, objective " << plan.objective_value << "\n";
    return 0;
}

// ---- reconstruct --------------------------------------------------------------

struct ReconstructArgs {
    std::string data, out, model = "rigid", kernel = "cubic";
    std::optional<std::string> plan, known_motion;
    std::vector<std::size_t> dims;
    std::size_t iters = 10, init_iters = 20;
    double c_x = 1.0, c_theta = 1e-3, c_t = 0.1, c_scale = 0.01;
    std::optional<double> c_p, clamp_x;
    bool static_only = false, free_first = false;
};

int run_reconstruct(const ReconstructArgs& a, const Globals& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path base = stack_base(a.data);
    ProjStack b = io::read_projstack(base);
    Manifest m{"reconstruct"};
    m.seed = g.seed.value_or(0);
    m.inputs.push_back(io::with_ext(base, ".json").string());

    if (a.plan) {
        const SubscanPlan plan = io::plan_from_json(io::read_json(*a.plan));
        check(plan.s.size() + 1 == b.geometry.n_angles(), "cli", "plan does not match the number of projections");
        b.subscan_bounds = plan_to_subscans(plan);
        m.inputs.push_back(*a.plan);
    }

    Grid grid;
    if (!a.dims.empty()) {
        grid = grid_from_dims(a.dims);
    } else {
        const fs::path ph = base.parent_path() / "phantom.json";
        check(fs::exists(ph), "cli", "--dims is required when the data has no phantom.json sidecar");
        grid = io::grid_from_json(io::read_json(ph));
    }

    OptConfig cfg;
    cfg.iters = a.iters;
    cfg.init_iters = a.init_iters;
    cfg.coefficients = {a.c_x, a.c_theta, a.c_t, a.c_scale};
    cfg.c_p = a.c_p;
    cfg.clamp_x = a.clamp_x;
    cfg.fix_first_subscan = !a.free_first;
    MotionModel model{parse_motion_kind(a.model), grid.ndim};
    if (a.known_motion) {
        auto traj = io::trajectory_from_json(io::read_json(*a.known_motion));
        check(!traj.empty(), "cli", "known motion trajectory is empty");
        model = traj.front().model;
        cfg.initial_p = std::move(traj);
        cfg.estimate_motion = false;
        m.inputs.push_back(*a.known_motion);
    }
    const ScanModel scan = ScanModel::from_stack(b, model, parse_kernel(a.kernel));

    const RunResult r = a.static_only ? run_static_gmbb(scan, b, grid, a.iters, a.c_x, cfg.bb_clamp, a.clamp_x)
                                      : samcirt_run(scan, b, grid, cfg);

    fs::create_directories(a.out);
    const fs::path out(a.out);
    io::write_volume(out / "volume", r.state.x);
    io::write_json(out / "motion.json", io::trajectory_to_json(r.state.p));
    io::write_atomic(out / "history.csv", io::history_csv(r.history, scan.n_subscans()));
    json summary{{"initial_objective", r.history.objective.empty() ? 0.0 : r.history.objective.front()},
                 {"final_objective", r.history.final_objective},
                 {"projection_distances", r.history.final_distances},
                 {"iterations", r.history.size()},
                 {"subscan_bounds", io::ranges_to_json(scan.subscan_bounds)}};
    io::write_json(out / "summary.json", summary);

    m.config = {{"model", std::string(to_string(model.kind))},
                {"kernel", a.kernel},
                {"iters", a.iters},
                {"init_iters", a.init_iters},
                {"c_x", a.c_x},
                {"c_theta", a.c_theta},
                {"c_t", a.c_t},
                {"c_scale", a.c_scale},
                {"static", a.static_only},
                {"known_motion", bool(a.known_motion)},
                {"fix_first_subscan", cfg.fix_first_subscan},
                {"dims", std::vector<std::size_t>(grid.dims.begin(), grid.dims.begin() + std::ptrdiff_t(grid.ndim))}};
    if (a.c_p) m.config["c_p"] = *a.c_p;
    if (a.clamp_x) m.config["clamp_x"] = *a.clamp_x;
    add_volume_outputs(m, out / "volume");
    for (const char* f : {"motion.json", "history.csv", "summary.json"}) m.outputs.push_back((out / f).string());
    m.write(out / "manifest.json", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << "reconstruct: objective " << summary["initial_objective"].get<double>() << " -> "
              << r.history.final_objective << " after " << r.history.size() << " iterations\n";
    return 0;
}

// ---- register -------------------------------------------------------------------

struct RegisterArgs {
    std::string source, target, out, model = "scaling", kernel = "cubic";
    std::size_t iters = 100;
};

int run_register(const RegisterArgs& a, const Globals& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const Volume x1 = io::read_volume(volume_base(a.source));
    const Volume x2 = io::read_volume(volume_base(a.target));
    RegistrationOptions opt;
    opt.iters = a.iters;
    opt.kernel = parse_kernel(a.kernel);
    const RegistrationResult r = register_affine(x1, x2, MotionModel{parse_motion_kind(a.model), x1.grid.ndim}, opt);

    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    io::write_json(out, json{{"params", io::to_json(r.params)},
                             {"initial_objective", r.initial_objective},
                             {"final_objective", r.final_objective}});
    Manifest m{"register"};
    m.seed = g.seed.value_or(0);
    m.config = {{"model", a.model}, {"kernel", a.kernel}, {"iters", a.iters}};
    m.inputs = {a.source, a.target};
    m.outputs.push_back(out.string());
    m.write(sibling_manifest(out), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << "register:";
    for (double v : r.params.raw) std::cout << " " << v;
    std::cout << " (objective " << r.initial_objective << " -> " << r.final_objective << ")\n";
    return 0;
}

// ---- check ------------------------------------------------------------------------

int run_check(const std::string& suite, const std::optional<std::string>& out, const Globals& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = g.seed.value_or(0);
    std::vector<verify::CheckResult> results;
    if (suite == "adjoint") results = verify::adjoint_checks(seed);
    else if (suite == "gradient") results = verify::gradient_checks(seed);
    else results = verify::partition_checks(seed);

    bool ok = true;
    json report = json::array();
    for (const auto& r : results) {
        ok = ok && r.pass();
        std::cout << (r.pass() ? "PASS " : "FAIL ") << r.name << "  value=" << r.value << "  tol=" << r.tolerance
                  << "\n";
        report.push_back({{"name", r.name}, {"value", r.value}, {"tolerance", r.tolerance}, {"pass", r.pass()}});
    }
    if (out) {
        const fs::path p(*out);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        io::write_json(p, report);
        Manifest m{"check " + suite};
        m.seed = seed;
        m.outputs.push_back(p.string());
        m.write(sibling_manifest(p), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return ok ? 0 : 1;
}

// ---- export-slice -------------------------------------------------------------------

struct ExportArgs {
    std::string volume, out, axis = "z", format;
    std::optional<std::size_t> index;
    std::optional<double> window, level;
};

int run_export(const ExportArgs& a, const Globals& g) {
    const auto t0 = std::chrono::steady_clock::now();
    const Volume v = io::read_volume(volume_base(a.volume));
    const Grid& gr = v.grid;
    const std::size_t ax = a.axis == "x" ? 0 : a.axis == "y" ? 1 : 2;
    check(a.axis == "x" || a.axis == "y" || a.axis == "z", "cli", "--axis must be x, y or z");
    const std::size_t depth = gr.dims[ax];
    const std::size_t idx = a.index.value_or(depth / 2);
    check(idx < depth, "cli", "slice index out of range");

    // Slice axes (u fastest): z -> (x, y), y -> (x, z), x -> (y, z).
    const std::size_t ua = ax == 0 ? 1 : 0, va = ax == 2 ? 1 : 2;
    const std::size_t w = gr.dims[ua], h = gr.dims[va];
    std::vector<double> img(w * h);
    for (std::size_t vv = 0; vv < h; ++vv)
        for (std::size_t uu = 0; uu < w; ++uu) {
            std::array<std::size_t, 3> c{0, 0, 0};
            c[ax] = idx;
            c[ua] = uu;
            c[va] = vv;
            img[vv * w + uu] = v.at(c[0], c[1], c[2]);
        }

    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    const std::string format = !a.format.empty() ? a.format : out.extension() == ".pgm" ? "pgm" : "raw";
    if (format == "pgm") {
        const auto [lo, hi] = std::minmax_element(img.begin(), img.end());
        const double window = a.window.value_or(std::max(*hi - *lo, 1e-12));
        const double level = a.level.value_or(0.5 * (*hi + *lo));
        check(window > 0.0, "cli", "--window must be > 0");
        std::ostringstream os;
        os << "P5\n" << w << " " << h << "\n255\n";
        for (std::size_t vv = h; vv-- > 0;)
            for (std::size_t uu = 0; uu < w; ++uu) {
                const double t = (img[vv * w + uu] - (level - 0.5 * window)) / window;
                os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)))));
            }
        io::write_atomic(out, os.str());
    } else {
        check(format == "raw", "cli", "--format must be pgm or raw");
        io::write_atomic(out, io::encode_f32(img));
    }
    Manifest m{"export-slice"};
    m.seed = g.seed.value_or(0);
    m.config = {{"axis", a.axis}, {"index", idx}, {"format", format}, {"width", w}, {"height", h}};
    m.inputs.push_back(a.volume);
    m.outputs.push_back(out.string());
    m.write(sibling_manifest(out), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"samcirt: simultaneous motion estimation and reconstruction for dynamic CT"};
    app.set_version_flag("--version", std::string(SAMCIRT_VERSION));
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Seed for all random draws");
    app.add_option("--threads", g.threads, "Worker threads (default: SAMCIRT_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Simulate a dynamic scan from a scenario file");
    c_sim->add_option("--scenario", sim.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
    c_sim->add_option("--out", sim.out, "Output directory")->required();

    PartitionArgs part;
    auto* c_part = app.add_subcommand("partition", "Choose subscans from adjacent-projection SSIM");
    c_part->add_option("--data", part.data, "Projection directory or base path")->required();
    c_part->add_option("--lambda", part.lambda, "Variance weight")->check(CLI::PositiveNumber);
    c_part->add_option("--epsilon", part.epsilon, "Max SSIM spread within a segment")->check(CLI::PositiveNumber);
    c_part->add_option("--window", part.window, "SSIM Gaussian window std")->check(CLI::PositiveNumber);
    c_part->add_option("--k1", part.k1, "SSIM k1")->check(CLI::PositiveNumber);
    c_part->add_option("--k2", part.k2, "SSIM k2")->check(CLI::PositiveNumber);
    c_part->add_option("--out", part.out, "Plan JSON")->required();

    ReconstructArgs rec;
    auto* c_rec = app.add_subcommand("reconstruct", "Joint reconstruction and motion estimation");
    c_rec->add_option("--data", rec.data, "Projection directory or base path")->required();
    c_rec->add_option("--out", rec.out, "Output directory")->required();
    c_rec->add_option("--model", rec.model, "Motion model")
        ->check(CLI::IsMember({"general", "affine", "rigid", "scaling", "translation"}));
    c_rec->add_option("--kernel", rec.kernel, "Interpolation kernel")->check(CLI::IsMember({"linear", "cubic"}));
    c_rec->add_option("--iters", rec.iters, "Joint iterations")->check(CLI::PositiveNumber);
    c_rec->add_option("--init-iters", rec.init_iters, "Static iterations for the initial image");
    c_rec->add_option("--c-x", rec.c_x, "Image step coefficient")->check(CLI::PositiveNumber);
    c_rec->add_option("--c-theta", rec.c_theta, "Rotation step coefficient")->check(CLI::PositiveNumber);
    c_rec->add_option("--c-t", rec.c_t, "Translation step coefficient")->check(CLI::PositiveNumber);
    c_rec->add_option("--c-scale", rec.c_scale, "Scale / matrix step coefficient")->check(CLI::PositiveNumber);
    c_rec->add_option("--c-p", rec.c_p, "Single coefficient for all motion groups")->check(CLI::PositiveNumber);
    c_rec->add_option("--clamp-x", rec.clamp_x, "Clamp the image to [0, v]")->check(CLI::PositiveNumber);
    c_rec->add_option("--plan", rec.plan, "Subscan plan from `partition`")->check(CLI::ExistingFile);
    c_rec->add_option("--known-motion", rec.known_motion, "Fixed motion trajectory JSON")->check(CLI::ExistingFile);
    c_rec->add_option("--dims", rec.dims, "Reconstruction grid extents")->expected(2, 3);
    c_rec->add_flag("--static", rec.static_only, "Reconstruct without motion correction");
    c_rec->add_flag("--free-first", rec.free_first, "Also estimate the first subscan's motion");

    RegisterArgs reg;
    auto* c_reg = app.add_subcommand("register", "Affine registration of two volumes");
    c_reg->add_option("--source", reg.source, "Volume to be warped")->required();
    c_reg->add_option("--target", reg.target, "Reference volume")->required();
    c_reg->add_option("--model", reg.model, "Motion model")
        ->check(CLI::IsMember({"general", "affine", "rigid", "scaling", "translation"}));
    c_reg->add_option("--kernel", reg.kernel, "Interpolation kernel")->check(CLI::IsMember({"linear", "cubic"}));
    c_reg->add_option("--iters", reg.iters, "Iterations")->check(CLI::PositiveNumber);
    c_reg->add_option("--out", reg.out, "Result JSON")->required();

    std::string suite;
    std::optional<std::string> check_out;
    auto* c_check = app.add_subcommand("check", "Run built-in verification suites");
    c_check->add_option("suite", suite, "adjoint | gradient | partition")
        ->required()
        ->check(CLI::IsMember({"adjoint", "gradient", "partition"}));
    c_check->add_option("--out", check_out, "Report JSON");

    ExportArgs ex;
    auto* c_ex = app.add_subcommand("export-slice", "Write one slice as PGM or raw float32");
    c_ex->add_option("--volume", ex.volume, "Volume base path")->required();
    c_ex->add_option("--out", ex.out, "Output file")->required();
    c_ex->add_option("--axis", ex.axis, "Slice normal")->check(CLI::IsMember({"x", "y", "z"}));
    c_ex->add_option("--index", ex.index, "Slice index (default: middle)");
    c_ex->add_option("--format", ex.format, "pgm | raw (default: from extension)")
        ->check(CLI::IsMember({"pgm", "raw"}));
    c_ex->add_option("--window", ex.window, "Display window width")->check(CLI::PositiveNumber);
    c_ex->add_option("--level", ex.level, "Display window center");

    CLI11_PARSE(app, argc, argv);
    if (g.threads > 0) parallel::set_thread_count(g.threads);

    try {
        if (*c_sim) return run_simulate(sim, g);
        if (*c_part) return run_partition(part, g);
        if (*c_rec) return run_reconstruct(rec, g);
        if (*c_reg) return run_register(reg, g);
        if (*c_check) return run_check(suite, check_out, g);
        if (*c_ex) return run_export(ex, g);
    } catch (const std::exception& e) {
        std::cerr << "samcirt: error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
