// SPDX-License-Identifier: Apache-2.0
// smp-adjoint <forward|verify|optimize|bench> --config <path> [--workers N] [--paranoid] [--out DIR]
//
// Exit codes: 0 ok, 1 configuration, 2 solver, 3 verification gate, 4 optimizer.

#include <CLI11.hpp>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <memory>

#include "smp/adjoint.hpp"
#include "smp/fd_oracle.hpp"
#include "smp/io.hpp"
#include "smp/optimize.hpp"
#include "smp/problem.hpp"

namespace {

using namespace smp;

enum Exit { kOk = 0, kConfig = 1, kSolver = 2, kGate = 3, kOptimizer = 4 };

std::string join(const std::string& dir, const std::string& name) { return (std::filesystem::path(dir) / name).string(); }

std::string sensitivity_csv(const std::vector<double>& s)
{
    CsvWriter csv({"element", "sensitivity"});
    for (std::size_t e = 0; e < s.size(); ++e) csv.row({std::to_string(e), format_double(s[e])});
    return csv.str();
}

int run_forward(const Problem& pb, spdlog::logger& log)
{
    const auto trace = run_cycle<double>(pb.mesh, pb.rho, pb.schedule, pb.params, pb.solver);
    CsvWriter csv({"step", "phase", "dt", "T", "load_scale", "objective_dof_value", "residual_norm", "load_norm",
                   "u_norm"});
    for (int s = 0; s < trace.num_steps(); ++s) {
        const auto& st = trace.steps[s];
        csv.row({std::to_string(s), st.schedule.phase, format_double(st.schedule.dt), format_double(st.schedule.T),
                 format_double(st.schedule.load_scale), format_double(st.u[pb.objective.dof]),
                 format_double(st.residual_norm), format_double(st.load_norm), format_double(st.u.norm())});
        write_text(join(pb.out_dir, "step_" + std::to_string(s) + ".vtk"),
                   vtk_legacy(pb.mesh, {{"rho", pb.rho}}, {{"displacement", st.u}}, "smp-adjoint step " + std::to_string(s)));
        log.info("step {} ({}): T = {}, |u| = {:.6e}, residual {:.3e} / load {:.3e}", s, st.schedule.phase,
                 st.schedule.T, st.u.norm(), st.residual_norm, st.load_norm);
    }
    write_text(join(pb.out_dir, "trace.csv"), csv.str());
    log.info("objective theta = u[{}] at step {} = {}", pb.objective.dof, pb.objective.step,
             format_double(objective(trace, pb.objective.dof, pb.objective.step)));
    return kOk;
}

int run_verify(const Problem& pb, int workers, spdlog::logger& log)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = adjoint_sensitivity(pb, pb.rho);
    const auto lag = lagrangian_check(res.adjoint, res.trace, pb.objective.dof);
    log.info("theta = {}, Lagrangian gap = {:.3e}, bound = {:.3e}", format_double(res.theta),
             std::abs(lag.lagrangian - lag.theta), lag.bound);
    write_text(join(pb.out_dir, "sensitivity.csv"), sensitivity_csv(res.sensitivity));

    const auto fd_opts = FdOptions::from(pb.verify, workers);
    const auto report = verify_report(pb, pb.rho, res.sensitivity, res.theta, fd_opts, pb.verify.near_zero);
    write_text(join(pb.out_dir, "verify.csv"), report_csv(report));
    const std::string text = report_text(report);
    write_text(join(pb.out_dir, "verify.txt"), text);
    std::fputs(text.c_str(), stdout);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.info("verification: max NE = {:.3e} over {} elements ({} omitted, {} failed), gate {:.1e}, {:.1f} s",
             report.max_ne, report.evaluated(), report.omitted(), report.failed(), pb.verify.gate, secs);
    if (!report.passes(pb.verify.gate)) {
        log.error("verification gate failed");
        return kGate;
    }
    return kOk;
}

int run_optimize(const Problem& pb, bool paranoid, spdlog::logger& log)
{
    OptimizeControl control;
    control.max_iters = pb.optimize.max_iters;
    control.tol = pb.optimize.tol;
    control.paranoid = paranoid;
    control.on_iteration = [&](const OptRecord& r) {
        write_text(join(pb.out_dir, "density_" + std::to_string(r.iteration) + ".vtk"),
                   vtk_legacy(pb.mesh, {{"rho", r.rho}}, {}, "smp-adjoint design " + std::to_string(r.iteration)));
        if (r.spot_elem >= 0) {
            log.info("iter {}: theta = {:.9e}, volume = {:.9f}, change = {:.3e}, FD spot element {} NE = {:.2e}",
                     r.iteration, r.theta, r.volume, r.max_change, r.spot_elem, r.spot_ne);
        } else {
            log.info("iter {}: theta = {:.9e}, volume = {:.9f}, change = {:.3e}", r.iteration, r.theta, r.volume,
                     r.max_change);
        }
    };
    const auto result = optimize_loop(pb, control);
    write_text(join(pb.out_dir, "history.csv"), history_csv(result.history));
    CsvWriter csv({"element", "rho"});
    for (std::size_t e = 0; e < result.rho.size(); ++e) csv.row({std::to_string(e), format_double(result.rho[e])});
    write_text(join(pb.out_dir, "design.csv"), csv.str());
    return kOk;
}

double time_sweep(const ForwardTrace& trace, const Eigen::VectorXd& L, int M, AdjointOptions opts, int repeats,
                  AdjointState* last)
{
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        auto state = adjoint_sweep(trace, L, M, opts);
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        if (last) *last = std::move(state);
    }
    return best;
}

int run_bench(const Problem& pb, int workers, spdlog::logger& log)
{
    CsvWriter csv({"mode", "steps_M", "seconds", "cache_hits", "cache_misses"});
    std::vector<int> memo_steps = pb.bench.steps;
    for (int m = 2 * pb.bench.steps.back(); m <= pb.bench.memoized_max_steps; m *= 2) memo_steps.push_back(m);
    const Eigen::VectorXd L = objective_selector(pb.mesh, pb.objective.dof);

    auto trace_for = [&](int M) {
        return run_cycle<double>(pb.mesh, pb.rho, pb.schedule.cycled(M + 1), pb.params, pb.solver);
    };
    if (pb.bench.recursive) {
        for (int M : pb.bench.steps) {
            if (M > pb.adjoint.recursion_cap) {
                log.warn("recursive M = {} skipped (recursion cap {})", M, pb.adjoint.recursion_cap);
                continue;
            }
            const auto trace = trace_for(M);
            AdjointOptions opts = pb.adjoint;
            opts.mode = AdjointOptions::Mode::recursive;
            opts.workers = workers;
            const double t = time_sweep(trace, L, M, opts, pb.bench.repeats, nullptr);
            csv.row({"recursive", std::to_string(M), format_double(t), "0", "0"});
            log.info("recursive M = {}: {:.6f} s", M, t);
        }
    }
    if (pb.bench.memoized) {
        for (int M : memo_steps) {
            const auto trace = trace_for(M);
            AdjointOptions opts = pb.adjoint;
            opts.mode = AdjointOptions::Mode::memoized;
            opts.workers = workers;
            AdjointState state;
            const double t = time_sweep(trace, L, M, opts, pb.bench.repeats, &state);
            csv.row({"memoized", std::to_string(M), format_double(t), std::to_string(state.cache_hits),
                     std::to_string(state.cache_misses)});
            log.info("memoized M = {}: {:.6f} s", M, t);
        }
    }
    write_text(join(pb.out_dir, "bench.csv"), csv.str());
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Transient adjoint sensitivity engine for shape-memory polymer topology optimization"};
    std::string mode;
    std::string config_path;
    int workers = 0;
    bool paranoid = false;
    std::string out_dir;
    double corrupt_coupling = 1.0;
    app.add_option("mode", mode, "forward | verify | optimize | bench")
        ->required()
        ->check(CLI::IsMember({"forward", "verify", "optimize", "bench"}));
    app.add_option("--config", config_path, "JSON run configuration")->required();
    app.add_option("--workers", workers, "element-parallel worker count (overrides solver.workers)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--paranoid", paranoid, "FD spot check of every optimizer iteration");
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_option("--corrupt-coupling", corrupt_coupling, "test hook: scale every adjoint coupling block")
        ->group("");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfig;
    }

    Problem pb;
    try {
        pb = parse_config(config_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    }
    if (workers > 0) {
        pb.solver.workers = workers;
        pb.adjoint.workers = workers;
    }
    if (!out_dir.empty()) pb.out_dir = out_dir;
    pb.adjoint.coupling_scale = corrupt_coupling;

    std::shared_ptr<spdlog::logger> log;
    try {
        std::filesystem::create_directories(pb.out_dir);
        auto console = std::make_shared<spdlog::sinks::stderr_sink_mt>();
        auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>(join(pb.out_dir, "log.txt"), true);
        log = std::make_shared<spdlog::logger>("smp", spdlog::sinks_init_list{console, file});
        log->set_pattern("[%l] %v");
    } catch (const std::exception& e) {
        std::fprintf(stderr, "cannot open output directory %s: %s\n", pb.out_dir.c_str(), e.what());
        return kConfig;
    }
    log->info("mode {} config {} workers {}", mode, config_path, pb.solver.workers);
    for (const auto& d : pb.defaults_applied) log->info("default: {}", d);
    if (corrupt_coupling != 1.0) log->warn("coupling blocks scaled by {} (test hook)", corrupt_coupling);

    try {
        int rc = kOk;
        if (mode == "forward") rc = run_forward(pb, *log);
        if (mode == "verify") rc = run_verify(pb, pb.solver.workers, *log);
        if (mode == "optimize") rc = run_optimize(pb, paranoid, *log);
        if (mode == "bench") rc = run_bench(pb, pb.solver.workers, *log);
        log->flush();
        return rc;
    } catch (const ConfigError& e) {
        log->error("config error: {}", e.what());
        return kConfig;
    } catch (const OptimizerError& e) {
        log->error("optimizer error: {}", e.what());
        return kOptimizer;
    } catch (const std::exception& e) {
        log->error("solver error: {}", e.what());
        return kSolver;
    }
}
