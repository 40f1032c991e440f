// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <thread>

#include "coupling_checks.hpp"
#include "derivative_checks.hpp"
#include "forward_checks.hpp"
#include "smp/fd_oracle.hpp"
#include "smp/io.hpp"
#include "smp/optimize.hpp"
#include "support.hpp"

using namespace smp;
using namespace smp::test;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int parallel_workers() { return static_cast<int>(std::clamp(std::thread::hardware_concurrency(), 1u, 8u)); }

// Shared preset sensitivity, computed once.
struct PresetRun {
    Problem pb;
    SensitivityResult res;
};

const PresetRun& preset_run()
{
    static const PresetRun run = [] {
        PresetRun r;
        r.pb = parse_config(preset("verify45.json"));
        r.res = adjoint_sensitivity(r.pb, r.pb.rho);
        return r;
    }();
    return run;
}

Outcome adjoint_fd_gate()
{
    const auto& run = preset_run();
    const auto t0 = std::chrono::steady_clock::now();
    const auto opts = FdOptions::from(run.pb.verify, parallel_workers());
    const auto rep = verify_report(run.pb, run.pb.rho, run.res.sensitivity, run.res.theta, opts, run.pb.verify.near_zero);
    Outcome o;
    o.pass = rep.passes(run.pb.verify.gate) && rep.evaluated() > 0 && run.pb.verify.h == 1e-6 &&
             run.pb.verify.scheme == FdScheme::central;
    o.detail = "max NE " + fmt("%.3e", rep.max_ne) + " over " + std::to_string(rep.evaluated()) + " elements (" +
               std::to_string(rep.omitted()) + " omitted, " + std::to_string(rep.failed()) + " failed), gate " +
               fmt("%.0e", run.pb.verify.gate) + ", " + fmt("%.1f", seconds_since(t0)) + " s";
    return o;
}

Outcome sign_pattern()
{
    const auto& run = preset_run();
    const auto& mesh = run.pb.mesh;
    const auto& s = run.res.sensitivity;
    double s_max = 0;
    for (double v : s) s_max = std::max(s_max, std::abs(v));
    int passing = 0, interior_passing = 0;
    std::string misses;
    for (int ix = 0; ix < mesh.nx; ++ix) {
        const double bottom = s[mesh.element_id(ix, 0)];
        const double mid = s[mesh.element_id(ix, 1)];
        const double top = s[mesh.element_id(ix, 2)];
        const bool ok = std::abs(mid) < 1e-3 * s_max && top * bottom < 0;
        if (ok) {
            ++passing;
            if (ix > 0 && ix < mesh.nx - 1) ++interior_passing;
        } else {
            misses += (misses.empty() ? "" : ",") + std::to_string(ix + 1);
        }
    }
    Outcome o;
    o.pass = mesh.ny == 3 && passing >= 12 && interior_passing >= 12;
    o.detail = std::to_string(passing) + "/" + std::to_string(mesh.nx) + " columns, " +
               std::to_string(interior_passing) + "/" + std::to_string(mesh.nx - 2) + " interior" +
               (misses.empty() ? "" : "; failing columns " + misses);
    return o;
}

double time_sweep(const ForwardTrace& trace, const Eigen::VectorXd& L, int M, AdjointOptions::Mode mode)
{
    AdjointOptions opts;
    opts.mode = mode;
    opts.recursion_cap = std::max(M, 10);
    double best = INFINITY;
    for (int rep = 0; rep < 3; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto st = adjoint_sweep(trace, L, M, opts);
        best = std::min(best, seconds_since(t0));
        if (st.sweep_index != 0) return NAN;
    }
    return best;
}

Outcome recursion_equals_memoization()
{
    std::mt19937 rng(20240611);
    double worst = 0;
    long pairs = 0;
    for (int t = 0; t < 20; ++t) {
        const ForwardTrace trace = random_trace(rng, 9, 50);  // up to M = 8
        const auto cmp = compare_coupling_modes(trace);
        worst = std::max(worst, cmp.worst);
        pairs += cmp.pairs;
    }

    // Cost: fit log t = a + b M to the depth-first sweep and extrapolate.
    const auto& run = preset_run();
    const Eigen::VectorXd L = objective_selector(run.pb.mesh, run.pb.objective.dof);
    auto trace_for = [&](int M) {
        return run_cycle<double>(run.pb.mesh, run.pb.rho, run.pb.schedule.cycled(M + 1), run.pb.params);
    };
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int fit[] = {2, 4, 6, 8};
    bool increasing = true;
    double last = 0;
    for (int M : fit) {
        const double t = time_sweep(trace_for(M), L, M, AdjointOptions::Mode::recursive);
        increasing = increasing && t > last;
        last = t;
        const double y = std::log(t);
        sx += M;
        sy += y;
        sxx += M * M;
        sxy += M * y;
    }
    const double n = 4;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    const double extrapolated = std::exp(intercept + slope * 32);
    const double memo32 = time_sweep(trace_for(32), L, 32, AdjointOptions::Mode::memoized);
    const double ratio = memo32 / extrapolated;

    Outcome o;
    o.pass = worst <= 1e-12 && pairs > 0 && increasing && ratio < 0.05;
    o.detail = "worst rel diff " + fmt("%.2e", worst) + " over " + std::to_string(pairs) + " pairs; memoized M=32 " +
               fmt("%.4f", memo32) + " s vs extrapolated depth-first " + fmt("%.3e", extrapolated) + " s (ratio " +
               fmt("%.2e", ratio) + "), depth-first times " +
               (increasing ? "strictly increasing" : "NOT increasing") + " in M";
    return o;
}

Outcome derivative_suite()
{
    std::mt19937 rng(77);
    CheckResult blocks, rho;
    for (int draw = 0; draw < 100; ++draw) {
        blocks.merge(check_derivative_blocks(rng));
        rho.merge(check_rho_derivatives(rng));
    }
    Outcome o;
    o.pass = blocks.worst < 1e-6 && rho.worst < 1e-6;
    o.detail = "100 draws; worst block " + blocks.where + " " + fmt("%.2e", blocks.worst) +
               ", worst design derivative " + rho.where + " " + fmt("%.2e", rho.worst) + ", tol 1e-6";
    return o;
}

Outcome lagrangian_identity()
{
    const auto& run = preset_run();
    const auto lc = lagrangian_check(run.res.adjoint, run.res.trace, run.pb.objective.dof);
    const double gap = std::abs(lc.lagrangian - lc.theta);
    Outcome o;
    o.pass = gap <= lc.bound && lc.bound < 1e-8 * std::abs(lc.theta);
    o.detail = "|L - theta| " + fmt("%.3e", gap) + " <= bound " + fmt("%.3e", lc.bound) + " < " +
               fmt("%.3e", 1e-8 * std::abs(lc.theta));
    return o;
}

Outcome determinism()
{
    std::set<std::string> sums;
    for (int repeat = 0; repeat < 2; ++repeat) {
        for (int w : {1, 2, 4, 8}) {
            Problem pb = parse_config(preset("verify45.json"));
            pb.solver.workers = w;
            pb.adjoint.workers = w;
            const auto res = adjoint_sensitivity(pb, pb.rho);
            CsvWriter csv({"element", "sensitivity"});
            for (std::size_t e = 0; e < res.sensitivity.size(); ++e)
                csv.row({std::to_string(e), format_double(res.sensitivity[e])});
            sums.insert(checksum(csv.str()));
        }
    }
    Outcome o;
    o.pass = sums.size() == 1;
    o.detail = std::to_string(sums.size()) + " distinct checksum(s) over workers 1,2,4,8 x 2 runs: " + *sums.begin();
    return o;
}

Outcome forward_sanity()
{
    const double u0 = zero_load_displacement(1);
    const double u0p = zero_load_displacement(4);
    const double bar = bar_extension_error();
    Outcome o;
    o.pass = u0 <= 1e-14 && u0p <= 1e-14 && bar < 1e-6;
    o.detail = "zero-load max|u| " + fmt("%.1e", std::max(u0, u0p)) + ", bar extension rel err " + fmt("%.2e", bar);
    return o;
}

Outcome optimizer_invariants()
{
    const Problem pb = parse_config(preset("verify45.json"));
    OptimizeControl ctl;
    ctl.max_iters = 5;
    ctl.tol = 0;  // run all five iterations
    ctl.paranoid = true;
    const auto res = optimize_loop(pb, ctl);
    bool ok = res.history.size() == 5;
    double worst_ne = 0, worst_volume = -INFINITY;
    int checked = 0;
    for (const auto& r : res.history) {
        for (double v : r.rho) ok = ok && v >= pb.params.rho_min && v <= 1.0;
        ok = ok && r.volume <= pb.optimize.volume_fraction + 1e-9 && std::abs(mean(r.rho) - r.volume) < 1e-15;
        worst_volume = std::max(worst_volume, r.volume);
        if (r.spot_elem >= 0) {
            ++checked;
            worst_ne = std::max(worst_ne, r.spot_ne);
        }
    }
    ok = ok && checked == 5 && worst_ne < 1e-3;
    Outcome o;
    o.pass = ok;
    o.detail = std::to_string(res.history.size()) + " iterations, max volume " + fmt("%.12f", worst_volume) +
               ", paranoid checks " + std::to_string(checked) + ", worst spot NE " + fmt("%.2e", worst_ne);
    return o;
}

} // namespace

int main()
{
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"adjoint-vs-fd-gate", adjoint_fd_gate},
        {"sensitivity-sign-pattern", sign_pattern},
        {"recursive-equals-memoized", recursion_equals_memoization},
        {"derivative-block-suite", derivative_suite},
        {"lagrangian-identity", lagrangian_identity},
        {"determinism", determinism},
        {"forward-sanity", forward_sanity},
        {"optimizer-invariants", optimizer_invariants},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failures;
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
