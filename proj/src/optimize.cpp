// SPDX-License-Identifier: Apache-2.0
#include "smp/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "smp/fd_oracle.hpp"
#include "smp/io.hpp"

namespace smp {

SensitivityFilter::SensitivityFilter(const Mesh& mesh, double r_min)
{
    if (r_min < 1.0) throw ContractError("SensitivityFilter: r_min must be >= 1 element width");
    const int ne = mesh.num_elements();
    const double radius = r_min * mesh.hx;
    const int reach_x = static_cast<int>(std::ceil(radius / mesh.hx));
    const int reach_y = static_cast<int>(std::ceil(radius / mesh.hy));
    neighbors_.resize(static_cast<std::size_t>(ne));
    weight_sum_.assign(static_cast<std::size_t>(ne), 0.0);
    for (int ix = 0; ix < mesh.nx; ++ix) {
        for (int iy = 0; iy < mesh.ny; ++iy) {
            const int e = mesh.element_id(ix, iy);
            const Eigen::Vector2d ce = mesh.centroid(e);
            for (int jx = std::max(0, ix - reach_x); jx <= std::min(mesh.nx - 1, ix + reach_x); ++jx) {
                for (int jy = std::max(0, iy - reach_y); jy <= std::min(mesh.ny - 1, iy + reach_y); ++jy) {
                    const int f = mesh.element_id(jx, jy);
                    const double w = radius - (mesh.centroid(f) - ce).norm();
                    if (w <= 0) continue;
                    neighbors_[e].push_back({f, w});
                    weight_sum_[e] += w;
                }
            }
        }
    }
}

std::vector<double> SensitivityFilter::apply(const std::vector<double>& s) const
{
    if (s.size() != neighbors_.size()) throw ContractError("SensitivityFilter: size mismatch");
    std::vector<double> out(s.size(), 0.0);
    for (std::size_t e = 0; e < s.size(); ++e) {
        double acc = 0;
        for (const auto& n : neighbors_[e]) acc += n.weight * s[n.elem];
        out[e] = acc / weight_sum_[e];
    }
    return out;
}

double mean(const std::vector<double>& v)
{
    double sum = 0;
    for (double x : v) sum += x;
    return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
}

OcResult oc_update(const std::vector<double>& rho, const std::vector<double>& sensitivity, const OcOptions& o)
{
    if (rho.size() != sensitivity.size() || rho.empty()) throw ContractError("oc_update: size mismatch");
    OcResult res;
    double s_max = -INFINITY, s_abs = 0;
    for (double s : sensitivity) {
        if (!std::isfinite(s)) throw OptimizerError("oc_update: non-finite sensitivity");
        s_max = std::max(s_max, s);
        s_abs = std::max(s_abs, std::abs(s));
    }
    if (s_abs == 0) {
        res.rho = rho;
        res.volume = mean(rho);
        return res;
    }
    std::vector<double> s = sensitivity;
    if (s_max >= 0) {
        const double shift = s_max + 1e-9 * s_abs;
        for (double& v : s) v -= shift;
        res.shifted = true;
    }

    auto design = [&](double lambda) {
        std::vector<double> out(rho.size());
        for (std::size_t e = 0; e < rho.size(); ++e) {
            const double lo = std::max(o.rho_min, rho[e] - o.move);
            const double hi = std::min(1.0, rho[e] + o.move);
            const double trial = rho[e] * std::pow(-s[e] / lambda, o.damping);
            out[e] = std::clamp(trial, lo, hi);
        }
        return out;
    };

    // Volume decreases with the multiplier; bracket then bisect.
    double l_hi = 0;
    for (double v : s) l_hi = std::max(l_hi, -v);
    double l_lo = l_hi;
    int guard = 0;
    while (mean(design(l_hi)) > o.volume_fraction) {
        l_hi *= 2;
        if (++guard > o.max_bisections) throw OptimizerError("oc_update: volume target unreachable within move limits");
    }
    guard = 0;
    while (mean(design(l_lo)) <= o.volume_fraction) {
        l_lo *= 0.5;
        if (++guard > o.max_bisections) {
            // Constraint inactive: every element at its upper move limit.
            res.rho = design(l_lo);
            res.volume = mean(res.rho);
            res.multiplier = l_lo;
            return res;
        }
    }
    int it = 0;
    for (; it < o.max_bisections; ++it) {
        const double mid = 0.5 * (l_lo + l_hi);
        if (mean(design(mid)) > o.volume_fraction) {
            l_lo = mid;
        } else {
            l_hi = mid;
        }
        if ((l_hi - l_lo) <= 1e-15 * l_hi) break;
    }
    res.rho = design(l_hi);
    res.volume = mean(res.rho);
    res.multiplier = l_hi;
    res.bisections = it + 1;
    if (!(o.volume_fraction - res.volume <= o.volume_tol)) {
        throw OptimizerError("oc_update: bisection did not converge after " + std::to_string(res.bisections) +
                             " iterations (volume " + format_double(res.volume) + ")");
    }
    return res;
}

OptimizeResult optimize_loop(const Problem& problem, const OptimizeControl& control)
{
    OptimizeResult out;
    out.rho = problem.rho;
    const SensitivityFilter filter(problem.mesh, problem.optimize.r_min);
    OcOptions oc;
    oc.volume_fraction = problem.optimize.volume_fraction;
    oc.move = problem.optimize.move;
    oc.rho_min = problem.params.rho_min;
    std::mt19937 rng(problem.optimize.seed);

    for (int it = 0; it < control.max_iters; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        OptRecord rec;
        rec.iteration = it;
        try {
            const auto sens = adjoint_sensitivity(problem, out.rho);
            rec.theta = sens.theta;
            if (control.paranoid) {
                double s_max = 0;
                for (double v : sens.sensitivity) s_max = std::max(s_max, std::abs(v));
                std::vector<int> candidates;
                for (int e = 0; e < static_cast<int>(sens.sensitivity.size()); ++e) {
                    const double r = out.rho[e];
                    if (std::abs(sens.sensitivity[e]) >= 1e-3 * s_max && r + 1e-5 <= 1.0) candidates.push_back(e);
                }
                const std::uint32_t draw = rng();
                if (!candidates.empty()) {
                    rec.spot_elem = candidates[draw % candidates.size()];
                    FdOptions fd = FdOptions::from(problem.verify, 1);
                    fd.scheme = FdScheme::forward;
                    fd.h = 1e-6;
                    fd.relative_step = false;
                    const double v = fd_sensitivity(problem, out.rho, rec.spot_elem, fd);
                    rec.spot_ne = std::abs((sens.sensitivity[rec.spot_elem] - v) / v);
                    if (!(rec.spot_ne < control.paranoid_gate)) {
                        throw OptimizerError("paranoid FD check failed on element " +
                                             std::to_string(rec.spot_elem) + ": NE = " + format_double(rec.spot_ne));
                    }
                }
            }
            const auto filtered = filter.apply(sens.sensitivity);
            const auto step = oc_update(out.rho, filtered, oc);
            for (std::size_t e = 0; e < out.rho.size(); ++e) {
                rec.max_change = std::max(rec.max_change, std::abs(step.rho[e] - out.rho[e]));
            }
            out.rho = step.rho;
            rec.volume = step.volume;
        } catch (const OptimizerError& e) {
            throw OptimizerError("iteration " + std::to_string(it) + ": " + e.what());
        } catch (const SolverError& e) {
            throw SolverError("iteration " + std::to_string(it) + ": " + e.what());
        }
        rec.rho = out.rho;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.history.push_back(rec);
        if (control.on_iteration) control.on_iteration(out.history.back());
        if (rec.max_change < control.tol) break;
    }
    return out;
}

std::string history_csv(const std::vector<OptRecord>& history, bool with_time)
{
    std::vector<std::string> header{"iteration", "theta", "volume", "max_change", "spot_elem", "spot_ne"};
    if (with_time) header.push_back("wall_seconds");
    CsvWriter csv(header);
    for (const auto& r : history) {
        std::vector<std::string> row{std::to_string(r.iteration), format_double(r.theta), format_double(r.volume),
                                     format_double(r.max_change), std::to_string(r.spot_elem),
                                     format_double(r.spot_ne)};
        if (with_time) row.push_back(format_double(r.wall_seconds));
        csv.row(row);
    }
    return csv.str();
}

} // namespace smp
