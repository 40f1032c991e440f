// SPDX-License-Identifier: Apache-2.0
#include "smp/fd_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "smp/io.hpp"
#include "smp/parallel.hpp"
#include "smp/quad.hpp"

namespace smp {

FdOptions FdOptions::from(const VerifySettings& v, int workers)
{
    FdOptions o;
    o.scheme = v.scheme;
    o.h = v.h;
    o.relative_step = v.relative_step;
    o.precision = v.precision;
    o.workers = workers;
    return o;
}

double fd_step(const FdOptions& options, double rho_e)
{
    return options.relative_step ? options.h * std::max(rho_e, 0.1) : options.h;
}

double fd_sensitivity(const ObjectiveFn& theta, const std::vector<double>& rho, int elem, const FdOptions& options)
{
    if (elem < 0 || elem >= static_cast<int>(rho.size())) throw ContractError("fd_sensitivity: element out of range");
    if (!(options.h > 0)) throw ContractError("fd_sensitivity: h must be > 0");
    const double h = fd_step(options, rho[elem]);
    std::vector<double> plus = rho;
    plus[elem] += h;
    if (options.scheme == FdScheme::forward) return (theta(plus) - theta(rho)) / h;
    std::vector<double> minus = rho;
    minus[elem] -= h;
    return (theta(plus) - theta(minus)) / (2 * h);
}

double fd_sensitivity(const Problem& problem, const std::vector<double>& rho, int elem, const FdOptions& options)
{
    const double h = fd_step(options, rho.at(elem));
    const double lo = options.scheme == FdScheme::central ? rho[elem] - h : rho[elem];
    if (lo < problem.params.rho_min || rho[elem] + h > 1.0) {
        throw DomainError("fd_sensitivity: perturbed rho of element " + std::to_string(elem) + " leaves [rho_min, 1]");
    }
    if (options.precision != FdPrecision::binary64) {
        // Differences are formed in the wide type over the step that was
        // actually applied after rounding rho_e +- h to double.
        std::vector<double> plus = rho;
        std::vector<double> base = rho;
        plus[elem] += h;
        if (options.scheme == FdScheme::central) base[elem] -= h;
        if (options.precision == FdPrecision::quad) {
            const Quad diff = evaluate_objective<Quad>(problem, plus) - evaluate_objective<Quad>(problem, base);
            return static_cast<double>(diff / (Quad(plus[elem]) - Quad(base[elem])));
        }
        const long double diff =
            evaluate_objective<long double>(problem, plus) - evaluate_objective<long double>(problem, base);
        return static_cast<double>(diff / (static_cast<long double>(plus[elem]) - base[elem]));
    }
    ObjectiveFn theta = [&](const std::vector<double>& r) { return evaluate_objective<double>(problem, r); };
    return fd_sensitivity(theta, rho, elem, options);
}

int VerificationReport::omitted() const
{
    return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.omitted; }));
}

int VerificationReport::failed() const
{
    return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.error.empty(); }));
}

int VerificationReport::evaluated() const { return static_cast<int>(rows.size()) - omitted() - failed(); }

VerificationReport build_report(const std::vector<double>& adjoint, const std::vector<double>& fd, double near_zero,
                                double h, double theta, FdScheme scheme)
{
    if (adjoint.size() != fd.size()) throw ContractError("build_report: adjoint and FD sizes differ");
    VerificationReport rep;
    rep.h = h;
    rep.theta = theta;
    rep.near_zero = near_zero;
    rep.scheme = scheme;
    double fd_max = 0;
    for (double v : fd) {
        if (std::isfinite(v)) fd_max = std::max(fd_max, std::abs(v));
    }
    for (std::size_t e = 0; e < fd.size(); ++e) {
        VerificationRow row;
        row.elem = static_cast<int>(e);
        row.adjoint = adjoint[e];
        row.fd = fd[e];
        if (std::abs(fd[e]) < near_zero * fd_max || fd[e] == 0.0) {
            row.omitted = true;
        } else {
            row.ne = std::abs((adjoint[e] - fd[e]) / fd[e]);
            rep.max_ne = std::max(rep.max_ne, row.ne);
        }
        rep.rows.push_back(row);
    }
    return rep;
}

VerificationReport verify_report(const Problem& problem, const std::vector<double>& rho,
                                 const std::vector<double>& adjoint, double theta, const FdOptions& options,
                                 double near_zero)
{
    const std::size_t ne = rho.size();
    std::vector<double> fd(ne, 0.0);
    std::vector<std::string> errors(ne);
    FdOptions serial = options;
    serial.workers = 1;
    parallel_for(ne, options.workers, [&](std::size_t e) {
        try {
            fd[e] = fd_sensitivity(problem, rho, static_cast<int>(e), serial);
        } catch (const std::exception& err) {
            fd[e] = std::nan("");
            errors[e] = err.what();
        }
    });
    std::vector<double> fd_clean = fd;
    for (std::size_t e = 0; e < ne; ++e) {
        if (!errors[e].empty()) fd_clean[e] = 0.0;
    }
    auto rep = build_report(adjoint, fd_clean, near_zero, options.h, theta, options.scheme);
    for (std::size_t e = 0; e < ne; ++e) {
        if (errors[e].empty()) continue;
        rep.rows[e].fd = fd[e];
        rep.rows[e].omitted = false;
        rep.rows[e].error = errors[e];
    }
    return rep;
}

std::string report_csv(const VerificationReport& report)
{
    CsvWriter csv({"element", "adjoint", "fd", "ne", "status"});
    for (const auto& r : report.rows) {
        const std::string status = !r.error.empty() ? "failed: " + r.error : (r.omitted ? "omitted" : "ok");
        csv.row({std::to_string(r.elem), format_double(r.adjoint), format_double(r.fd),
                 r.omitted || !r.error.empty() ? std::string() : format_double(r.ne), status});
    }
    return csv.str();
}

std::string report_text(const VerificationReport& report)
{
    std::ostringstream out;
    char line[160];
    out << "objective theta = " << format_double(report.theta) << "\n";
    out << "scheme = " << (report.scheme == FdScheme::central ? "central" : "forward") << ", h = " << report.h
        << ", omit |FD| < " << report.near_zero << " * max|FD|\n";
    std::snprintf(line, sizeof line, "%8s  %16s  %16s  %12s\n", "element", "adjoint", "fd", "NE");
    out << line;
    for (const auto& r : report.rows) {
        if (!r.error.empty()) {
            std::snprintf(line, sizeof line, "%8d  %16.7e  %16s  %12s\n", r.elem, r.adjoint, "failed", "--");
        } else if (r.omitted) {
            std::snprintf(line, sizeof line, "%8d  %16.7e  %16.7e  %12s\n", r.elem, r.adjoint, r.fd, "--");
        } else {
            std::snprintf(line, sizeof line, "%8d  %16.7e  %16.7e  %12.3e\n", r.elem, r.adjoint, r.fd, r.ne);
        }
        out << line;
    }
    out << "evaluated " << report.evaluated() << ", omitted " << report.omitted() << ", failed " << report.failed()
        << ", max NE = " << format_double(report.max_ne) << "\n";
    return out.str();
}

} // namespace smp
