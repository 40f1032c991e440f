// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force finite-difference sensitivities and the adjoint-versus-FD
// verification report. Every FD evaluation is a full forward run; nothing
// from the adjoint pipeline is reused.

#include <functional>
#include <string>
#include <vector>

#include "smp/problem.hpp"

namespace smp {

struct FdOptions {
    FdScheme scheme = FdScheme::central;
    double h = 1e-6;
    bool relative_step = false;
    FdPrecision precision = FdPrecision::quad;
    int workers = 1;

    static FdOptions from(const VerifySettings& v, int workers);
};

using ObjectiveFn = std::function<double(const std::vector<double>&)>;

/// Step applied to element `elem`: h, or h * max(rho_e, 0.1) when relative.
double fd_step(const FdOptions& options, double rho_e);

/// Difference quotient of `theta` w.r.t. rho[elem].
double fd_sensitivity(const ObjectiveFn& theta, const std::vector<double>& rho, int elem, const FdOptions& options);

/// Difference quotient of the problem objective; throws DomainError when the
/// perturbed density leaves [rho_min, 1].
double fd_sensitivity(const Problem& problem, const std::vector<double>& rho, int elem, const FdOptions& options);

struct VerificationRow {
    int elem = 0;
    double adjoint = 0;
    double fd = 0;
    double ne = 0;
    bool omitted = false;
    std::string error;  // non-empty when the FD evaluation failed
};

struct VerificationReport {
    std::vector<VerificationRow> rows;
    double max_ne = 0;
    double h = 0;
    double theta = 0;
    double near_zero = 0;  // relative omission threshold
    FdScheme scheme = FdScheme::central;

    int omitted() const;
    int evaluated() const;
    int failed() const;
    bool passes(double gate) const { return failed() == 0 && max_ne < gate; }
};

/// NE = |(adjoint - fd) / fd|, omitted when |fd| < near_zero * max|fd|.
VerificationReport build_report(const std::vector<double>& adjoint, const std::vector<double>& fd,
                                double near_zero, double h, double theta, FdScheme scheme = FdScheme::central);

/// FD for every element plus the adjoint comparison. Failure of one element's
/// forward runs is recorded on its row.
VerificationReport verify_report(const Problem& problem, const std::vector<double>& rho,
                                 const std::vector<double>& adjoint, double theta, const FdOptions& options,
                                 double near_zero);

std::string report_csv(const VerificationReport& report);
std::string report_text(const VerificationReport& report);

} // namespace smp
