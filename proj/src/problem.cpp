// SPDX-License-Identifier: Apache-2.0
#include "smp/problem.hpp"

#include "smp/quad.hpp"

namespace smp {

Schedule objective_schedule(const Problem& problem)
{
    Schedule s = problem.schedule;
    s.steps.resize(static_cast<std::size_t>(problem.objective.step + 1));
    return s;
}

template <typename Real>
Real evaluate_objective(const Problem& problem, const std::vector<double>& rho)
{
    const auto trace =
        run_cycle<Real>(problem.mesh, rho, objective_schedule(problem), problem.params, problem.solver);
    return objective(trace, problem.objective.dof, problem.objective.step);
}

template double evaluate_objective<double>(const Problem&, const std::vector<double>&);
template long double evaluate_objective<long double>(const Problem&, const std::vector<double>&);
template Quad evaluate_objective<Quad>(const Problem&, const std::vector<double>&);

SensitivityResult adjoint_sensitivity(const Problem& problem, const std::vector<double>& rho)
{
    SensitivityResult out;
    out.trace = run_cycle<double>(problem.mesh, rho, objective_schedule(problem), problem.params, problem.solver);
    const int M = problem.objective.step;
    out.theta = objective(out.trace, problem.objective.dof, M);
    const Eigen::VectorXd L = objective_selector(problem.mesh, problem.objective.dof);
    out.adjoint = adjoint_sweep(out.trace, L, M, problem.adjoint);
    out.sensitivity = accumulate_sensitivity(out.adjoint, out.trace, problem.adjoint.workers);
    return out;
}

} // namespace smp
