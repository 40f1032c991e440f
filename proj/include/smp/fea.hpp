// SPDX-License-Identifier: Apache-2.0
#pragma once

// Implicit finite-element forward analysis of the thermo-mechanical cycle.
// The residual of a step,
//
//   R(u) = sum_e int B^T (A_r eps_r - B_r eps_ir_prev) dv - F_ext,
//
// is affine in that step's displacement, so each step costs one assembly and
// one linear solve. Every step is recorded for the backward adjoint sweep.

#include <Eigen/Sparse>

#include <vector>

#include "smp/material.hpp"
#include "smp/mesh.hpp"
#include "smp/schedule.hpp"

namespace smp {

template <typename Real>
using VectorX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

struct SolverOptions {
    enum class Linear { direct, iterative };
    Linear linear = Linear::direct;
    double tol = 1e-10;  // relative residual bound certified for every step
    int workers = 1;
};

template <typename Real>
struct AssembledSystem {
    Eigen::SparseMatrix<Real> tangent;  // full dof space, no constraints applied
    VectorX<Real> load;                 // F_ext plus the history and thermal terms
};

/// Element-parallel assembly of the step tangent and history load.
/// `history_prev` is indexed [elem * 4 + gp], `eps_th` per element.
template <typename Real>
AssembledSystem<Real> assemble_system(const Mesh& mesh, const std::vector<BMatrix>& B,
                                      const std::vector<BasicCoeffSet<Real>>& coeffs,
                                      const std::vector<BasicStrainHistory<Real>>& history_prev,
                                      const std::vector<VoigtVector<Real>>& eps_th, const VectorX<Real>& f_ext,
                                      int workers = 1);

/// Solves K u = F with u = 0 on `fixed_dofs`; returns the full dof vector.
/// Throws SolverError when factorization fails or the relative residual on
/// the free dofs exceeds 1e-10.
template <typename Real>
VectorX<Real> solve_step(const Eigen::SparseMatrix<Real>& tangent, const VectorX<Real>& load,
                         const std::vector<int>& fixed_dofs, const SolverOptions& options = {});

/// Free-dof block of a full-space matrix.
template <typename Real>
Eigen::SparseMatrix<Real> condense(const Eigen::SparseMatrix<Real>& full, const Mesh& mesh);

template <typename Real>
struct BasicStepRecord {
    ScheduleStep schedule;
    VectorX<Real> u;                                 // full dofs
    VectorX<Real> f_ext;                             // full dofs
    std::vector<BasicCoeffSet<Real>> coeffs;         // per element
    std::vector<VoigtVector<Real>> eps_th;           // per element
    std::vector<BasicStrainHistory<Real>> history;   // after the step, [elem * 4 + gp]
    Eigen::SparseMatrix<Real> tangent;               // free x free
    VectorX<Real> residual;                          // free dofs, recomputed from the updated state
    double residual_norm = 0;
    double load_norm = 0;
    int newton_iterations = 0;
};

template <typename Real>
struct BasicForwardTrace {
    Mesh mesh;
    std::vector<BMatrix> B;
    std::vector<double> rho;
    PhaseParams params;
    Schedule schedule;
    SolverOptions solver;
    std::vector<BasicStepRecord<Real>> steps;

    int num_steps() const { return static_cast<int>(steps.size()); }
    /// History entering step s (the zero state for s = 0).
    const BasicStrainHistory<Real>& history_before(int s, int elem, int gp) const;

private:
    BasicStrainHistory<Real> initial_;
};
using ForwardTrace = BasicForwardTrace<double>;
using StepRecord = BasicStepRecord<double>;

/// Runs the whole schedule. Throws SolverError carrying the step index when a
/// step fails or its residual is not certified within `options.tol`.
template <typename Real>
BasicForwardTrace<Real> run_cycle(const Mesh& mesh, const std::vector<double>& rho, const Schedule& schedule,
                                  const PhaseParams& params, const SolverOptions& options = {});

/// Internal minus external force for the given displacement, with the state
/// updated from `history_prev` (full dof vector).
template <typename Real>
VectorX<Real> evaluate_residual(const Mesh& mesh, const std::vector<BMatrix>& B,
                                const std::vector<BasicCoeffSet<Real>>& coeffs,
                                const std::vector<BasicStrainHistory<Real>>& history_prev,
                                const std::vector<VoigtVector<Real>>& eps_th, const VectorX<Real>& f_ext,
                                const VectorX<Real>& u);

/// Residual of step k rebuilt from scratch for a prescribed displacement
/// sequence u^0..u^k (full dofs) and optionally a different design, reusing
/// the trace's schedule, mesh and material. Used by finite-difference checks.
Eigen::VectorXd replay_residual(const ForwardTrace& trace, int k, const std::vector<Eigen::VectorXd>& displacements,
                                const std::vector<double>* rho = nullptr);

/// theta = u^M[a].
template <typename Real>
Real objective(const BasicForwardTrace<Real>& trace, int dof, int step)
{
    if (step < 0 || step >= trace.num_steps()) throw ContractError("objective: step out of range");
    if (dof < 0 || dof >= trace.mesh.num_dofs) throw ContractError("objective: dof out of range");
    return trace.steps[step].u[dof];
}

/// One-hot selector L over the free dofs. Throws ContractError for a fixed dof.
Eigen::VectorXd objective_selector(const Mesh& mesh, int dof);

} // namespace smp
