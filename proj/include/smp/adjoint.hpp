// SPDX-License-Identifier: Apache-2.0
#pragma once

// Transient adjoint sensitivity analysis. Backward sweep over the recorded
// forward trace: the final adjoint solves K^T lambda = -L, every earlier one
// collects the coupling of later residuals to its own displacement. The
// coupling of R^k to u^i runs through the strain-history recurrences; it is
// evaluated either by a plain depth-first chain rule (exponential in k - i)
// or by an iterated recurrence with a per-element memo table.

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <tuple>
#include <vector>

#include "smp/fea.hpp"

namespace smp {

/// Partial derivatives of each single-step update kernel w.r.t. one of its
/// inputs, for one element and one step. Names read output_from_input.
template <typename Real>
struct DerivativeBlockSet {
    using M = VoigtTensor<Real>;
    M rubbery_from_total;  // D^-1
    M rubbery_from_ir;     // D^-1 (-phi_g A_g^-1 B_r + (dt/eta_i) B_r)
    M rubbery_from_ig;     // D^-1 phi_g A_g^-1 B_g
    M rubbery_from_i;      // -D^-1
    M rubbery_from_is;     // -D^-1
    M glassy_from_r;       // A_g^-1 A_r
    M glassy_from_ir;      // -A_g^-1 B_r
    M glassy_from_ig;      // A_g^-1 B_g
    M ir_from_ir;          // H_r^-1
    M ir_from_r;           // (dt/eta_r) H_r^-1 K_neq,r
    M ig_from_ig;          // H_g^-1
    M ig_from_g;           // (dt/eta_g) H_g^-1 K_neq,g
    M i_from_i;            // I
    M i_from_r;            // (dt/eta_i) A_r
    M i_from_ir;           // -(dt/eta_i) B_r
    M is_from_is;          // I
    M is_from_r;           // dphi_g I
    M stress_from_r;       // A_r
    M stress_from_ir;      // -B_r

    template <typename To>
    DerivativeBlockSet<To> cast() const
    {
        return {rubbery_from_total.template cast<To>(), rubbery_from_ir.template cast<To>(),
                rubbery_from_ig.template cast<To>(),    rubbery_from_i.template cast<To>(),
                rubbery_from_is.template cast<To>(),    glassy_from_r.template cast<To>(),
                glassy_from_ir.template cast<To>(),     glassy_from_ig.template cast<To>(),
                ir_from_ir.template cast<To>(),         ir_from_r.template cast<To>(),
                ig_from_ig.template cast<To>(),         ig_from_g.template cast<To>(),
                i_from_i.template cast<To>(),           i_from_r.template cast<To>(),
                i_from_ir.template cast<To>(),          is_from_is.template cast<To>(),
                is_from_r.template cast<To>(),          stress_from_r.template cast<To>(),
                stress_from_ir.template cast<To>()};
    }
};

using DerivativeBlocks = DerivativeBlockSet<double>;

DerivativeBlocks derivative_blocks(const CoeffSet& coeffs);

// Both coupling evaluators accumulate in extended precision: the couplings
// of distant steps are small differences of O(1) path sums.
using WideMat3 = VoigtTensor<long double>;
using WideBlocks = DerivativeBlockSet<long double>;

/// Blocks for every step and element of a trace plus the evaluation limits.
struct CouplingContext {
    const ForwardTrace* trace = nullptr;
    std::vector<std::vector<DerivativeBlocks>> blocks;  // [step][elem]
    std::vector<std::vector<WideBlocks>> wide;          // same, extended precision
    int recursion_cap = 10;                             // max k - i for the depth-first evaluator
};

CouplingContext make_coupling_context(const ForwardTrace& trace, int recursion_cap = 10, int workers = 1);

/// Rebuilds ctx.wide from ctx.blocks; call after editing blocks by hand.
void widen_blocks(CouplingContext& ctx);

/// History fields tracked by the coupling recurrences.
enum class Field : std::uint8_t { rubbery, glassy, ir, ig, interface, stored, stress };

/// Memo table of d(field at step k)/d(eps_r at step i) for one element.
class CouplingCache {
public:
    explicit CouplingCache(int elem = -1) : elem_(elem) {}

    int element() const { return elem_; }
    const WideMat3* find(Field f, int k, int i);
    void store(Field f, int k, int i, const WideMat3& value);
    void evict_base(int i);
    void clear();

    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }
    std::size_t size() const { return table_.size(); }

private:
    int elem_;
    std::map<std::tuple<Field, int, int>, WideMat3> table_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

/// d sigma^k / d eps_total^i at one element (strain space, shared by all
/// Gauss points). Throws ContractError unless 0 <= i < k < steps, and for
/// k - i above the recursion cap.
Mat3 coupling_strain_recursive(const CouplingContext& ctx, int k, int i, int elem);
Mat3 coupling_strain_memoized(const CouplingContext& ctx, int k, int i, int elem, CouplingCache& cache);

/// Element block of dR^k/du^i (8 x 8, element dof order).
using ElementBlock = Eigen::Matrix<double, 8, 8>;
ElementBlock coupling_recursive(const CouplingContext& ctx, int k, int i, int elem);
ElementBlock coupling_memoized(const CouplingContext& ctx, int k, int i, int elem, CouplingCache& cache);

/// Maps a strain-space block to dof space by quadrature: sum_q w B_q^T G B_q.
ElementBlock element_dof_block(const ForwardTrace& trace, int elem, const Mat3& G);

/// Free-dof tangent of step i (dR^i/du^i, the residual being affine in u^i).
const Eigen::SparseMatrix<double>& residual_dof_jacobian(const ForwardTrace& trace, int i);

struct AdjointOptions {
    enum class Mode { recursive, memoized };
    Mode mode = Mode::memoized;
    int workers = 1;
    int recursion_cap = 10;
    // Test hook: scales every coupling block. Anything but 1 breaks the adjoint.
    double coupling_scale = 1.0;
};

struct AdjointState {
    int final_step = 0;                     // M
    std::vector<Eigen::VectorXd> lambda;    // [0..M], free dofs
    std::vector<Eigen::VectorXd> rhs;       // F_RHS used for each solve, free dofs
    std::vector<double> solve_residuals;    // relative residual of each transposed solve
    int sweep_index = -1;                   // last step solved (0 once complete)
    std::size_t cache_hits = 0;
    std::size_t cache_misses = 0;
};

/// Solves K_M^T lambda = -L. Throws SolverError on a singular tangent.
Eigen::VectorXd solve_final_adjoint(const ForwardTrace& trace, const Eigen::VectorXd& L, int final_step);

/// Full backward sweep from step `final_step` down to 0. SolverError messages
/// carry the step index.
AdjointState adjoint_sweep(const ForwardTrace& trace, const Eigen::VectorXd& L, int final_step,
                           const AdjointOptions& options = {});

/// Explicit dR^i/d rho_e with every displacement held at its trace value
/// (element dof order). Recomputes the history sensitivity chain from step 0.
Eigen::Matrix<double, 8, 1> residual_rho_partial(const ForwardTrace& trace, int i, int elem);

/// d theta/d rho_e = sum_i lambda^i . dR^i/d rho_e for every element.
std::vector<double> accumulate_sensitivity(const AdjointState& adjoint, const ForwardTrace& trace, int workers = 1);

struct LagrangianCheck {
    double theta = 0;        // objective
    double lagrangian = 0;   // theta + sum_i lambda^i . R^i
    double bound = 0;        // sum_i |lambda^i| |R^i|
};

LagrangianCheck lagrangian_check(const AdjointState& adjoint, const ForwardTrace& trace, int objective_dof);

} // namespace smp
