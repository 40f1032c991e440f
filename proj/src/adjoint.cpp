// SPDX-License-Identifier: Apache-2.0
#include "smp/adjoint.hpp"

#include <Eigen/SparseLU>

#include <string>

#include "smp/parallel.hpp"

namespace smp {

DerivativeBlocks derivative_blocks(const CoeffSet& c)
{
    const auto& m = c.material;
    const double ci = c.dt / m.eta_i;
    const double cr = c.dt / m.rubbery.eta;
    const double cg = c.dt / m.glassy.eta;
    const double phi_g = c.fractions.phi_g;
    const Mat3 I = Mat3::Identity();

    DerivativeBlocks b;
    b.rubbery_from_total = c.D_inv;
    b.rubbery_from_ir = c.D_inv * (-phi_g * c.A_g_inv * c.B_r + ci * c.B_r);
    b.rubbery_from_ig = c.D_inv * (phi_g * c.A_g_inv * c.B_g);
    b.rubbery_from_i = -c.D_inv;
    b.rubbery_from_is = -c.D_inv;
    b.glassy_from_r = c.A_g_inv * c.A_r;
    b.glassy_from_ir = -c.A_g_inv * c.B_r;
    b.glassy_from_ig = c.A_g_inv * c.B_g;
    b.ir_from_ir = c.H_r_inv;
    b.ir_from_r = cr * c.H_r_inv * m.rubbery.K_neq;
    b.ig_from_ig = c.H_g_inv;
    b.ig_from_g = cg * c.H_g_inv * m.glassy.K_neq;
    b.i_from_i = I;
    b.i_from_r = ci * c.A_r;
    b.i_from_ir = -ci * c.B_r;
    b.is_from_is = I;
    b.is_from_r = c.fractions.dphi_g * I;
    b.stress_from_r = c.A_r;
    b.stress_from_ir = -c.B_r;
    return b;
}

void widen_blocks(CouplingContext& ctx)
{
    ctx.wide.assign(ctx.blocks.size(), {});
    for (std::size_t s = 0; s < ctx.blocks.size(); ++s) {
        ctx.wide[s].reserve(ctx.blocks[s].size());
        for (const auto& b : ctx.blocks[s]) ctx.wide[s].push_back(b.cast<long double>());
    }
}

CouplingContext make_coupling_context(const ForwardTrace& trace, int recursion_cap, int workers)
{
    CouplingContext ctx;
    ctx.trace = &trace;
    ctx.recursion_cap = recursion_cap;
    const int ne = trace.mesh.num_elements();
    ctx.blocks.resize(static_cast<std::size_t>(trace.num_steps()));
    for (int s = 0; s < trace.num_steps(); ++s) {
        auto& row = ctx.blocks[s];
        row.resize(static_cast<std::size_t>(ne));
        parallel_for(static_cast<std::size_t>(ne), workers,
                     [&](std::size_t e) { row[e] = derivative_blocks(trace.steps[s].coeffs[e]); });
    }
    widen_blocks(ctx);
    return ctx;
}

// ---------------------------------------------------------------------------

const WideMat3* CouplingCache::find(Field f, int k, int i)
{
    const auto it = table_.find({f, k, i});
    if (it == table_.end()) {
        ++misses_;
        return nullptr;
    }
    ++hits_;
    return &it->second;
}

void CouplingCache::store(Field f, int k, int i, const WideMat3& value) { table_[{f, k, i}] = value; }

void CouplingCache::evict_base(int i)
{
    for (auto it = table_.begin(); it != table_.end();) {
        if (std::get<2>(it->first) == i) {
            it = table_.erase(it);
        } else {
            ++it;
        }
    }
}

void CouplingCache::clear()
{
    table_.clear();
    hits_ = 0;
    misses_ = 0;
}

// ---------------------------------------------------------------------------

namespace {

void check_pair(const CouplingContext& ctx, int k, int i, int elem)
{
    if (!ctx.trace) throw ContractError("coupling: context has no trace");
    if (!(0 <= i && i < k && k < ctx.trace->num_steps())) {
        throw ContractError("coupling: need 0 <= i < k < steps, got k = " + std::to_string(k) +
                            ", i = " + std::to_string(i));
    }
    if (elem < 0 || elem >= ctx.trace->mesh.num_elements()) throw ContractError("coupling: element out of range");
}

// Depth-first chain rule over the history DAG. Every tracer returns
// P * d(field at step j)/d(eps_r at step base); nothing is shared between
// branches, so the cost grows geometrically with j - base.
class DepthFirst {
public:
    DepthFirst(const CouplingContext& ctx, int base, int elem) : ctx_(ctx), base_(base), elem_(elem) {}

    WideMat3 rubbery(int j, const WideMat3& P) const
    {
        if (j == base_) return P;
        const auto& b = at(j);
        return ir(j - 1, P * b.rubbery_from_ir) + ig(j - 1, P * b.rubbery_from_ig) +
               interface(j - 1, P * b.rubbery_from_i) + stored(j - 1, P * b.rubbery_from_is);
    }
    WideMat3 glassy(int j, const WideMat3& P) const
    {
        const auto& b = at(j);
        return rubbery(j, P * b.glassy_from_r) + ir(j - 1, P * b.glassy_from_ir) + ig(j - 1, P * b.glassy_from_ig);
    }
    WideMat3 ir(int j, const WideMat3& P) const
    {
        if (j < base_) return WideMat3::Zero();
        const auto& b = at(j);
        return ir(j - 1, P * b.ir_from_ir) + rubbery(j, P * b.ir_from_r);
    }
    WideMat3 ig(int j, const WideMat3& P) const
    {
        if (j < base_) return WideMat3::Zero();
        const auto& b = at(j);
        return ig(j - 1, P * b.ig_from_ig) + glassy(j, P * b.ig_from_g);
    }
    WideMat3 interface(int j, const WideMat3& P) const
    {
        if (j < base_) return WideMat3::Zero();
        const auto& b = at(j);
        return interface(j - 1, P * b.i_from_i) + rubbery(j, P * b.i_from_r) + ir(j - 1, P * b.i_from_ir);
    }
    WideMat3 stored(int j, const WideMat3& P) const
    {
        if (j < base_) return WideMat3::Zero();
        const auto& b = at(j);
        return stored(j - 1, P * b.is_from_is) + rubbery(j, P * b.is_from_r);
    }

private:
    const WideBlocks& at(int j) const { return ctx_.wide[j][elem_]; }

    const CouplingContext& ctx_;
    int base_;
    int elem_;
};

// Forward recurrence with memo: d(field at j)/d(eps_r at i) from step j - 1.
WideMat3 memo_field(const CouplingContext& ctx, CouplingCache& cache, Field f, int j, int i)
{
    if (j < i) return WideMat3::Zero();
    if (const WideMat3* hit = cache.find(f, j, i)) return *hit;
    const auto& b = ctx.wide[j][cache.element()];
    WideMat3 value;
    switch (f) {
    case Field::rubbery:
        if (j == i) {
            value = WideMat3::Identity();
        } else {
            value = b.rubbery_from_ir * memo_field(ctx, cache, Field::ir, j - 1, i) +
                    b.rubbery_from_ig * memo_field(ctx, cache, Field::ig, j - 1, i) +
                    b.rubbery_from_i * memo_field(ctx, cache, Field::interface, j - 1, i) +
                    b.rubbery_from_is * memo_field(ctx, cache, Field::stored, j - 1, i);
        }
        break;
    case Field::glassy:
        value = b.glassy_from_r * memo_field(ctx, cache, Field::rubbery, j, i) +
                b.glassy_from_ir * memo_field(ctx, cache, Field::ir, j - 1, i) +
                b.glassy_from_ig * memo_field(ctx, cache, Field::ig, j - 1, i);
        break;
    case Field::ir:
        value = b.ir_from_ir * memo_field(ctx, cache, Field::ir, j - 1, i) +
                b.ir_from_r * memo_field(ctx, cache, Field::rubbery, j, i);
        break;
    case Field::ig:
        value = b.ig_from_ig * memo_field(ctx, cache, Field::ig, j - 1, i) +
                b.ig_from_g * memo_field(ctx, cache, Field::glassy, j, i);
        break;
    case Field::interface:
        value = b.i_from_i * memo_field(ctx, cache, Field::interface, j - 1, i) +
                b.i_from_r * memo_field(ctx, cache, Field::rubbery, j, i) +
                b.i_from_ir * memo_field(ctx, cache, Field::ir, j - 1, i);
        break;
    case Field::stored:
        value = b.is_from_is * memo_field(ctx, cache, Field::stored, j - 1, i) +
                b.is_from_r * memo_field(ctx, cache, Field::rubbery, j, i);
        break;
    case Field::stress:
        throw ContractError("memo_field: stress is not a history field");
    }
    cache.store(f, j, i, value);
    return value;
}

} // namespace

Mat3 coupling_strain_recursive(const CouplingContext& ctx, int k, int i, int elem)
{
    check_pair(ctx, k, i, elem);
    if (k - i > ctx.recursion_cap) {
        throw ContractError("coupling_recursive: k - i = " + std::to_string(k - i) + " exceeds the recursion cap " +
                            std::to_string(ctx.recursion_cap));
    }
    const DepthFirst dfs(ctx, i, elem);
    const auto& bk = ctx.wide[k][elem];
    const WideMat3 term = dfs.rubbery(k, bk.stress_from_r) + dfs.ir(k - 1, bk.stress_from_ir);
    return (term * ctx.wide[i][elem].rubbery_from_total).cast<double>();
}

Mat3 coupling_strain_memoized(const CouplingContext& ctx, int k, int i, int elem, CouplingCache& cache)
{
    check_pair(ctx, k, i, elem);
    if (cache.element() != elem) throw ContractError("coupling_memoized: cache belongs to another element");
    if (const WideMat3* hit = cache.find(Field::stress, k, i)) return hit->cast<double>();
    const auto& bk = ctx.wide[k][elem];
    const WideMat3 term = bk.stress_from_r * memo_field(ctx, cache, Field::rubbery, k, i) +
                          bk.stress_from_ir * memo_field(ctx, cache, Field::ir, k - 1, i);
    const WideMat3 G = term * ctx.wide[i][elem].rubbery_from_total;
    cache.store(Field::stress, k, i, G);
    return G.cast<double>();
}

ElementBlock element_dof_block(const ForwardTrace& trace, int elem, const Mat3& G)
{
    ElementBlock out = ElementBlock::Zero();
    for (int q = 0; q < kGaussPoints; ++q) {
        const auto& bq = trace.B[elem * kGaussPoints + q];
        out.noalias() += bq.weight * bq.B.transpose() * G * bq.B;
    }
    return out;
}

ElementBlock coupling_recursive(const CouplingContext& ctx, int k, int i, int elem)
{
    return element_dof_block(*ctx.trace, elem, coupling_strain_recursive(ctx, k, i, elem));
}

ElementBlock coupling_memoized(const CouplingContext& ctx, int k, int i, int elem, CouplingCache& cache)
{
    return element_dof_block(*ctx.trace, elem, coupling_strain_memoized(ctx, k, i, elem, cache));
}

const Eigen::SparseMatrix<double>& residual_dof_jacobian(const ForwardTrace& trace, int i)
{
    if (i < 0 || i >= trace.num_steps()) throw ContractError("residual_dof_jacobian: step out of range");
    return trace.steps[i].tangent;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd transposed_solve(const Eigen::SparseMatrix<double>& K, const Eigen::VectorXd& rhs, int step,
                                 double& rel_residual)
{
    Eigen::SparseMatrix<double> Kt = K.transpose();
    Kt.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(Kt);
    if (lu.info() != Eigen::Success) {
        throw SolverError("adjoint step " + std::to_string(step) + ": factorization failed: " + lu.lastErrorMessage());
    }
    Eigen::VectorXd x = lu.solve(rhs);
    const double rn = rhs.norm();
    rel_residual = rn > 0 ? (Kt * x - rhs).norm() / rn : (Kt * x).norm();
    if (!std::isfinite(rel_residual) || rel_residual > 1e-10) {
        throw SolverError("adjoint step " + std::to_string(step) + ": transposed solve residual " +
                          std::to_string(rel_residual));
    }
    return x;
}

Eigen::Matrix<double, 8, 1> gather_free(const Mesh& mesh, const Eigen::VectorXd& free_vec, int elem)
{
    Eigen::Matrix<double, 8, 1> out;
    const auto dofs = mesh.element_dofs(elem);
    for (int a = 0; a < 8; ++a) {
        const int f = mesh.free_index[dofs[a]];
        out[a] = f >= 0 ? free_vec[f] : 0.0;
    }
    return out;
}

void check_final_step(const ForwardTrace& trace, int final_step)
{
    if (final_step < 0 || final_step >= trace.num_steps()) {
        throw ContractError("adjoint: objective step " + std::to_string(final_step) + " outside the trace (" +
                            std::to_string(trace.num_steps()) + " steps)");
    }
}

} // namespace

Eigen::VectorXd solve_final_adjoint(const ForwardTrace& trace, const Eigen::VectorXd& L, int final_step)
{
    check_final_step(trace, final_step);
    if (L.size() != trace.mesh.num_free()) throw ContractError("solve_final_adjoint: L must span the free dofs");
    double rel = 0;
    return transposed_solve(trace.steps[final_step].tangent, -L, final_step, rel);
}

AdjointState adjoint_sweep(const ForwardTrace& trace, const Eigen::VectorXd& L, int final_step,
                           const AdjointOptions& options)
{
    check_final_step(trace, final_step);
    const auto& mesh = trace.mesh;
    if (L.size() != mesh.num_free()) throw ContractError("adjoint_sweep: L must span the free dofs");
    if (options.mode == AdjointOptions::Mode::recursive && final_step > options.recursion_cap) {
        throw ContractError("adjoint_sweep: recursive mode needs M <= recursion cap " +
                            std::to_string(options.recursion_cap) + ", got M = " + std::to_string(final_step));
    }

    const auto ctx = make_coupling_context(trace, options.recursion_cap, options.workers);
    const int ne = mesh.num_elements();
    const int M = final_step;

    AdjointState state;
    state.final_step = M;
    state.lambda.assign(static_cast<std::size_t>(M + 1), Eigen::VectorXd());
    state.rhs.assign(static_cast<std::size_t>(M + 1), Eigen::VectorXd());
    state.solve_residuals.assign(static_cast<std::size_t>(M + 1), 0.0);

    state.rhs[M] = -L;
    state.lambda[M] = transposed_solve(trace.steps[M].tangent, state.rhs[M], M, state.solve_residuals[M]);
    state.sweep_index = M;

    std::vector<Eigen::Matrix<double, 8, 1>> contrib(static_cast<std::size_t>(ne));
    std::vector<std::size_t> hits(static_cast<std::size_t>(ne)), misses(static_cast<std::size_t>(ne));
    for (int i = M - 1; i >= 0; --i) {
        parallel_for(static_cast<std::size_t>(ne), options.workers, [&](std::size_t eu) {
            const int e = static_cast<int>(eu);
            CouplingCache cache(e);
            Eigen::Matrix<double, 8, 1> acc = Eigen::Matrix<double, 8, 1>::Zero();
            for (int k = i + 1; k <= M; ++k) {
                const Mat3 G = options.mode == AdjointOptions::Mode::memoized
                                   ? coupling_strain_memoized(ctx, k, i, e, cache)
                                   : coupling_strain_recursive(ctx, k, i, e);
                acc.noalias() += element_dof_block(trace, e, G).transpose() * gather_free(mesh, state.lambda[k], e);
            }
            contrib[eu] = options.coupling_scale * acc;
            hits[eu] = cache.hits();
            misses[eu] = cache.misses();
        });
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh.num_free());
        for (int e = 0; e < ne; ++e) {
            const auto dofs = mesh.element_dofs(e);
            for (int a = 0; a < 8; ++a) {
                const int f = mesh.free_index[dofs[a]];
                if (f >= 0) rhs[f] -= contrib[e][a];
            }
            state.cache_hits += hits[e];
            state.cache_misses += misses[e];
        }
        state.rhs[i] = rhs;
        state.lambda[i] = transposed_solve(trace.steps[i].tangent, rhs, i, state.solve_residuals[i]);
        state.sweep_index = i;
    }
    return state;
}

// ---------------------------------------------------------------------------

namespace {

// Explicit dR^s/d rho_e for s = 0..last at fixed displacements.
std::vector<Eigen::Matrix<double, 8, 1>> element_rho_partials(const ForwardTrace& trace, int last, int elem)
{
    const double rho = trace.rho[elem];
    std::vector<Eigen::Matrix<double, 8, 1>> out(static_cast<std::size_t>(last + 1),
                                                 Eigen::Matrix<double, 8, 1>::Zero());
    std::array<StrainSensitivity, kGaussPoints> sens{};
    for (int s = 0; s <= last; ++s) {
        const auto& c = trace.steps[s].coeffs[elem];
        const auto cs = coeff_sensitivity(rho, c, trace.params);
        for (int q = 0; q < kGaussPoints; ++q) {
            const auto& prev = trace.history_before(s, elem, q);
            const auto& now = trace.steps[s].history[elem * kGaussPoints + q];
            const auto next = state_sensitivity(c, cs, prev, sens[q], now, trace.params.T_ref);
            const Vec3 dsig = stress_sensitivity(c, cs, prev, sens[q], now, next);
            const auto& bq = trace.B[elem * kGaussPoints + q];
            out[s].noalias() += bq.weight * bq.B.transpose() * dsig;
            sens[q] = next;
        }
    }
    return out;
}

} // namespace

Eigen::Matrix<double, 8, 1> residual_rho_partial(const ForwardTrace& trace, int i, int elem)
{
    if (i < 0 || i >= trace.num_steps()) throw ContractError("residual_rho_partial: step out of range");
    if (elem < 0 || elem >= trace.mesh.num_elements()) throw ContractError("residual_rho_partial: bad element");
    return element_rho_partials(trace, i, elem).back();
}

std::vector<double> accumulate_sensitivity(const AdjointState& adjoint, const ForwardTrace& trace, int workers)
{
    const int M = adjoint.final_step;
    if (static_cast<int>(adjoint.lambda.size()) != M + 1 || adjoint.sweep_index != 0) {
        throw ContractError("accumulate_sensitivity: adjoint sweep incomplete");
    }
    check_final_step(trace, M);
    const int ne = trace.mesh.num_elements();
    std::vector<double> out(static_cast<std::size_t>(ne), 0.0);
    parallel_for(static_cast<std::size_t>(ne), workers, [&](std::size_t eu) {
        const int e = static_cast<int>(eu);
        const auto partials = element_rho_partials(trace, M, e);
        double sum = 0;  // d theta/d rho is zero for a displacement objective
        for (int s = 0; s <= M; ++s) sum += gather_free(trace.mesh, adjoint.lambda[s], e).dot(partials[s]);
        out[eu] = sum;
    });
    return out;
}

LagrangianCheck lagrangian_check(const AdjointState& adjoint, const ForwardTrace& trace, int objective_dof)
{
    LagrangianCheck out;
    out.theta = objective(trace, objective_dof, adjoint.final_step);
    out.lagrangian = out.theta;
    for (int s = 0; s <= adjoint.final_step; ++s) {
        const auto& R = trace.steps[s].residual;
        out.lagrangian += adjoint.lambda[s].dot(R);
        out.bound += adjoint.lambda[s].norm() * R.norm();
    }
    return out;
}

} // namespace smp
