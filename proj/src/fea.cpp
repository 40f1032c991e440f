// SPDX-License-Identifier: Apache-2.0
#include "smp/fea.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <cmath>
#include <string>

#include "smp/parallel.hpp"
#include "smp/quad.hpp"

namespace smp {

namespace {

template <typename Real>
using ElementMatrix = Eigen::Matrix<Real, 8, 8>;
template <typename Real>
using ElementVector = Eigen::Matrix<Real, 8, 1>;

template <typename Real>
ElementVector<Real> gather(const VectorX<Real>& u, const std::array<int, 8>& dofs)
{
    ElementVector<Real> ue;
    for (int a = 0; a < 8; ++a) ue[a] = u[dofs[a]];
    return ue;
}

template <typename Real>
Real free_norm(const VectorX<Real>& full, const Mesh& mesh)
{
    Real sum = 0;
    for (int d : mesh.free_dofs) sum += full[d] * full[d];
    using std::sqrt;
    return sqrt(sum);
}

} // namespace

template <typename Real>
AssembledSystem<Real> assemble_system(const Mesh& mesh, const std::vector<BMatrix>& B,
                                      const std::vector<BasicCoeffSet<Real>>& coeffs,
                                      const std::vector<BasicStrainHistory<Real>>& history_prev,
                                      const std::vector<VoigtVector<Real>>& eps_th, const VectorX<Real>& f_ext,
                                      int workers)
{
    const int ne = mesh.num_elements();
    if (static_cast<int>(coeffs.size()) != ne || static_cast<int>(eps_th.size()) != ne ||
        static_cast<int>(history_prev.size()) != ne * kGaussPoints ||
        static_cast<int>(B.size()) != ne * kGaussPoints || f_ext.size() != mesh.num_dofs) {
        throw ContractError("assemble_system: input sizes do not match the mesh");
    }

    std::vector<ElementMatrix<Real>> Ke(static_cast<std::size_t>(ne));
    std::vector<ElementVector<Real>> fe(static_cast<std::size_t>(ne));
    parallel_for(static_cast<std::size_t>(ne), workers, [&](std::size_t e) {
        const auto& c = coeffs[e];
        const VoigtTensor<Real> AD = c.A_r * c.D_inv;
        ElementMatrix<Real> K = ElementMatrix<Real>::Zero();
        ElementVector<Real> f = ElementVector<Real>::Zero();
        for (int q = 0; q < kGaussPoints; ++q) {
            const auto& bq = B[e * kGaussPoints + q];
            const Eigen::Matrix<Real, 3, 8> Bq = bq.B.template cast<Real>();
            const Real w = bq.weight;
            const auto& h = history_prev[e * kGaussPoints + q];
            K.noalias() += w * Bq.transpose() * AD * Bq;
            // History and thermal terms moved to the load side of K u = F.
            const VoigtVector<Real> hist = c.X_r * h.eps_ir - c.X_g * h.eps_ig - c.Y_r * h.eps_ir + c.V * h.eps_i +
                                           c.Z * h.eps_is + AD * eps_th[e] + c.B_r * h.eps_ir;
            f.noalias() += w * Bq.transpose() * hist;
        }
        Ke[e] = K;
        fe[e] = f;
    });

    std::vector<Eigen::Triplet<Real>> triplets;
    triplets.reserve(static_cast<std::size_t>(ne) * 64);
    AssembledSystem<Real> sys;
    sys.load = f_ext;
    for (int e = 0; e < ne; ++e) {
        const auto dofs = mesh.element_dofs(e);
        for (int a = 0; a < 8; ++a) {
            sys.load[dofs[a]] += fe[e][a];
            for (int b = 0; b < 8; ++b) triplets.emplace_back(dofs[a], dofs[b], Ke[e](a, b));
        }
    }
    sys.tangent.resize(mesh.num_dofs, mesh.num_dofs);
    sys.tangent.setFromTriplets(triplets.begin(), triplets.end());
    return sys;
}

template <typename Real>
Eigen::SparseMatrix<Real> condense(const Eigen::SparseMatrix<Real>& full, const Mesh& mesh)
{
    std::vector<Eigen::Triplet<Real>> triplets;
    for (int col = 0; col < full.outerSize(); ++col) {
        for (typename Eigen::SparseMatrix<Real>::InnerIterator it(full, col); it; ++it) {
            const int r = mesh.free_index[it.row()];
            const int c = mesh.free_index[it.col()];
            if (r >= 0 && c >= 0) triplets.emplace_back(r, c, it.value());
        }
    }
    Eigen::SparseMatrix<Real> out(mesh.num_free(), mesh.num_free());
    out.setFromTriplets(triplets.begin(), triplets.end());
    return out;
}

template <typename Real>
VectorX<Real> solve_step(const Eigen::SparseMatrix<Real>& tangent, const VectorX<Real>& load,
                         const std::vector<int>& fixed_dofs, const SolverOptions& options)
{
    const int n = static_cast<int>(tangent.rows());
    if (tangent.cols() != n || load.size() != n) throw ContractError("solve_step: dimension mismatch");
    std::vector<int> free_index(static_cast<std::size_t>(n), 0);
    for (int d : fixed_dofs) {
        if (d < 0 || d >= n) throw ContractError("solve_step: fixed dof out of range");
        free_index[d] = -1;
    }
    std::vector<int> free_dofs;
    for (int d = 0; d < n; ++d) {
        if (free_index[d] < 0) continue;
        free_index[d] = static_cast<int>(free_dofs.size());
        free_dofs.push_back(d);
    }
    const int nf = static_cast<int>(free_dofs.size());

    std::vector<Eigen::Triplet<Real>> triplets;
    for (int col = 0; col < tangent.outerSize(); ++col) {
        for (typename Eigen::SparseMatrix<Real>::InnerIterator it(tangent, col); it; ++it) {
            const int r = free_index[it.row()];
            const int c = free_index[it.col()];
            if (r >= 0 && c >= 0) triplets.emplace_back(r, c, it.value());
        }
    }
    Eigen::SparseMatrix<Real> K(nf, nf);
    K.setFromTriplets(triplets.begin(), triplets.end());
    K.makeCompressed();
    VectorX<Real> F(nf);
    for (int i = 0; i < nf; ++i) F[i] = load[free_dofs[i]];

    VectorX<Real> x;
    if (options.linear == SolverOptions::Linear::direct) {
        Eigen::SparseLU<Eigen::SparseMatrix<Real>> lu;
        lu.compute(K);
        if (lu.info() != Eigen::Success) {
            throw SolverError("solve_step: sparse LU factorization failed on " + std::to_string(nf) +
                              " free dofs: " + lu.lastErrorMessage());
        }
        x = lu.solve(F);
    } else {
        Eigen::BiCGSTAB<Eigen::SparseMatrix<Real>, Eigen::IncompleteLUT<Real>> it;
        it.setTolerance(Real(options.tol) * Real(1e-3));
        it.setMaxIterations(20 * nf + 100);
        it.compute(K);
        x = it.solve(F);
        if (it.info() != Eigen::Success) {
            throw SolverError("solve_step: iterative solver did not converge on " + std::to_string(nf) +
                              " free dofs");
        }
    }
    using std::abs;
    const Real f_norm = F.norm();
    const Real r_norm = (K * x - F).norm();
    if (!std::isfinite(static_cast<double>(r_norm)) || r_norm > Real(1e-10) * f_norm) {
        throw SolverError("solve_step: relative residual " + std::to_string(static_cast<double>(r_norm / f_norm)) +
                          " exceeds 1e-10 on " + std::to_string(nf) + " free dofs");
    }
    VectorX<Real> u = VectorX<Real>::Zero(n);
    for (int i = 0; i < nf; ++i) u[free_dofs[i]] = x[i];
    return u;
}

template <typename Real>
const BasicStrainHistory<Real>& BasicForwardTrace<Real>::history_before(int s, int elem, int gp) const
{
    if (s == 0) return initial_;
    return steps.at(static_cast<std::size_t>(s - 1)).history.at(static_cast<std::size_t>(elem * kGaussPoints + gp));
}

namespace {

// State update of every Gauss point for displacement u.
template <typename Real>
std::vector<BasicStrainHistory<Real>> update_histories(const Mesh& mesh, const std::vector<BMatrix>& B,
                                                       const std::vector<BasicCoeffSet<Real>>& coeffs,
                                                       const std::vector<BasicStrainHistory<Real>>& prev,
                                                       const std::vector<VoigtVector<Real>>& eps_th,
                                                       const VectorX<Real>& u, int workers)
{
    std::vector<BasicStrainHistory<Real>> next(prev.size());
    parallel_for(static_cast<std::size_t>(mesh.num_elements()), workers, [&](std::size_t e) {
        const auto ue = gather<Real>(u, mesh.element_dofs(static_cast<int>(e)));
        for (int q = 0; q < kGaussPoints; ++q) {
            const std::size_t idx = e * kGaussPoints + q;
            const VoigtVector<Real> eps = B[idx].B.template cast<Real>() * ue;
            next[idx] = state_update<Real>(coeffs[e], eps, prev[idx], eps_th[e]);
        }
    });
    return next;
}

template <typename Real>
VectorX<Real> internal_force(const Mesh& mesh, const std::vector<BMatrix>& B,
                             const std::vector<BasicCoeffSet<Real>>& coeffs,
                             const std::vector<BasicStrainHistory<Real>>& prev,
                             const std::vector<BasicStrainHistory<Real>>& next)
{
    VectorX<Real> f = VectorX<Real>::Zero(mesh.num_dofs);
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto dofs = mesh.element_dofs(e);
        ElementVector<Real> fe = ElementVector<Real>::Zero();
        for (int q = 0; q < kGaussPoints; ++q) {
            const std::size_t idx = static_cast<std::size_t>(e * kGaussPoints + q);
            const VoigtVector<Real> sigma = stress<Real>(coeffs[e], next[idx].eps_r, prev[idx].eps_ir);
            fe.noalias() += Real(B[idx].weight) * B[idx].B.template cast<Real>().transpose() * sigma;
        }
        for (int a = 0; a < 8; ++a) f[dofs[a]] += fe[a];
    }
    return f;
}

template <typename Real>
void build_step_coefficients(const Mesh& mesh, const std::vector<double>& rho, const PhaseParams& params, Real T_now,
                             Real T_prev, Real dt, int workers, std::vector<BasicCoeffSet<Real>>& coeffs,
                             std::vector<VoigtVector<Real>>& eps_th)
{
    const int ne = mesh.num_elements();
    coeffs.resize(static_cast<std::size_t>(ne));
    eps_th.resize(static_cast<std::size_t>(ne));
    parallel_for(static_cast<std::size_t>(ne), workers, [&](std::size_t e) {
        coeffs[e] = build_coeffs<Real>(Real(rho[e]), T_now, T_prev, dt, params);
        eps_th[e] = thermal_strain<Real>(T_now, Real(params.T_ref), coeffs[e].fractions, coeffs[e].material);
    });
}

} // namespace

template <typename Real>
VectorX<Real> evaluate_residual(const Mesh& mesh, const std::vector<BMatrix>& B,
                                const std::vector<BasicCoeffSet<Real>>& coeffs,
                                const std::vector<BasicStrainHistory<Real>>& history_prev,
                                const std::vector<VoigtVector<Real>>& eps_th, const VectorX<Real>& f_ext,
                                const VectorX<Real>& u)
{
    const auto next = update_histories<Real>(mesh, B, coeffs, history_prev, eps_th, u, 1);
    return internal_force<Real>(mesh, B, coeffs, history_prev, next) - f_ext;
}

template <typename Real>
BasicForwardTrace<Real> run_cycle(const Mesh& mesh, const std::vector<double>& rho, const Schedule& schedule,
                                  const PhaseParams& params, const SolverOptions& options)
{
    if (static_cast<int>(rho.size()) != mesh.num_elements()) {
        throw ContractError("run_cycle: design field has " + std::to_string(rho.size()) + " entries for " +
                            std::to_string(mesh.num_elements()) + " elements");
    }
    params.validate();
    schedule.validate();

    BasicForwardTrace<Real> trace;
    trace.mesh = mesh;
    trace.B = element_B_table(mesh);
    trace.rho = rho;
    trace.params = params;
    trace.schedule = schedule;
    trace.solver = options;
    trace.steps.reserve(static_cast<std::size_t>(schedule.size()));

    std::vector<BasicStrainHistory<Real>> prev(static_cast<std::size_t>(mesh.num_elements() * kGaussPoints));
    const VectorX<Real> reference = mesh.reference_load.cast<Real>();

    for (int s = 0; s < schedule.size(); ++s) {
        const auto& st = schedule.steps[s];
        BasicStepRecord<Real> rec;
        rec.schedule = st;
        try {
            build_step_coefficients<Real>(mesh, rho, params, Real(st.T), Real(schedule.T_before(s)), Real(st.dt),
                                          options.workers, rec.coeffs, rec.eps_th);
            rec.f_ext = Real(st.load_scale) * reference;
            const auto sys =
                assemble_system<Real>(mesh, trace.B, rec.coeffs, prev, rec.eps_th, rec.f_ext, options.workers);
            rec.u = solve_step<Real>(sys.tangent, sys.load, mesh.fixed_dofs, options);
            rec.newton_iterations = 1;
            rec.history = update_histories<Real>(mesh, trace.B, rec.coeffs, prev, rec.eps_th, rec.u, options.workers);
            rec.tangent = condense<Real>(sys.tangent, mesh);

            const VectorX<Real> r_full = internal_force<Real>(mesh, trace.B, rec.coeffs, prev, rec.history) - rec.f_ext;
            rec.residual.resize(mesh.num_free());
            for (int i = 0; i < mesh.num_free(); ++i) rec.residual[i] = r_full[mesh.free_dofs[i]];
            rec.residual_norm = static_cast<double>(rec.residual.norm());
            rec.load_norm = static_cast<double>(free_norm<Real>(sys.load, mesh));
        } catch (const SolverError& err) {
            throw SolverError("step " + std::to_string(s) + ": " + err.what());
        }
        // The residual is affine in u, so the first Newton iterate must already
        // satisfy the tolerance; anything else means tangent and residual disagree.
        if (!(rec.residual_norm <= options.tol * rec.load_norm)) {
            throw SolverError("step " + std::to_string(s) + ": residual " + std::to_string(rec.residual_norm) +
                              " not certified after one Newton iteration (load norm " +
                              std::to_string(rec.load_norm) + ")");
        }
        prev = rec.history;
        trace.steps.push_back(std::move(rec));
    }
    return trace;
}

Eigen::VectorXd replay_residual(const ForwardTrace& trace, int k, const std::vector<Eigen::VectorXd>& displacements,
                                const std::vector<double>* rho)
{
    if (k < 0 || k >= trace.num_steps() || static_cast<int>(displacements.size()) < k + 1) {
        throw ContractError("replay_residual: need displacements for steps 0..k");
    }
    const auto& mesh = trace.mesh;
    std::vector<StrainHistory> prev(static_cast<std::size_t>(mesh.num_elements() * kGaussPoints));
    for (int s = 0; s <= k; ++s) {
        std::vector<CoeffSet> coeffs;
        std::vector<Vec3> eps_th;
        if (rho) {
            build_step_coefficients<double>(mesh, *rho, trace.params, trace.schedule.steps[s].T,
                                            trace.schedule.T_before(s), trace.schedule.steps[s].dt, 1, coeffs, eps_th);
        } else {
            coeffs = trace.steps[s].coeffs;
            eps_th = trace.steps[s].eps_th;
        }
        auto next = update_histories<double>(mesh, trace.B, coeffs, prev, eps_th, displacements[s], 1);
        if (s == k) return internal_force<double>(mesh, trace.B, coeffs, prev, next) - trace.steps[s].f_ext;
        prev = std::move(next);
    }
    return {};
}

Eigen::VectorXd objective_selector(const Mesh& mesh, int dof)
{
    if (dof < 0 || dof >= mesh.num_dofs) throw ContractError("objective_selector: dof out of range");
    const int f = mesh.free_index[dof];
    if (f < 0) throw ContractError("objective_selector: dof " + std::to_string(dof) + " is fixed");
    Eigen::VectorXd L = Eigen::VectorXd::Zero(mesh.num_free());
    L[f] = 1.0;
    return L;
}

#define SMP_INSTANTIATE_FEA(Real)                                                                              \
    template AssembledSystem<Real> assemble_system<Real>(                                                      \
        const Mesh&, const std::vector<BMatrix>&, const std::vector<BasicCoeffSet<Real>>&,                     \
        const std::vector<BasicStrainHistory<Real>>&, const std::vector<VoigtVector<Real>>&,                   \
        const VectorX<Real>&, int);                                                                            \
    template Eigen::SparseMatrix<Real> condense<Real>(const Eigen::SparseMatrix<Real>&, const Mesh&);          \
    template VectorX<Real> solve_step<Real>(const Eigen::SparseMatrix<Real>&, const VectorX<Real>&,            \
                                            const std::vector<int>&, const SolverOptions&);                    \
    template struct BasicForwardTrace<Real>;                                                                   \
    template BasicForwardTrace<Real> run_cycle<Real>(const Mesh&, const std::vector<double>&, const Schedule&, \
                                                     const PhaseParams&, const SolverOptions&);                \
    template VectorX<Real> evaluate_residual<Real>(                                                            \
        const Mesh&, const std::vector<BMatrix>&, const std::vector<BasicCoeffSet<Real>>&,                     \
        const std::vector<BasicStrainHistory<Real>>&, const std::vector<VoigtVector<Real>>&,                   \
        const VectorX<Real>&, const VectorX<Real>&);

SMP_INSTANTIATE_FEA(double)
SMP_INSTANTIATE_FEA(long double)
SMP_INSTANTIATE_FEA(Quad)

#undef SMP_INSTANTIATE_FEA

} // namespace smp
