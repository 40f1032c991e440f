// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Dense>

#include "forward_checks.hpp"
#include "smp/fea.hpp"
#include "smp/quad.hpp"
#include "support.hpp"

using namespace smp;
using namespace smp::test;

TEST_CASE("zero load at the reference temperature leaves the body at rest")
{
    CHECK(zero_load_displacement() == 0.0);
}

TEST_CASE("one-element bar matches the analytic extension")
{
    CHECK(bar_extension_error() < 1e-6);
}

TEST_CASE("linear solver on small systems")
{
    SUBCASE("identity tangent returns the load")
    {
        Eigen::SparseMatrix<double> I(5, 5);
        I.setIdentity();
        Eigen::VectorXd F(5);
        F << 1, -2, 3, 0.5, 7;
        const Eigen::VectorXd u = solve_step<double>(I, F, {1, 3});
        CHECK(u[0] == 1.0);
        CHECK(u[1] == 0.0);
        CHECK(u[2] == 3.0);
        CHECK(u[3] == 0.0);
        CHECK(u[4] == 7.0);
    }
    SUBCASE("random SPD system against a dense solve, direct and iterative")
    {
        std::mt19937 rng(12);
        const int n = 20;
        Eigen::MatrixXd A(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A(i, j) = uniform(rng, -1.0, 1.0);
        const Eigen::MatrixXd K = A * A.transpose() + n * Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd F(n);
        for (int i = 0; i < n; ++i) F[i] = uniform(rng, -1.0, 1.0);
        const Eigen::VectorXd ref = K.ldlt().solve(F);
        const Eigen::SparseMatrix<double> Ks = K.sparseView();
        CHECK(rel_diff(solve_step<double>(Ks, F, {}), ref) < 1e-10);
        SolverOptions it;
        it.linear = SolverOptions::Linear::iterative;
        CHECK(rel_diff(solve_step<double>(Ks, F, {}, it), ref) < 1e-10);
    }
    SUBCASE("singular system is reported")
    {
        Eigen::SparseMatrix<double> Z(3, 3);
        Z.insert(0, 0) = 1.0;
        CHECK_THROWS_AS(solve_step<double>(Z, Eigen::VectorXd::Ones(3), {}), SolverError);
    }
}

TEST_CASE("unsupported body fails with the step index")
{
    std::mt19937 rng(4);
    Problem pb = random_problem(rng, 2, 1, 2);
    Mesh floating = pb.mesh;
    floating.fixed_dofs.clear();
    floating.free_dofs.clear();
    for (int d = 0; d < floating.num_dofs; ++d) {
        floating.free_index[d] = d;
        floating.free_dofs.push_back(d);
    }
    CHECK_THROWS_WITH_AS(run_cycle<double>(floating, pb.rho, pb.schedule, pb.params), doctest::Contains("step 0"),
                         SolverError);
}

TEST_CASE("assembled system and residual agree")
{
    std::mt19937 rng(31);
    const Problem pb = random_problem(rng, 3, 2, 3);
    const auto trace = run_cycle<double>(pb.mesh, pb.rho, pb.schedule, pb.params);
    const int s = 2;
    std::vector<StrainHistory> prev;
    for (int e = 0; e < pb.mesh.num_elements(); ++e)
        for (int q = 0; q < kGaussPoints; ++q) prev.push_back(trace.history_before(s, e, q));
    const auto& rec = trace.steps[s];
    const auto sys = assemble_system<double>(pb.mesh, trace.B, rec.coeffs, prev, rec.eps_th, rec.f_ext);

    Eigen::VectorXd u(pb.mesh.num_dofs);
    for (int d = 0; d < u.size(); ++d) u[d] = uniform(rng, -1e-2, 1e-2);
    const Eigen::VectorXd r = evaluate_residual<double>(pb.mesh, trace.B, rec.coeffs, prev, rec.eps_th, rec.f_ext, u);
    CHECK(rel_diff(r, Eigen::VectorXd(sys.tangent * u - sys.load)) < 1e-12);

    // Directional derivative of the residual versus the tangent.
    Eigen::VectorXd d(pb.mesh.num_dofs);
    for (int k = 0; k < d.size(); ++k) d[k] = uniform(rng, -1.0, 1.0);
    const double h = 1e-6;
    const Eigen::VectorXd rp =
        evaluate_residual<double>(pb.mesh, trace.B, rec.coeffs, prev, rec.eps_th, rec.f_ext, Eigen::VectorXd(u + h * d));
    const Eigen::VectorXd rm =
        evaluate_residual<double>(pb.mesh, trace.B, rec.coeffs, prev, rec.eps_th, rec.f_ext, Eigen::VectorXd(u - h * d));
    CHECK(rel_diff(Eigen::VectorXd((rp - rm) / (2 * h)), Eigen::VectorXd(sys.tangent * d)) < 1e-6);

    // The recorded residual at the solution is certified.
    for (const auto& st : trace.steps) CHECK(st.residual_norm <= 1e-10 * st.load_norm);
}

TEST_CASE("single-element histories compose two state updates")
{
    std::mt19937 rng(8);
    const Problem pb = random_problem(rng, 1, 1, 2);
    const auto trace = run_cycle<double>(pb.mesh, pb.rho, pb.schedule, pb.params);
    const auto dofs = pb.mesh.element_dofs(0);
    for (int q = 0; q < kGaussPoints; ++q) {
        StrainHistory h;
        for (int s = 0; s < 2; ++s) {
            Eigen::Matrix<double, 8, 1> ue;
            for (int a = 0; a < 8; ++a) ue[a] = trace.steps[s].u[dofs[a]];
            const Vec3 eps = trace.B[q].B * ue;
            const auto& c = trace.steps[s].coeffs[0];
            const Vec3 th = thermal_strain<double>(pb.schedule.steps[s].T, pb.params.T_ref, c.fractions, c.material);
            h = state_update<double>(c, eps, h, th);
        }
        const auto& rec = trace.steps[1].history[q];
        CHECK(max_abs_diff(h.eps_r, rec.eps_r) == 0.0);
        CHECK(max_abs_diff(h.eps_ir, rec.eps_ir) == 0.0);
        CHECK(max_abs_diff(h.eps_is, rec.eps_is) == 0.0);
        CHECK(rec.step == 1);
    }
}

TEST_CASE("replayed residual reproduces the trace")
{
    std::mt19937 rng(17);
    const Problem pb = random_problem(rng, 3, 2, 4);
    const auto trace = run_cycle<double>(pb.mesh, pb.rho, pb.schedule, pb.params);
    std::vector<Eigen::VectorXd> u;
    for (const auto& st : trace.steps) u.push_back(st.u);
    for (int k = 0; k < trace.num_steps(); ++k) {
        const Eigen::VectorXd r = replay_residual(trace, k, u);
        Eigen::VectorXd r_free(pb.mesh.num_free());
        for (int i = 0; i < pb.mesh.num_free(); ++i) r_free[i] = r[pb.mesh.free_dofs[i]];
        CHECK(max_abs_diff(r_free, trace.steps[k].residual) <= 1e-14 * trace.steps[k].f_ext.norm() + 1e-18);
    }
    CHECK_THROWS_AS(replay_residual(trace, 2, {u[0]}), ContractError);
}

TEST_CASE("worker count and solver choice")
{
    std::mt19937 rng(23);
    const Problem pb = random_problem(rng, 6, 3, 4);
    const auto ref = run_cycle<double>(pb.mesh, pb.rho, pb.schedule, pb.params);
    for (int w : {2, 3, 8}) {
        SolverOptions opts;
        opts.workers = w;
        const auto t = run_cycle<double>(pb.mesh, pb.rho, pb.schedule, pb.params, opts);
        for (int s = 0; s < t.num_steps(); ++s) CHECK(max_abs_diff(t.steps[s].u, ref.steps[s].u) == 0.0);
    }
    SolverOptions it;
    it.linear = SolverOptions::Linear::iterative;
    const auto ti = run_cycle<double>(pb.mesh, pb.rho, pb.schedule, pb.params, it);
    for (int s = 0; s < ti.num_steps(); ++s) CHECK(rel_diff(ti.steps[s].u, ref.steps[s].u) < 1e-9);
}

TEST_CASE("extended and quad precision forward runs agree with double")
{
    std::mt19937 rng(29);
    const Problem pb = random_problem(rng, 4, 2, 3);
    const double d = evaluate_objective<double>(pb, pb.rho);
    const long double l = evaluate_objective<long double>(pb, pb.rho);
    const Quad q = evaluate_objective<Quad>(pb, pb.rho);
    CHECK(std::abs(d - static_cast<double>(l)) <= 1e-11 * std::abs(d));
    CHECK(std::abs(d - static_cast<double>(q)) <= 1e-11 * std::abs(d));
}

TEST_CASE("objective and selector")
{
    std::mt19937 rng(2);
    const Problem pb = random_problem(rng, 2, 1, 1);
    auto trace = run_cycle<double>(pb.mesh, pb.rho, pb.schedule, pb.params);
    const int a = pb.objective.dof;
    trace.steps[0].u.setZero();
    CHECK(objective(trace, a, 0) == 0.0);
    trace.steps[0].u[a] = 1.0;
    CHECK(objective(trace, a, 0) == 1.0);
    CHECK_THROWS_AS(objective(trace, a, 1), ContractError);

    const Eigen::VectorXd L = objective_selector(pb.mesh, a);
    CHECK(L.sum() == 1.0);
    CHECK(L[pb.mesh.free_index[a]] == 1.0);
    CHECK_THROWS_AS(objective_selector(pb.mesh, 0), ContractError);  // clamped dof
}

TEST_CASE("design field size is checked")
{
    std::mt19937 rng(3);
    const Problem pb = random_problem(rng, 2, 2, 1);
    CHECK_THROWS_AS(run_cycle<double>(pb.mesh, std::vector<double>(3, 0.5), pb.schedule, pb.params), ContractError);
}

TEST_CASE("preset cycle stores a downward tip deflection")
{
    const Problem pb = parse_config(preset("verify45.json"));
    const auto trace = run_cycle<double>(pb.mesh, pb.rho, objective_schedule(pb), pb.params);
    const double tip = objective(trace, pb.objective.dof, pb.objective.step);
    CHECK(tip < 0.0);
    CHECK(std::abs(tip) > 1e-3);
    CHECK(std::abs(tip) < 1e-1);
}
