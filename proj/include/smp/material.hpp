// SPDX-License-Identifier: Apache-2.0
#pragma once

// Two-phase shape-memory-polymer constitutive model at a single material
// point: rubbery and glassy phases (each an equilibrium spring in parallel
// with a Maxwell branch), an interface dashpot and a stored strain that is
// frozen in as glass forms. Coefficient tensors are built once per element
// and time step; the state update advances the per-quadrature-point history.
//
// Forward operations are templated on the scalar type so the same model can
// be evaluated in extended precision. Design derivatives are double only.

#include <string>

#include "smp/voigt.hpp"

namespace smp {

struct PhaseConstants {
    double E_eq = 0;   // equilibrium modulus (Pa)
    double E_neq = 0;  // non-equilibrium (Maxwell) modulus (Pa)
    double eta = 0;    // phase viscosity (Pa s)
    double alpha = 0;  // thermal expansion (1/K)
};

/// Constants of one end of the design interpolation (rho = 0 or rho = 1).
struct MaterialEndpoint {
    PhaseConstants rubbery;
    PhaseConstants glassy;
    double eta_i = 0;  // interface viscosity (Pa s)
    double T_g = 0;    // transition temperature (K)
};

struct PhaseLaw {
    enum class Kind { logistic, constant };
    Kind kind = Kind::logistic;
    double steepness = 0.2;  // logistic slope (1/K)
    double phi_g = 0.0;      // glassy fraction of the constant law
};

struct PhaseParams {
    MaterialEndpoint lo;
    MaterialEndpoint hi;
    double nu = 0.3;
    PhaseLaw phase_law;
    double penal = 3.0;
    double rho_min = 1e-3;
    double T_ref = 0.0;  // thermal strain reference temperature (K)
    // When false the transition temperature is hi.T_g for every element and
    // the phase fractions do not depend on rho.
    bool rho_dependent_phase = false;

    /// Throws DomainError describing the first violated invariant.
    void validate() const;
};

template <typename Real>
struct Interpolated {
    Real value{};
    Real derivative{};  // d(value)/d(rho)
};

/// M(rho) = lo + rho^penal (hi - lo) and its rho-derivative.
template <typename Real>
Interpolated<Real> power_law(Real rho, double lo, double hi, double penal);

template <typename Real>
struct PhaseConstitutive {
    VoigtTensor<Real> K_eq, K_neq;
    VoigtTensor<Real> dK_eq, dK_neq;
    Real eta{}, d_eta{};
    Real alpha{}, d_alpha{};
};

template <typename Real>
struct InterpolatedMaterial {
    PhaseConstitutive<Real> rubbery;
    PhaseConstitutive<Real> glassy;
    Real eta_i{}, d_eta_i{};
    Real T_g{}, d_T_g{};
};

/// Throws DomainError when rho is outside [rho_min, 1].
template <typename Real>
InterpolatedMaterial<Real> interpolate_phase(Real rho, const PhaseParams& params);

template <typename Real>
struct PhaseFractions {
    Real phi_g{};      // glassy fraction at the current temperature
    Real phi_r{};      // 1 - phi_g
    Real dphi_g{};     // phi_g(T_now) - phi_g(T_prev)
    Real phi_g_rho{};  // d(phi_g)/d(rho)
    Real dphi_g_rho{}; // d(dphi_g)/d(rho)
};

/// Glassy fraction at temperature T and its derivative w.r.t. T_g.
template <typename Real>
Interpolated<Real> glassy_fraction(Real T, const PhaseLaw& law, Real T_g);

template <typename Real>
PhaseFractions<Real> phase_fractions(Real T_now, Real T_prev, const PhaseLaw& law, Real T_g,
                                     Real d_T_g = Real(0));

/// Fractions with the rho-independent transition temperature hi.T_g.
template <typename Real>
PhaseFractions<Real> phase_fractions(Real T_now, Real T_prev, const PhaseParams& params)
{
    return phase_fractions<Real>(T_now, T_prev, params.phase_law, Real(params.hi.T_g));
}

template <typename Real>
struct BasicCoeffSet {
    Real rho{};
    Real dt{};
    Real T_now{}, T_prev{};
    InterpolatedMaterial<Real> material;
    PhaseFractions<Real> fractions;

    VoigtTensor<Real> H_r, H_g, H_r_inv, H_g_inv;
    VoigtTensor<Real> B_r, B_g;
    VoigtTensor<Real> A_r, A_g, A_g_inv;
    VoigtTensor<Real> D, D_inv;
    // Residual history operators.
    VoigtTensor<Real> X_r, X_g, Y_r, V, Z;
};
using CoeffSet = BasicCoeffSet<double>;

/// Throws DomainError for dt < 0 and SingularOperatorError naming the tensor.
/// dt = 0 is admitted as the frozen-time limit.
template <typename Real>
BasicCoeffSet<Real> build_coeffs(Real rho, Real T_now, Real T_prev, Real dt, const PhaseParams& params);

template <typename Real>
struct BasicStrainHistory {
    VoigtVector<Real> eps_r = VoigtVector<Real>::Zero();
    VoigtVector<Real> eps_g = VoigtVector<Real>::Zero();
    VoigtVector<Real> eps_ir = VoigtVector<Real>::Zero();
    VoigtVector<Real> eps_ig = VoigtVector<Real>::Zero();
    VoigtVector<Real> eps_i = VoigtVector<Real>::Zero();
    VoigtVector<Real> eps_is = VoigtVector<Real>::Zero();
    VoigtVector<Real> eps_th = VoigtVector<Real>::Zero();
    int step = -1;  // -1 is the undeformed initial state

    template <typename Other>
    BasicStrainHistory<Other> cast() const
    {
        BasicStrainHistory<Other> out;
        out.eps_r = eps_r.template cast<Other>();
        out.eps_g = eps_g.template cast<Other>();
        out.eps_ir = eps_ir.template cast<Other>();
        out.eps_ig = eps_ig.template cast<Other>();
        out.eps_i = eps_i.template cast<Other>();
        out.eps_is = eps_is.template cast<Other>();
        out.eps_th = eps_th.template cast<Other>();
        out.step = step;
        return out;
    }
};
using StrainHistory = BasicStrainHistory<double>;
// The same layout holds d(field)/d(rho) for every field.
using StrainSensitivity = BasicStrainHistory<double>;

// Individual update kernels. state_update composes them in this order.

/// Right-hand side C of D eps_r = C.
template <typename Real>
VoigtVector<Real> rubbery_rhs(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_total,
                              const BasicStrainHistory<Real>& prev, const VoigtVector<Real>& eps_th);
template <typename Real>
VoigtVector<Real> glassy_strain(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_r,
                                const VoigtVector<Real>& eps_ir_prev, const VoigtVector<Real>& eps_ig_prev);
template <typename Real>
VoigtVector<Real> rubbery_viscous_strain(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_r,
                                         const VoigtVector<Real>& eps_ir_prev);
template <typename Real>
VoigtVector<Real> glassy_viscous_strain(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_g,
                                        const VoigtVector<Real>& eps_ig_prev);
template <typename Real>
VoigtVector<Real> interface_strain(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_r,
                                   const VoigtVector<Real>& eps_ir_prev, const VoigtVector<Real>& eps_i_prev);
template <typename Real>
VoigtVector<Real> stored_strain(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_r,
                                const VoigtVector<Real>& eps_is_prev);

/// Stress carried by the rubbery branch (equal to the glassy one):
/// sigma = A_r eps_r - B_r eps_ir_prev.
template <typename Real>
VoigtVector<Real> stress(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_r,
                         const VoigtVector<Real>& eps_ir_prev);

/// Advances one material point by one step. The returned history carries
/// step = hist_prev.step + 1.
template <typename Real>
BasicStrainHistory<Real> state_update(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_total,
                                      const BasicStrainHistory<Real>& hist_prev,
                                      const VoigtVector<Real>& eps_th);

/// (phi_r alpha_r + phi_g alpha_g)(T_now - T_ref) on the normal components.
template <typename Real>
VoigtVector<Real> thermal_strain(Real T_now, Real T_ref, const PhaseFractions<Real>& fractions,
                                 const InterpolatedMaterial<Real>& material);

// ---------------------------------------------------------------------------
// Design derivatives (explicit d/d rho at fixed total strain).

struct CoeffSensitivity {
    Mat3 dK_eq_r, dK_neq_r, dK_eq_g, dK_neq_g;
    double d_eta_r = 0, d_eta_g = 0, d_eta_i = 0;
    double d_alpha_r = 0, d_alpha_g = 0;
    double d_phi_g = 0, d_phi_r = 0, d_dphi_g = 0;

    Mat3 dH_r, dH_g, dH_r_inv, dH_g_inv;
    Mat3 dB_r, dB_g;
    Mat3 dA_r, dA_g, dA_g_inv;
    Mat3 dD, dD_inv;
};

CoeffSensitivity coeff_sensitivity(double rho, const CoeffSet& coeffs, const PhaseParams& params);

Vec3 thermal_strain_sensitivity(double T_now, double T_ref, const CoeffSet& coeffs, const CoeffSensitivity& sens);

/// Propagates d/d rho of every history field through one step, given the
/// previous step's sensitivities (zero before the first step) and the
/// forward states `prev` and `now`. Throws ContractError on step mismatch.
StrainSensitivity state_sensitivity(const CoeffSet& coeffs, const CoeffSensitivity& sens,
                                    const StrainHistory& prev, const StrainSensitivity& prev_sens,
                                    const StrainHistory& now, double T_ref);

/// d(sigma)/d(rho) at fixed total strain.
Vec3 stress_sensitivity(const CoeffSet& coeffs, const CoeffSensitivity& sens, const StrainHistory& prev,
                        const StrainSensitivity& prev_sens, const StrainHistory& now,
                        const StrainSensitivity& now_sens);

} // namespace smp
