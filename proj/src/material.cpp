// SPDX-License-Identifier: Apache-2.0
#include "smp/material.hpp"

#include <cmath>
#include <sstream>

#include "smp/quad.hpp"

namespace smp {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok) throw DomainError("material parameters: " + what);
}

void validate_phase(const PhaseConstants& p, const std::string& name)
{
    require(p.E_eq > 0, name + ".E_eq must be > 0");
    require(p.E_neq > 0, name + ".E_neq must be > 0");
    require(p.eta > 0, name + ".eta must be > 0");
    require(std::isfinite(p.alpha), name + ".alpha must be finite");
}

template <typename Real>
PhaseConstitutive<Real> interpolate_constants(Real rho, const PhaseConstants& lo, const PhaseConstants& hi,
                                              const PhaseParams& params)
{
    const Real nu = params.nu;
    const auto E_eq = power_law<Real>(rho, lo.E_eq, hi.E_eq, params.penal);
    const auto E_neq = power_law<Real>(rho, lo.E_neq, hi.E_neq, params.penal);
    const auto eta = power_law<Real>(rho, lo.eta, hi.eta, params.penal);
    const auto alpha = power_law<Real>(rho, lo.alpha, hi.alpha, params.penal);
    // Stiffness is linear in E, so dK/drho = K(dE/drho).
    PhaseConstitutive<Real> out;
    out.K_eq = isotropic_stiffness<Real>(E_eq.value, nu);
    out.K_neq = isotropic_stiffness<Real>(E_neq.value, nu);
    out.dK_eq = isotropic_stiffness<Real>(E_eq.derivative, nu);
    out.dK_neq = isotropic_stiffness<Real>(E_neq.derivative, nu);
    out.eta = eta.value;
    out.d_eta = eta.derivative;
    out.alpha = alpha.value;
    out.d_alpha = alpha.derivative;
    return out;
}

// H = I + (dt/eta) K_neq, B = H^-1 K_neq, A = K_neq + K_eq - (dt/eta) K_neq H^-1 K_neq.
template <typename Real>
void build_phase(const PhaseConstitutive<Real>& p, Real dt, const char* h_name, VoigtTensor<Real>& H,
                 VoigtTensor<Real>& H_inv, VoigtTensor<Real>& B, VoigtTensor<Real>& A)
{
    const Real c = dt / p.eta;
    H = VoigtTensor<Real>::Identity() + c * p.K_neq;
    H_inv = checked_inverse<Real>(H, h_name);
    B = H_inv * p.K_neq;
    A = p.K_neq + p.K_eq - c * p.K_neq * H_inv * p.K_neq;
}

} // namespace

void PhaseParams::validate() const
{
    validate_phase(lo.rubbery, "lo.rubbery");
    validate_phase(lo.glassy, "lo.glassy");
    validate_phase(hi.rubbery, "hi.rubbery");
    validate_phase(hi.glassy, "hi.glassy");
    require(lo.eta_i > 0 && hi.eta_i > 0, "eta_i must be > 0");
    require(nu > 0 && nu < 0.5, "nu must lie in (0, 0.5)");
    require(rho_min > 0 && rho_min < 1, "rho_min must lie in (0, 1)");
    require(penal >= 1, "penal must be >= 1");
    require(std::isfinite(T_ref), "T_ref must be finite");
    if (phase_law.kind == PhaseLaw::Kind::logistic) {
        require(phase_law.steepness > 0, "phase law steepness must be > 0");
    } else {
        require(phase_law.phi_g >= 0 && phase_law.phi_g <= 1, "constant phi_g must lie in [0, 1]");
    }
}

template <typename Real>
Interpolated<Real> power_law(Real rho, double lo, double hi, double penal)
{
    using std::pow;
    const Real p = penal;
    const Real span = Real(hi) - Real(lo);
    return {Real(lo) + pow(rho, p) * span, p * pow(rho, p - 1) * span};
}

template <typename Real>
InterpolatedMaterial<Real> interpolate_phase(Real rho, const PhaseParams& params)
{
    if (!(rho >= Real(params.rho_min) && rho <= Real(1))) {
        std::ostringstream msg;
        msg << "rho = " << static_cast<double>(rho) << " outside [" << params.rho_min << ", 1]";
        throw DomainError(msg.str());
    }
    InterpolatedMaterial<Real> m;
    m.rubbery = interpolate_constants<Real>(rho, params.lo.rubbery, params.hi.rubbery, params);
    m.glassy = interpolate_constants<Real>(rho, params.lo.glassy, params.hi.glassy, params);
    const auto eta_i = power_law<Real>(rho, params.lo.eta_i, params.hi.eta_i, params.penal);
    m.eta_i = eta_i.value;
    m.d_eta_i = eta_i.derivative;
    if (params.rho_dependent_phase) {
        const auto T_g = power_law<Real>(rho, params.lo.T_g, params.hi.T_g, params.penal);
        m.T_g = T_g.value;
        m.d_T_g = T_g.derivative;
    } else {
        m.T_g = params.hi.T_g;
        m.d_T_g = 0;
    }
    return m;
}

template <typename Real>
Interpolated<Real> glassy_fraction(Real T, const PhaseLaw& law, Real T_g)
{
    using std::exp;
    if (law.kind == PhaseLaw::Kind::constant) return {Real(law.phi_g), Real(0)};
    const Real s = law.steepness;
    const Real x = s * (T - T_g);
    // Evaluate with exp of a non-positive argument; forming 1 - phi directly
    // loses the derivative to cancellation once phi saturates.
    if (x > 0) {
        const Real e = exp(-x);
        return {e / (Real(1) + e), s * e / ((Real(1) + e) * (Real(1) + e))};
    }
    const Real e = exp(x);
    return {Real(1) / (Real(1) + e), s * e / ((Real(1) + e) * (Real(1) + e))};
}

template <typename Real>
PhaseFractions<Real> phase_fractions(Real T_now, Real T_prev, const PhaseLaw& law, Real T_g, Real d_T_g)
{
    const auto now = glassy_fraction<Real>(T_now, law, T_g);
    const auto prev = glassy_fraction<Real>(T_prev, law, T_g);
    PhaseFractions<Real> f;
    f.phi_g = now.value;
    f.phi_r = Real(1) - now.value;
    f.dphi_g = now.value - prev.value;
    f.phi_g_rho = now.derivative * d_T_g;
    f.dphi_g_rho = (now.derivative - prev.derivative) * d_T_g;
    return f;
}

template <typename Real>
BasicCoeffSet<Real> build_coeffs(Real rho, Real T_now, Real T_prev, Real dt, const PhaseParams& params)
{
    if (!(dt >= 0)) throw DomainError("build_coeffs: dt must be >= 0");
    using Tensor = VoigtTensor<Real>;
    BasicCoeffSet<Real> c;
    c.rho = rho;
    c.dt = dt;
    c.T_now = T_now;
    c.T_prev = T_prev;
    c.material = interpolate_phase<Real>(rho, params);
    c.fractions = phase_fractions<Real>(T_now, T_prev, params.phase_law, c.material.T_g, c.material.d_T_g);

    build_phase<Real>(c.material.rubbery, dt, "H_r", c.H_r, c.H_r_inv, c.B_r, c.A_r);
    build_phase<Real>(c.material.glassy, dt, "H_g", c.H_g, c.H_g_inv, c.B_g, c.A_g);
    c.A_g_inv = checked_inverse<Real>(c.A_g, "A_g");

    const auto& f = c.fractions;
    const Real ci = dt / c.material.eta_i;
    c.D = (f.phi_r + f.dphi_g) * Tensor::Identity() + f.phi_g * c.A_g_inv * c.A_r + ci * c.A_r;
    c.D_inv = checked_inverse<Real>(c.D, "D");

    const Tensor AD = c.A_r * c.D_inv;
    c.X_r = AD * f.phi_g * c.A_g_inv * c.B_r;
    c.X_g = AD * f.phi_g * c.A_g_inv * c.B_g;
    c.Y_r = AD * ci * c.B_r;
    c.V = AD;
    c.Z = AD;
    return c;
}

template <typename Real>
VoigtVector<Real> rubbery_rhs(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_total,
                              const BasicStrainHistory<Real>& prev, const VoigtVector<Real>& eps_th)
{
    const Real ci = c.dt / c.material.eta_i;
    const VoigtVector<Real> branch = -c.B_r * prev.eps_ir + c.B_g * prev.eps_ig;
    return eps_total + c.fractions.phi_g * (c.A_g_inv * branch) + ci * (c.B_r * prev.eps_ir) - prev.eps_i -
           prev.eps_is - eps_th;
}

template <typename Real>
VoigtVector<Real> glassy_strain(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_r,
                                const VoigtVector<Real>& eps_ir_prev, const VoigtVector<Real>& eps_ig_prev)
{
    return c.A_g_inv * (c.A_r * eps_r - c.B_r * eps_ir_prev + c.B_g * eps_ig_prev);
}

template <typename Real>
VoigtVector<Real> rubbery_viscous_strain(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_r,
                                         const VoigtVector<Real>& eps_ir_prev)
{
    const Real cr = c.dt / c.material.rubbery.eta;
    return c.H_r_inv * eps_ir_prev + cr * (c.H_r_inv * (c.material.rubbery.K_neq * eps_r));
}

template <typename Real>
VoigtVector<Real> glassy_viscous_strain(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_g,
                                        const VoigtVector<Real>& eps_ig_prev)
{
    const Real cg = c.dt / c.material.glassy.eta;
    return c.H_g_inv * eps_ig_prev + cg * (c.H_g_inv * (c.material.glassy.K_neq * eps_g));
}

template <typename Real>
VoigtVector<Real> interface_strain(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_r,
                                   const VoigtVector<Real>& eps_ir_prev, const VoigtVector<Real>& eps_i_prev)
{
    const Real ci = c.dt / c.material.eta_i;
    return eps_i_prev + ci * (c.A_r * eps_r - c.B_r * eps_ir_prev);
}

template <typename Real>
VoigtVector<Real> stored_strain(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_r,
                                const VoigtVector<Real>& eps_is_prev)
{
    return eps_is_prev + c.fractions.dphi_g * eps_r;
}

template <typename Real>
VoigtVector<Real> stress(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_r,
                         const VoigtVector<Real>& eps_ir_prev)
{
    return c.A_r * eps_r - c.B_r * eps_ir_prev;
}

template <typename Real>
BasicStrainHistory<Real> state_update(const BasicCoeffSet<Real>& c, const VoigtVector<Real>& eps_total,
                                      const BasicStrainHistory<Real>& prev, const VoigtVector<Real>& eps_th)
{
    BasicStrainHistory<Real> next;
    next.step = prev.step + 1;
    next.eps_th = eps_th;
    next.eps_r = c.D_inv * rubbery_rhs<Real>(c, eps_total, prev, eps_th);
    next.eps_g = glassy_strain<Real>(c, next.eps_r, prev.eps_ir, prev.eps_ig);
    next.eps_ir = rubbery_viscous_strain<Real>(c, next.eps_r, prev.eps_ir);
    next.eps_ig = glassy_viscous_strain<Real>(c, next.eps_g, prev.eps_ig);
    next.eps_i = interface_strain<Real>(c, next.eps_r, prev.eps_ir, prev.eps_i);
    next.eps_is = stored_strain<Real>(c, next.eps_r, prev.eps_is);
    return next;
}

template <typename Real>
VoigtVector<Real> thermal_strain(Real T_now, Real T_ref, const PhaseFractions<Real>& f,
                                 const InterpolatedMaterial<Real>& m)
{
    const Real slope = f.phi_r * m.rubbery.alpha + f.phi_g * m.glassy.alpha;
    const Real e = slope * (T_now - T_ref);
    return VoigtVector<Real>(e, e, Real(0));
}

// ---------------------------------------------------------------------------

namespace {

struct PhaseDerivatives {
    Mat3 dH, dH_inv, dB, dA;
};

PhaseDerivatives phase_derivatives(const PhaseConstitutive<double>& p, double dt, const Mat3& H_inv)
{
    const double c = dt / p.eta;
    const double dc = -dt * p.d_eta / (p.eta * p.eta);
    PhaseDerivatives d;
    d.dH = c * p.dK_neq + dc * p.K_neq;
    d.dH_inv = -H_inv * d.dH * H_inv;
    d.dB = d.dH_inv * p.K_neq + H_inv * p.dK_neq;
    d.dA = p.dK_neq + p.dK_eq - c * p.dK_neq * H_inv * p.K_neq - c * p.K_neq * d.dH_inv * p.K_neq -
           c * p.K_neq * H_inv * p.dK_neq - dc * p.K_neq * H_inv * p.K_neq;
    return d;
}

} // namespace

CoeffSensitivity coeff_sensitivity(double rho, const CoeffSet& c, const PhaseParams& params)
{
    (void)params;
    if (rho != c.rho) throw ContractError("coeff_sensitivity: coefficients were built for a different rho");
    const auto& m = c.material;
    const auto& f = c.fractions;
    CoeffSensitivity s;
    s.dK_eq_r = m.rubbery.dK_eq;
    s.dK_neq_r = m.rubbery.dK_neq;
    s.dK_eq_g = m.glassy.dK_eq;
    s.dK_neq_g = m.glassy.dK_neq;
    s.d_eta_r = m.rubbery.d_eta;
    s.d_eta_g = m.glassy.d_eta;
    s.d_eta_i = m.d_eta_i;
    s.d_alpha_r = m.rubbery.d_alpha;
    s.d_alpha_g = m.glassy.d_alpha;
    s.d_phi_g = f.phi_g_rho;
    s.d_phi_r = -f.phi_g_rho;
    s.d_dphi_g = f.dphi_g_rho;

    const auto r = phase_derivatives(m.rubbery, c.dt, c.H_r_inv);
    const auto g = phase_derivatives(m.glassy, c.dt, c.H_g_inv);
    s.dH_r = r.dH;
    s.dH_r_inv = r.dH_inv;
    s.dB_r = r.dB;
    s.dA_r = r.dA;
    s.dH_g = g.dH;
    s.dH_g_inv = g.dH_inv;
    s.dB_g = g.dB;
    s.dA_g = g.dA;
    s.dA_g_inv = -c.A_g_inv * s.dA_g * c.A_g_inv;

    const double ci = c.dt / m.eta_i;
    const double dci = -c.dt * m.d_eta_i / (m.eta_i * m.eta_i);
    s.dD = (s.d_phi_r + s.d_dphi_g) * Mat3::Identity() + s.d_phi_g * c.A_g_inv * c.A_r +
           f.phi_g * (s.dA_g_inv * c.A_r + c.A_g_inv * s.dA_r) + ci * s.dA_r + dci * c.A_r;
    s.dD_inv = -c.D_inv * s.dD * c.D_inv;
    return s;
}

Vec3 thermal_strain_sensitivity(double T_now, double T_ref, const CoeffSet& c, const CoeffSensitivity& s)
{
    const auto& f = c.fractions;
    const auto& m = c.material;
    const double d_slope = s.d_phi_r * m.rubbery.alpha + f.phi_r * s.d_alpha_r + s.d_phi_g * m.glassy.alpha +
                           f.phi_g * s.d_alpha_g;
    const double e = d_slope * (T_now - T_ref);
    return Vec3(e, e, 0);
}

StrainSensitivity state_sensitivity(const CoeffSet& c, const CoeffSensitivity& s, const StrainHistory& prev,
                                    const StrainSensitivity& prev_sens, const StrainHistory& now, double T_ref)
{
    if (now.step != prev.step + 1 || prev_sens.step != prev.step) {
        throw ContractError("state_sensitivity: step mismatch (prev " + std::to_string(prev.step) + ", now " +
                            std::to_string(now.step) + ", sens " + std::to_string(prev_sens.step) + ")");
    }
    const auto& m = c.material;
    const auto& f = c.fractions;
    const double ci = c.dt / m.eta_i;
    const double dci = -c.dt * s.d_eta_i / (m.eta_i * m.eta_i);

    StrainSensitivity d;
    d.step = now.step;
    d.eps_th = thermal_strain_sensitivity(c.T_now, T_ref, c, s);

    // Branch term of C and its derivative.
    const Vec3 branch = -c.B_r * prev.eps_ir + c.B_g * prev.eps_ig;
    const Vec3 d_branch =
        -s.dB_r * prev.eps_ir - c.B_r * prev_sens.eps_ir + s.dB_g * prev.eps_ig + c.B_g * prev_sens.eps_ig;
    const Vec3 dC = s.d_phi_g * (c.A_g_inv * branch) + f.phi_g * (s.dA_g_inv * branch + c.A_g_inv * d_branch) +
                    ci * (s.dB_r * prev.eps_ir + c.B_r * prev_sens.eps_ir) + dci * (c.B_r * prev.eps_ir) -
                    prev_sens.eps_i - prev_sens.eps_is - d.eps_th;
    d.eps_r = c.D_inv * (dC - s.dD * now.eps_r);

    const Vec3 glassy_arg = c.A_r * now.eps_r + branch;
    const Vec3 d_glassy_arg = s.dA_r * now.eps_r + c.A_r * d.eps_r + d_branch;
    d.eps_g = s.dA_g_inv * glassy_arg + c.A_g_inv * d_glassy_arg;

    auto viscous = [&](const PhaseConstitutive<double>& p, double d_eta, const Mat3& H_inv, const Mat3& dH_inv,
                       const Mat3& dK_neq, const Vec3& prev_v, const Vec3& d_prev_v, const Vec3& e, const Vec3& de) {
        const double cp = c.dt / p.eta;
        const double dcp = -c.dt * d_eta / (p.eta * p.eta);
        const Vec3 inner = prev_v + cp * (p.K_neq * e);
        const Vec3 d_inner = d_prev_v + dcp * (p.K_neq * e) + cp * (dK_neq * e) + cp * (p.K_neq * de);
        return Vec3(dH_inv * inner + H_inv * d_inner);
    };
    d.eps_ir = viscous(m.rubbery, s.d_eta_r, c.H_r_inv, s.dH_r_inv, s.dK_neq_r, prev.eps_ir, prev_sens.eps_ir,
                       now.eps_r, d.eps_r);
    d.eps_ig = viscous(m.glassy, s.d_eta_g, c.H_g_inv, s.dH_g_inv, s.dK_neq_g, prev.eps_ig, prev_sens.eps_ig,
                       now.eps_g, d.eps_g);

    const Vec3 flow = c.A_r * now.eps_r - c.B_r * prev.eps_ir;
    const Vec3 d_flow = s.dA_r * now.eps_r + c.A_r * d.eps_r - s.dB_r * prev.eps_ir - c.B_r * prev_sens.eps_ir;
    d.eps_i = prev_sens.eps_i + ci * d_flow + dci * flow;
    d.eps_is = prev_sens.eps_is + f.dphi_g * d.eps_r + s.d_dphi_g * now.eps_r;
    return d;
}

Vec3 stress_sensitivity(const CoeffSet& c, const CoeffSensitivity& s, const StrainHistory& prev,
                        const StrainSensitivity& prev_sens, const StrainHistory& now,
                        const StrainSensitivity& now_sens)
{
    return s.dA_r * now.eps_r + c.A_r * now_sens.eps_r - s.dB_r * prev.eps_ir - c.B_r * prev_sens.eps_ir;
}

// ---------------------------------------------------------------------------

#define SMP_INSTANTIATE_MATERIAL(Real)                                                                         \
    template Interpolated<Real> power_law<Real>(Real, double, double, double);                                 \
    template InterpolatedMaterial<Real> interpolate_phase<Real>(Real, const PhaseParams&);                     \
    template Interpolated<Real> glassy_fraction<Real>(Real, const PhaseLaw&, Real);                            \
    template PhaseFractions<Real> phase_fractions<Real>(Real, Real, const PhaseLaw&, Real, Real);              \
    template BasicCoeffSet<Real> build_coeffs<Real>(Real, Real, Real, Real, const PhaseParams&);               \
    template VoigtVector<Real> rubbery_rhs<Real>(const BasicCoeffSet<Real>&, const VoigtVector<Real>&,         \
                                                 const BasicStrainHistory<Real>&, const VoigtVector<Real>&);   \
    template VoigtVector<Real> glassy_strain<Real>(const BasicCoeffSet<Real>&, const VoigtVector<Real>&,       \
                                                   const VoigtVector<Real>&, const VoigtVector<Real>&);        \
    template VoigtVector<Real> rubbery_viscous_strain<Real>(const BasicCoeffSet<Real>&,                        \
                                                            const VoigtVector<Real>&, const VoigtVector<Real>&); \
    template VoigtVector<Real> glassy_viscous_strain<Real>(const BasicCoeffSet<Real>&, const VoigtVector<Real>&, \
                                                           const VoigtVector<Real>&);                          \
    template VoigtVector<Real> interface_strain<Real>(const BasicCoeffSet<Real>&, const VoigtVector<Real>&,    \
                                                      const VoigtVector<Real>&, const VoigtVector<Real>&);     \
    template VoigtVector<Real> stored_strain<Real>(const BasicCoeffSet<Real>&, const VoigtVector<Real>&,       \
                                                   const VoigtVector<Real>&);                                  \
    template VoigtVector<Real> stress<Real>(const BasicCoeffSet<Real>&, const VoigtVector<Real>&,              \
                                            const VoigtVector<Real>&);                                         \
    template BasicStrainHistory<Real> state_update<Real>(const BasicCoeffSet<Real>&, const VoigtVector<Real>&, \
                                                         const BasicStrainHistory<Real>&,                      \
                                                         const VoigtVector<Real>&);                            \
    template VoigtVector<Real> thermal_strain<Real>(Real, Real, const PhaseFractions<Real>&,                   \
                                                    const InterpolatedMaterial<Real>&);

SMP_INSTANTIATE_MATERIAL(double)
SMP_INSTANTIATE_MATERIAL(long double)
SMP_INSTANTIATE_MATERIAL(Quad)

#undef SMP_INSTANTIATE_MATERIAL

} // namespace smp
