// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "smp/errors.hpp"

namespace smp {

// Plane-strain Voigt notation: [xx, yy, xy] with engineering shear strain.
template <typename Real>
using VoigtTensor = Eigen::Matrix<Real, 3, 3>;
template <typename Real>
using VoigtVector = Eigen::Matrix<Real, 3, 1>;

using Mat3 = VoigtTensor<double>;
using Vec3 = VoigtVector<double>;

/// Isotropic plane-strain stiffness for modulus E and Poisson ratio nu.
template <typename Real>
VoigtTensor<Real> isotropic_stiffness(Real E, Real nu)
{
    const Real lambda = E * nu / ((1 + nu) * (1 - 2 * nu));
    const Real mu = E / (2 * (1 + nu));
    VoigtTensor<Real> K;
    K << lambda + 2 * mu, lambda, 0,
         lambda, lambda + 2 * mu, 0,
         0, 0, mu;
    return K;
}

/// Inverse of a 3x3 operator; throws SingularOperatorError naming `name`
/// when the determinant is negligible relative to the entry scale.
template <typename Real>
VoigtTensor<Real> checked_inverse(const VoigtTensor<Real>& m, const char* name)
{
    using std::abs;
    const Real scale = m.cwiseAbs().maxCoeff();
    const Real det = m.determinant();
    if (!(scale > 0) || !std::isfinite(static_cast<double>(det)) ||
        abs(det) <= Real(1e-13) * scale * scale * scale) {
        throw SingularOperatorError(name);
    }
    return m.inverse();
}

} // namespace smp
