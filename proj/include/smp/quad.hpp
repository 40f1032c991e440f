// SPDX-License-Identifier: Apache-2.0
#pragma once

// 113-bit binary floating point for the finite-difference oracle.

#include <Eigen/Dense>
#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/float128.hpp>

namespace smp {

using Quad = boost::multiprecision::float128;

} // namespace smp
