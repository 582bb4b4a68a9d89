#pragma once

#include <array>

#include "lamecvx/errors.hpp"
#include "lamecvx/linalg.hpp"

namespace lamecvx {

/// The six-direction set and its rank-deficient projectors.
///
/// Directions come in sign-flip pairs per coordinate plane,
///   f1=(0,1,1)  f2=(0,1,-1)  f3=(1,0,1)  f4=(1,0,-1)  f5=(1,1,0)  f6=(1,-1,0),
/// all with |f|^2 = 2.  proj_i = Id - f_i f_i^T / 2 and
/// sum_i (1/4) proj_i = Id exactly.
struct DirectionTable {
  static constexpr double r0 = 1.0 / 18.0;

  /// f_i for i in 1..6.
  static std::array<int, 3> f(int i);
  static Vec3 f_vec(int i);
  /// Id - fhat otimes fhat for i in 1..6 (exact rational entries).
  static Mat3 proj(int i);
};

/// Gamma^2_{f_i}(K) from the closed-form coefficient formula.  Defined for
/// symmetric K with ||K - Id||_max <= r0; negative values (precondition
/// violations) raise out_of_ball_error.
double gamma_sq(const Mat3& K, int i);

/// sqrt of gamma_sq.
double gamma_coeff(const Mat3& K, int i);

/// sum_i Gamma^2_{f_i}(K) proj_i; equals K on the admissible ball.
Mat3 reconstruct(const Mat3& K);

/// Coefficients g_i >= 0 with sum_i g_i proj_i = (c/r0) Id - R, valid for
/// c > ||R||_max.
std::array<double, 6> decompose_shifted(const Mat3& R, double c);

}  // namespace lamecvx
