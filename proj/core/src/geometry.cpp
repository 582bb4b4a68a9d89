#include "lamecvx/geometry.hpp"

#include <cmath>
#include <sstream>

namespace lamecvx {

std::array<int, 3> DirectionTable::f(int i) {
  switch (i) {
    case 1: return {0, 1, 1};
    case 2: return {0, 1, -1};
    case 3: return {1, 0, 1};
    case 4: return {1, 0, -1};
    case 5: return {1, 1, 0};
    case 6: return {1, -1, 0};
    default: throw error("DirectionTable: index must be in 1..6");
  }
}

Vec3 DirectionTable::f_vec(int i) {
  const auto a = f(i);
  Vec3 v;
  for (int j = 0; j < 3; ++j) v[j] = static_cast<double>(a[static_cast<size_t>(j)]);
  return v;
}

Mat3 DirectionTable::proj(int i) {
  const Vec3 fv = f_vec(i);
  Mat3 p = identity3();
  // |f|^2 = 2 for every direction, so fhat x fhat = f x f / 2 with exact halves.
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p(r, c) -= fv[r] * fv[c] / 2.0;
  return p;
}

namespace {

// Axis served by direction pair (f_{2a-1}, f_{2a}) and the two complementary axes.
void axes_of(int i, int& a, int& bcomp, int& ccomp) {
  a = (i + 1) / 2 - 1;  // i in 1..6 -> axis 0..2
  bcomp = (a + 1) % 3;
  ccomp = (a + 2) % 3;
}

}  // namespace

double gamma_sq(const Mat3& K, int i) {
  if (i < 1 || i > 6) throw error("gamma_sq: index must be in 1..6");
  const Mat3 E = K - identity3();
  if (max_norm(E) > DirectionTable::r0 + 1e-14) {
    std::ostringstream os;
    os << "gamma_sq: ||K - Id||_max = " << max_norm(E) << " exceeds r0 = "
       << DirectionTable::r0;
    throw out_of_ball_error(os.str());
  }
  int a, bb, cc;
  axes_of(i, a, bb, cc);
  // even-index directions carry the + sign on the off-diagonal pair
  const double sign = (i % 2 == 0) ? 1.0 : -1.0;
  const double v =
      (3.0 * K(a, a) + sign * 4.0 * K(bb, cc) - K(bb, bb) - K(cc, cc)) / 4.0;
  if (v < -1e-14) {
    std::ostringstream os;
    os << "gamma_sq: negative coefficient " << v << " for direction " << i
       << " (input outside the admissible ball)";
    throw out_of_ball_error(os.str());
  }
  return v < 0.0 ? 0.0 : v;
}

double gamma_coeff(const Mat3& K, int i) { return std::sqrt(gamma_sq(K, i)); }

Mat3 reconstruct(const Mat3& K) {
  Mat3 r;
  for (int i = 1; i <= 6; ++i) r = r + gamma_sq(K, i) * DirectionTable::proj(i);
  return r;
}

std::array<double, 6> decompose_shifted(const Mat3& R, double c) {
  if (!(c > max_norm(R))) {
    std::ostringstream os;
    os << "decompose_shifted: requires c > ||R||_max, got c = " << c
       << ", ||R|| = " << max_norm(R);
    throw error(os.str());
  }
  const double r0 = DirectionTable::r0;
  const Mat3 K = identity3() - (r0 / c) * R;
  std::array<double, 6> g{};
  for (int i = 1; i <= 6; ++i) g[static_cast<size_t>(i - 1)] = (c / r0) * gamma_sq(K, i);
  return g;
}

}  // namespace lamecvx
