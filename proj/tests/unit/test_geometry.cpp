#include <doctest.h>

#include <cmath>
#include <random>

#include "lamecvx/geometry.hpp"

using namespace lamecvx;

namespace {

Mat3 random_symmetric_near_id(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  Mat3 k = identity3();
  for (int r = 0; r < 3; ++r)
    for (int c = r; c < 3; ++c) {
      const double e = u(rng);
      k(r, c) += e;
      if (c != r) k(c, r) += e;
    }
  return k;
}

}  // namespace

TEST_CASE("direction table invariants") {
  for (int i = 1; i <= 6; ++i) {
    const auto f = DirectionTable::f(i);
    const double n2 = static_cast<double>(f[0] * f[0] + f[1] * f[1] + f[2] * f[2]);
    CHECK(n2 == 2.0);  // |f|^2 = 2, lambda bar = sqrt 2
  }
  // sum_i (1/4) proj_i = Id exactly
  Mat3 sum;
  for (int i = 1; i <= 6; ++i) sum = sum + 0.25 * DirectionTable::proj(i);
  const Mat3 err = sum - identity3();
  CHECK(max_norm(err) == 0.0);
}

TEST_CASE("projector matrices match the displayed rational entries") {
  const Mat3 p1 = DirectionTable::proj(1);
  CHECK(p1(0, 0) == 1.0);
  CHECK(p1(1, 1) == 0.5);
  CHECK(p1(1, 2) == -0.5);
  CHECK(p1(2, 1) == -0.5);
  const Mat3 p6 = DirectionTable::proj(6);
  CHECK(p6(0, 1) == 0.5);
  CHECK(p6(1, 0) == 0.5);
  CHECK(p6(2, 2) == 1.0);
}

TEST_CASE("gamma_sq at the identity is exactly 1/4") {
  for (int i = 1; i <= 6; ++i) CHECK(gamma_sq(identity3(), i) == doctest::Approx(0.25).epsilon(1e-16));
}

TEST_CASE("reconstruction identity on a symmetric basis") {
  // The coefficient formula is affine in K, so checking a basis of S^{3x3}
  // shifted into the admissible ball pins the whole identity.
  const double h = 0.01;
  for (int r = 0; r < 3; ++r) {
    for (int c = r; c < 3; ++c) {
      Mat3 k = identity3();
      k(r, c) += h;
      k(c, r) = k(r, c);
      const Mat3 err = reconstruct(k) - k;
      CHECK(max_norm(err) < 1e-15);
    }
  }
}

TEST_CASE("reconstruction on 1000 random K in the r0 ball") {
  std::mt19937_64 rng(12345);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Mat3 k = random_symmetric_near_id(rng, DirectionTable::r0);
    const Mat3 err = reconstruct(k) - k;
    worst = std::max(worst, max_norm(err));
  }
  CHECK(worst <= 1e-13);
}

TEST_CASE("explicit off-diagonal example") {
  Mat3 k = identity3();
  k(0, 1) = k(1, 0) = 1.0 / 36.0;
  const Mat3 err = reconstruct(k) - k;
  CHECK(max_norm(err) <= 1e-14);
  // the f5/f6 pair absorbs the (1,2) entry
  CHECK(gamma_sq(k, 6) == doctest::Approx(0.25 + 1.0 / 36.0).epsilon(1e-14));
  CHECK(gamma_sq(k, 5) == doctest::Approx(0.25 - 1.0 / 36.0).epsilon(1e-14));
}

TEST_CASE("out-of-ball input is rejected") {
  Mat3 k = identity3();
  k(0, 1) = k(1, 0) = 0.5;
  CHECK_THROWS_AS(gamma_sq(k, 1), out_of_ball_error);
}

TEST_CASE("decompose_shifted reproduces (c/r0) Id - R") {
  std::mt19937_64 rng(999);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Mat3 R;
    for (int r = 0; r < 3; ++r)
      for (int c = r; c < 3; ++c) {
        R(r, c) = u(rng);
        R(c, r) = R(r, c);
      }
    const double c = 2.0 * max_norm(R) + 0.1;
    const auto g = decompose_shifted(R, c);
    Mat3 sum;
    for (int i = 1; i <= 6; ++i) sum = sum + g[static_cast<size_t>(i - 1)] * DirectionTable::proj(i);
    const Mat3 target = (c / DirectionTable::r0) * identity3() - R;
    CHECK(max_norm(sum - target) <= 1e-12 * (c / DirectionTable::r0));
    for (double gi : g) CHECK(gi >= 0.0);
  }
}

TEST_CASE("decompose_shifted R=0 gives equal weights") {
  Mat3 zero;
  const double c = DirectionTable::r0;
  const auto g = decompose_shifted(zero, c);
  for (double gi : g) CHECK(gi == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("decompose_shifted rejects c <= ||R||") {
  Mat3 R;
  R(0, 0) = 1.0;
  CHECK_THROWS_AS(decompose_shifted(R, 1.0), error);
}

TEST_CASE("paper use site: K = Id - delta^{-1} R for small R") {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  const double delta = 0.5;
  for (int trial = 0; trial < 100; ++trial) {
    Mat3 R;
    for (int r = 0; r < 3; ++r)
      for (int c = r; c < 3; ++c) {
        R(r, c) = u(rng);
        R(c, r) = R(r, c);
      }
    const Mat3 K = identity3() - (1.0 / delta) * R;
    const Mat3 err = reconstruct(K) - K;
    CHECK(max_norm(err) <= 1e-13);
  }
}
