#include <doctest.h>

#include <cmath>
#include <random>

#include "lamecvx/cutoffs.hpp"

using namespace lamecvx;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("parity code examples and range") {
  CHECK(parity(1, {1, 1, 1}) == 1);
  CHECK(parity(0, {0, 0, 0}) == 16);
  CHECK(parity(0, {1, 1, 1}) == 2);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int64_t> u(-20, 20);
  for (int trial = 0; trial < 500; ++trial) {
    const int64_t s = u(rng);
    const std::array<int64_t, 3> v{u(rng), u(rng), u(rng)};
    const int p = parity(s, v);
    CHECK(p >= 1);
    CHECK(p <= 16);
    // invariance under even lattice shifts (torus wrap with even mu_inv)
    CHECK(parity(s + 2, {v[0] - 4, v[1] + 6, v[2] + 100}) == p);
  }
}

TEST_CASE("theta partition of unity and plateau") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  CutoffSystem co(0.25, 4);
  for (int trial = 0; trial < 2000; ++trial) {
    const double t = u(rng);
    CHECK(std::abs(co.sum_theta_sq(t) - 1.0) < 1e-12);
  }
  // plateau of slab s = 2: t/tau in [2.25, 2.75]
  const double t = 0.25 * 2.5;
  CHECK(co.theta(2, t, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(co.theta(1, t, 0) == 0.0);
  CHECK(co.theta(3, t, 0) == 0.0);
}

TEST_CASE("chi partition of unity and cell tiling") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  CutoffSystem co(0.25, 4);
  for (int trial = 0; trial < 2000; ++trial) {
    double x[3] = {u(rng), u(rng), u(rng)};
    CHECK(std::abs(co.sum_chi_sq(x) - 1.0) < 1e-12);
  }
  // exactly mu_inv^3 cells tile the torus; each is supported in its cube
  CHECK(co.cells_per_axis() == 4);
  const std::array<int64_t, 3> v{1, 2, 3};
  const auto anchor = co.cell_anchor(v);
  const double hw = co.cell_half_width();
  // inside the plateau cube
  double xin[3] = {anchor[0], anchor[1], anchor[2]};
  CHECK(co.chi(v, xin) == doctest::Approx(1.0).epsilon(1e-13));
  // outside the support cube (walk past the half width along axis 0)
  double xout[3] = {anchor[0] + hw * 1.01, anchor[1], anchor[2]};
  // reduce to the torus
  xout[0] = std::remainder(xout[0], 2.0 * kPi);
  CHECK(co.chi(v, xout) == 0.0);
}

TEST_CASE("odd mu_inv is rejected") {
  CHECK_THROWS_AS(CutoffSystem(0.25, 5), schedule_error);
  CHECK_THROWS_AS(CutoffSystem(0.25, 1), schedule_error);
}

TEST_CASE("profile derivatives match finite differences") {
  const double h = 1e-6;
  for (double u0 : {-0.2, 0.1, 0.3, 0.5, 0.8, 1.1}) {
    const double fd1 = (theta_profile(u0 + h) - theta_profile(u0 - h)) / (2.0 * h);
    CHECK(theta_profile(u0, 1) == doctest::Approx(fd1).epsilon(1e-5));
    const double fd2 =
        (theta_profile(u0 + h) - 2.0 * theta_profile(u0) + theta_profile(u0 - h)) / (h * h);
    CHECK(theta_profile(u0, 2) == doctest::Approx(fd2).epsilon(2e-4));
  }
  for (double x0 : {-3.5, -2.5, 0.4, 2.6, 3.4}) {
    const double fd1 = (chi_axis_profile(x0 + h) - chi_axis_profile(x0 - h)) / (2.0 * h);
    CHECK(chi_axis_profile(x0, 1) == doctest::Approx(fd1).epsilon(1e-5));
  }
}

TEST_CASE("disjoint supports for indices at distance > 1") {
  CutoffSystem co(0.25, 6);
  // slabs s and s+2 never overlap in time
  for (double t = -1.0; t < 2.0; t += 0.013) {
    const double a = co.theta(0, t, 0);
    const double b = co.theta(2, t, 0);
    CHECK(a * b == 0.0);
  }
  // cells two apart never overlap in space
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int trial = 0; trial < 3000; ++trial) {
    double x[3] = {u(rng), u(rng), u(rng)};
    const double a = co.chi({0, 0, 0}, x);
    const double b = co.chi({2, 0, 0}, x);
    CHECK(a * b == 0.0);
  }
}

TEST_CASE("active slabs cover an interval") {
  CutoffSystem co(0.1, 4);
  const auto slabs = co.active_slabs(0.0, 1.0);
  CHECK(slabs.size() >= 10);
  // every t in [0,1] lies in some listed slab's support
  for (double t = 0.0; t <= 1.0; t += 0.007) {
    bool covered = false;
    for (int64_t s : slabs) {
      const auto sup = co.slab_support(s);
      if (t > sup[0] && t < sup[1]) covered = true;
    }
    CHECK(covered);
  }
}

TEST_CASE("build_cutoffs wires the schedule scales") {
  Schedule s;
  s.mode = ScheduleMode::toy_override;
  s.toy_lambda = {4, 16};
  s.toy_delta = {0.25, 0.0625};
  s.validate();
  const CutoffSystem co = build_cutoffs(s, 0, 0);
  const DerivedScales d = s.derived_scales(0, 0);
  CHECK(co.tau() == doctest::Approx(d.tau));
  CHECK(co.mu_inv() == d.mu_inv);
}
