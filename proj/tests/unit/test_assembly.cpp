#include <doctest.h>

#include <cmath>
#include <random>

#include "lamecvx/assembly.hpp"
#include "lamecvx/geometry.hpp"

using namespace lamecvx;

namespace {

constexpr double kPi = 3.14159265358979323846;

double maxdiff(const CarrierField& a, const CarrierField& b, double t) {
  const auto ga = a.collapse(t);
  const auto gb = b.collapse(t);
  double m = 0.0;
  for (size_t c = 0; c < ga.size(); ++c)
    for (size_t p = 0; p < ga[c].size(); ++p)
      m = std::max(m, std::abs(ga[c][p] - gb[c][p]));
  return m;
}

/// Toy stage: direction f1, lambda' = 4, 4 cells/axis, A = 0 blocks.
StagePerturbation make_toy_stage(int n = 16, double dconst = 0.35, double sign_s1 = 1.0) {
  LameParams lame{2.0, 1.0};
  StageGeometry geom;
  geom.n = n;
  geom.direction = 1;
  geom.lambda = 4;
  geom.f = {0, 1, 1};
  geom.omega_base = std::sqrt(lame.p_speed2() * 2.0);
  geom.tau = 0.25;
  geom.mu_inv = 4;

  FrozenTensor zero;
  std::vector<BlockCell> cells;
  for (int64_t s = -1; s <= 5; ++s) {
    for (int64_t v0 = 0; v0 < 4; ++v0)
      for (int64_t v1 = 0; v1 < 4; ++v1)
        for (int64_t v2 = 0; v2 < 4; ++v2) {
          BlockCell c;
          c.I = WaveIndex{s, {v0, v1, v2}};
          c.par = parity(c.I);
          c.blk = build_block(zero, geom.f, lame);
          c.coef = 1.0 / (std::sqrt(2.0) * norm(c.blk.tilde_f()) * std::sqrt(2.0));
          c.sign = (s == 1) ? sign_s1 : 1.0;
          cells.push_back(c);
        }
  }
  WeightProvider wp = [dconst, n](double) {
    WeightField w;
    w.n = n;
    w.constant = dconst;
    return w;
  };
  return StagePerturbation(geom, std::move(cells), wp);
}

}  // namespace

TEST_CASE("weight field: R = 0 gives the constant delta^{1/2}/2") {
  std::vector<std::vector<cplx>> none;
  const WeightField w = weight_field(8, none, none, none, 0.49, 3);
  CHECK(w.is_constant());
  CHECK(w.constant == doctest::Approx(std::sqrt(0.49) * 0.5));
}

TEST_CASE("weight field matches gamma_sq pointwise and the f6 expansion") {
  const int n = 4;
  const size_t pts = grid_points(3, n);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  const double delta = 0.5;
  std::vector<std::vector<cplx>> Rv(9, std::vector<cplx>(pts));
  for (size_t p = 0; p < pts; ++p) {
    Mat3 R;
    for (int r = 0; r < 3; ++r)
      for (int c = r; c < 3; ++c) {
        R(r, c) = u(rng);
        R(c, r) = R(r, c);
      }
    for (int c9 = 0; c9 < 9; ++c9) Rv[static_cast<size_t>(c9)][p] = R(c9 / 3, c9 % 3);
  }
  std::vector<std::vector<cplx>> none;
  for (int dir = 1; dir <= 6; ++dir) {
    const WeightField w = weight_field(n, Rv, none, none, delta, dir);
    for (size_t p = 0; p < pts; ++p) {
      Mat3 K = identity3();
      for (int c9 = 0; c9 < 9; ++c9) K(c9 / 3, c9 % 3) -= Rv[static_cast<size_t>(c9)][p].real() / delta;
      CHECK(w.d[p] == doctest::Approx(std::sqrt(delta * gamma_sq(K, dir))).epsilon(1e-13));
      if (dir == 6) {
        // displayed expansion: d^2 = (delta/4)(1 - 3 r33 - 4 r12 + r11 + r22)
        const double r11 = Rv[0][p].real() / delta, r22 = Rv[4][p].real() / delta;
        const double r33 = Rv[8][p].real() / delta, r12 = Rv[1][p].real() / delta;
        const double expect = delta / 4.0 * (1.0 - 3.0 * r33 - 4.0 * r12 + r11 + r22);
        CHECK(w.d[p] * w.d[p] == doctest::Approx(expect).epsilon(1e-12));
        CHECK(w.d[p] * w.d[p] >= delta / 8.0);
      }
    }
  }
}

TEST_CASE("weight field rejects out-of-ball input naming a grid point") {
  const int n = 4;
  const size_t pts = grid_points(3, n);
  std::vector<std::vector<cplx>> Rv(9, std::vector<cplx>(pts, cplx(0.0)));
  Rv[1][7] = cplx(0.4, 0.0);  // r12 entry way outside the ball for delta = 0.5
  Rv[3][7] = cplx(0.4, 0.0);
  std::vector<std::vector<cplx>> none;
  CHECK_THROWS_AS(weight_field(n, Rv, none, none, 0.5, 1), out_of_ball_error);
}

TEST_CASE("perturbation: total mean vanishes at every channel") {
  const StagePerturbation stage = make_toy_stage();
  for (double t : {0.1, 0.33, 0.5}) {
    const StageSlice s = stage.evaluate(t);
    for (int r = 0; r <= 2; ++r) {
      const CarrierField u = s.u_total(r);
      const auto mean = u.mean(t);
      for (int c = 0; c < 3; ++c) CHECK(std::abs(mean[static_cast<size_t>(c)]) < 1e-12);
    }
  }
}

TEST_CASE("perturbation is real-valued") {
  const StagePerturbation stage = make_toy_stage();
  const StageSlice s = stage.evaluate(0.3);
  CHECK(s.u_total(0).reality_defect(0.3) < 1e-13);
  CHECK(s.w_p(0).reality_defect(0.3) < 1e-13);
  CHECK(s.w_c(0).reality_defect(0.3) < 1e-13);
}

TEST_CASE("gradient split: spectral grad(u_p) = w_p + w_c exactly") {
  const StagePerturbation stage = make_toy_stage();
  for (double t : {0.12, 0.4}) {
    const StageSlice s = stage.evaluate(t);
    for (int r = 0; r <= 1; ++r) {
      const CarrierField gu = gradient(s.u_total(r));
      const CarrierField split = s.grad_u(r);
      double scale = std::max(1e-30, split.sup_norm(t));
      CHECK(maxdiff(gu, split, t) / scale < 1e-11);
    }
  }
}

TEST_CASE("carrier support sits on multiples of lambda [I] f") {
  const StagePerturbation stage = make_toy_stage();
  const StageSlice s = stage.evaluate(0.2);
  const CarrierField u = s.u_principal(0);
  for (const auto& term : u.terms()) {
    // k = m * 4 * (0,1,1), m in 1..16
    CHECK(term.k[0] == 0);
    CHECK(term.k[1] != 0);
    CHECK(term.k[1] == -term.k[2] * -1);
    const int64_t m = std::llabs(term.k[1]) / 4;
    CHECK(m >= 1);
    CHECK(m <= 16);
    CHECK(std::llabs(term.k[1]) % 4 == 0);
  }
}

TEST_CASE("analytic time channels match the stencil derivative") {
  const StagePerturbation stage = make_toy_stage();
  // build a node stack of values across one slab interior and stencil it
  const double t0 = 0.3, t1 = 0.45;
  const int m = 36;
  std::vector<double> nodes;
  for (int j = 0; j <= m; ++j) nodes.push_back(t0 + (t1 - t0) * j / m);
  TorusField vals(3, 16, Rank::vector, TimeInterval{t0, t1}, nodes);
  for (size_t j = 0; j < nodes.size(); ++j)
    vals.set_slice(j, stage.evaluate(nodes[j]).u_total(0));
  const TorusField d1 = time_derivative(vals, 1);
  const TorusField d2 = time_derivative(vals, 2);
  const size_t mid = nodes.size() / 2;
  const StageSlice s = stage.evaluate(nodes[mid]);
  const double sc1 = std::max(1e-30, s.u_total(1).sup_norm(nodes[mid]));
  const double sc2 = std::max(1e-30, s.u_total(2).sup_norm(nodes[mid]));
  CHECK(maxdiff(d1.slice(mid), s.u_total(1), nodes[mid]) / sc1 < 1e-6);
  CHECK(maxdiff(d2.slice(mid), s.u_total(2), nodes[mid]) / sc2 < 1e-4);
}

TEST_CASE("slab flip changes the field only on that slab's time support") {
  const StagePerturbation base = make_toy_stage();
  const StagePerturbation flipped = base.with_flipped_slab(1);
  // inside slab 0's plateau (slab 1 inactive): t/tau in (0.25, 0.75) minus slab1 support
  const double t_outside = 0.25 * 0.1;  // t/tau = 0.1: slab 1 support starts at 0.75 tau
  CHECK(maxdiff(base.evaluate(t_outside).u_total(0), flipped.evaluate(t_outside).u_total(0),
                t_outside) < 1e-15);
  // inside slab 1's plateau the difference equals twice the restriction
  const double t_inside = 0.25 * 1.5;
  const CarrierField diff_ab = [&] {
    CarrierField d = base.evaluate(t_inside).u_total(0);
    d.add_scaled(flipped.evaluate(t_inside).u_total(0), -1.0);
    d.normalize();
    return d;
  }();
  const StagePerturbation restr = base.restricted_to_slab(1);
  CarrierField twice = restr.evaluate(t_inside).u_total(0).scaled(2.0);
  CHECK(maxdiff(diff_ab, twice, t_inside) < 1e-13);
}

TEST_CASE("coefficient fields of far-apart indices have disjoint supports") {
  const StagePerturbation stage = make_toy_stage();
  // gamma_I gamma_J = 0 pointwise when ||I-J|| > 1: spot-check two cells two
  // apart in the v lattice at a common active time
  const double t = 0.3;
  StagePerturbation only_a = stage;  // restrict by hand below
  std::vector<BlockCell> ca, cb;
  for (const auto& c : stage.cells()) {
    if (c.I.s == 1 && c.I.v == std::array<int64_t, 3>{0, 0, 0}) ca.push_back(c);
    if (c.I.s == 1 && c.I.v == std::array<int64_t, 3>{2, 0, 0}) cb.push_back(c);
  }
  REQUIRE(ca.size() == 1);
  REQUIRE(cb.size() == 1);
  WeightProvider wp = [](double) {
    WeightField w;
    w.n = 16;
    w.constant = 1.0;
    return w;
  };
  const StagePerturbation sa(stage.geometry(), ca, wp);
  const StagePerturbation sb(stage.geometry(), cb, wp);
  const auto ga = sa.evaluate(t).u_principal(0).collapse(t);
  const auto gb = sb.evaluate(t).u_principal(0).collapse(t);
  for (size_t p = 0; p < ga[0].size(); ++p) {
    const double prod = std::abs(ga[0][p] + ga[1][p] + ga[2][p]) *
                        std::abs(gb[0][p] + gb[1][p] + gb[2][p]);
    CHECK(prod == 0.0);
  }
}

TEST_CASE("perturbation amplitude scales like delta^{1/2}/lambda") {
  // With d = dconst, |u_p| <= sum over active classes of dconst * C / lambda m
  const double dconst = 0.35;
  const StagePerturbation stage = make_toy_stage(16, dconst);
  const StageSlice s = stage.evaluate(0.3);
  const double amp = s.u_total(0).sup_norm(0.3);
  CHECK(amp < 4.0 * dconst / 4.0);  // C * delta^{1/2} / lambda with modest C
  const double wamp = s.w_p(0).sup_norm(0.3);
  CHECK(wamp < 8.0 * dconst);  // C * delta^{1/2}
}
