#include <doctest.h>

#include <cmath>
#include <random>

#include "lamecvx/field.hpp"
#include "lamecvx/operators.hpp"

using namespace lamecvx;

namespace {

constexpr double kPi = 3.14159265358979323846;

CarrierField single_mode(int n, std::array<int64_t, 3> k) {
  CarrierField f(3, n, Rank::scalar);
  CarrierTerm t;
  t.k = k;
  t.comp.assign(1, std::vector<cplx>(grid_points(3, n), cplx(1.0)));
  f.add_term(std::move(t));
  return f;
}

double maxdiff(const CarrierField& a, const CarrierField& b, double t) {
  const auto ga = a.collapse(t);
  const auto gb = b.collapse(t);
  double m = 0.0;
  for (size_t c = 0; c < ga.size(); ++c)
    for (size_t p = 0; p < ga[c].size(); ++p)
      m = std::max(m, std::abs(ga[c][p] - gb[c][p]));
  return m;
}

}  // namespace

TEST_CASE("band_project plateau, kill zone, and identity at ell = 0") {
  const int n = 16;
  // constant field passes for any ell
  const auto c = CarrierField::from_samples(3, n, Rank::scalar,
                                            [](const double*, int) { return cplx(2.0, 0.0); });
  CHECK(maxdiff(band_project(c, 0.37), c, 0.0) < 1e-14);

  // |k| = 3 with ell = 1/4 (J = 2): inside the closed unit ball of the profile
  const auto m3 = single_mode(n, {3, 0, 0});
  CHECK(maxdiff(band_project(m3, 0.25), m3, 0.0) < 1e-14);

  // |k| = 9 with J = 2: above 2^{J+1} = 8, removed entirely
  const auto m9 = single_mode(n, {9, 0, 0});
  CHECK(band_project(m9, 0.25).sup_norm(0.0) < 1e-15);

  // ell = 0 convention: identity
  CHECK(maxdiff(band_project(m9, 0.0), m9, 0.0) == 0.0);
}

TEST_CASE("band_project is idempotent on the pass band and commutes with derivatives") {
  const int n = 32;
  const auto f = CarrierField::from_samples(3, n, Rank::scalar, [](const double x[3], int) {
    return cplx(std::sin(3 * x[0]) + std::cos(5 * x[1]) + std::sin(7 * x[2]), 0.0);
  });
  const double ell = 0.2;  // J = 2, transition (4, 8]
  const auto pf = band_project(f, ell);
  const auto ppf = band_project(pf, ell);
  // idempotence only on the plateau: mode 3 unchanged twice; mode 5,7 scaled
  // but the multiplier is a projector only on the plateau. Check the fixed
  // point property for the passband part.
  const auto m3 = single_mode(n, {3, 0, 0});
  CHECK(maxdiff(band_project(band_project(m3, ell), ell), m3, 0.0) < 1e-13);

  // multiplier commutes with spectral derivative exactly
  const auto d_then_p = band_project(spectral_derivative(f, {1, 0, 0}), ell);
  const auto p_then_d = spectral_derivative(pf, {1, 0, 0});
  CHECK(maxdiff(d_then_p, p_then_d, 0.0) < 1e-12);
  (void)ppf;
}

TEST_CASE("time kernel: unit mass and vanishing moments") {
  for (int n0 : {1, 4, 9, 24}) {
    const TimeKernel k = build_time_kernel(n0);
    CHECK(std::abs(k.moment(0) - 1.0) < 1e-12);
    for (int p = 1; p <= n0 + 3; ++p) CHECK(std::abs(k.moment(p)) < 1e-10);
  }
  CHECK_THROWS_AS(build_time_kernel(41), field_error);
}

TEST_CASE("time mollification: constants, polynomial reproduction, interval ledger") {
  const int n = 8;
  const TimeKernel kernel = build_time_kernel(1);
  TimeInterval iv{-1.0, 2.0};
  std::vector<double> nodes;
  for (int j = 0; j <= 90; ++j) nodes.push_back(-1.0 + 3.0 * j / 90.0);

  // constant in t: unchanged to 1e-12
  const auto c = TorusField::from_samples(3, n, Rank::scalar, iv, nodes,
                                          [](double, const double x[3], int) {
                                            return cplx(1.0 + 0.5 * std::cos(x[0]), 0.0);
                                          });
  const double ell = 0.2;
  const auto mc = time_mollify(c, ell, kernel);
  CHECK(mc.interval().t0 == doctest::Approx(iv.t0 + ell));
  CHECK(mc.interval().t1 == doctest::Approx(iv.t1 - ell));
  double worst = 0.0;
  for (size_t j = 0; j < mc.node_count(); ++j)
    worst = std::max(worst, maxdiff(mc.slice(j), c.slice(0), mc.nodes()[j]));
  CHECK(worst < 1e-12);

  // t^k reproduced for k <= n0+3 = 4
  for (int kk = 1; kk <= 4; ++kk) {
    const auto f = TorusField::from_samples(3, n, Rank::scalar, iv, nodes,
                                            [&](double t, const double*, int) {
                                              return cplx(std::pow(t, kk), 0.0);
                                            });
    const auto mf = time_mollify(f, ell, kernel);
    double w2 = 0.0;
    for (size_t j = 0; j < mf.node_count(); ++j) {
      const double t = mf.nodes()[j];
      const auto g = mf.slice(j).collapse(t);
      w2 = std::max(w2, std::abs(g[0][0] - std::pow(t, kk)));
    }
    CHECK(w2 < 1e-9);
  }

  // insufficient margin
  TimeInterval small{0.0, 0.3};
  std::vector<double> few = {0.0, 0.1, 0.2, 0.3};
  const auto tiny = TorusField::from_samples(3, n, Rank::scalar, small, few,
                                             [](double, const double*, int) { return cplx(1.0, 0.0); });
  CHECK_THROWS_AS(time_mollify(tiny, 0.2, kernel), field_error);
}

TEST_CASE("time mollification of cos(w t): deviation scales with the moment order") {
  const int n = 8;
  TimeInterval iv{-1.0, 2.0};
  std::vector<double> nodes;
  for (int j = 0; j <= 150; ++j) nodes.push_back(-1.0 + 3.0 * j / 150.0);
  const double w = 1.0;
  const auto f = TorusField::from_samples(3, n, Rank::scalar, iv, nodes,
                                          [&](double t, const double*, int) {
                                            return cplx(std::cos(w * t), 0.0);
                                          });
  double prev = 1.0;
  for (int n0 : {1, 3}) {
    const TimeKernel kernel = build_time_kernel(n0);
    const auto mf = time_mollify(f, 0.25, kernel);
    double dev = 0.0;
    for (size_t j = 0; j < mf.node_count(); ++j) {
      const double t = mf.nodes()[j];
      dev = std::max(dev, std::abs(mf.slice(j).collapse(t)[0][0] - std::cos(w * t)));
    }
    CHECK(dev < prev);  // higher moment order, smaller deviation
    prev = dev;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("kernel-derivative channels match direct time differentiation") {
  const int n = 8;
  const TimeKernel kernel = build_time_kernel(2);
  TimeInterval iv{-1.0, 2.0};
  std::vector<double> nodes;
  for (int j = 0; j <= 120; ++j) nodes.push_back(-1.0 + 3.0 * j / 120.0);
  const auto f = TorusField::from_samples(3, n, Rank::scalar, iv, nodes,
                                          [](double t, const double x[3], int) {
                                            return cplx(std::sin(1.3 * t) * std::cos(x[0]), 0.0);
                                          });
  const double ell = 0.25;
  const auto m1 = time_mollify(f, ell, kernel, 1);
  // oracle: mollify the analytic derivative with the plain kernel
  const auto df = TorusField::from_samples(3, n, Rank::scalar, iv, nodes,
                                           [](double t, const double x[3], int) {
                                             return cplx(1.3 * std::cos(1.3 * t) * std::cos(x[0]), 0.0);
                                           });
  const auto m0 = time_mollify(df, ell, kernel, 0);
  double worst = 0.0;
  for (size_t j = 0; j < m1.node_count(); ++j)
    worst = std::max(worst, maxdiff(m1.slice(j), m0.slice(j), m1.nodes()[j]));
  CHECK(worst < 1e-8);
}

TEST_CASE("Leray projection: gradients die, solenoidal fields survive") {
  const int n = 16;
  // v = grad(sin x0)
  const auto grad_field = CarrierField::from_samples(3, n, Rank::vector,
                                                     [](const double x[3], int c) {
                                                       return cplx(c == 0 ? std::cos(x[0]) : 0.0, 0.0);
                                                     });
  CHECK(leray_project(grad_field).sup_norm(0.0) < 1e-13);

  // v = (0, cos x0, 0): divergence-free, mean-free
  const auto sol = CarrierField::from_samples(3, n, Rank::vector,
                                              [](const double x[3], int c) {
                                                return cplx(c == 1 ? std::cos(x[0]) : 0.0, 0.0);
                                              });
  CHECK(maxdiff(leray_project(sol), sol, 0.0) < 1e-13);

  // mode-wise formula f e^{i k.x} -> (f - (k.f) k / |k|^2) e^{i k.x}
  const double fv[3] = {1.0, -2.0, 0.5};
  const double kv[3] = {2.0, 1.0, -1.0};
  const auto v = CarrierField::from_samples(3, n, Rank::vector, [&](const double x[3], int c) {
    return fv[c] * std::exp(cplx(0.0, kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2]));
  });
  const double kdotf = kv[0] * fv[0] + kv[1] * fv[1] + kv[2] * fv[2];
  const double k2 = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
  const auto expect = CarrierField::from_samples(3, n, Rank::vector, [&](const double x[3], int c) {
    return (fv[c] - kdotf * kv[c] / k2) *
           std::exp(cplx(0.0, kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2]));
  });
  const auto pv = leray_project(v);
  CHECK(maxdiff(pv, expect, 0.0) < 1e-12);
  // Div(P v) = 0 exactly in spectral space
  const auto g = gradient(pv);
  const auto div = g.collapse(0.0);
  double worst = 0.0;
  for (size_t p = 0; p < div[0].size(); ++p)
    worst = std::max(worst, std::abs(div[0][p] + div[4][p] + div[8][p]));
  CHECK(worst < 1e-12);
  // idempotent
  CHECK(maxdiff(leray_project(pv), pv, 0.0) < 1e-12);
}

TEST_CASE("inverse divergence: Div(R v) = v - mean(v), symmetric output") {
  const int n = 16;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    // random band-limited real vector field with a nonzero mean
    struct M {
      int k[3];
      double c[3], s[3];
    };
    std::vector<M> modes;
    for (int i = 0; i < 6; ++i) {
      M m;
      for (int a = 0; a < 3; ++a) m.k[a] = static_cast<int>(std::floor(3.0 * u(rng)));
      for (int a = 0; a < 3; ++a) {
        m.c[a] = u(rng);
        m.s[a] = u(rng);
      }
      modes.push_back(m);
    }
    auto fval = [&](const double x[3], int c) {
      double val = 0.3;  // constant part
      for (const auto& m : modes) {
        const double ph = m.k[0] * x[0] + m.k[1] * x[1] + m.k[2] * x[2];
        val += m.c[c] * std::cos(ph) + m.s[c] * std::sin(ph);
      }
      return cplx(val, 0.0);
    };
    const auto v = CarrierField::from_samples(3, n, Rank::vector, fval);
    const auto R = inverse_divergence(v);
    // symmetry exact as stored
    const auto gr = R.collapse(0.0);
    double asym = 0.0;
    for (int r = 0; r < 3; ++r)
      for (int c = r + 1; c < 3; ++c)
        for (size_t p = 0; p < gr[0].size(); ++p)
          asym = std::max(asym, std::abs(gr[static_cast<size_t>(3 * r + c)][p] -
                                         gr[static_cast<size_t>(3 * c + r)][p]));
    CHECK(asym < 1e-13);

    const auto div = matrix_divergence(R);
    const auto mean = v.mean(0.0);
    const auto expect = CarrierField::from_samples(3, n, Rank::vector, [&](const double x[3], int c) {
      return fval(x, c) - mean[static_cast<size_t>(c)];
    });
    const double scale = v.sup_norm(0.0);
    CHECK(maxdiff(div, expect, 0.0) < 1e-11 * std::max(1.0, scale));
  }

  // constant field maps to zero
  const auto c = CarrierField::from_samples(3, n, Rank::vector,
                                            [](const double*, int ci) { return cplx(1.0 + ci, 0.0); });
  CHECK(inverse_divergence(c).sup_norm(0.0) < 1e-14);
}

TEST_CASE("inverse divergence composed with divergence of a symmetric field") {
  const int n = 16;
  const auto a = CarrierField::from_samples(3, n, Rank::matrix, [](const double x[3], int comp) {
    const int r = comp / 3, cc = comp % 3;
    const double base = std::sin(x[0] + 2 * x[1]) + std::cos(x[2]);
    return cplx(base * (1.0 + 0.2 * r + 0.1 * cc + 0.2 * (r == cc)), 0.0) * 0.5 +
           cplx((r == cc) ? 0.1 : 0.0, 0.0);
  });
  // symmetrize
  CarrierField sym(3, n, Rank::matrix);
  {
    const auto at = a;
    BilinearMap id = scalar_times(Rank::matrix, 3);
    (void)id;
    // simple symmetrization via collapse-free component remap
    CarrierField half = a.scaled(0.5);
    CarrierField halfT = a.scaled(0.5);
    for (auto& term : halfT.terms()) {
      auto comp = term.comp;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) term.comp[static_cast<size_t>(3 * r + c)] = comp[static_cast<size_t>(3 * c + r)];
    }
    sym = half;
    sym.add_scaled(halfT, 1.0);
  }
  const auto dv = matrix_divergence(sym);
  const auto rr = inverse_divergence(dv);
  const auto back = matrix_divergence(rr);
  // Div(R(Div A)) = Div A (Div A is mean-free automatically)
  double worst = 0.0;
  const auto g1 = back.collapse(0.0);
  const auto g2 = dv.collapse(0.0);
  for (size_t c = 0; c < g1.size(); ++c)
    for (size_t p = 0; p < g1[c].size(); ++p)
      worst = std::max(worst, std::abs(g1[c][p] - g2[c][p]));
  CHECK(worst < 1e-11);
}
