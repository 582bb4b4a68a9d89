#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "lamecvx/field.hpp"
#include "lamecvx/holder.hpp"

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

CarrierField scalar_from(int n, const std::function<double(const double*)>& f) {
  return CarrierField::from_samples(3, n, Rank::scalar,
                                    [&](const double x[3], int) { return cplx(f(x), 0.0); });
}

}  // namespace

TEST_CASE("transform round trip is exact to 1e-12") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 16;
  std::vector<cplx> data(grid_points(3, n));
  for (auto& v : data) v = cplx(u(rng), u(rng));
  std::vector<cplx> orig = data;
  spectral_from_physical(3, n, data.data());
  physical_from_spectral(3, n, data.data());
  double m = 0.0, scale = 0.0;
  for (size_t p = 0; p < data.size(); ++p) {
    m = std::max(m, std::abs(data[p] - orig[p]));
    scale = std::max(scale, std::abs(orig[p]));
  }
  CHECK(m / scale < 1e-12);
}

TEST_CASE("Parseval: grid L2 equals coefficient l2") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 16;
  std::vector<cplx> data(grid_points(3, n));
  for (auto& v : data) v = cplx(u(rng), u(rng));
  double grid2 = 0.0;
  for (const auto& v : data) grid2 += std::norm(v);
  grid2 /= static_cast<double>(data.size());
  std::vector<cplx> spec = data;
  spectral_from_physical(3, n, spec.data());
  double coef2 = 0.0;
  for (const auto& v : spec) coef2 += std::norm(v);
  CHECK(grid2 == doctest::Approx(coef2).epsilon(1e-10));
}

TEST_CASE("spectral derivative: sin -> cos, eigenfunction, constant") {
  const int n = 16;
  const auto f = scalar_from(n, [](const double* x) { return std::sin(x[0]); });
  const auto df = spectral_derivative(f, {1, 0, 0});
  const auto expect = scalar_from(n, [](const double* x) { return std::cos(x[0]); });
  CHECK(maxdiff(df, expect, 0.0) < 1e-13);

  // plane wave eigenfunction with carrier: d_j e^{i k.x} = i k_j e^{i k.x}
  CarrierField g(3, n, Rank::scalar);
  CarrierTerm term;
  term.k = {40, -7, 3};  // far beyond the envelope band on purpose
  term.comp.assign(1, std::vector<cplx>(grid_points(3, n), cplx(1.0)));
  g.add_term(std::move(term));
  const auto dg = spectral_derivative(g, {1, 0, 0});
  CHECK(dg.terms().size() == 1);
  const cplx got = dg.terms()[0].comp[0][0];
  CHECK(std::abs(got - cplx(0.0, 40.0)) < 1e-12 * 40.0);

  const auto c = scalar_from(n, [](const double*) { return 3.25; });
  const auto dc = spectral_derivative(c, {0, 1, 0});
  CHECK(dc.sup_norm(0.0) < 1e-13);
}

TEST_CASE("derivatives commute exactly in spectral space") {
  const int n = 16;
  const auto f = scalar_from(n, [](const double* x) {
    return std::sin(2 * x[0]) * std::cos(x[1]) + 0.3 * std::cos(3 * x[2]);
  });
  const auto d12 = spectral_derivative(spectral_derivative(f, {1, 0, 0}), {0, 1, 0});
  const auto d21 = spectral_derivative(spectral_derivative(f, {0, 1, 0}), {1, 0, 0});
  CHECK(maxdiff(d12, d21, 0.0) < 1e-14);
}

TEST_CASE("matrix divergence of c*Id vanishes; rank-one mode formula") {
  const int n = 16;
  // constant matrix c Id
  const auto cid = CarrierField::from_samples(3, n, Rank::matrix, [](const double*, int comp) {
    const int r = comp / 3, c = comp % 3;
    return cplx(r == c ? 2.5 : 0.0, 0.0);
  });
  CHECK(matrix_divergence(cid).sup_norm(0.0) < 1e-13);

  // A = (f x f) e^{i k.x} -> Div A = i (k.f) f e^{i k.x}
  const double fv[3] = {1.0, 2.0, -1.0};
  const double kv[3] = {2.0, 1.0, 3.0};
  const auto a = CarrierField::from_samples(3, n, Rank::matrix, [&](const double x[3], int comp) {
    const int r = comp / 3, c = comp % 3;
    const double phase = kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2];
    return fv[r] * fv[c] * std::exp(cplx(0.0, phase));
  });
  const auto div = matrix_divergence(a);
  const double kdotf = kv[0] * fv[0] + kv[1] * fv[1] + kv[2] * fv[2];
  const auto expect = CarrierField::from_samples(3, n, Rank::vector, [&](const double x[3], int comp) {
    const double phase = kv[0] * x[0] + kv[1] * x[1] + kv[2] * x[2];
    return cplx(0.0, kdotf) * fv[comp] * std::exp(cplx(0.0, phase));
  });
  CHECK(maxdiff(div, expect, 0.0) < 1e-11);
}

TEST_CASE("matrix divergence agrees with a finite-difference oracle") {
  const int n = 128;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  // random symmetric band-limited field (modes up to 3)
  struct Mode {
    int k[3];
    double cr[6], ci[6];
  };
  std::vector<Mode> modes;
  for (int trial = 0; trial < 8; ++trial) {
    Mode m;
    for (int a = 0; a < 3; ++a) m.k[a] = static_cast<int>(std::floor(u(rng) * 3.0));
    for (int c = 0; c < 6; ++c) {
      m.cr[c] = u(rng);
      m.ci[c] = u(rng);
    }
    modes.push_back(m);
  }
  auto entry = [&](const double x[3], int r, int c) {
    static const int sym[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
    double val = 0.0;
    for (const auto& m : modes) {
      const double ph = m.k[0] * x[0] + m.k[1] * x[1] + m.k[2] * x[2];
      val += m.cr[sym[r][c]] * std::cos(ph) - m.ci[sym[r][c]] * std::sin(ph);
    }
    return val;
  };
  const auto a = CarrierField::from_samples(3, n, Rank::matrix, [&](const double x[3], int comp) {
    return cplx(entry(x, comp / 3, comp % 3), 0.0);
  });
  const auto div = matrix_divergence(a).collapse(0.0);

  // 8th-order centered finite differences on the same grid
  const double h = 2.0 * kPi / n;
  const double w[4] = {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
  double worst = 0.0;
  for (int p = 0; p < 3; ++p) {
    int idx[3];
    for (size_t flat = 0; flat < grid_points(3, n); flat += 11) {
      unflatten(flat, 3, n, idx);
      double acc = 0.0;
      for (int nn = 0; nn < 3; ++nn) {
        for (int s = 1; s <= 4; ++s) {
          int jp[3] = {idx[0], idx[1], idx[2]};
          int jm[3] = {idx[0], idx[1], idx[2]};
          jp[nn] = (idx[nn] + s) % n;
          jm[nn] = (idx[nn] - s + n) % n;
          double xp[3], xm[3];
          for (int a2 = 0; a2 < 3; ++a2) {
            xp[a2] = grid_coord(jp[a2], n);
            xm[a2] = grid_coord(jm[a2], n);
          }
          acc += w[s - 1] / h * (entry(xp, nn, p) - entry(xm, nn, p));
        }
      }
      worst = std::max(worst, std::abs(div[static_cast<size_t>(p)][flat] - acc));
    }
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("time derivative: polynomial exactness and analytic rate") {
  const int n = 8;
  TimeInterval iv{0.0, 1.0};
  std::vector<double> nodes;
  for (int j = 0; j <= 20; ++j) nodes.push_back(j / 20.0);
  const auto f = TorusField::from_samples(
      3, n, Rank::scalar, iv, nodes, [](double t, const double x[3], int) {
        return cplx(t * t * std::sin(x[0]), 0.0);
      });
  const auto d2 = time_derivative(f, 2);
  const auto expect = CarrierField::from_samples(3, n, Rank::scalar, [](const double x[3], int) {
    return cplx(2.0 * std::sin(x[0]), 0.0);
  });
  double worst = 0.0;
  for (size_t j = 0; j < d2.node_count(); ++j)
    worst = std::max(worst, maxdiff(d2.slice(j), expect, d2.nodes()[j]));
  CHECK(worst < 1e-10);

  // cos(w t) g(x): 6th-order convergence toward -w sin(w t) g(x)
  const double w = 3.0;
  auto build = [&](int m) {
    std::vector<double> nds;
    for (int j = 0; j <= m; ++j) nds.push_back(static_cast<double>(j) / m);
    return TorusField::from_samples(3, n, Rank::scalar, iv, nds,
                                    [&](double t, const double x[3], int) {
                                      return cplx(std::cos(w * t) * std::cos(x[1]), 0.0);
                                    });
  };
  auto err_at = [&](int m) {
    const auto d1 = time_derivative(build(m), 1);
    double worst2 = 0.0;
    for (size_t j = 0; j < d1.node_count(); ++j) {
      const double t = d1.nodes()[j];
      const auto expectj =
          CarrierField::from_samples(3, n, Rank::scalar, [&](const double x[3], int) {
            return cplx(-w * std::sin(w * t) * std::cos(x[1]), 0.0);
          });
      worst2 = std::max(worst2, maxdiff(d1.slice(j), expectj, t));
    }
    return worst2;
  };
  const double e1 = err_at(24);
  const double e2 = err_at(48);
  CHECK(e2 < e1 / 30.0);  // at least ~5th order observed

  // constant in t -> 0
  const auto c = TorusField::from_samples(3, n, Rank::scalar, iv, nodes,
                                          [](double, const double x[3], int) {
                                            return cplx(std::cos(x[2]), 0.0);
                                          });
  const auto dc = time_derivative(c, 1);
  double worst3 = 0.0;
  for (size_t j = 0; j < dc.node_count(); ++j)
    worst3 = std::max(worst3, dc.slice(j).sup_norm(dc.nodes()[j]));
  CHECK(worst3 < 1e-12);
}

TEST_CASE("time derivative differentiates carrier phases exactly") {
  const int n = 8;
  TimeInterval iv{0.0, 1.0};
  std::vector<double> nodes;
  for (int j = 0; j <= 10; ++j) nodes.push_back(j / 10.0);
  TorusField f(3, n, Rank::scalar, iv, nodes);
  const double omega = 17.75;
  for (size_t j = 0; j < nodes.size(); ++j) {
    CarrierField s(3, n, Rank::scalar);
    CarrierTerm t;
    t.k = {5, 0, 0};
    t.omega = omega;
    t.comp.assign(1, std::vector<cplx>(grid_points(3, n), cplx(1.0)));
    s.add_term(std::move(t));
    f.set_slice(j, std::move(s));
  }
  const auto d1 = time_derivative(f, 1);
  // envelope constant: derivative = -i omega * value at same carrier
  const cplx got = d1.slice(5).terms()[0].comp[0][0];
  CHECK(std::abs(got - cplx(0.0, -omega)) < 1e-12 * omega);
  const auto d2 = time_derivative(f, 2);
  const cplx got2 = d2.slice(5).terms()[0].comp[0][0];
  CHECK(std::abs(got2 - cplx(-omega * omega, 0.0)) < 1e-11 * omega * omega);
}

TEST_CASE("products combine carriers and stay pointwise exact") {
  const int n = 8;
  CarrierField a(3, n, Rank::scalar);
  CarrierTerm ta;
  ta.k = {9, 0, 0};
  ta.omega = 2.0;
  ta.comp.assign(1, std::vector<cplx>(grid_points(3, n)));
  CarrierField b = a;
  CarrierTerm tb;
  tb.k = {-4, 1, 0};
  tb.omega = -0.5;
  tb.comp.assign(1, std::vector<cplx>(grid_points(3, n)));
  int idx[3];
  for (size_t p = 0; p < grid_points(3, n); ++p) {
    unflatten(p, 3, n, idx);
    const double x0 = grid_coord(idx[0], n);
    ta.comp[0][p] = cplx(std::cos(x0), 0.2);
    tb.comp[0][p] = cplx(0.7, std::sin(x0));
  }
  a.add_term(ta);
  b.add_term(tb);
  const auto prod = CarrierField::product(a, b, scalar_times(Rank::scalar, 3), Rank::scalar);
  REQUIRE(prod.terms().size() == 1);
  CHECK(prod.terms()[0].k == std::array<int64_t, 3>{5, 1, 0});
  CHECK(prod.terms()[0].omega == doctest::Approx(1.5));
  const double t = 0.3;
  double worst = 0.0;
  const auto ga = a.collapse(t);
  const auto gb = b.collapse(t);
  const auto gp = prod.collapse(t);
  for (size_t p = 0; p < gp[0].size(); ++p)
    worst = std::max(worst, std::abs(gp[0][p] - ga[0][p] * gb[0][p]));
  CHECK(worst < 1e-14);
}

TEST_CASE("reality: conjugate carrier pairs collapse to real fields") {
  const int n = 8;
  CarrierField a(3, n, Rank::scalar);
  CarrierTerm t;
  t.k = {3, 2, 0};
  t.omega = 1.25;
  t.comp.assign(1, std::vector<cplx>(grid_points(3, n)));
  int idx[3];
  for (size_t p = 0; p < grid_points(3, n); ++p) {
    unflatten(p, 3, n, idx);
    t.comp[0][p] = cplx(std::cos(grid_coord(idx[1], n)), 0.4 * std::sin(grid_coord(idx[0], n)));
  }
  a.add_term(std::move(t));
  CarrierField sym = a;
  sym.add_scaled(a.conjugated(), 1.0);
  CHECK(sym.reality_defect(0.7) < 1e-14);
}

TEST_CASE("structured mean picks the exact zero-frequency content") {
  const int n = 8;
  CarrierField a(3, n, Rank::scalar);
  // term with carrier k whose envelope contains mode -k: mean = coeff * phase
  CarrierTerm t;
  t.k = {2, 0, 0};
  t.omega = 3.0;
  t.comp.assign(1, std::vector<cplx>(grid_points(3, n)));
  int idx[3];
  for (size_t p = 0; p < grid_points(3, n); ++p) {
    unflatten(p, 3, n, idx);
    const double x0 = grid_coord(idx[0], n);
    // envelope = 5 + e^{-2 i x0}: mode (-2,0,0) coefficient = 1
    t.comp[0][p] = cplx(5.0, 0.0) + std::exp(cplx(0.0, -2.0 * x0));
  }
  a.add_term(std::move(t));
  const auto m = a.mean(0.5);
  const cplx expect = std::polar(1.0, -3.0 * 0.5);
  CHECK(std::abs(m[0] - expect) < 1e-13);

  // carrier far outside the band contributes nothing
  CarrierField b(3, n, Rank::scalar);
  CarrierTerm t2;
  t2.k = {40, 0, 0};
  t2.comp.assign(1, std::vector<cplx>(grid_points(3, n), cplx(1.0)));
  b.add_term(std::move(t2));
  CHECK(std::abs(b.mean(0.0)[0]) == 0.0);
}

TEST_CASE("holder norm examples") {
  const int n = 64;
  TimeInterval iv{0.0, 1.0};
  const auto f = TorusField::from_samples(3, n, Rank::scalar, iv, {0.0, 0.5, 1.0},
                                          [](double, const double x[3], int) {
                                            return cplx(std::sin(x[0]), 0.0);
                                          });
  CHECK(holder_norm(f, 1, 0.0, {0.0}) == doctest::Approx(2.0).epsilon(1e-6));

  const auto c = TorusField::from_samples(3, n, Rank::scalar, iv, {0.0},
                                          [](double, const double*, int) {
                                            return cplx(-1.75, 0.0);
                                          });
  CHECK(holder_norm(c, 2, 0.0, {0.0}) == doctest::Approx(1.75).epsilon(1e-12));
}

TEST_CASE("holder seminorm vs dense 1-D oracle for sin(lambda x)") {
  // dense 1-D oracle of the exact C^{1/2} seminorm of sin(lambda x)
  auto oracle = [](double lam) {
    double best = 0.0;
    const int m = 20000;
    for (int i = 0; i <= m; ++i) {
      const double h = 2.0 * kPi * i / m + 1e-9;
      const double num = 2.0 * std::abs(std::sin(lam * h / 2.0));
      best = std::max(best, num / std::pow(h, 0.5));
    }
    return best;
  };
  TimeInterval iv{0.0, 1.0};
  for (double lam : {4.0, 8.0, 16.0}) {
    const int n = 96;
    const auto f = TorusField::from_samples(3, n, Rank::scalar, iv, {0.0},
                                            [&](double, const double x[3], int) {
                                              return cplx(std::sin(lam * x[0]), 0.0);
                                            });
    HolderOptions opts;
    opts.n_pairs = 8;
    // isolate the sampled seminorm: ||f||_{0+a} - ||f||_0
    const double est = holder_norm(f, 0, 0.5, {0.0}, opts) - holder_norm(f, 0, 0.0, {0.0}, opts);
    const double truth = oracle(lam);
    CHECK(est <= truth * 1.0001);          // lower-bound estimator
    CHECK(est >= truth * 0.95);            // within 5% of the dense oracle
    CHECK(truth == doctest::Approx(1.2038 * std::sqrt(lam)).epsilon(0.01));
  }
}

TEST_CASE("interp_periodic reproduces band-limited data to near machine precision") {
  const int n = 64;
  std::vector<cplx> vals(grid_points(3, n));
  int idx[3];
  for (size_t p = 0; p < vals.size(); ++p) {
    unflatten(p, 3, n, idx);
    const double x0 = grid_coord(idx[0], n), x1 = grid_coord(idx[1], n), x2 = grid_coord(idx[2], n);
    vals[p] = cplx(std::sin(2 * x0) * std::cos(x1) + 0.5 * std::cos(3 * x2), 0.0);
  }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    double x[3] = {u(rng), u(rng), u(rng)};
    const double truth = std::sin(2 * x[0]) * std::cos(x[1]) + 0.5 * std::cos(3 * x[2]);
    worst = std::max(worst, std::abs(interp_periodic(vals, 3, n, x, 12) - cplx(truth, 0.0)));
  }
  CHECK(worst < 1e-8);
}
