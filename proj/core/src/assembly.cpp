#include "lamecvx/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lamecvx/geometry.hpp"

namespace lamecvx {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Gamma^2 as an affine functional of the matrix argument: value at Id plus a
// linear form; used for chain-rule time derivatives of the weight.
double gamma_sq_linear_part(const double K9[9], int direction) {
  const int a = (direction + 1) / 2 - 1;
  const int b = (a + 1) % 3, c = (a + 2) % 3;
  const double sign = (direction % 2 == 0) ? 1.0 : -1.0;
  return (3.0 * K9[3 * a + a] + sign * 4.0 * K9[3 * b + c] - K9[3 * b + b] -
          K9[3 * c + c]) /
         4.0;
}

}  // namespace

WeightField weight_field(int n, const std::vector<std::vector<cplx>>& R_val,
                         const std::vector<std::vector<cplx>>& R_dt,
                         const std::vector<std::vector<cplx>>& R_dtt,
                         double delta_next, int direction) {
  WeightField out;
  out.n = n;
  const double sqd = std::sqrt(delta_next);
  if (R_val.empty()) {
    // R_ell = 0: Gamma(Id) = 1/2 everywhere
    out.constant = sqd * 0.5;
    return out;
  }
  const size_t pts = R_val[0].size();
  out.d.assign(pts, 0.0);
  out.dt.assign(pts, 0.0);
  out.dtt.assign(pts, 0.0);
  const double r0 = DirectionTable::r0;
  for (size_t p = 0; p < pts; ++p) {
    double K[9], K1[9], K2[9];
    double maxdev = 0.0;
    for (int c = 0; c < 9; ++c) {
      const double r = R_val[static_cast<size_t>(c)][p].real();
      const double eye = (c % 4 == 0) ? 1.0 : 0.0;
      K[c] = eye - r / delta_next;
      maxdev = std::max(maxdev, std::abs(r / delta_next));
      K1[c] = R_dt.empty() ? 0.0 : -R_dt[static_cast<size_t>(c)][p].real() / delta_next;
      K2[c] = R_dtt.empty() ? 0.0 : -R_dtt[static_cast<size_t>(c)][p].real() / delta_next;
    }
    if (maxdev >= r0) {
      std::ostringstream os;
      const int nn = n;
      const size_t i0 = p / (static_cast<size_t>(nn) * static_cast<size_t>(nn));
      const size_t i1 = (p / static_cast<size_t>(nn)) % static_cast<size_t>(nn);
      const size_t i2 = p % static_cast<size_t>(nn);
      os << "weight_field: ||delta^{-1} R_ell|| = " << maxdev << " >= r0 at grid point ("
         << i0 << "," << i1 << "," << i2 << ")";
      throw out_of_ball_error(os.str());
    }
    const double g = gamma_sq_linear_part(K, direction);
    if (g <= 0.0) {
      std::ostringstream os;
      os << "weight_field: Gamma^2 = " << g << " <= 0 at grid point " << p;
      throw out_of_ball_error(os.str());
    }
    const double s = std::sqrt(g);
    const double g1 = gamma_sq_linear_part(K1, direction);
    const double g2 = gamma_sq_linear_part(K2, direction);
    out.d[p] = sqd * s;
    out.dt[p] = sqd * g1 / (2.0 * s);
    out.dtt[p] = sqd * (g2 / (2.0 * s) - g1 * g1 / (4.0 * s * s * s));
  }
  return out;
}

// ---- StagePerturbation --------------------------------------------------------

StagePerturbation::StagePerturbation(StageGeometry geom, std::vector<BlockCell> cells,
                                     WeightProvider weights)
    : geom_(geom),
      cells_(std::move(cells)),
      weights_(std::move(weights)),
      cutoffs_(geom.tau, geom.mu_inv) {
  for (size_t i = 0; i < cells_.size(); ++i) {
    const auto& c = cells_[i];
    if (c.par != parity(c.I)) throw error("StagePerturbation: parity code mismatch");
    cells_by_slab_[c.I.s].push_back(i);
  }
  // chi window tables per axis cell value (same for the three axes)
  const int n = geom_.n;
  chi_axis_table_.assign(static_cast<size_t>(geom_.mu_inv), std::vector<double>(static_cast<size_t>(n), 0.0));
  for (int64_t va = 0; va < geom_.mu_inv; ++va)
    for (int j = 0; j < n; ++j)
      chi_axis_table_[static_cast<size_t>(va)][static_cast<size_t>(j)] =
          cutoffs_.chi_axis(va, grid_coord(j, n), 0);
}

StagePerturbation StagePerturbation::with_flipped_slab(int64_t s0) const {
  std::vector<BlockCell> cells = cells_;
  for (auto& c : cells)
    if (c.I.s == s0) c.sign = -c.sign;
  return StagePerturbation(geom_, std::move(cells), weights_);
}

StagePerturbation StagePerturbation::restricted_to_slab(int64_t s0) const {
  std::vector<BlockCell> cells;
  for (const auto& c : cells_)
    if (c.I.s == s0) cells.push_back(c);
  return StagePerturbation(geom_, std::move(cells), weights_);
}

void StagePerturbation::accumulate_generic_weighted(
    int ncomp,
    const std::function<void(const BlockCell&, std::vector<cplx>&)>& tensor,
    const std::function<void(const BlockCell&, cplx*)>& weights,
    std::array<StagePerturbation::CustomClass, 16>& cls) const {
  const int n = geom_.n;
  const size_t pts = grid_points(3, n);
  const double lam = static_cast<double>(geom_.lambda);
  std::vector<cplx> tens(static_cast<size_t>(ncomp));

  for (const auto& cell : cells_) {
    cplx T[3];
    weights(cell, T);
    if (T[0] == cplx(0.0) && T[1] == cplx(0.0) && T[2] == cplx(0.0)) continue;
    const int m = cell.par;
    auto& cd = cls[static_cast<size_t>(m - 1)];
    if (!cd.active) {
      cd.active = true;
      cd.m = m;
      cd.Omega = static_cast<double>(m) * lam * geom_.omega_base;
      for (int a = 0; a < 3; ++a)
        cd.k[static_cast<size_t>(a)] = static_cast<int64_t>(m) * geom_.lambda *
                                       static_cast<int64_t>(geom_.f[static_cast<size_t>(a)]);
      cd.W.assign(3, std::vector<std::vector<cplx>>(static_cast<size_t>(ncomp),
                                                    std::vector<cplx>(pts, cplx(0.0))));
    }
    tensor(cell, tens);
    const auto& w0 = chi_axis_table_[static_cast<size_t>(((cell.I.v[0] % geom_.mu_inv) + geom_.mu_inv) % geom_.mu_inv)];
    const auto& w1 = chi_axis_table_[static_cast<size_t>(((cell.I.v[1] % geom_.mu_inv) + geom_.mu_inv) % geom_.mu_inv)];
    const auto& w2 = chi_axis_table_[static_cast<size_t>(((cell.I.v[2] % geom_.mu_inv) + geom_.mu_inv) % geom_.mu_inv)];
    for (int j0 = 0; j0 < n; ++j0) {
      const double a0 = w0[static_cast<size_t>(j0)];
      if (a0 == 0.0) continue;
      for (int j1 = 0; j1 < n; ++j1) {
        const double a01 = a0 * w1[static_cast<size_t>(j1)];
        if (a01 == 0.0) continue;
        const size_t base = (static_cast<size_t>(j0) * static_cast<size_t>(n) +
                             static_cast<size_t>(j1)) * static_cast<size_t>(n);
        for (int j2 = 0; j2 < n; ++j2) {
          const double chi = a01 * w2[static_cast<size_t>(j2)];
          if (chi == 0.0) continue;
          const size_t p = base + static_cast<size_t>(j2);
          for (int r = 0; r <= 2; ++r) {
            if (T[r] == cplx(0.0)) continue;
            const cplx v = chi * T[r];
            for (int c = 0; c < ncomp; ++c)
              cd.W[static_cast<size_t>(r)][static_cast<size_t>(c)][p] += v * tens[static_cast<size_t>(c)];
          }
        }
      }
    }
  }
}

void StagePerturbation::accumulate_generic(
    double t, int max_channel, int ncomp,
    const std::function<void(const BlockCell&, std::vector<cplx>&)>& tensor,
    std::array<StagePerturbation::CustomClass, 16>& cls) const {
  const double lam = static_cast<double>(geom_.lambda);
  accumulate_generic_weighted(
      ncomp, tensor,
      [&](const BlockCell& cell, cplx* T) {
        const int64_t slab = cell.I.s;
        const double th0 = cutoffs_.theta(slab, t, 0);
        const double th1 = max_channel >= 1 ? cutoffs_.theta(slab, t, 1) : 0.0;
        const double th2 = max_channel >= 2 ? cutoffs_.theta(slab, t, 2) : 0.0;
        if (th0 == 0.0 && th1 == 0.0 && th2 == 0.0) {
          T[0] = T[1] = T[2] = cplx(0.0);
          return;
        }
        const int m = cell.par;
        const double domega = static_cast<double>(m) * lam * (geom_.omega_base - cell.blk.omega);
        const cplx ph = std::polar(cell.coef * cell.sign, domega * t);
        const cplx iw(0.0, domega);
        T[0] = th0 * ph;
        T[1] = max_channel >= 1 ? (th1 + th0 * iw) * ph : cplx(0.0);
        T[2] = max_channel >= 2 ? (th2 + 2.0 * th1 * iw + th0 * iw * iw) * ph : cplx(0.0);
      },
      cls);
}

void StagePerturbation::accumulate_combs(double t, int max_channel,
                                         std::array<StageSlice::ClassData, 16>& cls) const {
  std::array<CustomClass, 16> gen;
  accumulate_generic(t, max_channel, 3,
                     [](const BlockCell& cell, std::vector<cplx>& out) {
                       const Vec3 tf = cell.blk.tilde_f();
                       for (int c = 0; c < 3; ++c) out[static_cast<size_t>(c)] = tf[c];
                     },
                     gen);
  for (int m = 1; m <= 16; ++m) {
    const auto& g = gen[static_cast<size_t>(m - 1)];
    auto& cd = cls[static_cast<size_t>(m - 1)];
    cd.active = g.active;
    if (!g.active) continue;
    cd.k = g.k;
    cd.Omega = g.Omega;
    cd.m = g.m;
    for (size_t r = 0; r < g.W.size(); ++r)
      for (int c = 0; c < 3; ++c)
        cd.W[r][static_cast<size_t>(c)] = g.W[r][static_cast<size_t>(c)];
  }
}

std::array<StagePerturbation::CustomClass, 16> StagePerturbation::evaluate_custom(
    double t, int ncomp,
    const std::function<void(const BlockCell&, std::vector<cplx>&)>& tensor) const {
  std::array<CustomClass, 16> cls;
  accumulate_generic(t, 2, ncomp, tensor, cls);
  const WeightField wf = weights_(t);
  const size_t pts = grid_points(3, geom_.n);
  for (auto& cd : cls) {
    if (!cd.active) continue;
    std::vector<std::vector<std::vector<cplx>>> W(
        3, std::vector<std::vector<cplx>>(static_cast<size_t>(ncomp), std::vector<cplx>(pts, cplx(0.0))));
    for (int c = 0; c < ncomp; ++c) {
      const auto& C0 = cd.W[0][static_cast<size_t>(c)];
      const auto& C1 = cd.W[1][static_cast<size_t>(c)];
      const auto& C2 = cd.W[2][static_cast<size_t>(c)];
      auto& W0 = W[0][static_cast<size_t>(c)];
      auto& W1 = W[1][static_cast<size_t>(c)];
      auto& W2 = W[2][static_cast<size_t>(c)];
      if (wf.is_constant()) {
        const double d0 = wf.constant;
        for (size_t p = 0; p < pts; ++p) {
          W0[p] = d0 * C0[p];
          W1[p] = d0 * C1[p];
          W2[p] = d0 * C2[p];
        }
      } else {
        for (size_t p = 0; p < pts; ++p) {
          W0[p] = wf.d[p] * C0[p];
          W1[p] = wf.dt[p] * C0[p] + wf.d[p] * C1[p];
          W2[p] = wf.dtt[p] * C0[p] + 2.0 * wf.dt[p] * C1[p] + wf.d[p] * C2[p];
        }
      }
      const cplx iO(0.0, cd.Omega);
      for (size_t p = 0; p < pts; ++p) {
        const cplx w0 = W0[p], w1 = W1[p], w2 = W2[p];
        W1[p] = w1 - iO * w0;
        W2[p] = w2 - 2.0 * iO * w1 + iO * iO * w0;
      }
    }
    cd.W = std::move(W);
  }
  return cls;
}

std::array<std::vector<cplx>, 3> StagePerturbation::class_comb(int m, double t,
                                                               int channel) const {
  std::array<StageSlice::ClassData, 16> cls;
  accumulate_combs(t, channel, cls);
  auto& cd = cls[static_cast<size_t>(m - 1)];
  if (!cd.active) {
    std::array<std::vector<cplx>, 3> zero;
    for (auto& z : zero) z.assign(grid_points(3, geom_.n), cplx(0.0));
    return zero;
  }
  return cd.W[static_cast<size_t>(channel)];
}

StageSlice StagePerturbation::evaluate(double t, int max_channel) const {
  if (max_channel < 0 || max_channel > 2)
    throw field_error("StagePerturbation::evaluate: channel must be 0..2");
  StageSlice s;
  s.n = geom_.n;
  s.t = t;
  s.geom = geom_;
  accumulate_combs(t, max_channel, s.cls);

  const WeightField wf = weights_(t);
  const size_t pts = grid_points(3, geom_.n);

  for (auto& cd : s.cls) {
    if (!cd.active) continue;
    // multiply combs C(t) by the weight channels: W = d*C with Leibniz, then
    // fold the carrier derivative -i Omega into full-time channels.
    std::array<std::array<std::vector<cplx>, 3>, 3> W;
    for (int r = 0; r <= max_channel; ++r)
      for (int c = 0; c < 3; ++c) W[static_cast<size_t>(r)][static_cast<size_t>(c)].assign(pts, cplx(0.0));
    for (int c = 0; c < 3; ++c) {
      const auto& C0 = cd.W[0][static_cast<size_t>(c)];
      auto& W0 = W[0][static_cast<size_t>(c)];
      if (wf.is_constant()) {
        const double d0 = wf.constant;
        for (size_t p = 0; p < pts; ++p) W0[p] = d0 * C0[p];
        if (max_channel >= 1) {
          const auto& C1 = cd.W[1][static_cast<size_t>(c)];
          auto& W1 = W[1][static_cast<size_t>(c)];
          for (size_t p = 0; p < pts; ++p) W1[p] = d0 * C1[p];
        }
        if (max_channel >= 2) {
          const auto& C2 = cd.W[2][static_cast<size_t>(c)];
          auto& W2 = W[2][static_cast<size_t>(c)];
          for (size_t p = 0; p < pts; ++p) W2[p] = d0 * C2[p];
        }
      } else {
        for (size_t p = 0; p < pts; ++p) W0[p] = wf.d[p] * C0[p];
        if (max_channel >= 1) {
          const auto& C1 = cd.W[1][static_cast<size_t>(c)];
          auto& W1 = W[1][static_cast<size_t>(c)];
          for (size_t p = 0; p < pts; ++p) W1[p] = wf.dt[p] * C0[p] + wf.d[p] * C1[p];
        }
        if (max_channel >= 2) {
          const auto& C1 = cd.W[1][static_cast<size_t>(c)];
          const auto& C2 = cd.W[2][static_cast<size_t>(c)];
          auto& W2 = W[2][static_cast<size_t>(c)];
          for (size_t p = 0; p < pts; ++p)
            W2[p] = wf.dtt[p] * C0[p] + 2.0 * wf.dt[p] * C1[p] + wf.d[p] * C2[p];
        }
      }
      // full time derivatives of the carrier term
      const cplx iO(0.0, cd.Omega);
      if (max_channel >= 2) {
        auto& W1 = W[1][static_cast<size_t>(c)];
        auto& W2 = W[2][static_cast<size_t>(c)];
        for (size_t p = 0; p < pts; ++p) {
          const cplx w0 = W0[p], w1 = W1[p], w2 = W2[p];
          W1[p] = w1 - iO * w0;
          W2[p] = w2 - 2.0 * iO * w1 + iO * iO * w0;
        }
      } else if (max_channel >= 1) {
        auto& W1 = W[1][static_cast<size_t>(c)];
        for (size_t p = 0; p < pts; ++p) W1[p] -= iO * W0[p];
      }
    }
    cd.W = std::move(W);
  }

  // time correction: u_t = -mean(u_p) per channel (structured zero-mode sum)
  for (int r = 0; r <= max_channel; ++r) {
    const CarrierField up = s.u_principal(r);
    const auto mean = up.mean(t);
    for (int c = 0; c < 3; ++c) s.u_t[static_cast<size_t>(r)][static_cast<size_t>(c)] = -mean[static_cast<size_t>(c)];
  }
  return s;
}

std::array<StagePerturbation::CustomClass, 16> StagePerturbation::mollified_classes(
    double t, double ell, const TimeKernel& kernel) const {
  std::array<CustomClass, 16> out;
  if (!(ell > 0.0)) throw field_error("mollified_classes: ell must be > 0");
  const size_t pts = grid_points(3, geom_.n);
  const double lam = static_cast<double>(geom_.lambda);
  const bool const_weight = weights_(t).is_constant();

  if (const_weight) {
    const double d0 = weights_(t).constant;
    // factorized route: kernel quadrature folded into per-cell scalars
    accumulate_generic_weighted(
        3,
        [](const BlockCell& cell, std::vector<cplx>& tens) {
          const Vec3 tf = cell.blk.tilde_f();
          for (int c2 = 0; c2 < 3; ++c2) tens[static_cast<size_t>(c2)] = tf[c2];
        },
        [&](const BlockCell& cell, cplx T[3]) {
          const int m = cell.par;
          const double Omega = static_cast<double>(m) * lam * geom_.omega_base;
          const double domega = static_cast<double>(m) * lam * (geom_.omega_base - cell.blk.omega);
          const int boost = static_cast<int>(std::ceil(std::abs(Omega) * ell / 2.0));
          const QuadRule& g = gauss_rule(kernel.base_quadrature_points() + 4 + boost);
          for (int r = 0; r <= 2; ++r) {
            cplx acc = 0.0;
            for (size_t q = 0; q < g.x.size(); ++q) {
              const double tau = ell * g.x[q];
              const double tq = t - tau;
              const double th = cutoffs_.theta(cell.I.s, tq, 0);
              if (th == 0.0) continue;
              const double kval = kernel.deriv(g.x[q], r) / std::pow(ell, static_cast<double>(r));
              acc += g.w[q] * kval * std::polar(1.0, Omega * tau) * th *
                     std::polar(cell.coef * cell.sign, domega * tq);
            }
            T[r] = acc;
          }
        },
        out);
    for (auto& cd : out) {
      if (!cd.active) continue;
      for (auto& ch : cd.W)
        for (auto& comp : ch)
          for (auto& v : comp) v *= d0;
    }
    return out;
  }

  // general route: quadrature over full envelope evaluations
  for (int r = 0; r <= 2; ++r) {
    // per class the quadrature rule depends on Omega; use the largest boost
    const double Omega_max = 16.0 * lam * geom_.omega_base;
    const int boost = static_cast<int>(std::ceil(Omega_max * ell / 2.0));
    const QuadRule& g = gauss_rule(kernel.base_quadrature_points() + 4 + boost);
    for (size_t q = 0; q < g.x.size(); ++q) {
      const double tau = ell * g.x[q];
      const double kval = kernel.deriv(g.x[q], r) / std::pow(ell, static_cast<double>(r));
      const StageSlice s = evaluate(t - tau, 0);
      for (int m = 1; m <= 16; ++m) {
        const auto& cd = s.cls[static_cast<size_t>(m - 1)];
        if (!cd.active) continue;
        auto& dst = out[static_cast<size_t>(m - 1)];
        if (!dst.active) {
          dst.active = true;
          dst.k = cd.k;
          dst.Omega = cd.Omega;
          dst.m = m;
          dst.W.assign(3, std::vector<std::vector<cplx>>(3, std::vector<cplx>(pts, cplx(0.0))));
        }
        const cplx wq = g.w[q] * kval * std::polar(1.0, cd.Omega * tau);
        for (int c = 0; c < 3; ++c) {
          auto& acc = dst.W[static_cast<size_t>(r)][static_cast<size_t>(c)];
          const auto& src = cd.W[0][static_cast<size_t>(c)];
          for (size_t p = 0; p < pts; ++p) acc[p] += wq * src[p];
        }
      }
    }
  }
  return out;
}

// ---- StageSlice builders ------------------------------------------------------

namespace {

CarrierField from_class_terms(
    const StageSlice& s, Rank rank, int channel,
    const std::function<void(const StageSlice::ClassData&, int r, std::vector<std::vector<cplx>>&)>& envelope) {
  CarrierField out(3, s.n, rank);
  const int nc = rank_components(rank, 3);
  for (const auto& cd : s.cls) {
    if (!cd.active) continue;
    CarrierTerm plus;
    plus.k = cd.k;
    plus.omega = cd.Omega;
    plus.comp.assign(static_cast<size_t>(nc), std::vector<cplx>());
    {
      std::vector<std::vector<cplx>> env(static_cast<size_t>(nc));
      envelope(cd, channel, env);
      plus.comp = std::move(env);
    }
    // conjugate partner
    CarrierTerm minus;
    minus.k = {-plus.k[0], -plus.k[1], -plus.k[2]};
    minus.omega = -plus.omega;
    minus.comp.assign(static_cast<size_t>(nc), std::vector<cplx>());
    for (int c = 0; c < nc; ++c) {
      auto& dst = minus.comp[static_cast<size_t>(c)];
      const auto& src = plus.comp[static_cast<size_t>(c)];
      dst.resize(src.size());
      for (size_t p = 0; p < src.size(); ++p) dst[p] = std::conj(src[p]);
    }
    out.add_term(std::move(plus));
    out.add_term(std::move(minus));
  }
  out.normalize();
  return out;
}

}  // namespace

CarrierField StageSlice::u_principal(int channel) const {
  const double lam = static_cast<double>(geom.lambda);
  return from_class_terms(*this, Rank::vector, channel,
                          [lam](const ClassData& cd, int r, std::vector<std::vector<cplx>>& env) {
                            const double scale = 1.0 / (lam * cd.m);
                            for (int c = 0; c < 3; ++c) {
                              const auto& w = cd.W[static_cast<size_t>(r)][static_cast<size_t>(c)];
                              auto& e = env[static_cast<size_t>(c)];
                              e.resize(w.size());
                              for (size_t p = 0; p < w.size(); ++p) e[p] = scale * w[p];
                            }
                          });
}

CarrierField StageSlice::u_total(int channel) const {
  CarrierField out = u_principal(channel);
  // add the constant-in-x correction as a zero-carrier term
  CarrierTerm corr;
  corr.comp.assign(3, std::vector<cplx>(grid_points(3, n), cplx(0.0)));
  for (int c = 0; c < 3; ++c) {
    const cplx v = u_t[static_cast<size_t>(channel)][static_cast<size_t>(c)];
    for (auto& x : corr.comp[static_cast<size_t>(c)]) x = v;
  }
  out.add_term(std::move(corr));
  out.normalize();
  return out;
}

CarrierField StageSlice::w_p(int channel) const {
  const auto fv = geom.f;
  return from_class_terms(*this, Rank::matrix, channel,
                          [fv](const ClassData& cd, int r, std::vector<std::vector<cplx>>& env) {
                            // i W (x) f : component (m,n) = i W_m f_n
                            const auto& W = cd.W[static_cast<size_t>(r)];
                            const size_t pts = W[0].size();
                            for (int mm = 0; mm < 3; ++mm)
                              for (int nn = 0; nn < 3; ++nn) {
                                auto& e = env[static_cast<size_t>(3 * mm + nn)];
                                e.assign(pts, cplx(0.0));
                                const double fn = static_cast<double>(fv[static_cast<size_t>(nn)]);
                                if (fn == 0.0) continue;
                                for (size_t p = 0; p < pts; ++p)
                                  e[p] = cplx(0.0, fn) * W[static_cast<size_t>(mm)][p];
                              }
                          });
}

CarrierField StageSlice::w_c(int channel) const {
  const double lam = static_cast<double>(geom.lambda);
  const int nn = n;
  return from_class_terms(
      *this, Rank::matrix, channel,
      [lam, nn](const ClassData& cd, int r, std::vector<std::vector<cplx>>& env) {
        // (lambda m)^{-1} grad W: spectral envelope gradient (no carrier shift)
        const double scale = 1.0 / (lam * cd.m);
        const size_t pts = cd.W[0][0].size();
        for (int mm = 0; mm < 3; ++mm) {
          std::vector<cplx> spec = cd.W[static_cast<size_t>(r)][static_cast<size_t>(mm)];
          spectral_from_physical(3, nn, spec.data());
          for (int dd = 0; dd < 3; ++dd) {
            std::vector<cplx> ds(pts);
            int idx[3];
            for (size_t p = 0; p < pts; ++p) {
              unflatten(p, 3, nn, idx);
              const double kd = static_cast<double>(env_freq(idx[dd], nn));
              ds[p] = cplx(0.0, kd) * spec[p];
            }
            physical_from_spectral(3, nn, ds.data());
            auto& e = env[static_cast<size_t>(3 * mm + dd)];
            e.resize(pts);
            for (size_t p = 0; p < pts; ++p) e[p] = scale * ds[p];
          }
        }
      });
}

CarrierField StageSlice::class_coefficient(int m, int channel) const {
  const auto& cd = cls.at(static_cast<size_t>(m - 1));
  CarrierField out(3, n, Rank::vector);
  if (!cd.active) return out;
  CarrierTerm term;
  term.k = cd.k;
  term.omega = cd.Omega;
  term.comp.assign(3, std::vector<cplx>());
  for (int c = 0; c < 3; ++c) term.comp[static_cast<size_t>(c)] = cd.W[static_cast<size_t>(channel)][static_cast<size_t>(c)];
  out.add_term(std::move(term));
  return out;
}

CarrierField StageSlice::grad_u(int channel) const {
  CarrierField g = w_p(channel);
  g.add_scaled(w_c(channel), 1.0);
  g.normalize();
  return g;
}

}  // namespace lamecvx
