#include "lamecvx/driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "lamecvx/geometry.hpp"
#include "lamecvx/holder.hpp"

namespace lamecvx {

namespace {

constexpr double kPi = 3.14159265358979323846;

int64_t quantize_time(double t) { return static_cast<int64_t>(std::llround(t * 1099511627776.0)); }

/// Partial DFT of a spectral grid onto a product lattice of coordinates.
std::vector<cplx> lattice_eval(const std::vector<cplx>& spectral, int n,
                               const std::array<std::vector<double>, 3>& coords) {
  const size_t L0 = coords[0].size(), L1 = coords[1].size(), L2 = coords[2].size();
  const size_t ns = static_cast<size_t>(n);
  std::vector<cplx> a(L0 * ns * ns, cplx(0.0));
  for (size_t x0 = 0; x0 < L0; ++x0) {
    for (int j0 = 0; j0 < n; ++j0) {
      const cplx ph = std::polar(1.0, static_cast<double>(env_freq(j0, n)) * coords[0][x0]);
      const size_t src = static_cast<size_t>(j0) * ns * ns;
      const size_t dst = x0 * ns * ns;
      for (size_t rest = 0; rest < ns * ns; ++rest) a[dst + rest] += ph * spectral[src + rest];
    }
  }
  std::vector<cplx> b(L0 * L1 * ns, cplx(0.0));
  for (size_t x0 = 0; x0 < L0; ++x0)
    for (size_t x1 = 0; x1 < L1; ++x1)
      for (int j1 = 0; j1 < n; ++j1) {
        const cplx ph = std::polar(1.0, static_cast<double>(env_freq(j1, n)) * coords[1][x1]);
        const size_t src = (x0 * ns + static_cast<size_t>(j1)) * ns;
        const size_t dst = (x0 * L1 + x1) * ns;
        for (size_t j2 = 0; j2 < ns; ++j2) b[dst + j2] += ph * a[src + j2];
      }
  std::vector<cplx> c(L0 * L1 * L2, cplx(0.0));
  for (size_t x01 = 0; x01 < L0 * L1; ++x01)
    for (size_t x2 = 0; x2 < L2; ++x2)
      for (int j2 = 0; j2 < n; ++j2) {
        const cplx ph = std::polar(1.0, static_cast<double>(env_freq(j2, n)) * coords[2][x2]);
        c[x01 * L2 + x2] += ph * b[x01 * ns + static_cast<size_t>(j2)];
      }
  return c;
}

double grid_max_abs(const std::vector<std::vector<cplx>>& g) {
  double m = 0.0;
  for (const auto& comp : g)
    for (const auto& v : comp) m = std::max(m, std::abs(v));
  return m;
}

/// conj-reflect add: out(m) += conj(acc(-m)) on a spectral grid
void hermitian_complete(std::vector<cplx>& spec, int n) {
  std::vector<cplx> out(spec.size());
  const size_t ns = static_cast<size_t>(n);
  for (int j0 = 0; j0 < n; ++j0)
    for (int j1 = 0; j1 < n; ++j1)
      for (int j2 = 0; j2 < n; ++j2) {
        const size_t p = (static_cast<size_t>(j0) * ns + static_cast<size_t>(j1)) * ns +
                         static_cast<size_t>(j2);
        const int r0 = (n - j0) % n, r1 = (n - j1) % n, r2 = (n - j2) % n;
        const size_t q = (static_cast<size_t>(r0) * ns + static_cast<size_t>(r1)) * ns +
                         static_cast<size_t>(r2);
        out[p] = spec[p] + std::conj(spec[q]);
      }
  spec = std::move(out);
}

}  // namespace

// ---- starting tuple -----------------------------------------------------------

StartingTuple starting_tuple(const Schedule& sched, const LameParams& lame) {
  lame.validate();
  sched.validate();
  StartingTuple u0;
  u0.lambda0 = sched.lambda_q(0);
  u0.f1 = DirectionTable::f(1);
  const double f2 = 2.0;
  const double lam0 = static_cast<double>(u0.lambda0);
  u0.amplitude = sched.epsilon * std::sqrt(sched.delta_q(1)) / (2.0 * lam0 * lam0 * f2);
  u0.omega = lam0 * std::sqrt(lame.p_speed2() * f2);
  u0.c0 = sched.c_q(0);
  return u0;
}

CarrierField StartingTuple::channel(int n, double t, int r) const {
  (void)t;  // channels are time-global; carrier phases carry the t-dependence
  CarrierField out(3, n, Rank::vector);
  const size_t pts = grid_points(3, n);
  CarrierTerm plus;
  plus.k = {lambda0 * f1[0], lambda0 * f1[1], lambda0 * f1[2]};
  plus.omega = omega;
  plus.comp.assign(3, std::vector<cplx>());
  cplx factor = amplitude;
  for (int e = 0; e < r; ++e) factor *= cplx(0.0, -omega);
  for (int c = 0; c < 3; ++c)
    plus.comp[static_cast<size_t>(c)].assign(pts, factor * static_cast<double>(f1[static_cast<size_t>(c)]));
  CarrierTerm minus;
  minus.k = {-plus.k[0], -plus.k[1], -plus.k[2]};
  minus.omega = -plus.omega;
  minus.comp.assign(3, std::vector<cplx>());
  for (int c = 0; c < 3; ++c)
    minus.comp[static_cast<size_t>(c)].assign(pts, std::conj(factor) * static_cast<double>(f1[static_cast<size_t>(c)]));
  out.add_term(std::move(plus));
  out.add_term(std::move(minus));
  return out;
}

FieldChannels StartingTuple::channels(int n, double t) const {
  FieldChannels ch;
  ch.val = channel(n, t, 0);
  ch.dt = channel(n, t, 1);
  ch.dtt = channel(n, t, 2);
  return ch;
}

Mat3 StartingTuple::grad_at(double t, const double x[3]) const {
  const double lam0 = static_cast<double>(lambda0);
  double phase = 0.0;
  for (int a = 0; a < 3; ++a) phase += static_cast<double>(f1[static_cast<size_t>(a)]) * x[a];
  phase = lam0 * phase - omega * t;
  Mat3 g;
  for (int m = 0; m < 3; ++m)
    for (int nn = 0; nn < 3; ++nn)
      g(m, nn) = -2.0 * amplitude * lam0 * static_cast<double>(f1[static_cast<size_t>(m)]) *
                 static_cast<double>(f1[static_cast<size_t>(nn)]) * std::sin(phase);
  return g;
}

double StartingTuple::sup_amplitude() const { return 2.0 * amplitude * std::sqrt(2.0); }

// ---- Construction: setup ------------------------------------------------------

Construction::Construction(RunSettings settings)
    : settings_(std::move(settings)),
      kernel_(settings_.sched.n0),
      u0_(starting_tuple(settings_.sched, settings_.lame)) {
  cq_ = settings_.sched.c_q(0);
  const double tau_init = settings_.sched.tau_qm1(0);
  interval_ = TimeInterval{-tau_init, settings_.sched.T + tau_init};

  const int cn = std::max(2, settings_.check_nodes);
  for (int j = 0; j < cn; ++j)
    master_nodes_.push_back(settings_.sched.T * (0.08 + 0.84 * j / (cn - 1)));
  defect_acc_.assign(master_nodes_.size(),
                     std::vector<std::vector<cplx>>(3, std::vector<cplx>(grid_points(3, settings_.n), cplx(0.0))));
}

WeightField Construction::weight_at(double t, int direction) const {
  const double delta_next = settings_.sched.delta_q(q_ + 1);
  if (rq_zero_) {
    WeightField w;
    w.n = settings_.n;
    w.constant = std::sqrt(delta_next) * 0.5;
    return w;
  }
  const int64_t key = quantize_time(t);
  if (weight_direction_ == direction) {
    auto it = weight_cache_.find(key);
    if (it != weight_cache_.end()) return it->second;
  } else {
    weight_cache_.clear();
  }
  const FieldChannels rl = r_ell(t);
  const auto g0 = rl.val.collapse(t);
  const auto g1 = rl.dt.collapse(t);
  const auto g2 = rl.dtt.collapse(t);
  WeightField w = weight_field(settings_.n, g0, g1, g2, delta_next, direction);
  const_cast<Construction*>(this)->weight_direction_ = direction;
  weight_cache_[key] = w;
  return w;
}

FieldChannels Construction::r_ell(double t) const {
  const int64_t key = quantize_time(t);
  auto it = rell_cache_.find(key);
  if (it != rell_cache_.end()) return it->second;
  FieldChannels ch;
  if (rq_zero_ || !rq_lowband_) {
    ch.val = CarrierField(3, settings_.n, Rank::matrix);
    ch.dt = ch.val;
    ch.dtt = ch.val;
  } else {
    const double ell0 = settings_.sched.derived_scales(q_, 0).ell;
    ch.val = time_mollify_at(*rq_lowband_, t, ell0, kernel_, 0);
    ch.dt = time_mollify_at(*rq_lowband_, t, ell0, kernel_, 1);
    ch.dtt = time_mollify_at(*rq_lowband_, t, ell0, kernel_, 2);
  }
  rell_cache_[key] = ch;
  return ch;
}

// ---- displacement evaluation ---------------------------------------------------

FieldChannels Construction::displacement(double t, int n) const {
  FieldChannels ch = u0_.channels(n, t);
  for (const auto& wave : stages_) {
    const StagePerturbation* obj = &wave;
    std::unique_ptr<StagePerturbation> rebuilt;
    if (wave.geometry().n != n) {
      StageGeometry g = wave.geometry();
      g.n = n;
      rebuilt = std::make_unique<StagePerturbation>(g, std::vector<BlockCell>(wave.cells()),
                                                    wave.weight_provider());
      obj = rebuilt.get();
    }
    const StageSlice s = obj->evaluate(t);
    ch.val.add_scaled(s.u_total(0), 1.0);
    ch.dt.add_scaled(s.u_total(1), 1.0);
    ch.dtt.add_scaled(s.u_total(2), 1.0);
  }
  ch.val.normalize();
  ch.dt.normalize();
  ch.dtt.normalize();
  return ch;
}

CarrierField Construction::displacement_channel(double t, int r, int n) const {
  FieldChannels ch = displacement(t, n);
  return ch.ch(r);
}

FieldChannels Construction::mollified_displacement(double t, double ell, int n) const {
  if (ell == 0.0) return displacement(t, n);
  if (!interval_.contains(t - ell, 1e-12) || !interval_.contains(t + ell, 1e-12))
    throw field_error("mollified_displacement: insufficient interval margin");
  const int J = band_level(ell);
  const double scale = std::exp2(static_cast<double>(J));
  const size_t pts = grid_points(3, n);

  // spectral accumulators for the +carrier halves, per channel/component
  std::array<std::array<std::vector<cplx>, 3>, 3> acc;
  for (int r = 0; r <= 2; ++r)
    for (int c = 0; c < 3; ++c) acc[static_cast<size_t>(r)][static_cast<size_t>(c)].assign(pts, cplx(0.0));

  auto fold_mode = [&](const std::array<int64_t, 3>& mode, int r, int c, cplx v) {
    for (int a = 0; a < 3; ++a)
      if (!env_mode_in_band(mode[static_cast<size_t>(a)], n))
        throw field_error("mollified_displacement: surviving band mode exceeds the grid; "
                          "increase the collocation grid");
    size_t idx = 0;
    for (int a = 0; a < 3; ++a) {
      int64_t m = mode[static_cast<size_t>(a)];
      if (m < 0) m += n;
      idx = idx * static_cast<size_t>(n) + static_cast<size_t>(m);
    }
    acc[static_cast<size_t>(r)][static_cast<size_t>(c)][idx] += v;
  };

  // starting-tuple part: constant envelope, scalar kernel quadrature
  {
    const std::array<int64_t, 3> k{u0_.lambda0 * u0_.f1[0], u0_.lambda0 * u0_.f1[1],
                                   u0_.lambda0 * u0_.f1[2]};
    double kabs = 0.0;
    for (int a = 0; a < 3; ++a) kabs += static_cast<double>(k[a]) * static_cast<double>(k[a]);
    const double mult = lp_profile(std::sqrt(kabs) / scale);
    if (mult > 0.0) {
      const int boost = static_cast<int>(std::ceil(u0_.omega * ell / 2.0));
      const QuadRule& g = gauss_rule(kernel_.base_quadrature_points() + 4 + boost);
      for (int r = 0; r <= 2; ++r) {
        cplx F = 0.0;
        for (size_t q = 0; q < g.x.size(); ++q) {
          const double tau = ell * g.x[q];
          F += g.w[q] * kernel_.deriv(g.x[q], r) / std::pow(ell, static_cast<double>(r)) *
               std::polar(1.0, u0_.omega * tau);
        }
        const cplx co = u0_.amplitude * mult * F * std::polar(1.0, -u0_.omega * t);
        for (int c = 0; c < 3; ++c)
          fold_mode(k, r, c, co * static_cast<double>(u0_.f1[static_cast<size_t>(c)]));
      }
    }
  }

  // stage waves
  for (const auto& wave : stages_) {
    const StagePerturbation* obj = &wave;
    std::unique_ptr<StagePerturbation> rebuilt;
    if (wave.geometry().n != n) {
      StageGeometry g = wave.geometry();
      g.n = n;
      rebuilt = std::make_unique<StagePerturbation>(g, std::vector<BlockCell>(wave.cells()),
                                                    wave.weight_provider());
      obj = rebuilt.get();
    }
    // skip stages whose lowest carrier already exceeds the kill radius by the
    // whole envelope band
    const auto classes = obj->mollified_classes(t, ell, kernel_);
    for (const auto& cd : classes) {
      if (!cd.active) continue;
      double kabs = 0.0;
      for (int a = 0; a < 3; ++a)
        kabs += static_cast<double>(cd.k[a]) * static_cast<double>(cd.k[a]);
      const double envmax = std::sqrt(3.0) * n / 2.0;
      if (std::sqrt(kabs) - envmax > 2.0 * scale) continue;
      for (int r = 0; r <= 2; ++r) {
        for (int c = 0; c < 3; ++c) {
          std::vector<cplx> spec = cd.W[static_cast<size_t>(r)][static_cast<size_t>(c)];
          spectral_from_physical(3, n, spec.data());
          int idx[3];
          const cplx tphase = std::polar(1.0, -cd.Omega * t);
          for (size_t p = 0; p < pts; ++p) {
            if (spec[p] == cplx(0.0)) continue;
            unflatten(p, 3, n, idx);
            std::array<int64_t, 3> mode{env_freq(idx[0], n) + cd.k[0],
                                        env_freq(idx[1], n) + cd.k[1],
                                        env_freq(idx[2], n) + cd.k[2]};
            double m2 = 0.0;
            for (int a = 0; a < 3; ++a) m2 += static_cast<double>(mode[static_cast<size_t>(a)]) * static_cast<double>(mode[static_cast<size_t>(a)]);
            const double mult = lp_profile(std::sqrt(m2) / scale);
            if (mult == 0.0) continue;
            fold_mode(mode, r, c, mult * tphase * spec[p]);
          }
        }
      }
    }
  }

  // complete the Hermitian halves and return physical carrier-0 fields
  FieldChannels out;
  for (int r = 0; r <= 2; ++r) {
    CarrierField f(3, n, Rank::vector);
    CarrierTerm term;
    term.comp.assign(3, std::vector<cplx>());
    for (int c = 0; c < 3; ++c) {
      std::vector<cplx> spec = acc[static_cast<size_t>(r)][static_cast<size_t>(c)];
      hermitian_complete(spec, n);
      physical_from_spectral(3, n, spec.data());
      term.comp[static_cast<size_t>(c)] = std::move(spec);
    }
    f.add_term(std::move(term));
    if (r == 0)
      out.val = std::move(f);
    else if (r == 1)
      out.dt = std::move(f);
    else
      out.dtt = std::move(f);
  }
  return out;
}

// ---- stage construction ---------------------------------------------------------

StagePerturbation Construction::build_stage(int i, std::optional<int64_t> flip_slab) const {
  const Schedule& sched = settings_.sched;
  const DerivedScales sc = sched.derived_scales(q_, i);
  const int direction = i + 1;

  StageGeometry geom;
  geom.n = settings_.n;
  geom.direction = direction;
  geom.lambda = sched.lambda_stage(q_, i + 1);
  geom.f = DirectionTable::f(direction);
  geom.omega_base = std::sqrt(settings_.lame.p_speed2() * 2.0);
  geom.tau = sc.tau;
  geom.mu_inv = sc.mu_inv;

  // target interval for the composed tuple
  const double tau_i = sc.tau;
  TimeInterval target{-tau_i, sched.T + tau_i};
  TimeInterval shrunk{interval_.t0 + 3.0 * sc.ell, interval_.t1 - 3.0 * sc.ell};
  TimeInterval out{std::max(target.t0, shrunk.t0), std::min(target.t1, shrunk.t1)};
  out.validate();

  const CutoffSystem cutoffs(sc.tau, sc.mu_inv);
  const auto slabs = cutoffs.active_slabs(out.t0, out.t1);

  // anchor lattice coordinates
  std::array<std::vector<double>, 3> coords;
  for (int a = 0; a < 3; ++a)
    for (int64_t v = 0; v < sc.mu_inv; ++v)
      coords[static_cast<size_t>(a)].push_back(
          std::remainder(2.0 * kPi * static_cast<double>(v) / static_cast<double>(sc.mu_inv), 2.0 * kPi));

  std::vector<BlockCell> cells;
  const double tol = 1e-12;
  for (int64_t s : slabs) {
    const double t_anchor = cutoffs.slab_anchor(s);
    const FieldChannels ul = mollified_displacement(t_anchor, sc.ell, settings_.n);
    // gradient of the low-band snapshot, evaluated exactly on the cell lattice
    const CarrierField grad = gradient(ul.val);
    if (grad.term_count() != 1)
      throw field_error("build_stage: mollified field must be a single carrier-0 term");
    std::array<std::vector<cplx>, 9> lattice_vals;
    for (int c = 0; c < 9; ++c) {
      std::vector<cplx> spec = grad.terms()[0].comp[static_cast<size_t>(c)];
      spectral_from_physical(3, settings_.n, spec.data());
      lattice_vals[static_cast<size_t>(c)] = lattice_eval(spec, settings_.n, coords);
    }
    const int64_t L = sc.mu_inv;
    for (int64_t v0 = 0; v0 < L; ++v0)
      for (int64_t v1 = 0; v1 < L; ++v1)
        for (int64_t v2 = 0; v2 < L; ++v2) {
          const size_t idx = (static_cast<size_t>(v0) * static_cast<size_t>(L) +
                              static_cast<size_t>(v1)) * static_cast<size_t>(L) +
                             static_cast<size_t>(v2);
          BlockCell cell;
          cell.I = WaveIndex{s, {v0, v1, v2}};
          cell.par = parity(cell.I);
          for (int c = 0; c < 9; ++c)
            cell.grad_u(c / 3, c % 3) = lattice_vals[static_cast<size_t>(c)][idx].real();
          cell.blk = build_block(freeze(cell.grad_u), geom.f, settings_.lame, tol);
          cell.coef = 1.0 / (std::sqrt(2.0) * norm(cell.blk.tilde_f()) * std::sqrt(2.0));
          cell.sign = (flip_slab && *flip_slab == s) ? -1.0 : 1.0;
          cells.push_back(cell);
        }
  }

  return StagePerturbation(geom, std::move(cells), make_weight_provider(direction, settings_.n));
}

WeightProvider Construction::make_weight_provider(int direction, int n) const {
  const double delta_next = settings_.sched.delta_q(q_ + 1);
  if (rq_zero_) {
    const double c = std::sqrt(delta_next) * 0.5;
    return [c, n](double) {
      WeightField w;
      w.n = n;
      w.constant = c;
      return w;
    };
  }
  // Bind the band-limited Reynolds stack by value so providers survive copies
  // of the construction (bifurcation clones).
  auto stack = rq_lowband_;
  const TimeKernel kernel = kernel_;
  const double ell0 = settings_.sched.derived_scales(q_, 0).ell;
  return [stack, kernel, ell0, delta_next, direction, n](double t) {
    const CarrierField v = time_mollify_at(*stack, t, ell0, kernel, 0);
    const CarrierField d1 = time_mollify_at(*stack, t, ell0, kernel, 1);
    const CarrierField d2 = time_mollify_at(*stack, t, ell0, kernel, 2);
    return weight_field(n, v.collapse(t), d1.collapse(t), d2.collapse(t), delta_next, direction);
  };
}

// ---- measurement ---------------------------------------------------------------

void Construction::measure_stage(const StagePerturbation& stage, int i, StageReport& rep) {
  const double tau = stage.geometry().tau;
  const double h = tau / settings_.stencil_div;
  const size_t pts = grid_points(3, settings_.n);

  double worst_h = 0.0, worst_h2 = 0.0, worst_h4 = 0.0, worst_acc = 0.0;
  for (size_t j = 0; j < master_nodes_.size(); ++j) {
    const double t = master_nodes_[j];
    const StageSlice center = stage.evaluate(t);
    const CarrierField dtt_exact = center.u_total(2);
    auto field_at = [&](double tt) { return stage.evaluate(tt, 0).u_total(0); };
    for (int lvl = 0; lvl < 3; ++lvl) {
      const double hh = h / std::exp2(static_cast<double>(lvl));
      const FieldChannels st = stencil_channels(field_at, t, hh);
      CarrierField defect = st.dtt;
      defect.add_scaled(dtt_exact, -1.0);
      defect.normalize();
      const auto grid = defect.collapse(t);
      const double mx = grid_max_abs(grid);
      if (lvl == 0) {
        worst_h = std::max(worst_h, mx);
        auto& acc = defect_acc_[j];
        for (int cmp = 0; cmp < 3; ++cmp)
          for (size_t p = 0; p < pts; ++p) acc[static_cast<size_t>(cmp)][p] += grid[static_cast<size_t>(cmp)][p];
        double am = 0.0;
        for (int cmp = 0; cmp < 3; ++cmp)
          for (size_t p = 0; p < pts; ++p) am = std::max(am, std::abs(acc[static_cast<size_t>(cmp)][p]));
        worst_acc = std::max(worst_acc, am);
      } else if (lvl == 1) {
        worst_h2 = std::max(worst_h2, mx);
      } else {
        worst_h4 = std::max(worst_h4, mx);
      }
    }
  }
  rep.stencil_defect = worst_h;
  rep.stencil_defect_h2 = worst_h2;
  rep.stencil_defect_h4 = worst_h4;
  rep.accumulated_residual = worst_acc;

  // ---- norm and ratio monitors at a few nodes ----
  const Schedule& sched = settings_.sched;
  const double delta_next = sched.delta_q(q_ + 1);
  const double sqd = std::sqrt(delta_next);
  const double lam_stage = static_cast<double>(stage.geometry().lambda);
  const int mn = std::max(1, settings_.monitor_nodes);
  double up_sup = 0.0, wp_sup = 0.0, wc_sup = 0.0, ut_sup = 0.0, udt_sup = 0.0;
  double rm_sup = 0.0, rl1_sup = 0.0, rl2_sup = 0.0, ro1_sup = 0.0, ro2_sup = 0.0, dr_sup = 0.0;
  double dr_dt_sup = 0.0, dr_c1_sup = 0.0;
  for (int jm = 0; jm < mn; ++jm) {
    const double t = master_nodes_[static_cast<size_t>((jm + 1) * static_cast<int>(master_nodes_.size()) / (mn + 1))];
    const StageSlice s = stage.evaluate(t);
    up_sup = std::max(up_sup, s.u_total(0).sup_norm(t));
    udt_sup = std::max(udt_sup, s.u_total(1).sup_norm(t));
    wp_sup = std::max(wp_sup, s.w_p(0).sup_norm(t));
    wc_sup = std::max(wc_sup, s.w_c(0).sup_norm(t));
    for (int cmp = 0; cmp < 3; ++cmp) ut_sup = std::max(ut_sup, std::abs(s.u_t[0][static_cast<size_t>(cmp)]));

    const double ell = sched.derived_scales(q_, i).ell;
    const FieldChannels ul = mollified_displacement(t, ell, settings_.n);
    const CarrierField Gl = gradient(ul.val);
    const CarrierField Gfull = gradient(displacement_channel(t, 0, settings_.n));
    CarrierField Gdiff = Gfull;
    Gdiff.add_scaled(Gl, -1.0);
    Gdiff.normalize();
    const CarrierField Gu = s.grad_u(0);
    const CarrierField RM = compute_RM(Gdiff, Gu);
    rm_sup = std::max(rm_sup, RM.sup_norm(t));
    const LinearError rl = compute_RL(stage, s, Gl, settings_.lame);
    rl1_sup = std::max(rl1_sup, rl.L1.sup_norm(t));
    rl2_sup = std::max(rl2_sup, rl.L2.sup_norm(t));
    const OscillationError ro = compute_RO(s);
    ro1_sup = std::max(ro1_sup, ro.O1.sup_norm(t));
    ro2_sup = std::max(ro2_sup, ro.O2.sup_norm(t));
    CarrierField dr = RM;
    dr.add_scaled(rl.L1, 1.0);
    dr.add_scaled(rl.L2, 1.0);
    dr.add_scaled(ro.O1, 1.0);
    dr.add_scaled(ro.O2, 1.0);
    dr.normalize();
    dr_sup = std::max(dr_sup, dr.sup_norm(t));
    for (int axis = 0; axis < 3; ++axis) {
      std::array<int, 3> alpha{0, 0, 0};
      alpha[static_cast<size_t>(axis)] = 1;
      dr_c1_sup = std::max(dr_c1_sup, spectral_derivative(dr, alpha).sup_norm(t));
    }
    if (jm == 0) {
      // numeric d_t of delta R via a short stencil over the stage-local pieces
      auto dr_at = [&](double tt) {
        const StageSlice s2 = stage.evaluate(tt);
        const FieldChannels ul2 = mollified_displacement(tt, ell, settings_.n);
        const CarrierField Gl2 = gradient(ul2.val);
        const CarrierField Gfull2 = gradient(displacement_channel(tt, 0, settings_.n));
        CarrierField Gdiff2 = Gfull2;
        Gdiff2.add_scaled(Gl2, -1.0);
        Gdiff2.normalize();
        CarrierField total = compute_RM(Gdiff2, s2.grad_u(0));
        const LinearError rl2 = compute_RL(stage, s2, Gl2, settings_.lame);
        const OscillationError ro2 = compute_RO(s2);
        total.add_scaled(rl2.L1, 1.0);
        total.add_scaled(rl2.L2, 1.0);
        total.add_scaled(ro2.O1, 1.0);
        total.add_scaled(ro2.O2, 1.0);
        total.normalize();
        return total;
      };
      const FieldChannels drch = stencil_channels(dr_at, t, h, 2);
      dr_dt_sup = drch.dt.sup_norm(t);
    }
  }
  rep.monitors["pert_u_sup"] = up_sup;
  rep.monitors["pert_u_dt_sup"] = udt_sup;
  rep.monitors["pert_wp_sup"] = wp_sup;
  rep.monitors["pert_wc_sup"] = wc_sup;
  rep.monitors["pert_ut_sup"] = ut_sup;
  rep.monitors["ratio_u_amp"] = up_sup * lam_stage / sqd;
  rep.monitors["ratio_wp_amp"] = wp_sup / sqd;
  rep.monitors["ratio_ut_amp"] = ut_sup * lam_stage * lam_stage / sqd;
  rep.monitors["RM_sup"] = rm_sup;
  rep.monitors["RL1_sup"] = rl1_sup;
  rep.monitors["RL2_sup"] = rl2_sup;
  rep.monitors["RO1_sup"] = ro1_sup;
  rep.monitors["RO2_sup"] = ro2_sup;
  rep.monitors["deltaR_sup"] = dr_sup;
  rep.monitors["deltaR_dt_sup"] = dr_dt_sup;
  rep.monitors["deltaR_C1_sup"] = dr_c1_sup;
  double delta_q2;
  try {
    delta_q2 = sched.delta_q(q_ + 2);
  } catch (const schedule_error&) {
    const double d1 = sched.delta_q(q_ + 1), d0 = sched.delta_q(q_);
    delta_q2 = d1 * d1 / d0;
    rep.monitors["delta_q2_extrapolated"] = 1.0;
  }
  const double gamma = (sched.mode == ScheduleMode::paper_formula) ? sched.gamma() : 0.0;
  const double lam_next = sched.lambda_qi(q_, i + 1);
  const double bound00 = std::pow(lam_next, -2.0 * gamma) * delta_q2 / 12.0;
  const double bound10 = std::pow(lam_next, 1.0 - 2.0 * gamma) * delta_q2 / 12.0;
  rep.monitors["prop51_ratio_N0_r0"] = dr_sup / bound00;
  rep.monitors["prop51_ratio_N1_r0"] = dr_c1_sup / bound10;
  rep.monitors["prop51_ratio_N0_r1"] = dr_dt_sup / bound10;
}

void Construction::audit_stage(const StagePerturbation& stage, int i, StageReport& rep) const {
  const int na = settings_.n_audit;
  const double t = master_nodes_[master_nodes_.size() / 2];
  StageGeometry g = stage.geometry();
  g.n = na;
  const StagePerturbation audit(g, std::vector<BlockCell>(stage.cells()),
                                make_weight_provider(g.direction, na));
  const StageSlice s = audit.evaluate(t);
  const double ell = settings_.sched.derived_scales(q_, i).ell;
  const FieldChannels ul = mollified_displacement(t, ell, na);
  const CarrierField Gl = gradient(ul.val);

  // linear bracket: Div(L1 + L2) vs the linear residual
  const LinearError rl = compute_RL(audit, s, Gl, settings_.lame);
  CarrierField linres = s.u_total(2);
  linres.add_scaled(laplacian(s.u_total(0)), -settings_.lame.mu);
  linres.add_scaled(grad_div(s.u_total(0)), -(settings_.lame.lambda + settings_.lame.mu));
  linres.add_scaled(matrix_divergence(bilinear_stress(Gl, s.grad_u(0))), 1.0);
  linres.normalize();
  CarrierField divL = matrix_divergence(rl.L1);
  divL.add_scaled(matrix_divergence(rl.L2), 1.0);
  divL.add_scaled(linres, -1.0);
  divL.normalize();
  rep.audit_linear = divL.sup_norm(t);

  // oscillation bracket: Div Q(grad u~) vs Div(d^2 proj) + Div(R_O)
  const OscillationError ro = compute_RO(s);
  const WeightField w = make_weight_provider(g.direction, na)(t);
  CarrierField lhsQ = matrix_divergence(quad_stress(s.grad_u(0)));
  CarrierField rhs = matrix_divergence(d_sq_proj(w, g.direction, na));
  rhs.add_scaled(matrix_divergence(ro.O1), 1.0);
  rhs.add_scaled(matrix_divergence(ro.O2), 1.0);
  rhs.normalize();
  lhsQ.add_scaled(rhs, -1.0);
  lhsQ.normalize();
  rep.audit_oscillation = lhsQ.sup_norm(t);

  // subtraction identity: S = d^2 proj pointwise
  CarrierField sub = oscillation_subtraction(s, 0);
  sub.add_scaled(d_sq_proj(w, g.direction, na), -1.0);
  sub.normalize();
  rep.audit_subtraction = sub.sup_norm(t);

  double mean_max = 0.0;
  for (int r = 0; r <= 2; ++r) {
    const auto mu = s.u_total(r).mean(t);
    for (const auto& v : mu) mean_max = std::max(mean_max, std::abs(v));
  }
  rep.audit_mean = mean_max;
}

// ---- stage and step drivers ------------------------------------------------------

StageReport Construction::run_stage(int i, std::optional<int64_t> flip_slab) {
  if (i != i_) throw error("run_stage: sub-stages must run in order");
  if (i < 0 || i > 5) throw schedule_error("run_stage: i must be in 0..5");
  StageReport rep;
  rep.q = q_;
  rep.i = i;
  const DerivedScales sc = settings_.sched.derived_scales(q_, i);
  rep.lambda_stage = settings_.sched.lambda_stage(q_, i + 1);
  rep.tau = sc.tau;
  rep.ell = sc.ell;
  rep.mu_inv = sc.mu_inv;

  const double tau_prev = (i == 0) ? settings_.sched.tau_qm1(q_) : settings_.sched.tau_qi(q_, i - 1);
  rep.monitors["interval_paper_ok"] =
      (sc.tau + 3.0 * sc.ell <= tau_prev + 1e-14) ? 1.0 : 0.0;

  StagePerturbation stage = build_stage(i, flip_slab);
  rep.cell_count = stage.cells().size();

  measure_stage(stage, i, rep);
  audit_stage(stage, i, rep);

  TimeInterval target{-sc.tau, settings_.sched.T + sc.tau};
  TimeInterval shrunk{interval_.t0 + 3.0 * sc.ell, interval_.t1 - 3.0 * sc.ell};
  interval_ = TimeInterval{std::max(target.t0, shrunk.t0), std::min(target.t1, shrunk.t1)};
  interval_.validate();
  rep.interval = interval_;

  stages_.push_back(std::move(stage));
  ++i_;
  history_.push_back(rep);
  return rep;
}

StepReport Construction::run_step() {
  StepReport step;
  step.q = q_;
  const size_t first_new = stages_.size();
  for (int i = 0; i < 6; ++i) step.stages.push_back(run_stage(i));

  const Schedule& sched = settings_.sched;
  step.c_q = cq_;
  step.delta_q1 = sched.delta_q(q_ + 1);
  cq_ = sched.c_q(q_ + 1);
  step.c_q1 = cq_;

  // Prop-2.2 style displacement monitor on the step increment
  const double t = master_nodes_[master_nodes_.size() / 2];
  CarrierField diff0(3, settings_.n, Rank::vector);
  CarrierField diff1 = diff0, diff2 = diff0;
  for (size_t w = first_new; w < stages_.size(); ++w) {
    const StageSlice s = stages_[w].evaluate(t);
    diff0.add_scaled(s.u_total(0), 1.0);
    diff1.add_scaled(s.u_total(1), 1.0);
    diff2.add_scaled(s.u_total(2), 1.0);
  }
  diff0.normalize();
  diff1.normalize();
  diff2.normalize();
  const double lam1 = static_cast<double>(sched.lambda_q(q_ + 1));
  double sum = 0.0;
  // N + r <= 3 with analytic channels r <= 2 (the r = 3 term is omitted)
  for (int r = 0; r <= 2; ++r) {
    const CarrierField& f = (r == 0) ? diff0 : (r == 1 ? diff1 : diff2);
    for (int N = 0; N + r <= 3 && N <= 2; ++N) {
      double nrm = f.sup_norm(t);
      if (N >= 1) {
        double semi = 0.0;
        for (const auto& alpha : multi_indices(3, N))
          semi = std::max(semi, spectral_derivative(f, alpha, 3).sup_norm(t));
        nrm += semi;
      }
      sum += std::pow(lam1, 1.0 - N - r) * nrm;
    }
  }
  step.displacement_sum = sum;
  step.displacement_bound = sched.M * std::sqrt(step.delta_q1);
  const double alpha = (sched.mode == ScheduleMode::paper_formula) ? sched.beta / 2.0 : 0.01;
  double n1 = diff0.sup_norm(t);
  for (const auto& a1 : multi_indices(3, 1))
    n1 = std::max(n1, spectral_derivative(diff0, a1).sup_norm(t));
  double n2 = n1;
  for (const auto& a2 : multi_indices(3, 2))
    n2 = std::max(n2, spectral_derivative(diff0, a2).sup_norm(t));
  step.cauchy_monitor = std::pow(n1, 1.0 - alpha) * std::pow(n2, alpha);

  ++q_;
  i_ = 0;
  if (q_ < settings_.steps)
    throw error("run_step: multi-step runs are out of range for this schedule "
                "(the banded Reynolds materialization needs a longer toy table)");
  return step;
}

// ---- bifurcation -----------------------------------------------------------------

BifurcationReport Construction::bifurcate(const TimeInterval& window) {
  BifurcationReport rep;
  rep.window = window;
  const double tau_m1 = settings_.sched.tau_qm1(q_);
  if (window.length() < 3.0 * tau_m1)
    throw error("bifurcate: interval precondition |I| >= 3 tau_{q,-1} violated");
  const double tau5 = settings_.sched.tau_qi(q_, 5);
  int64_t s0 = static_cast<int64_t>(std::floor(window.t0 / tau5));
  const CutoffSystem co5(tau5, settings_.sched.derived_scales(q_, 5).mu_inv);
  bool found = false;
  for (; static_cast<double>(s0) * tau5 < window.t1; ++s0) {
    const auto sup = co5.slab_support(s0);
    if (sup[0] > window.t0 && sup[1] < window.t1) {
      found = true;
      break;
    }
  }
  if (!found) throw error("bifurcate: no admissible slab inside the window");
  rep.slab = s0;

  for (int i = 0; i < 5; ++i) run_stage(i);
  Construction other = *this;

  run_stage(5);
  other.run_stage(5, s0);

  {
    const CarrierField ua = displacement_channel(0.0, 0, settings_.n);
    const CarrierField ub = other.displacement_channel(0.0, 0, settings_.n);
    CarrierField diff = ua;
    diff.add_scaled(ub, -1.0);
    diff.normalize();
    rep.initial_data_gap = diff.sup_norm(0.0);
  }

  const auto plateau = co5.slab_plateau(s0);
  const double t_pl = 0.5 * (plateau[0] + plateau[1]);
  const StagePerturbation& wave_a = stages_.back();
  const StagePerturbation& wave_b = other.stages_.back();
  auto diff_field = [&](double t) {
    CarrierField d = wave_a.evaluate(t).u_total(0);
    d.add_scaled(wave_b.evaluate(t).u_total(0), -1.0);
    d.normalize();
    return d;
  };
  const int curve_pts = 33;
  double max_outside = 0.0;
  for (int j = 0; j < curve_pts; ++j) {
    const double t = settings_.sched.T * j / (curve_pts - 1);
    const CarrierField d = diff_field(t);
    const double l2 = l2_norm(d, t);
    rep.separation_curve_t.push_back(t);
    rep.separation_curve.push_back(l2);
    if (!(t > window.t0 && t < window.t1)) max_outside = std::max(max_outside, d.sup_norm(t));
  }
  rep.support_check_max_outside = max_outside;
  rep.l2_separation = l2_norm(diff_field(t_pl), t_pl);

  const StagePerturbation restr = wave_a.restricted_to_slab(s0);
  const StageSlice rs = restr.evaluate(t_pl);
  const CarrierField up = rs.u_principal(0);
  const double l2_up = l2_norm(up, t_pl);
  const auto mean = up.mean(t_pl);
  double mean2 = 0.0;
  for (const auto& v : mean) mean2 += std::norm(v);
  const double vol = std::pow(2.0 * kPi, 3);
  rep.l2_predicted = 2.0 * std::sqrt(std::max(0.0, l2_up * l2_up - vol * mean2));

  const double lam1 = static_cast<double>(settings_.sched.lambda_q(q_ + 1));
  rep.l2_lower_bound = std::pow(kPi, 1.5) * std::sqrt(settings_.sched.delta_q(q_ + 1)) /
                       (16.0 * lam1);
  return rep;
}

bool Construction::support_propagation_check(const Construction& a, const Construction& b,
                                             const TimeInterval& J, int q,
                                             std::map<std::string, double>& report) {
  const Schedule& sched = a.settings_.sched;
  const double radius_paper =
      1.0 / (static_cast<double>(sched.lambda_q(q)) * std::pow(sched.delta_q(q), 0.25));
  const double radius_moll = sched.derived_scales(q, 0).ell;
  report["radius_paper"] = radius_paper;
  report["radius_mollifier"] = radius_moll;
  const double radius = std::max(radius_paper, radius_moll);
  const TimeInterval inflated{J.t0 - radius, J.t1 + radius};

  bool ok = true;
  double worst_outside = 0.0;
  const int pts = 41;
  for (int j = 0; j < pts; ++j) {
    const double t = sched.T * j / (pts - 1);
    const CarrierField ua = a.displacement_channel(t, 0, a.settings_.n);
    const CarrierField ub = b.displacement_channel(t, 0, b.settings_.n);
    CarrierField d = ua;
    d.add_scaled(ub, -1.0);
    d.normalize();
    const double mx = d.sup_norm(t);
    if (!inflated.contains(t)) {
      worst_outside = std::max(worst_outside, mx);
      const double scale = std::max(ua.sup_norm(t), 1e-30);
      if (mx > 1e-10 * scale) ok = false;
    }
  }
  report["max_outside_inflated"] = worst_outside;
  return ok;
}

double Construction::l2_norm(const CarrierField& f, double t) {
  const int n = f.n();
  const int nc = f.ncomp();
  const double vol = std::pow(2.0 * kPi, f.dim());
  double acc = 0.0;
  const auto& terms = f.terms();
  for (size_t a = 0; a < terms.size(); ++a) {
    for (size_t b = 0; b < terms.size(); ++b) {
      const std::array<int64_t, 3> dk{terms[b].k[0] - terms[a].k[0],
                                      terms[b].k[1] - terms[a].k[1],
                                      terms[b].k[2] - terms[a].k[2]};
      bool in_band = true;
      for (int ax = 0; ax < f.dim(); ++ax)
        if (!env_mode_in_band(dk[static_cast<size_t>(ax)], n)) in_band = false;
      if (!in_band) continue;
      const cplx phase = std::polar(1.0, (terms[b].omega - terms[a].omega) * t);
      for (int c = 0; c < nc; ++c) {
        CarrierTerm prod;
        prod.comp.assign(1, std::vector<cplx>(terms[a].comp[static_cast<size_t>(c)].size()));
        const auto& ea = terms[a].comp[static_cast<size_t>(c)];
        const auto& eb = terms[b].comp[static_cast<size_t>(c)];
        for (size_t p = 0; p < ea.size(); ++p) prod.comp[0][p] = ea[p] * std::conj(eb[p]);
        acc += (phase * CarrierField::env_mode(prod, f.dim(), n, dk, 0)).real();
      }
    }
  }
  return std::sqrt(std::max(0.0, acc * vol));
}

}  // namespace lamecvx
