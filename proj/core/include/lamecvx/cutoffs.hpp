#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lamecvx/errors.hpp"
#include "lamecvx/schedule.hpp"

namespace lamecvx {

/// Time slab / space cell address.
struct WaveIndex {
  int64_t s = 0;
  std::array<int64_t, 3> v{0, 0, 0};

  bool operator<(const WaveIndex& o) const {
    if (s != o.s) return s < o.s;
    return v < o.v;
  }
  bool operator==(const WaveIndex& o) const { return s == o.s && v == o.v; }
};

/// Distance max(|s - s'|, max_i |v_i - v_i'|); coefficients of indices at
/// distance > 1 have disjoint supports.
int64_t wave_index_distance(const WaveIndex& a, const WaveIndex& b);

/// Parity code [I] = [s] + sum_i 2^i [v_i] + 1 in 1..16 ([j] = 0 for odd j).
int parity(int64_t s, const std::array<int64_t, 3>& v);
inline int parity(const WaveIndex& i) { return parity(i.s, i.v); }

/// Normalized unit-scale profiles.  theta0 = 1 on [1/4,3/4], supported in
/// (-1/4,5/4); the integer-shift family is normalized so sum_s theta_s^2 = 1
/// identically.  Derivatives are analytic.
double theta_profile(double u, int deriv = 0);

/// One-axis spatial profile at unit cell scale 2*pi: 1 on [-3pi/4, 3pi/4],
/// supported in (-5pi/4, 5pi/4); 2*pi-shift family normalized so the squared
/// sum is 1.
double chi_axis_profile(double x, int deriv = 0);

/// Partition-of-unity system at the (q,i) cutoff scales: slabs of width
/// tau_{q,i} in time, mu_{q,i} cells per 2*pi/mu_inv in space.
class CutoffSystem {
public:
  CutoffSystem(double tau, int64_t mu_inv);

  double tau() const { return tau_; }
  int64_t mu_inv() const { return mu_inv_; }
  double mu() const { return 1.0 / static_cast<double>(mu_inv_); }

  /// theta_I(t) = theta_s(t / tau) and time derivatives (chain rule).
  double theta(int64_t s, double t, int deriv = 0) const;

  /// chi factor along one axis for cell index va: chi(mu^{-1} x - 2 pi va).
  double chi_axis(int64_t va, double x, int deriv = 0) const;

  /// full 3-D cell profile
  double chi(const std::array<int64_t, 3>& v, const double x[3]) const;

  /// slabs whose support intersects [t0, t1]
  std::vector<int64_t> active_slabs(double t0, double t1) const;

  /// slabs active at one time (at most two)
  std::vector<int64_t> slabs_at(double t) const;

  /// cell indices along one axis: 0 .. mu_inv-1 (torus-periodic lattice)
  int64_t cells_per_axis() const { return mu_inv_; }

  /// partition checks at a point
  double sum_theta_sq(double t) const;
  double sum_chi_sq(const double x[3]) const;

  /// anchor of cell v: 2 pi v mu (reduced to [-pi, pi))
  std::array<double, 3> cell_anchor(const std::array<int64_t, 3>& v) const;
  double slab_anchor(int64_t s) const { return static_cast<double>(s) * tau_; }

  /// support radius of a cell in x (half-width per axis) and of a slab in t
  double cell_half_width() const { return 1.25 * 3.14159265358979323846 * mu(); }
  std::array<double, 2> slab_support(int64_t s) const {
    return {(static_cast<double>(s) - 0.25) * tau_, (static_cast<double>(s) + 1.25) * tau_};
  }
  /// plateau of a slab: theta = 1 there
  std::array<double, 2> slab_plateau(int64_t s) const {
    return {(static_cast<double>(s) + 0.25) * tau_, (static_cast<double>(s) + 0.75) * tau_};
  }

private:
  double tau_;
  int64_t mu_inv_;
};

/// Build the (q,i) cutoff system from the schedule; mu_inv odd would break
/// torus periodicity of the parity lattice and is rejected.
CutoffSystem build_cutoffs(const Schedule& sched, int q, int i);

}  // namespace lamecvx
