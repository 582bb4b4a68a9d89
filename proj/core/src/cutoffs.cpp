#include "lamecvx/cutoffs.hpp"

#include <cmath>

namespace lamecvx {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct SmoothVal {
  double v = 0.0, d1 = 0.0, d2 = 0.0;
};

double f1v(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }
double f1d(double x) { return x > 0.0 ? f1v(x) / (x * x) : 0.0; }
double f1dd(double x) { return x > 0.0 ? f1v(x) * (1.0 - 2.0 * x) / (x * x * x * x) : 0.0; }

/// smoothstep S with S(x<=0)=0, S(x>=1)=1, plus two derivatives
SmoothVal smoothstep2(double x) {
  SmoothVal s;
  if (x <= 0.0) return s;
  if (x >= 1.0) {
    s.v = 1.0;
    return s;
  }
  const double a = f1v(x), b = f1v(1.0 - x);
  const double ap = f1d(x), bp = -f1d(1.0 - x);
  const double app = f1dd(x), bpp = f1dd(1.0 - x);
  const double den = a + b;
  s.v = a / den;
  s.d1 = (ap * b - a * bp) / (den * den);
  s.d2 = (app * b - a * bpp) / (den * den) -
         2.0 * (ap * b - a * bp) * (ap + bp) / (den * den * den);
  return s;
}

/// raw theta0: 1 on [1/4,3/4], 0 outside (-1/4,5/4), smooth transitions
SmoothVal theta0_raw(double u) {
  SmoothVal s;
  if (u <= -0.25 || u >= 1.25) return s;
  if (u < 0.25) {
    SmoothVal t = smoothstep2((u + 0.25) * 2.0);
    s.v = t.v;
    s.d1 = 2.0 * t.d1;
    s.d2 = 4.0 * t.d2;
    return s;
  }
  if (u <= 0.75) {
    s.v = 1.0;
    return s;
  }
  SmoothVal t = smoothstep2((1.25 - u) * 2.0);
  s.v = t.v;
  s.d1 = -2.0 * t.d1;
  s.d2 = 4.0 * t.d2;
  return s;
}

/// raw one-axis chi at unit 2*pi scale: 1 on [-3pi/4,3pi/4], 0 outside (-5pi/4,5pi/4)
SmoothVal chi0_raw(double x) {
  SmoothVal s;
  const double ax = std::abs(x);
  if (ax >= 1.25 * kPi) return s;
  if (ax <= 0.75 * kPi) {
    s.v = 1.0;
    return s;
  }
  const double w = 0.5 * kPi;  // transition width
  SmoothVal t = smoothstep2((1.25 * kPi - ax) / w);
  const double sign = x >= 0.0 ? 1.0 : -1.0;
  s.v = t.v;
  s.d1 = -sign * t.d1 / w;
  s.d2 = t.d2 / (w * w);
  return s;
}

/// normalized profile N = raw / sqrt(D), D = sum of squared shifts
SmoothVal normalized(const SmoothVal& raw, const SmoothVal shifts[5]) {
  // D and derivatives from all overlapping shifted copies (raw included)
  double D = 0.0, D1 = 0.0, D2 = 0.0;
  for (int j = 0; j < 5; ++j) {
    D += shifts[j].v * shifts[j].v;
    D1 += 2.0 * shifts[j].v * shifts[j].d1;
    D2 += 2.0 * (shifts[j].d1 * shifts[j].d1 + shifts[j].v * shifts[j].d2);
  }
  SmoothVal out;
  const double si = 1.0 / std::sqrt(D);
  out.v = raw.v * si;
  out.d1 = raw.d1 * si - 0.5 * raw.v * D1 * si * si * si;
  out.d2 = raw.d2 * si - raw.d1 * D1 * si * si * si +
           0.75 * raw.v * D1 * D1 * si * si * si * si * si -
           0.5 * raw.v * D2 * si * si * si;
  return out;
}

SmoothVal theta_norm(double u) {
  const SmoothVal raw = theta0_raw(u);
  if (raw.v == 0.0 && raw.d1 == 0.0 && raw.d2 == 0.0) return raw;
  // neighbors centered on u always cover every overlapping shift
  const int c = static_cast<int>(std::lround(u));
  SmoothVal shifts[5];
  for (int j = -2; j <= 2; ++j) shifts[j + 2] = theta0_raw(u - static_cast<double>(c + j));
  return normalized(raw, shifts);
}

SmoothVal chi_norm(double x) {
  const SmoothVal raw = chi0_raw(x);
  if (raw.v == 0.0 && raw.d1 == 0.0 && raw.d2 == 0.0) return raw;
  const int c = static_cast<int>(std::lround(x / (2.0 * kPi)));
  SmoothVal shifts[5];
  for (int j = -2; j <= 2; ++j) shifts[j + 2] = chi0_raw(x - 2.0 * kPi * (c + j));
  return normalized(raw, shifts);
}

double pick(const SmoothVal& s, int deriv) {
  switch (deriv) {
    case 0: return s.v;
    case 1: return s.d1;
    case 2: return s.d2;
    default: throw error("cutoff profile: derivative order must be 0..2");
  }
}

}  // namespace

int64_t wave_index_distance(const WaveIndex& a, const WaveIndex& b) {
  int64_t d = static_cast<int64_t>(std::llabs(a.s - b.s));
  for (int i = 0; i < 3; ++i)
    d = std::max(d, static_cast<int64_t>(std::llabs(a.v[static_cast<size_t>(i)] -
                                                    b.v[static_cast<size_t>(i)])));
  return d;
}

int parity(int64_t s, const std::array<int64_t, 3>& v) {
  auto bit = [](int64_t j) { return ((j % 2) + 2) % 2 == 0 ? 1 : 0; };
  int code = bit(s) + 1;
  for (int i = 1; i <= 3; ++i) code += (1 << i) * bit(v[static_cast<size_t>(i - 1)]);
  return code;
}

double theta_profile(double u, int deriv) { return pick(theta_norm(u), deriv); }

double chi_axis_profile(double x, int deriv) { return pick(chi_norm(x), deriv); }

CutoffSystem::CutoffSystem(double tau, int64_t mu_inv) : tau_(tau), mu_inv_(mu_inv) {
  if (!(tau > 0.0)) throw schedule_error("CutoffSystem: tau must be > 0");
  if (mu_inv < 2 || mu_inv % 2 != 0)
    throw schedule_error("CutoffSystem: mu^{-1} must be a positive even integer "
                         "(odd values break torus periodicity of the parity lattice)");
}

double CutoffSystem::theta(int64_t s, double t, int deriv) const {
  const double u = t / tau_ - static_cast<double>(s);
  const double scale = std::pow(1.0 / tau_, static_cast<double>(deriv));
  return theta_profile(u, deriv) * scale;
}

double CutoffSystem::chi_axis(int64_t va, double x, int deriv) const {
  const double minv = static_cast<double>(mu_inv_);
  // chi(mu^{-1} x - 2 pi v): reduce the argument into the profile's period
  double u = minv * x - 2.0 * kPi * static_cast<double>(va);
  const double period = 2.0 * kPi * minv;  // in profile coordinates, per torus period
  u = std::remainder(u, period);
  const double scale = std::pow(minv, static_cast<double>(deriv));
  return chi_axis_profile(u, deriv) * scale;
}

double CutoffSystem::chi(const std::array<int64_t, 3>& v, const double x[3]) const {
  double p = 1.0;
  for (int a = 0; a < 3; ++a) p *= chi_axis(v[static_cast<size_t>(a)], x[a], 0);
  return p;
}

std::vector<int64_t> CutoffSystem::active_slabs(double t0, double t1) const {
  std::vector<int64_t> out;
  const int64_t lo = static_cast<int64_t>(std::floor(t0 / tau_ - 1.25));
  const int64_t hi = static_cast<int64_t>(std::ceil(t1 / tau_ + 0.25));
  for (int64_t s = lo; s <= hi; ++s) {
    const auto sup = slab_support(s);
    if (sup[1] > t0 && sup[0] < t1) out.push_back(s);
  }
  return out;
}

std::vector<int64_t> CutoffSystem::slabs_at(double t) const {
  std::vector<int64_t> out;
  const int64_t near = static_cast<int64_t>(std::floor(t / tau_));
  for (int64_t s = near - 2; s <= near + 2; ++s) {
    const auto sup = slab_support(s);
    if (t > sup[0] && t < sup[1]) out.push_back(s);
  }
  return out;
}

double CutoffSystem::sum_theta_sq(double t) const {
  double acc = 0.0;
  for (int64_t s : slabs_at(t)) {
    const double v = theta(s, t, 0);
    acc += v * v;
  }
  return acc;
}

double CutoffSystem::sum_chi_sq(const double x[3]) const {
  // sum over the distinct torus cells only; chi_axis periodizes internally
  double acc = 1.0;
  for (int a = 0; a < 3; ++a) {
    double axis = 0.0;
    for (int64_t va = 0; va < mu_inv_; ++va) {
      const double c = chi_axis(va, x[a], 0);
      axis += c * c;
    }
    acc *= axis;
  }
  return acc;
}

std::array<double, 3> CutoffSystem::cell_anchor(const std::array<int64_t, 3>& v) const {
  std::array<double, 3> x;
  for (int a = 0; a < 3; ++a) {
    double xa = 2.0 * kPi * static_cast<double>(v[static_cast<size_t>(a)]) * mu();
    x[static_cast<size_t>(a)] = std::remainder(xa, 2.0 * kPi);
  }
  return x;
}

CutoffSystem build_cutoffs(const Schedule& sched, int q, int i) {
  const DerivedScales d = sched.derived_scales(q, i);
  return CutoffSystem(d.tau, d.mu_inv);
}

}  // namespace lamecvx
