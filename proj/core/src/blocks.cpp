#include "lamecvx/blocks.hpp"

#include <cmath>
#include <sstream>

#include "lamecvx/geometry.hpp"

namespace lamecvx {

double FrozenTensor::max_abs() const {
  double m = 0.0;
  for (const auto& ap : a)
    for (const auto& am : ap)
      for (const auto& an : am)
        for (double v : an) m = std::max(m, std::abs(v));
  return m;
}

Vec3 FrozenTensor::contract(const Vec3& f, const Vec3& g) const {
  Vec3 out;
  for (int p = 0; p < 3; ++p) {
    double acc = 0.0;
    for (int m = 0; m < 3; ++m)
      for (int n = 0; n < 3; ++n)
        for (int r = 0; r < 3; ++r)
          acc += a[static_cast<size_t>(p)][static_cast<size_t>(m)][static_cast<size_t>(n)]
                  [static_cast<size_t>(r)] *
                 f[n] * f[r] * g[m];
    out[p] = acc;
  }
  return out;
}

FrozenTensor freeze(const Mat3& grad_u) {
  FrozenTensor t;
  for (int p = 0; p < 3; ++p)
    for (int m = 0; m < 3; ++m)
      for (int n = 0; n < 3; ++n)
        for (int r = 0; r < 3; ++r)
          t.a[static_cast<size_t>(p)][static_cast<size_t>(m)][static_cast<size_t>(n)]
             [static_cast<size_t>(r)] =
              (r == p ? grad_u(m, n) : 0.0) - (n == r ? grad_u(m, p) : 0.0);
  return t;
}

Frame frame_of(const std::array<int, 3>& f) {
  int index = 0;
  for (int i = 1; i <= 6; ++i)
    if (DirectionTable::f(i) == f) index = i;
  if (index == 0) throw error("frame_of: direction not in the six-direction set");
  const int partner = (index % 2 == 1) ? index + 1 : index - 1;
  Frame fr;
  fr.f = DirectionTable::f_vec(index);
  fr.f_perp = DirectionTable::f_vec(partner);
  fr.f3 = cross((1.0 / norm(fr.f)) * fr.f, fr.f_perp);
  return fr;
}

double tilde_entry(const FrozenTensor& a, const Frame& frame, int c, int s, int i, int j) {
  const Vec3 fi = frame.axis(i);
  const Vec3 fj = frame.axis(j);
  const Vec3 fs = frame.axis(s);
  const Vec3 fc = frame.axis(c);
  const double f2 = dot(frame.f, frame.f);
  double acc = 0.0;
  for (int p = 0; p < 3; ++p)
    for (int m = 0; m < 3; ++m)
      for (int n = 0; n < 3; ++n)
        for (int r = 0; r < 3; ++r)
          acc += a.a[static_cast<size_t>(p)][static_cast<size_t>(m)][static_cast<size_t>(n)]
                    [static_cast<size_t>(r)] *
                 fi[n] * fj[r] * fs[m] * fc[p];
  return acc / f2;
}

TildeTable tilde_coeffs(const FrozenTensor& a, const Frame& frame) {
  TildeTable t;
  for (int c = 1; c <= 3; ++c)
    for (int r = 1; r <= 3; ++r)
      t.at[static_cast<size_t>(c - 1)][static_cast<size_t>(r - 1)] =
          tilde_entry(a, frame, c, r, 1, 1);
  return t;
}

namespace {

void residuals(const PolyCoeffs& c, double a1, double a2, double& e1, double& e2) {
  e1 = c.A1 * a1 * a1 + c.E1 * a1 * a2 + c.C1 * a1 + c.B2 * a2 - c.D1;
  e2 = c.A2 * a2 * a2 + c.E2 * a1 * a2 + c.C2 * a2 + c.B1 * a1 - c.D2;
}

}  // namespace

PolySolution solve_polynomial_system(const PolyCoeffs& c, double tol, int max_iter) {
  if (c.C1 == 0.0 || c.C2 == 0.0)
    throw convergence_error("solve_polynomial_system: C coefficients vanish");
  PolySolution s;
  s.a1 = c.D1 / c.C1;
  s.a2 = c.D2 / c.C2;
  double e1, e2;
  residuals(c, s.a1, s.a2, e1, e2);
  s.residual = std::abs(e1) + std::abs(e2);
  s.residual_trace.push_back(s.residual);

  while (s.residual >= tol) {
    if (s.iterations >= max_iter) {
      std::ostringstream os;
      os << "solve_polynomial_system: no convergence after " << max_iter
         << " iterations; residual trace:";
      for (double r : s.residual_trace) os << " " << r;
      throw convergence_error(os.str());
    }
    const double j11 = c.C1 + 2.0 * c.A1 * s.a1 + c.E1 * s.a2;
    const double j12 = c.B2 + c.E1 * s.a1;
    const double j21 = c.B1 + c.E2 * s.a2;
    const double j22 = c.C2 + 2.0 * c.A2 * s.a2 + c.E2 * s.a1;
    const double det = j11 * j22 - j12 * j21;
    if (std::abs(det) < 1e-14 * (std::abs(j11 * j22) + std::abs(j12 * j21) + 1e-300)) {
      std::ostringstream os;
      os << "solve_polynomial_system: singular 2x2 linearization (det = " << det
         << "); residual trace:";
      for (double r : s.residual_trace) os << " " << r;
      throw convergence_error(os.str());
    }
    const double d1 = (-e1 * j22 + e2 * j12) / det;
    const double d2 = (-e2 * j11 + e1 * j21) / det;
    s.a1 += d1;
    s.a2 += d2;
    ++s.iterations;
    residuals(c, s.a1, s.a2, e1, e2);
    const double res = std::abs(e1) + std::abs(e2);
    if (res >= s.residual && res >= tol) {
      std::ostringstream os;
      os << "solve_polynomial_system: residual failed to decrease (" << s.residual
         << " -> " << res << "); trace:";
      for (double r : s.residual_trace) os << " " << r;
      throw convergence_error(os.str());
    }
    s.residual = res;
    s.residual_trace.push_back(res);
  }
  return s;
}

BuildingBlock build_block(const FrozenTensor& a, const std::array<int, 3>& f,
                          const LameParams& lame, double tol) {
  BuildingBlock blk;
  blk.frame = frame_of(f);
  const double f2 = dot(blk.frame.f, blk.frame.f);
  const TildeTable at = tilde_coeffs(a, blk.frame);

  PolyCoeffs c{};
  c.A1 = -at(1, 2) / f2;
  c.E2 = c.A1;
  c.A2 = -at(1, 3) / f2;
  c.E1 = c.A2;
  c.B1 = at(3, 2) / f2;
  c.B2 = at(2, 3) / f2;
  c.C1 = -at(1, 1) / f2 + at(2, 2) / f2 + (lame.lambda + lame.mu);
  c.C2 = -at(1, 1) / f2 + at(3, 3) / f2 + (lame.lambda + lame.mu);
  c.D1 = -at(2, 1) / f2;
  c.D2 = -at(3, 1) / f2;

  const PolySolution sol = solve_polynomial_system(c, tol);
  blk.a2 = sol.a1;
  blk.a3 = sol.a2;
  blk.cA = at(1, 1) + blk.a2 * at(1, 2) + blk.a3 * at(1, 3);

  const double disp = lame.p_speed2() * f2 - blk.cA;
  if (!(disp > 0.0)) {
    std::ostringstream os;
    os << "build_block: dispersion (lambda+2mu)|f|^2 - cA = " << disp << " <= 0";
    throw error(os.str());
  }
  blk.omega = std::sqrt(disp);
  return blk;
}

double block_pde_residual(const BuildingBlock& blk, const FrozenTensor& a,
                          const LameParams& lame) {
  const Vec3 g = blk.tilde_f();
  const Vec3 f = blk.frame.f;
  const double f2 = dot(f, f);
  // cA g - (lambda+mu)|f|^2 g + (lambda+mu)(f.g) f - A(f,f) g, in the frame basis
  const Vec3 af = a.contract(f, g);
  Vec3 resid = blk.cA * g - ((lame.lambda + lame.mu) * f2) * g +
               ((lame.lambda + lame.mu) * dot(f, g)) * f - af;
  double m = 0.0;
  for (int i = 1; i <= 3; ++i)
    m = std::max(m, std::abs(dot(resid, blk.frame.axis(i)) / f2));
  return m;
}

}  // namespace lamecvx
