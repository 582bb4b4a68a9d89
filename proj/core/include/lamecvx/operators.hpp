#pragma once

#include <string>
#include <vector>

#include "lamecvx/field.hpp"

namespace lamecvx {

/// Radial Littlewood-Paley profile: 1 on [0,1], 0 on [2,inf), smooth
/// monotone transition in between (integrated-bump smoothstep).
double lp_profile(double r);

/// P_{<= 1/ell}: Fourier multiplier lp_profile(|k| / 2^J) with
/// J = floor(log2(1/ell)).  ell = 0 means identity.  Modes with |k| <= 2^J
/// pass unchanged; modes with |k| > 2^{J+1} are removed.
CarrierField band_project(const CarrierField& f, double ell);
TorusField band_project(const TorusField& f, double ell);

/// Dyadic level used by band_project for a given ell (largest J with 2^J <= 1/ell).
int band_level(double ell);

/// Compactly supported even time-mollifier on (-1,1) with unit mass and
/// vanishing moments tau^n for n = 1..n0+3: bump(tau) times an even Legendre
/// polynomial whose coefficients solve the moment system in extended
/// precision.
class TimeKernel {
public:
  explicit TimeKernel(int n0);

  int n0() const { return n0_; }

  /// Kernel and its first two derivatives at tau in (-1,1).
  double value(double tau) const;
  double deriv(double tau, int order) const;

  /// Moment integral int phi(tau) tau^p dtau by high-order quadrature.
  double moment(int p) const;

  /// Suggested Gauss-Legendre point count for convolutions against this kernel.
  int base_quadrature_points() const;

  /// Audit dump: abscissae/weights of the internal quadrature and the
  /// polynomial coefficients.
  std::string dump() const;

  const std::vector<double>& legendre_coeffs() const { return coeffs_; }

private:
  int n0_;
  std::vector<double> coeffs_;  // even Legendre coefficients c_0, c_2, ...
};

TimeKernel build_time_kernel(int n0);

/// phi^t_ell * f per spatial mode: time convolution by the scaled kernel,
/// evaluated by Gauss-Legendre quadrature with Lagrange interpolation of the
/// envelopes between stored nodes and exact treatment of carrier phases.
/// The output interval is the input shrunk by ell at each end; insufficient
/// margin raises field_error.  deriv_order r returns d_t^r of the mollified
/// field via the kernel derivative (r <= 2).
TorusField time_mollify(const TorusField& f, double ell, const TimeKernel& kernel,
                        int deriv_order = 0);

/// Single-time mollification of a node stack (used by the lazy driver):
/// env interpolation order and quadrature boost are chosen internally.
CarrierField time_mollify_at(const TorusField& f, double t, double ell,
                             const TimeKernel& kernel, int deriv_order = 0);

/// Gauss-Legendre rule on [-1,1] (cached).
struct QuadRule {
  std::vector<double> x, w;
};
const QuadRule& gauss_rule(int K);

/// Leray projection onto divergence-free, mean-free fields.
CarrierField leray_project(const CarrierField& v);
TorusField leray_project(const TorusField& v);

/// Inverse divergence R: symmetric matrix field with Div(R v) = v - mean(v).
CarrierField inverse_divergence(const CarrierField& v);
TorusField inverse_divergence(const TorusField& v);

}  // namespace lamecvx
