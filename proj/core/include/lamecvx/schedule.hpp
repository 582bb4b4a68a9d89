#pragma once

#include <cstdint>
#include <vector>

#include "lamecvx/errors.hpp"

namespace lamecvx {

/// Lame material constants. The construction needs the two wave speeds
/// sqrt(lambda+2mu) (longitudinal) and sqrt(mu) (transverse) to differ,
/// which is what mu>0, lambda+mu>0 guarantees.
struct LameParams {
  double lambda = 2.0;
  double mu = 1.0;

  void validate() const;
  double p_speed2() const { return lambda + 2.0 * mu; }  // squared longitudinal speed
  double s_speed2() const { return mu; }                 // squared transverse speed
};

enum class ScheduleMode { paper_formula, toy_override };

/// Sub-stage address: step q >= 0, sub-stage i in 0..6 (0..5 are the six
/// perturbation directions, 6 marks step completion).
struct StageId {
  int q = 0;
  int i = 0;

  void validate() const {
    if (q < 0 || i < 0 || i > 6) throw schedule_error("StageId out of range");
  }
};

struct DerivedScales {
  double ell;        // mollification length l_{q,i}
  double tau;        // time-slab scale tau_{q,i}
  int64_t mu_inv;    // inverse space-cell scale, positive even integer
};

/// All scalar parameters of the construction plus the per-stage formulas.
///
/// paper-formula mode follows the published parameter schedule
/// (lambda_q = 2^{6 ceil(b^q log2 a)}, delta_q = lambda_q^{-2 beta});
/// toy-override mode runs the same construction with user-supplied small
/// frequency/amplitude tables so that grids stay at desk scale.  Identities
/// survive the override; only asymptotic inequalities lose force, and those
/// are monitored, never asserted.
struct Schedule {
  ScheduleMode mode = ScheduleMode::toy_override;

  // paper-formula parameters
  double a = 2.0;      // base frequency parameter, > 1
  double b = 2.0;      // super-exponential rate, > 1 (derived from beta when requested)
  double beta = 0.01;  // Holder budget exponent, in (0, 1/60)

  // shared parameters
  double epsilon = 0.05;  // initial-data smallness
  double M = 10.0;        // inductive constant, > 1
  double T = 2.0;         // time horizon
  double r0 = 1.0 / 18.0; // geometric-lemma ball radius
  int n0 = 3;             // mollifier moment order (derived in paper mode)
  double tau_init = -1.0; // tau_{q=0,-1} convention; <0 means "use tau_{0,0}"
  double ctail_tol = 1e-15;

  // toy-override tables
  std::vector<int64_t> toy_lambda;
  std::vector<double> toy_delta;

  static double gamma_of_beta(double beta);
  static double b_bar(double beta);
  static int n0_of(double b, double beta);

  double gamma() const { return gamma_of_beta(beta); }

  /// Full invariant check; throws schedule_error with details.
  void validate() const;

  /// lambda_q = 2^{6 ceil(b^q log2 a)} as an exact integer (paper mode) or the
  /// toy table entry.  Exponent overflow reports a schedule-range error.
  int64_t lambda_q(int q) const;

  /// log2(lambda_q), computed in log space so that huge steps never overflow.
  double log2_lambda_q(int q) const;

  double delta_q(int q) const;

  /// Geometric interpolation lambda_{q,i} = lambda_q^{1-i/6} lambda_{q+1}^{i/6}.
  double lambda_qi(int q, int i) const;

  /// The integer per-stage frequency actually used for wave carriers.
  /// Exact in paper mode (the interpolant is a power of two); rounded to the
  /// nearest integer in toy mode so that lattice phases stay torus-periodic.
  int64_t lambda_stage(int q, int i) const;

  /// c_q = sum_{j>=q+1} delta_j, truncated when the geometric tail drops
  /// below ctail_tol.  Computed by backward recursion so that
  /// c_q - c_{q+1} == delta_{q+1} holds exactly.
  double c_q(int q) const;

  /// (ell, tau, mu_inv) for 0 <= i <= 5.
  DerivedScales derived_scales(int q, int i) const;

  double tau_qi(int q, int i) const;

  /// tau_{q,-1} = tau_{q-1,5}; at q=0 this is a convention (tau_init or tau_{0,0}).
  double tau_qm1(int q) const;

private:
  int paper_exponent(int q) const;  // ceil(b^q log2 a), range-checked
};

}  // namespace lamecvx
