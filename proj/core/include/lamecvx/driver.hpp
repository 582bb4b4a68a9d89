#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lamecvx/assembly.hpp"
#include "lamecvx/reynolds.hpp"

namespace lamecvx {

/// Engine settings beyond the schedule itself.
struct RunSettings {
  Schedule sched;
  LameParams lame;
  int n = 64;                 // production collocation grid per axis
  int n_audit = 40;           // grid for the exact-algebra audit
  int check_nodes = 10;       // master nodes for the residual ledger
  int monitor_nodes = 2;      // nodes for piece-norm monitors
  double stencil_div = 64.0;  // stencil spacing: tau_{q,i} / stencil_div
  double tol_stage = 1e-7;
  double strict_tol = 1e-9;
  bool strict = false;
  uint64_t seed = 1;
  int steps = 1;
};

/// Closed-form starting displacement: a longitudinal plane wave whose null
/// structure kills the quadratic stress, so R_0 = 0.
struct StartingTuple {
  double amplitude = 0.0;   // eps delta_1^{1/2} / (2 lambda_0^2 |f1|^2)
  int64_t lambda0 = 4;
  std::array<int, 3> f1{0, 1, 1};
  double omega = 0.0;       // lambda_0 sqrt(lambda+2mu) |f1|
  double c0 = 0.0;          // sum_{j>=1} delta_j

  FieldChannels channels(int n, double t) const;
  CarrierField channel(int n, double t, int r) const;
  Mat3 grad_at(double t, const double x[3]) const;
  double sup_amplitude() const;  // max |u0|
};

StartingTuple starting_tuple(const Schedule& sched, const LameParams& lame);

/// One completed sub-stage's bookkeeping record.
struct StageReport {
  int q = 0;
  int i = 0;                        // sub-stage 0..5 (direction i+1)
  int64_t lambda_stage = 0;
  double tau = 0.0, ell = 0.0;
  int64_t mu_inv = 0;
  TimeInterval interval{0.0, 1.0};  // interval the composed tuple lives on
  size_t cell_count = 0;

  // residual ledger
  double stencil_defect = 0.0;        // this stage's addition, primary spacing
  double stencil_defect_h2 = 0.0;     // spacing/2
  double stencil_defect_h4 = 0.0;     // spacing/4
  double accumulated_residual = 0.0;  // field-accumulated |lhs - Div(R - c Id)|
  double audit_linear = 0.0;          // Div(L1+L2) vs linear residual (audit grid)
  double audit_oscillation = 0.0;     // Div Q(grad u~) vs Div(d^2 proj)+Div R_O
  double audit_subtraction = 0.0;     // S vs d^2 proj pointwise
  double audit_mean = 0.0;            // mean of the corrected perturbation

  // named monitor values (measured norms and measured/bound ratios)
  std::map<std::string, double> monitors;
};

struct StepReport {
  int q = 0;
  double c_q = 0.0, c_q1 = 0.0, delta_q1 = 0.0;
  double displacement_sum = 0.0;      // Prop-2.2 style weighted sum
  double displacement_bound = 0.0;    // M delta_{q+1}^{1/2}
  double cauchy_monitor = 0.0;        // interpolation-norm record
  std::vector<StageReport> stages;
};

struct BifurcationReport {
  int64_t slab = 0;
  TimeInterval window{0.0, 1.0};
  double initial_data_gap = 0.0;      // sup |u_a - u_b| at t = 0
  double l2_separation = 0.0;         // plateau separation
  double l2_predicted = 0.0;          // 2 ||u~_{q,6}||_{L2} with mean correction
  double l2_lower_bound = 0.0;        // pi^{3/2} delta^{1/2} / (16 lambda_{q+1})
  std::vector<double> separation_curve_t;
  std::vector<double> separation_curve;
  double support_check_max_outside = 0.0;
  StepReport step_a, step_b;
};

/// The construction driver: owns the lazy displacement (starting tuple plus
/// completed stage waves), the Reynolds ledger, and the mollification caches.
class Construction {
public:
  explicit Construction(RunSettings settings);

  const RunSettings& settings() const { return settings_; }
  const StartingTuple& u0() const { return u0_; }
  int current_q() const { return q_; }
  const TimeInterval& interval() const { return interval_; }
  double c_q() const { return cq_; }

  /// Displacement channels at time t on an arbitrary grid.
  FieldChannels displacement(double t, int n) const;
  CarrierField displacement_channel(double t, int r, int n) const;

  /// Mollified low-band displacement at scale ell (value + kernel-derivative
  /// channels), the regularized term of the construction.
  FieldChannels mollified_displacement(double t, double ell, int n) const;

  /// Run sub-stage i of the current step; optional slab flip for the
  /// bifurcation.  Appends the stage wave to the displacement.
  StageReport run_stage(int i, std::optional<int64_t> flip_slab = std::nullopt);

  /// Run all six sub-stages and complete the step (R_{q+1} = R_{q,6} - delta Id).
  StepReport run_step();

  /// Bifurcation: runs the current step twice from the shared state (stages
  /// 0..4 shared, stage 5 flipped on the chosen slab inside the window).
  BifurcationReport bifurcate(const TimeInterval& window);

  /// Support-propagation check between two constructions whose inputs differ
  /// only inside J: returns true when the difference stays inside J inflated
  /// by max((lambda_q delta_q^{1/4})^{-1}, ell_{q,0}); fills the report.
  static bool support_propagation_check(const Construction& a, const Construction& b,
                                        const TimeInterval& J, int q,
                                        std::map<std::string, double>& report);

  /// Access to completed stage waves (for tests and the CLI).
  const std::vector<StagePerturbation>& stage_waves() const { return stages_; }
  const std::vector<StageReport>& history() const { return history_; }

  /// L2 norm over the torus of a carrier field (two-scale quadrature).
  static double l2_norm(const CarrierField& f, double t);

private:
  RunSettings settings_;
  TimeKernel kernel_;
  StartingTuple u0_;

  int q_ = 0;
  int i_ = 0;
  double cq_ = 0.0;
  TimeInterval interval_{0.0, 1.0};
  std::vector<StagePerturbation> stages_;
  std::vector<StageReport> history_;

  // defect-field accumulators at the master nodes (primary spacing)
  std::vector<double> master_nodes_;
  std::vector<std::vector<std::vector<cplx>>> defect_acc_;  // [node][comp][pts]

  // R_q enters the step only through its band-limited projection; zero at q=0.
  bool rq_zero_ = true;
  std::shared_ptr<TorusField> rq_lowband_;

  // caches
  mutable std::map<int64_t, WeightField> weight_cache_;   // keyed by time quantum
  mutable std::map<int64_t, FieldChannels> rell_cache_;
  int weight_direction_ = 0;

  WeightField weight_at(double t, int direction) const;
  WeightProvider make_weight_provider(int direction, int n) const;
  FieldChannels r_ell(double t) const;

  StagePerturbation build_stage(int i, std::optional<int64_t> flip_slab) const;
  void measure_stage(const StagePerturbation& stage, int i, StageReport& rep);
  void audit_stage(const StagePerturbation& stage, int i, StageReport& rep) const;
};

}  // namespace lamecvx
