#pragma once

#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "lamecvx/blocks.hpp"
#include "lamecvx/cutoffs.hpp"
#include "lamecvx/field.hpp"
#include "lamecvx/operators.hpp"

namespace lamecvx {

/// Scalar weight d = delta^{1/2} Gamma_{f_dir}(Id - delta^{-1} R_ell) and its
/// first two time derivatives, pointwise on the grid (real-valued).
struct WeightField {
  int n = 0;
  double constant = -1.0;  // >= 0 when d is spatially constant (R_ell = 0)
  std::vector<double> d, dt, dtt;

  bool is_constant() const { return constant >= 0.0; }
};

/// Pointwise Gamma evaluation of the weight field.  R channel grids are the
/// collapsed 9-component matrix values of R_ell and its two time-derivative
/// channels; empty grids mean R_ell = 0.  A point where Id - delta^{-1} R
/// leaves the admissible ball raises out_of_ball_error naming the point.
WeightField weight_field(int n, const std::vector<std::vector<cplx>>& R_val,
                         const std::vector<std::vector<cplx>>& R_dt,
                         const std::vector<std::vector<cplx>>& R_dtt,
                         double delta_next, int direction);

/// provider of the weight channels at any time in the stage interval
using WeightProvider = std::function<WeightField(double t)>;

/// Frozen building block attached to one (slab, cell) wave index.
struct BlockCell {
  WaveIndex I;
  int par = 1;          // [I] in 1..16
  BuildingBlock blk;
  Mat3 grad_u;          // the gradient sample the block was frozen from
  double coef = 0.0;    // 1 / (sqrt(2) |tilde_f| |f|)
  double sign = 1.0;    // -1 on bifurcation-flipped slabs
};

struct StageGeometry {
  int n = 16;                     // collocation grid per axis
  int direction = 1;              // 1..6
  int64_t lambda = 4;             // lambda_{q,i+1}, integer
  std::array<int, 3> f{0, 1, 1};
  double omega_base = 0.0;        // sqrt((lambda+2mu)|f|^2)
  double tau = 0.25;
  int64_t mu_inv = 4;
};

/// Evaluated stage perturbation at one time: per-parity-class envelopes of
/// the wave coefficients plus derived fields.  A class holds the +m carrier
/// term; the physical field is term + conjugate.
class StageSlice {
public:
  struct ClassData {
    bool active = false;
    std::array<int64_t, 3> k{0, 0, 0};  // m lambda f
    double Omega = 0.0;                 // m lambda omega_base
    int m = 0;
    // W[channel][comp]: full-time-derivative envelopes of the coefficient
    // vector field W_m = sum_{I in class} gamma_I tilde_f_I e^{i dOmega_I t}
    std::array<std::array<std::vector<cplx>, 3>, 3> W;
  };

  int n = 0;
  double t = 0.0;
  StageGeometry geom;
  std::array<ClassData, 16> cls;
  // time-correction channels: u_t = -mean(u_p) (3-vector per channel)
  std::array<std::array<cplx, 3>, 3> u_t{};

  /// principal part of the perturbation (vector field)
  CarrierField u_principal(int channel) const;
  /// full perturbation u_p + u_t
  CarrierField u_total(int channel) const;
  /// oscillatory part of the gradient: i W_m (x) f carriers
  CarrierField w_p(int channel) const;
  /// envelope-gradient part: (lambda m)^{-1} grad W_m carriers
  CarrierField w_c(int channel) const;
  /// per-class coefficient field u_I-sum as a carrier field (vector)
  CarrierField class_coefficient(int m, int channel) const;

  /// grad of the full perturbation = w_p + w_c (identity by construction)
  CarrierField grad_u(int channel) const;
};

/// Builds stage-perturbation slices at arbitrary times from frozen block
/// cells, the cutoff system, and the weight provider.  sign_overrides lets
/// the bifurcation flip whole slabs.
class StagePerturbation {
public:
  StagePerturbation(StageGeometry geom, std::vector<BlockCell> cells,
                    WeightProvider weights);

  const StageGeometry& geometry() const { return geom_; }
  const WeightProvider& weight_provider() const { return weights_; }
  const std::vector<BlockCell>& cells() const { return cells_; }
  const CutoffSystem& cutoffs() const { return cutoffs_; }

  /// All cells on the given slab flipped in sign (bifurcation).
  StagePerturbation with_flipped_slab(int64_t s0) const;
  /// Restriction to a single slab (difference object of the bifurcation).
  StagePerturbation restricted_to_slab(int64_t s0) const;

  struct CustomClass {
    bool active = false;
    std::array<int64_t, 3> k{0, 0, 0};
    double Omega = 0.0;
    int m = 0;
    // W[channel][comp]
    std::vector<std::vector<std::vector<cplx>>> W;
  };

  /// max_channel limits the computed time-derivative channels (0..2).
  StageSlice evaluate(double t, int max_channel = 2) const;

  /// Time-mollified class envelopes: channel r holds the kernel-derivative
  /// convolution d_t^r(phi_ell * term) in carrier form.  Uses the factorized
  /// per-cell quadrature when the weight is constant, otherwise quadrature
  /// over full envelope evaluations.
  std::array<CustomClass, 16> mollified_classes(double t, double ell,
                                                const TimeKernel& kernel) const;

  /// Generic classwise assembly with a per-cell constant tensor in place of
  /// tilde_f: produces sum_{I in class} gamma_I tensor(I) e^{i dOmega_I t}
  /// with full-time-derivative channels and the class carrier attached.
  std::array<CustomClass, 16> evaluate_custom(
      double t, int ncomp,
      const std::function<void(const BlockCell&, std::vector<cplx>&)>& tensor) const;

  /// Envelope-only evaluation of the class combs (no weight multiplication),
  /// used by the mollification fast path and tests.
  std::array<std::vector<cplx>, 3> class_comb(int m, double t, int channel) const;

private:
  StageGeometry geom_;
  std::vector<BlockCell> cells_;
  WeightProvider weights_;
  CutoffSystem cutoffs_;
  std::map<int64_t, std::vector<size_t>> cells_by_slab_;
  // chi axis window tables: [cell index][grid j] per axis value
  std::vector<std::vector<double>> chi_axis_table_;

  void accumulate_generic_weighted(
      int ncomp, const std::function<void(const BlockCell&, std::vector<cplx>&)>& tensor,
      const std::function<void(const BlockCell&, cplx*)>& weights,
      std::array<CustomClass, 16>& cls) const;
  void accumulate_generic(double t, int max_channel, int ncomp,
                          const std::function<void(const BlockCell&, std::vector<cplx>&)>& tensor,
                          std::array<CustomClass, 16>& cls) const;
  void accumulate_combs(double t, int max_channel,
                        std::array<StageSlice::ClassData, 16>& cls) const;
};

}  // namespace lamecvx
