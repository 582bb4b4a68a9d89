#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "lamecvx/errors.hpp"
#include "lamecvx/grid.hpp"
#include "lamecvx/linalg.hpp"

namespace lamecvx {

enum class Rank { scalar, vector, matrix };

int rank_components(Rank rank, int dim);

struct TimeInterval {
  double t0 = 0.0;
  double t1 = 1.0;

  void validate() const {
    if (!(t0 < t1)) throw field_error("TimeInterval: t0 < t1 required");
  }
  double length() const { return t1 - t0; }
  bool contains(double t, double slack = 0.0) const {
    return t >= t0 - slack && t <= t1 + slack;
  }
  bool contains(const TimeInterval& other, double slack = 0.0) const {
    return contains(other.t0, slack) && contains(other.t1, slack);
  }
  TimeInterval shrunk(double margin) const {
    TimeInterval r{t0 + margin, t1 - margin};
    r.validate();
    return r;
  }
};

/// One oscillatory term of a spatial tensor field at a fixed time:
///   envelope(x) * e^{i (k.x - omega t)}
/// with integer carrier wavevector k and real temporal carrier frequency
/// omega.  Envelope values are stored on the physical collocation grid.
/// Slowly varying fields are a single term with k = 0, omega = 0.
struct CarrierTerm {
  std::array<int64_t, 3> k{0, 0, 0};
  double omega = 0.0;
  std::vector<std::vector<cplx>> comp;  // [component][grid point]
};

/// Frequency-mode map: receives the total wavevector (envelope mode plus
/// carrier) and fills a ncomp_out x ncomp_in complex matrix (row-major).
using ModeMap = std::function<void(const int64_t k[3], cplx* matrix)>;

/// Sparse bilinear combination descriptor for pointwise tensor products:
/// out[c] = sum over (ia, ib, w) in entries[c] of  w * a[ia] * b[ib].
struct BilinearMap {
  int ncomp_out = 1;
  std::vector<std::vector<std::tuple<int, int, double>>> entries;
};

/// Spatial tensor field at one time instant in carrier-envelope form.
///
/// Collocation semantics: an envelope IS its grid values; pointwise products
/// are computed on the common grid, so every polynomial identity among fields
/// holds exactly in the discrete representation.  Linear operators (spectral
/// derivatives, Fourier multipliers) act on the trigonometric interpolant of
/// each envelope with the carrier shift applied exactly.
class CarrierField {
public:
  CarrierField() = default;
  CarrierField(int dim, int n, Rank rank);

  int dim() const { return dim_; }
  int n() const { return n_; }
  Rank rank() const { return rank_; }
  int ncomp() const { return rank_components(rank_, dim_); }
  size_t points() const { return grid_points(dim_, n_); }
  const std::vector<CarrierTerm>& terms() const { return terms_; }
  std::vector<CarrierTerm>& terms() { return terms_; }
  bool empty() const { return terms_.empty(); }

  static CarrierField zero(int dim, int n, Rank rank) { return {dim, n, rank}; }

  /// Sample a closed form on the grid into a single k=0 term.
  static CarrierField from_samples(
      int dim, int n, Rank rank,
      const std::function<cplx(const double x[3], int comp)>& f);

  /// Insert an explicit term (takes ownership of the envelope arrays).
  void add_term(CarrierTerm term);

  void check_compatible(const CarrierField& other) const;

  /// this += s * other, merging carriers.
  void add_scaled(const CarrierField& other, cplx s = 1.0);
  CarrierField scaled(cplx s) const;

  /// Complex conjugate field (k -> -k, omega -> -omega, envelope conjugated).
  CarrierField conjugated() const;

  /// Drop terms whose envelopes are uniformly below tol.
  void prune(double tol = 0.0);

  /// Merge duplicate carriers; sort terms deterministically.
  void normalize();

  size_t term_count() const { return terms_.size(); }

  /// Pointwise bilinear product with carrier combination.
  static CarrierField product(const CarrierField& a, const CarrierField& b,
                              const BilinearMap& map, Rank out_rank);

  /// Apply a Fourier multiplier evaluated at the total frequency.
  /// May change the component count (e.g. divergence, gradient).
  CarrierField mode_map(const ModeMap& map, Rank out_rank) const;

  /// Spatial derivative d^alpha with multi-index alpha (|alpha| <= max order
  /// checked by the caller).
  CarrierField derivative(const std::array<int, 3>& alpha) const;

  /// Evaluate the field on the grid at time t (sums carriers with phases).
  /// Result: [component][grid point].
  std::vector<std::vector<cplx>> collapse(double t) const;

  /// Spatial mean of each component at time t: the exact zero-total-frequency
  /// content of the representation (terms whose -k mode is out of band
  /// contribute nothing).
  std::vector<cplx> mean(double t) const;

  /// Max modulus over grid and components at time t.
  double sup_norm(double t) const;

  /// Largest imaginary part seen on the collapsed grid (reality check).
  double reality_defect(double t) const;

  /// Envelope spectral coefficient of one term at a given envelope mode.
  static cplx env_mode(const CarrierTerm& term, int dim, int n,
                       const std::array<int64_t, 3>& mode, int component);

private:
  int dim_ = 3;
  int n_ = 8;
  Rank rank_ = Rank::scalar;
  std::vector<CarrierTerm> terms_;
};

/// Periodic tensor field on [t0,t1] x T^d: spectral in space (carrier form),
/// sampled in time.  All slices share one carrier signature so that time
/// stencils act envelope-wise.
class TorusField {
public:
  TorusField() = default;
  TorusField(int dim, int n, Rank rank, TimeInterval interval,
             std::vector<double> nodes);

  int dim() const { return dim_; }
  int n() const { return n_; }
  Rank rank() const { return rank_; }
  const TimeInterval& interval() const { return interval_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const CarrierField& slice(size_t j) const { return slices_.at(j); }
  CarrierField& slice(size_t j) { return slices_.at(j); }
  size_t node_count() const { return nodes_.size(); }

  /// Build from a closed form f(t, x, comp).
  static TorusField from_samples(
      int dim, int n, Rank rank, TimeInterval interval, std::vector<double> nodes,
      const std::function<cplx(double t, const double x[3], int comp)>& f);

  void set_slice(size_t j, CarrierField f);

  /// Uniform node spacing; throws if nodes are not uniform.
  double uniform_dt() const;

  bool matrix_symmetric(double tol) const;
  double max_reality_defect() const;

private:
  int dim_ = 3;
  int n_ = 8;
  Rank rank_ = Rank::scalar;
  TimeInterval interval_;
  std::vector<double> nodes_;
  std::vector<CarrierField> slices_;
};

// ---- module operations -----------------------------------------------------

/// d^alpha f, exact on the representation.  Total order limited by max_order.
TorusField spectral_derivative(const TorusField& f, const std::array<int, 3>& alpha,
                               int max_order = 4);
CarrierField spectral_derivative(const CarrierField& f, const std::array<int, 3>& alpha,
                                 int max_order = 4);

/// (Div A)_p = sum_n d_n A_{np} for matrix fields.
CarrierField matrix_divergence(const CarrierField& a);
TorusField matrix_divergence(const TorusField& a);

/// Jacobian gradient of a vector field: (grad u)_{m,n} = d_n u_m.
CarrierField gradient(const CarrierField& u);

/// Finite-difference time derivative across nodes (Fornberg weights;
/// 6th-order interior stencil, one-sided at the ends).  Carrier phases are
/// differentiated exactly; the stencil acts on envelopes only.  This is the
/// numeric cross-check for fields whose analytic channels come from closed
/// forms.
TorusField time_derivative(const TorusField& f, int order, int stencil_order = 6);

/// Finite-difference weights for derivative m at x0 from arbitrary nodes.
std::vector<double> fornberg_weights(int m, const std::vector<double>& xs, double x0);

/// One channel triple (value, d_t, d_tt) of a field.  Channel entries carry
/// full time derivatives (carrier phases included).
struct FieldChannels {
  CarrierField val, dt, dtt;

  const CarrierField& ch(int r) const {
    switch (r) {
      case 0: return val;
      case 1: return dt;
      case 2: return dtt;
      default: throw field_error("FieldChannels: channel must be 0..2");
    }
  }
};

/// Leibniz product of channel triples.
FieldChannels channels_product(const FieldChannels& a, const FieldChannels& b,
                               const BilinearMap& map, Rank out_rank);

FieldChannels channels_add(const FieldChannels& a, const FieldChannels& b, cplx sb = 1.0);

/// Apply a linear spatial operation to each channel.
FieldChannels channels_apply(const FieldChannels& a,
                             const std::function<CarrierField(const CarrierField&)>& op);

/// Numeric channels for a time-indexed field family: per-carrier envelope
/// stencils of order stencil_order at spacing h around t0.
FieldChannels stencil_channels(const std::function<CarrierField(double)>& field,
                               double t0, double h, int stencil_order = 6);

/// Bilinear product maps used across the engine.
BilinearMap scalar_times(Rank rank, int dim);          // (scalar, T) -> T
BilinearMap dot_map(int dim);                          // (vector, vector) -> scalar
BilinearMap matT_mat_map(int dim);                     // (matrix, matrix) -> A^T B
BilinearMap tr_abT_map(int dim);                       // (matrix, matrix) -> tr(A B^T)

}  // namespace lamecvx
