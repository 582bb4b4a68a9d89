#pragma once

#include <array>
#include <vector>

#include "lamecvx/errors.hpp"
#include "lamecvx/linalg.hpp"
#include "lamecvx/schedule.hpp"

namespace lamecvx {

/// Frozen-coefficient 4-tensor built from one gradient sample:
///   A^{pm}_{nr} = delta_{rp} g_{mn} - delta_{nr} g_{mp},  g_{mn} = d_n u_m.
/// Its action A(D^2 w)_p = A^{pm}_{nr} d_n d_r w_m reproduces the
/// frozen-coefficient linearization of the quadratic stress divergence.
struct FrozenTensor {
  // a[p][m][n][r]
  std::array<std::array<std::array<std::array<double, 3>, 3>, 3>, 3> a{};

  double max_abs() const;
  /// Contraction A(f, f) acting on amplitude vectors: (out)_p = A^{pm}_{nr} f_n f_r g_m.
  Vec3 contract(const Vec3& f, const Vec3& g) const;
};

/// Build the frozen tensor from a gradient sample (grad[m][n] = d_n u_m).
FrozenTensor freeze(const Mat3& grad_u);

/// Orthogonal frame attached to a lattice direction: f, a rational f_perp of
/// the same length, and f3 = (f/|f|) x f_perp.
struct Frame {
  Vec3 f;
  Vec3 f_perp;
  Vec3 f3;

  Vec3 axis(int i) const {  // 1-based: f^{(1)}, f^{(2)}, f^{(3)}
    switch (i) {
      case 1: return f;
      case 2: return f_perp;
      case 3: return f3;
      default: throw error("Frame::axis: index must be 1..3");
    }
  }
};

/// Deterministic frame for f in the six-direction set: f_perp is the
/// sign-flipped partner within the same coordinate-plane pair.
Frame frame_of(const std::array<int, 3>& f);

/// Contracted tensor table At[c][s] = A^{pm}_{nr} f^{(1)}_n f^{(s)}_r f^{(s... }
/// indexed At(c, s) = Atilde^{cs}_{11} (the only entries the solver needs).
struct TildeTable {
  // at[c][r] = Atilde^{c r}_{11}, 1-based stored 0-based
  std::array<std::array<double, 3>, 3> at{};
  double operator()(int c, int r) const { return at[static_cast<size_t>(c - 1)][static_cast<size_t>(r - 1)]; }
};

/// Atilde^{cs}_{ij} = A^{pm}_{nr} f^{(i)}_n f^{(j)}_r f^{(s)}_m f^{(c)}_p / |f|^2;
/// this returns the (i,j) = (1,1) block used by the dispersion system.
TildeTable tilde_coeffs(const FrozenTensor& a, const Frame& frame);

/// Full contraction for cross-checks: Atilde^{cs}_{ij}.
double tilde_entry(const FrozenTensor& a, const Frame& frame, int c, int s, int i, int j);

/// Result of the coupled-quadratic Newton solve.
struct PolySolution {
  double a1 = 0.0;
  double a2 = 0.0;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_trace;  // |eps1| + |eps2| per iteration
};

/// Newton iteration for
///   A1 a1^2 + E1 a1 a2 + C1 a1 + B2 a2 = D1
///   A2 a2^2 + E2 a1 a2 + C2 a2 + B1 a1 = D2
/// starting from a_{1,1} = D1/C1, a_{2,1} = D2/C2 and correcting through the
/// displayed 2x2 linear solves until |eps1| + |eps2| < tol.
struct PolyCoeffs {
  double A1, A2, B1, B2, C1, C2, D1, D2, E1, E2;
};

PolySolution solve_polynomial_system(const PolyCoeffs& c, double tol = 1e-12,
                                     int max_iter = 60);

/// A plane-wave building block of the frozen linearized system:
///   w(t,x) = tilde_f e^{i (f.x - sqrt((lambda+2mu)|f|^2 - cA) t)}.
struct BuildingBlock {
  Frame frame;
  double a2 = 0.0;
  double a3 = 0.0;
  double cA = 0.0;
  double omega = 0.0;  // sqrt((lambda+2mu)|f|^2 - cA)

  Vec3 tilde_f() const { return frame.f + a2 * frame.f_perp + a3 * frame.f3; }
};

/// Solve the polarization/dispersion system for direction f and frozen A.
BuildingBlock build_block(const FrozenTensor& a, const std::array<int, 3>& f,
                          const LameParams& lame, double tol = 1e-12);

/// Residual of the algebraic amplitude equation the plane wave must satisfy:
///   cA g - (lambda+mu)|f|^2 g + (lambda+mu)(f.g) f - A(f,f) g = 0
/// reduced to the frame basis; returns the max coefficient magnitude.
double block_pde_residual(const BuildingBlock& blk, const FrozenTensor& a,
                          const LameParams& lame);

}  // namespace lamecvx
