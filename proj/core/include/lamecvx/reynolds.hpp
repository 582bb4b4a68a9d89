#pragma once

#include "lamecvx/assembly.hpp"
#include "lamecvx/field.hpp"
#include "lamecvx/operators.hpp"
#include "lamecvx/schedule.hpp"

namespace lamecvx {

/// Quadratic stress of a gradient field: tr(G G^T) Id - G^T G.
CarrierField quad_stress(const CarrierField& G);

/// Polarization of the quadratic stress:
/// tr(Ga Gb^T + Gb Ga^T) Id - Ga^T Gb - Gb^T Ga.
CarrierField bilinear_stress(const CarrierField& Ga, const CarrierField& Gb);

CarrierField laplacian(const CarrierField& u);
CarrierField grad_div(const CarrierField& u);

/// Full equation operator on channel data:
///   u_tt - mu Lap u - (lambda+mu) grad Div u + Div quad_stress(grad u).
CarrierField lhs_slice(const FieldChannels& u, const LameParams& lame);

/// lhs with the numeric time derivative (cross-check route).
TorusField lhs(const TorusField& u, const LameParams& lame);

/// Weak-form residual of Definition-style test pairings over [0, T):
/// time quadrature of
///   int(-u_t . eta_t + mu grad u : grad eta + (lambda+mu) Div u Div eta
///       - quad_stress-part : grad eta) dx   minus   int u1 . eta(0) dx.
/// u_dt and eta_dt supply the time-derivative channels on the same nodes.
double weak_residual(const TorusField& u, const TorusField& u_dt,
                     const TorusField& eta, const TorusField& eta_dt,
                     const LameParams& lame, const CarrierField& u1);

/// Pairing -int (R - c Id) : grad eta dx dt (integration-by-parts oracle).
double weak_pairing(const TorusField& R, double c, const TorusField& eta);

/// S = 2 |f|^2 sum_m |W_m|^2 (Id - fhat (x) fhat): the low-frequency part the
/// oscillation error subtracts; equals d^2 proj pointwise by the partition
/// and support-disjointness identities.
CarrierField oscillation_subtraction(const StageSlice& s, int channel = 0);

/// d^2 (Id - fhat (x) fhat) as a carrier-0 matrix field.
CarrierField d_sq_proj(const WeightField& w, int direction, int n);

/// Mediation error matrix: bilinear_stress(grad(u - u_ell), grad u~).
CarrierField compute_RM(const CarrierField& grad_diff, const CarrierField& grad_pert);

struct OscillationError {
  CarrierField O1;        // R (inverse divergence) piece
  CarrierField O2;        // pointwise p/c + c/c cross terms
  CarrierField argument;  // quad_stress(w_p) - S (the R Div argument)
};
OscillationError compute_RO(const StageSlice& s);

struct LinearError {
  CarrierField L1;  // R(V)
  CarrierField L2;  // pointwise difference of true and frozen coefficients
  CarrierField V;   // linear residual minus Div L2 (mean-free)
};
LinearError compute_RL(const StagePerturbation& stage, const StageSlice& s,
                       const CarrierField& u_ell_grad, const LameParams& lame);

}  // namespace lamecvx
