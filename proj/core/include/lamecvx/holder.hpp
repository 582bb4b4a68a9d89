#pragma once

#include <vector>

#include "lamecvx/field.hpp"

namespace lamecvx {

/// Holder-norm estimator options.
struct HolderOptions {
  int n_pairs = 8;      // nearest grid neighbors per axis for the seminorm
  int max_order = 4;    // cap on N + alpha
};

/// Estimate of ||f||_{N+alpha} at the given times:
///   sum_{j<=N} max_{|k|=j} sup |D^k f|  (+ sampled C^alpha seminorm of D^N f).
/// Spatial maxima run over the collocation grid and the seminorm over
/// axis-aligned grid pairs up to n_pairs neighbors, so the value is a lower
/// bound of the true norm; it is used for monitoring only.
double holder_norm(const TorusField& f, int N, double alpha,
                   const std::vector<double>& t_set, HolderOptions opts = {});

/// Same estimate on a single slice.
double holder_norm_slice(const CarrierField& f, double t, int N, double alpha,
                         HolderOptions opts = {});

/// All multi-indices of given total order in `dim` axes.
std::vector<std::array<int, 3>> multi_indices(int dim, int order);

}  // namespace lamecvx
