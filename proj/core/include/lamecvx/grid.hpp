#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "lamecvx/errors.hpp"
#include "lamecvx/linalg.hpp"

namespace lamecvx {

/// Number of points of a dim-dimensional n^dim grid.
inline size_t grid_points(int dim, int n) {
  size_t p = 1;
  for (int i = 0; i < dim; ++i) p *= static_cast<size_t>(n);
  return p;
}

/// FFT index -> signed frequency, standard layout {0,..,n/2-1,-n/2,..,-1}.
inline int64_t fft_freq(int idx, int n) { return idx < (n + 1) / 2 ? idx : idx - n; }

/// Envelope-mode frequency for Fourier multipliers.  The unpaired Nyquist
/// plane of an even grid counts as frequency zero so that every multiplier
/// commutes with complex conjugation of carrier pairs.
inline int64_t env_freq(int idx, int n) {
  if (n % 2 == 0 && idx == n / 2) return 0;
  return fft_freq(idx, n);
}

/// True when the mode is a paired (non-Nyquist) envelope mode.
inline bool env_mode_in_band(int64_t m, int n) {
  const int64_t lim = (n - 1) / 2;
  return m >= -lim && m <= lim;
}

/// In-place transforms between physical grid values and Fourier coefficients,
/// with the convention  f(x) = sum_k c(k) e^{i k.x}  on [-pi,pi)^dim.
/// Grid point j maps to x_j = -pi + 2 pi j / n.
///
/// Plans are FFTW_ESTIMATE (deterministic) and cached per thread.
void spectral_from_physical(int dim, int n, cplx* data);
void physical_from_spectral(int dim, int n, cplx* data);

/// x-coordinate of grid index along one axis.
inline double grid_coord(int j, int n) {
  return -3.14159265358979323846 + 2.0 * 3.14159265358979323846 *
         static_cast<double>(j) / static_cast<double>(n);
}

/// Decompose flat index into per-axis indices (row-major, axis 0 slowest).
inline void unflatten(size_t flat, int dim, int n, int idx[3]) {
  idx[2] = 0;
  for (int a = dim - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(flat % static_cast<size_t>(n));
    flat /= static_cast<size_t>(n);
  }
}

/// Periodic local Lagrange interpolation of a complex grid (order points per
/// axis, order even).  Exact-to-roundoff for well-resolved band-limited data.
cplx interp_periodic(const std::vector<cplx>& values, int dim, int n,
                     const double x[3], int order = 8);

/// Number of worker threads (LAMECVX_THREADS, default 1).
int worker_threads();

/// Deterministic parallel loop: body(i) for i in [0, count); results must be
/// written to disjoint slots by the caller.
void parallel_for(size_t count, const std::function<void(size_t)>& body);

}  // namespace lamecvx
