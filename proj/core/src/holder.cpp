#include "lamecvx/holder.hpp"

#include <algorithm>
#include <cmath>

namespace lamecvx {

std::vector<std::array<int, 3>> multi_indices(int dim, int order) {
  std::vector<std::array<int, 3>> out;
  if (dim == 2) {
    for (int a = 0; a <= order; ++a) out.push_back({a, order - a, 0});
  } else {
    for (int a = 0; a <= order; ++a)
      for (int b = 0; b + a <= order; ++b) out.push_back({a, b, order - a - b});
  }
  return out;
}

namespace {

double sup_of_derivatives(const CarrierField& f, double t, int order) {
  double m = 0.0;
  for (const auto& alpha : multi_indices(f.dim(), order)) {
    const CarrierField d = spectral_derivative(f, alpha, order);
    m = std::max(m, d.sup_norm(t));
  }
  return m;
}

double sampled_seminorm(const CarrierField& f, double t, int N, double alpha,
                        int n_pairs) {
  const int n = f.n();
  const int dim = f.dim();
  const double h = 2.0 * 3.14159265358979323846 / static_cast<double>(n);
  double best = 0.0;
  for (const auto& mi : multi_indices(dim, N)) {
    const CarrierField d = spectral_derivative(f, mi, N);
    const auto g = d.collapse(t);
    for (const auto& compv : g) {
      int idx[3];
      for (size_t p = 0; p < compv.size(); ++p) {
        unflatten(p, dim, n, idx);
        for (int axis = 0; axis < dim; ++axis) {
          for (int m = 1; m <= n_pairs; ++m) {
            int jdx[3] = {idx[0], idx[1], idx[2]};
            jdx[axis] = (idx[axis] + m) % n;
            size_t q = 0;
            for (int a = 0; a < dim; ++a) q = q * static_cast<size_t>(n) + static_cast<size_t>(jdx[a]);
            const double num = std::abs(compv[p] - compv[q]);
            const double den = std::pow(static_cast<double>(m) * h, alpha);
            best = std::max(best, num / den);
          }
        }
      }
    }
  }
  return best;
}

}  // namespace

double holder_norm_slice(const CarrierField& f, double t, int N, double alpha,
                         HolderOptions opts) {
  if (alpha < 0.0 || alpha >= 1.0) throw field_error("holder_norm: alpha must be in [0,1)");
  if (static_cast<double>(N) + alpha > static_cast<double>(opts.max_order) + 1e-12)
    throw field_error("holder_norm: N + alpha exceeds configured max order");
  double total = 0.0;
  for (int j = 0; j <= N; ++j) total += sup_of_derivatives(f, t, j);
  if (alpha > 0.0) total += sampled_seminorm(f, t, N, alpha, opts.n_pairs);
  return total;
}

double holder_norm(const TorusField& f, int N, double alpha,
                   const std::vector<double>& t_set, HolderOptions opts) {
  if (t_set.empty()) throw field_error("holder_norm: empty t_set");
  if (alpha < 0.0 || alpha >= 1.0) throw field_error("holder_norm: alpha must be in [0,1)");
  if (static_cast<double>(N) + alpha > static_cast<double>(opts.max_order) + 1e-12)
    throw field_error("holder_norm: N + alpha exceeds configured max order");

  // seminorm-by-slice then combine: the norm is a sup over t
  double best = 0.0;
  for (double t : t_set) {
    // nearest stored node
    size_t jbest = 0;
    double dbest = std::abs(f.nodes()[0] - t);
    for (size_t j = 1; j < f.node_count(); ++j) {
      const double d = std::abs(f.nodes()[j] - t);
      if (d < dbest) {
        dbest = d;
        jbest = j;
      }
    }
    best = std::max(best, holder_norm_slice(f.slice(jbest), f.nodes()[jbest], N, alpha, opts));
  }
  return best;
}

}  // namespace lamecvx
