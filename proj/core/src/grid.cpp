#include "lamecvx/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <future>
#include <map>
#include <mutex>

namespace lamecvx {

namespace {

struct PlanEntry {
  fftw_plan plan = nullptr;
  fftw_complex* buf = nullptr;
  size_t count = 0;
};

// FFTW planning is not thread-safe; executions on distinct plans are.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanCache {
  std::map<std::tuple<int, int, int>, PlanEntry> entries;

  ~PlanCache() {
    for (auto& [key, e] : entries) {
      std::lock_guard<std::mutex> lock(planner_mutex());
      if (e.plan) fftw_destroy_plan(e.plan);
      if (e.buf) fftw_free(e.buf);
    }
  }

  PlanEntry& get(int dim, int n, int sign) {
    auto key = std::make_tuple(dim, n, sign);
    auto it = entries.find(key);
    if (it != entries.end()) return it->second;
    PlanEntry e;
    e.count = grid_points(dim, n);
    {
      std::lock_guard<std::mutex> lock(planner_mutex());
      e.buf = fftw_alloc_complex(e.count);
      if (dim == 2)
        e.plan = fftw_plan_dft_2d(n, n, e.buf, e.buf, sign, FFTW_ESTIMATE);
      else if (dim == 3)
        e.plan = fftw_plan_dft_3d(n, n, n, e.buf, e.buf, sign, FFTW_ESTIMATE);
      else
        throw field_error("FFT: dim must be 2 or 3");
    }
    if (!e.plan) throw field_error("FFT: planner failed");
    return entries.emplace(key, e).first->second;
  }
};

PlanCache& cache() {
  thread_local PlanCache c;
  return c;
}

void run_plan(int dim, int n, int sign, cplx* data) {
  auto& e = cache().get(dim, n, sign);
  std::memcpy(static_cast<void*>(e.buf), static_cast<const void*>(data),
              e.count * sizeof(cplx));
  fftw_execute(e.plan);
  std::memcpy(static_cast<void*>(data), static_cast<const void*>(e.buf),
              e.count * sizeof(cplx));
}

}  // namespace

void spectral_from_physical(int dim, int n, cplx* data) {
  run_plan(dim, n, FFTW_FORWARD, data);
  const double s = 1.0 / static_cast<double>(grid_points(dim, n));
  const size_t count = grid_points(dim, n);
  for (size_t i = 0; i < count; ++i) data[i] *= s;
}

void physical_from_spectral(int dim, int n, cplx* data) {
  run_plan(dim, n, FFTW_BACKWARD, data);
}

cplx interp_periodic(const std::vector<cplx>& values, int dim, int n,
                     const double x[3], int order) {
  if (order % 2 != 0 || order < 2) throw field_error("interp_periodic: order must be even");
  if (order > n) order = n - (n % 2);
  const double two_pi = 2.0 * 3.14159265358979323846;
  // per-axis stencil bases and barycentric-style Lagrange weights
  int base[3] = {0, 0, 0};
  std::vector<double> w[3];
  for (int a = 0; a < dim; ++a) {
    const double u = (x[a] + 3.14159265358979323846) / two_pi * n;  // fractional index
    const int j0 = static_cast<int>(std::floor(u));
    base[a] = j0 - order / 2 + 1;
    w[a].resize(static_cast<size_t>(order));
    // Lagrange weights at offsets base..base+order-1 for abscissa u
    for (int m = 0; m < order; ++m) {
      double prod = 1.0;
      const double xm = static_cast<double>(base[a] + m);
      for (int l = 0; l < order; ++l) {
        if (l == m) continue;
        const double xl = static_cast<double>(base[a] + l);
        prod *= (u - xl) / (xm - xl);
      }
      w[a][static_cast<size_t>(m)] = prod;
    }
  }
  auto wrap = [n](int j) {
    j %= n;
    return j < 0 ? j + n : j;
  };
  cplx acc = 0.0;
  if (dim == 2) {
    for (int m0 = 0; m0 < order; ++m0)
      for (int m1 = 0; m1 < order; ++m1) {
        const size_t flat = static_cast<size_t>(wrap(base[0] + m0)) * static_cast<size_t>(n) +
                            static_cast<size_t>(wrap(base[1] + m1));
        acc += w[0][static_cast<size_t>(m0)] * w[1][static_cast<size_t>(m1)] * values[flat];
      }
  } else {
    const size_t ns = static_cast<size_t>(n);
    for (int m0 = 0; m0 < order; ++m0) {
      const size_t o0 = static_cast<size_t>(wrap(base[0] + m0)) * ns * ns;
      for (int m1 = 0; m1 < order; ++m1) {
        const size_t o1 = o0 + static_cast<size_t>(wrap(base[1] + m1)) * ns;
        const double w01 = w[0][static_cast<size_t>(m0)] * w[1][static_cast<size_t>(m1)];
        for (int m2 = 0; m2 < order; ++m2)
          acc += w01 * w[2][static_cast<size_t>(m2)] * values[o1 + static_cast<size_t>(wrap(base[2] + m2))];
      }
    }
  }
  return acc;
}

int worker_threads() {
  static const int nt = [] {
    const char* env = std::getenv("LAMECVX_THREADS");
    if (!env) return 1;
    const int v = std::atoi(env);
    return v < 1 ? 1 : (v > 64 ? 64 : v);
  }();
  return nt;
}

void parallel_for(size_t count, const std::function<void(size_t)>& body) {
  const int nt = worker_threads();
  if (nt <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::future<void>> futs;
  const size_t workers = std::min<size_t>(static_cast<size_t>(nt), count);
  for (size_t w = 0; w < workers; ++w) {
    futs.push_back(std::async(std::launch::async, [&, w] {
      for (size_t i = w; i < count; i += workers) body(i);
    }));
  }
  for (auto& f : futs) f.get();
}

}  // namespace lamecvx
