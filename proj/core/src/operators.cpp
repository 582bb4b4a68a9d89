#include "lamecvx/operators.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace lamecvx {

namespace {

double f1(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }

/// smoothstep: 0 for x<=0, 1 for x>=1, smooth monotone between
double smoothstep(double x) {
  const double a = f1(x);
  const double b = f1(1.0 - x);
  return a / (a + b);
}

constexpr double kPi = 3.14159265358979323846;

long double bump_ld(long double t) {
  const long double s = 1.0L - t * t;
  return s > 0.0L ? std::exp(-1.0L / s) : 0.0L;
}

long double legendre_ld(int n, long double x) {
  if (n == 0) return 1.0L;
  if (n == 1) return x;
  long double pm = 1.0L, p = x;
  for (int k = 2; k <= n; ++k) {
    const long double pn = ((2.0L * k - 1.0L) * x * p - (k - 1.0L) * pm) / k;
    pm = p;
    p = pn;
  }
  return p;
}

// Gauss-Legendre nodes/weights on [-1,1] via Newton iteration.
QuadRule legendre_gauss(int K) {
  QuadRule r;
  r.x.resize(static_cast<size_t>(K));
  r.w.resize(static_cast<size_t>(K));
  for (int i = 0; i < K; ++i) {
    long double x = std::cos(kPi * (i + 0.75L) / (K + 0.5L));
    for (int it = 0; it < 100; ++it) {
      long double p = legendre_ld(K, x);
      long double pm = legendre_ld(K - 1, x);
      long double dp = K * (x * p - pm) / (x * x - 1.0L);
      const long double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-19L) break;
    }
    const long double p1 = legendre_ld(K - 1, x);
    const long double dp = K * (x * legendre_ld(K, x) - p1) / (x * x - 1.0L);
    r.x[static_cast<size_t>(i)] = static_cast<double>(x);
    r.w[static_cast<size_t>(i)] = static_cast<double>(2.0L / ((1.0L - x * x) * dp * dp));
  }
  return r;
}

const QuadRule& cached_gauss_impl(int K) {
  static std::map<int, QuadRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(K);
  if (it == cache.end()) it = cache.emplace(K, legendre_gauss(K)).first;
  return it->second;
}

}  // namespace

const QuadRule& gauss_rule(int K) { return cached_gauss_impl(K); }

double lp_profile(double r) {
  if (r <= 1.0) return 1.0;
  if (r >= 2.0) return 0.0;
  return 1.0 - smoothstep(r - 1.0);
}

int band_level(double ell) {
  if (!(ell > 0.0)) throw field_error("band_level: ell must be > 0");
  // largest J with 2^J <= 1/ell
  return static_cast<int>(std::floor(std::log2(1.0 / ell) + 1e-12));
}

CarrierField band_project(const CarrierField& f, double ell) {
  if (ell == 0.0) return f;
  const int J = band_level(ell);
  const double scale = std::exp2(static_cast<double>(J));
  const double dimroot = std::sqrt(static_cast<double>(f.dim()));
  const double envmax = dimroot * static_cast<double>(f.n()) / 2.0;

  CarrierField out(f.dim(), f.n(), f.rank());
  const int nc = f.ncomp();
  for (const auto& term : f.terms()) {
    double kc = 0.0;
    for (int a = 0; a < f.dim(); ++a)
      kc += static_cast<double>(term.k[a]) * static_cast<double>(term.k[a]);
    kc = std::sqrt(kc);
    if (kc - envmax > 2.0 * scale) continue;  // entirely above the band
    CarrierField one(f.dim(), f.n(), f.rank());
    one.add_term(term);
    if (kc + envmax <= scale) {
      out.add_scaled(one, 1.0);  // entirely on the plateau
      continue;
    }
    CarrierField filtered = one.mode_map(
        [&](const int64_t k[3], cplx* m) {
          double r = 0.0;
          for (int a = 0; a < 3; ++a) r += static_cast<double>(k[a]) * static_cast<double>(k[a]);
          const double phi = lp_profile(std::sqrt(r) / scale);
          for (int i = 0; i < nc * nc; ++i) m[i] = 0.0;
          for (int i = 0; i < nc; ++i) m[i * nc + i] = phi;
        },
        f.rank());
    filtered.prune(0.0);
    out.add_scaled(filtered, 1.0);
  }
  out.normalize();
  return out;
}

TorusField band_project(const TorusField& f, double ell) {
  TorusField out(f.dim(), f.n(), f.rank(), f.interval(), std::vector<double>(f.nodes()));
  for (size_t j = 0; j < f.node_count(); ++j) out.set_slice(j, band_project(f.slice(j), ell));
  return out;
}

// ---- TimeKernel -------------------------------------------------------------

TimeKernel::TimeKernel(int n0) : n0_(n0) {
  if (n0 < 1) throw field_error("TimeKernel: n0 must be >= 1");
  if (n0 > 40)
    throw field_error("TimeKernel: moment system ill-conditioned beyond n0 = 40; "
                      "use a toy n0");
  // unknowns: even Legendre coefficients; conditions: moments 0,2,...,<=n0+3
  const int m = 1 + (n0 + 3) / 2;
  const QuadRule& g = cached_gauss_impl(260);

  using MatX = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VecX = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  MatX A(m, m);
  VecX rhs = VecX::Zero(m);
  rhs(0) = 1.0L;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      long double acc = 0.0L;
      for (size_t q = 0; q < g.x.size(); ++q) {
        const long double x = static_cast<long double>(g.x[q]);
        long double tp = 1.0L;
        for (int e = 0; e < 2 * i; ++e) tp *= x;
        acc += static_cast<long double>(g.w[q]) * bump_ld(x) * legendre_ld(2 * j, x) * tp;
      }
      A(i, j) = acc;
    }
  }
  Eigen::FullPivLU<MatX> lu(A);
  if (!lu.isInvertible())
    throw field_error("TimeKernel: singular moment system (increase precision or lower n0)");
  VecX c = lu.solve(rhs);
  // one round of iterative refinement
  VecX resid = rhs - A * c;
  c += lu.solve(resid);

  coeffs_.resize(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) coeffs_[static_cast<size_t>(j)] = static_cast<double>(c(j));

  // pin the mass to 1 exactly in quadrature
  const double mass = moment(0);
  for (auto& v : coeffs_) v /= mass;
}

double TimeKernel::value(double tau) const { return deriv(tau, 0); }

double TimeKernel::deriv(double tau, int order) const {
  if (order < 0 || order > 2) throw field_error("TimeKernel::deriv: order must be 0..2");
  const double s = 1.0 - tau * tau;
  if (s <= 0.0) return 0.0;
  const double bump = std::exp(-1.0 / s);
  // bump' = bump * u, u = -2 tau / s^2 ; bump'' = bump*(u^2 + u')
  const double u = -2.0 * tau / (s * s);
  const double up = -2.0 / (s * s) - 8.0 * tau * tau / (s * s * s);

  // polynomial and derivatives via Legendre recurrences
  double poly = 0.0, dpoly = 0.0, ddpoly = 0.0;
  for (size_t j = 0; j < coeffs_.size(); ++j) {
    const int nn = static_cast<int>(2 * j);
    const double p = static_cast<double>(legendre_ld(nn, tau));
    double dp = 0.0, ddp = 0.0;
    if (nn > 0) {
      const double pm = static_cast<double>(legendre_ld(nn - 1, tau));
      dp = nn * (pm - tau * p) / (1.0 - tau * tau);
      ddp = (2.0 * tau * dp - nn * (nn + 1.0) * p) / (1.0 - tau * tau);
    }
    poly += coeffs_[j] * p;
    dpoly += coeffs_[j] * dp;
    ddpoly += coeffs_[j] * ddp;
  }
  if (order == 0) return bump * poly;
  if (order == 1) return bump * (u * poly + dpoly);
  return bump * ((u * u + up) * poly + 2.0 * u * dpoly + ddpoly);
}

double TimeKernel::moment(int p) const {
  const QuadRule& g = cached_gauss_impl(260);
  double acc = 0.0;
  for (size_t q = 0; q < g.x.size(); ++q) {
    double tp = 1.0;
    for (int e = 0; e < p; ++e) tp *= g.x[q];
    acc += g.w[q] * deriv(g.x[q], 0) * tp;
  }
  return acc;
}

int TimeKernel::base_quadrature_points() const {
  // The bump factor converges slowly under Gauss-Legendre; 96 points keep the
  // quadrature mass defect near 1e-13, which the constant- and polynomial-
  // reproduction tolerances need.  The (3/2)(n0+4) floor covers the
  // polynomial degree.
  return std::max(static_cast<int>(std::ceil(3.0 * (n0_ + 4) / 2.0)), 96);
}

std::string TimeKernel::dump() const {
  std::ostringstream os;
  os.precision(17);
  os << "# time kernel n0=" << n0_ << "\n# even Legendre coefficients\n";
  for (size_t j = 0; j < coeffs_.size(); ++j) os << 2 * j << " " << coeffs_[j] << "\n";
  const QuadRule& g = cached_gauss_impl(260);
  os << "# quadrature abscissa weight value\n";
  for (size_t q = 0; q < g.x.size(); ++q)
    os << g.x[q] << " " << g.w[q] << " " << deriv(g.x[q], 0) << "\n";
  return os.str();
}

TimeKernel build_time_kernel(int n0) { return TimeKernel(n0); }

// ---- time mollification ------------------------------------------------------

namespace {

struct CarrierKey {
  std::array<int64_t, 3> k;
  double omega;
  bool operator<(const CarrierKey& o) const {
    if (k != o.k) return k < o.k;
    return omega < o.omega - 1e-9 * (1.0 + std::abs(omega) + std::abs(o.omega));
  }
};

// interpolation stencil across time nodes
struct TimeStencil {
  size_t lo = 0;
  std::vector<double> w;
};

TimeStencil interp_stencil(const std::vector<double>& nodes, double t, int order) {
  const int nn = static_cast<int>(nodes.size());
  const int width = std::min(order, nn);
  // locate
  int j = static_cast<int>(std::lower_bound(nodes.begin(), nodes.end(), t) - nodes.begin());
  int lo = j - width / 2;
  lo = std::max(0, std::min(lo, nn - width));
  std::vector<double> xs(nodes.begin() + lo, nodes.begin() + lo + width);
  TimeStencil s;
  s.lo = static_cast<size_t>(lo);
  s.w = fornberg_weights(0, xs, t);
  return s;
}

}  // namespace

CarrierField time_mollify_at(const TorusField& f, double t, double ell,
                             const TimeKernel& kernel, int deriv_order) {
  if (ell == 0.0) {
    if (deriv_order != 0)
      throw field_error("time_mollify_at: derivative channels need ell > 0");
    // identity convention
    TimeStencil s = interp_stencil(f.nodes(), t, 8);
    CarrierField out(f.dim(), f.n(), f.rank());
    for (size_t j = 0; j < s.w.size(); ++j) out.add_scaled(f.slice(s.lo + j), s.w[j]);
    out.normalize();
    return out;
  }
  if (t - ell < f.nodes().front() - 1e-12 || t + ell > f.nodes().back() + 1e-12)
    throw field_error("time_mollify_at: insufficient interval margin");

  // union carrier signature with per-slice lookup
  std::map<CarrierKey, std::vector<const CarrierTerm*>> sig;
  for (size_t j = 0; j < f.node_count(); ++j) {
    for (const auto& term : f.slice(j).terms()) {
      auto& vec = sig[CarrierKey{term.k, term.omega}];
      vec.resize(f.node_count(), nullptr);
      vec[j] = &term;
    }
  }

  CarrierField out(f.dim(), f.n(), f.rank());
  const size_t pts = f.slice(0).points();
  const int nc = f.slice(0).ncomp();
  for (const auto& [key, slots] : sig) {
    const int boost = static_cast<int>(std::ceil(std::abs(key.omega) * ell / 2.0));
    const int K = std::max(kernel.base_quadrature_points() + 4, 12) + boost;
    const QuadRule& g = cached_gauss_impl(K);
    CarrierTerm o;
    o.k = key.k;
    o.omega = key.omega;
    o.comp.assign(static_cast<size_t>(nc), std::vector<cplx>(pts, cplx(0.0)));
    for (size_t q = 0; q < g.x.size(); ++q) {
      const double tau = ell * g.x[q];
      const double kval = kernel.deriv(g.x[q], deriv_order) /
                          std::pow(ell, static_cast<double>(deriv_order));
      const cplx phase = std::polar(1.0, key.omega * tau);
      const cplx wq = g.w[q] * kval * phase;  // kernel support measure folded in
      TimeStencil s = interp_stencil(f.nodes(), t - tau, 8);
      for (size_t m = 0; m < s.w.size(); ++m) {
        const CarrierTerm* src = slots[s.lo + m];
        if (!src) continue;
        const cplx c = wq * s.w[m];
        for (int cc = 0; cc < nc; ++cc) {
          auto& dst = o.comp[static_cast<size_t>(cc)];
          const auto& sv = src->comp[static_cast<size_t>(cc)];
          for (size_t p = 0; p < pts; ++p) dst[p] += c * sv[p];
        }
      }
    }
    out.add_term(std::move(o));
  }
  out.normalize();
  out.prune(0.0);
  return out;
}

TorusField time_mollify(const TorusField& f, double ell, const TimeKernel& kernel,
                        int deriv_order) {
  if (ell == 0.0 && deriv_order == 0) return f;
  if (ell < 0.0) throw field_error("time_mollify: ell must be >= 0");
  const TimeInterval shrunk = f.interval().shrunk(ell);
  std::vector<double> nodes;
  for (double t : f.nodes())
    if (shrunk.contains(t, 1e-12)) nodes.push_back(t);
  if (nodes.empty())
    throw field_error("time_mollify: no nodes remain after interval shrinkage");
  TorusField out(f.dim(), f.n(), f.rank(), shrunk, std::move(nodes));
  for (size_t j = 0; j < out.node_count(); ++j)
    out.set_slice(j, time_mollify_at(f, out.nodes()[j], ell, kernel, deriv_order));
  return out;
}

// ---- Leray projection and inverse divergence ---------------------------------

CarrierField leray_project(const CarrierField& v) {
  if (v.rank() != Rank::vector) throw field_error("leray_project: vector field required");
  const int d = v.dim();
  return v.mode_map(
      [d](const int64_t k[3], cplx* m) {
        double k2 = 0.0;
        for (int a = 0; a < d; ++a) k2 += static_cast<double>(k[a]) * static_cast<double>(k[a]);
        if (k2 == 0.0) {
          for (int i = 0; i < d * d; ++i) m[i] = 0.0;
          return;
        }
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c)
            m[r * d + c] = (r == c ? 1.0 : 0.0) -
                           static_cast<double>(k[r]) * static_cast<double>(k[c]) / k2;
      },
      Rank::vector);
}

TorusField leray_project(const TorusField& v) {
  TorusField out(v.dim(), v.n(), v.rank(), v.interval(), std::vector<double>(v.nodes()));
  for (size_t j = 0; j < v.node_count(); ++j) out.set_slice(j, leray_project(v.slice(j)));
  return out;
}

CarrierField inverse_divergence(const CarrierField& v) {
  if (v.rank() != Rank::vector) throw field_error("inverse_divergence: vector field required");
  const int d = v.dim();
  return v.mode_map(
      [d](const int64_t k[3], cplx* m) {
        const int nout = d * d;
        double k2 = 0.0;
        for (int a = 0; a < d; ++a) k2 += static_cast<double>(k[a]) * static_cast<double>(k[a]);
        if (k2 == 0.0) {
          for (int i = 0; i < nout * d; ++i) m[i] = 0.0;
          return;
        }
        // column c: response to vhat = e_c
        for (int c = 0; c < d; ++c) {
          cplx u[3] = {0.0, 0.0, 0.0};
          u[c] = cplx(-1.0 / k2, 0.0);  // uhat = -vhat/|k|^2
          // Leray projection of u
          cplx pu[3];
          cplx kdotu = 0.0;
          for (int a = 0; a < d; ++a) kdotu += static_cast<double>(k[a]) * u[a];
          for (int a = 0; a < d; ++a)
            pu[a] = u[a] - static_cast<double>(k[a]) * kdotu / k2;
          cplx divu = 0.0;
          for (int a = 0; a < d; ++a) divu += cplx(0.0, static_cast<double>(k[a])) * u[a];
          for (int r = 0; r < d; ++r) {
            for (int s = 0; s < d; ++s) {
              const cplx grad_pu = cplx(0.0, static_cast<double>(k[s])) * pu[r];
              const cplx grad_pu_T = cplx(0.0, static_cast<double>(k[r])) * pu[s];
              const cplx grad_u = cplx(0.0, static_cast<double>(k[s])) * u[r];
              const cplx grad_u_T = cplx(0.0, static_cast<double>(k[r])) * u[s];
              cplx val = 0.25 * (grad_pu + grad_pu_T) + 0.75 * (grad_u + grad_u_T);
              if (r == s) val -= 0.5 * divu;
              m[(r * d + s) * d + c] = val;
            }
          }
        }
      },
      Rank::matrix);
}

TorusField inverse_divergence(const TorusField& v) {
  TorusField out(v.dim(), v.n(), Rank::matrix, v.interval(), std::vector<double>(v.nodes()));
  for (size_t j = 0; j < v.node_count(); ++j) out.set_slice(j, inverse_divergence(v.slice(j)));
  return out;
}

}  // namespace lamecvx
