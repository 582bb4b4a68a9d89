#include "lamecvx/field.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <sstream>

namespace lamecvx {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool carrier_less(const CarrierTerm& a, const CarrierTerm& b) {
  if (a.k != b.k) return a.k < b.k;
  return a.omega < b.omega - 1e-12 * (1.0 + std::abs(a.omega) + std::abs(b.omega));
}

bool carrier_equal(const CarrierTerm& a, const CarrierTerm& b) {
  return a.k == b.k &&
         std::abs(a.omega - b.omega) <= 1e-9 * (1.0 + std::abs(a.omega) + std::abs(b.omega));
}

// e^{i k x_j} on the grid via exact integer reduction:
//   x_j = -pi + 2 pi j / n  =>  e^{i k x_j} = (-1)^k e^{2 pi i (k j mod n)/n}.
void axis_phase(int64_t k, int n, std::vector<cplx>& out) {
  out.resize(static_cast<size_t>(n));
  const double sign = (k % 2 == 0) ? 1.0 : -1.0;
  const int64_t km = ((k % n) + n) % n;
  for (int j = 0; j < n; ++j) {
    const int64_t m = (km * j) % n;
    const double ang = 2.0 * kPi * static_cast<double>(m) / static_cast<double>(n);
    out[static_cast<size_t>(j)] = sign * cplx(std::cos(ang), std::sin(ang));
  }
}

constexpr size_t kMaxTerms = 250000;

}  // namespace

int rank_components(Rank rank, int dim) {
  switch (rank) {
    case Rank::scalar: return 1;
    case Rank::vector: return dim;
    case Rank::matrix: return dim * dim;
  }
  return 1;
}

CarrierField::CarrierField(int dim, int n, Rank rank)
    : dim_(dim), n_(n), rank_(rank) {
  if (dim != 2 && dim != 3) throw field_error("CarrierField: dim must be 2 or 3");
  if (n < 4) throw field_error("CarrierField: n must be >= 4");
}

CarrierField CarrierField::from_samples(
    int dim, int n, Rank rank,
    const std::function<cplx(const double x[3], int comp)>& f) {
  CarrierField out(dim, n, rank);
  CarrierTerm term;
  const size_t pts = out.points();
  const int nc = out.ncomp();
  term.comp.assign(static_cast<size_t>(nc), std::vector<cplx>(pts));
  int idx[3];
  for (size_t p = 0; p < pts; ++p) {
    unflatten(p, dim, n, idx);
    double x[3] = {grid_coord(idx[0], n), grid_coord(idx[1], n),
                   dim == 3 ? grid_coord(idx[2], n) : 0.0};
    for (int c = 0; c < nc; ++c) term.comp[static_cast<size_t>(c)][p] = f(x, c);
  }
  out.add_term(std::move(term));
  return out;
}

void CarrierField::add_term(CarrierTerm term) {
  if (static_cast<int>(term.comp.size()) != ncomp())
    throw field_error("CarrierField::add_term: component count mismatch");
  for (const auto& c : term.comp)
    if (c.size() != points()) throw field_error("CarrierField::add_term: bad envelope size");
  terms_.push_back(std::move(term));
}

void CarrierField::check_compatible(const CarrierField& other) const {
  if (dim_ != other.dim_ || n_ != other.n_)
    throw field_error("CarrierField: grid mismatch");
}

void CarrierField::add_scaled(const CarrierField& other, cplx s) {
  check_compatible(other);
  if (rank_ != other.rank_) throw field_error("CarrierField::add_scaled: rank mismatch");
  for (const auto& t : other.terms_) {
    auto it = std::find_if(terms_.begin(), terms_.end(),
                           [&](const CarrierTerm& mine) { return carrier_equal(mine, t); });
    if (it == terms_.end()) {
      CarrierTerm copy = t;
      for (auto& c : copy.comp)
        for (auto& v : c) v *= s;
      terms_.push_back(std::move(copy));
    } else {
      for (int c = 0; c < ncomp(); ++c) {
        auto& dst = it->comp[static_cast<size_t>(c)];
        const auto& src = t.comp[static_cast<size_t>(c)];
        for (size_t p = 0; p < dst.size(); ++p) dst[p] += s * src[p];
      }
    }
  }
  if (terms_.size() > kMaxTerms) throw field_error("CarrierField: carrier-term budget exceeded");
}

CarrierField CarrierField::scaled(cplx s) const {
  CarrierField out = *this;
  for (auto& t : out.terms_)
    for (auto& c : t.comp)
      for (auto& v : c) v *= s;
  return out;
}

CarrierField CarrierField::conjugated() const {
  CarrierField out(dim_, n_, rank_);
  for (const auto& t : terms_) {
    CarrierTerm ct;
    ct.k = {-t.k[0], -t.k[1], -t.k[2]};
    ct.omega = -t.omega;
    ct.comp.reserve(t.comp.size());
    for (const auto& c : t.comp) {
      std::vector<cplx> cc(c.size());
      for (size_t p = 0; p < c.size(); ++p) cc[p] = std::conj(c[p]);
      ct.comp.push_back(std::move(cc));
    }
    out.terms_.push_back(std::move(ct));
  }
  out.normalize();
  return out;
}

void CarrierField::prune(double tol) {
  terms_.erase(std::remove_if(terms_.begin(), terms_.end(),
                              [&](const CarrierTerm& t) {
                                double m = 0.0;
                                for (const auto& c : t.comp)
                                  for (const auto& v : c) m = std::max(m, std::abs(v));
                                return m <= tol;
                              }),
               terms_.end());
}

void CarrierField::normalize() {
  std::sort(terms_.begin(), terms_.end(), carrier_less);
  std::vector<CarrierTerm> merged;
  for (auto& t : terms_) {
    if (!merged.empty() && carrier_equal(merged.back(), t)) {
      auto& dst = merged.back();
      for (size_t c = 0; c < dst.comp.size(); ++c)
        for (size_t p = 0; p < dst.comp[c].size(); ++p) dst.comp[c][p] += t.comp[c][p];
    } else {
      merged.push_back(std::move(t));
    }
  }
  terms_ = std::move(merged);
}

CarrierField CarrierField::product(const CarrierField& a, const CarrierField& b,
                                   const BilinearMap& map, Rank out_rank) {
  a.check_compatible(b);
  CarrierField out(a.dim_, a.n_, out_rank);
  if (map.ncomp_out != out.ncomp())
    throw field_error("CarrierField::product: map/out rank mismatch");
  const size_t pts = a.points();
  for (const auto& ta : a.terms_) {
    for (const auto& tb : b.terms_) {
      CarrierTerm t;
      t.k = {ta.k[0] + tb.k[0], ta.k[1] + tb.k[1], ta.k[2] + tb.k[2]};
      t.omega = ta.omega + tb.omega;
      t.comp.assign(static_cast<size_t>(map.ncomp_out), std::vector<cplx>(pts, cplx(0.0)));
      for (int c = 0; c < map.ncomp_out; ++c) {
        auto& dst = t.comp[static_cast<size_t>(c)];
        for (const auto& [ia, ib, w] : map.entries[static_cast<size_t>(c)]) {
          const auto& ea = ta.comp[static_cast<size_t>(ia)];
          const auto& eb = tb.comp[static_cast<size_t>(ib)];
          for (size_t p = 0; p < pts; ++p) dst[p] += w * ea[p] * eb[p];
        }
      }
      out.terms_.push_back(std::move(t));
      if (out.terms_.size() > kMaxTerms)
        throw field_error("CarrierField::product: carrier-term budget exceeded");
    }
  }
  out.normalize();
  return out;
}

CarrierField CarrierField::mode_map(const ModeMap& map, Rank out_rank) const {
  CarrierField out(dim_, n_, out_rank);
  const int nin = ncomp();
  const int nout = out.ncomp();
  const size_t pts = points();
  std::vector<cplx> matrix(static_cast<size_t>(nin * nout));
  for (const auto& t : terms_) {
    // envelope spectra
    std::vector<std::vector<cplx>> spec = t.comp;
    for (auto& c : spec) spectral_from_physical(dim_, n_, c.data());
    CarrierTerm o;
    o.k = t.k;
    o.omega = t.omega;
    o.comp.assign(static_cast<size_t>(nout), std::vector<cplx>(pts, cplx(0.0)));
    int idx[3];
    for (size_t p = 0; p < pts; ++p) {
      unflatten(p, dim_, n_, idx);
      int64_t kk[3] = {env_freq(idx[0], n_) + t.k[0], env_freq(idx[1], n_) + t.k[1],
                       dim_ == 3 ? env_freq(idx[2], n_) + t.k[2] : 0};
      map(kk, matrix.data());
      for (int r = 0; r < nout; ++r) {
        cplx acc = 0.0;
        for (int c = 0; c < nin; ++c)
          acc += matrix[static_cast<size_t>(r * nin + c)] * spec[static_cast<size_t>(c)][p];
        o.comp[static_cast<size_t>(r)][p] = acc;
      }
    }
    for (auto& c : o.comp) physical_from_spectral(dim_, n_, c.data());
    out.terms_.push_back(std::move(o));
  }
  return out;
}

CarrierField CarrierField::derivative(const std::array<int, 3>& alpha) const {
  CarrierField out(dim_, n_, rank_);
  const size_t pts = points();
  for (const auto& t : terms_) {
    std::vector<std::vector<cplx>> spec = t.comp;
    for (auto& c : spec) spectral_from_physical(dim_, n_, c.data());
    CarrierTerm o;
    o.k = t.k;
    o.omega = t.omega;
    o.comp.assign(t.comp.size(), std::vector<cplx>(pts));
    int idx[3];
    for (size_t p = 0; p < pts; ++p) {
      unflatten(p, dim_, n_, idx);
      cplx mult = 1.0;
      for (int a = 0; a < dim_; ++a) {
        const int64_t ka = env_freq(idx[a], n_) + t.k[a];
        for (int r = 0; r < alpha[static_cast<size_t>(a)]; ++r)
          mult *= cplx(0.0, static_cast<double>(ka));
      }
      for (size_t c = 0; c < spec.size(); ++c) o.comp[c][p] = mult * spec[c][p];
    }
    for (auto& c : o.comp) physical_from_spectral(dim_, n_, c.data());
    out.terms_.push_back(std::move(o));
  }
  return out;
}

std::vector<std::vector<cplx>> CarrierField::collapse(double t) const {
  const size_t pts = points();
  const int nc = ncomp();
  std::vector<std::vector<cplx>> out(static_cast<size_t>(nc), std::vector<cplx>(pts, cplx(0.0)));
  std::vector<cplx> ph0, ph1, ph2;
  for (const auto& term : terms_) {
    axis_phase(term.k[0], n_, ph0);
    axis_phase(term.k[1], n_, ph1);
    if (dim_ == 3) axis_phase(term.k[2], n_, ph2);
    const cplx tphase = std::polar(1.0, -term.omega * t);
    int idx[3];
    for (size_t p = 0; p < pts; ++p) {
      unflatten(p, dim_, n_, idx);
      cplx ph = ph0[static_cast<size_t>(idx[0])] * ph1[static_cast<size_t>(idx[1])] * tphase;
      if (dim_ == 3) ph *= ph2[static_cast<size_t>(idx[2])];
      for (int c = 0; c < nc; ++c)
        out[static_cast<size_t>(c)][p] += ph * term.comp[static_cast<size_t>(c)][p];
    }
  }
  return out;
}

cplx CarrierField::env_mode(const CarrierTerm& term, int dim, int n,
                            const std::array<int64_t, 3>& mode, int component) {
  // representability
  for (int a = 0; a < dim; ++a)
    if (!env_mode_in_band(mode[static_cast<size_t>(a)], n)) return 0.0;
  // c(m) = (1/n^d) sum_x env(x) e^{-i m.x}
  std::vector<cplx> ph0, ph1, ph2;
  axis_phase(-mode[0], n, ph0);
  axis_phase(-mode[1], n, ph1);
  if (dim == 3) axis_phase(-mode[2], n, ph2);
  const auto& env = term.comp[static_cast<size_t>(component)];
  cplx acc = 0.0;
  int idx[3];
  const size_t pts = grid_points(dim, n);
  for (size_t p = 0; p < pts; ++p) {
    unflatten(p, dim, n, idx);
    cplx ph = ph0[static_cast<size_t>(idx[0])] * ph1[static_cast<size_t>(idx[1])];
    if (dim == 3) ph *= ph2[static_cast<size_t>(idx[2])];
    acc += env[p] * ph;
  }
  return acc / static_cast<double>(pts);
}

std::vector<cplx> CarrierField::mean(double t) const {
  const int nc = ncomp();
  std::vector<cplx> out(static_cast<size_t>(nc), cplx(0.0));
  for (const auto& term : terms_) {
    const std::array<int64_t, 3> neg = {-term.k[0], -term.k[1], -term.k[2]};
    const cplx tphase = std::polar(1.0, -term.omega * t);
    for (int c = 0; c < nc; ++c)
      out[static_cast<size_t>(c)] += tphase * env_mode(term, dim_, n_, neg, c);
  }
  return out;
}

double CarrierField::sup_norm(double t) const {
  const auto grid = collapse(t);
  double m = 0.0;
  for (const auto& c : grid)
    for (const auto& v : c) m = std::max(m, std::abs(v));
  return m;
}

double CarrierField::reality_defect(double t) const {
  const auto grid = collapse(t);
  double m = 0.0;
  for (const auto& c : grid)
    for (const auto& v : c) m = std::max(m, std::abs(v.imag()));
  return m;
}

// ---- TorusField -------------------------------------------------------------

TorusField::TorusField(int dim, int n, Rank rank, TimeInterval interval,
                       std::vector<double> nodes)
    : dim_(dim), n_(n), rank_(rank), interval_(interval), nodes_(std::move(nodes)) {
  interval_.validate();
  if (nodes_.empty()) throw field_error("TorusField: needs at least one time node");
  if (!std::is_sorted(nodes_.begin(), nodes_.end()))
    throw field_error("TorusField: time nodes must be sorted");
  for (double t : nodes_)
    if (!interval_.contains(t, 1e-12))
      throw field_error("TorusField: node outside interval");
  slices_.assign(nodes_.size(), CarrierField(dim, n, rank));
}

TorusField TorusField::from_samples(
    int dim, int n, Rank rank, TimeInterval interval, std::vector<double> nodes,
    const std::function<cplx(double t, const double x[3], int comp)>& f) {
  TorusField out(dim, n, rank, interval, std::move(nodes));
  for (size_t j = 0; j < out.nodes_.size(); ++j) {
    const double t = out.nodes_[j];
    out.slices_[j] = CarrierField::from_samples(
        dim, n, rank, [&](const double x[3], int c) { return f(t, x, c); });
  }
  return out;
}

void TorusField::set_slice(size_t j, CarrierField f) {
  if (f.dim() != dim_ || f.n() != n_ || f.rank() != rank_)
    throw field_error("TorusField::set_slice: shape mismatch");
  slices_.at(j) = std::move(f);
}

double TorusField::uniform_dt() const {
  if (nodes_.size() < 2) throw field_error("TorusField: need >= 2 nodes for dt");
  const double h = nodes_[1] - nodes_[0];
  for (size_t j = 1; j + 1 < nodes_.size(); ++j)
    if (std::abs((nodes_[j + 1] - nodes_[j]) - h) > 1e-10 * std::max(1.0, std::abs(h)))
      throw field_error("TorusField: non-uniform time nodes");
  return h;
}

bool TorusField::matrix_symmetric(double tol) const {
  if (rank_ != Rank::matrix) return true;
  const int d = dim_;
  for (size_t j = 0; j < slices_.size(); ++j) {
    const auto g = slices_[j].collapse(nodes_[j]);
    for (int r = 0; r < d; ++r)
      for (int c = r + 1; c < d; ++c) {
        const auto& a = g[static_cast<size_t>(r * d + c)];
        const auto& b = g[static_cast<size_t>(c * d + r)];
        for (size_t p = 0; p < a.size(); ++p)
          if (std::abs(a[p] - b[p]) > tol) return false;
      }
  }
  return true;
}

double TorusField::max_reality_defect() const {
  double m = 0.0;
  for (size_t j = 0; j < slices_.size(); ++j)
    m = std::max(m, slices_[j].reality_defect(nodes_[j]));
  return m;
}

// ---- operations -------------------------------------------------------------

CarrierField spectral_derivative(const CarrierField& f, const std::array<int, 3>& alpha,
                                 int max_order) {
  const int total = alpha[0] + alpha[1] + alpha[2];
  if (total > max_order) {
    std::ostringstream os;
    os << "spectral_derivative: order " << total << " exceeds max " << max_order;
    throw field_error(os.str());
  }
  return f.derivative(alpha);
}

TorusField spectral_derivative(const TorusField& f, const std::array<int, 3>& alpha,
                               int max_order) {
  TorusField out(f.dim(), f.n(), f.rank(), f.interval(),
                 std::vector<double>(f.nodes()));
  for (size_t j = 0; j < f.node_count(); ++j)
    out.set_slice(j, spectral_derivative(f.slice(j), alpha, max_order));
  return out;
}

CarrierField matrix_divergence(const CarrierField& a) {
  if (a.rank() != Rank::matrix) throw field_error("matrix_divergence: matrix field required");
  const int d = a.dim();
  return a.mode_map(
      [d](const int64_t k[3], cplx* m) {
        // out_p = sum_n i k_n A_{n p};  components row-major (n, p) -> n*d+p
        for (int p = 0; p < d; ++p)
          for (int c = 0; c < d * d; ++c) m[p * d * d + c] = 0.0;
        for (int p = 0; p < d; ++p)
          for (int nidx = 0; nidx < d; ++nidx)
            m[p * d * d + (nidx * d + p)] = cplx(0.0, static_cast<double>(k[nidx]));
      },
      Rank::vector);
}

TorusField matrix_divergence(const TorusField& a) {
  TorusField out(a.dim(), a.n(), Rank::vector, a.interval(), std::vector<double>(a.nodes()));
  for (size_t j = 0; j < a.node_count(); ++j) out.set_slice(j, matrix_divergence(a.slice(j)));
  return out;
}

CarrierField gradient(const CarrierField& u) {
  if (u.rank() != Rank::vector) throw field_error("gradient: vector field required");
  const int d = u.dim();
  return u.mode_map(
      [d](const int64_t k[3], cplx* m) {
        // (grad u)_{m n} = d_n u_m : out comp (mm, nn) -> i k_nn * u_mm
        for (int r = 0; r < d * d; ++r)
          for (int c = 0; c < d; ++c) m[r * d + c] = 0.0;
        for (int mm = 0; mm < d; ++mm)
          for (int nn = 0; nn < d; ++nn)
            m[(mm * d + nn) * d + mm] = cplx(0.0, static_cast<double>(k[nn]));
      },
      Rank::matrix);
}

std::vector<double> fornberg_weights(int m, const std::vector<double>& xs, double x0) {
  // Fornberg (1988) recursive finite-difference weights.
  const int nn = static_cast<int>(xs.size()) - 1;
  std::vector<std::vector<double>> c(static_cast<size_t>(nn + 1),
                                     std::vector<double>(static_cast<size_t>(m + 1), 0.0));
  double c1 = 1.0;
  double c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= nn; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[static_cast<size_t>(i)] - x0;
    for (int j = 0; j <= i - 1; ++j) {
      const double c3 = xs[static_cast<size_t>(i)] - xs[static_cast<size_t>(j)];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[static_cast<size_t>(i)][static_cast<size_t>(k)] =
              c1 * (k * c[static_cast<size_t>(i - 1)][static_cast<size_t>(k - 1)] -
                    c5 * c[static_cast<size_t>(i - 1)][static_cast<size_t>(k)]) / c2;
        c[static_cast<size_t>(i)][0] = -c1 * c5 * c[static_cast<size_t>(i - 1)][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[static_cast<size_t>(j)][static_cast<size_t>(k)] =
            (c4 * c[static_cast<size_t>(j)][static_cast<size_t>(k)] -
             k * c[static_cast<size_t>(j)][static_cast<size_t>(k - 1)]) / c3;
      c[static_cast<size_t>(j)][0] = c4 * c[static_cast<size_t>(j)][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) w[i] = c[i][static_cast<size_t>(m)];
  return w;
}

TorusField time_derivative(const TorusField& f, int order, int stencil_order) {
  if (order != 1 && order != 2) throw field_error("time_derivative: order must be 1 or 2");
  const size_t need = static_cast<size_t>(order * 4 + 1);
  if (f.node_count() < need)
    throw field_error("time_derivative: too few time nodes");
  f.uniform_dt();
  const int width = stencil_order + 1;
  const int nn = static_cast<int>(f.node_count());

  TorusField out(f.dim(), f.n(), f.rank(), f.interval(), std::vector<double>(f.nodes()));
  for (int j = 0; j < nn; ++j) {
    int lo = j - width / 2;
    if (lo < 0) lo = 0;
    if (lo + width > nn) lo = nn - width;
    if (lo < 0) { lo = 0; }
    const int w = std::min(width, nn);
    std::vector<double> xs(static_cast<size_t>(w));
    for (int s = 0; s < w; ++s) xs[static_cast<size_t>(s)] = f.nodes()[static_cast<size_t>(lo + s)];

    // per-carrier: d_t^m (env e^{-i w t}) = sum_r binom(m,r) (d_t^r env)(-i w)^{m-r} e^{-i w t}
    CarrierField acc(f.dim(), f.n(), f.rank());
    for (int r = 0; r <= order; ++r) {
      const auto weights = fornberg_weights(r, xs, f.nodes()[static_cast<size_t>(j)]);
      CarrierField env_r(f.dim(), f.n(), f.rank());
      for (int s = 0; s < w; ++s)
        env_r.add_scaled(f.slice(static_cast<size_t>(lo + s)), weights[static_cast<size_t>(s)]);
      const double binom = (order == 2 && r == 1) ? 2.0 : 1.0;
      // multiply each term by binom * (-i omega)^{order-r}
      for (auto& term : env_r.terms()) {
        cplx factor = binom;
        for (int e = 0; e < order - r; ++e) factor *= cplx(0.0, -term.omega);
        for (auto& c : term.comp)
          for (auto& v : c) v *= factor;
      }
      acc.add_scaled(env_r, 1.0);
    }
    acc.normalize();
    out.set_slice(static_cast<size_t>(j), std::move(acc));
  }
  return out;
}

BilinearMap scalar_times(Rank rank, int dim) {
  BilinearMap m;
  m.ncomp_out = rank_components(rank, dim);
  m.entries.resize(static_cast<size_t>(m.ncomp_out));
  for (int c = 0; c < m.ncomp_out; ++c) m.entries[static_cast<size_t>(c)].push_back({0, c, 1.0});
  return m;
}

BilinearMap dot_map(int dim) {
  BilinearMap m;
  m.ncomp_out = 1;
  m.entries.resize(1);
  for (int i = 0; i < dim; ++i) m.entries[0].push_back({i, i, 1.0});
  return m;
}

BilinearMap matT_mat_map(int dim) {
  BilinearMap m;
  m.ncomp_out = dim * dim;
  m.entries.resize(static_cast<size_t>(m.ncomp_out));
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int c = 0; c < dim; ++c)
        m.entries[static_cast<size_t>(i * dim + j)].push_back({c * dim + i, c * dim + j, 1.0});
  return m;
}

BilinearMap tr_abT_map(int dim) {
  BilinearMap m;
  m.ncomp_out = 1;
  m.entries.resize(1);
  for (int i = 0; i < dim * dim; ++i) m.entries[0].push_back({i, i, 1.0});
  return m;
}


FieldChannels stencil_channels(const std::function<CarrierField(double)>& field,
                               double t0, double h, int stencil_order) {
  const int width = stencil_order + 1;
  std::vector<double> xs(static_cast<size_t>(width));
  std::vector<CarrierField> slices;
  slices.reserve(static_cast<size_t>(width));
  for (int s = 0; s < width; ++s) {
    xs[static_cast<size_t>(s)] = t0 + h * (s - width / 2);
    slices.push_back(field(xs[static_cast<size_t>(s)]));
  }
  FieldChannels out;
  out.val = slices[static_cast<size_t>(width / 2)];
  for (int order = 1; order <= 2; ++order) {
    const auto weights = fornberg_weights(order, xs, t0);
    CarrierField acc(out.val.dim(), out.val.n(), out.val.rank());
    for (int r = 0; r <= order; ++r) {
      const auto wr = fornberg_weights(r, xs, t0);
      CarrierField env_r(out.val.dim(), out.val.n(), out.val.rank());
      for (int s = 0; s < width; ++s) env_r.add_scaled(slices[static_cast<size_t>(s)], wr[static_cast<size_t>(s)]);
      const double binom = (order == 2 && r == 1) ? 2.0 : 1.0;
      for (auto& term : env_r.terms()) {
        cplx factor = binom;
        for (int e = 0; e < order - r; ++e) factor *= cplx(0.0, -term.omega);
        for (auto& c : term.comp)
          for (auto& v : c) v *= factor;
      }
      acc.add_scaled(env_r, 1.0);
    }
    acc.normalize();
    (void)weights;
    if (order == 1)
      out.dt = std::move(acc);
    else
      out.dtt = std::move(acc);
  }
  return out;
}

// ---- channel algebra ----------------------------------------------------------

FieldChannels channels_product(const FieldChannels& a, const FieldChannels& b,
                               const BilinearMap& map, Rank out_rank) {
  FieldChannels out;
  out.val = CarrierField::product(a.val, b.val, map, out_rank);
  out.dt = CarrierField::product(a.dt, b.val, map, out_rank);
  out.dt.add_scaled(CarrierField::product(a.val, b.dt, map, out_rank), 1.0);
  out.dt.normalize();
  out.dtt = CarrierField::product(a.dtt, b.val, map, out_rank);
  out.dtt.add_scaled(CarrierField::product(a.dt, b.dt, map, out_rank), 2.0);
  out.dtt.add_scaled(CarrierField::product(a.val, b.dtt, map, out_rank), 1.0);
  out.dtt.normalize();
  return out;
}

FieldChannels channels_add(const FieldChannels& a, const FieldChannels& b, cplx sb) {
  FieldChannels out = a;
  out.val.add_scaled(b.val, sb);
  out.dt.add_scaled(b.dt, sb);
  out.dtt.add_scaled(b.dtt, sb);
  out.val.normalize();
  out.dt.normalize();
  out.dtt.normalize();
  return out;
}

FieldChannels channels_apply(const FieldChannels& a,
                             const std::function<CarrierField(const CarrierField&)>& op) {
  FieldChannels out;
  out.val = op(a.val);
  out.dt = op(a.dt);
  out.dtt = op(a.dtt);
  return out;
}

}  // namespace lamecvx
