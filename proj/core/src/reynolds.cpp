#include "lamecvx/reynolds.hpp"

#include <cmath>

#include "lamecvx/geometry.hpp"

namespace lamecvx {

namespace {

/// scalar field -> diagonal matrix field (s * Id)
CarrierField scalar_diag(const CarrierField& s) {
  if (s.rank() != Rank::scalar) throw field_error("scalar_diag: scalar field required");
  const int d = s.dim();
  CarrierField out(s.dim(), s.n(), Rank::matrix);
  for (const auto& term : s.terms()) {
    CarrierTerm o;
    o.k = term.k;
    o.omega = term.omega;
    o.comp.assign(static_cast<size_t>(d * d), std::vector<cplx>(term.comp[0].size(), cplx(0.0)));
    for (int r = 0; r < d; ++r) o.comp[static_cast<size_t>(r * d + r)] = term.comp[0];
    out.add_term(std::move(o));
  }
  return out;
}

}  // namespace

CarrierField quad_stress(const CarrierField& G) {
  if (G.rank() != Rank::matrix) throw field_error("quad_stress: matrix field required");
  const int d = G.dim();
  CarrierField tr = CarrierField::product(G, G, tr_abT_map(d), Rank::scalar);
  CarrierField out = scalar_diag(tr);
  out.add_scaled(CarrierField::product(G, G, matT_mat_map(d), Rank::matrix), -1.0);
  out.normalize();
  return out;
}

CarrierField bilinear_stress(const CarrierField& Ga, const CarrierField& Gb) {
  const int d = Ga.dim();
  CarrierField tr = CarrierField::product(Ga, Gb, tr_abT_map(d), Rank::scalar);
  tr.add_scaled(CarrierField::product(Gb, Ga, tr_abT_map(d), Rank::scalar), 1.0);
  tr.normalize();
  CarrierField out = scalar_diag(tr);
  out.add_scaled(CarrierField::product(Ga, Gb, matT_mat_map(d), Rank::matrix), -1.0);
  out.add_scaled(CarrierField::product(Gb, Ga, matT_mat_map(d), Rank::matrix), -1.0);
  out.normalize();
  return out;
}

CarrierField laplacian(const CarrierField& u) {
  const int nc = u.ncomp();
  return u.mode_map(
      [nc](const int64_t k[3], cplx* m) {
        double k2 = 0.0;
        for (int a = 0; a < 3; ++a) k2 += static_cast<double>(k[a]) * static_cast<double>(k[a]);
        for (int i = 0; i < nc * nc; ++i) m[i] = 0.0;
        for (int i = 0; i < nc; ++i) m[i * nc + i] = -k2;
      },
      u.rank());
}

CarrierField grad_div(const CarrierField& u) {
  if (u.rank() != Rank::vector) throw field_error("grad_div: vector field required");
  const int d = u.dim();
  return u.mode_map(
      [d](const int64_t k[3], cplx* m) {
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c)
            m[r * d + c] = -static_cast<double>(k[r]) * static_cast<double>(k[c]);
      },
      Rank::vector);
}

CarrierField lhs_slice(const FieldChannels& u, const LameParams& lame) {
  CarrierField out = u.dtt;
  out.add_scaled(laplacian(u.val), -lame.mu);
  out.add_scaled(grad_div(u.val), -(lame.lambda + lame.mu));
  const CarrierField G = gradient(u.val);
  out.add_scaled(matrix_divergence(quad_stress(G)), 1.0);
  out.normalize();
  out.prune(0.0);
  return out;
}

TorusField lhs(const TorusField& u, const LameParams& lame) {
  const TorusField dtt = time_derivative(u, 2);
  TorusField out(u.dim(), u.n(), Rank::vector, u.interval(), std::vector<double>(u.nodes()));
  for (size_t j = 0; j < u.node_count(); ++j) {
    FieldChannels ch;
    ch.val = u.slice(j);
    ch.dt = CarrierField(u.dim(), u.n(), Rank::vector);
    ch.dtt = dtt.slice(j);
    out.set_slice(j, lhs_slice(ch, lame));
  }
  return out;
}

namespace {

double simpson_integral(const std::vector<double>& nodes, const std::vector<double>& vals) {
  const size_t m = nodes.size();
  if (m < 3) throw field_error("simpson_integral: need >= 3 nodes");
  const double h = nodes[1] - nodes[0];
  double acc = 0.0;
  size_t j = 0;
  while (j + 2 < m) {
    acc += h / 3.0 * (vals[j] + 4.0 * vals[j + 1] + vals[j + 2]);
    j += 2;
  }
  if (j + 1 < m) acc += 0.5 * h * (vals[j] + vals[j + 1]);
  return acc;
}

double spatial_integral_scalar(const CarrierField& f, double t) {
  const double vol = std::pow(2.0 * 3.14159265358979323846, f.dim());
  return f.mean(t)[0].real() * vol;
}

CarrierField divergence_vec(const CarrierField& u) {
  const int d = u.dim();
  return u.mode_map(
      [d](const int64_t k[3], cplx* m) {
        for (int c = 0; c < d; ++c) m[c] = cplx(0.0, static_cast<double>(k[c]));
      },
      Rank::scalar);
}

}  // namespace

double weak_residual(const TorusField& u, const TorusField& u_dt,
                     const TorusField& eta, const TorusField& eta_dt,
                     const LameParams& lame, const CarrierField& u1) {
  const size_t m = u.node_count();
  if (eta.node_count() != m) throw field_error("weak_residual: node mismatch");
  std::vector<double> vals(m, 0.0);
  const int d = u.dim();
  for (size_t j = 0; j < m; ++j) {
    const double t = u.nodes()[j];
    double v = 0.0;
    v -= spatial_integral_scalar(
        CarrierField::product(u_dt.slice(j), eta_dt.slice(j), dot_map(d), Rank::scalar), t);
    const CarrierField Gu = gradient(u.slice(j));
    const CarrierField Ge = gradient(eta.slice(j));
    v += lame.mu *
         spatial_integral_scalar(CarrierField::product(Gu, Ge, tr_abT_map(d), Rank::scalar), t);
    v += (lame.lambda + lame.mu) *
         spatial_integral_scalar(
             CarrierField::product(divergence_vec(u.slice(j)), divergence_vec(eta.slice(j)),
                                   scalar_times(Rank::scalar, d), Rank::scalar),
             t);
    v -= spatial_integral_scalar(
        CarrierField::product(quad_stress(Gu), Ge, tr_abT_map(d), Rank::scalar), t);
    vals[j] = v;
  }
  double total = simpson_integral(std::vector<double>(u.nodes()), vals);
  total -= spatial_integral_scalar(
      CarrierField::product(u1, eta.slice(0), dot_map(d), Rank::scalar), u.nodes()[0]);
  return total;
}

double weak_pairing(const TorusField& R, double c, const TorusField& eta) {
  const size_t m = R.node_count();
  std::vector<double> vals(m, 0.0);
  const int d = R.dim();
  for (size_t j = 0; j < m; ++j) {
    const double t = R.nodes()[j];
    CarrierField shifted = R.slice(j);
    CarrierField cid = CarrierField::from_samples(d, R.n(), Rank::matrix,
                                                  [c, d](const double*, int comp) {
                                                    return cplx((comp % (d + 1) == 0) ? c : 0.0, 0.0);
                                                  });
    shifted.add_scaled(cid, -1.0);
    shifted.normalize();
    const CarrierField Ge = gradient(eta.slice(j));
    vals[j] = -spatial_integral_scalar(
        CarrierField::product(shifted, Ge, tr_abT_map(d), Rank::scalar), t);
  }
  return simpson_integral(std::vector<double>(R.nodes()), vals);
}

CarrierField oscillation_subtraction(const StageSlice& s, int channel) {
  const int n = s.n;
  const size_t pts = grid_points(3, n);
  const double f2 = 2.0;  // |f|^2 for every direction in the table
  std::vector<cplx> scalar(pts, cplx(0.0));
  for (const auto& cd : s.cls) {
    if (!cd.active) continue;
    for (int c = 0; c < 3; ++c) {
      const auto& W0 = cd.W[0][static_cast<size_t>(c)];
      if (channel == 0) {
        for (size_t p = 0; p < pts; ++p) scalar[p] += W0[p] * std::conj(W0[p]);
      } else if (channel == 1) {
        const auto& W1 = cd.W[1][static_cast<size_t>(c)];
        for (size_t p = 0; p < pts; ++p)
          scalar[p] += W1[p] * std::conj(W0[p]) + W0[p] * std::conj(W1[p]);
      } else {
        const auto& W1 = cd.W[1][static_cast<size_t>(c)];
        const auto& W2 = cd.W[2][static_cast<size_t>(c)];
        for (size_t p = 0; p < pts; ++p)
          scalar[p] += W2[p] * std::conj(W0[p]) + 2.0 * W1[p] * std::conj(W1[p]) +
                       W0[p] * std::conj(W2[p]);
      }
    }
  }
  const Vec3 fv{{static_cast<double>(s.geom.f[0]), static_cast<double>(s.geom.f[1]),
                 static_cast<double>(s.geom.f[2])}};
  CarrierField out(3, n, Rank::matrix);
  CarrierTerm term;
  term.comp.assign(9, std::vector<cplx>(pts, cplx(0.0)));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const double proj = (r == c ? 1.0 : 0.0) - fv[r] * fv[c] / f2;
      if (proj == 0.0) continue;
      auto& dst = term.comp[static_cast<size_t>(3 * r + c)];
      for (size_t p = 0; p < pts; ++p) dst[p] = 2.0 * f2 * proj * scalar[p];
    }
  out.add_term(std::move(term));
  return out;
}

CarrierField d_sq_proj(const WeightField& w, int direction, int n) {
  const Vec3 fv = DirectionTable::f_vec(direction);
  const double f2 = dot(fv, fv);
  const size_t pts = grid_points(3, n);
  CarrierField out(3, n, Rank::matrix);
  CarrierTerm term;
  term.comp.assign(9, std::vector<cplx>(pts, cplx(0.0)));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const double proj = (r == c ? 1.0 : 0.0) - fv[r] * fv[c] / f2;
      if (proj == 0.0) continue;
      auto& dst = term.comp[static_cast<size_t>(3 * r + c)];
      if (w.is_constant()) {
        const double v = w.constant * w.constant * proj;
        for (size_t p = 0; p < pts; ++p) dst[p] = v;
      } else {
        for (size_t p = 0; p < pts; ++p) dst[p] = w.d[p] * w.d[p] * proj;
      }
    }
  out.add_term(std::move(term));
  return out;
}

CarrierField compute_RM(const CarrierField& grad_diff, const CarrierField& grad_pert) {
  return bilinear_stress(grad_diff, grad_pert);
}

OscillationError compute_RO(const StageSlice& s) {
  OscillationError out;
  const CarrierField wp = s.w_p(0);
  const CarrierField wc = s.w_c(0);
  out.argument = quad_stress(wp);
  out.argument.add_scaled(oscillation_subtraction(s, 0), -1.0);
  out.argument.normalize();
  out.O1 = inverse_divergence(matrix_divergence(out.argument));
  out.O2 = bilinear_stress(wp, wc);
  out.O2.add_scaled(quad_stress(wc), 1.0);
  out.O2.normalize();
  return out;
}

LinearError compute_RL(const StagePerturbation& stage, const StageSlice& s,
                       const CarrierField& u_ell_grad, const LameParams& lame) {
  LinearError out;
  const CarrierField Gu = s.grad_u(0);
  const std::array<int, 3> f = s.geom.f;

  // frozen-coefficient subtraction: sum_I (gamma_I/(lambda m)) Bmat(G_I, grad(w_I + conj))
  // with grad w_I = tf (x) (i lambda m f) e^{i...}, i.e. per-cell constant
  // tensors Bmat(G_I, i tf (x) f) through the gamma pipeline.
  const auto classes = stage.evaluate_custom(
      s.t, 9, [&f](const BlockCell& cell, std::vector<cplx>& outt) {
        const Vec3 tf = cell.blk.tilde_f();
        cplx W[3][3];
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c)
            W[r][c] = cplx(0.0, tf[r] * static_cast<double>(f[static_cast<size_t>(c)]));
        cplx trv = 0.0;
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) trv += 2.0 * cell.grad_u(r, c) * W[r][c];
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) {
            cplx v = (r == c) ? trv : cplx(0.0);
            for (int a = 0; a < 3; ++a)
              v -= cell.grad_u(a, r) * W[a][c] + W[a][r] * cell.grad_u(a, c);
            outt[static_cast<size_t>(3 * r + c)] = v;
          }
      });
  CarrierField T2(3, s.n, Rank::matrix);
  const size_t pts = grid_points(3, s.n);
  for (const auto& cd : classes) {
    if (!cd.active) continue;
    CarrierTerm plus;
    plus.k = cd.k;
    plus.omega = cd.Omega;
    plus.comp.assign(9, std::vector<cplx>(pts));
    for (int c = 0; c < 9; ++c) plus.comp[static_cast<size_t>(c)] = cd.W[0][static_cast<size_t>(c)];
    CarrierTerm minus;
    minus.k = {-plus.k[0], -plus.k[1], -plus.k[2]};
    minus.omega = -plus.omega;
    minus.comp.assign(9, std::vector<cplx>(pts));
    for (int c = 0; c < 9; ++c) {
      auto& dst = minus.comp[static_cast<size_t>(c)];
      const auto& src = plus.comp[static_cast<size_t>(c)];
      dst.resize(src.size());
      for (size_t p = 0; p < src.size(); ++p) dst[p] = std::conj(src[p]);
    }
    T2.add_term(std::move(plus));
    T2.add_term(std::move(minus));
  }
  T2.normalize();

  out.L2 = bilinear_stress(u_ell_grad, Gu);
  out.L2.add_scaled(T2, -1.0);
  out.L2.normalize();

  const CarrierField u_dtt = s.u_total(2);
  const CarrierField u_val = s.u_total(0);
  CarrierField V = u_dtt;
  V.add_scaled(laplacian(u_val), -lame.mu);
  V.add_scaled(grad_div(u_val), -(lame.lambda + lame.mu));
  V.add_scaled(matrix_divergence(bilinear_stress(u_ell_grad, Gu)), 1.0);
  V.add_scaled(matrix_divergence(out.L2), -1.0);
  V.normalize();
  V.prune(0.0);
  out.V = V;
  out.L1 = inverse_divergence(V);
  return out;
}

}  // namespace lamecvx
