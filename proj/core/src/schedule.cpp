#include "lamecvx/schedule.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace lamecvx {

void LameParams::validate() const {
  if (!(mu > 0.0)) throw schedule_error("LameParams: mu must be > 0");
  if (!(lambda + mu > 0.0)) throw schedule_error("LameParams: lambda + mu must be > 0");
  if (!std::isfinite(lambda) || !std::isfinite(mu))
    throw schedule_error("LameParams: non-finite constants");
}

double Schedule::gamma_of_beta(double beta) {
  // gamma(beta) = (1/3) ( (1+12 beta)/24 - sqrt((beta - 6 beta^2)/6) )
  const double rad = (beta - 6.0 * beta * beta) / 6.0;
  if (rad < 0.0) throw schedule_error("gamma(beta): beta outside (0, 1/6)");
  return ((1.0 + 12.0 * beta) / 24.0 - std::sqrt(rad)) / 3.0;
}

double Schedule::b_bar(double beta) {
  const double g = gamma_of_beta(beta);
  return (1.0 + 12.0 * beta - 36.0 * g) / (48.0 * beta);
}

int Schedule::n0_of(double b, double beta) {
  const double g = gamma_of_beta(beta);
  const double v = 12.0 * b * (1.0 + 2.0 * g) / (b - 1.0 + 6.0 * beta);
  if (!(v > 0.0) || v > 1e6) throw schedule_error("n0 formula out of range");
  return static_cast<int>(std::ceil(v));
}

void Schedule::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw schedule_error("epsilon must be in (0,1)");
  if (!(M > 1.0)) throw schedule_error("M must be > 1");
  if (!(T > 0.0)) throw schedule_error("T must be > 0");
  if (n0 < 1) throw schedule_error("n0 must be >= 1");
  if (mode == ScheduleMode::paper_formula) {
    if (!(a > 1.0)) throw schedule_error("a must be > 1");
    if (!(b > 1.0)) throw schedule_error("b must be > 1");
    if (!(beta > 0.0 && beta < 1.0 / 60.0))
      throw schedule_error("beta must be in (0, 1/60)");
    const double g = gamma();
    if (!(g < 1.0 / 36.0)) throw schedule_error("gamma(beta) >= 1/36");
    if (!(b > 1.0 + 6.0 * beta))
      throw schedule_error("paper mode requires b > 1 + 6 beta");
  } else {
    if (toy_lambda.size() < 2)
      throw schedule_error("toy mode needs at least two lambda_q entries");
    if (toy_delta.size() != toy_lambda.size())
      throw schedule_error("toy lambda/delta tables must have equal length");
    for (size_t j = 0; j < toy_lambda.size(); ++j) {
      if (toy_lambda[j] < 2) throw schedule_error("toy lambda_q entries must be >= 2");
      if (j > 0 && toy_lambda[j] <= toy_lambda[j - 1])
        throw schedule_error("toy lambda_q table must be strictly increasing");
      if (!(toy_delta[j] > 0.0 && toy_delta[j] < 1.0))
        throw schedule_error("toy delta_q entries must be in (0,1)");
      if (j > 0 && toy_delta[j] >= toy_delta[j - 1])
        throw schedule_error("toy delta_q table must be strictly decreasing "
                             "(non-convergent table)");
    }
  }
}

int Schedule::paper_exponent(int q) const {
  if (q < 0) throw schedule_error("lambda_q: q must be >= 0");
  // ceil(b^q log2 a), evaluated in log space first so we can range-check.
  const double e = std::pow(b, static_cast<double>(q)) * std::log2(a);
  if (!(e > 0.0)) throw schedule_error("lambda_q: degenerate exponent");
  if (6.0 * e > 62.0) {
    std::ostringstream os;
    os << "lambda_q: exponent 6*ceil(b^" << q << " log2 a) = " << 6.0 * std::ceil(e)
       << " overflows 64-bit range (schedule-range error)";
    throw schedule_error(os.str());
  }
  return static_cast<int>(std::ceil(e - 1e-12));
}

int64_t Schedule::lambda_q(int q) const {
  if (mode == ScheduleMode::toy_override) {
    if (q < 0 || static_cast<size_t>(q) >= toy_lambda.size())
      throw schedule_error("lambda_q: q outside toy table");
    return toy_lambda[static_cast<size_t>(q)];
  }
  return int64_t{1} << (6 * paper_exponent(q));
}

double Schedule::log2_lambda_q(int q) const {
  if (mode == ScheduleMode::toy_override)
    return std::log2(static_cast<double>(lambda_q(q)));
  if (q < 0) throw schedule_error("lambda_q: q must be >= 0");
  const double e = std::pow(b, static_cast<double>(q)) * std::log2(a);
  return 6.0 * std::ceil(e - 1e-12);
}

double Schedule::delta_q(int q) const {
  if (mode == ScheduleMode::toy_override) {
    if (q < 0 || static_cast<size_t>(q) >= toy_delta.size())
      throw schedule_error("delta_q: q outside toy table");
    return toy_delta[static_cast<size_t>(q)];
  }
  // delta_q = lambda_q^{-2 beta}, in log space
  return std::exp2(-2.0 * beta * log2_lambda_q(q));
}

double Schedule::lambda_qi(int q, int i) const {
  if (i < 0 || i > 6) throw schedule_error("lambda_qi: i must be in 0..6");
  if (i == 0) return static_cast<double>(lambda_q(q));
  if (i == 6) return static_cast<double>(lambda_q(q + 1));
  const double l0 = std::log2(static_cast<double>(lambda_q(q)));
  const double l1 = std::log2(static_cast<double>(lambda_q(q + 1)));
  const double t = static_cast<double>(i) / 6.0;
  return std::exp2((1.0 - t) * l0 + t * l1);
}

int64_t Schedule::lambda_stage(int q, int i) const {
  const double v = lambda_qi(q, i);
  if (v > 9.0e15) throw schedule_error("lambda_stage: frequency too large for exact integer");
  if (mode == ScheduleMode::paper_formula) {
    // exponent 6 e_q + i (e_{q+1} - e_q) is an integer, so v is a power of two
    const auto r = static_cast<int64_t>(std::llround(v));
    return r;
  }
  const auto r = static_cast<int64_t>(std::llround(v));
  return r < 1 ? 1 : r;
}

double Schedule::c_q(int q) const {
  if (q < 0) throw schedule_error("c_q: q must be >= 0");
  if (mode == ScheduleMode::toy_override) {
    // finite table: exact backward partial sum
    double c = 0.0;
    for (size_t j = toy_delta.size(); j-- > static_cast<size_t>(q) + 1;)
      c += toy_delta[j];
    return c;
  }
  // Find the truncation index: the tail is geometric-dominated since
  // delta_{j+1}/delta_j <= (lambda_{q+2}/lambda_{q+1})^{-2 beta} < 1.
  int jstop = q + 1;
  double term = delta_q(jstop);
  while (true) {
    const double next = delta_q(jstop + 1);
    const double ratio = next / term;
    const double tail_bound = (ratio < 1.0) ? next / (1.0 - ratio)
                                            : std::numeric_limits<double>::infinity();
    if (tail_bound < ctail_tol || next < ctail_tol * 1e-3) break;
    ++jstop;
    term = next;
    if (jstop > q + 200) break;  // delta_q decays super-exponentially; safety stop
  }
  // Backward recursion keeps c_q - c_{q+1} = delta_{q+1} exact.
  double c = 0.0;
  for (int j = jstop; j >= q + 1; --j) c += delta_q(j);
  return c;
}

double Schedule::tau_qi(int q, int i) const {
  if (i < 0 || i > 5) throw schedule_error("tau_qi: i must be in 0..5");
  const double li = lambda_qi(q, i);
  const double li1 = lambda_qi(q, i + 1);
  return std::pow(li * li1, -0.5) * std::pow(delta_q(q), -0.25);
}

double Schedule::tau_qm1(int q) const {
  if (q > 0) return tau_qi(q - 1, 5);
  return tau_init > 0.0 ? tau_init : tau_qi(0, 0);
}

DerivedScales Schedule::derived_scales(int q, int i) const {
  if (i < 0 || i > 5) throw schedule_error("derived_scales: i must be in 0..5");
  const double li = lambda_qi(q, i);
  const double li1 = lambda_qi(q, i + 1);
  const double dq = delta_q(q);
  DerivedScales s;
  // l_{q,i} = (lambda_{q,i}^{1/2} lambda_{q,i+1}^{1/2})^{-1} delta_q^{-1/4}
  s.ell = 1.0 / (std::sqrt(li) * std::sqrt(li1)) * std::pow(dq, -0.25);
  // tau_{q,i}^{-1} = (lambda_{q,i} lambda_{q,i+1})^{1/2} delta_q^{1/4}
  s.tau = tau_qi(q, i);
  // mu_{q,i}^{-1} = 2 ceil((lambda_{q,i} lambda_{q,i+1})^{1/2} delta_q^{1/4} / 2)
  const double half = std::sqrt(li * li1) * std::pow(dq, 0.25) / 2.0;
  if (half > 4.5e18) throw schedule_error("derived_scales: mu_inv overflows");
  s.mu_inv = 2 * static_cast<int64_t>(std::ceil(half - 1e-12));
  if (s.mu_inv < 2) s.mu_inv = 2;
  return s;
}

}  // namespace lamecvx
