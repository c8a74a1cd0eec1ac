#include "fedsim/schedules.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsim {

const char* to_string(ScheduleSetting s) {
  switch (s) {
    case ScheduleSetting::pr_strongly_convex: return "pr_strongly_convex";
    case ScheduleSetting::pr_nonconvex: return "pr_nonconvex";
    case ScheduleSetting::pi_strongly_convex: return "pi_strongly_convex";
    case ScheduleSetting::pi_nonconvex: return "pi_nonconvex";
    case ScheduleSetting::gaussian_pr_nonconvex: return "gaussian_pr_nonconvex";
    case ScheduleSetting::gaussian_pr_strongly_convex: return "gaussian_pr_strongly_convex";
  }
  return "pr_strongly_convex";
}

ScheduleSetting schedule_setting_from_string(const std::string& name) {
  if (name == "pr_strongly_convex") return ScheduleSetting::pr_strongly_convex;
  if (name == "pr_nonconvex") return ScheduleSetting::pr_nonconvex;
  if (name == "pi_strongly_convex") return ScheduleSetting::pi_strongly_convex;
  if (name == "pi_nonconvex") return ScheduleSetting::pi_nonconvex;
  if (name == "gaussian_pr_nonconvex") return ScheduleSetting::gaussian_pr_nonconvex;
  if (name == "gaussian_pr_strongly_convex") return ScheduleSetting::gaussian_pr_strongly_convex;
  throw std::invalid_argument("unknown schedule setting: " + name);
}

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 1.0) || alpha > 2.0) {
    throw std::invalid_argument("schedule: alpha must lie in (1, 2]");
  }
}

void check_shape(int m, int K, long T, long t_min) {
  if (m < 1 || K < 1) throw std::invalid_argument("schedule: m and K must be >= 1");
  if (T < t_min) {
    throw std::invalid_argument("schedule: T must be >= " + std::to_string(t_min));
  }
}

void check_c(double c) {
  if (c != kAutoConstant && !(c >= 1.0)) {
    throw std::invalid_argument("schedule: constant c must be >= 1");
  }
}

double pw(double base, double expo) { return std::pow(base, expo); }

// exp(sum of expo*log(base)) keeps mixed products like m^a K^b T^d in one
// rounding regime; plain pow chains are fine at our tolerances but this is
// tidier for the continuity checks.
double mono(double m, double em, double k, double ek, double t, double et) {
  return std::exp(em * std::log(m) + ek * std::log(k) + et * std::log(t));
}

// Strongly convex prescriptions share the eta*eta_l*K product and the shape
// of the constant's feasibility condition; `constant_ok` evaluates the
// theorem-specific inequality on (m, K, T, alpha, c).
template <typename ConstantOk>
double resolve_constant(double requested, int m, int K, long T,
                        ConstantOk&& constant_ok, bool* conditions_ok) {
  const double mk = static_cast<double>(m) * K;
  const double logT = std::log(static_cast<double>(T));
  auto product_ok = [&](double c) {
    // eta*eta_l*K >= 2/(mu*T)  <=>  c * ln(T) >= m*K.
    return c * logT >= mk - 1e-12;
  };
  if (requested != kAutoConstant) {
    *conditions_ok = constant_ok(requested) && product_ok(requested);
    return requested;
  }
  double c = 1.0;
  while (!(constant_ok(c) && product_ok(c))) {
    c += 1.0;
    if (c > 1e9) throw std::runtime_error("schedule: no feasible constant c");
  }
  *conditions_ok = true;
  return c;
}

std::vector<double> constant_seq(long T, double lambda) {
  return std::vector<double>(static_cast<std::size_t>(T), lambda);
}

}  // namespace

SchedulePlan plan_pr_strongly_convex(double mu, int m, int K, long T, double alpha,
                                     double c, double L) {
  check_alpha(alpha);
  check_shape(m, K, T, 2);
  check_c(c);
  if (!(mu > 0.0)) throw std::invalid_argument("schedule: mu must be > 0");

  SchedulePlan plan;
  plan.setting = ScheduleSetting::pr_strongly_convex;
  plan.m = m; plan.K = K; plan.T = T; plan.alpha = alpha; plan.mu = mu; plan.L = L;

  const double md = m, kd = K, td = static_cast<double>(T);
  const double mkt = md * kd * td;
  plan.c = resolve_constant(
      c, m, K, T,
      [&](double cc) {
        // m^{(2-2a)/a} K^{2/a} T^{c+(2-2a)/a} >= 1
        const double e = (2.0 - 2.0 * alpha) / alpha;
        return mono(md, e, kd, 2.0 / alpha, td, cc + e) >= 1.0 - 1e-12;
      },
      &plan.conditions_ok);

  plan.eta_etaL_K = (2.0 * plan.c / mu) * std::log(td) / mkt;
  plan.eta_etaL = plan.eta_etaL_K / kd;
  plan.eta_l_cap = pw(mkt, (1.0 - alpha) / alpha);
  plan.eta_l = plan.eta_l_cap;
  plan.eta = plan.eta_etaL / plan.eta_l;
  plan.lambda_seq = constant_seq(T, pw(mkt, 1.0 / alpha));
  plan.rate_exponent_sq = (2.0 - 2.0 * alpha) / alpha;   // on (mT), K exponent 2/alpha
  plan.rate_exponent_tbl = plan.rate_exponent_sq;
  return plan;
}

SchedulePlan plan_pr_nonconvex(int m, int K, long T, double alpha, double L) {
  check_alpha(alpha);
  check_shape(m, K, T, 1);

  SchedulePlan plan;
  plan.setting = ScheduleSetting::pr_nonconvex;
  plan.m = m; plan.K = K; plan.T = T; plan.alpha = alpha; plan.mu = 0.0; plan.L = L;

  const double md = m, kd = K, td = static_cast<double>(T);
  const double d = 3.0 * alpha - 2.0;
  plan.eta_etaL = mono(md, (2.0 * alpha - 2.0) / d, kd, (-alpha - 2.0) / d, td, -alpha / d);
  plan.eta_etaL_K = plan.eta_etaL * kd;
  plan.eta_l_cap = mono(md, (1.0 - alpha) / d, kd, (4.0 - 4.0 * alpha) / d, td, (1.0 - alpha) / d);
  plan.eta_l = plan.eta_l_cap;
  plan.eta = plan.eta_etaL / plan.eta_l;
  plan.lambda_seq = constant_seq(T, pw(md * kd * kd * kd * kd * td, 1.0 / d));
  plan.rate_exponent_sq = (2.0 - 2.0 * alpha) / d;  // on (mT), K exponent (4-2a)/d
  plan.rate_exponent_tbl = (1.0 - alpha) / d;
  plan.conditions_ok = plan.eta_etaL_K * L <= 1.0 + 1e-12;
  return plan;
}

SchedulePlan plan_pi_strongly_convex(double mu, int m, int K, long T, double alpha,
                                     double c, double L) {
  check_alpha(alpha);
  check_shape(m, K, T, 2);
  check_c(c);
  if (!(mu > 0.0)) throw std::invalid_argument("schedule: mu must be > 0");

  SchedulePlan plan;
  plan.setting = ScheduleSetting::pi_strongly_convex;
  plan.m = m; plan.K = K; plan.T = T; plan.alpha = alpha; plan.mu = mu; plan.L = L;

  const double md = m, kd = K, td = static_cast<double>(T);
  const double mkt = md * kd * td;
  plan.c = resolve_constant(
      c, m, K, T,
      [&](double cc) {
        // (mK)^{(2-2a)/a} T^{c+(2-2a)/a} >= 1
        const double e = (2.0 - 2.0 * alpha) / alpha;
        return mono(md * kd, e, 1.0, 0.0, td, cc + e) >= 1.0 - 1e-12;
      },
      &plan.conditions_ok);

  plan.eta_etaL_K = (2.0 * plan.c / mu) * std::log(td) / mkt;
  plan.eta_etaL = plan.eta_etaL_K / kd;
  plan.eta_l_cap = mono(md, -0.5, kd, -1.5, td, -0.5);
  plan.eta_l = plan.eta_l_cap;
  plan.eta = plan.eta_etaL / plan.eta_l;
  plan.lambda_seq = constant_seq(T, pw(mkt, 1.0 / alpha));
  plan.rate_exponent_sq = (2.0 - 2.0 * alpha) / alpha;  // on (mKT)
  plan.rate_exponent_tbl = plan.rate_exponent_sq;
  return plan;
}

SchedulePlan plan_pi_nonconvex(int m, int K, long T, double alpha, double L) {
  check_alpha(alpha);
  check_shape(m, K, T, 1);

  SchedulePlan plan;
  plan.setting = ScheduleSetting::pi_nonconvex;
  plan.m = m; plan.K = K; plan.T = T; plan.alpha = alpha; plan.mu = 0.0; plan.L = L;

  const double md = m, kd = K, td = static_cast<double>(T);
  const double d = 3.0 * alpha - 2.0;
  const double mkt = md * kd * td;
  plan.eta_etaL = mono(md, (2.0 * alpha - 2.0) / d, kd, -alpha / d, td, -alpha / d);
  plan.eta_etaL_K = plan.eta_etaL * kd;
  plan.eta_l_cap = pw(mkt, -alpha / (6.0 * alpha - 4.0));
  plan.eta_l = plan.eta_l_cap;
  plan.eta = plan.eta_etaL / plan.eta_l;
  plan.lambda_seq = constant_seq(T, pw(mkt, 1.0 / d));
  plan.rate_exponent_sq = (2.0 - 2.0 * alpha) / d;  // on (mKT)
  plan.rate_exponent_tbl = (1.0 - alpha) / d;
  plan.conditions_ok = plan.eta_etaL_K * L <= 1.0 + 1e-12;
  return plan;
}

SchedulePlan plan_gaussian_pr(int m, int K, long T, ScheduleSetting setting,
                              double mu, double c, double L) {
  check_shape(m, K, T, setting == ScheduleSetting::gaussian_pr_strongly_convex ? 2 : 1);
  check_c(c);

  SchedulePlan plan;
  plan.setting = setting;
  plan.m = m; plan.K = K; plan.T = T; plan.alpha = 2.0; plan.L = L;

  const double md = m, kd = K, td = static_cast<double>(T);
  const double mkt = md * kd * td;
  if (setting == ScheduleSetting::gaussian_pr_nonconvex) {
    plan.mu = 0.0;
    plan.eta_etaL = std::sqrt(md) / std::sqrt(kd * td);
    plan.eta_etaL_K = plan.eta_etaL * kd;
    plan.eta_l_cap = mono(md, -0.5, kd, -2.5, td, -0.5);
    plan.eta_l = plan.eta_l_cap;
    plan.eta = plan.eta_etaL / plan.eta_l;
    plan.lambda_seq = constant_seq(T, mono(md, 0.25, kd, -0.75, td, 0.25));
    plan.rate_exponent_sq = -0.5;
    plan.rate_exponent_tbl = -0.25;
    plan.conditions_ok = plan.eta_etaL_K * L <= 1.0 + 1e-12;
  } else if (setting == ScheduleSetting::gaussian_pr_strongly_convex) {
    if (!(mu > 0.0)) throw std::invalid_argument("schedule: mu must be > 0");
    plan.mu = mu;
    plan.c = resolve_constant(
        c, m, K, T,
        [&](double cc) {
          // T^{-c+1} <= (mK)^{-1}
          return pw(td, -cc + 1.0) <= 1.0 / (md * kd) + 1e-12;
        },
        &plan.conditions_ok);
    plan.eta_etaL_K = (2.0 * plan.c / mu) * std::log(td) / mkt;
    plan.eta_etaL = plan.eta_etaL_K / kd;
    plan.eta_l_cap = mono(md, -0.5, kd, -1.5, td, -0.5);
    plan.eta_l = plan.eta_l_cap;
    plan.eta = plan.eta_etaL / plan.eta_l;
    plan.lambda_seq = constant_seq(T, pw(mkt, 0.5));
    plan.rate_exponent_sq = -1.0;
    plan.rate_exponent_tbl = -1.0;
  } else {
    throw std::invalid_argument("plan_gaussian_pr: setting must be a gaussian variant");
  }
  return plan;
}

SchedulePlan make_plan(ScheduleSetting setting, int m, int K, long T, double alpha,
                       double mu, double c, double L) {
  switch (setting) {
    case ScheduleSetting::pr_strongly_convex:
      return plan_pr_strongly_convex(mu, m, K, T, alpha, c, L);
    case ScheduleSetting::pr_nonconvex:
      return plan_pr_nonconvex(m, K, T, alpha, L);
    case ScheduleSetting::pi_strongly_convex:
      return plan_pi_strongly_convex(mu, m, K, T, alpha, c, L);
    case ScheduleSetting::pi_nonconvex:
      return plan_pi_nonconvex(m, K, T, alpha, L);
    case ScheduleSetting::gaussian_pr_nonconvex:
    case ScheduleSetting::gaussian_pr_strongly_convex:
      return plan_gaussian_pr(m, K, T, setting, mu, c, L);
  }
  throw std::invalid_argument("make_plan: unknown setting");
}

double rate_exponent(ScheduleSetting setting, double alpha, RateMetric metric) {
  switch (setting) {
    case ScheduleSetting::pr_strongly_convex:
    case ScheduleSetting::pi_strongly_convex:
      check_alpha(alpha);
      return (2.0 - 2.0 * alpha) / alpha;
    case ScheduleSetting::pr_nonconvex:
    case ScheduleSetting::pi_nonconvex:
      check_alpha(alpha);
      return metric == RateMetric::squared ? (2.0 - 2.0 * alpha) / (3.0 * alpha - 2.0)
                                           : (1.0 - alpha) / (3.0 * alpha - 2.0);
    case ScheduleSetting::gaussian_pr_nonconvex:
      return metric == RateMetric::squared ? -0.5 : -0.25;
    case ScheduleSetting::gaussian_pr_strongly_convex:
      return -1.0;
  }
  throw std::invalid_argument("rate_exponent: unknown setting");
}

double lower_bound_exponent(bool strongly_convex, double alpha, RateMetric metric) {
  check_alpha(alpha);
  if (strongly_convex) return (2.0 - 2.0 * alpha) / alpha;
  return metric == RateMetric::squared ? (2.0 - 2.0 * alpha) / (3.0 * alpha - 2.0)
                                       : (1.0 - alpha) / (3.0 * alpha - 2.0);
}

}  // namespace fedsim
