#ifndef THERMOLAB_JACOBI_HPP
#define THERMOLAB_JACOBI_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "thermolab/errors.hpp"
#include "thermolab/flow.hpp"
#include "thermolab/ode.hpp"
#include "thermolab/parallel.hpp"

namespace thermolab {

/// Components of a Jacobi field in the frame (F, H, V).
struct JacobiState {
  double a = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct JacobiSample {
  double t = 0.0;
  SMPoint p;  // theta is the continuous lift
  JacobiState s;
  double ydot = 0.0;
};

struct JacobiTrajectory {
  std::vector<JacobiSample> samples;
  /// max |y'' - (lambda I + V lambda) y' + K_lambda y| over the samples.
  double second_order_residual = 0.0;
};

namespace detail {

/// Orbit and Jacobi system integrated together: state (x, y, theta, a, y, z).
struct JacobiRhs {
  const ThermostatSpec* spec;
  void operator()(double, const double* s, double* d) const {
    spec->velocity(s, d);
    const SMPoint p{s[0], s[1], s[2]};
    const double lam = spec->lambda(p);
    const double lI = spec->lambda_I.is_constant(0.0) ? 0.0 : spec->lambda_I(p);
    const double Vl = spec->V_lambda.is_constant(0.0) ? 0.0 : spec->V_lambda(p);
    const double Kt = spec->K_tilde(p);
    d[3] = lam * s[4];
    d[4] = lI * s[4] + s[5];
    d[5] = -Kt * s[4] + Vl * s[5];
  }
};

inline std::vector<double> joint_state(const SMPoint& p, const JacobiState& j) {
  return {p.x, p.y, p.theta, j.a, j.y, j.z};
}

inline JacobiSample make_sample(const ThermostatSpec& spec, double t, const std::vector<double>& s) {
  const SMPoint p{s[0], s[1], s[2]};
  const double lI = spec.lambda_I(p);
  return {t, p, {s[3], s[4], s[5]}, lI * s[4] + s[5]};
}

/// Steps the system from t0 to each of `times` (monotone, same direction),
/// calling observer after every accepted step and at each requested time.
template <typename Observer>
std::vector<double> integrate_through(const ThermostatSpec& spec, double t0, std::vector<double> y,
                                      const std::vector<double>& times, const OdeOptions& opts, Observer&& observer) {
  DormandPrince<JacobiRhs> dp(6, JacobiRhs{&spec}, opts);
  double t = t0;
  double h = (times.empty() || times.back() >= t0 ? 1.0 : -1.0) * opts.h_initial;
  observer(t, y);
  std::size_t steps = 0;
  for (double target : times) {
    while (t != target) {
      if (++steps > opts.max_steps) throw StepFailure("step limit exceeded");
      dp.step(t, y, h, target);
      observer(t, y);
    }
  }
  return y;
}

}  // namespace detail

struct JacobiOptions {
  OdeOptions ode;
  /// Record samples on a uniform grid of this spacing instead of at the
  /// adaptive steps.
  std::optional<double> sample_dt;
};

/// Jacobi solution along the orbit through p0 for t in [0, T] (T may be
/// negative). The second-order form is checked against K_lambda built
/// independently by derived_curvatures.
inline JacobiTrajectory integrate_jacobi(const ThermostatSpec& spec, const SMPoint& p0, const JacobiState& init,
                                         double T, const JacobiOptions& opts = {}) {
  JacobiTrajectory traj;
  std::vector<double> times;
  if (opts.sample_dt) {
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(T) / *opts.sample_dt - 1e-9)));
    for (int k = 1; k <= n; ++k) times.push_back(T * k / n);
  } else {
    times.push_back(T);
  }
  const bool uniform = opts.sample_dt.has_value();
  double last_t = 0.0;
  detail::integrate_through(spec, 0.0, detail::joint_state(p0, init), times, opts.ode,
                            [&](double t, const std::vector<double>& s) {
                              if (uniform && !traj.samples.empty()) {
                                if (std::find(times.begin(), times.end(), t) == times.end() || t == last_t) return;
                              }
                              last_t = t;
                              traj.samples.push_back(detail::make_sample(spec, t, s));
                            });
  const DerivedCurvatures dc = spec.curvatures();
  double worst = 0.0;
  for (const auto& smp : traj.samples) {
    const SMPoint& p = smp.p;
    const double lI = spec.lambda_I(p), Vl = spec.V_lambda(p);
    const double zdot = -spec.K_tilde(p) * smp.s.y + Vl * smp.s.z;
    const double yddot = spec.F_lambda_I(p) * smp.s.y + lI * smp.ydot + zdot;
    worst = std::max(worst, std::abs(yddot - (lI + Vl) * smp.ydot + dc.K_lambda(p) * smp.s.y));
  }
  traj.second_order_residual = worst;
  return traj;
}

namespace detail {

/// Zeros of the y component (index 4) for t in (t0, t_end], located by sign
/// change and bisection with single steps.
inline std::vector<double> y_zeros(const ThermostatSpec& spec, double t0, std::vector<double> y, double t_end,
                                   const OdeOptions& opts, double tol = 1e-12,
                                   std::vector<std::pair<double, std::vector<double>>>* record = nullptr) {
  DormandPrince<JacobiRhs> dp(6, JacobiRhs{&spec}, opts);
  std::vector<double> zeros;
  double t = t0;
  double h = (t_end >= t0 ? 1.0 : -1.0) * opts.h_initial;
  std::vector<double> prev, trial(6);
  if (record) record->emplace_back(t, y);
  std::size_t steps = 0;
  while (t != t_end) {
    if (++steps > opts.max_steps) throw StepFailure("step limit exceeded");
    const double tp = t;
    prev = y;
    dp.step(t, y, h, t_end);
    if (record) record->emplace_back(t, y);
    if (y[4] == 0.0) {
      zeros.push_back(t);
      continue;
    }
    if (prev[4] != 0.0 && (prev[4] > 0.0) != (y[4] > 0.0)) {
      double lo = 0.0, hi = t - tp;
      while (std::abs(hi - lo) > tol) {
        const double mid = 0.5 * (lo + hi);
        dp.single_step(tp, prev.data(), mid, trial.data());
        if ((trial[4] > 0.0) == (prev[4] > 0.0) && trial[4] != 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      zeros.push_back(tp + 0.5 * (lo + hi));
    }
  }
  return zeros;
}

}  // namespace detail

/// Zeros on (0, T] of the Jacobi solution with y(0) = 0, y'(0) = 1.
inline std::vector<double> detect_conjugate_points(const ThermostatSpec& spec, const SMPoint& p0, double T,
                                                   const OdeOptions& opts = {}) {
  return detail::y_zeros(spec, 0.0, detail::joint_state(p0, {0.0, 0.0, 1.0}), T, opts);
}

struct RiccatiSample {
  double t = 0.0;
  double r = 0.0;        // y'/y
  double r_frame = 0.0;  // z/y, the solution of the flow form of the equation
};

struct RiccatiTrace {
  int sign = 1;
  double R = 0.0;
  std::vector<RiccatiSample> samples;
  std::vector<double> blowup_times;
  double value = 0.0;        // r at t = 0
  double value_frame = 0.0;  // z/y at t = 0
};

enum class RiccatiWindow {
  /// (-R, R] for the + solution, [-R, R) for the - solution.
  full,
  /// Only up to t = 0, which is all the value at 0 depends on.
  half
};

/// r_R^{sign} along the orbit through p0: the linear system is started with
/// y = 0, y' = 1 at t = -R (sign +) or t = +R (sign -) and r = y'/y.
inline RiccatiTrace solve_riccati_finite(const ThermostatSpec& spec, const SMPoint& p0, double R, int sign,
                                         RiccatiWindow window = RiccatiWindow::full, const OdeOptions& opts = {}) {
  if (!(R > 0.0)) throw DomainError("Riccati window needs R > 0");
  RiccatiTrace tr;
  tr.sign = sign >= 0 ? 1 : -1;
  tr.R = R;
  const double t_start = -tr.sign * R;
  const double t_stop = window == RiccatiWindow::full ? tr.sign * R : 0.0;
  const SMPoint q = flow_state(spec, p0, t_start, opts);
  std::vector<std::pair<double, std::vector<double>>> rec;
  auto y0 = detail::joint_state(q, {0.0, 0.0, 1.0});
  // Two legs so that t = 0 is hit exactly.
  auto zeros = detail::y_zeros(spec, t_start, y0, 0.0, opts, 1e-12, &rec);
  const std::vector<double> at_zero = rec.back().second;
  if (t_stop != 0.0) {
    auto more = detail::y_zeros(spec, 0.0, at_zero, t_stop, opts, 1e-12, &rec);
    zeros.insert(zeros.end(), more.begin(), more.end());
  }
  tr.blowup_times = zeros;
  if (!zeros.empty()) {
    throw BlowupInsideWindow("Jacobi solution vanishes at t = " + std::to_string(zeros.front()) +
                             " inside the window of half-width " + std::to_string(R));
  }
  for (const auto& [t, s] : rec) {
    if (t == t_start) continue;
    const SMPoint p{s[0], s[1], s[2]};
    const double ydot = spec.lambda_I(p) * s[4] + s[5];
    tr.samples.push_back({t, ydot / s[4], s[5] / s[4]});
  }
  std::sort(tr.samples.begin(), tr.samples.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  const SMPoint p{at_zero[0], at_zero[1], at_zero[2]};
  tr.value = (spec.lambda_I(p) * at_zero[4] + at_zero[5]) / at_zero[4];
  tr.value_frame = at_zero[5] / at_zero[4];
  return tr;
}

struct RiccatiLimit {
  double r_plus = 0.0;
  double r_minus = 0.0;
  double r_plus_frame = 0.0;
  double r_minus_frame = 0.0;
  double R_plus = 0.0;
  double R_minus = 0.0;
  std::vector<double> plus_sequence;
  std::vector<double> minus_sequence;
};

struct RiccatiLimitOptions {
  double tol = 1e-6;
  double R_initial = 1.0;
  double R_cap = 1024.0;
  OdeOptions ode;
};

/// Limits of r_R^{+-}(0) as R doubles. The + sequence must decrease and the
/// - sequence increase; either failure, or reaching the cap, is reported as
/// NoConvergence.
inline RiccatiLimit solve_riccati_limit(const ThermostatSpec& spec, const SMPoint& p0,
                                        const RiccatiLimitOptions& opts = {}) {
  RiccatiLimit out;
  for (int sign : {1, -1}) {
    double R = opts.R_initial;
    RiccatiTrace prev = solve_riccati_finite(spec, p0, R, sign, RiccatiWindow::half, opts.ode);
    std::vector<double> seq{prev.value};
    for (;;) {
      R *= 2.0;
      if (R > opts.R_cap) {
        throw NoConvergence("Riccati limit not reached by R = " + std::to_string(opts.R_cap));
      }
      const RiccatiTrace cur = solve_riccati_finite(spec, p0, R, sign, RiccatiWindow::half, opts.ode);
      seq.push_back(cur.value);
      const double slack = 1e-9 * std::max(1.0, std::abs(prev.value));
      if ((sign > 0 && cur.value > prev.value + slack) || (sign < 0 && cur.value < prev.value - slack)) {
        throw NoConvergence("Riccati sequence is not monotone at R = " + std::to_string(R));
      }
      if (std::abs(cur.value - prev.value) < opts.tol) {
        (sign > 0 ? out.r_plus : out.r_minus) = cur.value;
        (sign > 0 ? out.r_plus_frame : out.r_minus_frame) = cur.value_frame;
        (sign > 0 ? out.R_plus : out.R_minus) = R;
        (sign > 0 ? out.plus_sequence : out.minus_sequence) = seq;
        break;
      }
      prev = cur;
    }
  }
  return out;
}

struct BoundConstants {
  double B = 0.0;  // sqrt(sup |K_lambda|)
  double C = 0.0;  // sup |lambda I + V lambda|
  double A = 0.0;
  double bound() const { return 0.5 * A * (1.0 + std::sqrt(5.0)); }
};

inline BoundConstants riccati_bound_constants(const ThermostatSpec& spec, const std::vector<SMPoint>& grid) {
  const DerivedCurvatures dc = spec.curvatures();
  std::vector<double> k(grid.size()), c(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    k[i] = std::abs(dc.K_lambda(grid[i]));
    c[i] = std::abs(spec.lambda_I(grid[i]) + spec.V_lambda(grid[i]));
  });
  BoundConstants bc;
  bc.B = std::sqrt(*std::max_element(k.begin(), k.end()));
  bc.C = *std::max_element(c.begin(), c.end());
  bc.A = std::max(bc.B, bc.C);
  return bc;
}

/// Closed-form comparison solutions, with t as the variable x of the
/// returned expression.
inline Expression comparison_w_plus(double A, double D) {
  const Expression t = Expression::x();
  const Expression e = exp(-A * std::sqrt(5.0) * t + D);
  return A / (1.0 - e) + (A * (std::sqrt(5.0) - 1.0) / 2.0) * (1.0 + e) / (1.0 - e);
}

inline Expression comparison_w_minus(double A, double E) {
  const Expression t = Expression::x();
  const Expression e = exp(A * std::sqrt(5.0) * t + E);
  return (-A * e) / (e - 1.0) + (A * (1.0 + std::sqrt(5.0)) / 2.0) * (e + 1.0) / (e - 1.0);
}

/// max |w' -+ A w + w^2 - A^2| of the closed forms over the given times,
/// derivatives taken symbolically.
inline double comparison_residual(double A, double shift, int sign, const std::vector<double>& times) {
  const Expression w = sign > 0 ? comparison_w_plus(A, shift) : comparison_w_minus(A, shift);
  const Expression res = w.derivative(Var::x) + (sign > 0 ? -A : A) * w + w * w - A * A;
  double worst = 0.0;
  for (double t : times) worst = std::max(worst, std::abs(res.evaluate(t, 0.0, 0.0)));
  return worst;
}

struct BoundReport {
  BoundConstants constants;
  double bound = 0.0;
  double max_abs_r = 0.0;
  std::vector<RiccatiLimit> limits;
  bool passed = true;
};

/// Limit solutions at each state compared with (A/2)(1 + sqrt 5); throws
/// BoundViolated when a state exceeds it by more than `slack`.
inline BoundReport check_riccati_bound(const ThermostatSpec& spec, const std::vector<SMPoint>& states,
                                       const std::vector<SMPoint>& grid, const RiccatiLimitOptions& lopts = {},
                                       double slack = 1e-6) {
  BoundReport rep;
  rep.constants = riccati_bound_constants(spec, grid);
  rep.bound = rep.constants.bound();
  rep.limits.resize(states.size());
  parallel_for(states.size(), [&](std::size_t i) { rep.limits[i] = solve_riccati_limit(spec, states[i], lopts); });
  for (const auto& l : rep.limits) rep.max_abs_r = std::max({rep.max_abs_r, std::abs(l.r_plus), std::abs(l.r_minus)});
  rep.passed = rep.max_abs_r <= rep.bound + slack;
  if (!rep.passed) {
    throw BoundViolated("|r| = " + std::to_string(rep.max_abs_r) + " exceeds (A/2)(1+sqrt5) = " +
                        std::to_string(rep.bound));
  }
  return rep;
}

}  // namespace thermolab

#endif
