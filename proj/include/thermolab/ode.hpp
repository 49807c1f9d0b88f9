#ifndef THERMOLAB_ODE_HPP
#define THERMOLAB_ODE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "thermolab/errors.hpp"

namespace thermolab {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-10;
  double h_initial = 1e-3;
  double h_min = 1e-13;
  double h_max = 0.25;
  std::size_t max_steps = 2'000'000;
  /// Bisection tolerance in t for event location.
  double event_tol = 1e-10;
};

/// Dormand-Prince 5(4) with a PI-free step controller. `Rhs` is callable as
/// rhs(t, const double* y, double* dydt).
template <typename Rhs>
class DormandPrince {
 public:
  DormandPrince(std::size_t n, Rhs rhs, OdeOptions opts = {}) : n_(n), rhs_(std::move(rhs)), opts_(opts) {
    for (auto& k : k_) k.assign(n, 0.0);
    tmp_.assign(n, 0.0);
    err_.assign(n, 0.0);
  }

  std::size_t dimension() const { return n_; }
  const OdeOptions& options() const { return opts_; }

  /// One unchecked step of size h (may be negative); out receives the fifth
  /// order solution and `err` the embedded error estimate.
  void single_step(double t, const double* y, double h, double* out) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    double* tmp = tmp_.data();
    auto& k = k_;
    const std::size_t n = n_;
    rhs_(t, y, k[0].data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k[0][i];
    rhs_(t + c2 * h, tmp, k[1].data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k[0][i] + a32 * k[1][i]);
    rhs_(t + c3 * h, tmp, k[2].data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k[0][i] + a42 * k[1][i] + a43 * k[2][i]);
    rhs_(t + c4 * h, tmp, k[3].data());
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = y[i] + h * (a51 * k[0][i] + a52 * k[1][i] + a53 * k[2][i] + a54 * k[3][i]);
    }
    rhs_(t + c5 * h, tmp, k[4].data());
    for (std::size_t i = 0; i < n; ++i) {
      tmp[i] = y[i] + h * (a61 * k[0][i] + a62 * k[1][i] + a63 * k[2][i] + a64 * k[3][i] + a65 * k[4][i]);
    }
    rhs_(t + h, tmp, k[5].data());
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = y[i] + h * (b1 * k[0][i] + b3 * k[2][i] + b4 * k[3][i] + b5 * k[4][i] + b6 * k[5][i]);
    }
    rhs_(t + h, out, k[6].data());
    for (std::size_t i = 0; i < n; ++i) {
      err_[i] = h * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] + e6 * k[5][i] + e7 * k[6][i]);
    }
  }

  /// Advances (t, y) by one accepted step in the direction of `h`, never
  /// overshooting `t_end`. `h` is updated to the proposal for the next step.
  void step(double& t, std::vector<double>& y, double& h, double t_end) {
    const double dir = t_end >= t ? 1.0 : -1.0;
    std::vector<double>& out = out_;
    out.resize(n_);
    const double proposal = std::abs(h);
    for (;;) {
      double ha = std::min(std::abs(h), opts_.h_max);
      const double remaining = std::abs(t_end - t);
      bool last = false;
      if (ha >= remaining) {
        ha = remaining;
        last = true;
      }
      if (ha < opts_.h_min && !last) {
        throw StepFailure("step size underflow at t = " + std::to_string(t));
      }
      single_step(t, y.data(), dir * ha, out.data());
      double norm = 0.0;
      bool finite = true;
      for (std::size_t i = 0; i < n_; ++i) {
        const double sc = opts_.atol + opts_.rtol * std::max(std::abs(y[i]), std::abs(out[i]));
        const double e = err_[i] / sc;
        norm += e * e;
        finite = finite && std::isfinite(out[i]);
      }
      norm = std::sqrt(norm / static_cast<double>(n_));
      if (!finite) norm = std::numeric_limits<double>::infinity();
      const double factor =
          norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
      if (norm <= 1.0) {
        t = last ? t_end : t + dir * ha;
        y.swap(out);
        // A step shortened to hit t_end says nothing about the next size.
        h = dir * std::max(last ? std::max(proposal, ha * factor) : ha * factor, opts_.h_min);
        return;
      }
      h = dir * ha * (std::isfinite(factor) ? factor : 0.2);
      if (std::abs(h) < opts_.h_min) throw StepFailure("step size underflow at t = " + std::to_string(t));
    }
  }

 private:
  std::size_t n_;
  Rhs rhs_;
  OdeOptions opts_;
  std::array<std::vector<double>, 7> k_;
  std::vector<double> tmp_, err_, out_;
};

struct OdeEventResult {
  bool hit = false;
  double t = 0.0;
  std::vector<double> y;
};

/// Integrates from t0 to t_end, calling observer(t, y) after every accepted
/// step (and once at t0). If `event` is given, integration stops at the first
/// point where event(t, y) drops below `-inside_slack` after having been at or
/// above it; the crossing is refined by bisection with single steps.
template <typename Rhs, typename Observer, typename Event>
OdeEventResult integrate_ode(std::size_t n, Rhs rhs, double t0, std::vector<double> y, double t_end,
                             const OdeOptions& opts, Observer&& observer, Event&& event, double inside_slack = 1e-14) {
  DormandPrince<Rhs> dp(n, std::move(rhs), opts);
  double t = t0;
  double h = (t_end >= t0 ? 1.0 : -1.0) * opts.h_initial;
  observer(t, y);
  OdeEventResult res;
  auto inside = [&](double tt, const std::vector<double>& yy) { return event(tt, yy) >= -inside_slack; };
  bool was_inside = inside(t, y);
  std::vector<double> y_prev, trial(n);
  std::size_t steps = 0;
  while (t != t_end) {
    if (++steps > opts.max_steps) throw StepFailure("step limit exceeded");
    const double t_prev = t;
    y_prev = y;
    dp.step(t, y, h, t_end);
    const bool now_inside = inside(t, y);
    if (was_inside && !now_inside) {
      double lo = 0.0, hi = t - t_prev;
      while (std::abs(hi - lo) > opts.event_tol) {
        const double mid = 0.5 * (lo + hi);
        dp.single_step(t_prev, y_prev.data(), mid, trial.data());
        if (inside(t_prev + mid, trial)) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      // Report the last inside point so the state is on the closed domain.
      if (lo == 0.0) {
        trial = y_prev;
      } else {
        dp.single_step(t_prev, y_prev.data(), lo, trial.data());
      }
      res.hit = true;
      res.t = t_prev + lo;
      res.y = trial;
      observer(res.t, res.y);
      return res;
    }
    was_inside = now_inside;
    observer(t, y);
  }
  res.y = y;
  res.t = t;
  return res;
}

template <typename Rhs, typename Observer>
std::vector<double> integrate_ode(std::size_t n, Rhs rhs, double t0, std::vector<double> y, double t_end,
                                  const OdeOptions& opts, Observer&& observer) {
  return integrate_ode(n, std::move(rhs), t0, std::move(y), t_end, opts, std::forward<Observer>(observer),
                       [](double, const std::vector<double>&) { return 1.0; })
      .y;
}

}  // namespace thermolab

#endif
