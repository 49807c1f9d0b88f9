#ifndef THERMOLAB_FLOW_HPP
#define THERMOLAB_FLOW_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "thermolab/errors.hpp"
#include "thermolab/field.hpp"
#include "thermolab/geometry.hpp"
#include "thermolab/ode.hpp"
#include "thermolab/parallel.hpp"

namespace thermolab {

/// A surface model together with the thermostat term lambda; the generator
/// is F = X + lambda V. Coefficients used by the Jacobi system are prepared
/// once here.
struct ThermostatSpec {
  SurfaceModel model;
  Field lambda;
  FrameOperator F;
  Field lambda_I;  // lambda * I
  Field V_lambda;
  Field K_tilde;   // K - H(lambda) - lambda J + lambda^2
  Field F_lambda_I;

  ThermostatSpec(SurfaceModel m, Field lam) : model(std::move(m)), lambda(std::move(lam)) {
    F = model.X + model.V.scaled(lambda);
    lambda_I = lambda * model.I;
    V_lambda = model.V.applied(lambda);
    K_tilde = model.K - model.H.applied(lambda) - lambda * model.J + lambda * lambda;
    F_lambda_I = F.applied(lambda_I);
  }

  DerivedCurvatures curvatures() const { return derived_curvatures(model, lambda); }

  /// d/dt (x, y, theta) along the flow.
  void velocity(const double* s, double* d) const {
    const SMPoint p{s[0], s[1], s[2]};
    d[0] = F.cx(p);
    d[1] = F.cy(p);
    d[2] = F.ct(p);
  }
};

struct FlowOptions {
  OdeOptions ode;
  /// Stop at the first exit from the closed disk (bounded domains only).
  bool stop_at_boundary = true;
};

struct OrbitSample {
  double t = 0.0;
  SMPoint p;            // theta normalized to [0, 2pi)
  double theta_lift = 0.0;
};

struct Orbit {
  std::vector<OrbitSample> samples;
  std::optional<double> exit_time;
  bool regular = false;
  bool exit_transversal = false;
  /// max |F(gamma') - 1| over samples, NaN when the model has no metric.
  double speed_defect = 0.0;

  const OrbitSample& back() const { return samples.back(); }
  SMPoint end_state() const { return {samples.back().p.x, samples.back().p.y, samples.back().theta_lift}; }
};

namespace detail {

inline double disk_level(const std::vector<double>& s) { return 1.0 - s[0] * s[0] - s[1] * s[1]; }

inline void require_inside(const ThermostatSpec& spec, const SMPoint& p0) {
  if (spec.model.domain.kind == Domain::Kind::disk && !spec.model.domain.contains(p0.x, p0.y, 1e-12)) {
    throw DomainError("initial point lies outside the unit disk");
  }
}

}  // namespace detail

/// Integrates the thermostat flow from p0 over [0, t_end] (t_end may be
/// negative). On the disk the integration halts at the first boundary
/// crossing, which is located to within the event tolerance.
inline Orbit integrate_orbit(const ThermostatSpec& spec, const SMPoint& p0, double t_end, const FlowOptions& opts = {}) {
  detail::require_inside(spec, p0);
  Orbit orbit;
  const bool bounded = spec.model.domain.has_boundary() && opts.stop_at_boundary;
  auto rhs = [&spec](double, const double* s, double* d) { spec.velocity(s, d); };
  double defect = 0.0;
  const bool has_metric = spec.model.phi.has_value();
  auto observe = [&](double t, const std::vector<double>& s) {
    orbit.samples.push_back({t, normalized(SMPoint{s[0], s[1], s[2]}), s[2]});
    if (has_metric) {
      double d[3];
      spec.velocity(s.data(), d);
      defect = std::max(defect, std::abs(spec.model.speed(s[0], s[1], d[0], d[1]) - 1.0));
    }
  };
  std::vector<double> y0{p0.x, p0.y, p0.theta};
  if (bounded) {
    const auto res = integrate_ode(3, rhs, 0.0, y0, t_end, opts.ode, observe,
                                   [](double, const std::vector<double>& s) { return detail::disk_level(s); });
    if (res.hit) orbit.exit_time = res.t;
  } else {
    integrate_ode(3, rhs, 0.0, y0, t_end, opts.ode, observe);
  }
  orbit.speed_defect = has_metric ? defect : std::numeric_limits<double>::quiet_NaN();
  return orbit;
}

/// State reached after time t (no boundary stop).
inline SMPoint flow_state(const ThermostatSpec& spec, const SMPoint& p0, double t, const OdeOptions& ode = {}) {
  if (t == 0.0) return p0;
  auto rhs = [&spec](double, const double* s, double* d) { spec.velocity(s, d); };
  const auto y = integrate_ode(3, rhs, 0.0, {p0.x, p0.y, p0.theta}, t, ode, [](double, const std::vector<double>&) {});
  return {y[0], y[1], y[2]};
}

/// Exit parameter l > 0 (direction +1) or |l| of the backward exit
/// (direction -1). Throws TrappedOrbit when no exit occurs before t_max.
inline double exit_time(const ThermostatSpec& spec, const SMPoint& p0, int direction = 1, double t_max = 100.0,
                        const OdeOptions& ode = {}) {
  if (!spec.model.domain.has_boundary()) throw DomainError("exit time needs a bounded domain");
  FlowOptions fo;
  fo.ode = ode;
  detail::require_inside(spec, p0);
  auto rhs = [&spec](double, const double* s, double* d) { spec.velocity(s, d); };
  const auto res = integrate_ode(3, rhs, 0.0, {p0.x, p0.y, p0.theta}, direction >= 0 ? t_max : -t_max, ode,
                                 [](double, const std::vector<double>&) {},
                                 [](double, const std::vector<double>& s) { return detail::disk_level(s); });
  if (!res.hit) throw TrappedOrbit("no boundary exit within horizon " + std::to_string(t_max));
  return std::abs(res.t);
}

struct BasePoint {
  double x = 0.0;
  double y = 0.0;
};

inline BasePoint exp_map(const ThermostatSpec& spec, double x, double y, double xi, double t, const OdeOptions& ode = {}) {
  if (t < 0.0) throw DomainError("exp_map needs t >= 0");
  const SMPoint s = flow_state(spec, {x, y, xi}, t, ode);
  return {s.x, s.y};
}

struct RegularityReport {
  bool regular = false;
  double forward_exit = 0.0;
  double backward_exit = 0.0;
  double forward_transversality = 0.0;
  double backward_transversality = 0.0;
};

namespace detail {

/// |<gamma', nu>| with both vectors normalized in the Euclidean chart.
inline double transversality(const ThermostatSpec& spec, const SMPoint& s) {
  double d[3];
  const double st[3] = {s.x, s.y, s.theta};
  spec.velocity(st, d);
  const double r = std::hypot(s.x, s.y), v = std::hypot(d[0], d[1]);
  if (r == 0.0 || v == 0.0) return 0.0;
  return std::abs((d[0] * s.x + d[1] * s.y) / (r * v));
}

}  // namespace detail

inline RegularityReport scan_regularity(const ThermostatSpec& spec, const SMPoint& p0, double t_max = 100.0,
                                        double transversality_tol = 1e-6) {
  RegularityReport rep;
  FlowOptions fo;
  const Orbit fwd = integrate_orbit(spec, p0, t_max, fo);
  const Orbit bwd = integrate_orbit(spec, p0, -t_max, fo);
  if (!fwd.exit_time || !bwd.exit_time) throw TrappedOrbit("orbit does not reach the boundary within the horizon");
  rep.forward_exit = *fwd.exit_time;
  rep.backward_exit = std::abs(*bwd.exit_time);
  rep.forward_transversality = detail::transversality(spec, fwd.end_state());
  rep.backward_transversality = detail::transversality(spec, bwd.end_state());
  rep.regular = rep.forward_transversality > transversality_tol && rep.backward_transversality > transversality_tol;
  return rep;
}

struct NontrappingReport {
  std::size_t sampled = 0;
  std::vector<SMPoint> trapped;
};

/// Polar sample grid of the disk bundle: n_r radii, n_a base angles, n_t
/// directions.
inline std::vector<SMPoint> disk_state_grid(int n_r, int n_a, int n_t) {
  std::vector<SMPoint> pts;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < n_r; ++i) {
    const double r = (i + 0.5) / n_r;
    for (int j = 0; j < n_a; ++j) {
      const double a = two_pi * j / n_a;
      for (int k = 0; k < n_t; ++k) pts.push_back({r * std::cos(a), r * std::sin(a), two_pi * (k + 0.5) / n_t});
    }
  }
  return pts;
}

inline NontrappingReport nontrapping_scan(const ThermostatSpec& spec, const std::vector<SMPoint>& states, double t_max) {
  std::vector<char> trapped(states.size(), 0);
  parallel_for(states.size(), [&](std::size_t i) {
    for (int dir : {1, -1}) {
      try {
        exit_time(spec, states[i], dir, t_max);
      } catch (const TrappedOrbit&) {
        trapped[i] = 1;
        return;
      }
    }
  });
  NontrappingReport rep;
  rep.sampled = states.size();
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (trapped[i]) rep.trapped.push_back(states[i]);
  }
  return rep;
}

}  // namespace thermolab

#endif
