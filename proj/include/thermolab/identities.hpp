#ifndef THERMOLAB_IDENTITIES_HPP
#define THERMOLAB_IDENTITIES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "thermolab/errors.hpp"
#include "thermolab/flow.hpp"
#include "thermolab/jacobi.hpp"
#include "thermolab/quadrature.hpp"

namespace thermolab {

struct IdentityReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_residual = 0.0;
  double rel_residual = 0.0;
  std::map<std::string, double> terms;

  /// The relative residual divides by max(|lhs|, |rhs|, scale); pass a scale
  /// for identities whose sides vanish.
  static IdentityReport make(std::string name, double lhs, double rhs, std::map<std::string, double> terms = {},
                             double scale = 0.0) {
    IdentityReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.abs_residual = std::abs(lhs - rhs);
    scale = std::max({std::abs(lhs), std::abs(rhs), scale});
    r.rel_residual = scale > 0.0 ? r.abs_residual / scale : 0.0;
    r.terms = std::move(terms);
    return r;
  }
};

struct PestovReport {
  double max_residual = 0.0;
  double max_lhs = 0.0;
  std::size_t points = 0;
};

/// Both sides of the pointwise Pestov identity at the given states.
inline PestovReport check_pestov_pointwise(const ThermostatSpec& spec, const Field& u,
                                           const std::vector<SMPoint>& points) {
  const SurfaceModel& m = spec.model;
  const Field Fu = spec.F.applied(u), Hu = m.H.applied(u), Vu = m.V.applied(u);
  const Field lhs = 2.0 * Hu * m.V.applied(Fu);
  const Field rhs = Fu * Fu + Hu * Hu - spec.K_tilde * Vu * Vu + spec.F.applied(Hu * Vu) - m.H.applied(Vu * Fu) +
                    m.V.applied(Hu * Fu) + Fu * (m.I * Hu + m.J * Vu) + Hu * Vu * (spec.lambda_I + spec.V_lambda);
  std::vector<double> res(points.size()), mag(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    const double l = lhs(points[i]);
    res[i] = std::abs(l - rhs(points[i]));
    mag[i] = std::abs(l);
  });
  PestovReport rep;
  rep.points = points.size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    rep.max_residual = std::max(rep.max_residual, res[i]);
    rep.max_lhs = std::max(rep.max_lhs, mag[i]);
  }
  return rep;
}

/// Closed-manifold Stokes consequences of the Lie derivatives of Theta:
/// int F(f) = -int f (lambda I + V lambda), int H(f) = int f J,
/// int V(f) = -int f I.
inline std::vector<IdentityReport> check_lie_derivatives(const ThermostatSpec& spec, const QuadratureGrid& g,
                                                         const Field& f) {
  const SurfaceModel& m = spec.model;
  const Field div = spec.lambda_I + spec.V_lambda;
  std::vector<IdentityReport> out;
  auto report = [&g](const char* name, const Field& lhs, const Field& rhs) {
    const double scale = liouville_integrate(g, [&lhs](const SMPoint& p) { return std::abs(lhs(p)); });
    return IdentityReport::make(name, liouville_integrate(g, lhs), liouville_integrate(g, rhs), {}, scale);
  };
  out.push_back(report("L_F", spec.F.applied(f), -(f * div)));
  out.push_back(report("L_H", m.H.applied(f), f * m.J));
  out.push_back(report("L_V", m.V.applied(f), -(f * m.I)));
  return out;
}

struct ClosedIdentityReports {
  IdentityReport intid;
  IdentityReport frst;
  IdentityReport scnd;
};

/// The closed-surface integral identity and the two intermediate identities
/// it is assembled from.
inline ClosedIdentityReports check_integral_identity_closed(const ThermostatSpec& spec, const Field& u,
                                                            const QuadratureGrid& g) {
  const SurfaceModel& m = spec.model;
  const DerivedCurvatures dc = spec.curvatures();
  const Field Fu = spec.F.applied(u), Hu = m.H.applied(u), Vu = m.V.applied(u);
  const Field FVu = spec.F.applied(Vu), VFu = m.V.applied(Fu);
  const double FVu2 = liouville_integrate(g, FVu * FVu);
  const double VFu2 = liouville_integrate(g, VFu * VFu);
  const double Fu2 = liouville_integrate(g, Fu * Fu);
  const double Hu2 = liouville_integrate(g, Hu * Hu);
  const double KVu2 = liouville_integrate(g, dc.bigK * Vu * Vu);
  const double KtVu2 = liouville_integrate(g, spec.K_tilde * Vu * Vu);
  const double extra = liouville_integrate(g, (spec.lambda_I * spec.V_lambda + spec.F.applied(spec.V_lambda)) * Vu * Vu);
  const double cross = liouville_integrate(g, 2.0 * Hu * VFu);
  ClosedIdentityReports r;
  r.intid = IdentityReport::make("intid", FVu2 - KVu2, VFu2 - Fu2,
                                 {{"FVu^2", FVu2}, {"bigK Vu^2", KVu2}, {"VFu^2", VFu2}, {"Fu^2", Fu2}});
  r.frst = IdentityReport::make("frst", cross, Fu2 + Hu2 - KtVu2, {{"2HuVFu", cross}, {"Hu^2", Hu2}, {"Ktilde Vu^2", KtVu2}});
  r.scnd = IdentityReport::make("scnd", cross, VFu2 - FVu2 + Hu2 + extra,
                                {{"2HuVFu", cross}, {"(lambdaI Vlambda + F Vlambda) Vu^2", extra}});
  return r;
}

struct BoundaryIdentityReport {
  IdentityReport identity;
  /// int over the boundary of omega(u).
  double boundary_term = 0.0;
  /// max |i_V Theta| over the boundary nodes.
  double max_iV = 0.0;
};

/// The first integral identity on the disk, including the boundary integral
/// of omega(u) = {Hu Vu + V(lambda)(Vu)^2} i_F Theta - (Fu Vu) i_H Theta.
inline BoundaryIdentityReport check_integral_identity_boundary(const ThermostatSpec& spec, const Field& u,
                                                               const QuadratureGrid& g) {
  const SurfaceModel& m = spec.model;
  if (g.boundary.empty()) throw DomainError("boundary identity needs boundary nodes");
  const DerivedCurvatures dc = spec.curvatures();
  const Field Fu = spec.F.applied(u), Hu = m.H.applied(u), Vu = m.V.applied(u);
  const Field FVu = spec.F.applied(Vu), VFu = m.V.applied(Fu);
  const double FVu2 = liouville_integrate(g, FVu * FVu);
  const double VFu2 = liouville_integrate(g, VFu * VFu);
  const double Fu2 = liouville_integrate(g, Fu * Fu);
  const double KVu2 = liouville_integrate(g, dc.bigK * Vu * Vu);
  const Field a = Hu * Vu + spec.V_lambda * Vu * Vu;
  const Field b = Fu * Vu;
  const double bterm = parallel_sum(g.boundary.size(), [&](std::size_t i) {
    const BoundaryNode& n = g.boundary[i];
    return n.weight * (a(n.p) * boundary_contraction(m, spec.F, n) - b(n.p) * boundary_contraction(m, m.H, n));
  });
  BoundaryIdentityReport rep;
  rep.boundary_term = bterm;
  for (const auto& n : g.boundary) rep.max_iV = std::max(rep.max_iV, std::abs(boundary_contraction(m, m.V, n)));
  rep.identity = IdentityReport::make("1st-int-id", FVu2 - KVu2 + bterm, VFu2 - Fu2,
                                      {{"FVu^2", FVu2}, {"bigK Vu^2", KVu2}, {"boundary", bterm}, {"VFu^2", VFu2},
                                       {"Fu^2", Fu2}});
  return rep;
}

/// Riccati data at a state: r solves r' + r^2 + r(lambda I - V lambda) + Ktilde = 0
/// along the flow; rdot is its derivative along F.
struct RiccatiValue {
  double r = 0.0;
  double rdot = 0.0;
};
using RiccatiField = std::function<RiccatiValue(const SMPoint&)>;

namespace detail {

inline RiccatiValue riccati_from_frame_value(const ThermostatSpec& spec, const SMPoint& p, double r) {
  const double lI = spec.lambda_I(p), Vl = spec.V_lambda(p);
  return {r, -r * r - r * (lI - Vl) - spec.K_tilde(p)};
}

}  // namespace detail

/// r on the disk bundle from Jacobi fields that vanish at a point x0 outside
/// the disk: x0 lies `margin` beyond the backward boundary exit.
inline RiccatiField exterior_fan_r(const ThermostatSpec& spec, double margin = 0.1, double t_max = 100.0,
                                   const OdeOptions& ode = {}) {
  return [&spec, margin, t_max, ode](const SMPoint& p) {
    const double lb = exit_time(spec, p, -1, t_max, ode);
    const double T = lb + margin;
    const SMPoint x0 = flow_state(spec, p, -T, ode);
    std::vector<std::pair<double, std::vector<double>>> rec;
    const auto zeros = detail::y_zeros(spec, 0.0, detail::joint_state(x0, {0.0, 0.0, 1.0}), T, ode, 1e-12, &rec);
    if (!zeros.empty()) throw RiccatiUnavailable("conjugate point between the exterior start and the state");
    const auto& s = rec.back().second;
    if (s[4] == 0.0) throw RiccatiUnavailable("Jacobi field vanishes at the state");
    return detail::riccati_from_frame_value(spec, p, s[5] / s[4]);
  };
}

/// r+ from the limit construction, for closed models.
inline RiccatiField limit_r(const ThermostatSpec& spec, const RiccatiLimitOptions& opts = {}) {
  return [&spec, opts](const SMPoint& p) {
    try {
      const RiccatiLimit l = solve_riccati_limit(spec, p, opts);
      return detail::riccati_from_frame_value(spec, p, l.r_plus_frame);
    } catch (const BlowupInsideWindow& e) {
      throw RiccatiUnavailable(e.what());
    }
  };
}

/// int (F psi)^2 - int bigK psi^2 = int [F psi - r psi + psi V(lambda)]^2.
/// The terms record the transport integral int F((r - V lambda) psi^2), its
/// Stokes partner, and the pointwise defect of the expansion.
inline IdentityReport check_second_identity(const ThermostatSpec& spec, const Field& psi, const QuadratureGrid& g,
                                            const RiccatiField& r_field) {
  const DerivedCurvatures dc = spec.curvatures();
  const Field Fpsi = spec.F.applied(psi);
  const Field FVl = spec.F.applied(spec.V_lambda);
  const std::size_t n = g.nodes.size();
  std::vector<double> lhs(n), rhs(n), transport(n), partner(n), defect(n);
  parallel_for(n, [&](std::size_t i) {
    const SMPoint& p = g.nodes[i];
    const double ps = psi(p);
    const double fp = Fpsi(p), K = dc.bigK(p), Vl = spec.V_lambda(p);
    lhs[i] = fp * fp - K * ps * ps;
    if (ps == 0.0 && fp == 0.0) {
      rhs[i] = transport[i] = partner[i] = defect[i] = 0.0;
      return;
    }
    const RiccatiValue rv = r_field(p);
    const double q = fp - rv.r * ps + ps * Vl;
    rhs[i] = q * q;
    const double s = rv.r - Vl;
    transport[i] = (rv.rdot - FVl(p)) * ps * ps + 2.0 * s * ps * fp;
    partner[i] = s * ps * ps * (spec.lambda_I(p) + Vl);
    defect[i] = std::abs(rhs[i] - (lhs[i] - transport[i] - partner[i]));
  });
  auto integrate = [&](const std::vector<double>& v) {
    return parallel_sum(n, [&](std::size_t i) { return g.weights[i] * v[i]; });
  };
  const double L = integrate(lhs), R = integrate(rhs), T = integrate(transport), P = integrate(partner);
  return IdentityReport::make("second", L, R,
                              {{"transport", T},
                               {"stokes_partner", P},
                               {"pointwise_expansion_max", *std::max_element(defect.begin(), defect.end())}});
}

/// theta_x(v) for the base 1-form a dx + b dy, v the base part of X.
inline Field one_form_on_bundle(const SurfaceModel& m, const Field& a, const Field& b) {
  return a * m.X.cx + b * m.X.cy;
}

}  // namespace thermolab

#endif
