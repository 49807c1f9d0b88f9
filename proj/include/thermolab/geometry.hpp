#ifndef THERMOLAB_GEOMETRY_HPP
#define THERMOLAB_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "thermolab/errors.hpp"
#include "thermolab/field.hpp"
#include "thermolab/parallel.hpp"

namespace thermolab {

enum class ModelKind { conformal_torus, conformal_disk, synthetic };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::conformal_torus: return "conformal_torus";
    case ModelKind::conformal_disk: return "conformal_disk";
    default: return "synthetic";
  }
}

/// Base domain. `plane` is a coordinate box with no boundary handling, used
/// for synthetic models that live on open charts (half plane, sphere chart).
struct Domain {
  enum class Kind { torus, disk, plane };
  Kind kind = Kind::torus;
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;

  static Domain torus() { return {}; }
  static Domain disk() { return {Kind::disk, -1.0, 1.0, -1.0, 1.0}; }
  static Domain plane(double x0, double x1, double y0, double y1) { return {Kind::plane, x0, x1, y0, y1}; }

  bool has_boundary() const { return kind == Kind::disk; }
  bool contains(double x, double y, double slack = 1e-12) const {
    switch (kind) {
      case Kind::torus: return std::isfinite(x) && std::isfinite(y);
      case Kind::disk: return x * x + y * y <= 1.0 + slack;
      default: return x >= x_min - slack && x <= x_max + slack && y >= y_min - slack && y <= y_max + slack;
    }
  }
};

/// c_x d/dx + c_y d/dy + c_theta d/dtheta.
struct FrameOperator {
  Field cx, cy, ct;

  Field coefficient(Var v) const { return v == Var::x ? cx : v == Var::y ? cy : ct; }

  double apply(const Field& f, const SMPoint& p) const {
    double out = 0.0;
    if (!cx.is_constant(0.0)) out += cx(p) * f.partial_at(Var::x, p);
    if (!cy.is_constant(0.0)) out += cy(p) * f.partial_at(Var::y, p);
    if (!ct.is_constant(0.0)) out += ct(p) * f.partial_at(Var::theta, p);
    return out;
  }

  /// The operator applied to f as a field of its own. Stays analytic when f
  /// and the coefficients are analytic, otherwise wraps a finite-difference
  /// closure so that it can be differentiated again.
  Field applied(const Field& f) const {
    if (f.analytic() && cx.analytic() && cy.analytic() && ct.analytic()) {
      return cx * f.partial(Var::x) + cy * f.partial(Var::y) + ct * f.partial(Var::theta);
    }
    const FrameOperator self = *this;
    const FdOptions opts = f.analytic() ? FdOptions{} : f.fd_options();
    return Field::from_function([self, f](const SMPoint& p) { return self.apply(f, p); }, opts);
  }

  FrameOperator operator+(const FrameOperator& o) const { return {cx + o.cx, cy + o.cy, ct + o.ct}; }
  FrameOperator scaled(const Field& s) const { return {s * cx, s * cy, s * ct}; }

  FrameOperator as_finite_difference(FdOptions opts) const {
    return {cx.as_finite_difference(opts), cy.as_finite_difference(opts), ct.as_finite_difference(opts)};
  }
};

struct SurfaceModel {
  ModelKind kind = ModelKind::conformal_torus;
  /// Conformal exponent; also kept for synthetic models built from one, so
  /// that the unit-speed monitor is available.
  std::optional<Expression> phi;
  Domain domain;
  FrameOperator X, H, V;
  Field I, J, K;
  /// Liouville density with respect to dx dy dtheta.
  Field density;
  double tolerance = 1e-6;

  const FrameOperator& frame(char which) const {
    switch (which) {
      case 'X': return X;
      case 'H': return H;
      case 'V': return V;
      default: throw DomainError(std::string("unknown frame operator '") + which + "'");
    }
  }

  bool riemannian() const { return I.is_constant(0.0); }

  /// Base speed of the velocity (vx, vy) at the given base point, or NaN when
  /// the model carries no metric.
  double speed(double x, double y, double vx, double vy) const {
    if (!phi) return std::numeric_limits<double>::quiet_NaN();
    return std::exp(phi->evaluate(x, y, 0.0)) * std::hypot(vx, vy);
  }
};

inline double apply_frame_operator(const SurfaceModel& model, char which, const Field& f, const SMPoint& p) {
  if (!model.domain.contains(p.x, p.y, 1e-9)) throw DomainError("point outside the model domain");
  return model.frame(which).apply(f, p);
}

struct SyntheticSpec {
  FrameOperator X, H, V;
  Field I, J, K;
  Domain domain = Domain::torus();
  std::optional<Expression> phi;
};

struct FrameExpressions {
  FrameOperator X, H, V;
  Field K;
  Field density;
};

/// Frame of the metric e^{2 phi}(dx^2 + dy^2) in isothermal coordinates.
inline FrameExpressions conformal_frame(const Expression& phi) {
  const Expression th = Expression::theta();
  const Expression px = phi.derivative(Var::x), py = phi.derivative(Var::y);
  const Expression e = exp(-phi);
  const Expression c = cos(th), s = sin(th);
  FrameExpressions f;
  f.X = {e * c, e * s, e * (py * c - px * s)};
  f.H = {-(e * s), e * c, -(e * (px * c + py * s))};
  f.V = {0.0, 0.0, 1.0};
  const Expression lap = px.derivative(Var::x) + py.derivative(Var::y);
  f.K = -(exp(-2.0 * phi) * lap);
  f.density = exp(2.0 * phi);
  return f;
}

/// Validation grid over the bundle: n points per base direction and n angles.
inline std::vector<SMPoint> validation_grid(const Domain& d, int n) {
  std::vector<SMPoint> pts;
  const double two_pi = 2.0 * std::numbers::pi;
  for (int k = 0; k < n; ++k) {
    const double th = two_pi * k / n;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        switch (d.kind) {
          case Domain::Kind::torus: pts.push_back({double(i) / n, double(j) / n, th}); break;
          case Domain::Kind::disk: {
            const double r = 0.95 * (i + 0.5) / n, a = two_pi * (j + 0.5) / n;
            pts.push_back({r * std::cos(a), r * std::sin(a), th});
            break;
          }
          default: {
            const double u = n > 1 ? double(i) / (n - 1) : 0.5, v = n > 1 ? double(j) / (n - 1) : 0.5;
            pts.push_back({d.x_min + u * (d.x_max - d.x_min), d.y_min + v * (d.y_max - d.y_min), th});
          }
        }
      }
    }
  }
  return pts;
}

struct RelationResidual {
  std::string name;
  double max = 0.0;
  double rms = 0.0;
};

struct StructureReport {
  std::vector<RelationResidual> relations;
  double max_residual() const {
    double m = 0.0;
    for (const auto& r : relations) m = std::max(m, r.max);
    return m;
  }
};

struct ValidationOptions {
  /// Evaluate every coefficient derivative by finite differences with the
  /// given step instead of symbolically.
  std::optional<double> fd_step;
};

namespace detail {

/// Coefficientwise residual of [A,B] - C; [A,B]_k = A(b_k) - B(a_k).
inline RelationResidual commutator_residual(const std::string& name, const FrameOperator& A, const FrameOperator& B,
                                            const FrameOperator& C, const std::vector<SMPoint>& pts) {
  std::vector<double> worst(pts.size(), 0.0);
  parallel_for(pts.size(), [&](std::size_t i) {
    double m = 0.0;
    for (Var v : {Var::x, Var::y, Var::theta}) {
      const double lhs = A.apply(B.coefficient(v), pts[i]) - B.apply(A.coefficient(v), pts[i]);
      m = std::max(m, std::abs(lhs - C.coefficient(v)(pts[i])));
    }
    worst[i] = m;
  });
  RelationResidual r{name, 0.0, 0.0};
  double sq = 0.0;
  for (double w : worst) {
    r.max = std::max(r.max, w);
    sq += w * w;
  }
  r.rms = pts.empty() ? 0.0 : std::sqrt(sq / pts.size());
  return r;
}

}  // namespace detail

/// Residuals of [V,X]=H, [H,V]=X+IH+JV, [X,H]=KV and, with a thermostat
/// lambda, of the three relations for F = X + lambda V.
inline StructureReport validate_structure_relations(const SurfaceModel& model, const std::vector<SMPoint>& grid,
                                                    const std::optional<Field>& lambda = std::nullopt,
                                                    ValidationOptions opts = {}) {
  FrameOperator X = model.X, H = model.H, V = model.V;
  Field I = model.I, J = model.J, K = model.K;
  std::optional<Field> lam = lambda;
  if (opts.fd_step) {
    const FdOptions fd{*opts.fd_step, model.domain.kind == Domain::Kind::disk};
    X = X.as_finite_difference(fd);
    H = H.as_finite_difference(fd);
    V = V.as_finite_difference(fd);
    if (lam) lam = lam->as_finite_difference(fd);
  }
  StructureReport rep;
  rep.relations.push_back(detail::commutator_residual("[V,X]-H", V, X, H, grid));
  rep.relations.push_back(detail::commutator_residual("[H,V]-X-IH-JV", H, V, X + H.scaled(I) + V.scaled(J), grid));
  rep.relations.push_back(detail::commutator_residual("[X,H]-KV", X, H, V.scaled(K), grid));
  if (lam) {
    const Field& l = *lam;
    const FrameOperator F = X + V.scaled(l);
    const Field Vl = V.applied(l), Hl = H.applied(l);
    const Field Kt = K - Hl - l * J + l * l;
    rep.relations.push_back(detail::commutator_residual("[V,F]-H-V(lambda)V", V, F, H + V.scaled(Vl), grid));
    rep.relations.push_back(
        detail::commutator_residual("[H,V]-F-IH-(J-lambda)V", H, V, F + H.scaled(I) + V.scaled(J - l), grid));
    rep.relations.push_back(detail::commutator_residual("[F,H]-KtV+lambdaF+lambdaIH", F, H,
                                                        V.scaled(Kt) + F.scaled(-l) + H.scaled(-(l * I)), grid));
  }
  return rep;
}

inline void check_model(const SurfaceModel& m, int grid_n) {
  const auto rep = validate_structure_relations(m, validation_grid(m.domain, grid_n));
  for (const auto& r : rep.relations) {
    if (!(r.max <= m.tolerance)) {
      throw ValidationFailed("commutator residual of " + r.name + " is " + std::to_string(r.max) +
                             " (tolerance " + std::to_string(m.tolerance) + ")");
    }
  }
}

/// Conformal model e^{2 phi}|dx|^2 on the torus or the unit disk.
inline SurfaceModel build_conformal_model(ModelKind kind, const Expression& phi, double tolerance = 1e-6,
                                          int grid_n = 12) {
  if (kind == ModelKind::synthetic) throw ConfigError("build_conformal_model needs a conformal kind");
  if (!phi.derivative(Var::theta).is_constant(0.0)) throw DomainError("conformal exponent depends on theta");
  SurfaceModel m;
  m.kind = kind;
  m.phi = phi;
  m.domain = kind == ModelKind::conformal_torus ? Domain::torus() : Domain::disk();
  m.tolerance = tolerance;
  if (kind == ModelKind::conformal_torus) {
    const CompiledExpression f(phi);
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j < 7; ++j) {
        const double x = 0.137 * i + 0.011, y = 0.129 * j + 0.023;
        const double v = f(x, y, 0.0);
        const double scale = 1e-9 * std::max(1.0, std::abs(v));
        if (std::abs(f(x + 1.0, y, 0.0) - v) > scale || std::abs(f(x, y + 1.0, 0.0) - v) > scale) {
          throw DomainError("conformal exponent is not 1-periodic in x and y");
        }
      }
    }
  }
  const FrameExpressions fr = conformal_frame(phi);
  m.X = fr.X;
  m.H = fr.H;
  m.V = fr.V;
  m.I = 0.0;
  m.J = 0.0;
  m.K = fr.K;
  m.density = fr.density;
  check_model(m, grid_n);
  return m;
}

/// User-supplied frame; the Liouville density is 1/|det| of the coefficient
/// matrix, the volume form dual to the frame.
inline SurfaceModel build_synthetic_model(const SyntheticSpec& spec, double tolerance = 1e-6, int grid_n = 12) {
  SurfaceModel m;
  m.kind = ModelKind::synthetic;
  m.phi = spec.phi;
  m.domain = spec.domain;
  m.X = spec.X;
  m.H = spec.H;
  m.V = spec.V;
  m.I = spec.I;
  m.J = spec.J;
  m.K = spec.K;
  m.tolerance = tolerance;
  const FrameOperator &a = m.X, &b = m.H, &c = m.V;
  const Field det = a.cx * (b.cy * c.ct - b.ct * c.cy) - a.cy * (b.cx * c.ct - b.ct * c.cx) +
                    a.ct * (b.cx * c.cy - b.cy * c.cx);
  if (det.analytic()) {
    m.density = Field(1.0 / abs(det.expression()));
  } else {
    m.density = Field::from_function([det](const SMPoint& p) { return 1.0 / std::abs(det(p)); });
  }
  check_model(m, grid_n);
  return m;
}

/// Synthetic model carrying the conformal frame of phi on a coordinate box.
inline SyntheticSpec synthetic_from_conformal(const Expression& phi, const Domain& box) {
  const FrameExpressions fr = conformal_frame(phi);
  return SyntheticSpec{fr.X, fr.H, fr.V, 0.0, 0.0, fr.K, box, phi};
}

struct DerivedCurvatures {
  Field bigK;
  Field K_lambda;
  Field anosovD;
  /// K - H(lambda) - lambda J + lambda^2, shared by the three.
  Field K_tilde;
};

inline DerivedCurvatures derived_curvatures(const SurfaceModel& m, const Field& lambda) {
  if (lambda.is_constant(0.0)) return {m.K, m.K, m.K, m.K};
  const FrameOperator F = m.X + m.V.scaled(lambda);
  const Field Vl = m.V.applied(lambda);
  const Field Kt = m.K - m.H.applied(lambda) - lambda * m.J + lambda * lambda;
  const Field lI = lambda * m.I;
  DerivedCurvatures d;
  d.K_tilde = Kt;
  d.bigK = Kt + lI * Vl + F.applied(Vl);
  d.K_lambda = Kt + lI * Vl - F.applied(lI);
  const Field s = lI + Vl;
  d.anosovD = Kt + s * s * 0.25;
  return d;
}

struct MagneticReport {
  bool magnetic = false;
  double residual = 0.0;
};

inline MagneticReport classify_magnetic(const SurfaceModel& m, const Field& lambda, const std::vector<SMPoint>& grid,
                                        double tolerance = 1e-8) {
  const Field Vl = m.V.applied(lambda);
  std::vector<double> r(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) { r[i] = std::abs(Vl(grid[i]) + lambda(grid[i]) * m.I(grid[i])); });
  MagneticReport rep;
  for (double v : r) rep.residual = std::max(rep.residual, v);
  rep.magnetic = rep.residual < tolerance;
  return rep;
}

inline MagneticReport classify_magnetic(const SurfaceModel& m, const Field& lambda) {
  return classify_magnetic(m, lambda, validation_grid(m.domain, 12));
}

}  // namespace thermolab

#endif
