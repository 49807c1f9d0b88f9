#ifndef THERMOLAB_XRAY_HPP
#define THERMOLAB_XRAY_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "thermolab/errors.hpp"
#include "thermolab/flow.hpp"
#include "thermolab/ode.hpp"
#include "thermolab/parallel.hpp"
#include "thermolab/quadrature.hpp"

namespace thermolab {

/// A function phi and a 1-form w_x dx + w_y dy on the base (theta ignored).
struct PairField {
  Field phi = 0.0;
  Field w_x = 0.0;
  Field w_y = 0.0;

  PairField operator+(const PairField& o) const { return {phi + o.phi, w_x + o.w_x, w_y + o.w_y}; }
};

/// phi + w(gamma') as a function on the bundle, set to zero over the
/// complement of the closed disk.
inline Field pair_integrand(const SurfaceModel& m, const PairField& pair) {
  const Field q = pair.phi + pair.w_x * m.X.cx + pair.w_y * m.X.cy;
  return Field::from_function(
      [q](const SMPoint& p) { return p.x * p.x + p.y * p.y <= 1.0 ? q(p) : 0.0; },
      FdOptions{1e-4, true});
}

struct RayNode {
  double x, y, vx, vy, w;
};

struct RayRecord {
  SMPoint entry;
  SMPoint exit;
  double length = 0.0;
  double value = 0.0;
  double entry_s = 0.0;      // polar angle of the entry point
  double entry_angle = 0.0;  // angle of the initial direction from the inward normal
};

struct RayOptions {
  OdeOptions ode;
  int gauss_points = 5;
  double t_max = 100.0;
};

namespace detail {

struct FlowRhs {
  const ThermostatSpec* spec;
  void operator()(double, const double* s, double* d) const { spec->velocity(s, d); }
};

inline bool on_boundary(const SMPoint& p) { return std::abs(1.0 - p.x * p.x - p.y * p.y) <= 1e-12; }

}  // namespace detail

/// Gauss-Legendre nodes along the orbit segment from the backward boundary
/// exit of `start` to its forward exit. Each accepted integrator step is one
/// panel; interior states are evaluated by single steps from the panel start.
inline std::vector<RayNode> ray_nodes(const ThermostatSpec& spec, const SMPoint& start, RayRecord& rec,
                                      const RayOptions& opts = {}) {
  SMPoint entry = start;
  if (!detail::on_boundary(start)) {
    const double lb = exit_time(spec, start, -1, opts.t_max, opts.ode);
    entry = flow_state(spec, start, -lb, opts.ode);
  }
  rec.entry = normalized(entry);
  const auto [gx, gw] = gauss_legendre(opts.gauss_points);
  DormandPrince<detail::FlowRhs> dp(3, detail::FlowRhs{&spec}, opts.ode);
  std::vector<double> y{entry.x, entry.y, entry.theta}, prev, trial(3);
  std::vector<RayNode> nodes;
  double t = 0.0, h = opts.ode.h_initial;
  auto add_panel = [&](const std::vector<double>& y0, double len) {
    for (std::size_t k = 0; k < gx.size(); ++k) {
      const double tau = 0.5 * len * (gx[k] + 1.0);
      dp.single_step(0.0, y0.data(), tau, trial.data());
      double d[3];
      spec.velocity(trial.data(), d);
      nodes.push_back({trial[0], trial[1], d[0], d[1], 0.5 * len * gw[k]});
    }
  };
  auto inside = [](const std::vector<double>& s) { return 1.0 - s[0] * s[0] - s[1] * s[1] >= -1e-14; };
  std::size_t steps = 0;
  for (;;) {
    if (t >= opts.t_max) throw TrappedOrbit("ray does not exit within the horizon");
    if (++steps > opts.ode.max_steps) throw StepFailure("step limit exceeded");
    prev = y;
    const double tp = t;
    dp.step(t, y, h, opts.t_max);
    if (!inside(y)) {
      double lo = 0.0, hi = t - tp;
      while (hi - lo > opts.ode.event_tol) {
        const double mid = 0.5 * (lo + hi);
        dp.single_step(tp, prev.data(), mid, trial.data());
        (inside(trial) ? lo : hi) = mid;
      }
      if (lo > 0.0) add_panel(prev, lo);
      dp.single_step(tp, prev.data(), lo, trial.data());
      rec.exit = normalized(SMPoint{trial[0], trial[1], trial[2]});
      rec.length = tp + lo;
      break;
    }
    add_panel(prev, t - tp);
  }
  rec.entry_s = normalize_angle(std::atan2(rec.entry.y, rec.entry.x));
  double d[3];
  const double e[3] = {entry.x, entry.y, entry.theta};
  spec.velocity(e, d);
  const double inward = std::atan2(-rec.entry.y, -rec.entry.x);
  rec.entry_angle = std::remainder(std::atan2(d[1], d[0]) - inward, 2.0 * std::numbers::pi);
  return nodes;
}

/// Integral of phi + w(gamma') from boundary to boundary through `start`.
inline RayRecord transform_pair(const ThermostatSpec& spec, const PairField& pair, const SMPoint& start,
                                const RayOptions& opts = {}) {
  RayRecord rec;
  const auto nodes = ray_nodes(spec, start, rec, opts);
  double v = 0.0;
  for (const auto& n : nodes) {
    const SMPoint p{n.x, n.y, 0.0};
    v += n.w * (pair.phi(p) + pair.w_x(p) * n.vx + pair.w_y(p) * n.vy);
  }
  rec.value = v;
  return rec;
}

struct RayFan {
  int n_boundary = 20;
  int n_angles = 20;
  double max_angle_deg = 85.0;  // largest deviation from the inward normal
  double arc_start = 0.0;
  double arc_length = 2.0 * std::numbers::pi;
};

/// Entry states: uniform boundary points times uniform directions within
/// max_angle_deg of the inward normal. The direction is the angle theta,
/// which is the Euclidean direction for conformal models.
inline std::vector<SMPoint> fan_entries(const RayFan& fan) {
  std::vector<SMPoint> out;
  const double full = 2.0 * std::numbers::pi;
  const bool closed = std::abs(fan.arc_length - full) < 1e-12;
  const double bmax = fan.max_angle_deg * std::numbers::pi / 180.0;
  for (int i = 0; i < fan.n_boundary; ++i) {
    const double a = fan.arc_start + fan.arc_length * (closed ? double(i) / fan.n_boundary
                                                              : (fan.n_boundary > 1 ? double(i) / (fan.n_boundary - 1) : 0.0));
    for (int j = 0; j < fan.n_angles; ++j) {
      const double b = fan.n_angles > 1 ? -bmax + 2.0 * bmax * j / (fan.n_angles - 1) : 0.0;
      out.push_back({std::cos(a), std::sin(a), normalize_angle(a + std::numbers::pi + b)});
    }
  }
  return out;
}

/// Orthonormal polynomial basis of total degree <= n on the unit disk with
/// respect to dx dy. Monomials x^i y^j are orthonormalized through the
/// Cholesky factor of their Gram matrix.
class PolynomialBasis {
 public:
  explicit PolynomialBasis(int degree = 8) : degree_(degree) {
    if (degree < 0 || degree > 30) throw ConfigError("polynomial degree must lie in [0, 30]");
    for (int d = 0; d <= degree; ++d) {
      for (int j = 0; j <= d; ++j) exps_.push_back({d - j, j});
    }
    const int m = size();
    const auto nodes = area_nodes(2 * degree + 4);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd mv(m);
    for (const auto& [x, y, w] : nodes) {
      monomials(x, y, mv.data());
      G.noalias() += w * mv * mv.transpose();
    }
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) throw IllConditioned("monomial Gram matrix is not positive definite");
    const Eigen::MatrixXd L = llt.matrixL();
    C_ = L.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(m, m));
  }

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(exps_.size()); }
  /// Monomial-to-basis change: basis_k = sum_j C(j, k) monomial_j.
  const Eigen::MatrixXd& change() const { return C_; }

  void monomials(double x, double y, double* out) const {
    double px[32], py[32];
    px[0] = py[0] = 1.0;
    for (int k = 1; k <= degree_; ++k) {
      px[k] = px[k - 1] * x;
      py[k] = py[k - 1] * y;
    }
    for (std::size_t k = 0; k < exps_.size(); ++k) out[k] = px[exps_[k][0]] * py[exps_[k][1]];
  }

  /// Values and first partials of the monomials.
  void monomial_jet(double x, double y, double* v, double* dx, double* dy) const {
    double px[32], py[32];
    px[0] = py[0] = 1.0;
    for (int k = 1; k <= degree_; ++k) {
      px[k] = px[k - 1] * x;
      py[k] = py[k - 1] * y;
    }
    for (std::size_t k = 0; k < exps_.size(); ++k) {
      const int i = exps_[k][0], j = exps_[k][1];
      v[k] = px[i] * py[j];
      dx[k] = i > 0 ? i * px[i - 1] * py[j] : 0.0;
      dy[k] = j > 0 ? j * px[i] * py[j - 1] : 0.0;
    }
  }

  Eigen::VectorXd values(double x, double y) const {
    Eigen::VectorXd mv(size());
    monomials(x, y, mv.data());
    return C_.transpose() * mv;
  }

  /// Coefficients of the L2 projection of a base function.
  Eigen::VectorXd project(const std::function<double(double, double)>& f) const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(size());
    for (const auto& [x, y, w] : area_nodes(2 * degree_ + 24)) c += (w * f(x, y)) * values(x, y);
    return c;
  }

  /// Product rule nodes on the disk exact for polynomials of degree < 2n in
  /// the radius and n in the angle.
  static std::vector<std::array<double, 3>> area_nodes(int n) {
    const auto [xr, wr] = gauss_legendre(n);
    const int na = 2 * n + 2;
    std::vector<std::array<double, 3>> out;
    for (int j = 0; j < na; ++j) {
      const double a = 2.0 * std::numbers::pi * j / na;
      for (int i = 0; i < n; ++i) {
        const double r = 0.5 * (xr[i] + 1.0);
        out.push_back({r * std::cos(a), r * std::sin(a), 0.5 * wr[i] * r * 2.0 * std::numbers::pi / na});
      }
    }
    return out;
  }

 private:
  int degree_;
  std::vector<std::array<int, 2>> exps_;
  Eigen::MatrixXd C_;
};

/// Linear map from pair coefficients [phi | w_x | w_y] (each in the
/// polynomial basis) to ray integrals.
struct DiscreteXRayOperator {
  Eigen::MatrixXd matrix;
  std::vector<RayRecord> rays;
  std::vector<SMPoint> entries;
  PolynomialBasis basis;
  std::size_t dropped = 0;
  RayOptions ray_options;

  int pair_size() const { return basis.size(); }

  Eigen::VectorXd discretize(const PairField& pair) const {
    const int m = basis.size();
    Eigen::VectorXd c(3 * m);
    c.segment(0, m) = basis.project([&](double x, double y) { return pair.phi({x, y, 0.0}); });
    c.segment(m, m) = basis.project([&](double x, double y) { return pair.w_x({x, y, 0.0}); });
    c.segment(2 * m, m) = basis.project([&](double x, double y) { return pair.w_y({x, y, 0.0}); });
    return c;
  }
};

inline DiscreteXRayOperator assemble_discrete_operator(const ThermostatSpec& spec, const std::vector<SMPoint>& entries,
                                                       int degree = 8, const RayOptions& opts = {}) {
  if (!spec.model.domain.has_boundary()) throw DomainError("X-ray operator needs the disk");
  DiscreteXRayOperator op{Eigen::MatrixXd(), {}, {}, PolynomialBasis(degree), 0, opts};
  const int m = op.basis.size();
  std::vector<Eigen::RowVectorXd> rows(entries.size());
  std::vector<RayRecord> recs(entries.size());
  std::vector<char> ok(entries.size(), 0);
  parallel_for(entries.size(), [&](std::size_t i) {
    try {
      const auto nodes = ray_nodes(spec, entries[i], recs[i], opts);
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(3 * m);
      std::vector<double> mv(m);
      for (const auto& n : nodes) {
        op.basis.monomials(n.x, n.y, mv.data());
        for (int k = 0; k < m; ++k) {
          row[k] += n.w * mv[k];
          row[m + k] += n.w * n.vx * mv[k];
          row[2 * m + k] += n.w * n.vy * mv[k];
        }
      }
      rows[i] = row;
      ok[i] = 1;
    } catch (const TrappedOrbit&) {
      ok[i] = 0;
    }
  });
  Eigen::MatrixXd Cb = Eigen::MatrixXd::Zero(3 * m, 3 * m);
  for (int b = 0; b < 3; ++b) Cb.block(b * m, b * m, m, m) = op.basis.change();
  std::vector<Eigen::RowVectorXd> kept;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!ok[i]) {
      ++op.dropped;
      continue;
    }
    kept.push_back(rows[i]);
    op.rays.push_back(recs[i]);
    op.entries.push_back(entries[i]);
  }
  op.matrix.resize(static_cast<Eigen::Index>(kept.size()), 3 * m);
  for (std::size_t i = 0; i < kept.size(); ++i) op.matrix.row(static_cast<Eigen::Index>(i)) = kept[i] * Cb;
  return op;
}

/// Discretized gauge pairs [0, d((1 - x^2 - y^2) q)] for monomials q of
/// degree < n, as columns.
inline Eigen::MatrixXd gauge_basis(const PolynomialBasis& basis) {
  const int m = basis.size(), n = basis.degree();
  std::vector<std::array<int, 2>> qs;
  for (int d = 0; d < n; ++d) {
    for (int j = 0; j <= d; ++j) qs.push_back({d - j, j});
  }
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(3 * m, static_cast<Eigen::Index>(qs.size()));
  for (std::size_t c = 0; c < qs.size(); ++c) {
    const int i = qs[c][0], j = qs[c][1];
    auto q = [&](double x, double y) { return std::pow(x, i) * std::pow(y, j); };
    auto qx = [&](double x, double y) { return i > 0 ? i * std::pow(x, i - 1) * std::pow(y, j) : 0.0; };
    auto qy = [&](double x, double y) { return j > 0 ? j * std::pow(x, i) * std::pow(y, j - 1) : 0.0; };
    const auto cx = basis.project([&](double x, double y) { return -2.0 * x * q(x, y) + (1.0 - x * x - y * y) * qx(x, y); });
    const auto cy = basis.project([&](double x, double y) { return -2.0 * y * q(x, y) + (1.0 - x * x - y * y) * qy(x, y); });
    G.col(static_cast<Eigen::Index>(c)).segment(m, m) = cx;
    G.col(static_cast<Eigen::Index>(c)).segment(2 * m, m) = cy;
  }
  return G;
}

struct KernelReport {
  std::vector<double> singular_values;
  int kernel_dimension = 0;
  int gauge_dimension = 0;
  int rank = 0;
  double gap = 0.0;
  double noise_floor = 0.0;
  std::vector<double> principal_angles_deg;
  double max_principal_angle_deg = 0.0;
  Eigen::MatrixXd U, V;  // thin factors of the operator

  bool dimension_match() const { return kernel_dimension == gauge_dimension; }
};

struct KernelOptions {
  /// Singular values below noise_floor * sigma_max are treated as zero.
  double noise_floor = 1e-9;
  double min_gap = 10.0;
};

/// SVD of the operator. The rank is placed at the largest ratio between
/// consecutive singular values, each floored at the noise level; a ratio
/// below min_gap means the data do not separate kernel from range.
inline KernelReport analyze_kernel(const DiscreteXRayOperator& op, const Eigen::MatrixXd& gauge,
                                   const KernelOptions& opts = {}) {
  const Eigen::Index ncols = op.matrix.cols();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(op.matrix, Eigen::ComputeFullV | Eigen::ComputeThinU);
  KernelReport rep;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(ncols);
  s.head(svd.singularValues().size()) = svd.singularValues();
  rep.singular_values.assign(s.data(), s.data() + s.size());
  const double smax = s.size() ? s[0] : 0.0;
  rep.noise_floor = opts.noise_floor * smax;
  auto fl = [&](double v) { return std::max(v, rep.noise_floor); };
  int best = 0;
  double gap = 0.0;
  for (Eigen::Index k = 0; k < ncols; ++k) {
    const double next = k + 1 < ncols ? s[k + 1] : 0.0;
    const double ratio = fl(s[k]) / fl(next);
    if (ratio > gap) {
      gap = ratio;
      best = static_cast<int>(k + 1);
    }
  }
  rep.gap = gap;
  rep.rank = best;
  rep.kernel_dimension = static_cast<int>(ncols) - best;
  rep.gauge_dimension = static_cast<int>(gauge.cols());
  rep.U = svd.matrixU();
  rep.V = svd.matrixV();
  if (gap < opts.min_gap) {
    throw IllConditioned("largest singular value gap is " + std::to_string(gap) + "x");
  }
  if (rep.kernel_dimension > 0 && gauge.cols() > 0) {
    const Eigen::MatrixXd Qg = Eigen::HouseholderQR<Eigen::MatrixXd>(gauge).householderQ() *
                               Eigen::MatrixXd::Identity(gauge.rows(), gauge.cols());
    const Eigen::MatrixXd Vn = rep.V.rightCols(rep.kernel_dimension);
    const Eigen::JacobiSVD<Eigen::MatrixXd> cs(Qg.transpose() * Vn);
    for (Eigen::Index i = 0; i < cs.singularValues().size(); ++i) {
      const double c = std::clamp(cs.singularValues()[i], -1.0, 1.0);
      rep.principal_angles_deg.push_back(std::acos(c) * 180.0 / std::numbers::pi);
    }
    // Unmatched dimensions count as orthogonal directions.
    for (Eigen::Index i = cs.singularValues().size(); i < std::max<Eigen::Index>(Vn.cols(), Qg.cols()); ++i) {
      rep.principal_angles_deg.push_back(90.0);
    }
    rep.max_principal_angle_deg =
        *std::max_element(rep.principal_angles_deg.begin(), rep.principal_angles_deg.end());
  } else if (rep.kernel_dimension != rep.gauge_dimension) {
    rep.max_principal_angle_deg = 90.0;
  }
  return rep;
}

/// Pair estimate from the truncated SVD; evaluation helpers give phi, the
/// 1-form and its exterior derivative d w = (dw_y/dx - dw_x/dy) dx^dy.
struct PairEstimate {
  Eigen::VectorXd coefficients;
  PolynomialBasis basis;

  double phi(double x, double y) const { return coefficients.head(basis.size()).dot(basis.values(x, y)); }
  std::array<double, 2> w(double x, double y) const {
    const int m = basis.size();
    const Eigen::VectorXd b = basis.values(x, y);
    return {coefficients.segment(m, m).dot(b), coefficients.segment(2 * m, m).dot(b)};
  }
  double dw(double x, double y) const {
    const int m = basis.size();
    Eigen::VectorXd v(m), dx(m), dy(m);
    basis.monomial_jet(x, y, v.data(), dx.data(), dy.data());
    const Eigen::MatrixXd& C = basis.change();
    return coefficients.segment(2 * m, m).dot(C.transpose() * dx) - coefficients.segment(m, m).dot(C.transpose() * dy);
  }
};

inline PairEstimate reconstruct_pair(const DiscreteXRayOperator& op, const KernelReport& kr,
                                     const Eigen::VectorXd& data) {
  if (data.size() != op.matrix.rows()) throw DomainError("ray data size does not match the operator");
  if (kr.gap < KernelOptions{}.min_gap) throw IllConditioned("no usable singular value gap");
  const int k = kr.rank;
  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(op.matrix.cols());
  for (int i = 0; i < k; ++i) {
    coeff += (kr.U.col(i).dot(data) / kr.singular_values[static_cast<std::size_t>(i)]) * kr.V.col(i);
  }
  return {coeff, op.basis};
}

struct ChiValue {
  double value = 0.0;
  /// |chi - chi with a longer integration tail beyond the boundary|.
  double tail_difference = 0.0;
};

/// chi(x, xi) = integral over [l, 0] of q along the orbit, l < 0 the backward
/// exit parameter; q is clamped to zero outside the disk.
inline ChiValue chi_field(const ThermostatSpec& spec, const Field& q, const SMPoint& s, double tail = 0.5,
                          const OdeOptions& ode = {}, double t_max = 100.0) {
  ChiValue out;
  if (s.x * s.x + s.y * s.y > 1.0) return out;
  auto qc = [&q](const double* st) {
    return st[0] * st[0] + st[1] * st[1] <= 1.0 ? q(SMPoint{st[0], st[1], st[2]}) : 0.0;
  };
  auto rhs = [&spec, &qc](double, const double* st, double* d) {
    spec.velocity(st, d);
    d[3] = qc(st);
  };
  auto noop = [](double, const std::vector<double>&) {};
  const auto first = integrate_ode(4, rhs, 0.0, {s.x, s.y, s.theta, 0.0}, -t_max, ode, noop,
                                   [](double, const std::vector<double>& st) { return 1.0 - st[0] * st[0] - st[1] * st[1]; });
  if (!first.hit) throw TrappedOrbit("backward orbit does not exit within the horizon");
  out.value = -first.y[3];
  OdeOptions fine = ode;
  fine.h_max = std::min(ode.h_max, 0.01);
  const auto longer = integrate_ode(4, rhs, 0.0, {s.x, s.y, s.theta, 0.0}, first.t - tail, fine, noop);
  out.tail_difference = std::abs(-longer[3] - out.value);
  return out;
}

/// Smooth cutoff equal to 1 on [0, a] and 0 on [b, inf).
inline double smooth_cutoff(double s, double a = 0.1, double b = 0.2) {
  if (s <= a) return 1.0;
  if (s >= b) return 0.0;
  auto g = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  const double u = (s - a) / (b - a);
  return g(1.0 - u) / (g(1.0 - u) + g(u));
}

/// psi vanishing on the circle with inward normal derivative w(nu):
/// psi = cutoff(s) s w_{x/|x|}(nu), s = 1 - |x|, nu = -x/|x|.
inline Field boundary_corrector(const PairField& pair) {
  const Field wx = pair.w_x, wy = pair.w_y;
  return Field::from_function(
      [wx, wy](const SMPoint& p) {
        const double r = std::hypot(p.x, p.y);
        const double s = 1.0 - r;
        if (s >= 0.2 || r == 0.0) return 0.0;
        const SMPoint b{p.x / r, p.y / r, 0.0};
        const double wn = -(wx(b) * b.x + wy(b) * b.y);
        return smooth_cutoff(s) * s * wn;
      },
      FdOptions{1e-4, true});
}

/// phi + (w - d psi)(gamma') with psi the boundary corrector of w.
inline Field corrected_integrand(const SurfaceModel& m, const PairField& pair, const Field& psi) {
  const Field dpx = psi.partial(Var::x), dpy = psi.partial(Var::y);
  const Field q = pair.phi + (pair.w_x - dpx) * m.X.cx + (pair.w_y - dpy) * m.X.cy;
  return q;
}

}  // namespace thermolab

#endif
