#ifndef THERMOLAB_ANOSOV_HPP
#define THERMOLAB_ANOSOV_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "thermolab/errors.hpp"
#include "thermolab/flow.hpp"
#include "thermolab/identities.hpp"
#include "thermolab/jacobi.hpp"
#include "thermolab/parallel.hpp"

namespace thermolab {

struct CriterionReport {
  double sup_value = 0.0;
  SMPoint argmax;
  bool anosov_flag = false;
};

/// sup over the grid of K - H(lambda) - lambda J + lambda^2 + (lambda I + V lambda)^2 / 4.
inline CriterionReport curvature_criterion(const SurfaceModel& m, const Field& lambda, const std::vector<SMPoint>& grid) {
  const Field D = derived_curvatures(m, lambda).anosovD;
  std::vector<double> v(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) { v[i] = D(grid[i]); });
  CriterionReport rep;
  const auto it = std::max_element(v.begin(), v.end());
  rep.sup_value = 0.0 + *it;
  rep.argmax = grid[static_cast<std::size_t>(it - v.begin())];
  rep.anosov_flag = rep.sup_value < 0.0;
  return rep;
}

/// The rate form in (y, z): -Ktilde y^2 + (V lambda + lambda I) y z + z^2.
inline Eigen::Matrix2d rate_form(double K_tilde, double s) {
  Eigen::Matrix2d Q;
  Q << -K_tilde, 0.5 * s, 0.5 * s, 1.0;
  return Q;
}

inline bool positive_definite(const Eigen::Matrix2d& Q) {
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(Q, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() > 0.0;
}

struct QuadraticFormSample {
  double t = 0.0;
  double y = 0.0;
  double z = 0.0;
  double q_value = 0.0;
  double rate = 0.0;
  /// central difference of y z along the trajectory (NaN at the ends).
  double fd_rate = 0.0;
  bool positive_definite = false;
};

struct QuadraticFormSeries {
  std::vector<QuadraticFormSample> samples;
  /// max |fd_rate - rate| / max(1, |rate|).
  double max_fd_deviation = 0.0;
};

/// Q = y z along a Jacobi trajectory sampled on a uniform grid.
inline QuadraticFormSeries quadratic_form_rate(const ThermostatSpec& spec, const JacobiTrajectory& traj) {
  QuadraticFormSeries out;
  const auto& s = traj.samples;
  for (const auto& js : s) {
    const double s_coef = spec.V_lambda(js.p) + spec.lambda_I(js.p);
    const double Kt = spec.K_tilde(js.p);
    QuadraticFormSample q;
    q.t = js.t;
    q.y = js.s.y;
    q.z = js.s.z;
    q.q_value = q.y * q.z;
    q.rate = -Kt * q.y * q.y + s_coef * q.y * q.z + q.z * q.z;
    q.positive_definite = positive_definite(rate_form(Kt, s_coef));
    q.fd_rate = std::numeric_limits<double>::quiet_NaN();
    out.samples.push_back(q);
  }
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    auto& q = out.samples[i];
    q.fd_rate = (out.samples[i + 1].q_value - out.samples[i - 1].q_value) / (s[i + 1].t - s[i - 1].t);
    out.max_fd_deviation = std::max(out.max_fd_deviation, std::abs(q.fd_rate - q.rate) / std::max(1.0, std::abs(q.rate)));
  }
  return out;
}

struct SylvesterReport {
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t mismatches = 0;
};

/// Positive definiteness of the rate form against the sign of anosovD at
/// each state with |anosovD| above `margin`.
inline SylvesterReport sylvester_equivalence(const ThermostatSpec& spec, const std::vector<SMPoint>& grid,
                                             double margin = 1e-9) {
  const Field D = spec.curvatures().anosovD;
  std::vector<int> state(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const SMPoint& p = grid[i];
    const double d = D(p);
    if (std::abs(d) <= margin) {
      state[i] = 0;
      return;
    }
    const bool pd = positive_definite(rate_form(spec.K_tilde(p), spec.V_lambda(p) + spec.lambda_I(p)));
    state[i] = pd == (d < 0.0) ? 1 : 2;
  });
  SylvesterReport rep;
  for (int s : state) {
    if (s == 0) ++rep.skipped;
    else ++rep.checked;
    if (s == 2) ++rep.mismatches;
  }
  return rep;
}

/// Growth exponent log(|y| + |z|)/T at the end of a trajectory. Diagnostic
/// only.
inline double finite_time_lyapunov(const JacobiTrajectory& traj) {
  const auto& e = traj.samples.back();
  if (e.t == 0.0) return 0.0;
  return std::log(std::abs(e.s.y) + std::abs(e.s.z)) / std::abs(e.t);
}

struct SolverOptions {
  int max_iterations = 10000;
  double tolerance = 1e-10;
};

struct CohomologyResult {
  double residual = 0.0;
  int iterations = 0;
  int n = 0;
  std::vector<double> u;  // mean-zero minimizer, index i + n (j + n k)
  std::vector<SMPoint> nodes;
};

/// F discretized on the n^3 periodic grid of the torus bundle by fourth
/// order central differences.
class GridGenerator {
 public:
  GridGenerator(const ThermostatSpec& spec, int n) : n_(n), N_(std::size_t(n) * n * n) {
    const QuadratureGrid g = torus_grid(spec.model, n);
    nodes_ = g.nodes;
    w_ = g.weights;
    cx_.resize(N_);
    cy_.resize(N_);
    ct_.resize(N_);
    parallel_for(N_, [&](std::size_t i) {
      cx_[i] = spec.F.cx(nodes_[i]);
      cy_[i] = spec.F.cy(nodes_[i]);
      ct_[i] = spec.F.ct(nodes_[i]);
    });
    use_t_ = std::any_of(ct_.begin(), ct_.end(), [](double v) { return v != 0.0; });
    inv_h_[0] = inv_h_[1] = n / 12.0;
    inv_h_[2] = n / (2.0 * std::numbers::pi) / 12.0;
  }

  std::size_t size() const { return N_; }
  const std::vector<double>& weights() const { return w_; }
  const std::vector<SMPoint>& nodes() const { return nodes_; }

  /// out = F u.
  void apply(const std::vector<double>& u, std::vector<double>& out) const {
    out.resize(N_);
    parallel_for(std::size_t(n_) * n_, [&](std::size_t jk) {
      const int j = int(jk % n_), k = int(jk / n_);
      for (int i = 0; i < n_; ++i) {
        const std::size_t id = index(i, j, k);
        double v = cx_[id] * d(u, i, j, k, 0) + cy_[id] * d(u, i, j, k, 1);
        if (use_t_) v += ct_[id] * d(u, i, j, k, 2);
        out[id] = v;
      }
    });
  }

  /// out = F^T v; the periodic central stencil is antisymmetric.
  void apply_transpose(const std::vector<double>& v, std::vector<double>& out) const {
    std::vector<double> a(N_), b(N_), c;
    for (std::size_t i = 0; i < N_; ++i) {
      a[i] = cx_[i] * v[i];
      b[i] = cy_[i] * v[i];
    }
    if (use_t_) {
      c.resize(N_);
      for (std::size_t i = 0; i < N_; ++i) c[i] = ct_[i] * v[i];
    }
    out.resize(N_);
    parallel_for(std::size_t(n_) * n_, [&](std::size_t jk) {
      const int j = int(jk % n_), k = int(jk / n_);
      for (int i = 0; i < n_; ++i) {
        double s = -d(a, i, j, k, 0) - d(b, i, j, k, 1);
        if (use_t_) s -= d(c, i, j, k, 2);
        out[index(i, j, k)] = s;
      }
    });
  }

  /// Squared weighted column norms sum_i w_i A_ij^2.
  std::vector<double> column_norms_squared() const {
    std::vector<double> out(N_, 0.0);
    static constexpr int off[4] = {-2, -1, 1, 2};
    static constexpr double coef[4] = {1.0, -8.0, 8.0, -1.0};
    for (int k = 0; k < n_; ++k) {
      for (int j = 0; j < n_; ++j) {
        for (int i = 0; i < n_; ++i) {
          const std::size_t id = index(i, j, k);
          for (int s = 0; s < 4; ++s) {
            const double ax = cx_[id] * coef[s] * inv_h_[0], ay = cy_[id] * coef[s] * inv_h_[1];
            out[index(wrap(i + off[s]), j, k)] += w_[id] * ax * ax;
            out[index(i, wrap(j + off[s]), k)] += w_[id] * ay * ay;
            if (use_t_) {
              const double at = ct_[id] * coef[s] * inv_h_[2];
              out[index(i, j, wrap(k + off[s]))] += w_[id] * at * at;
            }
          }
        }
      }
    }
    return out;
  }

  std::size_t index(int i, int j, int k) const { return std::size_t(i) + std::size_t(n_) * (j + std::size_t(n_) * k); }

 private:
  int wrap(int i) const { return (i % n_ + n_) % n_; }

  double d(const std::vector<double>& u, int i, int j, int k, int dir) const {
    auto at = [&](int o) {
      switch (dir) {
        case 0: return u[index(wrap(i + o), j, k)];
        case 1: return u[index(i, wrap(j + o), k)];
        default: return u[index(i, j, wrap(k + o))];
      }
    };
    return (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) * inv_h_[dir];
  }

  int n_;
  std::size_t N_;
  std::vector<SMPoint> nodes_;
  std::vector<double> w_, cx_, cy_, ct_;
  bool use_t_ = true;
  double inv_h_[3];
};

/// Least-squares solution of F u = rhs in L2(dmu) by CGLS with diagonal
/// column scaling. Throws SolverDiverged if the iteration cap is hit.
inline CohomologyResult solve_cohomological(const GridGenerator& A, const std::vector<double>& rhs,
                                            const SolverOptions& opts = {}) {
  const std::size_t N = A.size();
  const auto& w = A.weights();
  std::vector<double> sw(N), scale(N);
  const auto cn = A.column_norms_squared();
  for (std::size_t i = 0; i < N; ++i) {
    sw[i] = std::sqrt(w[i]);
    scale[i] = cn[i] > 0.0 ? 1.0 / std::sqrt(cn[i]) : 1.0;
  }
  auto dot = [N](const std::vector<double>& a, const std::vector<double>& b) {
    return parallel_sum(N, [&](std::size_t i) { return a[i] * b[i]; });
  };
  // M = W^{1/2} A S.
  std::vector<double> tmp(N), tmp2(N);
  auto applyM = [&](const std::vector<double>& z, std::vector<double>& out) {
    for (std::size_t i = 0; i < N; ++i) tmp[i] = scale[i] * z[i];
    A.apply(tmp, out);
    for (std::size_t i = 0; i < N; ++i) out[i] *= sw[i];
  };
  auto applyMt = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t i = 0; i < N; ++i) tmp2[i] = sw[i] * v[i];
    A.apply_transpose(tmp2, out);
    for (std::size_t i = 0; i < N; ++i) out[i] *= scale[i];
  };
  std::vector<double> b(N);
  for (std::size_t i = 0; i < N; ++i) b[i] = sw[i] * rhs[i];
  const double bnorm = std::sqrt(dot(b, b));
  CohomologyResult res;
  res.nodes = A.nodes();
  // ||M|| by a few power iterations on M^T M, for the stopping rule
  // ||M^T r|| <= tol ||M|| ||r||.
  double mnorm = 0.0;
  {
    std::vector<double> v(N), mv, mtmv;
    for (std::size_t i = 0; i < N; ++i) v[i] = 1.0 + 0.37 * std::sin(1.7 * double(i));
    for (int k = 0; k < 12; ++k) {
      const double vn = std::sqrt(dot(v, v));
      for (auto& e : v) e /= vn;
      applyM(v, mv);
      applyMt(mv, mtmv);
      mnorm = std::sqrt(std::sqrt(dot(mtmv, mtmv)));
      v = mtmv;
      if (mnorm == 0.0) break;
    }
  }
  std::vector<double> z(N, 0.0), r = b, s, p, q;
  applyMt(r, s);
  p = s;
  double gamma = dot(s, s);
  int it = 0;
  if (bnorm > 0.0 && std::sqrt(gamma) > opts.tolerance * mnorm * bnorm) {
    for (; it < opts.max_iterations; ++it) {
      applyM(p, q);
      const double qq = dot(q, q);
      if (qq == 0.0) break;
      const double alpha = gamma / qq;
      for (std::size_t i = 0; i < N; ++i) {
        z[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      applyMt(r, s);
      const double gnew = dot(s, s);
      const double rnorm = std::sqrt(dot(r, r));
      if (std::sqrt(gnew) <= opts.tolerance * mnorm * rnorm || rnorm <= opts.tolerance * bnorm) {
        ++it;
        break;
      }
      const double beta = gnew / gamma;
      gamma = gnew;
      for (std::size_t i = 0; i < N; ++i) p[i] = s[i] + beta * p[i];
    }
    if (it >= opts.max_iterations) {
      throw SolverDiverged("least-squares solver hit the cap of " + std::to_string(opts.max_iterations) +
                           " iterations");
    }
  }
  res.iterations = it;
  res.u.resize(N);
  for (std::size_t i = 0; i < N; ++i) res.u[i] = scale[i] * z[i];
  double mean = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    mean += w[i] * res.u[i];
    mass += w[i];
  }
  mean /= mass;
  for (auto& v : res.u) v -= mean;
  std::vector<double> Au;
  A.apply(res.u, Au);
  double num = 0.0;
  for (std::size_t i = 0; i < N; ++i) num += w[i] * (Au[i] - rhs[i]) * (Au[i] - rhs[i]);
  res.residual = bnorm > 0.0 ? std::sqrt(num) / bnorm : 0.0;
  return res;
}

/// min_u || F u - h o pi - theta_x(v) || over grid functions u on the n^3
/// torus bundle grid; the residual is relative to the right-hand side.
inline CohomologyResult cohomological_residual(const ThermostatSpec& spec, const Field& h, const Field& theta_x,
                                               const Field& theta_y, int n, const SolverOptions& opts = {}) {
  if (spec.model.domain.kind != Domain::Kind::torus) throw DomainError("cohomological equation needs the torus");
  if (n < 4) throw ConfigError("grid size must be at least 4");
  const GridGenerator A(spec, n);
  const Field rhs_f = h + one_form_on_bundle(spec.model, theta_x, theta_y);
  std::vector<double> rhs(A.size());
  parallel_for(A.size(), [&](std::size_t i) { rhs[i] = rhs_f(A.nodes()[i]); });
  CohomologyResult res = solve_cohomological(A, rhs, opts);
  res.n = n;
  return res;
}

}  // namespace thermolab

#endif
