#ifndef THERMOLAB_QUADRATURE_HPP
#define THERMOLAB_QUADRATURE_HPP

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "thermolab/errors.hpp"
#include "thermolab/field.hpp"
#include "thermolab/geometry.hpp"
#include "thermolab/parallel.hpp"

namespace thermolab {

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

struct BoundaryNode {
  double s = 0.0;  // arclength along the unit circle (equal to the polar angle)
  double theta = 0.0;
  double weight = 0.0;  // ds dtheta
  SMPoint p;
};

/// Nodes and Liouville weights over SM, plus (s, theta) nodes on the
/// boundary of SM for disk models.
struct QuadratureGrid {
  std::vector<SMPoint> nodes;
  std::vector<double> weights;
  std::vector<BoundaryNode> boundary;
};

/// Periodic trapezoid rule on the torus bundle with n points per direction.
inline QuadratureGrid torus_grid(const SurfaceModel& m, int n_xy, int n_theta = 0) {
  if (m.domain.kind != Domain::Kind::torus) throw DomainError("torus grid needs a torus model");
  if (n_theta <= 0) n_theta = n_xy;
  QuadratureGrid g;
  const double two_pi = 2.0 * std::numbers::pi;
  const double cell = (1.0 / n_xy) * (1.0 / n_xy) * (two_pi / n_theta);
  for (int k = 0; k < n_theta; ++k) {
    for (int j = 0; j < n_xy; ++j) {
      for (int i = 0; i < n_xy; ++i) g.nodes.push_back({double(i) / n_xy, double(j) / n_xy, two_pi * k / n_theta});
    }
  }
  g.weights.resize(g.nodes.size());
  parallel_for(g.nodes.size(), [&](std::size_t i) { g.weights[i] = cell * m.density(g.nodes[i]); });
  return g;
}

/// Polar tensor grid on the disk bundle: Gauss-Legendre in the radius and
/// trapezoid in the base angle and the direction.
inline QuadratureGrid disk_grid(const SurfaceModel& m, int n_r, int n_a, int n_theta) {
  if (m.domain.kind != Domain::Kind::disk) throw DomainError("disk grid needs a disk model");
  QuadratureGrid g;
  const double two_pi = 2.0 * std::numbers::pi;
  const auto [xr, wr] = gauss_legendre(n_r);
  const double da = two_pi / n_a, dt = two_pi / n_theta;
  std::vector<double> base_w;
  for (int k = 0; k < n_theta; ++k) {
    const double th = dt * k;
    for (int j = 0; j < n_a; ++j) {
      const double a = da * j;
      for (int i = 0; i < n_r; ++i) {
        const double r = 0.5 * (xr[i] + 1.0);
        g.nodes.push_back({r * std::cos(a), r * std::sin(a), th});
        base_w.push_back(0.5 * wr[i] * r * da * dt);
      }
    }
  }
  g.weights.resize(g.nodes.size());
  parallel_for(g.nodes.size(), [&](std::size_t i) { g.weights[i] = base_w[i] * m.density(g.nodes[i]); });
  for (int k = 0; k < n_theta; ++k) {
    for (int j = 0; j < n_a; ++j) {
      const double a = da * j, th = dt * k;
      g.boundary.push_back({a, th, da * dt, {std::cos(a), std::sin(a), th}});
    }
  }
  return g;
}

/// Integral of f against the Liouville measure.
template <typename F>
double liouville_integrate(const QuadratureGrid& g, F&& f) {
  return parallel_sum(g.nodes.size(), [&](std::size_t i) { return g.weights[i] * f(g.nodes[i]); });
}

inline double liouville_integrate(const QuadratureGrid& g, const Field& f) {
  return liouville_integrate(g, [&f](const SMPoint& p) { return f(p); });
}

/// i_Y Theta on the boundary of the disk bundle, as a density against
/// ds dtheta with the outward orientation: rho * <(Y_x, Y_y), n_out>.
inline double boundary_contraction(const SurfaceModel& m, const FrameOperator& Y, const BoundaryNode& b) {
  return m.density(b.p) * (Y.cx(b.p) * std::cos(b.s) + Y.cy(b.p) * std::sin(b.s));
}

}  // namespace thermolab

#endif
