#ifndef THERMOLAB_EXPERIMENT_HPP
#define THERMOLAB_EXPERIMENT_HPP

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermolab/anosov.hpp"
#include "thermolab/errors.hpp"
#include "thermolab/expression.hpp"
#include "thermolab/field.hpp"
#include "thermolab/flow.hpp"
#include "thermolab/geometry.hpp"
#include "thermolab/identities.hpp"
#include "thermolab/jacobi.hpp"
#include "thermolab/quadrature.hpp"
#include "thermolab/report.hpp"
#include "thermolab/xray.hpp"

namespace thermolab {

/// Numeric parameters of an experiment. Every default here is part of the
/// config schema (see README); configs may override any subset.
struct ExperimentParams {
  int validation_grid = 12;  // n for the n^3 structure-relation check at model build
  int grid = 24;             // n for the n^3 state grid of validate / anosov / riccati bound
  std::array<double, 3> initial_state{0.0, 0.0, 0.0};
  double horizon = 10.0;
  double rtol = 1e-10;
  double atol = 1e-10;
  double sample_dt = 0.05;
  std::array<double, 3> jacobi_init{0.0, 0.0, 1.0};  // (a, y, z)
  double riccati_R = 5.0;
  double riccati_tol = 1e-6;
  double riccati_R_cap = 1024.0;
  int points = 1000;     // pestov sample count
  unsigned seed = 1;
  int quad_n = 32;       // torus bundle quadrature, per direction
  int quad_r = 24;       // disk bundle quadrature: radial GL nodes
  int quad_a = 64;       // base angles
  int quad_theta = 48;   // directions
  double exterior_margin = 0.1;
  int ray_boundary = 20;
  int ray_angles = 20;
  double ray_max_angle_deg = 85.0;
  int degree = 8;
  double noise_floor = 1e-9;
  double min_gap = 10.0;
  int trap_r = 4;
  int trap_a = 8;
  int trap_t = 8;
  double trap_t_max = 50.0;
  int cohomology_n = 32;
  int max_iterations = 10000;
  double solver_tol = 1e-10;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string kind = "conformal_torus";
  std::optional<Expression> phi;
  double tolerance = 1e-6;
  // synthetic frame
  std::array<Expression, 3> X, H, V;
  Expression I = 0.0, J = 0.0, K = 0.0;
  Domain domain = Domain::torus();
  Expression lambda = 0.0;
  std::map<std::string, Expression> fields;
  ExperimentParams params;

  Field field(const std::string& key, double fallback = 0.0) const {
    const auto it = fields.find(key);
    return it == fields.end() ? Field(fallback) : Field(it->second);
  }
  bool has_field(const std::string& key) const { return fields.count(key) != 0; }
};

namespace detail {

inline const nlohmann::json* member(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

inline Expression parse_config_expression(const nlohmann::json& v, const std::string& where) {
  if (v.is_number()) return Expression(v.get<double>());
  if (!v.is_string()) throw ConfigError(where + " must be a string expression or a number");
  try {
    return Expression::parse(v.get<std::string>());
  } catch (const LabError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline double number_at(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + " must be a number");
  return v.get<double>();
}

inline int grid_size_at(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where + " must be an integer");
  const auto n = v.get<long long>();
  if (n < 4) throw ConfigError(where + " must be at least 4");
  if (n > 100000) throw ConfigError(where + " is unreasonably large");
  return static_cast<int>(n);
}

inline int positive_int_at(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 1) throw ConfigError(where + " must be a positive integer");
  return static_cast<int>(v.get<long long>());
}

inline double positive_at(const nlohmann::json& v, const std::string& where) {
  const double d = number_at(v, where);
  if (!(d > 0.0) || !std::isfinite(d)) throw ConfigError(where + " must be positive");
  return d;
}

inline std::array<double, 3> triple_at(const nlohmann::json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw ConfigError(where + " must be an array of three numbers");
  return {number_at(v[0], where), number_at(v[1], where), number_at(v[2], where)};
}

inline ExperimentParams parse_params(const nlohmann::json& j) {
  ExperimentParams p;
  if (!j.is_object()) throw ConfigError("params must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const nlohmann::json& v = it.value();
    const std::string w = "params." + k;
    if (k == "validation_grid") p.validation_grid = grid_size_at(v, w);
    else if (k == "grid") p.grid = grid_size_at(v, w);
    else if (k == "initial_state") p.initial_state = triple_at(v, w);
    else if (k == "horizon") p.horizon = positive_at(v, w);
    else if (k == "rtol") p.rtol = positive_at(v, w);
    else if (k == "atol") p.atol = positive_at(v, w);
    else if (k == "sample_dt") p.sample_dt = positive_at(v, w);
    else if (k == "jacobi_init") p.jacobi_init = triple_at(v, w);
    else if (k == "riccati_R") p.riccati_R = positive_at(v, w);
    else if (k == "riccati_tol") p.riccati_tol = positive_at(v, w);
    else if (k == "riccati_R_cap") p.riccati_R_cap = positive_at(v, w);
    else if (k == "points") p.points = positive_int_at(v, w);
    else if (k == "seed") p.seed = static_cast<unsigned>(positive_int_at(v, w));
    else if (k == "quad_n") p.quad_n = grid_size_at(v, w);
    else if (k == "quad_r") p.quad_r = grid_size_at(v, w);
    else if (k == "quad_a") p.quad_a = grid_size_at(v, w);
    else if (k == "quad_theta") p.quad_theta = grid_size_at(v, w);
    else if (k == "exterior_margin") p.exterior_margin = positive_at(v, w);
    else if (k == "ray_boundary") p.ray_boundary = grid_size_at(v, w);
    else if (k == "ray_angles") p.ray_angles = grid_size_at(v, w);
    else if (k == "ray_max_angle_deg") {
      p.ray_max_angle_deg = positive_at(v, w);
      if (p.ray_max_angle_deg >= 90.0) throw ConfigError(w + " must be below 90");
    } else if (k == "degree") p.degree = positive_int_at(v, w);
    else if (k == "noise_floor") p.noise_floor = positive_at(v, w);
    else if (k == "min_gap") p.min_gap = positive_at(v, w);
    else if (k == "trap_r") p.trap_r = grid_size_at(v, w);
    else if (k == "trap_a") p.trap_a = grid_size_at(v, w);
    else if (k == "trap_t") p.trap_t = grid_size_at(v, w);
    else if (k == "trap_t_max") p.trap_t_max = positive_at(v, w);
    else if (k == "cohomology_n") p.cohomology_n = grid_size_at(v, w);
    else if (k == "max_iterations") p.max_iterations = positive_int_at(v, w);
    else if (k == "solver_tol") p.solver_tol = positive_at(v, w);
    else throw ConfigError("unknown parameter '" + k + "'");
  }
  return p;
}

inline std::array<Expression, 3> frame_at(const nlohmann::json& s, const char* key) {
  const auto* v = member(s, key);
  const std::string w = std::string("surface.") + key;
  if (!v) throw ConfigError(w + " is required for synthetic surfaces");
  if (!v->is_array() || v->size() != 3) throw ConfigError(w + " must list three coefficient expressions");
  return {parse_config_expression((*v)[0], w), parse_config_expression((*v)[1], w),
          parse_config_expression((*v)[2], w)};
}

}  // namespace detail

/// Reads and checks a config document. Any problem raises ConfigError.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::member;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const auto* schema = member(j, "schema");
  if (!schema || !schema->is_number_integer() || schema->get<int>() != 1) {
    throw ConfigError("config needs \"schema\": 1");
  }
  static const std::set<std::string> top{"schema", "name", "surface", "lambda", "fields", "params"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!top.count(it.key())) throw ConfigError("unknown top-level key '" + it.key() + "'");
  }
  ExperimentConfig c;
  if (const auto* n = member(j, "name")) {
    if (!n->is_string() || n->get<std::string>().empty()) throw ConfigError("name must be a nonempty string");
    c.name = n->get<std::string>();
    if (c.name.find_first_of("/\\") != std::string::npos) throw ConfigError("name must not contain path separators");
  }
  const auto* s = member(j, "surface");
  if (!s || !s->is_object()) throw ConfigError("surface object is required");
  const auto* kind = member(*s, "kind");
  if (!kind || !kind->is_string()) throw ConfigError("surface.kind is required");
  c.kind = kind->get<std::string>();
  if (const auto* t = member(*s, "tolerance")) c.tolerance = detail::positive_at(*t, "surface.tolerance");
  if (const auto* phi = member(*s, "phi")) c.phi = detail::parse_config_expression(*phi, "surface.phi");
  if (c.kind == "conformal_torus" || c.kind == "conformal_disk") {
    if (!c.phi) c.phi = Expression(0.0);
    c.domain = c.kind == "conformal_torus" ? Domain::torus() : Domain::disk();
  } else if (c.kind == "synthetic") {
    c.X = detail::frame_at(*s, "X");
    c.H = detail::frame_at(*s, "H");
    c.V = detail::frame_at(*s, "V");
    if (const auto* v = member(*s, "I")) c.I = detail::parse_config_expression(*v, "surface.I");
    if (const auto* v = member(*s, "J")) c.J = detail::parse_config_expression(*v, "surface.J");
    const auto* K = member(*s, "K");
    if (!K) throw ConfigError("surface.K is required for synthetic surfaces");
    c.K = detail::parse_config_expression(*K, "surface.K");
    if (const auto* d = member(*s, "domain")) {
      const auto* dk = member(*d, "kind");
      const std::string k = dk && dk->is_string() ? dk->get<std::string>() : "";
      if (k == "torus") c.domain = Domain::torus();
      else if (k == "disk") c.domain = Domain::disk();
      else if (k == "plane") {
        const auto* box = member(*d, "box");
        if (!box || !box->is_array() || box->size() != 4) {
          throw ConfigError("surface.domain.box must be [x_min, x_max, y_min, y_max]");
        }
        const double x0 = detail::number_at((*box)[0], "box"), x1 = detail::number_at((*box)[1], "box");
        const double y0 = detail::number_at((*box)[2], "box"), y1 = detail::number_at((*box)[3], "box");
        if (!(x0 < x1 && y0 < y1)) throw ConfigError("surface.domain.box is empty");
        c.domain = Domain::plane(x0, x1, y0, y1);
      } else {
        throw ConfigError("surface.domain.kind must be torus, disk or plane");
      }
    }
  } else {
    throw ConfigError("surface.kind must be conformal_torus, conformal_disk or synthetic");
  }
  if (const auto* l = member(j, "lambda")) c.lambda = detail::parse_config_expression(*l, "lambda");
  if (const auto* f = member(j, "fields")) {
    if (!f->is_object()) throw ConfigError("fields must be an object");
    static const std::set<std::string> known{"phi", "w_x", "w_y", "u", "psi", "h", "theta_x", "theta_y"};
    for (auto it = f->begin(); it != f->end(); ++it) {
      if (!known.count(it.key())) throw ConfigError("unknown field '" + it.key() + "'");
      c.fields[it.key()] = detail::parse_config_expression(it.value(), "fields." + it.key());
    }
  }
  if (const auto* p = member(j, "params")) c.params = detail::parse_params(*p);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline SurfaceModel build_model(const ExperimentConfig& c) {
  const int n = c.params.validation_grid;
  if (c.kind == "conformal_torus") return build_conformal_model(ModelKind::conformal_torus, *c.phi, c.tolerance, n);
  if (c.kind == "conformal_disk") return build_conformal_model(ModelKind::conformal_disk, *c.phi, c.tolerance, n);
  SyntheticSpec s;
  s.X = {Field(c.X[0]), Field(c.X[1]), Field(c.X[2])};
  s.H = {Field(c.H[0]), Field(c.H[1]), Field(c.H[2])};
  s.V = {Field(c.V[0]), Field(c.V[1]), Field(c.V[2])};
  s.I = c.I;
  s.J = c.J;
  s.K = c.K;
  s.domain = c.domain;
  s.phi = c.phi;
  return build_synthetic_model(s, c.tolerance, n);
}

namespace detail {

inline OdeOptions ode_options(const ExperimentParams& p) {
  OdeOptions o;
  o.rtol = p.rtol;
  o.atol = p.atol;
  return o;
}

inline SMPoint initial_point(const ExperimentParams& p) {
  return {p.initial_state[0], p.initial_state[1], p.initial_state[2]};
}

inline Json point_json(const SMPoint& p) { return Json::array({p.x, p.y, p.theta}); }

/// Uniform random states over the model's base domain.
inline std::vector<SMPoint> random_states(const Domain& d, int count, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<SMPoint> out;
  while (static_cast<int>(out.size()) < count) {
    const double th = 2.0 * std::numbers::pi * u01(rng);
    if (d.kind == Domain::Kind::torus) {
      out.push_back({u01(rng), u01(rng), th});
    } else if (d.kind == Domain::Kind::disk) {
      const double x = 2.0 * u01(rng) - 1.0, y = 2.0 * u01(rng) - 1.0;
      if (x * x + y * y < 0.95 * 0.95) out.push_back({x, y, th});
    } else {
      out.push_back({d.x_min + (d.x_max - d.x_min) * u01(rng), d.y_min + (d.y_max - d.y_min) * u01(rng), th});
    }
  }
  return out;
}

inline QuadratureGrid bundle_grid(const SurfaceModel& m, const ExperimentParams& p) {
  if (m.domain.kind == Domain::Kind::torus) return torus_grid(m, p.quad_n, p.quad_theta);
  if (m.domain.kind == Domain::Kind::disk) return disk_grid(m, p.quad_r, p.quad_a, p.quad_theta);
  throw DomainError("integral identities need a torus or disk model");
}

inline Json limit_json(const RiccatiLimit& l) {
  return {{"r_plus", l.r_plus},
          {"r_minus", l.r_minus},
          {"r_plus_frame", l.r_plus_frame},
          {"r_minus_frame", l.r_minus_frame},
          {"R_plus", l.R_plus},
          {"R_minus", l.R_minus},
          {"plus_sequence", l.plus_sequence},
          {"minus_sequence", l.minus_sequence}};
}

inline Table residual_table(const IdentityReport& r) {
  Table t{{"lhs", "rhs", "abs_residual", "rel_residual"}, {{r.lhs, r.rhs, r.abs_residual, r.rel_residual}}};
  return t;
}

inline DiscreteXRayOperator xray_operator(const ThermostatSpec& spec, const ExperimentParams& p) {
  if (spec.model.domain.kind != Domain::Kind::disk) throw DomainError("x-ray experiments need a disk model");
  RayFan fan;
  fan.n_boundary = p.ray_boundary;
  fan.n_angles = p.ray_angles;
  fan.max_angle_deg = p.ray_max_angle_deg;
  RayOptions ro;
  ro.ode = ode_options(p);
  ro.t_max = p.trap_t_max;
  return assemble_discrete_operator(spec, fan_entries(fan), p.degree, ro);
}

inline KernelReport kernel_of(const DiscreteXRayOperator& op, const ExperimentParams& p) {
  KernelOptions ko;
  ko.noise_floor = p.noise_floor;
  ko.min_gap = p.min_gap;
  return analyze_kernel(op, gauge_basis(op.basis), ko);
}

}  // namespace detail

inline const std::vector<std::string>& experiment_commands() {
  static const std::vector<std::string> c{"validate", "flow",  "jacobi", "riccati", "pestov",
                                          "identity", "xray",  "invert", "anosov",  "cohomology"};
  return c;
}

/// Runs one subcommand on a parsed config.
inline ReportBundle run_experiment(const std::string& command, const ExperimentConfig& cfg) {
  const ExperimentParams& p = cfg.params;
  ReportBundle b;
  b.name = cfg.name + "_" + command;
  Json& d = b.data;
  d["command"] = command;
  d["name"] = cfg.name;
  d["surface"] = cfg.kind;
  d["lambda"] = cfg.lambda.to_string();

  const SurfaceModel model = build_model(cfg);
  const ThermostatSpec spec(model, Field(cfg.lambda));
  const OdeOptions ode = detail::ode_options(p);

  if (command == "validate") {
    const auto grid = validation_grid(model.domain, p.grid);
    const StructureReport rep = validate_structure_relations(model, grid, spec.lambda);
    Table t{{"index", "max", "rms"}, {}};
    Json rel = Json::object();
    for (std::size_t i = 0; i < rep.relations.size(); ++i) {
      const auto& r = rep.relations[i];
      rel[r.name] = {{"max", r.max}, {"rms", r.rms}};
      t.rows.push_back({double(i), r.max, r.rms});
    }
    d["relations"] = rel;
    d["max_residual"] = rep.max_residual();
    d["grid_points"] = grid.size();
    const MagneticReport mag = classify_magnetic(model, spec.lambda, grid);
    d["magnetic"] = mag.magnetic;
    d["magnetic_residual"] = mag.residual;
    b.tables["relations"] = t;
  } else if (command == "flow") {
    FlowOptions fo;
    fo.ode = ode;
    const SMPoint p0 = detail::initial_point(p);
    const Orbit o = integrate_orbit(spec, p0, p.horizon, fo);
    d["initial_state"] = detail::point_json(p0);
    d["end_state"] = detail::point_json(o.end_state());
    d["samples"] = o.samples.size();
    d["speed_defect"] = o.speed_defect;
    if (o.exit_time) d["exit_time"] = *o.exit_time;
    if (model.domain.has_boundary()) {
      const RegularityReport rr = scan_regularity(spec, p0, std::max(p.horizon, p.trap_t_max));
      d["regular"] = rr.regular;
      d["forward_exit"] = rr.forward_exit;
      d["backward_exit"] = rr.backward_exit;
    }
    b.tables["orbit"] = orbit_table(o);
  } else if (command == "jacobi") {
    const SMPoint p0 = detail::initial_point(p);
    JacobiOptions jo;
    jo.ode = ode;
    jo.sample_dt = p.sample_dt;
    const JacobiState init{p.jacobi_init[0], p.jacobi_init[1], p.jacobi_init[2]};
    const JacobiTrajectory traj = integrate_jacobi(spec, p0, init, p.horizon, jo);
    d["second_order_residual"] = traj.second_order_residual;
    d["conjugate_times"] = detect_conjugate_points(spec, p0, p.horizon, ode);
    d["finite_time_lyapunov"] = finite_time_lyapunov(traj);
    Table t{{"t", "x", "y", "theta", "a", "jy", "jz", "ydot"}, {}};
    for (const auto& s : traj.samples) t.rows.push_back({s.t, s.p.x, s.p.y, s.p.theta, s.s.a, s.s.y, s.s.z, s.ydot});
    b.tables["jacobi"] = t;
  } else if (command == "riccati") {
    const SMPoint p0 = detail::initial_point(p);
    Json fin = Json::object();
    for (int sign : {1, -1}) {
      const RiccatiTrace tr = solve_riccati_finite(spec, p0, p.riccati_R, sign, RiccatiWindow::full, ode);
      fin[sign > 0 ? "plus" : "minus"] = {{"value", tr.value}, {"value_frame", tr.value_frame}};
      Table t{{"t", "r", "r_frame"}, {}};
      for (const auto& s : tr.samples) t.rows.push_back({s.t, s.r, s.r_frame});
      b.tables[sign > 0 ? "plus" : "minus"] = t;
    }
    d["R"] = p.riccati_R;
    d["finite"] = fin;
    RiccatiLimitOptions lo;
    lo.tol = p.riccati_tol;
    lo.R_cap = p.riccati_R_cap;
    lo.ode = ode;
    const RiccatiLimit lim = solve_riccati_limit(spec, p0, lo);
    d["limit"] = detail::limit_json(lim);
    const BoundConstants bc = riccati_bound_constants(spec, validation_grid(model.domain, p.grid));
    d["bound"] = {{"A", bc.A},
                  {"B", bc.B},
                  {"C", bc.C},
                  {"value", bc.bound()},
                  {"within", std::max(std::abs(lim.r_plus), std::abs(lim.r_minus)) <= bc.bound() + 1e-6}};
  } else if (command == "pestov") {
    if (!cfg.has_field("u")) throw ConfigError("pestov needs fields.u");
    const auto pts = detail::random_states(model.domain, p.points, p.seed);
    const PestovReport r = check_pestov_pointwise(spec, cfg.field("u"), pts);
    d["max_residual"] = r.max_residual;
    d["max_lhs"] = r.max_lhs;
    d["points"] = r.points;
  } else if (command == "identity") {
    if (!cfg.has_field("u") && !cfg.has_field("psi")) throw ConfigError("identity needs fields.u or fields.psi");
    const QuadratureGrid g = detail::bundle_grid(model, p);
    if (cfg.has_field("u")) {
      const Field u = cfg.field("u");
      if (model.domain.kind == Domain::Kind::torus) {
        const ClosedIdentityReports r = check_integral_identity_closed(spec, u, g);
        d["intid"] = to_json(r.intid);
        d["frst"] = to_json(r.frst);
        d["scnd"] = to_json(r.scnd);
        Json lie = Json::array();
        for (const auto& l : check_lie_derivatives(spec, g, u)) lie.push_back(to_json(l));
        d["lie_derivatives"] = lie;
        b.tables["intid"] = detail::residual_table(r.intid);
      } else {
        const BoundaryIdentityReport r = check_integral_identity_boundary(spec, u, g);
        d["boundary_identity"] = to_json(r.identity);
        d["boundary_term"] = r.boundary_term;
        d["max_iV"] = r.max_iV;
        b.tables["boundary_identity"] = detail::residual_table(r.identity);
      }
    }
    if (cfg.has_field("psi")) {
      RiccatiField rf;
      if (model.domain.has_boundary()) {
        rf = exterior_fan_r(spec, p.exterior_margin, p.trap_t_max, ode);
      } else {
        RiccatiLimitOptions lo;
        lo.tol = p.riccati_tol;
        lo.R_cap = p.riccati_R_cap;
        lo.ode = ode;
        rf = limit_r(spec, lo);
      }
      const IdentityReport r = check_second_identity(spec, cfg.field("psi"), g, rf);
      d["second_identity"] = to_json(r);
      b.tables["second_identity"] = detail::residual_table(r);
    }
  } else if (command == "xray") {
    if (model.domain.kind != Domain::Kind::disk) throw DomainError("x-ray experiments need a disk model");
    const NontrappingReport nt =
        nontrapping_scan(spec, disk_state_grid(p.trap_r, p.trap_a, p.trap_t), p.trap_t_max);
    d["trapped_states"] = nt.trapped.size();
    d["trap_states_sampled"] = nt.sampled;
    const DiscreteXRayOperator op = detail::xray_operator(spec, p);
    d["rays"] = op.rays.size();
    d["dropped_rays"] = op.dropped;
    d["warnings"] = nt.trapped.size() + op.dropped;
    d["columns"] = op.matrix.cols();
    try {
      const KernelReport kr = detail::kernel_of(op, p);
      d["kernel_dimension"] = kr.kernel_dimension;
      d["gauge_dimension"] = kr.gauge_dimension;
      d["rank"] = kr.rank;
      d["gap"] = kr.gap;
      d["max_principal_angle_deg"] = kr.max_principal_angle_deg;
      b.tables["spectrum"] = spectrum_table(kr.singular_values);
    } catch (const IllConditioned& e) {
      // A trapped or degenerate fan still reports its rays.
      d["kernel_error"] = e.what();
    }
    if (cfg.has_field("phi") || cfg.has_field("w_x") || cfg.has_field("w_y")) {
      const PairField pair{cfg.field("phi"), cfg.field("w_x"), cfg.field("w_y")};
      RayOptions ro = op.ray_options;
      Table t{{"entry_s", "entry_angle", "length", "value"}, {}};
      for (const auto& r : op.rays) {
        const RayRecord rec = transform_pair(spec, pair, r.entry, ro);
        t.rows.push_back({rec.entry_s, rec.entry_angle, rec.length, rec.value});
      }
      b.tables["rays"] = t;
    }
  } else if (command == "invert") {
    const DiscreteXRayOperator op = detail::xray_operator(spec, p);
    const KernelReport kr = detail::kernel_of(op, p);
    const PairField pair{cfg.field("phi"), cfg.field("w_x"), cfg.field("w_y")};
    Eigen::VectorXd data(static_cast<Eigen::Index>(op.rays.size()));
    for (std::size_t i = 0; i < op.rays.size(); ++i) {
      data[static_cast<Eigen::Index>(i)] = transform_pair(spec, pair, op.rays[i].entry, op.ray_options).value;
    }
    const PairEstimate est = reconstruct_pair(op, kr, data);
    double err = 0.0, norm = 0.0, derr = 0.0, dnorm = 0.0;
    const Field dw_true = pair.w_y.partial(Var::x) - pair.w_x.partial(Var::y);
    for (const auto& [x, y, w] : PolynomialBasis::area_nodes(2 * p.degree + 8)) {
      const double ph = pair.phi({x, y, 0.0});
      err += w * std::pow(est.phi(x, y) - ph, 2);
      norm += w * ph * ph;
      const double dt = dw_true({x, y, 0.0});
      derr += w * std::pow(est.dw(x, y) - dt, 2);
      dnorm += w * dt * dt;
    }
    d["rays"] = op.rays.size();
    d["rank"] = kr.rank;
    d["phi_l2_error"] = std::sqrt(err);
    d["phi_relative_error"] = norm > 0.0 ? std::sqrt(err / norm) : std::sqrt(err);
    d["dw_l2_error"] = std::sqrt(derr);
    d["dw_relative_error"] = dnorm > 0.0 ? std::sqrt(derr / dnorm) : std::sqrt(derr);
    d["data_norm"] = data.norm();
  } else if (command == "anosov") {
    const auto grid = validation_grid(model.domain, p.grid);
    const CriterionReport cr = curvature_criterion(model, spec.lambda, grid);
    d["sup_value"] = cr.sup_value;
    d["argmax"] = detail::point_json(cr.argmax);
    d["anosov_flag"] = cr.anosov_flag;
    const SylvesterReport sr = sylvester_equivalence(spec, grid);
    d["sylvester"] = {{"checked", sr.checked}, {"skipped", sr.skipped}, {"mismatches", sr.mismatches}};
    JacobiOptions jo;
    jo.ode = ode;
    jo.sample_dt = p.sample_dt;
    const JacobiTrajectory traj = integrate_jacobi(spec, detail::initial_point(p),
                                                   {p.jacobi_init[0], p.jacobi_init[1], p.jacobi_init[2]},
                                                   p.horizon, jo);
    const QuadraticFormSeries q = quadratic_form_rate(spec, traj);
    d["finite_time_lyapunov"] = finite_time_lyapunov(traj);
    d["quadratic_form_fd_deviation"] = q.max_fd_deviation;
    Table t{{"t", "y", "z", "q", "rate", "fd_rate", "positive_definite"}, {}};
    for (const auto& s : q.samples) {
      t.rows.push_back({s.t, s.y, s.z, s.q_value, s.rate, s.fd_rate, s.positive_definite ? 1.0 : 0.0});
    }
    b.tables["quadratic_form"] = t;
  } else if (command == "cohomology") {
    SolverOptions so;
    so.max_iterations = p.max_iterations;
    so.tolerance = p.solver_tol;
    const CohomologyResult r =
        cohomological_residual(spec, cfg.field("h"), cfg.field("theta_x"), cfg.field("theta_y"), p.cohomology_n, so);
    d["residual"] = r.residual;
    d["iterations"] = r.iterations;
    d["n"] = r.n;
    b.tables["residual"] = Table{{"n", "residual", "iterations"}, {{double(r.n), r.residual, double(r.iterations)}}};
  } else {
    throw ConfigError("unknown subcommand '" + command + "'");
  }
  return b;
}

}  // namespace thermolab

#endif
