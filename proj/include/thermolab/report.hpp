#ifndef THERMOLAB_REPORT_HPP
#define THERMOLAB_REPORT_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermolab/errors.hpp"
#include "thermolab/flow.hpp"
#include "thermolab/identities.hpp"

namespace thermolab {

using Json = nlohmann::json;

/// Plot-ready numeric table.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// Structured result of one experiment: a JSON document plus named tables.
struct ReportBundle {
  std::string name;
  Json data = Json::object();
  std::map<std::string, Table> tables;
};

inline std::string format_number(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Infinity" : "-Infinity";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void json_string(const std::string& s, std::string& out) {
  out += Json(s).dump();
}

inline void write_json(const Json& j, std::string& out, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map keeps keys sorted
        if (!first) out += ",\n";
        first = false;
        out += pad;
        json_string(it.key(), out);
        out += ": ";
        write_json(it.value(), out, indent, depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ", ";
        first = false;
        write_json(v, out, indent, depth + 1);
      }
      out += "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_number(v) : Json(format_number(v)).dump();
      return;
    }
    default: out += j.dump();
  }
}

}  // namespace detail

/// Deterministic JSON: sorted keys, floats with 17 significant digits,
/// non-finite values as strings.
inline std::string to_json_text(const Json& j) {
  std::string out;
  detail::write_json(j, out, 2, 0);
  out += "\n";
  return out;
}

inline std::string to_csv_text(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
    out += "\n";
  }
  return out;
}

inline Json to_json(const IdentityReport& r) {
  Json terms = Json::object();
  for (const auto& [k, v] : r.terms) terms[k] = v;
  return {{"name", r.name},
          {"lhs", r.lhs},
          {"rhs", r.rhs},
          {"abs_residual", r.abs_residual},
          {"rel_residual", r.rel_residual},
          {"terms", terms}};
}

inline Table orbit_table(const Orbit& o) {
  Table t{{"t", "x", "y", "theta"}, {}};
  for (const auto& s : o.samples) t.rows.push_back({s.t, s.p.x, s.p.y, s.p.theta});
  return t;
}

inline Table spectrum_table(const std::vector<double>& sigma) {
  Table t{{"index", "sigma"}, {}};
  for (std::size_t i = 0; i < sigma.size(); ++i) t.rows.push_back({double(i), sigma[i]});
  return t;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write to " + path.string() + " failed");
}

/// Writes <dir>/<name>.json, or one <dir>/<name>_<table>.csv per table
/// (a key,value table of the top-level scalars when there are none).
/// Returns the files written.
inline std::vector<std::filesystem::path> write_report(const ReportBundle& b, const std::string& format,
                                                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  if (format == "json") {
    const auto p = dir / (b.name + ".json");
    write_text_file(p, to_json_text(b.data));
    written.push_back(p);
  } else if (format == "csv") {
    if (b.tables.empty()) {
      std::string text = "key,value\n";
      for (auto it = b.data.begin(); it != b.data.end(); ++it) {
        if (it->is_number()) text += it.key() + "," + format_number(it->get<double>()) + "\n";
        else if (it->is_boolean()) text += it.key() + "," + (it->get<bool>() ? "1" : "0") + "\n";
      }
      const auto p = dir / (b.name + ".csv");
      write_text_file(p, text);
      written.push_back(p);
    }
    for (const auto& [name, table] : b.tables) {
      const auto p = dir / (b.name + "_" + name + ".csv");
      write_text_file(p, to_csv_text(table));
      written.push_back(p);
    }
  } else {
    throw ConfigError("unknown report format '" + format + "'");
  }
  return written;
}

}  // namespace thermolab

#endif
