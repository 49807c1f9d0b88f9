// lab <subcommand> --config <file.json> [--out <dir>] [--format json|csv]
//
// Exit codes: 0 success, 1 configuration or validation failure, 2 numerical
// failure.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "thermolab/experiment.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw thermolab::IoError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run(const std::string& command, const std::string& config_path, const std::string& out_dir,
        const std::string& format) {
  using namespace thermolab;
  try {
    const ExperimentConfig cfg = parse_config_text(read_file(config_path));
    const ReportBundle bundle = run_experiment(command, cfg);
    if (out_dir.empty()) {
      std::cout << to_json_text(bundle.data);
    } else {
      for (const auto& p : write_report(bundle, format, out_dir)) std::cerr << "wrote " << p.string() << "\n";
    }
    if (const auto it = bundle.data.find("warnings"); it != bundle.data.end() && it->get<long long>() > 0) {
      std::cerr << "warning: " << it->get<long long>() << " trapped or dropped states\n";
    }
    return 0;
  } catch (const LabError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.error_class() == ErrorClass::config ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermostat flow laboratory"};
  app.require_subcommand(1);
  std::string config_path, out_dir, format = "json";
  std::string chosen;
  for (const auto& name : thermolab::experiment_commands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "directory for report files; stdout when omitted");
    sub->add_option("--format", format, "report format")->check(CLI::IsMember({"json", "csv"}));
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return run(chosen, config_path, out_dir, format);
}
