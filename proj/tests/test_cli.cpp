#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static const fs::path d = [] {
    const fs::path p = fs::temp_directory_path() / "thermolab_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = work_dir() / (name + ".json");
  std::ofstream(p) << text;
  return p;
}

Result run(const std::string& args) {
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = std::string(LAB_EXECUTABLE) + " " + args + " 2>" + err.string();
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(err);
  std::ostringstream ss;
  ss << f.rdbuf();
  r.err = ss.str();
  return r;
}

const char* flat_torus = R"cfg({
  "schema": 1,
  "name": "flat",
  "surface": {"kind": "conformal_torus", "phi": "0"},
  "lambda": "0",
  "fields": {"h": "sin(2*pi*x)"},
  "params": {"validation_grid": 6, "cohomology_n": 8}
})cfg";

}  // namespace

TEST(Cli, ValidateFlatTorus) {
  const Result r = run("validate --config " + write_config("flat", flat_torus).string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["name"], "flat");
  EXPECT_EQ(run("validate --config " + write_config("flat", flat_torus).string()).out, r.out);
}

TEST(Cli, TrappedXRayWarnsButSucceeds) {
  const auto cfg = write_config("trapped", R"cfg({
    "schema": 1, "name": "trapped",
    "surface": {"kind": "conformal_disk", "phi": "0"},
    "lambda": "5",
    "params": {"ray_boundary": 4, "ray_angles": 4, "degree": 2, "trap_r": 4, "trap_a": 4, "trap_t": 4, "trap_t_max": 10}
  })cfg");
  const Result r = run("xray --config " + cfg.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GT(nlohmann::json::parse(r.out)["warnings"].get<int>(), 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST(Cli, ConfigurationErrorsExitWithOne) {
  EXPECT_EQ(run("validate --config " + write_config("broken", "{ not json").string()).code, 1);
  EXPECT_EQ(run("validate --config " + write_config("unknown", R"cfg({"schema": 1, "name": "u",
    "surface": {"kind": "conformal_torus", "phi": "0"}, "lambda": "0", "colour": 3})cfg").string()).code, 1);
  EXPECT_EQ(run("validate --config " + write_config("badexpr", R"cfg({"schema": 1, "name": "b",
    "surface": {"kind": "conformal_torus", "phi": "siin(x)"}, "lambda": "0"})cfg").string()).code, 1);
  EXPECT_EQ(run("validate --config " + write_config("smallgrid", R"cfg({"schema": 1, "name": "s",
    "surface": {"kind": "conformal_torus", "phi": "0"}, "lambda": "0", "params": {"grid": 2}})cfg").string()).code, 1);
  EXPECT_EQ(run("validate --config " + write_config("notperiodic", R"cfg({"schema": 1, "name": "p",
    "surface": {"kind": "conformal_torus", "phi": "x"}, "lambda": "0"})cfg").string()).code, 1);
  EXPECT_EQ(run("validate").code, 1);
  EXPECT_EQ(run("transmogrify --config x").code, 1);
  EXPECT_EQ(run("validate --config /nonexistent/file.json").code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, NumericalFailureExitsWithTwo) {
  const auto cfg = write_config("capped", R"cfg({"schema": 1, "name": "capped",
    "surface": {"kind": "conformal_torus", "phi": "0"}, "lambda": "0",
    "fields": {"h": "sin(2*pi*x)"}, "params": {"cohomology_n": 8, "max_iterations": 2}})cfg");
  const Result r = run("cohomology --config " + cfg.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("SolverDiverged"), std::string::npos) << r.err;
}

TEST(Cli, WritesCsvAndJsonFiles) {
  const fs::path out = work_dir() / "out";
  const std::string cfg = write_config("flat", flat_torus).string();
  ASSERT_EQ(run("flow --config " + cfg + " --out " + out.string() + " --format csv").code, 0);
  EXPECT_TRUE(fs::exists(out / "flat_flow_orbit.csv"));
  ASSERT_EQ(run("flow --config " + cfg + " --out " + out.string()).code, 0);
  EXPECT_TRUE(fs::exists(out / "flat_flow.json"));
  EXPECT_EQ(run("flow --config " + cfg + " --format yaml").code, 1);
}
