#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "atomguide/cli.hpp"
#include "atomguide/errors.hpp"

using namespace atomguide;
namespace fs = std::filesystem;

namespace {

const char* kEigenConfig = R"(scenario = "eigen"
[guide]
U0_uK = 1.5
U1_uK = 0.5
w0_um = 15
w1_um = 22.5
z0_mm = -0.2
gamma_deg = 10
[ensemble]
max_states = 100
)";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("atomguide_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_error_key(const std::string& text) {
  try {
    cli::parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.key_path();
  }
  return "<accepted>";
}

// Runs the installed binary; returns its exit status and fills stderr.
int run_binary(const std::string& args, const fs::path& dir, std::string& err) {
  const fs::path errFile = dir / "stderr.txt";
  const std::string cmd = std::string(ATOMGUIDE_CLI) + " " + args + " 2> " + errFile.string() + " > /dev/null";
  const int status = std::system(cmd.c_str());
  err = read_file(errFile);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config errors name the offending key") {
  CHECK(config_error_key("[guide]\nU0_uK = 1\n") == "scenario");
  CHECK(config_error_key("scenario = \"eigen\"\n[guide]\ngamma_deg = 95\n") == "guide.gamma_deg");
  CHECK(config_error_key("scenario = \"eigen\"\n[guide]\nfoo = 1\n") == "guide.foo");
  CHECK(config_error_key("scenario = \"eigen\"\n[nonsense]\nfoo = 1\n") == "nonsense");
  CHECK(config_error_key("scenario = \"teleport\"\n") == "scenario");
  CHECK(config_error_key("scenario = \"eigen\"\n[guide]\nU0_uK = abc\n") == "guide.U0_uK");
  CHECK(config_error_key("scenario = \"eigen\"\n[guide]\nU0_uK = 1\nI0_W_m2 = 5\n") != "<accepted>");
  CHECK(config_error_key("scenario = \"split-sweep\"\n[sweep]\nratios = [0.5, 0.2]\n") != "<accepted>");
  CHECK(config_error_key("scenario = \"gpe-fall\"\n") != "<accepted>");
  CHECK(config_error_key("scenario = \"gpe-fall\"\n[gpe]\natom_number = 10\n[gpe_grid]\nnx = 100\n") ==
        "gpe_grid.nx");
}

TEST_CASE("defaults resolve to SI") {
  // The full-scale guide needs an eigen grid far above the solver cap.
  CHECK(config_error_key("scenario = \"split-run\"\n") == "guide");
  const cli::RunConfig c = cli::parse_config_text("scenario = \"gpe-mu-curve\"\n");
  CHECK(c.scenario == cli::ScenarioKind::GpeMuCurve);
  CHECK(c.guide.depthVertical == doctest::Approx(units::microkelvin(30.0)));
  CHECK(c.guide.depthOblique == doctest::Approx(units::microkelvin(10.0)));
  CHECK(c.guide.waistVertical == doctest::Approx(0.3e-3));
  CHECK(c.guide.waistOblique == doctest::Approx(0.45e-3));
  CHECK(c.guide.crossingHeight == doctest::Approx(-4e-3));
  CHECK(c.guide.angle == doctest::Approx(10.0 * units::deg));
  CHECK(c.ensemble.temperature == doctest::Approx(14e-6));
  CHECK(c.propagation.dt == doctest::Approx(10e-6));
  CHECK(c.propagation.absorber);
  CHECK(c.constants.hbar == PhysicalConstants{}.hbar);
}

TEST_CASE("unit conversions at the config boundary") {
  const cli::RunConfig c = cli::parse_config_text(kEigenConfig);
  CHECK(c.guide.waistOblique == doctest::Approx(22.5e-6).epsilon(1e-15));
  CHECK(c.guide.crossingHeight == doctest::Approx(-0.2e-3).epsilon(1e-15));
  CHECK(c.ensemble.maxStates == 100);
  const cli::RunConfig t = cli::parse_config_text(
      "scenario = \"gpe-mu-curve\"\n[transition]\nlinewidth_MHz = 6.07\ndetuning_MHz = 1e6\n"
      "saturation_intensity_mW_cm2 = 1.67\n[guide]\nI0_W_m2 = 1e7\nU1_uK = 0\n");
  CHECK(t.guide.depthVertical == doctest::Approx(1.8273719455100875e-27).epsilon(1e-12));
}

TEST_CASE("canonical text is stable") {
  const cli::RunConfig a = cli::parse_config_text(kEigenConfig);
  const cli::RunConfig b = cli::parse_config_text(std::string("# comment\n") + kEigenConfig + "\n");
  CHECK(a.canonical() == b.canonical());
  const cli::RunConfig other = cli::parse_config_text("scenario = \"eigen\"\n[guide]\nU0_uK = 2\nw0_um = 15\n");
  CHECK(a.canonical() != other.canonical());
}

TEST_CASE("eigen scenario writes ascending levels") {
  const fs::path dir = scratch("eigen");
  std::ostringstream log;
  cli::run(cli::parse_config_text(kEigenConfig), {dir, 1, true}, log);
  std::ifstream in(dir / "eigen.csv");
  std::string line;
  std::size_t rows = 0;
  double previous = -1e300;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      CHECK(line == "nu,energy_J,energy_uK");
      header = true;
      continue;
    }
    std::istringstream row(line);
    std::size_t nu = 0;
    char comma = 0;
    double e = 0.0;
    row >> nu >> comma >> e;
    CHECK(nu == rows);
    CHECK(e > previous);
    CHECK(e < 0.0);
    previous = e;
    ++rows;
  }
  CHECK(rows == 100);
  const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  CHECK(manifest["scenario"] == "eigen");
  CHECK(manifest["outputs"].contains("eigen.csv"));

  SUBCASE("property: reruns are byte-identical") {
    const fs::path again = scratch("eigen_again");
    cli::run(cli::parse_config_text(kEigenConfig), {again, 4, false}, log);
    CHECK(read_file(dir / "eigen.csv") == read_file(again / "eigen.csv"));
    fs::remove_all(again);
  }
  fs::remove_all(dir);
}

TEST_CASE("binary exit codes and error reports") {
  const fs::path dir = scratch("binary");
  std::ofstream(dir / "bad.toml") << "scenario = \"eigen\"\n[guide]\ngamma_deg = 95\n";
  std::ofstream(dir / "good.toml") << kEigenConfig;
  std::string err;

  const fs::path out = dir / "out_bad";
  CHECK(run_binary("eigen --config " + (dir / "bad.toml").string() + " --out " + out.string(), dir, err) == 2);
  const auto j = nlohmann::json::parse(err);
  CHECK(j["error"] == "config");
  CHECK(j["key"] == "guide.gamma_deg");
  CHECK(j["exit_code"] == 2);
  CHECK_FALSE(fs::exists(out));

  CHECK(run_binary("split-run --config " + (dir / "good.toml").string() + " --out " + out.string(), dir, err) == 2);
  CHECK_FALSE(fs::exists(out));

  const fs::path good = dir / "out_good";
  CHECK(run_binary("eigen --config " + (dir / "good.toml").string() + " --out " + good.string(), dir, err) == 0);
  CHECK(fs::exists(good / "eigen.csv"));
  CHECK(fs::exists(good / "manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("exit codes per error kind") {
  CHECK(cli::exit_code(ConfigError("a", "b")) == 2);
  CHECK(cli::exit_code(SetupError("a", 4096)) == 2);
  CHECK(cli::exit_code(ContractError("a")) == 2);
  CHECK(cli::exit_code(NumericFault("a", 3)) == 3);
  CHECK(cli::exit_code(GeometryError("a")) == 4);
  CHECK(cli::exit_code(ConvergenceError("a", {})) == 4);
  CHECK(cli::exit_code(std::runtime_error("a")) == 1);
  const auto j = nlohmann::json::parse(cli::error_json(SetupError("grid too coarse", 4096)));
  CHECK(j["required_points"] == 4096);
  CHECK(j["error"] == "setup");
}
