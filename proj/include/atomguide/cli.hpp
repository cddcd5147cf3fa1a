#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "atomguide/analysis.hpp"
#include "atomguide/constants.hpp"
#include "atomguide/gpe.hpp"
#include "atomguide/potentials.hpp"

namespace atomguide::cli {

enum class ScenarioKind { Eigen, SplitRun, SplitSweep, DeflectSweep, GpeMuCurve, GpeFall };

/// Subcommand name of a scenario ("split-sweep", ...).
std::string scenario_name(ScenarioKind kind);

struct EnsembleSettings {
  double temperature = 0.0;  // K
  std::size_t maxStates = 1000;
};

struct PropagationSettings {
  double dt = 10e-6;             // s
  std::optional<double> tFinal;  // s
  bool absorber = true;
};

struct GpeSettings {
  double atomNumber = 1.0;
  double omegaYRatio = 10.0;  // omega_y / omega
  bool interactions = true;   // false: N g2D = 0 comparison mode
  std::vector<double> atomNumbers;  // mu curve; empty: log spaced up to the admissible maximum
  std::size_t muPoints = 9;
  Grid2D grid{Grid1D(-12e-6, 12e-6, 256), Grid1D(-12e-6, 12e-6, 256)};
  double dt = 50e-9;       // s, real-time step of gpe-fall
  double tFinal = 600e-6;  // s
  bool switchOff = true;   // switch the vertical beam off at crossing_time(z0)
  std::size_t snapshotEvery = 0;      // steps between samples; 0: about 20 samples per run
  bool allDensitySnapshots = false;   // density CSV per sample instead of initial and final only
};

/// Fully resolved run description in SI units.
struct RunConfig {
  ScenarioKind scenario = ScenarioKind::Eigen;
  PhysicalConstants constants;
  std::optional<TransitionParams> transition;
  GuideParams guide;
  EnsembleSettings ensemble;
  PropagationSettings propagation;
  std::vector<double> sweepValues;  // ratios, or gamma in degrees
  GpeSettings gpe;

  /// Canonical text of every resolved value; identical configs give identical text.
  std::string canonical() const;
};

/// Parses TOML-style `key = value` text with [sections] in the units named by each key.
/// Throws ConfigError naming the key path for unknown or missing keys,
/// malformed values and violated preconditions.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

struct RunOptions {
  std::filesystem::path outDir;
  std::size_t jobs = 1;
  bool useCache = true;
};

/// Runs a validated config, writing CSVs and manifest.json under outDir.
/// Module errors propagate as atomguide::Error.
void run(const RunConfig& config, const RunOptions& options, std::ostream& log);

/// Process exit code for an error kind: 2 config or setup, 3 numeric fault,
/// 4 geometry or convergence, 1 otherwise.
int exit_code(const std::exception& e);

/// Machine-readable error description.
std::string error_json(const std::exception& e);

}  // namespace atomguide::cli
