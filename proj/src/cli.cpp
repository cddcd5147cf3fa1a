#include "atomguide/cli.hpp"

#include <fftw3.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "atomguide/errors.hpp"

namespace atomguide::cli {

namespace {

using boost::property_tree::ptree;

constexpr const char* kProgram = "atomguide 0.1.0";
constexpr const char* kAssignmentRule =
    "watershed: barrier at the maximum of V_eff(x, t_final) between the two minima; capture windows |x - minimum| "
    "<= 4 max(w0, w1) on each side; p_lost = 1 - p_vertical - p_oblique; p_oblique = 0 when U1 = 0";

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string strip_comment(const std::string& raw) {
  bool quoted = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '"') quoted = !quoted;
    if (raw[i] == '#' && !quoted) return raw.substr(0, i);
  }
  return raw;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& path, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (t.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ConfigError(path, "expected a finite number, got '" + t + "'");
  }
  return v;
}

// One config section with bookkeeping of the keys read from it.
class Section {
 public:
  Section(std::string name, const ptree* tree) : name_(std::move(name)), tree_(tree) {}

  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    return trim(strip_comment(tree_->get_child(key).data()));
  }

  std::optional<double> number(const std::string& key) {
    const auto r = raw(key);
    if (!r) return std::nullopt;
    return parse_number(path(key), *r);
  }

  double number_or(const std::string& key, double fallback) { return number(key).value_or(fallback); }

  std::optional<std::size_t> count(const std::string& key) {
    const auto v = number(key);
    if (!v) return std::nullopt;
    if (*v < 0.0 || *v != std::floor(*v) || *v > 1e15) throw ConfigError(path(key), "expected a non-negative integer");
    return static_cast<std::size_t>(*v);
  }

  std::optional<bool> boolean(const std::string& key) {
    const auto r = raw(key);
    if (!r) return std::nullopt;
    if (*r == "true") return true;
    if (*r == "false") return false;
    throw ConfigError(path(key), "expected true or false, got '" + *r + "'");
  }

  std::optional<std::string> string(const std::string& key) {
    auto r = raw(key);
    if (!r) return std::nullopt;
    if (r->size() >= 2 && r->front() == '"' && r->back() == '"') return r->substr(1, r->size() - 2);
    return r;
  }

  std::optional<std::vector<double>> list(const std::string& key) {
    auto r = raw(key);
    if (!r) return std::nullopt;
    std::string body = *r;
    if (body.size() < 2 || body.front() != '[' || body.back() != ']') {
      throw ConfigError(path(key), "expected a list such as [1, 2, 3]");
    }
    body = body.substr(1, body.size() - 2);
    std::vector<double> out;
    std::stringstream items(body);
    std::string item;
    while (std::getline(items, item, ',')) {
      if (trim(item).empty()) continue;
      out.push_back(parse_number(path(key), item));
    }
    if (out.empty()) throw ConfigError(path(key), "list must not be empty");
    return out;
  }

  // Exactly one of several unit spellings of the same quantity.
  std::optional<double> scaled(const std::vector<std::pair<std::string, double>>& spellings) {
    std::optional<double> out;
    std::string seen;
    for (const auto& [key, factor] : spellings) {
      const auto v = number(key);
      if (!v) continue;
      if (out) throw ConfigError(path(key), "conflicts with " + path(seen));
      out = *v * factor;
      seen = key;
    }
    return out;
  }

  void reject_unknown() const {
    if (!tree_) return;
    for (const auto& [key, child] : *tree_) {
      if (!used_.count(key)) throw ConfigError(path(key), "unknown key");
    }
  }

 private:
  std::string name_;
  const ptree* tree_;
  std::set<std::string> used_;
};

ScenarioKind scenario_from_name(const std::string& name) {
  for (auto k : {ScenarioKind::Eigen, ScenarioKind::SplitRun, ScenarioKind::SplitSweep, ScenarioKind::DeflectSweep,
                 ScenarioKind::GpeMuCurve, ScenarioKind::GpeFall}) {
    if (scenario_name(k) == name) return k;
  }
  throw ConfigError("scenario", "unknown scenario '" + name +
                                    "' (expected eigen, split-run, split-sweep, deflect-sweep, gpe-mu-curve or gpe-fall)");
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

bool uses_guides(ScenarioKind k) {
  return k == ScenarioKind::Eigen || k == ScenarioKind::SplitRun || k == ScenarioKind::SplitSweep ||
         k == ScenarioKind::DeflectSweep;
}

}  // namespace

std::string scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Eigen: return "eigen";
    case ScenarioKind::SplitRun: return "split-run";
    case ScenarioKind::SplitSweep: return "split-sweep";
    case ScenarioKind::DeflectSweep: return "deflect-sweep";
    case ScenarioKind::GpeMuCurve: return "gpe-mu-curve";
    case ScenarioKind::GpeFall: return "gpe-fall";
  }
  return "unknown";
}

RunConfig parse_config_text(const std::string& text) {
  ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  static const std::set<std::string> sections = {"constants", "transition", "guide", "ensemble", "propagation",
                                                 "sweep",     "gpe",        "gpe_grid"};
  auto child = [&](const std::string& name) -> const ptree* {
    const auto it = tree.find(name);
    return it == tree.not_found() ? nullptr : &it->second;
  };

  RunConfig cfg;
  // Top-level keys: everything that is not a section.
  ptree top;
  for (const auto& [key, value] : tree) {
    if (!value.empty()) {
      if (!sections.count(key)) throw ConfigError(key, "unknown section");
      continue;
    }
    top.push_back({key, value});
  }
  Section root("", &top);
  const auto scenario = root.string("scenario");
  if (!scenario || scenario->empty()) throw ConfigError("scenario", "missing required key");
  cfg.scenario = scenario_from_name(*scenario);
  root.reject_unknown();

  Section constants("constants", child("constants"));
  cfg.constants.hbar = constants.number_or("hbar_Js", cfg.constants.hbar);
  cfg.constants.kB = constants.number_or("kB_J_per_K", cfg.constants.kB);
  cfg.constants.grav = constants.number_or("grav_m_s2", cfg.constants.grav);
  cfg.constants.massRb87 = constants.number_or("mass_kg", cfg.constants.massRb87);
  if (auto a = constants.number("scattering_length_nm")) cfg.constants.scatteringLength = *a * 1e-9;
  constants.reject_unknown();
  try {
    cfg.constants.validate();
  } catch (const ContractError& e) {
    throw ConfigError("constants", e.what());
  }
  const PhysicalConstants& c = cfg.constants;

  Section transition("transition", child("transition"));
  const auto linewidth = transition.number("linewidth_MHz");
  const auto detuning = transition.number("detuning_MHz");
  const auto saturation = transition.number("saturation_intensity_mW_cm2");
  transition.reject_unknown();
  if (linewidth || detuning || saturation) {
    require(linewidth && detuning && saturation, "transition",
            "linewidth_MHz, detuning_MHz and saturation_intensity_mW_cm2 must be given together");
    TransitionParams t;
    t.linewidth = 2.0 * std::numbers::pi * *linewidth * 1e6;
    t.detuning = 2.0 * std::numbers::pi * *detuning * 1e6;
    t.saturationIntensity = *saturation * 10.0;
    try {
      t.validate();
    } catch (const ContractError& e) {
      throw ConfigError("transition", e.what());
    }
    cfg.transition = t;
  }

  // Defaults: U0 = 30 uK, U1 = 10 uK, w0 = 0.3 mm, w1 = 0.45 mm, z0 = -4 mm, gamma = 10 deg.
  Section guide("guide", child("guide"));
  GuideParams& g = cfg.guide;
  const auto u0 = guide.number("U0_uK");
  const auto u1 = guide.number("U1_uK");
  const auto i0 = guide.number("I0_W_m2");
  const auto i1 = guide.number("I1_W_m2");
  require(!(u0 && i0), "guide.I0_W_m2", "conflicts with guide.U0_uK");
  require(!(u1 && i1), "guide.I1_W_m2", "conflicts with guide.U1_uK");
  require(!((i0 || i1) && !cfg.transition), "guide", "intensities need a [transition] section");
  g.waistVertical = guide.scaled({{"w0_um", units::um}, {"w0_mm", units::mm}}).value_or(0.3 * units::mm);
  g.waistOblique = guide.scaled({{"w1_um", units::um}, {"w1_mm", units::mm}}).value_or(0.45 * units::mm);
  g.crossingHeight = guide.scaled({{"z0_um", units::um}, {"z0_mm", units::mm}}).value_or(-4.0 * units::mm);
  const double gamma_deg = guide.number_or("gamma_deg", 10.0);
  guide.reject_unknown();
  require(gamma_deg >= 0.0 && gamma_deg < 90.0, "guide.gamma_deg", "must be in [0, 90)");
  g.angle = gamma_deg * units::deg;
  if (i0) {
    require(*i0 >= 0.0, "guide.I0_W_m2", "must be >= 0");
    g.intensityVertical = *i0;
    g.depthVertical = depth_from_intensity(*i0, *cfg.transition, c);
  } else {
    g.depthVertical = units::microkelvin(u0.value_or(30.0), c);
  }
  if (i1) {
    require(*i1 >= 0.0, "guide.I1_W_m2", "must be >= 0");
    g.intensityOblique = *i1;
    g.depthOblique = depth_from_intensity(*i1, *cfg.transition, c);
  } else {
    g.depthOblique = units::microkelvin(u1.value_or(10.0), c);
  }
  require(g.depthVertical >= 0.0, "guide.U0_uK", "must be >= 0");
  require(g.depthOblique >= 0.0, "guide.U1_uK", "must be >= 0");
  require(g.waistVertical > 0.0, "guide.w0", "must be > 0");
  require(g.waistOblique > 0.0, "guide.w1", "must be > 0");
  require(g.crossingHeight <= 0.0, "guide.z0", "must be <= 0");

  Section ensemble("ensemble", child("ensemble"));
  cfg.ensemble.temperature = ensemble.number_or("temperature_uK", 14.0) * 1e-6;
  cfg.ensemble.maxStates = ensemble.count("max_states").value_or(1000);
  ensemble.reject_unknown();
  require(cfg.ensemble.temperature > 0.0, "ensemble.temperature_uK", "must be > 0");
  require(cfg.ensemble.maxStates >= 1, "ensemble.max_states", "must be >= 1");

  Section propagation("propagation", child("propagation"));
  cfg.propagation.dt = propagation.number_or("dt_us", 10.0) * units::us;
  if (auto tf = propagation.number("t_final_ms")) cfg.propagation.tFinal = *tf * units::ms;
  cfg.propagation.absorber = propagation.boolean("absorber").value_or(true);
  propagation.reject_unknown();
  require(cfg.propagation.dt > 0.0, "propagation.dt_us", "must be > 0");
  if (cfg.propagation.tFinal) {
    require(*cfg.propagation.tFinal >= cfg.propagation.dt, "propagation.t_final_ms", "must be >= dt");
  }

  Section sweep("sweep", child("sweep"));
  const auto ratios = sweep.list("ratios");
  const auto gammas = sweep.list("gammas_deg");
  sweep.reject_unknown();

  Section gpe("gpe", child("gpe"));
  const auto atom_number = gpe.number("atom_number");
  cfg.gpe.omegaYRatio = gpe.number_or("omega_y_ratio", cfg.gpe.omegaYRatio);
  cfg.gpe.interactions = gpe.boolean("interactions").value_or(true);
  if (auto ns = gpe.list("atom_numbers")) cfg.gpe.atomNumbers = *ns;
  cfg.gpe.muPoints = gpe.count("mu_points").value_or(cfg.gpe.muPoints);
  cfg.gpe.dt = gpe.number_or("dt_ns", cfg.gpe.dt * 1e9) * 1e-9;
  cfg.gpe.tFinal = gpe.number_or("t_final_us", cfg.gpe.tFinal / units::us) * units::us;
  cfg.gpe.switchOff = gpe.boolean("switch_off").value_or(true);
  cfg.gpe.snapshotEvery = gpe.count("snapshot_every").value_or(0);
  cfg.gpe.allDensitySnapshots = gpe.boolean("all_density_snapshots").value_or(false);
  gpe.reject_unknown();
  require(cfg.gpe.omegaYRatio > 0.0, "gpe.omega_y_ratio", "must be > 0");
  require(cfg.gpe.dt > 0.0, "gpe.dt_ns", "must be > 0");
  require(cfg.gpe.tFinal >= cfg.gpe.dt, "gpe.t_final_us", "must be >= dt");
  require(cfg.gpe.muPoints >= 1, "gpe.mu_points", "must be >= 1");

  Section grid("gpe_grid", child("gpe_grid"));
  const double x_min = grid.number_or("x_min_um", cfg.gpe.grid.x.x_min() / units::um) * units::um;
  const double x_max = grid.number_or("x_max_um", cfg.gpe.grid.x.x_max() / units::um) * units::um;
  const double z_min = grid.number_or("z_min_um", cfg.gpe.grid.z.x_min() / units::um) * units::um;
  const double z_max = grid.number_or("z_max_um", cfg.gpe.grid.z.x_max() / units::um) * units::um;
  const std::size_t nx = grid.count("nx").value_or(cfg.gpe.grid.x.size());
  const std::size_t nz = grid.count("nz").value_or(cfg.gpe.grid.z.size());
  grid.reject_unknown();
  require(x_max > x_min, "gpe_grid.x_max_um", "must exceed x_min_um");
  require(z_max > z_min, "gpe_grid.z_max_um", "must exceed z_min_um");
  require(is_power_of_two(nx) && nx >= 16, "gpe_grid.nx", "must be a power of two >= 16");
  require(is_power_of_two(nz) && nz >= 16, "gpe_grid.nz", "must be a power of two >= 16");
  cfg.gpe.grid = Grid2D{Grid1D(x_min, x_max, nx), Grid1D(z_min, z_max, nz)};

  // Scenario-specific requirements.
  switch (cfg.scenario) {
    case ScenarioKind::SplitSweep:
      require(ratios.has_value(), "sweep.ratios", "missing required key for split-sweep");
      require(!gammas, "sweep.gammas_deg", "not used by split-sweep");
      cfg.sweepValues = *ratios;
      for (double r : cfg.sweepValues) require(r >= 0.0, "sweep.ratios", "ratios must be >= 0");
      break;
    case ScenarioKind::DeflectSweep:
      require(gammas.has_value(), "sweep.gammas_deg", "missing required key for deflect-sweep");
      require(!ratios, "sweep.ratios", "not used by deflect-sweep");
      cfg.sweepValues = *gammas;
      for (double v : cfg.sweepValues) require(v > 0.0 && v < 90.0, "sweep.gammas_deg", "angles must be in (0, 90)");
      break;
    default:
      require(!ratios && !gammas, "sweep", "sweep values are only used by split-sweep and deflect-sweep");
  }
  for (std::size_t i = 1; i < cfg.sweepValues.size(); ++i) {
    require(cfg.sweepValues[i] > cfg.sweepValues[i - 1], "sweep", "values must be strictly ascending");
  }
  if (cfg.scenario == ScenarioKind::GpeFall) {
    require(atom_number.has_value(), "gpe.atom_number", "missing required key for gpe-fall");
  }
  cfg.gpe.atomNumber = atom_number.value_or(1.0);
  require(cfg.gpe.atomNumber >= 1.0, "gpe.atom_number", "must be >= 1");
  for (std::size_t i = 0; i < cfg.gpe.atomNumbers.size(); ++i) {
    require(cfg.gpe.atomNumbers[i] >= 1.0, "gpe.atom_numbers", "values must be >= 1");
    if (i > 0) require(cfg.gpe.atomNumbers[i] > cfg.gpe.atomNumbers[i - 1], "gpe.atom_numbers", "must be ascending");
  }

  if (uses_guides(cfg.scenario)) {
    require(g.depthVertical > 0.0, "guide.U0_uK", "must be > 0: the vertical guide must bind the initial states");
    const Grid1D eg = plan_eigen_grid(g, c);
    require(eg.size() <= kMaxFghDimension, "guide",
            "the vertical well needs an eigen grid of " + std::to_string(eg.size()) + " points, above the cap of " +
                std::to_string(kMaxFghDimension) + "; use a reduced-scale parameter set");
  }
  if (cfg.scenario == ScenarioKind::SplitRun || cfg.scenario == ScenarioKind::SplitSweep ||
      (cfg.scenario == ScenarioKind::DeflectSweep)) {
    require(g.angle > 0.0 || cfg.scenario == ScenarioKind::DeflectSweep, "guide.gamma_deg",
            "must be > 0 for the splitter (gamma = 0 gives parallel beams)");
  }
  if (cfg.scenario == ScenarioKind::GpeMuCurve || cfg.scenario == ScenarioKind::GpeFall) {
    require(g.depthVertical > 0.0, "guide.U0_uK", "must be > 0 for the condensate trap");
  }
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string RunConfig::canonical() const {
  std::ostringstream s;
  auto line = [&](const std::string& key, const std::string& value) { s << key << " = " << value << '\n'; };
  auto num = [&](const std::string& key, double v) { line(key, fmt(v)); };
  line("scenario", scenario_name(scenario));
  num("constants.hbar_Js", constants.hbar);
  num("constants.kB_J_per_K", constants.kB);
  num("constants.grav_m_s2", constants.grav);
  num("constants.mass_kg", constants.massRb87);
  num("constants.scattering_length_m", constants.scatteringLength);
  if (transition) {
    num("transition.linewidth_rad_s", transition->linewidth);
    num("transition.detuning_rad_s", transition->detuning);
    num("transition.saturation_intensity_W_m2", transition->saturationIntensity);
  }
  num("guide.U0_J", guide.depthVertical);
  num("guide.U1_J", guide.depthOblique);
  num("guide.w0_m", guide.waistVertical);
  num("guide.w1_m", guide.waistOblique);
  num("guide.z0_m", guide.crossingHeight);
  num("guide.gamma_rad", guide.angle);
  if (guide.intensityVertical) num("guide.I0_W_m2", *guide.intensityVertical);
  if (guide.intensityOblique) num("guide.I1_W_m2", *guide.intensityOblique);
  switch (scenario) {
    case ScenarioKind::Eigen:
      line("ensemble.max_states", std::to_string(ensemble.maxStates));
      break;
    case ScenarioKind::SplitRun:
    case ScenarioKind::SplitSweep:
    case ScenarioKind::DeflectSweep: {
      num("ensemble.temperature_K", ensemble.temperature);
      line("ensemble.max_states", std::to_string(ensemble.maxStates));
      num("propagation.dt_s", propagation.dt);
      line("propagation.t_final_s", propagation.tFinal ? fmt(*propagation.tFinal) : "default");
      line("propagation.absorber", propagation.absorber ? "true" : "false");
      std::string values;
      for (double v : sweepValues) values += (values.empty() ? "" : ", ") + fmt(v);
      if (!sweepValues.empty()) line("sweep.values", "[" + values + "]");
      break;
    }
    case ScenarioKind::GpeMuCurve:
    case ScenarioKind::GpeFall: {
      num("gpe.atom_number", gpe.atomNumber);
      num("gpe.omega_y_ratio", gpe.omegaYRatio);
      line("gpe.interactions", gpe.interactions ? "true" : "false");
      std::string ns;
      for (double v : gpe.atomNumbers) ns += (ns.empty() ? "" : ", ") + fmt(v);
      line("gpe.atom_numbers", "[" + ns + "]");
      line("gpe.mu_points", std::to_string(gpe.muPoints));
      num("gpe.dt_s", gpe.dt);
      num("gpe.t_final_s", gpe.tFinal);
      line("gpe.switch_off", gpe.switchOff ? "true" : "false");
      line("gpe.snapshot_every", std::to_string(gpe.snapshotEvery));
      line("gpe.all_density_snapshots", gpe.allDensitySnapshots ? "true" : "false");
      num("gpe_grid.x_min_m", gpe.grid.x.x_min());
      num("gpe_grid.x_max_m", gpe.grid.x.x_max());
      line("gpe_grid.nx", std::to_string(gpe.grid.x.size()));
      num("gpe_grid.z_min_m", gpe.grid.z.x_min());
      num("gpe_grid.z_max_m", gpe.grid.z.x_max());
      line("gpe_grid.nz", std::to_string(gpe.grid.z.size()));
      break;
    }
  }
  return s.str();
}

namespace {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& metadata, const std::string& header)
      : path_(path), out_((std::filesystem::create_directories(path.parent_path()), path), std::ios::binary) {
    if (!out_) throw SetupError("cannot write " + path.string());
    std::istringstream lines(metadata);
    std::string line;
    while (std::getline(lines, line)) out_ << "# " << line << '\n';
    out_ << header << '\n';
  }
  template <class... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(values), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }

  std::filesystem::path path_;
  std::ofstream out_;
};

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

Scenario make_scenario(const RunConfig& cfg, const RunOptions& options, bool deflector) {
  Scenario s;
  s.guide = cfg.guide;
  s.temperature = cfg.ensemble.temperature;
  s.maxStates = cfg.ensemble.maxStates;
  s.dt = cfg.propagation.dt;
  s.tFinal = cfg.propagation.tFinal;
  s.deflector = deflector;
  s.absorber = cfg.propagation.absorber;
  s.jobs = options.jobs;
  if (options.useCache) s.cacheDir = options.outDir / "cache";
  return s;
}

GpeParams make_gpe(const RunConfig& cfg, double atomNumber) {
  const double omega = harmonic_frequency(cfg.guide.depthVertical, cfg.guide.waistVertical, cfg.constants.massRb87);
  GpeParams gp = make_gpe_params(atomNumber, cfg.gpe.omegaYRatio * omega, cfg.guide, cfg.constants);
  if (!cfg.gpe.interactions) gp.couplingG2D = 0.0;
  return gp;
}

void write_density(const std::filesystem::path& path, double t, const WaveField& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SetupError("cannot write " + path.string());
  out << "# t=" << fmt(t) << '\n' << "x,z,re,im,density\n";
  const Mesh& m = f.mesh();
  const std::size_t nz = m.z().size();
  for (std::size_t i = 0; i < m.x().size(); ++i) {
    for (std::size_t j = 0; j < nz; ++j) {
      const Complex v = f[i * nz + j];
      out << fmt(m.x().x(i)) << ',' << fmt(m.z().x(j)) << ',' << fmt(v.real()) << ',' << fmt(v.imag()) << ','
          << fmt(std::norm(v)) << '\n';
    }
  }
}

}  // namespace

void run(const RunConfig& cfg, const RunOptions& options, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const PhysicalConstants& c = cfg.constants;
  const std::string meta = cfg.canonical() + "assignment_rule = " + kAssignmentRule + "\n";
  std::vector<std::string> outputs;
  nlohmann::json extra = nlohmann::json::object();

  switch (cfg.scenario) {
    case ScenarioKind::Eigen: {
      const EigenSet eigen = fgh_bound_states(plan_eigen_grid(cfg.guide, c), cfg.guide, cfg.ensemble.maxStates, c);
      CsvWriter csv(options.outDir / "eigen.csv", meta + "grid = " + fmt(eigen.grid->x().x_min()) + ", " +
                                                      fmt(eigen.grid->x().x_max()) + ", " +
                                                      std::to_string(eigen.grid->size()),
                    "nu,energy_J,energy_uK");
      for (std::size_t nu = 0; nu < eigen.size(); ++nu) {
        csv.row(nu, eigen.energies[nu], units::to_microkelvin(eigen.energies[nu], c));
      }
      outputs.push_back("eigen.csv");
      log << "eigen: " << eigen.size() << " bound levels\n";
      break;
    }
    case ScenarioKind::SplitRun: {
      const Scenario s = make_scenario(cfg, options, false);
      const EfficiencyResult r = run_scenario(s, c);
      const double ratio = cfg.guide.depthOblique / cfg.guide.depthVertical;
      {
        CsvWriter csv(options.outDir / "split_run.csv", meta, "ratio,efficiency");
        csv.row(ratio, r.efficiency);
      }
      {
        CsvWriter csv(options.outDir / "split_run_states.csv", meta,
                      "nu,weight,barrier_m,p_vertical,p_oblique,p_lost");
        for (const auto& st : r.states) {
          const auto& a = st.assignment;
          csv.row(st.nu, st.weight, a.barrierPosition, a.pVertical, a.pOblique, a.pLost);
        }
      }
      outputs = {"split_run.csv", "split_run_states.csv"};
      extra["cache_hits"] = r.cacheHit ? 1 : 0;
      extra["dropped_mass"] = r.droppedMass;
      log << "split-run: efficiency " << fmt(r.efficiency) << '\n';
      break;
    }
    case ScenarioKind::SplitSweep:
    case ScenarioKind::DeflectSweep: {
      const bool deflect = cfg.scenario == ScenarioKind::DeflectSweep;
      const Scenario s = make_scenario(cfg, options, deflect);
      const EfficiencyCurve curve =
          sweep(deflect ? SweepKind::AngleGamma : SweepKind::RatioU1U0, cfg.sweepValues, s, c);
      std::string missing;
      for (const auto& p : curve.points) {
        if (!p.efficiency) missing += "missing " + curve.sweptName + " " + fmt(p.value) + ": " + p.failure + "\n";
      }
      const std::string name = deflect ? "deflect_sweep.csv" : "split_sweep.csv";
      CsvWriter csv(options.outDir / name, meta + missing, curve.sweptName + ",efficiency");
      for (const auto& p : curve.points) csv.row(p.value, p.efficiency ? fmt(*p.efficiency) : std::string("nan"));
      outputs.push_back(name);
      extra["cache_hits"] = curve.cacheHits;
      for (const auto& p : curve.points) {
        log << curve.sweptName << ' ' << fmt(p.value) << ": "
            << (p.efficiency ? fmt(*p.efficiency) : "missing (" + p.failure + ")") << '\n';
      }
      break;
    }
    case ScenarioKind::GpeMuCurve: {
      const GpeParams base = make_gpe(cfg, 1.0);
      std::vector<double> ns = cfg.gpe.atomNumbers;
      if (ns.empty()) {
        const double n_max = std::floor(max_admissible_atom_number(cfg.gpe.grid, base, c));
        if (n_max < 1.0) throw SetupError("gpe-mu-curve: the grid cannot hold even N = 1");
        ns = log_spaced_atom_numbers(n_max, cfg.gpe.muPoints);
        for (auto& n : ns) n = std::round(n);
        ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
      }
      const MuCurve curve = mu_curve(ns, cfg.gpe.grid, base, options.jobs, c);
      const double hbar_omega = c.hbar * trap_frequency(base, c);
      CsvWriter csv(options.outDir / "mu_curve.csv", meta, "N,mu_numeric_J,mu_TF_J,mu_plus_U0_over_hbar_omega");
      for (const auto& p : curve.points) {
        csv.row(p.atomNumber, p.muNumeric, p.muTF, (p.muNumeric + cfg.guide.depthVertical) / hbar_omega);
      }
      outputs.push_back("mu_curve.csv");
      log << "gpe-mu-curve: " << curve.points.size() << " points\n";
      break;
    }
    case ScenarioKind::GpeFall: {
      const GpeParams gp = make_gpe(cfg, cfg.gpe.atomNumber);
      // The ground state always includes interactions of the configured N unless they are switched off.
      const GroundState ground = gpe_ground_state(cfg.gpe.grid, gp, c);
      PropagationSpec spec;
      spec.dt = cfg.gpe.dt;
      spec.tFinal = cfg.gpe.tFinal;
      const auto steps = static_cast<std::size_t>(std::llround(spec.tFinal / spec.dt));
      spec.snapshotEvery = cfg.gpe.snapshotEvery > 0 ? cfg.gpe.snapshotEvery : std::max<std::size_t>(1, steps / 20);
      const double t0 = crossing_time(cfg.guide.crossingHeight, c.grav);
      if (cfg.gpe.switchOff && t0 > 0.0 && t0 < spec.tFinal) spec.switchOffVerticalAt = t0;
      const FallResult fall = gpe_fall(ground.field, gp, spec, c);
      {
        CsvWriter csv(options.outDir / "fall.csv", meta, "t,mean_z,frac_on_oblique_axis");
        for (const auto& smp : fall.samples) csv.row(smp.t, smp.meanZ, smp.fractionOnObliqueAxis);
      }
      {
        CsvWriter csv(options.outDir / "fall_summary.csv", meta,
                      "mu_ground_J,aspect_ratio,long_axis_angle_deg,angle_to_oblique_deg,frac_on_oblique_axis,"
                      "mean_x,mean_z,final_norm");
        csv.row(ground.mu, fall.finalShape.aspectRatio, fall.finalShape.longAxisAngle / units::deg,
                angle_to_oblique_axis(fall.finalShape, cfg.guide) / units::deg, fall.finalFractionOnObliqueAxis,
                fall.finalShape.meanX, fall.finalShape.meanZ, norm(fall.propagation.finalField));
      }
      outputs = {"fall.csv", "fall_summary.csv"};
      std::filesystem::create_directories(options.outDir / "snapshots");
      std::size_t index = 0;
      auto dump = [&](double t, const WaveField& f) {
        char name[64];
        std::snprintf(name, sizeof name, "snapshots/density_%04zu.csv", index++);
        write_density(options.outDir / name, t, f);
        outputs.push_back(name);
      };
      const auto& snaps = fall.propagation.snapshots;
      if (cfg.gpe.allDensitySnapshots) {
        for (const auto& snap : snaps) dump(snap.t, snap.field);
      } else {
        dump(0.0, ground.field);
      }
      if (!cfg.gpe.allDensitySnapshots || snaps.empty() || snaps.back().t < spec.tFinal) {
        dump(spec.tFinal, fall.propagation.finalField);
      }
      log << "gpe-fall: aspect " << fmt(fall.finalShape.aspectRatio) << ", oblique fraction "
          << fmt(fall.finalFractionOnObliqueAxis) << '\n';
      break;
    }
  }

  nlohmann::json manifest;
  manifest["program"] = kProgram;
  manifest["fftw"] = std::string(fftw_version);
  manifest["scenario"] = scenario_name(cfg.scenario);
  manifest["config_sha256"] = sha256_hex(cfg.canonical());
  nlohmann::json resolved = nlohmann::json::object();
  std::istringstream lines(cfg.canonical());
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    resolved[line.substr(0, eq)] = line.substr(eq + 3);
  }
  manifest["resolved_si"] = resolved;
  manifest["assignment_rule"] = kAssignmentRule;
  nlohmann::json hashes = nlohmann::json::object();
  for (const auto& f : outputs) hashes[f] = file_sha256(options.outDir / f);
  manifest["outputs"] = hashes;
  manifest["jobs"] = options.jobs;
  manifest["cache"] = options.useCache;
  for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
  manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream(options.outDir / "manifest.json") << manifest.dump(2) << '\n';
}

int exit_code(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->kind()) {
      case ErrorKind::Config:
      case ErrorKind::Setup:
      case ErrorKind::Contract: return 2;
      case ErrorKind::NumericFault: return 3;
      case ErrorKind::Geometry:
      case ErrorKind::Convergence: return 4;
    }
  }
  return 1;
}

std::string error_json(const std::exception& e) {
  nlohmann::json j;
  j["message"] = e.what();
  j["exit_code"] = exit_code(e);
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    static const std::map<ErrorKind, const char*> names = {
        {ErrorKind::Contract, "contract"}, {ErrorKind::NumericFault, "numeric-fault"}, {ErrorKind::Setup, "setup"},
        {ErrorKind::Geometry, "geometry"}, {ErrorKind::Convergence, "convergence"},    {ErrorKind::Config, "config"}};
    j["error"] = names.at(err->kind());
    if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) j["key"] = ce->key_path();
    if (const auto* nf = dynamic_cast<const NumericFault*>(&e)) j["step"] = nf->step();
    if (const auto* se = dynamic_cast<const SetupError*>(&e); se && se->required_points() > 0) {
      j["required_points"] = se->required_points();
    }
  } else {
    j["error"] = "internal";
  }
  return j.dump();
}

}  // namespace atomguide::cli
