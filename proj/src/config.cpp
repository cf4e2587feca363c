#include "qnoise/config.hpp"

#include "qnoise/error.hpp"
#include "qnoise/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace qnoise {

using nlohmann::json;

FrequencyGrid GridSpec::build() const {
  const double lo = 2.0 * kPi * min_hz;
  const double hi = 2.0 * kPi * max_hz;
  return spacing == GridSpacing::linear ? FrequencyGrid::linear(lo, hi, points)
                                        : FrequencyGrid::logarithmic(lo, hi, points);
}

GridSpec parse_grid_spec(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon == std::string_view::npos ? colon : colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (parts.size() != 4) {
    throw DomainError(
        fmt::format("grid '{}' must look like <min_hz>:<max_hz>:<points>:<lin|log>", text));
  }
  GridSpec spec;
  spec.min_hz = parse_double(parts[0]);
  spec.max_hz = parse_double(parts[1]);
  const double points = parse_double(parts[2]);
  if (!(points >= 1.0) || points != std::floor(points)) {
    throw DomainError(fmt::format("grid point count '{}' must be a positive integer", parts[2]));
  }
  spec.points = static_cast<std::size_t>(points);
  if (parts[3] == "lin") {
    spec.spacing = GridSpacing::linear;
  } else if (parts[3] == "log") {
    spec.spacing = GridSpacing::logarithmic;
  } else {
    throw DomainError(fmt::format("grid spacing '{}' must be lin or log", parts[3]));
  }
  spec.build();
  return spec;
}

std::string_view to_string(SqueezingMode mode) {
  switch (mode) {
    case SqueezingMode::none: return "none";
    case SqueezingMode::fixed_angle: return "fixed-angle";
    case SqueezingMode::frequency_dependent: return "frequency-dependent";
  }
  return "?";
}

SqueezingMode parse_squeezing_mode(std::string_view text) {
  if (text == "none") return SqueezingMode::none;
  if (text == "fixed-angle") return SqueezingMode::fixed_angle;
  if (text == "frequency-dependent") return SqueezingMode::frequency_dependent;
  throw DomainError(
      fmt::format("map_mode '{}' must be none, fixed-angle or frequency-dependent", text));
}

double plateau_squeeze_factor(double plateau_db, double efficiency) {
  const double target = std::pow(10.0, plateau_db / 10.0);
  const double squeezed = (target - 1.0 + efficiency) / efficiency;
  if (!(efficiency > 0.0) || !(squeezed > 0.0) || !(squeezed <= 1.0)) {
    throw DomainError(fmt::format("a {} dB plateau is unreachable with efficiency {}", plateau_db,
                                  efficiency));
  }
  return -0.5 * std::log(squeezed);
}

namespace {

constexpr double kPresetEfficiency = 0.8;
constexpr double kPresetPlateauDb = -4.0;
constexpr double kPresetHalfwidth = 2.0 * kPi * 150e3;
constexpr double kPresetDetuning = 2.0 * kPi * 460e3;

ScenarioConfig epr_base(std::string name, double delta1, double delta2) {
  ScenarioConfig c;
  c.scenario = std::move(name);
  c.model = ModelKind::epr;
  c.cavity.halfwidth_rad_s = kPresetHalfwidth;
  c.cavity.detuning_signal_rad_s = delta1;
  c.cavity.detuning_idler_rad_s = delta2;
  c.cavity.fsr_hz = 58.73e6;
  c.cavity.length_m = 2.5;
  c.squeezer.squeeze_factor = plateau_squeeze_factor(kPresetPlateauDb, kPresetEfficiency);
  c.squeezer.injection_angle_rad = 0.0;
  c.readout.readout_angle_rad = kPhaseQuadrature;
  c.readout.efficiency = kPresetEfficiency;
  c.grid = GridSpec{};
  c.angle_count = 360;
  return c;
}

ScenarioConfig interferometer_base(std::string name, SqueezingMode mode) {
  ScenarioConfig c;
  c.scenario = std::move(name);
  c.model = ModelKind::interferometer;
  c.interferometer = InterferometerParams{};
  // About 6 dB of injected squeezing, phase quadrature.
  c.squeezer.squeeze_factor = 0.69;
  c.squeezer.injection_angle_rad = 0.0;
  c.readout.readout_angle_rad = kPhaseQuadrature;
  c.readout.efficiency = 0.6;
  c.grid = GridSpec{5.0, 5000.0, 256, GridSpacing::logarithmic};
  c.angle_count = 360;
  c.map_mode = mode;
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fig3a", "fig3b", "fig4", "fig1-fi", "fig1-fd", "custom"};
}

ScenarioConfig preset(std::string_view name) {
  if (name == "fig3a") return epr_base("fig3a", kPresetDetuning, 0.0);
  if (name == "fig3b") return epr_base("fig3b", kPresetDetuning, -kPresetDetuning);
  if (name == "fig4") return epr_base("fig4", kPresetDetuning, kPresetDetuning);
  if (name == "fig1-fi") return interferometer_base("fig1-fi", SqueezingMode::fixed_angle);
  if (name == "fig1-fd") return interferometer_base("fig1-fd", SqueezingMode::frequency_dependent);
  if (name == "custom") return epr_base("custom", kPresetDetuning, 0.0);
  throw DomainError(fmt::format("unknown preset '{}' (expected one of fig3a, fig3b, fig4, "
                                "fig1-fi, fig1-fd, custom)",
                                name));
}

void ScenarioConfig::validate() const {
  interferometer.validate();
  cavity.validate();
  if (carriers) carriers->validate();
  squeezer.validate();
  readout.validate();
  grid.build();
  if (angle_count < 4) throw DomainError(fmt::format("angle_count must be >= 4 (got {})", angle_count));
}

namespace {

// Walks one JSON object, handing out known keys and rejecting the rest.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw DomainError(fmt::format("{} must be a JSON object", path_));
    for (const auto& [key, value] : node_.items()) unused_.insert(key);
  }

  void number(const char* key, double& target) {
    if (!node_.contains(key)) return;
    unused_.erase(key);
    const auto& v = node_.at(key);
    if (!v.is_number()) throw DomainError(fmt::format("{}.{} must be a number", path_, key));
    target = v.get<double>();
    if (!std::isfinite(target)) throw DomainError(fmt::format("{}.{} must be finite", path_, key));
  }

  void count(const char* key, std::size_t& target) {
    if (!node_.contains(key)) return;
    unused_.erase(key);
    const auto& v = node_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw DomainError(fmt::format("{}.{} must be a non-negative integer", path_, key));
    }
    target = v.get<std::size_t>();
  }

  void boolean(const char* key, bool& target) {
    if (!node_.contains(key)) return;
    unused_.erase(key);
    const auto& v = node_.at(key);
    if (!v.is_boolean()) throw DomainError(fmt::format("{}.{} must be true or false", path_, key));
    target = v.get<bool>();
  }

  std::optional<std::string> text(const char* key) {
    if (!node_.contains(key)) return std::nullopt;
    unused_.erase(key);
    const auto& v = node_.at(key);
    if (!v.is_string()) throw DomainError(fmt::format("{}.{} must be a string", path_, key));
    return v.get<std::string>();
  }

  const json* child(const char* key) {
    if (!node_.contains(key)) return nullptr;
    unused_.erase(key);
    return &node_.at(key);
  }

  bool has(const char* key) const { return node_.contains(key); }
  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    if (!unused_.empty()) {
      throw DomainError(fmt::format("unknown key {}.{}", path_, *unused_.begin()));
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> unused_;
};

FitSpec parse_fit_spec(const json& node, const ScenarioConfig& scenario) {
  Section s(node, "$.fit");
  FitSpec spec;
  spec.options.seed = 0;
  if (const auto* free = s.child("free")) {
    if (!free->is_object()) throw DomainError("$.fit.free must be a JSON object");
    for (const auto& [name, bounds] : free->items()) {
      const ParamId id = parse_param_id(name);  // rejects alpha/beta
      (void)id;
      Section b(bounds, "$.fit.free." + name);
      FitBounds fb;
      bool has_initial = b.has("initial");
      b.number("initial", fb.initial);
      if (!b.has("lower") || !b.has("upper")) {
        throw DomainError(fmt::format("$.fit.free.{} needs lower and upper bounds", name));
      }
      b.number("lower", fb.lower);
      b.number("upper", fb.upper);
      b.finish();
      if (!has_initial) fb.initial = std::numeric_limits<double>::quiet_NaN();
      spec.free[name] = fb;
    }
  } else {
    spec.free = default_fit_spec(scenario).free;
  }
  std::size_t seed = 0;
  s.count("seed", seed);
  spec.options.seed = seed;
  s.count("max_iterations", spec.options.max_iterations);
  s.number("tolerance", spec.options.tolerance);
  s.boolean("gradient_refinement", spec.options.gradient_refinement);
  s.finish();
  return spec;
}

}  // namespace

ScenarioConfig parse_config(const json& doc) {
  std::string scenario = "custom";
  if (doc.is_object() && doc.contains("scenario")) {
    if (!doc.at("scenario").is_string()) throw DomainError("$.scenario must be a string");
    scenario = doc.at("scenario").get<std::string>();
  }
  return parse_config(doc, preset(scenario));
}

ScenarioConfig parse_config(const json& doc, const ScenarioConfig& base) {
  ScenarioConfig c = base;
  Section root(doc, "$");
  if (auto name = root.text("scenario")) {
    preset(*name);
    c.scenario = *name;
  }
  if (auto model = root.text("model")) {
    if (*model == "epr") {
      c.model = ModelKind::epr;
    } else if (*model == "interferometer") {
      c.model = ModelKind::interferometer;
    } else {
      throw DomainError(fmt::format("$.model '{}' must be epr or interferometer", *model));
    }
  }
  if (const auto* node = root.child("interferometer")) {
    Section s(*node, "$.interferometer");
    s.number("circulating_power_w", c.interferometer.circulating_power_w);
    s.number("mirror_mass_kg", c.interferometer.mirror_mass_kg);
    s.number("wavelength_m", c.interferometer.wavelength_m);
    s.number("arm_length_m", c.interferometer.arm_length_m);
    s.number("detector_halfwidth_rad_s", c.interferometer.detector_halfwidth_rad_s);
    s.finish();
  }
  bool explicit_detuning = false;
  if (const auto* node = root.child("filter_cavity")) {
    Section s(*node, "$.filter_cavity");
    explicit_detuning = s.has("detuning_signal_rad_s") || s.has("detuning_idler_rad_s");
    s.number("halfwidth_rad_s", c.cavity.halfwidth_rad_s);
    s.number("detuning_signal_rad_s", c.cavity.detuning_signal_rad_s);
    s.number("detuning_idler_rad_s", c.cavity.detuning_idler_rad_s);
    s.number("fsr_hz", c.cavity.fsr_hz);
    s.number("length_m", c.cavity.length_m);
    s.number("resonance_anchor_hz", c.cavity.resonance_anchor_hz);
    s.finish();
  }
  if (const auto* node = root.child("carriers")) {
    if (explicit_detuning) {
      throw DomainError(
          "$.carriers and explicit $.filter_cavity detunings are mutually exclusive");
    }
    Section s(*node, "$.carriers");
    CarrierLayout layout;
    for (const char* key : {"pump_rad_s", "signal_rad_s", "idler_rad_s"}) {
      if (!s.has(key)) throw DomainError(fmt::format("missing key $.carriers.{}", key));
    }
    s.number("pump_rad_s", layout.pump_rad_s);
    s.number("signal_rad_s", layout.signal_rad_s);
    s.number("idler_rad_s", layout.idler_rad_s);
    s.finish();
    const auto d = detunings_from_layout(layout, c.cavity);
    c.cavity.detuning_signal_rad_s = d.signal_rad_s;
    c.cavity.detuning_idler_rad_s = d.idler_rad_s;
    c.carriers = layout;
  }
  if (const auto* node = root.child("squeezer")) {
    Section s(*node, "$.squeezer");
    s.number("squeeze_factor", c.squeezer.squeeze_factor);
    s.number("injection_angle_rad", c.squeezer.injection_angle_rad);
    s.finish();
  }
  if (const auto* node = root.child("readout")) {
    Section s(*node, "$.readout");
    s.number("readout_angle_rad", c.readout.readout_angle_rad);
    s.number("efficiency", c.readout.efficiency);
    s.number("lo_power_signal", c.readout.lo_power_signal);
    s.number("lo_power_idler", c.readout.lo_power_idler);
    s.number("conditioning_gain", c.readout.conditioning_gain);
    s.finish();
  }
  if (const auto* node = root.child("grid")) {
    Section s(*node, "$.grid");
    s.number("min_hz", c.grid.min_hz);
    s.number("max_hz", c.grid.max_hz);
    s.count("points", c.grid.points);
    if (auto spacing = s.text("spacing")) {
      if (*spacing == "lin") {
        c.grid.spacing = GridSpacing::linear;
      } else if (*spacing == "log") {
        c.grid.spacing = GridSpacing::logarithmic;
      } else {
        throw DomainError(fmt::format("$.grid.spacing '{}' must be lin or log", *spacing));
      }
    }
    s.finish();
  }
  root.count("angle_count", c.angle_count);
  if (auto mode = root.text("map_mode")) c.map_mode = parse_squeezing_mode(*mode);
  if (const auto* node = root.child("fit")) c.fit = parse_fit_spec(*node, c);
  root.finish();
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DomainError(fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
  }
  try {
    return parse_config(doc);
  } catch (const DomainError& e) {
    throw DomainError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

json to_json(const ScenarioConfig& c) {
  json doc;
  doc["scenario"] = c.scenario;
  doc["model"] = c.model == ModelKind::epr ? "epr" : "interferometer";
  doc["interferometer"] = {
      {"circulating_power_w", c.interferometer.circulating_power_w},
      {"mirror_mass_kg", c.interferometer.mirror_mass_kg},
      {"wavelength_m", c.interferometer.wavelength_m},
      {"arm_length_m", c.interferometer.arm_length_m},
      {"detector_halfwidth_rad_s", c.interferometer.detector_halfwidth_rad_s},
  };
  json cavity = {
      {"halfwidth_rad_s", c.cavity.halfwidth_rad_s},
      {"fsr_hz", c.cavity.fsr_hz},
      {"length_m", c.cavity.length_m},
      {"resonance_anchor_hz", c.cavity.resonance_anchor_hz},
  };
  if (c.carriers) {
    doc["carriers"] = {{"pump_rad_s", c.carriers->pump_rad_s},
                       {"signal_rad_s", c.carriers->signal_rad_s},
                       {"idler_rad_s", c.carriers->idler_rad_s}};
  } else {
    cavity["detuning_signal_rad_s"] = c.cavity.detuning_signal_rad_s;
    cavity["detuning_idler_rad_s"] = c.cavity.detuning_idler_rad_s;
  }
  doc["filter_cavity"] = cavity;
  doc["squeezer"] = {{"squeeze_factor", c.squeezer.squeeze_factor},
                     {"injection_angle_rad", c.squeezer.injection_angle_rad}};
  doc["readout"] = {{"readout_angle_rad", c.readout.readout_angle_rad},
                    {"efficiency", c.readout.efficiency},
                    {"lo_power_signal", c.readout.lo_power_signal},
                    {"lo_power_idler", c.readout.lo_power_idler},
                    {"conditioning_gain", c.readout.conditioning_gain}};
  doc["grid"] = {{"min_hz", c.grid.min_hz},
                 {"max_hz", c.grid.max_hz},
                 {"points", c.grid.points},
                 {"spacing", c.grid.spacing == GridSpacing::linear ? "lin" : "log"}};
  doc["angle_count"] = c.angle_count;
  doc["map_mode"] = std::string(to_string(c.map_mode));
  if (c.fit) {
    json free = json::object();
    for (const auto& [name, b] : c.fit->free) {
      json entry = {{"lower", b.lower}, {"upper", b.upper}};
      if (std::isfinite(b.initial)) entry["initial"] = b.initial;
      free[name] = entry;
    }
    doc["fit"] = {{"free", free},
                  {"seed", c.fit->options.seed},
                  {"max_iterations", c.fit->options.max_iterations},
                  {"tolerance", c.fit->options.tolerance},
                  {"gradient_refinement", c.fit->options.gradient_refinement}};
  }
  return doc;
}

FitSpec default_fit_spec(const ScenarioConfig& config) {
  FitSpec spec;
  const double gamma = config.cavity.halfwidth_rad_s;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  spec.free["r"] = {nan, 1e-3, 5.0};
  spec.free["eta"] = {nan, 0.01, 1.0};
  spec.free["gamma_rad_s"] = {nan, gamma / 10.0, gamma * 10.0};
  spec.free["delta1_rad_s"] = {nan, -20.0 * gamma, 20.0 * gamma};
  spec.free["delta2_rad_s"] = {nan, -20.0 * gamma, 20.0 * gamma};
  return spec;
}

FitProblem make_fit_problem(const ScenarioConfig& config, std::vector<MeasuredTrace> traces) {
  FitProblem problem;
  problem.traces = std::move(traces);
  problem.base.cavity = config.cavity;
  problem.base.squeeze_factor = config.squeezer.squeeze_factor;
  problem.base.efficiency = config.readout.efficiency;
  problem.base.lo_ratio = config.readout.lo_power_signal / config.readout.lo_power_idler;

  const FitSpec spec = config.fit ? *config.fit : default_fit_spec(config);
  problem.options = spec.options;
  const FitPoint start = initial_point(problem);
  for (const auto& [name, b] : spec.free) {
    FreeParameter p;
    p.id = parse_param_id(name);
    if (p.id.kind == ParamKind::readout_angle && p.id.trace >= problem.traces.size()) {
      throw DomainError(fmt::format("fit parameter {} refers to a missing trace", name));
    }
    p.lower = b.lower;
    p.upper = b.upper;
    p.initial = std::isfinite(b.initial) ? b.initial : get_param(start, p.id);
    problem.free.push_back(p);
  }
  problem.validate();
  return problem;
}

}  // namespace qnoise
