#pragma once

// Scenario configuration: JSON documents with units in every key name, and
// the built-in presets for the published detuning regimes and the
// interferometer noise map.

#include "qnoise/fit.hpp"
#include "qnoise/model.hpp"
#include "qnoise/spectra.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qnoise {

struct GridSpec {
  double min_hz = 10e3;
  double max_hz = 30e6;
  std::size_t points = 512;
  GridSpacing spacing = GridSpacing::logarithmic;

  FrequencyGrid build() const;
};

// "<min_hz>:<max_hz>:<points>:<lin|log>"
GridSpec parse_grid_spec(std::string_view text);

enum class ModelKind { epr, interferometer };

struct FitBounds {
  double initial = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct FitSpec {
  // Keyed by fit parameter name (r, eta, gamma_rad_s, ...). Missing initial
  // guesses default to the scenario value.
  std::map<std::string, FitBounds> free;
  FitOptions options;
};

struct ScenarioConfig {
  std::string scenario = "custom";
  ModelKind model = ModelKind::epr;
  InterferometerParams interferometer;
  FilterCavityParams cavity;
  std::optional<CarrierLayout> carriers;
  SqueezerParams squeezer;
  ReadoutParams readout;
  GridSpec grid;
  std::size_t angle_count = 360;
  SqueezingMode map_mode = SqueezingMode::fixed_angle;
  std::optional<FitSpec> fit;

  void validate() const;
};

std::vector<std::string> preset_names();
ScenarioConfig preset(std::string_view name);

// The squeeze factor placing the high-frequency minimum of a balanced
// readout at `plateau_db` for the given efficiency.
double plateau_squeeze_factor(double plateau_db, double efficiency);

// Starts from the preset named by "scenario" (custom if absent) and applies
// every key present. Unknown keys are rejected with their JSON path.
ScenarioConfig parse_config(const nlohmann::json& doc);
ScenarioConfig parse_config(const nlohmann::json& doc, const ScenarioConfig& base);
ScenarioConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ScenarioConfig& config);

std::string_view to_string(SqueezingMode mode);
SqueezingMode parse_squeezing_mode(std::string_view text);

// Default fit problem setup: r, eta, gamma, delta1 and delta2 free around
// the scenario values.
FitSpec default_fit_spec(const ScenarioConfig& config);
FitProblem make_fit_problem(const ScenarioConfig& config, std::vector<MeasuredTrace> traces);

}  // namespace qnoise
