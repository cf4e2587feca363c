#include "qnoise/commands.hpp"

#include "qnoise/error.hpp"

#include <fmt/format.h>

namespace qnoise {

namespace {

Metadata scenario_meta(const ScenarioConfig& config) {
  return {{"scenario", config.scenario},
          {"spacing", config.grid.spacing == GridSpacing::linear ? "lin" : "log"}};
}

}  // namespace

NoiseSpectrum run_spectrum(const ScenarioConfig& config, const std::filesystem::path& out) {
  config.validate();
  const auto grid = config.grid.build();
  NoiseSpectrum spectrum{grid, {}};
  if (config.model == ModelKind::epr) {
    spectrum = epr_noise_spectrum(config.cavity, config.squeezer, config.readout, grid);
  } else {
    spectrum.values.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      spectrum.values[i] =
          interferometer_noise(config.interferometer, config.squeezer, config.readout.efficiency,
                               grid[i], config.readout.readout_angle_rad, config.map_mode);
    }
  }
  auto meta = scenario_meta(config);
  meta["zeta_rad"] = format_double(config.readout.readout_angle_rad);
  write_file_atomic(out, spectrum_csv(spectrum, meta));
  return spectrum;
}

Spectrogram run_spectrogram(const ScenarioConfig& config, const std::filesystem::path& out) {
  config.validate();
  if (config.model != ModelKind::epr) {
    throw DomainError(
        fmt::format("scenario '{}' describes the interferometer map; use the map command",
                    config.scenario));
  }
  auto map = spectrogram(config.cavity, config.squeezer, config.readout, config.grid.build(),
                         config.angle_count);
  write_file_atomic(out, spectrogram_csv(map, scenario_meta(config)));
  return map;
}

Spectrogram run_map(const ScenarioConfig& config, const std::filesystem::path& out) {
  config.validate();
  auto map = interferometer_noise_map(config.interferometer, config.squeezer,
                                      config.readout.efficiency, config.grid.build(),
                                      config.angle_count, config.map_mode);
  auto meta = scenario_meta(config);
  meta["map_mode"] = std::string(to_string(config.map_mode));
  meta["normalization"] = "unsqueezed";
  write_file_atomic(out, spectrogram_csv(map, meta));
  return map;
}

FitResult run_fit(const std::filesystem::path& data_dir, const ScenarioConfig& config,
                  const std::filesystem::path& out) {
  auto loaded = load_traces(data_dir);
  const FitProblem problem = make_fit_problem(config, loaded.traces);
  FitResult result;
  try {
    result = fit(problem);
  } catch (const NumericsError& e) {
    throw NumericsError(fmt::format("fit failed: {}", e.what()));
  }
  write_file_atomic(out, fit_result_json(result, loaded.paths, loaded.traces).dump(2) + "\n");
  return result;
}

EprReport run_epr_report(double squeeze_factor, double efficiency,
                         const std::filesystem::path& out) {
  const auto report = make_epr_report(squeeze_factor, efficiency);
  write_file_atomic(out, to_json(report).dump(2) + "\n");
  return report;
}

}  // namespace qnoise
