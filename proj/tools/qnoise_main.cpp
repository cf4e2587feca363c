// qnoise: quantum-noise spectra, spectrograms, fits and EPR reports.
//
// Thread count for grid evaluation is taken from QNOISE_THREADS.

#include "qnoise/commands.hpp"
#include "qnoise/error.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>

namespace {

struct CommonOptions {
  std::string config_path;
  std::string preset_name;
  std::string grid;
  std::size_t angles = 0;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_angles) {
  cmd->add_option("--config", opts.config_path, "Scenario JSON document");
  cmd->add_option("--preset", opts.preset_name,
                  "Preset: fig3a, fig3b, fig4, fig1-fi, fig1-fd, custom");
  cmd->add_option("--grid", opts.grid, "<min_hz>:<max_hz>:<points>:<lin|log>");
  if (with_angles) cmd->add_option("--angles", opts.angles, "Readout angles over [0, 2 pi)");
  cmd->add_option("--out", opts.out, "Output path")->required();
}

qnoise::ScenarioConfig resolve(const CommonOptions& opts) {
  qnoise::ScenarioConfig config =
      qnoise::preset(opts.preset_name.empty() ? "custom" : opts.preset_name);
  if (!opts.config_path.empty()) {
    if (opts.preset_name.empty()) {
      config = qnoise::load_config(opts.config_path);
    } else {
      const auto text = qnoise::read_file(opts.config_path);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw qnoise::DomainError(opts.config_path + ": malformed JSON: " + e.what());
      }
      try {
        config = qnoise::parse_config(doc, config);
      } catch (const qnoise::DomainError& e) {
        throw qnoise::DomainError(opts.config_path + ": " + e.what());
      }
    }
  }
  if (!opts.grid.empty()) config.grid = qnoise::parse_grid_spec(opts.grid);
  if (opts.angles != 0) config.angle_count = opts.angles;
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum noise of EPR-squeezed light reflected off detuned cavities"};
  app.require_subcommand(1);

  CommonOptions spectrum_opts, spectrogram_opts, map_opts, fit_opts;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "Noise spectrum at the configured readout angle");
  add_common(spectrum_cmd, spectrum_opts, false);
  auto* spectrogram_cmd = app.add_subcommand("spectrogram", "Noise over frequency and readout angle");
  add_common(spectrogram_cmd, spectrogram_opts, true);
  auto* map_cmd = app.add_subcommand("map", "Interferometer noise map relative to no squeezing");
  add_common(map_cmd, map_opts, true);

  auto* fit_cmd = app.add_subcommand("fit", "Joint fit of the model to measured traces");
  add_common(fit_cmd, fit_opts, false);
  std::string data_dir;
  fit_cmd->add_option("--data", data_dir, "Directory of trace CSV files")->required();

  auto* epr_cmd = app.add_subcommand("epr", "Two-mode conditional variances and Reid criterion");
  double epr_r = 0.0;
  double epr_eta = 1.0;
  std::string epr_out;
  epr_cmd->add_option("--r", epr_r, "Squeeze factor")->required();
  epr_cmd->add_option("--eta", epr_eta, "Detection efficiency");
  epr_cmd->add_option("--out", epr_out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? qnoise::kExitOk : qnoise::kExitUsage;
  }

  try {
    if (*spectrum_cmd) {
      qnoise::run_spectrum(resolve(spectrum_opts), spectrum_opts.out);
    } else if (*spectrogram_cmd) {
      qnoise::run_spectrogram(resolve(spectrogram_opts), spectrogram_opts.out);
    } else if (*map_cmd) {
      qnoise::run_map(resolve(map_opts), map_opts.out);
    } else if (*fit_cmd) {
      const auto result = qnoise::run_fit(data_dir, resolve(fit_opts), fit_opts.out);
      if (!result.converged) {
        std::cerr << "warning: fit stopped without converging (residual " << result.residual
                  << " dB^2)\n";
      }
    } else if (*epr_cmd) {
      qnoise::run_epr_report(epr_r, epr_eta, epr_out);
    }
  } catch (const qnoise::DomainError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return qnoise::kExitValidation;
  } catch (const qnoise::NumericsError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return qnoise::kExitNumerics;
  } catch (const qnoise::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return qnoise::kExitIo;
  }
  return qnoise::kExitOk;
}
