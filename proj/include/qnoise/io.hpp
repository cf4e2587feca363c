#pragma once

// CSV and JSON emission and ingestion. Comma-delimited, '.' decimal point,
// '#'-prefixed metadata lines, shortest round-trip number formatting.

#include "qnoise/fit.hpp"
#include "qnoise/spectra.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace qnoise {

std::string format_double(double value);
// Strict locale-independent parse of the whole field.
double parse_double(std::string_view text);

// Writes via a sibling temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

using Metadata = std::map<std::string, std::string>;

// omega_rad_s,S,dB
std::string spectrum_csv(const NoiseSpectrum& spectrum, const Metadata& meta = {});
struct SpectrumFile {
  Metadata meta;
  NoiseSpectrum spectrum;
};
SpectrumFile parse_spectrum_csv(std::string_view text);

// First row: readout angles; first column: omega in rad/s; cells in dB.
std::string spectrogram_csv(const Spectrogram& map, const Metadata& meta = {});
struct SpectrogramFile {
  Metadata meta;
  Spectrogram map;
};
SpectrogramFile parse_spectrogram_csv(std::string_view text);

// frequency_hz,noise_db with a "# zeta_rad=<value>" line. Spectrum files
// (omega_rad_s,S,dB) with a zeta_rad line are accepted as traces too.
std::string trace_csv(const MeasuredTrace& trace);
MeasuredTrace parse_trace_csv(std::string_view text, std::string_view name);
MeasuredTrace read_trace(const std::filesystem::path& path);

struct LoadedTraces {
  std::vector<std::filesystem::path> paths;
  std::vector<MeasuredTrace> traces;
};
// Every *.csv file in the directory, in lexical order. All unreadable files
// are reported together.
LoadedTraces load_traces(const std::filesystem::path& dir);

nlohmann::json fit_result_json(const FitResult& result, const std::vector<std::filesystem::path>& paths,
                               const std::vector<MeasuredTrace>& traces);

struct EprReport {
  double squeeze_factor = 0.0;
  double efficiency = 1.0;
  double marginal_variance = 1.0;
  double optimal_gain_amplitude = 0.0;
  double optimal_gain_phase = 0.0;
  double conditional_amplitude = 1.0;
  double conditional_phase = 1.0;
  double reid_product = 1.0;
  bool entangled = false;
  // Squeezing of a degenerate source with the same r, for comparison only.
  double degenerate_squeezing_db = 0.0;
};

EprReport make_epr_report(double squeeze_factor, double efficiency);
nlohmann::json to_json(const EprReport& report);
EprReport epr_report_from_json(const nlohmann::json& doc);

}  // namespace qnoise
