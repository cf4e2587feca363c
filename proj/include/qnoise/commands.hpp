#pragma once

#include "qnoise/config.hpp"
#include "qnoise/io.hpp"

#include <filesystem>

namespace qnoise {

// Each command writes its output atomically and returns what it wrote.
NoiseSpectrum run_spectrum(const ScenarioConfig& config, const std::filesystem::path& out);
Spectrogram run_spectrogram(const ScenarioConfig& config, const std::filesystem::path& out);
Spectrogram run_map(const ScenarioConfig& config, const std::filesystem::path& out);
FitResult run_fit(const std::filesystem::path& data_dir, const ScenarioConfig& config,
                  const std::filesystem::path& out);
EprReport run_epr_report(double squeeze_factor, double efficiency,
                         const std::filesystem::path& out);

// Exit codes used by the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerics = 3;
inline constexpr int kExitIo = 4;

}  // namespace qnoise
