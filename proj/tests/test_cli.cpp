#include "temp_dir.hpp"

#include "qnoise/commands.hpp"
#include "qnoise/config.hpp"
#include "qnoise/io.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

using namespace qnoise;
using qnoise::testing::TempDir;
using nlohmann::json;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(QNOISE_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, OpposedDetuningsGiveFlatSpectrum) {
  TempDir dir;
  ASSERT_EQ(run("spectrum --preset fig3b --out " + q(dir / "s.csv")), kExitOk);
  const auto file = parse_spectrum_csv(read_file(dir / "s.csv"));
  const auto db = file.spectrum.db();
  ASSERT_EQ(db.size(), 512u);
  for (double v : db) EXPECT_NEAR(v, -4.0, 0.01);
  EXPECT_EQ(file.meta.at("scenario"), "fig3b");
}

TEST(Cli, NoSqueezingIsVacuum) {
  TempDir dir;
  write_file_atomic(dir / "c.json", R"({"scenario": "fig3a", "squeezer": {"squeeze_factor": 0}})");
  ASSERT_EQ(run("spectrum --config " + q(dir / "c.json") + " --out " + q(dir / "s.csv")), kExitOk);
  for (double v : parse_spectrum_csv(read_file(dir / "s.csv")).spectrum.db()) EXPECT_EQ(v, 0.0);
}

TEST(Cli, SpectrogramReachesPlateauAtHighFrequency) {
  TempDir dir;
  ASSERT_EQ(run("spectrogram --preset fig3a --out " + q(dir / "m.csv")), kExitOk);
  const auto m = parse_spectrogram_csv(read_file(dir / "m.csv")).map;
  ASSERT_EQ(m.angles.size(), 360u);
  const std::size_t last = m.grid.size() - 1;
  double best = 1e9;
  for (std::size_t a = 0; a < m.angles.size(); ++a) best = std::min(best, m.at(last, a));
  EXPECT_NEAR(best, -4.0, 0.05);
}

TEST(Cli, SameDetuningsRotateMinimumByThreeQuarterPi) {
  TempDir dir;
  ASSERT_EQ(run("spectrogram --preset fig4 --angles 720 --out " + q(dir / "m.csv")), kExitOk);
  const auto m = parse_spectrogram_csv(read_file(dir / "m.csv")).map;
  std::vector<double> argmin;
  for (std::size_t i = 0; i < m.grid.size(); ++i) argmin.push_back(m.angles[m.argmin_angle(i)]);
  const auto u = unwrap_from_back(argmin, kPi);
  const auto [lo, hi] = std::minmax_element(u.begin(), u.end());
  const double span = *hi - *lo;
  EXPECT_GT(span, 0.9 * 3 * kPi / 4);
  EXPECT_LT(span, 1.1 * 3 * kPi / 4);
}

TEST(Cli, ReadoutAnglePeriodicity) {
  TempDir dir;
  write_file_atomic(dir / "a.json", R"({"scenario": "fig3a", "readout": {"readout_angle_rad": 0.4}})");
  write_file_atomic(dir / "b.json",
                    R"({"scenario": "fig3a", "readout": {"readout_angle_rad": 3.541592653589793}})");
  ASSERT_EQ(run("spectrum --config " + q(dir / "a.json") + " --out " + q(dir / "a.csv")), kExitOk);
  ASSERT_EQ(run("spectrum --config " + q(dir / "b.json") + " --out " + q(dir / "b.csv")), kExitOk);
  const auto a = parse_spectrum_csv(read_file(dir / "a.csv")).spectrum.db();
  const auto b = parse_spectrum_csv(read_file(dir / "b.csv")).spectrum.db();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(Cli, GridOverrideAndPresetPlusConfig) {
  TempDir dir;
  write_file_atomic(dir / "c.json", R"({"readout": {"efficiency": 1.0}})");
  ASSERT_EQ(run("spectrum --preset fig3b --config " + q(dir / "c.json") +
                " --grid 1e5:1e6:5:lin --out " + q(dir / "s.csv")),
            kExitOk);
  const auto s = parse_spectrum_csv(read_file(dir / "s.csv")).spectrum;
  ASSERT_EQ(s.values.size(), 5u);
  const double r = preset("fig3b").squeezer.squeeze_factor;
  for (double v : s.values) EXPECT_NEAR(v, std::exp(-2 * r), 1e-12);
}

TEST(Cli, InterferometerMap) {
  TempDir dir;
  ASSERT_EQ(run("map --preset fig1-fd --angles 16 --out " + q(dir / "m.csv")), kExitOk);
  const auto m = parse_spectrogram_csv(read_file(dir / "m.csv")).map;
  EXPECT_EQ(m.angles.size(), 16u);
  EXPECT_EQ(m.grid.size(), 256u);
  ASSERT_EQ(run("spectrum --preset fig1-fi --out " + q(dir / "s.csv")), kExitOk);
}

TEST(Cli, FitRecoversSqueezingFromOwnSpectra) {
  TempDir dir;
  const auto data = dir / "data";
  std::filesystem::create_directories(data);
  const std::pair<const char*, const char*> cuts[] = {
      {"phase", "1.5707963267948966"}, {"intermediate", "0.7853981633974483"}, {"amplitude", "0"}};
  for (const auto& [label, zeta] : cuts) {
    const auto cfg = dir / (std::string(label) + ".json");
    write_file_atomic(cfg, std::string(R"({"scenario": "fig3a", "readout": {"readout_angle_rad": )") + zeta +
                               "}}");
    ASSERT_EQ(run("spectrum --config " + q(cfg) + " --grid 1e4:3e7:80:log --out " +
                  q(data / (std::string(label) + ".csv"))),
              kExitOk);
  }
  write_file_atomic(dir / "fit.json", R"({
    "scenario": "fig3a",
    "squeezer": {"squeeze_factor": 0.5},
    "readout": {"efficiency": 0.9},
    "fit": {"free": {"r": {"lower": 0.01, "upper": 3}, "eta": {"lower": 0.1, "upper": 1}}}
  })");
  ASSERT_EQ(run("fit --config " + q(dir / "fit.json") + " --data " + q(data) + " --out " + q(dir / "r.json")),
            kExitOk);
  const auto result = json::parse(read_file(dir / "r.json"));
  const auto truth = preset("fig3a");
  EXPECT_NEAR(result["parameters"]["r"].get<double>(), truth.squeezer.squeeze_factor, 1e-6);
  EXPECT_NEAR(result["parameters"]["eta"].get<double>(), truth.readout.efficiency, 1e-6);
  EXPECT_TRUE(result["converged"].get<bool>());
  EXPECT_EQ(result["traces"].size(), 3u);
  EXPECT_LT(result["residual_db2"].get<double>(), 1e-12);
}

TEST(Cli, EprReport) {
  TempDir dir;
  ASSERT_EQ(run("epr --r 1 --out " + q(dir / "e.json")), kExitOk);
  const auto r = epr_report_from_json(json::parse(read_file(dir / "e.json")));
  EXPECT_NEAR(r.conditional_amplitude, 0.26580222883407969, 1e-12);
  EXPECT_NEAR(r.conditional_phase, 0.26580222883407969, 1e-12);
  EXPECT_NEAR(r.reid_product, 0.0706508248531644657, 1e-12);
  EXPECT_TRUE(r.entangled);
  ASSERT_EQ(run("epr --r 1 --eta 0.4 --out " + q(dir / "e.json")), kExitOk);
  EXPECT_FALSE(epr_report_from_json(json::parse(read_file(dir / "e.json"))).entangled);
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(run(""), kExitUsage);
  EXPECT_EQ(run("spectrum --preset fig3a"), kExitUsage);
  EXPECT_EQ(run("bogus"), kExitUsage);
  EXPECT_EQ(run("spectrum --preset nope --out " + q(dir / "s.csv")), kExitValidation);
  write_file_atomic(dir / "bad.json", R"({"readout": {"bogus": 1}})");
  EXPECT_EQ(run("spectrum --config " + q(dir / "bad.json") + " --out " + q(dir / "s.csv")), kExitValidation);
  EXPECT_EQ(run("spectrum --preset fig3a --grid 1:2 --out " + q(dir / "s.csv")), kExitValidation);
  EXPECT_EQ(run("epr --r -1 --out " + q(dir / "e.json")), kExitValidation);
  EXPECT_EQ(run("spectrum --config " + q(dir / "missing.json") + " --out " + q(dir / "s.csv")), kExitIo);
  EXPECT_EQ(run("spectrum --preset fig3a --out " + q(dir / "no" / "dir" / "s.csv")), kExitIo);
  EXPECT_EQ(run("fit --preset fig3a --data " + q(dir / "empty") + " --out " + q(dir / "r.json")), kExitIo);

  // Model cannot be evaluated at the initial guess: detuning beyond half the FSR.
  const auto data = dir / "data";
  std::filesystem::create_directories(data);
  write_file_atomic(data / "t.csv", "# zeta_rad=0\nfrequency_hz,noise_db\n1e4,0\n2e4,0\n");
  write_file_atomic(dir / "num.json", R"({
    "filter_cavity": {"fsr_hz": 1e5, "detuning_signal_rad_s": 0, "detuning_idler_rad_s": 0},
    "fit": {"free": {"delta1_rad_s": {"initial": 1e6, "lower": 0, "upper": 2e6}}}
  })");
  EXPECT_EQ(run("fit --config " + q(dir / "num.json") + " --data " + q(data) + " --out " + q(dir / "r.json")),
            kExitNumerics);
  EXPECT_FALSE(std::filesystem::exists(dir / "r.json"));
}
