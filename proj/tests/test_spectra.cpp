#include "oracles.hpp"

#include "qnoise/error.hpp"
#include "qnoise/spectra.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace qnoise;

namespace {

constexpr double kGamma = 2.0 * kPi * 150e3;
constexpr double kDelta = 2.0 * kPi * 460e3;

FilterCavityParams cavity(double d1, double d2, double gamma = kGamma) {
  FilterCavityParams c;
  c.halfwidth_rad_s = gamma;
  c.detuning_signal_rad_s = d1;
  c.detuning_idler_rad_s = d2;
  return c;
}

ReadoutParams readout(double zeta, double eta = 1.0, double alpha = 1.0, double beta = 1.0) {
  ReadoutParams r;
  r.readout_angle_rad = zeta;
  r.efficiency = eta;
  r.lo_power_signal = alpha;
  r.lo_power_idler = beta;
  return r;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

struct Draw {
  double gamma, d1, d2, w;
};

Draw random_draw(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lg(4.0, 7.0), ld(-8.0, 8.0), lw(-2.0, 2.0);
  const double g = std::pow(10.0, lg(rng));
  return {g, ld(rng) * g, ld(rng) * g, std::pow(10.0, lw(rng)) * g};
}

}  // namespace

TEST(Coefficients, TunedCavity) {
  for (double w : {0.1 * kGamma, kGamma, 7.0 * kGamma}) {
    const double base = kGamma * kGamma + w * w;
    EXPECT_LT(rel(coefficient_c(kGamma, 0, 0, w), base * base), 1e-14);
    EXPECT_LT(rel(coefficient_d(kGamma, 0, 0, w), std::pow(base, 4)), 1e-14);
  }
}

TEST(Coefficients, HandSubstitution) {
  const double g = 3.0;
  EXPECT_NEAR(coefficient_c(g, g, 0, 0) / std::pow(g, 4), 2.0, 1e-14);
  EXPECT_NEAR(coefficient_d(g, g, 0, 0) / std::pow(g, 8), 4.0, 1e-14);
}

TEST(Coefficients, MatchExtendedPrecisionOracle) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 2000; ++i) {
    const auto s = random_draw(rng);
    const auto ref = oracle::cavity(s.gamma, s.d1, s.d2, s.w);
    const auto k = cavity_coefficients(s.gamma, s.d1, s.d2, s.w);
    EXPECT_LT(rel(k.d, static_cast<double>(ref.d)), 1e-12);
    EXPECT_GT(k.d, 0.0);
    // C may cancel; compare against the scale of its largest term.
    const double scale = std::pow(std::max({s.gamma, std::abs(s.d1), std::abs(s.d2), s.w}), 4);
    EXPECT_LT(std::abs(k.c - static_cast<double>(ref.c)) / scale, 1e-12);
    EXPECT_NEAR(k.k1, static_cast<double>(ref.k1), 1e-11);
    EXPECT_NEAR(k.k2, static_cast<double>(ref.k2), 1e-11);
  }
}

TEST(Coefficients, OppositeDetuningFactorIdentity) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 2000; ++i) {
    const auto s = random_draw(rng);
    const auto k = cavity_coefficients(s.gamma, s.d1, -s.d1, s.w);
    EXPECT_LT(rel(k.c * k.c, k.d), 1e-11);
    const auto same = cavity_coefficients(s.gamma, s.d1, s.d1, s.w);
    EXPECT_LT(rel(same.c * same.c, same.d), 1e-11);
  }
}

TEST(Couplings, Examples) {
  auto k = cavity_coefficients(kGamma, 0, 0, 2.3 * kGamma);
  EXPECT_NEAR(k.k1, 1.0, 1e-14);
  EXPECT_NEAR(k.k2, 0.0, 1e-14);
  for (double w : {0.01 * kGamma, kGamma, 3.07 * kGamma, 100 * kGamma}) {
    k = cavity_coefficients(kGamma, kDelta, -kDelta, w);
    EXPECT_NEAR(k.k1, 1.0, 1e-12);
    EXPECT_EQ(k.k2, 0.0);
  }
  k = cavity_coefficients(kGamma, kGamma, kGamma, 0.0);
  EXPECT_NEAR(k.k1, -1.0, 1e-14);
  EXPECT_NEAR(k.k2, 0.0, 1e-14);
  k = cavity_coefficients(kGamma, kGamma, 0.0, kGamma);
  EXPECT_NEAR(k.k1, 0.4, 1e-14);
  EXPECT_NEAR(k.k2, 0.8, 1e-14);
}

TEST(Couplings, NormEqualsCSquaredOverD) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 10000; ++i) {
    const auto s = random_draw(rng);
    const auto k = cavity_coefficients(s.gamma, s.d1, s.d2, s.w);
    const double norm = k.k1 * k.k1 + k.k2 * k.k2;
    const double target = k.c / k.d * k.c;
    EXPECT_LE(std::abs(norm - target), 1e-9 * std::max(target, 1e-300) + 1e-300);
    EXPECT_LE(target, 1.0 + 1e-12);
  }
}

TEST(EprNoise, VacuumInVacuumOut) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> z(-kPi, kPi), eta(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const auto s = random_draw(rng);
    FilterCavityParams c = cavity(s.d1, s.d2, s.gamma);
    c.fsr_hz = 1e12;
    EXPECT_EQ(epr_noise(c, {0.0, 0.0}, readout(z(rng), eta(rng)), s.w), 1.0);
  }
}

TEST(EprNoise, MatchesExtendedPrecisionOracle) {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> z(-kPi, kPi), eta(0.0, 1.0), r(0.0, 1.5), lo(0.1, 10.0);
  for (int i = 0; i < 2000; ++i) {
    const auto s = random_draw(rng);
    FilterCavityParams c = cavity(s.d1, s.d2, s.gamma);
    c.fsr_hz = 1e12;
    const auto rd = readout(z(rng), eta(rng), lo(rng), lo(rng));
    const double sr = r(rng);
    const double ref = static_cast<double>(oracle::spectral_density(
        s.gamma, s.d1, s.d2, s.w, sr, rd.efficiency, rd.lo_power_signal, rd.lo_power_idler,
        rd.readout_angle_rad));
    EXPECT_LT(rel(epr_noise(c, {sr, 0.0}, rd, s.w), ref), 1e-11);
  }
}

TEST(EprNoise, FlatWhenDetuningsOpposite) {
  const double r = 0.9;
  const auto c = cavity(kDelta, -kDelta);
  const auto grid = FrequencyGrid::default_epr();
  const auto spec = epr_noise_spectrum(c, {r, 0.0}, readout(kPhaseQuadrature), grid);
  for (double v : spec.values) EXPECT_NEAR(v, std::exp(-2 * r), 1e-12);
}

TEST(EprNoise, UnbalancedLocalOscillatorsLoseSqueezing) {
  const double r = 0.9;
  const auto c = cavity(kDelta, -kDelta);
  const auto rd = readout(kPhaseQuadrature, 1.0, 4.0, 1.0);
  const double w = 3 * kGamma;
  const double expected = std::cosh(2 * r) - 0.8 * std::sinh(2 * r);
  EXPECT_NEAR(epr_minimum_noise(c, {r, 0.0}, rd, w), expected, 1e-12);
  EXPECT_GT(expected, std::exp(-2 * r));
}

TEST(EprNoise, ClosedFormMinimumMatchesSweep) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> eta(0.1, 1.0), r(0.05, 1.5), lo(0.2, 5.0);
  for (int i = 0; i < 100; ++i) {
    const auto s = random_draw(rng);
    FilterCavityParams c = cavity(s.d1, s.d2, s.gamma);
    c.fsr_hz = 1e12;
    const SqueezerParams sq{r(rng), 0.0};
    const auto base = readout(0.0, eta(rng), lo(rng), lo(rng));
    const double swept = oracle::minimize_1d(
        [&](double z) {
          auto rd = base;
          rd.readout_angle_rad = z;
          return epr_noise(c, sq, rd, s.w);
        },
        0.0, kPi, 512);
    EXPECT_NEAR(epr_minimum_noise(c, sq, base, s.w), swept, 1e-9);
    auto at = base;
    at.readout_angle_rad = epr_minimum_angle(c, s.w);
    EXPECT_NEAR(epr_noise(c, sq, at, s.w), epr_minimum_noise(c, sq, base, s.w), 1e-12);
  }
}

TEST(EprNoise, SymmetriesAndBounds) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> z(-kPi, kPi), eta(0.0, 1.0), r(0.0, 1.5);
  for (int i = 0; i < 2000; ++i) {
    const auto s = random_draw(rng);
    FilterCavityParams a = cavity(s.d1, s.d2, s.gamma);
    FilterCavityParams b = cavity(s.d2, s.d1, s.gamma);
    a.fsr_hz = b.fsr_hz = 1e12;
    const SqueezerParams sq{r(rng), 0.0};
    const auto rd = readout(z(rng), eta(rng));
    const double v = epr_noise(a, sq, rd, s.w);
    EXPECT_LT(rel(epr_noise(b, sq, rd, s.w), v), 1e-12);
    auto shifted = rd;
    shifted.readout_angle_rad += kPi;
    EXPECT_LT(rel(epr_noise(a, sq, shifted, s.w), v), 1e-12);
    const double lo = 1 - rd.efficiency + rd.efficiency * std::exp(-2 * sq.squeeze_factor);
    const double hi = 1 - rd.efficiency + rd.efficiency * std::exp(2 * sq.squeeze_factor);
    EXPECT_GE(v, lo * (1 - 1e-12));
    EXPECT_LE(v, hi * (1 + 1e-12));
    EXPECT_GT(v, 0.0);
  }
}

TEST(EprNoise, MinMaxAnglesAreOrthogonal) {
  std::mt19937_64 rng(47);
  for (int i = 0; i < 200; ++i) {
    const auto s = random_draw(rng);
    FilterCavityParams c = cavity(s.d1, s.d2, s.gamma);
    c.fsr_hz = 1e12;
    const auto k = cavity_coefficients(s.gamma, s.d1, s.d2, s.w);
    if (std::hypot(k.k1, k.k2) < 1e-6) continue;
    const double zmin = epr_minimum_angle(c, s.w);
    const double zmax = 0.5 * std::atan2(k.k2, k.k1);
    const double diff = std::remainder(zmin - zmax, kPi);
    EXPECT_NEAR(std::abs(diff), kPi / 2, 1e-9);
  }
}

TEST(EprNoise, LoPowerGauge) {
  const auto c = cavity(kDelta, 0.3 * kDelta);
  auto rd = readout(0.4, 0.8, 2.0, 0.5);
  const double v = epr_noise(c, {0.7, 0.0}, rd, 1.3 * kGamma);
  rd.lo_power_signal *= 1e3;
  rd.lo_power_idler *= 1e3;
  EXPECT_LT(rel(epr_noise(c, {0.7, 0.0}, rd, 1.3 * kGamma), v), 1e-15);
}

TEST(EprNoise, ValidationErrors) {
  const auto c = cavity(kDelta, 0.0);
  EXPECT_THROW(epr_noise_spectrum(c, {0.5, 0.0}, readout(0.0, 1.2), FrequencyGrid::default_epr()),
               DomainError);
  EXPECT_THROW(spectrogram(c, {0.5, 0.0}, readout(0.0), FrequencyGrid::default_epr(), 3),
               DomainError);
}

TEST(SpectrogramTest, ShapeAndPeriodicity) {
  const auto c = cavity(kDelta, 0.0);
  const auto grid = FrequencyGrid::logarithmic(2 * kPi * 1e4, 2 * kPi * 3e7, 64);
  const auto map = spectrogram(c, {0.7, 0.0}, readout(0.0, 0.8), grid, 64);
  ASSERT_EQ(map.db.size(), 64u * 64u);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < 32; ++j) EXPECT_NEAR(map.at(i, j), map.at(i, j + 32), 1e-9);
  }
}

TEST(SpectrogramTest, BitIdenticalAcrossThreadCounts) {
  const auto c = cavity(kDelta, kDelta);
  const auto grid = FrequencyGrid::default_epr();
  setenv("QNOISE_THREADS", "1", 1);
  const auto serial = spectrogram(c, {0.7, 0.0}, readout(0.0, 0.8), grid, 90);
  setenv("QNOISE_THREADS", "7", 1);
  const auto parallel = spectrogram(c, {0.7, 0.0}, readout(0.0, 0.8), grid, 90);
  unsetenv("QNOISE_THREADS");
  EXPECT_EQ(serial.db, parallel.db);
}

TEST(DisplayFloor, ClipsOnlyForDisplay) {
  EXPECT_EQ(display_db(-80.0), kDisplayFloorDb);
  EXPECT_EQ(display_db(-3.0), -3.0);
}

TEST(Trajectory, Examples) {
  const auto grid = FrequencyGrid::default_epr();
  for (const auto& p : squeeze_angle_trajectory(cavity(0, 0), grid)) EXPECT_EQ(p.theta, 0.0);
  for (const auto& p : squeeze_angle_trajectory(cavity(kDelta, -kDelta), grid)) {
    EXPECT_NEAR(p.theta, 0.0, 1e-12);
  }
  const auto near_zero = FrequencyGrid::from_values({1e-6 * kGamma}, GridSpacing::linear);
  const auto t = squeeze_angle_trajectory(cavity(kGamma, kGamma), near_zero);
  EXPECT_NEAR(t[0].theta, kPi / 2, 1e-9);
}

TEST(Trajectory, ContinuousFromHighFrequencyAnchor) {
  const auto grid = FrequencyGrid::logarithmic(1e-3 * kGamma, 1e3 * kGamma, 2000);
  const auto t = squeeze_angle_trajectory(cavity(kGamma, kGamma), grid);
  EXPECT_NEAR(t.back().theta, 0.0, 1e-5);
  EXPECT_NEAR(t.front().theta, kPi / 2, 1e-5);
  for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LT(std::abs(t[i].theta - t[i - 1].theta), 0.05);
}

TEST(Trajectory, UnwrapPicksNearestBranch) {
  const auto u = unwrap_from_back({3.0, -3.0, 0.1}, 2 * kPi);
  EXPECT_NEAR(u[2], 0.1, 1e-15);
  EXPECT_NEAR(u[1], -3.0, 1e-15);
  EXPECT_NEAR(u[0], 3.0 - 2 * kPi, 1e-15);
}

TEST(Fidelity, Examples) {
  const auto grid = FrequencyGrid::default_epr();
  for (double w : grid.values()) EXPECT_NEAR(inference_fidelity(cavity(kDelta, -kDelta), w), 1.0, 1e-12);
  EXPECT_NEAR(inference_fidelity(cavity(kGamma, 0.0), kGamma), std::sqrt(0.8), 1e-14);
  EXPECT_NEAR(inference_fidelity(cavity(kDelta, 0.3 * kDelta), 1e4 * kGamma), 1.0, 1e-6);
  double prev_gap = 1.0;
  for (double w = 100 * kGamma; w < 1e5 * kGamma; w *= 10) {
    const double gap = 1.0 - inference_fidelity(cavity(kDelta, 0.0), w);
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
  EXPECT_THROW(inference_fidelity(cavity(kDelta, 0.0), 0.0), DomainError);
}

TEST(Fidelity, DipsNearSignalDetuning) {
  const auto c = cavity(kDelta, 0.0);
  for (double f = 0.5; f <= 1.5; f += 0.1) EXPECT_LT(inference_fidelity(c, f * kDelta), 0.99);
}
