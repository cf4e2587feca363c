#include "qnoise/spectra.hpp"

#include "parallel.hpp"
#include "qnoise/error.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>

namespace qnoise {

namespace {

// C and D in units of gamma^4 and gamma^8, from detunings and frequency in
// units of gamma. Keeps intermediate values O(1) across the MHz band.
struct Scaled {
  double c;
  double d;
  double sigma;
  double cross;  // 1 - a b + x^2
};

Scaled scaled_polynomials(double halfwidth, double delta1, double delta2, double omega) {
  if (!(halfwidth > 0.0) || !std::isfinite(halfwidth)) {
    throw DomainError(fmt::format("cavity halfwidth must be > 0 (got {})", halfwidth));
  }
  if (!std::isfinite(delta1) || !std::isfinite(delta2) || !std::isfinite(omega)) {
    throw DomainError("detunings and frequency must be finite");
  }
  const double a = delta1 / halfwidth;
  const double b = delta2 / halfwidth;
  const double x = omega / halfwidth;
  const double x2 = x * x;
  const double c = (a * a - x2) * (b * b - x2) + (1.0 + a * a + b * b + 2.0 * x2);
  auto lorentz_pair = [x](double y) {
    return (1.0 + (y - x) * (y - x)) * (1.0 + (y + x) * (y + x));
  };
  const double d = lorentz_pair(a) * lorentz_pair(b);
  return {c, d, a + b, 1.0 - a * b + x2};
}

void check_spectrum_inputs(const FilterCavityParams& cav, const SqueezerParams& sq,
                           const ReadoutParams& rd) {
  cav.validate();
  sq.validate();
  rd.validate();
}

}  // namespace

double coefficient_c(double halfwidth, double delta1, double delta2, double omega) {
  const double g4 = std::pow(halfwidth, 4);
  return scaled_polynomials(halfwidth, delta1, delta2, omega).c * g4;
}

double coefficient_d(double halfwidth, double delta1, double delta2, double omega) {
  const double g8 = std::pow(halfwidth, 8);
  return scaled_polynomials(halfwidth, delta1, delta2, omega).d * g8;
}

CavityCoefficients cavity_coefficients(double halfwidth, double delta1, double delta2,
                                       double omega) {
  const Scaled s = scaled_polynomials(halfwidth, delta1, delta2, omega);
  const double ratio = s.c / s.d;
  CavityCoefficients out;
  out.c = s.c * std::pow(halfwidth, 4);
  out.d = s.d * std::pow(halfwidth, 8);
  out.k1 = ratio * (s.c - 2.0 * s.sigma * s.sigma);
  out.k2 = ratio * (2.0 * s.sigma * s.cross);
  return out;
}

double coupling_k1(double halfwidth, double delta1, double delta2, double omega) {
  return cavity_coefficients(halfwidth, delta1, delta2, omega).k1;
}

double coupling_k2(double halfwidth, double delta1, double delta2, double omega) {
  return cavity_coefficients(halfwidth, delta1, delta2, omega).k2;
}

std::vector<double> NoiseSpectrum::db() const {
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [](double v) { return 10.0 * std::log10(v); });
  return out;
}

double epr_noise(const FilterCavityParams& cav, const SqueezerParams& sq, const ReadoutParams& rd,
                 double omega) {
  check_spectrum_inputs(cav, sq, rd);
  const auto k = cavity_coefficients(cav.halfwidth_rad_s, cav.detuning_signal_rad_s,
                                     cav.detuning_idler_rad_s, omega);
  const double r2 = 2.0 * sq.squeeze_factor;
  const double eta = rd.efficiency;
  const double z2 = 2.0 * rd.readout_angle_rad;
  return 1.0 - eta + eta * std::cosh(r2) +
         eta * rd.lo_balance() * std::sinh(r2) * (k.k1 * std::cos(z2) + k.k2 * std::sin(z2));
}

NoiseSpectrum epr_noise_spectrum(const FilterCavityParams& cav, const SqueezerParams& sq,
                                 const ReadoutParams& rd, const FrequencyGrid& grid) {
  if (grid.empty()) throw DomainError("frequency grid is empty");
  check_spectrum_inputs(cav, sq, rd);
  NoiseSpectrum out{grid, std::vector<double>(grid.size())};
  detail::parallel_for(grid.size(), [&](std::size_t i) {
    out.values[i] = epr_noise(cav, sq, rd, grid[i]);
  });
  return out;
}

double epr_minimum_noise(const FilterCavityParams& cav, const SqueezerParams& sq,
                         const ReadoutParams& rd, double omega) {
  check_spectrum_inputs(cav, sq, rd);
  const double r2 = 2.0 * sq.squeeze_factor;
  const double eta = rd.efficiency;
  return 1.0 - eta +
         eta * (std::cosh(r2) - rd.lo_balance() * std::sinh(r2) * inference_fidelity(cav, omega));
}

double epr_minimum_angle(const FilterCavityParams& cav, double omega) {
  const auto k = cavity_coefficients(cav.halfwidth_rad_s, cav.detuning_signal_rad_s,
                                     cav.detuning_idler_rad_s, omega);
  // K1 cos 2z + K2 sin 2z is most negative at 2z = atan2(K2, K1) + pi.
  double zeta = 0.5 * (std::atan2(k.k2, k.k1) + kPi);
  zeta = std::fmod(zeta, kPi);
  if (zeta < 0.0) zeta += kPi;
  return zeta;
}

std::size_t Spectrogram::argmin_angle(std::size_t freq) const {
  const auto row = db.begin() + static_cast<std::ptrdiff_t>(freq * angles.size());
  return static_cast<std::size_t>(
      std::distance(row, std::min_element(row, row + static_cast<std::ptrdiff_t>(angles.size()))));
}

double display_db(double db) { return std::max(db, kDisplayFloorDb); }

std::vector<double> uniform_angles(std::size_t count) {
  std::vector<double> angles(count);
  for (std::size_t j = 0; j < count; ++j) {
    angles[j] = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(count);
  }
  return angles;
}

Spectrogram spectrogram(const FilterCavityParams& cav, const SqueezerParams& sq,
                        const ReadoutParams& rd, const FrequencyGrid& grid,
                        std::size_t angle_count) {
  if (angle_count < 4) {
    throw DomainError(fmt::format("angle_count must be >= 4 (got {})", angle_count));
  }
  if (grid.empty()) throw DomainError("frequency grid is empty");
  check_spectrum_inputs(cav, sq, rd);

  Spectrogram out{grid, uniform_angles(angle_count),
                  std::vector<double>(grid.size() * angle_count)};
  detail::parallel_for(grid.size(), [&](std::size_t i) {
    ReadoutParams cell = rd;
    for (std::size_t j = 0; j < angle_count; ++j) {
      cell.readout_angle_rad = out.angles[j];
      out.db[i * angle_count + j] = 10.0 * std::log10(epr_noise(cav, sq, cell, grid[i]));
    }
  });
  return out;
}

std::vector<double> unwrap_from_back(std::vector<double> angles, double period) {
  for (std::size_t i = angles.size(); i-- > 1;) {
    const double jump = angles[i - 1] - angles[i];
    angles[i - 1] -= period * std::round(jump / period);
  }
  return angles;
}

std::vector<AnglePoint> squeeze_angle_trajectory(const FilterCavityParams& cav,
                                                 const FrequencyGrid& grid) {
  if (grid.empty()) throw DomainError("frequency grid is empty");
  cav.validate();
  std::vector<double> theta(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto k = cavity_coefficients(cav.halfwidth_rad_s, cav.detuning_signal_rad_s,
                                       cav.detuning_idler_rad_s, grid[i]);
    if (k.k1 == 0.0 && k.k2 == 0.0) {
      throw NumericsError(
          fmt::format("squeeze angle undefined at Omega = {} rad/s (C vanishes)", grid[i]));
    }
    theta[i] = 0.5 * std::atan2(k.k2, k.k1);
  }
  theta = unwrap_from_back(std::move(theta), kPi);
  std::vector<AnglePoint> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = {grid[i], theta[i]};
  return out;
}

double trajectory_span(const std::vector<AnglePoint>& trajectory) {
  if (trajectory.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(
      trajectory.begin(), trajectory.end(),
      [](const AnglePoint& a, const AnglePoint& b) { return a.theta < b.theta; });
  return hi->theta - lo->theta;
}

double inference_fidelity(const FilterCavityParams& cav, double omega) {
  if (!(omega > 0.0)) throw DomainError(fmt::format("Omega must be > 0 (got {})", omega));
  const Scaled s = scaled_polynomials(cav.halfwidth_rad_s, cav.detuning_signal_rad_s,
                                      cav.detuning_idler_rad_s, omega);
  return std::abs(s.c) / std::sqrt(s.d);
}

TwoModeCovariance TwoModeCovariance::from_matrix(const Eigen::Matrix4d& m) {
  if (!m.allFinite()) throw DomainError("two-mode covariance contains non-finite entries");
  const Eigen::Matrix4d sym = 0.5 * (m + m.transpose());
  if ((m - sym).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw DomainError("two-mode covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(sym, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= -1e-10) {
    throw DomainError("two-mode covariance is not positive-definite");
  }
  return TwoModeCovariance(sym);
}

TwoModeCovariance TwoModeCovariance::two_mode_squeezed(double squeeze_factor, double efficiency) {
  if (!(squeeze_factor >= 0.0) || !std::isfinite(squeeze_factor)) {
    throw DomainError(fmt::format("squeeze_factor must be >= 0 (got {})", squeeze_factor));
  }
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
    throw DomainError(fmt::format("efficiency must lie in [0, 1] (got {})", efficiency));
  }
  const double c = std::cosh(2.0 * squeeze_factor);
  const double s = std::sinh(2.0 * squeeze_factor);
  Eigen::Matrix4d m;
  // clang-format off
  m << c,  0,  s,  0,
       0,  c,  0, -s,
       s,  0,  c,  0,
       0, -s,  0,  c;
  // clang-format on
  m = efficiency * m + (1.0 - efficiency) * Eigen::Matrix4d::Identity();
  return from_matrix(m);
}

bool TwoModeCovariance::is_physical(double tol) const {
  Eigen::Matrix4cd h = m_.cast<std::complex<double>>();
  const std::complex<double> i(0.0, 1.0);
  for (int mode = 0; mode < 2; ++mode) {
    h(2 * mode, 2 * mode + 1) += i;
    h(2 * mode + 1, 2 * mode) -= i;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> eig(h, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -tol;
}

namespace {

struct PairMoments {
  double var_signal;
  double var_idler;
  double cov;
};

PairMoments pair_moments(const TwoModeCovariance& state, Quadrature q) {
  const int offset = q == Quadrature::amplitude ? 0 : 1;
  const auto& m = state.matrix();
  return {m(offset, offset), m(2 + offset, 2 + offset), m(offset, 2 + offset)};
}

}  // namespace

double conditional_variance(const TwoModeCovariance& state, Quadrature q, double gain) {
  const auto p = pair_moments(state, q);
  if (!(p.var_idler > 0.0)) throw NumericsError("idler quadrature variance is zero");
  return p.var_signal + 2.0 * gain * p.cov + gain * gain * p.var_idler;
}

double optimal_conditioning_gain(const TwoModeCovariance& state, Quadrature q) {
  const auto p = pair_moments(state, q);
  if (!(p.var_idler > 0.0)) throw NumericsError("idler quadrature variance is zero");
  return -p.cov / p.var_idler;
}

double minimum_conditional_variance(const TwoModeCovariance& state, Quadrature q) {
  const auto p = pair_moments(state, q);
  if (!(p.var_idler > 0.0)) throw NumericsError("idler quadrature variance is zero");
  return p.var_signal - p.cov * p.cov / p.var_idler;
}

ReidResult reid_epr_criterion(const TwoModeCovariance& state) {
  ReidResult out;
  out.amplitude = minimum_conditional_variance(state, Quadrature::amplitude);
  out.phase = minimum_conditional_variance(state, Quadrature::phase);
  out.product = out.amplitude * out.phase;
  out.entangled = out.product < 1.0;
  return out;
}

double interferometer_noise(const InterferometerParams& ifo, const SqueezerParams& sq,
                            double efficiency, double omega, double zeta, SqueezingMode mode) {
  const double k = kimble_factor(ifo, omega);
  SqueezerParams input = sq;
  switch (mode) {
    case SqueezingMode::none:
      input.squeeze_factor = 0.0;
      break;
    case SqueezingMode::fixed_angle:
      break;
    case SqueezingMode::frequency_dependent:
      input.injection_angle_rad = optimal_squeeze_angle(k);
      break;
  }
  const auto out = apply_readout_loss(
      propagate(ponderomotive_transfer(k), squeezed_input_covariance(input)), efficiency);
  return readout_variance(out, zeta);
}

Spectrogram interferometer_noise_map(const InterferometerParams& ifo, const SqueezerParams& sq,
                                     double efficiency, const FrequencyGrid& grid,
                                     std::size_t angle_count, SqueezingMode mode) {
  if (grid.empty()) throw DomainError("frequency grid is empty");
  if (angle_count < 4) {
    throw DomainError(fmt::format("angle_count must be >= 4 (got {})", angle_count));
  }
  ifo.validate();
  sq.validate();
  Spectrogram out{grid, uniform_angles(angle_count),
                  std::vector<double>(grid.size() * angle_count)};
  detail::parallel_for(grid.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < angle_count; ++j) {
      const double zeta = out.angles[j];
      const double squeezed = interferometer_noise(ifo, sq, efficiency, grid[i], zeta, mode);
      const double plain =
          interferometer_noise(ifo, sq, efficiency, grid[i], zeta, SqueezingMode::none);
      out.db[i * angle_count + j] = 10.0 * std::log10(squeezed / plain);
    }
  });
  return out;
}

}  // namespace qnoise
