#include "qnoise/model.hpp"

#include "qnoise/error.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <utility>

namespace qnoise {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw DomainError(fmt::format("{} must be finite and > 0 (got {})", name, value));
  }
}

void require_finite(double value, const char* name) {
  if (!std::isfinite(value)) {
    throw DomainError(fmt::format("{} must be finite (got {})", name, value));
  }
}

}  // namespace

double InterferometerParams::coupling_j() const {
  return 8.0 * kPi * circulating_power_w / (mirror_mass_kg * wavelength_m * arm_length_m);
}

void InterferometerParams::validate() const {
  require_positive(circulating_power_w, "circulating_power_w");
  require_positive(mirror_mass_kg, "mirror_mass_kg");
  require_positive(wavelength_m, "wavelength_m");
  require_positive(arm_length_m, "arm_length_m");
  require_positive(detector_halfwidth_rad_s, "detector_halfwidth_rad_s");
  require_positive(coupling_j(), "coupling J");
}

void FilterCavityParams::validate() const {
  require_positive(halfwidth_rad_s, "halfwidth_rad_s");
  require_finite(detuning_signal_rad_s, "detuning_signal_rad_s");
  require_finite(detuning_idler_rad_s, "detuning_idler_rad_s");
  require_positive(fsr_hz, "fsr_hz");
  require_positive(length_m, "length_m");
  require_finite(resonance_anchor_hz, "resonance_anchor_hz");
  const double half_fsr = kPi * fsr_hz;
  for (auto [value, name] : {std::pair{detuning_signal_rad_s, "detuning_signal_rad_s"},
                             std::pair{detuning_idler_rad_s, "detuning_idler_rad_s"}}) {
    if (std::abs(value) >= half_fsr) {
      throw DomainError(fmt::format("{} = {} exceeds half the free spectral range ({} rad/s)",
                                    name, value, half_fsr));
    }
  }
}

void CarrierLayout::validate() const {
  require_positive(pump_rad_s, "pump_rad_s");
  require_positive(signal_rad_s, "signal_rad_s");
  require_positive(idler_rad_s, "idler_rad_s");
  if (!(signal_rad_s < idler_rad_s)) {
    throw DomainError("signal carrier must lie below the idler carrier");
  }
  const double mismatch = std::abs(signal_rad_s + idler_rad_s - pump_rad_s);
  if (mismatch > 1e-12 * pump_rad_s) {
    throw DomainError(fmt::format(
        "carriers violate pump = signal + idler (mismatch {} rad/s)", mismatch));
  }
}

CarrierLayout CarrierLayout::symmetric(double pump_rad_s, double separation_rad_s) {
  CarrierLayout layout;
  layout.pump_rad_s = pump_rad_s;
  layout.signal_rad_s = 0.5 * (pump_rad_s - separation_rad_s);
  layout.idler_rad_s = pump_rad_s - layout.signal_rad_s;
  return layout;
}

void SqueezerParams::validate() const {
  if (!(squeeze_factor >= 0.0) || !std::isfinite(squeeze_factor)) {
    throw DomainError(fmt::format("squeeze_factor must be finite and >= 0 (got {})",
                                  squeeze_factor));
  }
  require_finite(injection_angle_rad, "injection_angle_rad");
}

void ReadoutParams::validate() const {
  require_finite(readout_angle_rad, "readout_angle_rad");
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
    throw DomainError(fmt::format("efficiency must lie in [0, 1] (got {})", efficiency));
  }
  require_positive(lo_power_signal, "lo_power_signal");
  require_positive(lo_power_idler, "lo_power_idler");
  require_finite(conditioning_gain, "conditioning_gain");
}

double ReadoutParams::lo_balance() const {
  // Written in the ratio so that only alpha / beta enters.
  const double ratio = lo_power_signal / lo_power_idler;
  return 2.0 * std::sqrt(ratio) / (1.0 + ratio);
}

QuadCovariance QuadCovariance::from_matrix(const Eigen::Matrix2d& m) {
  if (!m.allFinite()) {
    throw DomainError("covariance contains non-finite entries");
  }
  const Eigen::Matrix2d sym = 0.5 * (m + m.transpose());
  if ((m - sym).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw DomainError("covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(sym, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= -1e-10) {
    throw DomainError(fmt::format("covariance is not positive-definite (min eigenvalue {})",
                                  eig.eigenvalues().minCoeff()));
  }
  return QuadCovariance(sym);
}

bool QuadCovariance::is_physical(double tol) const { return determinant() >= 1.0 - tol; }

QuadCovariance propagate(const QuadTransform& t, const QuadCovariance& sigma) {
  return QuadCovariance::from_matrix(t * sigma.matrix() * t.transpose());
}

FrequencyGrid::FrequencyGrid(std::vector<double> omega, GridSpacing spacing)
    : omega_(std::move(omega)), spacing_(spacing) {
  for (std::size_t i = 0; i < omega_.size(); ++i) {
    if (!(omega_[i] > 0.0) || !std::isfinite(omega_[i])) {
      throw DomainError(fmt::format("grid frequency #{} must be finite and > 0", i));
    }
    if (i > 0 && !(omega_[i] > omega_[i - 1])) {
      throw DomainError(fmt::format("grid is not strictly increasing at index {}", i));
    }
  }
}

FrequencyGrid FrequencyGrid::linear(double min_rad_s, double max_rad_s, std::size_t points) {
  if (points == 0) throw DomainError("grid needs at least one point");
  if (points > 1 && !(max_rad_s > min_rad_s)) {
    throw DomainError("grid maximum must exceed its minimum");
  }
  std::vector<double> omega(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    omega[i] = min_rad_s + t * (max_rad_s - min_rad_s);
  }
  if (points > 1) omega.back() = max_rad_s;
  return FrequencyGrid(std::move(omega), GridSpacing::linear);
}

FrequencyGrid FrequencyGrid::logarithmic(double min_rad_s, double max_rad_s, std::size_t points) {
  if (points == 0) throw DomainError("grid needs at least one point");
  require_positive(min_rad_s, "grid minimum");
  if (points > 1 && !(max_rad_s > min_rad_s)) {
    throw DomainError("grid maximum must exceed its minimum");
  }
  const double lo = std::log(min_rad_s);
  const double hi = std::log(max_rad_s);
  std::vector<double> omega(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    omega[i] = std::exp(lo + t * (hi - lo));
  }
  omega.front() = min_rad_s;
  if (points > 1) omega.back() = max_rad_s;
  return FrequencyGrid(std::move(omega), GridSpacing::logarithmic);
}

FrequencyGrid FrequencyGrid::from_values(std::vector<double> omega, GridSpacing spacing) {
  if (omega.empty()) throw DomainError("grid needs at least one point");
  return FrequencyGrid(std::move(omega), spacing);
}

FrequencyGrid FrequencyGrid::default_epr() {
  return logarithmic(2.0 * kPi * 10e3, 2.0 * kPi * 30e6, 512);
}

double kimble_factor(const InterferometerParams& ifo, double omega) {
  ifo.validate();
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw DomainError(fmt::format("Kimble factor needs Omega > 0 (got {})", omega));
  }
  const double gamma = ifo.detector_halfwidth_rad_s;
  return 2.0 * ifo.coupling_j() * gamma / (omega * omega * (gamma * gamma + omega * omega));
}

double cavity_coupling(double halfwidth, double detuning, double omega) {
  require_positive(halfwidth, "cavity halfwidth");
  require_finite(detuning, "detuning");
  require_finite(omega, "omega");
  const double g2 = halfwidth * halfwidth;
  const double d2 = detuning * detuning;
  const double w2 = omega * omega;
  const double denom = g2 - d2 + w2;
  if (std::abs(denom) <= 1e-12 * (g2 + d2 + w2)) {
    throw SingularityError(
        fmt::format("cavity coupling pole at Omega = {} rad/s (delta = {}, gamma = {})", omega,
                    detuning, halfwidth),
        omega);
  }
  return 2.0 * halfwidth * detuning / denom;
}

double kimble_cavity_equivalence_error(const InterferometerParams& ifo, double halfwidth,
                                       double omega) {
  const double k = kimble_factor(ifo, omega);
  const double approx = cavity_coupling(halfwidth, halfwidth, omega) * ifo.coupling_j() /
                        (halfwidth * halfwidth * halfwidth);
  return std::abs(k - approx) / k;
}

QuadTransform ponderomotive_transfer(double kimble) {
  QuadTransform t;
  t << 1.0, 0.0, -kimble, 1.0;
  return t;
}

QuadCovariance squeezed_input_covariance(const SqueezerParams& sq) {
  sq.validate();
  const double ch = std::cosh(2.0 * sq.squeeze_factor);
  const double sh = std::sinh(2.0 * sq.squeeze_factor);
  const double c = std::cos(2.0 * sq.injection_angle_rad);
  const double s = std::sin(2.0 * sq.injection_angle_rad);
  Eigen::Matrix2d m;
  m << ch + sh * c, sh * s, sh * s, ch - sh * c;
  return QuadCovariance::from_matrix(m);
}

QuadCovariance apply_readout_loss(const QuadCovariance& sigma, double efficiency) {
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
    throw DomainError(fmt::format("efficiency must lie in [0, 1] (got {})", efficiency));
  }
  return QuadCovariance::from_matrix(efficiency * sigma.matrix() +
                                     (1.0 - efficiency) * Eigen::Matrix2d::Identity());
}

double readout_variance(const QuadCovariance& sigma, double zeta) {
  const Eigen::Vector2d v(std::cos(zeta), std::sin(zeta));
  return v.dot(sigma.matrix() * v);
}

double optimal_squeeze_angle(double kimble) { return std::atan(kimble); }

double phase_quadrature_noise(const InterferometerParams& ifo, const SqueezerParams& sq,
                              double omega) {
  sq.validate();
  const double k = kimble_factor(ifo, omega);
  const double ch = std::cosh(sq.squeeze_factor);
  const double sh = std::sinh(sq.squeeze_factor);
  const double c = std::cos(2.0 * sq.injection_angle_rad);
  const double s = std::sin(2.0 * sq.injection_angle_rad);
  // Coefficients multiplying the input phase and amplitude quadratures.
  const double on_phase = ch - sh * (c + k * s);
  const double on_amplitude = -k * ch - k * sh * c + sh * s;
  return on_phase * on_phase + on_amplitude * on_amplitude;
}

double phase_quadrature_noise_propagated(const InterferometerParams& ifo,
                                         const SqueezerParams& sq, double omega) {
  const auto out =
      propagate(ponderomotive_transfer(kimble_factor(ifo, omega)), squeezed_input_covariance(sq));
  return readout_variance(out, kPhaseQuadrature);
}

double detuning_from_resonance(double carrier_rad_s, const FilterCavityParams& cav) {
  if (!(cav.fsr_hz > 0.0)) throw DomainError("fsr_hz must be > 0");
  // Work in Hz with extended precision: optical carriers are ~1e14 Hz while
  // detunings of interest are ~1e5 Hz.
  using ld = long double;
  const ld two_pi = 2.0L * std::numbers::pi_v<long double>;
  const ld offset_hz = static_cast<ld>(carrier_rad_s) / two_pi - cav.resonance_anchor_hz;
  const ld fsr = cav.fsr_hz;
  ld rem = std::fmod(offset_hz, fsr);
  if (rem < 0) rem += fsr;
  // Map [0, fsr) onto (-fsr/2, fsr/2].
  if (rem > fsr / 2) rem -= fsr;
  return static_cast<double>(rem * two_pi);
}

Detunings detunings_from_layout(const CarrierLayout& layout, const FilterCavityParams& cav) {
  layout.validate();
  return {detuning_from_resonance(layout.signal_rad_s, cav),
          detuning_from_resonance(layout.idler_rad_s, cav)};
}

}  // namespace qnoise
