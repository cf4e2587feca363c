#pragma once

// Elementary optomechanical and optical-cavity quantities: parameter types,
// the Kimble factor, the detuned-cavity coupling, and single-mode quadrature
// covariance propagation.
//
// Quadrature angles are measured from the amplitude quadrature: a readout
// angle of 0 reads amplitude, pi/2 reads phase. The injected squeeze angle
// follows the input-output relation of the tuned interferometer: phi = 0
// squeezes the phase quadrature and phi = arctan K is the optimal
// frequency-dependent angle.

#include <Eigen/Core>

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace qnoise {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kAmplitudeQuadrature = 0.0;
inline constexpr double kPhaseQuadrature = kPi / 2.0;

struct InterferometerParams {
  double circulating_power_w = 800e3;
  double mirror_mass_kg = 40.0;
  double wavelength_m = 1064e-9;
  double arm_length_m = 4000.0;
  double detector_halfwidth_rad_s = 2.0 * kPi * 500.0;

  // J = 8 pi I_c / (M lambda L), in s^-3.
  double coupling_j() const;
  void validate() const;
};

struct FilterCavityParams {
  double halfwidth_rad_s = 2.0 * kPi * 150e3;
  double detuning_signal_rad_s = 0.0;
  double detuning_idler_rad_s = 0.0;
  double fsr_hz = 58.73e6;
  double length_m = 2.5;
  // Absolute frequency of one resonance; the comb sits at anchor + n * fsr.
  double resonance_anchor_hz = 0.0;

  void validate() const;
};

struct CarrierLayout {
  double pump_rad_s = 0.0;
  double signal_rad_s = 0.0;
  double idler_rad_s = 0.0;

  // Energy conservation pump = signal + idler and signal < idler.
  void validate() const;
  // Symmetric layout around pump/2 with the given carrier separation.
  static CarrierLayout symmetric(double pump_rad_s, double separation_rad_s);
};

struct SqueezerParams {
  double squeeze_factor = 0.0;
  double injection_angle_rad = 0.0;

  void validate() const;
};

struct ReadoutParams {
  double readout_angle_rad = kPhaseQuadrature;
  double efficiency = 1.0;
  double lo_power_signal = 1.0;
  double lo_power_idler = 1.0;
  double conditioning_gain = 0.0;

  void validate() const;
  // 2 sqrt(alpha beta) / (alpha + beta); depends only on alpha / beta.
  double lo_balance() const;
};

// Vacuum-normalized 2x2 covariance over (amplitude, phase).
class QuadCovariance {
 public:
  QuadCovariance() : m_(Eigen::Matrix2d::Identity()) {}

  // Symmetrizes and checks positive-definiteness.
  static QuadCovariance from_matrix(const Eigen::Matrix2d& m);
  static QuadCovariance vacuum() { return {}; }

  const Eigen::Matrix2d& matrix() const { return m_; }
  double amplitude_variance() const { return m_(0, 0); }
  double phase_variance() const { return m_(1, 1); }
  double covariance() const { return m_(0, 1); }
  double determinant() const { return m_.determinant(); }
  // Heisenberg bound det >= 1 within tolerance.
  bool is_physical(double tol = 1e-10) const;

 private:
  explicit QuadCovariance(const Eigen::Matrix2d& m) : m_(m) {}
  Eigen::Matrix2d m_;
};

// Linear map acting on (amplitude, phase) quadrature operators.
using QuadTransform = Eigen::Matrix2d;

// Returns T * Sigma * T^T.
QuadCovariance propagate(const QuadTransform& t, const QuadCovariance& sigma);

enum class GridSpacing { linear, logarithmic };

// Strictly increasing list of positive sideband frequencies in rad/s.
class FrequencyGrid {
 public:
  static FrequencyGrid linear(double min_rad_s, double max_rad_s, std::size_t points);
  static FrequencyGrid logarithmic(double min_rad_s, double max_rad_s, std::size_t points);
  static FrequencyGrid from_values(std::vector<double> omega, GridSpacing spacing);
  // Log grid from Hz bounds (10 kHz to 30 MHz, 512 points by default).
  static FrequencyGrid default_epr();

  std::span<const double> values() const { return omega_; }
  double operator[](std::size_t i) const { return omega_[i]; }
  std::size_t size() const { return omega_.size(); }
  bool empty() const { return omega_.empty(); }
  GridSpacing spacing() const { return spacing_; }

 private:
  FrequencyGrid(std::vector<double> omega, GridSpacing spacing);
  std::vector<double> omega_;
  GridSpacing spacing_;
};

// K(Omega) = 2 J gamma / (Omega^2 (gamma^2 + Omega^2)).
double kimble_factor(const InterferometerParams& ifo, double omega);

// K^cav(Omega, delta) = 2 gamma delta / (gamma^2 - delta^2 + Omega^2).
// Throws SingularityError on the pole Omega^2 = delta^2 - gamma^2.
double cavity_coupling(double halfwidth, double detuning, double omega);

// |K - K^cav(Omega, gamma) J / gamma^3| / K. Vanishes as (Omega/gamma)^2
// when gamma equals the detector halfwidth.
double kimble_cavity_equivalence_error(const InterferometerParams& ifo, double halfwidth,
                                       double omega);

// (a, p) -> (a, p - K a).
QuadTransform ponderomotive_transfer(double kimble);

QuadCovariance squeezed_input_covariance(const SqueezerParams& sq);

// eta * Sigma + (1 - eta) * I.
QuadCovariance apply_readout_loss(const QuadCovariance& sigma, double efficiency);

// v^T Sigma v with v = (cos zeta, sin zeta).
double readout_variance(const QuadCovariance& sigma, double zeta);

double optimal_squeeze_angle(double kimble);

// Phase-quadrature output variance evaluated from the operator coefficients
// of the squeezed input passing the ponderomotive coupling.
double phase_quadrature_noise(const InterferometerParams& ifo, const SqueezerParams& sq,
                              double omega);

// Same quantity by covariance propagation: squeeze, couple, read at pi/2.
double phase_quadrature_noise_propagated(const InterferometerParams& ifo,
                                         const SqueezerParams& sq, double omega);

struct Detunings {
  double signal_rad_s = 0.0;
  double idler_rad_s = 0.0;
};

// Signed offsets from the nearest cavity resonance, in (-pi fsr, pi fsr].
Detunings detunings_from_layout(const CarrierLayout& layout, const FilterCavityParams& cav);

// Offset of one carrier from its nearest resonance.
double detuning_from_resonance(double carrier_rad_s, const FilterCavityParams& cav);

}  // namespace qnoise
