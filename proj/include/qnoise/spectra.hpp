#pragma once

// Noise spectra of EPR-entangled squeezed light reflected off a detuned
// cavity and read out with a bichromatic homodyne detector, plus two-mode
// conditional-variance analysis and the interferometer quantum-noise map.

#include "qnoise/model.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace qnoise {

// Polynomials and couplings shared by every detuned-cavity evaluation.
struct CavityCoefficients {
  double c = 0.0;
  double d = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
};

double coefficient_c(double halfwidth, double delta1, double delta2, double omega);
double coefficient_d(double halfwidth, double delta1, double delta2, double omega);
double coupling_k1(double halfwidth, double delta1, double delta2, double omega);
double coupling_k2(double halfwidth, double delta1, double delta2, double omega);
CavityCoefficients cavity_coefficients(double halfwidth, double delta1, double delta2,
                                       double omega);

struct NoiseSpectrum {
  FrequencyGrid grid;
  std::vector<double> values;  // vacuum = 1

  std::vector<double> db() const;
};

// S(Omega) at the readout angle carried by rd.
double epr_noise(const FilterCavityParams& cav, const SqueezerParams& sq, const ReadoutParams& rd,
                 double omega);
NoiseSpectrum epr_noise_spectrum(const FilterCavityParams& cav, const SqueezerParams& sq,
                                 const ReadoutParams& rd, const FrequencyGrid& grid);

// Closed-form minimum of S over the readout angle, and the angle reaching it.
double epr_minimum_noise(const FilterCavityParams& cav, const SqueezerParams& sq,
                         const ReadoutParams& rd, double omega);
double epr_minimum_angle(const FilterCavityParams& cav, double omega);

// Noise (dB relative to vacuum) over frequency rows and readout-angle columns.
struct Spectrogram {
  FrequencyGrid grid;
  std::vector<double> angles;
  std::vector<double> db;  // row-major: db[i * angles.size() + j]

  double at(std::size_t freq, std::size_t angle) const { return db[freq * angles.size() + angle]; }
  // Index of the lowest-noise angle in a frequency row.
  std::size_t argmin_angle(std::size_t freq) const;
};

// Floor applied only when rendering values for display.
inline constexpr double kDisplayFloorDb = -60.0;
double display_db(double db);

std::vector<double> uniform_angles(std::size_t count);

// Sweeps the readout angle uniformly over [0, 2 pi); rd supplies the other
// readout settings.
Spectrogram spectrogram(const FilterCavityParams& cav, const SqueezerParams& sq,
                        const ReadoutParams& rd, const FrequencyGrid& grid,
                        std::size_t angle_count);

struct AnglePoint {
  double omega = 0.0;
  double theta = 0.0;
};

// theta = atan2(K2, K1) / 2, continued along the grid from its highest
// frequency, where theta tends to zero.
std::vector<AnglePoint> squeeze_angle_trajectory(const FilterCavityParams& cav,
                                                 const FrequencyGrid& grid);
double trajectory_span(const std::vector<AnglePoint>& trajectory);

// Continues a sequence of angles defined modulo `period` from its last
// element backwards, choosing the branch nearest to the previous value.
std::vector<double> unwrap_from_back(std::vector<double> angles, double period);

// sqrt(K1^2 + K2^2) = |C| / sqrt(D).
double inference_fidelity(const FilterCavityParams& cav, double omega);

enum class Quadrature { amplitude, phase };

// Vacuum-normalized covariance over (signal ampl, signal phase, idler ampl,
// idler phase).
class TwoModeCovariance {
 public:
  TwoModeCovariance() : m_(Eigen::Matrix4d::Identity()) {}

  static TwoModeCovariance from_matrix(const Eigen::Matrix4d& m);
  static TwoModeCovariance vacuum() { return {}; }
  // Ideal two-mode squeezed vacuum with symmetric loss on both modes.
  static TwoModeCovariance two_mode_squeezed(double squeeze_factor, double efficiency = 1.0);

  const Eigen::Matrix4d& matrix() const { return m_; }
  // Sigma + i Omega >= 0 within tolerance.
  bool is_physical(double tol = 1e-10) const;

 private:
  explicit TwoModeCovariance(const Eigen::Matrix4d& m) : m_(m) {}
  Eigen::Matrix4d m_;
};

// Var(x_s + g x_i) for the selected quadrature pair.
double conditional_variance(const TwoModeCovariance& state, Quadrature q, double gain);
// g* = -Cov(x_s, x_i) / Var(x_i).
double optimal_conditioning_gain(const TwoModeCovariance& state, Quadrature q);
double minimum_conditional_variance(const TwoModeCovariance& state, Quadrature q);

struct ReidResult {
  double amplitude = 1.0;
  double phase = 1.0;
  double product = 1.0;
  bool entangled = false;
};

ReidResult reid_epr_criterion(const TwoModeCovariance& state);

enum class SqueezingMode { none, fixed_angle, frequency_dependent };

// Output variance (vacuum = 1) of the interferometer readout at angle zeta.
double interferometer_noise(const InterferometerParams& ifo, const SqueezerParams& sq,
                            double efficiency, double omega, double zeta, SqueezingMode mode);

// Noise map in dB relative to the unsqueezed interferometer.
Spectrogram interferometer_noise_map(const InterferometerParams& ifo, const SqueezerParams& sq,
                                     double efficiency, const FrequencyGrid& grid,
                                     std::size_t angle_count, SqueezingMode mode);

}  // namespace qnoise
