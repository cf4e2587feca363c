#pragma once

// Joint least-squares estimation of the detuned-cavity EPR noise model from
// measured noise traces (dB relative to vacuum) at several readout angles.

#include "qnoise/model.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qnoise {

struct MeasuredTrace {
  std::string label;  // phase | intermediate | amplitude | anything else for an explicit angle
  double zeta_rad = kPhaseQuadrature;
  std::vector<double> frequency_hz;
  std::vector<double> noise_db;
  double weight = 1.0;

  void validate() const;
};

// Readout angle for the named quadrature cuts; throws for unknown names.
double zeta_for_label(std::string_view label);

// Everything the model needs besides the per-trace readout angle.
struct ModelParams {
  FilterCavityParams cavity;
  double squeeze_factor = 0.0;
  double efficiency = 1.0;
  double lo_ratio = 1.0;  // alpha / beta
};

enum class ParamKind {
  squeeze_factor,
  efficiency,
  halfwidth,
  detuning_signal,
  detuning_idler,
  lo_ratio,
  readout_angle,
};

struct ParamId {
  ParamKind kind = ParamKind::squeeze_factor;
  std::size_t trace = 0;  // readout_angle only

  friend bool operator==(const ParamId&, const ParamId&) = default;
};

// Names: r, eta, gamma_rad_s, delta1_rad_s, delta2_rad_s, lo_ratio,
// zeta_rad[<trace index>]. Separate LO powers are rejected: only their ratio
// is identifiable.
ParamId parse_param_id(std::string_view name);
std::string to_string(const ParamId& id);

struct FreeParameter {
  ParamId id;
  double initial = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct FitOptions {
  std::size_t max_iterations = 10000;
  double tolerance = 1e-9;
  std::uint64_t seed = 0;
  bool gradient_refinement = true;
};

struct FitProblem {
  std::vector<MeasuredTrace> traces;
  ModelParams base;
  std::vector<FreeParameter> free;
  FitOptions options;

  void validate() const;
};

// Model parameters together with every trace's readout angle.
struct FitPoint {
  ModelParams model;
  std::vector<double> zeta;
};

// Start point of a problem: base values with free parameters at their
// initial guesses.
FitPoint initial_point(const FitProblem& problem);
// Writes the free values into a copy of `base`.
FitPoint apply_free_values(const FitProblem& problem, const FitPoint& base,
                           std::span<const double> values);
double get_param(const FitPoint& point, const ParamId& id);

double model_db(const FitPoint& point, std::size_t trace, double frequency_hz);

// Sum over traces and samples of weight * (model dB - measured dB)^2.
double evaluate_residual(const FitProblem& problem, const FitPoint& point);
double evaluate_residual(const FitProblem& problem, std::span<const double> free_values);

struct FitResult {
  FitPoint point;
  std::vector<std::string> names;  // free parameter names, in problem order
  std::vector<double> estimate;    // free parameter values, in problem order
  double residual = 0.0;           // dB^2
  double initial_residual = 0.0;
  std::vector<std::vector<double>> trace_residuals;  // model - measured, dB
  bool converged = false;
  bool hit_iteration_cap = false;
  std::size_t iterations = 0;
  std::vector<double> residual_history;  // accepted-step objective values
  std::vector<std::string> at_bound;
  std::vector<std::string> insensitive;
  // True when (delta1, delta2, zeta) was mirrored to keep delta1 >= 0.
  bool gauge_flipped = false;
};

FitResult fit(const FitProblem& problem);

struct ProfilePoint {
  double value = 0.0;
  double residual = 0.0;
  bool converged = false;
};

// Fixes `id` at each grid value and re-fits the remaining free parameters,
// starting from the joint optimum.
std::vector<ProfilePoint> profile_parameter(const FitProblem& problem, const ParamId& id,
                                            std::span<const double> grid);

}  // namespace qnoise
