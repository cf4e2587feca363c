#include "qnoise/fit.hpp"

#include "qnoise/error.hpp"
#include "qnoise/spectra.hpp"

#include <fmt/format.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace qnoise {

void MeasuredTrace::validate() const {
  if (frequency_hz.size() != noise_db.size()) {
    throw DomainError(fmt::format("trace '{}': {} frequencies but {} noise values", label,
                                  frequency_hz.size(), noise_db.size()));
  }
  if (frequency_hz.empty()) throw DomainError(fmt::format("trace '{}' has no samples", label));
  for (std::size_t i = 0; i < frequency_hz.size(); ++i) {
    if (!std::isfinite(frequency_hz[i]) || !(frequency_hz[i] > 0.0)) {
      throw DomainError(fmt::format("trace '{}' row {}: frequency must be finite and > 0", label, i));
    }
    if (!std::isfinite(noise_db[i])) {
      throw DomainError(fmt::format("trace '{}' row {}: noise value is not finite", label, i));
    }
    if (i > 0 && !(frequency_hz[i] > frequency_hz[i - 1])) {
      throw DomainError(
          fmt::format("trace '{}' row {}: frequencies are not strictly increasing", label, i));
    }
  }
  if (!std::isfinite(weight) || !(weight > 0.0)) {
    throw DomainError(fmt::format("trace '{}': weight must be finite and > 0", label));
  }
  if (!std::isfinite(zeta_rad)) throw DomainError(fmt::format("trace '{}': zeta is not finite", label));
}

double zeta_for_label(std::string_view label) {
  if (label == "phase") return kPhaseQuadrature;
  if (label == "intermediate") return kPi / 4.0;
  if (label == "amplitude") return kAmplitudeQuadrature;
  throw DomainError(fmt::format("unknown quadrature label '{}'", label));
}

ParamId parse_param_id(std::string_view name) {
  if (name == "r") return {ParamKind::squeeze_factor};
  if (name == "eta") return {ParamKind::efficiency};
  if (name == "gamma_rad_s") return {ParamKind::halfwidth};
  if (name == "delta1_rad_s") return {ParamKind::detuning_signal};
  if (name == "delta2_rad_s") return {ParamKind::detuning_idler};
  if (name == "lo_ratio") return {ParamKind::lo_ratio};
  if (name == "alpha" || name == "beta" || name == "lo_power_signal" ||
      name == "lo_power_idler") {
    throw DomainError(fmt::format(
        "'{}' cannot be fitted: only the LO power ratio alpha/beta is identifiable, use lo_ratio",
        name));
  }
  constexpr std::string_view prefix = "zeta_rad[";
  if (name.starts_with(prefix) && name.ends_with("]")) {
    const auto digits = name.substr(prefix.size(), name.size() - prefix.size() - 1);
    std::size_t index = 0;
    if (digits.empty()) throw DomainError(fmt::format("bad parameter name '{}'", name));
    for (char ch : digits) {
      if (ch < '0' || ch > '9') throw DomainError(fmt::format("bad parameter name '{}'", name));
      index = index * 10 + static_cast<std::size_t>(ch - '0');
    }
    return {ParamKind::readout_angle, index};
  }
  throw DomainError(fmt::format("unknown fit parameter '{}'", name));
}

std::string to_string(const ParamId& id) {
  switch (id.kind) {
    case ParamKind::squeeze_factor: return "r";
    case ParamKind::efficiency: return "eta";
    case ParamKind::halfwidth: return "gamma_rad_s";
    case ParamKind::detuning_signal: return "delta1_rad_s";
    case ParamKind::detuning_idler: return "delta2_rad_s";
    case ParamKind::lo_ratio: return "lo_ratio";
    case ParamKind::readout_angle: return fmt::format("zeta_rad[{}]", id.trace);
  }
  return "?";
}

namespace {

double& param_ref(FitPoint& point, const ParamId& id) {
  switch (id.kind) {
    case ParamKind::squeeze_factor: return point.model.squeeze_factor;
    case ParamKind::efficiency: return point.model.efficiency;
    case ParamKind::halfwidth: return point.model.cavity.halfwidth_rad_s;
    case ParamKind::detuning_signal: return point.model.cavity.detuning_signal_rad_s;
    case ParamKind::detuning_idler: return point.model.cavity.detuning_idler_rad_s;
    case ParamKind::lo_ratio: return point.model.lo_ratio;
    case ParamKind::readout_angle: return point.zeta.at(id.trace);
  }
  throw DomainError("unknown parameter kind");
}

bool log_scaled(const FreeParameter& p) {
  const bool positive_kind = p.id.kind == ParamKind::squeeze_factor ||
                             p.id.kind == ParamKind::halfwidth || p.id.kind == ParamKind::lo_ratio;
  return positive_kind && p.lower > 0.0;
}

// Maps an unconstrained coordinate onto [lower, upper]: a logistic box map,
// applied in log space for the positive scale parameters.
struct BoxTransform {
  double lo;
  double hi;
  bool log;

  explicit BoxTransform(const FreeParameter& p)
      : lo(log_scaled(p) ? std::log(p.lower) : p.lower),
        hi(log_scaled(p) ? std::log(p.upper) : p.upper),
        log(log_scaled(p)) {}

  double to_value(double u) const {
    const double t = 1.0 / (1.0 + std::exp(-u));
    const double base = lo + (hi - lo) * t;
    return log ? std::exp(base) : base;
  }

  double to_internal(double value) const {
    const double base = log ? std::log(value) : value;
    const double t = std::clamp((base - lo) / (hi - lo), 1e-15, 1.0 - 1e-15);
    return std::log(t / (1.0 - t));
  }

  // Fraction of the box, used for at-bound reporting.
  double fraction(double value) const {
    const double base = log ? std::log(value) : value;
    return (base - lo) / (hi - lo);
  }
};

}  // namespace

double get_param(const FitPoint& point, const ParamId& id) {
  return param_ref(const_cast<FitPoint&>(point), id);
}

void FitProblem::validate() const {
  if (traces.empty()) throw DomainError("fit problem has no traces");
  for (const auto& t : traces) t.validate();
  if (free.empty()) throw DomainError("fit problem has no free parameters");
  base.cavity.validate();
  for (std::size_t i = 0; i < free.size(); ++i) {
    const auto& p = free[i];
    const auto name = to_string(p.id);
    if (p.id.kind == ParamKind::readout_angle && p.id.trace >= traces.size()) {
      throw DomainError(fmt::format("{} refers to a missing trace", name));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (free[j].id == p.id) throw DomainError(fmt::format("{} listed twice", name));
    }
    if (!std::isfinite(p.lower) || !std::isfinite(p.upper) || !(p.lower < p.upper)) {
      throw DomainError(fmt::format("{}: bounds must be finite with lower < upper", name));
    }
    if (!(p.initial >= p.lower && p.initial <= p.upper)) {
      throw DomainError(fmt::format("{}: initial guess {} lies outside [{}, {}]", name, p.initial,
                                    p.lower, p.upper));
    }
  }
  if (!(options.max_iterations > 0)) throw DomainError("max_iterations must be > 0");
  if (!(options.tolerance > 0.0)) throw DomainError("tolerance must be > 0");
}

FitPoint initial_point(const FitProblem& problem) {
  FitPoint point{problem.base, {}};
  point.zeta.reserve(problem.traces.size());
  for (const auto& t : problem.traces) point.zeta.push_back(t.zeta_rad);
  for (const auto& p : problem.free) param_ref(point, p.id) = p.initial;
  return point;
}

FitPoint apply_free_values(const FitProblem& problem, const FitPoint& base,
                           std::span<const double> values) {
  if (values.size() != problem.free.size()) {
    throw DomainError(fmt::format("expected {} free values, got {}", problem.free.size(),
                                  values.size()));
  }
  FitPoint point = base;
  for (std::size_t i = 0; i < values.size(); ++i) param_ref(point, problem.free[i].id) = values[i];
  return point;
}

double model_db(const FitPoint& point, std::size_t trace, double frequency_hz) {
  SqueezerParams sq;
  sq.squeeze_factor = point.model.squeeze_factor;
  ReadoutParams rd;
  rd.readout_angle_rad = point.zeta.at(trace);
  rd.efficiency = point.model.efficiency;
  rd.lo_power_signal = point.model.lo_ratio;
  rd.lo_power_idler = 1.0;
  return 10.0 * std::log10(epr_noise(point.model.cavity, sq, rd, 2.0 * kPi * frequency_hz));
}

namespace {

// Weighted residual vector sqrt(w) * (model - measured) over all samples.
Eigen::VectorXd residual_vector(const FitProblem& problem, const FitPoint& point) {
  std::size_t total = 0;
  for (const auto& t : problem.traces) total += t.frequency_hz.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(total));
  Eigen::Index k = 0;
  for (std::size_t ti = 0; ti < problem.traces.size(); ++ti) {
    const auto& t = problem.traces[ti];
    const double sw = std::sqrt(t.weight);
    for (std::size_t i = 0; i < t.frequency_hz.size(); ++i) {
      double m = 0.0;
      try {
        m = model_db(point, ti, t.frequency_hz[i]);
      } catch (const Error& e) {
        throw NumericsError(
            fmt::format("model evaluation failed for trace '{}' sample {}: {}", t.label, i, e.what()));
      }
      if (!std::isfinite(m)) {
        throw NumericsError(
            fmt::format("model is not finite for trace '{}' sample {}", t.label, i));
      }
      out(k++) = sw * (m - t.noise_db[i]);
    }
  }
  return out;
}

}  // namespace

double evaluate_residual(const FitProblem& problem, const FitPoint& point) {
  for (const auto& p : problem.free) {
    const double v = get_param(point, p.id);
    if (!(v >= p.lower && v <= p.upper)) {
      throw DomainError(fmt::format("{} = {} lies outside its bounds [{}, {}]", to_string(p.id), v,
                                    p.lower, p.upper));
    }
  }
  return residual_vector(problem, point).squaredNorm();
}

double evaluate_residual(const FitProblem& problem, std::span<const double> free_values) {
  return evaluate_residual(problem,
                           apply_free_values(problem, initial_point(problem), free_values));
}

namespace {

class Objective {
 public:
  explicit Objective(const FitProblem& problem) : problem_(problem), start_(initial_point(problem)) {
    transforms_.reserve(problem.free.size());
    for (const auto& p : problem.free) transforms_.emplace_back(p);
  }

  std::size_t dim() const { return transforms_.size(); }

  Eigen::VectorXd to_internal(std::span<const double> values) const {
    Eigen::VectorXd u(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < dim(); ++i) u(static_cast<Eigen::Index>(i)) = transforms_[i].to_internal(values[i]);
    return u;
  }

  std::vector<double> to_values(const Eigen::VectorXd& u) const {
    std::vector<double> v(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
      const auto& p = problem_.free[i];
      v[i] = std::clamp(transforms_[i].to_value(u(static_cast<Eigen::Index>(i))), p.lower, p.upper);
    }
    return v;
  }

  FitPoint point(const Eigen::VectorXd& u) const {
    return apply_free_values(problem_, start_, to_values(u));
  }

  Eigen::VectorXd residuals(const Eigen::VectorXd& u) const {
    return residual_vector(problem_, point(u));
  }

  // Failed evaluations count as +inf so the optimizer steps away from them.
  double operator()(const Eigen::VectorXd& u) const {
    try {
      const double f = residuals(u).squaredNorm();
      return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  const BoxTransform& transform(std::size_t i) const { return transforms_[i]; }

 private:
  const FitProblem& problem_;
  FitPoint start_;
  std::vector<BoxTransform> transforms_;
};

struct SearchState {
  Eigen::VectorXd best;
  double value;
  std::size_t iterations = 0;
  std::vector<double> history;
};

bool relatively_close(double before, double after, double tol) {
  return before - after <= tol * std::abs(before);
}

// One Nelder-Mead run. Returns true if it stopped on the tolerance.
bool nelder_mead(const Objective& f, SearchState& state, std::size_t max_iterations, double tol,
                 double step, std::mt19937_64& rng) {
  const std::size_t n = f.dim();
  std::vector<Eigen::VectorXd> simplex(n + 1, state.best);
  std::vector<double> values(n + 1, state.value);
  std::bernoulli_distribution flip(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    simplex[i + 1](static_cast<Eigen::Index>(i)) += flip(rng) ? -step : step;
    values[i + 1] = f(simplex[i + 1]);
  }
  std::vector<std::size_t> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  };

  double cycle_start = state.value;
  std::size_t in_cycle = 0;
  while (state.iterations < max_iterations) {
    sort_simplex();
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];

    if (values[best] < state.value) {
      state.value = values[best];
      state.best = simplex[best];
      state.history.push_back(state.value);
    }
    if (state.value == 0.0) return true;

    double size = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      size = std::max(size, (simplex[i] - simplex[best]).cwiseAbs().maxCoeff());
    }
    if (size < 1e-13) return true;

    if (++in_cycle > n) {
      if (relatively_close(cycle_start, state.value, tol) && size < 1e-3) return true;
      cycle_start = state.value;
      in_cycle = 0;
    }
    ++state.iterations;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i <= n; ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double fr = f(reflected);
    if (fr < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = f(contracted);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = f(simplex[i]);
    }
  }
  return false;
}

Eigen::MatrixXd jacobian(const Objective& f, const Eigen::VectorXd& u, Eigen::Index rows) {
  Eigen::MatrixXd j(rows, u.size());
  for (Eigen::Index c = 0; c < u.size(); ++c) {
    const double h = 1e-6 * std::max(1.0, std::abs(u(c)));
    Eigen::VectorXd up = u;
    Eigen::VectorXd down = u;
    up(c) += h;
    down(c) -= h;
    j.col(c) = (f.residuals(up) - f.residuals(down)) / (2.0 * h);
  }
  return j;
}

// Levenberg-Marquardt polish with a central-difference Jacobian. Returns
// true if it stopped on the tolerance.
bool levenberg_marquardt(const Objective& f, SearchState& state, std::size_t max_iterations,
                         double tol) {
  double lambda = 1e-3;
  Eigen::VectorXd r;
  try {
    r = f.residuals(state.best);
  } catch (const Error&) {
    return false;
  }
  while (state.iterations < max_iterations) {
    if (state.value == 0.0) return true;
    ++state.iterations;
    Eigen::MatrixXd j;
    try {
      j = jacobian(f, state.best, r.size());
    } catch (const Error&) {
      return false;
    }
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd grad = j.transpose() * r;
    const double diag_floor = 1e-12 * std::max(jtj.diagonal().maxCoeff(), 1e-300);

    bool accepted = false;
    while (!accepted && lambda < 1e16) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        a(i, i) += lambda * std::max(jtj(i, i), diag_floor);
      }
      const Eigen::VectorXd step = a.ldlt().solve(-grad);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      if (step.norm() <= 1e-15 * (1.0 + state.best.norm())) return true;
      const Eigen::VectorXd trial = state.best + step;
      const double fv = f(trial);
      if (fv < state.value) {
        const double before = state.value;
        state.best = trial;
        state.value = fv;
        state.history.push_back(fv);
        r = f.residuals(trial);
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (relatively_close(before, fv, tol)) return true;
      } else {
        lambda *= 4.0;
      }
    }
    // No descent direction left within finite-difference accuracy.
    if (!accepted) return true;
  }
  return false;
}

bool mirror_allowed(const FitProblem& problem, const FitPoint& point) {
  auto within = [&](const ParamId& id, double value) {
    for (const auto& p : problem.free) {
      if (p.id == id) return value >= p.lower && value <= p.upper;
    }
    return true;
  };
  for (std::size_t t = 0; t < problem.traces.size(); ++t) {
    const ParamId id{ParamKind::readout_angle, t};
    const bool zeta_free = std::any_of(problem.free.begin(), problem.free.end(),
                                       [&](const FreeParameter& p) { return p.id == id; });
    const double zeta = point.zeta[t];
    if (zeta_free) {
      if (!within(id, -zeta)) return false;
    } else if (std::abs(std::sin(2.0 * zeta)) > 1e-12) {
      return false;
    }
  }
  return within({ParamKind::detuning_signal}, -point.model.cavity.detuning_signal_rad_s) &&
         within({ParamKind::detuning_idler}, -point.model.cavity.detuning_idler_rad_s);
}

}  // namespace

FitResult fit(const FitProblem& problem) {
  problem.validate();
  const Objective objective(problem);
  const auto& opts = problem.options;

  std::vector<double> initial_values;
  for (const auto& p : problem.free) initial_values.push_back(p.initial);

  FitResult result;
  result.initial_residual = evaluate_residual(problem, apply_free_values(problem, initial_point(problem),
                                                                          initial_values));
  if (!std::isfinite(result.initial_residual)) {
    throw NumericsError("residual is not finite at the initial guess");
  }

  SearchState state{objective.to_internal(initial_values), 0.0, 0, {}};
  state.value = objective(state.best);
  state.history.push_back(state.value);

  std::mt19937_64 rng(opts.seed);
  bool converged = false;
  // Restart the simplex around the incumbent until a restart stops paying off.
  double step = 0.25;
  for (int restart = 0; restart < 8 && state.iterations < opts.max_iterations; ++restart) {
    const double before = state.value;
    converged = nelder_mead(objective, state, opts.max_iterations, opts.tolerance, step, rng);
    if (!converged) break;
    if (restart > 0 && relatively_close(before, state.value, opts.tolerance)) break;
    step = std::max(step * 0.5, 1e-3);
  }
  if (opts.gradient_refinement && state.iterations < opts.max_iterations) {
    converged = levenberg_marquardt(objective, state, opts.max_iterations, opts.tolerance);
  }

  result.point = objective.point(state.best);
  result.iterations = state.iterations;
  result.hit_iteration_cap = state.iterations >= opts.max_iterations && !converged;
  result.converged = converged;
  result.residual_history = std::move(state.history);

  if (result.point.model.cavity.detuning_signal_rad_s < 0.0 &&
      mirror_allowed(problem, result.point)) {
    FitPoint mirrored = result.point;
    mirrored.model.cavity.detuning_signal_rad_s *= -1.0;
    mirrored.model.cavity.detuning_idler_rad_s *= -1.0;
    for (auto& z : mirrored.zeta) z = -z;
    result.point = mirrored;
    result.gauge_flipped = true;
  }

  for (std::size_t i = 0; i < problem.free.size(); ++i) {
    const auto& p = problem.free[i];
    const double v = get_param(result.point, p.id);
    result.names.push_back(to_string(p.id));
    result.estimate.push_back(v);
    const double frac = objective.transform(i).fraction(v);
    if (frac < 1e-6 || frac > 1.0 - 1e-6) result.at_bound.push_back(to_string(p.id));
  }

  result.residual = evaluate_residual(problem, result.point);
  result.trace_residuals.resize(problem.traces.size());
  for (std::size_t t = 0; t < problem.traces.size(); ++t) {
    const auto& trace = problem.traces[t];
    for (std::size_t i = 0; i < trace.frequency_hz.size(); ++i) {
      result.trace_residuals[t].push_back(model_db(result.point, t, trace.frequency_hz[i]) -
                                          trace.noise_db[i]);
    }
  }

  // Parameters the residuals do not respond to at the solution.
  const Eigen::VectorXd u = objective.to_internal(result.estimate);
  const auto rows = static_cast<Eigen::Index>(
      std::accumulate(problem.traces.begin(), problem.traces.end(), std::size_t{0},
                      [](std::size_t acc, const MeasuredTrace& t) { return acc + t.frequency_hz.size(); }));
  try {
    const Eigen::MatrixXd j = jacobian(objective, u, rows);
    for (Eigen::Index c = 0; c < j.cols(); ++c) {
      if (j.col(c).norm() <= 1e-9) result.insensitive.push_back(result.names[static_cast<std::size_t>(c)]);
    }
  } catch (const Error&) {
  }
  return result;
}

std::vector<ProfilePoint> profile_parameter(const FitProblem& problem, const ParamId& id,
                                            std::span<const double> grid) {
  problem.validate();
  const auto it = std::find_if(problem.free.begin(), problem.free.end(),
                               [&](const FreeParameter& p) { return p.id == id; });
  if (it == problem.free.end()) {
    throw DomainError(fmt::format("{} is not a free parameter", to_string(id)));
  }
  if (problem.free.size() < 2) {
    throw DomainError("profiling needs at least one other free parameter");
  }
  const FitResult joint = fit(problem);

  std::vector<ProfilePoint> out;
  out.reserve(grid.size());
  for (double value : grid) {
    FitProblem fixed = problem;
    fixed.free.clear();
    FitPoint base = joint.point;
    param_ref(base, id) = value;
    fixed.base = base.model;
    for (std::size_t t = 0; t < fixed.traces.size(); ++t) fixed.traces[t].zeta_rad = base.zeta[t];
    for (auto p : problem.free) {
      if (p.id == id) continue;
      p.initial = std::clamp(get_param(joint.point, p.id), p.lower, p.upper);
      fixed.free.push_back(p);
    }
    const FitResult r = fit(fixed);
    out.push_back({value, r.residual, r.converged});
  }
  return out;
}

}  // namespace qnoise
