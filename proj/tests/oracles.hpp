#pragma once

// Independent reference computations used only by the tests. None of these
// call into the library's evaluation paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

namespace qnoise::oracle {

struct Coefficients {
  long double c, d, k1, k2;
};

// Unscaled extended-precision evaluation of the cavity polynomials.
inline Coefficients cavity(long double g, long double d1, long double d2, long double w) {
  const long double g2 = g * g, w2 = w * w;
  const long double c = (d1 * d1 - w2) * (d2 * d2 - w2) + g2 * (g2 + d1 * d1 + d2 * d2 + 2 * w2);
  long double d = 1;
  for (long double di : {d1, d2}) {
    d *= (g2 + (di - w) * (di - w)) * (g2 + (di + w) * (di + w));
  }
  const long double s = d1 + d2;
  return {c, d, c / d * (c - 2 * g2 * s * s), c / d * (2 * g * s * (g2 - d1 * d2 + w2))};
}

// Spectral density evaluated from the extended-precision coefficients.
inline long double spectral_density(long double g, long double d1, long double d2, long double w,
                                    long double r, long double eta, long double alpha,
                                    long double beta, long double zeta) {
  const auto k = cavity(g, d1, d2, w);
  return 1 - eta + eta * std::cosh(2 * r) +
         2 * eta * std::sqrt(alpha * beta) * std::sinh(2 * r) / (alpha + beta) *
             (k.k1 * std::cos(2 * zeta) + k.k2 * std::sin(2 * zeta));
}

// Dense sweep followed by golden-section refinement on the best bracket.
inline double minimize_1d(const std::function<double(double)>& f, double lo, double hi,
                          int samples = 4096) {
  double best_x = lo;
  double best = f(lo);
  const double h = (hi - lo) / samples;
  for (int i = 1; i <= samples; ++i) {
    const double x = lo + h * i;
    const double v = f(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  double a = best_x - h, b = best_x + h;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    if (f(x1) < f(x2)) {
      b = x2;
    } else {
      a = x1;
    }
  }
  return std::min(best, f(0.5 * (a + b)));
}

struct SampleEstimate {
  double variance;
  double standard_error;
};

// Sample variance of x_s + g x_i for a bivariate Gaussian with the given
// second moments, drawn through its Cholesky factor.
inline SampleEstimate sampled_combination_variance(double var_s, double var_i, double cov,
                                                   double gain, std::size_t draws,
                                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double l11 = std::sqrt(var_s);
  const double l21 = cov / l11;
  const double l22 = std::sqrt(std::max(var_i - l21 * l21, 0.0));
  long double sum = 0, sum2 = 0;
  for (std::size_t n = 0; n < draws; ++n) {
    const double z1 = normal(rng), z2 = normal(rng);
    const double xs = l11 * z1;
    const double xi = l21 * z1 + l22 * z2;
    const double y = xs + gain * xi;
    sum += y;
    sum2 += static_cast<long double>(y) * y;
  }
  const double mean = static_cast<double>(sum / draws);
  const double var = static_cast<double>((sum2 - draws * static_cast<long double>(mean) * mean) / (draws - 1));
  return {var, var * std::sqrt(2.0 / static_cast<double>(draws - 1))};
}

}  // namespace qnoise::oracle
