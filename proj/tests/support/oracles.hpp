#pragma once

// Independent reference computations used by the test suites. Nothing here
// calls into the code paths under test.

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace epinuts::test {

// log P(Y = y) for Y | lambda ~ Poisson(lambda), lambda ~ Gamma(psi, rate psi/mu),
// by numerical integration over lambda.
inline double gamma_poisson_log_pmf(std::int64_t y, double mu, double psi) {
  const double yd = static_cast<double>(y);
  const double rate = psi / mu;
  auto log_integrand = [&](double lambda) {
    return (yd + psi - 1.0) * std::log(lambda) - (1.0 + rate) * lambda -
           std::lgamma(yd + 1.0) + psi * std::log(rate) - std::lgamma(psi);
  };
  // Peak of the integrand, used to scale it to O(1).
  const double mode = std::max((yd + psi - 1.0) / (1.0 + rate), 0.0);
  const double anchor = mode > 0.0 ? mode : 1.0;
  const double log_peak = log_integrand(anchor);
  auto scaled = [&](double lambda) {
    if (lambda <= 0.0) return 0.0;
    return std::exp(log_integrand(lambda) - log_peak);
  };
  boost::math::quadrature::tanh_sinh<double> finite;
  boost::math::quadrature::exp_sinh<double> infinite;
  const double lower = finite.integrate(scaled, 0.0, anchor, 1e-15);
  const double upper = infinite.integrate(scaled, anchor, std::numeric_limits<double>::infinity(), 1e-15);
  return log_peak + std::log(lower + upper);
}

// Kolmogorov-Smirnov distance between a sample and Uniform[lo, hi].
inline double ks_uniform(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = std::clamp((xs[i] - lo) / (hi - lo), 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Ridders' extrapolated central difference of f at x along coordinate i.
inline double ridders_derivative(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t i, double h0,
                                 double* error_out = nullptr) {
  constexpr int kTableSize = 10;
  constexpr double kShrink = 1.4;
  constexpr double kShrink2 = kShrink * kShrink;
  double table[kTableSize][kTableSize];
  const double x0 = x[i];
  auto central = [&](double h) {
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    x[i] = x0;
    return (up - down) / (2.0 * h);
  };
  double h = h0;
  double best = central(h);
  table[0][0] = best;
  double err = std::numeric_limits<double>::max();
  for (int r = 1; r < kTableSize; ++r) {
    h /= kShrink;
    table[0][r] = central(h);
    double factor = kShrink2;
    for (int c = 1; c <= r; ++c) {
      table[c][r] = (table[c - 1][r] * factor - table[c - 1][r - 1]) / (factor - 1.0);
      factor *= kShrink2;
      const double e = std::max(std::abs(table[c][r] - table[c - 1][r]),
                                std::abs(table[c][r] - table[c - 1][r - 1]));
      if (e <= err) {
        err = e;
        best = table[c][r];
      }
    }
    if (std::abs(table[r][r] - table[r - 1][r - 1]) >= 2.0 * err) break;
  }
  if (error_out != nullptr) *error_out = err;
  return best;
}

// Growth rate r solving 1 = R * sum_s g_s exp(-r s) (discrete Euler-Lotka).
inline double euler_lotka_rate(double reproduction, const std::vector<double>& g) {
  auto equation = [&](double r) {
    double acc = 0.0;
    for (std::size_t s = 0; s < g.size(); ++s) {
      acc += g[s] * std::exp(-r * static_cast<double>(s + 1));
    }
    return reproduction * acc - 1.0;
  };
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iterations = 200;
  const auto [a, b] = boost::math::tools::bisect(equation, -0.5, 1.5, tol, iterations);
  return 0.5 * (a + b);
}

}  // namespace epinuts::test
