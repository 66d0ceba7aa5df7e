#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "epinuts/special.hpp"
#include "epinuts/tape.hpp"

namespace epinuts::stats {

// Every sampler in the project draws from this engine, seeded explicitly.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t base_seed, std::uint64_t stream = 0) {
  return Rng(base_seed + stream);
}

struct ShapeRate {
  double shape;
  double rate;
};

// Gamma distribution stated by mean and coefficient of variation.
struct GammaMeanCV {
  double mean;
  double cv;

  ShapeRate shape_rate() const;
};

ShapeRate mean_cv_to_shape_rate(double mean, double cv);

// Negative binomial stated by mean and overdispersion: var = mu + mu^2/psi.
struct NegBinMuPsi {
  double mu;
  double psi;

  double variance() const { return mu + mu * mu / psi; }
};

// Result of a checked density evaluation. `domain_exit` separates an
// argument outside the support from a density that merely underflowed.
struct LogDensity {
  double value;
  bool domain_exit = false;

  operator double() const { return value; }
};

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Unchecked kernels, generic over double and ad::Var. Callers guarantee the
// arguments lie in the interior of the support.

template <class T, class M, class S>
T normal_lpdf(const T& x, const M& mu, const S& sigma) {
  using std::log;
  const auto z = (x - mu) / sigma;
  return -0.5 * square(z) - log(sigma) - kLogSqrtTwoPi;
}

template <class T, class S>
T half_normal_lpdf(const T& x, const S& sigma) {
  using std::log;
  return -0.5 * square(x / sigma) - log(sigma) - kLogSqrtTwoPi + std::numbers::ln2;
}

// Law of |Y| with Y ~ N(mu, sigma).
template <class T, class S>
T folded_normal_lpdf(const T& x, double mu, const S& sigma) {
  using std::exp;
  using std::log;
  using std::log1p;
  const auto a = -0.5 * square((x - mu) / sigma);
  const auto b = -0.5 * square((x + mu) / sigma);
  const bool a_larger = value_of(a) >= value_of(b);
  const auto hi = a_larger ? a : b;
  const auto lo = a_larger ? b : a;
  return hi + log1p(exp(lo - hi)) - log(sigma) - kLogSqrtTwoPi;
}

template <class T>
T exponential_lpdf(const T& x, double rate) {
  return std::log(rate) - rate * x;
}

// Exponential with a rate that is itself a model quantity: rate = 1/scale.
template <class T, class S>
T exponential_scale_lpdf(const T& x, const S& scale) {
  using std::log;
  return -log(scale) - x / scale;
}

// Gamma(shape, rate) log density, given both x and log(x); the caller often
// has log(x) exactly (log-transformed parameters).
template <class T>
T gamma_lpdf_with_log(const T& x, const T& log_x, double shape, double rate) {
  return (shape - 1.0) * log_x - rate * x +
         (shape * std::log(rate) - epinuts::lgamma(shape));
}

template <class T>
T gamma_lpdf(const T& x, double shape, double rate) {
  using std::log;
  return gamma_lpdf_with_log(x, T(log(x)), shape, rate);
}

// Negative binomial log pmf, mean/overdispersion parameterization.
// Requires mu > 0 and psi > 0.
inline bool neg_binomial_use_rising(std::int64_t y, double psi) {
  // The lgamma difference cancels badly when psi is large.
  return y < 16 || (psi > 1e4 && y <= 1000);
}

template <class T>
T neg_binomial_lpmf(std::int64_t y, const T& mu, const T& psi) {
  using std::log;
  using std::log1p;
  // psi * log(psi / (psi + mu))
  T lp = -(psi * log1p(mu / psi));
  if (y == 0) return lp;
  const double yd = static_cast<double>(y);
  lp += yd * (log(mu) - log(psi + mu));
  // log Gamma(y + psi) - log Gamma(psi) - log y!
  if (neg_binomial_use_rising(y, value_of(psi))) {
    if (y < 16 && value_of(psi) < 1e15) {
      // The product of fewer than 16 factors below 1e16 cannot overflow.
      T product = psi;
      for (std::int64_t j = 1; j < y; ++j) product *= psi + static_cast<double>(j);
      lp += log(product);
    } else {
      T rising = log(psi);
      for (std::int64_t j = 1; j < y; ++j) rising += log(psi + static_cast<double>(j));
      lp += rising;
    }
  } else {
    lp += lgamma(psi + yd) - lgamma(psi);
  }
  return lp - epinuts::lgamma(yd + 1.0);
}

// d/dmu and d/dpsi of neg_binomial_lpmf.
struct NegBinPartials {
  double mu;
  double psi;
};
NegBinPartials neg_binomial_lpmf_partials(std::int64_t y, double mu, double psi);

// Recorded as a single tape node with analytic partials.
template <>
inline ad::Var neg_binomial_lpmf<ad::Var>(std::int64_t y, const ad::Var& mu, const ad::Var& psi) {
  const double value = neg_binomial_lpmf<double>(y, mu.value, psi.value);
  const NegBinPartials d = neg_binomial_lpmf_partials(y, mu.value, psi.value);
  const std::array<ad::Var, 2> xs{mu, psi};
  const std::array<double, 2> partials{d.mu, d.psi};
  return mu.tape->record_precomputed(value, xs, partials);
}

// ---------------------------------------------------------------------------
// Checked double-valued front ends.

LogDensity logpdf_gamma_meancv(double x, const GammaMeanCV& p);
LogDensity logpdf_gamma(double x, double shape, double rate);
LogDensity logpdf_normal(double x, double mu, double sigma);
LogDensity logpdf_halfnormal(double x, double sigma);
LogDensity logpdf_folded_normal(double x, double mu, double sigma);
LogDensity logpdf_exponential_rate(double x, double rate);
double logpmf_negbinomial(std::int64_t y, const NegBinMuPsi& d);
double logpmf_poisson(std::int64_t y, double lambda);

// Density and distribution function of a mean/CV Gamma.
double gamma_pdf(double x, const GammaMeanCV& p);
double gamma_cdf(double x, const GammaMeanCV& p);

// ---------------------------------------------------------------------------
// Delay distributions.

// Daily probability mass over delays; weights[0] is day 1.
struct DelayPMF {
  std::vector<double> weights;
  std::vector<std::string> warnings;

  int horizon() const { return static_cast<int>(weights.size()); }
  // 1-based day access.
  double at(int day) const { return weights.at(static_cast<std::size_t>(day - 1)); }
  double total() const;
  double mean() const;
};

inline constexpr int kDefaultDeathHorizon = 150;
inline constexpr int kDefaultGenerationHorizon = 100;
inline const GammaMeanCV kInfectionToOnset{5.1, 0.86};
inline const GammaMeanCV kOnsetToDeath{17.8, 0.45};
inline const GammaMeanCV kGenerationInterval{6.5, 0.62};

// Bins a continuous delay density by adaptive quadrature: day 1 takes
// [0, 1.5], day s >= 2 takes [s - 0.5, s + 0.5].
DelayPMF discretize_delay(const std::function<double(double)>& density, int horizon);

// Same binning, from a distribution function.
DelayPMF discretize_cdf(const std::function<double(double)>& cdf, int horizon);

DelayPMF generation_pmf(int horizon = kDefaultGenerationHorizon);

// Infection-to-death: sum of infection-to-onset and onset-to-death Gammas,
// convolved on a grid of `grid_step` days and then binned.
DelayPMF infection_to_death_pmf(int horizon = kDefaultDeathHorizon, double grid_step = 0.01);

// ---------------------------------------------------------------------------
// Random draws.

inline constexpr double kInterventionShape = 1.0 / 6.0;
// log(1.05) / 6: the shift that lets an intervention increase transmission.
inline const double kInterventionShift = std::log(1.05) / 6.0;

double sample_normal(Rng& rng, double mu, double sigma);
double sample_halfnormal(Rng& rng, double sigma);
double sample_gamma(Rng& rng, double shape, double rate);
double sample_gamma_meancv(Rng& rng, const GammaMeanCV& p);
double sample_exponential_rate(Rng& rng, double rate);
// Gamma(1/6, 1) - log(1.05)/6.
double sample_intervention_effect(Rng& rng);
std::int64_t sample_negbinomial(Rng& rng, const NegBinMuPsi& d);
double sample_uniform(Rng& rng, double lo, double hi);

}  // namespace epinuts::stats
