#include "epinuts/stats.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <fmt/format.h>

#include "epinuts/error.hpp"

namespace epinuts::stats {

ShapeRate mean_cv_to_shape_rate(double mean, double cv) {
  if (!(mean > 0.0) || !(cv > 0.0)) {
    throw DomainError(fmt::format("gamma mean/cv must be positive (mean={}, cv={})", mean, cv));
  }
  const double shape = 1.0 / (cv * cv);
  return {shape, shape / mean};
}

ShapeRate GammaMeanCV::shape_rate() const { return mean_cv_to_shape_rate(mean, cv); }

LogDensity logpdf_gamma(double x, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("gamma shape/rate must be positive");
  if (!(x > 0.0)) return {kNegInf, true};
  return {gamma_lpdf(x, shape, rate)};
}

LogDensity logpdf_gamma_meancv(double x, const GammaMeanCV& p) {
  const auto [shape, rate] = p.shape_rate();
  return logpdf_gamma(x, shape, rate);
}

LogDensity logpdf_normal(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("normal", sigma);
  if (!std::isfinite(x)) return {kNegInf, true};
  return {normal_lpdf(x, mu, sigma)};
}

LogDensity logpdf_halfnormal(double x, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("half-normal", sigma);
  if (!(x >= 0.0) || !std::isfinite(x)) return {kNegInf, true};
  return {half_normal_lpdf(x, sigma)};
}

LogDensity logpdf_folded_normal(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("folded-normal", sigma);
  if (!(x >= 0.0) || !std::isfinite(x)) return {kNegInf, true};
  return {folded_normal_lpdf(x, mu, sigma)};
}

LogDensity logpdf_exponential_rate(double x, double rate) {
  if (!(rate > 0.0)) throw DomainError("exponential", rate);
  if (!(x >= 0.0) || !std::isfinite(x)) return {kNegInf, true};
  return {exponential_lpdf(x, rate)};
}

double logpmf_negbinomial(std::int64_t y, const NegBinMuPsi& d) {
  if (!(d.psi > 0.0)) throw DomainError("negative-binomial psi", d.psi);
  if (!(d.mu >= 0.0)) throw DomainError("negative-binomial mu", d.mu);
  if (y < 0) return kNegInf;
  if (d.mu == 0.0) return y == 0 ? 0.0 : kNegInf;
  return neg_binomial_lpmf(y, d.mu, d.psi);
}

NegBinPartials neg_binomial_lpmf_partials(std::int64_t y, double mu, double psi) {
  const double yd = static_cast<double>(y);
  const double d_mu = psi * (yd - mu) / (mu * (mu + psi));
  double rising = 0.0;
  if (y > 0) {
    if (neg_binomial_use_rising(y, psi)) {
      for (std::int64_t j = 0; j < y; ++j) rising += 1.0 / (psi + static_cast<double>(j));
    } else {
      rising = epinuts::digamma(psi + yd) - epinuts::digamma(psi);
    }
  }
  const double d_psi = rising - std::log1p(mu / psi) + (mu - yd) / (psi + mu);
  return {d_mu, d_psi};
}

double logpmf_poisson(std::int64_t y, double lambda) {
  if (y < 0) return kNegInf;
  if (lambda == 0.0) return y == 0 ? 0.0 : kNegInf;
  const double yd = static_cast<double>(y);
  return yd * std::log(lambda) - lambda - epinuts::lgamma(yd + 1.0);
}

double gamma_pdf(double x, const GammaMeanCV& p) {
  const auto [shape, rate] = p.shape_rate();
  if (!(x > 0.0)) return x == 0.0 && shape == 1.0 ? rate : 0.0;
  return std::exp(gamma_lpdf(x, shape, rate));
}

double gamma_cdf(double x, const GammaMeanCV& p) {
  const auto [shape, rate] = p.shape_rate();
  if (!(x > 0.0)) return 0.0;
  return boost::math::gamma_p(shape, rate * x);
}

// ---------------------------------------------------------------------------

double DelayPMF::total() const { return epinuts::sum(weights); }

double DelayPMF::mean() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += static_cast<double>(i + 1) * weights[i];
  return acc;
}

namespace {

constexpr double kCoverageWarning = 0.999;

void bin_bounds(int day, double& lo, double& hi) {
  lo = day == 1 ? 0.0 : day - 0.5;
  hi = day + 0.5;
}

void attach_coverage_warning(DelayPMF& pmf) {
  const double mass = pmf.total();
  if (mass < kCoverageWarning) {
    pmf.warnings.push_back(fmt::format(
        "horizon of {} days captures only {:.6f} of the delay mass", pmf.horizon(), mass));
  }
}

void check_horizon(int horizon) {
  if (horizon < 1) throw UsageError(fmt::format("delay horizon must be >= 1, got {}", horizon));
}

}  // namespace

DelayPMF discretize_delay(const std::function<double(double)>& density, int horizon) {
  check_horizon(horizon);
  using Integrator = boost::math::quadrature::gauss_kronrod<double, 31>;
  DelayPMF pmf;
  pmf.weights.resize(static_cast<std::size_t>(horizon));
  for (int day = 1; day <= horizon; ++day) {
    double lo = 0.0, hi = 0.0;
    bin_bounds(day, lo, hi);
    double error = 0.0;
    const double mass = Integrator::integrate(density, lo, hi, 20, 1e-13, &error);
    pmf.weights[static_cast<std::size_t>(day - 1)] = std::max(mass, 0.0);
  }
  attach_coverage_warning(pmf);
  return pmf;
}

DelayPMF discretize_cdf(const std::function<double(double)>& cdf, int horizon) {
  check_horizon(horizon);
  DelayPMF pmf;
  pmf.weights.resize(static_cast<std::size_t>(horizon));
  double previous = cdf(0.0);
  for (int day = 1; day <= horizon; ++day) {
    const double next = cdf(day + 0.5);
    pmf.weights[static_cast<std::size_t>(day - 1)] = std::max(next - previous, 0.0);
    previous = next;
  }
  attach_coverage_warning(pmf);
  return pmf;
}

DelayPMF generation_pmf(int horizon) {
  const GammaMeanCV g = kGenerationInterval;
  return discretize_delay([g](double x) { return gamma_pdf(x, g); }, horizon);
}

DelayPMF infection_to_death_pmf(int horizon, double grid_step) {
  check_horizon(horizon);
  if (!(grid_step > 0.0)) throw UsageError("grid step must be positive");
  // Bin edges (0, 1.5, 2.5, ...) must land on grid points.
  const auto cells_per_half_day = std::llround(0.5 / grid_step);
  if (cells_per_half_day < 1 ||
      std::abs(static_cast<double>(cells_per_half_day) * grid_step - 0.5) > 1e-12) {
    throw UsageError(fmt::format("grid step {} does not divide half a day", grid_step));
  }
  const auto cells = static_cast<std::size_t>(cells_per_half_day * (2 * horizon + 1));

  // Exact mass of the first Gamma per grid cell, and the second Gamma's
  // distribution function at cell midpoints. Their convolution gives the
  // distribution function of the sum at every grid point.
  std::vector<double> first_mass(cells);
  std::vector<double> second_cdf_mid(cells);
  double previous = 0.0;
  for (std::size_t j = 0; j < cells; ++j) {
    const double next = gamma_cdf(static_cast<double>(j + 1) * grid_step, kInfectionToOnset);
    first_mass[j] = next - previous;
    previous = next;
    second_cdf_mid[j] = gamma_cdf((static_cast<double>(j) + 0.5) * grid_step, kOnsetToDeath);
  }
  auto sum_cdf_at_cell = [&](std::size_t m) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += first_mass[j] * second_cdf_mid[m - 1 - j];
    return acc;
  };

  DelayPMF pmf;
  pmf.weights.resize(static_cast<std::size_t>(horizon));
  double lower = 0.0;
  for (int day = 1; day <= horizon; ++day) {
    const auto edge = static_cast<std::size_t>(cells_per_half_day * (2 * day + 1));
    const double upper = sum_cdf_at_cell(edge);
    pmf.weights[static_cast<std::size_t>(day - 1)] = std::max(upper - lower, 0.0);
    lower = upper;
  }
  attach_coverage_warning(pmf);
  return pmf;
}

// ---------------------------------------------------------------------------

double sample_normal(Rng& rng, double mu, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("normal sigma", sigma);
  return std::normal_distribution<double>(mu, sigma)(rng);
}

double sample_halfnormal(Rng& rng, double sigma) {
  return std::abs(sample_normal(rng, 0.0, sigma));
}

double sample_gamma(Rng& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("gamma shape/rate must be positive");
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

double sample_gamma_meancv(Rng& rng, const GammaMeanCV& p) {
  const auto [shape, rate] = p.shape_rate();
  return sample_gamma(rng, shape, rate);
}

double sample_exponential_rate(Rng& rng, double rate) {
  if (!(rate > 0.0)) throw DomainError("exponential rate", rate);
  return std::exponential_distribution<double>(rate)(rng);
}

double sample_intervention_effect(Rng& rng) {
  return sample_gamma(rng, kInterventionShape, 1.0) - kInterventionShift;
}

std::int64_t sample_negbinomial(Rng& rng, const NegBinMuPsi& d) {
  if (!(d.psi > 0.0)) throw DomainError("negative-binomial psi", d.psi);
  if (!(d.mu >= 0.0)) throw DomainError("negative-binomial mu", d.mu);
  if (d.mu == 0.0) return 0;
  const double lambda = sample_gamma(rng, d.psi, d.psi / d.mu);
  if (lambda <= 0.0) return 0;
  return std::poisson_distribution<std::int64_t>(lambda)(rng);
}

double sample_uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace epinuts::stats
