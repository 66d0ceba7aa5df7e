#pragma once

// Joint hierarchical log-posterior over all countries.

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "epinuts/epimodel.hpp"
#include "epinuts/stats.hpp"
#include "epinuts/tape.hpp"

namespace epinuts::model {

inline constexpr double kR0Location = 3.28;
inline constexpr double kKappaScale = 0.5;
inline constexpr double kGammaScale = 0.2;
inline constexpr double kPsiScale = 5.0;
inline constexpr double kIfrNoiseSd = 0.1;
inline constexpr double kTauRate = 0.03;

struct CountryData {
  std::string name;
  // Observed deaths on the model axis; zero-padded before the data begins.
  std::vector<std::int64_t> deaths;
  epi::InterventionSchedule schedule;
  double population = 0.0;
  double ifr_mean = 0.0;
  // 1-based model day of the first likelihood term.
  int likelihood_start = epi::kSeedingLeadDays + 1;
  // Calendar date of model day 1.
  std::chrono::sys_days day_zero{};
  // Start dates keyed by intervention number, as given in the input.
  std::map<int, std::chrono::sys_days> intervention_dates;

  int n_days() const { return static_cast<int>(deaths.size()); }
};

struct ModelInputs {
  std::vector<CountryData> countries;
  stats::DelayPMF pi;
  stats::DelayPMF g;
};

struct ModelOptions {
  // R0[m] = |3.28 + kappa z[m]| with z ~ N(0, 1).
  bool r0_noncentered = false;
  // beta[m] = gamma z[m] with z ~ N(0, 1).
  bool beta_noncentered = true;
};

// Constrained parameters.
struct ParameterBlock {
  std::vector<double> r0;
  double kappa = 0.5;
  std::array<double, epi::kInterventionCount> alpha{};
  std::vector<double> beta;
  double gamma = 0.1;
  double psi = 5.0;
  std::vector<double> ifr_noise;
  std::vector<double> seed;
  double tau = 30.0;
};

struct Unpacked {
  ParameterBlock params;
  double log_jacobian;
};

struct GeneratedQuantities {
  std::vector<double> rt;
  std::vector<double> expected_deaths;
  std::vector<double> infections;
  double attack_rate = 0.0;
  bool clamped = false;
};

// Value and gradient of the log density at an unconstrained point.
// Returns -inf (gradient unspecified) when the point is invalid.
using GradientFn = std::function<double(std::span<const double>, std::span<double>)>;

class Posterior {
 public:
  explicit Posterior(std::shared_ptr<const ModelInputs> inputs, ModelOptions options = {});

  std::size_t dim() const { return 6 + 4 * countries() + 4; }
  std::size_t countries() const { return inputs_->countries.size(); }
  const ModelInputs& inputs() const { return *inputs_; }
  const ModelOptions& options() const { return options_; }

  // Names of the constrained parameters, in flatten() order.
  std::vector<std::string> parameter_names() const;
  std::vector<double> flatten(const ParameterBlock& p) const;

  std::vector<double> pack(const ParameterBlock& p) const;
  Unpacked unpack(std::span<const double> theta) const;

  double log_prior(const ParameterBlock& p) const;
  // Also reports whether any country's infections hit the population.
  double log_likelihood(const ParameterBlock& p, bool* clamped = nullptr) const;

  // log_prior + log_likelihood + log_jacobian at an unconstrained point.
  double log_density(std::span<const double> theta) const;
  // log_prior + log_jacobian at an unconstrained point.
  double log_prior_density(std::span<const double> theta) const;
  double log_density_gradient(std::span<const double> theta, std::span<double> grad,
                              ad::Tape& tape) const;
  // A gradient function owning its own tape; create one per chain.
  GradientFn make_gradient_fn() const;

  // Box for random chain starts: every coordinate at 0 +- scale, except the
  // identity-transformed IFR noise factors, which sit at 1 +- 2 prior sd.
  struct InitBox {
    std::vector<double> center;
    std::vector<double> radius;
  };
  InitBox init_box(double scale = 2.0) const;

  std::vector<GeneratedQuantities> generated_quantities(const ParameterBlock& p) const;

 private:
  template <class T>
  struct Terms;
  template <class T>
  T evaluate(std::span<const T> theta, bool with_likelihood, Terms<T>* terms) const;

  std::shared_ptr<const ModelInputs> inputs_;
  ModelOptions options_;
};

// Death counts drawn from the observation model at p, one series per country
// on the model axis (day 1 is always 0 expected deaths).
std::vector<std::vector<std::int64_t>> sample_deaths(const Posterior& posterior,
                                                     const ParameterBlock& p, stats::Rng& rng);

}  // namespace epinuts::model
