#include "epinuts/posterior.hpp"

#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "epinuts/error.hpp"
#include "epinuts/special.hpp"

namespace epinuts::model {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Offsets of each block in the unconstrained vector.
struct Layout {
  std::size_t m;
  std::size_t r0() const { return 0; }
  std::size_t kappa() const { return m; }
  std::size_t alpha() const { return m + 1; }
  std::size_t beta() const { return m + 1 + epi::kInterventionCount; }
  std::size_t gamma() const { return 2 * m + 1 + epi::kInterventionCount; }
  std::size_t psi() const { return gamma() + 1; }
  std::size_t ifr_noise() const { return psi() + 1; }
  std::size_t seed() const { return ifr_noise() + m; }
  std::size_t tau() const { return seed() + m; }
  std::size_t size() const { return tau() + 1; }
};

template <class T>
struct Block {
  std::vector<T> r0;
  T kappa;
  std::array<T, epi::kInterventionCount> alpha;
  // alpha + log(1.05)/6 and its log, exact from the transform.
  std::array<T, epi::kInterventionCount> alpha_shifted;
  std::array<T, epi::kInterventionCount> log_alpha_shifted;
  std::vector<T> beta;
  T gamma;
  T psi;
  std::vector<T> ifr_noise;
  std::vector<T> seed;
  T tau;
};

template <class T>
T abs_value(const T& x) {
  return select(value_of(x) >= 0.0, x, -x);
}

template <class T>
T prior_terms(const Block<T>& b, bool include_r0, bool include_beta) {
  using namespace stats;
  T lp = half_normal_lpdf(b.kappa, kKappaScale);
  if (include_r0) {
    for (const T& r : b.r0) lp += folded_normal_lpdf(r, kR0Location, b.kappa);
  }
  for (std::size_t k = 0; k < b.alpha.size(); ++k) {
    lp += gamma_lpdf_with_log(b.alpha_shifted[k], b.log_alpha_shifted[k], kInterventionShape, 1.0);
  }
  lp += half_normal_lpdf(b.gamma, kGammaScale);
  if (include_beta) {
    for (const T& beta : b.beta) lp += normal_lpdf(beta, 0.0, b.gamma);
  }
  lp += half_normal_lpdf(b.psi, kPsiScale);
  for (const T& noise : b.ifr_noise) lp += normal_lpdf(noise, 1.0, kIfrNoiseSd);
  for (const T& s : b.seed) lp += exponential_scale_lpdf(s, b.tau);
  lp += exponential_lpdf(b.tau, kTauRate);
  return lp;
}

template <class T>
struct CountryForward {
  std::vector<T> rt;
  epi::Trajectory<T> trajectory;
  std::vector<T> deaths;
};

template <class T>
CountryForward<T> forward_country(const Block<T>& b, const ModelInputs& in, std::size_t m) {
  const CountryData& c = in.countries[m];
  CountryForward<T> out;
  out.rt = epi::compute_rt<T>(b.r0[m], b.alpha, b.beta[m], c.schedule);
  if (!(value_of(b.seed[m]) * epi::kSeedDays <= c.population)) {
    throw DomainError("seed infections per day", value_of(b.seed[m]));
  }
  const std::vector<T> seeds(epi::kSeedDays, b.seed[m]);
  out.trajectory = epi::simulate_infections<T>(seeds, out.rt, in.g, c.population);
  const T ifr_star = b.ifr_noise[m] * c.ifr_mean;
  if (!(value_of(ifr_star) > 0.0)) throw DomainError("infection fatality ratio", value_of(ifr_star));
  out.deaths = epi::expected_deaths<T>(out.trajectory.infections, ifr_star, in.pi);
  return out;
}

template <class T>
T likelihood_terms(const Block<T>& b, const ModelInputs& in, bool* clamped) {
  T ll = b.psi * 0.0;
  for (std::size_t m = 0; m < in.countries.size(); ++m) {
    const CountryData& c = in.countries[m];
    const auto fwd = forward_country(b, in, m);
    if (clamped != nullptr && fwd.trajectory.clamped) *clamped = true;
    for (int day = c.likelihood_start; day <= c.n_days(); ++day) {
      const auto t = static_cast<std::size_t>(day - 1);
      const std::int64_t observed = c.deaths[t];
      const T& mu = fwd.deaths[t];
      if (!(value_of(mu) > 0.0)) {
        if (observed == 0) continue;
        throw DomainError("expected deaths", value_of(mu));
      }
      ll += stats::neg_binomial_lpmf(observed, mu, b.psi);
    }
  }
  return ll;
}

Block<double> block_from(const ParameterBlock& p) {
  Block<double> b;
  b.r0 = p.r0;
  b.kappa = p.kappa;
  b.alpha = p.alpha;
  for (std::size_t k = 0; k < p.alpha.size(); ++k) {
    b.alpha_shifted[k] = p.alpha[k] + stats::kInterventionShift;
    b.log_alpha_shifted[k] = std::log(b.alpha_shifted[k]);
  }
  b.beta = p.beta;
  b.gamma = p.gamma;
  b.psi = p.psi;
  b.ifr_noise = p.ifr_noise;
  b.seed = p.seed;
  b.tau = p.tau;
  return b;
}

void check_sizes(const ParameterBlock& p, std::size_t m) {
  if (p.r0.size() != m || p.beta.size() != m || p.ifr_noise.size() != m || p.seed.size() != m) {
    throw UsageError(fmt::format("parameter block does not match {} countries", m));
  }
}

bool in_support(const ParameterBlock& p) {
  auto all_positive = [](const std::vector<double>& v) {
    for (double x : v)
      if (!(x > 0.0)) return false;
    return true;
  };
  for (double a : p.alpha)
    if (!(a + stats::kInterventionShift > 0.0)) return false;
  return all_positive(p.r0) && all_positive(p.seed) && p.kappa > 0.0 && p.gamma > 0.0 &&
         p.psi > 0.0 && p.tau > 0.0;
}

}  // namespace

template <class T>
struct Posterior::Terms {
  T prior;
  T likelihood;
  T jacobian;
  bool clamped = false;
};

Posterior::Posterior(std::shared_ptr<const ModelInputs> inputs, ModelOptions options)
    : inputs_(std::move(inputs)), options_(options) {
  if (!inputs_ || inputs_->countries.empty()) throw InputError("model needs at least one country");
  for (const auto& c : inputs_->countries) {
    if (c.schedule.n_days() != c.n_days()) {
      throw InputError(fmt::format("country '{}': schedule and deaths lengths differ", c.name));
    }
    if (c.likelihood_start < 1 || c.likelihood_start > c.n_days()) {
      throw InputError(fmt::format("country '{}': likelihood start outside the model axis", c.name));
    }
  }
}

Posterior::InitBox Posterior::init_box(double scale) const {
  const Layout l{countries()};
  InitBox box{std::vector<double>(l.size(), 0.0), std::vector<double>(l.size(), scale)};
  for (std::size_t m = 0; m < l.m; ++m) {
    box.center[l.ifr_noise() + m] = 1.0;
    box.radius[l.ifr_noise() + m] = std::min(scale, 2.0 * kIfrNoiseSd);
  }
  return box;
}

std::vector<std::string> Posterior::parameter_names() const {
  std::vector<std::string> names;
  names.reserve(dim());
  for (const auto& c : inputs_->countries) names.push_back(fmt::format("R0[{}]", c.name));
  names.emplace_back("kappa");
  for (int k = 1; k <= epi::kInterventionCount; ++k) names.push_back(fmt::format("alpha[{}]", k));
  for (const auto& c : inputs_->countries) names.push_back(fmt::format("beta[{}]", c.name));
  names.emplace_back("gamma");
  names.emplace_back("psi");
  for (const auto& c : inputs_->countries) names.push_back(fmt::format("ifr_noise[{}]", c.name));
  for (const auto& c : inputs_->countries) names.push_back(fmt::format("seed[{}]", c.name));
  names.emplace_back("tau");
  return names;
}

std::vector<double> Posterior::flatten(const ParameterBlock& p) const {
  check_sizes(p, countries());
  std::vector<double> out;
  out.reserve(dim());
  out.insert(out.end(), p.r0.begin(), p.r0.end());
  out.push_back(p.kappa);
  out.insert(out.end(), p.alpha.begin(), p.alpha.end());
  out.insert(out.end(), p.beta.begin(), p.beta.end());
  out.push_back(p.gamma);
  out.push_back(p.psi);
  out.insert(out.end(), p.ifr_noise.begin(), p.ifr_noise.end());
  out.insert(out.end(), p.seed.begin(), p.seed.end());
  out.push_back(p.tau);
  return out;
}

std::vector<double> Posterior::pack(const ParameterBlock& p) const {
  check_sizes(p, countries());
  if (!in_support(p)) throw DomainError("parameter block outside its support");
  const Layout l{countries()};
  std::vector<double> theta(l.size());
  for (std::size_t m = 0; m < l.m; ++m) {
    theta[l.r0() + m] = options_.r0_noncentered ? (p.r0[m] - kR0Location) / p.kappa : std::log(p.r0[m]);
    theta[l.beta() + m] = options_.beta_noncentered ? p.beta[m] / p.gamma : p.beta[m];
    theta[l.ifr_noise() + m] = p.ifr_noise[m];
    theta[l.seed() + m] = std::log(p.seed[m]);
  }
  theta[l.kappa()] = std::log(p.kappa);
  for (std::size_t k = 0; k < p.alpha.size(); ++k) {
    theta[l.alpha() + k] = std::log(p.alpha[k] + stats::kInterventionShift);
  }
  theta[l.gamma()] = std::log(p.gamma);
  theta[l.psi()] = std::log(p.psi);
  theta[l.tau()] = std::log(p.tau);
  return theta;
}

template <class T>
T Posterior::evaluate(std::span<const T> theta, bool with_likelihood, Terms<T>* terms) const {
  using std::exp;
  const Layout l{countries()};
  if (theta.size() != l.size()) {
    throw UsageError(fmt::format("expected {} unconstrained values, got {}", l.size(), theta.size()));
  }
  for (const T& x : theta) {
    if (!std::isfinite(value_of(x))) throw DomainError("unconstrained coordinate", value_of(x));
  }
  Block<T> b;
  // Log-Jacobian of the inverse transform: d exp(u)/du = exp(u) for every
  // log-transformed coordinate.
  T jac = theta[l.kappa()];
  b.kappa = exp(theta[l.kappa()]);
  for (std::size_t k = 0; k < b.alpha.size(); ++k) {
    const T& u = theta[l.alpha() + k];
    b.log_alpha_shifted[k] = u;
    b.alpha_shifted[k] = exp(u);
    b.alpha[k] = b.alpha_shifted[k] - stats::kInterventionShift;
    jac += u;
  }
  b.gamma = exp(theta[l.gamma()]);
  jac += theta[l.gamma()];
  b.psi = exp(theta[l.psi()]);
  jac += theta[l.psi()];
  b.tau = exp(theta[l.tau()]);
  jac += theta[l.tau()];

  T prior = b.kappa * 0.0;
  for (std::size_t m = 0; m < l.m; ++m) {
    const T& u_r0 = theta[l.r0() + m];
    if (options_.r0_noncentered) {
      b.r0.push_back(abs_value(kR0Location + b.kappa * u_r0));
      // The pushforward of N(0,1) is the folded normal; book the prior on R0
      // and let the Jacobian term carry the remainder.
      const T folded = stats::folded_normal_lpdf(b.r0.back(), kR0Location, b.kappa);
      prior += folded;
      jac += stats::normal_lpdf(u_r0, 0.0, 1.0) - folded;
    } else {
      b.r0.push_back(exp(u_r0));
      jac += u_r0;
    }
    const T& u_beta = theta[l.beta() + m];
    if (options_.beta_noncentered) {
      b.beta.push_back(b.gamma * u_beta);
      jac += theta[l.gamma()];
    } else {
      b.beta.push_back(u_beta);
    }
    b.ifr_noise.push_back(theta[l.ifr_noise() + m]);
    b.seed.push_back(exp(theta[l.seed() + m]));
    jac += theta[l.seed() + m];
  }

  prior += prior_terms(b, !options_.r0_noncentered, true);
  bool clamped = false;
  const T lik = with_likelihood ? likelihood_terms(b, *inputs_, &clamped) : prior * 0.0;
  if (terms != nullptr) *terms = {prior, lik, jac, clamped};
  return prior + lik + jac;
}

Unpacked Posterior::unpack(std::span<const double> theta) const {
  for (double x : theta) {
    if (!std::isfinite(x)) throw DomainError("unconstrained coordinate", x);
  }
  const Layout l{countries()};
  if (theta.size() != l.size()) {
    throw UsageError(fmt::format("expected {} unconstrained values, got {}", l.size(), theta.size()));
  }
  ParameterBlock p;
  double jac = 0.0;
  p.kappa = std::exp(theta[l.kappa()]);
  jac += theta[l.kappa()];
  for (std::size_t k = 0; k < p.alpha.size(); ++k) {
    p.alpha[k] = std::exp(theta[l.alpha() + k]) - stats::kInterventionShift;
    jac += theta[l.alpha() + k];
  }
  p.gamma = std::exp(theta[l.gamma()]);
  p.psi = std::exp(theta[l.psi()]);
  p.tau = std::exp(theta[l.tau()]);
  jac += theta[l.gamma()] + theta[l.psi()] + theta[l.tau()];
  for (std::size_t m = 0; m < l.m; ++m) {
    const double u_r0 = theta[l.r0() + m];
    if (options_.r0_noncentered) {
      p.r0.push_back(std::abs(kR0Location + p.kappa * u_r0));
      jac += stats::normal_lpdf(u_r0, 0.0, 1.0) -
             stats::folded_normal_lpdf(p.r0.back(), kR0Location, p.kappa);
    } else {
      p.r0.push_back(std::exp(u_r0));
      jac += u_r0;
    }
    const double u_beta = theta[l.beta() + m];
    if (options_.beta_noncentered) {
      p.beta.push_back(p.gamma * u_beta);
      jac += theta[l.gamma()];
    } else {
      p.beta.push_back(u_beta);
    }
    p.ifr_noise.push_back(theta[l.ifr_noise() + m]);
    p.seed.push_back(std::exp(theta[l.seed() + m]));
    jac += theta[l.seed() + m];
  }
  return {std::move(p), jac};
}

double Posterior::log_prior(const ParameterBlock& p) const {
  check_sizes(p, countries());
  if (!in_support(p)) return kNegInf;
  return prior_terms(block_from(p), true, true);
}

double Posterior::log_likelihood(const ParameterBlock& p, bool* clamped) const {
  check_sizes(p, countries());
  if (!in_support(p)) return kNegInf;
  try {
    return likelihood_terms(block_from(p), *inputs_, clamped);
  } catch (const DomainError&) {
    return kNegInf;
  }
}

double Posterior::log_density(std::span<const double> theta) const {
  try {
    const double v = evaluate<double>(theta, true, nullptr);
    return std::isfinite(v) ? v : kNegInf;
  } catch (const DomainError&) {
    return kNegInf;
  }
}

double Posterior::log_density_gradient(std::span<const double> theta, std::span<double> grad,
                                       ad::Tape& tape) const {
  tape.clear();
  std::vector<ad::Var> inputs;
  inputs.reserve(theta.size());
  for (double x : theta) inputs.push_back(tape.make_input(x));
  try {
    const ad::Var lp = evaluate<ad::Var>(inputs, true, nullptr);
    if (!std::isfinite(lp.value)) return kNegInf;
    tape.gradient(lp, grad);
    for (double g : grad) {
      if (!std::isfinite(g)) return kNegInf;
    }
    return lp.value;
  } catch (const DomainError&) {
    return kNegInf;
  }
}

double Posterior::log_prior_density(std::span<const double> theta) const {
  try {
    const double v = evaluate<double>(theta, false, nullptr);
    return std::isfinite(v) ? v : kNegInf;
  } catch (const DomainError&) {
    return kNegInf;
  }
}

GradientFn Posterior::make_gradient_fn() const {
  auto tape = std::make_shared<ad::Tape>();
  return [self = *this, tape](std::span<const double> theta, std::span<double> grad) {
    return self.log_density_gradient(theta, grad, *tape);
  };
}

std::vector<GeneratedQuantities> Posterior::generated_quantities(const ParameterBlock& p) const {
  check_sizes(p, countries());
  const Block<double> b = block_from(p);
  std::vector<GeneratedQuantities> out;
  out.reserve(countries());
  for (std::size_t m = 0; m < countries(); ++m) {
    auto fwd = forward_country(b, *inputs_, m);
    GeneratedQuantities gq;
    gq.attack_rate = epi::attack_rate<double>(fwd.trajectory.infections, inputs_->countries[m].population);
    gq.clamped = fwd.trajectory.clamped;
    gq.rt = std::move(fwd.rt);
    gq.expected_deaths = std::move(fwd.deaths);
    gq.infections = std::move(fwd.trajectory.infections);
    out.push_back(std::move(gq));
  }
  return out;
}

std::vector<std::vector<std::int64_t>> sample_deaths(const Posterior& posterior,
                                                     const ParameterBlock& p, stats::Rng& rng) {
  std::vector<std::vector<std::int64_t>> out;
  for (const auto& gq : posterior.generated_quantities(p)) {
    std::vector<std::int64_t> series;
    series.reserve(gq.expected_deaths.size());
    for (double mu : gq.expected_deaths) {
      series.push_back(mu > 0.0 ? stats::sample_negbinomial(rng, {mu, p.psi}) : 0);
    }
    out.push_back(std::move(series));
  }
  return out;
}

template double Posterior::evaluate<double>(std::span<const double>, bool, Terms<double>*) const;
template ad::Var Posterior::evaluate<ad::Var>(std::span<const ad::Var>, bool, Terms<ad::Var>*) const;

}  // namespace epinuts::model
