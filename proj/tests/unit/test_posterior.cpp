#include <doctest.h>

#include <algorithm>
#include <boost/math/distributions/exponential.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <cmath>
#include <random>

#include "epinuts/posterior.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

namespace model = epinuts::model;
namespace epi = epinuts::epi;
namespace st = epinuts::stats;

namespace {

model::ParameterBlock random_block(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto positive = [&] { return std::exp(6.0 * u(rng) - 3.0); };
  model::ParameterBlock p;
  p.kappa = positive();
  for (double& a : p.alpha) a = -st::kInterventionShift + positive() * 0.5;
  p.gamma = positive();
  p.psi = positive();
  p.tau = positive() * 10.0;
  for (std::size_t i = 0; i < m; ++i) {
    p.r0.push_back(positive());
    p.beta.push_back(4.0 * u(rng) - 2.0);
    p.ifr_noise.push_back(0.5 + u(rng));
    p.seed.push_back(positive() * 10.0);
  }
  return p;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// One country, seven days, all death mass one day after infection.
std::shared_ptr<model::ModelInputs> tiny_inputs(std::int64_t last_day_deaths) {
  auto in = std::make_shared<model::ModelInputs>();
  in->pi.weights = {1.0};
  in->g = st::generation_pmf();
  model::CountryData c;
  c.name = "Tiny";
  c.deaths.assign(7, 0);
  c.deaths[6] = last_day_deaths;
  c.schedule = epi::InterventionSchedule(7);
  c.population = 1e6;
  c.ifr_mean = 0.01;
  c.likelihood_start = 7;
  in->countries.push_back(c);
  return in;
}

model::ParameterBlock tiny_block(double seed, double psi) {
  auto p = epinuts::test::default_truth(1);
  p.seed = {seed};
  p.psi = psi;
  return p;
}

double log_normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
}

double log_folded_pdf(double x, double mu, double sigma) {
  const double a = log_normal_pdf(x, mu, sigma);
  const double b = log_normal_pdf(-x, mu, sigma);
  return std::max(a, b) + std::log1p(std::exp(std::min(a, b) - std::max(a, b)));
}

double log_exponential_pdf(double x, double rate) { return std::log(rate) - rate * x; }

double integrate_real_line(const std::function<double(double)>& f) {
  boost::math::quadrature::sinh_sinh<double> q;
  return q.integrate(f, 1e-12);
}

double integrate_interval(const std::function<double(double)>& f, double lo, double hi) {
  boost::math::quadrature::tanh_sinh<double> q;
  return q.integrate(f, lo, hi, 1e-12);
}

}  // namespace

TEST_SUITE("posterior") {

TEST_CASE("pack and unpack") {
  const auto set = epinuts::test::make_synthetic(epinuts::test::two_countries(), 40,
                                                 epinuts::test::default_truth(2), 1);
  for (bool r0_nc : {false, true}) {
    const model::Posterior post(set.inputs, {.r0_noncentered = r0_nc, .beta_noncentered = !r0_nc});
    auto p = set.truth;
    p.r0[0] = 1.0;
    p.alpha[2] = 0.0;
    const auto theta = post.pack(p);
    CHECK(theta.size() == post.dim());
    CHECK(post.dim() == 6 + 4 * 2 + 4);
    CHECK(post.parameter_names().size() == post.dim());
    if (!r0_nc) CHECK(theta[0] == 0.0);
    // log(log(1.05) / 6) = log(0.0081317) = -4.81199.
    CHECK(theta[2 + 1 + 2] == doctest::Approx(-4.81199).epsilon(1e-5));
    CHECK(theta[2 + 1 + 2] == std::log(std::log(1.05) / 6.0));

    std::mt19937_64 rng(11);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      const auto block = random_block(rng, 2);
      const auto back = post.unpack(post.pack(block));
      worst = std::max(worst, max_abs_diff(post.flatten(block), post.flatten(back.params)));
    }
    CHECK(worst < 1e-12);

    std::vector<double> bad(post.dim(), 0.0);
    bad[3] = std::nan("");
    CHECK_THROWS_AS(post.unpack(bad), epinuts::DomainError);
    CHECK(post.log_density(bad) == -INFINITY);
  }
}

TEST_CASE("log prior") {
  const auto set = epinuts::test::make_synthetic(epinuts::test::two_countries(), 40,
                                                 epinuts::test::default_truth(2), 2);
  const model::Posterior post(set.inputs);
  auto p = set.truth;

  // Independent sum using the distribution objects.
  namespace bm = boost::math;
  double expected = std::log(2.0 * bm::pdf(bm::normal(0.0, 0.5), p.kappa));
  for (double r : p.r0) {
    const bm::normal n(3.28, p.kappa);
    expected += std::log(bm::pdf(n, r) + bm::pdf(n, -r));
  }
  for (double a : p.alpha) expected += std::log(bm::pdf(bm::gamma_distribution<>(1.0 / 6.0, 1.0), a + st::kInterventionShift));
  expected += std::log(2.0 * bm::pdf(bm::normal(0.0, 0.2), p.gamma));
  for (double b : p.beta) expected += std::log(bm::pdf(bm::normal(0.0, p.gamma), b));
  expected += std::log(2.0 * bm::pdf(bm::normal(0.0, 5.0), p.psi));
  for (double f : p.ifr_noise) expected += std::log(bm::pdf(bm::normal(1.0, 0.1), f));
  for (double s : p.seed) expected += std::log(bm::pdf(bm::exponential(1.0 / p.tau), s));
  expected += std::log(bm::pdf(bm::exponential(0.03), p.tau));
  CHECK(post.log_prior(p) == doctest::Approx(expected).epsilon(1e-12));

  // Alpha at its prior median contributes a finite amount.
  auto median = p;
  const double m = bm::median(bm::gamma_distribution<>(1.0 / 6.0, 1.0)) - st::kInterventionShift;
  median.alpha.fill(m);
  CHECK(std::isfinite(post.log_prior(median)));

  // gamma -> 0 with a nonzero beta.
  auto pool = p;
  pool.beta = {0.3, -0.1};
  double previous = post.log_prior(pool);
  for (double g : {1e-2, 1e-3, 1e-4, 1e-5}) {
    pool.gamma = g;
    const double lp = post.log_prior(pool);
    CHECK(lp < previous);
    previous = lp;
  }
  CHECK(previous < -1e6);

  // R0 term decreases beyond its location.
  auto r = p;
  previous = INFINITY;
  for (double r0 : {3.3, 3.6, 4.0, 5.0, 8.0}) {
    r.r0[0] = r0;
    const double lp = post.log_prior(r);
    CHECK(lp < previous);
    previous = lp;
  }

  auto outside = p;
  outside.alpha[0] = -0.01;
  CHECK(post.log_prior(outside) == -INFINITY);
  outside = p;
  outside.psi = 0.0;
  CHECK(post.log_prior(outside) == -INFINITY);
}

TEST_CASE("log likelihood") {
  // d = ifr * seed = 0.01 * 200 = 2 on the single likelihood day.
  const model::Posterior post(tiny_inputs(0));
  CHECK(post.log_likelihood(tiny_block(200.0, 1.0)) == doctest::Approx(-1.0986122886681098).epsilon(1e-12));

  const model::Posterior post7(tiny_inputs(7));
  for (double psi : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    CAPTURE(psi);
    CHECK(post7.log_likelihood(tiny_block(200.0, psi)) ==
          doctest::Approx(epinuts::test::gamma_poisson_log_pmf(7, 2.0, psi)).epsilon(1e-9));
  }

  // No deaths and vanishing seeds.
  auto set = epinuts::test::make_synthetic(epinuts::test::two_countries(), 60,
                                           epinuts::test::default_truth(2), 3);
  for (auto& c : set.inputs->countries) std::fill(c.deaths.begin(), c.deaths.end(), 0);
  const model::Posterior quiet(set.inputs);
  auto p = set.truth;
  p.seed = {1e-9, 1e-9};
  CHECK(std::abs(quiet.log_likelihood(p)) < 1e-6);

  // Clamped trajectories still give a finite likelihood and report the clamp.
  auto tiny_pop = epinuts::test::make_synthetic(
      {{"Small", {}, 2000.0, 0.01}}, 90, epinuts::test::default_truth(1), 4);
  const model::Posterior small(tiny_pop.inputs);
  auto hot = tiny_pop.truth;
  hot.r0 = {12.0};
  hot.seed = {50.0};
  bool clamped = false;
  CHECK(std::isfinite(small.log_likelihood(hot, &clamped)));
  CHECK(clamped);
  for (const auto& gq : small.generated_quantities(hot)) CHECK(gq.clamped);
}

TEST_CASE("gradient matches finite differences") {
  const auto set = epinuts::test::make_synthetic(epinuts::test::two_countries(), 100,
                                                 epinuts::test::default_truth(2), 5);
  for (bool r0_nc : {false, true}) {
    const model::Posterior post(set.inputs, {.r0_noncentered = r0_nc});
    const auto centre = post.pack(set.truth);
    std::mt19937_64 rng(21);
    std::normal_distribution<double> jitter(0.0, 0.3);
    epinuts::ad::Tape tape;
    std::vector<double> grad(post.dim());
    auto f = [&](const std::vector<double>& x) { return post.log_density(x); };
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      auto theta = centre;
      for (double& x : theta) x += jitter(rng);
      const double value = post.log_density_gradient(theta, grad, tape);
      REQUIRE(std::isfinite(value));
      CHECK(value == doctest::Approx(post.log_density(theta)).epsilon(1e-12));
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double fd = epinuts::test::ridders_derivative(f, theta, i, 0.05);
        worst = std::max(worst, std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd)));
      }
    }
    CAPTURE(r0_nc);
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("evaluation is deterministic and exchangeable") {
  const auto set = epinuts::test::make_synthetic(epinuts::test::two_countries(), 90,
                                                 epinuts::test::default_truth(2), 6);
  const model::Posterior post(set.inputs);
  auto theta = post.pack(set.truth);
  theta[0] += 0.1;
  epinuts::ad::Tape tape;
  std::vector<double> g1(post.dim()), g2(post.dim());
  const double v1 = post.log_density_gradient(theta, g1, tape);
  const double v2 = post.log_density_gradient(theta, g2, tape);
  CHECK(v1 == v2);
  CHECK(g1 == g2);
  const auto fn = post.make_gradient_fn();
  CHECK(fn(theta, g2) == v1);
  CHECK(g1 == g2);

  auto swapped_inputs = std::make_shared<model::ModelInputs>(*set.inputs);
  std::swap(swapped_inputs->countries[0], swapped_inputs->countries[1]);
  const model::Posterior swapped(swapped_inputs);
  auto p = post.unpack(theta).params;
  for (auto* v : {&p.r0, &p.beta, &p.ifr_noise, &p.seed}) std::swap((*v)[0], (*v)[1]);
  CHECK(swapped.log_density(swapped.pack(p)) == doctest::Approx(v1).epsilon(1e-12));
}

TEST_CASE("transforms integrate each prior to one") {
  namespace bm = boost::math;
  // R0 at the prior location and beta at zero keep the child densities
  // bounded as their scale parameter goes to zero, so that removing them
  // below does not cancel two huge numbers.
  auto truth = epinuts::test::default_truth(2);
  truth.r0 = {3.28, 3.28};
  const auto set = epinuts::test::make_synthetic(epinuts::test::two_countries(), 40, truth, 7);
  for (bool nc : {false, true}) {
    const model::Posterior post(set.inputs, {.r0_noncentered = nc, .beta_noncentered = nc});
    const auto base = post.pack(set.truth);
    auto total = [&](std::size_t i, double u) {
      auto theta = base;
      theta[i] = u;
      return post.log_prior_density(theta);
    };
    // Mass of the full prior in coordinate i, divided by the density of the
    // remaining factors, which the caller supplies as a function of the
    // constrained block.
    // A finite range, when given, must hold all but a negligible part of the mass.
    auto check_mass = [&](std::size_t i, const std::function<double(const model::ParameterBlock&)>& others,
                          const std::string& label, double lo = -INFINITY, double hi = INFINITY) {
      auto integrand = [&](double u) {
        auto theta = base;
        theta[i] = u;
        const auto up = post.unpack(theta);
        const double lp = total(i, u) - others(up.params);
        return std::isfinite(lp) ? std::exp(lp) : 0.0;
      };
      const double mass = std::isfinite(lo) ? integrate_interval(integrand, lo, hi) : integrate_real_line(integrand);
      CAPTURE(label);
      CAPTURE(nc);
      CHECK(std::abs(mass - 1.0) < 1e-6);
    };

    // Density of everything except coordinate i, for a leaf coordinate:
    // the value at base minus the leaf's own density at base.
    const double at_base = total(0, base[0]);
    const model::ParameterBlock& t = set.truth;
    auto leaf_density_alpha = [&](double a) {
      const double x = a + st::kInterventionShift;
      return std::log(bm::pdf(bm::gamma_distribution<>(1.0 / 6.0, 1.0), x) * x);
    };
    check_mass(2 + 1 + 0, [&](const model::ParameterBlock&) { return at_base - leaf_density_alpha(t.alpha[0]); }, "alpha");
    auto psi_density = [&](double psi) { return std::log(2.0 * bm::pdf(bm::normal(0.0, 5.0), psi) * psi); };
    check_mass(2 * 2 + 8, [&](const model::ParameterBlock&) { return at_base - psi_density(t.psi); }, "psi");
    auto noise_density = [&](double f) { return std::log(bm::pdf(bm::normal(1.0, 0.1), f)); };
    check_mass(2 * 2 + 9, [&](const model::ParameterBlock&) { return at_base - noise_density(t.ifr_noise[0]); }, "ifr_noise");
    auto seed_density = [&](double s) { return std::log(bm::pdf(bm::exponential(1.0 / t.tau), s) * s); };
    check_mass(3 * 2 + 9, [&](const model::ParameterBlock&) { return at_base - seed_density(t.seed[0]); }, "seed");
    auto r0_density = [&](double r0) {
      const bm::normal n(3.28, t.kappa);
      const double folded = bm::pdf(n, r0) + bm::pdf(n, -r0);
      // Centered: d r0 / du = r0. Non-centered: the standard normal in z.
      if (nc) return std::log(bm::pdf(bm::normal(), (r0 - 3.28) / t.kappa));
      return std::log(folded * r0);
    };
    check_mass(0, [&](const model::ParameterBlock&) { return at_base - r0_density(t.r0[0]); }, "R0");
    auto beta_density = [&](double b) {
      if (nc) return std::log(bm::pdf(bm::normal(), b / t.gamma));
      return std::log(bm::pdf(bm::normal(0.0, t.gamma), b));
    };
    check_mass(2 + 7, [&](const model::ParameterBlock&) { return at_base - beta_density(t.beta[0]); }, "beta");

    // Parents: remove the children's densities, which move with the parent.
    auto children_of_kappa = [&](const model::ParameterBlock& p) {
      double s = at_base - std::log(2.0 * bm::pdf(bm::normal(0.0, 0.5), t.kappa) * t.kappa);
      for (std::size_t m = 0; m < 2; ++m) {
        if (nc) continue;
        s += log_folded_pdf(p.r0[m], 3.28, p.kappa) - log_folded_pdf(t.r0[m], 3.28, t.kappa);
      }
      return s;
    };
    check_mass(2, children_of_kappa, "kappa");
    auto children_of_gamma = [&](const model::ParameterBlock& p) {
      double s = at_base - std::log(2.0 * bm::pdf(bm::normal(0.0, 0.2), t.gamma) * t.gamma);
      for (std::size_t m = 0; m < 2; ++m) {
        if (nc) continue;
        s += log_normal_pdf(p.beta[m], 0.0, p.gamma) - log_normal_pdf(t.beta[m], 0.0, t.gamma);
      }
      return s;
    };
    check_mass(2 * 2 + 7, children_of_gamma, "gamma");
    auto children_of_tau = [&](const model::ParameterBlock& p) {
      double s = at_base - std::log(bm::pdf(bm::exponential(0.03), t.tau) * t.tau);
      for (std::size_t m = 0; m < 2; ++m) {
        s += log_exponential_pdf(p.seed[m], 1.0 / p.tau) - log_exponential_pdf(t.seed[m], 1.0 / t.tau);
      }
      return s;
    };
    // Prior mass below log tau = -30 is about 3e-15.
    check_mass(4 * 2 + 9, children_of_tau, "tau", -30.0, 10.0);
  }
}

TEST_CASE("generated quantities") {
  auto set = epinuts::test::make_synthetic({{"Open", {}, 1e6, 0.01}, {"Shut", {{5, 30}}, 1e6, 0.01}}, 120,
                                           epinuts::test::default_truth(2), 8);
  const model::Posterior post(set.inputs);
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    auto p = random_block(rng, 2);
    for (double& s : p.seed) s = std::min(s, 1000.0);
    const auto gq = post.generated_quantities(p);
    REQUIRE(gq.size() == 2);
    for (double r : gq[0].rt) CHECK(r == p.r0[0]);
    for (const auto& q : gq) {
      CHECK(q.attack_rate >= 0.0);
      CHECK(q.attack_rate <= 1.0 + 1e-12);
    }
    const auto d = epi::expected_deaths<double>(gq[1].infections, p.ifr_noise[1] * 0.01, set.inputs->pi);
    CHECK(d == gq[1].expected_deaths);
  }
}

}  // TEST_SUITE
