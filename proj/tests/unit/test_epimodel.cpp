#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "epinuts/epimodel.hpp"
#include "oracles.hpp"

namespace epi = epinuts::epi;
namespace st = epinuts::stats;
using epinuts::ad::Tape;
using epinuts::ad::Var;

namespace {

st::DelayPMF unit_delay() {
  st::DelayPMF g;
  g.weights = {1.0};
  return g;
}

// Least-squares slope of log(c) over days [from, to).
double log_slope(const std::vector<double>& c, std::size_t from, std::size_t to) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(to - from);
  for (std::size_t t = from; t < to; ++t) {
    const double x = static_cast<double>(t);
    const double y = std::log(c[t]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<double> constant_series(std::size_t n, double v) { return std::vector<double>(n, v); }

}  // namespace

TEST_SUITE("epimodel") {

TEST_CASE("indicator matrix") {
  const auto none = epi::build_indicator_matrix(std::map<int, int>{}, 20);
  for (int k = 1; k <= 6; ++k)
    for (int t = 1; t <= 20; ++t) CHECK_FALSE(none.on(k, t));

  const auto lockdown = epi::build_indicator_matrix({{5, 10}}, 20);
  for (int t = 1; t <= 20; ++t) {
    CHECK(lockdown.on(5, t) == (t >= 10));
    CHECK(lockdown.on(4, t) == lockdown.on(5, t));
  }

  const auto both = epi::build_indicator_matrix({{1, 5}, {5, 10}}, 20);
  CHECK_FALSE(both.on(4, 4));
  CHECK(both.on(4, 5));
  CHECK(both.on(4, 20));
  CHECK_FALSE(both.on(5, 9));

  const auto early = epi::build_indicator_matrix({{3, -4}}, 10);
  CHECK(early.on(3, 1));
  CHECK(early.warnings().size() == 1);

  // Dates form.
  using namespace std::chrono;
  const sys_days start = year{2020} / March / 1;
  const auto dated = epi::build_indicator_matrix(
      std::map<int, sys_days>{{6, sys_days{year{2020} / March / 3}}}, start, 10);
  CHECK_FALSE(dated.on(6, 2));
  CHECK(dated.on(6, 3));

  CHECK_THROWS_AS(epi::build_indicator_matrix({{4, 3}}, 10), epinuts::UsageError);
}

TEST_CASE("indicator rows are monotone and row 4 is the OR of the rest") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> day(-5, 60);
  std::bernoulli_distribution present(0.6);
  for (int rep = 0; rep < 500; ++rep) {
    std::map<int, int> starts;
    for (int k : {1, 2, 3, 5, 6})
      if (present(rng)) starts[k] = day(rng);
    const auto s = epi::build_indicator_matrix(starts, 50);
    for (int t = 1; t <= 50; ++t) {
      bool any = false;
      for (int k : {1, 2, 3, 5, 6}) {
        any = any || s.on(k, t);
        if (t > 1) CHECK(s.on(k, t) >= s.on(k, t - 1));
      }
      CHECK(s.on(4, t) == any);
    }
  }
}

TEST_CASE("reproduction number") {
  const std::vector<double> zero(6, 0.0);
  const auto none = epi::build_indicator_matrix(std::map<int, int>{}, 15);
  for (double r : epi::compute_rt<double>(2.7, zero, 0.0, none)) CHECK(r == 2.7);

  const auto full = epi::build_indicator_matrix({{1, 1}, {2, 4}, {3, 6}, {5, 8}, {6, 9}}, 15);
  for (double r : epi::compute_rt<double>(2.7, zero, 0.0, full)) CHECK(r == 2.7);

  // Lockdown on: alpha_4 + alpha_5 + beta = log 2 halves R0.
  const auto lockdown = epi::build_indicator_matrix({{5, 3}}, 5);
  const std::vector<double> alphas{0.9, 0.9, 0.9, 0.2, 0.3, 0.9};
  const double beta = std::log(2.0) - 0.5;
  const auto rt = epi::compute_rt<double>(3.28, alphas, beta, lockdown);
  CHECK(rt[0] == 3.28);
  CHECK(rt[2] == doctest::Approx(1.64).epsilon(1e-14));
  CHECK(rt[4] == doctest::Approx(1.64).epsilon(1e-14));

  // Depends on the indicator matrix only, not on the listing order.
  std::map<int, int> a{{5, 10}, {1, 3}};
  std::map<int, int> b;
  b.emplace(1, 3);
  b.emplace(5, 10);
  CHECK(epi::compute_rt<double>(3.0, alphas, 0.1, epi::build_indicator_matrix(a, 20)) ==
        epi::compute_rt<double>(3.0, alphas, 0.1, epi::build_indicator_matrix(b, 20)));
}

TEST_CASE("renewal equation basics") {
  const auto g = unit_delay();
  const std::vector<double> zero_seeds(6, 0.0);
  const auto flat = constant_series(30, 2.0);
  const auto none = epi::simulate_infections<double>(zero_seeds, flat, g, 1e6);
  for (double c : none.infections) CHECK(c == 0.0);

  // Single unit seed, R = 2, all generation mass at one day: doubling.
  const std::vector<double> one{1.0};
  const auto doubling = epi::simulate_infections<double>(one, flat, g, 1e300);
  for (std::size_t t = 0; t < 30; ++t) {
    CHECK(doubling.infections[t] == doctest::Approx(std::ldexp(1.0, static_cast<int>(t))).epsilon(1e-12));
  }

  // Seeds appear verbatim.
  const std::vector<double> seeds(6, 4.0);
  const auto gen = st::generation_pmf();
  const auto traj = epi::simulate_infections<double>(seeds, flat, gen, 1e6);
  for (int t = 0; t < 6; ++t) CHECK(traj.infections[static_cast<std::size_t>(t)] == 4.0);
  CHECK(traj.infections[6] > 0.0);

  const std::vector<double> too_many(6, 1e6);
  CHECK_THROWS_AS(epi::simulate_infections<double>(too_many, flat, gen, 1e6), epinuts::InputError);
  CHECK_THROWS_AS(epi::simulate_infections<double>(seeds, flat, gen, 0.0), epinuts::InputError);
}

TEST_CASE("growth rate matches the discrete Euler-Lotka equation") {
  const auto g = st::generation_pmf();
  for (double r0 : {1.3, 2.5}) {
    const double rate = epinuts::test::euler_lotka_rate(r0, g.weights);
    const std::size_t n = 400;
    const std::vector<double> seeds(6, 1.0);
    const auto rt = constant_series(n, r0);
    const auto traj = epi::simulate_infections<double>(seeds, rt, g, 1e300, {.depletion = false});
    const double slope = log_slope(traj.infections, 20, n);
    CAPTURE(r0);
    CHECK(std::abs(slope - rate) < 1e-4);
  }
}

TEST_CASE("depletion keeps cumulative infections within the population") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> r_dist(0.5, 8.0);
  std::uniform_real_distribution<double> log_pop(std::log(1e3), std::log(1e8));
  std::uniform_real_distribution<double> seed_frac(0.0, 0.1);
  const auto g = st::generation_pmf();
  for (int rep = 0; rep < 300; ++rep) {
    const double pop = std::exp(log_pop(rng));
    const std::vector<double> seeds(6, pop * seed_frac(rng) / 6.0);
    const auto rt = constant_series(150, r_dist(rng));
    const auto traj = epi::simulate_infections<double>(seeds, rt, g, pop);
    double cum = 0.0;
    for (std::size_t t = 0; t < rt.size(); ++t) {
      CHECK(traj.susceptible[t] >= 0.0);
      CHECK(traj.susceptible[t] <= 1.0);
      if (t > 0) CHECK(traj.susceptible[t] <= traj.susceptible[t - 1]);
      CHECK(traj.infections[t] >= 0.0);
      cum += traj.infections[t];
    }
    CHECK(cum <= pop * (1.0 + 1e-12));
    CHECK(epi::attack_rate<double>(traj.infections, pop) <= 1.0 + 1e-12);
  }

  // Saturation: a huge R exhausts the population and then stops.
  const std::vector<double> seeds(6, 10.0);
  const auto burst = epi::simulate_infections<double>(seeds, constant_series(100, 50.0), g, 1e4);
  CHECK(burst.clamped);
  CHECK(epi::attack_rate<double>(burst.infections, 1e4) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(burst.infections.back() == 0.0);
}

TEST_CASE("expected deaths") {
  const auto pi = st::infection_to_death_pmf();
  const std::vector<double> zero(40, 0.0);
  for (double d : epi::expected_deaths<double>(zero, 0.01, pi)) CHECK(d == 0.0);

  std::vector<double> pulse(400, 0.0);
  pulse[0] = 1000.0;
  const auto d = epi::expected_deaths<double>(pulse, 0.01, pi);
  CHECK(d[0] == 0.0);
  for (std::size_t t = 1; t <= 150; ++t) CHECK(d[t] == doctest::Approx(10.0 * pi.at(static_cast<int>(t))).epsilon(1e-12));
  CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(10.0 * pi.total()).epsilon(1e-12));
  CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(10.0).epsilon(1e-4));

  // Superposition and linearity in ifr.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a(90), b(90), ab(90);
    for (std::size_t t = 0; t < 90; ++t) {
      a[t] = u(rng);
      b[t] = u(rng);
      ab[t] = a[t] + b[t];
    }
    const auto da = epi::expected_deaths<double>(a, 0.01, pi);
    const auto db = epi::expected_deaths<double>(b, 0.01, pi);
    const auto dab = epi::expected_deaths<double>(ab, 0.01, pi);
    const auto da2 = epi::expected_deaths<double>(a, 0.02, pi);
    for (std::size_t t = 0; t < 90; ++t) {
      CHECK(dab[t] == doctest::Approx(da[t] + db[t]).epsilon(1e-12));
      CHECK(da2[t] == doctest::Approx(2.0 * da[t]).epsilon(1e-14));
    }
  }
}

TEST_CASE("attack rate") {
  CHECK(epi::attack_rate<double>(std::vector<double>(10, 0.0), 100.0) == 0.0);
  CHECK(epi::attack_rate<double>(std::vector<double>{40.0, 60.0}, 100.0) == 1.0);

  // One seed day and subcritical R: total = seed / (1 - R * mass(g)).
  const auto g = st::generation_pmf();
  const std::vector<double> seed{50.0};
  for (double r : {0.3, 0.5, 0.8}) {
    const auto traj = epi::simulate_infections<double>(seed, constant_series(2000, r), g, 1e9);
    const double expected = 50.0 / (1.0 - r * g.total()) / 1e9;
    CHECK(epi::attack_rate<double>(traj.infections, 1e9) == doctest::Approx(expected).epsilon(1e-6));
  }
  // Six equal seeds, offspring on seed days are not added: bounded above.
  const std::vector<double> seeds(6, 50.0);
  const auto traj = epi::simulate_infections<double>(seeds, constant_series(2000, 0.5), g, 1e9);
  const double ar = epi::attack_rate<double>(traj.infections, 1e9);
  CHECK(ar <= 300.0 / 0.5 / 1e9);
  CHECK(ar > 300.0 / 1e9);
}

TEST_CASE("adjusted infection fatality ratio") {
  epi::AgeTable same;
  same.rows = {{"40-49", 0.2, 0.002, 1000}, {"50-59", 0.2, 0.006, 2000}, {"60-69", 0.2, 0.02, 500}};
  const auto a = epi::adjust_ifr(same);
  CHECK(a.per_age == std::vector<double>{0.002, 0.006, 0.02});

  epi::AgeTable doubled;
  doubled.rows = {{"50-59", 0.1, 0.006, 2000}, {"20-29", 0.2, 0.01, 1000}};
  const auto b = epi::adjust_ifr(doubled);
  CHECK(b.per_age[1] == doctest::Approx(0.005).epsilon(1e-15));
  // (0.006*2000*0.1 + 0.005*1000*0.2) / (2000*0.1 + 1000*0.2)
  CHECK(std::abs(b.country - (1.2 + 1.0) / 400.0) < 1e-12);

  epi::AgeTable single;
  single.rows = {{"50-59", 0.3, 0.007, 100}};
  CHECK(epi::adjust_ifr(single).country == doctest::Approx(0.007).epsilon(1e-15));

  epi::AgeTable missing;
  missing.rows = {{"20-29", 0.3, 0.007, 100}};
  CHECK_THROWS_AS(epi::adjust_ifr(missing), epinuts::InputError);
  epi::AgeTable zero_rate;
  zero_rate.rows = {{"50-59", 0.3, 0.007, 100}, {"20-29", 0.0, 0.001, 100}};
  CHECK_THROWS_AS(epi::adjust_ifr(zero_rate), epinuts::InputError);
}

TEST_CASE("epidemic start") {
  const std::vector<std::int64_t> a{0, 2, 3, 6, 1, 0, 4};
  const auto sa = epi::epidemic_start_index(a);
  CHECK(sa.likelihood_start == 5);
  CHECK(sa.seeding_start == -25);
  CHECK(sa.padding() == 26);

  const std::vector<std::int64_t> b{10, 0, 0};
  CHECK(epi::epidemic_start_index(b).likelihood_start == 2);
  CHECK(epi::epidemic_start_index(b).seeding_start == -28);

  const std::vector<std::int64_t> c(20, 1);
  CHECK(epi::epidemic_start_index(c).likelihood_start == 11);
  CHECK(epi::epidemic_start_index(c).seeding_start == -19);

  std::vector<std::int64_t> late(80, 0);
  late[60] = 12;
  const auto sl = epi::epidemic_start_index(late);
  CHECK(sl.seeding_start == 32);
  CHECK(sl.padding() == 0);

  const std::vector<std::int64_t> few{3, 3, 3};
  CHECK_THROWS_WITH_AS(epi::epidemic_start_index(few, "Atlantis"),
                       doctest::Contains("Atlantis"), epinuts::InputError);
}

TEST_CASE("forward model gradient matches finite differences") {
  const auto g = st::generation_pmf();
  const auto pi = st::infection_to_death_pmf();
  const auto schedule = epi::build_indicator_matrix({{1, 20}, {5, 35}}, 70);

  auto forward_double = [&](const std::vector<double>& p) {
    const std::vector<double> alphas{p[1], 0.0, 0.0, p[2], p[3], 0.0};
    const auto rt = epi::compute_rt<double>(p[0], alphas, p[4], schedule);
    const std::vector<double> seeds(6, p[5]);
    const auto traj = epi::simulate_infections<double>(seeds, rt, g, 1e6);
    const auto d = epi::expected_deaths<double>(traj.infections, p[6], pi);
    double acc = 0.0;
    for (std::size_t t = 30; t < d.size(); ++t) acc += std::log(d[t]) * 0.01 * static_cast<double>(t % 7 + 1);
    return acc;
  };

  const std::vector<double> point{3.1, 0.1, 0.05, 0.9, -0.2, 40.0, 0.012};
  Tape tape;
  std::vector<Var> v;
  for (double p : point) v.push_back(tape.make_input(p));
  const Var zero = tape.constant(0.0);
  const std::vector<Var> alphas{v[1], zero, zero, v[2], v[3], zero};
  const auto rt = epi::compute_rt<Var>(v[0], alphas, v[4], schedule);
  const std::vector<Var> seeds(6, v[5]);
  const auto traj = epi::simulate_infections<Var>(seeds, rt, g, 1e6);
  const auto d = epi::expected_deaths<Var>(traj.infections, v[6], pi);
  Var acc = tape.constant(0.0);
  for (std::size_t t = 30; t < d.size(); ++t) acc += log(d[t]) * (0.01 * static_cast<double>(t % 7 + 1));
  CHECK(acc.value == doctest::Approx(forward_double(point)).epsilon(1e-13));
  const auto grad = tape.gradient(acc);
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double fd = epinuts::test::ridders_derivative(forward_double, point, i, 0.01 * std::max(1.0, std::abs(point[i])));
    CAPTURE(i);
    CHECK(std::abs(grad[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("gradient through a saturated trajectory") {
  // Rt jumps on day 40 so the population runs out mid-series; days after the
  // clamp are identically zero and must not disturb earlier adjoints.
  const auto g = st::generation_pmf();
  const double pop = 1e6;
  auto rt_of = [](double r0, double jump) {
    std::vector<double> rt(80, r0);
    for (std::size_t t = 40; t < rt.size(); ++t) rt[t] = r0 * jump;
    return rt;
  };
  auto weighted = [&](const std::vector<double>& p) {
    const std::vector<double> seeds(6, p[2]);
    const auto traj = epi::simulate_infections<double>(seeds, rt_of(p[0], p[1]), g, pop);
    double acc = 0.0;
    for (std::size_t t = 0; t < traj.infections.size(); ++t) acc += (1.0 + 0.01 * t) * traj.infections[t];
    return acc;
  };
  const std::vector<double> point{1.2, 400.0, 1.0};
  Tape tape;
  const Var r0 = tape.make_input(point[0]);
  const Var jump = tape.make_input(point[1]);
  const Var seed = tape.make_input(point[2]);
  std::vector<Var> rt(80, r0);
  for (std::size_t t = 40; t < rt.size(); ++t) rt[t] = r0 * jump;
  const std::vector<Var> seeds(6, seed);
  const auto traj = epi::simulate_infections<Var>(seeds, rt, g, pop);
  REQUIRE(traj.clamped);
  CHECK(traj.infections.back().value == 0.0);
  Var acc = tape.constant(0.0);
  for (std::size_t t = 0; t < traj.infections.size(); ++t) acc += (1.0 + 0.01 * t) * traj.infections[t];
  const auto grad = tape.gradient(acc);
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double fd = epinuts::test::ridders_derivative(weighted, point, i, 1e-3 * std::max(1.0, std::abs(point[i])));
    CAPTURE(i);
    CHECK(std::abs(grad[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

}  // TEST_SUITE
