#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <istream>
#include <set>

#include "../dataio/csv.hpp"
#include "epinuts/cli.hpp"
#include "epinuts/error.hpp"

namespace epinuts::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Key for the derived "any intervention" effect, which has no date column.
constexpr std::string_view kAnyInterventionKey = "any_intervention";

std::optional<int> effect_number(std::string_view key) {
  if (key == kAnyInterventionKey) return 4;
  return dataio::intervention_number(key);
}

}  // namespace

Scenario parse_scenario(std::istream& in, const std::string& source) {
  Scenario scenario;
  ScenarioCountry defaults;
  std::set<std::string> names;
  std::string raw;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw InputError(fmt::format("{}: line {}: {}", source, line_no, msg));
  };
  auto number = [&](std::string_view key, std::string_view text) {
    const auto v = dataio::csv::parse_double(text);
    if (!v) fail(fmt::format("'{}' is not a number for {}", text, key));
    return *v;
  };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));

    if (key == "country") {
      if (value.empty()) fail("country name is empty");
      if (!names.insert(std::string(value)).second) fail(fmt::format("country '{}' appears twice", value));
      ScenarioCountry c = defaults;
      c.name = std::string(value);
      scenario.countries.push_back(std::move(c));
      continue;
    }
    if (key == "seed") {
      std::uint64_t s = 0;
      const auto r = std::from_chars(value.data(), value.data() + value.size(), s);
      if (r.ec != std::errc{} || r.ptr != value.data() + value.size()) fail("seed must be a non-negative integer");
      scenario.seed = s;
      continue;
    }
    if (key == "psi") {
      scenario.psi = number(key, value);
      continue;
    }
    if (key.starts_with("effect.")) {
      const auto k = effect_number(std::string_view(key).substr(7));
      if (!k) fail(fmt::format("unknown intervention in '{}'", key));
      scenario.reductions[*k] = number(key, value);
      continue;
    }

    // Country-level keys apply to the open block, or to the defaults before
    // the first block.
    ScenarioCountry& c = scenario.countries.empty() ? defaults : scenario.countries.back();
    if (key == "start_date") {
      const auto d = dataio::parse_date(value);
      if (!d) fail(fmt::format("invalid date '{}'", value));
      c.start_date = *d;
    } else if (key == "days") {
      const auto d = dataio::csv::parse_int(value);
      if (!d || *d < 1 || *d > 100000) fail("days must be a positive integer");
      c.days = static_cast<int>(*d);
    } else if (key == "r0") {
      c.r0 = number(key, value);
    } else if (key == "population") {
      c.population = number(key, value);
    } else if (key == "ifr") {
      c.ifr = number(key, value);
    } else if (key == "seed_infections") {
      c.seed_infections = number(key, value);
    } else if (key == "beta") {
      c.beta = number(key, value);
    } else if (const auto k = dataio::intervention_number(key)) {
      const auto d = dataio::parse_date(value);
      if (!d) fail(fmt::format("invalid date '{}'", value));
      c.dates[*k] = *d;
    } else {
      fail(fmt::format("unknown key '{}'", key));
    }
  }
  if (scenario.countries.empty()) throw InputError(fmt::format("{}: no country blocks", source));

  auto bad = [&](const std::string& msg) { throw InputError(fmt::format("{}: {}", source, msg)); };
  if (!(scenario.psi > 0.0) || !std::isfinite(scenario.psi)) bad("psi must be positive");
  for (const auto& [k, r] : scenario.reductions) {
    if (!(r < 1.0) || !std::isfinite(r)) bad(fmt::format("reduction for intervention {} must be below 1", k));
  }
  for (const auto& c : scenario.countries) {
    const auto where = fmt::format("country '{}'", c.name);
    if (c.days <= epi::kSeedDays) bad(fmt::format("{}: days must exceed {}", where, epi::kSeedDays));
    if (!(c.r0 > 0.0) || !std::isfinite(c.r0)) bad(where + ": r0 must be positive");
    if (!(c.population >= 1.0) || !std::isfinite(c.population) || c.population != std::floor(c.population)) {
      bad(where + ": population must be a positive integer");
    }
    if (!(c.ifr > 0.0 && c.ifr < 1.0)) bad(where + ": ifr must lie in (0, 1)");
    if (!(c.seed_infections >= 0.0) || !std::isfinite(c.seed_infections)) {
      bad(where + ": seed_infections must be non-negative");
    }
    if (c.seed_infections * epi::kSeedDays > c.population) bad(where + ": seed infections exceed the population");
    if (!std::isfinite(c.beta)) bad(where + ": beta must be finite");
  }
  return scenario;
}

}  // namespace epinuts::cli
