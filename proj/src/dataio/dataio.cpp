#include "epinuts/dataio.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "epinuts/nuts.hpp"

namespace epinuts::dataio {

namespace {

using namespace std::chrono;

std::string describe(const std::string& source, const std::vector<Violation>& violations) {
  std::string out = fmt::format("{}: {} problem(s)", source, violations.size());
  for (const auto& v : violations) {
    out += "\n  ";
    if (v.line > 0) out += fmt::format("line {}", v.line);
    if (!v.field.empty()) out += fmt::format("{}field '{}'", v.line > 0 ? ", " : "", v.field);
    if (v.line > 0 || !v.field.empty()) out += ": ";
    out += v.message;
  }
  return out;
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path, {{0, "", "cannot open file"}});
  return in;
}

void throw_if_any(const std::string& source, std::vector<Violation>& violations) {
  if (violations.empty()) return;
  std::stable_sort(violations.begin(), violations.end(),
                   [](const Violation& a, const Violation& b) { return a.line < b.line; });
  throw IngestionError(source, std::move(violations));
}

std::string allowed_keys() {
  std::string out;
  for (const auto& [key, k] : intervention_keys()) out += (out.empty() ? "" : ", ") + key;
  return out;
}

// Field accessors that record a violation and return nullopt on failure.
struct RowReader {
  const csv::Row& row;
  const std::vector<std::size_t>& columns;
  const std::vector<std::string>& names;
  std::vector<Violation>& violations;

  const std::string& text(std::size_t c) const { return row.fields[columns[c]]; }

  void fail(std::size_t c, std::string message) const {
    violations.push_back({row.line, names[c], std::move(message)});
  }

  std::optional<std::string> country(std::size_t c) const {
    if (text(c).empty()) {
      fail(c, "country is empty");
      return std::nullopt;
    }
    return text(c);
  }

  std::optional<Date> date(std::size_t c) const {
    auto d = parse_date(text(c));
    if (!d) fail(c, fmt::format("'{}' is not a valid YYYY-MM-DD date", text(c)));
    return d;
  }

  std::optional<double> real(std::size_t c) const {
    auto v = csv::parse_double(text(c));
    if (!v) fail(c, fmt::format("'{}' is not a finite number", text(c)));
    return v;
  }

  std::optional<std::int64_t> integer(std::size_t c) const {
    auto v = csv::parse_int(text(c));
    if (!v) fail(c, fmt::format("'{}' is not an integer", text(c)));
    return v;
  }
};

template <class Parse>
auto load(const std::string& path, Parse parse) {
  auto in = open(path);
  return parse(in, path);
}

}  // namespace

IngestionError::IngestionError(std::string source, std::vector<Violation> violations)
    : InputError(describe(source, violations)),
      source_(std::move(source)),
      violations_(std::move(violations)) {}

std::optional<Date> parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (text[i] < '0' || text[i] > '9') return std::nullopt;
  }
  const auto y = csv::parse_int(text.substr(0, 4));
  const auto m = csv::parse_int(text.substr(5, 2));
  const auto d = csv::parse_int(text.substr(8, 2));
  const year_month_day ymd{year{static_cast<int>(*y)}, month{static_cast<unsigned>(*m)},
                           day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

std::string format_date(Date d) {
  const year_month_day ymd{d};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

const std::vector<std::pair<std::string, int>>& intervention_keys() {
  static const std::vector<std::pair<std::string, int>> keys = {
      {"schools_universities", 1}, {"self_isolating_if_ill", 2}, {"public_events", 3},
      {"lockdown", 5},             {"social_distancing_encouraged", 6}};
  return keys;
}

std::optional<int> intervention_number(std::string_view key) {
  for (const auto& [name, k] : intervention_keys()) {
    if (name == key) return k;
  }
  return std::nullopt;
}

std::string intervention_key(int k) {
  for (const auto& [name, number] : intervention_keys()) {
    if (number == k) return name;
  }
  throw UsageError(fmt::format("intervention {} has no input key", k));
}

// ---------------------------------------------------------------------------
// Loaders.

std::vector<DeathsRecord> parse_deaths(std::istream& in, const std::string& source) {
  const std::vector<std::string> names = {"country", "date", "deaths"};
  std::vector<Violation> violations;
  const csv::Table table = csv::read(in, names, violations);
  std::vector<DeathsRecord> out;
  std::map<std::pair<std::string, Date>, std::size_t> seen;
  std::vector<std::size_t> lines;
  if (!table.columns.empty()) {
    for (const auto& row : table.rows) {
      const RowReader r{row, table.columns, names, violations};
      const auto country = r.country(0);
      const auto date = r.date(1);
      auto deaths = r.integer(2);
      if (deaths && *deaths < 0) {
        r.fail(2, fmt::format("deaths must be nonnegative, got {}", *deaths));
        deaths.reset();
      }
      if (!country || !date || !deaths) continue;
      const auto [it, fresh] = seen.emplace(std::pair{*country, *date}, row.line);
      if (!fresh) {
        violations.push_back({row.line, "date",
                              fmt::format("duplicate row for {} on {} (first on line {})", *country,
                                          format_date(*date), it->second)});
        continue;
      }
      out.push_back({*country, *date, *deaths});
      lines.push_back(row.line);
    }
  }
  // Per-country dates must be consecutive once sorted.
  std::map<std::string, std::vector<std::pair<Date, std::size_t>>> by_country;
  for (std::size_t i = 0; i < out.size(); ++i) by_country[out[i].country].push_back({out[i].date, lines[i]});
  for (auto& [country, dates] : by_country) {
    std::sort(dates.begin(), dates.end());
    for (std::size_t i = 1; i < dates.size(); ++i) {
      const auto gap = (dates[i].first - dates[i - 1].first).count();
      if (gap > 1) {
        violations.push_back({dates[i].second, "date",
                              fmt::format("{} has no rows between {} and {} ({} missing day(s))",
                                          country, format_date(dates[i - 1].first),
                                          format_date(dates[i].first), gap - 1)});
      }
    }
  }
  throw_if_any(source, violations);
  return out;
}

std::vector<InterventionRecord> parse_interventions(std::istream& in, const std::string& source) {
  const std::vector<std::string> names = {"country", "intervention", "date"};
  std::vector<Violation> violations;
  const csv::Table table = csv::read(in, names, violations);
  std::vector<InterventionRecord> out;
  std::map<std::pair<std::string, int>, std::size_t> seen;
  if (!table.columns.empty()) {
    for (const auto& row : table.rows) {
      const RowReader r{row, table.columns, names, violations};
      const auto country = r.country(0);
      const auto k = intervention_number(r.text(1));
      if (!k) {
        r.fail(1, fmt::format("unknown intervention '{}'; allowed keys: {}", r.text(1),
                              allowed_keys()));
      }
      const auto date = r.date(2);
      if (!country || !k || !date) continue;
      const auto [it, fresh] = seen.emplace(std::pair{*country, *k}, row.line);
      if (!fresh) {
        violations.push_back({row.line, "intervention",
                              fmt::format("{} lists '{}' twice (first on line {})", *country,
                                          r.text(1), it->second)});
        continue;
      }
      out.push_back({*country, *k, *date});
    }
  }
  throw_if_any(source, violations);
  return out;
}

std::vector<CountryMeta> parse_country_meta(std::istream& in, const std::string& source) {
  const std::vector<std::string> names = {"country", "population", "ifr_mean"};
  std::vector<Violation> violations;
  const csv::Table table = csv::read(in, names, violations);
  std::vector<CountryMeta> out;
  std::map<std::string, std::size_t> seen;
  if (!table.columns.empty()) {
    for (const auto& row : table.rows) {
      const RowReader r{row, table.columns, names, violations};
      const auto country = r.country(0);
      auto population = r.integer(1);
      if (population && *population <= 0) {
        r.fail(1, fmt::format("population must be positive, got {}", *population));
        population.reset();
      }
      auto ifr = r.real(2);
      if (ifr && !(*ifr > 0.0 && *ifr < 1.0)) {
        r.fail(2, fmt::format("ifr_mean must lie in (0, 1), got {}", r.text(2)));
        ifr.reset();
      }
      if (!country || !population || !ifr) continue;
      const auto [it, fresh] = seen.emplace(*country, row.line);
      if (!fresh) {
        violations.push_back({row.line, "country",
                              fmt::format("duplicate row for {} (first on line {})", *country,
                                          it->second)});
        continue;
      }
      out.push_back({*country, *population, *ifr});
    }
  }
  throw_if_any(source, violations);
  return out;
}

AgeTables parse_age_table(std::istream& in, const std::string& source) {
  const std::vector<std::string> names = {"country", "age_group", "attack_rate", "ifr_prime",
                                          "population"};
  std::vector<Violation> violations;
  const csv::Table table = csv::read(in, names, violations);
  AgeTables out;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  if (!table.columns.empty()) {
    for (const auto& row : table.rows) {
      const RowReader r{row, table.columns, names, violations};
      const auto country = r.country(0);
      const std::string& group = r.text(1);
      if (group.empty()) r.fail(1, "age group is empty");
      auto attack = r.real(2);
      if (attack && !(*attack > 0.0 && *attack <= 1.0)) {
        r.fail(2, fmt::format("attack_rate must lie in (0, 1], got {}", r.text(2)));
        attack.reset();
      }
      auto ifr = r.real(3);
      if (ifr && !(*ifr >= 0.0 && *ifr <= 1.0)) {
        r.fail(3, fmt::format("ifr_prime must lie in [0, 1], got {}", r.text(3)));
        ifr.reset();
      }
      auto population = r.real(4);
      if (population && !(*population > 0.0)) {
        r.fail(4, fmt::format("population must be positive, got {}", r.text(4)));
        population.reset();
      }
      if (!country || group.empty() || !attack || !ifr || !population) continue;
      const auto [it, fresh] = seen.emplace(std::pair{*country, group}, row.line);
      if (!fresh) {
        violations.push_back({row.line, "age_group",
                              fmt::format("duplicate age group '{}' for {} (first on line {})",
                                          group, *country, it->second)});
        continue;
      }
      out[*country].rows.push_back({group, *attack, *ifr, *population});
    }
  }
  for (const auto& [country, t] : out) {
    const bool has_reference = std::any_of(t.rows.begin(), t.rows.end(), [&](const epi::AgeRow& row) {
      return row.age_group == t.reference_group;
    });
    if (!has_reference) {
      violations.push_back({0, "age_group",
                            fmt::format("{} has no '{}' reference row", country, t.reference_group)});
    }
  }
  throw_if_any(source, violations);
  return out;
}

std::vector<DeathsRecord> load_deaths(const std::string& path) {
  return load(path, [](std::istream& in, const std::string& s) { return parse_deaths(in, s); });
}

std::vector<InterventionRecord> load_interventions(const std::string& path) {
  return load(path, [](std::istream& in, const std::string& s) { return parse_interventions(in, s); });
}

std::vector<CountryMeta> load_country_meta(const std::string& path) {
  return load(path, [](std::istream& in, const std::string& s) { return parse_country_meta(in, s); });
}

AgeTables load_age_table(const std::string& path) {
  return load(path, [](std::istream& in, const std::string& s) { return parse_age_table(in, s); });
}

// ---------------------------------------------------------------------------
// Run configuration.

void RunConfig::validate() const {
  std::vector<std::string> problems;
  if (chains < 1 || chains > 64) problems.push_back(fmt::format("chains must be in [1, 64], got {}", chains));
  if (warmup < sampler::kMinAdaptiveWarmup) {
    problems.push_back(fmt::format("warmup must be at least {} (the adaptation schedule minimum), got {}",
                                   sampler::kMinAdaptiveWarmup, warmup));
  }
  if (iters < 10) problems.push_back(fmt::format("iters must be at least 10, got {}", iters));
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    problems.push_back(fmt::format("target_accept must lie in (0, 1), got {}", target_accept));
  }
  if (max_tree_depth < 1 || max_tree_depth > 20) {
    problems.push_back(fmt::format("max_tree_depth must be in [1, 20], got {}", max_tree_depth));
  }
  if (pi_horizon < 30 || pi_horizon > 1000) {
    problems.push_back(fmt::format("pi_horizon must be in [30, 1000], got {}", pi_horizon));
  }
  if (g_horizon < 10 || g_horizon > 1000) {
    problems.push_back(fmt::format("g_horizon must be in [10, 1000], got {}", g_horizon));
  }
  if (problems.empty()) return;
  std::string msg = "invalid run configuration:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw UsageError(msg);
}

void RunConfig::set(std::string_view key, std::string_view value) {
  auto as_int = [&]() -> int {
    const auto v = csv::parse_int(value);
    if (!v || *v < INT32_MIN || *v > INT32_MAX) {
      throw UsageError(fmt::format("config key '{}': '{}' is not an integer", key, value));
    }
    return static_cast<int>(*v);
  };
  if (key == "chains") {
    chains = as_int();
  } else if (key == "warmup") {
    warmup = as_int();
  } else if (key == "iters") {
    iters = as_int();
  } else if (key == "seed") {
    const auto v = csv::parse_int(value);
    if (!v || *v < 0) throw UsageError(fmt::format("config key 'seed': '{}' is not a nonnegative integer", value));
    seed = static_cast<std::uint64_t>(*v);
  } else if (key == "target_accept") {
    const auto v = csv::parse_double(value);
    if (!v) throw UsageError(fmt::format("config key 'target_accept': '{}' is not a number", value));
    target_accept = *v;
  } else if (key == "max_tree_depth") {
    max_tree_depth = as_int();
  } else if (key == "pi_horizon") {
    pi_horizon = as_int();
  } else if (key == "g_horizon") {
    g_horizon = as_int();
  } else if (key == "output_dir") {
    output_dir = std::string(value);
  } else if (key == "countries") {
    countries.clear();
    std::string item;
    std::istringstream in{std::string(value)};
    while (std::getline(in, item, ',')) {
      const auto first = item.find_first_not_of(" \t");
      const auto last = item.find_last_not_of(" \t");
      if (first != std::string::npos) countries.push_back(item.substr(first, last - first + 1));
    }
  } else {
    throw UsageError(fmt::format(
        "unknown config key '{}' (known: chains, warmup, iters, seed, target_accept, "
        "max_tree_depth, pi_horizon, g_horizon, output_dir, countries)",
        key));
  }
}

RunConfig parse_run_config(std::istream& in, const std::string& source) {
  RunConfig config;
  std::string line;
  std::size_t number = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(fmt::format("{} line {}: expected key=value", source, number));
    }
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw UsageError(fmt::format("{} line {}: key '{}' given twice", source, number, key));
    }
    try {
      config.set(key, value);
    } catch (const UsageError& e) {
      throw UsageError(fmt::format("{} line {}: {}", source, number, e.what()));
    }
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot open config file {}", path));
  return parse_run_config(in, path);
}

void write_run_config(std::ostream& out, const RunConfig& c) {
  out << fmt::format("chains={}\nwarmup={}\niters={}\nseed={}\ntarget_accept={:.17g}\n"
                     "max_tree_depth={}\npi_horizon={}\ng_horizon={}\n",
                     c.chains, c.warmup, c.iters, c.seed, c.target_accept, c.max_tree_depth,
                     c.pi_horizon, c.g_horizon);
  if (!c.output_dir.empty()) out << "output_dir=" << c.output_dir << '\n';
  if (!c.countries.empty()) out << fmt::format("countries={}\n", fmt::join(c.countries, ","));
}

// ---------------------------------------------------------------------------
// Assembly.

Assembled assemble_inputs(const std::vector<DeathsRecord>& deaths,
                          const std::vector<InterventionRecord>& interventions,
                          const std::vector<CountryMeta>& meta, const AgeTables* age_tables,
                          const RunConfig& config) {
  std::map<std::string, std::vector<std::pair<Date, std::int64_t>>> series;
  for (const auto& r : deaths) series[r.country].push_back({r.date, r.deaths});
  std::map<std::string, const CountryMeta*> meta_by_country;
  for (const auto& m : meta) meta_by_country[m.country] = &m;
  std::map<std::string, std::map<int, Date>> dates;
  for (const auto& r : interventions) {
    auto [it, fresh] = dates[r.country].emplace(r.intervention, r.date);
    if (!fresh) {
      throw AssemblyError(fmt::format("{} has two start dates for intervention {}", r.country,
                                      intervention_key(r.intervention)));
    }
  }

  std::vector<std::string> selected = config.countries;
  if (selected.empty()) {
    for (const auto& [name, s] : series) selected.push_back(name);
  }
  std::vector<std::string> missing;
  for (const auto& name : selected) {
    if (!series.contains(name)) missing.push_back(fmt::format("{} (no deaths data)", name));
    if (!meta_by_country.contains(name)) missing.push_back(fmt::format("{} (no country_meta row)", name));
  }
  if (!missing.empty()) {
    throw AssemblyError(fmt::format("countries missing from the input tables: {}", fmt::join(missing, ", ")));
  }
  if (std::set<std::string>(selected.begin(), selected.end()).size() != selected.size()) {
    throw AssemblyError("country include-list has duplicates");
  }

  Assembled out;
  auto inputs = std::make_shared<model::ModelInputs>();
  inputs->pi = stats::infection_to_death_pmf(config.pi_horizon);
  inputs->g = stats::generation_pmf(config.g_horizon);
  for (const auto& w : inputs->pi.warnings) out.warnings.push_back("infection-to-death delay: " + w);
  for (const auto& w : inputs->g.warnings) out.warnings.push_back("generation interval: " + w);

  for (const auto& [country, days] : dates) {
    if (!series.contains(country)) {
      out.warnings.push_back(fmt::format("interventions for {} ignored: no deaths data", country));
    }
  }

  for (const auto& name : selected) {
    auto rows = series.at(name);
    std::sort(rows.begin(), rows.end());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto gap = (rows[i].first - rows[i - 1].first).count();
      if (gap != 1) {
        throw AssemblyError(fmt::format("{}: deaths dates {} and {} are not consecutive", name,
                                        format_date(rows[i - 1].first), format_date(rows[i].first)));
      }
    }
    std::vector<std::int64_t> observed;
    observed.reserve(rows.size());
    for (const auto& [d, y] : rows) observed.push_back(y);

    epi::EpidemicStart start{};
    try {
      start = epi::epidemic_start_index(observed, name);
    } catch (const InputError& e) {
      out.warnings.push_back(fmt::format("{} excluded: {}", name, e.what()));
      out.excluded.push_back(name);
      continue;
    }
    if (start.likelihood_start > static_cast<int>(observed.size())) {
      out.warnings.push_back(fmt::format(
          "{} excluded: reaches {} cumulative deaths only on its last observed day", name,
          epi::kDeathThreshold));
      out.excluded.push_back(name);
      continue;
    }

    model::CountryData c;
    c.name = name;
    c.day_zero = rows.front().first + days{start.seeding_start - 1};
    const int n_days = static_cast<int>(observed.size()) - start.seeding_start + 1;
    c.deaths.assign(static_cast<std::size_t>(n_days), 0);
    for (int d = 1; d <= n_days; ++d) {
      const int idx = start.seeding_start - 1 + d - 1;
      if (idx >= 0) c.deaths[static_cast<std::size_t>(d - 1)] = observed[static_cast<std::size_t>(idx)];
    }
    if (start.padding() > 0) {
      out.warnings.push_back(fmt::format("{}: {} zero-death day(s) padded before the first data row",
                                         name, start.padding()));
    }
    c.likelihood_start = start.likelihood_start - start.seeding_start + 1;
    if (auto it = dates.find(name); it != dates.end()) c.intervention_dates = it->second;
    c.schedule = epi::build_indicator_matrix(c.intervention_dates, c.day_zero, n_days);
    for (const auto& w : c.schedule.warnings()) out.warnings.push_back(fmt::format("{}: {}", name, w));

    const CountryMeta& m = *meta_by_country.at(name);
    c.population = static_cast<double>(m.population);
    c.ifr_mean = m.ifr_mean;
    if (age_tables != nullptr) {
      if (auto it = age_tables->find(name); it != age_tables->end()) {
        const double adjusted = epi::adjust_ifr(it->second).country;
        out.warnings.push_back(fmt::format(
            "{}: ifr_mean {:.6g} from the age table replaces the country_meta value {:.6g}", name,
            adjusted, m.ifr_mean));
        c.ifr_mean = adjusted;
      }
    }
    if (!(c.ifr_mean > 0.0 && c.ifr_mean < 1.0)) {
      throw AssemblyError(fmt::format("{}: ifr_mean {} is outside (0, 1)", name, c.ifr_mean));
    }
    inputs->countries.push_back(std::move(c));
  }
  if (inputs->countries.empty()) {
    throw AssemblyError("no country reaches the death threshold; nothing to fit");
  }
  out.inputs = std::move(inputs);
  return out;
}

// ---------------------------------------------------------------------------
// Writers.

void write_deaths(std::ostream& out, const std::vector<DeathsRecord>& records) {
  out << "country,date,deaths\n";
  for (const auto& r : records) {
    out << csv::escape(r.country) << ',' << format_date(r.date) << ',' << r.deaths << '\n';
  }
}

void write_interventions(std::ostream& out, const std::vector<InterventionRecord>& records) {
  out << "country,intervention,date\n";
  for (const auto& r : records) {
    out << csv::escape(r.country) << ',' << intervention_key(r.intervention) << ','
        << format_date(r.date) << '\n';
  }
}

void write_country_meta(std::ostream& out, const std::vector<CountryMeta>& records) {
  out << "country,population,ifr_mean\n";
  for (const auto& r : records) {
    out << fmt::format("{},{},{:.17g}\n", csv::escape(r.country), r.population, r.ifr_mean);
  }
}

void write_age_table(std::ostream& out, const AgeTables& tables) {
  out << "country,age_group,attack_rate,ifr_prime,population\n";
  for (const auto& [country, t] : tables) {
    for (const auto& r : t.rows) {
      out << fmt::format("{},{},{:.17g},{:.17g},{:.17g}\n", csv::escape(country),
                         csv::escape(r.age_group), r.attack_rate, r.ifr_prime, r.population);
    }
  }
}

std::vector<DeathsRecord> deaths_records(const model::ModelInputs& inputs) {
  std::vector<DeathsRecord> out;
  for (const auto& c : inputs.countries) {
    for (int d = 0; d < c.n_days(); ++d) {
      out.push_back({c.name, c.day_zero + days{d}, c.deaths[static_cast<std::size_t>(d)]});
    }
  }
  return out;
}

std::vector<InterventionRecord> intervention_records(const model::ModelInputs& inputs) {
  std::vector<InterventionRecord> out;
  for (const auto& c : inputs.countries) {
    for (const auto& [k, date] : c.intervention_dates) out.push_back({c.name, k, date});
  }
  return out;
}

std::vector<CountryMeta> country_meta_records(const model::ModelInputs& inputs) {
  std::vector<CountryMeta> out;
  for (const auto& c : inputs.countries) {
    out.push_back({c.name, static_cast<std::int64_t>(std::llround(c.population)), c.ifr_mean});
  }
  return out;
}

}  // namespace epinuts::dataio
