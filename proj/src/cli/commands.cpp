#include <fmt/chrono.h>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "../dataio/csv.hpp"
#include "epinuts/cli.hpp"
#include "epinuts/diagnostics.hpp"
#include "epinuts/error.hpp"
#include "epinuts/nuts.hpp"
#include "epinuts/posterior.hpp"
#include "epinuts/svg.hpp"
#include "json.hpp"

namespace epinuts::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr std::int64_t kMinPriorDraws = 10000;
constexpr double kKsThreshold = 0.005;
constexpr double kAlphaNegativeLo = 0.46;
constexpr double kAlphaNegativeHi = 0.50;
constexpr double kUniformUpper = 1.05;

std::string num(double v) { return fmt::format("{:.17g}", v); }

// Maps exceptions onto the exit-code table.
CommandOutcome guarded(const std::function<CommandOutcome()>& body) {
  CommandOutcome failed;
  try {
    return body();
  } catch (const UsageError& e) {
    failed = {kUsageError, {}, e.what()};
  } catch (const dataio::IngestionError& e) {
    std::string msg = e.what();
    for (const auto& v : e.violations()) {
      msg += fmt::format("\n  {}: line {}{}: {}", e.source(), v.line, v.field.empty() ? "" : ", " + v.field,
                         v.message);
    }
    failed = {kDataError, {}, msg};
  } catch (const InputError& e) {
    failed = {kDataError, {}, e.what()};
  } catch (const DomainError& e) {
    failed = {kDataError, {}, e.what()};
  } catch (const sampler::ChainError& e) {
    failed = {kSamplingFailure, {}, fmt::format("sampling failed: {}", e.what())};
  } catch (const fs::filesystem_error& e) {
    failed = {kDataError, {}, e.what()};
  } catch (const std::exception& e) {
    failed = {kDataError, {}, e.what()};
  }
  return failed;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_stem_for(const std::string& country, std::map<std::string, int>& used) {
  std::string s;
  for (char c : country) s.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  if (s.empty()) s = "country";
  const int n = ++used[s];
  return n == 1 ? s : fmt::format("{}_{}", s, n);
}

// ---------------------------------------------------------------------------
// Per-country interval tables and the plots drawn from them.

struct IntervalSeries {
  std::string country;
  std::vector<std::string> dates;
  std::vector<double> day, observed, median, lower95, upper95, lower50, upper50;
};

struct IntervalRow {
  double median, lower95, upper95, lower50, upper50;
};

IntervalRow intervals(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return {quantile(v, 0.5), quantile(v, 0.025), quantile(v, 0.975), quantile(v, 0.25), quantile(v, 0.75)};
}

std::vector<IntervalSeries> read_interval_csv(const fs::path& path, bool with_observed) {
  std::ifstream in(path, std::ios::binary);
  std::vector<dataio::Violation> violations;
  std::vector<std::string> cols = {"country", "date", "day"};
  if (with_observed) cols.emplace_back("observed");
  for (const char* c : {"median", "lower95", "upper95", "lower50", "upper50"}) cols.emplace_back(c);
  const auto table = dataio::csv::read(in, cols, violations);
  if (!violations.empty()) throw dataio::IngestionError(path.string(), violations);

  std::vector<IntervalSeries> out;
  auto value = [&](const dataio::csv::Row& r, std::size_t col) {
    const auto v = dataio::csv::parse_double(r.fields[table.columns[col]]);
    if (!v) throw InputError(fmt::format("{}: line {}: bad number", path.string(), r.line));
    return *v;
  };
  for (const auto& r : table.rows) {
    const std::string& country = r.fields[table.columns[0]];
    if (out.empty() || out.back().country != country) {
      out.emplace_back();
      out.back().country = country;
    }
    auto& s = out.back();
    std::size_t col = 2;
    s.dates.push_back(r.fields[table.columns[1]]);
    s.day.push_back(value(r, col++));
    if (with_observed) s.observed.push_back(value(r, col++));
    s.median.push_back(value(r, col++));
    s.lower95.push_back(value(r, col++));
    s.upper95.push_back(value(r, col++));
    s.lower50.push_back(value(r, col++));
    s.upper50.push_back(value(r, col++));
  }
  return out;
}

svg::Chart interval_chart(const IntervalSeries& s, const std::string& title, const std::string& y_label,
                          const std::string& color) {
  svg::Chart c;
  c.title = title;
  c.y_label = y_label;
  c.x = s.day;
  c.x_labels = s.dates;
  c.bands.push_back({s.lower95, s.upper95, color, 0.2, "95% credible interval"});
  c.bands.push_back({s.lower50, s.upper50, color, 0.35, "50% credible interval"});
  c.lines.push_back({s.median, color, 1.5, false, "posterior median"});
  return c;
}

// ---------------------------------------------------------------------------
// fit

CommandOutcome fit_impl(const FitOptions& o, std::ostream& log) {
  dataio::RunConfig config;
  if (!o.config.empty()) config = dataio::load_run_config(o.config);
  if (o.chains) config.chains = *o.chains;
  if (o.warmup) config.warmup = *o.warmup;
  if (o.iters) config.iters = *o.iters;
  if (o.seed) config.seed = *o.seed;
  if (o.target_accept) config.target_accept = *o.target_accept;
  config.validate();
  if (o.deaths.empty() || o.interventions.empty() || o.country_meta.empty()) {
    throw UsageError("fit needs --deaths, --interventions and --country-meta");
  }
  const fs::path out_dir = resolve_output_dir(o.output_dir, config.output_dir);

  const auto deaths = dataio::load_deaths(o.deaths);
  const auto interventions = dataio::load_interventions(o.interventions);
  const auto meta = dataio::load_country_meta(o.country_meta);
  std::optional<dataio::AgeTables> ages;
  if (!o.age_table.empty()) ages = dataio::load_age_table(o.age_table);
  const auto assembled = dataio::assemble_inputs(deaths, interventions, meta, ages ? &*ages : nullptr, config);
  for (const auto& w : assembled.warnings) log << "warning: " << w << '\n';

  const model::ModelOptions model_options{o.r0_noncentered, !o.beta_centered};
  const model::Posterior posterior(assembled.inputs, model_options);
  const auto& inputs = posterior.inputs();

  sampler::ChainConfig cc;
  cc.warmup_iters = config.warmup;
  cc.sampling_iters = config.iters;
  cc.target_accept = config.target_accept;
  cc.max_tree_depth = config.max_tree_depth;
  cc.base_seed = config.seed;
  auto box = posterior.init_box(cc.init_jitter_scale);
  cc.init_center = std::move(box.center);
  cc.init_radius = std::move(box.radius);
  std::mutex log_mutex;
  sampler::ProgressFn progress;
  if (!o.quiet) {
    progress = [&](std::size_t chain, int iter, int total) {
      const int step = std::max(1, total / 10);
      if (iter % step != 0 && iter != total) return;
      std::lock_guard lock(log_mutex);
      log << fmt::format("chain {}: iteration {}/{}{}\n", chain + 1, iter, total,
                         iter <= config.warmup ? " (warmup)" : "");
      log.flush();
    };
  }
  const auto chains = sampler::run_chains(
      cc, static_cast<std::size_t>(config.chains), [&] { return posterior.make_gradient_fn(); },
      posterior.dim(), progress);

  // Constrained draws and generated quantities.
  const auto names = posterior.parameter_names();
  const std::size_t n_countries = inputs.countries.size();
  DrawTable table(chains.size());
  std::vector<std::vector<std::vector<double>>> rt(n_countries), mu(n_countries);
  for (std::size_t m = 0; m < n_countries; ++m) {
    const auto n = static_cast<std::size_t>(inputs.countries[m].n_days());
    rt[m].resize(n);
    mu[m].resize(n);
  }
  std::size_t divergent = 0, total_draws = 0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    divergent += chains[c].divergences();
    for (std::size_t i = 0; i < chains[c].n_draws(); ++i) {
      const auto params = posterior.unpack(chains[c].draw(i)).params;
      table[c].push_back(posterior.flatten(params));
      const auto gq = posterior.generated_quantities(params);
      for (std::size_t m = 0; m < n_countries; ++m) {
        for (std::size_t t = 0; t < rt[m].size(); ++t) {
          rt[m][t].push_back(gq[m].rt[t]);
          mu[m][t].push_back(gq[m].expected_deaths[t]);
        }
      }
      ++total_draws;
    }
  }

  StagedOutput staged(out_dir);

  std::string samples = "chain,draw";
  for (const auto& n : names) samples += "," + dataio::csv::escape(n);
  samples += '\n';
  for (std::size_t c = 0; c < table.size(); ++c) {
    for (std::size_t i = 0; i < table[c].size(); ++i) {
      samples += fmt::format("{},{}", c + 1, i + 1);
      for (double v : table[c][i]) samples += "," + num(v);
      samples += '\n';
    }
  }
  staged.write("posterior_samples.csv", samples);

  const auto summary = summarize(names, table);
  staged.write("summary.csv", summary_csv(summary));

  std::string rt_csv = "country,date,day,median,lower95,upper95,lower50,upper50\n";
  std::string mu_csv = "country,date,day,observed,median,lower95,upper95,lower50,upper50\n";
  for (std::size_t m = 0; m < n_countries; ++m) {
    const auto& cd = inputs.countries[m];
    const std::string country = dataio::csv::escape(cd.name);
    for (std::size_t t = 0; t < rt[m].size(); ++t) {
      const std::string date = dataio::format_date(cd.day_zero + std::chrono::days{static_cast<int>(t)});
      const auto r = intervals(std::move(rt[m][t]));
      const auto d = intervals(std::move(mu[m][t]));
      rt_csv += fmt::format("{},{},{},{},{},{},{},{}\n", country, date, t + 1, num(r.median), num(r.lower95),
                            num(r.upper95), num(r.lower50), num(r.upper50));
      mu_csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", country, date, t + 1, cd.deaths[t], num(d.median),
                            num(d.lower95), num(d.upper95), num(d.lower50), num(d.upper50));
    }
  }
  staged.write("rt_timeseries.csv", rt_csv);
  staged.write("expected_deaths.csv", mu_csv);

  // Plots read back the staged tables.
  const auto rt_series = read_interval_csv(staged.staged("rt_timeseries.csv"), false);
  const auto mu_series = read_interval_csv(staged.staged("expected_deaths.csv"), true);
  std::map<std::string, int> used_stems;
  for (std::size_t m = 0; m < rt_series.size() && m < mu_series.size(); ++m) {
    const std::string stem = file_stem_for(rt_series[m].country, used_stems);
    auto deaths_chart = interval_chart(mu_series[m], mu_series[m].country + ": daily deaths", "deaths", "#4c72b0");
    deaths_chart.bars.push_back({mu_series[m].observed, "#b0b0b0", "observed deaths"});
    staged.write(fs::path("plots") / (stem + "_deaths.svg"), svg::render(deaths_chart));

    auto rt_chart = interval_chart(rt_series[m], rt_series[m].country + ": reproduction number", "Rt", "#55a868");
    rt_chart.reference_y = 1.0;
    const auto& cd = inputs.countries[m];
    for (const auto& [k, date] : cd.intervention_dates) {
      const auto it = std::find(rt_series[m].dates.begin(), rt_series[m].dates.end(), dataio::format_date(date));
      if (it == rt_series[m].dates.end()) continue;
      rt_chart.markers.push_back({rt_series[m].day[static_cast<std::size_t>(it - rt_series[m].dates.begin())],
                                  dataio::intervention_key(k)});
    }
    staged.write(fs::path("plots") / (stem + "_rt.svg"), svg::render(rt_chart));
  }

  // Diagnostics.
  double max_rhat = 0.0, min_ess = std::numeric_limits<double>::infinity();
  std::vector<std::string> high_rhat;
  for (const auto& s : summary) {
    if (!std::isnan(s.rhat)) max_rhat = std::max(max_rhat, s.rhat);
    if (!std::isnan(s.ess_bulk)) min_ess = std::min(min_ess, s.ess_bulk);
    if (s.rhat > kRhatWarning) high_rhat.push_back(s.name);
  }

  Json manifest;
  manifest["tool"] = "epinuts";
  manifest["version"] = kVersion;
  manifest["command"] = "fit";
  manifest["created_utc"] =
      fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
  manifest["seed"] = config.seed;
  std::ostringstream config_text;
  dataio::write_run_config(config_text, config);
  manifest["config"] = {
      {"chains", config.chains},           {"warmup", config.warmup},
      {"iters", config.iters},             {"seed", config.seed},
      {"target_accept", config.target_accept}, {"max_tree_depth", config.max_tree_depth},
      {"pi_horizon", config.pi_horizon},   {"g_horizon", config.g_horizon},
      {"countries", config.countries},     {"text", config_text.str()},
  };
  manifest["model"] = {{"r0_noncentered", model_options.r0_noncentered},
                       {"beta_noncentered", model_options.beta_noncentered}};
  Json files = Json::array();
  auto add_input = [&](const char* role, const std::string& path) {
    if (path.empty()) return;
    files.push_back({{"role", role}, {"path", path}, {"sha256", sha256_file(path)}});
  };
  add_input("deaths", o.deaths);
  add_input("interventions", o.interventions);
  add_input("country_meta", o.country_meta);
  add_input("age_table", o.age_table);
  add_input("config", o.config);
  manifest["inputs"] = files;
  Json countries = Json::array();
  for (const auto& cd : inputs.countries) {
    countries.push_back({{"name", cd.name},
                         {"day_zero", dataio::format_date(cd.day_zero)},
                         {"days", cd.n_days()},
                         {"likelihood_start", cd.likelihood_start}});
  }
  manifest["countries"] = countries;
  manifest["excluded"] = assembled.excluded;
  manifest["warnings"] = assembled.warnings;
  Json step_sizes = Json::array();
  for (const auto& ch : chains) step_sizes.push_back(ch.step_size);
  manifest["diagnostics"] = {{"draws", total_draws},
                             {"divergent_transitions", divergent},
                             {"max_rhat", max_rhat},
                             {"min_ess_bulk", std::isfinite(min_ess) ? Json(min_ess) : Json(nullptr)},
                             {"rhat_above_threshold", high_rhat},
                             {"step_sizes", step_sizes}};
  Json artifacts = Json::array();
  for (const char* rel : {"posterior_samples.csv", "summary.csv", "rt_timeseries.csv", "expected_deaths.csv"}) {
    artifacts.push_back({{"path", rel}, {"sha256", sha256_file(staged.staged(rel))}});
  }
  manifest["artifacts"] = artifacts;
  staged.write("run_manifest.json", manifest.dump(2) + "\n");

  CommandOutcome outcome;
  outcome.artifacts = staged.commit();
  log << fmt::format("{} draws, {} divergent transitions ({:.2f}%), max R-hat {:.3f}\n", total_draws, divergent,
                     100.0 * static_cast<double>(divergent) / static_cast<double>(std::max<std::size_t>(1, total_draws)),
                     max_rhat);
  if (!high_rhat.empty()) {
    outcome.exit_code = kDiagnosticsWarning;
    outcome.message = fmt::format("fit completed but R-hat exceeds {} for: {}", kRhatWarning, fmt::join(high_rhat, ", "));
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// prior-check

std::vector<double> empirical_cdf(std::vector<double> sorted, const std::vector<double>& grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  const double n = static_cast<double>(sorted.size());
  for (double x : grid) {
    out.push_back(static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) / n);
  }
  return out;
}

CommandOutcome prior_check_impl(const PriorCheckOptions& o, std::ostream& log) {
  if (o.draws < kMinPriorDraws) throw UsageError(fmt::format("prior-check needs at least {} draws", kMinPriorDraws));
  const fs::path out_dir = resolve_output_dir(o.output_dir);
  auto d = draw_prior_effects(o.draws, o.seed);

  struct Panel {
    const char* column;
    const char* title;
    std::vector<double>* values;
    bool uniform_reference;
  };
  std::vector<Panel> panels = {
      {"single", "Single intervention: exp(-alpha_k)", &d.single, false},
      {"lockdown", "Lockdown with country effect: exp(-alpha_5 - beta)", &d.lockdown, false},
      {"joint", "All interventions: exp(-sum alpha)", &d.joint, true},
      {"joint_beta", "All interventions with country effect: exp(-sum alpha - beta)", &d.joint_beta, true},
  };

  std::vector<double> grid;
  for (int i = 0; i <= 400; ++i) grid.push_back(i / 200.0);
  std::vector<std::vector<double>> cdfs;
  for (auto& p : panels) {
    std::sort(p.values->begin(), p.values->end());
    cdfs.push_back(empirical_cdf(*p.values, grid));
  }
  std::string csv = "x";
  for (const auto& p : panels) csv += fmt::format(",{}", p.column);
  csv += ",uniform\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv += num(grid[i]);
    for (const auto& c : cdfs) csv += "," + num(c[i]);
    csv += "," + num(std::clamp(grid[i] / kUniformUpper, 0.0, 1.0)) + "\n";
  }

  StagedOutput staged(out_dir);
  staged.write("prior_cdf.csv", csv);

  // Plots from the staged table.
  {
    std::ifstream in(staged.staged("prior_cdf.csv"), std::ios::binary);
    std::vector<dataio::Violation> violations;
    std::vector<std::string> cols = {"x", "uniform"};
    for (const auto& p : panels) cols.emplace_back(p.column);
    const auto t = dataio::csv::read(in, cols, violations);
    if (!violations.empty()) throw dataio::IngestionError("prior_cdf.csv", violations);
    std::vector<std::vector<double>> columns(cols.size());
    for (const auto& r : t.rows) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        columns[j].push_back(dataio::csv::parse_double(r.fields[t.columns[j]]).value_or(std::nan("")));
      }
    }
    for (std::size_t j = 0; j < panels.size(); ++j) {
      svg::Chart c;
      c.title = panels[j].title;
      c.y_label = "cumulative probability";
      c.x = columns[0];
      if (panels[j].uniform_reference) c.lines.push_back({columns[1], "#888888", 1.0, true, "Uniform[0, 1.05]"});
      c.lines.push_back({columns[2 + j], "#1f3d7a", 1.5, false, "prior CDF"});
      staged.write(fmt::format("prior_{}.svg", panels[j].column), svg::render(c));
    }
  }

  const double ks = ks_uniform(d.joint, kUniformUpper);
  std::string report;
  bool all_pass = ks < kKsThreshold;
  report += fmt::format("{} ks_uniform_0_1.05 distance={:.6f} threshold={}\n", ks < kKsThreshold ? "PASS" : "FAIL", ks,
                        kKsThreshold);
  bool alpha_pass = true;
  std::string alpha_values;
  for (std::size_t k = 0; k < d.p_alpha_negative.size(); ++k) {
    const double p = d.p_alpha_negative[k];
    alpha_pass = alpha_pass && p >= kAlphaNegativeLo && p <= kAlphaNegativeHi;
    alpha_values += fmt::format("{}{:.4f}", k ? "," : "", p);
  }
  all_pass = all_pass && alpha_pass;
  report += fmt::format("{} p_alpha_negative values={} range=[{},{}]\n", alpha_pass ? "PASS" : "FAIL", alpha_values,
                        kAlphaNegativeLo, kAlphaNegativeHi);
  const auto at = [&](double x) {
    return static_cast<double>(std::upper_bound(d.joint.begin(), d.joint.end(), x) - d.joint.begin()) /
           static_cast<double>(d.joint.size());
  };
  report += fmt::format("INFO joint_cdf_at_0.525={:.6f} joint_cdf_at_1.05={:.6f} draws={} seed={}\n", at(0.525),
                        at(kUniformUpper), o.draws, o.seed);
  staged.write("prior_check.txt", report);
  log << report;

  CommandOutcome outcome;
  outcome.artifacts = staged.commit();
  if (!all_pass) outcome.message = "prior check reported a failing line";
  return outcome;
}

// ---------------------------------------------------------------------------
// simulate

CommandOutcome simulate_impl(const SimulateOptions& o, std::ostream& log) {
  if (o.scenario.empty()) throw UsageError("simulate needs --scenario");
  std::ifstream in(o.scenario, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open scenario '{}'", o.scenario));
  Scenario sc = parse_scenario(in, o.scenario);
  if (o.seed) sc.seed = *o.seed;
  const fs::path out_dir = resolve_output_dir(o.output_dir);

  auto inputs = std::make_shared<model::ModelInputs>();
  inputs->pi = stats::infection_to_death_pmf();
  inputs->g = stats::generation_pmf();
  model::ParameterBlock p;
  for (const auto& [k, r] : sc.reductions) p.alpha[static_cast<std::size_t>(k - 1)] = -std::log1p(-r);
  p.psi = sc.psi;
  for (const auto& c : sc.countries) {
    model::CountryData cd;
    cd.name = c.name;
    cd.deaths.assign(static_cast<std::size_t>(c.days), 0);
    cd.schedule = epi::build_indicator_matrix(c.dates, c.start_date, c.days);
    for (const auto& w : cd.schedule.warnings()) log << fmt::format("warning: {}: {}\n", c.name, w);
    cd.population = c.population;
    cd.ifr_mean = c.ifr;
    cd.likelihood_start = 1;
    cd.day_zero = c.start_date;
    cd.intervention_dates = c.dates;
    inputs->countries.push_back(std::move(cd));
    p.r0.push_back(c.r0);
    p.beta.push_back(c.beta);
    p.ifr_noise.push_back(1.0);
    p.seed.push_back(c.seed_infections);
  }
  const model::Posterior posterior(inputs);
  const auto gq = posterior.generated_quantities(p);
  auto rng = stats::make_rng(sc.seed);
  const auto observed = model::sample_deaths(posterior, p, rng);
  for (std::size_t m = 0; m < observed.size(); ++m) inputs->countries[m].deaths = observed[m];

  std::string sim = "country,date,day,rt,infections,expected_deaths,deaths\n";
  for (std::size_t m = 0; m < gq.size(); ++m) {
    const auto& cd = inputs->countries[m];
    for (std::size_t t = 0; t < gq[m].rt.size(); ++t) {
      sim += fmt::format("{},{},{},{},{},{},{}\n", dataio::csv::escape(cd.name),
                         dataio::format_date(cd.day_zero + std::chrono::days{static_cast<int>(t)}), t + 1,
                         num(gq[m].rt[t]), num(gq[m].infections[t]), num(gq[m].expected_deaths[t]), cd.deaths[t]);
    }
    log << fmt::format("{}: attack rate {:.4f}, {} deaths{}\n", cd.name, gq[m].attack_rate,
                       std::accumulate(cd.deaths.begin(), cd.deaths.end(), std::int64_t{0}),
                       gq[m].clamped ? " (infections reached the population)" : "");
  }

  StagedOutput staged(out_dir);
  staged.write("simulation.csv", sim);
  std::ostringstream deaths, interventions, meta;
  dataio::write_deaths(deaths, dataio::deaths_records(*inputs));
  dataio::write_interventions(interventions, dataio::intervention_records(*inputs));
  dataio::write_country_meta(meta, dataio::country_meta_records(*inputs));
  staged.write("deaths.csv", deaths.str());
  staged.write("interventions.csv", interventions.str());
  staged.write("country_meta.csv", meta.str());
  CommandOutcome outcome;
  outcome.artifacts = staged.commit();
  return outcome;
}

// ---------------------------------------------------------------------------
// summarize

CommandOutcome summarize_impl(const SummarizeOptions& o, std::ostream& log) {
  if (o.samples.empty()) throw UsageError("summarize needs --samples");
  const std::string text = read_file(o.samples);
  std::istringstream in(text);
  std::vector<dataio::Violation> violations;
  const auto table = dataio::csv::read(in, {"chain", "draw"}, violations);
  if (!violations.empty()) throw dataio::IngestionError(o.samples, violations);
  if (table.header.size() < 3 || table.header[0] != "chain" || table.header[1] != "draw") {
    throw dataio::IngestionError(o.samples, {{1, "", "header must be chain,draw followed by parameter columns"}});
  }
  if (!text.empty() && text.back() != '\n') {
    const std::size_t last = table.rows.empty() ? 1 : table.rows.back().line;
    throw dataio::IngestionError(o.samples, {{last, "", fmt::format("row at line {} is truncated", last)}});
  }
  const std::vector<std::string> names(table.header.begin() + 2, table.header.end());

  std::map<std::int64_t, std::vector<std::vector<double>>> by_chain;
  for (const auto& r : table.rows) {
    const auto chain = dataio::csv::parse_int(r.fields[0]);
    const auto draw = dataio::csv::parse_int(r.fields[1]);
    if (!chain || *chain < 1) violations.push_back({r.line, "chain", fmt::format("bad chain '{}'", r.fields[0])});
    if (!draw || *draw < 1) violations.push_back({r.line, "draw", fmt::format("bad draw '{}'", r.fields[1])});
    std::vector<double> values;
    values.reserve(names.size());
    for (std::size_t j = 2; j < r.fields.size(); ++j) {
      const auto v = dataio::csv::parse_double(r.fields[j]);
      if (!v) {
        violations.push_back({r.line, table.header[j], fmt::format("'{}' is not a finite number", r.fields[j])});
        break;
      }
      values.push_back(*v);
    }
    if (chain && draw && values.size() == names.size()) {
      auto& rows = by_chain[*chain];
      if (static_cast<std::int64_t>(rows.size()) + 1 != *draw) {
        violations.push_back({r.line, "draw", fmt::format("draw {} out of sequence for chain {}", *draw, *chain)});
      }
      rows.push_back(std::move(values));
    }
  }
  if (table.rows.empty()) violations.push_back({1, "", "no draws"});
  if (!violations.empty()) throw dataio::IngestionError(o.samples, violations);

  DrawTable draws;
  for (auto& [chain, rows] : by_chain) draws.push_back(std::move(rows));
  for (const auto& c : draws) {
    if (c.size() != draws.front().size()) {
      throw dataio::IngestionError(o.samples, {{1, "chain", "chains have different numbers of draws"}});
    }
  }

  const auto summary = summarize(names, draws);
  const fs::path out_dir = o.output_dir.empty() ? fs::absolute(o.samples).parent_path() : fs::path(o.output_dir);
  StagedOutput staged(out_dir);
  staged.write("summary.csv", summary_csv(summary));
  CommandOutcome outcome;
  outcome.artifacts = staged.commit();

  std::vector<std::string> high;
  double max_rhat = 0.0;
  for (const auto& s : summary) {
    if (!std::isnan(s.rhat)) max_rhat = std::max(max_rhat, s.rhat);
    if (s.rhat > kRhatWarning) high.push_back(s.name);
  }
  log << fmt::format("{} chains x {} draws, {} parameters, max R-hat {:.3f}{}\n", draws.size(),
                     draws.front().size(), names.size(), max_rhat,
                     draws.size() == 1 ? " (single chain: split halves)" : "");
  if (!high.empty()) {
    outcome.exit_code = kDiagnosticsWarning;
    outcome.message = fmt::format("R-hat exceeds {} for: {}", kRhatWarning, fmt::join(high, ", "));
  }
  return outcome;
}

}  // namespace

fs::path resolve_output_dir(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "epinuts_output";
}

PriorDraws draw_prior_effects(std::int64_t draws, std::uint64_t seed) {
  if (draws < 1) throw UsageError("need at least one prior draw");
  PriorDraws d;
  const auto n = static_cast<std::size_t>(draws);
  d.single.reserve(n);
  d.lockdown.reserve(n);
  d.joint.reserve(n);
  d.joint_beta.reserve(n);
  std::array<std::int64_t, 6> negative{};
  auto rng = stats::make_rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 6> alpha{};
    double total = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
      alpha[k] = stats::sample_intervention_effect(rng);
      total += alpha[k];
      if (alpha[k] < 0.0) ++negative[k];
    }
    const double gamma = stats::sample_halfnormal(rng, model::kGammaScale);
    const double beta = stats::sample_normal(rng, 0.0, gamma);
    d.single.push_back(std::exp(-alpha[0]));
    d.lockdown.push_back(std::exp(-alpha[4] - beta));
    d.joint.push_back(std::exp(-total));
    d.joint_beta.push_back(std::exp(-total - beta));
  }
  for (std::size_t k = 0; k < negative.size(); ++k) {
    d.p_alpha_negative[k] = static_cast<double>(negative[k]) / static_cast<double>(n);
  }
  return d;
}

double ks_uniform(std::vector<double> sample, double upper) {
  if (sample.empty()) return std::nan("");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double dist = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = std::clamp(sample[i] / upper, 0.0, 1.0);
    dist = std::max({dist, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return dist;
}

CommandOutcome cmd_fit(const FitOptions& options, std::ostream& log) {
  return guarded([&] { return fit_impl(options, log); });
}

CommandOutcome cmd_prior_check(const PriorCheckOptions& options, std::ostream& log) {
  return guarded([&] { return prior_check_impl(options, log); });
}

CommandOutcome cmd_simulate(const SimulateOptions& options, std::ostream& log) {
  return guarded([&] { return simulate_impl(options, log); });
}

CommandOutcome cmd_summarize(const SummarizeOptions& options, std::ostream& log) {
  return guarded([&] { return summarize_impl(options, log); });
}

}  // namespace epinuts::cli
