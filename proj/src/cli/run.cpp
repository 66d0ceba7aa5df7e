#include <CLI11.hpp>
#include <fmt/format.h>

#include <ostream>

#include "epinuts/cli.hpp"

namespace epinuts::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian estimation of intervention effects from death counts"};
  app.name("epinuts");
  app.require_subcommand(1, 1);

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the joint model by NUTS and write posterior summaries");
  fit_cmd->add_option("--deaths", fit.deaths, "Deaths CSV (country,date,deaths)")->required();
  fit_cmd->add_option("--interventions", fit.interventions, "Interventions CSV (country,intervention,date)")
      ->required();
  fit_cmd->add_option("--country-meta", fit.country_meta, "Country CSV (country,population,ifr_mean)")->required();
  fit_cmd->add_option("--age-table", fit.age_table, "Age CSV used to adjust each country's IFR");
  fit_cmd->add_option("--config", fit.config, "Run configuration (key=value lines)");
  fit_cmd->add_option("--chains", fit.chains);
  fit_cmd->add_option("--warmup", fit.warmup);
  fit_cmd->add_option("--iters", fit.iters, "Post-warmup draws per chain");
  fit_cmd->add_option("--seed", fit.seed);
  fit_cmd->add_option("--target-accept", fit.target_accept);
  fit_cmd->add_option("--output-dir", fit.output_dir);
  fit_cmd->add_flag("--r0-noncentered", fit.r0_noncentered, "Sample R0 through a standard normal offset");
  fit_cmd->add_flag("--beta-centered", fit.beta_centered, "Sample country lockdown effects directly");
  fit_cmd->add_flag("--quiet", fit.quiet, "No progress output");

  PriorCheckOptions prior;
  auto* prior_cmd = app.add_subcommand("prior-check", "Monte Carlo check of the intervention-effect priors");
  prior_cmd->add_option("--draws", prior.draws, "Number of prior draws (at least 10000)");
  prior_cmd->add_option("--seed", prior.seed);
  prior_cmd->add_option("--output-dir", prior.output_dir);

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate deaths from a scenario file");
  sim_cmd->add_option("--scenario,scenario", sim.scenario, "Scenario (key=value lines)")->required();
  sim_cmd->add_option("--seed", sim.seed);
  sim_cmd->add_option("--output-dir", sim.output_dir);

  SummarizeOptions summ;
  auto* summ_cmd = app.add_subcommand("summarize", "Recompute summary.csv from posterior_samples.csv");
  summ_cmd->add_option("--samples,samples", summ.samples, "posterior_samples.csv from a fit")->required();
  summ_cmd->add_option("--output-dir", summ.output_dir, "Defaults to the samples file's directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  CommandOutcome outcome;
  if (*fit_cmd) {
    outcome = cmd_fit(fit, out);
  } else if (*prior_cmd) {
    outcome = cmd_prior_check(prior, out);
  } else if (*sim_cmd) {
    outcome = cmd_simulate(sim, out);
  } else {
    outcome = cmd_summarize(summ, out);
  }

  if (!outcome.artifacts.empty()) {
    out << fmt::format("wrote {} files under {}\n", outcome.artifacts.size(),
                       outcome.artifacts.front().parent_path().string());
  }
  if (!outcome.message.empty()) (outcome.exit_code == kSuccess ? out : err) << outcome.message << '\n';
  return outcome.exit_code;
}

}  // namespace epinuts::cli
