#pragma once

// Command implementations behind the epinuts executable.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epinuts/dataio.hpp"

namespace epinuts::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kDataError = 2,
  kSamplingFailure = 3,
  kDiagnosticsWarning = 4,
};

inline constexpr double kRhatWarning = 1.05;
inline constexpr const char* kOutputDirEnv = "EPINUTS_OUTPUT_DIR";

struct CommandOutcome {
  int exit_code = kSuccess;
  std::vector<std::filesystem::path> artifacts;
  std::string message;
};

struct FitOptions {
  std::string deaths;
  std::string interventions;
  std::string country_meta;
  std::string age_table;  // optional
  std::string config;     // optional key=value file
  std::optional<int> chains;
  std::optional<int> warmup;
  std::optional<int> iters;
  std::optional<std::uint64_t> seed;
  std::optional<double> target_accept;
  std::string output_dir;
  bool r0_noncentered = false;
  bool beta_centered = false;
  bool quiet = false;
};

struct PriorCheckOptions {
  std::int64_t draws = 200000;
  std::uint64_t seed = 1;
  std::string output_dir;
};

struct SimulateOptions {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
};

struct SummarizeOptions {
  std::string samples;
  // Defaults to the directory holding the samples file.
  std::string output_dir;
};

// Output directory precedence: flag, then the config file, then the
// environment variable, then ./epinuts_output.
std::filesystem::path resolve_output_dir(const std::string& flag, const std::string& from_config = {});

CommandOutcome cmd_fit(const FitOptions& options, std::ostream& log);
CommandOutcome cmd_prior_check(const PriorCheckOptions& options, std::ostream& log);
CommandOutcome cmd_simulate(const SimulateOptions& options, std::ostream& log);
CommandOutcome cmd_summarize(const SummarizeOptions& options, std::ostream& log);

// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// ---------------------------------------------------------------------------
// Pieces shared with tests and the Python module.

struct ParameterSummary {
  std::string name;
  double mean, sd, q5, q50, q95, rhat, ess_bulk;
  std::string note;
};

// draws[chain][draw][parameter]
using DrawTable = std::vector<std::vector<std::vector<double>>>;

std::vector<ParameterSummary> summarize(const std::vector<std::string>& names, const DrawTable& draws);
std::string summary_csv(const std::vector<ParameterSummary>& rows);

// Linear interpolation between order statistics (type 7).
double quantile(std::vector<double> values, double p);

// Prior draws behind `prior-check`: exp(-alpha_1), exp(-alpha_5 - beta),
// exp(-sum alpha) and exp(-sum alpha - beta), with beta ~ N(0, gamma).
struct PriorDraws {
  std::vector<double> single;
  std::vector<double> lockdown;
  std::vector<double> joint;
  std::vector<double> joint_beta;
  // Fraction of draws with alpha_k < 0, k = 1..6.
  std::array<double, 6> p_alpha_negative{};
};

PriorDraws draw_prior_effects(std::int64_t draws, std::uint64_t seed);

// Kolmogorov-Smirnov distance between the sample and Uniform[0, upper].
double ks_uniform(std::vector<double> sample, double upper);

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

// Writes files under a staging directory and moves them into place only on
// commit(); destruction without commit removes everything staged.
class StagedOutput {
 public:
  explicit StagedOutput(std::filesystem::path target);
  ~StagedOutput();
  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;

  // Path relative to the target directory; parent directories are created.
  std::filesystem::path write(const std::filesystem::path& relative, std::string_view contents);
  std::filesystem::path staged(const std::filesystem::path& relative) const { return staging_ / relative; }
  // Returns the final paths of all written files.
  std::vector<std::filesystem::path> commit();
  const std::filesystem::path& target() const { return target_; }

 private:
  std::filesystem::path target_;
  std::filesystem::path staging_;
  std::vector<std::filesystem::path> files_;
  bool committed_ = false;
};

// Scenario for `simulate`: global keys give defaults, each `country=NAME`
// line opens a block whose keys override them.
struct ScenarioCountry {
  std::string name;
  dataio::Date start_date = std::chrono::sys_days{std::chrono::year{2020} / 2 / 1};
  int days = 120;
  double r0 = 3.0;
  double population = 1e7;
  double ifr = 0.01;
  double seed_infections = 10.0;
  double beta = 0.0;
  // Start dates by intervention number.
  std::map<int, dataio::Date> dates;
};

struct Scenario {
  std::uint64_t seed = 1;
  double psi = 5.0;
  // Fractional Rt reductions by intervention number (k = 4 allowed); the
  // effect parameter is -log(1 - reduction).
  std::map<int, double> reductions;
  std::vector<ScenarioCountry> countries;
};

Scenario parse_scenario(std::istream& in, const std::string& source = "scenario");

}  // namespace epinuts::cli
