#pragma once

// Ingestion of the CSV interchange formats, run configuration, and assembly
// of per-country model inputs.

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "epinuts/epimodel.hpp"
#include "epinuts/error.hpp"
#include "epinuts/posterior.hpp"

namespace epinuts::dataio {

using Date = std::chrono::sys_days;

// One problem found while reading a file. line is 1-based (the header is
// line 1); 0 means the problem concerns the file as a whole.
struct Violation {
  std::size_t line = 0;
  std::string field;
  std::string message;
};

// Ingestion failure listing every violation found, not just the first.
class IngestionError : public InputError {
 public:
  IngestionError(std::string source, std::vector<Violation> violations);
  const std::string& source() const { return source_; }
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::string source_;
  std::vector<Violation> violations_;
};

// The include-list or the tables disagree about which countries exist.
class AssemblyError : public InputError {
 public:
  using InputError::InputError;
};

// ISO-8601 calendar date (YYYY-MM-DD); nullopt when malformed or invalid.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(Date d);

struct DeathsRecord {
  std::string country;
  Date date;
  std::int64_t deaths;
  friend bool operator==(const DeathsRecord&, const DeathsRecord&) = default;
};

struct InterventionRecord {
  std::string country;
  int intervention;  // 1, 2, 3, 5 or 6
  Date date;
  friend bool operator==(const InterventionRecord&, const InterventionRecord&) = default;
};

struct CountryMeta {
  std::string country;
  std::int64_t population;
  double ifr_mean;
  friend bool operator==(const CountryMeta&, const CountryMeta&) = default;
};

// Age tables keyed by country.
using AgeTables = std::map<std::string, epi::AgeTable>;

// Intervention keys accepted in input, in numbering order.
const std::vector<std::pair<std::string, int>>& intervention_keys();
std::optional<int> intervention_number(std::string_view key);
std::string intervention_key(int k);

std::vector<DeathsRecord> parse_deaths(std::istream& in, const std::string& source = "deaths");
std::vector<InterventionRecord> parse_interventions(std::istream& in,
                                                    const std::string& source = "interventions");
std::vector<CountryMeta> parse_country_meta(std::istream& in,
                                            const std::string& source = "country_meta");
AgeTables parse_age_table(std::istream& in, const std::string& source = "age_table");

std::vector<DeathsRecord> load_deaths(const std::string& path);
std::vector<InterventionRecord> load_interventions(const std::string& path);
std::vector<CountryMeta> load_country_meta(const std::string& path);
AgeTables load_age_table(const std::string& path);

struct RunConfig {
  int chains = 4;
  int warmup = 1000;
  int iters = 1000;
  std::uint64_t seed = 1;
  double target_accept = 0.95;
  int max_tree_depth = 12;
  int pi_horizon = stats::kDefaultDeathHorizon;
  int g_horizon = stats::kDefaultGenerationHorizon;
  std::string output_dir;
  // Empty means every country with data.
  std::vector<std::string> countries;

  // Throws UsageError when a field is outside the sampler's ranges.
  void validate() const;
  // Sets one field from its textual value; throws UsageError on unknown
  // keys or unparsable values.
  void set(std::string_view key, std::string_view value);
};

// key=value lines; '#' starts a comment; countries is comma-separated.
RunConfig parse_run_config(std::istream& in, const std::string& source = "config");
RunConfig load_run_config(const std::string& path);
void write_run_config(std::ostream& out, const RunConfig& config);

struct Assembled {
  std::shared_ptr<model::ModelInputs> inputs;
  std::vector<std::string> warnings;
  std::vector<std::string> excluded;
};

// Aligns every country to its model axis: the axis starts 30 days before
// the first likelihood day, zero-padding deaths before the data begins.
// Countries never reaching 10 cumulative deaths are dropped with a warning.
// age_tables may be null; when given, its aggregate IFR replaces the meta value.
Assembled assemble_inputs(const std::vector<DeathsRecord>& deaths,
                          const std::vector<InterventionRecord>& interventions,
                          const std::vector<CountryMeta>& meta, const AgeTables* age_tables,
                          const RunConfig& config);

// Writers for the interchange formats. Deaths and interventions are written
// on the model axis, so reloading and reassembling reproduces the inputs.
void write_deaths(std::ostream& out, const std::vector<DeathsRecord>& records);
void write_interventions(std::ostream& out, const std::vector<InterventionRecord>& records);
void write_country_meta(std::ostream& out, const std::vector<CountryMeta>& records);
void write_age_table(std::ostream& out, const AgeTables& tables);

std::vector<DeathsRecord> deaths_records(const model::ModelInputs& inputs);
std::vector<InterventionRecord> intervention_records(const model::ModelInputs& inputs);
std::vector<CountryMeta> country_meta_records(const model::ModelInputs& inputs);

}  // namespace epinuts::dataio
