#pragma once

// Deterministic forward model: intervention indicators, time-varying
// reproduction number, renewal equation with susceptible depletion, and
// expected deaths.

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "epinuts/error.hpp"
#include "epinuts/special.hpp"
#include "epinuts/stats.hpp"
#include "epinuts/tape.hpp"

namespace epinuts::epi {

inline constexpr int kInterventionCount = 6;
inline constexpr int kSeedDays = 6;
inline constexpr int kSeedingLeadDays = 30;
inline constexpr std::int64_t kDeathThreshold = 10;

// 1-based intervention numbering; k = 4 is derived, never supplied.
enum class Intervention : int {
  SchoolsUniversities = 1,
  SelfIsolatingIfIll = 2,
  PublicEvents = 3,
  AnyGovernment = 4,
  Lockdown = 5,
  SocialDistancingEncouraged = 6,
};

inline constexpr int index_of(Intervention k) { return static_cast<int>(k) - 1; }

// Indicator matrix over model days 1..n. Row 4 is always the OR of the others.
class InterventionSchedule {
 public:
  InterventionSchedule() = default;
  explicit InterventionSchedule(int n_days);

  int n_days() const { return n_days_; }
  // k in 1..6, day in 1..n.
  bool on(int k, int day) const {
    return rows_[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(day - 1)] != 0;
  }
  std::span<const std::uint8_t> row(int k) const { return rows_[static_cast<std::size_t>(k - 1)]; }

  // Switches intervention k on from `day` (1-based) onwards; days <= 1
  // switch it on for the whole axis. Recomputes row 4.
  void switch_on(int k, int day);

  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  friend bool operator==(const InterventionSchedule& a, const InterventionSchedule& b) {
    return a.n_days_ == b.n_days_ && a.rows_ == b.rows_;
  }

 private:
  void derive_any_intervention();

  int n_days_ = 0;
  std::array<std::vector<std::uint8_t>, kInterventionCount> rows_;
  std::vector<std::string> warnings_;
};

// Start day per intervention k in {1,2,3,5,6}, 1-based on the model axis.
// Values <= 0 mean "already in effect before the axis begins".
InterventionSchedule build_indicator_matrix(const std::map<int, int>& start_days, int n_days);

// Same, from calendar dates.
InterventionSchedule build_indicator_matrix(const std::map<int, std::chrono::sys_days>& dates,
                                            std::chrono::sys_days model_start, int n_days);

// R[t] = R0 * exp(-sum_k alpha_k I_k[t] - beta I_5[t]).
template <class T>
std::vector<T> compute_rt(const T& r0, std::span<const T> alphas, const T& beta,
                          const InterventionSchedule& schedule) {
  using std::exp;
  if (alphas.size() != kInterventionCount) throw UsageError("compute_rt needs six effects");
  const int n = schedule.n_days();
  std::vector<T> rt;
  rt.reserve(static_cast<std::size_t>(n));
  // Indicators are piecewise constant; reuse R across days with the same pattern.
  std::uint32_t previous_mask = UINT32_MAX;
  for (int day = 1; day <= n; ++day) {
    std::uint32_t mask = 0;
    for (int k = 1; k <= kInterventionCount; ++k) mask |= schedule.on(k, day) ? (1u << k) : 0u;
    if (mask == previous_mask) {
      rt.push_back(rt.back());
      continue;
    }
    previous_mask = mask;
    if (mask == 0) {
      rt.push_back(r0);
      continue;
    }
    bool first = true;
    T exponent{};
    auto accumulate = [&](const T& term) {
      exponent = first ? term : exponent + term;
      first = false;
    };
    for (int k = 1; k <= kInterventionCount; ++k) {
      if (schedule.on(k, day)) accumulate(alphas[static_cast<std::size_t>(k - 1)]);
    }
    if (schedule.on(index_of(Intervention::Lockdown) + 1, day)) accumulate(beta);
    rt.push_back(r0 * exp(-exponent));
  }
  return rt;
}

template <class T>
struct Trajectory {
  std::vector<T> infections;
  std::vector<T> susceptible;
  // True when cumulative infections hit the population and were truncated.
  bool clamped = false;
};

struct RenewalOptions {
  bool depletion = true;
};

// Renewal equation. Days 1..seeds.size() are the seeds verbatim; afterwards
// c[t] = S[t] R[t] sum_{tau<t} c[tau] g[t - tau], S[t] = 1 - sum_{i<t} c[i] / N.
template <class T>
Trajectory<T> simulate_infections(std::span<const T> seeds, std::span<const T> rt,
                                  const stats::DelayPMF& g, double population,
                                  RenewalOptions options = {}) {
  if (!(population > 0.0)) throw InputError("population must be positive");
  if (seeds.empty() || seeds.size() > rt.size()) {
    throw InputError("seed days must be between 1 and the number of modelled days");
  }
  double seed_total = 0.0;
  for (const T& s : seeds) {
    if (!(value_of(s) >= 0.0)) throw InputError("seed infections must be nonnegative");
    seed_total += value_of(s);
  }
  if (seed_total > population) throw InputError("seed infections exceed the population");

  const std::size_t n = rt.size();
  const std::size_t horizon = static_cast<std::size_t>(g.horizon());
  // g reversed so that the weights for a contiguous window of past days are
  // themselves contiguous: weight of c[tau] on day t is g_{t - tau}.
  const std::vector<double> g_reversed(g.weights.rbegin(), g.weights.rend());

  Trajectory<T> out;
  Series<T> infections(g_reversed);
  out.susceptible.reserve(n);
  T cumulative = seeds[0] * 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    // After a clamp the population is exhausted and every later day is zero
    // whatever the parameters; constants keep huge, exactly cancelling
    // adjoints off the tape.
    if (out.clamped) {
      out.susceptible.push_back(seeds[0] * 0.0);
      infections.push(seeds[0] * 0.0);
      continue;
    }
    T s = options.depletion ? 1.0 - cumulative / population : cumulative * 0.0 + 1.0;
    if (value_of(s) < 0.0) s = select(true, cumulative * 0.0, s);
    out.susceptible.push_back(s);
    if (t < seeds.size()) {
      infections.push(seeds[t]);
    } else {
      const std::size_t lo = t > horizon ? t - horizon : 0;
      const std::size_t len = t - lo;
      T c = s * rt[t] * infections.window_sum(lo, len, horizon - len);
      if (options.depletion) {
        const double remaining = population - value_of(cumulative);
        const bool overflow = value_of(c) > remaining;
        if (overflow) {
          out.clamped = true;
          c = population - cumulative;
        }
        if (value_of(c) < 0.0) c = select(true, cumulative * 0.0, c);
      }
      infections.push(c);
    }
    cumulative = cumulative + infections.back();
  }
  out.infections = infections.take();
  return out;
}

// d[t] = ifr* sum_{tau<t} c[tau] pi_{t - tau}; d[1] = 0.
template <class T, class F>
std::vector<T> expected_deaths(std::span<const T> infections, const F& ifr_star,
                               const stats::DelayPMF& pi) {
  const std::size_t n = infections.size();
  const std::size_t horizon = static_cast<std::size_t>(pi.horizon());
  const std::vector<double> pi_reversed(pi.weights.rbegin(), pi.weights.rend());
  Series<T> series(pi_reversed);
  for (const T& c : infections) series.push(c);
  std::vector<T> deaths;
  deaths.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (t == 0) {
      deaths.push_back(infections[0] * 0.0);
      continue;
    }
    const std::size_t lo = t > horizon ? t - horizon : 0;
    const std::size_t len = t - lo;
    deaths.push_back(ifr_star * series.window_sum(lo, len, horizon - len));
  }
  return deaths;
}

template <class T>
double attack_rate(std::span<const T> infections, double population) {
  double total = 0.0;
  for (const T& c : infections) total += value_of(c);
  return total / population;
}

// ---------------------------------------------------------------------------
// Infection fatality ratio adjustment by age-specific attack rates.

struct AgeRow {
  std::string age_group;
  double attack_rate;
  double ifr_prime;
  double population;
};

struct AgeTable {
  std::vector<AgeRow> rows;
  std::string reference_group = "50-59";
};

struct AdjustedIfr {
  std::vector<double> per_age;
  // Expected deaths over expected infections.
  double country;
};

AdjustedIfr adjust_ifr(const AgeTable& table);

// ---------------------------------------------------------------------------

struct EpidemicStart {
  // 1-based index into the observed series: first day entering the likelihood.
  int likelihood_start;
  // 1-based index into the observed series where the model axis begins;
  // may be <= 0, in which case 1 - seeding_start zero days are padded.
  int seeding_start;

  int padding() const { return seeding_start < 1 ? 1 - seeding_start : 0; }
};

EpidemicStart epidemic_start_index(std::span<const std::int64_t> deaths,
                                   const std::string& country = "");

}  // namespace epinuts::epi
