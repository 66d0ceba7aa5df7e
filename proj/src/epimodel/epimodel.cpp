#include "epinuts/epimodel.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace epinuts::epi {

InterventionSchedule::InterventionSchedule(int n_days) : n_days_(n_days) {
  if (n_days < 1) throw InputError("intervention schedule needs at least one day");
  for (auto& r : rows_) r.assign(static_cast<std::size_t>(n_days), 0);
}

void InterventionSchedule::switch_on(int k, int day) {
  if (k < 1 || k > kInterventionCount || k == static_cast<int>(Intervention::AnyGovernment)) {
    throw UsageError(fmt::format("intervention {} cannot be set directly", k));
  }
  const int first = std::max(day, 1);
  auto& r = rows_[static_cast<std::size_t>(k - 1)];
  for (int t = first; t <= n_days_; ++t) r[static_cast<std::size_t>(t - 1)] = 1;
  derive_any_intervention();
}

void InterventionSchedule::derive_any_intervention() {
  auto& any = rows_[static_cast<std::size_t>(index_of(Intervention::AnyGovernment))];
  for (std::size_t t = 0; t < any.size(); ++t) {
    std::uint8_t v = 0;
    for (int k = 1; k <= kInterventionCount; ++k) {
      if (k == static_cast<int>(Intervention::AnyGovernment)) continue;
      v |= rows_[static_cast<std::size_t>(k - 1)][t];
    }
    any[t] = v;
  }
}

InterventionSchedule build_indicator_matrix(const std::map<int, int>& start_days, int n_days) {
  InterventionSchedule schedule(n_days);
  for (const auto& [k, day] : start_days) {
    if (day < 1) {
      schedule.add_warning(fmt::format(
          "intervention {} started {} day(s) before the model axis; treated as in effect from day 1",
          k, 1 - day));
    }
    if (day <= n_days) schedule.switch_on(k, day);
  }
  return schedule;
}

InterventionSchedule build_indicator_matrix(const std::map<int, std::chrono::sys_days>& dates,
                                            std::chrono::sys_days model_start, int n_days) {
  std::map<int, int> days;
  for (const auto& [k, date] : dates) days[k] = static_cast<int>((date - model_start).count()) + 1;
  return build_indicator_matrix(days, n_days);
}

AdjustedIfr adjust_ifr(const AgeTable& table) {
  const auto ref = std::find_if(table.rows.begin(), table.rows.end(), [&](const AgeRow& r) {
    return r.age_group == table.reference_group;
  });
  if (ref == table.rows.end()) {
    throw InputError(fmt::format("age table lacks the reference group '{}'", table.reference_group));
  }
  AdjustedIfr out;
  out.per_age.reserve(table.rows.size());
  double deaths = 0.0;
  double infections = 0.0;
  for (const AgeRow& r : table.rows) {
    if (!(r.attack_rate > 0.0)) {
      throw InputError(fmt::format("attack rate for age group '{}' must be positive", r.age_group));
    }
    const double ifr = ref->attack_rate / r.attack_rate * r.ifr_prime;
    out.per_age.push_back(ifr);
    const double infected = r.population * r.attack_rate;
    deaths += ifr * infected;
    infections += infected;
  }
  if (!(infections > 0.0)) throw InputError("age table has no infected population");
  out.country = deaths / infections;
  return out;
}

EpidemicStart epidemic_start_index(std::span<const std::int64_t> deaths, const std::string& country) {
  std::int64_t cumulative = 0;
  for (std::size_t i = 0; i < deaths.size(); ++i) {
    cumulative += deaths[i];
    if (cumulative >= kDeathThreshold) {
      const int likelihood_start = static_cast<int>(i) + 2;
      return {likelihood_start, likelihood_start - kSeedingLeadDays};
    }
  }
  throw InputError(fmt::format("country '{}' never reaches {} cumulative deaths ({} observed)",
                               country, kDeathThreshold, cumulative));
}

}  // namespace epinuts::epi
