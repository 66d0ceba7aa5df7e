#include "epinuts/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numeric>

namespace epinuts::sampler {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMinSplitLength = 4;

double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

ChainDraws split(const ChainDraws& chains) {
  ChainDraws out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

// Normal scores of the pooled average ranks.
ChainDraws rank_normalize(const ChainDraws& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (const auto& c : chains)
    for (double v : c) pooled.emplace_back(v, pooled.size());
  std::sort(pooled.begin(), pooled.end());
  const std::size_t s = pooled.size();
  std::vector<double> rank(s);
  for (std::size_t i = 0; i < s;) {
    std::size_t j = i;
    while (j + 1 < s && pooled[j + 1].first == pooled[i].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[pooled[k].second] = avg;
    i = j + 1;
  }
  const boost::math::normal standard;
  ChainDraws out;
  std::size_t idx = 0;
  for (const auto& c : chains) {
    std::vector<double> z;
    z.reserve(c.size());
    for (std::size_t i = 0; i < c.size(); ++i, ++idx) {
      const double u = (rank[idx] - 0.375) / (static_cast<double>(s) + 0.25);
      z.push_back(boost::math::quantile(standard, u));
    }
    out.push_back(std::move(z));
  }
  return out;
}

ChainDraws fold(const ChainDraws& chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  const auto mid = all.begin() + static_cast<std::ptrdiff_t>(all.size() / 2);
  std::nth_element(all.begin(), mid, all.end());
  double median = *mid;
  if (all.size() % 2 == 0) median = 0.5 * (median + *std::max_element(all.begin(), mid));
  ChainDraws out = chains;
  for (auto& c : out)
    for (double& v : c) v = std::abs(v - median);
  return out;
}

double rhat_of(const ChainDraws& chains) {
  const double n = static_cast<double>(chains.front().size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean(c));
    vars.push_back(variance(c));
  }
  const double w = mean(vars);
  const double b = n * variance(means);
  if (w == 0.0) return b == 0.0 ? kNaN : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

// Geyer's initial monotone sequence estimator over chains of equal length.
double ess_of(const ChainDraws& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  const double nd = static_cast<double>(n);
  std::vector<std::vector<double>> centered;
  std::vector<double> chain_means;
  for (const auto& c : chains) {
    const double mu = mean(c);
    chain_means.push_back(mu);
    std::vector<double> x(c);
    for (double& v : x) v -= mu;
    centered.push_back(std::move(x));
  }
  // Mean over chains of the biased autocovariance at `lag`.
  auto mean_acov = [&](std::size_t lag) {
    double total = 0.0;
    for (const auto& x : centered) {
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += x[i] * x[i + lag];
      total += s / nd;
    }
    return total / static_cast<double>(m);
  };
  const double acov0 = mean_acov(0);
  const double mean_var = acov0 * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += variance(chain_means);
  if (!(var_plus > 0.0)) return kNaN;

  std::vector<double> rho(n, 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  std::size_t t = 1;
  while (t + 3 < n && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t + 1] = rho_even;
      rho[t + 2] = rho_odd;
    }
    t += 2;
  }
  const std::size_t max_t = t >= 3 ? t - 2 : 1;
  if (rho_even > 0.0 && max_t + 1 < n) rho[max_t + 1] = rho_even;
  for (std::size_t k = 1; k + 2 <= max_t; k += 2) {
    if (rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k]) {
      rho[k + 1] = 0.5 * (rho[k - 1] + rho[k]);
      rho[k + 2] = rho[k + 1];
    }
  }
  const double total = static_cast<double>(m) * nd;
  double tau = -1.0 + 2.0 * std::accumulate(rho.begin(), rho.begin() + static_cast<std::ptrdiff_t>(max_t + 1), 0.0);
  if (max_t + 1 < n) tau += rho[max_t + 1];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

// Shared validity checks; returns an explanation when the input is unusable.
std::string check(const ChainDraws& chains) {
  if (chains.empty()) return "no chains";
  const std::size_t n = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n) return "chains have different lengths";
  }
  if (n / 2 < kMinSplitLength) return "need at least 4 draws per split half-chain";
  bool constant = true;
  const double first = chains.front().front();
  for (const auto& c : chains) {
    for (double v : c) {
      if (!std::isfinite(v)) return "draws contain non-finite values";
      constant = constant && v == first;
    }
  }
  if (constant) return "draws are constant";
  return {};
}

}  // namespace

bool Diagnostic::ok() const { return std::isfinite(value); }

Diagnostic split_rhat(const ChainDraws& chains) {
  if (auto why = check(chains); !why.empty()) return {kNaN, why};
  const ChainDraws halves = split(chains);
  const double bulk = rhat_of(rank_normalize(halves));
  const double tail = rhat_of(rank_normalize(fold(halves)));
  double value = std::max(bulk, tail);
  if (std::isnan(bulk) || std::isnan(tail)) value = std::isnan(bulk) ? tail : bulk;
  if (std::isinf(value)) return {value, "within-chain variance is zero"};
  return {value, {}};
}

Diagnostic ess_bulk(const ChainDraws& chains) {
  if (auto why = check(chains); !why.empty()) return {kNaN, why};
  const double ess = ess_of(rank_normalize(split(chains)));
  if (std::isnan(ess)) return {ess, "variance is zero"};
  return {ess, {}};
}

double split_rhat_basic(const ChainDraws& chains) {
  if (!check(chains).empty()) return kNaN;
  return rhat_of(split(chains));
}

double ess_basic(const ChainDraws& chains) {
  if (!check(chains).empty()) return kNaN;
  return ess_of(split(chains));
}

ChainDraws coordinate_draws(std::span<const ChainResult> chains, std::size_t coordinate) {
  ChainDraws out;
  for (const auto& c : chains) {
    std::vector<double> x;
    x.reserve(c.n_draws());
    for (std::size_t i = 0; i < c.n_draws(); ++i) x.push_back(c.draw(i)[coordinate]);
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace epinuts::sampler
