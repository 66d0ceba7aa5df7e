#pragma once

// Multinomial no-U-turn sampler with dual-averaging step size and windowed
// diagonal metric adaptation.

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epinuts/posterior.hpp"
#include "epinuts/stats.hpp"

namespace epinuts::sampler {

using model::GradientFn;

inline constexpr double kMaxEnergyError = 1000.0;
inline constexpr int kMinAdaptiveWarmup = 150;
inline constexpr int kMaxInitAttempts = 50;

// Raised when a chain cannot start or its sampler breaks down.
class ChainError : public std::runtime_error {
 public:
  ChainError(std::size_t chain, const std::string& what);
  std::size_t chain() const { return chain_; }

 private:
  std::size_t chain_;
};

struct ChainConfig {
  int warmup_iters = 1000;
  int sampling_iters = 1000;
  double target_accept = 0.95;
  int max_tree_depth = 12;
  std::uint64_t base_seed = 1;
  std::size_t chain_index = 0;
  double init_jitter_scale = 2.0;
  // Random starts are drawn uniformly from init_center +- init_radius per
  // coordinate; empty means 0 and init_jitter_scale.
  std::vector<double> init_center;
  std::vector<double> init_radius;
  bool adapt = true;
  // Starting step size; adaptation replaces it with a tuned value.
  double step_size = 1.0;
  // Starting point; drawn from the jitter box when empty.
  std::vector<double> init;
  // Starting inverse metric (variances); ones when empty.
  std::vector<double> inv_metric;

  void validate() const;
};

// Position, momentum, and cached log density and gradient.
struct PhasePoint {
  std::vector<double> q;
  std::vector<double> p;
  std::vector<double> grad;
  double log_density = 0.0;
};

double kinetic_energy(const PhasePoint& z, std::span<const double> inv_metric);
// Potential plus kinetic; +inf when the log density is not finite.
double hamiltonian(const PhasePoint& z, std::span<const double> inv_metric);

// One leapfrog step of size eps (negative to integrate backwards). Returns
// false when the new log density or gradient is not finite.
bool leapfrog(PhasePoint& z, double eps, std::span<const double> inv_metric, const GradientFn& fn);

struct TransitionStats {
  double accept_stat = 0.0;
  int tree_depth = 0;
  int n_leapfrog = 0;
  bool divergent = false;
  double energy = 0.0;
};

// One multinomial NUTS transition from z.q (z.grad and z.log_density must
// be current). Leaves the selected state in z.
TransitionStats nuts_transition(PhasePoint& z, double eps, std::span<const double> inv_metric,
                                int max_tree_depth, stats::Rng& rng, const GradientFn& fn);

class DualAveraging {
 public:
  explicit DualAveraging(double target_accept, double gamma = 0.05, double kappa = 0.75,
                         double t0 = 10.0);

  void restart(double step_size);
  // Returns the next step size given the last accept statistic.
  double learn(double accept_stat);
  double final_step_size() const;

 private:
  double delta_;
  double gamma_;
  double kappa_;
  double t0_;
  double mu_ = 0.0;
  double counter_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
};

// Warmup schedule: an initial fast buffer, doubling slow windows for the
// metric, and a terminal fast buffer.
class WindowedAdaptation {
 public:
  WindowedAdaptation(int warmup_iters, std::size_t dim, int init_buffer = 75, int term_buffer = 50,
                     int base_window = 25);

  // Feeds the position after warmup iteration `counter`; returns true when a
  // window closed and inv_metric was updated.
  bool learn_variance(std::span<const double> q, std::vector<double>& inv_metric);

  bool in_window() const;
  int init_buffer() const { return init_buffer_; }
  int term_buffer() const { return term_buffer_; }
  // Closing iterations of the slow windows, in order.
  std::vector<int> window_ends() const;

 private:
  bool end_of_window() const;
  void next_window();

  int warmup_;
  int init_buffer_;
  int term_buffer_;
  int base_window_;
  int counter_ = 0;
  int window_size_;
  int next_end_;
  // Welford accumulators.
  std::size_t n_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

struct DrawStats {
  double accept_stat;
  int tree_depth;
  int n_leapfrog;
  bool divergent;
  double energy;
  double log_density;
  double step_size;
};

struct ChainResult {
  std::size_t chain_index = 0;
  std::size_t dim = 0;
  // sampling_iters x dim, row-major, unconstrained.
  std::vector<double> draws;
  std::vector<DrawStats> stats;
  std::vector<double> init;
  double step_size = 0.0;
  std::vector<double> inv_metric;
  // Mean accept statistic over warmup iterations after the initial buffer.
  double warmup_accept = 0.0;

  std::size_t n_draws() const { return stats.size(); }
  std::span<const double> draw(std::size_t i) const { return {draws.data() + i * dim, dim}; }
  std::size_t divergences() const;
};

// Called as (chain, iteration, total iterations); may run on worker threads.
using ProgressFn = std::function<void(std::size_t, int, int)>;

ChainResult run_chain(const ChainConfig& config, const GradientFn& fn, std::size_t dim,
                      const ProgressFn& progress = {});

// Builds a fresh gradient function (with its own tape) for one chain.
using GradientFactory = std::function<GradientFn()>;

// Runs chains 0..n_chains-1 on worker threads; chain i uses seed base_seed + i.
// Results are indexed by chain and do not depend on scheduling.
std::vector<ChainResult> run_chains(const ChainConfig& config, std::size_t n_chains,
                                    const GradientFactory& factory, std::size_t dim,
                                    const ProgressFn& progress = {}, std::size_t max_threads = 0);

}  // namespace epinuts::sampler
