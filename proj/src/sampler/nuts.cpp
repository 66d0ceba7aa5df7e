#include "epinuts/nuts.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fmt/format.h>
#include <limits>
#include <optional>
#include <random>
#include <thread>

#include "epinuts/error.hpp"

namespace epinuts::sampler {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void add_to(std::vector<double>& acc, std::span<const double> x) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

std::vector<double> sum_of(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  add_to(out, b);
  return out;
}

bool no_u_turn(std::span<const double> p_sharp_minus, std::span<const double> p_sharp_plus,
               std::span<const double> rho) {
  return dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0;
}

bool evaluate(PhasePoint& z, const GradientFn& fn) {
  z.log_density = fn(z.q, z.grad);
  if (!std::isfinite(z.log_density)) return false;
  return std::all_of(z.grad.begin(), z.grad.end(), [](double g) { return std::isfinite(g); });
}

void sample_momentum(PhasePoint& z, std::span<const double> inv_metric, stats::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < z.p.size(); ++i) z.p[i] = normal(rng) / std::sqrt(inv_metric[i]);
}

std::vector<double> p_sharp(std::span<const double> p, std::span<const double> inv_metric) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = inv_metric[i] * p[i];
  return out;
}

double uniform01(stats::Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Recursive trajectory builder; one instance per transition.
class TreeBuilder {
 public:
  TreeBuilder(PhasePoint& z, double eps, std::span<const double> inv_metric, double h0,
              stats::Rng& rng, const GradientFn& fn)
      : z_(z), eps_(eps), inv_metric_(inv_metric), h0_(h0), rng_(rng), fn_(fn) {}

  bool build(int depth, int sign, PhasePoint& propose, std::vector<double>& p_sharp_beg,
             std::vector<double>& p_sharp_end, std::vector<double>& rho, std::vector<double>& p_beg,
             std::vector<double>& p_end, double& log_sum_weight) {
    if (depth == 0) {
      leapfrog(z_, sign * eps_, inv_metric_, fn_);
      ++n_leapfrog;
      double h = hamiltonian(z_, inv_metric_);
      if (std::isnan(h)) h = kInf;
      if (h - h0_ > kMaxEnergyError) divergent = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0_ - h);
      sum_metro_prob += h0_ - h > 0.0 ? 1.0 : std::exp(h0_ - h);
      propose = z_;
      p_sharp_beg = p_sharp(z_.p, inv_metric_);
      p_sharp_end = p_sharp_beg;
      add_to(rho, z_.p);
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent;
    }

    const std::size_t n = z_.q.size();
    double log_sum_weight_init = -kInf;
    std::vector<double> p_init_end(n), p_sharp_init_end(n), rho_init(n, 0.0);
    if (!build(depth - 1, sign, propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end,
               log_sum_weight_init)) {
      return false;
    }

    PhasePoint propose_final = z_;
    double log_sum_weight_final = -kInf;
    std::vector<double> p_final_beg(n), p_sharp_final_beg(n), rho_final(n, 0.0);
    if (!build(depth - 1, sign, propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg,
               p_end, log_sum_weight_final)) {
      return false;
    }

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      propose = std::move(propose_final);
    } else if (uniform01(rng_) < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      propose = std::move(propose_final);
    }

    const std::vector<double> rho_subtree = sum_of(rho_init, rho_final);
    add_to(rho, rho_subtree);
    bool persist = no_u_turn(p_sharp_beg, p_sharp_end, rho_subtree);
    // Extra checks across the boundary between the two halves.
    persist = persist && no_u_turn(p_sharp_beg, p_sharp_final_beg, sum_of(rho_init, p_final_beg));
    persist = persist && no_u_turn(p_sharp_init_end, p_sharp_end, sum_of(rho_final, p_init_end));
    return persist;
  }

  int n_leapfrog = 0;
  double sum_metro_prob = 0.0;
  bool divergent = false;

 private:
  PhasePoint& z_;
  double eps_;
  std::span<const double> inv_metric_;
  double h0_;
  stats::Rng& rng_;
  const GradientFn& fn_;
};

// Doubles or halves eps until one leapfrog step crosses an acceptance of 0.8.
double initial_step_size(const PhasePoint& start, double eps, std::span<const double> inv_metric,
                         stats::Rng& rng, const GradientFn& fn) {
  const double log_target = std::log(0.8);
  auto delta_h = [&](double step) {
    PhasePoint z = start;
    sample_momentum(z, inv_metric, rng);
    const double h0 = hamiltonian(z, inv_metric);
    leapfrog(z, step, inv_metric, fn);
    double h = hamiltonian(z, inv_metric);
    if (std::isnan(h)) h = kInf;
    return h0 - h;
  };
  const int direction = delta_h(eps) > log_target ? 1 : -1;
  while (true) {
    const double dh = delta_h(eps);
    if (direction == 1 && !(dh > log_target)) break;
    if (direction == -1 && !(dh < log_target)) break;
    eps = direction == 1 ? 2.0 * eps : 0.5 * eps;
    if (eps > 1e7) throw DomainError("step size search diverged to", eps);
    if (eps == 0.0) throw DomainError("step size search collapsed to", eps);
  }
  return eps;
}

}  // namespace

ChainError::ChainError(std::size_t chain, const std::string& what)
    : std::runtime_error(fmt::format("chain {}: {}", chain, what)), chain_(chain) {}

void ChainConfig::validate() const {
  if (sampling_iters < 1) throw UsageError("sampling iterations must be at least 1");
  if (warmup_iters < 0) throw UsageError("warmup iterations must be nonnegative");
  if (adapt && warmup_iters < kMinAdaptiveWarmup) {
    throw UsageError(fmt::format("adaptive warmup needs at least {} iterations, got {}",
                                 kMinAdaptiveWarmup, warmup_iters));
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw UsageError(fmt::format("target_accept must lie in (0, 1), got {}", target_accept));
  }
  if (max_tree_depth < 1) throw UsageError("max_tree_depth must be at least 1");
  if (!(init_jitter_scale >= 0.0)) throw UsageError("init_jitter_scale must be nonnegative");
  for (double r : init_radius) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw UsageError("init_radius entries must be finite and nonnegative");
  }
  for (double c : init_center) {
    if (!std::isfinite(c)) throw UsageError("init_center entries must be finite");
  }
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw UsageError("step size must be positive");
}

double kinetic_energy(const PhasePoint& z, std::span<const double> inv_metric) {
  double k = 0.0;
  for (std::size_t i = 0; i < z.p.size(); ++i) k += inv_metric[i] * z.p[i] * z.p[i];
  return 0.5 * k;
}

double hamiltonian(const PhasePoint& z, std::span<const double> inv_metric) {
  if (!std::isfinite(z.log_density)) return kInf;
  return -z.log_density + kinetic_energy(z, inv_metric);
}

bool leapfrog(PhasePoint& z, double eps, std::span<const double> inv_metric, const GradientFn& fn) {
  const std::size_t n = z.q.size();
  for (std::size_t i = 0; i < n; ++i) z.p[i] += 0.5 * eps * z.grad[i];
  for (std::size_t i = 0; i < n; ++i) z.q[i] += eps * inv_metric[i] * z.p[i];
  if (!evaluate(z, fn)) {
    z.log_density = -kInf;
    return false;
  }
  for (std::size_t i = 0; i < n; ++i) z.p[i] += 0.5 * eps * z.grad[i];
  return true;
}

TransitionStats nuts_transition(PhasePoint& z, double eps, std::span<const double> inv_metric,
                                int max_tree_depth, stats::Rng& rng, const GradientFn& fn) {
  const std::size_t n = z.q.size();
  sample_momentum(z, inv_metric, rng);
  const double h0 = hamiltonian(z, inv_metric);

  PhasePoint z_fwd = z;
  PhasePoint z_bck = z;
  PhasePoint z_sample = z;
  PhasePoint z_propose = z;

  std::vector<double> p_fwd_fwd = z.p, p_fwd_bck = z.p, p_bck_fwd = z.p, p_bck_bck = z.p;
  std::vector<double> p_sharp_fwd_fwd = p_sharp(z.p, inv_metric);
  std::vector<double> p_sharp_fwd_bck = p_sharp_fwd_fwd, p_sharp_bck_fwd = p_sharp_fwd_fwd,
                      p_sharp_bck_bck = p_sharp_fwd_fwd;
  std::vector<double> rho = z.p;
  double log_sum_weight = 0.0;

  TransitionStats out;
  int n_leapfrog = 0;
  double sum_metro_prob = 0.0;
  int depth = 0;
  while (depth < max_tree_depth) {
    std::vector<double> rho_fwd(n, 0.0), rho_bck(n, 0.0);
    double log_sum_weight_subtree = -kInf;
    bool valid = false;
    if (uniform01(rng) > 0.5) {
      PhasePoint walker = z_fwd;
      TreeBuilder tb(walker, eps, inv_metric, h0, rng, fn);
      rho_bck = rho;
      p_bck_fwd = p_fwd_bck;
      p_sharp_bck_fwd = p_sharp_fwd_bck;
      valid = tb.build(depth, 1, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                       p_fwd_fwd, log_sum_weight_subtree);
      z_fwd = std::move(walker);
      n_leapfrog += tb.n_leapfrog;
      sum_metro_prob += tb.sum_metro_prob;
      out.divergent = out.divergent || tb.divergent;
    } else {
      PhasePoint walker = z_bck;
      TreeBuilder tb(walker, eps, inv_metric, h0, rng, fn);
      rho_fwd = rho;
      p_fwd_bck = p_bck_fwd;
      p_sharp_fwd_bck = p_sharp_bck_fwd;
      valid = tb.build(depth, -1, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                       p_bck_bck, log_sum_weight_subtree);
      z_bck = std::move(walker);
      n_leapfrog += tb.n_leapfrog;
      sum_metro_prob += tb.sum_metro_prob;
      out.divergent = out.divergent || tb.divergent;
    }
    if (!valid) break;
    ++depth;

    if (log_sum_weight_subtree > log_sum_weight) {
      z_sample = z_propose;
    } else if (uniform01(rng) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
      z_sample = z_propose;
    }
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

    rho = sum_of(rho_bck, rho_fwd);
    bool persist = no_u_turn(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
    persist = persist && no_u_turn(p_sharp_bck_bck, p_sharp_fwd_bck, sum_of(rho_bck, p_fwd_bck));
    persist = persist && no_u_turn(p_sharp_bck_fwd, p_sharp_fwd_fwd, sum_of(rho_fwd, p_bck_fwd));
    if (!persist) break;
  }

  out.tree_depth = depth;
  out.n_leapfrog = n_leapfrog;
  out.accept_stat = n_leapfrog > 0 ? sum_metro_prob / n_leapfrog : 0.0;
  z = std::move(z_sample);
  out.energy = hamiltonian(z, inv_metric);
  return out;
}

DualAveraging::DualAveraging(double target_accept, double gamma, double kappa, double t0)
    : delta_(target_accept), gamma_(gamma), kappa_(kappa), t0_(t0) {}

void DualAveraging::restart(double step_size) {
  mu_ = std::log(10.0 * step_size);
  counter_ = 0.0;
  s_bar_ = 0.0;
  x_bar_ = 0.0;
}

double DualAveraging::learn(double accept_stat) {
  counter_ += 1.0;
  accept_stat = std::min(1.0, accept_stat);
  const double eta = 1.0 / (counter_ + t0_);
  s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
  const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
  const double x_eta = std::pow(counter_, -kappa_);
  x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
  return std::exp(x);
}

double DualAveraging::final_step_size() const { return std::exp(x_bar_); }

WindowedAdaptation::WindowedAdaptation(int warmup_iters, std::size_t dim, int init_buffer,
                                       int term_buffer, int base_window)
    : warmup_(warmup_iters),
      init_buffer_(init_buffer),
      term_buffer_(term_buffer),
      base_window_(base_window),
      mean_(dim, 0.0),
      m2_(dim, 0.0) {
  if (init_buffer_ + term_buffer_ + base_window_ > warmup_) {
    // Short warmups keep the 15% / 75% / 10% proportions.
    init_buffer_ = static_cast<int>(0.15 * warmup_);
    term_buffer_ = static_cast<int>(0.1 * warmup_);
    base_window_ = warmup_ - (init_buffer_ + term_buffer_);
  }
  window_size_ = base_window_;
  next_end_ = init_buffer_ + window_size_ - 1;
}

bool WindowedAdaptation::in_window() const {
  return counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_;
}

bool WindowedAdaptation::end_of_window() const {
  return counter_ == next_end_ && counter_ != warmup_;
}

void WindowedAdaptation::next_window() {
  const int last = warmup_ - term_buffer_ - 1;
  if (next_end_ == last) return;
  window_size_ *= 2;
  next_end_ = counter_ + window_size_;
  if (next_end_ != last) {
    // Stretch the window rather than leave a short final one.
    if (next_end_ + 2 * window_size_ >= warmup_ - term_buffer_) next_end_ = last;
  }
}

std::vector<int> WindowedAdaptation::window_ends() const {
  WindowedAdaptation copy(*this);
  copy.counter_ = 0;
  copy.window_size_ = copy.base_window_;
  copy.next_end_ = copy.init_buffer_ + copy.window_size_ - 1;
  std::vector<int> ends;
  for (; copy.counter_ < copy.warmup_; ++copy.counter_) {
    if (copy.end_of_window()) {
      ends.push_back(copy.counter_);
      copy.next_window();
    }
  }
  return ends;
}

bool WindowedAdaptation::learn_variance(std::span<const double> q, std::vector<double>& inv_metric) {
  if (in_window()) {
    ++n_;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double d = q[i] - mean_[i];
      mean_[i] += d / static_cast<double>(n_);
      m2_[i] += d * (q[i] - mean_[i]);
    }
  }
  if (end_of_window()) {
    next_window();
    const double n = static_cast<double>(n_);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double var = n > 1.0 ? m2_[i] / (n - 1.0) : 0.0;
      inv_metric[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
    }
    n_ = 0;
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(m2_.begin(), m2_.end(), 0.0);
    ++counter_;
    return true;
  }
  ++counter_;
  return false;
}

std::size_t ChainResult::divergences() const {
  return static_cast<std::size_t>(
      std::count_if(stats.begin(), stats.end(), [](const DrawStats& s) { return s.divergent; }));
}

ChainResult run_chain(const ChainConfig& config, const GradientFn& fn, std::size_t dim,
                      const ProgressFn& progress) {
  config.validate();
  const std::size_t chain = config.chain_index;
  stats::Rng rng = stats::make_rng(config.base_seed, chain);

  std::vector<double> inv_metric = config.inv_metric.empty() ? std::vector<double>(dim, 1.0) : config.inv_metric;
  if (inv_metric.size() != dim) throw UsageError("initial inverse metric has the wrong size");

  PhasePoint z;
  z.q.assign(dim, 0.0);
  z.p.assign(dim, 0.0);
  z.grad.assign(dim, 0.0);
  if (!config.init.empty()) {
    if (config.init.size() != dim) throw UsageError("initial point has the wrong size");
    z.q = config.init;
    if (!evaluate(z, fn)) throw ChainError(chain, "log density is not finite at the supplied initial point");
  } else {
    if (!config.init_center.empty() && config.init_center.size() != dim) {
      throw UsageError("init_center has the wrong size");
    }
    if (!config.init_radius.empty() && config.init_radius.size() != dim) {
      throw UsageError("init_radius has the wrong size");
    }
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    bool ok = false;
    for (int attempt = 0; attempt < kMaxInitAttempts && !ok; ++attempt) {
      for (std::size_t i = 0; i < dim; ++i) {
        const double center = config.init_center.empty() ? 0.0 : config.init_center[i];
        const double radius = config.init_radius.empty() ? config.init_jitter_scale : config.init_radius[i];
        z.q[i] = center + radius * unit(rng);
      }
      ok = evaluate(z, fn);
    }
    if (!ok) {
      throw ChainError(chain, config.init_radius.empty() && config.init_center.empty()
                                  ? fmt::format("log density or gradient not finite at {} random initial points "
                                                "in [-{}, {}]",
                                                kMaxInitAttempts, config.init_jitter_scale,
                                                config.init_jitter_scale)
                                  : fmt::format("log density or gradient not finite at {} random initial points "
                                                "in the initialization box",
                                                kMaxInitAttempts));
    }
  }

  ChainResult result;
  result.chain_index = chain;
  result.dim = dim;
  result.init = z.q;
  double eps = config.step_size;

  const int total = config.warmup_iters + config.sampling_iters;
  DualAveraging step_adapt(config.target_accept);
  std::optional<WindowedAdaptation> windows;
  if (config.adapt && config.warmup_iters > 0) {
    eps = initial_step_size(z, eps, inv_metric, rng, fn);
    step_adapt.restart(eps);
    windows.emplace(config.warmup_iters, dim);
  }

  double warmup_accept_sum = 0.0;
  int warmup_accept_count = 0;
  for (int iter = 0; iter < config.warmup_iters; ++iter) {
    const TransitionStats ts = nuts_transition(z, eps, inv_metric, config.max_tree_depth, rng, fn);
    if (windows) {
      if (iter >= windows->init_buffer()) {
        warmup_accept_sum += ts.accept_stat;
        ++warmup_accept_count;
      }
      eps = step_adapt.learn(ts.accept_stat);
      if (windows->learn_variance(z.q, inv_metric)) {
        eps = initial_step_size(z, eps, inv_metric, rng, fn);
        step_adapt.restart(eps);
      }
    }
    if (progress) progress(chain, iter + 1, total);
  }
  if (windows) eps = step_adapt.final_step_size();
  result.warmup_accept = warmup_accept_count > 0 ? warmup_accept_sum / warmup_accept_count : 0.0;

  result.draws.reserve(static_cast<std::size_t>(config.sampling_iters) * dim);
  result.stats.reserve(static_cast<std::size_t>(config.sampling_iters));
  for (int iter = 0; iter < config.sampling_iters; ++iter) {
    const TransitionStats ts = nuts_transition(z, eps, inv_metric, config.max_tree_depth, rng, fn);
    result.draws.insert(result.draws.end(), z.q.begin(), z.q.end());
    result.stats.push_back(
        {ts.accept_stat, ts.tree_depth, ts.n_leapfrog, ts.divergent, ts.energy, z.log_density, eps});
    if (progress) progress(chain, config.warmup_iters + iter + 1, total);
  }
  result.step_size = eps;
  result.inv_metric = std::move(inv_metric);
  return result;
}

std::vector<ChainResult> run_chains(const ChainConfig& config, std::size_t n_chains,
                                    const GradientFactory& factory, std::size_t dim,
                                    const ProgressFn& progress, std::size_t max_threads) {
  if (n_chains < 1) throw UsageError("need at least one chain");
  config.validate();
  std::vector<ChainResult> results(n_chains);
  std::vector<std::exception_ptr> errors(n_chains);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n_chains; i = next++) {
      try {
        ChainConfig c = config;
        c.chain_index = i;
        results[i] = run_chain(c, factory(), dim, progress);
      } catch (const ChainError&) {
        errors[i] = std::current_exception();
      } catch (const std::exception& e) {
        errors[i] = std::make_exception_ptr(ChainError(i, e.what()));
      }
    }
  };
  std::size_t threads = max_threads > 0 ? max_threads : n_chains;
  threads = std::min(threads, n_chains);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace epinuts::sampler
