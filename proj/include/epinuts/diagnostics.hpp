#pragma once

// Rank-normalized split-Rhat and bulk effective sample size.

#include <span>
#include <string>
#include <vector>

#include "epinuts/nuts.hpp"

namespace epinuts::sampler {

// A diagnostic value; NaN with a note when it cannot be computed.
struct Diagnostic {
  double value;
  std::string note;

  bool ok() const;
};

// Each inner vector holds one chain's draws of a single coordinate.
using ChainDraws = std::vector<std::vector<double>>;

// Maximum of the rank-normalized bulk and folded (tail) split-Rhat.
Diagnostic split_rhat(const ChainDraws& chains);
// Effective sample size of the rank-normalized split chains.
Diagnostic ess_bulk(const ChainDraws& chains);

// Plain split-Rhat and ESS without rank normalization.
double split_rhat_basic(const ChainDraws& chains);
double ess_basic(const ChainDraws& chains);

ChainDraws coordinate_draws(std::span<const ChainResult> chains, std::size_t coordinate);

}  // namespace epinuts::sampler
