#pragma once

#include <span>

namespace epinuts {

// log|Gamma(x)|; reentrant (does not touch the global signgam).
double lgamma(double x);

// d/dx log Gamma(x). Recurrence up to x >= 10, then the asymptotic series.
double digamma(double x);

inline double square(double x) { return x * x; }

inline double select(bool take_first, double first, double second) {
  return take_first ? first : second;
}

double sum(std::span<const double> xs);
double dot(std::span<const double> xs, std::span<const double> ys);

}  // namespace epinuts
