#pragma once

#include <cmath>

#include "demian/rng.hpp"

namespace demian {

// Exponential backoff: base * factor^attempt, scaled by a uniform jitter
// factor in [1 - jitter, 1 + jitter].
struct BackoffPolicy {
  double base_seconds = 1.0;
  double factor = 2.0;
  double jitter = 0.2;

  double nominal(int attempt) const { return base_seconds * std::pow(factor, attempt); }

  double delay(int attempt, Rng& rng) const {
    return nominal(attempt) * rng.uniform(1.0 - jitter, 1.0 + jitter);
  }
};

}  // namespace demian
