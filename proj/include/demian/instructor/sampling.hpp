#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>

#include "demian/instructor/reward_table.hpp"
#include "demian/rng.hpp"

namespace demian {

// Sampled target: an aspect, or nullopt for abstention (empty caption).
using Target = std::optional<AspectKind>;

struct AspectDistribution {
  AspectScores p{};
  double abstain = 0.0;

  bool abstains() const { return abstain >= 1.0; }

  // Highest-probability outcome; ties go to the earlier aspect.
  Target mode() const {
    if (abstains()) return std::nullopt;
    std::size_t best = 0;
    for (std::size_t k = 1; k < kNumAspects; ++k) {
      if (p[k] > p[best]) best = k;
    }
    return kAllAspects[best];
  }

  Target sample(Rng& rng) const {
    if (abstains()) return std::nullopt;
    const double u = rng.uniform();
    double acc = 0.0;
    std::optional<std::size_t> last;
    for (std::size_t k = 0; k < kNumAspects; ++k) {
      if (p[k] <= 0.0) continue;
      acc += p[k];
      last = k;
      if (u < acc) return kAllAspects[k];
    }
    return kAllAspects[*last];
  }
};

// Strict underperformance: every aspect below the task's baseline.
inline bool should_abstain(const RewardTable& rt, const std::string& task) {
  const auto& w = rt.w(task);
  return *std::max_element(w.begin(), w.end()) < rt.baseline(task);
}

// Aspect indices ordered by descending score, listing order among ties.
inline std::array<std::size_t, kNumAspects> rank_aspects(const AspectScores& w) {
  std::array<std::size_t, kNumAspects> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
  return order;
}

inline AspectDistribution aspect_distribution(const RewardTable& rt, const std::string& task,
                                              double temperature = 2.0, int top_k = 3) {
  if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0");
  if (top_k < 1 || top_k > static_cast<int>(kNumAspects)) throw ValidationError("top_k must be in [1, 4]");
  AspectDistribution d;
  if (should_abstain(rt, task)) {
    d.abstain = 1.0;
    return d;
  }
  const auto& w = rt.w(task);
  const auto order = rank_aspects(w);
  const double top = w[order[0]];
  double z = 0.0;
  for (int i = 0; i < top_k; ++i) {
    const auto k = order[static_cast<std::size_t>(i)];
    d.p[k] = std::exp((w[k] - top) / temperature);
    z += d.p[k];
  }
  for (auto& v : d.p) v /= z;
  return d;
}

inline Target top1_target(const RewardTable& rt, const std::string& task) {
  if (should_abstain(rt, task)) return std::nullopt;
  return kAllAspects[rank_aspects(rt.w(task))[0]];
}

}  // namespace demian
