#pragma once

// Inference FLOPs and hosted-price model for caption generation, and the
// compute axis that charges annotation cost to annotated training runs.

#include <vector>

#include "demian/error.hpp"

namespace demian {

struct CostModel {
  double active_params = 3e9;
  double input_tokens = 8200;
  double output_tokens = 150;
  double price_in = 0.13;   // $ per 1e6 input tokens
  double price_out = 0.52;  // $ per 1e6 output tokens

  void validate() const {
    if (!(active_params > 0 && input_tokens > 0 && output_tokens >= 0 && price_in >= 0 && price_out >= 0)) {
      throw ValidationError("cost model: params and input tokens must be > 0, other fields >= 0");
    }
  }
};

inline double flops_per_call(const CostModel& cm) {
  cm.validate();
  return 2.0 * cm.active_params * (cm.input_tokens + cm.output_tokens);
}

inline double dollars_per_call(const CostModel& cm) {
  cm.validate();
  return (cm.input_tokens * cm.price_in + cm.output_tokens * cm.price_out) / 1e6;
}

inline double corpus_flops(const CostModel& cm, double n_clips, double n_aspects) {
  if (n_clips < 0 || n_aspects < 0) throw ValidationError("clip and aspect counts must be >= 0");
  return n_clips * n_aspects * flops_per_call(cm);
}

inline double corpus_dollars(const CostModel& cm, double n_clips, double n_aspects) {
  if (n_clips < 0 || n_aspects < 0) throw ValidationError("clip and aspect counts must be >= 0");
  return n_clips * n_aspects * dollars_per_call(cm);
}

struct ComputePoint {
  double train_flops = 0;
  bool annotated = false;
};

inline std::vector<double> compute_axis(const std::vector<ComputePoint>& points, const CostModel& cm,
                                        double n_clips, double n_aspects) {
  const double offset = corpus_flops(cm, n_clips, n_aspects);
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.train_flops + (p.annotated ? offset : 0.0));
  return out;
}

}  // namespace demian
