#pragma once

#include <cmath>
#include <deque>
#include <mutex>

#include "demian/error.hpp"
#include "demian/vlm/clock.hpp"

namespace demian {

// Paces request starts to `rate` per second. Two rules apply together:
// consecutive starts are at least 1/rate apart, and any ceil(rate)+1
// consecutive starts span at least one full second, so no one-second window
// holds more than ceil(rate) starts.
class RateLimiter {
 public:
  RateLimiter(double rate, Clock& clock) : rate_(rate), clock_(clock) {
    if (!(rate > 0)) throw ConfigError("rate_limit must be > 0");
    burst_ = static_cast<std::size_t>(std::ceil(rate));
  }

  // Reserves the next start slot, waits for it, and returns its time.
  double acquire() {
    double slot = 0;
    {
      std::lock_guard lock(mu_);
      slot = clock_.now();
      if (!starts_.empty()) slot = std::max(slot, starts_.back() + 1.0 / rate_);
      if (starts_.size() >= burst_) slot = std::max(slot, starts_.front() + 1.0);
      starts_.push_back(slot);
      while (starts_.size() > burst_) starts_.pop_front();
    }
    clock_.sleep_until(slot);
    return slot;
  }

  double rate() const { return rate_; }

 private:
  double rate_;
  std::size_t burst_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<double> starts_;  // last `burst_` reserved slots
};

}  // namespace demian
