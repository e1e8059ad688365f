#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <mutex>
#include <string>
#include <thread>

namespace demian {

// Seconds-resolution time source. Every timing decision in the client and
// pipeline goes through one of these so tests can run on virtual time.
class Clock {
 public:
  virtual ~Clock() = default;
  // Seconds since the Unix epoch.
  virtual double now() const = 0;
  virtual void sleep_for(double seconds) = 0;
  void sleep_until(double t) {
    const double d = t - now();
    if (d > 0) sleep_for(d);
  }
};

class SystemClock final : public Clock {
 public:
  double now() const override {
    using namespace std::chrono;
    return duration<double>(system_clock::now().time_since_epoch()).count();
  }
  void sleep_for(double seconds) override {
    if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  }
};

// Manually advanced clock. sleep_for advances the shared time instantly.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(double start = 0.0) : now_(start) {}

  double now() const override {
    std::lock_guard lock(mu_);
    return now_;
  }
  void sleep_for(double seconds) override {
    if (seconds > 0) advance(seconds);
  }
  void advance(double seconds) {
    std::lock_guard lock(mu_);
    now_ += seconds;
  }
  void set(double t) {
    std::lock_guard lock(mu_);
    now_ = t;
  }

 private:
  mutable std::mutex mu_;
  double now_;
};

// Never moves; sleeping returns immediately.
class FrozenClock final : public Clock {
 public:
  explicit FrozenClock(double t) : t_(t) {}
  double now() const override { return t_; }
  void sleep_for(double) override {}

 private:
  double t_;
};

// ISO-8601 UTC with millisecond precision, e.g. 2026-01-02T03:04:05.678Z.
inline std::string format_utc(double epoch_seconds) {
  const auto total_ms = static_cast<long long>(std::llround(epoch_seconds * 1000.0));
  std::time_t secs = static_cast<std::time_t>(total_ms / 1000);
  int ms = static_cast<int>(total_ms % 1000);
  if (ms < 0) {
    ms += 1000;
    --secs;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
  return buf;
}

// Inverse of format_utc; also accepts a timestamp without milliseconds.
inline double parse_utc(const std::string& s) {
  std::tm tm{};
  int ms = 0;
  const int n = std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d", &tm.tm_year, &tm.tm_mon,
                            &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &ms);
  if (n < 6) return 0.0;
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  return static_cast<double>(timegm(&tm)) + ms / 1000.0;
}

}  // namespace demian
