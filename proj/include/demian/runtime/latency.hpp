#pragma once

// Instructor latency models. Samples are whole nanoseconds, never negative.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <variant>
#include <vector>

#include "demian/error.hpp"
#include "demian/rng.hpp"

namespace demian {

using Nanos = std::chrono::nanoseconds;

inline Nanos seconds_to_nanos(double s) { return Nanos(std::llround(s * 1e9)); }
inline double nanos_to_seconds(Nanos n) { return static_cast<double>(n.count()) * 1e-9; }

struct ConstantLatency {
  double seconds = 0.0;
};

struct GaussianLatency {
  double mean = 0.0;
  double stddev = 0.0;
};

struct EmpiricalLatency {
  std::vector<double> samples;
};

class LatencyModel {
 public:
  LatencyModel() = default;
  LatencyModel(ConstantLatency c) : v_(c) { check(); }
  LatencyModel(GaussianLatency g) : v_(g) { check(); }
  LatencyModel(EmpiricalLatency e) : v_(std::move(e)) { check(); }

  Nanos sample(Rng& rng) const {
    double s = 0.0;
    if (const auto* c = std::get_if<ConstantLatency>(&v_)) {
      s = c->seconds;
    } else if (const auto* g = std::get_if<GaussianLatency>(&v_)) {
      s = std::max(0.0, rng.normal(g->mean, g->stddev));
    } else {
      const auto& xs = std::get<EmpiricalLatency>(v_).samples;
      s = xs[rng.below(xs.size())];
    }
    return seconds_to_nanos(s);
  }

  std::string describe() const {
    char buf[64];
    if (const auto* c = std::get_if<ConstantLatency>(&v_)) {
      std::snprintf(buf, sizeof(buf), "constant:%g", c->seconds);
      return buf;
    }
    if (const auto* g = std::get_if<GaussianLatency>(&v_)) {
      std::snprintf(buf, sizeof(buf), "gaussian:%g,%g", g->mean, g->stddev);
      return buf;
    }
    std::string out = "empirical:";
    const auto& xs = std::get<EmpiricalLatency>(v_).samples;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s%g", i ? "," : "", xs[i]);
      out += buf;
    }
    return out;
  }

 private:
  void check() const {
    if (const auto* c = std::get_if<ConstantLatency>(&v_)) {
      if (!(c->seconds >= 0.0)) throw ValidationError("constant latency must be >= 0");
    } else if (const auto* g = std::get_if<GaussianLatency>(&v_)) {
      if (!(g->stddev >= 0.0) || !std::isfinite(g->mean)) throw ValidationError("gaussian latency needs stddev >= 0");
    } else {
      const auto& xs = std::get<EmpiricalLatency>(v_).samples;
      if (xs.empty()) throw ValidationError("empirical latency needs at least one sample");
      for (double x : xs) {
        if (!(x >= 0.0)) throw ValidationError("empirical latency samples must be >= 0");
      }
    }
  }

  std::variant<ConstantLatency, GaussianLatency, EmpiricalLatency> v_;
};

namespace detail {

inline std::vector<double> parse_numbers(const std::string& csv, const std::string& spec) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const auto comma = csv.find(',', pos);
    const auto item = csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) throw ValidationError("bad latency spec '" + spec + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace detail

// "constant:1.86", "gaussian:1.87,0.05", "empirical:1.2,1.9,2.4"
inline LatencyModel parse_latency(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ValidationError("bad latency spec '" + spec + "'");
  const auto kind = spec.substr(0, colon);
  const auto args = detail::parse_numbers(spec.substr(colon + 1), spec);
  if (kind == "constant" && args.size() == 1) return ConstantLatency{args[0]};
  if (kind == "gaussian" && args.size() == 2) return GaussianLatency{args[0], args[1]};
  if (kind == "empirical") return EmpiricalLatency{args};
  throw ValidationError("bad latency spec '" + spec + "'");
}

}  // namespace demian
