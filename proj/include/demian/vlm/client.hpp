#pragma once

// Transport-agnostic VLM client: request/response types, the retrying client
// that owns rate limiting and backoff, and the Transport seam that the HTTP
// and mock back ends implement.

#include <atomic>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "demian/aspect.hpp"
#include "demian/error.hpp"
#include "demian/rng.hpp"
#include "demian/vlm/backoff.hpp"
#include "demian/vlm/clock.hpp"
#include "demian/vlm/rate_limiter.hpp"

namespace demian {

inline constexpr int kDefaultMaxFrames = 10;
inline constexpr int kDefaultMaxOutputTokens = 256;
inline constexpr std::string_view kDefaultModelId = "Qwen3-VL-30B-A3B-Instruct";
inline constexpr const char* kApiKeyEnv = "DEMIAN_API_KEY";

struct VlmRequest {
  std::vector<std::string> frames;  // opaque frame references (URLs or data URIs)
  std::string system_text;
  std::string user_text;
  int max_output_tokens = kDefaultMaxOutputTokens;
  // Routing metadata; not sent over the wire. The mock keys its script on it.
  std::string segment_id;
  std::optional<AspectKind> aspect;
};

struct VlmResponse {
  std::string raw_text;
  int input_tokens = 0;
  int output_tokens = 0;
  double latency = 0.0;  // seconds
};

enum class TransportErrorKind { rate_limited, server, client, timeout, network };

constexpr std::string_view to_string(TransportErrorKind k) {
  switch (k) {
    case TransportErrorKind::rate_limited: return "rate_limited";
    case TransportErrorKind::server: return "server_error";
    case TransportErrorKind::client: return "client_error";
    case TransportErrorKind::timeout: return "timeout";
    case TransportErrorKind::network: return "network_error";
  }
  return "?";
}

class TransportError : public Error {
 public:
  TransportError(TransportErrorKind kind, int status, const std::string& message)
      : Error(std::string(to_string(kind)) + (status ? " (HTTP " + std::to_string(status) + ")" : "") +
              ": " + message),
        kind_(kind),
        status_(status) {}

  TransportErrorKind kind() const { return kind_; }
  int status() const { return status_; }
  // 4xx other than 429 is permanent; everything else may succeed on retry.
  bool retryable() const { return kind_ != TransportErrorKind::client; }

  static TransportError from_status(int status, const std::string& message) {
    if (status == 429) return {TransportErrorKind::rate_limited, status, message};
    if (status >= 500) return {TransportErrorKind::server, status, message};
    return {TransportErrorKind::client, status, message};
  }

 private:
  TransportErrorKind kind_;
  int status_;
};

struct ClientConfig {
  std::string endpoint_url;
  std::string model_id = std::string(kDefaultModelId);
  std::string api_key;  // only ever populated from the environment
  int max_retries = 3;
  double base_backoff = 1.0;
  double backoff_jitter = 0.2;
  double rate_limit = 4.0;  // requests per second
  double timeout = 120.0;   // seconds
  std::uint64_t jitter_seed = 0;

  void validate() const {
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (!(rate_limit > 0)) throw ConfigError("rate_limit must be > 0");
    if (!(timeout > 0)) throw ConfigError("timeout must be > 0");
    if (base_backoff < 0) throw ConfigError("base_backoff must be >= 0");
    if (backoff_jitter < 0 || backoff_jitter >= 1) throw ConfigError("backoff_jitter must be in [0, 1)");
  }

  void load_api_key_from_env() {
    if (const char* key = std::getenv(kApiKeyEnv)) api_key = key;
  }
};

class VlmClient {
 public:
  virtual ~VlmClient() = default;
  virtual VlmResponse complete(const VlmRequest& req) = 0;
  virtual std::string model_id() const = 0;
};

// One attempt against a back end. Throws TransportError on failure.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual VlmResponse send(const VlmRequest& req) = 0;
};

// Wraps a Transport with the shared rate limiter and exponential backoff.
// Safe to share between worker threads.
class RetryingClient final : public VlmClient {
 public:
  RetryingClient(ClientConfig config, std::unique_ptr<Transport> transport, Clock& clock)
      : config_((config.validate(), std::move(config))),
        transport_(std::move(transport)),
        clock_(clock),
        limiter_(config_.rate_limit, clock),
        backoff_{config_.base_backoff, 2.0, config_.backoff_jitter},
        jitter_rng_(config_.jitter_seed) {}

  VlmResponse complete(const VlmRequest& req) override {
    for (int attempt = 0;; ++attempt) {
      const double start = limiter_.acquire();
      ++attempts_;
      try {
        VlmResponse resp = transport_->send(req);
        resp.latency = clock_.now() - start;
        return resp;
      } catch (const TransportError& e) {
        if (!e.retryable() || attempt >= config_.max_retries) throw;
        ++retries_;
        clock_.sleep_for(next_delay(attempt));
      }
    }
  }

  std::string model_id() const override { return config_.model_id; }

  const ClientConfig& config() const { return config_; }
  long attempts() const { return attempts_.load(); }
  long retries() const { return retries_.load(); }

 private:
  double next_delay(int attempt) {
    std::lock_guard lock(rng_mu_);
    return backoff_.delay(attempt, jitter_rng_);
  }

  ClientConfig config_;
  std::unique_ptr<Transport> transport_;
  Clock& clock_;
  RateLimiter limiter_;
  BackoffPolicy backoff_;
  std::mutex rng_mu_;
  Rng jitter_rng_;
  std::atomic<long> attempts_{0};
  std::atomic<long> retries_{0};
};

// Rough completion-token estimate used by the mock (~4 characters per token).
inline int estimate_tokens(std::string_view text) { return static_cast<int>((text.size() + 3) / 4); }

}  // namespace demian
