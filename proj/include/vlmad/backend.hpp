#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "vlmad/core_types.hpp"
#include "vlmad/prompt.hpp"

namespace vlmad {

// Which client implementation serves a backend_id.
enum class AdapterKind { kMock, kReplay, kOpenAiChat, kGemini };

std::string_view AdapterName(AdapterKind kind);  // "mock", "replay", "openai", "gemini"
AdapterKind ParseAdapter(std::string_view name);

struct BackendConfig {
  std::string backend_id = "mock";
  AdapterKind adapter = AdapterKind::kMock;
  std::string endpoint_url;
  std::string model_name = "mock-oracle";
  std::string api_key_env;  // name of the variable, never the key itself
  double timeout_s = 60.0;
  int max_retries = 3;
  int rate_limit = 60;  // requests per 60 s window
  int max_output_tokens = 256;
  double temperature = 0.0;
  double backoff_base_s = 1.0;
  // Mock oracle decision threshold on mean gray intensity.
  double mock_tau = 10.0;
  // Replay source, or the recording target for record-fixture runs.
  std::string fixture_path;
  // Latency reported by offline backends so their logs stay deterministic.
  double simulated_latency_ms = 1.0;
};

void Validate(const BackendConfig& config);
void to_json(nlohmann::json& j, const BackendConfig& c);
void from_json(const nlohmann::json& j, BackendConfig& c);

struct BackendResponse {
  std::string text;
  std::string request_digest;
  double latency_ms = 0.0;
  int attempt_count = 0;
  bool cached = false;
};

// SHA-256 over backend_id, model_name and the canonical bundle serialization.
// Repeat index k > 0 (score averaging) is appended; k = 0 is the plain
// digest.
std::string RequestDigest(std::string_view backend_id,
                          std::string_view model_name,
                          const PromptBundle& bundle, int repeat = 0);

class Backend {
 public:
  explicit Backend(BackendConfig config) : config_(std::move(config)) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  BackendResponse Query(const PromptBundle& bundle, int repeat = 0) {
    invocations_.fetch_add(1, std::memory_order_relaxed);
    return DoQuery(bundle, repeat);
  }

  const BackendConfig& config() const { return config_; }
  std::uint64_t invocations() const {
    return invocations_.load(std::memory_order_relaxed);
  }

 protected:
  virtual BackendResponse DoQuery(const PromptBundle& bundle, int repeat) = 0;

 private:
  BackendConfig config_;
  std::atomic<std::uint64_t> invocations_{0};
};

// Deterministic stand-in for a vision-language model: compares the mean gray
// intensity of the query and the reference image.
std::string MockOracle(const CanonicalImage& reference,
                       const CanonicalImage& query, double tau);

inline constexpr std::string_view kMockNoReference = "0, no reference available";

class MockBackend final : public Backend {
 public:
  using Backend::Backend;

 protected:
  BackendResponse DoQuery(const PromptBundle& bundle, int repeat) override;
};

struct FixtureEntry {
  std::string digest;
  std::string text;
  std::string backend_id;
  std::string model_name;
  std::string timestamp;  // ISO-8601 UTC
};

void to_json(nlohmann::json& j, const FixtureEntry& e);
void from_json(const nlohmann::json& j, FixtureEntry& e);

// digest -> recorded text, optionally persisted as an append-only
// line-delimited file. Serves both as replay fixture and response cache.
class FixtureStore {
 public:
  FixtureStore() = default;  // in memory only
  // Loads existing entries (if the file exists) and appends new ones to it.
  explicit FixtureStore(std::filesystem::path path);

  std::optional<std::string> Lookup(std::string_view digest) const;
  void Append(FixtureEntry entry);
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, FixtureEntry> entries_;
};

std::string UtcTimestamp();

// Returns the stored text for the bundle's digest with no network activity.
// Throws kFixtureMiss when the digest is absent.
BackendResponse Replay(const FixtureStore& fixture, const BackendConfig& config,
                       const PromptBundle& bundle, int repeat = 0);

// Queries `live` and persists the (digest, text) pair into `fixture`.
BackendResponse Record(Backend& live, FixtureStore& fixture,
                       const PromptBundle& bundle, int repeat = 0);

class ReplayBackend final : public Backend {
 public:
  ReplayBackend(BackendConfig config, std::shared_ptr<const FixtureStore> fixture);

 protected:
  BackendResponse DoQuery(const PromptBundle& bundle, int repeat) override;

 private:
  std::shared_ptr<const FixtureStore> fixture_;
};

// Cache-first decorator. A digest hit returns the stored text with
// cached = true and latency 0; concurrent requests for the same digest are
// coalesced so the inner backend sees each digest at most once.
class CachingBackend final : public Backend {
 public:
  CachingBackend(std::shared_ptr<Backend> inner,
                 std::shared_ptr<FixtureStore> store);

  Backend& inner() { return *inner_; }

 protected:
  BackendResponse DoQuery(const PromptBundle& bundle, int repeat) override;

 private:
  std::shared_ptr<Backend> inner_;
  std::shared_ptr<FixtureStore> store_;
  std::mutex mu_;
  std::unordered_map<std::string, std::shared_future<std::string>> inflight_;
};

// Sliding-window limiter: at most `max_requests` acquisitions in any window
// of length `window`. Safe under concurrent Acquire().
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;
  using NowFn = std::function<Clock::time_point()>;
  using SleepFn = std::function<void(Clock::duration)>;

  explicit RateLimiter(int max_requests,
                       Clock::duration window = std::chrono::seconds(60),
                       NowFn now = nullptr, SleepFn sleep = nullptr);

  // Blocks until a slot is free, then records the acquisition time.
  Clock::time_point Acquire();
  std::vector<Clock::time_point> Log() const;

  int max_requests() const { return max_requests_; }
  Clock::duration window() const { return window_; }

 private:
  int max_requests_;
  Clock::duration window_;
  NowFn now_;
  SleepFn sleep_;
  mutable std::mutex mu_;
  std::deque<Clock::time_point> recent_;
  std::vector<Clock::time_point> log_;
};

// Largest number of timestamps falling in any half-open interval of length
// `window`.
std::size_t MaxInWindow(std::vector<RateLimiter::Clock::time_point> times,
                        RateLimiter::Clock::duration window);

// HTTP(S) client for chat-completions style and Gemini style endpoints.
class LiveBackend final : public Backend {
 public:
  struct Options {
    // Used for backoff waits; tests inject a recorder.
    std::function<void(std::chrono::duration<double>)> sleep;
    std::uint64_t jitter_seed = 0x5eed;
    // Shared limiter; when null one is created from config.rate_limit.
    std::shared_ptr<RateLimiter> limiter;
  };

  explicit LiveBackend(BackendConfig config);
  LiveBackend(BackendConfig config, Options options);

  RateLimiter& limiter() { return *options_.limiter; }

  // Request body for the configured adapter (exposed for tests).
  nlohmann::json BuildRequestBody(const PromptBundle& bundle) const;
  // Extracts the completion text from a provider response body.
  std::string ExtractText(std::string_view body) const;

 protected:
  BackendResponse DoQuery(const PromptBundle& bundle, int repeat) override;

 private:
  std::chrono::duration<double> BackoffDelay(int attempt);

  Options options_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

// Builds the backend named by config.adapter. Replay loads its fixture from
// config.fixture_path.
std::shared_ptr<Backend> MakeBackend(const BackendConfig& config);

}  // namespace vlmad
