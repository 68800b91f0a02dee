#include "vlmad/backend.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <thread>

#include "vlmad/error.hpp"
#include "vlmad/image_codec.hpp"
#include "vlmad/io.hpp"

namespace vlmad {

std::string_view AdapterName(AdapterKind kind) {
  switch (kind) {
    case AdapterKind::kMock: return "mock";
    case AdapterKind::kReplay: return "replay";
    case AdapterKind::kOpenAiChat: return "openai";
    case AdapterKind::kGemini: return "gemini";
  }
  return "mock";
}

AdapterKind ParseAdapter(std::string_view name) {
  for (AdapterKind k : {AdapterKind::kMock, AdapterKind::kReplay,
                        AdapterKind::kOpenAiChat, AdapterKind::kGemini}) {
    if (AdapterName(k) == name) return k;
  }
  throw Error(ErrorCode::kConfigInvalid,
              "unknown adapter '" + std::string(name) +
                  "' (expected mock|replay|openai|gemini)");
}

void Validate(const BackendConfig& c) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kConfigInvalid, "backend: " + msg);
  };
  if (c.backend_id.empty()) fail("backend_id must be set");
  if (!(c.timeout_s > 0)) fail("timeout_s must be > 0");
  if (c.max_retries < 0) fail("max_retries must be >= 0");
  if (c.rate_limit < 1) fail("rate_limit must be >= 1");
  if (c.max_output_tokens < 1) fail("max_output_tokens must be >= 1");
  if (c.backoff_base_s < 0) fail("backoff_base_s must be >= 0");
  if (c.mock_tau < 0 || c.mock_tau > 255) fail("mock_tau must lie in [0,255]");
  if (!(c.simulated_latency_ms > 0)) fail("simulated_latency_ms must be > 0");
  const bool live = c.adapter == AdapterKind::kOpenAiChat ||
                    c.adapter == AdapterKind::kGemini;
  if (live && c.endpoint_url.empty()) fail("endpoint_url is required");
  if (live && c.api_key_env.empty()) fail("api_key_env is required");
  if (c.adapter == AdapterKind::kReplay && c.fixture_path.empty()) {
    fail("replay needs fixture_path");
  }
}

void to_json(nlohmann::json& j, const BackendConfig& c) {
  j = nlohmann::json{{"backend_id", c.backend_id},
                     {"adapter", AdapterName(c.adapter)},
                     {"endpoint_url", c.endpoint_url},
                     {"model_name", c.model_name},
                     {"api_key_env", c.api_key_env},
                     {"timeout_s", c.timeout_s},
                     {"max_retries", c.max_retries},
                     {"rate_limit", c.rate_limit},
                     {"max_output_tokens", c.max_output_tokens},
                     {"temperature", c.temperature},
                     {"backoff_base_s", c.backoff_base_s},
                     {"mock_tau", c.mock_tau},
                     {"fixture_path", c.fixture_path},
                     {"simulated_latency_ms", c.simulated_latency_ms}};
}

void from_json(const nlohmann::json& j, BackendConfig& c) {
  static const char* kKnown[] = {
      "backend_id", "adapter", "endpoint_url", "model_name", "api_key_env",
      "timeout_s", "max_retries", "rate_limit", "max_output_tokens",
      "temperature", "backoff_base_s", "mock_tau", "fixture_path",
      "simulated_latency_ms"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(kKnown), std::end(kKnown),
                     [&](const char* k) { return key == k; }) == std::end(kKnown)) {
      throw Error(ErrorCode::kConfigInvalid, "backend: unknown field '" + key + "'");
    }
  }
  BackendConfig d;
  c.backend_id = j.value("backend_id", d.backend_id);
  c.adapter = ParseAdapter(j.value("adapter", std::string(AdapterName(d.adapter))));
  c.endpoint_url = j.value("endpoint_url", d.endpoint_url);
  c.model_name = j.value("model_name", d.model_name);
  c.api_key_env = j.value("api_key_env", d.api_key_env);
  c.timeout_s = j.value("timeout_s", d.timeout_s);
  c.max_retries = j.value("max_retries", d.max_retries);
  c.rate_limit = j.value("rate_limit", d.rate_limit);
  c.max_output_tokens = j.value("max_output_tokens", d.max_output_tokens);
  c.temperature = j.value("temperature", d.temperature);
  c.backoff_base_s = j.value("backoff_base_s", d.backoff_base_s);
  c.mock_tau = j.value("mock_tau", d.mock_tau);
  c.fixture_path = j.value("fixture_path", d.fixture_path);
  c.simulated_latency_ms = j.value("simulated_latency_ms", d.simulated_latency_ms);
}

std::string RequestDigest(std::string_view backend_id,
                          std::string_view model_name,
                          const PromptBundle& bundle, int repeat) {
  std::string payload;
  payload += backend_id;
  payload += '\n';
  payload += model_name;
  payload += '\n';
  payload += SerializeBundle(bundle);
  if (repeat > 0) payload += "\nrepeat=" + std::to_string(repeat);
  return Sha256Hex(payload);
}

// ---- mock -----------------------------------------------------------------

std::string MockOracle(const CanonicalImage& reference,
                       const CanonicalImage& query, double tau) {
  const double deviation =
      std::abs(query.MeanIntensity() - reference.MeanIntensity());
  if (deviation > tau) return "1, mean intensity deviates from reference";
  return "0, mean intensity matches reference";
}

BackendResponse MockBackend::DoQuery(const PromptBundle& bundle, int repeat) {
  BackendResponse r;
  r.request_digest =
      RequestDigest(config().backend_id, config().model_name, bundle, repeat);
  const CanonicalImage* ref = bundle.ReferenceImage();
  r.text = ref ? MockOracle(*ref, bundle.QueryImage(), config().mock_tau)
               : std::string(kMockNoReference);
  r.latency_ms = config().simulated_latency_ms;
  r.attempt_count = 1;
  return r;
}

// ---- fixtures -------------------------------------------------------------

void to_json(nlohmann::json& j, const FixtureEntry& e) {
  j = nlohmann::json{{"digest", e.digest},
                     {"text", e.text},
                     {"backend_id", e.backend_id},
                     {"model_name", e.model_name},
                     {"timestamp", e.timestamp}};
}

void from_json(const nlohmann::json& j, FixtureEntry& e) {
  e.digest = j.at("digest").get<std::string>();
  e.text = j.at("text").get<std::string>();
  e.backend_id = j.value("backend_id", "");
  e.model_name = j.value("model_name", "");
  e.timestamp = j.value("timestamp", "");
}

FixtureStore::FixtureStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::size_t line_no = 0;
  for (const auto& line : SplitLines(ReadFile(path_))) {
    ++line_no;
    if (Trim(line).empty()) continue;
    try {
      auto e = nlohmann::json::parse(line).get<FixtureEntry>();
      // First occurrence wins; the file is append-only.
      entries_.try_emplace(e.digest, std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::kIo, path_.string() + ":" + std::to_string(line_no) +
                                      ": malformed fixture line: " + ex.what());
    }
  }
}

std::optional<std::string> FixtureStore::Lookup(std::string_view digest) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = entries_.find(std::string(digest));
  if (it == entries_.end()) return std::nullopt;
  return it->second.text;
}

void FixtureStore::Append(FixtureEntry entry) {
  std::lock_guard<std::mutex> lock(mu_);
  if (entries_.contains(entry.digest)) return;
  if (!path_.empty()) AppendLine(path_, nlohmann::json(entry).dump());
  std::string key = entry.digest;
  entries_.emplace(std::move(key), std::move(entry));
}

std::size_t FixtureStore::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

std::string UtcTimestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

BackendResponse Replay(const FixtureStore& fixture, const BackendConfig& config,
                       const PromptBundle& bundle, int repeat) {
  BackendResponse r;
  r.request_digest =
      RequestDigest(config.backend_id, config.model_name, bundle, repeat);
  auto text = fixture.Lookup(r.request_digest);
  if (!text) {
    throw Error(ErrorCode::kFixtureMiss,
                "no recorded response for digest " + r.request_digest +
                    " (prompt drift relative to the recorded run?)");
  }
  r.text = *text;
  r.latency_ms = config.simulated_latency_ms;
  r.attempt_count = 1;
  return r;
}

BackendResponse Record(Backend& live, FixtureStore& fixture,
                       const PromptBundle& bundle, int repeat) {
  BackendResponse r = live.Query(bundle, repeat);
  fixture.Append({r.request_digest, r.text, live.config().backend_id,
                  live.config().model_name, UtcTimestamp()});
  return r;
}

ReplayBackend::ReplayBackend(BackendConfig config,
                             std::shared_ptr<const FixtureStore> fixture)
    : Backend(std::move(config)), fixture_(std::move(fixture)) {}

BackendResponse ReplayBackend::DoQuery(const PromptBundle& bundle, int repeat) {
  return Replay(*fixture_, config(), bundle, repeat);
}

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner,
                               std::shared_ptr<FixtureStore> store)
    : Backend(inner->config()), inner_(std::move(inner)), store_(std::move(store)) {}

BackendResponse CachingBackend::DoQuery(const PromptBundle& bundle, int repeat) {
  const std::string digest =
      RequestDigest(config().backend_id, config().model_name, bundle, repeat);
  auto hit = [&](std::string text) {
    BackendResponse r;
    r.text = std::move(text);
    r.request_digest = digest;
    r.cached = true;
    return r;
  };

  std::promise<std::string> promise;
  std::shared_future<std::string> pending;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto text = store_->Lookup(digest)) return hit(std::move(*text));
    auto it = inflight_.find(digest);
    if (it != inflight_.end()) {
      pending = it->second;
    } else {
      inflight_.emplace(digest, promise.get_future().share());
    }
  }
  if (pending.valid()) return hit(pending.get());

  try {
    BackendResponse r = inner_->Query(bundle, repeat);
    store_->Append({digest, r.text, config().backend_id, config().model_name,
                    UtcTimestamp()});
    promise.set_value(r.text);
    std::lock_guard<std::mutex> lock(mu_);
    inflight_.erase(digest);
    return r;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard<std::mutex> lock(mu_);
    inflight_.erase(digest);
    throw;
  }
}

// ---- rate limiting --------------------------------------------------------

RateLimiter::RateLimiter(int max_requests, Clock::duration window, NowFn now,
                         SleepFn sleep)
    : max_requests_(max_requests),
      window_(window),
      now_(now ? std::move(now) : NowFn([] { return Clock::now(); })),
      sleep_(sleep ? std::move(sleep)
                   : SleepFn([](Clock::duration d) { std::this_thread::sleep_for(d); })) {
  if (max_requests_ < 1) {
    throw Error(ErrorCode::kInvalidArgument, "rate limit must be >= 1");
  }
}

RateLimiter::Clock::time_point RateLimiter::Acquire() {
  std::unique_lock<std::mutex> lock(mu_);
  while (true) {
    const auto now = now_();
    while (!recent_.empty() && recent_.front() <= now - window_) {
      recent_.pop_front();
    }
    if (recent_.size() < static_cast<std::size_t>(max_requests_)) {
      recent_.push_back(now);
      log_.push_back(now);
      return now;
    }
    const auto wait = recent_.front() + window_ - now;
    lock.unlock();
    sleep_(wait);
    lock.lock();
  }
}

std::vector<RateLimiter::Clock::time_point> RateLimiter::Log() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

std::size_t MaxInWindow(std::vector<RateLimiter::Clock::time_point> times,
                        RateLimiter::Clock::duration window) {
  std::sort(times.begin(), times.end());
  std::size_t best = 0;
  std::size_t j = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (j < i) j = i;
    while (j < times.size() && times[j] - times[i] < window) ++j;
    best = std::max(best, j - i);
  }
  return best;
}

}  // namespace vlmad
