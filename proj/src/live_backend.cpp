#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "vlmad/backend.hpp"
#include "vlmad/error.hpp"
#include "vlmad/image_codec.hpp"
#include "vlmad/io.hpp"

namespace vlmad {
namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // includes query string
};

ParsedUrl SplitUrl(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfigInvalid, "endpoint_url needs a scheme: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool IsRetryableStatus(int status) { return status == 429 || status >= 500; }

std::string DataUrl(const CanonicalImage& image) {
  return "data:image/png;base64," + Base64Encode(EncodePng(image));
}

}  // namespace

LiveBackend::LiveBackend(BackendConfig config)
    : LiveBackend(std::move(config), Options{}) {}

LiveBackend::LiveBackend(BackendConfig config, Options options)
    : Backend(std::move(config)), options_(std::move(options)),
      rng_(options_.jitter_seed) {
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::duration<double> d) {
      std::this_thread::sleep_for(d);
    };
  }
  if (!options_.limiter) {
    options_.limiter = std::make_shared<RateLimiter>(this->config().rate_limit);
  }
}

nlohmann::json LiveBackend::BuildRequestBody(const PromptBundle& bundle) const {
  const auto& c = config();
  if (c.adapter == AdapterKind::kGemini) {
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& s : bundle.segments) {
      if (s.is_image()) {
        parts.push_back({{"inline_data",
                          {{"mime_type", "image/png"},
                           {"data", Base64Encode(EncodePng(*s.image))}}}});
      } else {
        parts.push_back({{"text", s.text}});
      }
    }
    return {{"contents", nlohmann::json::array({{{"role", "user"}, {"parts", parts}}})},
            {"generationConfig",
             {{"temperature", c.temperature},
              {"maxOutputTokens", c.max_output_tokens}}}};
  }
  nlohmann::json content = nlohmann::json::array();
  for (const auto& s : bundle.segments) {
    if (s.is_image()) {
      content.push_back({{"type", "image_url"},
                         {"image_url", {{"url", DataUrl(*s.image)}}}});
    } else {
      content.push_back({{"type", "text"}, {"text", s.text}});
    }
  }
  return {{"model", c.model_name},
          {"max_tokens", c.max_output_tokens},
          {"temperature", c.temperature},
          {"messages",
           nlohmann::json::array({{{"role", "user"}, {"content", content}}})}};
}

std::string LiveBackend::ExtractText(std::string_view body) const {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
    if (config().adapter == AdapterKind::kGemini) {
      std::string text;
      for (const auto& part : j.at("candidates").at(0).at("content").at("parts")) {
        if (part.contains("text")) text += part["text"].get<std::string>();
      }
      return text;
    }
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    std::string text;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") text += part.at("text").get<std::string>();
    }
    return text;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadStatus,
                std::string("unexpected response body (") + e.what() +
                    "): " + std::string(body.substr(0, 512)));
  }
}

std::chrono::duration<double> LiveBackend::BackoffDelay(int attempt) {
  // Full jitter: uniform in [0, base * 2^(attempt-1)].
  const double cap = config().backoff_base_s * std::pow(2.0, attempt - 1);
  std::lock_guard<std::mutex> lock(rng_mu_);
  std::uniform_real_distribution<double> dist(0.0, cap);
  return std::chrono::duration<double>(cap > 0 ? dist(rng_) : 0.0);
}

BackendResponse LiveBackend::DoQuery(const PromptBundle& bundle, int repeat) {
  const auto& c = config();
  const char* key = std::getenv(c.api_key_env.c_str());
  if (c.api_key_env.empty() || key == nullptr || *key == '\0') {
    throw Error(ErrorCode::kAuthMissing,
                "environment variable '" + c.api_key_env + "' is not set");
  }

  std::string url = c.endpoint_url;
  if (auto at = url.find("{model}"); at != std::string::npos) {
    url.replace(at, 7, c.model_name);
  }
  const ParsedUrl target = SplitUrl(url);
  const std::string body = BuildRequestBody(bundle).dump();
  httplib::Headers headers;
  if (c.adapter == AdapterKind::kGemini) {
    headers.emplace("x-goog-api-key", key);
  } else {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  BackendResponse out;
  out.request_digest = RequestDigest(c.backend_id, c.model_name, bundle, repeat);
  const auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::duration<double>(c.timeout_s));

  std::string last_failure;
  bool last_was_transport = false;
  for (int attempt = 1; attempt <= c.max_retries + 1; ++attempt) {
    if (attempt > 1) options_.sleep(BackoffDelay(attempt - 1));
    options_.limiter->Acquire();
    out.attempt_count = attempt;

    httplib::Client client(target.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(target.path, headers, body, "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - start;

    if (!res) {
      last_was_transport = true;
      last_failure = httplib::to_string(res.error());
      LogInfo(c.backend_id + ": attempt " + std::to_string(attempt) +
              " transport failure: " + last_failure);
      continue;
    }
    if (res->status == 200) {
      out.text = ExtractText(res->body);
      out.latency_ms = std::max(
          1e-3, std::chrono::duration<double, std::milli>(elapsed).count());
      return out;
    }
    if (!IsRetryableStatus(res->status)) {
      throw Error(ErrorCode::kBadStatus, "HTTP " + std::to_string(res->status) +
                                             ": " + res->body);
    }
    last_was_transport = false;
    last_failure = "HTTP " + std::to_string(res->status) + ": " + res->body;
    LogInfo(c.backend_id + ": attempt " + std::to_string(attempt) + " got " +
            last_failure.substr(0, 80));
  }
  if (last_was_transport) {
    throw Error(ErrorCode::kTransport, last_failure);
  }
  throw Error(ErrorCode::kRateLimitedExhausted,
              "retries exhausted after " + std::to_string(c.max_retries + 1) +
                  " attempts; last: " + last_failure);
}

std::shared_ptr<Backend> MakeBackend(const BackendConfig& config) {
  Validate(config);
  switch (config.adapter) {
    case AdapterKind::kMock:
      return std::make_shared<MockBackend>(config);
    case AdapterKind::kReplay: {
      if (!std::filesystem::exists(config.fixture_path)) {
        throw Error(ErrorCode::kConfigInvalid,
                    "fixture file not found: " + config.fixture_path);
      }
      return std::make_shared<ReplayBackend>(
          config, std::make_shared<const FixtureStore>(config.fixture_path));
    }
    case AdapterKind::kOpenAiChat:
    case AdapterKind::kGemini:
      return std::make_shared<LiveBackend>(config);
  }
  throw Error(ErrorCode::kConfigInvalid, "unknown adapter");
}

}  // namespace vlmad
