#include "vlmad/core_types.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <utility>

#include "vlmad/error.hpp"
#include "vlmad/io.hpp"

namespace vlmad {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kIo: return "IO";
    case ErrorCode::kDecodeFailed: return "DECODE_FAILED";
    case ErrorCode::kUnsupportedFormat: return "UNSUPPORTED_FORMAT";
    case ErrorCode::kEmptyCloud: return "EMPTY_CLOUD";
    case ErrorCode::kNonFiniteCoordinate: return "NON_FINITE_COORDINATE";
    case ErrorCode::kTooFewSamples: return "TOO_FEW_SAMPLES";
    case ErrorCode::kNonFiniteValue: return "NON_FINITE_VALUE";
    case ErrorCode::kMixedFrameSizes: return "MIXED_FRAME_SIZES";
    case ErrorCode::kEmptyFrameList: return "EMPTY_FRAME_LIST";
    case ErrorCode::kMissingComponent: return "MISSING_COMPONENT";
    case ErrorCode::kExtraComponent: return "EXTRA_COMPONENT";
    case ErrorCode::kAuthMissing: return "AUTH_MISSING";
    case ErrorCode::kRateLimitedExhausted: return "RATE_LIMITED_EXHAUSTED";
    case ErrorCode::kTransport: return "TRANSPORT";
    case ErrorCode::kBadStatus: return "BAD_STATUS";
    case ErrorCode::kFixtureMiss: return "FIXTURE_MISS";
    case ErrorCode::kUnparseable: return "UNPARSEABLE";
    case ErrorCode::kEmptyDataset: return "EMPTY_DATASET";
    case ErrorCode::kCategoryMissingTrain: return "CATEGORY_MISSING_TRAIN";
    case ErrorCode::kLengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::kEmpty: return "EMPTY";
    case ErrorCode::kConfigInvalid: return "CONFIG_INVALID";
    case ErrorCode::kDatasetError: return "DATASET_ERROR";
  }
  return "UNKNOWN";
}

namespace {

constexpr std::array<std::pair<Modality, std::string_view>, 4> kModalityNames{{
    {Modality::kRgbImage, "RGB_IMAGE"},
    {Modality::kPointCloud, "POINT_CLOUD"},
    {Modality::kTimeSeries, "TIME_SERIES"},
    {Modality::kVideoFrames, "VIDEO_FRAMES"},
}};

constexpr std::array<std::pair<ParsePath, std::string_view>, 3> kParsePathNames{{
    {ParsePath::kStructured, "STRUCTURED"},
    {ParsePath::kFallbackKeyword, "FALLBACK_KEYWORD"},
    {ParsePath::kFallbackDigit, "FALLBACK_DIGIT"},
}};

}  // namespace

std::string_view ModalityName(Modality m) {
  for (const auto& [value, name] : kModalityNames) {
    if (value == m) return name;
  }
  return "RGB_IMAGE";
}

Modality ParseModality(std::string_view name) {
  for (const auto& [value, n] : kModalityNames) {
    if (n == name) return value;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown modality '" + std::string(name) + "'");
}

std::string_view ParsePathName(ParsePath p) {
  for (const auto& [value, name] : kParsePathNames) {
    if (value == p) return name;
  }
  return "STRUCTURED";
}

ParsePath ParseParsePath(std::string_view name) {
  for (const auto& [value, n] : kParsePathNames) {
    if (n == name) return value;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown parse path '" + std::string(name) + "'");
}

CanonicalImage::CanonicalImage(int width, int height,
                               std::vector<std::uint8_t> pixels,
                               Provenance provenance)
    : width_(width),
      height_(height),
      pixels_(std::move(pixels)),
      provenance_(std::move(provenance)) {
  if (width_ < 1 || height_ < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be >= 1");
  }
  if (pixels_.size() != static_cast<std::size_t>(width_) * height_ * 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "pixel buffer length must equal width*height*3");
  }
}

CanonicalImage CanonicalImage::Filled(int width, int height, std::uint8_t r,
                                      std::uint8_t g, std::uint8_t b,
                                      Provenance provenance) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be >= 1");
  }
  std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < px.size(); i += 3) {
    px[i] = r;
    px[i + 1] = g;
    px[i + 2] = b;
  }
  return CanonicalImage(width, height, std::move(px), std::move(provenance));
}

double CanonicalImage::MeanIntensity() const {
  // Integer accumulation keeps the mean exact for any realistic image size.
  std::uint64_t sum = 0;
  for (std::uint8_t v : pixels_) sum += v;
  return static_cast<double>(sum) / static_cast<double>(pixels_.size());
}

void Validate(const DetectionResult& r) {
  if (!IsBinaryLabel(r.label)) {
    throw Error(ErrorCode::kInvalidArgument, "label must be 0 or 1");
  }
  if (!(r.score >= 0.0 && r.score <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "score must lie in [0,1]");
  }
}

void Validate(const EvalRecord& r) {
  Validate(r.prediction);
  if (!IsBinaryLabel(r.ground_truth)) {
    throw Error(ErrorCode::kInvalidArgument, "ground_truth must be 0 or 1");
  }
  if (r.latency_ms < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "latency_ms must be >= 0");
  }
  if (r.latency_ms == 0.0 && !r.cached) {
    throw Error(ErrorCode::kInvalidArgument,
                "latency_ms = 0 is only legal for cached records");
  }
}

void to_json(nlohmann::json& j, const QuerySample& s) {
  j = nlohmann::json{{"id", s.id},
                     {"modality", ModalityName(s.modality)},
                     {"source", s.source},
                     {"category", s.category}};
  j["ground_truth"] = s.ground_truth ? nlohmann::json(*s.ground_truth)
                                     : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, QuerySample& s) {
  s.id = j.at("id").get<std::string>();
  s.modality = ParseModality(j.at("modality").get<std::string>());
  s.source = j.at("source").get<std::string>();
  s.category = j.at("category").get<std::string>();
  if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
    int gt = j["ground_truth"].get<int>();
    if (!IsBinaryLabel(gt)) {
      throw Error(ErrorCode::kInvalidArgument, "ground_truth must be 0 or 1");
    }
    s.ground_truth = gt;
  } else {
    s.ground_truth.reset();
  }
}

void to_json(nlohmann::json& j, const DetectionResult& r) {
  j = nlohmann::json{{"label", r.label},
                     {"reasoning", r.reasoning},
                     {"score", r.score},
                     {"raw_response", r.raw_response},
                     {"parse_path", ParsePathName(r.parse_path)}};
}

void from_json(const nlohmann::json& j, DetectionResult& r) {
  r.label = j.at("label").get<int>();
  r.reasoning = j.at("reasoning").get<std::string>();
  r.score = j.at("score").get<double>();
  r.raw_response = j.at("raw_response").get<std::string>();
  r.parse_path = ParseParsePath(j.at("parse_path").get<std::string>());
  Validate(r);
}

void to_json(nlohmann::json& j, const EvalRecord& r) {
  j = nlohmann::json{{"sample_id", r.sample_id},
                     {"category", r.category},
                     {"strategy_id", r.strategy_id},
                     {"backend_id", r.backend_id},
                     {"prediction", r.prediction},
                     {"ground_truth", r.ground_truth},
                     {"latency_ms", r.latency_ms},
                     {"cached", r.cached}};
}

void from_json(const nlohmann::json& j, EvalRecord& r) {
  r.sample_id = j.at("sample_id").get<std::string>();
  r.category = j.at("category").get<std::string>();
  r.strategy_id = j.at("strategy_id").get<std::string>();
  r.backend_id = j.at("backend_id").get<std::string>();
  r.prediction = j.at("prediction").get<DetectionResult>();
  r.ground_truth = j.at("ground_truth").get<int>();
  r.latency_ms = j.at("latency_ms").get<double>();
  r.cached = j.at("cached").get<bool>();
  Validate(r);
}

std::string SerializeRecordLog(std::span<const EvalRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += nlohmann::json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<EvalRecord> ParseRecordLog(std::string_view text) {
  std::vector<EvalRecord> records;
  for (const auto& line : SplitLines(text)) {
    if (Trim(line).empty()) continue;
    try {
      records.push_back(nlohmann::json::parse(line).get<EvalRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("malformed record line: ") + e.what());
    }
  }
  return records;
}

// ---- io.hpp ---------------------------------------------------------------

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

void AppendLine(const std::filesystem::path& path, std::string_view line) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, "cannot append to " + path.string());
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.put('\n');
  out.flush();
}

std::string Trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::string ToLower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<std::string> SplitLines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.emplace_back(text.substr(start));
      break;
    }
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = nl + 1;
  }
  return lines;
}

std::string FormatFixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

namespace {
int g_verbosity = 0;
std::mutex g_log_mutex;

void Log(std::string_view level, std::string_view msg) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << "[" << level << "] " << msg << '\n';
}
}  // namespace

void SetVerbosity(int level) { g_verbosity = level; }
int Verbosity() { return g_verbosity; }
void LogInfo(std::string_view msg) {
  if (g_verbosity >= 1) Log("info", msg);
}
void LogDebug(std::string_view msg) {
  if (g_verbosity >= 2) Log("debug", msg);
}
void LogWarning(std::string_view msg) { Log("warn", msg); }

}  // namespace vlmad
