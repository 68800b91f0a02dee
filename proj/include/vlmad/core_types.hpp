#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace vlmad {

enum class Modality { kRgbImage, kPointCloud, kTimeSeries, kVideoFrames };

std::string_view ModalityName(Modality m);  // "RGB_IMAGE", ...
Modality ParseModality(std::string_view name);

// Binary anomaly label: 0 normal, 1 anomalous.
using Label = int;

inline bool IsBinaryLabel(int v) { return v == 0 || v == 1; }

struct QuerySample {
  std::string id;
  Modality modality = Modality::kRgbImage;
  std::string source;    // file or directory path
  std::string category;  // the class token, e.g. "bottle"
  std::optional<Label> ground_truth;
};

// Where a CanonicalImage came from and which transform parameters were used.
struct Provenance {
  Modality modality = Modality::kRgbImage;
  std::map<std::string, std::string> params;

  bool operator==(const Provenance&) const = default;
};

// Row-major 8-bit RGB raster. Every modality is reduced to this before
// prompting.
class CanonicalImage {
 public:
  CanonicalImage(int width, int height, std::vector<std::uint8_t> pixels,
                 Provenance provenance);
  // Filled with a single color.
  static CanonicalImage Filled(int width, int height, std::uint8_t r,
                               std::uint8_t g, std::uint8_t b,
                               Provenance provenance = {});

  int width() const { return width_; }
  int height() const { return height_; }
  std::span<const std::uint8_t> pixels() const { return pixels_; }
  const Provenance& provenance() const { return provenance_; }

  // Pointer to the three channels of pixel (x, y).
  const std::uint8_t* at(int x, int y) const {
    return pixels_.data() + (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  // Mean of (R+G+B)/3 over all pixels.
  double MeanIntensity() const;

  // Pixel equality; provenance is not compared.
  bool SamePixels(const CanonicalImage& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           pixels_ == other.pixels_;
  }
  bool operator==(const CanonicalImage& other) const {
    return SamePixels(other) && provenance_ == other.provenance_;
  }

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
  Provenance provenance_;
};

enum class ParsePath { kStructured, kFallbackKeyword, kFallbackDigit };

std::string_view ParsePathName(ParsePath p);  // "STRUCTURED", ...
ParsePath ParseParsePath(std::string_view name);

struct DetectionResult {
  Label label = 0;
  std::string reasoning;
  double score = 0.0;  // equals label unless averaged over repeats
  std::string raw_response;
  ParsePath parse_path = ParsePath::kStructured;

  bool operator==(const DetectionResult&) const = default;
};

struct EvalRecord {
  std::string sample_id;
  std::string category;
  std::string strategy_id;
  std::string backend_id;
  DetectionResult prediction;
  Label ground_truth = 0;
  double latency_ms = 0.0;
  bool cached = false;

  bool operator==(const EvalRecord&) const = default;
};

// Throws kInvalidArgument when an invariant of the type is violated.
void Validate(const DetectionResult& r);
void Validate(const EvalRecord& r);

void to_json(nlohmann::json& j, const QuerySample& s);
void from_json(const nlohmann::json& j, QuerySample& s);
void to_json(nlohmann::json& j, const DetectionResult& r);
void from_json(const nlohmann::json& j, DetectionResult& r);
void to_json(nlohmann::json& j, const EvalRecord& r);
void from_json(const nlohmann::json& j, EvalRecord& r);

// Line-delimited record log.
std::string SerializeRecordLog(std::span<const EvalRecord> records);
std::vector<EvalRecord> ParseRecordLog(std::string_view text);

}  // namespace vlmad
