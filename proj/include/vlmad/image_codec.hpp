#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vlmad/core_types.hpp"

namespace vlmad {

enum class RasterFormat { kPng, kJpeg, kPnm, kUnknown };

// Sniffs the container from magic bytes.
RasterFormat DetectRasterFormat(std::span<const std::uint8_t> bytes);

struct DecodedRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
  RasterFormat format = RasterFormat::kUnknown;
};

// Decodes PNG, JPEG or binary PNM (P5/P6) to 8-bit RGB. Alpha is composited
// onto black, gray is replicated, 16-bit samples are reduced to 8 bits.
// Throws kUnsupportedFormat for unknown containers, kDecodeFailed for
// corrupt data.
DecodedRaster DecodeRaster(std::span<const std::uint8_t> bytes);

// Lossless PNG whose bytes depend only on the pixels: 8-bit RGB, filter 0,
// stored (uncompressed) deflate blocks. Request digests hash these bytes.
std::vector<std::uint8_t> EncodePng(const CanonicalImage& image);

std::string Base64Encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> Base64Decode(std::string_view text);

// Lowercase hex SHA-256.
std::string Sha256Hex(std::string_view data);

// {"width", "height", "png_base64", "provenance"}; round-trips exactly.
nlohmann::json ImageToJson(const CanonicalImage& image);
CanonicalImage ImageFromJson(const nlohmann::json& j);

}  // namespace vlmad
