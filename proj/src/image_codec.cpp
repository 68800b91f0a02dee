#include "vlmad/image_codec.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include <jpeglib.h>
#include <openssl/evp.h>
#include <png.h>
#include <zlib.h>

#include "vlmad/error.hpp"

namespace vlmad {
namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G',
                                           '\r', '\n', 0x1a, '\n'};

DecodedRaster DecodePng(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::kDecodeFailed, "png: " + msg);
  }
  image.format = PNG_FORMAT_RGB;
  DecodedRaster out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.format = RasterFormat::kPng;
  out.rgb.resize(PNG_IMAGE_SIZE(image));
  png_color black{0, 0, 0};
  if (!png_image_finish_read(&image, &black, out.rgb.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::kDecodeFailed, "png: " + msg);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void JpegErrorExit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

DecodedRaster DecodeJpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = JpegErrorExit;
  DecodedRaster out;
  out.format = RasterFormat::kJpeg;
  // No objects with destructors may be created between setjmp and the
  // potential longjmp below, apart from `out` which is sized afterwards.
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::kDecodeFailed,
                std::string("jpeg: ") + jerr.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  out.rgb.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.rgb.data() +
                   static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

// Binary PGM/PPM with maxval <= 65535.
DecodedRaster DecodePnm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 2;
  auto fail = [](const char* what) {
    throw Error(ErrorCode::kDecodeFailed, std::string("pnm: ") + what);
  };
  auto next_int = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail("bad header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) fail("header value too large");
      ++pos;
    }
    return v;
  };
  const bool color = bytes[1] == '6';
  long w = next_int();
  long h = next_int();
  long maxval = next_int();
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) fail("bad header");
  ++pos;  // single whitespace before raster
  const std::size_t channels = color ? 3 : 1;
  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t need =
      static_cast<std::size_t>(w) * h * channels * sample_bytes;
  if (pos + need > bytes.size()) fail("truncated raster");
  DecodedRaster out;
  out.width = static_cast<int>(w);
  out.height = static_cast<int>(h);
  out.format = RasterFormat::kPnm;
  out.rgb.resize(static_cast<std::size_t>(w) * h * 3);
  const std::uint8_t* src = bytes.data() + pos;
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      std::size_t ch = color ? c : 0;
      std::size_t idx = (i * channels + ch) * sample_bytes;
      unsigned v = sample_bytes == 2 ? (src[idx] << 8 | src[idx + 1]) : src[idx];
      out.rgb[i * 3 + c] =
          static_cast<std::uint8_t>((v * 255u + maxval / 2) / maxval);
    }
  }
  return out;
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void PutChunk(std::vector<std::uint8_t>& out, const char type[4],
              std::span<const std::uint8_t> data) {
  PutU32(out, static_cast<std::uint32_t>(data.size()));
  std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + type_at,
              static_cast<uInt>(out.size() - type_at));
  PutU32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

RasterFormat DetectRasterFormat(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) {
    return RasterFormat::kPng;
  }
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 &&
      bytes[2] == 0xFF) {
    return RasterFormat::kJpeg;
  }
  if (bytes.size() >= 3 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6') &&
      std::isspace(bytes[2])) {
    return RasterFormat::kPnm;
  }
  return RasterFormat::kUnknown;
}

DecodedRaster DecodeRaster(std::span<const std::uint8_t> bytes) {
  switch (DetectRasterFormat(bytes)) {
    case RasterFormat::kPng: return DecodePng(bytes);
    case RasterFormat::kJpeg: return DecodeJpeg(bytes);
    case RasterFormat::kPnm: return DecodePnm(bytes);
    case RasterFormat::kUnknown: break;
  }
  throw Error(ErrorCode::kUnsupportedFormat, "unrecognized raster container");
}

std::vector<std::uint8_t> EncodePng(const CanonicalImage& image) {
  const std::uint32_t w = static_cast<std::uint32_t>(image.width());
  const std::uint32_t h = static_cast<std::uint32_t>(image.height());
  const std::size_t row_bytes = static_cast<std::size_t>(w) * 3 + 1;

  std::vector<std::uint8_t> raw;
  raw.reserve(row_bytes * h);
  auto px = image.pixels();
  for (std::uint32_t y = 0; y < h; ++y) {
    raw.push_back(0);  // filter: none
    auto row = px.subspan(static_cast<std::size_t>(y) * w * 3, w * 3);
    raw.insert(raw.end(), row.begin(), row.end());
  }

  // zlib stream: CMF/FLG for deflate with 32K window, no preset dictionary,
  // then stored blocks of at most 65535 bytes, then Adler-32.
  std::vector<std::uint8_t> z{0x78, 0x01};
  std::size_t offset = 0;
  do {
    std::size_t len = std::min<std::size_t>(65535, raw.size() - offset);
    bool last = offset + len == raw.size();
    z.push_back(last ? 1 : 0);
    z.push_back(static_cast<std::uint8_t>(len & 0xFF));
    z.push_back(static_cast<std::uint8_t>(len >> 8));
    z.push_back(static_cast<std::uint8_t>(~len & 0xFF));
    z.push_back(static_cast<std::uint8_t>((~len >> 8) & 0xFF));
    z.insert(z.end(), raw.begin() + static_cast<std::ptrdiff_t>(offset),
             raw.begin() + static_cast<std::ptrdiff_t>(offset + len));
    offset += len;
  } while (offset < raw.size());
  uLong adler = adler32(0L, Z_NULL, 0);
  for (std::size_t at = 0; at < raw.size(); at += 1u << 30) {
    std::size_t n = std::min<std::size_t>(1u << 30, raw.size() - at);
    adler = adler32(adler, raw.data() + at, static_cast<uInt>(n));
  }
  PutU32(z, static_cast<std::uint32_t>(adler));

  std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);
  std::vector<std::uint8_t> ihdr;
  PutU32(ihdr, w);
  PutU32(ihdr, h);
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit, truecolor
  PutChunk(out, "IHDR", ihdr);
  PutChunk(out, "IDAT", z);
  PutChunk(out, "IEND", {});
  return out;
}

std::string Base64Encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> Base64Decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw Error(ErrorCode::kDecodeFailed, "base64 length not a multiple of 4");
  }
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  int n = EVP_DecodeBlock(out.data(),
                          reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::kDecodeFailed, "invalid base64");
  // EVP_DecodeBlock keeps the padding bytes as zeros.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string Sha256Hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr)) {
    throw Error(ErrorCode::kInvalidArgument, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

nlohmann::json ImageToJson(const CanonicalImage& image) {
  nlohmann::json prov{{"modality", ModalityName(image.provenance().modality)},
                      {"params", image.provenance().params}};
  return nlohmann::json{{"width", image.width()},
                        {"height", image.height()},
                        {"png_base64", Base64Encode(EncodePng(image))},
                        {"provenance", prov}};
}

CanonicalImage ImageFromJson(const nlohmann::json& j) {
  auto bytes = Base64Decode(j.at("png_base64").get<std::string>());
  DecodedRaster raster = DecodeRaster(bytes);
  Provenance prov;
  const auto& p = j.at("provenance");
  prov.modality = ParseModality(p.at("modality").get<std::string>());
  prov.params = p.at("params").get<std::map<std::string, std::string>>();
  if (raster.width != j.at("width").get<int>() ||
      raster.height != j.at("height").get<int>()) {
    throw Error(ErrorCode::kDecodeFailed, "image dimensions disagree with PNG");
  }
  return CanonicalImage(raster.width, raster.height, std::move(raster.rgb),
                        std::move(prov));
}

}  // namespace vlmad
