#include "vlmad/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>

#include "vlmad/error.hpp"
#include "vlmad/image_codec.hpp"
#include "vlmad/io.hpp"

namespace vlmad {
namespace {

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Tap {
  int src;
  std::uint64_t weight;
};

// Overlap of output cell i with each source cell, in units where a source
// cell has width out_len and an output cell has width in_len.
std::vector<std::vector<Tap>> BoxTaps(int in_len, int out_len) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out_len));
  for (int i = 0; i < out_len; ++i) {
    const std::uint64_t lo = static_cast<std::uint64_t>(i) * in_len;
    const std::uint64_t hi = lo + in_len;
    for (int s = static_cast<int>(lo / out_len);
         s < in_len && static_cast<std::uint64_t>(s) * out_len < hi; ++s) {
      const std::uint64_t s_lo = static_cast<std::uint64_t>(s) * out_len;
      const std::uint64_t s_hi = s_lo + out_len;
      const std::uint64_t w = std::min(hi, s_hi) - std::max(lo, s_lo);
      if (w > 0) taps[i].push_back({s, w});
    }
  }
  return taps;
}

std::vector<std::uint8_t> BoxResize(const std::vector<std::uint8_t>& src,
                                    int w, int h, int nw, int nh) {
  const auto xtaps = BoxTaps(w, nw);
  const auto ytaps = BoxTaps(h, nh);
  // Horizontal pass: each output column accumulates weights summing to w.
  std::vector<std::uint64_t> mid(static_cast<std::size_t>(nw) * h * 3);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = src.data() + static_cast<std::size_t>(y) * w * 3;
    for (int x = 0; x < nw; ++x) {
      std::uint64_t acc[3] = {0, 0, 0};
      for (const Tap& t : xtaps[x]) {
        for (int c = 0; c < 3; ++c) acc[c] += t.weight * row[t.src * 3 + c];
      }
      std::uint64_t* dst = mid.data() + (static_cast<std::size_t>(y) * nw + x) * 3;
      for (int c = 0; c < 3; ++c) dst[c] = acc[c];
    }
  }
  const std::uint64_t denom = static_cast<std::uint64_t>(w) * h;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(nw) * nh * 3);
  for (int y = 0; y < nh; ++y) {
    for (int x = 0; x < nw; ++x) {
      std::uint64_t acc[3] = {0, 0, 0};
      for (const Tap& t : ytaps[y]) {
        const std::uint64_t* m =
            mid.data() + (static_cast<std::size_t>(t.src) * nw + x) * 3;
        for (int c = 0; c < 3; ++c) acc[c] += t.weight * m[c];
      }
      std::uint8_t* dst = out.data() + (static_cast<std::size_t>(y) * nw + x) * 3;
      for (int c = 0; c < 3; ++c) {
        dst[c] = static_cast<std::uint8_t>((acc[c] + denom / 2) / denom);
      }
    }
  }
  return out;
}

void SetPixel(std::vector<std::uint8_t>& px, int width, int x, int y,
              const Rgb& color) {
  std::uint8_t* p = px.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  p[0] = color[0];
  p[1] = color[1];
  p[2] = color[2];
}

void DrawLine(std::vector<std::uint8_t>& px, int width, PixelPos a, PixelPos b,
              const Rgb& color) {
  int dx = std::abs(b.x - a.x);
  int sx = a.x < b.x ? 1 : -1;
  int dy = -std::abs(b.y - a.y);
  int sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  int x = a.x;
  int y = a.y;
  while (true) {
    SetPixel(px, width, x, y, color);
    if (x == b.x && y == b.y) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

void ValidateSeries(const TimeSeries& series) {
  if (series.samples.size() < 2) {
    throw Error(ErrorCode::kTooFewSamples, "time series needs >= 2 samples");
  }
  for (std::size_t i = 0; i < series.samples.size(); ++i) {
    const auto& s = series.samples[i];
    if (!std::isfinite(s.t) || !std::isfinite(s.v)) {
      throw Error(ErrorCode::kNonFiniteValue,
                  "sample " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && !(s.t > series.samples[i - 1].t)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "time stamps must be strictly increasing");
    }
  }
}

double ParseDouble(std::string_view tok, const char* what) {
  std::string s(tok);
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw Error(ErrorCode::kDecodeFailed,
                std::string(what) + ": not a number '" + s + "'");
  }
  return v;
}

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto is_sep = [](char c) {
    return c == ' ' || c == '\t' || c == ',' || c == '\r';
  };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_sep(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

void Validate(const ChartSpec& spec) {
  if (spec.margin < 0 || spec.plot_width() < 16 || spec.plot_height() < 16) {
    throw Error(ErrorCode::kInvalidArgument,
                "chart plot area must be at least 16x16 pixels");
  }
}

CanonicalImage CanonicalizeImage(std::span<const std::uint8_t> bytes,
                                 int max_dim) {
  if (max_dim < 64) {
    throw Error(ErrorCode::kInvalidArgument, "max_dim must be >= 64");
  }
  DecodedRaster raster = DecodeRaster(bytes);
  const int w = raster.width;
  const int h = raster.height;
  int nw = w;
  int nh = h;
  const int longest = std::max(w, h);
  if (longest > max_dim) {
    if (w >= h) {
      nw = max_dim;
      nh = std::max<int>(1, static_cast<int>(static_cast<std::int64_t>(h) * max_dim / w));
    } else {
      nh = max_dim;
      nw = std::max<int>(1, static_cast<int>(static_cast<std::int64_t>(w) * max_dim / h));
    }
  }
  Provenance prov;
  prov.modality = Modality::kRgbImage;
  prov.params["original_width"] = std::to_string(w);
  prov.params["original_height"] = std::to_string(h);
  prov.params["max_dim"] = std::to_string(max_dim);
  prov.params["resample"] = (nw == w && nh == h) ? "none" : "box";
  if (nw == w && nh == h) {
    return CanonicalImage(w, h, std::move(raster.rgb), std::move(prov));
  }
  return CanonicalImage(nw, nh, BoxResize(raster.rgb, w, h, nw, nh),
                        std::move(prov));
}

CanonicalImage RenderPointCloud(const PointCloud& cloud, int resolution) {
  if (cloud.points.empty()) {
    throw Error(ErrorCode::kEmptyCloud, "point cloud has no points");
  }
  if (resolution < 1) {
    throw Error(ErrorCode::kInvalidArgument, "resolution must be >= 1");
  }
  double x_min = std::numeric_limits<double>::infinity();
  double y_min = x_min, z_min = x_min;
  double x_max = -x_min, y_max = -x_min, z_max = -x_min;
  for (const auto& p : cloud.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw Error(ErrorCode::kNonFiniteCoordinate,
                  "point cloud contains a non-finite coordinate");
    }
    x_min = std::min(x_min, p.x);
    x_max = std::max(x_max, p.x);
    y_min = std::min(y_min, p.y);
    y_max = std::max(y_max, p.y);
    z_min = std::min(z_min, p.z);
    z_max = std::max(z_max, p.z);
  }

  const int res = resolution;
  auto cell = [res](double v, double lo, double hi) {
    const double extent = hi - lo;
    if (extent == 0.0) return -1;
    int c = static_cast<int>(std::floor((v - lo) / extent * res));
    return std::clamp(c, 0, res - 1);
  };

  std::vector<double> depth(static_cast<std::size_t>(res) * res,
                            std::numeric_limits<double>::infinity());
  for (const auto& p : cloud.points) {
    int cx = cell(p.x, x_min, x_max);
    int cy = cell(p.y, y_min, y_max);
    int col = cx < 0 ? res / 2 : cx;
    int row = cy < 0 ? res / 2 : (res - 1) - cy;
    double& d = depth[static_cast<std::size_t>(row) * res + col];
    d = std::min(d, p.z);
  }

  const double range = z_max - z_min;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(res) * res * 3, 0);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (std::isinf(depth[i])) continue;
    std::uint8_t v = 255;
    if (range > 0.0) {
      v = static_cast<std::uint8_t>(std::lround(255.0 * (z_max - depth[i]) / range));
    }
    px[i * 3] = px[i * 3 + 1] = px[i * 3 + 2] = v;
  }

  Provenance prov;
  prov.modality = Modality::kPointCloud;
  prov.params["projection"] = "orthographic_+z";
  prov.params["depth_polarity"] = "near_bright";
  prov.params["resolution"] = std::to_string(res);
  prov.params["points"] = std::to_string(cloud.points.size());
  prov.params["x_min"] = Num(x_min);
  prov.params["x_max"] = Num(x_max);
  prov.params["y_min"] = Num(y_min);
  prov.params["y_max"] = Num(y_max);
  prov.params["z_min"] = Num(z_min);
  prov.params["z_max"] = Num(z_max);
  return CanonicalImage(res, res, std::move(px), std::move(prov));
}

std::vector<PixelPos> MapSeriesToPixels(const TimeSeries& series,
                                        const ChartSpec& spec) {
  ValidateSeries(series);
  Validate(spec);
  double v_min = series.samples.front().v;
  double v_max = v_min;
  for (const auto& s : series.samples) {
    v_min = std::min(v_min, s.v);
    v_max = std::max(v_max, s.v);
  }
  const double t_min = series.samples.front().t;
  const double t_max = series.samples.back().t;
  const int pw = spec.plot_width();
  const int ph = spec.plot_height();
  std::vector<PixelPos> out;
  out.reserve(series.samples.size());
  for (const auto& s : series.samples) {
    int x = spec.margin +
            static_cast<int>(std::lround((s.t - t_min) / (t_max - t_min) * (pw - 1)));
    int y;
    if (v_max == v_min) {
      y = spec.margin + (ph - 1) / 2;
    } else {
      y = spec.margin + (ph - 1) -
          static_cast<int>(std::lround((s.v - v_min) / (v_max - v_min) * (ph - 1)));
    }
    out.push_back({x, y});
  }
  return out;
}

CanonicalImage RenderTimeSeries(const TimeSeries& series, const ChartSpec& spec) {
  const auto pts = MapSeriesToPixels(series, spec);
  const int w = spec.canvas_width;
  const int h = spec.canvas_height;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < px.size(); i += 3) {
    px[i] = spec.background_color[0];
    px[i + 1] = spec.background_color[1];
    px[i + 2] = spec.background_color[2];
  }
  if (spec.margin >= 1) {
    const int left = spec.margin - 1;
    const int bottom = spec.margin + spec.plot_height();
    for (int y = spec.margin - 1; y <= bottom; ++y) {
      SetPixel(px, w, left, y, spec.axis_color);
    }
    for (int x = left; x <= spec.margin + spec.plot_width(); ++x) {
      SetPixel(px, w, x, bottom, spec.axis_color);
    }
  }
  for (std::size_t i = 1; i < pts.size(); ++i) {
    DrawLine(px, w, pts[i - 1], pts[i], spec.line_color);
  }

  double v_min = series.samples.front().v, v_max = v_min;
  for (const auto& s : series.samples) {
    v_min = std::min(v_min, s.v);
    v_max = std::max(v_max, s.v);
  }
  Provenance prov;
  prov.modality = Modality::kTimeSeries;
  prov.params["samples"] = std::to_string(series.samples.size());
  prov.params["t_min"] = Num(series.samples.front().t);
  prov.params["t_max"] = Num(series.samples.back().t);
  prov.params["v_min"] = Num(v_min);
  prov.params["v_max"] = Num(v_max);
  prov.params["margin"] = std::to_string(spec.margin);
  return CanonicalImage(w, h, std::move(px), std::move(prov));
}

CanonicalImage TileVideoFrames(std::span<const CanonicalImage> frames,
                               int columns) {
  if (frames.empty()) {
    throw Error(ErrorCode::kEmptyFrameList, "no frames to tile");
  }
  if (columns < 1) {
    throw Error(ErrorCode::kInvalidArgument, "columns must be >= 1");
  }
  const int fw = frames.front().width();
  const int fh = frames.front().height();
  for (const auto& f : frames) {
    if (f.width() != fw || f.height() != fh) {
      throw Error(ErrorCode::kMixedFrameSizes, "frames differ in size");
    }
  }
  const int n = static_cast<int>(frames.size());
  const int rows = (n + columns - 1) / columns;
  const int w = columns * fw;
  const int h = rows * fh;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3, 0);
  for (int k = 0; k < n; ++k) {
    const int ox = (k % columns) * fw;
    const int oy = (k / columns) * fh;
    auto src = frames[k].pixels();
    for (int y = 0; y < fh; ++y) {
      std::memcpy(px.data() + (static_cast<std::size_t>(oy + y) * w + ox) * 3,
                  src.data() + static_cast<std::size_t>(y) * fw * 3,
                  static_cast<std::size_t>(fw) * 3);
    }
  }
  Provenance prov;
  prov.modality = Modality::kVideoFrames;
  prov.params["frames"] = std::to_string(n);
  prov.params["columns"] = std::to_string(columns);
  prov.params["frame_width"] = std::to_string(fw);
  prov.params["frame_height"] = std::to_string(fh);
  return CanonicalImage(w, h, std::move(px), std::move(prov));
}

PointCloud ParseXyz(std::string_view text) {
  PointCloud cloud;
  bool any_intensity = false;
  for (const auto& raw : SplitLines(text)) {
    std::string line = Trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto f = SplitFields(line);
    if (f.size() != 3 && f.size() != 4) {
      throw Error(ErrorCode::kDecodeFailed, "xyz line needs 3 or 4 fields: " + line);
    }
    cloud.points.push_back({ParseDouble(f[0], "xyz"), ParseDouble(f[1], "xyz"),
                            ParseDouble(f[2], "xyz")});
    if (f.size() == 4) {
      any_intensity = true;
      cloud.intensity.push_back(ParseDouble(f[3], "xyz"));
    } else {
      cloud.intensity.push_back(0.0);
    }
  }
  if (!any_intensity) cloud.intensity.clear();
  return cloud;
}

PointCloud ParseXyzBinary(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 12 != 0) {
    throw Error(ErrorCode::kDecodeFailed,
                "binary point file size is not a multiple of 12 bytes");
  }
  PointCloud cloud;
  cloud.points.reserve(bytes.size() / 12);
  auto read_f32 = [&](std::size_t at) {
    std::uint32_t u = static_cast<std::uint32_t>(bytes[at]) |
                      static_cast<std::uint32_t>(bytes[at + 1]) << 8 |
                      static_cast<std::uint32_t>(bytes[at + 2]) << 16 |
                      static_cast<std::uint32_t>(bytes[at + 3]) << 24;
    float f;
    std::memcpy(&f, &u, sizeof(f));
    return static_cast<double>(f);
  };
  for (std::size_t at = 0; at < bytes.size(); at += 12) {
    cloud.points.push_back({read_f32(at), read_f32(at + 4), read_f32(at + 8)});
  }
  return cloud;
}

TimeSeries ParseSeriesCsv(std::string_view text) {
  auto lines = SplitLines(text);
  std::size_t i = 0;
  while (i < lines.size() && Trim(lines[i]).empty()) ++i;
  if (i == lines.size()) throw Error(ErrorCode::kDecodeFailed, "empty csv");
  std::string header = Trim(lines[i]);
  if (header != "t,v") {
    throw Error(ErrorCode::kDecodeFailed, "csv header must be 't,v'");
  }
  TimeSeries series;
  series.t_label = "t";
  series.v_label = "v";
  for (++i; i < lines.size(); ++i) {
    std::string line = Trim(lines[i]);
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw Error(ErrorCode::kDecodeFailed, "csv row needs exactly 2 fields: " + line);
    }
    series.samples.push_back(
        {ParseDouble(Trim(std::string_view(line).substr(0, comma)), "csv"),
         ParseDouble(Trim(std::string_view(line).substr(comma + 1)), "csv")});
  }
  return series;
}

PointCloud LoadPointCloud(const std::filesystem::path& path) {
  std::string data = ReadFile(path);
  if (path.extension() == ".xyzbin") {
    return ParseXyzBinary({reinterpret_cast<const std::uint8_t*>(data.data()),
                           data.size()});
  }
  return ParseXyz(data);
}

TimeSeries LoadSeriesCsv(const std::filesystem::path& path) {
  return ParseSeriesCsv(ReadFile(path));
}

}  // namespace vlmad
