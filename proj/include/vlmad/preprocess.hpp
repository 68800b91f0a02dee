#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlmad/core_types.hpp"

namespace vlmad {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct PointCloud {
  std::vector<Point3> points;
  // Optional, one entry per point in [0,1]. Not used by the depth renderer.
  std::vector<double> intensity;
};

struct TimeSample {
  double t = 0.0;
  double v = 0.0;
};

struct TimeSeries {
  std::vector<TimeSample> samples;
  std::string t_label;
  std::string v_label;
};

using Rgb = std::array<std::uint8_t, 3>;

struct ChartSpec {
  int canvas_width = 512;
  int canvas_height = 256;
  int margin = 16;
  Rgb line_color{0, 0, 0};
  Rgb background_color{255, 255, 255};
  Rgb axis_color{128, 128, 128};

  int plot_width() const { return canvas_width - 2 * margin; }
  int plot_height() const { return canvas_height - 2 * margin; }
};

// Throws kInvalidArgument unless the plot area is at least 16x16.
void Validate(const ChartSpec& spec);

// Decodes a raster file and downscales (never upscales) so that the longest
// side is at most max_dim. The scaled short side is floor(short*max_dim/long).
// Resampling is an exact box (area-average) filter.
CanonicalImage CanonicalizeImage(std::span<const std::uint8_t> bytes,
                                 int max_dim);

// Orthographic depth render along +z. The nearest point (minimum z) wins each
// pixel; z_min maps to 255 and z_max to 0; empty pixels are black. x grows to
// the right and y grows upward. An axis with zero extent maps to pixel
// index resolution/2.
CanonicalImage RenderPointCloud(const PointCloud& cloud, int resolution);

// Line chart of the series: polyline in line_color, left and bottom axes one
// pixel outside the plot area in axis_color, no labels.
CanonicalImage RenderTimeSeries(const TimeSeries& series, const ChartSpec& spec);

// Row-major grid of equally sized frames; unused cells are black.
CanonicalImage TileVideoFrames(std::span<const CanonicalImage> frames,
                               int columns);

// Plot-area pixel for a sample, exposed so tests can check the mapping.
struct PixelPos {
  int x = 0;
  int y = 0;
  bool operator==(const PixelPos&) const = default;
};
std::vector<PixelPos> MapSeriesToPixels(const TimeSeries& series,
                                        const ChartSpec& spec);

// ---- input formats ----

// ASCII: one "x y z [intensity]" per line; blank lines and '#' comments skipped.
PointCloud ParseXyz(std::string_view text);
// Little-endian float32 triples.
PointCloud ParseXyzBinary(std::span<const std::uint8_t> bytes);
// CSV with header "t,v".
TimeSeries ParseSeriesCsv(std::string_view text);

PointCloud LoadPointCloud(const std::filesystem::path& path);
TimeSeries LoadSeriesCsv(const std::filesystem::path& path);

}  // namespace vlmad
