#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "pflow/csv.hpp"
#include "pflow/loss.hpp"
#include "pflow/rng.hpp"

namespace pflow {

enum class ShapeKind { CArc, YTwoBranch, YThreeBranch };

inline const char* to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::CArc: return "c_arc";
    case ShapeKind::YTwoBranch: return "y_two_branch";
    default: return "y_three_branch";
  }
}

inline ShapeKind shape_from_string(std::string_view s) {
  if (s == "c_arc") return ShapeKind::CArc;
  if (s == "y_two_branch") return ShapeKind::YTwoBranch;
  if (s == "y_three_branch") return ShapeKind::YThreeBranch;
  throw ConfigError("unknown shape \"" + std::string(s) +
                    "\" (expected c_arc, y_two_branch or y_three_branch)");
}

struct ShapeSpec {
  ShapeKind kind = ShapeKind::CArc;
  int n_points = 500;
  double noise_std = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_points < 10) throw ConfigError("shape needs n_points >= 10");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
      throw ConfigError("shape noise_std must be >= 0");
  }
};

// Frozen shape geometry. The "C" is the 270-degree unit-circle arc whose
// opening faces +x; the "Y" stem runs from (0,-1) to the origin with branches
// of length 1 at +-45 degrees off the stem axis; the three-branch shape has
// unit branches at 90, 210 and 330 degrees from the origin.
inline constexpr double kCArcStart = 0.25 * kPi;
inline constexpr double kCArcEnd = 1.75 * kPi;

// Initial-condition anchors used by the bundled experiments: the tip of the
// "C", the base of the "Y" stem, the junction of the three-branch shape.
inline Vec2 shape_anchor(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::CArc: return {std::cos(kCArcStart), std::sin(kCArcStart)};
    case ShapeKind::YTwoBranch: return {0.0, -1.0};
    default: return {0.0, 0.0};
  }
}

inline DataCloud generate(const ShapeSpec& spec) {
  spec.validate();
  Rng rng(stream_seed(spec.seed, RngStream::DataGen));
  DataCloud cloud;
  cloud.name = to_string(spec.kind);
  cloud.points.reserve(spec.n_points);

  const double s45 = std::sqrt(0.5);
  // segment origins/directions for the branched shapes; points cycle through
  // segments so populations stay balanced within one point.
  const Vec2 y2_origin[3] = {{0.0, -1.0}, {0.0, 0.0}, {0.0, 0.0}};
  const Vec2 y2_dir[3] = {{0.0, 1.0}, {-s45, s45}, {s45, s45}};
  const Vec2 y3_dir[3] = {{std::cos(0.5 * kPi), std::sin(0.5 * kPi)},
                          {std::cos(7.0 * kPi / 6.0), std::sin(7.0 * kPi / 6.0)},
                          {std::cos(11.0 * kPi / 6.0), std::sin(11.0 * kPi / 6.0)}};

  for (int i = 0; i < spec.n_points; ++i) {
    Vec2 p;
    switch (spec.kind) {
      case ShapeKind::CArc: {
        const double theta = rng.uniform(kCArcStart, kCArcEnd);
        p = {std::cos(theta), std::sin(theta)};
        break;
      }
      case ShapeKind::YTwoBranch: {
        const int seg = i % 3;
        p = y2_origin[seg] + rng.uniform01() * y2_dir[seg];
        break;
      }
      default: {
        const int seg = i % 3;
        p = rng.uniform01() * y3_dir[seg];
        break;
      }
    }
    cloud.points.push_back(p + rng.normal2(spec.noise_std));
  }
  return cloud;
}

// Max pairwise distance; used to pick the default training horizon.
inline double cloud_diameter(const DataCloud& cloud) {
  double best = 0.0;
  for (std::size_t i = 0; i < cloud.points.size(); ++i)
    for (std::size_t j = i + 1; j < cloud.points.size(); ++j)
      best = std::max(best, norm2(cloud.points[i] - cloud.points[j]));
  return std::sqrt(best);
}

inline void save_cloud(const std::filesystem::path& path, const DataCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "x,y\n";
  for (const Vec2 p : cloud.points)
    out << format_double(p.x) << ',' << format_double(p.y) << '\n';
  if (!out.good()) throw IoError("failed writing " + path.string());
}

inline DataCloud load_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty point-cloud file: " + path.string());
  if (strip_cr(line) != "x,y")
    throw FormatError("point-cloud file " + path.string() + " must start with header \"x,y\"");
  DataCloud cloud;
  cloud.name = path.stem().string();
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = strip_cr(line);
    if (row.empty()) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": empty row");
    }
    const auto comma = row.find(',');
    Vec2 p;
    if (comma == std::string_view::npos || !parse_double(row.substr(0, comma), p.x) ||
        !parse_double(row.substr(comma + 1), p.y))
      throw ParseError(path.string() + " line " + std::to_string(line_no) +
                       ": expected two decimal fields, got \"" + std::string(row) + "\"");
    if (!p.finite())
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": non-finite point");
    cloud.points.push_back(p);
  }
  if (cloud.points.empty()) throw FormatError("no data rows in " + path.string());
  return cloud;
}

}  // namespace pflow
