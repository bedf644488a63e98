#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "pflow/data.hpp"
#include "test_support.hpp"

using namespace pflow;
using Catch::Approx;

TEST_CASE("noiseless c_arc points sit exactly on the unit circle") {
  const DataCloud cloud = generate({ShapeKind::CArc, 200, 0.0, 3});
  REQUIRE(cloud.points.size() == 200);
  for (const Vec2 p : cloud.points) {
    REQUIRE(std::abs(norm(p) - 1.0) < 1e-12);
    // the 90-degree opening faces +x: no point inside (-45, 45) degrees
    const double theta = std::atan2(p.y, p.x);
    REQUIRE(std::abs(theta) >= 0.25 * kPi - 1e-12);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  const ShapeSpec spec{ShapeKind::YTwoBranch, 99, 0.02, 12};
  const DataCloud a = generate(spec);
  const DataCloud b = generate(spec);
  REQUIRE(a.points == b.points);
  ShapeSpec other = spec;
  other.seed = 13;
  REQUIRE(generate(other).points != a.points);
}

TEST_CASE("c_arc radial noise has the configured scale") {
  const DataCloud cloud = generate({ShapeKind::CArc, 5000, 0.05, 7});
  std::vector<double> radial;
  radial.reserve(cloud.points.size());
  for (const Vec2 p : cloud.points) radial.push_back(norm(p) - 1.0);
  const double sd = test_support::stddev(radial);
  REQUIRE(sd > 0.05 * 0.85);
  REQUIRE(sd < 0.05 * 1.15);
}

TEST_CASE("noiseless y shapes lie on their segments and stay balanced") {
  const DataCloud y2 = generate({ShapeKind::YTwoBranch, 301, 0.0, 5});
  int stem = 0, left = 0, right = 0;
  for (const Vec2 p : y2.points) {
    if (p.x == 0.0) {
      REQUIRE(p.y >= -1.0 - 1e-12);
      REQUIRE(p.y <= 1e-12);
      ++stem;
    } else {
      REQUIRE(std::abs(std::abs(p.x) - p.y) < 1e-12);  // on a 45-degree ray
      REQUIRE(norm(p) <= 1.0 + 1e-12);
      (p.x < 0 ? ++left : ++right);
    }
  }
  REQUIRE(stem + left + right == 301);
  REQUIRE(std::abs(left - right) <= 1);

  const DataCloud y3 = generate({ShapeKind::YThreeBranch, 300, 0.0, 5});
  int counts[3] = {0, 0, 0};
  for (const Vec2 p : y3.points) {
    const double r = norm(p);
    REQUIRE(r <= 1.0 + 1e-12);
    if (r < 1e-12) continue;  // the origin belongs to every branch
    const double theta = std::atan2(p.y, p.x);
    const double branch_angles[3] = {0.5 * kPi, 7.0 * kPi / 6.0 - kTwoPi, 11.0 * kPi / 6.0 - kTwoPi};
    int which = -1;
    for (int b = 0; b < 3; ++b)
      if (std::abs(std::remainder(theta - branch_angles[b], kTwoPi)) < 1e-9) which = b;
    REQUIRE(which >= 0);
    ++counts[which];
  }
  REQUIRE(std::abs(counts[0] - counts[1]) <= 1);
  REQUIRE(std::abs(counts[1] - counts[2]) <= 1);
}

TEST_CASE("shape anchors sit on their shapes") {
  REQUIRE(norm(shape_anchor(ShapeKind::CArc)) == Approx(1.0));
  REQUIRE(shape_anchor(ShapeKind::YTwoBranch) == Vec2{0.0, -1.0});
  REQUIRE(shape_anchor(ShapeKind::YThreeBranch) == Vec2{0.0, 0.0});
}

TEST_CASE("cloud_diameter on a known configuration") {
  DataCloud cloud;
  cloud.points = {{0.0, 0.0}, {3.0, 4.0}, {1.0, 1.0}};
  REQUIRE(cloud_diameter(cloud) == Approx(5.0));
}

TEST_CASE("shape spec validation") {
  REQUIRE_THROWS_AS(generate({ShapeKind::CArc, 5, 0.0, 1}), ConfigError);
  REQUIRE_THROWS_AS(generate({ShapeKind::CArc, 100, -0.1, 1}), ConfigError);
  REQUIRE_THROWS_AS(shape_from_string("banana"), ConfigError);
}

TEST_CASE("save/load round-trips a cloud losslessly") {
  const auto path = std::filesystem::temp_directory_path() / "pflow_cloud_test.csv";
  const DataCloud cloud = generate({ShapeKind::CArc, 64, 0.03, 21});
  save_cloud(path, cloud);
  const DataCloud loaded = load_cloud(path);
  REQUIRE(loaded.points == cloud.points);
  std::filesystem::remove(path);
}

TEST_CASE("load_cloud reports malformed files precisely") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path();

  const auto empty = dir / "pflow_empty.csv";
  { std::ofstream out(empty); }
  REQUIRE_THROWS_AS(load_cloud(empty), FormatError);

  const auto bad_header = dir / "pflow_bad_header.csv";
  { std::ofstream(bad_header) << "a,b\n1,2\n"; }
  REQUIRE_THROWS_AS(load_cloud(bad_header), FormatError);

  const auto header_only = dir / "pflow_header_only.csv";
  { std::ofstream(header_only) << "x,y\n"; }
  REQUIRE_THROWS_AS(load_cloud(header_only), FormatError);

  const auto bad_row = dir / "pflow_bad_row.csv";
  { std::ofstream(bad_row) << "x,y\n0.5,0.25\n1.0,abc\n"; }
  try {
    load_cloud(bad_row);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
  }

  REQUIRE_THROWS_AS(load_cloud(dir / "pflow_missing_file.csv"), IoError);

  fs::remove(empty);
  fs::remove(bad_header);
  fs::remove(header_only);
  fs::remove(bad_row);
}
