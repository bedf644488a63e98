#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "pflow/checkpoint.hpp"
#include "pflow/mlp.hpp"
#include "test_support.hpp"

using namespace pflow;
using Catch::Approx;

namespace {

ParamVector zero_params(const MLPArchitecture& arch) {
  return {arch, std::vector<double>(arch.param_count(), 0.0)};
}

// counting oracle: sum per-layer weight and bias counts independently
std::size_t count_params(const std::vector<int>& widths) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    n += static_cast<std::size_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  return n;
}

}  // namespace

TEST_CASE("init_params is deterministic and correctly sized") {
  MLPArchitecture arch{{2, 8, 2}, Activation::Tanh};
  const ParamVector a = init_params(arch, 42);
  const ParamVector b = init_params(arch, 42);
  REQUIRE(a.values == b.values);
  REQUIRE(a.values.size() == 42);  // 8*2+8 + 2*8+2

  MLPArchitecture big{{2, 64, 64, 2}, Activation::Tanh};
  REQUIRE(big.param_count() == 4482);
  REQUIRE(big.param_count() == count_params(big.layer_widths));
  REQUIRE(init_params(big, 7).values.size() == 4482);

  const ParamVector c = init_params(arch, 43);
  REQUIRE(a.values != c.values);

  // Glorot bounds hold and biases are zero
  const double limit0 = std::sqrt(6.0 / (2 + 8));
  for (int k = 0; k < 16; ++k) REQUIRE(std::abs(a.values[k]) <= limit0);
  for (int k = 16; k < 24; ++k) REQUIRE(a.values[k] == 0.0);
}

TEST_CASE("architecture validation rejects bad shapes") {
  REQUIRE_THROWS_AS(MLPArchitecture({{2, 0, 2}, Activation::Tanh}).validate(), ConfigError);
  REQUIRE_THROWS_AS(MLPArchitecture({{2, 2}, Activation::Tanh}).validate(), ConfigError);
  REQUIRE_THROWS_AS(MLPArchitecture({{3, 8, 2}, Activation::Tanh}).validate(), ConfigError);
  REQUIRE_THROWS_AS(MLPArchitecture({{2, 8, 3}, Activation::Tanh}).validate(), ConfigError);
  REQUIRE_THROWS_AS(init_params({{2, 0, 2}, Activation::Tanh}, 1), ConfigError);
}

TEST_CASE("mlp_forward zero net and purity") {
  MLPArchitecture arch{{2, 8, 2}, Activation::Tanh};
  const ParamVector p = zero_params(arch);
  REQUIRE(mlp_forward(p, {3.0, -1.5}) == Vec2{0.0, 0.0});

  const ParamVector q = init_params(arch, 5);
  const Vec2 a = mlp_forward(q, {0.3, 0.7});
  const Vec2 b = mlp_forward(q, {0.3, 0.7});
  REQUIRE(a == b);

  REQUIRE_THROWS_AS(mlp_forward(q, {std::nan(""), 0.0}), NumericError);
}

TEST_CASE("mlp_forward matches a hand-evaluated single tanh layer") {
  // one hidden layer of width 2; tiny weights keep tanh in its linear range
  MLPArchitecture arch{{2, 2, 2}, Activation::Tanh};
  ParamVector p = zero_params(arch);
  const double eps = 1e-6;
  // hidden W = eps * [[1, 2], [3, 4]], b = 0
  p.values[0] = eps * 1.0;
  p.values[1] = eps * 2.0;
  p.values[2] = eps * 3.0;
  p.values[3] = eps * 4.0;
  // output W = [[1, 0], [0, 1]], b = (0.5, -0.25)
  p.values[6] = 1.0;
  p.values[9] = 1.0;
  p.values[10] = 0.5;
  p.values[11] = -0.25;

  const Vec2 x{0.4, -0.9};
  const double h0 = std::tanh(eps * (1.0 * x.x + 2.0 * x.y));
  const double h1 = std::tanh(eps * (3.0 * x.x + 4.0 * x.y));
  const Vec2 got = mlp_forward(p, x);
  REQUIRE(got.x == Approx(h0 + 0.5).margin(1e-9));
  REQUIRE(got.y == Approx(h1 - 0.25).margin(1e-9));
}

TEST_CASE("mlp_forward agrees with an independent reimplementation") {
  for (const auto& widths : {std::vector<int>{2, 8, 2}, {2, 16, 16, 2}, {2, 5, 3, 2}}) {
    for (const Activation act : {Activation::Tanh, Activation::Relu}) {
      MLPArchitecture arch{widths, act};
      const ParamVector p = init_params(arch, 11);
      Rng rng(99);
      for (int k = 0; k < 20; ++k) {
        const Vec2 x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const Vec2 got = mlp_forward(p, x);
        const Vec2 want = test_support::reference_forward(p, x);
        REQUIRE(got.x == Approx(want.x).margin(1e-12));
        REQUIRE(got.y == Approx(want.y).margin(1e-12));
      }
    }
  }
}

TEST_CASE("mlp_vjp zero cotangent gives zero gradients") {
  MLPArchitecture arch{{2, 8, 2}, Activation::Tanh};
  const ParamVector p = init_params(arch, 3);
  const auto [gp, gx] = mlp_vjp(p, {0.2, -0.4}, {0.0, 0.0});
  for (double g : gp) REQUIRE(g == 0.0);
  REQUIRE(gx == Vec2{0.0, 0.0});
}

TEST_CASE("mlp_vjp parameter gradients match finite differences") {
  MLPArchitecture arch{{2, 8, 2}, Activation::Tanh};
  const ParamVector p = init_params(arch, 17);
  const Vec2 x{0.35, -0.6};
  const Vec2 cot{0.8, -1.3};
  const auto [gp, gx] = mlp_vjp(p, x, cot);

  const auto scalar = [&](const std::vector<double>& values) {
    const ParamVector q{arch, values};
    return dot(cot, mlp_forward(q, x));
  };
  const std::vector<double> fd = test_support::fd_gradient(scalar, p.values, 1e-5);
  REQUIRE(test_support::max_rel_err(gp, fd, 1e-7) < 1e-6);
}

TEST_CASE("mlp_vjp input gradient equals the weight-matrix product for a linear regime net") {
  MLPArchitecture arch{{2, 4, 2}, Activation::Tanh};
  const ParamVector p = init_params(arch, 23);
  // inputs of order 1e-5 keep every tanh within ~1e-10 of identity
  const Vec2 x{1.2e-5, -0.7e-5};
  const Vec2 cot{0.4, 1.1};
  const auto [gp, gx] = mlp_vjp(p, x, cot);

  // W1^T (W2^T c) with W2 read from the canonical layout
  double h[4];
  for (int j = 0; j < 4; ++j)
    h[j] = p.values[12 + 0 * 4 + j] * cot.x + p.values[12 + 1 * 4 + j] * cot.y;
  Vec2 want{0.0, 0.0};
  for (int i = 0; i < 4; ++i) {
    want.x += p.values[static_cast<std::size_t>(i) * 2 + 0] * h[i];
    want.y += p.values[static_cast<std::size_t>(i) * 2 + 1] * h[i];
  }
  REQUIRE(gx.x == Approx(want.x).margin(1e-8));
  REQUIRE(gx.y == Approx(want.y).margin(1e-8));
}

TEST_CASE("mlp_vjp matches finite differences across architectures and cotangents") {
  Rng rng(1234);
  for (const auto& widths :
       {std::vector<int>{2, 4, 2}, {2, 8, 2}, {2, 8, 8, 2}, {2, 16, 16, 2}}) {
    MLPArchitecture arch{widths, Activation::Tanh};
    const ParamVector p = init_params(arch, static_cast<std::uint64_t>(rng.uniform(0, 1) * 1e6));
    const Vec2 x{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    const Vec2 cot{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const auto [gp, gx] = mlp_vjp(p, x, cot);
    const auto scalar = [&](const std::vector<double>& values) {
      return dot(cot, mlp_forward({arch, values}, x));
    };
    const std::vector<double> fd = test_support::fd_gradient(scalar, p.values, 1e-5);
    REQUIRE(test_support::max_rel_err(gp, fd, 1e-6) < 1e-5);

    // input gradient against finite differences too
    const double h = 1e-6;
    const Vec2 up_x = mlp_forward(p, {x.x + h, x.y});
    const Vec2 dn_x = mlp_forward(p, {x.x - h, x.y});
    const Vec2 up_y = mlp_forward(p, {x.x, x.y + h});
    const Vec2 dn_y = mlp_forward(p, {x.x, x.y - h});
    REQUIRE(gx.x == Approx((dot(cot, up_x) - dot(cot, dn_x)) / (2 * h)).epsilon(1e-5).margin(1e-9));
    REQUIRE(gx.y == Approx((dot(cot, up_y) - dot(cot, dn_y)) / (2 * h)).epsilon(1e-5).margin(1e-9));
  }
}

TEST_CASE("checkpoint round-trips parameters bit-for-bit") {
  const auto path = std::filesystem::temp_directory_path() / "pflow_test_ckpt.json";
  MLPArchitecture arch{{2, 8, 8, 2}, Activation::Relu};
  const ParamVector p = init_params(arch, 77);
  save_checkpoint(path, p);
  const ParamVector q = load_checkpoint(path);
  REQUIRE(q.arch.layer_widths == p.arch.layer_widths);
  REQUIRE(q.arch.activation == p.arch.activation);
  REQUIRE(q.values == p.values);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loading rejects malformed files") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path();

  const auto bad_json = dir / "pflow_bad1.json";
  { std::ofstream(bad_json) << "not json at all"; }
  REQUIRE_THROWS_AS(load_checkpoint(bad_json), FormatError);

  const auto missing_field = dir / "pflow_bad2.json";
  { std::ofstream(missing_field) << R"({"format_version":1,"layer_widths":[2,4,2]})"; }
  REQUIRE_THROWS_AS(load_checkpoint(missing_field), FormatError);

  const auto wrong_len = dir / "pflow_bad3.json";
  {
    std::ofstream(wrong_len)
        << R"({"format_version":1,"layer_widths":[2,4,2],"activation":"tanh","values":[1,2,3]})";
  }
  REQUIRE_THROWS_AS(load_checkpoint(wrong_len), FormatError);

  REQUIRE_THROWS_AS(load_checkpoint(dir / "pflow_does_not_exist.json"), IoError);

  fs::remove(bad_json);
  fs::remove(missing_field);
  fs::remove(wrong_len);
}
