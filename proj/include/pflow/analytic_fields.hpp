#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "pflow/csv.hpp"
#include "pflow/field.hpp"

namespace pflow {

// Closed-form fields used as oracles and as CLI test hooks. These bypass the
// learned network and its output normalization.

struct ConstantField {
  Vec2 v;
  Vec2 operator()(Vec2) const { return v; }
};

// Rigid-body rotation: unit angular velocity at every radius.
struct RigidRotationField {
  Vec2 operator()(Vec2 p) const { return {-p.y, p.x}; }
};

// Unit-speed counterclockwise rotation (soft-normalized tangential field).
struct NormalizedRotationField {
  double epsilon = 1e-8;
  Vec2 operator()(Vec2 p) const { return normalize_soft(Vec2{-p.y, p.x}, epsilon); }
};

// Linear saddle g(x, y) = (x, -y); flow map (x e^T, y e^-T).
struct SaddleField {
  Vec2 operator()(Vec2 p) const { return {p.x, -p.y}; }
};

using AnyField = std::function<Vec2(Vec2)>;

// Accepts "constant:vx,vy", "rotation", "rigid_rotation", "saddle".
inline AnyField make_analytic_field(std::string_view name) {
  if (name == "rotation") return NormalizedRotationField{};
  if (name == "rigid_rotation") return RigidRotationField{};
  if (name == "saddle") return SaddleField{};
  constexpr std::string_view prefix = "constant:";
  if (name.substr(0, std::min(name.size(), prefix.size())) == prefix) {
    const auto rest = name.substr(prefix.size());
    const auto comma = rest.find(',');
    double vx = 0.0, vy = 0.0;
    if (comma == std::string_view::npos || !parse_double(rest.substr(0, comma), vx) ||
        !parse_double(rest.substr(comma + 1), vy))
      throw ConfigError("bad analytic field \"" + std::string(name) +
                        "\" (expected constant:vx,vy)");
    return ConstantField{{vx, vy}};
  }
  throw ConfigError("unknown analytic field \"" + std::string(name) +
                    "\" (expected constant:vx,vy, rotation, rigid_rotation or saddle)");
}

}  // namespace pflow
