#pragma once

#include <concepts>
#include <span>

#include "pflow/mlp.hpp"

namespace pflow {

// Anything that maps a planar point to a planar velocity. Deliberately
// time-free: flows in this library are autonomous by construction.
template <class F>
concept field_evaluator = requires(const F& f, Vec2 x) {
  { f(x) } -> std::convertible_to<Vec2>;
};

inline Vec2 normalize_soft(Vec2 v, double epsilon) {
  return v * (1.0 / (norm(v) + epsilon));
}

// Cotangent pullback through v -> v/(|v|+eps):
//   J = I/(|v|+eps) - v v^T / (|v| (|v|+eps)^2)
// At v = 0 exactly, the rank-1 term is dropped (subgradient, documented).
inline Vec2 normalized_cotangent(Vec2 raw, double epsilon, Vec2 cotangent) {
  const double n = norm(raw);
  const double s = 1.0 / (n + epsilon);
  Vec2 out = cotangent * s;
  if (n > 0.0) out -= raw * (dot(raw, cotangent) / (n * (n + epsilon) * (n + epsilon)));
  return out;
}

// The learned velocity field g(x)/(|g(x)|+epsilon): unit speed wherever the
// raw network output is far from zero, vanishing where it vanishes (which is
// what permits approximate fixed points).
struct VelocityField {
  ParamVector params;
  double epsilon = 1e-8;

  Vec2 operator()(Vec2 x) const;
};

inline Vec2 eval_field(const VelocityField& f, Vec2 x, MLPWorkspace& ws) {
  const Vec2 raw = ws.forward(f.params, x);
  if (!raw.finite())
    throw NumericError("velocity field produced a non-finite value at " + to_string(x));
  return normalize_soft(raw, f.epsilon);
}

inline Vec2 VelocityField::operator()(Vec2 x) const {
  thread_local MLPWorkspace ws;
  return eval_field(*this, x, ws);
}

// Reverse-mode derivative of eval_field through the normalization.
// Accumulates parameter gradients into grad_params (empty span to skip) and
// returns the gradient with respect to x.
inline Vec2 eval_field_vjp(const VelocityField& f, Vec2 x, Vec2 cotangent,
                           MLPWorkspace& ws, std::span<double> grad_params) {
  const Vec2 raw = ws.forward(f.params, x);
  if (!raw.finite())
    throw NumericError("velocity field produced a non-finite value at " + to_string(x));
  return ws.vjp(f.params, normalized_cotangent(raw, f.epsilon, cotangent), grad_params);
}

}  // namespace pflow
