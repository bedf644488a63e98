#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pflow/csv.hpp"
#include "pflow/field.hpp"
#include "pflow/rng.hpp"

namespace pflow {

enum class Scheme { Euler, Rk4 };

inline const char* to_string(Scheme s) { return s == Scheme::Euler ? "euler" : "rk4"; }

inline Scheme scheme_from_string(std::string_view s) {
  if (s == "euler") return Scheme::Euler;
  if (s == "rk4") return Scheme::Rk4;
  throw ConfigError("unknown scheme \"" + std::string(s) + "\" (expected euler or rk4)");
}

struct IntegratorSpec {
  Scheme scheme = Scheme::Rk4;
  double dt = 0.05;
  int n_steps = 1;

  double horizon() const { return dt * n_steps; }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("integrator dt must be positive");
    if (n_steps < 1) throw ConfigError("integrator n_steps must be >= 1");
  }
};

// States recorded at t0 + k*dt, initial state included.
struct Trajectory {
  std::vector<Vec2> states;
  double dt = 0.0;
  double t0 = 0.0;

  double time_at(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
};

// One explicit step of the autonomous field.
template <field_evaluator F>
Vec2 step(const F& f, Vec2 x, double dt, Scheme scheme) {
  if (!(dt > 0.0)) throw ContractError("step: dt must be positive");
  if (scheme == Scheme::Euler) return x + dt * f(x);
  const Vec2 k1 = f(x);
  const Vec2 k2 = f(x + (0.5 * dt) * k1);
  const Vec2 k3 = f(x + (0.5 * dt) * k2);
  const Vec2 k4 = f(x + dt * k3);
  return x + dt * ((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0);
}

namespace detail {
inline void check_state(Vec2 x, int step_index) {
  if (!x.finite())
    throw NumericError("integration diverged at step " + std::to_string(step_index));
}
}  // namespace detail

// Terminal state after n_steps steps. n_steps == 0 is the zero-horizon
// identity short-circuit.
template <field_evaluator F>
Vec2 flow_map(const F& f, Vec2 x0, const IntegratorSpec& spec) {
  if (spec.n_steps == 0) return x0;
  spec.validate();
  Vec2 x = x0;
  for (int k = 0; k < spec.n_steps; ++k) {
    x = step(f, x, spec.dt, spec.scheme);
    detail::check_state(x, k);
  }
  return x;
}

// Unrolled integration with optional Gaussian noise injected at the end of
// each step (noise_sigma per component); reproducible from the seed. The
// last state equals flow_map's output bit-for-bit when noise_sigma == 0.
template <field_evaluator F>
Trajectory simulate_trajectory(const F& f, Vec2 x0, const IntegratorSpec& spec,
                               double noise_sigma = 0.0, std::uint64_t seed = 0) {
  spec.validate();
  if (noise_sigma < 0.0) throw ContractError("simulate_trajectory: noise_sigma must be >= 0");
  if (!x0.finite()) throw NumericError("simulate_trajectory: non-finite initial state");
  Trajectory traj;
  traj.dt = spec.dt;
  traj.states.reserve(static_cast<std::size_t>(spec.n_steps) + 1);
  traj.states.push_back(x0);
  Rng rng(seed);
  Vec2 x = x0;
  for (int k = 0; k < spec.n_steps; ++k) {
    x = step(f, x, spec.dt, spec.scheme);
    if (noise_sigma > 0.0) x += rng.normal2(noise_sigma);
    detail::check_state(x, k);
    traj.states.push_back(x);
  }
  return traj;
}

// Per-thread scratch for the reverse pass (one workspace per rk4 stage).
struct SolverVjpWorkspace {
  MLPWorkspace stage[4];
};

namespace detail {

// Reverse-mode step: accumulates d<cot, step(z)>/dparams into grad_params
// and returns d<cot, step(z)>/dz. Stage states are recomputed from z, so
// recorded trajectories with additive noise backprop exactly (the noise is a
// constant in the backward pass).
inline Vec2 step_vjp(const VelocityField& f, Vec2 z, double dt, Scheme scheme, Vec2 cot,
                     std::span<double> grad_params, SolverVjpWorkspace& ws) {
  const ParamVector& p = f.params;
  if (scheme == Scheme::Euler) {
    const Vec2 raw = ws.stage[0].forward(p, z);
    const Vec2 gx = ws.stage[0].vjp(p, normalized_cotangent(raw, f.epsilon, dt * cot), grad_params);
    return cot + gx;
  }
  const Vec2 raw1 = ws.stage[0].forward(p, z);
  const Vec2 k1 = normalize_soft(raw1, f.epsilon);
  const Vec2 x2 = z + (0.5 * dt) * k1;
  const Vec2 raw2 = ws.stage[1].forward(p, x2);
  const Vec2 k2 = normalize_soft(raw2, f.epsilon);
  const Vec2 x3 = z + (0.5 * dt) * k2;
  const Vec2 raw3 = ws.stage[2].forward(p, x3);
  const Vec2 k3 = normalize_soft(raw3, f.epsilon);
  const Vec2 x4 = z + dt * k3;
  const Vec2 raw4 = ws.stage[3].forward(p, x4);

  const Vec2 l4 = (dt / 6.0) * cot;
  const Vec2 g4 = ws.stage[3].vjp(p, normalized_cotangent(raw4, f.epsilon, l4), grad_params);
  const Vec2 l3 = (dt / 3.0) * cot + dt * g4;
  const Vec2 g3 = ws.stage[2].vjp(p, normalized_cotangent(raw3, f.epsilon, l3), grad_params);
  const Vec2 l2 = (dt / 3.0) * cot + (0.5 * dt) * g3;
  const Vec2 g2 = ws.stage[1].vjp(p, normalized_cotangent(raw2, f.epsilon, l2), grad_params);
  const Vec2 l1 = (dt / 6.0) * cot + (0.5 * dt) * g2;
  const Vec2 g1 = ws.stage[0].vjp(p, normalized_cotangent(raw1, f.epsilon, l1), grad_params);
  return cot + g1 + g2 + g3 + g4;
}

}  // namespace detail

// Gradient of sum_k <cotangent_k, state_k> with respect to the field
// parameters, by unrolling the recorded trajectory backwards through every
// integrator stage. Accumulates into grad_params.
inline void backprop_through_solver(const VelocityField& f, const Trajectory& traj,
                                    std::span<const Vec2> state_cotangents, Scheme scheme,
                                    std::span<double> grad_params, SolverVjpWorkspace& ws) {
  if (traj.states.empty()) throw ContractError("backprop_through_solver: empty trajectory");
  if (state_cotangents.size() != traj.states.size())
    throw ContractError("backprop_through_solver: need one cotangent per state");
  if (grad_params.size() != f.params.values.size())
    throw ContractError("backprop_through_solver: gradient buffer length mismatch");
  if (traj.states.size() > 1 && !(traj.dt > 0.0))
    throw ContractError("backprop_through_solver: trajectory has no step size");
  const int n = static_cast<int>(traj.states.size());
  Vec2 adjoint = state_cotangents[n - 1];
  for (int k = n - 2; k >= 0; --k) {
    adjoint = detail::step_vjp(f, traj.states[k], traj.dt, scheme, adjoint, grad_params, ws);
    adjoint += state_cotangents[k];
  }
}

inline std::vector<double> backprop_through_solver(const VelocityField& f, const Trajectory& traj,
                                                   std::span<const Vec2> state_cotangents,
                                                   Scheme scheme) {
  std::vector<double> grads(f.params.values.size(), 0.0);
  SolverVjpWorkspace ws;
  backprop_through_solver(f, traj, state_cotangents, scheme, grads, ws);
  return grads;
}

// Plot-ready dump: one row per recorded state.
inline void write_trajectory_csv(const std::filesystem::path& path,
                                 std::span<const Trajectory> trajectories) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "traj_id,step,t,x,y\n";
  for (std::size_t t = 0; t < trajectories.size(); ++t)
    for (std::size_t k = 0; k < trajectories[t].states.size(); ++k) {
      const Vec2 s = trajectories[t].states[k];
      out << t << ',' << k << ',' << format_double(trajectories[t].time_at(k)) << ','
          << format_double(s.x) << ',' << format_double(s.y) << '\n';
    }
  if (!out.good()) throw IoError("failed writing " + path.string());
}

}  // namespace pflow
