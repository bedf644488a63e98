#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <utility>
#include <vector>

#include "pflow/analytic_fields.hpp"
#include "pflow/loss.hpp"
#include "pflow/parallel.hpp"
#include "pflow/prc_curve.hpp"
#include "pflow/train.hpp"

namespace pflow {

// Parameters of the type-two target curve
//   M(phi) = scale * (sigma_phi - A1 sin(phi - xi1) - A2 sin(2 phi + xi2)).
struct PRCParams {
  double sigma_phi = 0.05;
  double xi1 = 0.0;
  double xi2 = 0.0;
  double A1 = 0.4;
  double A2 = 0.2;
  double scale = 100.0;
};

inline PRCCurve target_prc(std::span<const double> phases, const PRCParams& p) {
  PRCCurve curve;
  curve.phases.assign(phases.begin(), phases.end());
  curve.shifts.reserve(phases.size());
  for (const double phi : phases)
    curve.shifts.push_back(
        p.scale * (p.sigma_phi - p.A1 * std::sin(phi - p.xi1) - p.A2 * std::sin(2.0 * phi + p.xi2)));
  return curve;
}

inline std::vector<double> uniform_phase_grid(int n) {
  if (n < 1) throw ConfigError("phase grid needs at least one sample");
  std::vector<double> phases(n);
  for (int i = 0; i < n; ++i) phases[i] = kTwoPi * i / n;
  return phases;
}

// Polar oscillator state; bijective with Cartesian via (a cos phi, a sin phi).
struct OscState {
  double phase = 0.0;      // radians in [0, 2pi)
  double amplitude = 1.0;  // radius, > 0

  Vec2 to_cartesian() const {
    return {amplitude * std::cos(phase), amplitude * std::sin(phase)};
  }
  static OscState from_cartesian(Vec2 v) {
    double a = std::atan2(v.y, v.x);
    if (a < 0.0) a += kTwoPi;
    return {a, norm(v)};
  }
};

// Instantaneous amplitude kick at constant phase.
inline OscState apply_perturbation(OscState s, double delta_a) {
  const double a = s.amplitude + delta_a;
  if (!(a > 0.0))
    throw ContractError("apply_perturbation: resulting amplitude must stay positive");
  return {s.phase, a};
}

enum class AngleUnit { Degrees, Radians };

namespace detail {

// (-pi, pi]
inline double wrap_angle(double a) {
  double w = std::remainder(a, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

inline double shift_unit_scale(AngleUnit unit) {
  return unit == AngleUnit::Degrees ? 180.0 / kPi : 1.0;
}

inline double phase_shift_readout(Vec2 ref_end, Vec2 pert_end, AngleUnit unit) {
  const double d = wrap_angle(std::atan2(pert_end.y, pert_end.x) - std::atan2(ref_end.y, ref_end.x));
  return d * shift_unit_scale(unit);
}

// d atan2(p.y, p.x) / dp
inline Vec2 angle_cotangent(Vec2 p) { return Vec2{-p.y, p.x} * (1.0 / norm2(p)); }

inline void require_relax_horizon(const IntegratorSpec& relax) {
  relax.validate();
  if (relax.horizon() < kTwoPi - 1e-9)
    throw ContractError("relax horizon must cover at least one nominal period (2*pi)");
}

}  // namespace detail

struct PhaseShiftSample {
  double shift = 0.0;   // perturbed minus reference, in (-180, 180] degrees by default
  bool relaxed = true;  // perturbed amplitude returned to |a - 1| < 0.1 by horizon end
};

// Integrates a perturbed copy and an unperturbed reference from phase phi0 on
// the unit circle, then reads the terminal angular difference.
template <field_evaluator F>
PhaseShiftSample measure_phase_shift(const F& f, double phi0, double delta_a,
                                     const IntegratorSpec& relax,
                                     AngleUnit unit = AngleUnit::Degrees) {
  detail::require_relax_horizon(relax);
  const OscState start{phi0, 1.0};
  const Vec2 ref_end = flow_map(f, start.to_cartesian(), relax);
  const Vec2 pert_end = flow_map(f, apply_perturbation(start, delta_a).to_cartesian(), relax);
  return {detail::phase_shift_readout(ref_end, pert_end, unit),
          std::abs(norm(pert_end) - 1.0) < 0.1};
}

struct PRCSimulation {
  PRCCurve curve;
  std::vector<std::uint8_t> relaxed;  // per-sample relaxation flag
};

template <field_evaluator F>
PRCSimulation simulate_prc(const F& f, std::span<const double> phases, double delta_a,
                           const IntegratorSpec& relax, AngleUnit unit = AngleUnit::Degrees) {
  PRCSimulation sim;
  sim.curve.phases.assign(phases.begin(), phases.end());
  sim.curve.shifts.reserve(phases.size());
  sim.relaxed.reserve(phases.size());
  for (const double phi : phases) {
    const PhaseShiftSample s = measure_phase_shift(f, phi, delta_a, relax, unit);
    sim.curve.shifts.push_back(s.shift);
    sim.relaxed.push_back(s.relaxed ? 1 : 0);
  }
  return sim;
}

inline void write_prc_csv(const std::filesystem::path& path, const PRCSimulation& sim,
                          const PRCCurve* target = nullptr) {
  if (target && target->phases != sim.curve.phases)
    throw ContractError("write_prc_csv: target phase grid differs from the simulated one");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "phi_rad,target_shift,simulated_shift,relaxed_flag\n";
  for (std::size_t k = 0; k < sim.curve.phases.size(); ++k) {
    out << format_double(sim.curve.phases[k]) << ',';
    if (target) out << format_double(target->shifts[k]);
    out << ',' << format_double(sim.curve.shifts[k]) << ','
        << static_cast<int>(sim.relaxed[k]) << '\n';
  }
  if (!out.good()) throw IoError("failed writing " + path.string());
}

struct PRCFitOptions {
  // Start from a field already following the unit circle (tangent flow plus
  // a mild radial pull); a cold random field gives the phase readout nothing
  // to hold on to.
  bool warm_start = true;
  int warm_start_iterations = 400;
  int warm_start_samples = 256;
  double warm_start_attraction = 1.0;
  double warm_start_lr = 1e-2;
  AngleUnit unit = AngleUnit::Degrees;
};

namespace detail {

// Least-squares fit of the normalized field to the circle-following target
// on an annulus around the unit circle. Deterministic from the seed.
inline void warm_start_circle_field(VelocityField& field, const PRCFitOptions& opts,
                                    std::uint64_t seed) {
  Rng rng(stream_seed(seed, RngStream::WarmStart));
  std::vector<Vec2> samples(opts.warm_start_samples);
  std::vector<Vec2> targets(opts.warm_start_samples);
  for (int s = 0; s < opts.warm_start_samples; ++s) {
    const double r = rng.uniform(0.5, 1.5);
    const double a = rng.uniform(0.0, kTwoPi);
    const Vec2 p{r * std::cos(a), r * std::sin(a)};
    samples[s] = p;
    const Vec2 radial = p * (1.0 / r);
    const Vec2 tangent{-radial.y, radial.x};
    const Vec2 u = tangent - (opts.warm_start_attraction * (r - 1.0)) * radial;
    targets[s] = u * (1.0 / norm(u));
  }
  MLPWorkspace ws;
  AdamState adam;
  std::vector<double> grad(field.params.values.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(opts.warm_start_samples);
  for (int it = 0; it < opts.warm_start_iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int s = 0; s < opts.warm_start_samples; ++s) {
      const Vec2 raw = ws.forward(field.params, samples[s]);
      const Vec2 v = normalize_soft(raw, field.epsilon);
      const Vec2 diff = v - targets[s];
      ws.vjp(field.params, normalized_cotangent(raw, field.epsilon, (2.0 * inv_n) * diff), grad);
    }
    adam_step(field.params.values, grad, adam, opts.warm_start_lr, 0.9, 0.999);
  }
}

}  // namespace detail

// Fits the field so that its simulated phase-response curve matches the
// target while the unperturbed oscillation stays on the unit circle:
//   L = prc_mse(target, simulated) + lambda_circle * unit_circle_penalty.
// cfg.integrator is the relaxation horizon for each phase-shift measurement;
// the circle penalty acts on one unperturbed rollout over a nominal period.
// Gradients flow through both trajectories of every measurement via the
// closed-form angular readout derivative and the unrolled solver.
inline TrainReport fit_prc(const TrainConfig& cfg, const PRCCurve& target, double delta_a,
                           double lambda_circle, const PRCFitOptions& opts = {}) {
  cfg.validate();
  detail::require_relax_horizon(cfg.integrator);
  if (target.phases.empty()) throw ContractError("fit_prc: empty target curve");
  if (target.shifts.size() != target.phases.size())
    throw ContractError("fit_prc: target curve with mismatched lengths");
  if (!(lambda_circle > 0.0)) throw ConfigError("fit_prc: lambda_circle must be positive");

  VelocityField field{init_params(cfg.arch, stream_seed(cfg.seed, RngStream::ParamInit)),
                      cfg.field_epsilon};
  if (opts.warm_start) detail::warm_start_circle_field(field, opts, cfg.seed);

  const std::size_t n_params = field.params.values.size();
  const int n_phases = static_cast<int>(target.phases.size());
  const IntegratorSpec& relax = cfg.integrator;
  IntegratorSpec circle_spec = cfg.integrator;
  circle_spec.n_steps = std::max(1, static_cast<int>(std::llround(kTwoPi / circle_spec.dt)));

  const int n_lanes = std::max(1, std::min(cfg.n_threads, n_phases));
  AdamState adam;
  std::vector<Trajectory> refs(n_phases), perts(n_phases);
  std::vector<double> shifts(n_phases);
  std::vector<std::uint8_t> relaxed(n_phases);
  std::vector<std::vector<double>> phase_grads(n_phases, std::vector<double>(n_params, 0.0));
  std::vector<SolverVjpWorkspace> lanes(n_lanes);
  std::vector<std::vector<Vec2>> lane_cots(n_lanes);
  std::vector<double> grad(n_params, 0.0);
  const double unit_scale = detail::shift_unit_scale(opts.unit);

  TrainReport report;
  report.history.reserve(cfg.n_iterations);
  const auto run_start = std::chrono::steady_clock::now();

  for (int iter = 0; iter < cfg.n_iterations; ++iter) {
    const auto iter_start = std::chrono::steady_clock::now();
    double mse = 0.0, circle = 0.0, total = 0.0;
    try {
      parallel_for_index(n_phases, cfg.n_threads, [&](int k, int) {
        const OscState start{target.phases[k], 1.0};
        refs[k] = simulate_trajectory(field, start.to_cartesian(), relax);
        perts[k] =
            simulate_trajectory(field, apply_perturbation(start, delta_a).to_cartesian(), relax);
        shifts[k] =
            detail::phase_shift_readout(refs[k].states.back(), perts[k].states.back(), opts.unit);
        relaxed[k] = std::abs(norm(perts[k].states.back()) - 1.0) < 0.1 ? 1 : 0;
      });
      PRCCurve sim{target.phases, shifts};
      const auto [mse_v, mse_grads] = prc_mse(target, sim);
      const Trajectory circle_traj = simulate_trajectory(field, Vec2{1.0, 0.0}, circle_spec);
      const auto [circle_v, circle_grads] = unit_circle_penalty(circle_traj);
      mse = mse_v;
      circle = circle_v;
      total = mse + lambda_circle * circle;
      if (!std::isfinite(total)) throw NumericError("non-finite loss");

      parallel_for_index(n_phases, cfg.n_threads, [&](int k, int lane) {
        std::fill(phase_grads[k].begin(), phase_grads[k].end(), 0.0);
        std::vector<Vec2>& cots = lane_cots[lane];
        const double w = mse_grads[k] * unit_scale;
        cots.assign(perts[k].states.size(), Vec2{});
        cots.back() = w * detail::angle_cotangent(perts[k].states.back());
        backprop_through_solver(field, perts[k], cots, relax.scheme, phase_grads[k], lanes[lane]);
        cots.assign(refs[k].states.size(), Vec2{});
        cots.back() = (-w) * detail::angle_cotangent(refs[k].states.back());
        backprop_through_solver(field, refs[k], cots, relax.scheme, phase_grads[k], lanes[lane]);
      });
      std::fill(grad.begin(), grad.end(), 0.0);
      for (int k = 0; k < n_phases; ++k)
        for (std::size_t i = 0; i < n_params; ++i) grad[i] += phase_grads[k][i];
      std::vector<Vec2> circle_cots(circle_grads.size());
      for (std::size_t i = 0; i < circle_grads.size(); ++i)
        circle_cots[i] = lambda_circle * circle_grads[i];
      backprop_through_solver(field, circle_traj, circle_cots, circle_spec.scheme, grad, lanes[0]);
      adam_step(field.params.values, grad, adam, cfg.learning_rate, cfg.adam_beta1,
                cfg.adam_beta2);
    } catch (const NumericError& e) {
      throw NumericError("fit_prc: iteration " + std::to_string(iter) + ": " + e.what());
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - iter_start)
            .count();
    report.history.push_back({mse, circle, total, ms});
  }

  report.final_params = field.params;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();
  return report;
}

}  // namespace pflow
