#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pflow/data.hpp"
#include "pflow/loss.hpp"
#include "pflow/parallel.hpp"

namespace pflow {

// The paper's p(z): isotropic Gaussian around an anchor point.
struct InitDistribution {
  Vec2 mean;
  double sigma = 0.05;
};

struct TrainConfig {
  MLPArchitecture arch;
  IntegratorSpec integrator;
  int n_trajectories = 32;
  InitDistribution init_distribution;
  double noise_sigma = 0.0;  // per-step training-rollout noise injection, 0 = off
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int n_iterations = 2000;
  std::uint64_t seed = 0;
  double field_epsilon = 1e-8;
  int n_threads = 1;  // execution knob only; results are identical for any value

  void validate() const {
    arch.validate();
    integrator.validate();
    if (n_trajectories < 1) throw ConfigError("n_trajectories must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
      throw ConfigError("adam betas must lie in [0, 1)");
    if (n_iterations < 1) throw ConfigError("n_iterations must be >= 1");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
    if (init_distribution.sigma < 0.0) throw ConfigError("init sigma must be >= 0");
    if (!(field_epsilon > 0.0)) throw ConfigError("field_epsilon must be positive");
    if (n_threads < 1) throw ConfigError("n_threads must be >= 1");
  }
};

struct IterationStats {
  double term1 = 0.0;  // trajectory-to-data (PRC fit: curve mse)
  double term2 = 0.0;  // data-to-trajectory (PRC fit: circle penalty)
  double total = 0.0;
  double wall_ms = 0.0;
};

struct TrainReport {
  std::vector<IterationStats> history;
  ParamVector final_params;
  double wall_time_seconds = 0.0;
};

// n_trajectories Gaussian samples around the init mean; the stream is
// derived from (seed, iteration).
inline std::vector<Vec2> sample_initial_conditions(const TrainConfig& cfg, int iteration) {
  Rng rng(stream_seed(cfg.seed, RngStream::InitConditions, static_cast<std::uint64_t>(iteration)));
  std::vector<Vec2> out(cfg.n_trajectories);
  for (Vec2& v : out) v = cfg.init_distribution.mean + rng.normal2(cfg.init_distribution.sigma);
  return out;
}

struct AdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;
};

// Standard Adam with bias correction.
inline void adam_step(std::vector<double>& params, std::span<const double> grads,
                      AdamState& state, double lr, double beta1, double beta2,
                      double eps = 1e-8) {
  if (grads.size() != params.size()) throw ContractError("adam_step: gradient length mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  } else if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: moment state length mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    params[i] -= lr * (state.m[i] / bc1) / (std::sqrt(state.v[i] / bc2) + eps);
  }
}

using TrainCallback = std::function<void(int, const IterationStats&, const ParamVector&)>;

// One fit iteration: sample initial conditions -> roll out (with optional
// noise injection) -> two-sided loss -> unrolled backprop -> Adam update.
// Fully reproducible from cfg.seed: rollout/backprop run per-trajectory with
// private gradient buffers that are reduced in trajectory order.
inline TrainReport fit_principal_flow(const TrainConfig& cfg, const DataCloud& data,
                                      const TrainCallback& on_iteration = {}) {
  cfg.validate();
  if (data.points.empty()) throw ContractError("fit_principal_flow: empty data cloud");

  VelocityField field{init_params(cfg.arch, stream_seed(cfg.seed, RngStream::ParamInit)),
                      cfg.field_epsilon};
  const std::size_t n_params = field.params.values.size();
  const int n_traj = cfg.n_trajectories;

  AdamState adam;
  std::vector<Trajectory> trajs(n_traj);
  std::vector<std::vector<double>> traj_grads(n_traj, std::vector<double>(n_params, 0.0));
  std::vector<SolverVjpWorkspace> lanes(std::max(1, std::min(cfg.n_threads, n_traj)));
  std::vector<double> grad(n_params, 0.0);

  TrainReport report;
  report.history.reserve(cfg.n_iterations);
  const auto run_start = std::chrono::steady_clock::now();

  for (int iter = 0; iter < cfg.n_iterations; ++iter) {
    const auto iter_start = std::chrono::steady_clock::now();
    LossBreakdown loss;
    try {
      const std::vector<Vec2> inits = sample_initial_conditions(cfg, iter);
      parallel_for_index(n_traj, cfg.n_threads, [&](int i, int) {
        trajs[i] = simulate_trajectory(
            field, inits[i], cfg.integrator, cfg.noise_sigma,
            stream_seed(cfg.seed, RngStream::StepNoise, static_cast<std::uint64_t>(iter),
                        static_cast<std::uint64_t>(i)));
      });
      loss = principal_flow_loss(trajs, data);
      if (!std::isfinite(loss.total)) throw NumericError("non-finite loss");
      parallel_for_index(n_traj, cfg.n_threads, [&](int i, int lane) {
        std::fill(traj_grads[i].begin(), traj_grads[i].end(), 0.0);
        backprop_through_solver(field, trajs[i], loss.state_grads[i], cfg.integrator.scheme,
                                traj_grads[i], lanes[lane]);
      });
      std::fill(grad.begin(), grad.end(), 0.0);
      for (int i = 0; i < n_traj; ++i)
        for (std::size_t k = 0; k < n_params; ++k) grad[k] += traj_grads[i][k];
      adam_step(field.params.values, grad, adam, cfg.learning_rate, cfg.adam_beta1,
                cfg.adam_beta2);
    } catch (const NumericError& e) {
      throw NumericError("fit_principal_flow: iteration " + std::to_string(iter) + ": " +
                         e.what());
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - iter_start)
            .count();
    report.history.push_back({loss.traj_to_data, loss.data_to_traj, loss.total, ms});
    if (on_iteration) on_iteration(iter, report.history.back(), field.params);
  }

  report.final_params = field.params;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();
  return report;
}

inline void write_training_log_csv(const std::filesystem::path& path,
                                   std::span<const IterationStats> history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "iteration,term1,term2,total,wall_ms\n";
  for (std::size_t i = 0; i < history.size(); ++i)
    out << i << ',' << format_double(history[i].term1) << ',' << format_double(history[i].term2)
        << ',' << format_double(history[i].total) << ',' << format_double(history[i].wall_ms)
        << '\n';
  if (!out.good()) throw IoError("failed writing " + path.string());
}

// Data-dependent defaults: the rollout horizon covers the cloud diameter at
// unit speed (diameter/dt, rounded up).
inline TrainConfig default_train_config(const DataCloud& data, Vec2 init_mean,
                                        std::uint64_t seed = 0) {
  TrainConfig cfg;
  cfg.integrator.scheme = Scheme::Rk4;
  cfg.integrator.dt = 0.05;
  cfg.integrator.n_steps =
      std::max(1, static_cast<int>(std::ceil(cloud_diameter(data) / cfg.integrator.dt)));
  cfg.init_distribution = {init_mean, 0.05};
  cfg.seed = seed;
  return cfg;
}

}  // namespace pflow
