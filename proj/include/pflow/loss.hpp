#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pflow/integrate.hpp"
#include "pflow/prc_curve.hpp"

namespace pflow {

struct DataCloud {
  std::vector<Vec2> points;
  std::string name;
};

// Two-sided trajectory/data loss and its per-state gradients.
struct LossBreakdown {
  double traj_to_data = 0.0;  // mean over simulated states of nearest-data distance
  double data_to_traj = 0.0;  // mean over data points of nearest-state distance
  double total = 0.0;
  std::vector<std::vector<Vec2>> state_grads;  // aligned with the input trajectories
};

namespace detail {

// Below this distance a nearest-neighbor pair is treated as coincident and
// contributes no gradient (the direction is undefined).
inline constexpr double kCoincidenceTol = 1e-12;

// Summing sorted values makes the reduction bit-identical under any
// permutation of the inputs.
inline double sorted_mean(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

}  // namespace detail

// term1: mean over all simulated states (pooled across trajectories) of the
// distance to the nearest data point. term2: mean over data points of the
// distance to the nearest simulated state. Nearest-neighbor ties break to
// the lowest index.
inline LossBreakdown principal_flow_loss(std::span<const Trajectory> simulated,
                                         const DataCloud& data) {
  if (simulated.empty()) throw ContractError("principal_flow_loss: need at least one trajectory");
  if (data.points.empty()) throw ContractError("principal_flow_loss: empty data cloud");
  std::size_t n_states = 0;
  for (const Trajectory& t : simulated) {
    if (t.states.empty()) throw ContractError("principal_flow_loss: trajectory with no states");
    n_states += t.states.size();
  }
  const std::vector<Vec2>& xs = data.points;
  const std::size_t m = xs.size();
  constexpr double inf = std::numeric_limits<double>::infinity();

  LossBreakdown out;
  out.state_grads.resize(simulated.size());

  std::vector<double> data_best(m, inf);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> data_arg(m, {0, 0});
  std::vector<std::vector<std::pair<double, std::uint32_t>>> state_best(simulated.size());

  for (std::size_t t = 0; t < simulated.size(); ++t) {
    const auto& states = simulated[t].states;
    out.state_grads[t].assign(states.size(), Vec2{});
    state_best[t].resize(states.size());
    for (std::size_t s = 0; s < states.size(); ++s) {
      const Vec2 z = states[s];
      double best = inf;
      std::uint32_t best_j = 0;
      for (std::size_t j = 0; j < m; ++j) {
        const double d2 = norm2(z - xs[j]);
        if (d2 < best) {
          best = d2;
          best_j = static_cast<std::uint32_t>(j);
        }
        if (d2 < data_best[j]) {
          data_best[j] = d2;
          data_arg[j] = {static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(s)};
        }
      }
      state_best[t][s] = {best, best_j};
    }
  }

  std::vector<double> dists;
  dists.reserve(std::max(n_states, m));
  const double inv_n = 1.0 / static_cast<double>(n_states);
  for (std::size_t t = 0; t < simulated.size(); ++t)
    for (std::size_t s = 0; s < simulated[t].states.size(); ++s) {
      const double d = std::sqrt(state_best[t][s].first);
      dists.push_back(d);
      if (d > detail::kCoincidenceTol) {
        const Vec2 z = simulated[t].states[s];
        out.state_grads[t][s] += (z - xs[state_best[t][s].second]) * (inv_n / d);
      }
    }
  out.traj_to_data = detail::sorted_mean(dists);

  dists.clear();
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double d = std::sqrt(data_best[j]);
    dists.push_back(d);
    if (d > detail::kCoincidenceTol) {
      const auto [t, s] = data_arg[j];
      const Vec2 z = simulated[t].states[s];
      out.state_grads[t][s] += (z - xs[j]) * (inv_m / d);
    }
  }
  out.data_to_traj = detail::sorted_mean(dists);

  out.total = out.traj_to_data + out.data_to_traj;
  return out;
}

// Mean of ((x^2 + y^2) - 1)^2 over the trajectory, with per-state gradients.
// The residual is squared so the term is a proper penalty (bounded below).
inline std::pair<double, std::vector<Vec2>> unit_circle_penalty(const Trajectory& traj) {
  if (traj.states.empty()) throw ContractError("unit_circle_penalty: empty trajectory");
  const double inv_n = 1.0 / static_cast<double>(traj.states.size());
  std::vector<Vec2> grads(traj.states.size());
  double value = 0.0;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const Vec2 z = traj.states[k];
    const double e = norm2(z) - 1.0;
    value += e * e;
    grads[k] = (4.0 * e * inv_n) * z;
  }
  return {value * inv_n, std::move(grads)};
}

// Mean squared difference between two curves on the same phase grid; the
// gradient is with respect to the simulated shifts.
inline std::pair<double, std::vector<double>> prc_mse(const PRCCurve& target,
                                                      const PRCCurve& simulated) {
  if (target.phases.empty()) throw ContractError("prc_mse: empty curves");
  if (target.phases.size() != target.shifts.size() ||
      simulated.phases.size() != simulated.shifts.size())
    throw ContractError("prc_mse: curve with mismatched phases/shifts lengths");
  if (target.phases != simulated.phases) throw ContractError("prc_mse: phase grids differ");
  const double inv_n = 1.0 / static_cast<double>(target.phases.size());
  std::vector<double> grads(target.phases.size());
  double value = 0.0;
  for (std::size_t k = 0; k < target.phases.size(); ++k) {
    const double d = simulated.shifts[k] - target.shifts[k];
    value += d * d;
    grads[k] = 2.0 * d * inv_n;
  }
  return {value * inv_n, std::move(grads)};
}

}  // namespace pflow
