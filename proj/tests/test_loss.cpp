#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "pflow/loss.hpp"
#include "test_support.hpp"

using namespace pflow;
using Catch::Approx;

namespace {

Trajectory traj_of(std::vector<Vec2> states) {
  Trajectory t;
  t.states = std::move(states);
  t.dt = 1.0;
  return t;
}

// independent brute-force double loop, natural order
std::pair<double, double> brute_force_terms(const std::vector<Trajectory>& sims,
                                            const DataCloud& data) {
  std::size_t n = 0;
  double term1 = 0.0;
  for (const auto& t : sims)
    for (const Vec2 z : t.states) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec2 x : data.points) best = std::min(best, norm(z - x));
      term1 += best;
      ++n;
    }
  term1 /= static_cast<double>(n);
  double term2 = 0.0;
  for (const Vec2 x : data.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : sims)
      for (const Vec2 z : t.states) best = std::min(best, norm(x - z));
    term2 += best;
  }
  term2 /= static_cast<double>(data.points.size());
  return {term1, term2};
}

}  // namespace

TEST_CASE("principal_flow_loss is zero when states equal the data") {
  const DataCloud data{{{0.0, 0.0}, {1.0, 0.5}, {-0.5, 2.0}}, "d"};
  const std::vector<Trajectory> sims{traj_of({{0.0, 0.0}, {1.0, 0.5}, {-0.5, 2.0}})};
  const LossBreakdown lb = principal_flow_loss(sims, data);
  REQUIRE(lb.traj_to_data == 0.0);
  REQUIRE(lb.data_to_traj == 0.0);
  REQUIRE(lb.total == 0.0);
  for (const auto& g : lb.state_grads)
    for (const Vec2 v : g) REQUIRE(v == Vec2{0.0, 0.0});
}

TEST_CASE("principal_flow_loss single pair") {
  const DataCloud data{{{3.0, 4.0}}, "d"};
  const std::vector<Trajectory> sims{traj_of({{0.0, 0.0}})};
  const LossBreakdown lb = principal_flow_loss(sims, data);
  REQUIRE(lb.traj_to_data == Approx(5.0));
  REQUIRE(lb.data_to_traj == Approx(5.0));
  REQUIRE(lb.total == Approx(10.0));
  // both terms pull the single state toward the data point with weight 1 each
  REQUIRE(lb.state_grads[0][0].x == Approx(2.0 * (-3.0 / 5.0)));
  REQUIRE(lb.state_grads[0][0].y == Approx(2.0 * (-4.0 / 5.0)));
}

TEST_CASE("principal_flow_loss two states one data point") {
  const DataCloud data{{{0.0, 0.0}}, "d"};
  const std::vector<Trajectory> sims{traj_of({{0.0, 0.0}, {1.0, 0.0}})};
  const LossBreakdown lb = principal_flow_loss(sims, data);
  REQUIRE(lb.traj_to_data == Approx(0.5));
  REQUIRE(lb.data_to_traj == Approx(0.0));
  REQUIRE(lb.total == Approx(0.5));
}

TEST_CASE("principal_flow_loss equals the brute-force double loop on random instances") {
  Rng rng(314);
  for (int inst = 0; inst < 200; ++inst) {
    const int n_traj = 1 + static_cast<int>(rng.uniform(0, 3));
    std::vector<Trajectory> sims;
    for (int t = 0; t < n_traj; ++t) {
      const int n_states = 2 + static_cast<int>(rng.uniform(0, 15));
      std::vector<Vec2> states(n_states);
      for (Vec2& z : states) z = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
      sims.push_back(traj_of(std::move(states)));
    }
    DataCloud data;
    const int m = 1 + static_cast<int>(rng.uniform(0, 32));
    for (int j = 0; j < m; ++j)
      data.points.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});

    const LossBreakdown lb = principal_flow_loss(sims, data);
    const auto [t1, t2] = brute_force_terms(sims, data);
    REQUIRE(lb.traj_to_data == Approx(t1).margin(1e-12));
    REQUIRE(lb.data_to_traj == Approx(t2).margin(1e-12));
    REQUIRE(lb.total >= 0.0);
  }
}

TEST_CASE("principal_flow_loss is strictly positive when a state misses the data") {
  const DataCloud data{{{0.0, 0.0}}, "d"};
  const std::vector<Trajectory> sims{traj_of({{0.0, 0.0}, {0.1, 0.0}})};
  REQUIRE(principal_flow_loss(sims, data).total > 0.0);
}

TEST_CASE("principal_flow_loss per-state gradients match finite differences") {
  Rng rng(2718);
  for (int inst = 0; inst < 10; ++inst) {
    std::vector<Vec2> states(6);
    for (Vec2& z : states) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    DataCloud data;
    for (int j = 0; j < 9; ++j) data.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});

    const std::vector<Trajectory> sims{traj_of(states)};
    const LossBreakdown lb = principal_flow_loss(sims, data);

    const double h = 1e-6;
    for (std::size_t s = 0; s < states.size(); ++s) {
      for (int c = 0; c < 2; ++c) {
        auto bump = [&](double d) {
          std::vector<Vec2> pert = states;
          (c == 0 ? pert[s].x : pert[s].y) += d;
          const std::vector<Trajectory> ps{traj_of(pert)};
          return principal_flow_loss(ps, data).total;
        };
        const double fd = (bump(h) - bump(-h)) / (2 * h);
        const double an = c == 0 ? lb.state_grads[0][s].x : lb.state_grads[0][s].y;
        REQUIRE(an == Approx(fd).epsilon(1e-5).margin(1e-7));
      }
    }
  }
}

TEST_CASE("principal_flow_loss is bit-identical under data and trajectory permutations") {
  Rng rng(99);
  std::vector<Vec2> s1(7), s2(5);
  for (Vec2& z : s1) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  for (Vec2& z : s2) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  DataCloud data;
  for (int j = 0; j < 11; ++j) data.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});

  const std::vector<Trajectory> sims{traj_of(s1), traj_of(s2)};
  const LossBreakdown a = principal_flow_loss(sims, data);

  DataCloud shuffled = data;
  std::reverse(shuffled.points.begin(), shuffled.points.end());
  const LossBreakdown b = principal_flow_loss(sims, shuffled);
  REQUIRE(a.traj_to_data == b.traj_to_data);
  REQUIRE(a.data_to_traj == b.data_to_traj);
  REQUIRE(a.total == b.total);

  const std::vector<Trajectory> swapped{traj_of(s2), traj_of(s1)};
  const LossBreakdown c = principal_flow_loss(swapped, data);
  REQUIRE(a.traj_to_data == c.traj_to_data);
  REQUIRE(a.data_to_traj == c.data_to_traj);
  REQUIRE(a.total == c.total);
}

TEST_CASE("principal_flow_loss rejects empty inputs") {
  const DataCloud data{{{0.0, 0.0}}, "d"};
  const std::vector<Trajectory> none;
  REQUIRE_THROWS_AS(principal_flow_loss(none, data), ContractError);
  const std::vector<Trajectory> sims{traj_of({{0.0, 0.0}})};
  REQUIRE_THROWS_AS(principal_flow_loss(sims, DataCloud{}), ContractError);
}

TEST_CASE("unit_circle_penalty values and gradients") {
  Trajectory on_circle = traj_of({{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}});
  REQUIRE(unit_circle_penalty(on_circle).first == 0.0);

  Trajectory off = traj_of({{2.0, 0.0}});
  const auto [value, grads] = unit_circle_penalty(off);
  REQUIRE(value == Approx(9.0));
  REQUIRE(grads[0].x == Approx(24.0));
  REQUIRE(grads[0].y == 0.0);

  const double h = 1e-6;
  auto at = [&](double x) { return unit_circle_penalty(traj_of({{x, 0.0}})).first; };
  REQUIRE(grads[0].x == Approx((at(2.0 + h) - at(2.0 - h)) / (2 * h)).margin(1e-6));

  REQUIRE_THROWS_AS(unit_circle_penalty(Trajectory{}), ContractError);
}

TEST_CASE("prc_mse values and gradients") {
  PRCCurve a{{0.0, 1.0, 2.0}, {1.0, -2.0, 3.0}};
  REQUIRE(prc_mse(a, a).first == 0.0);

  PRCCurve b = a;
  for (double& s : b.shifts) s += 0.75;
  const auto [v, g] = prc_mse(a, b);
  REQUIRE(v == Approx(0.75 * 0.75));
  for (double gk : g) REQUIRE(gk == Approx(2.0 * 0.75 / 3.0));

  Rng rng(55);
  PRCCurve t, s;
  for (int k = 0; k < 8; ++k) {
    t.phases.push_back(k);
    s.phases.push_back(k);
    t.shifts.push_back(rng.uniform(-50, 50));
    s.shifts.push_back(rng.uniform(-50, 50));
  }
  double want = 0.0;
  for (int k = 0; k < 8; ++k) {
    const double d = s.shifts[k] - t.shifts[k];
    want += d * d;
  }
  want /= 8.0;
  REQUIRE(prc_mse(t, s).first == Approx(want).margin(1e-12));

  PRCCurve wrong{{0.0, 1.5, 2.0}, {0.0, 0.0, 0.0}};
  REQUIRE_THROWS_AS(prc_mse(a, wrong), ContractError);
}
