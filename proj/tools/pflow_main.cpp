// pflow: command-line front end tying the library into reproducible,
// manifest-backed experiments. Every command writes its artifacts plus one
// manifest.json recording the fully resolved configuration; re-running with
// the same flags and seed reproduces the artifacts byte-for-byte (the
// training log's wall_ms column is the one timing exception).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pflow/pflow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

pflow::Vec2 parse_vec2(const std::string& s) {
  const auto comma = s.find(',');
  pflow::Vec2 v;
  if (comma == std::string::npos || !pflow::parse_double(s.substr(0, comma), v.x) ||
      !pflow::parse_double(s.substr(comma + 1), v.y))
    throw pflow::ConfigError("expected \"x,y\", got \"" + s + "\"");
  return v;
}

std::vector<int> parse_widths(const std::string& s) {
  std::vector<int> widths;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      widths.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw pflow::ConfigError("bad architecture \"" + s + "\" (expected e.g. 2,64,64,2)");
    }
  }
  if (widths.size() < 3) throw pflow::ConfigError("bad architecture \"" + s + "\"");
  return widths;
}

pflow::GridBounds parse_bounds(const std::string& s) {
  std::stringstream ss(s);
  std::string tok;
  std::vector<double> vals;
  while (std::getline(ss, tok, ',')) {
    double d = 0.0;
    if (!pflow::parse_double(tok, d))
      throw pflow::ConfigError("bad bounds \"" + s + "\" (expected xmin,xmax,ymin,ymax)");
    vals.push_back(d);
  }
  if (vals.size() != 4)
    throw pflow::ConfigError("bad bounds \"" + s + "\" (expected xmin,xmax,ymin,ymax)");
  return {vals[0], vals[1], vals[2], vals[3]};
}

fs::path ensure_out_dir(const std::string& out) {
  if (out.empty()) throw pflow::ConfigError("--out is required");
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw pflow::IoError("cannot create output directory " + dir.string());
  return dir;
}

void write_manifest(const fs::path& out_dir, const std::string& command, std::uint64_t seed,
                    const json& config, const json& artifacts) {
  json manifest;
  manifest["tool"] = "pflow";
  manifest["version"] = pflow::kVersion;
  manifest["command"] = command;
  manifest["seed"] = seed;
  manifest["config"] = config;
  manifest["artifacts"] = artifacts;
  const fs::path path = out_dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw pflow::IoError("cannot open " + path.string() + " for writing");
  out << manifest.dump(2) << '\n';
  if (!out.good()) throw pflow::IoError("failed writing " + path.string());
}

// Pulls values a subcommand's flags did not set from --config (either a bare
// config object or a manifest with a "config" field). Flags win.
struct ConfigMerger {
  CLI::App* cmd = nullptr;
  json j;
  bool loaded = false;

  void load(const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw pflow::IoError("cannot open config " + path);
    json parsed = json::parse(in, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
      throw pflow::FormatError("config " + path + " is not a JSON object");
    j = (parsed.contains("config") && parsed["config"].is_object()) ? parsed["config"] : parsed;
    loaded = true;
  }

  template <class T>
  void merge(const std::string& flag, const std::string& key, T& value) const {
    if (!loaded || cmd->count(flag) > 0 || !j.contains(key)) return;
    try {
      value = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw pflow::FormatError("config field \"" + key + "\": " + e.what());
    }
  }
};

// Either a trained checkpoint or one of the analytic test hooks.
pflow::AnyField resolve_field(const std::string& model, const std::string& analytic) {
  if (!model.empty() && !analytic.empty())
    throw pflow::ConfigError("--model and --field are mutually exclusive");
  if (!model.empty()) {
    pflow::VelocityField f{pflow::load_checkpoint(model)};
    return [f = std::move(f)](pflow::Vec2 x) { return f(x); };
  }
  if (!analytic.empty()) return pflow::make_analytic_field(analytic);
  throw pflow::ConfigError("one of --model or --field is required");
}

// ---------------------------------------------------------------- gen ----

struct GenOpts {
  std::string shape = "c_arc";
  int n = 500;
  double noise = 0.05;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

int run_gen(const GenOpts& o) {
  pflow::ShapeSpec spec{pflow::shape_from_string(o.shape), o.n, o.noise, o.seed};
  const pflow::DataCloud cloud = pflow::generate(spec);
  const fs::path dir = ensure_out_dir(o.out);
  pflow::save_cloud(dir / "cloud.csv", cloud);
  json config{{"shape", o.shape}, {"n", o.n}, {"noise", o.noise}, {"seed", o.seed}};
  write_manifest(dir, "gen", o.seed, config, json{{"cloud", "cloud.csv"}});
  std::cout << "wrote " << (dir / "cloud.csv").string() << " (" << cloud.points.size()
            << " points)\n";
  return 0;
}

// ---------------------------------------------------------------- fit ----

struct FitOpts {
  std::string data;
  std::string out;
  std::string arch = "2,64,64,2";
  std::string activation = "tanh";
  std::string scheme = "rk4";
  double dt = 0.05;
  int steps = 0;  // 0 = cover the data diameter at unit speed
  int n_traj = 32;
  std::string init_mean;
  double init_sigma = 0.05;
  double noise_inject = 0.0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int iters = 2000;
  std::uint64_t seed = 0;
  int threads = 1;
  double epsilon = 1e-8;
  int checkpoint_every = 0;
  std::string config;
};

int run_fit(const FitOpts& o) {
  if (o.data.empty()) throw pflow::ConfigError("--data is required");
  if (o.init_mean.empty())
    throw pflow::ConfigError("--init-mean is required (see README for the shape anchors)");
  const pflow::DataCloud cloud = pflow::load_cloud(o.data);

  pflow::TrainConfig cfg;
  cfg.arch.layer_widths = parse_widths(o.arch);
  cfg.arch.activation = pflow::activation_from_string(o.activation);
  cfg.integrator.scheme = pflow::scheme_from_string(o.scheme);
  cfg.integrator.dt = o.dt;
  cfg.integrator.n_steps =
      o.steps > 0 ? o.steps
                  : std::max(1, static_cast<int>(std::ceil(pflow::cloud_diameter(cloud) / o.dt)));
  cfg.n_trajectories = o.n_traj;
  cfg.init_distribution = {parse_vec2(o.init_mean), o.init_sigma};
  cfg.noise_sigma = o.noise_inject;
  cfg.learning_rate = o.lr;
  cfg.adam_beta1 = o.beta1;
  cfg.adam_beta2 = o.beta2;
  cfg.n_iterations = o.iters;
  cfg.seed = o.seed;
  cfg.field_epsilon = o.epsilon;
  cfg.n_threads = o.threads;
  cfg.validate();

  const fs::path dir = ensure_out_dir(o.out);
  json periodic = json::array();
  pflow::TrainCallback callback;
  if (o.checkpoint_every > 0) {
    callback = [&](int iter, const pflow::IterationStats&, const pflow::ParamVector& params) {
      if ((iter + 1) % o.checkpoint_every != 0) return;
      char name[40];
      std::snprintf(name, sizeof name, "checkpoint_%06d.json", iter + 1);
      pflow::save_checkpoint(dir / name, params);
      periodic.push_back(name);
    };
  }

  const pflow::TrainReport report = pflow::fit_principal_flow(cfg, cloud, callback);
  pflow::save_checkpoint(dir / "checkpoint.json", report.final_params);
  pflow::write_training_log_csv(dir / "training_log.csv", report.history);

  json config{{"data", o.data},
              {"arch", o.arch},
              {"activation", o.activation},
              {"scheme", o.scheme},
              {"dt", o.dt},
              {"steps", cfg.integrator.n_steps},
              {"n_traj", o.n_traj},
              {"init_mean", o.init_mean},
              {"init_sigma", o.init_sigma},
              {"noise_inject", o.noise_inject},
              {"lr", o.lr},
              {"beta1", o.beta1},
              {"beta2", o.beta2},
              {"iters", o.iters},
              {"seed", o.seed},
              {"threads", o.threads},
              {"epsilon", o.epsilon},
              {"checkpoint_every", o.checkpoint_every}};
  json artifacts{{"checkpoint", "checkpoint.json"}, {"training_log", "training_log.csv"}};
  if (!periodic.empty()) artifacts["periodic_checkpoints"] = periodic;
  write_manifest(dir, "fit", o.seed, config, artifacts);

  const auto& last = report.history.back();
  std::cout << "final loss " << last.total << " (term1 " << last.term1 << ", term2 "
            << last.term2 << ") after " << report.history.size() << " iterations in "
            << report.wall_time_seconds << " s\n";
  return 0;
}

// ----------------------------------------------------------- simulate ----

struct SimulateOpts {
  std::string model;
  std::string field;
  std::vector<std::string> inits;
  int steps = 100;
  double dt = 0.05;
  std::string scheme = "rk4";
  std::string out;
  std::string config;
};

int run_simulate(const SimulateOpts& o) {
  if (o.inits.empty()) throw pflow::ConfigError("at least one --init x,y is required");
  const pflow::AnyField f = resolve_field(o.model, o.field);
  pflow::IntegratorSpec spec{pflow::scheme_from_string(o.scheme), o.dt, o.steps};
  spec.validate();
  std::vector<pflow::Trajectory> trajs;
  trajs.reserve(o.inits.size());
  for (const std::string& s : o.inits)
    trajs.push_back(pflow::simulate_trajectory(f, parse_vec2(s), spec));
  const fs::path dir = ensure_out_dir(o.out);
  pflow::write_trajectory_csv(dir / "trajectories.csv", trajs);
  json config{{"model", o.model}, {"field", o.field},   {"init", o.inits},
              {"steps", o.steps}, {"dt", o.dt},         {"scheme", o.scheme}};
  write_manifest(dir, "simulate", 0, config, json{{"trajectories", "trajectories.csv"}});
  std::cout << "wrote " << (dir / "trajectories.csv").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- ftle ----

struct FtleOpts {
  std::string model;
  std::string field;
  std::string bounds = "-1,1,-1,1";
  int nx = 100;
  int ny = 100;
  double T = 1.0;
  double dt = 0.05;
  std::string scheme = "rk4";
  std::string out;
  std::string config;
};

int run_ftle(const FtleOpts& o) {
  const pflow::AnyField f = resolve_field(o.model, o.field);
  if (!(o.T > 0.0)) throw pflow::ConfigError("--T must be positive");
  pflow::IntegratorSpec spec{pflow::scheme_from_string(o.scheme), o.dt,
                             std::max(1, static_cast<int>(std::llround(o.T / o.dt)))};
  spec.validate();
  const pflow::FTLEGrid grid = pflow::ftle_field(f, parse_bounds(o.bounds), o.nx, o.ny, spec);
  const fs::path dir = ensure_out_dir(o.out);
  pflow::write_ftle_csv(dir / "ftle.csv", grid);
  json config{{"model", o.model}, {"field", o.field}, {"bounds", o.bounds}, {"nx", o.nx},
              {"ny", o.ny},       {"T", o.T},         {"dt", o.dt},         {"scheme", o.scheme}};
  write_manifest(dir, "ftle", 0, config, json{{"ftle", "ftle.csv"}});
  std::cout << "wrote " << (dir / "ftle.csv").string() << "\n";
  return 0;
}

// ----------------------------------------------------------------- prc ----

struct PrcTargetOpts {
  double sigma_phi = 0.05;
  double xi1 = 0.0;
  double xi2 = 0.0;
  double a1 = 0.4;
  double a2 = 0.2;
  double scale = 100.0;
};

pflow::PRCParams to_params(const PrcTargetOpts& t) {
  return {t.sigma_phi, t.xi1, t.xi2, t.a1, t.a2, t.scale};
}

json target_config(const PrcTargetOpts& t) {
  return json{{"target_sigma_phi", t.sigma_phi}, {"target_xi1", t.xi1},
              {"target_xi2", t.xi2},             {"target_a1", t.a1},
              {"target_a2", t.a2},               {"target_scale", t.scale}};
}

struct PrcFitOpts {
  PrcTargetOpts target;
  int phases = 64;
  double delta_a = 0.1;
  double lambda_circle = 1.0;
  double relax_periods = 3.0;
  double dt = 0.05;
  std::string scheme = "rk4";
  std::string arch = "2,64,64,2";
  std::string activation = "tanh";
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int iters = 500;
  std::uint64_t seed = 0;
  int threads = 1;
  double epsilon = 1e-8;
  bool no_warm_start = false;
  int warm_start_iters = 400;
  bool radians = false;
  std::string out;
  std::string config;
};

int run_prc_fit(const PrcFitOpts& o) {
  pflow::TrainConfig cfg;
  cfg.arch.layer_widths = parse_widths(o.arch);
  cfg.arch.activation = pflow::activation_from_string(o.activation);
  cfg.integrator.scheme = pflow::scheme_from_string(o.scheme);
  cfg.integrator.dt = o.dt;
  cfg.integrator.n_steps =
      std::max(1, static_cast<int>(std::llround(o.relax_periods * pflow::kTwoPi / o.dt)));
  cfg.learning_rate = o.lr;
  cfg.adam_beta1 = o.beta1;
  cfg.adam_beta2 = o.beta2;
  cfg.n_iterations = o.iters;
  cfg.seed = o.seed;
  cfg.field_epsilon = o.epsilon;
  cfg.n_threads = o.threads;

  const std::vector<double> phases = pflow::uniform_phase_grid(o.phases);
  const pflow::PRCCurve target = pflow::target_prc(phases, to_params(o.target));
  pflow::PRCFitOptions opts;
  opts.warm_start = !o.no_warm_start;
  opts.warm_start_iterations = o.warm_start_iters;
  opts.unit = o.radians ? pflow::AngleUnit::Radians : pflow::AngleUnit::Degrees;

  const pflow::TrainReport report = pflow::fit_prc(cfg, target, o.delta_a, o.lambda_circle, opts);
  pflow::VelocityField fitted{report.final_params, o.epsilon};
  const pflow::PRCSimulation sim =
      pflow::simulate_prc(fitted, phases, o.delta_a, cfg.integrator, opts.unit);

  const fs::path dir = ensure_out_dir(o.out);
  pflow::save_checkpoint(dir / "checkpoint.json", report.final_params);
  pflow::write_training_log_csv(dir / "training_log.csv", report.history);
  pflow::write_prc_csv(dir / "prc.csv", sim, &target);

  json config = target_config(o.target);
  config.update(json{{"phases", o.phases},
                     {"delta_a", o.delta_a},
                     {"lambda_circle", o.lambda_circle},
                     {"relax_periods", o.relax_periods},
                     {"dt", o.dt},
                     {"scheme", o.scheme},
                     {"arch", o.arch},
                     {"activation", o.activation},
                     {"lr", o.lr},
                     {"beta1", o.beta1},
                     {"beta2", o.beta2},
                     {"iters", o.iters},
                     {"seed", o.seed},
                     {"threads", o.threads},
                     {"epsilon", o.epsilon},
                     {"warm_start", !o.no_warm_start},
                     {"warm_start_iters", o.warm_start_iters},
                     {"radians", o.radians}});
  write_manifest(dir, "prc fit", o.seed, config,
                 json{{"checkpoint", "checkpoint.json"},
                      {"training_log", "training_log.csv"},
                      {"prc", "prc.csv"}});
  std::cout << "final prc mse " << report.history.back().term1 << ", circle penalty "
            << report.history.back().term2 << "\n";
  return 0;
}

struct PrcEvalOpts {
  std::string model;
  std::string field;
  PrcTargetOpts target;
  bool with_target = false;
  int phases = 64;
  double delta_a = 0.1;
  double relax_periods = 3.0;
  double dt = 0.05;
  std::string scheme = "rk4";
  bool radians = false;
  std::string out;
  std::string config;
};

int run_prc_eval(const PrcEvalOpts& o) {
  const pflow::AnyField f = resolve_field(o.model, o.field);
  pflow::IntegratorSpec relax{pflow::scheme_from_string(o.scheme), o.dt,
                              std::max(1, static_cast<int>(std::llround(
                                              o.relax_periods * pflow::kTwoPi / o.dt)))};
  const std::vector<double> phases = pflow::uniform_phase_grid(o.phases);
  const pflow::AngleUnit unit = o.radians ? pflow::AngleUnit::Radians : pflow::AngleUnit::Degrees;
  const pflow::PRCSimulation sim = pflow::simulate_prc(f, phases, o.delta_a, relax, unit);

  const fs::path dir = ensure_out_dir(o.out);
  if (o.with_target) {
    const pflow::PRCCurve target = pflow::target_prc(phases, to_params(o.target));
    pflow::write_prc_csv(dir / "prc.csv", sim, &target);
  } else {
    pflow::write_prc_csv(dir / "prc.csv", sim);
  }
  json config{{"model", o.model},
              {"field", o.field},
              {"phases", o.phases},
              {"delta_a", o.delta_a},
              {"relax_periods", o.relax_periods},
              {"dt", o.dt},
              {"scheme", o.scheme},
              {"radians", o.radians},
              {"with_target", o.with_target}};
  if (o.with_target) config.update(target_config(o.target));
  write_manifest(dir, "prc eval", 0, config, json{{"prc", "prc.csv"}});
  std::cout << "wrote " << (dir / "prc.csv").string() << "\n";
  return 0;
}

void add_target_flags(CLI::App* cmd, PrcTargetOpts& t) {
  cmd->add_option("--target-sigma-phi", t.sigma_phi, "target curve offset sigma_phi");
  cmd->add_option("--target-xi1", t.xi1, "first-harmonic phase xi1 (rad)");
  cmd->add_option("--target-xi2", t.xi2, "second-harmonic phase xi2 (rad)");
  cmd->add_option("--target-a1", t.a1, "first-harmonic amplitude A1");
  cmd->add_option("--target-a2", t.a2, "second-harmonic amplitude A2");
  cmd->add_option("--target-scale", t.scale, "overall curve scale");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pflow: learn a unit-speed planar velocity field whose flow traverses a point "
               "cloud; analyze it with FTLE fields and phase-response curves"};
  app.require_subcommand(1);

  GenOpts gen;
  CLI::App* cmd_gen = app.add_subcommand("gen", "generate a synthetic point cloud");
  cmd_gen->add_option("--shape", gen.shape, "c_arc | y_two_branch | y_three_branch")
      ->capture_default_str();
  cmd_gen->add_option("--n", gen.n, "number of points")->capture_default_str();
  cmd_gen->add_option("--noise", gen.noise, "isotropic Gaussian noise std")
      ->capture_default_str();
  cmd_gen->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  cmd_gen->add_option("--out", gen.out, "output directory")->required();
  cmd_gen->add_option("--config", gen.config, "JSON config or manifest; flags override");

  FitOpts fit;
  CLI::App* cmd_fit = app.add_subcommand("fit", "fit a principal flow to a point cloud");
  cmd_fit->add_option("--data", fit.data, "point-cloud CSV (header x,y)");
  cmd_fit->add_option("--out", fit.out, "output directory")->required();
  cmd_fit->add_option("--arch", fit.arch, "layer widths")->capture_default_str();
  cmd_fit->add_option("--activation", fit.activation, "tanh | relu")->capture_default_str();
  cmd_fit->add_option("--scheme", fit.scheme, "euler | rk4")->capture_default_str();
  cmd_fit->add_option("--dt", fit.dt, "integrator step size")->capture_default_str();
  cmd_fit->add_option("--steps", fit.steps, "rollout steps (0 = cover data diameter)")
      ->capture_default_str();
  cmd_fit->add_option("--n-traj", fit.n_traj, "trajectories per iteration")
      ->capture_default_str();
  cmd_fit->add_option("--init-mean", fit.init_mean, "initial-condition anchor \"x,y\"");
  cmd_fit->add_option("--init-sigma", fit.init_sigma, "initial-condition std")
      ->capture_default_str();
  cmd_fit->add_option("--noise-inject", fit.noise_inject,
                      "per-step rollout noise std (0 = off)")
      ->capture_default_str();
  cmd_fit->add_option("--lr", fit.lr, "Adam learning rate")->capture_default_str();
  cmd_fit->add_option("--beta1", fit.beta1, "Adam beta1")->capture_default_str();
  cmd_fit->add_option("--beta2", fit.beta2, "Adam beta2")->capture_default_str();
  cmd_fit->add_option("--iters", fit.iters, "training iterations")->capture_default_str();
  cmd_fit->add_option("--seed", fit.seed, "RNG seed")->capture_default_str();
  cmd_fit->add_option("--threads", fit.threads, "worker threads (does not change results)")
      ->capture_default_str();
  cmd_fit->add_option("--epsilon", fit.epsilon, "field normalization guard")
      ->capture_default_str();
  cmd_fit->add_option("--checkpoint-every", fit.checkpoint_every,
                      "write checkpoint_NNNNNN.json every N iterations (0 = final only)")
      ->capture_default_str();
  cmd_fit->add_option("--config", fit.config, "JSON config or manifest; flags override");

  SimulateOpts sim;
  CLI::App* cmd_sim = app.add_subcommand("simulate", "integrate trajectories through a field");
  cmd_sim->add_option("--model", sim.model, "checkpoint JSON");
  cmd_sim->add_option("--field", sim.field,
                      "analytic field hook (constant:vx,vy | rotation | rigid_rotation | saddle)");
  cmd_sim->add_option("--init", sim.inits, "initial condition \"x,y\" (repeatable)");
  cmd_sim->add_option("--steps", sim.steps, "number of steps")->capture_default_str();
  cmd_sim->add_option("--dt", sim.dt, "step size")->capture_default_str();
  cmd_sim->add_option("--scheme", sim.scheme, "euler | rk4")->capture_default_str();
  cmd_sim->add_option("--out", sim.out, "output directory")->required();
  cmd_sim->add_option("--config", sim.config, "JSON config or manifest; flags override");

  FtleOpts ftle;
  CLI::App* cmd_ftle =
      app.add_subcommand("ftle", "finite-time Lyapunov exponent field on a grid");
  cmd_ftle->add_option("--model", ftle.model, "checkpoint JSON");
  cmd_ftle->add_option("--field", ftle.field, "analytic field hook");
  cmd_ftle->add_option("--bounds", ftle.bounds, "xmin,xmax,ymin,ymax")->capture_default_str();
  cmd_ftle->add_option("--nx", ftle.nx, "grid nodes in x")->check(CLI::Range(3, 100000))
      ->capture_default_str();
  cmd_ftle->add_option("--ny", ftle.ny, "grid nodes in y")->check(CLI::Range(3, 100000))
      ->capture_default_str();
  cmd_ftle->add_option("--T", ftle.T, "advection horizon")->capture_default_str();
  cmd_ftle->add_option("--dt", ftle.dt, "step size")->capture_default_str();
  cmd_ftle->add_option("--scheme", ftle.scheme, "euler | rk4")->capture_default_str();
  cmd_ftle->add_option("--out", ftle.out, "output directory")->required();
  cmd_ftle->add_option("--config", ftle.config, "JSON config or manifest; flags override");

  CLI::App* cmd_prc = app.add_subcommand("prc", "phase-response-curve experiments");
  cmd_prc->require_subcommand(1);

  PrcFitOpts prc_fit;
  CLI::App* cmd_prc_fit =
      cmd_prc->add_subcommand("fit", "fit a field to a target phase-response curve");
  add_target_flags(cmd_prc_fit, prc_fit.target);
  cmd_prc_fit->add_option("--phases", prc_fit.phases, "phase-grid size")
      ->check(CLI::Range(1, 100000))->capture_default_str();
  cmd_prc_fit->add_option("--delta-a", prc_fit.delta_a, "amplitude kick")->capture_default_str();
  cmd_prc_fit->add_option("--lambda-circle", prc_fit.lambda_circle, "circle-penalty weight")
      ->capture_default_str();
  cmd_prc_fit->add_option("--relax-periods", prc_fit.relax_periods,
                          "relaxation horizon in nominal periods")
      ->capture_default_str();
  cmd_prc_fit->add_option("--dt", prc_fit.dt, "step size")->capture_default_str();
  cmd_prc_fit->add_option("--scheme", prc_fit.scheme, "euler | rk4")->capture_default_str();
  cmd_prc_fit->add_option("--arch", prc_fit.arch, "layer widths")->capture_default_str();
  cmd_prc_fit->add_option("--activation", prc_fit.activation, "tanh | relu")
      ->capture_default_str();
  cmd_prc_fit->add_option("--lr", prc_fit.lr, "Adam learning rate")->capture_default_str();
  cmd_prc_fit->add_option("--beta1", prc_fit.beta1, "Adam beta1")->capture_default_str();
  cmd_prc_fit->add_option("--beta2", prc_fit.beta2, "Adam beta2")->capture_default_str();
  cmd_prc_fit->add_option("--iters", prc_fit.iters, "training iterations")
      ->capture_default_str();
  cmd_prc_fit->add_option("--seed", prc_fit.seed, "RNG seed")->capture_default_str();
  cmd_prc_fit->add_option("--threads", prc_fit.threads,
                          "worker threads (does not change results)")
      ->capture_default_str();
  cmd_prc_fit->add_option("--epsilon", prc_fit.epsilon, "field normalization guard")
      ->capture_default_str();
  cmd_prc_fit->add_flag("--no-warm-start", prc_fit.no_warm_start,
                        "skip the circle-following warm start");
  cmd_prc_fit->add_option("--warm-start-iters", prc_fit.warm_start_iters,
                          "warm-start iterations")
      ->capture_default_str();
  cmd_prc_fit->add_flag("--radians", prc_fit.radians, "phase shifts in radians, not degrees");
  cmd_prc_fit->add_option("--out", prc_fit.out, "output directory")->required();
  cmd_prc_fit->add_option("--config", prc_fit.config, "JSON config or manifest; flags override");

  PrcEvalOpts prc_eval;
  CLI::App* cmd_prc_eval =
      cmd_prc->add_subcommand("eval", "measure the phase-response curve of a field");
  cmd_prc_eval->add_option("--model", prc_eval.model, "checkpoint JSON");
  cmd_prc_eval->add_option("--field", prc_eval.field, "analytic field hook");
  add_target_flags(cmd_prc_eval, prc_eval.target);
  cmd_prc_eval->add_flag("--with-target", prc_eval.with_target,
                         "fill the target column from --target-* flags");
  cmd_prc_eval->add_option("--phases", prc_eval.phases, "phase-grid size")
      ->check(CLI::Range(1, 100000))->capture_default_str();
  cmd_prc_eval->add_option("--delta-a", prc_eval.delta_a, "amplitude kick")
      ->capture_default_str();
  cmd_prc_eval->add_option("--relax-periods", prc_eval.relax_periods,
                           "relaxation horizon in nominal periods")
      ->capture_default_str();
  cmd_prc_eval->add_option("--dt", prc_eval.dt, "step size")->capture_default_str();
  cmd_prc_eval->add_option("--scheme", prc_eval.scheme, "euler | rk4")->capture_default_str();
  cmd_prc_eval->add_flag("--radians", prc_eval.radians, "phase shifts in radians, not degrees");
  cmd_prc_eval->add_option("--out", prc_eval.out, "output directory")->required();
  cmd_prc_eval->add_option("--config", prc_eval.config,
                           "JSON config or manifest; flags override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (cmd_gen->parsed()) {
      ConfigMerger m{cmd_gen};
      m.load(gen.config);
      m.merge("--shape", "shape", gen.shape);
      m.merge("--n", "n", gen.n);
      m.merge("--noise", "noise", gen.noise);
      m.merge("--seed", "seed", gen.seed);
      return run_gen(gen);
    }
    if (cmd_fit->parsed()) {
      ConfigMerger m{cmd_fit};
      m.load(fit.config);
      m.merge("--data", "data", fit.data);
      m.merge("--arch", "arch", fit.arch);
      m.merge("--activation", "activation", fit.activation);
      m.merge("--scheme", "scheme", fit.scheme);
      m.merge("--dt", "dt", fit.dt);
      m.merge("--steps", "steps", fit.steps);
      m.merge("--n-traj", "n_traj", fit.n_traj);
      m.merge("--init-mean", "init_mean", fit.init_mean);
      m.merge("--init-sigma", "init_sigma", fit.init_sigma);
      m.merge("--noise-inject", "noise_inject", fit.noise_inject);
      m.merge("--lr", "lr", fit.lr);
      m.merge("--beta1", "beta1", fit.beta1);
      m.merge("--beta2", "beta2", fit.beta2);
      m.merge("--iters", "iters", fit.iters);
      m.merge("--seed", "seed", fit.seed);
      m.merge("--threads", "threads", fit.threads);
      m.merge("--epsilon", "epsilon", fit.epsilon);
      m.merge("--checkpoint-every", "checkpoint_every", fit.checkpoint_every);
      return run_fit(fit);
    }
    if (cmd_sim->parsed()) {
      ConfigMerger m{cmd_sim};
      m.load(sim.config);
      m.merge("--model", "model", sim.model);
      m.merge("--field", "field", sim.field);
      m.merge("--init", "init", sim.inits);
      m.merge("--steps", "steps", sim.steps);
      m.merge("--dt", "dt", sim.dt);
      m.merge("--scheme", "scheme", sim.scheme);
      return run_simulate(sim);
    }
    if (cmd_ftle->parsed()) {
      ConfigMerger m{cmd_ftle};
      m.load(ftle.config);
      m.merge("--model", "model", ftle.model);
      m.merge("--field", "field", ftle.field);
      m.merge("--bounds", "bounds", ftle.bounds);
      m.merge("--nx", "nx", ftle.nx);
      m.merge("--ny", "ny", ftle.ny);
      m.merge("--T", "T", ftle.T);
      m.merge("--dt", "dt", ftle.dt);
      m.merge("--scheme", "scheme", ftle.scheme);
      return run_ftle(ftle);
    }
    if (cmd_prc_fit->parsed()) {
      ConfigMerger m{cmd_prc_fit};
      m.load(prc_fit.config);
      m.merge("--target-sigma-phi", "target_sigma_phi", prc_fit.target.sigma_phi);
      m.merge("--target-xi1", "target_xi1", prc_fit.target.xi1);
      m.merge("--target-xi2", "target_xi2", prc_fit.target.xi2);
      m.merge("--target-a1", "target_a1", prc_fit.target.a1);
      m.merge("--target-a2", "target_a2", prc_fit.target.a2);
      m.merge("--target-scale", "target_scale", prc_fit.target.scale);
      m.merge("--phases", "phases", prc_fit.phases);
      m.merge("--delta-a", "delta_a", prc_fit.delta_a);
      m.merge("--lambda-circle", "lambda_circle", prc_fit.lambda_circle);
      m.merge("--relax-periods", "relax_periods", prc_fit.relax_periods);
      m.merge("--dt", "dt", prc_fit.dt);
      m.merge("--scheme", "scheme", prc_fit.scheme);
      m.merge("--arch", "arch", prc_fit.arch);
      m.merge("--activation", "activation", prc_fit.activation);
      m.merge("--lr", "lr", prc_fit.lr);
      m.merge("--beta1", "beta1", prc_fit.beta1);
      m.merge("--beta2", "beta2", prc_fit.beta2);
      m.merge("--iters", "iters", prc_fit.iters);
      m.merge("--seed", "seed", prc_fit.seed);
      m.merge("--threads", "threads", prc_fit.threads);
      m.merge("--epsilon", "epsilon", prc_fit.epsilon);
      m.merge("--warm-start-iters", "warm_start_iters", prc_fit.warm_start_iters);
      return run_prc_fit(prc_fit);
    }
    if (cmd_prc_eval->parsed()) {
      ConfigMerger m{cmd_prc_eval};
      m.load(prc_eval.config);
      m.merge("--model", "model", prc_eval.model);
      m.merge("--field", "field", prc_eval.field);
      m.merge("--phases", "phases", prc_eval.phases);
      m.merge("--delta-a", "delta_a", prc_eval.delta_a);
      m.merge("--relax-periods", "relax_periods", prc_eval.relax_periods);
      m.merge("--dt", "dt", prc_eval.dt);
      m.merge("--scheme", "scheme", prc_eval.scheme);
      return run_prc_eval(prc_eval);
    }
  } catch (const pflow::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\nrun 'pflow --help' for usage\n";
    return 2;
  } catch (const pflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
