#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pflow/common.hpp"
#include "pflow/rng.hpp"

namespace pflow {

enum class Activation { Tanh, Relu };

inline const char* to_string(Activation a) {
  return a == Activation::Tanh ? "tanh" : "relu";
}

inline Activation activation_from_string(std::string_view s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw ConfigError("unknown activation \"" + std::string(s) + "\" (expected tanh or relu)");
}

// Fully-connected net mapping R^2 -> R^2. layer_widths includes the input
// and output widths, e.g. {2, 64, 64, 2}. Hidden layers share one
// activation; the output layer is linear.
struct MLPArchitecture {
  std::vector<int> layer_widths{2, 64, 64, 2};
  Activation activation = Activation::Tanh;

  int n_affine_layers() const { return static_cast<int>(layer_widths.size()) - 1; }

  void validate() const {
    if (layer_widths.size() < 3)
      throw ConfigError("architecture needs at least one hidden layer");
    for (int w : layer_widths)
      if (w < 1) throw ConfigError("architecture has a non-positive layer width");
    if (layer_widths.front() != 2 || layer_widths.back() != 2)
      throw ConfigError("input and output widths must both be 2");
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l)
      n += static_cast<std::size_t>(layer_widths[l]) * layer_widths[l + 1] + layer_widths[l + 1];
    return n;
  }
};

inline bool operator==(const MLPArchitecture& a, const MLPArchitecture& b) {
  return a.layer_widths == b.layer_widths && a.activation == b.activation;
}

// Flat trainable state in canonical order: per affine layer, the weight
// matrix row-major (one row per output unit), then the biases. Checkpoints
// and gradient buffers rely on this order.
struct ParamVector {
  MLPArchitecture arch;
  std::vector<double> values;
};

// Glorot-uniform weights, zero biases; fully determined by the seed.
inline ParamVector init_params(const MLPArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  ParamVector p{arch, std::vector<double>(arch.param_count(), 0.0)};
  Rng rng(stream_seed(seed, RngStream::ParamInit));
  std::size_t off = 0;
  for (int l = 0; l + 1 < static_cast<int>(arch.layer_widths.size()); ++l) {
    const int in = arch.layer_widths[l];
    const int out = arch.layer_widths[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    for (int k = 0; k < in * out; ++k) p.values[off + k] = rng.uniform(-limit, limit);
    off += static_cast<std::size_t>(in) * out + out;
  }
  return p;
}

// Scratch buffers plus cached post-activations for one forward/backward
// pair. forward() must precede vjp() with the same parameters; the cache is
// overwritten by the next forward(). Not thread-safe; use one per thread.
class MLPWorkspace {
 public:
  Vec2 forward(const ParamVector& p, Vec2 x) {
    if (!x.finite())
      throw NumericError("mlp forward: non-finite input " + pflow::to_string(x));
    bind(p.arch);
    if (p.values.size() != n_params_)
      throw ContractError("mlp forward: parameter vector length does not match architecture");
    acts_[0] = x.x;
    acts_[1] = x.y;
    const double* pv = p.values.data();
    const int n_layers = static_cast<int>(widths_.size()) - 1;
    for (int l = 0; l < n_layers; ++l) {
      const int in = widths_[l];
      const int out = widths_[l + 1];
      const double* w = pv + param_off_[l];
      const double* b = w + static_cast<std::size_t>(in) * out;
      const double* a_in = acts_.data() + act_off_[l];
      double* a_out = acts_.data() + act_off_[l + 1];
      const bool hidden = l + 1 < n_layers;
      for (int i = 0; i < out; ++i) {
        const double* wr = w + static_cast<std::size_t>(i) * in;
        double s = b[i];
        for (int j = 0; j < in; ++j) s += wr[j] * a_in[j];
        if (hidden) s = act_ == Activation::Tanh ? std::tanh(s) : (s > 0.0 ? s : 0.0);
        a_out[i] = s;
      }
    }
    const double* a_last = acts_.data() + act_off_[n_layers];
    return {a_last[0], a_last[1]};
  }

  // Pullback of the most recent forward(): accumulates
  // d<cotangent, output>/dparams into grad_params (pass an empty span to
  // skip) and returns d<cotangent, output>/dinput.
  Vec2 vjp(const ParamVector& p, Vec2 cotangent, std::span<double> grad_params) {
    if (!cotangent.finite())
      throw NumericError("mlp vjp: non-finite cotangent " + pflow::to_string(cotangent));
    if (p.values.size() != n_params_)
      throw ContractError("mlp vjp: parameter vector length does not match architecture");
    if (!grad_params.empty() && grad_params.size() != n_params_)
      throw ContractError("mlp vjp: gradient buffer length does not match architecture");
    const double* pv = p.values.data();
    const int n_layers = static_cast<int>(widths_.size()) - 1;
    double* delta = delta_a_.data();
    double* delta_prev = delta_b_.data();
    delta[0] = cotangent.x;
    delta[1] = cotangent.y;
    for (int l = n_layers - 1; l >= 0; --l) {
      const int in = widths_[l];
      const int out = widths_[l + 1];
      const double* w = pv + param_off_[l];
      const double* a_in = acts_.data() + act_off_[l];
      if (!grad_params.empty()) {
        double* gw = grad_params.data() + param_off_[l];
        double* gb = gw + static_cast<std::size_t>(in) * out;
        for (int i = 0; i < out; ++i) {
          const double di = delta[i];
          gb[i] += di;
          double* gwr = gw + static_cast<std::size_t>(i) * in;
          for (int j = 0; j < in; ++j) gwr[j] += di * a_in[j];
        }
      }
      for (int j = 0; j < in; ++j) {
        double s = 0.0;
        for (int i = 0; i < out; ++i) s += w[static_cast<std::size_t>(i) * in + j] * delta[i];
        delta_prev[j] = s;
      }
      if (l > 0) {
        // a_in holds layer l's post-activation; chain through the hidden
        // nonlinearity (tanh' = 1 - a^2, relu' = [a > 0]).
        if (act_ == Activation::Tanh) {
          for (int j = 0; j < in; ++j) delta_prev[j] *= 1.0 - a_in[j] * a_in[j];
        } else {
          for (int j = 0; j < in; ++j)
            if (a_in[j] <= 0.0) delta_prev[j] = 0.0;
        }
      }
      std::swap(delta, delta_prev);
    }
    return {delta[0], delta[1]};
  }

 private:
  void bind(const MLPArchitecture& arch) {
    if (widths_ == arch.layer_widths && act_ == arch.activation) return;
    arch.validate();
    widths_ = arch.layer_widths;
    act_ = arch.activation;
    act_off_.assign(widths_.size(), 0);
    param_off_.assign(widths_.size() - 1, 0);
    std::size_t a = 0, q = 0;
    int max_width = 0;
    for (std::size_t l = 0; l < widths_.size(); ++l) {
      act_off_[l] = a;
      a += widths_[l];
      max_width = std::max(max_width, widths_[l]);
    }
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      param_off_[l] = q;
      q += static_cast<std::size_t>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
    }
    n_params_ = q;
    acts_.assign(a, 0.0);
    delta_a_.assign(max_width, 0.0);
    delta_b_.assign(max_width, 0.0);
  }

  std::vector<int> widths_;
  Activation act_ = Activation::Tanh;
  std::vector<std::size_t> act_off_;
  std::vector<std::size_t> param_off_;
  std::size_t n_params_ = 0;
  std::vector<double> acts_;
  std::vector<double> delta_a_, delta_b_;
};

inline Vec2 mlp_forward(const ParamVector& p, Vec2 x) {
  MLPWorkspace ws;
  return ws.forward(p, x);
}

// Convenience wrapper: (d<c,g(x)>/dp, d<c,g(x)>/dx). Hot paths keep their
// own workspace and accumulate instead.
inline std::pair<std::vector<double>, Vec2> mlp_vjp(const ParamVector& p, Vec2 x, Vec2 cotangent) {
  MLPWorkspace ws;
  ws.forward(p, x);
  std::vector<double> grads(p.values.size(), 0.0);
  const Vec2 gx = ws.vjp(p, cotangent, grads);
  return {std::move(grads), gx};
}

}  // namespace pflow
