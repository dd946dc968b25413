#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cogintac/nn/tape.hpp"

namespace cogintac::nn {

struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static Linear create(ParameterSet& set, const std::string& name, Index in, Index out, Rng& rng,
                       Init init = Init::xavier) {
    Linear l;
    l.weight = &set.add(name + ".weight", out, in, init, rng);
    l.bias = &set.add(name + ".bias", out, 1, Init::zero, rng);
    return l;
  }

  Index in() const { return weight->cols(); }
  Index out() const { return weight->rows(); }

  Expr operator()(Expr x) const { return affine(*weight, *bias, x); }

  /// Plain evaluation without a tape.
  Vector apply(const Vector& x) const { return weight->value * x + bias->value.col(0); }
};

/// One GRU direction: gates stacked as [update; reset; candidate].
struct GruLayer {
  Parameter* input_weight = nullptr;      // 3H x In
  Parameter* recurrent_weight = nullptr;  // 3H x H
  Parameter* bias = nullptr;              // 3H x 1

  static GruLayer create(ParameterSet& set, const std::string& name, Index in, Index hidden,
                         Rng& rng) {
    GruLayer g;
    g.input_weight = &set.add(name + ".W", 3 * hidden, in, Init::xavier, rng);
    g.recurrent_weight = &set.add(name + ".U", 3 * hidden, hidden, Init::xavier, rng);
    g.bias = &set.add(name + ".b", 3 * hidden, 1, Init::zero, rng);
    return g;
  }

  Index hidden() const { return recurrent_weight->cols(); }
  Index in() const { return input_weight->cols(); }

  Expr step(Expr x, Expr h) const {
    return gru_update(affine(*input_weight, *bias, x), matvec(*recurrent_weight, h), h);
  }

  /// Runs over `inputs` (reversed when `backwards`); outputs are returned in
  /// input order.
  std::vector<Expr> run(Tape& tape, const std::vector<Expr>& inputs, bool backwards,
                        std::optional<Expr> initial = std::nullopt) const {
    std::vector<Expr> out(inputs.size());
    Expr h = initial ? *initial : constant(tape, Vector::Zero(hidden()));
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const std::size_t i = backwards ? inputs.size() - 1 - k : k;
      h = step(inputs[i], h);
      out[i] = h;
    }
    return out;
  }
};

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; <= 0 disables.
  double clip_norm = 5.0;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update from the accumulated gradients (scaled by
  /// `grad_scale`) and clears them.
  void step(ParameterSet& set, double grad_scale = 1.0) {
    ++t_;
    auto params = set.all();
    double norm2 = 0.0;
    for (auto* p : params)
      if (!p->frozen) norm2 += (p->grad * grad_scale).squaredNorm();
    double factor = grad_scale;
    if (cfg_.clip_norm > 0 && std::sqrt(norm2) > cfg_.clip_norm)
      factor *= cfg_.clip_norm / std::sqrt(norm2);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto* p : params) {
      if (p->frozen) {
        p->grad.setZero();
        continue;
      }
      const Matrix g = p->grad * factor;
      p->adam_m = cfg_.beta1 * p->adam_m + (1.0 - cfg_.beta1) * g;
      p->adam_v = cfg_.beta2 * p->adam_v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      p->value.array() -= cfg_.learning_rate * (p->adam_m.array() / bc1) /
                          ((p->adam_v.array() / bc2).sqrt() + cfg_.epsilon);
      p->grad.setZero();
    }
  }

  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace cogintac::nn
