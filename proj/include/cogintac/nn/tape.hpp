#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cogintac/nn/parameters.hpp"

namespace cogintac::nn {

class Tape;

/// Handle to a vector-valued node on a Tape.
struct Expr {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Vector& value() const;
  Index size() const { return value().size(); }
  double scalar() const { return value()(0); }
};

/// Reverse-mode autodiff tape over column vectors. Build a fresh tape per
/// example; call backward() on a scalar node to accumulate gradients into
/// the Parameters that were touched. Not thread-safe.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Vector& grad)>;

  Expr push(Vector value, Backward backward = {}) {
    nodes_.push_back(Node{std::move(value), Vector(), std::move(backward)});
    return Expr{this, nodes_.size() - 1};
  }

  const Vector& value(std::size_t id) const { return nodes_[id].value; }
  Vector& grad(std::size_t id) { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

  void backward(Expr loss) {
    if (loss.tape != this || loss.size() != 1) throw NumericError("backward needs a scalar node");
    for (std::size_t i = 0; i <= loss.id; ++i) nodes_[i].grad = Vector::Zero(nodes_[i].value.size());
    nodes_[loss.id].grad(0) = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.backward && n.grad.size() > 0 && n.grad.cwiseAbs().maxCoeff() != 0.0) {
        const Vector g = n.grad;
        n.backward(*this, g);
      }
    }
  }

 private:
  struct Node {
    Vector value;
    Vector grad;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

inline const Vector& Expr::value() const { return tape->value(id); }

// ---------------------------------------------------------------------------
// Leaves

inline Expr constant(Tape& t, Vector v) { return t.push(std::move(v)); }

/// A column-vector parameter (e.g. a bias) as a node.
inline Expr param(Tape& t, Parameter& p) {
  Parameter* pp = &p;
  return t.push(p.value.col(0), [pp](Tape&, const Vector& g) { pp->grad.col(0) += g; });
}

/// Row `row` of an embedding matrix as a column vector.
inline Expr lookup(Tape& t, Parameter& table, Index row) {
  Parameter* pp = &table;
  return t.push(table.value.row(row).transpose(),
                [pp, row](Tape&, const Vector& g) { pp->grad.row(row) += g.transpose(); });
}

// ---------------------------------------------------------------------------
// Linear maps

inline Expr matvec(Parameter& w, Expr x) {
  if (w.cols() != x.size()) throw DimensionError("matvec: '" + w.name + "' expects input " +
                                                 std::to_string(w.cols()) + ", got " +
                                                 std::to_string(x.size()));
  Parameter* pw = &w;
  const auto xi = x.id;
  return x.tape->push(w.value * x.value(), [pw, xi](Tape& t, const Vector& g) {
    pw->grad.noalias() += g * t.value(xi).transpose();
    t.grad(xi).noalias() += pw->value.transpose() * g;
  });
}

inline Expr affine(Parameter& w, Parameter& b, Expr x) {
  if (w.cols() != x.size()) throw DimensionError("affine: '" + w.name + "' expects input " +
                                                 std::to_string(w.cols()) + ", got " +
                                                 std::to_string(x.size()));
  Parameter* pw = &w;
  Parameter* pb = &b;
  const auto xi = x.id;
  Vector y = w.value * x.value() + b.value.col(0);
  return x.tape->push(std::move(y), [pw, pb, xi](Tape& t, const Vector& g) {
    pw->grad.noalias() += g * t.value(xi).transpose();
    pb->grad.col(0) += g;
    t.grad(xi).noalias() += pw->value.transpose() * g;
  });
}

// ---------------------------------------------------------------------------
// Elementwise

inline Expr add(Expr a, Expr b) {
  if (a.size() != b.size()) throw DimensionError("add: size mismatch");
  const auto ai = a.id, bi = b.id;
  return a.tape->push(a.value() + b.value(), [ai, bi](Tape& t, const Vector& g) {
    t.grad(ai) += g;
    t.grad(bi) += g;
  });
}

inline Expr sub(Expr a, Expr b) {
  if (a.size() != b.size()) throw DimensionError("sub: size mismatch");
  const auto ai = a.id, bi = b.id;
  return a.tape->push(a.value() - b.value(), [ai, bi](Tape& t, const Vector& g) {
    t.grad(ai) += g;
    t.grad(bi) -= g;
  });
}

inline Expr cmul(Expr a, Expr b) {
  if (a.size() != b.size()) throw DimensionError("cmul: size mismatch");
  const auto ai = a.id, bi = b.id;
  return a.tape->push(a.value().cwiseProduct(b.value()), [ai, bi](Tape& t, const Vector& g) {
    t.grad(ai) += g.cwiseProduct(t.value(bi));
    t.grad(bi) += g.cwiseProduct(t.value(ai));
  });
}

inline Expr operator+(Expr a, Expr b) { return add(a, b); }
inline Expr operator-(Expr a, Expr b) { return sub(a, b); }

inline Expr scale(Expr x, double s) {
  const auto xi = x.id;
  return x.tape->push(x.value() * s, [xi, s](Tape& t, const Vector& g) { t.grad(xi) += s * g; });
}

inline Expr one_minus(Expr x) {
  const auto xi = x.id;
  return x.tape->push(Vector::Ones(x.size()) - x.value(),
                      [xi](Tape& t, const Vector& g) { t.grad(xi) -= g; });
}

inline Expr tanh(Expr x) {
  const auto xi = x.id;
  Vector y = x.value().array().tanh();
  Vector dy = 1.0 - y.array().square();
  return x.tape->push(std::move(y), [xi, dy = std::move(dy)](Tape& t, const Vector& g) {
    t.grad(xi) += g.cwiseProduct(dy);
  });
}

inline Vector sigmoid_values(const Vector& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

inline Expr sigmoid(Expr x) {
  const auto xi = x.id;
  Vector y = sigmoid_values(x.value());
  Vector dy = y.array() * (1.0 - y.array());
  return x.tape->push(std::move(y), [xi, dy = std::move(dy)](Tape& t, const Vector& g) {
    t.grad(xi) += g.cwiseProduct(dy);
  });
}

inline Expr relu(Expr x) {
  const auto xi = x.id;
  Vector y = x.value().cwiseMax(0.0);
  return x.tape->push(std::move(y), [xi](Tape& t, const Vector& g) {
    const auto& xv = t.value(xi);
    for (Index i = 0; i < g.size(); ++i)
      if (xv(i) > 0) t.grad(xi)(i) += g(i);
  });
}

// ---------------------------------------------------------------------------
// Shape

inline Expr concat(std::span<const Expr> parts) {
  if (parts.empty()) throw DimensionError("concat of nothing");
  Index total = 0;
  for (auto p : parts) total += p.size();
  Vector y(total);
  std::vector<std::pair<std::size_t, Index>> ids;
  Index off = 0;
  for (auto p : parts) {
    y.segment(off, p.size()) = p.value();
    ids.emplace_back(p.id, p.size());
    off += p.size();
  }
  return parts.front().tape->push(std::move(y), [ids = std::move(ids)](Tape& t, const Vector& g) {
    Index o = 0;
    for (auto [id, n] : ids) {
      t.grad(id) += g.segment(o, n);
      o += n;
    }
  });
}

inline Expr concat(std::initializer_list<Expr> parts) {
  return concat(std::span<const Expr>(parts.begin(), parts.size()));
}

inline Expr slice(Expr x, Index start, Index len) {
  if (start < 0 || start + len > x.size()) throw DimensionError("slice out of range");
  const auto xi = x.id;
  return x.tape->push(x.value().segment(start, len), [xi, start, len](Tape& t, const Vector& g) {
    t.grad(xi).segment(start, len) += g;
  });
}

inline Expr pick(Expr x, Index i) { return slice(x, i, 1); }

// ---------------------------------------------------------------------------
// Reductions

inline Expr sum(std::span<const Expr> xs) {
  if (xs.empty()) throw DimensionError("sum of nothing");
  Vector y = Vector::Zero(xs.front().size());
  std::vector<std::size_t> ids;
  for (auto x : xs) {
    if (x.size() != y.size()) throw DimensionError("sum: size mismatch");
    y += x.value();
    ids.push_back(x.id);
  }
  return xs.front().tape->push(std::move(y), [ids = std::move(ids)](Tape& t, const Vector& g) {
    for (auto id : ids) t.grad(id) += g;
  });
}

inline Expr mean(std::span<const Expr> xs) {
  return scale(sum(xs), 1.0 / static_cast<double>(xs.size()));
}

inline Expr dot(Expr a, Expr b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  const auto ai = a.id, bi = b.id;
  Vector y(1);
  y(0) = a.value().dot(b.value());
  return a.tape->push(std::move(y), [ai, bi](Tape& t, const Vector& g) {
    t.grad(ai) += g(0) * t.value(bi);
    t.grad(bi) += g(0) * t.value(ai);
  });
}

/// Vector of s * <query, key_j> over keys.
inline Expr dots(Expr query, std::span<const Expr> keys, double s) {
  Vector y(static_cast<Index>(keys.size()));
  std::vector<std::size_t> ids;
  for (std::size_t j = 0; j < keys.size(); ++j) {
    if (keys[j].size() != query.size()) throw DimensionError("dots: size mismatch");
    y(static_cast<Index>(j)) = s * query.value().dot(keys[j].value());
    ids.push_back(keys[j].id);
  }
  const auto qi = query.id;
  return query.tape->push(std::move(y), [qi, ids = std::move(ids), s](Tape& t, const Vector& g) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const double gj = s * g(static_cast<Index>(j));
      t.grad(qi) += gj * t.value(ids[j]);
      t.grad(ids[j]) += gj * t.value(qi);
    }
  });
}

/// sum_j weights[j] * values[j].
inline Expr weighted_sum(Expr weights, std::span<const Expr> values) {
  if (static_cast<std::size_t>(weights.size()) != values.size() || values.empty())
    throw DimensionError("weighted_sum: weight count mismatch");
  Vector y = Vector::Zero(values.front().size());
  std::vector<std::size_t> ids;
  for (std::size_t j = 0; j < values.size(); ++j) {
    y += weights.value()(static_cast<Index>(j)) * values[j].value();
    ids.push_back(values[j].id);
  }
  const auto wi = weights.id;
  return weights.tape->push(std::move(y), [wi, ids = std::move(ids)](Tape& t, const Vector& g) {
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const auto jj = static_cast<Index>(j);
      t.grad(wi)(jj) += g.dot(t.value(ids[j]));
      t.grad(ids[j]) += t.value(wi)(jj) * g;
    }
  });
}

// ---------------------------------------------------------------------------
// Distributions and losses

inline Vector softmax_values(const Vector& x) {
  Vector e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

inline double log_sum_exp(const Vector& x) {
  const double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

inline Expr softmax(Expr x) {
  const auto xi = x.id;
  Vector y = softmax_values(x.value());
  const Vector yc = y;
  return x.tape->push(std::move(y), [xi, yc](Tape& t, const Vector& g) {
    t.grad(xi) += yc.cwiseProduct(g - Vector::Constant(g.size(), g.dot(yc)));
  });
}

inline Expr log_softmax(Expr x) {
  const auto xi = x.id;
  Vector y = x.value().array() - log_sum_exp(x.value());
  return x.tape->push(std::move(y), [xi](Tape& t, const Vector& g) {
    const Vector p = softmax_values(t.value(xi));
    t.grad(xi) += g - p * g.sum();
  });
}

/// -log softmax(logits)[target].
inline Expr cross_entropy(Expr logits, Index target) {
  if (target < 0 || target >= logits.size()) throw DimensionError("cross_entropy: bad target");
  const auto li = logits.id;
  Vector y(1);
  y(0) = log_sum_exp(logits.value()) - logits.value()(target);
  return logits.tape->push(std::move(y), [li, target](Tape& t, const Vector& g) {
    Vector p = softmax_values(t.value(li));
    p(target) -= 1.0;
    t.grad(li) += g(0) * p;
  });
}

/// -sum_i target[i] * log(p[i]) where p is already a distribution node.
inline Expr nll_of_distribution(Expr probs, Index target) {
  const auto pi = probs.id;
  const double p = probs.value()(target);
  Vector y(1);
  y(0) = -std::log(std::max(p, 1e-300));
  return probs.tape->push(std::move(y), [pi, target](Tape& t, const Vector& g) {
    t.grad(pi)(target) -= g(0) / std::max(t.value(pi)(target), 1e-300);
  });
}

// ---------------------------------------------------------------------------
// Fused GRU update

/// Combines precomputed input projections gx = W x + b and recurrent
/// projections gh = U h (both stacked [z; r; n]) with the previous state:
///   z = sigmoid(gx_z + gh_z), r = sigmoid(gx_r + gh_r)
///   n = tanh(gx_n + r * gh_n), h' = (1 - z) * n + z * h
inline Expr gru_update(Expr gx, Expr gh, Expr h) {
  const Index H = h.size();
  if (gx.size() != 3 * H || gh.size() != 3 * H) throw DimensionError("gru_update: size mismatch");
  const Vector& x = gx.value();
  const Vector& r_h = gh.value();
  Vector z = sigmoid_values(x.segment(0, H) + r_h.segment(0, H));
  Vector r = sigmoid_values(x.segment(H, H) + r_h.segment(H, H));
  Vector n = (x.segment(2 * H, H) + r.cwiseProduct(r_h.segment(2 * H, H))).array().tanh();
  Vector out = n + z.cwiseProduct(h.value() - n);
  const auto xi = gx.id, hi = gh.id, si = h.id;
  return gx.tape->push(
      std::move(out), [xi, hi, si, H, z = std::move(z), r = std::move(r),
                       n = std::move(n)](Tape& t, const Vector& g) {
        const Vector& prev = t.value(si);
        const Vector& ghv = t.value(hi);
        const Vector dz = g.cwiseProduct(prev - n);
        const Vector dn = g.cwiseProduct(Vector::Ones(H) - z);
        t.grad(si) += g.cwiseProduct(z);
        const Vector dan = dn.array() * (1.0 - n.array().square());
        const Vector dr = dan.cwiseProduct(ghv.segment(2 * H, H));
        const Vector dar = dr.array() * r.array() * (1.0 - r.array());
        const Vector daz = dz.array() * z.array() * (1.0 - z.array());
        auto& gxg = t.grad(xi);
        gxg.segment(0, H) += daz;
        gxg.segment(H, H) += dar;
        gxg.segment(2 * H, H) += dan;
        auto& ghg = t.grad(hi);
        ghg.segment(0, H) += daz;
        ghg.segment(H, H) += dar;
        ghg.segment(2 * H, H) += dan.cwiseProduct(r);
      });
}

}  // namespace cogintac::nn
