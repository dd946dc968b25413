#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cogintac/error.hpp"
#include "cogintac/random.hpp"

namespace cogintac::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using json = nlohmann::json;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m, adam_v;
  bool frozen = false;

  Index rows() const { return value.rows(); }
  Index cols() const { return value.cols(); }
};

enum class Init { zero, xavier, small_uniform, identity };

/// Owns every trainable tensor of a model. Parameter addresses are stable
/// for the lifetime of the set, including across moves.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;

  Parameter& add(const std::string& name, Index rows, Index cols, Init init, Rng& rng) {
    if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->value = Matrix::Zero(rows, cols);
    switch (init) {
      case Init::zero:
        break;
      case Init::xavier: {
        const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (Index i = 0; i < rows; ++i)
          for (Index j = 0; j < cols; ++j) p->value(i, j) = uniform(rng, -a, a);
        break;
      }
      case Init::small_uniform:
        for (Index i = 0; i < rows; ++i)
          for (Index j = 0; j < cols; ++j) p->value(i, j) = uniform(rng, -0.1, 0.1);
        break;
      case Init::identity:
        for (Index i = 0; i < std::min(rows, cols); ++i) p->value(i, i) = 1.0;
        break;
    }
    p->grad = Matrix::Zero(rows, cols);
    p->adam_m = Matrix::Zero(rows, cols);
    p->adam_v = Matrix::Zero(rows, cols);
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
    return *params_[it->second];
  }
  const Parameter& get(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->get(name);
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Parameter*> all() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }
  std::vector<const Parameter*> all() const {
    std::vector<const Parameter*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }

  bool all_finite() const {
    for (auto& p : params_)
      if (!p->value.allFinite()) return false;
    return true;
  }

  std::vector<Matrix> snapshot() const {
    std::vector<Matrix> out;
    for (auto& p : params_) out.push_back(p->value);
    return out;
  }
  void restore(const std::vector<Matrix>& values) {
    if (values.size() != params_.size()) throw ConfigError("snapshot size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
  }

  std::size_t size() const { return params_.size(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

/// Tensor dump: {"name": {"shape": [rows, cols], "data": [row-major]}}.
inline json tensors_to_json(const ParameterSet& set) {
  json out = json::object();
  for (const auto* p : set.all()) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(p->value.size()));
    for (Index i = 0; i < p->rows(); ++i)
      for (Index j = 0; j < p->cols(); ++j) data.push_back(p->value(i, j));
    out[p->name] = json{{"shape", {p->rows(), p->cols()}}, {"data", std::move(data)}};
  }
  return out;
}

inline void tensors_from_json(ParameterSet& set, const json& j) {
  for (auto* p : set.all()) {
    if (!j.contains(p->name)) throw FormatError("checkpoint lacks tensor '" + p->name + "'");
    const auto& t = j.at(p->name);
    const auto shape = t.at("shape").get<std::vector<Index>>();
    if (shape.size() != 2 || shape[0] != p->rows() || shape[1] != p->cols())
      throw FormatError("shape mismatch for tensor '" + p->name + "'");
    const auto data = t.at("data").get<std::vector<double>>();
    if (data.size() != static_cast<std::size_t>(p->value.size()))
      throw FormatError("data size mismatch for tensor '" + p->name + "'");
    std::size_t k = 0;
    for (Index i = 0; i < p->rows(); ++i)
      for (Index j2 = 0; j2 < p->cols(); ++j2) p->value(i, j2) = data[k++];
  }
  if (j.size() != set.size()) throw FormatError("checkpoint has unexpected extra tensors");
}

}  // namespace cogintac::nn
