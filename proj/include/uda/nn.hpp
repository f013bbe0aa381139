#pragma once

#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "uda/autograd.hpp"

namespace uda {

using Rng = std::mt19937_64;

/// Draw a tensor of i.i.d. standard normal values.
Tensor standard_normal(Shape shape, Rng& rng);

/// Ordered registry of trainable leaves. Order is insertion order, which
/// makes initialization, checkpoints and optimizer state deterministic.
class ParameterStore {
 public:
  Var create(const std::string& name, Shape shape);

  const std::vector<std::pair<std::string, Var>>& entries() const { return params_; }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Var get(const std::string& name) const;

  /// Total number of scalar parameters.
  std::size_t scalar_count() const;
  void zero_grad();

  /// Xavier-uniform for every "*.weight", zeros for every "*.bias".
  void xavier_init(Rng& rng);

 private:
  std::vector<std::pair<std::string, Var>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace nn {

struct Conv2d {
  Conv2d() = default;
  Conv2d(ParameterStore& store, const std::string& name, int in, int out, int kernel);
  Var operator()(const Var& x) const;
  void zero();

  Var weight;
  Var bias;
};

struct Linear {
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int in, int out);
  Var operator()(const Var& x) const;

  Var weight;
  Var bias;
};

}  // namespace nn
}  // namespace uda
