#pragma once

#include <map>
#include <string>
#include <vector>

#include "rcnds/core/rng.hpp"
#include "rcnds/core/tensor.hpp"
#include "rcnds/graph/graph_spec.hpp"

namespace rcnds::graph {

enum class ParamRole { kWeight, kBias, kGamma, kBeta };

/// One learnable tensor of a graph. Names are `<group>.<node>.<role>` with
/// group `main`, `branch1`, `branch2`, ...
struct ParamSpec {
  std::string name;
  std::string node;
  int group = 0;
  ParamRole role = ParamRole::kWeight;
  Shape shape;
};

std::string group_prefix(int group);

/// Every learnable parameter of `g`, in node order.
std::vector<ParamSpec> param_specs(const GraphSpec& g);

/// Named tensors in a fixed order.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;

  void add(std::string name, Tensor<T> t);
  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return tensors_[i]; }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t index_of(const std::string& name) const;
  Tensor<T>& at(const std::string& name) { return tensors_[index_of(name)]; }
  const Tensor<T>& at(const std::string& name) const { return tensors_[index_of(name)]; }

  const std::vector<std::string>& names() const { return names_; }

  /// Same names and shapes, all zeros.
  ParameterSet zeros_like() const;

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].template cast<U>());
    return out;
  }

  bool operator==(const ParameterSet& o) const { return names_ == o.names_ && tensors_ == o.tensors_; }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::map<std::string, std::size_t> index_;
};

/// Weights ~ N(0, weight_std^2); biases and betas 0; gammas 1.
ParameterSet<float> init_parameters(const GraphSpec& g, double weight_std, Rng& rng);

/// The entries of `source` that `g` needs, in g's order. Throws
/// CheckpointError on a missing name or a shape mismatch.
template <typename T>
ParameterSet<T> select_parameters(const GraphSpec& g, const ParameterSet<T>& source);

}  // namespace rcnds::graph
