#pragma once

// Topological forward/backward over a GraphSpec. The spec itself is
// immutable; activations and caches live in the Executor, so one graph can
// back several executors at once.

#include <map>
#include <string>
#include <vector>

#include "rcnds/core/rng.hpp"
#include "rcnds/core/tensor.hpp"
#include "rcnds/graph/graph_spec.hpp"
#include "rcnds/graph/parameters.hpp"
#include "rcnds/ops/layers.hpp"

namespace rcnds::graph {

template <typename T>
class Executor {
 public:
  explicit Executor(GraphSpec g);

  const GraphSpec& graph() const { return g_; }
  const ShapeTable& shapes() const { return shapes_; }

  /// Logits (pre-softmax, shape (n, classes)) keyed by output node name.
  /// Train mode runs every node; eval mode runs only what the main output
  /// depends on, so supervision branches are skipped entirely. A train pass
  /// draws one value from `rng`; each dropout node derives its mask stream
  /// from that value and its own name.
  std::map<std::string, Tensor<T>> forward(const ParameterSet<T>& params, const Tensor<T>& input, ops::Mode mode,
                                           Rng& rng);

  /// Parameter gradients given d(loss)/d(logits) for any subset of the
  /// outputs produced by the last forward. Uses the parameters passed to
  /// that forward; throws StateError if there was none.
  ParameterSet<T> backward(const ParameterSet<T>& params, const std::map<std::string, Tensor<T>>& logit_grads);

  /// Output of `node` from the last forward.
  const Tensor<T>& activation(const std::string& node) const;

 private:
  struct Slot {
    std::size_t weight = 0, bias = 0, gamma = 0, beta = 0;
  };
  struct Cache {
    bool valid = false;
    Tensor<T> output;
    Tensor<T> linear;      // conv output before the scale stage
    std::vector<T> mask;   // dropout
    ops::PoolArgmax argmax;
  };

  Slot resolve(const ParameterSet<T>& params, const LayerNode& n) const;
  void check_drift(const LayerNode& n, const Tensor<T>& t) const;

  GraphSpec g_;
  ShapeTable shapes_;
  std::vector<std::vector<int>> inputs_;  // producer indices per node
  std::vector<bool> main_path_;
  std::vector<Cache> cache_;
  bool ran_ = false;
};

}  // namespace rcnds::graph
