#include "rcnds/graph/executor.hpp"

#include <utility>

#include "rcnds/core/error.hpp"

namespace rcnds::graph {
namespace {

template <typename T>
void accumulate(Tensor<T>& into, const Tensor<T>& g) {
  if (into.empty()) {
    into = g;
    return;
  }
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

template <typename T>
void add_to(Tensor<T>& into, std::span<const T> g) {
  for (std::size_t i = 0; i < g.size(); ++i) into[i] += g[i];
}

// Stable per-node stream id, so dropout masks do not depend on which other
// nodes (e.g. supervision branches) exist in the graph.
std::uint64_t name_stream(const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : name) h = (h ^ ch) * 1099511628211ULL;
  return h;
}

// ReLU gate taken on the node output: out > 0 exactly where the
// pre-activation was positive (dropout only zeroes, and zeroed cells carry
// no gradient anyway).
template <typename T>
void gate(Tensor<T>& g, const Tensor<T>& out) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(out[i] > T(0))) g[i] = T(0);
  }
}

}  // namespace

template <typename T>
Executor<T>::Executor(GraphSpec g) : g_(std::move(g)), shapes_(infer_shapes(g_)) {
  const std::size_t count = g_.nodes.size();
  inputs_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (const std::string& in : g_.nodes[i].inputs) inputs_[i].push_back(g_.index_of(in));
  }
  main_path_.assign(count, false);
  const int main = g_.index_of(g_.main_output);
  if (main < 0) throw WiringError("graph has no main output");
  main_path_[static_cast<std::size_t>(main)] = true;
  for (std::size_t i = count; i-- > 0;) {
    if (!main_path_[i]) continue;
    for (int p : inputs_[i]) main_path_[static_cast<std::size_t>(p)] = true;
  }
  cache_.resize(count);
}

template <typename T>
typename Executor<T>::Slot Executor<T>::resolve(const ParameterSet<T>& params, const LayerNode& n) const {
  const std::string base = group_prefix(n.group) + "." + n.name + ".";
  Slot s;
  s.weight = params.index_of(base + "weight");
  s.bias = params.index_of(base + "bias");
  if (n.kind == LayerKind::kConv && n.scale) {
    s.gamma = params.index_of(base + "gamma");
    s.beta = params.index_of(base + "beta");
  }
  return s;
}

template <typename T>
void Executor<T>::check_drift(const LayerNode& n, const Tensor<T>& t) const {
  const CHW& e = shapes_.at(n.name);
  const bool flat = n.kind == LayerKind::kFc || n.kind == LayerKind::kOutput;
  const Shape expect = flat ? Shape{t.batch(), e.c} : Shape{t.batch(), e.c, e.h, e.w};
  if (t.shape() != expect) {
    throw StateError("shape drift at '" + n.name + "': produced " + t.shape().str() + ", expected " + expect.str());
  }
}

template <typename T>
std::map<std::string, Tensor<T>> Executor<T>::forward(const ParameterSet<T>& params, const Tensor<T>& input,
                                                      ops::Mode mode, Rng& rng) {
  const CHW& in = g_.input_shape;
  if (input.rank() != 4 || input.dim(1) != in.c || input.dim(2) != in.h || input.dim(3) != in.w) {
    throw ShapeError("input " + input.shape().str() + " does not match graph input (" + std::to_string(in.c) + "x" +
                     std::to_string(in.h) + "x" + std::to_string(in.w) + ")");
  }
  ran_ = false;
  const Rng pass(mode == ops::Mode::kTrain ? rng.next_u64() : 0);
  std::map<std::string, Tensor<T>> logits;
  for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
    const LayerNode& n = g_.nodes[i];
    Cache& c = cache_[i];
    c = Cache{};
    if (mode == ops::Mode::kEval && !main_path_[i]) continue;
    auto arg = [&](std::size_t k) -> const Tensor<T>& { return cache_[static_cast<std::size_t>(inputs_[i][k])].output; };

    switch (n.kind) {
      case LayerKind::kInput: c.output = input; break;
      case LayerKind::kConv: {
        const Slot s = resolve(params, n);
        Tensor<T> y = ops::conv2d_forward(arg(0), params[s.weight], params[s.bias].span(), {n.stride, n.pad});
        if (n.scale) {
          c.linear = std::move(y);
          y = ops::scale_forward(c.linear, params[s.gamma].span(), params[s.beta].span());
        }
        c.output = n.relu ? ops::relu_forward(y) : std::move(y);
        break;
      }
      case LayerKind::kMaxPool: {
        auto r = ops::maxpool_forward(arg(0), n.kernel, n.stride);
        c.output = std::move(r.output);
        c.argmax = std::move(r.argmax);
        break;
      }
      case LayerKind::kAvgPool: c.output = ops::avgpool_forward(arg(0), n.kernel, n.stride); break;
      case LayerKind::kFc: {
        const Slot s = resolve(params, n);
        Tensor<T> y = ops::fc_forward(arg(0), params[s.weight], params[s.bias].span());
        if (n.relu) y = ops::relu_forward(y);
        if (n.dropout > 0.0) {
          Rng local = pass.fork(name_stream(n.name));
          auto r = ops::dropout_forward(y, n.dropout, local, mode);
          y = std::move(r.output);
          c.mask = std::move(r.mask);
        }
        c.output = std::move(y);
        break;
      }
      case LayerKind::kAdd: {
        Tensor<T> y = ops::eltwise_add(arg(0), arg(1));
        c.output = n.relu ? ops::relu_forward(y) : std::move(y);
        break;
      }
      case LayerKind::kOutput:
        c.output = arg(0);
        logits.emplace(n.name, c.output);
        break;
    }
    check_drift(n, c.output);
    c.valid = true;
  }
  ran_ = true;
  return logits;
}

template <typename T>
ParameterSet<T> Executor<T>::backward(const ParameterSet<T>& params,
                                      const std::map<std::string, Tensor<T>>& logit_grads) {
  if (!ran_) throw StateError("backward called without a preceding forward");
  ParameterSet<T> grads = params.zeros_like();
  std::vector<Tensor<T>> dout(g_.nodes.size());
  for (const auto& [name, g] : logit_grads) {
    const int idx = g_.index_of(name);
    if (idx < 0 || g_.nodes[static_cast<std::size_t>(idx)].kind != LayerKind::kOutput) {
      throw StateError("'" + name + "' is not an output node");
    }
    const Cache& c = cache_[static_cast<std::size_t>(idx)];
    if (!c.valid) throw StateError("output '" + name + "' was not produced by the last forward");
    require_same_shape(c.output, g, "backward");
    accumulate(dout[static_cast<std::size_t>(idx)], g);
  }

  for (std::size_t i = g_.nodes.size(); i-- > 0;) {
    if (dout[i].empty()) continue;
    const LayerNode& n = g_.nodes[i];
    const Cache& c = cache_[i];
    Tensor<T> g = std::move(dout[i]);
    auto send = [&](std::size_t k, const Tensor<T>& grad) {
      accumulate(dout[static_cast<std::size_t>(inputs_[i][k])], grad);
    };
    auto src = [&](std::size_t k) -> const Tensor<T>& { return cache_[static_cast<std::size_t>(inputs_[i][k])].output; };

    switch (n.kind) {
      case LayerKind::kInput: break;
      case LayerKind::kOutput: send(0, g); break;
      case LayerKind::kConv: {
        const Slot s = resolve(params, n);
        if (n.relu) gate(g, c.output);
        if (n.scale) {
          auto sg = ops::scale_backward(c.linear, params[s.gamma].span(), g);
          add_to(grads[s.gamma], std::span<const T>(sg.gamma));
          add_to(grads[s.beta], std::span<const T>(sg.beta));
          g = std::move(sg.input);
        }
        auto cg = ops::conv2d_backward(src(0), params[s.weight], params[s.bias].span(), {n.stride, n.pad}, g);
        add_to(grads[s.weight], std::as_const(cg.weights).span());
        add_to(grads[s.bias], std::span<const T>(cg.bias));
        if (g_.nodes[static_cast<std::size_t>(inputs_[i][0])].kind != LayerKind::kInput) send(0, cg.input);
        break;
      }
      case LayerKind::kMaxPool: send(0, ops::maxpool_backward(c.argmax, g)); break;
      case LayerKind::kAvgPool: send(0, ops::avgpool_backward(src(0).shape(), g, n.kernel, n.stride)); break;
      case LayerKind::kFc: {
        const Slot s = resolve(params, n);
        if (!c.mask.empty()) g = ops::dropout_backward(c.mask, g);
        if (n.relu) gate(g, c.output);
        auto fg = ops::fc_backward(src(0), params[s.weight], g);
        add_to(grads[s.weight], std::as_const(fg.weights).span());
        add_to(grads[s.bias], std::span<const T>(fg.bias));
        send(0, fg.input);
        break;
      }
      case LayerKind::kAdd:
        if (n.relu) gate(g, c.output);
        send(0, g);
        send(1, g);
        break;
    }
  }
  return grads;
}

template <typename T>
const Tensor<T>& Executor<T>::activation(const std::string& node) const {
  const int idx = g_.index_of(node);
  if (idx < 0) throw ConfigError("no node named '" + node + "'");
  const Cache& c = cache_[static_cast<std::size_t>(idx)];
  if (!c.valid) throw StateError("node '" + node + "' was not computed by the last forward");
  return c.output;
}

template class Executor<float>;
template class Executor<double>;

}  // namespace rcnds::graph
