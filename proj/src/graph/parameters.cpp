#include "rcnds/graph/parameters.hpp"

namespace rcnds::graph {

std::string group_prefix(int group) { return group == 0 ? "main" : "branch" + std::to_string(group); }

std::vector<ParamSpec> param_specs(const GraphSpec& g) {
  const ShapeTable shapes = infer_shapes(g);
  std::vector<ParamSpec> out;
  auto push = [&](const LayerNode& n, ParamRole role, const char* suffix, Shape shape) {
    out.push_back({group_prefix(n.group) + "." + n.name + "." + suffix, n.name, n.group, role, std::move(shape)});
  };
  for (const LayerNode& n : g.nodes) {
    if (n.kind == LayerKind::kConv) {
      const CHW& in = shapes.at(n.inputs[0]);
      push(n, ParamRole::kWeight, "weight", Shape{n.out, in.c, n.kernel, n.kernel});
      push(n, ParamRole::kBias, "bias", Shape{n.out});
      if (n.scale) {
        push(n, ParamRole::kGamma, "gamma", Shape{n.out});
        push(n, ParamRole::kBeta, "beta", Shape{n.out});
      }
    } else if (n.kind == LayerKind::kFc) {
      const CHW& in = shapes.at(n.inputs[0]);
      push(n, ParamRole::kWeight, "weight", Shape{n.out, in.c * in.h * in.w});
      push(n, ParamRole::kBias, "bias", Shape{n.out});
    }
  }
  return out;
}

template <typename T>
void ParameterSet<T>::add(std::string name, Tensor<T> t) {
  if (!index_.emplace(name, names_.size()).second) throw ConfigError("duplicate parameter '" + name + "'");
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(t));
}

template <typename T>
std::size_t ParameterSet<T>::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
ParameterSet<T> ParameterSet<T>::zeros_like() const {
  ParameterSet out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], Tensor<T>(tensors_[i].shape()));
  return out;
}

ParameterSet<float> init_parameters(const GraphSpec& g, double weight_std, Rng& rng) {
  ParameterSet<float> params;
  for (const ParamSpec& p : param_specs(g)) {
    switch (p.role) {
      case ParamRole::kWeight: params.add(p.name, gaussian_init<float>(p.shape, 0.0, weight_std, rng)); break;
      case ParamRole::kGamma: params.add(p.name, Tensor<float>(p.shape, 1.0f)); break;
      case ParamRole::kBias:
      case ParamRole::kBeta: params.add(p.name, Tensor<float>(p.shape, 0.0f)); break;
    }
  }
  return params;
}

template <typename T>
ParameterSet<T> select_parameters(const GraphSpec& g, const ParameterSet<T>& source) {
  ParameterSet<T> out;
  for (const ParamSpec& p : param_specs(g)) {
    if (!source.contains(p.name)) throw CheckpointError("missing parameter '" + p.name + "'");
    const Tensor<T>& t = source.at(p.name);
    if (t.shape() != p.shape) {
      throw CheckpointError("parameter '" + p.name + "' has shape " + t.shape().str() + ", graph expects " + p.shape.str());
    }
    out.add(p.name, t);
  }
  return out;
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template ParameterSet<float> select_parameters(const GraphSpec&, const ParameterSet<float>&);
template ParameterSet<double> select_parameters(const GraphSpec&, const ParameterSet<double>&);

}  // namespace rcnds::graph
