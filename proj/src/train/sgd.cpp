#include "rcnds/train/sgd.hpp"

#include "rcnds/kernels/kernels.hpp"

namespace rcnds::train {

void sgd_step(graph::ParameterSet<float>& params, const graph::ParameterSet<float>& grads,
              graph::ParameterSet<float>& velocity, double lr, double momentum, double weight_decay) {
  if (grads.size() != params.size() || velocity.size() != params.size()) {
    throw ShapeError("sgd_step: parameter, gradient and velocity sets differ in size");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    if (grads.name(i) != name || velocity.name(i) != name) throw ShapeError("sgd_step: tensor order mismatch at " + name);
    require_same_shape(params[i], grads[i], "sgd_step");
    require_same_shape(params[i], velocity[i], "sgd_step");
    const bool decay = name.size() > 7 && name.compare(name.size() - 7, 7, ".weight") == 0;
    kernels::sgd_momentum(params[i].span(), grads[i].span(), velocity[i].span(), static_cast<float>(lr),
                          static_cast<float>(momentum), decay ? static_cast<float>(weight_decay) : 0.0f);
  }
}

}  // namespace rcnds::train
