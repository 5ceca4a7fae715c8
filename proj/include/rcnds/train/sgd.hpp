#pragma once

#include "rcnds/graph/parameters.hpp"

namespace rcnds::train {

/// One momentum-SGD update over every tensor:
///   v <- momentum*v - lr*(g + wd*w);  w <- w + v
/// Weight decay applies to `.weight` tensors only; biases and scale
/// parameters are not decayed. Throws ShapeError on any name or shape
/// mismatch between the three sets.
void sgd_step(graph::ParameterSet<float>& params, const graph::ParameterSet<float>& grads,
              graph::ParameterSet<float>& velocity, double lr, double momentum, double weight_decay);

}  // namespace rcnds::train
