#pragma once

#include <cstdint>
#include <vector>

#include "mcua/tensor.hpp"

namespace mcua {

// Adam with bias correction. Moment buffers are positional: the same parameter
// list (same order, same shapes) must be passed to every step() call.
class Adam {
public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  // Applies one update from the gradients currently on `params`. If any
  // gradient is non-finite, throws NumericError and leaves every parameter,
  // moment buffer, and the step count untouched.
  void step(const std::vector<TensorPtr>& params);

  double lr;
  double beta1, beta2, eps;
  int64_t step_count = 0;

private:
  std::vector<std::vector<double>> m_, v_;
};

void zero_grads(const std::vector<TensorPtr>& params);

}  // namespace mcua
