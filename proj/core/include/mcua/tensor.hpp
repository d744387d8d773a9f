#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "mcua/errors.hpp"

namespace mcua {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major float64 tensor, doubling as a reverse-mode autodiff node.
// Ops in nn.hpp build a DAG by filling `parents` and `backward_fn`; calling
// backward(loss) walks the DAG once in reverse topological order.
class Tensor {
public:
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass touches this node
  bool requires_grad = false;

  std::vector<TensorPtr> parents;
  std::function<void()> backward_fn;  // accumulates this->grad into parents' grad
  bool consumed = false;              // true once backward() ran through this node

  static TensorPtr create(std::vector<int> shape, bool requires_grad = false);
  static TensorPtr from_data(std::vector<int> shape, std::vector<double> values,
                             bool requires_grad = false);
  static TensorPtr scalar(double v, bool requires_grad = false);

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  // A node participates in the backward walk if it is a trainable leaf or an
  // interior node of the recorded graph.
  bool needs_grad() const { return requires_grad || !parents.empty(); }

  void ensure_grad();
  void zero_grad() { grad.assign(data.size(), 0.0); }
};

int64_t shape_size(const std::vector<int>& shape);

// Thread-local autodiff switch. Ops record backward closures only when grad
// mode is on AND an input needs gradients; eval/MC forwards run under a guard
// so they build no graph at all.
bool grad_enabled();
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool prev_;
};

// Reverse-mode pass from a scalar loss. Seeds d(loss)/d(loss) = 1, then runs
// every recorded backward_fn exactly once. The tape is single-use: the graph's
// closures are released afterwards, and a second call on the same loss throws
// TapeError.
void backward(const TensorPtr& loss);

// Throws NumericError naming `what` if any value is NaN/Inf.
void check_finite(const Tensor& t, const char* what);
void check_finite(const std::vector<double>& v, const char* what);

}  // namespace mcua
