#include "mcua/tensor.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

namespace mcua {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

int64_t shape_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw DimensionError("negative dimension in shape");
    n *= d;
  }
  return n;
}

TensorPtr Tensor::create(std::vector<int> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  int64_t n = shape_size(shape);
  t->shape = std::move(shape);
  t->data.assign(static_cast<size_t>(n), 0.0);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::from_data(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad) {
  int64_t n = shape_size(shape);
  if (n != static_cast<int64_t>(values.size()))
    throw DimensionError("from_data: " + std::to_string(values.size()) +
                         " values for a shape of " + std::to_string(n));
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->data = std::move(values);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::scalar(double v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void backward(const TensorPtr& loss) {
  if (!loss) throw TapeError("backward: null loss");
  if (loss->size() != 1) throw TapeError("backward: loss must be a scalar");
  if (loss->consumed)
    throw TapeError("backward called twice on the same graph; rerun the forward pass first");

  // Iterative post-order DFS; graphs are shallow but wide, and parents may be
  // shared, so each node is ordered exactly once.
  std::vector<Tensor*> order;
  std::unordered_set<Tensor*> seen;
  struct Frame {
    Tensor* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  if (seen.insert(loss.get()).second) stack.push_back({loss.get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Tensor* p = f.node->parents[f.next_parent++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Reusing any part of an already-consumed graph is a tape error, not a
  // silent zero-gradient run.
  for (Tensor* node : order)
    if (node->consumed)
      throw TapeError("backward over a consumed graph node; rerun the forward pass first");

  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor* node = *it;
    if (node->backward_fn) {
      node->ensure_grad();
      node->backward_fn();
    }
  }
  // Single-use tape: interior nodes are marked consumed and their closures and
  // edges dropped, so intermediate buffers become reclaimable as callers drop
  // their handles. Leaf parameters stay reusable across steps.
  loss->consumed = true;
  for (Tensor* node : order) {
    if (node->backward_fn) {
      node->consumed = true;
      node->backward_fn = nullptr;
      node->parents.clear();
    }
  }
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x))
      throw NumericError(std::string(what) + ": non-finite value encountered");
}

void check_finite(const Tensor& t, const char* what) { check_finite(t.data, what); }

}  // namespace mcua
