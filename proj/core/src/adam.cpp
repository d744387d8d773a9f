#include "mcua/adam.hpp"

#include <cmath>
#include <string>

namespace mcua {

Adam::Adam(double lr_, double beta1_, double beta2_, double eps_)
    : lr(lr_), beta1(beta1_), beta2(beta2_), eps(eps_) {
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    throw ValidationError("adam: betas must be in (0,1)");
  if (eps <= 0.0) throw ValidationError("adam: epsilon must be positive");
}

void Adam::step(const std::vector<TensorPtr>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->data.size(), 0.0);
      v_[i].assign(params[i]->data.size(), 0.0);
    }
  }
  if (m_.size() != params.size())
    throw ValidationError("adam: parameter list changed between steps");

  // All-or-nothing: validate every gradient before touching any state.
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i];
    if (p.grad.size() != p.data.size())
      throw ValidationError("adam: parameter " + std::to_string(i) + " has no gradient");
    if (m_[i].size() != p.data.size())
      throw ValidationError("adam: parameter " + std::to_string(i) + " changed shape");
    check_finite(p.grad, "adam gradient");
  }

  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i]->data;
    const auto& g = params[i]->grad;
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void zero_grads(const std::vector<TensorPtr>& params) {
  for (const auto& p : params) p->zero_grad();
}

}  // namespace mcua
