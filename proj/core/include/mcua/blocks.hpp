#pragma once

#include <string>
#include <vector>

#include "mcua/adam.hpp"
#include "mcua/checkpoint.hpp"
#include "mcua/nn.hpp"

namespace mcua {

enum class NetMode { train, eval, mc };

// conv -> batchnorm -> relu, the unit both network families are built from.
struct ConvBlock {
  TensorPtr w, b;
  TensorPtr gamma, beta, running_mean, running_var;
  int stride = 1;
  Padding pad = Padding::valid;

  // Batch statistics are used only in true training mode; eval and MC passes
  // normalize with the running buffers.
  TensorPtr forward(const TensorPtr& x, NetMode mode) const {
    auto y = conv2d(x, w, b, stride, pad);
    y = batchnorm2d(y, gamma, beta, running_mean, running_var, mode == NetMode::train);
    return relu(y);
  }

  void collect_params(std::vector<TensorPtr>& out) const {
    out.push_back(w);
    out.push_back(b);
    out.push_back(gamma);
    out.push_back(beta);
  }
  void collect_named(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".conv.w", w);
    out.emplace_back(prefix + ".conv.b", b);
    out.emplace_back(prefix + ".bn.gamma", gamma);
    out.emplace_back(prefix + ".bn.beta", beta);
    out.emplace_back(prefix + ".bn.running_mean", running_mean);
    out.emplace_back(prefix + ".bn.running_var", running_var);
  }
};

ConvBlock make_conv_block(int in_ch, int out_ch, int kernel, int stride, Padding pad, Rng& rng);

// He-normal matrix [out, in] plus zero bias.
void init_linear(TensorPtr& w, TensorPtr& b, int in_dim, int out_dim, Rng& rng);

}  // namespace mcua
