#pragma once

#include <vector>

#include "mcua/rng.hpp"
#include "mcua/tensor.hpp"

namespace mcua {

enum class Padding { valid, same };

// Output extent of a convolution along one axis.
// valid: 1 + floor((in - k)/stride); same: ceil(in/stride).
int conv_out_dim(int in, int k, int stride, Padding pad);

// Cross-correlation plus bias. x:[N,C,H,W], w:[K,C,kh,kw], b:[K] -> [N,K,H',W'].
// Rejects non-finite input; `same` pads with zeros, split floor/ceil between
// the leading and trailing edge.
TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b, int stride,
                 Padding pad = Padding::valid);

// x:[N,F], w:[O,F], b:[O] -> [N,O].
TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

TensorPtr relu(const TensorPtr& x);

// Inverted dropout: when active, zeroes each value with probability `rate` and
// scales survivors by 1/(1-rate); identity when inactive or rate == 0.
TensorPtr dropout(const TensorPtr& x, double rate, Rng& rng, bool active);

// Per-channel batch normalization over (N,H,W) of x:[N,C,H,W].
// training=true normalizes with biased batch statistics and folds them into
// the running buffers with `momentum`; training=false normalizes with the
// running buffers. gamma/beta are learnable; running buffers never get grads.
TensorPtr batchnorm2d(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                      const TensorPtr& running_mean, const TensorPtr& running_var,
                      bool training, double momentum = 0.1, double eps = 1e-5);

// Row-wise softmax / log-softmax with max subtraction. x:[N,C].
TensorPtr softmax_rows(const TensorPtr& x);
TensorPtr log_softmax_rows(const TensorPtr& x);

// Rank-1 convenience wrappers over the row ops. x:[C].
TensorPtr softmax(const TensorPtr& x);
TensorPtr log_softmax(const TensorPtr& x);

// [N,C,H,W] -> [N,C], mean over each channel's spatial extent.
TensorPtr spatial_mean(const TensorPtr& x);

// [N,C] -> [C], mean over rows.
TensorPtr mean_rows(const TensorPtr& x);

// Row slice [r0,r1) of x:[N,C] -> [r1-r0,C].
TensorPtr slice_rows(const TensorPtr& x, int r0, int r1);

TensorPtr exp_t(const TensorPtr& x);

// Same data, new shape (sizes must agree).
TensorPtr reshape(const TensorPtr& x, std::vector<int> new_shape);

// Mean of scalar losses -> scalar.
TensorPtr mean_scalars(const std::vector<TensorPtr>& xs);

// -log(max(y_hat[y], floor)) summed over the one-hot y. y_hat:[C] probabilities,
// y:[C] strictly one-hot (validated). floor = 1e-12.
TensorPtr cross_entropy(const TensorPtr& y_hat, const TensorPtr& y);

// Mean over rows of -log_probs[i, labels[i]]; the batch loss used in training.
TensorPtr nll_rows(const TensorPtr& log_probs, const std::vector<int>& labels);

extern const double kProbFloor;

}  // namespace mcua
