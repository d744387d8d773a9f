#include "mcua/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mcua {

ConvBlock make_conv_block(int in_ch, int out_ch, int kernel, int stride, Padding pad,
                          Rng& rng) {
  ConvBlock blk;
  blk.stride = stride;
  blk.pad = pad;
  blk.w = Tensor::create({out_ch, in_ch, kernel, kernel}, true);
  const double std = std::sqrt(2.0 / (in_ch * kernel * kernel));
  for (auto& v : blk.w->data) v = rng.normal(0.0, std);
  blk.b = Tensor::create({out_ch}, true);
  blk.gamma = Tensor::create({out_ch}, true);
  std::fill(blk.gamma->data.begin(), blk.gamma->data.end(), 1.0);
  blk.beta = Tensor::create({out_ch}, true);
  blk.running_mean = Tensor::create({out_ch}, false);
  blk.running_var = Tensor::create({out_ch}, false);
  std::fill(blk.running_var->data.begin(), blk.running_var->data.end(), 1.0);
  return blk;
}

void init_linear(TensorPtr& w, TensorPtr& b, int in_dim, int out_dim, Rng& rng) {
  w = Tensor::create({out_dim, in_dim}, true);
  const double std = std::sqrt(2.0 / in_dim);
  for (auto& v : w->data) v = rng.normal(0.0, std);
  b = Tensor::create({out_dim}, true);
}

Backbone Backbone::build(const std::string& arch_id, const std::string& name, int scale_id,
                         int patch_w, int patch_h, int classes, uint64_t seed) {
  if (classes < 2) throw ValidationError("backbone needs >= 2 classes");
  Backbone bb;
  bb.arch_id_ = arch_id;
  bb.name_ = name;
  bb.scale_id_ = scale_id;
  bb.patch_w_ = patch_w;
  bb.patch_h_ = patch_h;
  bb.classes_ = classes;
  Rng rng(derive_seed(seed, "backbone-init-" + name));

  struct L {
    int out_ch, kernel, stride;
    Padding pad;
  };
  std::vector<L> layout;
  if (arch_id == "arch-A") {
    layout = {{8, 3, 1, Padding::valid},
              {12, 2, 2, Padding::valid},
              {12, 3, 1, Padding::valid},
              {8, 3, 1, Padding::valid}};
  } else if (arch_id == "arch-B") {
    layout = {{5, 3, 1, Padding::same},  {6, 3, 1, Padding::valid},
              {8, 2, 2, Padding::valid}, {8, 3, 1, Padding::valid},
              {10, 3, 1, Padding::valid}, {8, 2, 1, Padding::valid}};
  } else {
    throw ValidationError("unknown backbone architecture id: " + arch_id);
  }

  int ch = 3, h = patch_h, w = patch_w;
  for (const auto& l : layout) {
    bb.blocks_.push_back(make_conv_block(ch, l.out_ch, l.kernel, l.stride, l.pad, rng));
    h = conv_out_dim(h, l.kernel, l.stride, l.pad);
    w = conv_out_dim(w, l.kernel, l.stride, l.pad);
    ch = l.out_ch;
  }
  bb.c_f_ = ch;
  bb.feat_h_ = h;
  bb.feat_w_ = w;
  // Zero head: logits are exactly zero before training, softmax exactly uniform.
  bb.fc_w_ = Tensor::create({classes, ch * h * w}, true);
  bb.fc_b_ = Tensor::create({classes}, true);
  return bb;
}

TensorPtr Backbone::patches_to_tensor(const std::vector<const Image*>& imgs) const {
  if (imgs.empty()) throw ValidationError("empty patch batch");
  const int n = static_cast<int>(imgs.size());
  auto x = Tensor::create({n, 3, patch_h_, patch_w_});
  double* out = x->data.data();
  for (int i = 0; i < n; ++i) {
    const Image& img = *imgs[static_cast<size_t>(i)];
    if (img.width != patch_w_ || img.height != patch_h_)
      throw ValidationError("patch is " + std::to_string(img.width) + "x" +
                            std::to_string(img.height) + ", backbone " + name_ + " expects " +
                            std::to_string(patch_w_) + "x" + std::to_string(patch_h_));
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < patch_h_; ++y)
        for (int xx = 0; xx < patch_w_; ++xx)
          out[((static_cast<int64_t>(i) * 3 + c) * patch_h_ + y) * patch_w_ + xx] =
              img.at(xx, y, c);
  }
  return x;
}

TensorPtr Backbone::forward_features(const TensorPtr& x, NetMode mode) const {
  TensorPtr h = x;
  for (const auto& blk : blocks_) h = blk.forward(h, mode);
  return h;
}

TensorPtr Backbone::forward_logits(const TensorPtr& x, NetMode mode) const {
  auto f = forward_features(x, mode);
  auto flat = reshape(f, {f->dim(0), c_f_ * feat_h_ * feat_w_});
  return linear(flat, fc_w_, fc_b_);
}

std::vector<double> Backbone::predict_patch(const Image& patch) const {
  NoGradGuard ng;
  auto x = patches_to_tensor({&patch});
  auto probs = softmax_rows(forward_logits(x, NetMode::eval));
  return probs->data;
}

std::vector<TensorPtr> Backbone::extract_feature_maps(const std::vector<Patch>& patches) const {
  if (patches.empty()) throw ValidationError("extract_feature_maps: no patches");
  NoGradGuard ng;
  std::vector<const Image*> imgs;
  imgs.reserve(patches.size());
  for (const auto& p : patches) imgs.push_back(&p.pixels);
  auto f = forward_features(patches_to_tensor(imgs), NetMode::eval);
  const int n = f->dim(0);
  const int64_t per = static_cast<int64_t>(c_f_) * feat_h_ * feat_w_;
  std::vector<TensorPtr> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto t = Tensor::create({c_f_, feat_h_, feat_w_});
    std::copy(f->data.begin() + i * per, f->data.begin() + (i + 1) * per, t->data.begin());
    out.push_back(std::move(t));
  }
  return out;
}

void Backbone::fine_tune(const std::vector<Patch>& patches, const std::vector<int>& labels,
                         int epochs, double lr, int batch_size, uint64_t seed,
                         std::vector<LossLogEntry>* loss_log) {
  if (patches.empty()) throw ValidationError("fine_tune: empty dataset");
  if (patches.size() != labels.size())
    throw ValidationError("fine_tune: label count != patch count");
  for (int y : labels)
    if (y < 0 || y >= classes_) throw ValidationError("fine_tune: label out of range");
  if (batch_size < 1) throw ValidationError("fine_tune: batch size must be >= 1");
  if (epochs < 1) throw ValidationError("fine_tune: epochs must be >= 1");

  Adam opt(lr);
  auto params = trainable_params();
  std::vector<size_t> order(patches.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, "backbone-shuffle-" + name_, static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

    const int n_batches = static_cast<int>((order.size() + batch_size - 1) / batch_size);
    for (int bi = 0; bi < n_batches; ++bi) {
      const size_t lo = static_cast<size_t>(bi) * batch_size;
      const size_t hi = std::min(order.size(), lo + batch_size);
      std::vector<const Image*> imgs;
      std::vector<int> ys;
      for (size_t k = lo; k < hi; ++k) {
        imgs.push_back(&patches[order[k]].pixels);
        ys.push_back(labels[order[k]]);
      }
      auto x = patches_to_tensor(imgs);
      auto loss = nll_rows(log_softmax_rows(forward_logits(x, NetMode::train)), ys);
      if (!std::isfinite(loss->data[0]))
        throw NumericError("backbone " + name_ + ": non-finite loss at epoch " +
                           std::to_string(epoch) + " batch " + std::to_string(bi));
      zero_grads(params);
      backward(loss);
      opt.step(params);
      if (loss_log) loss_log->push_back({epoch, bi, loss->data[0]});
    }
  }
}

std::vector<TensorPtr> Backbone::trainable_params() const {
  std::vector<TensorPtr> out;
  for (const auto& blk : blocks_) blk.collect_params(out);
  out.push_back(fc_w_);
  out.push_back(fc_b_);
  return out;
}

NamedTensors Backbone::named_tensors() const {
  NamedTensors out;
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect_named("block" + std::to_string(i), out);
  out.emplace_back("head.fc.w", fc_w_);
  out.emplace_back("head.fc.b", fc_b_);
  return out;
}

}  // namespace mcua
