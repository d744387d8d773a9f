#include "mcua/context.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcua {

TensorPtr concat_pattern_maps(const std::vector<TensorPtr>& maps,
                              const PatternPlacement& placement) {
  if (placement.members.empty()) throw ValidationError("empty pattern placement");
  const TensorPtr& first = maps.at(static_cast<size_t>(placement.members[0]));
  if (first->rank() != 3) throw DimensionError("feature maps must be [C,h,w]");
  const int c_f = first->dim(0), h = first->dim(1), w = first->dim(2);
  const int g = static_cast<int>(placement.members.size());
  auto out = Tensor::create({g * c_f, h, w});
  const int64_t per = static_cast<int64_t>(c_f) * h * w;
  for (int k = 0; k < g; ++k) {
    const TensorPtr& m = maps.at(static_cast<size_t>(placement.members[static_cast<size_t>(k)]));
    if (m->shape != first->shape)
      throw DimensionError("pattern member feature maps disagree in shape");
    std::copy(m->data.begin(), m->data.end(), out->data.begin() + k * per);
  }
  return out;
}

TensorPtr build_context_input(const std::vector<TensorPtr>& maps,
                              const std::vector<PatternPlacement>& placements) {
  if (placements.empty()) throw ValidationError("no placements for context input");
  auto first = concat_pattern_maps(maps, placements[0]);
  const int gc = first->dim(0), h = first->dim(1), w = first->dim(2);
  const int p = static_cast<int>(placements.size());
  auto out = Tensor::create({p, gc, h, w});
  const int64_t per = static_cast<int64_t>(gc) * h * w;
  std::copy(first->data.begin(), first->data.end(), out->data.begin());
  for (int i = 1; i < p; ++i) {
    auto t = concat_pattern_maps(maps, placements[static_cast<size_t>(i)]);
    if (t->dim(0) != gc) throw DimensionError("placements disagree in member count");
    std::copy(t->data.begin(), t->data.end(), out->data.begin() + i * per);
  }
  return out;
}

ContextModel ContextModel::build(const std::string& model_id, const std::string& backbone_name,
                                 int scale_id, const PatternSpec& pattern, int c_f, int in_h,
                                 int in_w, int classes, double dropout_rate, uint64_t seed) {
  if (classes < 2) throw ValidationError("context model needs >= 2 classes");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ValidationError("dropout rate must be in [0,1)");
  ContextModel m;
  m.model_id_ = model_id;
  m.backbone_name_ = backbone_name;
  m.scale_id_ = scale_id;
  m.pattern_ = pattern;
  m.classes_ = classes;
  m.c_f_ = c_f;
  m.in_h_ = in_h;
  m.in_w_ = in_w;
  m.dropout_rate_ = dropout_rate;
  Rng rng(derive_seed(seed, "context-init-" + model_id));

  const int in_ch = pattern.g * c_f;
  m.trunk_.push_back(make_conv_block(in_ch, 32, 3, 1, Padding::valid, rng));
  m.trunk_.push_back(make_conv_block(32, 32, 2, 2, Padding::valid, rng));
  m.trunk_.push_back(make_conv_block(32, 64, 3, 1, Padding::valid, rng));
  m.trunk_.push_back(make_conv_block(64, 64, 2, 2, Padding::valid, rng));
  m.trunk_.push_back(make_conv_block(64, 64, 1, 1, Padding::valid, rng));

  int h = in_h, w = in_w;
  const int ks[5] = {3, 2, 3, 2, 1};
  const int st[5] = {1, 2, 1, 2, 1};
  for (int i = 0; i < 5; ++i) {
    h = conv_out_dim(h, ks[i], st[i], Padding::valid);
    w = conv_out_dim(w, ks[i], st[i], Padding::valid);
  }

  init_linear(m.fc1_w_, m.fc1_b_, 64, 32, rng);
  init_linear(m.fc2_w_, m.fc2_b_, 32, 16, rng);
  init_linear(m.fc3_w_, m.fc3_b_, 16, classes, rng);
  return m;
}

int64_t ContextModel::parameter_count() const {
  int64_t n = 0;
  for (const auto& p : trainable_params()) n += p->size();
  return n;
}

TensorPtr ContextModel::trunk_pooled(const TensorPtr& stacked, NetMode mode) const {
  if (stacked->rank() != 4) throw DimensionError("context input must be [P,g*C_f,h,w]");
  if (stacked->dim(1) != pattern_.g * c_f_)
    throw DimensionError("context input channels " + std::to_string(stacked->dim(1)) +
                         " != g*C_f = " + std::to_string(pattern_.g * c_f_));
  TensorPtr h = stacked;
  for (const auto& blk : trunk_) h = blk.forward(h, mode);
  return spatial_mean(h);
}

TensorPtr ContextModel::head_log_probs(const TensorPtr& pooled, NetMode mode,
                                       Rng* mc_rng) const {
  TensorPtr h = pooled;
  if (mode != NetMode::eval) {
    if (!mc_rng) throw ValidationError("dropout-active forward needs an rng");
    h = dropout(h, dropout_rate_, *mc_rng, true);
  }
  h = relu(linear(h, fc1_w_, fc1_b_));
  h = relu(linear(h, fc2_w_, fc2_b_));
  h = linear(h, fc3_w_, fc3_b_);
  return log_softmax_rows(h);
}

TensorPtr ContextModel::forward_log_probs(const TensorPtr& stacked, NetMode mode,
                                          Rng* mc_rng) const {
  return head_log_probs(trunk_pooled(stacked, mode), mode, mc_rng);
}

std::vector<double> ContextModel::pool_rows(const TensorPtr& log_probs) {
  const int p = log_probs->dim(0), c = log_probs->dim(1);
  std::vector<double> pooled(static_cast<size_t>(c), 0.0);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < c; ++j)
      pooled[static_cast<size_t>(j)] +=
          std::exp(log_probs->data[static_cast<size_t>(i) * c + j]) / p;
  return pooled;
}

std::vector<double> ContextModel::predict_image(const TensorPtr& stacked) const {
  NoGradGuard ng;
  return pool_rows(forward_log_probs(stacked, NetMode::eval, nullptr));
}

std::vector<std::vector<double>> ContextModel::mc_predict(const TensorPtr& stacked, int z,
                                                          Rng& rng) const {
  if (z < 2) throw ValidationError("mc_predict needs z >= 2 passes");
  NoGradGuard ng;
  // The trunk output is identical across passes (see trunk_pooled), so only
  // the dropout mask and the head rerun per pass. Mask draws per pass are
  // unchanged: one uniform per pooled element, in element order.
  auto pooled = trunk_pooled(stacked, NetMode::mc);
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<size_t>(z));
  for (int i = 0; i < z; ++i)
    out.push_back(pool_rows(head_log_probs(pooled, NetMode::mc, &rng)));
  return out;
}

void ContextModel::train(const std::vector<TensorPtr>& image_inputs,
                         const std::vector<int>& labels, int epochs, double lr, int batch_size,
                         uint64_t seed, std::vector<LossLogEntry>* loss_log) {
  if (image_inputs.empty()) throw ValidationError("context train: empty dataset");
  if (image_inputs.size() != labels.size())
    throw ValidationError("context train: label count != image count");
  for (int y : labels)
    if (y < 0 || y >= classes_) throw ValidationError("context train: label out of range");
  if (batch_size < 1) throw ValidationError("context train: batch size must be >= 1");

  Adam opt(lr);
  auto params = trainable_params();
  std::vector<size_t> order(image_inputs.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng shuffle_rng(
        derive_seed(seed, "context-shuffle-" + model_id_, static_cast<uint64_t>(epoch)));
    Rng dropout_rng(
        derive_seed(seed, "context-dropout-" + model_id_, static_cast<uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

    const int n_batches =
        static_cast<int>((order.size() + batch_size - 1) / batch_size);
    for (int bi = 0; bi < n_batches; ++bi) {
      const size_t lo = static_cast<size_t>(bi) * batch_size;
      const size_t hi = std::min(order.size(), lo + batch_size);

      // One stacked trunk pass for the whole batch (batchnorm sees every
      // placement), then per-image row slices pool into image losses.
      std::vector<int> offsets = {0};
      int total = 0;
      for (size_t k = lo; k < hi; ++k) {
        total += image_inputs[order[k]]->dim(0);
        offsets.push_back(total);
      }
      const int gc = image_inputs[order[lo]]->dim(1);
      auto stacked = Tensor::create({total, gc, in_h_, in_w_});
      {
        int64_t pos = 0;
        for (size_t k = lo; k < hi; ++k) {
          const auto& t = image_inputs[order[k]];
          std::copy(t->data.begin(), t->data.end(), stacked->data.begin() + pos);
          pos += t->size();
        }
      }
      auto log_probs = forward_log_probs(stacked, NetMode::train, &dropout_rng);
      std::vector<TensorPtr> losses;
      for (size_t k = lo; k < hi; ++k) {
        const int idx = static_cast<int>(k - lo);
        auto rows = slice_rows(log_probs, offsets[static_cast<size_t>(idx)],
                               offsets[static_cast<size_t>(idx) + 1]);
        auto pooled = mean_rows(exp_t(rows));
        auto onehot = Tensor::create({classes_});
        onehot->data[static_cast<size_t>(labels[order[k]])] = 1.0;
        losses.push_back(cross_entropy(pooled, onehot));
      }
      auto loss = mean_scalars(losses);
      if (!std::isfinite(loss->data[0]))
        throw NumericError("context model " + model_id_ + ": non-finite loss at epoch " +
                           std::to_string(epoch) + " batch " + std::to_string(bi));
      zero_grads(params);
      backward(loss);
      opt.step(params);
      if (loss_log) loss_log->push_back({epoch, bi, loss->data[0]});
    }
  }
}

std::vector<TensorPtr> ContextModel::trainable_params() const {
  std::vector<TensorPtr> out;
  for (const auto& blk : trunk_) blk.collect_params(out);
  for (const auto& t : {fc1_w_, fc1_b_, fc2_w_, fc2_b_, fc3_w_, fc3_b_}) out.push_back(t);
  return out;
}

NamedTensors ContextModel::named_tensors() const {
  NamedTensors out;
  for (size_t i = 0; i < trunk_.size(); ++i)
    trunk_[i].collect_named("trunk" + std::to_string(i), out);
  out.emplace_back("head.fc1.w", fc1_w_);
  out.emplace_back("head.fc1.b", fc1_b_);
  out.emplace_back("head.fc2.w", fc2_w_);
  out.emplace_back("head.fc2.b", fc2_b_);
  out.emplace_back("head.fc3.w", fc3_w_);
  out.emplace_back("head.fc3.b", fc3_b_);
  return out;
}

}  // namespace mcua
