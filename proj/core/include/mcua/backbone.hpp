#pragma once

#include <string>
#include <vector>

#include "mcua/blocks.hpp"
#include "mcua/patches.hpp"

namespace mcua {

struct LossLogEntry {
  int epoch = 0;
  int batch = 0;
  double loss = 0.0;
};

// Patch-level CNN: a conv-block stack ending in a feature map, plus a
// flattened fully-connected head for patch classification. The feature map
// (the last block's output) is what context models consume.
//
// Two layouts ship:
//   arch-A: 4 blocks, wider   (3->8, down 8->12, 12->12, 12->8), 32x32 -> 8@11x11
//   arch-B: 6 blocks, narrower (3->5 same-pad, 5->6, down 6->8, 8->8, 8->10,
//            2x2 10->8), 32x32 -> 8@10x10
class Backbone {
public:
  // `name` keys checkpoints and model ids (e.g. "A1"); patch dims must match
  // the configured patch size. The head starts zero-initialized, so an
  // untrained backbone predicts the uniform distribution exactly.
  static Backbone build(const std::string& arch_id, const std::string& name, int scale_id,
                        int patch_w, int patch_h, int classes, uint64_t seed);

  const std::string& arch_id() const { return arch_id_; }
  const std::string& name() const { return name_; }
  int scale_id() const { return scale_id_; }
  int feature_channels() const { return c_f_; }
  int feature_h() const { return feat_h_; }
  int feature_w() const { return feat_w_; }
  int classes() const { return classes_; }
  int patch_w() const { return patch_w_; }
  int patch_h() const { return patch_h_; }

  // [N,3,ph,pw] from a batch of equally sized patches.
  TensorPtr patches_to_tensor(const std::vector<const Image*>& imgs) const;

  TensorPtr forward_features(const TensorPtr& x, NetMode mode) const;
  TensorPtr forward_logits(const TensorPtr& x, NetMode mode) const;

  // Softmax probabilities for one patch; eval mode, no graph.
  std::vector<double> predict_patch(const Image& patch) const;

  // One [C_f,h,w] tensor per patch, in input order; eval mode, no graph.
  std::vector<TensorPtr> extract_feature_maps(const std::vector<Patch>& patches) const;

  // Minimizes mean cross-entropy of patch labels with Adam. Labels index the
  // class list; entries append to `loss_log` as (epoch, batch, loss).
  void fine_tune(const std::vector<Patch>& patches, const std::vector<int>& labels, int epochs,
                 double lr, int batch_size, uint64_t seed, std::vector<LossLogEntry>* loss_log);

  std::vector<TensorPtr> trainable_params() const;
  NamedTensors named_tensors() const;  // parameters + batchnorm buffers

private:
  std::string arch_id_, name_;
  int scale_id_ = 0;
  int patch_w_ = 0, patch_h_ = 0;
  int classes_ = 0;
  int c_f_ = 0, feat_h_ = 0, feat_w_ = 0;
  std::vector<ConvBlock> blocks_;
  TensorPtr fc_w_, fc_b_;
};

}  // namespace mcua
