#pragma once

#include <string>
#include <vector>

#include "mcua/backbone.hpp"
#include "mcua/patterns.hpp"

namespace mcua {

// Channel-wise concatenation of the placement's member maps, in walk order.
// Slicing channels [k*C_f,(k+1)*C_f) of the result recovers member k exactly.
TensorPtr concat_pattern_maps(const std::vector<TensorPtr>& maps,
                              const PatternPlacement& placement);

// All placement tensors of one image stacked into [P, g*C_f, h, w].
// `maps` holds one [C_f,h,w] tensor per grid index.
TensorPtr build_context_input(const std::vector<TensorPtr>& maps,
                              const std::vector<PatternPlacement>& placements);

// CNN over concatenated pattern members: 3x3 conv, 2x2 stride-2 downsampling
// convs, batchnorm+relu per conv, a 1x1 conv, spatial mean, dropout, then a
// 3-layer fully-connected head into log-softmax. Classifies a whole image by
// averaging the per-placement probability vectors.
class ContextModel {
public:
  static ContextModel build(const std::string& model_id, const std::string& backbone_name,
                            int scale_id, const PatternSpec& pattern, int c_f, int in_h,
                            int in_w, int classes, double dropout_rate, uint64_t seed);

  const std::string& model_id() const { return model_id_; }
  const std::string& backbone_name() const { return backbone_name_; }
  int scale_id() const { return scale_id_; }
  const PatternSpec& pattern() const { return pattern_; }
  int classes() const { return classes_; }
  double dropout_rate() const { return dropout_rate_; }
  void set_dropout_rate(double r) { dropout_rate_ = r; }
  int64_t parameter_count() const;

  // Per-placement log-probabilities [P,C]. mc passes keep dropout active while
  // batchnorm stays on its running statistics; `mc_rng` drives the masks.
  TensorPtr forward_log_probs(const TensorPtr& stacked, NetMode mode, Rng* mc_rng) const;

  // Mean of the per-placement probability vectors; a distribution over classes.
  static std::vector<double> pool_rows(const TensorPtr& log_probs);

  // Deterministic eval-mode image distribution.
  std::vector<double> predict_image(const TensorPtr& stacked) const;

  // z stochastic passes with dropout active, pooled per pass; z >= 2.
  std::vector<std::vector<double>> mc_predict(const TensorPtr& stacked, int z, Rng& rng) const;

  // Trains against image-level labels: per image, placements are pooled into
  // one distribution whose cross-entropy joins the batch mean. Feature maps
  // come precomputed from a frozen backbone.
  void train(const std::vector<TensorPtr>& image_inputs, const std::vector<int>& labels,
             int epochs, double lr, int batch_size, uint64_t seed,
             std::vector<LossLogEntry>* loss_log);

  std::vector<TensorPtr> trainable_params() const;
  NamedTensors named_tensors() const;

private:
  // Convs + spatial mean. Dropout never touches the trunk and batchnorm uses
  // its running buffers outside true training, so for eval and mc passes the
  // result depends only on the input.
  TensorPtr trunk_pooled(const TensorPtr& stacked, NetMode mode) const;
  // Dropout (outside eval mode) + fully-connected head + log-softmax.
  TensorPtr head_log_probs(const TensorPtr& pooled, NetMode mode, Rng* mc_rng) const;

  std::string model_id_, backbone_name_;
  int scale_id_ = 0;
  PatternSpec pattern_;
  int classes_ = 0;
  int c_f_ = 0, in_h_ = 0, in_w_ = 0;
  double dropout_rate_ = 0.7;
  std::vector<ConvBlock> trunk_;
  TensorPtr fc1_w_, fc1_b_, fc2_w_, fc2_b_, fc3_w_, fc3_b_;
};

}  // namespace mcua
