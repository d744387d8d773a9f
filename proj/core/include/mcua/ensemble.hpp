#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcua/errors.hpp"

namespace mcua {

enum class UncertaintyReduction { argmax_class, max_class, mean_class };

UncertaintyReduction parse_uncertainty_reduction(const std::string& word);

// Per-model digest of z MC passes.
struct PassSummary {
  std::string model_id;
  std::vector<double> mu;        // per-class mean over passes
  std::vector<double> variance;  // per-class, divisor z (exposed for audit)
  std::vector<double> sigma;     // sqrt(variance)
  double scalar_uncertainty = 0.0;
  int z = 0;
};

// mu/sigma over z >= 2 distributions; the scalar reduces per-class sigma at
// the argmax-of-mu class by default.
PassSummary summarize_passes(const std::vector<std::vector<double>>& passes,
                             UncertaintyReduction reduction = UncertaintyReduction::argmax_class);

// Indices (into `summaries`, order-preserving) of models whose scalar
// uncertainty is strictly below delta.
std::vector<size_t> select_models(const std::vector<PassSummary>& summaries, double delta);

struct Aggregate {
  std::vector<double> distribution;  // renormalized mean of selected mu vectors
  int label = 0;                     // argmax, lowest index on ties
};

// Empty selection -> nullopt (the ABSTAIN outcome).
std::optional<Aggregate> aggregate_and_classify(const std::vector<PassSummary>& summaries,
                                                const std::vector<size_t>& selected);

// One image's full ensemble record.
struct EnsembleDecision {
  std::string image_id;
  int true_label = -1;
  std::vector<PassSummary> summaries;  // model-id order; z==0 marks a model
                                       // with no placements on this image
  double delta = 0.0;                  // +inf encodes the static ensemble
  std::vector<size_t> selected;
  std::optional<Aggregate> outcome;    // nullopt == ABSTAIN
};

// Selection + aggregation for one image from precomputed summaries. Models
// with z == 0 (no placements) never enter the selection; if every model is in
// that state the caller should have raised NoContextError before this point.
EnsembleDecision decide(const std::string& image_id, int true_label,
                        const std::vector<PassSummary>& summaries, double delta);

}  // namespace mcua
