#include "mcua/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mcua {

UncertaintyReduction parse_uncertainty_reduction(const std::string& word) {
  if (word == "argmax") return UncertaintyReduction::argmax_class;
  if (word == "max") return UncertaintyReduction::max_class;
  if (word == "mean") return UncertaintyReduction::mean_class;
  throw ValidationError("unknown uncertainty reduction '" + word +
                        "' (expected argmax, max, or mean)");
}

static size_t argmax_lowest(const std::vector<double>& v) {
  size_t best = 0;
  for (size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

PassSummary summarize_passes(const std::vector<std::vector<double>>& passes,
                             UncertaintyReduction reduction) {
  const size_t z = passes.size();
  if (z < 2) throw ValidationError("summarize_passes needs at least 2 passes");
  const size_t classes = passes[0].size();
  if (classes == 0) throw ValidationError("summarize_passes: empty class distribution");
  for (const auto& p : passes) {
    if (p.size() != classes) {
      throw ValidationError("summarize_passes: passes disagree on class count");
    }
  }

  PassSummary out;
  out.z = static_cast<int>(z);
  out.mu.assign(classes, 0.0);
  out.variance.assign(classes, 0.0);
  out.sigma.assign(classes, 0.0);

  for (const auto& p : passes) {
    for (size_t c = 0; c < classes; ++c) out.mu[c] += p[c];
  }
  for (size_t c = 0; c < classes; ++c) out.mu[c] /= static_cast<double>(z);

  for (const auto& p : passes) {
    for (size_t c = 0; c < classes; ++c) {
      const double d = p[c] - out.mu[c];
      out.variance[c] += d * d;
    }
  }
  for (size_t c = 0; c < classes; ++c) {
    out.variance[c] /= static_cast<double>(z);  // population divisor, by design
    out.sigma[c] = std::sqrt(out.variance[c]);
  }

  switch (reduction) {
    case UncertaintyReduction::argmax_class:
      out.scalar_uncertainty = out.sigma[argmax_lowest(out.mu)];
      break;
    case UncertaintyReduction::max_class:
      out.scalar_uncertainty = *std::max_element(out.sigma.begin(), out.sigma.end());
      break;
    case UncertaintyReduction::mean_class: {
      double s = 0.0;
      for (double v : out.sigma) s += v;
      out.scalar_uncertainty = s / static_cast<double>(classes);
      break;
    }
  }
  return out;
}

std::vector<size_t> select_models(const std::vector<PassSummary>& summaries, double delta) {
  std::vector<size_t> out;
  for (size_t i = 0; i < summaries.size(); ++i) {
    if (summaries[i].z == 0) continue;  // no placements: never selectable
    if (summaries[i].scalar_uncertainty < delta) out.push_back(i);
  }
  return out;
}

std::optional<Aggregate> aggregate_and_classify(const std::vector<PassSummary>& summaries,
                                                const std::vector<size_t>& selected) {
  if (selected.empty()) return std::nullopt;
  const size_t classes = summaries[selected[0]].mu.size();
  std::vector<double> acc(classes, 0.0);
  for (size_t idx : selected) {
    const auto& mu = summaries[idx].mu;
    if (mu.size() != classes) {
      throw ValidationError("aggregate_and_classify: selected models disagree on class count");
    }
    for (size_t c = 0; c < classes; ++c) acc[c] += mu[c];
  }
  double total = 0.0;
  for (size_t c = 0; c < classes; ++c) {
    acc[c] /= static_cast<double>(selected.size());
    total += acc[c];
  }
  if (!(total > 0.0)) throw NumericError("aggregate_and_classify: non-positive mass");
  for (size_t c = 0; c < classes; ++c) acc[c] /= total;

  Aggregate out;
  out.distribution = std::move(acc);
  out.label = static_cast<int>(argmax_lowest(out.distribution));
  return out;
}

EnsembleDecision decide(const std::string& image_id, int true_label,
                        const std::vector<PassSummary>& summaries, double delta) {
  EnsembleDecision d;
  d.image_id = image_id;
  d.true_label = true_label;
  d.summaries = summaries;
  d.delta = delta;
  d.selected = select_models(summaries, delta);
  d.outcome = aggregate_and_classify(summaries, d.selected);
  return d;
}

}  // namespace mcua
