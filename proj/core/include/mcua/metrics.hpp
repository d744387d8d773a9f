#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mcua/errors.hpp"

namespace mcua {

struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::int64_t> counts;  // row = true class, col = predicted

  explicit ConfusionMatrix(int n_classes = 0)
      : classes(n_classes),
        counts(static_cast<size_t>(n_classes) * static_cast<size_t>(n_classes), 0) {}

  std::int64_t& at(int true_c, int pred_c) {
    return counts[static_cast<size_t>(true_c) * classes + pred_c];
  }
  std::int64_t at(int true_c, int pred_c) const {
    return counts[static_cast<size_t>(true_c) * classes + pred_c];
  }
  std::int64_t total() const;
  std::int64_t trace() const;
};

ConfusionMatrix confusion_from_pairs(const std::vector<int>& true_labels,
                                     const std::vector<int>& pred_labels, int classes);

// Per-class scores with explicit defined flags: a zero denominator yields a
// flagged-undefined entry, never a silent zero, and undefined entries are
// excluded from the macro averages.
struct ClassScores {
  std::vector<double> precision, recall, f1, class_accuracy;
  std::vector<bool> precision_defined, recall_defined, f1_defined;
  std::vector<std::int64_t> support;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  bool macro_precision_defined = false, macro_recall_defined = false, macro_f1_defined = false;
  double overall_accuracy = 0.0;  // trace / total, distinct from class_accuracy
};

ClassScores score_confusion(const ConfusionMatrix& cm);

// Accuracy over the images the ensemble actually classified. No coverage
// (zero included) reports as nullopt rather than a fake 0.
std::optional<double> included_accuracy(std::int64_t included_correct, std::int64_t included_total);

// Fold accuracies averaged with the folds' included counts as weights:
// sum(acc_i * n_i) / sum(n_i) over folds with n_i > 0. Folds are
// (correct, included) pairs; nullopt when nothing was included anywhere.
// Negative counts or correct > included are malformed.
std::optional<double> weighted_fold_accuracy(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& folds);

// Percentage of images abstained on; a run with zero images is malformed.
double abstain_percent(std::int64_t abstained, std::int64_t total);

// Seeded stratified k-fold: per-class fold sizes differ by at most one.
// Returns test-index sets, fold-major. Any class smaller than k is an error.
std::vector<std::vector<size_t>> stratified_kfold(const std::vector<int>& labels, int k,
                                                  std::uint64_t seed);

struct RocResult {
  std::vector<double> auc;     // one-vs-rest per class
  std::vector<bool> defined;   // false when a class has no positives or no negatives
  double macro_auc = 0.0;
  bool macro_defined = false;
};

// scores[i] holds a per-class score vector for sample i (higher = more
// confident); ties get half credit, matching the rank-statistic definition.
RocResult roc_auc_one_vs_rest(const std::vector<std::vector<double>>& scores,
                              const std::vector<int>& labels, int classes);

// Operating points of one class's one-vs-rest curve, starting at (0,0); one
// point per distinct score level. Empty when the class has no positives or no
// negatives. Trapezoid area over these points equals the AUC above.
struct RocCurve {
  std::vector<double> fpr, tpr;
};

RocCurve roc_curve_for_class(const std::vector<std::vector<double>>& scores,
                             const std::vector<int>& labels, int cls);

}  // namespace mcua
