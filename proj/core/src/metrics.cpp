#include "mcua/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mcua/rng.hpp"

namespace mcua {

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), static_cast<std::int64_t>(0));
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (int c = 0; c < classes; ++c) t += at(c, c);
  return t;
}

ConfusionMatrix confusion_from_pairs(const std::vector<int>& true_labels,
                                     const std::vector<int>& pred_labels, int classes) {
  if (classes < 1) throw ValidationError("confusion_from_pairs: need at least one class");
  if (true_labels.size() != pred_labels.size()) {
    throw ValidationError("confusion_from_pairs: label vectors differ in length");
  }
  ConfusionMatrix cm(classes);
  for (size_t i = 0; i < true_labels.size(); ++i) {
    const int t = true_labels[i], p = pred_labels[i];
    if (t < 0 || t >= classes || p < 0 || p >= classes) {
      throw ValidationError("confusion_from_pairs: label out of range at sample " +
                            std::to_string(i));
    }
    ++cm.at(t, p);
  }
  return cm;
}

ClassScores score_confusion(const ConfusionMatrix& cm) {
  const int n = cm.classes;
  ClassScores s;
  s.precision.assign(n, 0.0);
  s.recall.assign(n, 0.0);
  s.f1.assign(n, 0.0);
  s.class_accuracy.assign(n, 0.0);
  s.precision_defined.assign(n, false);
  s.recall_defined.assign(n, false);
  s.f1_defined.assign(n, false);
  s.support.assign(n, 0);

  const std::int64_t total = cm.total();
  if (total == 0) throw ValidationError("score_confusion: empty confusion matrix");
  s.overall_accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);

  double psum = 0.0, rsum = 0.0, fsum = 0.0;
  int pcount = 0, rcount = 0, fcount = 0;
  for (int c = 0; c < n; ++c) {
    std::int64_t tp = cm.at(c, c), row = 0, col = 0;
    for (int j = 0; j < n; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    s.support[c] = row;
    if (col > 0) {
      s.precision[c] = static_cast<double>(tp) / static_cast<double>(col);
      s.precision_defined[c] = true;
      psum += s.precision[c];
      ++pcount;
    }
    if (row > 0) {
      s.recall[c] = static_cast<double>(tp) / static_cast<double>(row);
      s.recall_defined[c] = true;
      s.class_accuracy[c] = s.recall[c];
      rsum += s.recall[c];
      ++rcount;
    }
    if (s.precision_defined[c] && s.recall_defined[c] && s.precision[c] + s.recall[c] > 0.0) {
      s.f1[c] = 2.0 * s.precision[c] * s.recall[c] / (s.precision[c] + s.recall[c]);
      s.f1_defined[c] = true;
      fsum += s.f1[c];
      ++fcount;
    }
  }
  if (pcount > 0) {
    s.macro_precision = psum / pcount;
    s.macro_precision_defined = true;
  }
  if (rcount > 0) {
    s.macro_recall = rsum / rcount;
    s.macro_recall_defined = true;
  }
  if (fcount > 0) {
    s.macro_f1 = fsum / fcount;
    s.macro_f1_defined = true;
  }
  return s;
}

std::optional<double> included_accuracy(std::int64_t included_correct,
                                        std::int64_t included_total) {
  if (included_total < 0 || included_correct < 0 || included_correct > included_total) {
    throw ValidationError("included_accuracy: malformed counts");
  }
  if (included_total == 0) return std::nullopt;
  return static_cast<double>(included_correct) / static_cast<double>(included_total);
}

std::optional<double> weighted_fold_accuracy(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& folds) {
  double weighted_sum = 0.0;
  std::int64_t weight_total = 0;
  for (const auto& [correct, included] : folds) {
    if (included < 0 || correct < 0 || correct > included) {
      throw ValidationError("weighted_fold_accuracy: malformed counts");
    }
    if (included == 0) continue;  // a fold with no coverage carries no weight
    weighted_sum += static_cast<double>(correct);
    weight_total += included;
  }
  if (weight_total == 0) return std::nullopt;
  return weighted_sum / static_cast<double>(weight_total);
}

double abstain_percent(std::int64_t abstained, std::int64_t total) {
  if (total <= 0) throw ValidationError("abstain_percent: total must be positive");
  if (abstained < 0 || abstained > total) {
    throw ValidationError("abstain_percent: malformed counts");
  }
  return 100.0 * static_cast<double>(abstained) / static_cast<double>(total);
}

std::vector<std::vector<size_t>> stratified_kfold(const std::vector<int>& labels, int k,
                                                  std::uint64_t seed) {
  if (k < 2) throw ValidationError("stratified_kfold: k must be at least 2");
  if (labels.empty()) throw ValidationError("stratified_kfold: empty label set");
  int classes = 0;
  for (int l : labels) {
    if (l < 0) throw ValidationError("stratified_kfold: negative label");
    classes = std::max(classes, l + 1);
  }
  std::vector<std::vector<size_t>> by_class(static_cast<size_t>(classes));
  for (size_t i = 0; i < labels.size(); ++i) by_class[static_cast<size_t>(labels[i])].push_back(i);

  std::vector<std::vector<size_t>> folds(static_cast<size_t>(k));
  for (int c = 0; c < classes; ++c) {
    auto& idx = by_class[static_cast<size_t>(c)];
    if (static_cast<int>(idx.size()) < k) {
      throw ValidationError("stratified_kfold: class " + std::to_string(c) + " has " +
                            std::to_string(idx.size()) + " samples, fewer than k=" +
                            std::to_string(k));
    }
    Rng rng(derive_seed(seed, "kfold-class", static_cast<std::uint64_t>(c)));
    for (size_t i = idx.size(); i > 1; --i) {
      const size_t j = rng.uniform_int(i);
      std::swap(idx[i - 1], idx[j]);
    }
    for (size_t i = 0; i < idx.size(); ++i) {
      folds[i % static_cast<size_t>(k)].push_back(idx[i]);
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

RocResult roc_auc_one_vs_rest(const std::vector<std::vector<double>>& scores,
                              const std::vector<int>& labels, int classes) {
  if (classes < 2) throw ValidationError("roc_auc_one_vs_rest: need at least two classes");
  if (scores.size() != labels.size() || scores.empty()) {
    throw ValidationError("roc_auc_one_vs_rest: scores/labels mismatch or empty");
  }
  for (size_t i = 0; i < scores.size(); ++i) {
    if (static_cast<int>(scores[i].size()) != classes) {
      throw ValidationError("roc_auc_one_vs_rest: score vector " + std::to_string(i) +
                            " has wrong class count");
    }
    if (labels[i] < 0 || labels[i] >= classes) {
      throw ValidationError("roc_auc_one_vs_rest: label out of range");
    }
  }

  RocResult r;
  r.auc.assign(static_cast<size_t>(classes), 0.0);
  r.defined.assign(static_cast<size_t>(classes), false);
  double sum = 0.0;
  int count = 0;

  std::vector<std::pair<double, int>> ranked(scores.size());  // score, is_positive
  for (int c = 0; c < classes; ++c) {
    std::int64_t pos = 0, neg = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      const int is_pos = labels[i] == c ? 1 : 0;
      ranked[i] = {scores[i][static_cast<size_t>(c)], is_pos};
      if (is_pos) ++pos; else ++neg;
    }
    if (pos == 0 || neg == 0) continue;
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    // Trapezoid sweep over distinct score levels; ties advance TP and FP
    // together, which gives them the standard half credit.
    double area = 0.0;
    std::int64_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < ranked.size()) {
      size_t j = i;
      std::int64_t tp_inc = 0, fp_inc = 0;
      while (j < ranked.size() && ranked[j].first == ranked[i].first) {
        if (ranked[j].second) ++tp_inc; else ++fp_inc;
        ++j;
      }
      const double fpr_step = static_cast<double>(fp_inc) / static_cast<double>(neg);
      const double tpr_mid =
          (static_cast<double>(tp) + static_cast<double>(tp_inc) / 2.0) / static_cast<double>(pos);
      area += fpr_step * tpr_mid;
      tp += tp_inc;
      fp += fp_inc;
      i = j;
    }
    r.auc[static_cast<size_t>(c)] = area;
    r.defined[static_cast<size_t>(c)] = true;
    sum += area;
    ++count;
  }
  if (count > 0) {
    r.macro_auc = sum / count;
    r.macro_defined = true;
  }
  return r;
}

RocCurve roc_curve_for_class(const std::vector<std::vector<double>>& scores,
                             const std::vector<int>& labels, int cls) {
  RocCurve curve;
  std::int64_t pos = 0, neg = 0;
  std::vector<std::pair<double, int>> ranked(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    const int is_pos = labels[i] == cls ? 1 : 0;
    ranked[i] = {scores[i][static_cast<size_t>(cls)], is_pos};
    if (is_pos) ++pos; else ++neg;
  }
  if (pos == 0 || neg == 0) return curve;
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  std::int64_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < ranked.size()) {
    size_t j = i;
    while (j < ranked.size() && ranked[j].first == ranked[i].first) {
      if (ranked[j].second) ++tp; else ++fp;
      ++j;
    }
    curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
    curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
    i = j;
  }
  return curve;
}

}  // namespace mcua
