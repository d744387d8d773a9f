#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "mcua/metrics.hpp"
#include "mcua/pipeline.hpp"
#include "mcua/rng.hpp"

using namespace mcua;

namespace {

// Count-loop oracle for one class's precision/recall/F1.
struct HandScores {
  double precision = 0, recall = 0, f1 = 0;
  bool p_def = false, r_def = false, f_def = false;
};

HandScores hand_scores(const std::vector<int>& t, const std::vector<int>& p, int cls) {
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] == cls && p[i] == cls) ++tp;
    if (t[i] != cls && p[i] == cls) ++fp;
    if (t[i] == cls && p[i] != cls) ++fn;
  }
  HandScores h;
  if (tp + fp > 0) {
    h.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    h.p_def = true;
  }
  if (tp + fn > 0) {
    h.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    h.r_def = true;
  }
  if (h.p_def && h.r_def && h.precision + h.recall > 0) {
    h.f1 = 2 * h.precision * h.recall / (h.precision + h.recall);
    h.f_def = true;
  }
  return h;
}

// Pairwise rank-statistic AUC with half credit for ties; O(P*N).
double mann_whitney_auc(const std::vector<double>& s, const std::vector<bool>& pos) {
  double wins = 0.0;
  std::int64_t pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!pos[i]) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (pos[j]) continue;
      ++pairs;
      if (s[i] > s[j])
        wins += 1.0;
      else if (s[i] == s[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

PassSummary fab_summary(const std::string& id, std::vector<double> mu, double scalar,
                        int z = 5) {
  PassSummary s;
  s.model_id = id;
  s.mu = std::move(mu);
  s.sigma.assign(s.mu.size(), scalar);
  s.variance.assign(s.mu.size(), scalar * scalar);
  s.scalar_uncertainty = scalar;
  s.z = z;
  return s;
}

}  // namespace

TEST_CASE("confusion matrix and scores on a worked example") {
  // true [0,0,1,1], predicted [0,1,1,1].
  auto cm = confusion_from_pairs({0, 0, 1, 1}, {0, 1, 1, 1}, 2);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 0) == 0);
  CHECK(cm.at(1, 1) == 2);
  CHECK(cm.total() == 4);
  CHECK(cm.trace() == 3);

  auto s = score_confusion(cm);
  CHECK(s.precision[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.recall[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.f1[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s.precision[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s.recall[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.f1[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(s.support == std::vector<std::int64_t>{2, 2});
  CHECK(s.overall_accuracy == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(s.macro_precision == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
  CHECK(s.macro_recall == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(s.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0).epsilon(1e-15));
  CHECK(s.macro_precision_defined);
}

TEST_CASE("scores agree with a count-loop oracle over random instances") {
  Rng rng(88);
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = 2 + static_cast<int>(rng.uniform_int(5));
    const int n = 1 + static_cast<int>(rng.uniform_int(200));
    std::vector<int> t(static_cast<size_t>(n)), p(static_cast<size_t>(n));
    for (auto& v : t) v = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(classes)));
    for (auto& v : p) v = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(classes)));

    auto cm = confusion_from_pairs(t, p, classes);
    auto s = score_confusion(cm);

    std::int64_t correct = 0;
    for (int i = 0; i < n; ++i)
      if (t[static_cast<size_t>(i)] == p[static_cast<size_t>(i)]) ++correct;
    REQUIRE(s.overall_accuracy ==
            doctest::Approx(static_cast<double>(correct) / n).epsilon(1e-12));

    double mp = 0, mr = 0, mf = 0;
    int np = 0, nr = 0, nf = 0;
    for (int c = 0; c < classes; ++c) {
      auto h = hand_scores(t, p, c);
      REQUIRE(s.precision_defined[static_cast<size_t>(c)] == h.p_def);
      REQUIRE(s.recall_defined[static_cast<size_t>(c)] == h.r_def);
      REQUIRE(s.f1_defined[static_cast<size_t>(c)] == h.f_def);
      if (h.p_def) {
        REQUIRE(s.precision[static_cast<size_t>(c)] == doctest::Approx(h.precision).epsilon(1e-12));
        mp += h.precision;
        ++np;
      }
      if (h.r_def) {
        REQUIRE(s.recall[static_cast<size_t>(c)] == doctest::Approx(h.recall).epsilon(1e-12));
        mr += h.recall;
        ++nr;
      }
      if (h.f_def) {
        REQUIRE(s.f1[static_cast<size_t>(c)] == doctest::Approx(h.f1).epsilon(1e-12));
        mf += h.f1;
        ++nf;
      }
    }
    REQUIRE(s.macro_precision_defined == (np > 0));
    if (np > 0) REQUIRE(s.macro_precision == doctest::Approx(mp / np).epsilon(1e-12));
    if (nr > 0) REQUIRE(s.macro_recall == doctest::Approx(mr / nr).epsilon(1e-12));
    if (nf > 0) REQUIRE(s.macro_f1 == doctest::Approx(mf / nf).epsilon(1e-12));
  }
}

TEST_CASE("a perfect classifier scores one everywhere") {
  std::vector<int> t = {0, 1, 2, 0, 1, 2};
  auto s = score_confusion(confusion_from_pairs(t, t, 3));
  for (int c = 0; c < 3; ++c) {
    CHECK(s.precision[static_cast<size_t>(c)] == 1.0);
    CHECK(s.recall[static_cast<size_t>(c)] == 1.0);
    CHECK(s.f1[static_cast<size_t>(c)] == 1.0);
  }
  CHECK(s.overall_accuracy == 1.0);
  CHECK(s.macro_f1 == 1.0);
}

TEST_CASE("zero-denominator score entries are flagged, not zeroed") {
  // One sample: true 0, predicted 1, three classes.
  auto s = score_confusion(confusion_from_pairs({0}, {1}, 3));
  CHECK_FALSE(s.precision_defined[0]);  // class 0 never predicted
  CHECK(s.recall_defined[0]);
  CHECK(s.recall[0] == 0.0);
  CHECK(s.precision_defined[1]);  // class 1 predicted once, wrongly
  CHECK(s.precision[1] == 0.0);
  CHECK_FALSE(s.recall_defined[1]);  // class 1 has no true samples
  CHECK_FALSE(s.precision_defined[2]);
  CHECK_FALSE(s.recall_defined[2]);
  CHECK(s.support == std::vector<std::int64_t>{1, 0, 0});
  CHECK(s.overall_accuracy == 0.0);

  CHECK_THROWS_AS(score_confusion(ConfusionMatrix(0)), ValidationError);
}

TEST_CASE("coverage accounting") {
  SUBCASE("included accuracy") {
    auto a = included_accuracy(3, 4);
    REQUIRE(a.has_value());
    CHECK(*a == doctest::Approx(0.75).epsilon(1e-15));
    CHECK_FALSE(included_accuracy(0, 0).has_value());
    CHECK_THROWS_AS(included_accuracy(5, 4), ValidationError);
  }
  SUBCASE("abstain percentage") {
    CHECK(abstain_percent(20, 400) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(abstain_percent(0, 400) == 0.0);
    CHECK(abstain_percent(400, 400) == 100.0);
    // 3+2+0+1+4 abstentions pooled over folds of a 400-image set.
    CHECK(abstain_percent(3 + 2 + 0 + 1 + 4, 400) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK_THROWS_AS(abstain_percent(1, 0), ValidationError);
  }
  SUBCASE("weighted fold accuracy") {
    // Equal weights reduce to the plain mean.
    auto even = weighted_fold_accuracy({{8, 10}, {6, 10}});
    REQUIRE(even.has_value());
    CHECK(*even == doctest::Approx(0.7).epsilon(1e-15));
    // Accuracies 1.0 and 0.5 with weights 30 and 10.
    auto skew = weighted_fold_accuracy({{30, 30}, {5, 10}});
    REQUIRE(skew.has_value());
    CHECK(*skew == doctest::Approx(0.875).epsilon(1e-15));
    // A no-coverage fold contributes nothing.
    auto with_empty = weighted_fold_accuracy({{30, 30}, {0, 0}, {5, 10}});
    REQUIRE(with_empty.has_value());
    CHECK(*with_empty == doctest::Approx(0.875).epsilon(1e-15));
    auto solo = weighted_fold_accuracy({{7, 9}});
    REQUIRE(solo.has_value());
    CHECK(*solo == doctest::Approx(7.0 / 9.0).epsilon(1e-15));
    CHECK_FALSE(weighted_fold_accuracy({{0, 0}, {0, 0}}).has_value());
    CHECK_FALSE(weighted_fold_accuracy({}).has_value());
    CHECK_THROWS_AS(weighted_fold_accuracy({{5, 4}}), ValidationError);
  }
}

TEST_CASE("stratified folds balance every class exactly when divisible") {
  std::vector<int> labels;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 100; ++i) labels.push_back(c);

  auto folds = stratified_kfold(labels, 5, 99);
  REQUIRE(folds.size() == 5);

  std::set<size_t> seen;
  for (const auto& fold : folds) {
    CHECK(fold.size() == 80);
    std::vector<int> per_class(4, 0);
    for (size_t idx : fold) {
      REQUIRE(idx < labels.size());
      REQUIRE(seen.insert(idx).second);  // disjoint folds
      ++per_class[static_cast<size_t>(labels[idx])];
    }
    for (int c = 0; c < 4; ++c) CHECK(per_class[static_cast<size_t>(c)] == 20);
  }
  CHECK(seen.size() == labels.size());  // folds cover everything

  SUBCASE("same seed replays the same folds") {
    auto again = stratified_kfold(labels, 5, 99);
    CHECK(again == folds);
    auto other = stratified_kfold(labels, 5, 100);
    CHECK(other != folds);
  }
  SUBCASE("uneven classes spread the remainder by at most one") {
    std::vector<int> uneven;
    for (int i = 0; i < 7; ++i) uneven.push_back(0);
    for (int i = 0; i < 11; ++i) uneven.push_back(1);
    auto f3 = stratified_kfold(uneven, 3, 1);
    for (const auto& fold : f3) {
      int c0 = 0, c1 = 0;
      for (size_t idx : fold) (uneven[idx] == 0 ? c0 : c1)++;
      CHECK(c0 >= 2);
      CHECK(c0 <= 3);
      CHECK(c1 >= 3);
      CHECK(c1 <= 4);
    }
  }
  SUBCASE("a class smaller than k is rejected by name") {
    std::vector<int> tiny = {0, 0, 0, 1, 1, 1, 1, 1};
    CHECK_THROWS_WITH_AS(stratified_kfold(tiny, 4, 1), doctest::Contains("0"),
                         ValidationError);
  }
}

TEST_CASE("one-vs-rest AUC on trivially separable and degenerate score sets") {
  SUBCASE("perfect separation scores one") {
    std::vector<std::vector<double>> scores = {{0.9, 0.1}, {0.8, 0.2}, {0.2, 0.8},
                                               {0.1, 0.9}};
    std::vector<int> labels = {0, 0, 1, 1};
    auto r = roc_auc_one_vs_rest(scores, labels, 2);
    REQUIRE(r.defined[0]);
    REQUIRE(r.defined[1]);
    CHECK(r.auc[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.auc[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.macro_auc == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("constant scores land at one-half") {
    std::vector<std::vector<double>> scores = {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
    std::vector<int> labels = {0, 1, 0};
    auto r = roc_auc_one_vs_rest(scores, labels, 2);
    CHECK(r.auc[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.auc[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("anti-correlated scores land at zero") {
    std::vector<std::vector<double>> scores = {{0.1, 0.9}, {0.9, 0.1}};
    std::vector<int> labels = {0, 1};
    auto r = roc_auc_one_vs_rest(scores, labels, 2);
    CHECK(r.auc[0] == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("a class with no positives or no negatives is undefined") {
    std::vector<std::vector<double>> scores = {{0.9, 0.1}, {0.8, 0.2}};
    std::vector<int> labels = {0, 0};
    auto r = roc_auc_one_vs_rest(scores, labels, 2);
    CHECK_FALSE(r.defined[0]);  // no negatives
    CHECK_FALSE(r.defined[1]);  // no positives
    CHECK_FALSE(r.macro_defined);
  }
}

TEST_CASE("AUC matches the pairwise rank oracle, ties at half credit") {
  Rng rng(321);
  int defined_seen = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int classes = 2 + static_cast<int>(rng.uniform_int(3));
    const int n = 5 + static_cast<int>(rng.uniform_int(40));
    std::vector<std::vector<double>> scores(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      labels[static_cast<size_t>(i)] =
          static_cast<int>(rng.uniform_int(static_cast<uint64_t>(classes)));
      scores[static_cast<size_t>(i)].resize(static_cast<size_t>(classes));
      for (auto& v : scores[static_cast<size_t>(i)])
        // Coarse quantization forces plenty of exact ties.
        v = std::floor(rng.uniform() * 10.0) / 10.0;
    }
    auto r = roc_auc_one_vs_rest(scores, labels, classes);
    for (int c = 0; c < classes; ++c) {
      std::vector<double> s(static_cast<size_t>(n));
      std::vector<bool> pos(static_cast<size_t>(n));
      int npos = 0;
      for (int i = 0; i < n; ++i) {
        s[static_cast<size_t>(i)] = scores[static_cast<size_t>(i)][static_cast<size_t>(c)];
        pos[static_cast<size_t>(i)] = labels[static_cast<size_t>(i)] == c;
        if (pos[static_cast<size_t>(i)]) ++npos;
      }
      if (npos == 0 || npos == n) {
        REQUIRE_FALSE(r.defined[static_cast<size_t>(c)]);
        continue;
      }
      ++defined_seen;
      REQUIRE(r.defined[static_cast<size_t>(c)]);
      REQUIRE(std::fabs(r.auc[static_cast<size_t>(c)] - mann_whitney_auc(s, pos)) < 1e-9);
    }
  }
  CHECK(defined_seen > 300);
}

TEST_CASE("the ROC curve's trapezoid area reproduces the AUC") {
  Rng rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 6 + static_cast<int>(rng.uniform_int(30));
    std::vector<std::vector<double>> scores(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < n; ++i) {
      labels[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(2));
      (labels[static_cast<size_t>(i)] == 0 ? has_neg : has_pos) = true;
      scores[static_cast<size_t>(i)] = {rng.uniform(), 0.0};
      scores[static_cast<size_t>(i)][1] = 1.0 - scores[static_cast<size_t>(i)][0];
    }
    if (!has_pos || !has_neg) continue;
    auto curve = roc_curve_for_class(scores, labels, 1);
    REQUIRE(curve.fpr.size() == curve.tpr.size());
    REQUIRE(curve.fpr.front() == 0.0);
    REQUIRE(curve.tpr.front() == 0.0);
    REQUIRE(curve.fpr.back() == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(curve.tpr.back() == doctest::Approx(1.0).epsilon(1e-12));
    double area = 0.0;
    for (size_t i = 1; i < curve.fpr.size(); ++i)
      area += (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]) / 2.0;
    auto r = roc_auc_one_vs_rest(scores, labels, 2);
    REQUIRE(r.defined[1]);
    REQUIRE(std::fabs(area - r.auc[1]) < 1e-9);
  }

  SUBCASE("degenerate class gives an empty curve") {
    auto curve = roc_curve_for_class({{1.0, 0.0}, {0.5, 0.5}}, {0, 0}, 1);
    CHECK(curve.fpr.empty());
  }
}

TEST_CASE("threshold sweeps agree with per-threshold decisions") {
  // Fabricated image records with known sigmas and known correctness.
  Rng rng(77);
  std::vector<ImageEval> evals;
  for (int i = 0; i < 60; ++i) {
    ImageEval ev;
    ev.image_id = "img" + std::to_string(i);
    ev.true_label = static_cast<int>(rng.uniform_int(3));
    for (int m = 0; m < 4; ++m) {
      std::vector<double> mu(3, 0.0);
      const int vote = static_cast<int>(rng.uniform_int(3));
      mu[static_cast<size_t>(vote)] = 0.6;
      mu[(static_cast<size_t>(vote) + 1) % 3] = 0.25;
      mu[(static_cast<size_t>(vote) + 2) % 3] = 0.15;
      ev.summaries.push_back(
          fab_summary("m" + std::to_string(m), mu, rng.uniform(0.0, 0.2)));
    }
    evals.push_back(std::move(ev));
  }

  const std::vector<double> grid = {0.01, 0.05, 0.1, 0.15,
                                    std::numeric_limits<double>::infinity()};
  auto rows = compute_sweep(evals, grid);
  REQUIRE(rows.size() == grid.size());

  for (size_t gi = 0; gi < grid.size(); ++gi) {
    std::int64_t inc = 0, inc_correct = 0, exc = 0, exc_static_correct = 0;
    for (const auto& ev : evals) {
      auto d = decide_eval(ev, grid[gi]);
      if (d.outcome) {
        ++inc;
        if (d.outcome->label == ev.true_label) ++inc_correct;
      } else {
        ++exc;
        auto st = decide_eval(ev, std::numeric_limits<double>::infinity());
        if (st.outcome && st.outcome->label == ev.true_label) ++exc_static_correct;
      }
    }
    const auto& r = rows[gi];
    REQUIRE(r.delta == grid[gi]);
    REQUIRE(r.included == inc);
    REQUIRE(r.excluded == exc);
    if (inc > 0) {
      REQUIRE(r.included_acc.has_value());
      REQUIRE(*r.included_acc ==
              doctest::Approx(static_cast<double>(inc_correct) / inc).epsilon(1e-12));
    } else {
      REQUIRE_FALSE(r.included_acc.has_value());
    }
    REQUIRE(r.abs_pct == doctest::Approx(100.0 * exc / 60.0).epsilon(1e-12));
    if (exc > 0) {
      REQUIRE(r.excluded_static_acc.has_value());
      REQUIRE(*r.excluded_static_acc ==
              doctest::Approx(static_cast<double>(exc_static_correct) / exc).epsilon(1e-12));
    } else {
      REQUIRE_FALSE(r.excluded_static_acc.has_value());
    }
  }

  SUBCASE("the infinite threshold includes everything") {
    const auto& last = rows.back();
    CHECK(last.included == 60);
    CHECK(last.excluded == 0);
    CHECK(last.abs_pct == 0.0);
    REQUIRE(last.included_acc.has_value());
    // With everything included the weighted accuracy is the plain accuracy.
    std::int64_t correct = 0;
    for (const auto& ev : evals) {
      auto d = decide_eval(ev, std::numeric_limits<double>::infinity());
      REQUIRE(d.outcome.has_value());
      if (d.outcome->label == ev.true_label) ++correct;
    }
    CHECK(*last.included_acc == doctest::Approx(correct / 60.0).epsilon(1e-12));
  }
}
