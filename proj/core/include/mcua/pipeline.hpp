#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mcua/backbone.hpp"
#include "mcua/config.hpp"
#include "mcua/context.hpp"
#include "mcua/ensemble.hpp"
#include "mcua/metrics.hpp"
#include "mcua/synth.hpp"

namespace mcua {

struct BackboneDef {
  std::string name;     // "A1", "B1", "A2"
  std::string arch_id;  // "arch-A" / "arch-B"
  int scale_id = 0;     // 1 or 2
};

struct RosterEntry {
  std::string model_id;       // "A1_P2_S1"
  std::string backbone_name;  // "A1"
  int scale_id = 0;
  PatternSpec pattern;
};

// Everything derivable from config alone: backbone instances, the pattern
// library, the context-model roster, and the per-scale extraction grids.
struct SystemDef {
  RunConfig cfg;
  std::vector<PatternSpec> library;
  std::vector<BackboneDef> backbone_defs;
  std::vector<RosterEntry> roster;

  int scale_width(int scale_id) const;
  int scale_height(int scale_id) const;
  int context_stride(int scale_id) const;
  int backbone_train_stride(int scale_id) const;
  int backbone_test_stride(int scale_id) const;
  PatchGrid context_grid(int scale_id) const;
};

// The default three backbones: arch-A@scale1, arch-B@scale1, arch-A@scale2.
std::vector<BackboneDef> default_backbone_defs();

// Expands backbones x patterns into the default 18-model roster: scale-1
// models take every pattern except P8_S1, scale-2 models every pattern except
// P4_S1. A non-empty cfg.roster filters to the listed model ids.
SystemDef make_system_def(const RunConfig& cfg);

struct TrainedSystem {
  SystemDef def;
  std::vector<Backbone> backbones;       // parallel to def.backbone_defs
  std::vector<ContextModel> contexts;    // parallel to def.roster
  std::vector<std::vector<PatternPlacement>> placements;  // per roster entry

  size_t backbone_index(const std::string& name) const;
};

// Seeded, untrained instantiation of every network in the definition.
TrainedSystem build_system(const RunConfig& cfg, std::uint64_t seed);

struct TrainLogs {
  // One (model name, loss log) per trained network, training order.
  std::vector<std::pair<std::string, std::vector<LossLogEntry>>> logs;
};

// Labeled patches for one backbone: originals resized to the backbone's
// scale, tiled at the training stride, augmented per cfg.augment.
void backbone_training_set(const SystemDef& def, const BackboneDef& bdef,
                           const std::vector<Image>& originals, const std::vector<int>& labels,
                           std::uint64_t seed, std::vector<Patch>* patches_out,
                           std::vector<int>* labels_out);

void train_backbone(TrainedSystem& sys, size_t backbone_idx, const std::vector<Image>& originals,
                    const std::vector<int>& labels, std::uint64_t seed, TrainLogs* logs);

// cache[backbone][image] = one [C_f,h,w] tensor per context-grid cell.
using FeatureCache = std::vector<std::vector<std::vector<TensorPtr>>>;

FeatureCache compute_feature_cache(const TrainedSystem& sys,
                                   const std::vector<Image>& originals);

void train_context(TrainedSystem& sys, size_t model_idx, const FeatureCache& cache,
                   const std::vector<int>& labels, std::uint64_t seed, TrainLogs* logs);

// Backbones first, then every context model, single call.
void train_all(TrainedSystem& sys, const std::vector<Image>& originals,
               const std::vector<int>& labels, std::uint64_t seed, TrainLogs* logs,
               std::ostream* progress);

// Checkpoint round trip. Files: backbone_{name}.ckpt, context_{model_id}.ckpt.
std::string backbone_checkpoint_path(const std::string& dir, const std::string& name);
std::string context_checkpoint_path(const std::string& dir, const std::string& model_id);
void save_system(const TrainedSystem& sys, const std::string& dir);
// Rebuilds from config and fills weights; a missing or mismatched checkpoint
// is a ValidationError naming the model.
TrainedSystem load_system(const RunConfig& cfg, const std::string& dir);

// MC summaries for every roster model on one image. Models with no placements
// get a z == 0 summary; if that is every model, NoContextError.
struct ImageEval {
  std::string image_id;
  int true_label = -1;
  std::vector<PassSummary> summaries;  // roster order
};

ImageEval evaluate_one(const TrainedSystem& sys, const Image& original,
                       const std::string& image_id, int true_label, std::uint64_t run_seed);

// Deterministic for any thread count: per-image seeds derive from the image
// id, and results land in input order.
std::vector<ImageEval> evaluate_set(const TrainedSystem& sys, const std::vector<Image>& originals,
                                    const std::vector<std::string>& ids,
                                    const std::vector<int>& labels, std::uint64_t run_seed,
                                    int threads, std::ostream* progress);

EnsembleDecision decide_eval(const ImageEval& ev, double delta);

// Majority vote over scale-1 test-stride patches of both scale-1 backbones;
// the context-free reference point. Ties resolve to the lowest class index.
int patch_majority_predict(const TrainedSystem& sys, const Image& original);

// ----- run artifacts -----

void write_loss_csv(const std::string& path, const std::vector<LossLogEntry>& entries);

// One row per image: id, true label, one sigma column per model ("na" when
// the model had no placements), delta, selected count, predicted label or
// ABSTAIN.
void write_decisions_csv(const std::string& path, const std::vector<ImageEval>& evals,
                         const std::vector<std::string>& model_ids, double delta);

struct SweepRow {
  double delta = 0.0;
  std::int64_t included = 0, excluded = 0;
  std::optional<double> included_acc;         // no value = no coverage
  double abs_pct = 0.0;
  std::optional<double> excluded_static_acc;  // accuracy of the static
                                              // ensemble on excluded images
};

std::vector<SweepRow> compute_sweep(const std::vector<ImageEval>& evals,
                                    const std::vector<double>& grid);

// Columns: delta, included, excluded, wa_acc ("na" on no coverage),
// no_coverage flag, abs_pct, excluded_static_acc + its plot-parity 0 column.
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

void write_metrics_csv(const std::string& path, const ConfusionMatrix& cm,
                       const ClassScores& scores, const std::vector<std::string>& class_names);

// Fixed-width per-class precision/recall/F1/accuracy table with a Total row.
std::string format_summary_table(const ClassScores& scores,
                                 const std::vector<std::string>& class_names);

void write_roc_csv(const std::string& path, const std::vector<std::vector<double>>& scores,
                   const std::vector<int>& labels, int classes);

// ----- cross-validation (the behavioral acceptance path) -----

struct CvDeltaRow {
  double delta = 0.0;
  std::int64_t included = 0, excluded = 0;
  std::optional<double> wa_acc;  // fold accuracies weighted by included count
  double abs_pct = 0.0;
};

struct CvOutcome {
  std::vector<CvDeltaRow> per_delta;
  double static_accuracy = 0.0;  // all test images, infinite delta
  std::optional<double> best_wa_acc;
  double best_delta = 0.0;

  // The layout-pair story: accuracy on classes {2,3} only.
  double pair_baseline_acc = 0.0;   // patch-majority votes
  std::int64_t pair_total = 0;
  std::optional<double> pair_pipeline_acc;  // dynamic at best_delta, included images
  std::int64_t pair_included = 0;
  std::optional<double> pair_static_acc;    // static ensemble, all pair images
};

CvOutcome run_cv(const RunConfig& cfg, const std::vector<Image>& originals,
                 const std::vector<std::string>& ids, const std::vector<int>& labels,
                 std::uint64_t seed, std::ostream* progress);

// Loads every manifest record's pixels (root-relative paths).
std::vector<Image> load_manifest_images(const DatasetManifest& manifest);

}  // namespace mcua
