#include "mcua/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "mcua/csv.hpp"

namespace mcua {

namespace {

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    size_t a = 0, b = item.size();
    while (a < b && std::isspace(static_cast<unsigned char>(item[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(item[b - 1]))) --b;
    if (b > a) out.push_back(item.substr(a, b - a));
  }
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  return out;
}

}  // namespace

int SystemDef::scale_width(int scale_id) const {
  if (scale_id == 1) return cfg.scale1_width;
  if (scale_id == 2) return cfg.scale2_width;
  throw ValidationError("unknown scale id " + std::to_string(scale_id));
}

int SystemDef::scale_height(int scale_id) const {
  if (scale_id == 1) return cfg.scale1_height;
  if (scale_id == 2) return cfg.scale2_height;
  throw ValidationError("unknown scale id " + std::to_string(scale_id));
}

int SystemDef::context_stride(int scale_id) const {
  if (scale_id == 1) return cfg.context_stride_scale1;
  if (scale_id == 2) return cfg.context_stride_scale2;
  throw ValidationError("unknown scale id " + std::to_string(scale_id));
}

int SystemDef::backbone_train_stride(int scale_id) const {
  if (scale_id == 1) return cfg.backbone_train_stride_scale1;
  if (scale_id == 2) return cfg.backbone_train_stride_scale2;
  throw ValidationError("unknown scale id " + std::to_string(scale_id));
}

int SystemDef::backbone_test_stride(int scale_id) const {
  if (scale_id == 1) return cfg.backbone_test_stride_scale1;
  if (scale_id == 2) return cfg.backbone_test_stride_scale2;
  throw ValidationError("unknown scale id " + std::to_string(scale_id));
}

PatchGrid SystemDef::context_grid(int scale_id) const {
  return make_grid(scale_width(scale_id), scale_height(scale_id), cfg.patch_width,
                   cfg.patch_height, context_stride(scale_id), scale_id);
}

std::vector<BackboneDef> default_backbone_defs() {
  return {{"A1", "arch-A", 1}, {"B1", "arch-B", 1}, {"A2", "arch-A", 2}};
}

SystemDef make_system_def(const RunConfig& cfg) {
  validate_config(cfg);
  SystemDef def;
  def.cfg = cfg;
  def.library =
      cfg.pattern_library.empty() ? default_pattern_library() : load_pattern_library(cfg.pattern_library);
  def.backbone_defs = default_backbone_defs();

  // Scale 1 skips P8_S1 (meant for the larger scale-2 grid); scale 2 skips
  // P4_S1. Six patterns per backbone, 18 models over three backbones.
  for (const auto& b : def.backbone_defs) {
    const std::string skip = b.scale_id == 1 ? "P8_S1" : "P4_S1";
    for (const auto& pat : def.library) {
      if (pat.id == skip) continue;
      RosterEntry e;
      e.model_id = b.name + "_" + pat.id;
      e.backbone_name = b.name;
      e.scale_id = b.scale_id;
      e.pattern = pat;
      def.roster.push_back(std::move(e));
    }
  }

  if (!cfg.roster.empty()) {
    const auto wanted = split_csv_list(cfg.roster);
    if (wanted.empty()) throw ValidationError("config: roster lists no model ids");
    std::vector<RosterEntry> filtered;
    for (const auto& id : wanted) {
      auto it = std::find_if(def.roster.begin(), def.roster.end(),
                             [&](const RosterEntry& e) { return e.model_id == id; });
      if (it == def.roster.end()) {
        throw ValidationError("config: roster names unknown model '" + id + "'");
      }
      if (std::any_of(filtered.begin(), filtered.end(),
                      [&](const RosterEntry& e) { return e.model_id == id; })) {
        throw ValidationError("config: roster repeats model '" + id + "'");
      }
      filtered.push_back(*it);
    }
    def.roster = std::move(filtered);
  }
  return def;
}

size_t TrainedSystem::backbone_index(const std::string& name) const {
  for (size_t i = 0; i < def.backbone_defs.size(); ++i) {
    if (def.backbone_defs[i].name == name) return i;
  }
  throw ValidationError("unknown backbone '" + name + "'");
}

TrainedSystem build_system(const RunConfig& cfg, std::uint64_t seed) {
  TrainedSystem sys;
  sys.def = make_system_def(cfg);

  for (const auto& b : sys.def.backbone_defs) {
    sys.backbones.push_back(Backbone::build(b.arch_id, b.name, b.scale_id, cfg.patch_width,
                                            cfg.patch_height, cfg.classes, seed));
  }
  for (const auto& e : sys.def.roster) {
    const Backbone& bb = sys.backbones[sys.backbone_index(e.backbone_name)];
    sys.contexts.push_back(ContextModel::build(e.model_id, e.backbone_name, e.scale_id,
                                               e.pattern, bb.feature_channels(), bb.feature_h(),
                                               bb.feature_w(), cfg.classes, cfg.dropout_rate,
                                               seed));
    sys.placements.push_back(enumerate_placements(sys.def.context_grid(e.scale_id), e.pattern));
  }
  return sys;
}

void backbone_training_set(const SystemDef& def, const BackboneDef& bdef,
                           const std::vector<Image>& originals, const std::vector<int>& labels,
                           std::uint64_t seed, std::vector<Patch>* patches_out,
                           std::vector<int>* labels_out) {
  if (originals.empty()) throw ValidationError("backbone_training_set: no images");
  if (originals.size() != labels.size()) {
    throw ValidationError("backbone_training_set: image/label count mismatch");
  }
  patches_out->clear();
  labels_out->clear();
  const int tw = def.scale_width(bdef.scale_id), th = def.scale_height(bdef.scale_id);
  const int stride = def.backbone_train_stride(bdef.scale_id);
  const ColorJitter jitter;
  for (size_t i = 0; i < originals.size(); ++i) {
    const Image scaled = resize_bilinear(originals[i], tw, th);
    auto patches = extract_patches(scaled, def.cfg.patch_width, def.cfg.patch_height, stride);
    Rng aug_rng(derive_seed(seed, "augment-" + bdef.name, static_cast<std::uint64_t>(i)));
    for (auto& p : patches) {
      if (def.cfg.augment) {
        for (auto& v : augment_patch(p, AugmentMode::train, aug_rng, jitter)) {
          patches_out->push_back(std::move(v));
          labels_out->push_back(labels[i]);
        }
      } else {
        patches_out->push_back(std::move(p));
        labels_out->push_back(labels[i]);
      }
    }
  }
}

void train_backbone(TrainedSystem& sys, size_t backbone_idx, const std::vector<Image>& originals,
                    const std::vector<int>& labels, std::uint64_t seed, TrainLogs* logs) {
  const auto& bdef = sys.def.backbone_defs.at(backbone_idx);
  std::vector<Patch> patches;
  std::vector<int> patch_labels;
  backbone_training_set(sys.def, bdef, originals, labels, seed, &patches, &patch_labels);
  std::vector<LossLogEntry> log;
  sys.backbones[backbone_idx].fine_tune(patches, patch_labels, sys.def.cfg.backbone_epochs,
                                        sys.def.cfg.backbone_lr, sys.def.cfg.backbone_batch,
                                        seed, &log);
  if (logs) logs->logs.emplace_back("backbone_" + bdef.name, std::move(log));
}

FeatureCache compute_feature_cache(const TrainedSystem& sys,
                                   const std::vector<Image>& originals) {
  FeatureCache cache(sys.backbones.size());

  // Resize once per scale, not once per backbone.
  std::vector<int> scales;
  for (const auto& b : sys.def.backbone_defs) {
    if (std::find(scales.begin(), scales.end(), b.scale_id) == scales.end()) {
      scales.push_back(b.scale_id);
    }
  }
  std::vector<std::vector<Image>> scaled(scales.size());
  for (size_t si = 0; si < scales.size(); ++si) {
    const int tw = sys.def.scale_width(scales[si]), th = sys.def.scale_height(scales[si]);
    scaled[si].reserve(originals.size());
    for (const auto& img : originals) scaled[si].push_back(resize_bilinear(img, tw, th));
  }

  for (size_t bi = 0; bi < sys.backbones.size(); ++bi) {
    const int scale = sys.def.backbone_defs[bi].scale_id;
    const size_t si = static_cast<size_t>(
        std::find(scales.begin(), scales.end(), scale) - scales.begin());
    const int stride = sys.def.context_stride(scale);
    cache[bi].reserve(originals.size());
    for (const auto& img : scaled[si]) {
      auto patches = extract_patches(img, sys.def.cfg.patch_width, sys.def.cfg.patch_height,
                                     stride);
      cache[bi].push_back(sys.backbones[bi].extract_feature_maps(patches));
    }
  }
  return cache;
}

void train_context(TrainedSystem& sys, size_t model_idx, const FeatureCache& cache,
                   const std::vector<int>& labels, std::uint64_t seed, TrainLogs* logs) {
  const auto& entry = sys.def.roster.at(model_idx);
  const auto& placements = sys.placements.at(model_idx);
  if (placements.empty()) return;  // nothing to learn from; skipped, never selectable
  const size_t bi = sys.backbone_index(entry.backbone_name);
  if (cache.at(bi).size() != labels.size()) {
    throw ValidationError("train_context: cache/label count mismatch");
  }
  std::vector<TensorPtr> inputs;
  inputs.reserve(labels.size());
  for (const auto& maps : cache[bi]) {
    inputs.push_back(build_context_input(maps, placements));
  }
  std::vector<LossLogEntry> log;
  sys.contexts[model_idx].train(inputs, labels, sys.def.cfg.context_epochs,
                                sys.def.cfg.context_lr, sys.def.cfg.context_batch, seed, &log);
  if (logs) logs->logs.emplace_back("context_" + entry.model_id, std::move(log));
}

void train_all(TrainedSystem& sys, const std::vector<Image>& originals,
               const std::vector<int>& labels, std::uint64_t seed, TrainLogs* logs,
               std::ostream* progress) {
  for (size_t bi = 0; bi < sys.backbones.size(); ++bi) {
    if (progress) {
      *progress << "training backbone " << sys.def.backbone_defs[bi].name << "\n" << std::flush;
    }
    train_backbone(sys, bi, originals, labels, seed, logs);
  }
  if (progress) *progress << "extracting feature maps\n" << std::flush;
  const FeatureCache cache = compute_feature_cache(sys, originals);
  for (size_t mi = 0; mi < sys.contexts.size(); ++mi) {
    if (progress) {
      *progress << "training context model " << sys.def.roster[mi].model_id << "\n" << std::flush;
    }
    train_context(sys, mi, cache, labels, seed, logs);
  }
}

std::string backbone_checkpoint_path(const std::string& dir, const std::string& name) {
  return dir + "/backbone_" + name + ".ckpt";
}

std::string context_checkpoint_path(const std::string& dir, const std::string& model_id) {
  return dir + "/context_" + model_id + ".ckpt";
}

void save_system(const TrainedSystem& sys, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (size_t bi = 0; bi < sys.backbones.size(); ++bi) {
    save_checkpoint(backbone_checkpoint_path(dir, sys.def.backbone_defs[bi].name),
                    sys.backbones[bi].named_tensors());
  }
  for (size_t mi = 0; mi < sys.contexts.size(); ++mi) {
    save_checkpoint(context_checkpoint_path(dir, sys.def.roster[mi].model_id),
                    sys.contexts[mi].named_tensors());
  }
}

TrainedSystem load_system(const RunConfig& cfg, const std::string& dir) {
  TrainedSystem sys = build_system(cfg, cfg.seed);
  // A missing file means the roster drifted from what was trained
  // (ValidationError naming the model); a present-but-corrupt file stays an
  // I/O failure.
  auto load_one = [&](const std::string& kind, const std::string& name, const std::string& path,
                      const NamedTensors& dest) {
    if (!std::filesystem::exists(path)) {
      throw ValidationError("missing checkpoint for " + kind + " " + name + " at " + path);
    }
    try {
      load_into(path, dest);
    } catch (const ValidationError& e) {
      throw ValidationError("checkpoint mismatch for " + kind + " " + name + ": " + e.what());
    }
  };
  for (size_t bi = 0; bi < sys.backbones.size(); ++bi) {
    const std::string& name = sys.def.backbone_defs[bi].name;
    load_one("backbone", name, backbone_checkpoint_path(dir, name),
             sys.backbones[bi].named_tensors());
  }
  for (size_t mi = 0; mi < sys.contexts.size(); ++mi) {
    const std::string& id = sys.def.roster[mi].model_id;
    load_one("model", id, context_checkpoint_path(dir, id), sys.contexts[mi].named_tensors());
  }
  return sys;
}

ImageEval evaluate_one(const TrainedSystem& sys, const Image& original,
                       const std::string& image_id, int true_label, std::uint64_t run_seed) {
  ImageEval ev;
  ev.image_id = image_id;
  ev.true_label = true_label;

  const UncertaintyReduction reduction =
      parse_uncertainty_reduction(sys.def.cfg.uncertainty_reduction);

  // Feature maps once per backbone, shared by that backbone's models.
  std::vector<std::vector<TensorPtr>> maps(sys.backbones.size());
  std::vector<bool> maps_ready(sys.backbones.size(), false);

  bool any_placed = false;
  for (size_t mi = 0; mi < sys.contexts.size(); ++mi) {
    const auto& entry = sys.def.roster[mi];
    const auto& placements = sys.placements[mi];
    PassSummary summary;
    summary.model_id = entry.model_id;
    if (placements.empty()) {
      summary.z = 0;
      summary.scalar_uncertainty = std::numeric_limits<double>::infinity();
    } else {
      const size_t bi = sys.backbone_index(entry.backbone_name);
      if (!maps_ready[bi]) {
        const int scale = sys.def.backbone_defs[bi].scale_id;
        const Image scaled = resize_bilinear(original, sys.def.scale_width(scale),
                                             sys.def.scale_height(scale));
        auto patches = extract_patches(scaled, sys.def.cfg.patch_width,
                                       sys.def.cfg.patch_height, sys.def.context_stride(scale));
        maps[bi] = sys.backbones[bi].extract_feature_maps(patches);
        maps_ready[bi] = true;
      }
      const TensorPtr stacked = build_context_input(maps[bi], placements);
      Rng mc_rng(derive_seed(run_seed, "mc:" + entry.model_id + ":" + image_id));
      const auto passes = sys.contexts[mi].mc_predict(stacked, sys.def.cfg.mc_passes, mc_rng);
      try {
        summary = summarize_passes(passes, reduction);
      } catch (const ValidationError& e) {
        throw ValidationError("image " + image_id + ", model " + entry.model_id + ": " +
                              e.what());
      }
      summary.model_id = entry.model_id;
      any_placed = true;
    }
    ev.summaries.push_back(std::move(summary));
  }
  if (!any_placed) {
    throw NoContextError("no context model has a valid placement for image " + image_id);
  }
  return ev;
}

std::vector<ImageEval> evaluate_set(const TrainedSystem& sys, const std::vector<Image>& originals,
                                    const std::vector<std::string>& ids,
                                    const std::vector<int>& labels, std::uint64_t run_seed,
                                    int threads, std::ostream* progress) {
  if (originals.size() != ids.size() || originals.size() != labels.size()) {
    throw ValidationError("evaluate_set: images/ids/labels count mismatch");
  }
  std::vector<ImageEval> out(originals.size());
  if (threads < 1) throw ValidationError("evaluate_set: threads must be at least 1");

  if (threads == 1 || originals.size() < 2) {
    for (size_t i = 0; i < originals.size(); ++i) {
      out[i] = evaluate_one(sys, originals[i], ids[i], labels[i], run_seed);
      if (progress && (i + 1) % 20 == 0) {
        *progress << "evaluated " << (i + 1) << "/" << originals.size() << " images\n"
                  << std::flush;
      }
    }
    return out;
  }

  // Per-image seeds derive from image ids, so the partition cannot change
  // results; slots are disjoint. First error wins deterministically by index.
  const size_t n = originals.size();
  const size_t workers = std::min<size_t>(static_cast<size_t>(threads), n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (size_t i = w; i < n; i += workers) {
        try {
          out[i] = evaluate_one(sys, originals[i], ids[i], labels[i], run_seed);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
  return out;
}

EnsembleDecision decide_eval(const ImageEval& ev, double delta) {
  return decide(ev.image_id, ev.true_label, ev.summaries, delta);
}

int patch_majority_predict(const TrainedSystem& sys, const Image& original) {
  std::vector<size_t> voters;
  for (size_t bi = 0; bi < sys.backbones.size(); ++bi) {
    if (sys.def.backbone_defs[bi].scale_id == 1) voters.push_back(bi);
  }
  if (voters.empty()) {  // unusual rosters: fall back to every backbone
    for (size_t bi = 0; bi < sys.backbones.size(); ++bi) voters.push_back(bi);
  }
  std::vector<std::int64_t> votes(static_cast<size_t>(sys.def.cfg.classes), 0);
  for (size_t bi : voters) {
    const int scale = sys.def.backbone_defs[bi].scale_id;
    const Image scaled = resize_bilinear(original, sys.def.scale_width(scale),
                                         sys.def.scale_height(scale));
    const auto patches = extract_patches(scaled, sys.def.cfg.patch_width,
                                         sys.def.cfg.patch_height,
                                         sys.def.backbone_test_stride(scale));
    for (const auto& p : patches) {
      const auto probs = sys.backbones[bi].predict_patch(p.pixels);
      size_t best = 0;
      for (size_t c = 1; c < probs.size(); ++c) {
        if (probs[c] > probs[best]) best = c;
      }
      ++votes[best];
    }
  }
  size_t best = 0;
  for (size_t c = 1; c < votes.size(); ++c) {
    if (votes[c] > votes[best]) best = c;
  }
  return static_cast<int>(best);
}

void write_loss_csv(const std::string& path, const std::vector<LossLogEntry>& entries) {
  auto out = open_out(path);
  out << "epoch,batch,loss\n";
  for (const auto& e : entries) {
    out << e.epoch << "," << e.batch << "," << fmt_double(e.loss) << "\n";
  }
}

void write_decisions_csv(const std::string& path, const std::vector<ImageEval>& evals,
                         const std::vector<std::string>& model_ids, double delta) {
  auto out = open_out(path);
  out << "image_id,true_label";
  for (const auto& id : model_ids) out << ",sigma_" << id;
  out << ",delta,selected_count,predicted\n";
  for (const auto& ev : evals) {
    if (ev.summaries.size() != model_ids.size()) {
      throw ValidationError("write_decisions_csv: summary count mismatch for " + ev.image_id);
    }
    const EnsembleDecision d = decide_eval(ev, delta);
    out << ev.image_id << "," << ev.true_label;
    for (const auto& s : ev.summaries) {
      out << ",";
      if (s.z == 0) out << "na";
      else out << fmt_double(s.scalar_uncertainty);
    }
    out << "," << format_delta_value(delta) << "," << d.selected.size() << ",";
    if (d.outcome) out << d.outcome->label;
    else out << "ABSTAIN";
    out << "\n";
  }
}

std::vector<SweepRow> compute_sweep(const std::vector<ImageEval>& evals,
                                    const std::vector<double>& grid) {
  if (evals.empty()) throw ValidationError("compute_sweep: no evaluations");
  std::vector<SweepRow> rows;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<bool> static_correct(evals.size());
  for (size_t i = 0; i < evals.size(); ++i) {
    const auto d = decide_eval(evals[i], inf);
    static_correct[i] = d.outcome && d.outcome->label == evals[i].true_label;
  }

  for (double delta : grid) {
    SweepRow row;
    row.delta = delta;
    std::int64_t inc_correct = 0, exc_static_correct = 0;
    for (size_t i = 0; i < evals.size(); ++i) {
      const auto d = decide_eval(evals[i], delta);
      if (d.outcome) {
        ++row.included;
        if (d.outcome->label == evals[i].true_label) ++inc_correct;
      } else {
        ++row.excluded;
        if (static_correct[i]) ++exc_static_correct;
      }
    }
    if (row.included > 0) {
      row.included_acc = static_cast<double>(inc_correct) / static_cast<double>(row.included);
    }
    if (row.excluded > 0) {
      row.excluded_static_acc =
          static_cast<double>(exc_static_correct) / static_cast<double>(row.excluded);
    }
    row.abs_pct = abstain_percent(row.excluded, static_cast<std::int64_t>(evals.size()));
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  auto out = open_out(path);
  out << "delta,included,excluded,wa_acc,no_coverage,abs_pct,"
         "excluded_static_acc,excluded_static_acc_plot,excluded_no_coverage\n";
  for (const auto& r : rows) {
    out << format_delta_value(r.delta) << "," << r.included << "," << r.excluded << ",";
    if (r.included_acc) out << fmt_double(*r.included_acc) << ",0,";
    else out << "na,1,";
    out << fmt_double(r.abs_pct) << ",";
    // The plot column pins no-exclusions to literal 0 so the curve is total;
    // the value column keeps the honest "na".
    if (r.excluded_static_acc) {
      out << fmt_double(*r.excluded_static_acc) << "," << fmt_double(*r.excluded_static_acc)
          << ",0\n";
    } else {
      out << "na,0,1\n";
    }
  }
}

void write_metrics_csv(const std::string& path, const ConfusionMatrix& cm,
                       const ClassScores& scores, const std::vector<std::string>& class_names) {
  if (static_cast<int>(class_names.size()) != cm.classes) {
    throw ValidationError("write_metrics_csv: class name count mismatch");
  }
  auto out = open_out(path);
  out << "scope,class,precision,recall,f1,accuracy,support\n";
  auto cell = [](bool defined, double v) { return defined ? fmt_double(v) : std::string("na"); };
  std::int64_t total_support = 0;
  for (int c = 0; c < cm.classes; ++c) {
    const size_t ci = static_cast<size_t>(c);
    out << "class," << class_names[ci] << "," << cell(scores.precision_defined[ci], scores.precision[ci])
        << "," << cell(scores.recall_defined[ci], scores.recall[ci]) << ","
        << cell(scores.f1_defined[ci], scores.f1[ci]) << ","
        << cell(scores.recall_defined[ci], scores.class_accuracy[ci]) << ","
        << scores.support[ci] << "\n";
    total_support += scores.support[ci];
  }
  out << "total,all," << cell(scores.macro_precision_defined, scores.macro_precision) << ","
      << cell(scores.macro_recall_defined, scores.macro_recall) << ","
      << cell(scores.macro_f1_defined, scores.macro_f1) << ","
      << fmt_double(scores.overall_accuracy) << "," << total_support << "\n";
}

std::string format_summary_table(const ClassScores& scores,
                                 const std::vector<std::string>& class_names) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-10s %10s %10s %10s %10s %8s\n", "class", "precision",
                "recall", "f1", "accuracy", "support");
  out << buf;
  auto cell = [](bool defined, double v) {
    char b[32];
    if (defined) std::snprintf(b, sizeof(b), "%.4f", v);
    else std::snprintf(b, sizeof(b), "%s", "na");
    return std::string(b);
  };
  std::int64_t total_support = 0;
  for (size_t c = 0; c < class_names.size(); ++c) {
    std::snprintf(buf, sizeof(buf), "%-10s %10s %10s %10s %10s %8lld\n", class_names[c].c_str(),
                  cell(scores.precision_defined[c], scores.precision[c]).c_str(),
                  cell(scores.recall_defined[c], scores.recall[c]).c_str(),
                  cell(scores.f1_defined[c], scores.f1[c]).c_str(),
                  cell(scores.recall_defined[c], scores.class_accuracy[c]).c_str(),
                  static_cast<long long>(scores.support[c]));
    out << buf;
    total_support += scores.support[c];
  }
  std::snprintf(buf, sizeof(buf), "%-10s %10s %10s %10s %10s %8lld\n", "Total",
                cell(scores.macro_precision_defined, scores.macro_precision).c_str(),
                cell(scores.macro_recall_defined, scores.macro_recall).c_str(),
                cell(scores.macro_f1_defined, scores.macro_f1).c_str(),
                cell(true, scores.overall_accuracy).c_str(),
                static_cast<long long>(total_support));
  out << buf;
  return out.str();
}

void write_roc_csv(const std::string& path, const std::vector<std::vector<double>>& scores,
                   const std::vector<int>& labels, int classes) {
  const RocResult res = roc_auc_one_vs_rest(scores, labels, classes);
  auto out = open_out(path);
  out << "class,fpr,tpr,auc\n";
  for (int c = 0; c < classes; ++c) {
    if (!res.defined[static_cast<size_t>(c)]) continue;
    const RocCurve curve = roc_curve_for_class(scores, labels, c);
    for (size_t i = 0; i < curve.fpr.size(); ++i) {
      out << c << "," << fmt_double(curve.fpr[i]) << "," << fmt_double(curve.tpr[i]) << ","
          << fmt_double(res.auc[static_cast<size_t>(c)]) << "\n";
    }
  }
}

CvOutcome run_cv(const RunConfig& cfg, const std::vector<Image>& originals,
                 const std::vector<std::string>& ids, const std::vector<int>& labels,
                 std::uint64_t seed, std::ostream* progress) {
  validate_config(cfg);
  if (originals.size() != ids.size() || originals.size() != labels.size()) {
    throw ValidationError("run_cv: images/ids/labels count mismatch");
  }
  const auto folds = stratified_kfold(labels, cfg.kfold_k, derive_seed(seed, "kfold"));

  struct FoldEval {
    std::vector<ImageEval> evals;
    std::vector<int> baseline_pred;  // parallel to evals
  };
  std::vector<FoldEval> fold_evals;

  for (size_t f = 0; f < folds.size(); ++f) {
    if (progress) *progress << "fold " << (f + 1) << "/" << folds.size() << "\n" << std::flush;
    std::vector<bool> in_test(originals.size(), false);
    for (size_t idx : folds[f]) in_test[idx] = true;

    std::vector<Image> train_imgs;
    std::vector<int> train_labels;
    for (size_t i = 0; i < originals.size(); ++i) {
      if (!in_test[i]) {
        train_imgs.push_back(originals[i]);
        train_labels.push_back(labels[i]);
      }
    }
    TrainedSystem sys =
        build_system(cfg, derive_seed(seed, "fold-init", static_cast<std::uint64_t>(f)));
    train_all(sys, train_imgs, train_labels,
              derive_seed(seed, "fold-train", static_cast<std::uint64_t>(f)), nullptr, nullptr);

    std::vector<Image> test_imgs;
    std::vector<std::string> test_ids;
    std::vector<int> test_labels;
    for (size_t idx : folds[f]) {
      test_imgs.push_back(originals[idx]);
      test_ids.push_back(ids[idx]);
      test_labels.push_back(labels[idx]);
    }
    FoldEval fe;
    fe.evals = evaluate_set(sys, test_imgs, test_ids, test_labels,
                            derive_seed(seed, "fold-eval", static_cast<std::uint64_t>(f)),
                            cfg.threads, nullptr);
    fe.baseline_pred.reserve(test_imgs.size());
    for (const auto& img : test_imgs) fe.baseline_pred.push_back(patch_majority_predict(sys, img));
    fold_evals.push_back(std::move(fe));
  }

  CvOutcome out;
  const double inf = std::numeric_limits<double>::infinity();
  std::int64_t d_all = 0;
  for (const auto& fe : fold_evals) d_all += static_cast<std::int64_t>(fe.evals.size());

  // Per-delta weighted average of fold accuracies (weights = included counts).
  for (double delta : cfg.delta_grid) {
    CvDeltaRow row;
    row.delta = delta;
    std::vector<std::pair<std::int64_t, std::int64_t>> fold_counts;
    for (const auto& fe : fold_evals) {
      std::int64_t inc = 0, correct = 0;
      for (const auto& ev : fe.evals) {
        const auto d = decide_eval(ev, delta);
        if (d.outcome) {
          ++inc;
          if (d.outcome->label == ev.true_label) ++correct;
        }
      }
      row.included += inc;
      row.excluded += static_cast<std::int64_t>(fe.evals.size()) - inc;
      fold_counts.emplace_back(correct, inc);
    }
    row.wa_acc = weighted_fold_accuracy(fold_counts);
    row.abs_pct = abstain_percent(row.excluded, d_all);
    out.per_delta.push_back(row);
  }

  std::int64_t static_correct = 0;
  for (const auto& fe : fold_evals) {
    for (const auto& ev : fe.evals) {
      const auto d = decide_eval(ev, inf);
      if (d.outcome && d.outcome->label == ev.true_label) ++static_correct;
    }
  }
  out.static_accuracy = static_cast<double>(static_correct) / static_cast<double>(d_all);

  for (const auto& row : out.per_delta) {
    if (row.wa_acc && (!out.best_wa_acc || *row.wa_acc > *out.best_wa_acc)) {
      out.best_wa_acc = row.wa_acc;
      out.best_delta = row.delta;
    }
  }

  // Layout-pair readings (classes 2 and 3 carry identical per-patch marginal
  // statistics; only the arrangement differs).
  std::int64_t base_correct = 0, pair_total = 0;
  std::int64_t pipe_inc = 0, pipe_correct = 0, stat_correct = 0;
  for (const auto& fe : fold_evals) {
    for (size_t i = 0; i < fe.evals.size(); ++i) {
      const auto& ev = fe.evals[i];
      if (ev.true_label != 2 && ev.true_label != 3) continue;
      ++pair_total;
      if (fe.baseline_pred[i] == ev.true_label) ++base_correct;
      const auto ds = decide_eval(ev, inf);
      if (ds.outcome && ds.outcome->label == ev.true_label) ++stat_correct;
      if (out.best_wa_acc) {
        const auto dd = decide_eval(ev, out.best_delta);
        if (dd.outcome) {
          ++pipe_inc;
          if (dd.outcome->label == ev.true_label) ++pipe_correct;
        }
      }
    }
  }
  out.pair_total = pair_total;
  if (pair_total > 0) {
    out.pair_baseline_acc = static_cast<double>(base_correct) / static_cast<double>(pair_total);
    out.pair_static_acc = static_cast<double>(stat_correct) / static_cast<double>(pair_total);
  }
  out.pair_included = pipe_inc;
  if (pipe_inc > 0) {
    out.pair_pipeline_acc = static_cast<double>(pipe_correct) / static_cast<double>(pipe_inc);
  }
  return out;
}

std::vector<Image> load_manifest_images(const DatasetManifest& manifest) {
  std::vector<Image> out;
  out.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    out.push_back(load_image(manifest.root + "/" + rec.path));
  }
  return out;
}

}  // namespace mcua
