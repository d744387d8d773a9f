#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mcua/config.hpp"
#include "mcua/csv.hpp"
#include "mcua/pipeline.hpp"
#include "mcua/svg.hpp"

namespace fs = std::filesystem;
using namespace mcua;

namespace {

// Every config key is also a flag, so runs are scriptable without a file.
const std::vector<std::string> kConfigKeys = {
    "seed", "classes",
    "scale1_width", "scale1_height", "scale2_width", "scale2_height",
    "patch_width", "patch_height",
    "context_stride_scale1", "context_stride_scale2",
    "backbone_train_stride_scale1", "backbone_train_stride_scale2",
    "backbone_test_stride_scale1", "backbone_test_stride_scale2",
    "backbone_epochs", "context_epochs", "backbone_lr", "context_lr",
    "backbone_batch", "context_batch", "dropout_rate", "mc_passes",
    "delta_grid", "augment", "uncertainty_reduction", "pattern_library",
    "roster", "n_per_class", "kfold_k", "threads"};

struct CfgCli {
  std::string profile = "desk";
  std::string config_path;
  std::map<std::string, std::string> raw;
  CLI::App* cmd = nullptr;
};

void add_config_options(CLI::App* cmd, CfgCli& c) {
  c.cmd = cmd;
  cmd->add_option("--profile", c.profile, "hyperparameter profile: desk or paper")
      ->default_val("desk");
  cmd->add_option("--config", c.config_path, "config file with 'key = value' lines");
  for (const auto& key : kConfigKeys) {
    cmd->add_option("--" + key, c.raw[key], "config key " + key);
  }
}

// Profile seeds the defaults, the config file layers on top, explicit flags win.
RunConfig resolve_config(const CfgCli& c) {
  RunConfig cfg = default_config(c.profile);
  if (!c.config_path.empty()) cfg = load_config_file(c.config_path, cfg);
  for (const auto& key : kConfigKeys) {
    if (c.cmd->count("--" + key) > 0) set_config_key(cfg, key, c.raw.at(key));
  }
  validate_config(cfg);
  return cfg;
}

void write_run_record(const std::string& dir, const std::string& command,
                      const std::vector<std::pair<std::string, std::string>>& paths,
                      const RunConfig& cfg) {
  fs::create_directories(dir);
  const std::string path = dir + "/run_record.txt";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write run record: " + path);
  out << "# run record: pass this file back via --config to reproduce the run\n";
  out << "# command = " << command << "\n";
  for (const auto& [k, v] : paths) out << "# " << k << " = " << v << "\n";
  out << config_to_text(cfg);
}

struct LoadedData {
  DatasetManifest manifest;
  std::vector<Image> images;
  std::vector<std::string> ids;
  std::vector<int> labels;
};

LoadedData load_data(const RunConfig& cfg, const std::string& data_dir) {
  LoadedData d;
  d.manifest = load_dataset(data_dir);
  if (static_cast<int>(d.manifest.classes.size()) != cfg.classes) {
    throw ValidationError("dataset has " + std::to_string(d.manifest.classes.size()) +
                          " classes but config expects " + std::to_string(cfg.classes));
  }
  for (const auto& w : d.manifest.warnings) std::cerr << "warning: " << w << "\n";
  d.images = load_manifest_images(d.manifest);
  for (const auto& rec : d.manifest.records) {
    d.ids.push_back(rec.path);
    d.labels.push_back(rec.class_index);
  }
  return d;
}

int cmd_generate(const RunConfig& cfg, const std::string& out_dir) {
  SynthSpec spec;
  spec.width = cfg.scale1_width;
  spec.height = cfg.scale1_height;
  spec.seed = cfg.seed;
  const DatasetManifest manifest = generate_dataset(spec, cfg.n_per_class, out_dir);
  write_run_record(out_dir, "generate", {{"out", out_dir}}, cfg);
  std::cout << "generated " << manifest.records.size() << " images ("
            << manifest.classes.size() << " classes x " << cfg.n_per_class << ") under "
            << out_dir << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& data_dir, const std::string& models_dir) {
  const LoadedData data = load_data(cfg, data_dir);
  fs::create_directories(models_dir);

  TrainedSystem sys = build_system(cfg, cfg.seed);
  bool need_cache = false;
  for (size_t mi = 0; mi < sys.contexts.size(); ++mi) {
    if (!fs::exists(context_checkpoint_path(models_dir, sys.def.roster[mi].model_id))) {
      need_cache = true;
    }
  }

  for (size_t bi = 0; bi < sys.backbones.size(); ++bi) {
    const std::string& name = sys.def.backbone_defs[bi].name;
    const std::string path = backbone_checkpoint_path(models_dir, name);
    if (fs::exists(path)) {
      std::cout << "backbone " << name << ": checkpoint exists, loading " << path << "\n";
      load_into(path, sys.backbones[bi].named_tensors());
      continue;
    }
    std::cout << "training backbone " << name << "\n" << std::flush;
    TrainLogs logs;
    train_backbone(sys, bi, data.images, data.labels, cfg.seed, &logs);
    save_checkpoint(path, sys.backbones[bi].named_tensors());
    write_loss_csv(models_dir + "/loss_backbone_" + name + ".csv", logs.logs.back().second);
  }

  if (need_cache) {
    std::cout << "extracting feature maps\n" << std::flush;
    const FeatureCache cache = compute_feature_cache(sys, data.images);
    for (size_t mi = 0; mi < sys.contexts.size(); ++mi) {
      const std::string& id = sys.def.roster[mi].model_id;
      const std::string path = context_checkpoint_path(models_dir, id);
      if (fs::exists(path)) {
        std::cout << "context model " << id << ": checkpoint exists, skipping\n";
        continue;
      }
      std::cout << "training context model " << id << "\n" << std::flush;
      TrainLogs logs;
      train_context(sys, mi, cache, data.labels, cfg.seed, &logs);
      save_checkpoint(path, sys.contexts[mi].named_tensors());
      if (!logs.logs.empty()) {
        write_loss_csv(models_dir + "/loss_context_" + id + ".csv", logs.logs.back().second);
      }
    }
  } else {
    std::cout << "all context checkpoints exist, skipping\n";
  }

  write_run_record(models_dir, "train", {{"data", data_dir}, {"models", models_dir}}, cfg);
  std::cout << "wrote " << sys.backbones.size() << " backbone and " << sys.contexts.size()
            << " context checkpoints to " << models_dir << "\n";
  return 0;
}

void dump_patches(const TrainedSystem& sys, const LoadedData& data, const std::string& dir) {
  fs::create_directories(dir);
  std::vector<int> scales;
  for (const auto& b : sys.def.backbone_defs) {
    if (std::find(scales.begin(), scales.end(), b.scale_id) == scales.end()) {
      scales.push_back(b.scale_id);
    }
  }
  for (size_t i = 0; i < data.images.size(); ++i) {
    std::string stem = data.ids[i];
    for (auto& ch : stem) {
      if (ch == '/' || ch == '\\') ch = '_';
    }
    if (const auto dot = stem.rfind('.'); dot != std::string::npos) stem = stem.substr(0, dot);
    for (int scale : scales) {
      const Image scaled = resize_bilinear(data.images[i], sys.def.scale_width(scale),
                                           sys.def.scale_height(scale));
      const auto patches = extract_patches(scaled, sys.def.cfg.patch_width,
                                           sys.def.cfg.patch_height,
                                           sys.def.context_stride(scale));
      for (const auto& p : patches) {
        save_ppm(dir + "/" + stem + "_" + std::to_string(scale) + "_" +
                     std::to_string(p.grid_index) + "_" + p.augmentation + ".ppm",
                 p.pixels);
      }
    }
  }
}

int cmd_evaluate(const RunConfig& cfg, const std::string& data_dir, const std::string& models_dir,
                 const std::string& out_dir, bool sweep_mode, bool static_mode,
                 const std::string& delta_text, const std::string& dump_dir) {
  const LoadedData data = load_data(cfg, data_dir);
  const TrainedSystem sys = load_system(cfg, models_dir);
  fs::create_directories(out_dir);
  if (!dump_dir.empty()) dump_patches(sys, data, dump_dir);

  std::vector<std::string> model_ids;
  for (const auto& e : sys.def.roster) model_ids.push_back(e.model_id);

  const auto evals = evaluate_set(sys, data.images, data.ids, data.labels, cfg.seed, cfg.threads,
                                  &std::cout);

  if (sweep_mode) {
    const auto rows = compute_sweep(evals, cfg.delta_grid);
    write_sweep_csv(out_dir + "/sweep.csv", rows);
    const SweepRow* best = nullptr;
    for (const auto& r : rows) {
      if (r.included_acc && (!best || !best->included_acc || *r.included_acc > *best->included_acc)) {
        best = &r;
      }
    }
    std::cout << "sweep over " << rows.size() << " thresholds on " << evals.size()
              << " images -> " << out_dir << "/sweep.csv\n";
    if (best) {
      std::cout << "best threshold " << format_delta_value(best->delta) << ": accuracy "
                << fmt_double(*best->included_acc) << " on " << best->included
                << " included images, abstained " << fmt_double(best->abs_pct) << "%\n";
    } else {
      std::cout << "no threshold in the grid admitted any image\n";
    }
  } else {
    const double delta =
        static_mode ? std::numeric_limits<double>::infinity() : parse_delta_value(delta_text);
    write_decisions_csv(out_dir + "/decisions.csv", evals, model_ids, delta);

    std::vector<int> true_in, pred_in;
    std::vector<std::vector<double>> scores;
    std::int64_t abstained = 0;
    for (const auto& ev : evals) {
      const auto d = decide_eval(ev, delta);
      if (!d.outcome) {
        ++abstained;
        continue;
      }
      true_in.push_back(ev.true_label);
      pred_in.push_back(d.outcome->label);
      scores.push_back(d.outcome->distribution);
    }
    std::cout << "threshold " << format_delta_value(delta) << ": " << true_in.size()
              << " classified, " << abstained << " abstained of " << evals.size() << " ("
              << fmt_double(abstain_percent(abstained, static_cast<std::int64_t>(evals.size())))
              << "%)\n";
    if (!true_in.empty()) {
      const ConfusionMatrix cm = confusion_from_pairs(true_in, pred_in, cfg.classes);
      const ClassScores sc = score_confusion(cm);
      write_metrics_csv(out_dir + "/metrics.csv", cm, sc, data.manifest.classes);
      write_roc_csv(out_dir + "/roc.csv", scores, true_in, cfg.classes);
      std::cout << format_summary_table(sc, data.manifest.classes);
    } else {
      std::cout << "every image abstained; no metrics to report\n";
    }
  }

  write_run_record(out_dir, sweep_mode ? "sweep" : "evaluate",
                   {{"data", data_dir}, {"models", models_dir}, {"out", out_dir}}, cfg);
  return 0;
}

std::vector<std::map<std::string, std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty CSV: " + path);
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
  };
  const auto header = split(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ValidationError("ragged CSV row in " + path);
    }
    std::map<std::string, std::string> row;
    for (size_t i = 0; i < header.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_report(const std::string& in_dir, const std::string& out_dir) {
  fs::create_directories(out_dir);
  int written = 0;

  const std::string sweep_path = in_dir + "/sweep.csv";
  if (fs::exists(sweep_path)) {
    const auto rows = read_csv(sweep_path);
    SvgSeries wa{"included accuracy", {}, {}}, abs{"abstained %", {}, {}},
        exc{"excluded static accuracy", {}, {}};
    for (const auto& r : rows) {
      const double delta = parse_delta_value(r.at("delta"));
      if (r.at("wa_acc") != "na") {
        wa.xs.push_back(delta);
        wa.ys.push_back(std::stod(r.at("wa_acc")));
      }
      abs.xs.push_back(delta);
      abs.ys.push_back(std::stod(r.at("abs_pct")));
      exc.xs.push_back(delta);
      exc.ys.push_back(std::stod(r.at("excluded_static_acc_plot")));
    }
    auto save = [&](const std::string& name, const std::string& svg) {
      std::ofstream out(out_dir + "/" + name, std::ios::binary);
      if (!out) throw IoError("cannot write " + out_dir + "/" + name);
      out << svg;
      ++written;
    };
    if (!wa.xs.empty()) {
      save("sweep_wa_acc.svg", render_line_chart("Included-image accuracy vs threshold",
                                                 "threshold", "accuracy", {wa}, true));
    }
    save("sweep_abstain.svg", render_line_chart("Abstained share vs threshold", "threshold",
                                                "abstained %", {abs}, true));
    save("sweep_excluded.svg",
         render_line_chart("Static-ensemble accuracy on excluded images", "threshold",
                           "accuracy", {exc}, true));
  }

  const std::string roc_path = in_dir + "/roc.csv";
  if (fs::exists(roc_path)) {
    const auto rows = read_csv(roc_path);
    std::map<std::string, SvgSeries> by_class;
    for (const auto& r : rows) {
      auto& s = by_class[r.at("class")];
      if (s.label.empty()) s.label = "class " + r.at("class") + " auc " + r.at("auc");
      s.xs.push_back(std::stod(r.at("fpr")));
      s.ys.push_back(std::stod(r.at("tpr")));
    }
    std::vector<SvgSeries> series;
    for (auto& [k, s] : by_class) series.push_back(std::move(s));
    std::ofstream out(out_dir + "/roc.svg", std::ios::binary);
    if (!out) throw IoError("cannot write " + out_dir + "/roc.svg");
    out << render_line_chart("One-vs-rest ROC", "false positive rate", "true positive rate",
                             series, false);
    ++written;
  }

  if (written == 0) {
    throw ValidationError("nothing to report: no sweep.csv or roc.csv under " + in_dir);
  }
  std::cout << "wrote " << written << " charts to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-scale patch ensemble pipeline: synthetic data, training, "
               "uncertainty-gated evaluation, threshold sweeps, reports"};
  app.require_subcommand(1);

  CfgCli gen_cfg, train_cfg, eval_cfg, sweep_cfg;
  std::string gen_out, train_data, train_models;
  std::string eval_data, eval_models, eval_out, eval_delta, eval_dump;
  bool eval_static = false, eval_sweep = false;
  std::string sweep_data, sweep_models, sweep_out;
  std::string report_in, report_out;

  auto* generate = app.add_subcommand("generate", "write a synthetic labeled dataset");
  add_config_options(generate, gen_cfg);
  generate->add_option("--out", gen_out, "dataset root directory")->required();

  auto* train = app.add_subcommand("train", "train backbones and context models");
  add_config_options(train, train_cfg);
  train->add_option("--data", train_data, "dataset root")->required();
  train->add_option("--models", train_models, "checkpoint output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "classify a dataset with a trained system");
  add_config_options(evaluate, eval_cfg);
  evaluate->add_option("--data", eval_data, "dataset root")->required();
  evaluate->add_option("--models", eval_models, "checkpoint directory")->required();
  evaluate->add_option("--out", eval_out, "artifact output directory")->required();
  auto* delta_opt = evaluate->add_option("--delta", eval_delta, "selection threshold (or inf)");
  auto* static_opt = evaluate->add_flag("--static", eval_static, "use every model (threshold inf)");
  auto* sweep_opt = evaluate->add_flag("--sweep", eval_sweep, "sweep the threshold grid");
  delta_opt->excludes(static_opt)->excludes(sweep_opt);
  static_opt->excludes(sweep_opt);
  evaluate->add_option("--dump-patches", eval_dump, "debug: write every context patch as PPM");

  auto* sweep = app.add_subcommand("sweep", "threshold sweep (same as evaluate --sweep)");
  add_config_options(sweep, sweep_cfg);
  sweep->add_option("--data", sweep_data, "dataset root")->required();
  sweep->add_option("--models", sweep_models, "checkpoint directory")->required();
  sweep->add_option("--out", sweep_out, "artifact output directory")->required();

  auto* report = app.add_subcommand("report", "render CSV artifacts as SVG charts");
  report->add_option("--in", report_in, "directory holding sweep.csv / roc.csv")->required();
  report->add_option("--out", report_out, "chart output directory (default: --in)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(resolve_config(gen_cfg), gen_out);
    if (train->parsed()) return cmd_train(resolve_config(train_cfg), train_data, train_models);
    if (evaluate->parsed()) {
      if (!eval_static && !eval_sweep && eval_delta.empty()) {
        throw ValidationError("evaluate needs one of --delta, --static, --sweep");
      }
      return cmd_evaluate(resolve_config(eval_cfg), eval_data, eval_models, eval_out, eval_sweep,
                          eval_static, eval_delta, eval_dump);
    }
    if (sweep->parsed()) {
      return cmd_evaluate(resolve_config(sweep_cfg), sweep_data, sweep_models, sweep_out, true,
                          false, "", "");
    }
    if (report->parsed()) {
      return cmd_report(report_in, report_out.empty() ? report_in : report_out);
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NoContextError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
