#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcua/errors.hpp"

namespace mcua {

// Every knob of a run. Two named profiles seed the defaults: "desk" is sized
// for commodity single-core hardware, "paper" mirrors the full-size setup.
struct RunConfig {
  std::string profile = "desk";
  std::uint64_t seed = 1;
  int classes = 4;

  int scale1_width = 64, scale1_height = 48;
  int scale2_width = 42, scale2_height = 40;
  int patch_width = 32, patch_height = 32;

  int context_stride_scale1 = 16, context_stride_scale2 = 4;
  int backbone_train_stride_scale1 = 16, backbone_train_stride_scale2 = 4;
  int backbone_test_stride_scale1 = 8, backbone_test_stride_scale2 = 4;

  int backbone_epochs = 3, context_epochs = 6;
  double backbone_lr = 1e-3, context_lr = 1e-3;
  int backbone_batch = 32, context_batch = 8;

  double dropout_rate = 0.7;
  int mc_passes = 10;
  std::vector<double> delta_grid = {0.001, 0.002, 0.003, 0.006, 0.01, 0.02,
                                    0.05,  0.1,   0.25,  0.5,   1.0,  1.75};
  bool augment = false;
  std::string uncertainty_reduction = "argmax";

  // Empty = built-in seven-pattern library / the full default roster.
  std::string pattern_library;
  std::string roster;  // comma-separated model ids

  int n_per_class = 100;
  int kfold_k = 5;
  int threads = 1;  // evaluation parallelism; results are independent of it
};

RunConfig default_config(const std::string& profile);

// Sets one key from its text form; unknown keys and unparsable values are
// ValidationErrors that name the key.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

// "key = value" per line, '#' comments, blank lines ignored. `origin` labels
// error messages (e.g. a file path).
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);

RunConfig load_config_file(const std::string& path, const RunConfig& base);

// Canonical text form: parsing it back reproduces the config exactly. This is
// what run records embed so a finished run can be replayed.
std::string config_to_text(const RunConfig& cfg);

// Range and consistency checks (positive dims, dropout in [0,1), patch fits
// both scales, mc_passes >= 2, ...). Throws ValidationError.
void validate_config(const RunConfig& cfg);

std::vector<double> parse_delta_list(const std::string& text);
std::string format_delta_list(const std::vector<double>& deltas);

// "inf" (any case) selects the everyone-qualifies static ensemble.
double parse_delta_value(const std::string& text);
std::string format_delta_value(double delta);

}  // namespace mcua
