#include "mcua/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mcua/csv.hpp"

namespace mcua {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [p, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || p != last) {
    throw ValidationError("config key '" + key + "': expected integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [p, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || p != last) {
    throw ValidationError("config key '" + key + "': expected unsigned integer, got '" + value +
                          "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [p, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || p != last) {
    throw ValidationError("config key '" + key + "': expected number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ValidationError("config key '" + key + "': expected boolean, got '" + value + "'");
}

}  // namespace

RunConfig default_config(const std::string& profile) {
  RunConfig cfg;  // struct initializers are the desk profile
  if (profile == "desk") return cfg;
  if (profile == "paper") {
    cfg.profile = "paper";
    cfg.scale1_width = 448;
    cfg.scale1_height = 336;
    cfg.scale2_width = 296;
    cfg.scale2_height = 224;
    cfg.patch_width = 224;
    cfg.patch_height = 224;
    cfg.context_stride_scale1 = 112;
    cfg.context_stride_scale2 = 9;
    cfg.backbone_train_stride_scale1 = 28;
    cfg.backbone_train_stride_scale2 = 9;
    cfg.backbone_test_stride_scale1 = 56;
    cfg.backbone_test_stride_scale2 = 18;
    cfg.backbone_epochs = 5;
    cfg.context_epochs = 10;
    cfg.backbone_lr = 1e-4;
    cfg.context_lr = 1e-4;
    cfg.mc_passes = 50;
    cfg.augment = true;
    return cfg;
  }
  throw ValidationError("unknown profile '" + profile + "' (expected desk or paper)");
}

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "profile") {
    RunConfig fresh = default_config(value);
    cfg = fresh;
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "classes") {
    cfg.classes = parse_int(key, value);
  } else if (key == "scale1_width") {
    cfg.scale1_width = parse_int(key, value);
  } else if (key == "scale1_height") {
    cfg.scale1_height = parse_int(key, value);
  } else if (key == "scale2_width") {
    cfg.scale2_width = parse_int(key, value);
  } else if (key == "scale2_height") {
    cfg.scale2_height = parse_int(key, value);
  } else if (key == "patch_width") {
    cfg.patch_width = parse_int(key, value);
  } else if (key == "patch_height") {
    cfg.patch_height = parse_int(key, value);
  } else if (key == "context_stride_scale1") {
    cfg.context_stride_scale1 = parse_int(key, value);
  } else if (key == "context_stride_scale2") {
    cfg.context_stride_scale2 = parse_int(key, value);
  } else if (key == "backbone_train_stride_scale1") {
    cfg.backbone_train_stride_scale1 = parse_int(key, value);
  } else if (key == "backbone_train_stride_scale2") {
    cfg.backbone_train_stride_scale2 = parse_int(key, value);
  } else if (key == "backbone_test_stride_scale1") {
    cfg.backbone_test_stride_scale1 = parse_int(key, value);
  } else if (key == "backbone_test_stride_scale2") {
    cfg.backbone_test_stride_scale2 = parse_int(key, value);
  } else if (key == "backbone_epochs") {
    cfg.backbone_epochs = parse_int(key, value);
  } else if (key == "context_epochs") {
    cfg.context_epochs = parse_int(key, value);
  } else if (key == "backbone_lr") {
    cfg.backbone_lr = parse_double(key, value);
  } else if (key == "context_lr") {
    cfg.context_lr = parse_double(key, value);
  } else if (key == "backbone_batch") {
    cfg.backbone_batch = parse_int(key, value);
  } else if (key == "context_batch") {
    cfg.context_batch = parse_int(key, value);
  } else if (key == "dropout_rate") {
    cfg.dropout_rate = parse_double(key, value);
  } else if (key == "mc_passes") {
    cfg.mc_passes = parse_int(key, value);
  } else if (key == "delta_grid") {
    cfg.delta_grid = parse_delta_list(value);
  } else if (key == "augment") {
    cfg.augment = parse_bool(key, value);
  } else if (key == "uncertainty_reduction") {
    if (value != "argmax" && value != "max" && value != "mean") {
      throw ValidationError("config key 'uncertainty_reduction': expected argmax, max, or mean");
    }
    cfg.uncertainty_reduction = value;
  } else if (key == "pattern_library") {
    cfg.pattern_library = value;
  } else if (key == "roster") {
    cfg.roster = value;
  } else if (key == "n_per_class") {
    cfg.n_per_class = parse_int(key, value);
  } else if (key == "kfold_k") {
    cfg.kfold_k = parse_int(key, value);
  } else if (key == "threads") {
    cfg.threads = parse_int(key, value);
  } else {
    throw ValidationError("unknown config key '" + key + "'");
  }
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(origin + ":" + std::to_string(line_no) +
                            ": expected 'key = value', got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ValidationError(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    try {
      set_config_key(cfg, key, value);
    } catch (const ValidationError& e) {
      throw ValidationError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

RunConfig load_config_file(const std::string& path, const RunConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig cfg = base;
  apply_config_text(cfg, buf.str(), path);
  return cfg;
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream out;
  out << "profile = " << cfg.profile << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "classes = " << cfg.classes << "\n";
  out << "scale1_width = " << cfg.scale1_width << "\n";
  out << "scale1_height = " << cfg.scale1_height << "\n";
  out << "scale2_width = " << cfg.scale2_width << "\n";
  out << "scale2_height = " << cfg.scale2_height << "\n";
  out << "patch_width = " << cfg.patch_width << "\n";
  out << "patch_height = " << cfg.patch_height << "\n";
  out << "context_stride_scale1 = " << cfg.context_stride_scale1 << "\n";
  out << "context_stride_scale2 = " << cfg.context_stride_scale2 << "\n";
  out << "backbone_train_stride_scale1 = " << cfg.backbone_train_stride_scale1 << "\n";
  out << "backbone_train_stride_scale2 = " << cfg.backbone_train_stride_scale2 << "\n";
  out << "backbone_test_stride_scale1 = " << cfg.backbone_test_stride_scale1 << "\n";
  out << "backbone_test_stride_scale2 = " << cfg.backbone_test_stride_scale2 << "\n";
  out << "backbone_epochs = " << cfg.backbone_epochs << "\n";
  out << "context_epochs = " << cfg.context_epochs << "\n";
  out << "backbone_lr = " << fmt_double(cfg.backbone_lr) << "\n";
  out << "context_lr = " << fmt_double(cfg.context_lr) << "\n";
  out << "backbone_batch = " << cfg.backbone_batch << "\n";
  out << "context_batch = " << cfg.context_batch << "\n";
  out << "dropout_rate = " << fmt_double(cfg.dropout_rate) << "\n";
  out << "mc_passes = " << cfg.mc_passes << "\n";
  out << "delta_grid = " << format_delta_list(cfg.delta_grid) << "\n";
  out << "augment = " << (cfg.augment ? "true" : "false") << "\n";
  out << "uncertainty_reduction = " << cfg.uncertainty_reduction << "\n";
  out << "pattern_library = " << cfg.pattern_library << "\n";
  out << "roster = " << cfg.roster << "\n";
  out << "n_per_class = " << cfg.n_per_class << "\n";
  out << "kfold_k = " << cfg.kfold_k << "\n";
  out << "threads = " << cfg.threads << "\n";
  return out.str();
}

void validate_config(const RunConfig& cfg) {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ValidationError(std::string("config: ") + name + " must be positive");
  };
  positive(cfg.classes, "classes");
  if (cfg.classes < 2) throw ValidationError("config: classes must be at least 2");
  positive(cfg.scale1_width, "scale1_width");
  positive(cfg.scale1_height, "scale1_height");
  positive(cfg.scale2_width, "scale2_width");
  positive(cfg.scale2_height, "scale2_height");
  positive(cfg.patch_width, "patch_width");
  positive(cfg.patch_height, "patch_height");
  positive(cfg.context_stride_scale1, "context_stride_scale1");
  positive(cfg.context_stride_scale2, "context_stride_scale2");
  positive(cfg.backbone_train_stride_scale1, "backbone_train_stride_scale1");
  positive(cfg.backbone_train_stride_scale2, "backbone_train_stride_scale2");
  positive(cfg.backbone_test_stride_scale1, "backbone_test_stride_scale1");
  positive(cfg.backbone_test_stride_scale2, "backbone_test_stride_scale2");
  positive(cfg.backbone_epochs, "backbone_epochs");
  positive(cfg.context_epochs, "context_epochs");
  positive(cfg.backbone_batch, "backbone_batch");
  positive(cfg.context_batch, "context_batch");
  positive(cfg.n_per_class, "n_per_class");
  if (cfg.patch_width > cfg.scale1_width || cfg.patch_height > cfg.scale1_height ||
      cfg.patch_width > cfg.scale2_width || cfg.patch_height > cfg.scale2_height) {
    throw ValidationError("config: patch must fit inside both image scales");
  }
  if (!(cfg.backbone_lr > 0.0) || !(cfg.context_lr > 0.0)) {
    throw ValidationError("config: learning rates must be positive");
  }
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0) {
    throw ValidationError("config: dropout_rate must be in [0, 1)");
  }
  if (cfg.mc_passes < 2) throw ValidationError("config: mc_passes must be at least 2");
  if (cfg.delta_grid.empty()) throw ValidationError("config: delta_grid must be non-empty");
  for (double d : cfg.delta_grid) {
    if (!(d > 0.0)) throw ValidationError("config: delta_grid entries must be positive");
  }
  for (size_t i = 1; i < cfg.delta_grid.size(); ++i) {
    if (cfg.delta_grid[i] <= cfg.delta_grid[i - 1]) {
      throw ValidationError("config: delta_grid must be strictly increasing");
    }
  }
  if (cfg.kfold_k < 2) throw ValidationError("config: kfold_k must be at least 2");
  if (cfg.threads < 1) throw ValidationError("config: threads must be at least 1");
  if (cfg.uncertainty_reduction != "argmax" && cfg.uncertainty_reduction != "max" &&
      cfg.uncertainty_reduction != "mean") {
    throw ValidationError("config: uncertainty_reduction must be argmax, max, or mean");
  }
}

std::vector<double> parse_delta_list(const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) throw ValidationError("delta list: empty entry");
    out.push_back(parse_delta_value(t));
  }
  if (out.empty()) throw ValidationError("delta list: no entries");
  return out;
}

std::string format_delta_list(const std::vector<double>& deltas) {
  std::string out;
  for (size_t i = 0; i < deltas.size(); ++i) {
    if (i) out += ",";
    out += format_delta_value(deltas[i]);
  }
  return out;
}

double parse_delta_value(const std::string& text) {
  std::string lower;
  for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "inf" || lower == "infinity") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [p, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || p != last) {
    throw ValidationError("bad delta value '" + text + "'");
  }
  if (!(out > 0.0)) throw ValidationError("delta must be positive, got '" + text + "'");
  return out;
}

std::string format_delta_value(double delta) {
  if (std::isinf(delta)) return "inf";
  return fmt_double(delta);
}

}  // namespace mcua
