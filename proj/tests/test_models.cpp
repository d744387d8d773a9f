#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "mcua/backbone.hpp"
#include "mcua/config.hpp"
#include "mcua/context.hpp"
#include "mcua/nn.hpp"
#include "mcua/patterns.hpp"
#include "mcua/pipeline.hpp"
#include "mcua/rng.hpp"

using namespace mcua;

namespace {

Patch random_patch(int w, int h, uint64_t seed, int grid_index = 0) {
  Patch p;
  p.pixels = make_image(w, h);
  Rng rng(seed);
  for (auto& v : p.pixels.pixels) v = rng.uniform();
  p.grid_index = grid_index;
  p.augmentation = "none";
  return p;
}

int argmax_of(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::string temp_dir(const char* name) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mcua_tests" / "models" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

// Feature map with every value near `level`, a touch of per-sample noise.
TensorPtr level_map(int c_f, int h, int w, double level, Rng& rng) {
  auto t = Tensor::create({c_f, h, w});
  for (auto& v : t->data) v = level + rng.uniform(-0.05, 0.05);
  return t;
}

}  // namespace

TEST_CASE("an untrained backbone predicts the uniform distribution exactly") {
  auto bb = Backbone::build("arch-A", "T", 1, 32, 32, 4, 11);
  auto patch = random_patch(32, 32, 5);
  auto probs = bb.predict_patch(patch.pixels);
  REQUIRE(probs.size() == 4);
  for (double p : probs) CHECK(p == 0.25);  // zero-initialized head, no approximation
}

TEST_CASE("feature map geometry per architecture") {
  SUBCASE("arch-A maps 32x32 to 8 channels of 11x11") {
    auto bb = Backbone::build("arch-A", "A1", 1, 32, 32, 4, 3);
    CHECK(bb.feature_channels() == 8);
    CHECK(bb.feature_h() == 11);
    CHECK(bb.feature_w() == 11);
    std::vector<Patch> patches;
    for (int i = 0; i < 6; ++i) patches.push_back(random_patch(32, 32, 100 + i, i));
    auto maps = bb.extract_feature_maps(patches);
    REQUIRE(maps.size() == 6);
    for (const auto& m : maps) CHECK(m->shape == std::vector<int>{8, 11, 11});
  }
  SUBCASE("arch-B maps 32x32 to 8 channels of 10x10") {
    auto bb = Backbone::build("arch-B", "B1", 1, 32, 32, 4, 3);
    CHECK(bb.feature_channels() == 8);
    CHECK(bb.feature_h() == 10);
    CHECK(bb.feature_w() == 10);
    auto maps = bb.extract_feature_maps({random_patch(32, 32, 9)});
    REQUIRE(maps.size() == 1);
    CHECK(maps[0]->shape == std::vector<int>{8, 10, 10});
  }
  SUBCASE("the two architectures are structurally different") {
    auto a = Backbone::build("arch-A", "A", 1, 32, 32, 4, 3);
    auto b = Backbone::build("arch-B", "B", 1, 32, 32, 4, 3);
    CHECK(a.named_tensors().size() != b.named_tensors().size());
  }
  SUBCASE("unknown architecture id is rejected") {
    CHECK_THROWS_AS(Backbone::build("arch-C", "C", 1, 32, 32, 4, 3), ValidationError);
  }
}

TEST_CASE("patches_to_tensor lays out NCHW in patch order") {
  auto bb = Backbone::build("arch-A", "T", 1, 32, 32, 4, 1);
  auto p0 = random_patch(32, 32, 1);
  auto p1 = random_patch(32, 32, 2);
  auto x = bb.patches_to_tensor({&p0.pixels, &p1.pixels});
  REQUIRE(x->shape == std::vector<int>{2, 3, 32, 32});
  CHECK(x->data[0] == p0.pixels.at(0, 0, 0));
  // (n=1, c=2, y=3, x=4)
  const size_t idx = ((1u * 3 + 2) * 32 + 3) * 32 + 4;
  CHECK(x->data[idx] == p1.pixels.at(4, 3, 2));
}

TEST_CASE("the first training batch of a fresh backbone costs exactly log(classes)") {
  auto bb = Backbone::build("arch-A", "T", 1, 32, 32, 4, 21);
  std::vector<Patch> patches;
  std::vector<int> labels;
  for (int i = 0; i < 8; ++i) {
    patches.push_back(random_patch(32, 32, 300 + i, 0));
    labels.push_back(i % 4);
  }
  std::vector<LossLogEntry> log;
  bb.fine_tune(patches, labels, 2, 1e-3, 4, 7, &log);
  REQUIRE_FALSE(log.empty());
  CHECK(log[0].epoch == 0);
  CHECK(log[0].batch == 0);
  CHECK(log[0].loss == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  // epochs * ceil(n / batch) entries
  CHECK(log.size() == 2u * 2u);
}

TEST_CASE("a backbone memorizes a small labeled patch set") {
  auto bb = Backbone::build("arch-A", "T", 1, 32, 32, 4, 33);
  std::vector<Patch> patches;
  std::vector<int> labels;
  for (int i = 0; i < 16; ++i) {
    patches.push_back(random_patch(32, 32, 1000 + i, 0));
    labels.push_back(i % 4);
  }
  std::vector<LossLogEntry> log;
  bb.fine_tune(patches, labels, 30, 1e-3, 8, 5, &log);

  int correct = 0;
  for (int i = 0; i < 16; ++i)
    if (argmax_of(bb.predict_patch(patches[static_cast<size_t>(i)].pixels)) ==
        labels[static_cast<size_t>(i)])
      ++correct;
  CHECK(correct == 16);

  // Loss history length and a large net loss reduction.
  REQUIRE(log.size() == 30u * 2u);
  CHECK(log.back().loss < 0.2 * log.front().loss);
}

TEST_CASE("training with zero learning rate moves nothing") {
  auto bb = Backbone::build("arch-B", "T", 1, 32, 32, 4, 8);
  auto before = bb.trainable_params();
  std::vector<std::vector<double>> snapshot;
  for (const auto& p : before) snapshot.push_back(p->data);

  std::vector<Patch> patches;
  std::vector<int> labels;
  for (int i = 0; i < 8; ++i) {
    patches.push_back(random_patch(32, 32, 50 + i, 0));
    labels.push_back(i % 4);
  }
  bb.fine_tune(patches, labels, 2, 0.0, 4, 7, nullptr);

  auto after = bb.trainable_params();
  REQUIRE(after.size() == snapshot.size());
  for (size_t i = 0; i < after.size(); ++i) CHECK(after[i]->data == snapshot[i]);
}

TEST_CASE("seeded backbone training is bit-identical across runs") {
  std::vector<Patch> patches;
  std::vector<int> labels;
  for (int i = 0; i < 12; ++i) {
    patches.push_back(random_patch(32, 32, 70 + i, 0));
    labels.push_back(i % 4);
  }
  auto run = [&] {
    auto bb = Backbone::build("arch-A", "T", 1, 32, 32, 4, 44);
    bb.fine_tune(patches, labels, 3, 1e-3, 4, 99, nullptr);
    std::vector<std::vector<double>> out;
    for (const auto& [name, t] : bb.named_tensors()) out.push_back(t->data);
    return out;
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("context model parameter count matches the hand tally") {
  const auto lib = default_pattern_library();
  auto m = ContextModel::build("A1_P2_S1", "A1", 1, find_pattern(lib, "P2_S1"), 8, 11, 11, 4,
                               0.7, 1);
  // Trunk: 32@(16,3x3), 32@(32,2x2), 64@(32,3x3), 64@(64,2x2), 64@(64,1x1),
  // each with batchnorm gamma/beta; head 64->32->16->4 with biases.
  const int64_t block1 = 32 * 16 * 9 + 32 + 64;
  const int64_t block2 = 32 * 32 * 4 + 32 + 64;
  const int64_t block3 = 64 * 32 * 9 + 64 + 128;
  const int64_t block4 = 64 * 64 * 4 + 64 + 128;
  const int64_t block5 = 64 * 64 * 1 + 64 + 128;
  const int64_t head = (32 * 64 + 32) + (16 * 32 + 16) + (4 * 16 + 4);
  CHECK(m.parameter_count() == block1 + block2 + block3 + block4 + block5 + head);
  CHECK(m.parameter_count() == 51060);
}

TEST_CASE("channel concatenation preserves member maps in walk order") {
  Rng rng(12);
  std::vector<TensorPtr> maps;
  for (int i = 0; i < 6; ++i) maps.push_back(level_map(2, 3, 3, 0.1 * i, rng));

  PatternPlacement pl;
  pl.anchor = 2;
  pl.members = {2, 5, 4};
  auto cat = concat_pattern_maps(maps, pl);
  REQUIRE(cat->shape == std::vector<int>{6, 3, 3});
  for (int k = 0; k < 3; ++k) {
    const auto& src = maps[static_cast<size_t>(pl.members[static_cast<size_t>(k)])];
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 9; ++i) {
        const size_t dst_idx = (static_cast<size_t>(k) * 2 + c) * 9 + i;
        REQUIRE(cat->data[dst_idx] == src->data[static_cast<size_t>(c) * 9 + i]);
      }
  }

  SUBCASE("member order changes the tensor") {
    PatternPlacement rev;
    rev.anchor = 4;
    rev.members = {4, 5, 2};
    auto cat_rev = concat_pattern_maps(maps, rev);
    CHECK(cat_rev->data != cat->data);
  }
  SUBCASE("stacking lines placements up on the leading axis") {
    PatternPlacement p2;
    p2.anchor = 0;
    p2.members = {0, 1, 3};
    auto stacked = build_context_input(maps, {pl, p2});
    REQUIRE(stacked->shape == std::vector<int>{2, 6, 3, 3});
    for (int i = 0; i < 6 * 9; ++i)
      REQUIRE(stacked->data[static_cast<size_t>(i)] == cat->data[static_cast<size_t>(i)]);
  }
}

TEST_CASE("pooling averages per-placement probabilities") {
  // Two placements with log probabilities of [0.8,0.2] and [0.4,0.6].
  auto lp = Tensor::from_data(
      {2, 2}, {std::log(0.8), std::log(0.2), std::log(0.4), std::log(0.6)});
  auto pooled = ContextModel::pool_rows(lp);
  REQUIRE(pooled.size() == 2);
  CHECK(pooled[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(pooled[1] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("a context model learns a class defined only by member order") {
  // Two "ink levels" A and B. Class 0 concatenates (A,B), class 1 (B,A):
  // identical member marginals, different joint order.
  const auto lib = default_pattern_library();
  PatternSpec p2 = find_pattern(lib, "P2_S1");
  auto m = ContextModel::build("T_P2", "T", 1, p2, 1, 11, 11, 2, 0.5, 42);

  Rng rng(7);
  std::vector<TensorPtr> inputs;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    const int cls = i % 2;
    auto lo = level_map(1, 11, 11, 0.2, rng);
    auto hi = level_map(1, 11, 11, 0.8, rng);
    PatternPlacement pl;
    pl.anchor = 0;
    pl.members = {0, 1};
    std::vector<TensorPtr> maps =
        cls == 0 ? std::vector<TensorPtr>{lo, hi} : std::vector<TensorPtr>{hi, lo};
    inputs.push_back(build_context_input(maps, {pl}));
    labels.push_back(cls);
  }

  m.train(inputs, labels, 15, 1e-3, 8, 3, nullptr);

  int correct = 0;
  for (size_t i = 0; i < inputs.size(); ++i)
    if (argmax_of(m.predict_image(inputs[i])) == labels[i]) ++correct;
  // Order is the only signal; near-perfect training fit proves sensitivity.
  CHECK(correct >= 38);
}

TEST_CASE("context training is seeded and reproducible") {
  const auto lib = default_pattern_library();
  PatternSpec p2 = find_pattern(lib, "P2_S1");
  Rng rng(15);
  std::vector<TensorPtr> inputs;
  std::vector<int> labels;
  PatternPlacement pl;
  pl.anchor = 0;
  pl.members = {0, 1};
  for (int i = 0; i < 8; ++i) {
    auto a = level_map(1, 11, 11, 0.3, rng);
    auto b = level_map(1, 11, 11, 0.7, rng);
    inputs.push_back(build_context_input({a, b}, {pl}));
    labels.push_back(i % 2);
  }
  auto run = [&] {
    auto m = ContextModel::build("T_P2", "T", 1, p2, 1, 11, 11, 2, 0.5, 9);
    m.train(inputs, labels, 3, 1e-3, 4, 31, nullptr);
    std::vector<std::vector<double>> out;
    for (const auto& [name, t] : m.named_tensors()) out.push_back(t->data);
    return out;
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("stochastic passes reduce to the deterministic pass at dropout zero") {
  const auto lib = default_pattern_library();
  PatternSpec p2 = find_pattern(lib, "P2_S1");
  auto m = ContextModel::build("T_P2", "T", 1, p2, 1, 11, 11, 2, 0.0, 5);
  Rng rng(3);
  PatternPlacement pl;
  pl.anchor = 0;
  pl.members = {0, 1};
  auto input = build_context_input({level_map(1, 11, 11, 0.4, rng),
                                    level_map(1, 11, 11, 0.6, rng)},
                                   {pl});
  auto det = m.predict_image(input);
  Rng mc_rng(77);
  auto passes = m.mc_predict(input, 4, mc_rng);
  REQUIRE(passes.size() == 4);
  for (const auto& p : passes) {
    REQUIRE(p.size() == det.size());
    for (size_t c = 0; c < p.size(); ++c) CHECK(p[c] == det[c]);  // bitwise equal
  }

  SUBCASE("with dropout the passes differ but replay from the same seed") {
    m.set_dropout_rate(0.6);
    Rng r1(123), r2(123), r3(124);
    auto a = m.mc_predict(input, 3, r1);
    auto b = m.mc_predict(input, 3, r2);
    CHECK(a == b);
    auto c = m.mc_predict(input, 3, r3);
    CHECK(a != c);
    // Distinct passes actually vary under an active mask.
    CHECK(a[0] != a[1]);
  }
  SUBCASE("fewer than two passes is rejected") {
    Rng r(1);
    CHECK_THROWS_AS(m.mc_predict(input, 1, r), ValidationError);
  }
}

TEST_CASE("a system round-trips through its checkpoint directory byte for byte") {
  RunConfig cfg = default_config("desk");
  cfg.roster = "A1_P2_S1,A2_P3_S1";
  cfg.n_per_class = 2;
  validate_config(cfg);

  auto sys = build_system(cfg, 77);
  const std::string dir = temp_dir("roundtrip");
  save_system(sys, dir);

  auto loaded = load_system(cfg, dir);
  const std::string dir2 = temp_dir("roundtrip2");
  save_system(loaded, dir2);

  namespace fs = std::filesystem;
  int files = 0;
  for (auto& e : fs::directory_iterator(dir)) {
    ++files;
    const auto name = e.path().filename().string();
    std::ifstream f1(e.path(), std::ios::binary);
    std::ifstream f2(fs::path(dir2) / name, std::ios::binary);
    REQUIRE(f2.good());
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
  }
  CHECK(files == 3 + 2);  // all three backbones plus the two rostered models

  SUBCASE("a missing checkpoint names the absent model") {
    fs::remove(fs::path(dir) / "context_A2_P3_S1.ckpt");
    CHECK_THROWS_WITH_AS(load_system(cfg, dir), doctest::Contains("A2_P3_S1"),
                         ValidationError);
  }
}

TEST_CASE("an image no pattern can cover raises the dedicated error") {
  RunConfig cfg = default_config("desk");
  const std::string dir = temp_dir("nocontext");
  const std::string lib_path = dir + "/lib.txt";
  {
    std::ofstream out(lib_path);
    out << "P7_S1: down,down,down,down,down,down\n";  // needs 7 rows; grids have 2 or 3
  }
  cfg.pattern_library = lib_path;
  validate_config(cfg);

  auto sys = build_system(cfg, 3);
  REQUIRE_FALSE(sys.def.roster.empty());
  for (const auto& pl : sys.placements) CHECK(pl.empty());

  Image img = make_image(64, 48, 0.5);
  CHECK_THROWS_AS(evaluate_one(sys, img, "img0", 0, 1), NoContextError);
}
