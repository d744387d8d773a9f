#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gradcheck_common.hpp"
#include "mcua/adam.hpp"
#include "mcua/checkpoint.hpp"
#include "mcua/nn.hpp"
#include "mcua/rng.hpp"
#include "mcua/tensor.hpp"

using namespace mcua;

namespace {

TensorPtr iota_tensor(std::vector<int> shape, double start = 1.0) {
  auto t = Tensor::create(std::move(shape));
  double v = start;
  for (auto& x : t->data) x = v++;
  return t;
}

std::string temp_path(const char* name) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mcua_tests" / "numeric";
  fs::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("conv_out_dim matches the closed form") {
  CHECK(conv_out_dim(32, 3, 1, Padding::valid) == 30);
  CHECK(conv_out_dim(32, 2, 2, Padding::valid) == 16);
  CHECK(conv_out_dim(5, 3, 2, Padding::valid) == 2);
  CHECK(conv_out_dim(5, 3, 2, Padding::same) == 3);
  CHECK(conv_out_dim(32, 3, 1, Padding::same) == 32);
  CHECK(conv_out_dim(1, 1, 1, Padding::valid) == 1);
  CHECK_THROWS_AS(conv_out_dim(2, 3, 1, Padding::valid), DimensionError);
  CHECK_THROWS_AS(conv_out_dim(4, 3, 0, Padding::valid), ValidationError);
}

TEST_CASE("conv2d reproduces hand-computed window sums") {
  auto x = iota_tensor({1, 1, 3, 3});  // 1..9 row-major
  auto w = Tensor::from_data({1, 1, 2, 2}, {1, 1, 1, 1});
  auto b = Tensor::from_data({1}, {0});

  SUBCASE("valid stride 1") {
    auto y = conv2d(x, w, b, 1, Padding::valid);
    REQUIRE(y->shape == std::vector<int>{1, 1, 2, 2});
    CHECK(y->data[0] == doctest::Approx(12).epsilon(1e-12));
    CHECK(y->data[1] == doctest::Approx(16).epsilon(1e-12));
    CHECK(y->data[2] == doctest::Approx(24).epsilon(1e-12));
    CHECK(y->data[3] == doctest::Approx(28).epsilon(1e-12));
  }
  SUBCASE("same stride 2 pads the trailing edge") {
    auto y = conv2d(x, w, b, 2, Padding::same);
    REQUIRE(y->shape == std::vector<int>{1, 1, 2, 2});
    CHECK(y->data[0] == doctest::Approx(12).epsilon(1e-12));
    CHECK(y->data[1] == doctest::Approx(9).epsilon(1e-12));
    CHECK(y->data[2] == doctest::Approx(15).epsilon(1e-12));
    CHECK(y->data[3] == doctest::Approx(9).epsilon(1e-12));
  }
  SUBCASE("same stride 1 3x3 kernel centers the window") {
    auto w3 = Tensor::from_data({1, 1, 3, 3}, std::vector<double>(9, 1.0));
    auto y = conv2d(x, w3, b, 1, Padding::same);
    REQUIRE(y->shape == std::vector<int>{1, 1, 3, 3});
    const double expect[9] = {12, 21, 16, 27, 45, 33, 24, 39, 28};
    for (int i = 0; i < 9; ++i) CHECK(y->data[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
  SUBCASE("bias adds per output channel") {
    auto b5 = Tensor::from_data({1}, {5});
    auto y = conv2d(x, w, b5, 1, Padding::valid);
    CHECK(y->data[0] == doctest::Approx(17).epsilon(1e-12));
  }
  SUBCASE("non-finite input is rejected") {
    auto bad = iota_tensor({1, 1, 3, 3});
    bad->data[4] = std::nan("");
    CHECK_THROWS_AS(conv2d(bad, w, b, 1, Padding::valid), NumericError);
  }
}

TEST_CASE("softmax and cross-entropy match closed-form values") {
  auto x = Tensor::from_data({2}, {0.0, std::log(3.0)});
  auto p = softmax(x);
  CHECK(p->data[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p->data[1] == doctest::Approx(0.75).epsilon(1e-12));

  auto lp = log_softmax(x);
  CHECK(lp->data[0] == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  CHECK(lp->data[1] == doctest::Approx(std::log(0.75)).epsilon(1e-12));

  auto even = softmax(Tensor::from_data({2}, {0.0, 0.0}));
  CHECK(even->data[0] == doctest::Approx(0.5).epsilon(1e-12));

  auto y = Tensor::from_data({2}, {0.0, 1.0});
  auto ce = cross_entropy(p, y);
  CHECK(ce->data[0] == doctest::Approx(-std::log(0.75)).epsilon(1e-12));

  // The floor keeps a zero probability from producing infinity.
  auto zero_p = Tensor::from_data({2}, {1.0, 0.0});
  auto ce_floor = cross_entropy(zero_p, y);
  CHECK(ce_floor->data[0] == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));

  auto not_one_hot = Tensor::from_data({2}, {0.5, 0.5});
  CHECK_THROWS_AS(cross_entropy(p, not_one_hot), ValidationError);
}

TEST_CASE("nll_rows equals the mean picked log-probability") {
  auto x = Tensor::from_data({2, 3}, {0.3, -1.2, 0.7, 2.0, 0.1, -0.4});
  auto lp = log_softmax_rows(x);
  auto loss = nll_rows(lp, {0, 2});
  const double expect = 0.5 * (-lp->data[0] - lp->data[5]);
  CHECK(loss->data[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("gradient of cross-entropy over softmax is p minus one-hot") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int C = 2 + static_cast<int>(rng.uniform_int(5));
    auto x = Tensor::create({C}, true);
    for (auto& v : x->data) v = rng.uniform(-2.0, 2.0);
    const int label = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(C)));
    auto y = Tensor::create({C});
    y->data[static_cast<size_t>(label)] = 1.0;

    auto p = softmax(x);
    std::vector<double> p_vals = p->data;
    auto loss = cross_entropy(p, y);
    backward(loss);
    for (int c = 0; c < C; ++c) {
      const double expect = p_vals[static_cast<size_t>(c)] - (c == label ? 1.0 : 0.0);
      CHECK(x->grad[static_cast<size_t>(c)] == doctest::Approx(expect).epsilon(1e-10));
    }
  }
}

TEST_CASE("linear backward distributes the upstream gradient") {
  // y = x . w^T with w all ones collapses to the row sum: dL/dx = 1.
  auto x = Tensor::from_data({1, 4}, {1, 2, 3, 4}, true);
  auto w = Tensor::from_data({1, 4}, {1, 1, 1, 1});
  auto b = Tensor::create({1});
  auto y = linear(x, w, b);
  REQUIRE(y->size() == 1);
  CHECK(y->data[0] == doctest::Approx(10).epsilon(1e-12));
  backward(y);
  for (int i = 0; i < 4; ++i) CHECK(x->grad[static_cast<size_t>(i)] == doctest::Approx(1.0));
}

TEST_CASE("central differences confirm every layer's backward") {
  auto rep = gradcheck::run_sweep(54, 20260822);
  INFO("worst kind: " << rep.worst_kind << " rel err " << rep.max_rel_err << " over "
                      << rep.checked_entries << " entries");
  CHECK(rep.checked_entries > 400);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("dropout masks match the requested rate and scale") {
  const int n = 40000;
  const double rate = 0.3;
  auto x = Tensor::create({1, n});
  for (auto& v : x->data) v = 1.0;
  Rng rng(99);
  auto y = dropout(x, rate, rng, true);
  int zeros = 0;
  for (double v : y->data) {
    if (v == 0.0)
      ++zeros;
    else
      CHECK(v == doctest::Approx(1.0 / (1.0 - rate)).epsilon(1e-12));
  }
  const double sigma = std::sqrt(n * rate * (1.0 - rate));
  CHECK(std::fabs(zeros - n * rate) < 3.0 * sigma);

  SUBCASE("inactive or rate zero is the identity") {
    Rng r2(5);
    auto y_off = dropout(x, rate, r2, false);
    auto y_zero = dropout(x, 0.0, r2, true);
    for (int i = 0; i < n; ++i) {
      CHECK(y_off->data[static_cast<size_t>(i)] == 1.0);
      CHECK(y_zero->data[static_cast<size_t>(i)] == 1.0);
    }
  }
  SUBCASE("same seed replays the same mask") {
    Rng a(123), bseed(123);
    auto ya = dropout(x, rate, a, true);
    auto yb = dropout(x, rate, bseed, true);
    CHECK(ya->data == yb->data);
  }
}

TEST_CASE("batchnorm normalizes with biased batch statistics and updates the buffers") {
  const int N = 4, C = 2, H = 3, W = 3;
  Rng rng(11);
  auto x = Tensor::create({N, C, H, W});
  for (auto& v : x->data) v = rng.uniform(-3.0, 5.0);
  auto gamma = Tensor::from_data({C}, {1.0, 1.0});
  auto beta = Tensor::from_data({C}, {0.0, 0.0});
  auto rm = Tensor::create({C});
  auto rv = Tensor::from_data({C}, {1.0, 1.0});

  // Hand statistics per channel over (N,H,W), biased variance.
  std::vector<double> mean(C, 0.0), var(C, 0.0);
  const int count = N * H * W;
  for (int c = 0; c < C; ++c) {
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < H * W; ++i) mean[c] += x->data[((n * C + c) * H * W) + i];
    mean[c] /= count;
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < H * W; ++i) {
        const double d = x->data[((n * C + c) * H * W) + i] - mean[c];
        var[c] += d * d;
      }
    var[c] /= count;
  }

  auto y = batchnorm2d(x, gamma, beta, rm, rv, true, 0.1, 1e-5);

  for (int c = 0; c < C; ++c) {
    double out_mean = 0.0, out_var = 0.0;
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < H * W; ++i) out_mean += y->data[((n * C + c) * H * W) + i];
    out_mean /= count;
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < H * W; ++i) {
        const double d = y->data[((n * C + c) * H * W) + i] - out_mean;
        out_var += d * d;
      }
    out_var /= count;
    CHECK(out_mean == doctest::Approx(0.0).epsilon(1e-9));
    // Output variance is var/(var+eps), just below 1.
    CHECK(out_var == doctest::Approx(var[c] / (var[c] + 1e-5)).epsilon(1e-9));
    // Buffers fold in the batch statistics with momentum 0.1.
    CHECK(rm->data[c] == doctest::Approx(0.1 * mean[c]).epsilon(1e-12));
    CHECK(rv->data[c] == doctest::Approx(0.9 * 1.0 + 0.1 * var[c]).epsilon(1e-12));
  }

  SUBCASE("eval mode uses the running buffers verbatim") {
    auto rm2 = Tensor::from_data({C}, {0.5, -0.25});
    auto rv2 = Tensor::from_data({C}, {4.0, 0.25});
    auto y2 = batchnorm2d(x, gamma, beta, rm2, rv2, false, 0.1, 1e-5);
    for (int c = 0; c < C; ++c)
      for (int n = 0; n < N; ++n)
        for (int i = 0; i < H * W; ++i) {
          const size_t idx = (static_cast<size_t>(n) * C + c) * H * W + i;
          const double expect =
              (x->data[idx] - rm2->data[static_cast<size_t>(c)]) /
              std::sqrt(rv2->data[static_cast<size_t>(c)] + 1e-5);
          CHECK(y2->data[idx] == doctest::Approx(expect).epsilon(1e-12));
        }
    // Buffers are read-only in eval mode.
    CHECK(rm2->data[0] == 0.5);
    CHECK(rv2->data[1] == 0.25);
  }
}

TEST_CASE("backward raises TapeError when the graph is reused") {
  auto x = Tensor::from_data({1}, {2.0}, true);
  auto y = exp_t(x);
  backward(y);
  CHECK(x->grad[0] == doctest::Approx(std::exp(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(backward(y), TapeError);
}

TEST_CASE("Adam first step moves by lr along the gradient sign") {
  auto w = Tensor::from_data({1}, {5.0}, true);
  w->ensure_grad();
  w->grad[0] = 10.0;  // d(w^2)/dw at w=5
  Adam opt(0.1);
  opt.step({w});
  // First-step update is lr * g / (|g| + eps), within eps of lr.
  CHECK(w->data[0] == doctest::Approx(4.9).epsilon(1e-8));
  CHECK(opt.step_count == 1);
}

TEST_CASE("Adam drives a quadratic toward its minimum") {
  auto w = Tensor::from_data({1}, {5.0}, true);
  w->ensure_grad();
  Adam opt(0.05);
  double best = std::fabs(w->data[0]);
  for (int i = 0; i < 1000; ++i) {
    w->grad[0] = 2.0 * w->data[0];
    opt.step({w});
    best = std::min(best, std::fabs(w->data[0]));
  }
  CHECK(best < 1e-3);
  CHECK(std::fabs(w->data[0]) < 0.05);
}

TEST_CASE("Adam rejects non-finite gradients without touching state") {
  auto a = Tensor::from_data({2}, {1.0, 2.0}, true);
  auto b = Tensor::from_data({1}, {3.0}, true);
  a->ensure_grad();
  b->ensure_grad();
  Adam opt(0.1);

  a->grad = {0.5, 0.5};
  b->grad = {std::nan("")};
  CHECK_THROWS_AS(opt.step({a, b}), NumericError);
  CHECK(a->data[0] == 1.0);
  CHECK(a->data[1] == 2.0);
  CHECK(b->data[0] == 3.0);
  CHECK(opt.step_count == 0);

  // A later finite step behaves as the true first step.
  b->grad = {6.0};
  opt.step({a, b});
  CHECK(opt.step_count == 1);
  CHECK(b->data[0] == doctest::Approx(2.9).epsilon(1e-8));
}

TEST_CASE("checkpoints round-trip through float32 exactly") {
  const std::string path = temp_path("roundtrip.ckpt");
  auto t1 = Tensor::from_data({2, 2}, {0.1, -2.5, 1e-7, 3.14159265358979});
  auto t2 = Tensor::from_data({3}, {1.0, 2.0, 3.0});
  save_checkpoint(path, {{"alpha", t1}, {"beta", t2}});

  auto loaded = load_checkpoint(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].name == "alpha");
  CHECK(loaded[0].shape == std::vector<int>{2, 2});
  CHECK(loaded[1].name == "beta");
  for (size_t i = 0; i < 4; ++i) {
    const double expect = static_cast<double>(static_cast<float>(t1->data[i]));
    CHECK(loaded[0].data[i] == expect);  // exact after the f32 round
  }

  SUBCASE("load_into fills matching destinations") {
    auto d1 = Tensor::create({2, 2});
    auto d2 = Tensor::create({3});
    load_into(path, {{"alpha", d1}, {"beta", d2}});
    CHECK(d1->data == loaded[0].data);
    CHECK(d2->data == loaded[1].data);
  }
  SUBCASE("shape mismatch names the offending record") {
    auto wrong = Tensor::create({4});
    CHECK_THROWS_WITH_AS(load_into(path, {{"alpha", wrong}, {"beta", Tensor::create({3})}}),
                         doctest::Contains("alpha"), ValidationError);
  }
  SUBCASE("missing destination name is an error") {
    CHECK_THROWS_AS(load_into(path, {{"alpha", Tensor::create({2, 2})},
                                     {"beta", Tensor::create({3})},
                                     {"gamma", Tensor::create({1})}}),
                    ValidationError);
  }
  SUBCASE("extra file record is an error") {
    CHECK_THROWS_AS(load_into(path, {{"alpha", Tensor::create({2, 2})}}), ValidationError);
  }
}

TEST_CASE("corrupt checkpoints fail loudly") {
  const std::string path = temp_path("corrupt.ckpt");
  auto t = Tensor::from_data({8}, {1, 2, 3, 4, 5, 6, 7, 8});
  save_checkpoint(path, {{"w", t}});
  const std::string bytes = [&] {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }();

  SUBCASE("truncation is an io failure") {
    const std::string cut = temp_path("truncated.ckpt");
    std::ofstream out(cut, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(cut), IoError);
  }
  SUBCASE("bad magic is a format failure") {
    std::string mangled = bytes;
    mangled[0] = 'X';
    const std::string badpath = temp_path("badmagic.ckpt");
    std::ofstream out(badpath, std::ios::binary);
    out.write(mangled.data(), static_cast<std::streamsize>(mangled.size()));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(badpath), ValidationError);
  }
  SUBCASE("bad version is a format failure") {
    std::string mangled = bytes;
    mangled[4] = 9;  // version field
    const std::string badpath = temp_path("badversion.ckpt");
    std::ofstream out(badpath, std::ios::binary);
    out.write(mangled.data(), static_cast<std::streamsize>(mangled.size()));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(badpath), ValidationError);
  }
  SUBCASE("missing file is an io failure") {
    CHECK_THROWS_AS(load_checkpoint(temp_path("does_not_exist.ckpt")), IoError);
  }
}

TEST_CASE("seeded RNG streams are reproducible and distinct per label") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  bool differs = false;
  for (int i = 0; i < 10; ++i) differs |= (a.next_u64() != c.next_u64());
  CHECK(differs);

  CHECK(derive_seed(1, "x") == derive_seed(1, "x"));
  CHECK(derive_seed(1, "x") != derive_seed(1, "y"));
  CHECK(derive_seed(1, "x", 0) != derive_seed(1, "x", 1));
  CHECK(derive_seed(1, "x") != derive_seed(2, "x"));
}

TEST_CASE("uniform and normal sampling stay in range with sane moments") {
  Rng rng(5);
  double sum = 0.0, sumsq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sumsq += u * u;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean - 0.5) < 0.005);
  CHECK(std::fabs(var - 1.0 / 12.0) < 0.005);

  double nsum = 0.0, nsumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.normal();
    nsum += g;
    nsumsq += g * g;
  }
  CHECK(std::fabs(nsum / n) < 0.02);
  CHECK(std::fabs(nsumsq / n - 1.0) < 0.03);
}
