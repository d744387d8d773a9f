#include "mcua/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mcua {

const double kProbFloor = 1e-12;

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

bool track(std::initializer_list<const TensorPtr*> inputs) {
  if (!grad_enabled()) return false;
  for (const TensorPtr* t : inputs)
    if (*t && (*t)->needs_grad()) return true;
  return false;
}

// Four-lane dot product; fixed association so results are deterministic.
double dot4(const double* a, const double* b, int len) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  int i = 0;
  for (; i + 4 <= len; i += 4) {
    a0 += a[i] * b[i];
    a1 += a[i + 1] * b[i + 1];
    a2 += a[i + 2] * b[i + 2];
    a3 += a[i + 3] * b[i + 3];
  }
  for (; i < len; ++i) a0 += a[i] * b[i];
  return (a0 + a1) + (a2 + a3);
}

void axpy(double alpha, const double* x, double* y, int len) {
  for (int i = 0; i < len; ++i) y[i] += alpha * x[i];
}

// Lowers one image [C,H,W] to rows of length C*kh*kw, one row per output
// position, zeros where the window leaves the input. Row element order matches
// the kernel layout [C,kh,kw], so kernel rows pair with column rows directly.
void im2col(const double* X, int C, int H, int W, int kh, int kw, int stride, int pt, int pl,
            int Ho, int Wo, double* col) {
  const int L = C * kh * kw;
  for (int oh = 0; oh < Ho; ++oh)
    for (int ow = 0; ow < Wo; ++ow) {
      double* row = col + (static_cast<int64_t>(oh) * Wo + ow) * L;
      for (int c = 0; c < C; ++c) {
        const double* xc = X + static_cast<int64_t>(c) * H * W;
        for (int r = 0; r < kh; ++r) {
          const int ih = oh * stride + r - pt;
          double* dst = row + (c * kh + r) * kw;
          if (ih < 0 || ih >= H) {
            for (int s = 0; s < kw; ++s) dst[s] = 0.0;
            continue;
          }
          const double* xrow = xc + static_cast<int64_t>(ih) * W;
          const int iw0 = ow * stride - pl;
          if (iw0 >= 0 && iw0 + kw <= W) {
            for (int s = 0; s < kw; ++s) dst[s] = xrow[iw0 + s];
          } else {
            for (int s = 0; s < kw; ++s) {
              const int iw = iw0 + s;
              dst[s] = (iw < 0 || iw >= W) ? 0.0 : xrow[iw];
            }
          }
        }
      }
    }
}

}  // namespace

int conv_out_dim(int in, int k, int stride, Padding pad) {
  if (stride < 1) throw ValidationError("conv stride must be >= 1");
  if (k < 1) throw ValidationError("conv kernel size must be >= 1");
  if (pad == Padding::valid) {
    if (in < k)
      throw DimensionError("conv input extent " + std::to_string(in) +
                           " smaller than kernel " + std::to_string(k));
    return 1 + (in - k) / stride;
  }
  return (in + stride - 1) / stride;
}

TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b, int stride,
                 Padding pad) {
  require(x->rank() == 4, "conv2d: input must be [N,C,H,W]");
  require(w->rank() == 4, "conv2d: kernel must be [K,C,kh,kw]");
  require(b->rank() == 1, "conv2d: bias must be [K]");
  const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  const int K = w->dim(0), kh = w->dim(2), kw = w->dim(3);
  require(w->dim(1) == C, "conv2d: kernel channels " + std::to_string(w->dim(1)) +
                              " != input channels " + std::to_string(C));
  require(b->dim(0) == K, "conv2d: bias size != kernel count");
  check_finite(*x, "conv2d input");

  const int Ho = conv_out_dim(H, kh, stride, pad);
  const int Wo = conv_out_dim(W, kw, stride, pad);
  // Zero padding split floor/ceil between leading and trailing edges.
  int pt = 0, pl = 0, pw_total = 0;
  if (pad == Padding::same) {
    const int ph_total = std::max(0, (Ho - 1) * stride + kh - H);
    pw_total = std::max(0, (Wo - 1) * stride + kw - W);
    pt = ph_total / 2;
    pl = pw_total / 2;
  }
  auto out = Tensor::create({N, K, Ho, Wo});
  const double* X = x->data.data();
  const double* Wd = w->data.data();
  double* Y = out->data.data();

  const int L = C * kh * kw;
  const int O = Ho * Wo;
  std::vector<double> col(static_cast<size_t>(O) * L);
  for (int n = 0; n < N; ++n) {
    im2col(X + static_cast<int64_t>(n) * C * H * W, C, H, W, kh, kw, stride, pt, pl, Ho, Wo,
           col.data());
    double* yp = Y + static_cast<int64_t>(n) * K * O;
    for (int k = 0; k < K; ++k) {
      const double* wrow = Wd + static_cast<int64_t>(k) * L;
      const double bias = b->data[static_cast<size_t>(k)];
      double* yk = yp + static_cast<int64_t>(k) * O;
      for (int o = 0; o < O; ++o)
        yk[o] = bias + dot4(wrow, col.data() + static_cast<int64_t>(o) * L, L);
    }
  }

  if (track({&x, &w, &b})) {
    out->parents = {x, w, b};
    Tensor* self = out.get();
    const int st = stride;
    out->backward_fn = [x, w, b, self, N, C, H, W, K, kh, kw, Ho, Wo, pt, pl, st]() {
      const double* dY = self->grad.data();
      const double* X = x->data.data();
      const double* Wd = w->data.data();
      const bool need_x = x->needs_grad();
      const bool need_w = w->needs_grad();
      const bool need_b = b->needs_grad();
      if (need_x) x->ensure_grad();
      if (need_w) w->ensure_grad();
      if (need_b) b->ensure_grad();

      if (need_b) {
        for (int k = 0; k < K; ++k) {
          double acc = 0.0;
          for (int n = 0; n < N; ++n) {
            const double* dyp = dY + (static_cast<int64_t>(n) * K + k) * Ho * Wo;
            for (int i = 0; i < Ho * Wo; ++i) acc += dyp[i];
          }
          b->grad[static_cast<size_t>(k)] += acc;
        }
      }
      if (!need_x && !need_w) return;

      const int L = C * kh * kw;
      const int O = Ho * Wo;
      std::vector<double> col(static_cast<size_t>(O) * L);
      std::vector<double> dcol;
      if (need_x) dcol.resize(static_cast<size_t>(O) * L);
      for (int n = 0; n < N; ++n) {
        im2col(X + static_cast<int64_t>(n) * C * H * W, C, H, W, kh, kw, st, pt, pl, Ho, Wo,
               col.data());
        const double* dyp = dY + static_cast<int64_t>(n) * K * O;
        if (need_x) std::fill(dcol.begin(), dcol.end(), 0.0);
        for (int k = 0; k < K; ++k) {
          const double* dyk = dyp + static_cast<int64_t>(k) * O;
          double* dwrow = need_w ? w->grad.data() + static_cast<int64_t>(k) * L : nullptr;
          const double* wrow = Wd + static_cast<int64_t>(k) * L;
          for (int o = 0; o < O; ++o) {
            const double g = dyk[o];
            if (g == 0.0) continue;
            const double* crow = col.data() + static_cast<int64_t>(o) * L;
            if (need_w) axpy(g, crow, dwrow, L);
            if (need_x) axpy(g, wrow, dcol.data() + static_cast<int64_t>(o) * L, L);
          }
        }
        if (!need_x) continue;
        // col2im: scatter window gradients back onto the input plane.
        double* dx = x->grad.data() + static_cast<int64_t>(n) * C * H * W;
        for (int oh = 0; oh < Ho; ++oh)
          for (int ow = 0; ow < Wo; ++ow) {
            const double* row = dcol.data() + (static_cast<int64_t>(oh) * Wo + ow) * L;
            for (int c = 0; c < C; ++c)
              for (int r = 0; r < kh; ++r) {
                const int ih = oh * st + r - pt;
                if (ih < 0 || ih >= H) continue;
                double* dxrow = dx + (static_cast<int64_t>(c) * H + ih) * W;
                const double* src = row + (c * kh + r) * kw;
                for (int s = 0; s < kw; ++s) {
                  const int iw = ow * st + s - pl;
                  if (iw < 0 || iw >= W) continue;
                  dxrow[iw] += src[s];
                }
              }
          }
      }
    };
  }
  return out;
}

TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
  require(x->rank() == 2, "linear: input must be [N,F]");
  require(w->rank() == 2, "linear: weight must be [O,F]");
  require(b->rank() == 1, "linear: bias must be [O]");
  const int N = x->dim(0), F = x->dim(1), O = w->dim(0);
  require(w->dim(1) == F, "linear: weight inner dim " + std::to_string(w->dim(1)) +
                              " != input features " + std::to_string(F));
  require(b->dim(0) == O, "linear: bias size != output features");
  check_finite(*x, "linear input");

  auto out = Tensor::create({N, O});
  for (int n = 0; n < N; ++n) {
    const double* xr = x->data.data() + static_cast<int64_t>(n) * F;
    double* yr = out->data.data() + static_cast<int64_t>(n) * O;
    for (int o = 0; o < O; ++o) {
      const double* wr = w->data.data() + static_cast<int64_t>(o) * F;
      double acc = b->data[static_cast<size_t>(o)];
      for (int f = 0; f < F; ++f) acc += xr[f] * wr[f];
      yr[o] = acc;
    }
  }

  if (track({&x, &w, &b})) {
    out->parents = {x, w, b};
    Tensor* self = out.get();
    out->backward_fn = [x, w, b, self, N, F, O]() {
      const double* dY = self->grad.data();
      const bool need_x = x->needs_grad();
      const bool need_w = w->needs_grad();
      const bool need_b = b->needs_grad();
      if (need_x) x->ensure_grad();
      if (need_w) w->ensure_grad();
      if (need_b) b->ensure_grad();
      for (int n = 0; n < N; ++n) {
        const double* dyr = dY + static_cast<int64_t>(n) * O;
        const double* xr = x->data.data() + static_cast<int64_t>(n) * F;
        double* dxr = need_x ? x->grad.data() + static_cast<int64_t>(n) * F : nullptr;
        for (int o = 0; o < O; ++o) {
          const double g = dyr[o];
          if (need_b) b->grad[static_cast<size_t>(o)] += g;
          const double* wr = w->data.data() + static_cast<int64_t>(o) * F;
          if (need_w) {
            double* dwr = w->grad.data() + static_cast<int64_t>(o) * F;
            for (int f = 0; f < F; ++f) dwr[f] += g * xr[f];
          }
          if (need_x)
            for (int f = 0; f < F; ++f) dxr[f] += g * wr[f];
        }
      }
    };
  }
  return out;
}

TensorPtr relu(const TensorPtr& x) {
  auto out = Tensor::create(x->shape);
  const size_t n = x->data.size();
  for (size_t i = 0; i < n; ++i) out->data[i] = x->data[i] > 0.0 ? x->data[i] : 0.0;
  if (track({&x})) {
    out->parents = {x};
    Tensor* self = out.get();
    out->backward_fn = [x, self, n]() {
      x->ensure_grad();
      for (size_t i = 0; i < n; ++i)
        if (x->data[i] > 0.0) x->grad[i] += self->grad[i];
    };
  }
  return out;
}

TensorPtr dropout(const TensorPtr& x, double rate, Rng& rng, bool active) {
  if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout rate must be in [0,1)");
  if (!active || rate == 0.0) return x;
  const size_t n = x->data.size();
  const double scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(n);
  for (size_t i = 0; i < n; ++i) (*mask)[i] = rng.uniform() < rate ? 0.0 : scale;
  auto out = Tensor::create(x->shape);
  for (size_t i = 0; i < n; ++i) out->data[i] = x->data[i] * (*mask)[i];
  if (track({&x})) {
    out->parents = {x};
    Tensor* self = out.get();
    out->backward_fn = [x, self, mask, n]() {
      x->ensure_grad();
      for (size_t i = 0; i < n; ++i) x->grad[i] += self->grad[i] * (*mask)[i];
    };
  }
  return out;
}

TensorPtr batchnorm2d(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                      const TensorPtr& running_mean, const TensorPtr& running_var,
                      bool training, double momentum, double eps) {
  require(x->rank() == 4, "batchnorm2d: input must be [N,C,H,W]");
  const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  require(gamma->size() == C && beta->size() == C, "batchnorm2d: affine params must be [C]");
  require(running_mean->size() == C && running_var->size() == C,
          "batchnorm2d: running buffers must be [C]");
  const int64_t m = static_cast<int64_t>(N) * H * W;
  require(m > 0, "batchnorm2d: empty batch");

  auto out = Tensor::create(x->shape);
  auto xhat = std::make_shared<std::vector<double>>(x->data.size());
  auto invstd = std::make_shared<std::vector<double>>(static_cast<size_t>(C));

  for (int c = 0; c < C; ++c) {
    double mean, var;
    if (training) {
      double sum = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* xp = x->data.data() + ((static_cast<int64_t>(n) * C + c) * H) * W;
        for (int i = 0; i < H * W; ++i) sum += xp[i];
      }
      mean = sum / static_cast<double>(m);
      double acc = 0.0;
      for (int n = 0; n < N; ++n) {
        const double* xp = x->data.data() + ((static_cast<int64_t>(n) * C + c) * H) * W;
        for (int i = 0; i < H * W; ++i) {
          const double d = xp[i] - mean;
          acc += d * d;
        }
      }
      var = acc / static_cast<double>(m);
      running_mean->data[static_cast<size_t>(c)] =
          (1.0 - momentum) * running_mean->data[static_cast<size_t>(c)] + momentum * mean;
      running_var->data[static_cast<size_t>(c)] =
          (1.0 - momentum) * running_var->data[static_cast<size_t>(c)] + momentum * var;
    } else {
      mean = running_mean->data[static_cast<size_t>(c)];
      var = running_var->data[static_cast<size_t>(c)];
    }
    const double is = 1.0 / std::sqrt(var + eps);
    (*invstd)[static_cast<size_t>(c)] = is;
    const double g = gamma->data[static_cast<size_t>(c)];
    const double bta = beta->data[static_cast<size_t>(c)];
    for (int n = 0; n < N; ++n) {
      const int64_t base = ((static_cast<int64_t>(n) * C + c) * H) * W;
      const double* xp = x->data.data() + base;
      double* xh = xhat->data() + base;
      double* yp = out->data.data() + base;
      for (int i = 0; i < H * W; ++i) {
        xh[i] = (xp[i] - mean) * is;
        yp[i] = g * xh[i] + bta;
      }
    }
  }

  if (track({&x, &gamma, &beta})) {
    out->parents = {x, gamma, beta};
    Tensor* self = out.get();
    out->backward_fn = [x, gamma, beta, self, xhat, invstd, N, C, H, W, m, training]() {
      const bool need_x = x->needs_grad();
      if (need_x) x->ensure_grad();
      gamma->ensure_grad();
      beta->ensure_grad();
      const double inv_m = 1.0 / static_cast<double>(m);
      for (int c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int n = 0; n < N; ++n) {
          const int64_t base = ((static_cast<int64_t>(n) * C + c) * H) * W;
          const double* dy = self->grad.data() + base;
          const double* xh = xhat->data() + base;
          for (int i = 0; i < H * W; ++i) {
            sum_dy += dy[i];
            sum_dy_xhat += dy[i] * xh[i];
          }
        }
        gamma->grad[static_cast<size_t>(c)] += sum_dy_xhat;
        beta->grad[static_cast<size_t>(c)] += sum_dy;
        if (!need_x) continue;
        const double g_is = gamma->data[static_cast<size_t>(c)] * (*invstd)[static_cast<size_t>(c)];
        for (int n = 0; n < N; ++n) {
          const int64_t base = ((static_cast<int64_t>(n) * C + c) * H) * W;
          const double* dy = self->grad.data() + base;
          const double* xh = xhat->data() + base;
          double* dx = x->grad.data() + base;
          if (training) {
            for (int i = 0; i < H * W; ++i)
              dx[i] += g_is * (dy[i] - inv_m * sum_dy - xh[i] * inv_m * sum_dy_xhat);
          } else {
            // Eval statistics are constants, so the chain is purely affine.
            for (int i = 0; i < H * W; ++i) dx[i] += g_is * dy[i];
          }
        }
      }
    };
  }
  return out;
}

namespace {

TensorPtr rowwise_softmax(const TensorPtr& x, bool log_form) {
  require(x->rank() == 2, "softmax: input must be [N,C]");
  const int N = x->dim(0), C = x->dim(1);
  require(C > 0 && N > 0, "softmax: empty input");
  check_finite(*x, "softmax input");
  auto out = Tensor::create(x->shape);
  for (int n = 0; n < N; ++n) {
    const double* xr = x->data.data() + static_cast<int64_t>(n) * C;
    double* yr = out->data.data() + static_cast<int64_t>(n) * C;
    double mx = xr[0];
    for (int c = 1; c < C; ++c) mx = std::max(mx, xr[c]);
    double denom = 0.0;
    for (int c = 0; c < C; ++c) denom += std::exp(xr[c] - mx);
    if (log_form) {
      const double log_denom = std::log(denom);
      for (int c = 0; c < C; ++c) yr[c] = xr[c] - mx - log_denom;
    } else {
      for (int c = 0; c < C; ++c) yr[c] = std::exp(xr[c] - mx) / denom;
    }
  }
  if (track({&x})) {
    out->parents = {x};
    Tensor* self = out.get();
    out->backward_fn = [x, self, N, C, log_form]() {
      x->ensure_grad();
      for (int n = 0; n < N; ++n) {
        const double* dy = self->grad.data() + static_cast<int64_t>(n) * C;
        const double* y = self->data.data() + static_cast<int64_t>(n) * C;
        double* dx = x->grad.data() + static_cast<int64_t>(n) * C;
        if (log_form) {
          double sum_dy = 0.0;
          for (int c = 0; c < C; ++c) sum_dy += dy[c];
          for (int c = 0; c < C; ++c) dx[c] += dy[c] - std::exp(y[c]) * sum_dy;
        } else {
          double dot = 0.0;
          for (int c = 0; c < C; ++c) dot += dy[c] * y[c];
          for (int c = 0; c < C; ++c) dx[c] += y[c] * (dy[c] - dot);
        }
      }
    };
  }
  return out;
}

}  // namespace

TensorPtr softmax_rows(const TensorPtr& x) { return rowwise_softmax(x, false); }
TensorPtr log_softmax_rows(const TensorPtr& x) { return rowwise_softmax(x, true); }

TensorPtr softmax(const TensorPtr& x) {
  require(x->rank() == 1, "softmax: input must be [C]");
  auto rows = reshape(x, {1, x->dim(0)});
  return reshape(softmax_rows(rows), {x->dim(0)});
}

TensorPtr log_softmax(const TensorPtr& x) {
  require(x->rank() == 1, "log_softmax: input must be [C]");
  auto rows = reshape(x, {1, x->dim(0)});
  return reshape(log_softmax_rows(rows), {x->dim(0)});
}

TensorPtr spatial_mean(const TensorPtr& x) {
  require(x->rank() == 4, "spatial_mean: input must be [N,C,H,W]");
  const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
  require(H * W > 0, "spatial_mean: empty spatial extent");
  auto out = Tensor::create({N, C});
  const double inv = 1.0 / (H * W);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* xp = x->data.data() + ((static_cast<int64_t>(n) * C + c) * H) * W;
      double acc = 0.0;
      for (int i = 0; i < H * W; ++i) acc += xp[i];
      out->data[static_cast<size_t>(n) * C + c] = acc * inv;
    }
  if (track({&x})) {
    out->parents = {x};
    Tensor* self = out.get();
    out->backward_fn = [x, self, N, C, H, W, inv]() {
      x->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const double g = self->grad[static_cast<size_t>(n) * C + c] * inv;
          double* dx = x->grad.data() + ((static_cast<int64_t>(n) * C + c) * H) * W;
          for (int i = 0; i < H * W; ++i) dx[i] += g;
        }
    };
  }
  return out;
}

TensorPtr mean_rows(const TensorPtr& x) {
  require(x->rank() == 2, "mean_rows: input must be [N,C]");
  const int N = x->dim(0), C = x->dim(1);
  require(N > 0, "mean_rows: empty input");
  auto out = Tensor::create({C});
  const double inv = 1.0 / N;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      out->data[static_cast<size_t>(c)] += x->data[static_cast<size_t>(n) * C + c] * inv;
  if (track({&x})) {
    out->parents = {x};
    Tensor* self = out.get();
    out->backward_fn = [x, self, N, C, inv]() {
      x->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          x->grad[static_cast<size_t>(n) * C + c] += self->grad[static_cast<size_t>(c)] * inv;
    };
  }
  return out;
}

TensorPtr slice_rows(const TensorPtr& x, int r0, int r1) {
  require(x->rank() == 2, "slice_rows: input must be [N,C]");
  const int N = x->dim(0), C = x->dim(1);
  require(0 <= r0 && r0 < r1 && r1 <= N, "slice_rows: bad range");
  const int M = r1 - r0;
  auto out = Tensor::create({M, C});
  std::copy(x->data.begin() + static_cast<int64_t>(r0) * C,
            x->data.begin() + static_cast<int64_t>(r1) * C, out->data.begin());
  if (track({&x})) {
    out->parents = {x};
    Tensor* self = out.get();
    out->backward_fn = [x, self, r0, M, C]() {
      x->ensure_grad();
      for (int i = 0; i < M * C; ++i)
        x->grad[static_cast<size_t>(r0) * C + i] += self->grad[static_cast<size_t>(i)];
    };
  }
  return out;
}

TensorPtr exp_t(const TensorPtr& x) {
  auto out = Tensor::create(x->shape);
  for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = std::exp(x->data[i]);
  if (track({&x})) {
    out->parents = {x};
    Tensor* self = out.get();
    out->backward_fn = [x, self]() {
      x->ensure_grad();
      for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += self->grad[i] * self->data[i];
    };
  }
  return out;
}

TensorPtr reshape(const TensorPtr& x, std::vector<int> new_shape) {
  if (shape_size(new_shape) != x->size())
    throw DimensionError("reshape: size mismatch");
  auto out = Tensor::create(std::move(new_shape));
  out->data = x->data;
  if (track({&x})) {
    out->parents = {x};
    Tensor* self = out.get();
    out->backward_fn = [x, self]() {
      x->ensure_grad();
      for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += self->grad[i];
    };
  }
  return out;
}

TensorPtr mean_scalars(const std::vector<TensorPtr>& xs) {
  if (xs.empty()) throw ValidationError("mean_scalars: empty list");
  for (const auto& t : xs)
    if (t->size() != 1) throw DimensionError("mean_scalars: all inputs must be scalars");
  auto out = Tensor::create({1});
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (const auto& t : xs) out->data[0] += t->data[0] * inv;
  bool any = false;
  if (grad_enabled())
    for (const auto& t : xs)
      if (t->needs_grad()) any = true;
  if (any) {
    out->parents = xs;
    Tensor* self = out.get();
    auto inputs = xs;
    out->backward_fn = [inputs, self, inv]() {
      for (const auto& t : inputs) {
        t->ensure_grad();
        t->grad[0] += self->grad[0] * inv;
      }
    };
  }
  return out;
}

TensorPtr cross_entropy(const TensorPtr& y_hat, const TensorPtr& y) {
  require(y_hat->rank() == 1 && y->rank() == 1, "cross_entropy: inputs must be [C]");
  require(y_hat->dim(0) == y->dim(0), "cross_entropy: class-count mismatch");
  const int C = y->dim(0);
  int ones = 0, hot = -1;
  for (int c = 0; c < C; ++c) {
    const double v = y->data[static_cast<size_t>(c)];
    if (v == 1.0) {
      ++ones;
      hot = c;
    } else if (v != 0.0) {
      throw ValidationError("cross_entropy: target is not one-hot");
    }
  }
  if (ones != 1) throw ValidationError("cross_entropy: target is not one-hot");
  check_finite(*y_hat, "cross_entropy input");

  const double p = y_hat->data[static_cast<size_t>(hot)];
  const double clamped = std::max(p, kProbFloor);
  auto out = Tensor::scalar(-std::log(clamped));
  if (track({&y_hat})) {
    out->parents = {y_hat};
    Tensor* self = out.get();
    out->backward_fn = [y_hat, self, hot, p, clamped]() {
      y_hat->ensure_grad();
      // Zero slope inside the floor: the clamp is active there.
      if (p >= kProbFloor)
        y_hat->grad[static_cast<size_t>(hot)] += -self->grad[0] / clamped;
    };
  }
  return out;
}

TensorPtr nll_rows(const TensorPtr& log_probs, const std::vector<int>& labels) {
  require(log_probs->rank() == 2, "nll_rows: input must be [N,C]");
  const int N = log_probs->dim(0), C = log_probs->dim(1);
  if (static_cast<size_t>(N) != labels.size())
    throw ValidationError("nll_rows: label count != row count");
  for (int y : labels)
    if (y < 0 || y >= C) throw ValidationError("nll_rows: label out of range");
  auto out = Tensor::create({1});
  const double inv = 1.0 / N;
  for (int n = 0; n < N; ++n)
    out->data[0] -= log_probs->data[static_cast<size_t>(n) * C + labels[static_cast<size_t>(n)]] * inv;
  if (track({&log_probs})) {
    out->parents = {log_probs};
    Tensor* self = out.get();
    auto ys = labels;
    out->backward_fn = [log_probs, self, ys, C, inv]() {
      log_probs->ensure_grad();
      for (size_t n = 0; n < ys.size(); ++n)
        log_probs->grad[n * C + static_cast<size_t>(ys[n])] -= self->grad[0] * inv;
    };
  }
  return out;
}

}  // namespace mcua
