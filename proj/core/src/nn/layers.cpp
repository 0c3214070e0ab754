#include "groundseg/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "groundseg/error.hpp"

namespace groundseg::nn {
namespace {

void require_rank5(const Tensor& x, const std::string& op) {
  if (x.rank() != 5) throw ArgumentError(op + ": expected [N,C,D,H,W] input, got " + x.shape_string());
}

void require_shape(const Tensor& g, const std::vector<int>& shape, const std::string& op) {
  if (g.shape() != shape) {
    throw ArgumentError(op + ": gradient shape " + g.shape_string() + " does not match " + shape_string(shape));
  }
}

struct Dims {
  int n, c, d, h, w;
  std::size_t plane() const { return static_cast<std::size_t>(d) * h * w; }
};

Dims dims_of(const Tensor& x) { return {x.dim(0), x.dim(1), x.dim(2), x.dim(3), x.dim(4)}; }

/// Calls row(out_offset, in_offset, x0, x1) for every output row (z, y)
/// whose shifted input row (z + dz, y + dy) exists; x0..x1 is the output
/// column range whose shifted column x + dx is in bounds.
template <typename F>
void for_shifted_rows(const Dims& s, int dz, int dy, int dx, F&& row) {
  const int z0 = std::max(0, -dz), z1 = std::min(s.d, s.d - dz);
  const int y0 = std::max(0, -dy), y1 = std::min(s.h, s.h - dy);
  const int x0 = std::max(0, -dx), x1 = std::min(s.w, s.w - dx);
  if (x0 >= x1) return;
  for (int z = z0; z < z1; ++z) {
    for (int y = y0; y < y1; ++y) {
      const std::size_t out_off = (static_cast<std::size_t>(z) * s.h + y) * s.w;
      const std::size_t in_off = (static_cast<std::size_t>(z + dz) * s.h + (y + dy)) * s.w + dx;
      row(out_off, in_off, x0, x1);
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv

Conv::Conv(int in_channels, int out_channels, Extent3 kernel)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      weight_("weight", Tensor({out_channels, in_channels, kernel[0], kernel[1], kernel[2]})),
      bias_("bias", Tensor({out_channels})) {
  for (const int k : kernel) {
    if (k <= 0 || k % 2 == 0) throw ArgumentError("Conv: kernel extents must be odd and positive");
  }
}

void Conv::initialize(Rng& rng) {
  const double fan_in = static_cast<double>(in_) * kernel_[0] * kernel_[1] * kernel_[2];
  const double bound = std::sqrt(6.0 / fan_in);
  for (auto& w : weight_.value.values()) w = rng.uniform(-bound, bound);
  bias_.value.fill(0.0);
}

void Conv::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Tensor Conv::forward(const Tensor& x, Mode) {
  require_rank5(x, "conv");
  if (x.dim(1) != in_) {
    throw ArgumentError("conv: expected " + std::to_string(in_) + " input channels, got shape " + x.shape_string());
  }
  input_ = x;
  const Dims s = dims_of(x);
  const std::size_t P = s.plane();
  Tensor y({s.n, out_, s.d, s.h, s.w});
  const int pd = kernel_[0] / 2, ph = kernel_[1] / 2, pw = kernel_[2] / 2;
  const double* wt = weight_.value.data();
  for (int n = 0; n < s.n; ++n) {
    for (int o = 0; o < out_; ++o) {
      double* dst = y.data() + (static_cast<std::size_t>(n) * out_ + o) * P;
      std::fill(dst, dst + P, bias_.value[o]);
      for (int i = 0; i < in_; ++i) {
        const double* src = x.data() + (static_cast<std::size_t>(n) * in_ + i) * P;
        const double* wk = wt + (static_cast<std::size_t>(o) * in_ + i) * kernel_[0] * kernel_[1] * kernel_[2];
        for (int a = 0; a < kernel_[0]; ++a) {
          for (int b = 0; b < kernel_[1]; ++b) {
            for (int c = 0; c < kernel_[2]; ++c) {
              const double w = *wk++;
              for_shifted_rows(s, a - pd, b - ph, c - pw, [&](std::size_t oo, std::size_t io, int x0, int x1) {
                double* d = dst + oo;
                const double* sp = src + io;
                for (int xx = x0; xx < x1; ++xx) d[xx] += w * sp[xx];
              });
            }
          }
        }
      }
    }
  }
  return y;
}

Tensor Conv::backward(const Tensor& grad_out) {
  const Dims s = dims_of(input_);
  require_shape(grad_out, {s.n, out_, s.d, s.h, s.w}, "conv backward");
  const std::size_t P = s.plane();
  Tensor gin(input_.shape());
  const int pd = kernel_[0] / 2, ph = kernel_[1] / 2, pw = kernel_[2] / 2;
  const double* wt = weight_.value.data();
  double* gw = weight_.grad.data();
  for (int n = 0; n < s.n; ++n) {
    for (int o = 0; o < out_; ++o) {
      const double* g = grad_out.data() + (static_cast<std::size_t>(n) * out_ + o) * P;
      double bsum = 0.0;
      for (std::size_t p = 0; p < P; ++p) bsum += g[p];
      bias_.grad[o] += bsum;
      for (int i = 0; i < in_; ++i) {
        const double* src = input_.data() + (static_cast<std::size_t>(n) * in_ + i) * P;
        double* gi = gin.data() + (static_cast<std::size_t>(n) * in_ + i) * P;
        const std::size_t wbase = (static_cast<std::size_t>(o) * in_ + i) * kernel_[0] * kernel_[1] * kernel_[2];
        std::size_t k = 0;
        for (int a = 0; a < kernel_[0]; ++a) {
          for (int b = 0; b < kernel_[1]; ++b) {
            for (int c = 0; c < kernel_[2]; ++c, ++k) {
              const double w = wt[wbase + k];
              double acc = 0.0;
              for_shifted_rows(s, a - pd, b - ph, c - pw, [&](std::size_t oo, std::size_t io, int x0, int x1) {
                const double* gp = g + oo;
                const double* sp = src + io;
                double* dp = gi + io;
                for (int xx = x0; xx < x1; ++xx) {
                  acc += gp[xx] * sp[xx];
                  dp[xx] += w * gp[xx];
                }
              });
              gw[wbase + k] += acc;
            }
          }
        }
      }
    }
  }
  return gin;
}

// ---------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& x, Mode) {
  input_ = x;
  Tensor y = x;
  for (auto& v : y.values()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  require_shape(grad_out, input_.shape(), "relu backward");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(input_[i] > 0.0)) g[i] = 0.0;
  }
  return g;
}

// ---------------------------------------------------------------- MaxPool

MaxPool::MaxPool(Extent3 window) : window_(window) {
  for (const int w : window) {
    if (w <= 0) throw ArgumentError("maxpool: window extents must be positive");
  }
}

Tensor MaxPool::forward(const Tensor& x, Mode) {
  require_rank5(x, "maxpool");
  const Dims s = dims_of(x);
  if (s.d % window_[0] || s.h % window_[1] || s.w % window_[2]) {
    throw ArgumentError("maxpool: input " + x.shape_string() + " not divisible by window " +
                        shape_string({window_[0], window_[1], window_[2]}));
  }
  input_shape_ = x.shape();
  const int od = s.d / window_[0], oh = s.h / window_[1], ow = s.w / window_[2];
  Tensor y({s.n, s.c, od, oh, ow});
  argmax_.assign(y.size(), 0);
  const std::size_t P = s.plane();
  std::size_t out_i = 0;
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const double* src = x.data() + static_cast<std::size_t>(nc) * P;
    for (int z = 0; z < od; ++z) {
      for (int yy = 0; yy < oh; ++yy) {
        for (int xx = 0; xx < ow; ++xx, ++out_i) {
          double best = -std::numeric_limits<double>::infinity();
          std::uint32_t best_at = 0;
          bool first = true;
          for (int a = 0; a < window_[0]; ++a) {
            for (int b = 0; b < window_[1]; ++b) {
              for (int c = 0; c < window_[2]; ++c) {
                const auto at = static_cast<std::uint32_t>(
                    ((z * window_[0] + a) * s.h + yy * window_[1] + b) * s.w + xx * window_[2] + c);
                if (first || src[at] > best) {
                  best = src[at];
                  best_at = at;
                  first = false;
                }
              }
            }
          }
          y[out_i] = best;
          argmax_[out_i] = best_at;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool::backward(const Tensor& grad_out) {
  Tensor gin(input_shape_);
  if (grad_out.size() != argmax_.size()) throw ArgumentError("maxpool backward: gradient shape mismatch");
  const std::size_t P = gin.plane();
  const std::size_t out_plane = grad_out.plane();
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const std::size_t nc = i / out_plane;
    gin[nc * P + argmax_[i]] += grad_out[i];
  }
  return gin;
}

// ---------------------------------------------------------------- Upsample

Upsample::Upsample(Extent3 factor) : factor_(factor) {
  for (const int f : factor) {
    if (f <= 0) throw ArgumentError("upsample: factors must be positive");
  }
}

Tensor Upsample::forward(const Tensor& x, Mode) {
  require_rank5(x, "upsample");
  input_shape_ = x.shape();
  const Dims s = dims_of(x);
  const int od = s.d * factor_[0], oh = s.h * factor_[1], ow = s.w * factor_[2];
  Tensor y({s.n, s.c, od, oh, ow});
  const std::size_t P = s.plane();
  const std::size_t OP = y.plane();
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const double* src = x.data() + static_cast<std::size_t>(nc) * P;
    double* dst = y.data() + static_cast<std::size_t>(nc) * OP;
    for (int z = 0; z < od; ++z) {
      for (int yy = 0; yy < oh; ++yy) {
        const double* row = src + (static_cast<std::size_t>(z / factor_[0]) * s.h + yy / factor_[1]) * s.w;
        double* out = dst + (static_cast<std::size_t>(z) * oh + yy) * ow;
        for (int xx = 0; xx < ow; ++xx) out[xx] = row[xx / factor_[2]];
      }
    }
  }
  return y;
}

Tensor Upsample::backward(const Tensor& grad_out) {
  Tensor gin(input_shape_);
  const Dims s = dims_of(gin);
  const int od = s.d * factor_[0], oh = s.h * factor_[1], ow = s.w * factor_[2];
  require_shape(grad_out, {s.n, s.c, od, oh, ow}, "upsample backward");
  const std::size_t P = s.plane();
  const std::size_t OP = grad_out.plane();
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    double* dst = gin.data() + static_cast<std::size_t>(nc) * P;
    const double* src = grad_out.data() + static_cast<std::size_t>(nc) * OP;
    for (int z = 0; z < od; ++z) {
      for (int yy = 0; yy < oh; ++yy) {
        double* row = dst + (static_cast<std::size_t>(z / factor_[0]) * s.h + yy / factor_[1]) * s.w;
        const double* g = src + (static_cast<std::size_t>(z) * oh + yy) * ow;
        for (int xx = 0; xx < ow; ++xx) row[xx / factor_[2]] += g[xx];
      }
    }
  }
  return gin;
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(int channels, double eps, double momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_("gamma", Tensor({channels}, 1.0)),
      beta_("beta", Tensor({channels}, 0.0)),
      running_mean_({channels}, 0.0),
      running_var_({channels}, 1.0) {}

void BatchNorm::collect_parameters(std::vector<Parameter*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void BatchNorm::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
  out.emplace_back("running_mean", &running_mean_);
  out.emplace_back("running_var", &running_var_);
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  require_rank5(x, "batchnorm");
  if (x.dim(1) != channels_) {
    throw ArgumentError("batchnorm: expected " + std::to_string(channels_) + " channels, got " + x.shape_string());
  }
  const Dims s = dims_of(x);
  const std::size_t P = s.plane();
  const std::size_t M = static_cast<std::size_t>(s.n) * P;
  last_mode_ = mode;
  normalized_ = Tensor(x.shape());
  inv_std_.assign(channels_, 0.0);
  Tensor y(x.shape());
  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (mode == Mode::Train) {
      if (M < 2) throw ArgumentError("batchnorm: train mode needs at least 2 values per channel, got " + x.shape_string());
      double sum = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.data() + (static_cast<std::size_t>(n) * channels_ + c) * P;
        for (std::size_t k = 0; k < P; ++k) sum += p[k];
      }
      mean = sum / static_cast<double>(M);
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = x.data() + (static_cast<std::size_t>(n) * channels_ + c) * P;
        for (std::size_t k = 0; k < P; ++k) sq += (p[k] - mean) * (p[k] - mean);
      }
      var = sq / static_cast<double>(M);
      running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
      running_var_[c] = (1.0 - momentum_) * running_var_[c] +
                        momentum_ * var * static_cast<double>(M) / static_cast<double>(M - 1);
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    for (int n = 0; n < s.n; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * P;
      for (std::size_t k = 0; k < P; ++k) {
        const double xh = (x[off + k] - mean) * inv;
        normalized_[off + k] = xh;
        y[off + k] = gamma_.value[c] * xh + beta_.value[c];
      }
    }
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& grad_out) {
  require_shape(grad_out, normalized_.shape(), "batchnorm backward");
  const Dims s = dims_of(grad_out);
  const std::size_t P = s.plane();
  const double M = static_cast<double>(s.n) * static_cast<double>(P);
  Tensor gin(grad_out.shape());
  for (int c = 0; c < channels_; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * P;
      for (std::size_t k = 0; k < P; ++k) {
        sum_g += grad_out[off + k];
        sum_gx += grad_out[off + k] * normalized_[off + k];
      }
    }
    gamma_.grad[c] += sum_gx;
    beta_.grad[c] += sum_g;
    const double g = gamma_.value[c];
    const double inv = inv_std_[c];
    for (int n = 0; n < s.n; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * P;
      for (std::size_t k = 0; k < P; ++k) {
        if (last_mode_ == Mode::Train) {
          gin[off + k] = g * inv / M * (M * grad_out[off + k] - sum_g - normalized_[off + k] * sum_gx);
        } else {
          gin[off + k] = g * inv * grad_out[off + k];
        }
      }
    }
  }
  return gin;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("dropout: rate must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode) {
  active_ = mode == Mode::Train && rate_ > 0.0;
  if (!active_) return x;
  const double scale = 1.0 / (1.0 - rate_);
  mask_.resize(x.size());
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask_[i] = rng_.uniform() >= rate_ ? scale : 0.0;
    y[i] *= mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (!active_) return grad_out;
  if (grad_out.size() != mask_.size()) throw ArgumentError("dropout backward: gradient shape mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask_[i];
  return g;
}

// ---------------------------------------------------------------- concat

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank5(a, "concat");
  require_rank5(b, "concat");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3) || a.dim(4) != b.dim(4)) {
    throw ArgumentError("concat: incompatible shapes " + a.shape_string() + " and " + b.shape_string());
  }
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Tensor y({n, ca + cb, a.dim(2), a.dim(3), a.dim(4)});
  const std::size_t P = a.plane();
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.data() + static_cast<std::size_t>(i) * ca * P, ca * P,
                y.data() + static_cast<std::size_t>(i) * (ca + cb) * P);
    std::copy_n(b.data() + static_cast<std::size_t>(i) * cb * P, cb * P,
                y.data() + (static_cast<std::size_t>(i) * (ca + cb) + ca) * P);
  }
  return y;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& g, int a_channels) {
  require_rank5(g, "split");
  const int n = g.dim(0), c = g.dim(1);
  if (a_channels <= 0 || a_channels >= c) throw ArgumentError("split: bad channel split for " + g.shape_string());
  Tensor a({n, a_channels, g.dim(2), g.dim(3), g.dim(4)});
  Tensor b({n, c - a_channels, g.dim(2), g.dim(3), g.dim(4)});
  const std::size_t P = g.plane();
  for (int i = 0; i < n; ++i) {
    std::copy_n(g.data() + static_cast<std::size_t>(i) * c * P, a_channels * P,
                a.data() + static_cast<std::size_t>(i) * a_channels * P);
    std::copy_n(g.data() + (static_cast<std::size_t>(i) * c + a_channels) * P, (c - a_channels) * P,
                b.data() + static_cast<std::size_t>(i) * (c - a_channels) * P);
  }
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------- losses

Tensor softmax_channels(const Tensor& logits) {
  require_rank5(logits, "softmax");
  const int n = logits.dim(0), k = logits.dim(1);
  const std::size_t P = logits.plane();
  Tensor p(logits.shape());
  for (int i = 0; i < n; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * k * P;
    for (std::size_t s = 0; s < P; ++s) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) mx = std::max(mx, logits[base + c * P + s]);
      double z = 0.0;
      for (int c = 0; c < k; ++c) z += std::exp(logits[base + c * P + s] - mx);
      for (int c = 0; c < k; ++c) p[base + c * P + s] = std::exp(logits[base + c * P + s] - mx) / z;
    }
  }
  return p;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const std::uint8_t> targets,
                                 std::span<const double> class_weights) {
  require_rank5(logits, "softmax_cross_entropy");
  const int n = logits.dim(0), k = logits.dim(1);
  const std::size_t P = logits.plane();
  if (targets.size() != static_cast<std::size_t>(n) * P) {
    throw ArgumentError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                        logits.shape_string());
  }
  if (class_weights.size() != static_cast<std::size_t>(k)) {
    throw ArgumentError("softmax_cross_entropy: " + std::to_string(class_weights.size()) + " weights for " +
                        std::to_string(k) + " classes");
  }
  LossResult r;
  r.grad = Tensor(logits.shape());
  for (const auto t : targets) {
    if (t == 255) continue;
    if (t >= k) throw ArgumentError("softmax_cross_entropy: target " + std::to_string(t) + " out of range");
    ++r.count;
  }
  if (r.count == 0) return r;
  const double inv_count = 1.0 / static_cast<double>(r.count);
  std::vector<double> lp(k);
  for (int i = 0; i < n; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * k * P;
    for (std::size_t s = 0; s < P; ++s) {
      const auto t = targets[static_cast<std::size_t>(i) * P + s];
      if (t == 255) continue;
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) mx = std::max(mx, logits[base + c * P + s]);
      double z = 0.0;
      for (int c = 0; c < k; ++c) z += std::exp(logits[base + c * P + s] - mx);
      const double log_z = std::log(z) + mx;
      const double w = class_weights[t];
      r.loss += w * (log_z - logits[base + t * P + s]);
      for (int c = 0; c < k; ++c) {
        const double p = std::exp(logits[base + c * P + s] - log_z);
        r.grad[base + c * P + s] = w * inv_count * (p - (c == t ? 1.0 : 0.0));
      }
    }
  }
  r.loss *= inv_count;
  return r;
}

}  // namespace groundseg::nn
