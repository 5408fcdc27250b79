#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mgs/rng.hpp"
#include "mgs/tensor.hpp"

namespace mgs {

// Convolution parameters. Weights are outC x inC x kH x kW.
struct ConvParams {
  Tensor weights;
  std::vector<double> bias;
  int stride = 1;
  int padding = 0;
  int dilation = 1;

  std::size_t out_channels() const { return weights.n(); }
  std::size_t in_channels() const { return weights.c(); }
  std::size_t kh() const { return weights.h(); }
  std::size_t kw() const { return weights.w(); }

  void validate() const {
    require(weights.n() > 0 && weights.c() > 0, "conv: empty weight tensor");
    require(weights.h() % 2 == 1 && weights.w() % 2 == 1,
            "conv: kernel extents must be odd");
    require(bias.size() == weights.n(),
            "conv: bias length must equal output channel count");
    require(stride >= 1, "conv: stride must be >= 1");
    require(padding >= 0, "conv: padding must be >= 0");
    require(dilation >= 1, "conv: dilation must be >= 1");
  }
};

inline ConvParams make_conv(std::size_t out_c, std::size_t in_c, std::size_t k,
                            int stride = 1, int padding = 0, int dilation = 1) {
  ConvParams p;
  p.weights = Tensor(out_c, in_c, k, k);
  p.bias.assign(out_c, 0.0);
  p.stride = stride;
  p.padding = padding;
  p.dilation = dilation;
  return p;
}

// He-style fan-in initialization; biases stay zero.
inline void he_init(ConvParams& p, Rng& rng) {
  const double fan_in =
      static_cast<double>(p.in_channels() * p.kh() * p.kw());
  const double sd = std::sqrt(2.0 / fan_in);
  for (double& v : p.weights.raw()) v = sd * rng.normal();
}

inline std::size_t conv_out_extent(std::size_t in, int pad, int dilation,
                                   std::size_t k, int stride) {
  const long long span =
      static_cast<long long>(in) + 2ll * pad -
      static_cast<long long>(dilation) * (static_cast<long long>(k) - 1) - 1;
  require(span >= 0, "conv: padded input smaller than effective kernel");
  return static_cast<std::size_t>(span / stride + 1);
}

// y(p) = sum_n w(p_n) x(p + p_n) + bias, zero padding outside the input.
// Accumulation order (ic, then kernel row, then kernel col) is fixed; the
// deformable convolution reproduces it exactly when all offsets are zero.
inline Tensor conv2d_forward(const Tensor& x, const ConvParams& p) {
  p.validate();
  require(x.c() == p.in_channels(),
          "conv2d_forward: input has " + std::to_string(x.c()) +
              " channels, weights expect " +
              std::to_string(p.in_channels()));
  const std::size_t oh = conv_out_extent(x.h(), p.padding, p.dilation, p.kh(),
                                         p.stride);
  const std::size_t ow = conv_out_extent(x.w(), p.padding, p.dilation, p.kw(),
                                         p.stride);
  const long long H = static_cast<long long>(x.h());
  const long long W = static_cast<long long>(x.w());
  Tensor y(x.n(), p.out_channels(), oh, ow);
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t oc = 0; oc < p.out_channels(); ++oc)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = p.bias[oc];
          for (std::size_t ic = 0; ic < p.in_channels(); ++ic) {
            const double* xp = x.plane(n, ic);
            const double* wp = p.weights.plane(oc, ic);
            for (std::size_t r = 0; r < p.kh(); ++r) {
              const long long iy = static_cast<long long>(oy) * p.stride -
                                   p.padding +
                                   static_cast<long long>(r) * p.dilation;
              if (iy < 0 || iy >= H) continue;
              for (std::size_t c = 0; c < p.kw(); ++c) {
                const long long ix = static_cast<long long>(ox) * p.stride -
                                     p.padding +
                                     static_cast<long long>(c) * p.dilation;
                if (ix < 0 || ix >= W) continue;
                acc += wp[r * p.kw() + c] * xp[iy * W + ix];
              }
            }
          }
          y(n, oc, oy, ox) = acc;
        }
  return y;
}

struct ConvGrads {
  Tensor grad_x;
  Tensor grad_w;
  std::vector<double> grad_b;
};

inline ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p,
                                 const Tensor& grad_out) {
  p.validate();
  require(x.c() == p.in_channels(), "conv2d_backward: channel mismatch");
  const std::size_t oh = conv_out_extent(x.h(), p.padding, p.dilation, p.kh(),
                                         p.stride);
  const std::size_t ow = conv_out_extent(x.w(), p.padding, p.dilation, p.kw(),
                                         p.stride);
  require(grad_out.n() == x.n() && grad_out.c() == p.out_channels() &&
              grad_out.h() == oh && grad_out.w() == ow,
          "conv2d_backward: grad_out shape " + grad_out.shape_str() +
              " does not match forward output");
  const long long H = static_cast<long long>(x.h());
  const long long W = static_cast<long long>(x.w());
  ConvGrads g;
  g.grad_x = Tensor::zeros_like(x);
  g.grad_w = Tensor::zeros_like(p.weights);
  g.grad_b.assign(p.out_channels(), 0.0);
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t oc = 0; oc < p.out_channels(); ++oc)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double go = grad_out(n, oc, oy, ox);
          g.grad_b[oc] += go;
          for (std::size_t ic = 0; ic < p.in_channels(); ++ic) {
            const double* xp = x.plane(n, ic);
            double* gxp = g.grad_x.plane(n, ic);
            const double* wp = p.weights.plane(oc, ic);
            double* gwp = g.grad_w.plane(oc, ic);
            for (std::size_t r = 0; r < p.kh(); ++r) {
              const long long iy = static_cast<long long>(oy) * p.stride -
                                   p.padding +
                                   static_cast<long long>(r) * p.dilation;
              if (iy < 0 || iy >= H) continue;
              for (std::size_t c = 0; c < p.kw(); ++c) {
                const long long ix = static_cast<long long>(ox) * p.stride -
                                     p.padding +
                                     static_cast<long long>(c) * p.dilation;
                if (ix < 0 || ix >= W) continue;
                gwp[r * p.kw() + c] += go * xp[iy * W + ix];
                gxp[iy * W + ix] += go * wp[r * p.kw() + c];
              }
            }
          }
        }
  return g;
}

enum class Activation { relu, sigmoid };

inline Tensor activation_forward(const Tensor& x, Activation kind) {
  Tensor y = x;
  if (kind == Activation::relu) {
    for (double& v : y.raw()) v = v > 0.0 ? v : 0.0;
  } else {
    for (double& v : y.raw()) v = 1.0 / (1.0 + std::exp(-v));
  }
  return y;
}

// `x` is the forward input for relu; the forward *output* for sigmoid.
inline Tensor activation_backward(const Tensor& x, const Tensor& grad_out,
                                  Activation kind) {
  require_same_shape(x, grad_out, "activation_backward");
  Tensor g = grad_out;
  if (kind == Activation::relu) {
    const double* xp = x.data();
    double* gp = g.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xp[i] <= 0.0) gp[i] = 0.0;
  } else {
    const double* sp = x.data();
    double* gp = g.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      gp[i] *= sp[i] * (1.0 - sp[i]);
  }
  return g;
}

inline constexpr double kBceEps = 1e-7;

// Mean binary cross-entropy and its gradient w.r.t. the prediction.
// Predictions are clamped to [kBceEps, 1 - kBceEps] before the logs.
inline std::pair<double, Tensor> bce_loss(const Tensor& pred,
                                          const Tensor& target) {
  require_same_shape(pred, target, "bce_loss");
  for (double t : target.raw())
    require(t >= 0.0 && t <= 1.0, "bce_loss: target outside [0,1]");
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  Tensor grad = Tensor::zeros_like(pred);
  const double* pp = pred.data();
  const double* tp = target.data();
  double* gp = grad.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::min(std::max(pp[i], kBceEps), 1.0 - kBceEps);
    const double t = tp[i];
    loss += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
    if (pp[i] >= kBceEps && pp[i] <= 1.0 - kBceEps)
      gp[i] = inv_n * (p - t) / (p * (1.0 - p));
  }
  return {loss * inv_n, std::move(grad)};
}

// Bilinear upsampling by an integer factor, align-corners-false convention:
// source coordinate (d + 0.5) / factor - 0.5 with border replication.
inline Tensor upsample_bilinear(const Tensor& x, int factor) {
  require(factor >= 1, "upsample_bilinear: factor must be >= 1");
  if (factor == 1) return x;
  const std::size_t oh = x.h() * factor;
  const std::size_t ow = x.w() * factor;
  const long long H = static_cast<long long>(x.h());
  const long long W = static_cast<long long>(x.w());
  const double inv = 1.0 / factor;
  Tensor y(x.n(), x.c(), oh, ow);
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t c = 0; c < x.c(); ++c) {
      const double* xp = x.plane(n, c);
      double* yp = y.plane(n, c);
      for (std::size_t oy = 0; oy < oh; ++oy) {
        const double sy = (oy + 0.5) * inv - 0.5;
        long long y0 = static_cast<long long>(std::floor(sy));
        const double dy = sy - y0;
        const long long y0c = std::min(std::max(y0, 0ll), H - 1);
        const long long y1c = std::min(std::max(y0 + 1, 0ll), H - 1);
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double sx = (ox + 0.5) * inv - 0.5;
          long long x0 = static_cast<long long>(std::floor(sx));
          const double dx = sx - x0;
          const long long x0c = std::min(std::max(x0, 0ll), W - 1);
          const long long x1c = std::min(std::max(x0 + 1, 0ll), W - 1);
          yp[oy * ow + ox] = (1.0 - dy) * ((1.0 - dx) * xp[y0c * W + x0c] +
                                           dx * xp[y0c * W + x1c]) +
                             dy * ((1.0 - dx) * xp[y1c * W + x0c] +
                                   dx * xp[y1c * W + x1c]);
        }
      }
    }
  return y;
}

inline Tensor upsample_bilinear_backward(const Tensor& grad_out, int factor,
                                         std::size_t in_h, std::size_t in_w) {
  require(factor >= 1, "upsample_bilinear_backward: factor must be >= 1");
  require(grad_out.h() == in_h * factor && grad_out.w() == in_w * factor,
          "upsample_bilinear_backward: grad_out extents do not match");
  if (factor == 1) return grad_out;
  const long long H = static_cast<long long>(in_h);
  const long long W = static_cast<long long>(in_w);
  const double inv = 1.0 / factor;
  Tensor gx(grad_out.n(), grad_out.c(), in_h, in_w);
  for (std::size_t n = 0; n < grad_out.n(); ++n)
    for (std::size_t c = 0; c < grad_out.c(); ++c) {
      const double* gp = grad_out.plane(n, c);
      double* xp = gx.plane(n, c);
      for (std::size_t oy = 0; oy < grad_out.h(); ++oy) {
        const double sy = (oy + 0.5) * inv - 0.5;
        long long y0 = static_cast<long long>(std::floor(sy));
        const double dy = sy - y0;
        const long long y0c = std::min(std::max(y0, 0ll), H - 1);
        const long long y1c = std::min(std::max(y0 + 1, 0ll), H - 1);
        for (std::size_t ox = 0; ox < grad_out.w(); ++ox) {
          const double sx = (ox + 0.5) * inv - 0.5;
          long long x0 = static_cast<long long>(std::floor(sx));
          const double dx = sx - x0;
          const long long x0c = std::min(std::max(x0, 0ll), W - 1);
          const long long x1c = std::min(std::max(x0 + 1, 0ll), W - 1);
          const double g = gp[oy * grad_out.w() + ox];
          xp[y0c * W + x0c] += (1.0 - dy) * (1.0 - dx) * g;
          xp[y0c * W + x1c] += (1.0 - dy) * dx * g;
          xp[y1c * W + x0c] += dy * (1.0 - dx) * g;
          xp[y1c * W + x1c] += dy * dx * g;
        }
      }
    }
  return gx;
}

}  // namespace mgs
