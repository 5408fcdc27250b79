#pragma once

#include <algorithm>
#include <cstddef>

#include "mgs/deform_conv.hpp"
#include "mgs/nn.hpp"
#include "mgs/offset_field.hpp"
#include "mgs/offsets.hpp"
#include "mgs/tensor.hpp"

namespace mgs {

enum class OffsetGenerator { geometric, learned };

// Modality-guided residual branch: a 1x1 reduction, a 3x3 deformable
// convolution whose sampling grid is steered by the other modality, and a 1x1
// expansion, merged back as out = f5 + lambda * branch. The blend weight
// lambda is a fixed hyperparameter, not a trained one.
struct MgsParams {
  ConvParams down;    // 1x1, channels -> reduced
  ConvParams deform;  // 3x3 deformable, reduced -> reduced, extent-preserving
  ConvParams up;      // 1x1, reduced -> channels
  ConvParams eta;     // 3x3 offset predictor (learned generator only)
  double lambda = 1.0;
  OffsetGenerator generator = OffsetGenerator::geometric;

  std::size_t channels() const { return down.in_channels(); }
  std::size_t reduced() const { return down.out_channels(); }

  void validate() const {
    down.validate();
    deform.validate();
    up.validate();
    require(down.kh() == 1 && down.kw() == 1 && down.stride == 1 &&
                down.padding == 0,
            "mgs: reduction must be a stride-1 1x1 convolution");
    require(up.kh() == 1 && up.kw() == 1 && up.stride == 1 && up.padding == 0,
            "mgs: expansion must be a stride-1 1x1 convolution");
    require(deform.kh() == 3 && deform.kw() == 3 && deform.stride == 1 &&
                deform.padding == deform.dilation,
            "mgs: aligner must be an extent-preserving 3x3 convolution");
    require(deform.in_channels() == down.out_channels() &&
                deform.out_channels() == up.in_channels(),
            "mgs: channel chain down -> deform -> up is inconsistent");
    require(up.out_channels() == down.in_channels(),
            "mgs: expansion must restore the input channel count");
    if (generator == OffsetGenerator::learned) {
      eta.validate();
      require(eta.out_channels() == 18 && eta.kh() == 3 && eta.kw() == 3 &&
                  eta.stride == 1 && eta.padding == 1 && eta.dilation == 1,
              "mgs: offset predictor must be an extent-preserving 3x3 "
              "convolution onto 18 channels");
    }
  }
};

inline MgsParams make_mgs(std::size_t channels, std::size_t guidance_channels,
                          int dilation = 1, double lambda = 1.0,
                          OffsetGenerator generator = OffsetGenerator::geometric) {
  const std::size_t reduced = std::max<std::size_t>(1, channels / 8);
  MgsParams p;
  p.down = make_conv(reduced, channels, 1);
  p.deform = make_conv(reduced, reduced, 3, 1, dilation, dilation);
  p.up = make_conv(channels, reduced, 1);
  p.eta = make_conv(18, guidance_channels, 3, 1, 1, 1);
  p.lambda = lambda;
  p.generator = generator;
  return p;
}

struct MgsCache {
  Tensor d_pre, d_act;  // reduction output before/after ReLU
  Tensor a_pre, a_act;  // aligner output before/after ReLU
  Tensor fm;            // expansion output (linear)
  OffsetField off;
  Tensor guidance;  // retained for the learned generator's backward pass
};

inline Tensor residual_merge(const Tensor& f5, const Tensor& fm,
                             double lambda) {
  require_same_shape(f5, fm, "residual_merge");
  Tensor out = f5;
  if (lambda != 0.0) axpy(lambda, fm, out);
  return out;
}

namespace detail {

inline Tensor mgs_branch(const Tensor& f4, const MgsParams& p, MgsCache& cache) {
  cache.d_pre = conv2d_forward(f4, p.down);
  cache.d_act = activation_forward(cache.d_pre, Activation::relu);
  cache.a_pre = deform_conv_forward(cache.d_act, p.deform, cache.off);
  cache.a_act = activation_forward(cache.a_pre, Activation::relu);
  cache.fm = conv2d_forward(cache.a_act, p.up);
  return cache.fm;
}

}  // namespace detail

// Geometric generator: offsets are a precomputed, gradient-free input.
inline Tensor mgs_forward(const Tensor& f4, const Tensor& f5,
                          const MgsParams& p, const OffsetField& off,
                          MgsCache& cache) {
  require(p.generator == OffsetGenerator::geometric,
          "mgs_forward: this overload expects the geometric generator");
  require_same_shape(f4, f5, "mgs_forward");
  cache.off = off;
  return residual_merge(f5, detail::mgs_branch(f4, p, cache), p.lambda);
}

// Learned generator: offsets come from the eta convolution over a guidance map.
inline Tensor mgs_forward(const Tensor& f4, const Tensor& f5,
                          const MgsParams& p, const Tensor& guidance,
                          MgsCache& cache) {
  require(p.generator == OffsetGenerator::learned,
          "mgs_forward: this overload expects the learned generator");
  require_same_shape(f4, f5, "mgs_forward");
  cache.guidance = guidance;
  cache.off = learned_offsets(guidance, p.eta);
  return residual_merge(f5, detail::mgs_branch(f4, p, cache), p.lambda);
}

struct MgsGrads {
  Tensor grad_f4;
  Tensor grad_f5;
  ConvGrads down, up;
  DeformConvGrads deform;
  ConvGrads eta;        // learned generator only
  Tensor grad_guidance;  // learned generator only
};

inline MgsGrads mgs_backward(const Tensor& f4, const MgsParams& p,
                             const MgsCache& cache, const Tensor& grad_out) {
  MgsGrads g;
  g.grad_f5 = grad_out;
  Tensor grad_fm = Tensor::zeros_like(grad_out);
  axpy(p.lambda, grad_out, grad_fm);
  g.up = conv2d_backward(cache.a_act, p.up, grad_fm);
  const Tensor grad_a_pre =
      activation_backward(cache.a_pre, g.up.grad_x, Activation::relu);
  g.deform = deform_conv_backward(cache.d_act, p.deform, cache.off, grad_a_pre);
  const Tensor grad_d_pre =
      activation_backward(cache.d_pre, g.deform.grad_x, Activation::relu);
  g.down = conv2d_backward(f4, p.down, grad_d_pre);
  g.grad_f4 = g.down.grad_x;
  if (p.generator == OffsetGenerator::learned) {
    g.eta = learned_offsets_backward(cache.guidance, p.eta, g.deform.grad_off);
    g.grad_guidance = g.eta.grad_x;
  }
  return g;
}

}  // namespace mgs
