#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mgs/geometry.hpp"
#include "mgs/mgs_block.hpp"
#include "mgs/nn.hpp"
#include "mgs/offsets.hpp"
#include "mgs/rng.hpp"
#include "mgs/synth.hpp"
#include "mgs/tensor.hpp"

namespace mgs {

struct NetConfig {
  int h = 64, w = 64;
  std::array<int, 3> channels{16, 32, 64};
  double lambda = 1.0;
  OffsetGenerator generator = OffsetGenerator::geometric;
  std::uint64_t seed = 1;
  int epochs = 20;
  double lr = 0.05;
  double momentum = 0.9;
  int batch = 8;
  double clamp = 0.0;  // offset clamp; <= 0 selects max(H', W')

  void validate() const {
    require(h >= 8 && w >= 8 && h % 4 == 0 && w % 4 == 0,
            "config: size must be at least 8 and divisible by 4");
    require(channels[0] >= 1 && channels[1] >= 1 && channels[2] >= 1,
            "config: channel counts must be positive");
    require(epochs >= 1, "config: epochs must be >= 1");
    require(batch >= 1, "config: batch must be >= 1");
    require(std::isfinite(lr) && lr >= 0.0, "config: lr must be >= 0");
    require(std::isfinite(momentum) && momentum >= 0.0 && momentum < 1.0,
            "config: momentum must lie in [0, 1)");
    require(std::isfinite(lambda) && lambda >= 0.0,
            "config: lambda must be >= 0");
  }
};

// Per-sample guidance for the deformable stage: precomputed offsets for the
// geometric generator, a depth feature map for the learned one.
struct ModalityInput {
  OffsetField off;
  Tensor guidance;
};

struct NetCache {
  Tensor e1_pre, e1_act, e2_pre, e2_act, e3_pre, e3_act;
  MgsCache mgs;
  Tensor merged, u1, d1_pre, d1_act, u2, d2_pre, d2_act, h_pre, out;
};

struct ParamGrad {
  Tensor w;
  std::vector<double> b;
};

struct NetGrads {
  std::vector<ParamGrad> params;

  void add(const NetGrads& o) {
    require(params.size() == o.params.size(), "grads: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      axpy(1.0, o.params[i].w, params[i].w);
      for (std::size_t j = 0; j < params[i].b.size(); ++j)
        params[i].b[j] += o.params[i].b[j];
    }
  }

  void scale(double s) {
    for (auto& p : params) {
      scale_inplace(p.w, s);
      for (double& v : p.b) v *= s;
    }
  }
};

// Three stride-controlled encoder convolutions take RGB to H/4 x W/4, the
// modality-guided block refines the deepest feature, and two upsample+conv
// stages with a sigmoid head recover a full-resolution saliency map. The
// network is fully convolutional; any input with extents divisible by 4 works.
class SaliencyNet {
 public:
  explicit SaliencyNet(const NetConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int c0 = cfg_.channels[0], c1 = cfg_.channels[1],
              c2 = cfg_.channels[2];
    enc1 = make_conv(c0, 3, 3, 2, 1);
    enc2 = make_conv(c1, c0, 3, 2, 1);
    enc3 = make_conv(c2, c1, 3, 1, 1);
    mgs = make_mgs(c2, 1, 1, cfg_.lambda, cfg_.generator);
    dec1 = make_conv(c1, c2, 3, 1, 1);
    dec2 = make_conv(c0, c1, 3, 1, 1);
    head = make_conv(1, c0, 1);
  }

  const NetConfig& config() const { return cfg_; }

  // Seeded initialization; the offset predictor eta stays zero so the learned
  // generator starts out as a standard convolution.
  void init() {
    Rng rng(mix_seed(cfg_.seed));
    he_init(enc1, rng);
    he_init(enc2, rng);
    he_init(enc3, rng);
    he_init(mgs.down, rng);
    he_init(mgs.deform, rng);
    he_init(mgs.up, rng);
    he_init(dec1, rng);
    he_init(dec2, rng);
    he_init(head, rng);
  }

  std::vector<std::pair<std::string, ConvParams*>> named_params() {
    return {{"enc1", &enc1},         {"enc2", &enc2},
            {"enc3", &enc3},         {"mgs.down", &mgs.down},
            {"mgs.deform", &mgs.deform}, {"mgs.up", &mgs.up},
            {"mgs.eta", &mgs.eta},   {"dec1", &dec1},
            {"dec2", &dec2},         {"head", &head}};
  }
  std::vector<std::pair<std::string, const ConvParams*>> named_params() const {
    return {{"enc1", &enc1},         {"enc2", &enc2},
            {"enc3", &enc3},         {"mgs.down", &mgs.down},
            {"mgs.deform", &mgs.deform}, {"mgs.up", &mgs.up},
            {"mgs.eta", &mgs.eta},   {"dec1", &dec1},
            {"dec2", &dec2},         {"head", &head}};
  }

  NetGrads zero_grads() const {
    NetGrads g;
    for (const auto& [name, p] : named_params()) {
      (void)name;
      g.params.push_back(
          {Tensor::zeros_like(p->weights), std::vector<double>(p->bias.size())});
    }
    return g;
  }

  // Depth at input resolution -> guidance at feature resolution. Missing
  // depth (an empty tensor) degrades to zero offsets / zero guidance.
  ModalityInput prepare(const Tensor& depth, const CameraIntrinsics& k) const {
    require(!depth.empty(), "prepare: depth is empty");
    require(depth.h() % 4 == 0 && depth.w() % 4 == 0,
            "prepare: depth extents must be divisible by 4");
    ModalityInput m;
    const Tensor small = nearest_downsample(depth, 4);
    if (cfg_.generator == OffsetGenerator::geometric) {
      GeometricOffsetConfig oc;
      oc.dilation = mgs.deform.dilation;
      oc.clamp = cfg_.clamp;
      m.off = geometric_offsets(small, k.scaled(0.25), oc);
    } else {
      m.guidance = small;
    }
    return m;
  }

  ModalityInput prepare_missing(std::size_t h, std::size_t w) const {
    ModalityInput m;
    if (cfg_.generator == OffsetGenerator::geometric)
      m.off = OffsetField(1, 3, h / 4, w / 4);
    else
      m.guidance = Tensor(1, 1, h / 4, w / 4);
    return m;
  }

  Tensor forward(const Tensor& rgb, const ModalityInput& mod,
                 NetCache& cache) const {
    require(rgb.c() == 3, "forward: input must have 3 channels");
    require(rgb.h() % 4 == 0 && rgb.w() % 4 == 0,
            "forward: input extents must be divisible by 4");
    cache.e1_pre = conv2d_forward(rgb, enc1);
    cache.e1_act = activation_forward(cache.e1_pre, Activation::relu);
    cache.e2_pre = conv2d_forward(cache.e1_act, enc2);
    cache.e2_act = activation_forward(cache.e2_pre, Activation::relu);
    cache.e3_pre = conv2d_forward(cache.e2_act, enc3);
    cache.e3_act = activation_forward(cache.e3_pre, Activation::relu);
    if (mgs.lambda == 0.0) {
      // Baseline configuration: the branch is absent entirely.
      cache.merged = cache.e3_act;
    } else if (cfg_.generator == OffsetGenerator::geometric) {
      cache.merged = mgs_forward(cache.e3_act, cache.e3_act, mgs, mod.off,
                                 cache.mgs);
    } else {
      cache.merged = mgs_forward(cache.e3_act, cache.e3_act, mgs, mod.guidance,
                                 cache.mgs);
    }
    cache.u1 = upsample_bilinear(cache.merged, 2);
    cache.d1_pre = conv2d_forward(cache.u1, dec1);
    cache.d1_act = activation_forward(cache.d1_pre, Activation::relu);
    cache.u2 = upsample_bilinear(cache.d1_act, 2);
    cache.d2_pre = conv2d_forward(cache.u2, dec2);
    cache.d2_act = activation_forward(cache.d2_pre, Activation::relu);
    cache.h_pre = conv2d_forward(cache.d2_act, head);
    cache.out = activation_forward(cache.h_pre, Activation::sigmoid);
    return cache.out;
  }

  NetGrads backward(const Tensor& rgb, const NetCache& cache,
                    const Tensor& grad_out) const {
    NetGrads g = zero_grads();
    const Tensor g_h_pre =
        activation_backward(cache.out, grad_out, Activation::sigmoid);
    ConvGrads head_g = conv2d_backward(cache.d2_act, head, g_h_pre);
    g.params[9] = {std::move(head_g.grad_w), std::move(head_g.grad_b)};
    const Tensor g_d2_pre =
        activation_backward(cache.d2_pre, head_g.grad_x, Activation::relu);
    ConvGrads dec2_g = conv2d_backward(cache.u2, dec2, g_d2_pre);
    g.params[8] = {std::move(dec2_g.grad_w), std::move(dec2_g.grad_b)};
    const Tensor g_d1_act = upsample_bilinear_backward(
        dec2_g.grad_x, 2, cache.d1_act.h(), cache.d1_act.w());
    const Tensor g_d1_pre =
        activation_backward(cache.d1_pre, g_d1_act, Activation::relu);
    ConvGrads dec1_g = conv2d_backward(cache.u1, dec1, g_d1_pre);
    g.params[7] = {std::move(dec1_g.grad_w), std::move(dec1_g.grad_b)};
    const Tensor g_merged = upsample_bilinear_backward(
        dec1_g.grad_x, 2, cache.merged.h(), cache.merged.w());
    Tensor g_e3_act;
    if (mgs.lambda == 0.0) {
      g_e3_act = g_merged;
    } else {
      MgsGrads mg = mgs_backward(cache.e3_act, mgs, cache.mgs, g_merged);
      g.params[3] = {std::move(mg.down.grad_w), std::move(mg.down.grad_b)};
      g.params[4] = {std::move(mg.deform.grad_w), std::move(mg.deform.grad_b)};
      g.params[5] = {std::move(mg.up.grad_w), std::move(mg.up.grad_b)};
      if (cfg_.generator == OffsetGenerator::learned)
        g.params[6] = {std::move(mg.eta.grad_w), std::move(mg.eta.grad_b)};
      g_e3_act = std::move(mg.grad_f5);
      axpy(1.0, mg.grad_f4, g_e3_act);
    }
    const Tensor g_e3_pre =
        activation_backward(cache.e3_pre, g_e3_act, Activation::relu);
    ConvGrads enc3_g = conv2d_backward(cache.e2_act, enc3, g_e3_pre);
    g.params[2] = {std::move(enc3_g.grad_w), std::move(enc3_g.grad_b)};
    const Tensor g_e2_pre =
        activation_backward(cache.e2_pre, enc3_g.grad_x, Activation::relu);
    ConvGrads enc2_g = conv2d_backward(cache.e1_act, enc2, g_e2_pre);
    g.params[1] = {std::move(enc2_g.grad_w), std::move(enc2_g.grad_b)};
    const Tensor g_e1_pre =
        activation_backward(cache.e1_pre, enc2_g.grad_x, Activation::relu);
    ConvGrads enc1_g = conv2d_backward(rgb, enc1, g_e1_pre);
    g.params[0] = {std::move(enc1_g.grad_w), std::move(enc1_g.grad_b)};
    return g;
  }

  ConvParams enc1, enc2, enc3, dec1, dec2, head;
  MgsParams mgs;

 private:
  NetConfig cfg_;
};

inline void sgd_step(SaliencyNet& net, const NetGrads& g, NetGrads& velocity,
                     double lr, double momentum) {
  auto params = net.named_params();
  require(params.size() == g.params.size() &&
              params.size() == velocity.params.size(),
          "sgd_step: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    ConvParams& p = *params[i].second;
    Tensor& vw = velocity.params[i].w;
    scale_inplace(vw, momentum);
    axpy(1.0, g.params[i].w, vw);
    axpy(-lr, vw, p.weights);
    for (std::size_t j = 0; j < p.bias.size(); ++j) {
      double& vb = velocity.params[i].b[j];
      vb = momentum * vb + g.params[i].b[j];
      p.bias[j] -= lr * vb;
    }
  }
}

struct TrainResult {
  std::vector<double> epoch_loss;
};

// Plain SGD with momentum over per-sample forward/backward passes, gradients
// averaged over each mini-batch. Deterministic for a fixed (config, dataset):
// shuffling comes from a seeded generator and samples are visited in a fixed
// order within each batch. A non-finite loss aborts with a diagnostic.
inline TrainResult train(SaliencyNet& net,
                         const std::vector<SynthSample>& data,
                         std::ostream* log = nullptr) {
  const NetConfig& cfg = net.config();
  require(!data.empty(), "train: dataset is empty");
  std::vector<ModalityInput> mods;
  mods.reserve(data.size());
  for (const auto& s : data) mods.push_back(net.prepare(s.depth, s.intrinsics));
  NetGrads velocity = net.zero_grads();
  Rng shuffle_rng(derive_seed(cfg.seed, 1, 0));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainResult result;
  NetCache cache;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const std::size_t j = shuffle_rng.uniform_int(i + 1);
      std::swap(order[i], order[j]);
    }
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(start + batch, order.size());
      NetGrads acc = net.zero_grads();
      for (std::size_t k = start; k < end; ++k) {
        const SynthSample& s = data[order[k]];
        const Tensor out = net.forward(s.rgb, mods[order[k]], cache);
        const auto [loss, grad] = bce_loss(out, s.gt);
        if (!std::isfinite(loss)) {
          std::ostringstream msg;
          msg << "training diverged: non-finite loss at epoch " << (epoch + 1)
              << ", sample " << order[k];
          throw std::runtime_error(msg.str());
        }
        epoch_sum += loss;
        acc.add(net.backward(s.rgb, cache, grad));
      }
      acc.scale(1.0 / static_cast<double>(end - start));
      sgd_step(net, acc, velocity, cfg.lr, cfg.momentum);
    }
    const double mean_loss = epoch_sum / static_cast<double>(data.size());
    result.epoch_loss.push_back(mean_loss);
    if (log)
      *log << (epoch + 1) << ',' << std::setprecision(17) << mean_loss << '\n';
  }
  return result;
}

// Forward-only pass; an empty depth tensor selects the zero-offset fallback.
inline Tensor infer_map(const SaliencyNet& net, const Tensor& rgb,
                        const Tensor& depth, const CameraIntrinsics& k) {
  NetCache cache;
  const ModalityInput mod = depth.empty()
                                ? net.prepare_missing(rgb.h(), rgb.w())
                                : net.prepare(depth, k);
  return net.forward(rgb, mod, cache);
}

}  // namespace mgs
