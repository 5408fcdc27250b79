#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mgs/geometry.hpp"
#include "mgs/rng.hpp"
#include "mgs/tensor.hpp"

namespace mgs {

// One synthetic RGB-D scene: a gently sloped background wall around 3 m with
// one to three nearer shapes (1-2 m). Foreground colors come from the same
// muted palette as the background, so the photometric contrast is low while
// the depth contrast stays high.
struct SynthSample {
  Tensor rgb;    // 1 x 3 x H x W, values in [0,1]
  Tensor depth;  // 1 x 1 x H x W, meters, > 0 everywhere
  Tensor gt;     // 1 x 1 x H x W, values in {0,1}
  CameraIntrinsics intrinsics;
};

namespace detail {

inline constexpr std::array<std::array<double, 3>, 4> kPalette = {{
    {0.45, 0.42, 0.38},
    {0.38, 0.44, 0.42},
    {0.42, 0.40, 0.47},
    {0.47, 0.45, 0.40},
}};

struct SynthShape {
  bool ellipse = false;
  double cy = 0, cx = 0;  // center, pixels
  double hy = 0, hx = 0;  // half extents, pixels
  double depth = 0;       // meters
  int color = 0;

  bool covers(double v, double u) const {
    const double dv = (v - cy) / hy;
    const double du = (u - cx) / hx;
    return ellipse ? dv * dv + du * du <= 1.0
                   : std::abs(dv) <= 1.0 && std::abs(du) <= 1.0;
  }
};

}  // namespace detail

// Deterministic scene synthesis: the same seed always yields a bit-identical
// sample. The foreground fraction is kept inside [2%, 60%] by redrawing the
// shape set (from the same stream) when rasterization lands outside it.
inline SynthSample synth_sample(std::uint64_t seed, std::size_t H,
                                std::size_t W) {
  require(H >= 8 && W >= 8, "synth_sample: extents must be at least 8");
  Rng rng(mix_seed(seed));
  SynthSample s;
  s.rgb = Tensor(1, 3, H, W);
  s.depth = Tensor(1, 1, H, W);
  s.gt = Tensor(1, 1, H, W);
  s.intrinsics = {64.0, 64.0, static_cast<double>(W) / 2.0,
                  static_cast<double>(H) / 2.0};

  const double z0 = rng.uniform(2.8, 3.2);
  const double gx = rng.uniform(-0.1, 0.1);
  const double gy = rng.uniform(-0.1, 0.1);
  const int bg_color = static_cast<int>(rng.uniform_int(4));

  double* dp = s.depth.plane(0, 0);
  double* gp = s.gt.plane(0, 0);
  std::vector<int> color_idx(H * W, bg_color);
  for (std::size_t v = 0; v < H; ++v)
    for (std::size_t u = 0; u < W; ++u)
      dp[v * W + u] = z0 +
                      gx * (static_cast<double>(u) / W - 0.5) +
                      gy * (static_cast<double>(v) / H - 0.5);

  const double lo = 0.02 * static_cast<double>(H * W);
  const double hi = 0.60 * static_cast<double>(H * W);
  std::vector<double> fg_depth;
  std::vector<int> fg_color;
  for (int attempt = 0; attempt < 100; ++attempt) {
    const std::size_t count = 1 + rng.uniform_int(3);
    std::vector<detail::SynthShape> shapes(count);
    for (auto& sh : shapes) {
      sh.ellipse = rng.uniform_int(2) == 1;
      sh.cy = rng.uniform(0.25, 0.75) * H;
      sh.cx = rng.uniform(0.25, 0.75) * W;
      sh.hy = rng.uniform(0.09, 0.20) * H;
      sh.hx = rng.uniform(0.09, 0.20) * W;
      sh.depth = rng.uniform(1.0, 2.0);
      sh.color = static_cast<int>(rng.uniform_int(4));
    }
    fg_depth.assign(H * W, 0.0);
    fg_color.assign(H * W, -1);
    std::size_t covered = 0;
    for (std::size_t v = 0; v < H; ++v)
      for (std::size_t u = 0; u < W; ++u) {
        const std::size_t i = v * W + u;
        for (const auto& sh : shapes) {
          if (!sh.covers(static_cast<double>(v), static_cast<double>(u)))
            continue;
          if (fg_color[i] < 0 || sh.depth < fg_depth[i]) {
            fg_depth[i] = sh.depth;
            fg_color[i] = sh.color;
          }
        }
        if (fg_color[i] >= 0) ++covered;
      }
    if (static_cast<double>(covered) >= lo &&
        static_cast<double>(covered) <= hi)
      break;
    require(attempt < 99, "synth_sample: could not satisfy the coverage band");
  }
  for (std::size_t i = 0; i < H * W; ++i)
    if (fg_color[i] >= 0) {
      dp[i] = fg_depth[i];
      gp[i] = 1.0;
      color_idx[i] = fg_color[i];
    }

  const double amp = 0.12;
  for (std::size_t i = 0; i < H * W; ++i) {
    const auto& base = detail::kPalette[static_cast<std::size_t>(color_idx[i])];
    for (std::size_t c = 0; c < 3; ++c) {
      double val = base[c] + rng.uniform(-amp, amp);
      s.rgb.plane(0, c)[i] = std::min(1.0, std::max(0.0, val));
    }
  }
  return s;
}

}  // namespace mgs
