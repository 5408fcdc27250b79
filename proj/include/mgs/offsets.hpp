#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "mgs/geometry.hpp"
#include "mgs/nn.hpp"
#include "mgs/offset_field.hpp"
#include "mgs/tensor.hpp"

namespace mgs {

struct GeometricOffsetConfig {
  int dilation = 1;      // tap spacing of the regular grid, in pixels
  int plane_window = 5;  // square window for the local plane fit
  double clamp = 0.0;    // |offset| bound; <= 0 selects max(H, W)
};

// Depth-driven sampling offsets for a 3x3 deformable convolution. Each valid
// pixel is back-projected, a local plane is fit to its neighborhood, a 3x3
// grid of 3D points is laid out on that plane around the pixel's point, and
// the grid is reprojected; the offsets are the reprojections' displacements
// from the regular dilated grid. The in-plane step is dilation * Z / fx, so a
// fronto-parallel plane under fx == fy reprojects exactly onto the regular
// grid and every offset vanishes. Pixels with invalid depth, a degenerate
// plane basis, or grid points behind the camera contribute zero offsets; the
// center tap is identically zero by construction.
inline OffsetField geometric_offsets(const Tensor& depth,
                                     const CameraIntrinsics& k,
                                     const GeometricOffsetConfig& cfg = {}) {
  require(depth.c() == 1, "geometric_offsets: depth must have one channel");
  require(cfg.dilation >= 1, "geometric_offsets: dilation must be >= 1");
  const double bound = cfg.clamp > 0.0
                           ? cfg.clamp
                           : static_cast<double>(std::max(depth.h(), depth.w()));
  const PointCloud pc = backproject(depth, k);
  const Tensor normals = fit_local_plane(pc, cfg.plane_window);
  OffsetField off(depth.n(), 3, depth.h(), depth.w());
  const double d = static_cast<double>(cfg.dilation);
  for (std::size_t n = 0; n < depth.n(); ++n) {
    const double* xs = pc.xyz.plane(n, 0);
    const double* ys = pc.xyz.plane(n, 1);
    const double* zs = pc.xyz.plane(n, 2);
    const double* mp = pc.mask.plane(n, 0);
    const double* nx = normals.plane(n, 0);
    const double* ny = normals.plane(n, 1);
    const double* nz = normals.plane(n, 2);
    for (std::size_t v = 0; v < depth.h(); ++v)
      for (std::size_t u = 0; u < depth.w(); ++u) {
        const std::size_t i = v * depth.w() + u;
        if (mp[i] == 0.0) continue;
        const double nvx = nx[i], nvy = ny[i], nvz = nz[i];
        // In-plane basis: the image x axis projected onto the plane, with the
        // y axis as a fallback when the plane contains the view direction.
        double e1x = 1.0 - nvx * nvx;
        double e1y = -nvx * nvy;
        double e1z = -nvx * nvz;
        double len = std::sqrt(e1x * e1x + e1y * e1y + e1z * e1z);
        if (len < 1e-8) {
          e1x = -nvy * nvx;
          e1y = 1.0 - nvy * nvy;
          e1z = -nvy * nvz;
          len = std::sqrt(e1x * e1x + e1y * e1y + e1z * e1z);
          if (len < 1e-8) continue;
        }
        e1x /= len;
        e1y /= len;
        e1z /= len;
        const double e2x = nvy * e1z - nvz * e1y;
        const double e2y = nvz * e1x - nvx * e1z;
        const double e2z = nvx * e1y - nvy * e1x;
        const double z = zs[i];
        const double s = d * z / k.fx;
        for (int b = -1; b <= 1; ++b)
          for (int a = -1; a <= 1; ++a) {
            if (a == 0 && b == 0) continue;
            const int tap = (b + 1) * 3 + (a + 1);
            const double px = xs[i] + s * (a * e1x + b * e2x);
            const double py = ys[i] + s * (a * e1y + b * e2y);
            const double pz = z + s * (a * e1z + b * e2z);
            if (pz <= 0.0) continue;
            const double qu = k.fx * px / pz + k.cx;
            const double qv = k.fy * py / pz + k.cy;
            const double dyv = qv - (static_cast<double>(v) + b * d);
            const double dxv = qu - (static_cast<double>(u) + a * d);
            off.dy(n, tap, v, u) = std::clamp(dyv, -bound, bound);
            off.dx(n, tap, v, u) = std::clamp(dxv, -bound, bound);
          }
      }
  }
  return off;
}

// Learned offsets: a plain 3x3 convolution over a guidance feature map whose
// output channels are read as the 18-channel offset field. Zero-initialized
// weights make the deformable convolution start out as its regular
// counterpart.
inline OffsetField learned_offsets(const Tensor& guidance,
                                   const ConvParams& eta) {
  require(eta.out_channels() == 18 && eta.kh() == 3 && eta.kw() == 3,
          "learned_offsets: predictor must map to 18 channels with a 3x3 kernel");
  OffsetField off;
  off.kernel = 3;
  off.data = conv2d_forward(guidance, eta);
  return off;
}

inline ConvGrads learned_offsets_backward(const Tensor& guidance,
                                          const ConvParams& eta,
                                          const OffsetField& grad_off) {
  return conv2d_backward(guidance, eta, grad_off.data);
}

}  // namespace mgs
