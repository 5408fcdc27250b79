#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mgs/nn.hpp"
#include "mgs/offset_field.hpp"
#include "mgs/tensor.hpp"

namespace mgs {

// Bilinear read of one channel plane at a fractional location. Neighbors that
// fall outside the plane contribute zero, matching the convolution's zero
// padding. Zero-weight corners are skipped so that integer locations reproduce
// the stored value bit-exactly.
inline double bilinear_sample(const double* plane, std::size_t h,
                              std::size_t w, double qy, double qx) {
  const long long H = static_cast<long long>(h);
  const long long W = static_cast<long long>(w);
  const long long y0 = static_cast<long long>(std::floor(qy));
  const long long x0 = static_cast<long long>(std::floor(qx));
  const double dy = qy - static_cast<double>(y0);
  const double dx = qx - static_cast<double>(x0);
  double acc = 0.0;
  for (int ry = 0; ry < 2; ++ry) {
    const double wy = ry == 0 ? 1.0 - dy : dy;
    if (wy == 0.0) continue;
    const long long y = y0 + ry;
    if (y < 0 || y >= H) continue;
    for (int rx = 0; rx < 2; ++rx) {
      const double wx = rx == 0 ? 1.0 - dx : dx;
      if (wx == 0.0) continue;
      const long long x = x0 + rx;
      if (x < 0 || x >= W) continue;
      acc += wy * wx * plane[y * W + x];
    }
  }
  return acc;
}

inline double bilinear_sample(const Tensor& x, std::size_t n, std::size_t c,
                              double qy, double qx) {
  return bilinear_sample(x.plane(n, c), x.h(), x.w(), qy, qx);
}

namespace detail {

// Interpolation cell used by the backward pass. At exact integer coordinates
// the cell is taken to the left/top so the derivative is the left-cell limit.
struct BilinearCell {
  long long y0, x0;
  double dy, dx;
};

inline BilinearCell backward_cell(double qy, double qx) {
  BilinearCell cell;
  cell.y0 = static_cast<long long>(std::floor(qy));
  cell.x0 = static_cast<long long>(std::floor(qx));
  cell.dy = qy - static_cast<double>(cell.y0);
  cell.dx = qx - static_cast<double>(cell.x0);
  if (cell.dy == 0.0) {
    cell.y0 -= 1;
    cell.dy = 1.0;
  }
  if (cell.dx == 0.0) {
    cell.x0 -= 1;
    cell.dx = 1.0;
  }
  return cell;
}

}  // namespace detail

inline void check_offset_extents(const OffsetField& off, std::size_t n,
                                 std::size_t oh, std::size_t ow) {
  require(off.data.n() == n && off.data.h() == oh && off.data.w() == ow,
          "offset field extents " + off.data.shape_str() +
              " do not match convolution output " + std::to_string(n) + "x?x" +
              std::to_string(oh) + "x" + std::to_string(ow));
}

// Deformable convolution: each kernel tap samples the input at its regular
// grid position plus the tap's offset, through bilinear interpolation. The
// offset field is shared across input and output channels. With an all-zero
// field this is bit-identical to conv2d_forward.
inline Tensor deform_conv_forward(const Tensor& x, const ConvParams& p,
                                  const OffsetField& off) {
  p.validate();
  require(p.kh() == p.kw(), "deform_conv: kernel must be square");
  off.validate(static_cast<int>(p.kh()));
  require(x.c() == p.in_channels(), "deform_conv_forward: channel mismatch");
  const std::size_t oh = conv_out_extent(x.h(), p.padding, p.dilation, p.kh(),
                                         p.stride);
  const std::size_t ow = conv_out_extent(x.w(), p.padding, p.dilation, p.kw(),
                                         p.stride);
  check_offset_extents(off, x.n(), oh, ow);
  const std::size_t k = p.kh();
  Tensor y(x.n(), p.out_channels(), oh, ow);
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t oc = 0; oc < p.out_channels(); ++oc)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = p.bias[oc];
          for (std::size_t ic = 0; ic < p.in_channels(); ++ic) {
            const double* xp = x.plane(n, ic);
            const double* wp = p.weights.plane(oc, ic);
            for (std::size_t r = 0; r < k; ++r)
              for (std::size_t c = 0; c < k; ++c) {
                const int tap = static_cast<int>(r * k + c);
                const double sy = static_cast<double>(
                                      static_cast<long long>(oy) * p.stride -
                                      p.padding +
                                      static_cast<long long>(r) * p.dilation) +
                                  off.dy(n, tap, oy, ox);
                const double sx = static_cast<double>(
                                      static_cast<long long>(ox) * p.stride -
                                      p.padding +
                                      static_cast<long long>(c) * p.dilation) +
                                  off.dx(n, tap, oy, ox);
                acc += wp[r * k + c] *
                       bilinear_sample(xp, x.h(), x.w(), sy, sx);
              }
          }
          y(n, oc, oy, ox) = acc;
        }
  return y;
}

struct DeformConvGrads {
  Tensor grad_x;
  Tensor grad_w;
  std::vector<double> grad_b;
  OffsetField grad_off;
};

inline DeformConvGrads deform_conv_backward(const Tensor& x,
                                            const ConvParams& p,
                                            const OffsetField& off,
                                            const Tensor& grad_out) {
  p.validate();
  off.validate(static_cast<int>(p.kh()));
  require(x.c() == p.in_channels(), "deform_conv_backward: channel mismatch");
  const std::size_t oh = conv_out_extent(x.h(), p.padding, p.dilation, p.kh(),
                                         p.stride);
  const std::size_t ow = conv_out_extent(x.w(), p.padding, p.dilation, p.kw(),
                                         p.stride);
  check_offset_extents(off, x.n(), oh, ow);
  require(grad_out.n() == x.n() && grad_out.c() == p.out_channels() &&
              grad_out.h() == oh && grad_out.w() == ow,
          "deform_conv_backward: grad_out shape " + grad_out.shape_str() +
              " does not match forward output");
  const std::size_t k = p.kh();
  const long long H = static_cast<long long>(x.h());
  const long long W = static_cast<long long>(x.w());
  DeformConvGrads g;
  g.grad_x = Tensor::zeros_like(x);
  g.grad_w = Tensor::zeros_like(p.weights);
  g.grad_b.assign(p.out_channels(), 0.0);
  g.grad_off = OffsetField(x.n(), static_cast<int>(k), oh, ow);
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t r = 0; r < k; ++r)
          for (std::size_t c = 0; c < k; ++c) {
            const int tap = static_cast<int>(r * k + c);
            const double sy =
                static_cast<double>(static_cast<long long>(oy) * p.stride -
                                    p.padding +
                                    static_cast<long long>(r) * p.dilation) +
                off.dy(n, tap, oy, ox);
            const double sx =
                static_cast<double>(static_cast<long long>(ox) * p.stride -
                                    p.padding +
                                    static_cast<long long>(c) * p.dilation) +
                off.dx(n, tap, oy, ox);
            const detail::BilinearCell cell = detail::backward_cell(sy, sx);
            // Corner values and in-bounds flags of the interpolation cell.
            double v[2][2];
            bool in[2][2];
            for (int ry = 0; ry < 2; ++ry)
              for (int rx = 0; rx < 2; ++rx) {
                const long long yy = cell.y0 + ry;
                const long long xx = cell.x0 + rx;
                in[ry][rx] = yy >= 0 && yy < H && xx >= 0 && xx < W;
                v[ry][rx] = 0.0;
              }
            double gy_acc = 0.0;
            double gx_acc = 0.0;
            for (std::size_t oc = 0; oc < p.out_channels(); ++oc) {
              const double go = grad_out(n, oc, oy, ox);
              if (r == 0 && c == 0) g.grad_b[oc] += go;
              for (std::size_t ic = 0; ic < p.in_channels(); ++ic) {
                const double* xp = x.plane(n, ic);
                double* gxp = g.grad_x.plane(n, ic);
                for (int ry = 0; ry < 2; ++ry)
                  for (int rx = 0; rx < 2; ++rx)
                    v[ry][rx] = in[ry][rx]
                                    ? xp[(cell.y0 + ry) * W + cell.x0 + rx]
                                    : 0.0;
                const double top =
                    (1.0 - cell.dx) * v[0][0] + cell.dx * v[0][1];
                const double bot =
                    (1.0 - cell.dx) * v[1][0] + cell.dx * v[1][1];
                const double sample = (1.0 - cell.dy) * top + cell.dy * bot;
                const double wv = p.weights(oc, ic, r, c);
                g.grad_w(oc, ic, r, c) += go * sample;
                const double gs = go * wv;
                // Scatter into the four corners.
                if (in[0][0])
                  gxp[cell.y0 * W + cell.x0] +=
                      gs * (1.0 - cell.dy) * (1.0 - cell.dx);
                if (in[0][1])
                  gxp[cell.y0 * W + cell.x0 + 1] +=
                      gs * (1.0 - cell.dy) * cell.dx;
                if (in[1][0])
                  gxp[(cell.y0 + 1) * W + cell.x0] +=
                      gs * cell.dy * (1.0 - cell.dx);
                if (in[1][1])
                  gxp[(cell.y0 + 1) * W + cell.x0 + 1] +=
                      gs * cell.dy * cell.dx;
                gy_acc += gs * (bot - top);
                gx_acc += gs * ((1.0 - cell.dy) * (v[0][1] - v[0][0]) +
                                cell.dy * (v[1][1] - v[1][0]));
              }
            }
            g.grad_off.dy(n, tap, oy, ox) = gy_acc;
            g.grad_off.dx(n, tap, oy, ox) = gx_acc;
          }
  return g;
}

}  // namespace mgs
