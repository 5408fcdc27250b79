#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "mgs/tensor.hpp"

namespace mgs {

// Pinhole camera parameters, in pixels.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const {
    require(fx > 0.0 && fy > 0.0,
            "intrinsics: focal lengths must be positive");
    require(std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) &&
                std::isfinite(cy),
            "intrinsics: parameters must be finite");
  }

  CameraIntrinsics scaled(double factor) const {
    return {fx * factor, fy * factor, cx * factor, cy * factor};
  }
};

// Point cloud from a depth map: xyz is N x 3 x H x W (camera frame, meters),
// mask is N x 1 x H x W with 1 where depth is valid (> 0).
struct PointCloud {
  Tensor xyz;
  Tensor mask;
};

// Back-projects every pixel through the pinhole model. Invalid depth (<= 0)
// yields the origin point with the mask cleared.
inline PointCloud backproject(const Tensor& depth, const CameraIntrinsics& k) {
  k.validate();
  require(depth.c() == 1, "backproject: depth must have a single channel");
  PointCloud pc;
  pc.xyz = Tensor(depth.n(), 3, depth.h(), depth.w());
  pc.mask = Tensor(depth.n(), 1, depth.h(), depth.w());
  for (std::size_t n = 0; n < depth.n(); ++n) {
    const double* dp = depth.plane(n, 0);
    double* xs = pc.xyz.plane(n, 0);
    double* ys = pc.xyz.plane(n, 1);
    double* zs = pc.xyz.plane(n, 2);
    double* mp = pc.mask.plane(n, 0);
    for (std::size_t v = 0; v < depth.h(); ++v)
      for (std::size_t u = 0; u < depth.w(); ++u) {
        const std::size_t i = v * depth.w() + u;
        const double z = dp[i];
        if (z > 0.0) {
          xs[i] = (static_cast<double>(u) - k.cx) * z / k.fx;
          ys[i] = (static_cast<double>(v) - k.cy) * z / k.fy;
          zs[i] = z;
          mp[i] = 1.0;
        }
      }
  }
  return pc;
}

// Per-pixel least-squares plane normal over the valid points of a square
// window, computed as the smallest principal direction of the local point
// scatter. Normals are oriented with n_z > 0. Degenerate neighborhoods
// (fewer than 3 valid points, or an essentially collinear spread) fall back
// to the view axis (0, 0, 1).
inline Tensor fit_local_plane(const PointCloud& pc, int window) {
  require(window >= 3 && window % 2 == 1,
          "fit_local_plane: window must be odd and >= 3");
  const Tensor& xyz = pc.xyz;
  const long long H = static_cast<long long>(xyz.h());
  const long long W = static_cast<long long>(xyz.w());
  const int hw = window / 2;
  Tensor normals(xyz.n(), 3, xyz.h(), xyz.w());
  for (std::size_t n = 0; n < xyz.n(); ++n) {
    const double* xs = xyz.plane(n, 0);
    const double* ys = xyz.plane(n, 1);
    const double* zs = xyz.plane(n, 2);
    const double* mp = pc.mask.plane(n, 0);
    double* nx = normals.plane(n, 0);
    double* ny = normals.plane(n, 1);
    double* nz = normals.plane(n, 2);
    for (long long v = 0; v < H; ++v)
      for (long long u = 0; u < W; ++u) {
        const std::size_t at = static_cast<std::size_t>(v * W + u);
        double sx = 0, sy = 0, sz = 0;
        double sxx = 0, sxy = 0, sxz = 0, syy = 0, syz = 0, szz = 0;
        int count = 0;
        for (long long dv = -hw; dv <= hw; ++dv) {
          const long long vv = v + dv;
          if (vv < 0 || vv >= H) continue;
          for (long long du = -hw; du <= hw; ++du) {
            const long long uu = u + du;
            if (uu < 0 || uu >= W) continue;
            const std::size_t i = static_cast<std::size_t>(vv * W + uu);
            if (mp[i] == 0.0) continue;
            const double px = xs[i], py = ys[i], pz = zs[i];
            sx += px;
            sy += py;
            sz += pz;
            sxx += px * px;
            sxy += px * py;
            sxz += px * pz;
            syy += py * py;
            syz += py * pz;
            szz += pz * pz;
            ++count;
          }
        }
        if (count < 3) {
          nz[at] = 1.0;
          continue;
        }
        const double inv = 1.0 / count;
        Eigen::Matrix3d cov;
        cov(0, 0) = sxx - sx * sx * inv;
        cov(0, 1) = cov(1, 0) = sxy - sx * sy * inv;
        cov(0, 2) = cov(2, 0) = sxz - sx * sz * inv;
        cov(1, 1) = syy - sy * sy * inv;
        cov(1, 2) = cov(2, 1) = syz - sy * sz * inv;
        cov(2, 2) = szz - sz * sz * inv;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
        es.computeDirect(cov);
        const Eigen::Vector3d evals = es.eigenvalues();
        // Collinear spread leaves the plane under-determined. The threshold
        // sits above the closed-form solver's eigenvalue error (~1e-9
        // relative) and below any genuine in-plane spread ratio.
        if (evals(1) <= evals(2) * 1e-6) {
          nz[at] = 1.0;
          continue;
        }
        Eigen::Vector3d nrm = es.eigenvectors().col(0);
        if (nrm(2) < 0.0 ||
            (nrm(2) == 0.0 && (nrm(0) < 0.0 || (nrm(0) == 0.0 && nrm(1) < 0.0))))
          nrm = -nrm;
        nx[at] = nrm(0);
        ny[at] = nrm(1);
        nz[at] = nrm(2);
      }
  }
  return normals;
}

// Nearest-neighbor downsampling by an integer factor; each output pixel takes
// the top-left source pixel of its block, which keeps back-projection through
// intrinsics scaled by 1/factor exact.
inline Tensor nearest_downsample(const Tensor& x, int factor) {
  require(factor >= 1, "nearest_downsample: factor must be >= 1");
  require(x.h() % factor == 0 && x.w() % factor == 0,
          "nearest_downsample: extents must be divisible by the factor");
  if (factor == 1) return x;
  Tensor y(x.n(), x.c(), x.h() / factor, x.w() / factor);
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t c = 0; c < x.c(); ++c) {
      const double* xp = x.plane(n, c);
      double* yp = y.plane(n, c);
      for (std::size_t v = 0; v < y.h(); ++v)
        for (std::size_t u = 0; u < y.w(); ++u)
          yp[v * y.w() + u] =
              xp[(v * factor) * x.w() + u * factor];
    }
  return y;
}

}  // namespace mgs
