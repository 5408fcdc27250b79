#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mgs/tensor.hpp"

namespace mgs {

// Guard constant of the enhanced-alignment denominator.
inline constexpr double kAlignEps = 1e-8;

namespace detail {

// Machine epsilon, the guard used by the cited reference formulations.
inline constexpr double kEps = std::numeric_limits<double>::epsilon();

inline void check_pair(const Tensor& s, const Tensor& g) {
  require_same_shape(s, g, "metrics");
  require(s.n() == 1 && s.c() == 1, "metrics: maps must be 1x1xHxW");
  for (double v : s.raw())
    require(v >= 0.0 && v <= 1.0, "metrics: saliency values must lie in [0,1]");
  for (double v : g.raw())
    require(v == 0.0 || v == 1.0, "metrics: ground truth must be binary");
}

inline std::size_t foreground_count(const Tensor& g) {
  std::size_t n = 0;
  for (double v : g.raw())
    if (v == 1.0) ++n;
  return n;
}

inline void require_foreground(const Tensor& g) {
  if (foreground_count(g) == 0)
    throw std::domain_error("metrics: ground truth has no foreground pixels");
}

inline double mean_of(const Tensor& t) {
  double sum = 0.0;
  for (double v : t.raw()) sum += v;
  return sum / static_cast<double>(t.size());
}

// 1-D squared distance transform (lower envelope of parabolas).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d,
                   std::size_t n) {
  static constexpr double kInf = 1e20;
  std::vector<std::size_t> v(n);
  std::vector<double> z(n + 1);
  std::size_t k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (std::size_t q = 1; q < n; ++q) {
    const double fq = f[q] + static_cast<double>(q) * q;
    double s = (fq - (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
               (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = (fq - (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
          (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double dq = static_cast<double>(q) - static_cast<double>(v[k]);
    d[q] = dq * dq + f[v[k]];
  }
}

// Exact squared Euclidean distance to the nearest foreground pixel.
inline std::vector<double> squared_edt_to_fg(const double* g, std::size_t h,
                                             std::size_t w) {
  static constexpr double kInf = 1e20;
  std::vector<double> d2(h * w);
  std::vector<double> col(h), out(std::max(h, w));
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y)
      col[y] = g[y * w + x] == 1.0 ? 0.0 : kInf;
    edt_1d(col, out, h);
    for (std::size_t y = 0; y < h; ++y) d2[y * w + x] = out[y];
  }
  std::vector<double> row(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) row[x] = d2[y * w + x];
    edt_1d(row, out, w);
    for (std::size_t x = 0; x < w; ++x) d2[y * w + x] = out[x];
  }
  return d2;
}

// Among the foreground pixels at exactly the known minimal squared distance,
// returns the smallest row-major linear index (the tie-break convention).
inline std::size_t nearest_fg_index(const double* g, const double* d2,
                                    std::size_t h, std::size_t w,
                                    std::size_t at) {
  const long long y = static_cast<long long>(at / w);
  const long long x = static_cast<long long>(at % w);
  const long long best = static_cast<long long>(d2[at]);
  const long long dmax = static_cast<long long>(std::floor(std::sqrt(
      static_cast<double>(best))));
  for (long long dy = -dmax; dy <= dmax; ++dy) {
    const long long yy = y + dy;
    if (yy < 0 || yy >= static_cast<long long>(h)) continue;
    const long long rem = best - dy * dy;
    long long dx = static_cast<long long>(std::llround(std::sqrt(
        static_cast<double>(rem))));
    while (dx * dx > rem) --dx;
    while ((dx + 1) * (dx + 1) <= rem) ++dx;
    if (dx * dx != rem) continue;
    const long long x1 = x - dx, x2 = x + dx;
    if (x1 >= 0 && g[yy * static_cast<long long>(w) + x1] == 1.0)
      return static_cast<std::size_t>(yy * static_cast<long long>(w) + x1);
    if (x2 < static_cast<long long>(w) &&
        g[yy * static_cast<long long>(w) + x2] == 1.0)
      return static_cast<std::size_t>(yy * static_cast<long long>(w) + x2);
  }
  throw std::logic_error("metrics: nearest-foreground lookup failed");
}

// Normalized 7x7 Gaussian with sigma 5, applied as a zero-padded correlation.
inline std::vector<double> gauss7_filter(const std::vector<double>& in,
                                         std::size_t h, std::size_t w) {
  std::array<double, 49> k{};
  double sum = 0.0;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) {
      const double di = i - 3, dj = j - 3;
      k[static_cast<std::size_t>(i * 7 + j)] =
          std::exp(-(di * di + dj * dj) / 50.0);
      sum += k[static_cast<std::size_t>(i * 7 + j)];
    }
  for (double& v : k) v /= sum;
  std::vector<double> out(h * w, 0.0);
  for (long long y = 0; y < static_cast<long long>(h); ++y)
    for (long long x = 0; x < static_cast<long long>(w); ++x) {
      double acc = 0.0;
      for (long long a = -3; a <= 3; ++a) {
        const long long yy = y + a;
        if (yy < 0 || yy >= static_cast<long long>(h)) continue;
        for (long long b = -3; b <= 3; ++b) {
          const long long xx = x + b;
          if (xx < 0 || xx >= static_cast<long long>(w)) continue;
          acc += k[static_cast<std::size_t>((a + 3) * 7 + (b + 3))] *
                 in[static_cast<std::size_t>(yy * static_cast<long long>(w) + xx)];
        }
      }
      out[static_cast<std::size_t>(y * static_cast<long long>(w) + x)] = acc;
    }
  return out;
}

// Mean/sample-std similarity term of the object-aware component.
inline double object_score(const std::vector<double>& vals) {
  const std::size_t n = vals.size();
  double x = 0.0;
  for (double v : vals) x += v;
  x /= static_cast<double>(n);
  double sd = 0.0;
  if (n > 1) {
    double acc = 0.0;
    for (double v : vals) acc += (v - x) * (v - x);
    sd = std::sqrt(acc / static_cast<double>(n - 1));
  }
  return 2.0 * x / (x * x + 1.0 + sd + kEps);
}

// SSIM-style similarity of one quadrant (sample statistics, N-1 + eps).
inline double region_ssim(const double* s, const double* g, std::size_t h,
                          std::size_t w, std::size_t y0, std::size_t y1,
                          std::size_t x0, std::size_t x1, std::size_t stride) {
  (void)h;
  (void)w;
  const std::size_t n = (y1 - y0) * (x1 - x0);
  if (n == 0) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t y = y0; y < y1; ++y)
    for (std::size_t x = x0; x < x1; ++x) {
      mx += s[y * stride + x];
      my += g[y * stride + x];
    }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sx2 = 0.0, sy2 = 0.0, sxy = 0.0;
  for (std::size_t y = y0; y < y1; ++y)
    for (std::size_t x = x0; x < x1; ++x) {
      const double dx = s[y * stride + x] - mx;
      const double dy = g[y * stride + x] - my;
      sx2 += dx * dx;
      sy2 += dy * dy;
      sxy += dx * dy;
    }
  const double denom = static_cast<double>(n) - 1.0 + kEps;
  sx2 /= denom;
  sy2 /= denom;
  sxy /= denom;
  const double alpha = 4.0 * mx * my * sxy;
  const double beta = (mx * mx + my * my) * (sx2 + sy2);
  if (alpha != 0.0) return alpha / (beta + kEps);
  if (beta == 0.0) return 1.0;
  return 0.0;
}

}  // namespace detail

inline double mae(const Tensor& s, const Tensor& g) {
  detail::check_pair(s, g);
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    sum += std::abs(s.raw()[i] - g.raw()[i]);
  return sum / static_cast<double>(s.size());
}

inline double adaptive_threshold(const Tensor& s) {
  return std::min(2.0 * detail::mean_of(s), 1.0);
}

inline Tensor binarize(const Tensor& s, double threshold) {
  Tensor b = Tensor::zeros_like(s);
  for (std::size_t i = 0; i < s.size(); ++i)
    b.raw()[i] = s.raw()[i] >= threshold ? 1.0 : 0.0;
  return b;
}

inline double f_beta(double pre, double rec) {
  const double denom = 0.3 * pre + rec;
  if (denom == 0.0) return 0.0;
  return 1.3 * pre * rec / denom;
}

struct FMeasures {
  double f_max = 0.0;
  double f_mean = 0.0;
};

// Precision/recall over the 256-level threshold grid t_i = i/255 (predicted
// positive means S >= t_i); f_mean uses the adaptive threshold min(2*mean, 1).
inline FMeasures f_measures(const Tensor& s, const Tensor& g) {
  detail::check_pair(s, g);
  detail::require_foreground(g);
  std::array<double, 256> grid;
  for (int i = 0; i < 256; ++i) grid[static_cast<std::size_t>(i)] = i / 255.0;
  // Bin every pixel by the largest threshold it still clears, then count
  // positives/true-positives per threshold with suffix sums.
  std::array<double, 257> pos{}, tp{};
  const double* sp = s.plane(0, 0);
  const double* gp = g.plane(0, 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::size_t k = static_cast<std::size_t>(
        std::upper_bound(grid.begin(), grid.end(), sp[i]) - grid.begin() - 1);
    pos[k] += 1.0;
    if (gp[i] == 1.0) tp[k] += 1.0;
  }
  for (int i = 254; i >= 0; --i) {
    pos[static_cast<std::size_t>(i)] += pos[static_cast<std::size_t>(i) + 1];
    tp[static_cast<std::size_t>(i)] += tp[static_cast<std::size_t>(i) + 1];
  }
  const double npos = static_cast<double>(detail::foreground_count(g));
  FMeasures f;
  for (std::size_t i = 0; i < 256; ++i) {
    const double pre = pos[i] > 0.0 ? tp[i] / pos[i] : 0.0;
    const double rec = tp[i] / npos;
    f.f_max = std::max(f.f_max, f_beta(pre, rec));
  }
  const double tau = adaptive_threshold(s);
  double bpos = 0.0, btp = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (sp[i] >= tau) {
      bpos += 1.0;
      if (gp[i] == 1.0) btp += 1.0;
    }
  const double pre = bpos > 0.0 ? btp / bpos : 0.0;
  f.f_mean = f_beta(pre, btp / npos);
  return f;
}

// Weighted F-measure: absolute error with foreground-aware dependency
// correction (errors outside the object are read at the nearest foreground
// pixel, then smoothed by a 7x7 Gaussian of sigma 5) and distance-decayed
// background importance 2 - exp(ln(0.5)/5 * d). Combined with beta^2 = 0.3.
inline double weighted_f(const Tensor& s, const Tensor& g) {
  detail::check_pair(s, g);
  detail::require_foreground(g);
  const std::size_t h = s.h(), w = s.w(), n = h * w;
  const double* sp = s.plane(0, 0);
  const double* gp = g.plane(0, 0);
  const std::vector<double> d2 = detail::squared_edt_to_fg(gp, h, w);
  std::vector<double> e(n), et(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = std::abs(sp[i] - gp[i]);
  for (std::size_t i = 0; i < n; ++i)
    et[i] = gp[i] == 1.0
                ? e[i]
                : e[detail::nearest_fg_index(gp, d2.data(), h, w, i)];
  const std::vector<double> ea = detail::gauss7_filter(et, h, w);
  const double theta = std::log(0.5) / 5.0;
  double fg_sum = 0.0, bg_sum = 0.0, nfg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double corrected =
        gp[i] == 1.0 && ea[i] < e[i] ? ea[i] : e[i];
    if (gp[i] == 1.0) {
      fg_sum += corrected;
      nfg += 1.0;
    } else {
      bg_sum += corrected * (2.0 - std::exp(theta * std::sqrt(d2[i])));
    }
  }
  const double tpw = nfg - fg_sum;
  const double fpw = bg_sum;
  const double rec = 1.0 - fg_sum / nfg;
  const double pre = tpw / (detail::kEps + tpw + fpw);
  return 1.3 * rec * pre / (detail::kEps + rec + 0.3 * pre);
}

// Structure measure: equal blend of the object-aware term (foreground and
// complemented background statistics) and the region-aware term (SSIM over
// the four quadrants around the ground truth's centroid, area-weighted).
inline double s_measure(const Tensor& s, const Tensor& g) {
  detail::check_pair(s, g);
  detail::require_foreground(g);
  const std::size_t h = s.h(), w = s.w(), n = h * w;
  const double* sp = s.plane(0, 0);
  const double* gp = g.plane(0, 0);
  const std::size_t nfg = detail::foreground_count(g);
  if (nfg == n)  // all-white ground truth: intersection area only
    return std::clamp(detail::mean_of(s), 0.0, 1.0);

  std::vector<double> fg_vals, bg_vals;
  fg_vals.reserve(nfg);
  bg_vals.reserve(n - nfg);
  for (std::size_t i = 0; i < n; ++i)
    (gp[i] == 1.0 ? fg_vals : bg_vals).push_back(gp[i] == 1.0 ? sp[i]
                                                              : 1.0 - sp[i]);
  const double u = static_cast<double>(nfg) / static_cast<double>(n);
  const double so = u * detail::object_score(fg_vals) +
                    (1.0 - u) * detail::object_score(bg_vals);

  // Centroid with 1-based indices, rounded half away from zero.
  double cx = 0.0, cy = 0.0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (gp[y * w + x] == 1.0) {
        cx += static_cast<double>(x + 1);
        cy += static_cast<double>(y + 1);
      }
  const std::size_t X = static_cast<std::size_t>(
      std::floor(cx / static_cast<double>(nfg) + 0.5));
  const std::size_t Y = static_cast<std::size_t>(
      std::floor(cy / static_cast<double>(nfg) + 0.5));
  const double area = static_cast<double>(n);
  const double w1 = static_cast<double>(X * Y) / area;
  const double w2 = static_cast<double>((w - X) * Y) / area;
  const double w3 = static_cast<double>(X * (h - Y)) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  const double q1 = detail::region_ssim(sp, gp, h, w, 0, Y, 0, X, w);
  const double q2 = detail::region_ssim(sp, gp, h, w, 0, Y, X, w, w);
  const double q3 = detail::region_ssim(sp, gp, h, w, Y, h, 0, X, w);
  const double q4 = detail::region_ssim(sp, gp, h, w, Y, h, X, w, w);
  const double sr = w1 * q1 + w2 * q2 + w3 * q3 + w4 * q4;

  return std::clamp(0.5 * so + 0.5 * sr, 0.0, 1.0);
}

// Enhanced-alignment measure at the adaptive threshold: the prediction is
// binarized, both maps are centered, and the squared normalized agreement is
// averaged over all pixels.
inline double e_measure(const Tensor& s, const Tensor& g) {
  detail::check_pair(s, g);
  detail::require_foreground(g);
  const std::size_t n = s.size();
  const double* sp = s.plane(0, 0);
  const double* gp = g.plane(0, 0);
  const double tau = adaptive_threshold(s);
  std::vector<double> fm(n);
  for (std::size_t i = 0; i < n; ++i) fm[i] = sp[i] >= tau ? 1.0 : 0.0;
  const std::size_t nfg = detail::foreground_count(g);
  double sum = 0.0;
  if (nfg == n) {  // all-white ground truth
    for (double v : fm) sum += v;
  } else {
    double mu_fm = 0.0;
    for (double v : fm) mu_fm += v;
    mu_fm /= static_cast<double>(n);
    const double mu_g = static_cast<double>(nfg) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double pf = fm[i] - mu_fm;
      const double pg = gp[i] - mu_g;
      const double xi = 2.0 * pf * pg / (pf * pf + pg * pg + kAlignEps);
      sum += (1.0 + xi) * (1.0 + xi) / 4.0;
    }
  }
  return sum / static_cast<double>(n);
}

struct PairMetrics {
  bool degenerate = false;
  double mae = 0.0, f_max = 0.0, f_mean = 0.0, f_w = 0.0;
  double s_measure = 0.0, e_measure = 0.0;
};

// All metrics for one prediction/ground-truth pair; a ground truth without
// foreground is flagged degenerate and carries no scores.
inline PairMetrics evaluate_pair(const Tensor& s, const Tensor& g) {
  detail::check_pair(s, g);
  PairMetrics m;
  if (detail::foreground_count(g) == 0) {
    m.degenerate = true;
    return m;
  }
  m.mae = mae(s, g);
  const FMeasures f = f_measures(s, g);
  m.f_max = f.f_max;
  m.f_mean = f.f_mean;
  m.f_w = weighted_f(s, g);
  m.s_measure = s_measure(s, g);
  m.e_measure = e_measure(s, g);
  return m;
}

struct MetricsReport {
  double mae = 0.0, f_max = 0.0, f_mean = 0.0, f_w = 0.0;
  double s_measure = 0.0, e_measure = 0.0;
  std::size_t pairs = 0;       // evaluated (non-degenerate) pairs
  std::size_t degenerate = 0;  // excluded pairs with empty-foreground GT
  std::size_t unmatched = 0;   // filename stems without a partner
};

inline MetricsReport aggregate(const std::vector<PairMetrics>& pairs) {
  MetricsReport r;
  for (const PairMetrics& m : pairs) {
    if (m.degenerate) {
      ++r.degenerate;
      continue;
    }
    r.mae += m.mae;
    r.f_max += m.f_max;
    r.f_mean += m.f_mean;
    r.f_w += m.f_w;
    r.s_measure += m.s_measure;
    r.e_measure += m.e_measure;
    ++r.pairs;
  }
  if (r.pairs > 0) {
    const double inv = 1.0 / static_cast<double>(r.pairs);
    r.mae *= inv;
    r.f_max *= inv;
    r.f_mean *= inv;
    r.f_w *= inv;
    r.s_measure *= inv;
    r.e_measure *= inv;
  }
  return r;
}

}  // namespace mgs
