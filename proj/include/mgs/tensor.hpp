#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgs {

// Dense NCHW tensor of doubles. The single data carrier for images, feature
// maps, parameters and gradients. Row-major: ((n*C + c)*H + y)*W + x.
class Tensor {
 public:
  Tensor() : dims_{0, 0, 0, 0} {}

  Tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w,
         double fill = 0.0)
      : dims_{n, c, h, w}, data_(n * c * h * w, fill) {}

  static Tensor zeros_like(const Tensor& other) {
    return Tensor(other.n(), other.c(), other.h(), other.w());
  }

  std::size_t n() const { return dims_[0]; }
  std::size_t c() const { return dims_[1]; }
  std::size_t h() const { return dims_[2]; }
  std::size_t w() const { return dims_[3]; }
  const std::array<std::size_t, 4>& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

  double& operator()(std::size_t n, std::size_t c, std::size_t y,
                     std::size_t x) {
    return data_[((n * dims_[1] + c) * dims_[2] + y) * dims_[3] + x];
  }
  double operator()(std::size_t n, std::size_t c, std::size_t y,
                    std::size_t x) const {
    return data_[((n * dims_[1] + c) * dims_[2] + y) * dims_[3] + x];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  // Pointer to the H x W plane of one (sample, channel) pair.
  double* plane(std::size_t n, std::size_t c) {
    return data_.data() + (n * dims_[1] + c) * dims_[2] * dims_[3];
  }
  const double* plane(std::size_t n, std::size_t c) const {
    return data_.data() + (n * dims_[1] + c) * dims_[2] * dims_[3];
  }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << dims_[0] << "x" << dims_[1] << "x" << dims_[2] << "x" << dims_[3];
    return os.str();
  }

  bool operator==(const Tensor& other) const {
    return dims_ == other.dims_ && data_ == other.data_;
  }

 private:
  std::array<std::size_t, 4> dims_;
  std::vector<double> data_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const std::string& what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(what + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
  }
}

// out += scale * t, elementwise.
inline void axpy(double scale, const Tensor& t, Tensor& out) {
  require_same_shape(t, out, "axpy");
  const double* src = t.data();
  double* dst = out.data();
  for (std::size_t i = 0; i < t.size(); ++i) dst[i] += scale * src[i];
}

inline void scale_inplace(Tensor& t, double s) {
  for (double& v : t.raw()) v *= s;
}

}  // namespace mgs
