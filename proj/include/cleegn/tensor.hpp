#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cleegn {

using Dim4 = std::array<int64_t, 4>;

inline std::string shape_str(const Dim4& d) {
  std::ostringstream os;
  os << "(" << d[0] << "," << d[1] << "," << d[2] << "," << d[3] << ")";
  return os.str();
}

// 4-axis array over (batch, height, width, feature), row-major with the
// feature axis fastest.
template <typename Real>
struct Tensor4 {
  Dim4 dims{0, 0, 0, 0};
  std::vector<Real> data;

  Tensor4() = default;

  Tensor4(int64_t b, int64_t h, int64_t w, int64_t f) : dims{b, h, w, f} {
    if (b < 0 || h < 0 || w < 0 || f < 0)
      throw std::invalid_argument("Tensor4: negative dimension in " + shape_str(dims));
    data.assign(static_cast<size_t>(b) * h * w * f, Real(0));
  }

  explicit Tensor4(const Dim4& d) : Tensor4(d[0], d[1], d[2], d[3]) {}

  int64_t b() const { return dims[0]; }
  int64_t h() const { return dims[1]; }
  int64_t w() const { return dims[2]; }
  int64_t f() const { return dims[3]; }
  int64_t size() const { return static_cast<int64_t>(data.size()); }

  bool same_shape(const Tensor4& o) const { return dims == o.dims; }

  int64_t index(int64_t b_, int64_t h_, int64_t w_, int64_t f_) const {
    return ((b_ * dims[1] + h_) * dims[2] + w_) * dims[3] + f_;
  }

  Real& at(int64_t b_, int64_t h_, int64_t w_, int64_t f_) {
    return data[static_cast<size_t>(index(b_, h_, w_, f_))];
  }
  const Real& at(int64_t b_, int64_t h_, int64_t w_, int64_t f_) const {
    return data[static_cast<size_t>(index(b_, h_, w_, f_))];
  }

  // Pointer to the contiguous feature row at (b, h, w).
  Real* row(int64_t b_, int64_t h_, int64_t w_) {
    return data.data() + index(b_, h_, w_, 0);
  }
  const Real* row(int64_t b_, int64_t h_, int64_t w_) const {
    return data.data() + index(b_, h_, w_, 0);
  }

  void fill(Real v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const {
    for (Real v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

template <typename Real>
void require_same_shape(const Tensor4<Real>& a, const Tensor4<Real>& b, const char* who) {
  if (!a.same_shape(b))
    throw std::runtime_error(std::string(who) + ": shape mismatch " + shape_str(a.dims) +
                             " vs " + shape_str(b.dims));
}

// Swaps the height and feature axes of a tensor whose height is 1:
// (B, 1, W, F) -> (B, F, W, 1).
template <typename Real>
Tensor4<Real> permute_hc(const Tensor4<Real>& in) {
  if (in.h() != 1)
    throw std::runtime_error("permute_hc: input height must be 1, got shape " +
                             shape_str(in.dims));
  Tensor4<Real> out(in.b(), in.f(), in.w(), 1);
  for (int64_t b = 0; b < in.b(); ++b)
    for (int64_t w = 0; w < in.w(); ++w) {
      const Real* src = in.row(b, 0, w);
      for (int64_t f = 0; f < in.f(); ++f) out.at(b, f, w, 0) = src[f];
    }
  return out;
}

// Inverse of permute_hc: (B, H, W, 1) -> (B, 1, W, H).
template <typename Real>
Tensor4<Real> permute_ch(const Tensor4<Real>& in) {
  if (in.f() != 1)
    throw std::runtime_error("permute_ch: input feature axis must be 1, got shape " +
                             shape_str(in.dims));
  Tensor4<Real> out(in.b(), 1, in.w(), in.h());
  for (int64_t b = 0; b < in.b(); ++b)
    for (int64_t h = 0; h < in.h(); ++h)
      for (int64_t w = 0; w < in.w(); ++w) out.at(b, 0, w, h) = in.at(b, h, w, 0);
  return out;
}

}  // namespace cleegn
