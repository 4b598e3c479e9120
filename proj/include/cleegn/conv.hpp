#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "cleegn/parallel.hpp"
#include "cleegn/tensor.hpp"

namespace cleegn {

enum class Padding { valid, same_zero };

// 2-D convolution layer (cross-correlation, no kernel flip).
// weights laid out (K_out, k_h, k_w, F_in), one bias per output feature.
template <typename Real>
struct ConvLayer {
  Tensor4<Real> weights;
  std::vector<Real> bias;
  Padding padding = Padding::valid;

  ConvLayer() = default;
  ConvLayer(int64_t k_out, int64_t k_h, int64_t k_w, int64_t f_in, Padding pad)
      : weights(k_out, k_h, k_w, f_in), bias(static_cast<size_t>(k_out), Real(0)),
        padding(pad) {
    if (k_out < 1 || k_h < 1 || k_w < 1 || f_in < 1)
      throw std::invalid_argument("ConvLayer: kernel dims must be >= 1, got " +
                                  shape_str(weights.dims));
  }

  int64_t k_out() const { return weights.dims[0]; }
  int64_t k_h() const { return weights.dims[1]; }
  int64_t k_w() const { return weights.dims[2]; }
  int64_t f_in() const { return weights.dims[3]; }

  int64_t pad_top() const { return padding == Padding::same_zero ? (k_h() - 1) / 2 : 0; }
  int64_t pad_left() const { return padding == Padding::same_zero ? (k_w() - 1) / 2 : 0; }

  Dim4 output_dims(const Dim4& in) const {
    if (padding == Padding::same_zero) return {in[0], in[1], in[2], k_out()};
    return {in[0], in[1] - k_h() + 1, in[2] - k_w() + 1, k_out()};
  }
};

namespace detail {

template <typename Real>
void check_conv_input(const Tensor4<Real>& in, const ConvLayer<Real>& layer,
                      const char* who) {
  if (in.f() != layer.f_in())
    throw std::runtime_error(std::string(who) + ": input shape " + shape_str(in.dims) +
                             " has feature axis " + std::to_string(in.f()) +
                             " but weights " + shape_str(layer.weights.dims) +
                             " expect " + std::to_string(layer.f_in()));
  if (layer.padding == Padding::valid && (in.h() < layer.k_h() || in.w() < layer.k_w()))
    throw std::runtime_error(std::string(who) + ": input " + shape_str(in.dims) +
                             " smaller than valid-mode kernel " +
                             shape_str(layer.weights.dims));
}

// Weights transposed to ((i*k_w + j)*F_in + fi)*K_out + ko so the inner
// accumulation runs along the contiguous output-feature axis.
template <typename Real>
std::vector<Real> transpose_weights(const Tensor4<Real>& w) {
  const int64_t K = w.dims[0], kh = w.dims[1], kw = w.dims[2], F = w.dims[3];
  std::vector<Real> wt(static_cast<size_t>(K * kh * kw * F));
  for (int64_t ko = 0; ko < K; ++ko)
    for (int64_t i = 0; i < kh; ++i)
      for (int64_t j = 0; j < kw; ++j)
        for (int64_t fi = 0; fi < F; ++fi)
          wt[static_cast<size_t>((((i * kw + j) * F + fi) * K + ko))] = w.at(ko, i, j, fi);
  return wt;
}

// Zero-padded copy of a (B, H, W, F) tensor with the given top/left margins
// inside a (B, H + eh, W + ew, F) buffer.
template <typename Real>
Tensor4<Real> pad_tensor(const Tensor4<Real>& in, int64_t top, int64_t left, int64_t eh,
                         int64_t ew) {
  Tensor4<Real> out(in.b(), in.h() + eh, in.w() + ew, in.f());
  const int64_t row_len = in.w() * in.f();
  parallel_for(
      in.b() * in.h(),
      [&](int64_t r0, int64_t r1) {
        for (int64_t r = r0; r < r1; ++r) {
          const int64_t b = r / in.h(), h = r % in.h();
          std::copy_n(in.row(b, h, 0), row_len, out.row(b, h + top, left));
        }
      },
      16384 / std::max<int64_t>(1, row_len));
  return out;
}

inline constexpr int64_t kColBlock = 4;   // output columns per register tile
inline constexpr int64_t kLaneBlock = 8;  // output features per register tile

// Register-tiled correlation core. src is already padded; out(b, ho, wo, ko)
// accumulates bias[ko] + sum over (i, j, fi) of src(b, ho+i, wo+j, fi) *
// wt[((i*kw+j)*F + fi)*K + ko]. Each (4 columns x 8 features) output tile
// lives in registers across the whole kernel loop.
template <typename Real>
void conv_core(const Tensor4<Real>& src, const std::vector<Real>& wt, const Real* bias,
               int64_t kh, int64_t kw, Tensor4<Real>& out) {
  const int64_t F = src.f();
  const int64_t K = out.f();
  const int64_t Ho = out.h(), Wo = out.w();
  constexpr int64_t NB = kColBlock;
  constexpr int64_t NL = kLaneBlock;

  const int64_t row_macs = Wo * kh * kw * F * K;
  const int64_t grain = std::max<int64_t>(1, 262144 / std::max<int64_t>(1, row_macs));

  if (K == 1) {
    // single output feature: dot products with a vector accumulator held
    // across the whole (i, j) loop, one horizontal sum per output
    parallel_for(
        out.b() * Ho,
        [&](int64_t r0, int64_t r1) {
          for (int64_t r = r0; r < r1; ++r) {
            const int64_t b = r / Ho, ho = r % Ho;
            for (int64_t wo0 = 0; wo0 < Wo; wo0 += NB) {
              const int64_t nb = std::min<int64_t>(NB, Wo - wo0);
              for (int64_t wb = 0; wb < nb; ++wb) {
                Real vacc[NL] = {};
                Real scalar = bias ? bias[0] : Real(0);
                for (int64_t i = 0; i < kh; ++i)
                  for (int64_t j = 0; j < kw; ++j) {
                    const Real* __restrict x0 = src.row(b, ho + i, wo0 + wb + j);
                    const Real* __restrict wrow = wt.data() + (i * kw + j) * F;
                    int64_t fi = 0;
                    for (; fi + NL <= F; fi += NL) {
#pragma omp simd
                      for (int64_t k = 0; k < NL; ++k) vacc[k] += x0[fi + k] * wrow[fi + k];
                    }
                    for (; fi < F; ++fi) scalar += x0[fi] * wrow[fi];
                  }
                for (int64_t k = 0; k < NL; ++k) scalar += vacc[k];
                out.row(b, ho, wo0 + wb)[0] = scalar;
              }
            }
          }
        },
        grain);
    return;
  }

  parallel_for(
      out.b() * Ho,
      [&](int64_t r0, int64_t r1) {
        for (int64_t r = r0; r < r1; ++r) {
          const int64_t b = r / Ho, ho = r % Ho;
          for (int64_t wo0 = 0; wo0 < Wo; wo0 += NB) {
            const int64_t nb = std::min<int64_t>(NB, Wo - wo0);
            int64_t ko0 = 0;
            if (nb == NB) {
              for (; ko0 + NL <= K; ko0 += NL) {
                Real acc0[NL], acc1[NL], acc2[NL], acc3[NL];
                for (int64_t k = 0; k < NL; ++k)
                  acc0[k] = acc1[k] = acc2[k] = acc3[k] = bias ? bias[ko0 + k] : Real(0);
                for (int64_t i = 0; i < kh; ++i)
                  for (int64_t j = 0; j < kw; ++j) {
                    const Real* __restrict x0 = src.row(b, ho + i, wo0 + j);
                    const Real* __restrict wrow = wt.data() + ((i * kw + j) * F) * K + ko0;
                    for (int64_t fi = 0; fi < F; ++fi, wrow += K) {
                      const Real xv0 = x0[fi];
                      const Real xv1 = x0[F + fi];
                      const Real xv2 = x0[2 * F + fi];
                      const Real xv3 = x0[3 * F + fi];
#pragma omp simd
                      for (int64_t k = 0; k < NL; ++k) {
                        acc0[k] += xv0 * wrow[k];
                        acc1[k] += xv1 * wrow[k];
                        acc2[k] += xv2 * wrow[k];
                        acc3[k] += xv3 * wrow[k];
                      }
                    }
                  }
                std::copy_n(acc0, NL, out.row(b, ho, wo0) + ko0);
                std::copy_n(acc1, NL, out.row(b, ho, wo0 + 1) + ko0);
                std::copy_n(acc2, NL, out.row(b, ho, wo0 + 2) + ko0);
                std::copy_n(acc3, NL, out.row(b, ho, wo0 + 3) + ko0);
              }
            }
            // feature remainder, and whole tail blocks narrower than NB
            for (int64_t wb = 0; wb < nb; ++wb) {
              Real* __restrict orow = out.row(b, ho, wo0 + wb);
              for (int64_t ko = ko0; ko < K; ++ko) {
                Real acc = bias ? bias[ko] : Real(0);
                for (int64_t i = 0; i < kh; ++i)
                  for (int64_t j = 0; j < kw; ++j) {
                    const Real* __restrict x0 = src.row(b, ho + i, wo0 + wb + j);
                    const Real* __restrict wrow = wt.data() + ((i * kw + j) * F) * K + ko;
                    Real red = 0;
#pragma omp simd reduction(+ : red)
                    for (int64_t fi = 0; fi < F; ++fi) red += x0[fi] * wrow[fi * K];
                    acc += red;
                  }
                orow[ko] = acc;
              }
            }
          }
        }
      },
      grain);
}

}  // namespace detail

template <typename Real>
Tensor4<Real> conv2d_forward(const Tensor4<Real>& in, const ConvLayer<Real>& layer) {
  detail::check_conv_input(in, layer, "conv2d_forward");
  const std::vector<Real> wt = detail::transpose_weights(layer.weights);
  Tensor4<Real> out(layer.output_dims(in.dims));
  if (layer.padding == Padding::same_zero) {
    const Tensor4<Real> padded = detail::pad_tensor(in, layer.pad_top(), layer.pad_left(),
                                                    layer.k_h() - 1, layer.k_w() - 1);
    detail::conv_core(padded, wt, layer.bias.data(), layer.k_h(), layer.k_w(), out);
  } else {
    detail::conv_core(in, wt, layer.bias.data(), layer.k_h(), layer.k_w(), out);
  }
  return out;
}

template <typename Real>
struct Conv2dGrads {
  Tensor4<Real> input;
  Tensor4<Real> weights;
  std::vector<Real> bias;
};

// Gradients of the loss with respect to input, weights and bias, given the
// gradient at the layer output.
//
// grad_input is the adjoint correlation, computed by the forward core over
// zero-padded grad_out with the kernel flipped and its K/F axes swapped.
// grad_weights accumulates per-(i, j) outer products over a fixed batch
// chunking so results do not depend on the thread count.
template <typename Real>
Conv2dGrads<Real> conv2d_backward(const Tensor4<Real>& in, const ConvLayer<Real>& layer,
                                  const Tensor4<Real>& grad_out) {
  detail::check_conv_input(in, layer, "conv2d_backward");
  const Dim4 want = layer.output_dims(in.dims);
  if (grad_out.dims != want)
    throw std::runtime_error("conv2d_backward: grad_out shape " + shape_str(grad_out.dims) +
                             " does not match forward output " + shape_str(want));

  const int64_t B = in.b(), F = layer.f_in();
  const int64_t K = layer.k_out(), kh = layer.k_h(), kw = layer.k_w();
  const int64_t pt = layer.pad_top(), pl = layer.pad_left();
  const int64_t Ho = grad_out.h(), Wo = grad_out.w();

  Conv2dGrads<Real> g;

  // --- grad_input ---
  {
    std::vector<Real> wt_adj(static_cast<size_t>(F * kh * kw * K));
    for (int64_t ko = 0; ko < K; ++ko)
      for (int64_t i = 0; i < kh; ++i)
        for (int64_t j = 0; j < kw; ++j)
          for (int64_t fi = 0; fi < F; ++fi)
            wt_adj[static_cast<size_t>((((kh - 1 - i) * kw + (kw - 1 - j)) * K + ko) * F + fi)] =
                layer.weights.at(ko, i, j, fi);
    const Tensor4<Real> gy_pad =
        detail::pad_tensor(grad_out, kh - 1 - pt, kw - 1 - pl, in.h() - Ho + kh - 1,
                           in.w() - Wo + kw - 1);
    g.input = Tensor4<Real>(in.dims);
    detail::conv_core(gy_pad, wt_adj, static_cast<const Real*>(nullptr), kh, kw, g.input);
  }

  // --- grad_weights and grad_bias ---
  g.weights = Tensor4<Real>(layer.weights.dims);
  g.bias.assign(static_cast<size_t>(K), Real(0));
  const Tensor4<Real>* src = &in;
  Tensor4<Real> pad_storage;
  if (layer.padding == Padding::same_zero) {
    pad_storage = detail::pad_tensor(in, pt, pl, kh - 1, kw - 1);
    src = &pad_storage;
  }

  const size_t wsize = static_cast<size_t>(K * kh * kw * F);
  std::vector<std::vector<Real>> gw_chunk(kReduceChunks), gb_chunk(kReduceChunks);
  constexpr int64_t FB = detail::kColBlock;   // input features per tile
  constexpr int64_t NL = detail::kLaneBlock;  // output features per tile

  run_chunks([&](int64_t c) {
    auto [b0, b1] = chunk_range(B, c);
    if (b0 >= b1) return;
    // chunk-local gw in (i, j, fi, ko) layout
    gw_chunk[c].assign(wsize, Real(0));
    gb_chunk[c].assign(static_cast<size_t>(K), Real(0));
    Real* const gwc = gw_chunk[c].data();
    Real* const gbc = gb_chunk[c].data();

    for (int64_t b = b0; b < b1; ++b) {
      for (int64_t ho = 0; ho < Ho; ++ho) {
        const Real* __restrict gyr = grad_out.row(b, ho, 0);
        for (int64_t wo = 0; wo < Wo; ++wo, gyr += K)
          for (int64_t ko = 0; ko < K; ++ko) gbc[ko] += gyr[ko];
      }
      for (int64_t i = 0; i < kh; ++i)
        for (int64_t j = 0; j < kw; ++j) {
          Real* __restrict gwslab = gwc + (i * kw + j) * F * K;
          for (int64_t ho = 0; ho < Ho; ++ho) {
            const Real* const xrow = src->row(b, ho + i, j);
            const Real* const gyrow = grad_out.row(b, ho, 0);
            int64_t fi0 = 0;
            for (; fi0 + FB <= F; fi0 += FB) {
              int64_t ko0 = 0;
              for (; ko0 + NL <= K; ko0 += NL) {
                Real t0[NL] = {}, t1[NL] = {}, t2[NL] = {}, t3[NL] = {};
                const Real* __restrict xp = xrow + fi0;
                const Real* __restrict gp = gyrow + ko0;
                for (int64_t wo = 0; wo < Wo; ++wo, xp += F, gp += K) {
                  const Real xv0 = xp[0], xv1 = xp[1], xv2 = xp[2], xv3 = xp[3];
#pragma omp simd
                  for (int64_t k = 0; k < NL; ++k) {
                    t0[k] += xv0 * gp[k];
                    t1[k] += xv1 * gp[k];
                    t2[k] += xv2 * gp[k];
                    t3[k] += xv3 * gp[k];
                  }
                }
                Real* const base = gwslab + fi0 * K + ko0;
                for (int64_t k = 0; k < NL; ++k) {
                  base[k] += t0[k];
                  base[K + k] += t1[k];
                  base[2 * K + k] += t2[k];
                  base[3 * K + k] += t3[k];
                }
              }
              for (; ko0 < K; ++ko0) {
                Real t0 = 0, t1 = 0, t2 = 0, t3 = 0;
                const Real* __restrict xp = xrow + fi0;
                const Real* __restrict gp = gyrow + ko0;
#pragma omp simd reduction(+ : t0, t1, t2, t3)
                for (int64_t wo = 0; wo < Wo; ++wo) {
                  const Real gv = gp[wo * K];
                  t0 += xp[wo * F] * gv;
                  t1 += xp[wo * F + 1] * gv;
                  t2 += xp[wo * F + 2] * gv;
                  t3 += xp[wo * F + 3] * gv;
                }
                gwslab[fi0 * K + ko0] += t0;
                gwslab[(fi0 + 1) * K + ko0] += t1;
                gwslab[(fi0 + 2) * K + ko0] += t2;
                gwslab[(fi0 + 3) * K + ko0] += t3;
              }
            }
            for (; fi0 < F; ++fi0) {
              int64_t ko0 = 0;
              for (; ko0 + NL <= K; ko0 += NL) {
                Real t[NL] = {};
                const Real* __restrict xp = xrow + fi0;
                const Real* __restrict gp = gyrow + ko0;
                for (int64_t wo = 0; wo < Wo; ++wo, xp += F, gp += K) {
                  const Real xv = xp[0];
#pragma omp simd
                  for (int64_t k = 0; k < NL; ++k) t[k] += xv * gp[k];
                }
                Real* const base = gwslab + fi0 * K + ko0;
                for (int64_t k = 0; k < NL; ++k) base[k] += t[k];
              }
              for (; ko0 < K; ++ko0) {
                Real t = 0;
                const Real* __restrict xp = xrow + fi0;
                const Real* __restrict gp = gyrow + ko0;
#pragma omp simd reduction(+ : t)
                for (int64_t wo = 0; wo < Wo; ++wo) t += xp[wo * F] * gp[wo * K];
                gwslab[fi0 * K + ko0] += t;
              }
            }
          }
        }
    }
  });

  for (int64_t c = 0; c < kReduceChunks; ++c) {
    if (gw_chunk[c].empty()) continue;
    for (size_t idx = 0; idx < wsize; ++idx) {
      const int64_t ko = static_cast<int64_t>(idx) % K;
      const int64_t rest = static_cast<int64_t>(idx) / K;
      const int64_t fi = rest % F;
      const int64_t ij = rest / F;
      g.weights.at(ko, ij / kw, ij % kw, fi) += gw_chunk[c][idx];
    }
    for (int64_t ko = 0; ko < K; ++ko)
      g.bias[static_cast<size_t>(ko)] += gb_chunk[c][static_cast<size_t>(ko)];
  }
  return g;
}

}  // namespace cleegn
