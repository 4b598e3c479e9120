#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "cleegn/parallel.hpp"
#include "cleegn/tensor.hpp"

namespace cleegn {

enum class BnMode { train, infer };

// Batch normalization over the last (feature) axis.
template <typename Real>
struct BatchNormLayer {
  std::vector<Real> gamma, beta, running_mean, running_var;
  Real eps = Real(1e-3);
  Real momentum = Real(0.99);

  BatchNormLayer() = default;
  explicit BatchNormLayer(int64_t f)
      : gamma(static_cast<size_t>(f), Real(1)), beta(static_cast<size_t>(f), Real(0)),
        running_mean(static_cast<size_t>(f), Real(0)),
        running_var(static_cast<size_t>(f), Real(1)) {
    if (f < 1) throw std::invalid_argument("BatchNormLayer: feature count must be >= 1");
  }

  int64_t features() const { return static_cast<int64_t>(gamma.size()); }
};

template <typename Real>
struct BnCache {
  Tensor4<Real> xhat;
  std::vector<Real> inv_std;  // per feature, 1/sqrt(batch_var + eps)
  bool consumed = false;
};

namespace detail {

template <typename Real>
void check_bn_input(const Tensor4<Real>& x, const BatchNormLayer<Real>& bn, const char* who) {
  if (x.f() != bn.features())
    throw std::runtime_error(std::string(who) + ": input " + shape_str(x.dims) +
                             " has feature axis " + std::to_string(x.f()) +
                             " but layer normalizes " + std::to_string(bn.features()));
}

// Per-feature sum and sum of products over all (b, h, w) positions,
// accumulated in double over a fixed chunking.
template <typename Real>
void feature_sums(const Tensor4<Real>& a, const Tensor4<Real>* b, std::vector<double>& s1,
                  std::vector<double>& s2) {
  const int64_t rows = a.b() * a.h() * a.w();
  const int64_t F = a.f();
  std::vector<std::vector<double>> c1(kReduceChunks), c2(kReduceChunks);
  run_chunks([&](int64_t c) {
    auto [r0, r1] = chunk_range(rows, c);
    if (r0 >= r1) return;
    c1[c].assign(static_cast<size_t>(F), 0.0);
    c2[c].assign(static_cast<size_t>(F), 0.0);
    const Real* pa = a.data.data() + r0 * F;
    const Real* pb = b ? b->data.data() + r0 * F : nullptr;
    for (int64_t r = r0; r < r1; ++r) {
      for (int64_t f = 0; f < F; ++f) {
        const double va = static_cast<double>(pa[f]);
        c1[c][static_cast<size_t>(f)] += va;
        c2[c][static_cast<size_t>(f)] += b ? va * static_cast<double>(pb[f]) : va * va;
      }
      pa += F;
      if (pb) pb += F;
    }
  });
  s1.assign(static_cast<size_t>(F), 0.0);
  s2.assign(static_cast<size_t>(F), 0.0);
  for (int64_t c = 0; c < kReduceChunks; ++c) {
    if (c1[c].empty()) continue;
    for (int64_t f = 0; f < F; ++f) {
      s1[static_cast<size_t>(f)] += c1[c][static_cast<size_t>(f)];
      s2[static_cast<size_t>(f)] += c2[c][static_cast<size_t>(f)];
    }
  }
}

}  // namespace detail

// Train mode normalizes with batch statistics (biased variance) and, when
// update_running is set, folds them into the running estimates. Infer mode
// uses the running statistics only. A non-null cache is filled in train
// mode for the backward pass.
template <typename Real>
Tensor4<Real> batchnorm_forward(const Tensor4<Real>& x, BatchNormLayer<Real>& bn,
                                BnMode mode,
                                std::type_identity_t<BnCache<Real>>* cache = nullptr,
                                bool update_running = true) {
  detail::check_bn_input(x, bn, "batchnorm_forward");
  const int64_t F = x.f();
  const int64_t rows = x.b() * x.h() * x.w();
  Tensor4<Real> y(x.dims);

  if (mode == BnMode::infer) {
    std::vector<Real> scale(static_cast<size_t>(F)), shift(static_cast<size_t>(F));
    for (int64_t f = 0; f < F; ++f) {
      const size_t sf = static_cast<size_t>(f);
      scale[sf] = bn.gamma[sf] / std::sqrt(bn.running_var[sf] + bn.eps);
      shift[sf] = bn.beta[sf];
    }
    parallel_for(
        rows,
        [&](int64_t r0, int64_t r1) {
          const Real* px = x.data.data() + r0 * F;
          Real* py = y.data.data() + r0 * F;
          for (int64_t r = r0; r < r1; ++r) {
            for (int64_t f = 0; f < F; ++f) {
              const size_t sf = static_cast<size_t>(f);
              py[f] = (px[f] - bn.running_mean[sf]) * scale[sf] + shift[sf];
            }
            px += F;
            py += F;
          }
        },
        4096);
    return y;
  }

  if (rows < 1) throw std::runtime_error("batchnorm_forward: empty batch");
  std::vector<double> s1, s2;
  detail::feature_sums(x, static_cast<const Tensor4<Real>*>(nullptr), s1, s2);
  std::vector<Real> mean(static_cast<size_t>(F)), inv_std(static_cast<size_t>(F));
  const double n = static_cast<double>(rows);
  for (int64_t f = 0; f < F; ++f) {
    const size_t sf = static_cast<size_t>(f);
    const double m = s1[sf] / n;
    double var = s2[sf] / n - m * m;
    if (var < 0.0) var = 0.0;  // guard tiny negative round-off
    mean[sf] = static_cast<Real>(m);
    inv_std[sf] = static_cast<Real>(1.0 / std::sqrt(var + static_cast<double>(bn.eps)));
    if (update_running) {
      bn.running_mean[sf] = bn.momentum * bn.running_mean[sf] +
                            (Real(1) - bn.momentum) * static_cast<Real>(m);
      bn.running_var[sf] = bn.momentum * bn.running_var[sf] +
                           (Real(1) - bn.momentum) * static_cast<Real>(var);
    }
  }

  Tensor4<Real> xhat(x.dims);
  parallel_for(
      rows,
      [&](int64_t r0, int64_t r1) {
        const Real* px = x.data.data() + r0 * F;
        Real* ph = xhat.data.data() + r0 * F;
        Real* py = y.data.data() + r0 * F;
        for (int64_t r = r0; r < r1; ++r) {
          for (int64_t f = 0; f < F; ++f) {
            const size_t sf = static_cast<size_t>(f);
            const Real h = (px[f] - mean[sf]) * inv_std[sf];
            ph[f] = h;
            py[f] = bn.gamma[sf] * h + bn.beta[sf];
          }
          px += F;
          ph += F;
          py += F;
        }
      },
      4096);

  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->consumed = false;
  }
  return y;
}

template <typename Real>
struct BnGrads {
  Tensor4<Real> input;
  std::vector<Real> gamma, beta;
};

// Exact gradients of a train-mode forward, including the dependence of the
// batch statistics on the input. Consumes the cache.
template <typename Real>
BnGrads<Real> batchnorm_backward(BnCache<Real>& cache, const Tensor4<Real>& grad_out,
                                 const BatchNormLayer<Real>& bn) {
  if (cache.consumed)
    throw std::runtime_error("batchnorm_backward: cache already consumed");
  require_same_shape(cache.xhat, grad_out, "batchnorm_backward");
  detail::check_bn_input(grad_out, bn, "batchnorm_backward");
  cache.consumed = true;

  const int64_t F = grad_out.f();
  const int64_t rows = grad_out.b() * grad_out.h() * grad_out.w();
  const double n = static_cast<double>(rows);

  std::vector<double> s1, s2;  // sum(gy), sum(gy * xhat) per feature
  detail::feature_sums(grad_out, &cache.xhat, s1, s2);

  BnGrads<Real> g;
  g.input = Tensor4<Real>(grad_out.dims);
  g.gamma.resize(static_cast<size_t>(F));
  g.beta.resize(static_cast<size_t>(F));
  std::vector<Real> k0(static_cast<size_t>(F)), m1(static_cast<size_t>(F)),
      m2(static_cast<size_t>(F));
  for (int64_t f = 0; f < F; ++f) {
    const size_t sf = static_cast<size_t>(f);
    g.gamma[sf] = static_cast<Real>(s2[sf]);
    g.beta[sf] = static_cast<Real>(s1[sf]);
    k0[sf] = bn.gamma[sf] * cache.inv_std[sf];
    m1[sf] = static_cast<Real>(s1[sf] / n);
    m2[sf] = static_cast<Real>(s2[sf] / n);
  }

  parallel_for(
      rows,
      [&](int64_t r0, int64_t r1) {
        const Real* pg = grad_out.data.data() + r0 * F;
        const Real* ph = cache.xhat.data.data() + r0 * F;
        Real* po = g.input.data.data() + r0 * F;
        for (int64_t r = r0; r < r1; ++r) {
          for (int64_t f = 0; f < F; ++f) {
            const size_t sf = static_cast<size_t>(f);
            po[f] = k0[sf] * (pg[f] - m1[sf] - ph[f] * m2[sf]);
          }
          pg += F;
          ph += F;
          po += F;
        }
      },
      4096);
  return g;
}

}  // namespace cleegn
