#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "cleegn/batchnorm.hpp"
#include "cleegn/conv.hpp"
#include "cleegn/rng.hpp"
#include "cleegn/tensor.hpp"

namespace cleegn {

struct CleegnConfig {
  int64_t channels = 0;     // C, electrode count
  float fs = 0.0f;          // sampling rate in Hz
  int64_t n_filters = 0;    // N_F temporal filter count, defaults to C
  float window_sec = 4.0f;  // model input span in seconds

  int64_t kernel_w() const { return static_cast<int64_t>(fs / 10.0f); }
  int64_t window_samples() const { return static_cast<int64_t>(fs * window_sec); }

  void validate() const {
    if (channels < 2)
      throw std::invalid_argument("CleegnConfig: channels must be >= 2, got " +
                                  std::to_string(channels));
    if (!(fs > 0.0f)) throw std::invalid_argument("CleegnConfig: fs must be > 0");
    if (kernel_w() < 1)
      throw std::invalid_argument("CleegnConfig: fs " + std::to_string(fs) +
                                  " gives temporal kernel width 0 (need fs >= 10)");
    if (n_filters < 1) throw std::invalid_argument("CleegnConfig: n_filters must be >= 1");
    if (window_samples() < kernel_w())
      throw std::invalid_argument("CleegnConfig: window shorter than temporal kernel");
  }
};

inline CleegnConfig make_config(int64_t channels, float fs, int64_t n_filters = 0,
                                float window_sec = 4.0f) {
  CleegnConfig c;
  c.channels = channels;
  c.fs = fs;
  c.n_filters = n_filters > 0 ? n_filters : channels;
  c.window_sec = window_sec;
  c.validate();
  return c;
}

// Five convolution layers and four batch-norm layers:
// enc_spatial -> permute -> bn1 -> enc_temporal -> bn2 ->
// dec_temporal -> bn3 -> dec_spatial -> bn4 -> dec_out.
template <typename Real>
struct CleegnModel {
  CleegnConfig config;
  ConvLayer<Real> enc_spatial, enc_temporal, dec_temporal, dec_spatial, dec_out;
  BatchNormLayer<Real> bn1, bn2, bn3, bn4;
};

using CleegnModelF = CleegnModel<float>;

// Closed-form learnable parameter total: conv weights and biases plus
// batch-norm gamma and beta (running statistics excluded).
inline int64_t param_count(const CleegnConfig& cfg) {
  cfg.validate();
  const int64_t c = cfg.channels, k = cfg.kernel_w(), nf = cfg.n_filters;
  return k * nf * nf + (k + 6 + c * c) * nf + 2 * c * c + 4 * c + 3;
}

namespace detail {

template <typename Real>
void glorot_init(ConvLayer<Real>& layer, Rng& rng) {
  const int64_t fan_in = layer.k_h() * layer.k_w() * layer.f_in();
  const int64_t fan_out = layer.k_h() * layer.k_w() * layer.k_out();
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Real& w : layer.weights.data) w = static_cast<Real>(rng.uniform(-limit, limit));
}

template <typename Real, typename Fn>
void for_each_param(CleegnModel<Real>& m, Fn&& fn) {
  auto conv = [&](const char* name, ConvLayer<Real>& l) {
    fn(std::string(name) + ".weight", l.weights.data.data(), l.weights.data.size());
    fn(std::string(name) + ".bias", l.bias.data(), l.bias.size());
  };
  auto bnorm = [&](const char* name, BatchNormLayer<Real>& l) {
    fn(std::string(name) + ".gamma", l.gamma.data(), l.gamma.size());
    fn(std::string(name) + ".beta", l.beta.data(), l.beta.size());
  };
  conv("enc_spatial", m.enc_spatial);
  bnorm("bn1", m.bn1);
  conv("enc_temporal", m.enc_temporal);
  bnorm("bn2", m.bn2);
  conv("dec_temporal", m.dec_temporal);
  bnorm("bn3", m.bn3);
  conv("dec_spatial", m.dec_spatial);
  bnorm("bn4", m.bn4);
  conv("dec_out", m.dec_out);
}

}  // namespace detail

template <typename Real>
CleegnModel<Real> build_model(const CleegnConfig& cfg, uint64_t seed) {
  cfg.validate();
  const int64_t c = cfg.channels, k = cfg.kernel_w(), nf = cfg.n_filters;

  CleegnModel<Real> m;
  m.config = cfg;
  m.enc_spatial = ConvLayer<Real>(c, c, 1, 1, Padding::valid);
  m.bn1 = BatchNormLayer<Real>(1);
  m.enc_temporal = ConvLayer<Real>(nf, 1, k, 1, Padding::same_zero);
  m.bn2 = BatchNormLayer<Real>(nf);
  m.dec_temporal = ConvLayer<Real>(nf, 1, k, nf, Padding::same_zero);
  m.bn3 = BatchNormLayer<Real>(nf);
  m.dec_spatial = ConvLayer<Real>(c, c, 1, nf, Padding::same_zero);
  m.bn4 = BatchNormLayer<Real>(c);
  m.dec_out = ConvLayer<Real>(1, c, 1, c, Padding::same_zero);

  Rng rng(seed);
  detail::glorot_init(m.enc_spatial, rng);
  detail::glorot_init(m.enc_temporal, rng);
  detail::glorot_init(m.dec_temporal, rng);
  detail::glorot_init(m.dec_spatial, rng);
  detail::glorot_init(m.dec_out, rng);
  return m;
}

inline CleegnModelF build_model_f(const CleegnConfig& cfg, uint64_t seed) {
  return build_model<float>(cfg, seed);
}

// Actual allocated learnable total; must agree with param_count.
template <typename Real>
int64_t count_learnable(const CleegnModel<Real>& m) {
  int64_t n = 0;
  detail::for_each_param(const_cast<CleegnModel<Real>&>(m),
                         [&](const std::string&, Real*, size_t sz) {
                           n += static_cast<int64_t>(sz);
                         });
  return n;
}

// Caches from a train-mode forward, consumed by backward().
template <typename Real>
struct ModelCache {
  Tensor4<Real> x0, n1, n2, n3, n4;  // inputs to the five conv layers
  BnCache<Real> c1, c2, c3, c4;
  bool consumed = false;
};

// Conv outputs captured during an infer-mode forward, for latent analysis.
template <typename Real>
struct LatentTaps {
  std::vector<Tensor4<Real>> conv_out;  // 5 entries: enc_spatial .. dec_out
};

template <typename Real>
void check_model_input(const CleegnModel<Real>& m, const Tensor4<Real>& batch,
                       const char* who) {
  if (batch.h() != m.config.channels)
    throw std::runtime_error(std::string(who) + ": batch " + shape_str(batch.dims) +
                             " has " + std::to_string(batch.h()) + " channels, model expects " +
                             std::to_string(m.config.channels));
  if (batch.f() != 1)
    throw std::runtime_error(std::string(who) + ": batch feature axis must be 1, got " +
                             shape_str(batch.dims));
  if (batch.w() < m.config.kernel_w())
    throw std::runtime_error(std::string(who) + ": batch of " + std::to_string(batch.w()) +
                             " samples shorter than temporal kernel " +
                             std::to_string(m.config.kernel_w()));
}

// Runs the layer stack. Train mode uses batch statistics; set cache to keep
// what backward() needs, and update_running=false to leave the running
// statistics untouched (validation passes). Infer mode uses running
// statistics only and accepts any T' >= kernel width.
template <typename Real>
Tensor4<Real> forward(CleegnModel<Real>& m, const Tensor4<Real>& batch, BnMode mode,
                      std::type_identity_t<ModelCache<Real>>* cache = nullptr,
                      std::type_identity_t<LatentTaps<Real>>* taps = nullptr,
                      bool update_running = true) {
  check_model_input(m, batch, "forward");
  const bool train = mode == BnMode::train;
  if (!train) update_running = false;

  Tensor4<Real> a1 = conv2d_forward(batch, m.enc_spatial);
  if (taps) taps->conv_out.push_back(a1);
  Tensor4<Real> p1 = permute_hc(a1);
  Tensor4<Real> n1 = batchnorm_forward(p1, m.bn1, mode, cache ? &cache->c1 : nullptr,
                                       update_running);
  Tensor4<Real> a2 = conv2d_forward(n1, m.enc_temporal);
  if (taps) taps->conv_out.push_back(a2);
  Tensor4<Real> n2 = batchnorm_forward(a2, m.bn2, mode, cache ? &cache->c2 : nullptr,
                                       update_running);
  Tensor4<Real> a3 = conv2d_forward(n2, m.dec_temporal);
  if (taps) taps->conv_out.push_back(a3);
  Tensor4<Real> n3 = batchnorm_forward(a3, m.bn3, mode, cache ? &cache->c3 : nullptr,
                                       update_running);
  Tensor4<Real> a4 = conv2d_forward(n3, m.dec_spatial);
  if (taps) taps->conv_out.push_back(a4);
  Tensor4<Real> n4 = batchnorm_forward(a4, m.bn4, mode, cache ? &cache->c4 : nullptr,
                                       update_running);
  Tensor4<Real> y = conv2d_forward(n4, m.dec_out);
  if (taps) taps->conv_out.push_back(y);

  if (cache) {
    cache->x0 = batch;
    cache->n1 = std::move(n1);
    cache->n2 = std::move(n2);
    cache->n3 = std::move(n3);
    cache->n4 = std::move(n4);
    cache->consumed = false;
  }
  return y;
}

template <typename Real>
struct ModelGrads {
  Conv2dGrads<Real> enc_spatial, enc_temporal, dec_temporal, dec_spatial, dec_out;
  BnGrads<Real> bn1, bn2, bn3, bn4;
  Tensor4<Real> input;  // d(loss)/d(batch)

  template <typename Fn>
  void for_each(Fn&& fn) {
    auto conv = [&](const char* name, Conv2dGrads<Real>& g) {
      fn(std::string(name) + ".weight", g.weights.data.data(), g.weights.data.size());
      fn(std::string(name) + ".bias", g.bias.data(), g.bias.size());
    };
    auto bnorm = [&](const char* name, BnGrads<Real>& g) {
      fn(std::string(name) + ".gamma", g.gamma.data(), g.gamma.size());
      fn(std::string(name) + ".beta", g.beta.data(), g.beta.size());
    };
    conv("enc_spatial", enc_spatial);
    bnorm("bn1", bn1);
    conv("enc_temporal", enc_temporal);
    bnorm("bn2", bn2);
    conv("dec_temporal", dec_temporal);
    bnorm("bn3", bn3);
    conv("dec_spatial", dec_spatial);
    bnorm("bn4", bn4);
    conv("dec_out", dec_out);
  }
};

template <typename Real>
ModelGrads<Real> backward(CleegnModel<Real>& m, ModelCache<Real>& cache,
                          const Tensor4<Real>& grad_out) {
  if (cache.consumed) throw std::runtime_error("backward: model cache already consumed");
  cache.consumed = true;

  ModelGrads<Real> g;
  g.dec_out = conv2d_backward(cache.n4, m.dec_out, grad_out);
  g.bn4 = batchnorm_backward(cache.c4, g.dec_out.input, m.bn4);
  g.dec_spatial = conv2d_backward(cache.n3, m.dec_spatial, g.bn4.input);
  g.bn3 = batchnorm_backward(cache.c3, g.dec_spatial.input, m.bn3);
  g.dec_temporal = conv2d_backward(cache.n2, m.dec_temporal, g.bn3.input);
  g.bn2 = batchnorm_backward(cache.c2, g.dec_temporal.input, m.bn2);
  g.enc_temporal = conv2d_backward(cache.n1, m.enc_temporal, g.bn2.input);
  g.bn1 = batchnorm_backward(cache.c1, g.enc_temporal.input, m.bn1);
  Tensor4<Real> gp = permute_ch(g.bn1.input);  // undo the H<->F swap
  g.enc_spatial = conv2d_backward(cache.x0, m.enc_spatial, gp);
  g.input = std::move(g.enc_spatial.input);
  return g;
}

}  // namespace cleegn
