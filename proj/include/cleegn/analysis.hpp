#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cleegn/model.hpp"
#include "cleegn/parallel.hpp"
#include "cleegn/recording.hpp"
#include "cleegn/streaming.hpp"

namespace cleegn {

struct FitnessResult {
  std::vector<double> per_channel;
  double overall = 0.0;
};

// Mean squared difference per channel and over everything.
inline FitnessResult mse_fitness(const Recording& recon, const Recording& reference) {
  if (recon.channels() != reference.channels() || recon.n_samples != reference.n_samples)
    throw std::runtime_error("mse_fitness: shape mismatch " + std::to_string(recon.channels()) +
                             "x" + std::to_string(recon.n_samples) + " vs " +
                             std::to_string(reference.channels()) + "x" +
                             std::to_string(reference.n_samples));
  FitnessResult r;
  r.per_channel.resize(static_cast<size_t>(recon.channels()));
  double total = 0.0;
  for (int64_t c = 0; c < recon.channels(); ++c) {
    double acc = 0.0;
    for (int64_t t = 0; t < recon.n_samples; ++t) {
      const double d = static_cast<double>(recon.at(c, t)) - reference.at(c, t);
      acc += d * d;
    }
    r.per_channel[static_cast<size_t>(c)] = acc / static_cast<double>(recon.n_samples);
    total += acc;
  }
  r.overall = total / static_cast<double>(recon.channels() * recon.n_samples);
  return r;
}

struct PsdEstimate {
  std::vector<double> freqs;                // Hz, [0, fs/2]
  std::vector<std::vector<double>> power;   // per channel, uV^2/Hz
  int64_t segment_len = 0;
  double overlap = 0.0;
  std::string window = "hann";
};

// Welch averaged periodogram, one-sided, density normalized: summing
// power * df approximates the signal variance (plus its DC power).
inline PsdEstimate welch_psd(const Recording& rec, double segment_sec = 2.0,
                             double overlap = 0.5) {
  rec.validate("welch_psd");
  if (!(segment_sec > 0.0)) throw std::runtime_error("welch_psd: segment_sec must be > 0");
  if (overlap < 0.0 || overlap >= 1.0)
    throw std::runtime_error("welch_psd: overlap must be in [0, 1)");
  const double fs = static_cast<double>(rec.fs);
  const int64_t nper = static_cast<int64_t>(segment_sec * fs);
  if (nper < 8) throw std::runtime_error("welch_psd: segment too short");
  if (rec.n_samples < nper)
    throw std::runtime_error("welch_psd: recording of " + std::to_string(rec.n_samples) +
                             " samples shorter than one " + std::to_string(nper) +
                             "-sample segment");
  const int64_t hop = std::max<int64_t>(1, nper - static_cast<int64_t>(overlap * static_cast<double>(nper)));
  const int64_t nfreq = nper / 2 + 1;
  const double pi = 3.14159265358979323846;

  std::vector<double> win(static_cast<size_t>(nper));
  double u = 0.0;
  for (int64_t n = 0; n < nper; ++n) {
    win[static_cast<size_t>(n)] =
        0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(n) / static_cast<double>(nper - 1));
    u += win[static_cast<size_t>(n)] * win[static_cast<size_t>(n)];
  }
  const double scale = 1.0 / (fs * u);

  // unit-circle table; bin k, sample n uses entry (k*n) mod nper
  std::vector<double> ct(static_cast<size_t>(nper)), st(static_cast<size_t>(nper));
  for (int64_t m = 0; m < nper; ++m) {
    ct[static_cast<size_t>(m)] = std::cos(2.0 * pi * static_cast<double>(m) / static_cast<double>(nper));
    st[static_cast<size_t>(m)] = std::sin(2.0 * pi * static_cast<double>(m) / static_cast<double>(nper));
  }

  PsdEstimate est;
  est.segment_len = nper;
  est.overlap = overlap;
  est.freqs.resize(static_cast<size_t>(nfreq));
  for (int64_t k = 0; k < nfreq; ++k)
    est.freqs[static_cast<size_t>(k)] = static_cast<double>(k) * fs / static_cast<double>(nper);
  est.power.assign(static_cast<size_t>(rec.channels()),
                   std::vector<double>(static_cast<size_t>(nfreq), 0.0));

  parallel_for(rec.channels(), [&](int64_t c0, int64_t c1) {
    std::vector<double> seg(static_cast<size_t>(nper));
    for (int64_t c = c0; c < c1; ++c) {
      auto& pxx = est.power[static_cast<size_t>(c)];
      int64_t nseg = 0;
      for (int64_t start = 0; start + nper <= rec.n_samples; start += hop, ++nseg) {
        for (int64_t n = 0; n < nper; ++n)
          seg[static_cast<size_t>(n)] = win[static_cast<size_t>(n)] * rec.at(c, start + n);
        for (int64_t k = 0; k < nfreq; ++k) {
          double re = 0.0, im = 0.0;
          int64_t idx = 0;
          for (int64_t n = 0; n < nper; ++n) {
            re += seg[static_cast<size_t>(n)] * ct[static_cast<size_t>(idx)];
            im -= seg[static_cast<size_t>(n)] * st[static_cast<size_t>(idx)];
            idx += k;
            if (idx >= nper) idx -= nper;
          }
          double p = (re * re + im * im) * scale;
          if (k != 0 && !(nper % 2 == 0 && k == nper / 2)) p *= 2.0;
          pxx[static_cast<size_t>(k)] += p;
        }
      }
      for (double& v : pxx) v /= static_cast<double>(nseg);
    }
  });
  return est;
}

// Two leading principal axes of a recording segment, treating each channel's
// series as one observation.
struct PcaBasis {
  std::vector<double> mean;                  // length T_seg
  std::array<std::vector<double>, 2> axes;   // orthonormal rows
  std::array<double, 2> explained{0.0, 0.0};
  int64_t start = 0;
  int64_t length = 0;
};

namespace detail {

// Cyclic Jacobi eigensolver for a small symmetric matrix. Returns
// eigenvalues and eigenvectors (columns) sorted descending.
inline void jacobi_eigen(std::vector<double>& a, int64_t n, std::vector<double>& evals,
                         std::vector<double>& evecs) {
  evecs.assign(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) evecs[static_cast<size_t>(i * n + i)] = 1.0;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int64_t p = 0; p < n; ++p)
      for (int64_t q = p + 1; q < n; ++q) off += std::abs(a[static_cast<size_t>(p * n + q)]);
    if (off < 1e-14) break;
    for (int64_t p = 0; p < n; ++p)
      for (int64_t q = p + 1; q < n; ++q) {
        const double apq = a[static_cast<size_t>(p * n + q)];
        if (std::abs(apq) < 1e-300) continue;
        const double app = a[static_cast<size_t>(p * n + p)];
        const double aqq = a[static_cast<size_t>(q * n + q)];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;
        for (int64_t i = 0; i < n; ++i) {
          const double aip = a[static_cast<size_t>(i * n + p)];
          const double aiq = a[static_cast<size_t>(i * n + q)];
          a[static_cast<size_t>(i * n + p)] = cs * aip - sn * aiq;
          a[static_cast<size_t>(i * n + q)] = sn * aip + cs * aiq;
        }
        for (int64_t i = 0; i < n; ++i) {
          const double api = a[static_cast<size_t>(p * n + i)];
          const double aqi = a[static_cast<size_t>(q * n + i)];
          a[static_cast<size_t>(p * n + i)] = cs * api - sn * aqi;
          a[static_cast<size_t>(q * n + i)] = sn * api + cs * aqi;
        }
        for (int64_t i = 0; i < n; ++i) {
          const double vip = evecs[static_cast<size_t>(i * n + p)];
          const double viq = evecs[static_cast<size_t>(i * n + q)];
          evecs[static_cast<size_t>(i * n + p)] = cs * vip - sn * viq;
          evecs[static_cast<size_t>(i * n + q)] = sn * vip + cs * viq;
        }
      }
  }
  evals.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) evals[static_cast<size_t>(i)] = a[static_cast<size_t>(i * n + i)];
  // sort descending, carrying columns along
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(),
            [&](int64_t x, int64_t y) { return evals[static_cast<size_t>(x)] > evals[static_cast<size_t>(y)]; });
  std::vector<double> ev2(static_cast<size_t>(n)), vec2(static_cast<size_t>(n * n));
  for (int64_t i = 0; i < n; ++i) {
    ev2[static_cast<size_t>(i)] = evals[static_cast<size_t>(order[static_cast<size_t>(i)])];
    for (int64_t r = 0; r < n; ++r)
      vec2[static_cast<size_t>(r * n + i)] =
          evecs[static_cast<size_t>(r * n + order[static_cast<size_t>(i)])];
  }
  evals = std::move(ev2);
  evecs = std::move(vec2);
}

inline void canonical_sign(std::vector<double>& axis) {
  double best = 0.0;
  for (double v : axis)
    if (std::abs(v) > std::abs(best)) best = v;
  if (best < 0)
    for (double& v : axis) v = -v;
}

}  // namespace detail

inline PcaBasis fit_pca_basis(const Recording& noisy, int64_t start, int64_t length) {
  noisy.validate("fit_pca_basis");
  const int64_t C = noisy.channels();
  if (C < 3) throw std::runtime_error("fit_pca_basis: need >= 3 channels");
  if (length < C)
    throw std::runtime_error("fit_pca_basis: segment length " + std::to_string(length) +
                             " shorter than channel count " + std::to_string(C));
  if (start < 0 || start + length > noisy.n_samples)
    throw std::runtime_error("fit_pca_basis: segment [" + std::to_string(start) + ", " +
                             std::to_string(start + length) + ") outside recording of " +
                             std::to_string(noisy.n_samples) + " samples");

  PcaBasis basis;
  basis.start = start;
  basis.length = length;
  basis.mean.assign(static_cast<size_t>(length), 0.0);
  for (int64_t c = 0; c < C; ++c)
    for (int64_t t = 0; t < length; ++t)
      basis.mean[static_cast<size_t>(t)] += noisy.at(c, start + t);
  for (double& v : basis.mean) v /= static_cast<double>(C);

  // A = centered C x L matrix; eigen-decompose the small Gram matrix A A^T
  std::vector<double> a(static_cast<size_t>(C * length));
  for (int64_t c = 0; c < C; ++c)
    for (int64_t t = 0; t < length; ++t)
      a[static_cast<size_t>(c * length + t)] =
          noisy.at(c, start + t) - basis.mean[static_cast<size_t>(t)];
  std::vector<double> gram(static_cast<size_t>(C * C));
  for (int64_t i = 0; i < C; ++i)
    for (int64_t j = i; j < C; ++j) {
      double acc = 0.0;
      for (int64_t t = 0; t < length; ++t)
        acc += a[static_cast<size_t>(i * length + t)] * a[static_cast<size_t>(j * length + t)];
      gram[static_cast<size_t>(i * C + j)] = acc;
      gram[static_cast<size_t>(j * C + i)] = acc;
    }

  std::vector<double> evals, evecs;
  detail::jacobi_eigen(gram, C, evals, evecs);
  double total = 0.0;
  for (double v : evals) total += std::max(0.0, v);
  if (!(evals[0] > 0.0) || !(evals[1] > 1e-12 * evals[0]) || total <= 0.0)
    throw std::runtime_error("fit_pca_basis: degenerate data, rank < 2");

  for (int i = 0; i < 2; ++i) {
    auto& axis = basis.axes[static_cast<size_t>(i)];
    axis.assign(static_cast<size_t>(length), 0.0);
    for (int64_t c = 0; c < C; ++c) {
      const double uc = evecs[static_cast<size_t>(c * C + i)];
      for (int64_t t = 0; t < length; ++t)
        axis[static_cast<size_t>(t)] += uc * a[static_cast<size_t>(c * length + t)];
    }
    double norm = 0.0;
    for (double v : axis) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) throw std::runtime_error("fit_pca_basis: degenerate axis");
    for (double& v : axis) v /= norm;
    detail::canonical_sign(axis);
    basis.explained[static_cast<size_t>(i)] = std::max(0.0, evals[static_cast<size_t>(i)]) / total;
  }
  return basis;
}

struct LatentPoint {
  double x = 0.0, y = 0.0;
  int layer = 0;
  int64_t row = 0;
};

namespace detail {

inline LatentPoint project_series(const PcaBasis& basis, const std::vector<double>& series,
                                  int layer, int64_t row) {
  LatentPoint p;
  p.layer = layer;
  p.row = row;
  for (int64_t t = 0; t < basis.length; ++t) {
    const double d = series[static_cast<size_t>(t)] - basis.mean[static_cast<size_t>(t)];
    p.x += d * basis.axes[0][static_cast<size_t>(t)];
    p.y += d * basis.axes[1][static_cast<size_t>(t)];
  }
  return p;
}

}  // namespace detail

// Layer 0 projects the raw channels, layers 1-4 every (height, feature) row
// of the corresponding convolution output, layer 5 the reconstruction.
inline std::vector<LatentPoint> project_latents(const CleegnModelF& model, const Recording& noisy,
                                                const PcaBasis& basis, int layer) {
  if (layer < 0 || layer > 5)
    throw std::runtime_error("project_latents: layer must be in 0..5");
  if (basis.start + basis.length > noisy.n_samples)
    throw std::runtime_error("project_latents: basis segment [" + std::to_string(basis.start) +
                             ", " + std::to_string(basis.start + basis.length) +
                             ") outside recording of " + std::to_string(noisy.n_samples) +
                             " samples");
  const int64_t C = model.config.channels;
  const int64_t L = basis.length;
  if (noisy.channels() != C)
    throw std::runtime_error("project_latents: recording has " +
                             std::to_string(noisy.channels()) + " channels, model expects " +
                             std::to_string(C));
  if (L < model.config.kernel_w())
    throw std::runtime_error("project_latents: segment shorter than the temporal kernel");

  std::vector<LatentPoint> points;
  std::vector<double> series(static_cast<size_t>(L));

  if (layer == 0) {
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t t = 0; t < L; ++t)
        series[static_cast<size_t>(t)] = noisy.at(c, basis.start + t);
      points.push_back(detail::project_series(basis, series, 0, c));
    }
    return points;
  }

  Tensor4<float> in(1, C, L, 1);
  for (int64_t c = 0; c < C; ++c)
    for (int64_t t = 0; t < L; ++t) in.at(0, c, t, 0) = noisy.at(c, basis.start + t);
  LatentTaps<float> taps;
  infer_forward(model, in, &taps);

  const Tensor4<float>& tap = taps.conv_out[static_cast<size_t>(layer - 1)];
  for (int64_t h = 0; h < tap.h(); ++h)
    for (int64_t f = 0; f < tap.f(); ++f) {
      for (int64_t t = 0; t < L; ++t)
        series[static_cast<size_t>(t)] = tap.at(0, h, t, f);
      points.push_back(detail::project_series(basis, series, layer, h * tap.f() + f));
    }
  return points;
}

inline void write_psd_csv(const PsdEstimate& est, const std::vector<std::string>& names,
                          std::ostream& os) {
  os << "freq";
  for (const auto& n : names) os << "," << n;
  os << "\n";
  for (size_t k = 0; k < est.freqs.size(); ++k) {
    os << est.freqs[k];
    for (const auto& ch : est.power) os << "," << ch[k];
    os << "\n";
  }
}

inline void write_latent_csv(const std::vector<LatentPoint>& points, std::ostream& os) {
  os << "x,y,layer,row\n";
  for (const auto& p : points) os << p.x << "," << p.y << "," << p.layer << "," << p.row << "\n";
}

}  // namespace cleegn
