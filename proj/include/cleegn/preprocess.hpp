#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cleegn/recording.hpp"

namespace cleegn {

// Common average reference: subtract the instantaneous cross-channel mean.
inline Recording car_reference(const Recording& rec) {
  rec.validate("car_reference");
  Recording out = rec;
  const int64_t C = rec.channels();
  for (int64_t t = 0; t < rec.n_samples; ++t) {
    double mean = 0.0;
    for (int64_t c = 0; c < C; ++c) mean += rec.at(c, t);
    mean /= static_cast<double>(C);
    for (int64_t c = 0; c < C; ++c) out.at(c, t) = rec.at(c, t) - mean;
  }
  return out;
}

namespace detail {

// Triangular-wave index reflection into [0, n), so padding works for any
// signal length.
inline int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t p = 2 * n - 2;
  i = ((i % p) + p) % p;
  return i < n ? i : p - i;
}

// Hamming-windowed sinc low-pass, unity DC gain. fc in cycles per sample.
inline std::vector<double> lowpass_kernel(double fc, int64_t taps) {
  const int64_t m = (taps - 1) / 2;
  const double pi = 3.14159265358979323846;
  std::vector<double> h(static_cast<size_t>(taps));
  double sum = 0.0;
  for (int64_t n = 0; n < taps; ++n) {
    const double x = static_cast<double>(n - m);
    double v = (n == m) ? 2.0 * fc : std::sin(2.0 * pi * fc * x) / (pi * x);
    v *= 0.54 - 0.46 * std::cos(2.0 * pi * static_cast<double>(n) / static_cast<double>(taps - 1));
    h[static_cast<size_t>(n)] = v;
    sum += v;
  }
  for (double& v : h) v /= sum;
  return h;
}

// Difference of two unity-gain low-passes: ~unit passband, exactly zero DC.
inline std::vector<double> bandpass_kernel(double f_lo, double f_hi, int64_t taps) {
  std::vector<double> hi = lowpass_kernel(f_hi, taps);
  std::vector<double> lo = lowpass_kernel(f_lo, taps);
  for (size_t i = 0; i < hi.size(); ++i) hi[i] -= lo[i];
  return hi;
}

// Symmetric-kernel convolution applied twice (the |H|^2 zero-phase response
// of forward-backward filtering), with reflection padding at the edges.
inline void filter_zero_phase(const double* x, double* y, int64_t n,
                              const std::vector<double>& h) {
  const int64_t taps = static_cast<int64_t>(h.size());
  const int64_t m = (taps - 1) / 2;
  const int64_t pad = taps - 1;
  const int64_t len = n + 2 * pad;
  std::vector<double> buf(static_cast<size_t>(len)), tmp(static_cast<size_t>(len), 0.0);
  for (int64_t i = 0; i < len; ++i)
    buf[static_cast<size_t>(i)] = x[reflect_index(i - pad, n)];

  for (int pass = 0; pass < 2; ++pass) {
    const int64_t lo = m * (pass + 1);
    const int64_t hi = len - m * (pass + 1);
    for (int64_t i = lo; i < hi; ++i) {
      double acc = 0.0;
      const double* src = buf.data() + (i - m);
      for (int64_t k = 0; k < taps; ++k) acc += h[static_cast<size_t>(k)] * src[k];
      tmp[static_cast<size_t>(i)] = acc;
    }
    std::swap(buf, tmp);
  }
  for (int64_t t = 0; t < n; ++t) y[t] = buf[static_cast<size_t>(pad + t)];
}

}  // namespace detail

// Linear-phase windowed-sinc band-pass applied zero-phase (forward-backward),
// length preserving.
inline Recording bandpass_fir(const Recording& rec, double lo_hz, double hi_hz, int64_t taps) {
  rec.validate("bandpass_fir");
  if (!(lo_hz > 0.0) || !(hi_hz > lo_hz) || !(hi_hz < rec.fs / 2.0))
    throw std::runtime_error("bandpass_fir: band [" + std::to_string(lo_hz) + ", " +
                             std::to_string(hi_hz) + "] Hz invalid for fs " +
                             std::to_string(rec.fs));
  if (taps < 3 || taps % 2 == 0)
    throw std::runtime_error("bandpass_fir: taps must be odd and >= 3, got " +
                             std::to_string(taps));
  const auto h = detail::bandpass_kernel(lo_hz / rec.fs, hi_hz / rec.fs, taps);
  Recording out = rec;
  for (int64_t c = 0; c < rec.channels(); ++c)
    detail::filter_zero_phase(rec.channel(c), out.channel(c), rec.n_samples, h);
  return out;
}

// Decimation by an integer factor with an anti-alias low-pass
// (cutoff 0.45 * new rate) applied first.
inline Recording downsample(const Recording& rec, int64_t factor) {
  rec.validate("downsample");
  if (factor < 1) throw std::runtime_error("downsample: factor must be >= 1");
  if (factor > rec.n_samples)
    throw std::runtime_error("downsample: factor " + std::to_string(factor) +
                             " leaves no samples from " + std::to_string(rec.n_samples));
  if (factor == 1) return rec;

  const int64_t taps = std::max<int64_t>(33, 16 * factor + 1);
  const auto h = detail::lowpass_kernel(0.45 / static_cast<double>(factor), taps | 1);
  Recording filtered = rec;
  for (int64_t c = 0; c < rec.channels(); ++c)
    detail::filter_zero_phase(rec.channel(c), filtered.channel(c), rec.n_samples, h);

  const int64_t T_new = (rec.n_samples + factor - 1) / factor;
  Recording out(rec.channels(), T_new, rec.fs / static_cast<float>(factor));
  out.channel_names = rec.channel_names;
  out.subject_id = rec.subject_id;
  out.kind = rec.kind;
  for (int64_t c = 0; c < rec.channels(); ++c)
    for (int64_t t = 0; t < T_new; ++t) out.at(c, t) = filtered.at(c, t * factor);
  return out;
}

struct Epoch {
  int label = 0;
  int64_t event_sample = 0;
  std::vector<float> data;  // channels * length, channel-major
  int64_t length = 0;
};

struct EpochResult {
  std::vector<Epoch> epochs;
  std::vector<size_t> skipped;  // indices of events whose span fell outside
};

// Epoch e spans samples [ts + floor(t0*fs), ts + floor(t1*fs)). Events whose
// span leaves the recording are skipped and reported, not fatal.
inline EpochResult extract_epochs(const Recording& rec, const EventList& events, double t0_sec,
                                  double t1_sec) {
  rec.validate("extract_epochs");
  if (!(t0_sec < t1_sec)) throw std::runtime_error("extract_epochs: need t0 < t1");
  const int64_t o0 = static_cast<int64_t>(std::floor(t0_sec * rec.fs));
  const int64_t o1 = static_cast<int64_t>(std::floor(t1_sec * rec.fs));
  const int64_t len = o1 - o0;
  const int64_t C = rec.channels();

  EpochResult out;
  for (size_t e = 0; e < events.events.size(); ++e) {
    const int64_t ts = events.events[e].first;
    const int64_t lo = ts + o0, hi = ts + o1;
    if (lo < 0 || hi > rec.n_samples) {
      out.skipped.push_back(e);
      continue;
    }
    Epoch ep;
    ep.label = events.events[e].second;
    ep.event_sample = ts;
    ep.length = len;
    ep.data.resize(static_cast<size_t>(C * len));
    for (int64_t c = 0; c < C; ++c)
      for (int64_t t = 0; t < len; ++t)
        ep.data[static_cast<size_t>(c * len + t)] = rec.at(c, lo + t);
    out.epochs.push_back(std::move(ep));
  }
  return out;
}

}  // namespace cleegn
