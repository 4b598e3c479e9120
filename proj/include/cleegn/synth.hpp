#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cleegn/preprocess.hpp"
#include "cleegn/recording.hpp"
#include "cleegn/rng.hpp"

namespace cleegn {

// Ground-truth generator: band-limited rhythms over a 1/f background, plus
// eye-blink transients (front-weighted), EMG bursts (lateral-weighted) and
// an optional mains tone on the noisy copy.
struct SynthSpec {
  int64_t channels = 8;
  float fs = 128.0f;
  double duration_sec = 60.0;
  uint64_t seed = 0;
  double blinks_per_min = 22.0;
  double emg_per_min = 10.0;
  double background_uv = 3.0;  // 1/f background RMS
  double alpha_uv = 8.0;       // posterior alpha amplitude
  double blink_uv = 220.0;     // blink peak amplitude
  double emg_uv = 70.0;        // EMG burst RMS
  bool line_noise = false;
  double line_uv = 5.0;

  void validate() const {
    if (channels < 2) throw std::invalid_argument("SynthSpec: channels must be >= 2");
    if (!(fs > 0.0f)) throw std::invalid_argument("SynthSpec: fs must be > 0");
    if (!(duration_sec > 0.0)) throw std::invalid_argument("SynthSpec: duration must be > 0");
    if (blinks_per_min < 0 || emg_per_min < 0 || background_uv < 0 || alpha_uv < 0 ||
        blink_uv < 0 || emg_uv < 0 || line_uv < 0)
      throw std::invalid_argument("SynthSpec: rates and amplitudes must be >= 0");
  }
};

namespace detail {

constexpr double kTwoPi = 6.283185307179586;

// Octave-spaced AR(1) bank, equal energy per octave: approximately 1/f.
inline std::vector<double> pink_noise(Rng& rng, int64_t n, double fs) {
  const double cutoffs[5] = {1.0, 2.0, 4.0, 8.0, 16.0};
  std::vector<double> alpha(5), norm(5);
  for (int k = 0; k < 5; ++k) {
    alpha[static_cast<size_t>(k)] = std::exp(-kTwoPi * cutoffs[k] / fs);
    norm[static_cast<size_t>(k)] =
        std::sqrt(1.0 - alpha[static_cast<size_t>(k)] * alpha[static_cast<size_t>(k)]);
  }
  std::vector<double> state(5, 0.0);
  std::vector<double> out(static_cast<size_t>(n));
  const double scale = 1.0 / std::sqrt(5.0);
  for (int64_t t = 0; t < n; ++t) {
    const double w = rng.gauss();
    double acc = 0.0;
    for (int k = 0; k < 5; ++k) {
      state[static_cast<size_t>(k)] =
          alpha[static_cast<size_t>(k)] * state[static_cast<size_t>(k)] +
          norm[static_cast<size_t>(k)] * w;
      acc += state[static_cast<size_t>(k)];
    }
    out[static_cast<size_t>(t)] = acc * scale;
  }
  return out;
}

// Channel position along the front-to-back axis in [0, 1].
inline double head_pos(int64_t c, int64_t channels) {
  return channels > 1 ? static_cast<double>(c) / static_cast<double>(channels - 1) : 0.0;
}

inline double blink_profile(double p) { return std::exp(-3.0 * p); }

inline double emg_profile(double p) {
  const double l = (p - 0.25) / 0.12, r = (p - 0.75) / 0.12;
  return std::exp(-l * l) + std::exp(-r * r);
}

}  // namespace detail

inline std::pair<Recording, Recording> synth_subject(const SynthSpec& spec) {
  spec.validate();
  const int64_t C = spec.channels;
  const int64_t T = static_cast<int64_t>(spec.duration_sec * spec.fs);
  if (T < 2) throw std::invalid_argument("synth_subject: duration too short");
  const double fs = static_cast<double>(spec.fs);
  Rng rng(spec.seed);

  // --- clean brain activity ---
  struct Rhythm {
    double freq, phase, env_freq, env_phase, amp;
    std::vector<double> weight;  // per channel
  };
  const double base_freq[4] = {10.0, 6.0, 18.0, 11.0};
  const double base_amp[4] = {1.0, 0.6, 0.35, 0.3};
  std::vector<Rhythm> rhythms(4);
  for (int r = 0; r < 4; ++r) {
    Rhythm& rh = rhythms[static_cast<size_t>(r)];
    rh.freq = base_freq[r] + rng.uniform(-0.5, 0.5);
    rh.phase = rng.uniform(0.0, detail::kTwoPi);
    rh.env_freq = rng.uniform(0.05, 0.2);
    rh.env_phase = rng.uniform(0.0, detail::kTwoPi);
    rh.amp = spec.alpha_uv * base_amp[r];
    rh.weight.resize(static_cast<size_t>(C));
    for (int64_t c = 0; c < C; ++c) {
      const double p = detail::head_pos(c, C);
      double base = 1.0;
      switch (r) {
        case 0: base = std::exp(-3.0 * (1.0 - p)); break;       // alpha, posterior
        case 1: base = std::exp(-4.0 * (p - 0.3) * (p - 0.3)); break;  // theta, fronto-central
        case 2: base = 0.7; break;                              // beta, diffuse
        case 3: base = std::exp(-6.0 * (p - 0.5) * (p - 0.5)); break;  // mu, central
      }
      rh.weight[static_cast<size_t>(c)] = base * rng.uniform(0.6, 1.4);
    }
  }

  Recording clean(C, T, spec.fs);
  clean.kind = RecordingKind::clean_truth;
  for (int64_t c = 0; c < C; ++c) {
    const std::vector<double> bg = detail::pink_noise(rng, T, fs);
    for (int64_t t = 0; t < T; ++t)
      clean.at(c, t) = spec.background_uv * bg[static_cast<size_t>(t)];
  }
  for (const auto& rh : rhythms) {
    for (int64_t t = 0; t < T; ++t) {
      const double tt = static_cast<double>(t) / fs;
      const double env = 0.55 + 0.45 * std::sin(detail::kTwoPi * rh.env_freq * tt + rh.env_phase);
      const double s = rh.amp * env * std::sin(detail::kTwoPi * rh.freq * tt + rh.phase);
      for (int64_t c = 0; c < C; ++c)
        clean.at(c, t) += s * rh.weight[static_cast<size_t>(c)];
    }
  }
  // keep clean content inside the EEG band
  const double band_hi = std::min(45.0, 0.45 * fs);
  clean = bandpass_fir(clean, 1.0, band_hi, 385);
  clean.kind = RecordingKind::clean_truth;

  Recording noisy = clean;
  noisy.kind = RecordingKind::raw;

  // --- blink transients: smooth biphasic bumps, front-weighted ---
  if (spec.blinks_per_min > 0 && spec.blink_uv > 0) {
    const double mean_gap = 60.0 / spec.blinks_per_min;
    double tc = rng.uniform(0.2, mean_gap);
    while (tc < spec.duration_sec) {
      const double dur = rng.uniform(0.3, 0.5);
      const double amp = spec.blink_uv * rng.uniform(0.7, 1.3);
      const double s1 = dur / 6.0, s2 = dur / 4.0, delay = 0.3 * dur;
      const int64_t lo = std::max<int64_t>(0, static_cast<int64_t>((tc - dur) * fs));
      const int64_t hi = std::min<int64_t>(T, static_cast<int64_t>((tc + dur) * fs) + 1);
      for (int64_t t = lo; t < hi; ++t) {
        const double dt = static_cast<double>(t) / fs - tc;
        const double g1 = std::exp(-0.5 * (dt / s1) * (dt / s1));
        const double g2 = std::exp(-0.5 * ((dt - delay) / s2) * ((dt - delay) / s2));
        const double v = amp * (g1 - 0.35 * g2);
        for (int64_t c = 0; c < C; ++c)
          noisy.at(c, t) += v * detail::blink_profile(detail::head_pos(c, C));
      }
      tc += std::max(0.5, -mean_gap * std::log(std::max(1e-12, rng.unit())));
    }
  }

  // --- EMG bursts: 20-40 Hz tone mixture under a Hann gate, lateral-weighted ---
  if (spec.emg_per_min > 0 && spec.emg_uv > 0) {
    const double mean_gap = 60.0 / spec.emg_per_min;
    double tc = rng.uniform(0.2, mean_gap);
    while (tc < spec.duration_sec) {
      const double dur = rng.uniform(0.4, 1.0);
      const int n_tones = 8;
      std::vector<double> freq(n_tones), phase(n_tones);
      for (int j = 0; j < n_tones; ++j) {
        freq[static_cast<size_t>(j)] = rng.uniform(20.0, std::min(40.0, 0.45 * fs));
        phase[static_cast<size_t>(j)] = rng.uniform(0.0, detail::kTwoPi);
      }
      const double carrier_rms = std::sqrt(static_cast<double>(n_tones) / 2.0);
      const int64_t lo = std::max<int64_t>(0, static_cast<int64_t>(tc * fs));
      const int64_t hi = std::min<int64_t>(T, static_cast<int64_t>((tc + dur) * fs));
      for (int64_t t = lo; t < hi; ++t) {
        const double tt = static_cast<double>(t) / fs;
        const double u = (tt - tc) / dur;
        const double gate = 0.5 - 0.5 * std::cos(detail::kTwoPi * u);
        double carrier = 0.0;
        for (int j = 0; j < n_tones; ++j)
          carrier += std::sin(detail::kTwoPi * freq[static_cast<size_t>(j)] * tt +
                              phase[static_cast<size_t>(j)]);
        const double v = spec.emg_uv * gate * carrier / carrier_rms;
        for (int64_t c = 0; c < C; ++c)
          noisy.at(c, t) += v * detail::emg_profile(detail::head_pos(c, C));
      }
      tc += std::max(1.0, -mean_gap * std::log(std::max(1e-12, rng.unit())));
    }
  }

  // --- optional mains tone ---
  if (spec.line_noise && spec.line_uv > 0) {
    const double f50 = 50.0 < 0.5 * fs ? 50.0 : 0.4 * fs;
    for (int64_t t = 0; t < T; ++t) {
      const double v =
          spec.line_uv * std::sin(detail::kTwoPi * f50 * static_cast<double>(t) / fs);
      for (int64_t c = 0; c < C; ++c) noisy.at(c, t) += v;
    }
  }

  // quantize to f32-representable values so EEGR files round-trip losslessly
  for (auto& v : noisy.samples) v = static_cast<double>(static_cast<float>(v));
  for (auto& v : clean.samples) v = static_cast<double>(static_cast<float>(v));

  return {std::move(noisy), std::move(clean)};
}

}  // namespace cleegn
