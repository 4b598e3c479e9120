#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cleegn/recording.hpp"
#include "cleegn/tensor.hpp"

namespace cleegn {

// Time-aligned (noisy, reference) training sample, channel-major C x T.
struct WindowPair {
  std::vector<float> noisy;
  std::vector<float> reference;
  int64_t channels = 0;
  int64_t length = 0;
  std::string subject_id;
  int64_t start_sample = 0;
};

// Cuts aligned recordings into windows of floor(fs * window_sec) samples at
// stride floor(stride_fraction * T).
inline std::vector<WindowPair> segment_windows(const Recording& noisy,
                                               const Recording& reference, double window_sec,
                                               double stride_fraction) {
  noisy.validate("segment_windows");
  if (noisy.channels() != reference.channels() || noisy.n_samples != reference.n_samples ||
      noisy.fs != reference.fs)
    throw std::runtime_error(
        "segment_windows: noisy and reference recordings are misaligned (" +
        std::to_string(noisy.channels()) + "x" + std::to_string(noisy.n_samples) + " @ " +
        std::to_string(noisy.fs) + " Hz vs " + std::to_string(reference.channels()) + "x" +
        std::to_string(reference.n_samples) + " @ " + std::to_string(reference.fs) + " Hz)");
  if (!(window_sec > 0.0) || !(stride_fraction > 0.0) || stride_fraction > 1.0)
    throw std::runtime_error("segment_windows: window_sec must be > 0 and stride_fraction in (0, 1]");

  const int64_t T = static_cast<int64_t>(noisy.fs * window_sec);
  const int64_t stride = std::max<int64_t>(1, static_cast<int64_t>(stride_fraction * static_cast<double>(T)));
  const int64_t C = noisy.channels();

  std::vector<WindowPair> out;
  if (noisy.n_samples < T) return out;
  const int64_t count = (noisy.n_samples - T) / stride + 1;
  out.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    WindowPair wp;
    wp.channels = C;
    wp.length = T;
    wp.subject_id = noisy.subject_id;
    wp.start_sample = i * stride;
    wp.noisy.resize(static_cast<size_t>(C * T));
    wp.reference.resize(static_cast<size_t>(C * T));
    for (int64_t c = 0; c < C; ++c)
      for (int64_t t = 0; t < T; ++t) {
        wp.noisy[static_cast<size_t>(c * T + t)] = static_cast<float>(noisy.at(c, wp.start_sample + t));
        wp.reference[static_cast<size_t>(c * T + t)] =
            static_cast<float>(reference.at(c, wp.start_sample + t));
      }
    out.push_back(std::move(wp));
  }
  return out;
}

// Packs windows [first, first+count) into a (count, C, T, 1) batch.
inline Tensor4<float> pack_batch(const std::vector<const std::vector<float>*>& windows,
                                 int64_t channels, int64_t length) {
  Tensor4<float> out(static_cast<int64_t>(windows.size()), channels, length, 1);
  for (size_t b = 0; b < windows.size(); ++b) {
    const std::vector<float>& w = *windows[b];
    for (int64_t c = 0; c < channels; ++c)
      for (int64_t t = 0; t < length; ++t)
        out.at(static_cast<int64_t>(b), c, t, 0) = w[static_cast<size_t>(c * length + t)];
  }
  return out;
}

}  // namespace cleegn
