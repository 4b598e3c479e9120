#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cleegn/alloc.hpp"
#include "cleegn/model.hpp"
#include "cleegn/recording.hpp"

namespace cleegn {

// latest_hop is causal (fixed latency of one window); overlap_average needs
// full-window lookahead and is offline-only.
enum class MergePolicy { latest_hop, overlap_average };

// Infer-mode forward on an immutable model (never touches layer state).
template <typename Real>
Tensor4<Real> infer_forward(const CleegnModel<Real>& m, const Tensor4<Real>& batch,
                            LatentTaps<Real>* taps = nullptr) {
  return forward(const_cast<CleegnModel<Real>&>(m), batch, BnMode::infer, nullptr, taps);
}

namespace detail {

// Model outputs for the last n_tail columns of a window, computed on a
// cropped slab. Only the two temporal convolutions look sideways along
// time, and each corrupts pad_left columns past the slab's leading edge,
// so a margin of 2*pad_left reproduces the tail of the full-window forward
// bit-exactly (the trailing edges coincide, so right padding matches).
inline int64_t tail_margin(const CleegnModelF& m) {
  return 2 * m.enc_temporal.pad_left();
}

// get(c, t) returns window column t in [0, window_len).
template <typename GetFn>
Tensor4<float> tail_forward(const CleegnModelF& m, int64_t window_len, int64_t n_tail,
                            GetFn&& get) {
  const int64_t C = m.config.channels;
  const int64_t slab = std::min(window_len, n_tail + tail_margin(m));
  Tensor4<float> in(1, C, slab, 1);
  const int64_t base = window_len - slab;
  for (int64_t c = 0; c < C; ++c)
    for (int64_t t = 0; t < slab; ++t) in.at(0, c, t, 0) = get(c, base + t);
  Tensor4<float> out = infer_forward(m, in);
  Tensor4<float> tail(1, C, n_tail, 1);
  for (int64_t c = 0; c < C; ++c)
    for (int64_t t = 0; t < n_tail; ++t) tail.at(0, c, t, 0) = out.at(0, c, slab - n_tail + t, 0);
  return tail;
}

}  // namespace detail

// Causal ring buffer feeding window_samples()-wide slices to the model every
// hop_samples, emitting the newest hop of each window's output.
struct StreamState {
  const CleegnModelF* model = nullptr;
  MergePolicy policy = MergePolicy::latest_hop;
  int64_t channels = 0;
  int64_t window = 0;  // T samples
  int64_t hop = 0;     // H_s samples
  std::vector<float> ring;  // window slots of `channels` values each
  int64_t write_pos = 0;
  int64_t total_received = 0;
  int64_t since_last_emit = 0;
  int64_t emitted = 0;
};

inline StreamState stream_init(const CleegnModelF& model, float fs, MergePolicy policy) {
  detail::tune_malloc_once();
  model.config.validate();
  if (fs != model.config.fs)
    throw std::runtime_error("stream_init: stream fs " + std::to_string(fs) +
                             " does not match model fs " + std::to_string(model.config.fs));
  StreamState s;
  s.model = &model;
  s.policy = policy;
  s.channels = model.config.channels;
  s.window = model.config.window_samples();
  s.hop = static_cast<int64_t>(0.5f * fs);
  if (s.hop < 1) throw std::runtime_error("stream_init: fs too low for a 0.5 s hop");
  s.ring.assign(static_cast<size_t>(s.window * s.channels), 0.0f);
  return s;
}

// Pushes n_frames frames (frame-major, channels values per frame) and
// returns the reconstructed frames emitted by completed hops, also
// frame-major. Output length is always a multiple of the hop.
inline std::vector<float> stream_push(StreamState& s, const float* frames, int64_t n_frames) {
  if (s.policy == MergePolicy::overlap_average)
    throw std::runtime_error(
        "stream_push: overlap_average needs full-window lookahead and is offline-only");
  if (n_frames < 0) throw std::runtime_error("stream_push: negative frame count");

  std::vector<float> out;
  const int64_t C = s.channels, T = s.window;
  for (int64_t i = 0; i < n_frames; ++i) {
    const float* frame = frames + i * C;
    float* slot = s.ring.data() + s.write_pos * C;
    for (int64_t c = 0; c < C; ++c) slot[c] = frame[c];
    s.write_pos = (s.write_pos + 1) % T;
    s.total_received += 1;

    bool emit = false;
    if (s.total_received == T) {
      emit = true;
    } else if (s.total_received > T) {
      s.since_last_emit += 1;
      emit = s.since_last_emit == s.hop;
    }
    if (!emit) continue;
    s.since_last_emit = 0;

    // chronological column t of the current window lives at ring slot
    // (write_pos + t) mod T
    Tensor4<float> tail = detail::tail_forward(
        *s.model, T, s.hop,
        [&](int64_t c, int64_t t) { return s.ring[((s.write_pos + t) % T) * C + c]; });
    const size_t at = out.size();
    out.resize(at + static_cast<size_t>(s.hop * C));
    for (int64_t t = 0; t < s.hop; ++t)
      for (int64_t c = 0; c < C; ++c)
        out[at + static_cast<size_t>(t * C + c)] = tail.at(0, c, t, 0);
    s.emitted += s.hop;
  }
  return out;
}

// Offline reconstruction of a full recording.
//
// latest_hop matches the streaming emissions sample for sample; the first
// T - H_s samples come from the first window's outputs and a trailing
// partial hop from an end-aligned window, so output length equals input
// length. overlap_average averages every window output covering a sample.
inline Recording offline_reconstruct(const CleegnModelF& model, const Recording& rec,
                                     MergePolicy policy) {
  detail::tune_malloc_once();
  rec.validate("offline_reconstruct");
  if (rec.fs != model.config.fs)
    throw std::runtime_error("offline_reconstruct: recording fs " + std::to_string(rec.fs) +
                             " does not match model fs " + std::to_string(model.config.fs));
  if (rec.channels() != model.config.channels)
    throw std::runtime_error("offline_reconstruct: recording has " +
                             std::to_string(rec.channels()) + " channels, model expects " +
                             std::to_string(model.config.channels));
  const int64_t T = model.config.window_samples();
  const int64_t H = static_cast<int64_t>(0.5f * rec.fs);
  const int64_t N = rec.n_samples;
  if (N < T)
    throw std::runtime_error("offline_reconstruct: recording of " + std::to_string(N) +
                             " samples shorter than the " + std::to_string(T) +
                             "-sample window");

  Recording out = rec;
  out.kind = RecordingKind::reconstructed;

  auto window_forward = [&](int64_t start) {
    Tensor4<float> in(1, rec.channels(), T, 1);
    for (int64_t c = 0; c < rec.channels(); ++c)
      for (int64_t t = 0; t < T; ++t) in.at(0, c, t, 0) = static_cast<float>(rec.at(c, start + t));
    return infer_forward(model, in);
  };

  if (policy == MergePolicy::latest_hop) {
    Tensor4<float> first = window_forward(0);
    for (int64_t c = 0; c < rec.channels(); ++c)
      for (int64_t t = 0; t < T; ++t) out.at(c, t) = first.at(0, c, t, 0);
    for (int64_t start = H; start + T <= N; start += H) {
      Tensor4<float> tail = detail::tail_forward(
          model, T, H,
          [&](int64_t c, int64_t t) { return static_cast<float>(rec.at(c, start + t)); });
      for (int64_t c = 0; c < rec.channels(); ++c)
        for (int64_t t = 0; t < H; ++t) out.at(c, start + T - H + t) = tail.at(0, c, t, 0);
    }
    const int64_t covered = T + ((N - T) / H) * H;
    if (covered < N) {
      const int64_t rest = N - covered;
      Tensor4<float> tail = detail::tail_forward(
          model, T, rest,
          [&](int64_t c, int64_t t) { return static_cast<float>(rec.at(c, N - T + t)); });
      for (int64_t c = 0; c < rec.channels(); ++c)
        for (int64_t t = 0; t < rest; ++t) out.at(c, covered + t) = tail.at(0, c, t, 0);
    }
    return out;
  }

  // overlap_average
  std::vector<double> acc(static_cast<size_t>(rec.channels() * N), 0.0);
  std::vector<int32_t> cnt(static_cast<size_t>(N), 0);
  auto add_window = [&](int64_t start) {
    Tensor4<float> y = window_forward(start);
    for (int64_t c = 0; c < rec.channels(); ++c)
      for (int64_t t = 0; t < T; ++t)
        acc[static_cast<size_t>(c * N + start + t)] += y.at(0, c, t, 0);
    for (int64_t t = 0; t < T; ++t) cnt[static_cast<size_t>(start + t)] += 1;
  };
  int64_t last = 0;
  for (int64_t start = 0; start + T <= N; start += H) {
    add_window(start);
    last = start;
  }
  if (last + T < N) add_window(N - T);
  for (int64_t c = 0; c < rec.channels(); ++c)
    for (int64_t t = 0; t < N; ++t)
      out.at(c, t) = static_cast<float>(acc[static_cast<size_t>(c * N + t)] /
                                        static_cast<double>(cnt[static_cast<size_t>(t)]));
  return out;
}

}  // namespace cleegn
