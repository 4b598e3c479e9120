#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cleegn/preprocess.hpp"
#include "cleegn/rng.hpp"
#include "cleegn/windows.hpp"

using cleegn::EventList;
using cleegn::Recording;

namespace {

Recording sine_recording(double freq_hz, float fs, double seconds, int64_t channels = 2) {
  Recording rec(channels, static_cast<int64_t>(seconds * fs), fs);
  for (int64_t c = 0; c < channels; ++c)
    for (int64_t t = 0; t < rec.n_samples; ++t)
      rec.at(c, t) = static_cast<float>(
          std::sin(2.0 * 3.14159265358979 * freq_hz * static_cast<double>(t) / fs));
  return rec;
}

double central_rms(const Recording& rec, int64_t c) {
  const int64_t lo = rec.n_samples / 4, hi = rec.n_samples - rec.n_samples / 4;
  double acc = 0.0;
  for (int64_t t = lo; t < hi; ++t) acc += static_cast<double>(rec.at(c, t)) * rec.at(c, t);
  return std::sqrt(acc / static_cast<double>(hi - lo));
}

}  // namespace

TEST_CASE("car subtracts the per-sample channel mean") {
  Recording rec(2, 1, 128.0f);
  rec.at(0, 0) = 1.0f;
  rec.at(1, 0) = 3.0f;
  const Recording out = cleegn::car_reference(rec);
  CHECK(out.at(0, 0) == -1.0f);
  CHECK(out.at(1, 0) == 1.0f);
}

TEST_CASE("car leaves zero-mean columns unchanged and is idempotent") {
  cleegn::Rng rng(9);
  Recording rec(4, 50, 128.0f);
  for (int64_t t = 0; t < 50; ++t) {
    double mean = 0.0;
    for (int64_t c = 0; c < 4; ++c) {
      rec.at(c, t) = rng.uniform(-10, 10);
      mean += rec.at(c, t);
    }
    for (int64_t c = 0; c < 4; ++c) rec.at(c, t) -= mean / 4.0;
  }
  const Recording once = cleegn::car_reference(rec);
  for (int64_t i = 0; i < 200; ++i)
    CHECK_THAT(once.samples[static_cast<size_t>(i)],
               Catch::Matchers::WithinAbs(rec.samples[static_cast<size_t>(i)], 1e-9));
  const Recording twice = cleegn::car_reference(once);
  for (size_t i = 0; i < twice.samples.size(); ++i)
    CHECK_THAT(twice.samples[i], Catch::Matchers::WithinAbs(once.samples[i], 1e-12));
}

TEST_CASE("car output has per-sample channel mean below 1e-9") {
  cleegn::Rng rng(10);
  Recording rec(6, 300, 128.0f);
  for (auto& v : rec.samples) v = static_cast<float>(rng.uniform(-100, 100));
  const Recording out = cleegn::car_reference(rec);
  for (int64_t t = 0; t < out.n_samples; ++t) {
    double mean = 0.0;
    for (int64_t c = 0; c < 6; ++c) mean += out.at(c, t);
    CHECK(std::abs(mean / 6.0) < 1e-9 * 100);
  }
}

TEST_CASE("bandpass passes 10 Hz within half a dB") {
  const Recording rec = sine_recording(10.0, 128.0f, 8.0);
  const Recording out = cleegn::bandpass_fir(rec, 1.0, 40.0, 513);
  const double gain_db = 20.0 * std::log10(central_rms(out, 0) / central_rms(rec, 0));
  CHECK(std::abs(gain_db) < 0.5);
}

TEST_CASE("bandpass attenuates 55 Hz by at least 30 dB") {
  const Recording rec = sine_recording(55.0, 128.0f, 8.0);
  const Recording out = cleegn::bandpass_fir(rec, 1.0, 40.0, 513);
  const double gain_db = 20.0 * std::log10(central_rms(out, 0) / central_rms(rec, 0));
  CHECK(gain_db <= -30.0);
}

TEST_CASE("bandpass blocks DC") {
  Recording rec(2, 1024, 128.0f);
  for (auto& v : rec.samples) v = 1.0f;
  const Recording out = cleegn::bandpass_fir(rec, 1.0, 40.0, 513);
  CHECK(central_rms(out, 0) < 0.01);
}

TEST_CASE("bandpass rejects invalid bands and even taps") {
  const Recording rec = sine_recording(10.0, 128.0f, 2.0);
  CHECK_THROWS_AS(cleegn::bandpass_fir(rec, 40.0, 1.0, 513), std::runtime_error);
  CHECK_THROWS_AS(cleegn::bandpass_fir(rec, 1.0, 70.0, 513), std::runtime_error);
  CHECK_THROWS_AS(cleegn::bandpass_fir(rec, 1.0, 40.0, 512), std::runtime_error);
}

TEST_CASE("bandpass is linear") {
  cleegn::Rng rng(11);
  Recording x(2, 600, 128.0f), y(2, 600, 128.0f), mix(2, 600, 128.0f);
  for (int64_t i = 0; i < 1200; ++i) {
    const size_t si = static_cast<size_t>(i);
    x.samples[si] = static_cast<float>(rng.uniform(-1, 1));
    y.samples[si] = static_cast<float>(rng.uniform(-1, 1));
    mix.samples[si] = 2.0f * x.samples[si] + 3.0f * y.samples[si];
  }
  const Recording fx = cleegn::bandpass_fir(x, 1.0, 40.0, 129);
  const Recording fy = cleegn::bandpass_fir(y, 1.0, 40.0, 129);
  const Recording fmix = cleegn::bandpass_fir(mix, 1.0, 40.0, 129);
  for (int64_t i = 0; i < 1200; ++i) {
    const size_t si = static_cast<size_t>(i);
    CHECK_THAT(fmix.samples[si],
               Catch::Matchers::WithinAbs(2.0f * fx.samples[si] + 3.0f * fy.samples[si], 1e-6));
  }
}

TEST_CASE("downsample with factor 1 is the identity") {
  const Recording rec = sine_recording(5.0, 256.0f, 2.0);
  const Recording out = cleegn::downsample(rec, 1);
  CHECK(out.samples == rec.samples);
  CHECK(out.fs == rec.fs);
}

TEST_CASE("downsample halves fs and length for factor 2") {
  const Recording rec = sine_recording(5.0, 256.0f, 5.0);
  const Recording out = cleegn::downsample(rec, 2);
  CHECK(out.fs == 128.0f);
  CHECK(out.n_samples == rec.n_samples / 2);
}

TEST_CASE("downsample keeps a passband tone within 1 dB") {
  const Recording rec = sine_recording(5.0, 256.0f, 8.0);
  const Recording out = cleegn::downsample(rec, 2);
  const double gain_db = 20.0 * std::log10(central_rms(out, 0) / central_rms(rec, 0));
  CHECK(std::abs(gain_db) < 1.0);
}

TEST_CASE("downsample rejects a factor larger than the recording") {
  const Recording rec = sine_recording(5.0, 256.0f, 0.05);  // 12 samples
  CHECK_THROWS_AS(cleegn::downsample(rec, 100), std::runtime_error);
}

TEST_CASE("epoch lengths match the stated intervals") {
  Recording rec(2, 2000, 128.0f);
  EventList ev;
  ev.events = {{100, 1}, {700, 0}};
  auto res = cleegn::extract_epochs(rec, ev, 0.0, 1.25);
  REQUIRE(res.epochs.size() == 2);
  CHECK(res.epochs[0].length == 160);

  Recording rec125(2, 2000, 125.0f);
  auto res125 = cleegn::extract_epochs(rec125, ev, 1.0, 5.0);
  REQUIRE(res125.epochs.size() == 2);
  CHECK(res125.epochs[0].length == 500);
}

TEST_CASE("epochs copy the right samples and labels") {
  Recording rec(2, 400, 128.0f);
  for (int64_t t = 0; t < 400; ++t) rec.at(1, t) = static_cast<float>(t);
  EventList ev;
  ev.events = {{64, 7}};
  auto res = cleegn::extract_epochs(rec, ev, 0.5, 1.0);
  REQUIRE(res.epochs.size() == 1);
  CHECK(res.epochs[0].label == 7);
  CHECK(res.epochs[0].length == 64);
  CHECK(res.epochs[0].data[64] == 128.0f);  // channel 1, first sample = 64 + 64
}

TEST_CASE("events whose epoch leaves the recording are skipped and reported") {
  Recording rec(2, 200, 128.0f);
  EventList ev;
  ev.events = {{10, 1}, {199, 2}};
  auto res = cleegn::extract_epochs(rec, ev, 0.0, 1.0);
  CHECK(res.epochs.size() == 1);
  REQUIRE(res.skipped.size() == 1);
  CHECK(res.skipped[0] == 1);
}

TEST_CASE("segment_windows uses T = 512 at 128 Hz and strides half a window") {
  Recording noisy(2, 1280, 128.0f), ref(2, 1280, 128.0f);
  noisy.subject_id = "s01";
  auto windows = cleegn::segment_windows(noisy, ref, 4.0, 0.5);
  REQUIRE(windows.size() == 4);
  CHECK(windows[0].length == 512);
  CHECK(windows[0].start_sample == 0);
  CHECK(windows[1].start_sample == 256);
  CHECK(windows[3].start_sample == 768);
  CHECK(windows[0].subject_id == "s01");
}

TEST_CASE("segment_windows yields one window when T_total equals T") {
  Recording noisy(2, 512, 128.0f), ref(2, 512, 128.0f);
  CHECK(cleegn::segment_windows(noisy, ref, 4.0, 0.5).size() == 1);
  Recording small(2, 511, 128.0f), small_ref(2, 511, 128.0f);
  CHECK(cleegn::segment_windows(small, small_ref, 4.0, 0.5).empty());
}

TEST_CASE("segment_windows rejects misaligned pairs") {
  Recording noisy(2, 512, 128.0f), ref(2, 500, 128.0f);
  CHECK_THROWS_WITH(cleegn::segment_windows(noisy, ref, 4.0, 0.5),
                    Catch::Matchers::ContainsSubstring("misaligned"));
}

TEST_CASE("consecutive half-stride windows share exactly half their samples") {
  cleegn::Rng rng(12);
  Recording noisy(2, 1024, 128.0f), ref(2, 1024, 128.0f);
  for (auto& v : noisy.samples) v = static_cast<float>(rng.uniform(-1, 1));
  auto windows = cleegn::segment_windows(noisy, ref, 4.0, 0.5);
  REQUIRE(windows.size() >= 2);
  const int64_t T = windows[0].length;
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t t = 0; t < T / 2; ++t)
      CHECK(windows[0].noisy[static_cast<size_t>(c * T + T / 2 + t)] ==
            windows[1].noisy[static_cast<size_t>(c * T + t)]);
}
