#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cleegn/checkpoint.hpp"

namespace cleegn {

enum class RecordingKind : uint8_t { raw = 0, reference = 1, reconstructed = 2, clean_truth = 3 };

// Multi-channel time series in microvolts, stored channel-major in memory.
// Samples are kept in double precision; the EEGR format quantizes to f32.
struct Recording {
  std::vector<std::string> channel_names;
  float fs = 0.0f;
  int64_t n_samples = 0;
  std::vector<double> samples;  // channels() * n_samples, channel-major
  std::string subject_id;
  RecordingKind kind = RecordingKind::raw;

  Recording() = default;
  Recording(int64_t channels, int64_t samples_, float fs_) : fs(fs_), n_samples(samples_) {
    channel_names.resize(static_cast<size_t>(channels));
    for (int64_t c = 0; c < channels; ++c) channel_names[static_cast<size_t>(c)] = "ch" + std::to_string(c + 1);
    samples.assign(static_cast<size_t>(channels * samples_), 0.0);
  }

  int64_t channels() const { return static_cast<int64_t>(channel_names.size()); }

  double& at(int64_t c, int64_t t) { return samples[static_cast<size_t>(c * n_samples + t)]; }
  double at(int64_t c, int64_t t) const { return samples[static_cast<size_t>(c * n_samples + t)]; }

  double* channel(int64_t c) { return samples.data() + c * n_samples; }
  const double* channel(int64_t c) const { return samples.data() + c * n_samples; }

  void validate(const char* who) const {
    if (channels() < 2)
      throw std::runtime_error(std::string(who) + ": recording needs >= 2 channels, got " +
                               std::to_string(channels()));
    if (n_samples < 1) throw std::runtime_error(std::string(who) + ": empty recording");
    if (!(fs > 0.0f)) throw std::runtime_error(std::string(who) + ": invalid sampling rate");
  }
};

// Event timestamps (sample index) with integer labels, strictly increasing.
struct EventList {
  std::vector<std::pair<int64_t, int>> events;
};

inline void save_recording(const Recording& rec, std::ostream& os) {
  detail::ByteWriter w{os};
  w.bytes("EEGR", 4);
  w.u16(1);
  w.u32(static_cast<uint32_t>(rec.channels()));
  w.f32(rec.fs);
  w.u64(static_cast<uint64_t>(rec.n_samples));
  w.u8(static_cast<uint8_t>(rec.kind));
  for (const auto& name : rec.channel_names) {
    w.u16(static_cast<uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
  }
  // frame-interleaved: one frame of C values per time sample
  const int64_t C = rec.channels();
  std::vector<float> frame(static_cast<size_t>(C));
  for (int64_t t = 0; t < rec.n_samples; ++t) {
    for (int64_t c = 0; c < C; ++c) frame[static_cast<size_t>(c)] = static_cast<float>(rec.at(c, t));
    w.bytes(frame.data(), frame.size() * sizeof(float));
  }
  if (!os) throw std::runtime_error("save_recording: write failed");
}

inline Recording load_recording(std::istream& is) {
  detail::ByteReader r{is, 0, "load_recording"};
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "EEGR", 4) != 0) {
    r.offset = 0;
    r.fail("bad magic, not an EEGR recording");
  }
  const uint16_t version = r.u16();
  if (version != 1) r.fail("unsupported version " + std::to_string(version));
  const uint32_t C = r.u32();
  const float fs = r.f32();
  const uint64_t T = r.u64();
  const uint8_t kind = r.u8();
  if (C < 1 || T < 1) r.fail("empty recording");
  if (kind > 3) r.fail("unknown recording kind " + std::to_string(kind));

  Recording rec(static_cast<int64_t>(C), static_cast<int64_t>(T), fs);
  rec.kind = static_cast<RecordingKind>(kind);
  for (uint32_t c = 0; c < C; ++c) {
    const uint16_t len = r.u16();
    std::string name(len, '\0');
    r.bytes(name.data(), len);
    rec.channel_names[c] = name;
  }
  std::vector<float> frame(C);
  for (uint64_t t = 0; t < T; ++t) {
    r.bytes(frame.data(), frame.size() * sizeof(float));
    for (uint32_t c = 0; c < C; ++c) {
      if (!std::isfinite(frame[c]))
        r.fail("non-finite sample at frame " + std::to_string(t) + ", channel " +
               rec.channel_names[c]);
      rec.at(c, static_cast<int64_t>(t)) = static_cast<double>(frame[c]);
    }
  }
  return rec;
}

inline void save_recording_file(const Recording& rec, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_recording: cannot open '" + path + "' for writing");
  save_recording(rec, os);
}

inline Recording load_recording_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_recording: cannot open '" + path + "'");
  return load_recording(is);
}

// CSV: header "t,<name>,<name>,..."; one row per sample, time in seconds.
inline void save_recording_csv(const Recording& rec, std::ostream& os) {
  os << "t";
  for (const auto& name : rec.channel_names) os << "," << name;
  os << "\n";
  char buf[64];
  for (int64_t t = 0; t < rec.n_samples; ++t) {
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(t) / rec.fs);
    os << buf;
    for (int64_t c = 0; c < rec.channels(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", rec.at(c, t));
      os << "," << buf;
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("save_recording_csv: write failed");
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline Recording load_recording_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("load_recording_csv: empty file, header row required");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "t")
    throw std::runtime_error(
        "load_recording_csv: header must be 't' followed by >= 2 channel names, got '" + line +
        "'");

  const size_t C = header.size() - 1;
  std::vector<std::string> names(header.begin() + 1, header.end());
  std::vector<double> times;
  std::vector<std::vector<double>> columns(C);

  size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("load_recording_csv: row " + std::to_string(row) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()));
    for (size_t i = 0; i < fields.size(); ++i) {
      double v;
      try {
        v = std::stod(fields[i]);
      } catch (const std::exception&) {
        throw std::runtime_error("load_recording_csv: row " + std::to_string(row) +
                                 ", column " + header[i] + ": cannot parse '" + fields[i] + "'");
      }
      if (!std::isfinite(v))
        throw std::runtime_error("load_recording_csv: row " + std::to_string(row) +
                                 ", column " + header[i] + ": non-finite value");
      if (i == 0)
        times.push_back(v);
      else
        columns[i - 1].push_back(v);
    }
  }
  if (times.empty()) throw std::runtime_error("load_recording_csv: no data rows");

  const int64_t T = static_cast<int64_t>(times.size());
  float fs = 1.0f;
  if (T > 1) {
    const double span = times.back() - times.front();
    if (span <= 0.0)
      throw std::runtime_error("load_recording_csv: time column must be increasing");
    fs = static_cast<float>(static_cast<double>(T - 1) / span);
  }
  Recording rec(static_cast<int64_t>(C), T, fs);
  rec.channel_names = names;
  for (size_t c = 0; c < C; ++c)
    for (int64_t t = 0; t < T; ++t) rec.at(static_cast<int64_t>(c), t) = columns[c][static_cast<size_t>(t)];
  return rec;
}

// Event CSV "sample,label" with header row.
inline EventList load_events_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("load_events_csv: empty file");
  EventList ev;
  size_t row = 1;
  int64_t prev = -1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 2)
      throw std::runtime_error("load_events_csv: row " + std::to_string(row) +
                               " must be 'sample,label'");
    const int64_t ts = std::stoll(fields[0]);
    const int label = std::stoi(fields[1]);
    if (ts <= prev)
      throw std::runtime_error("load_events_csv: row " + std::to_string(row) +
                               ": timestamps must be strictly increasing");
    prev = ts;
    ev.events.emplace_back(ts, label);
  }
  return ev;
}

}  // namespace cleegn
