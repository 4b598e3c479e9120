#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cleegn/model.hpp"

namespace cleegn {

struct CheckpointMeta {
  uint32_t epoch = 0;
  float val_loss = 0.0f;
  uint64_t seed = 0;
};

namespace detail {

// Little-endian writers/readers. The reader tracks a byte offset so load
// errors can say where the file went wrong.
struct ByteWriter {
  std::ostream& os;
  void bytes(const void* p, size_t n) { os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(uint8_t v) { bytes(&v, 1); }
  void u16(uint16_t v) { uint8_t b[2] = {uint8_t(v), uint8_t(v >> 8)}; bytes(b, 2); }
  void u32(uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    bytes(b, 4);
  }
  void u64(uint64_t v) {
    u32(static_cast<uint32_t>(v));
    u32(static_cast<uint32_t>(v >> 32));
  }
  void f32(float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    u32(u);
  }
};

struct ByteReader {
  std::istream& is;
  size_t offset = 0;
  std::string where;

  [[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error(where + ": " + what + " at byte offset " + std::to_string(offset));
  }
  void bytes(void* p, size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(is.gcount()) != n) fail("truncated file");
    offset += n;
  }
  uint8_t u8() { uint8_t v; bytes(&v, 1); return v; }
  uint16_t u16() { uint8_t b[2]; bytes(b, 2); return uint16_t(b[0] | (b[1] << 8)); }
  uint32_t u32() {
    uint8_t b[4];
    bytes(b, 4);
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
  }
  uint64_t u64() {
    uint64_t lo = u32();
    return lo | (static_cast<uint64_t>(u32()) << 32);
  }
  float f32() {
    uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
};

inline void write_named_array(ByteWriter& w, const std::string& name,
                              const std::vector<uint32_t>& dims, const float* data, size_t n) {
  w.u16(static_cast<uint16_t>(name.size()));
  w.bytes(name.data(), name.size());
  w.u8(static_cast<uint8_t>(dims.size()));
  for (uint32_t d : dims) w.u32(d);
  w.bytes(data, n * sizeof(float));
}

inline void read_named_array(ByteReader& r, const std::string& want_name,
                             const std::vector<uint32_t>& want_dims, float* data, size_t n) {
  const uint16_t len = r.u16();
  std::string name(len, '\0');
  r.bytes(name.data(), len);
  if (name != want_name) r.fail("expected array '" + want_name + "', found '" + name + "'");
  const uint8_t rank = r.u8();
  if (rank != want_dims.size())
    r.fail("array '" + name + "' has rank " + std::to_string(rank) + ", expected " +
           std::to_string(want_dims.size()));
  for (uint32_t want : want_dims) {
    const uint32_t got = r.u32();
    if (got != want)
      r.fail("array '" + name + "' dim " + std::to_string(got) + ", expected " +
             std::to_string(want));
  }
  r.bytes(data, n * sizeof(float));
}

template <typename Fn>
void for_each_model_array(CleegnModelF& m, Fn&& fn) {
  auto conv = [&](const char* name, ConvLayer<float>& l) {
    const auto& d = l.weights.dims;
    fn(std::string(name) + ".weight",
       std::vector<uint32_t>{uint32_t(d[0]), uint32_t(d[1]), uint32_t(d[2]), uint32_t(d[3])},
       l.weights.data.data(), l.weights.data.size());
    fn(std::string(name) + ".bias", std::vector<uint32_t>{uint32_t(l.bias.size())},
       l.bias.data(), l.bias.size());
  };
  auto bnorm = [&](const char* name, BatchNormLayer<float>& l) {
    const std::vector<uint32_t> d{uint32_t(l.gamma.size())};
    fn(std::string(name) + ".gamma", d, l.gamma.data(), l.gamma.size());
    fn(std::string(name) + ".beta", d, l.beta.data(), l.beta.size());
  };
  auto bstats = [&](const char* name, BatchNormLayer<float>& l) {
    const std::vector<uint32_t> d{uint32_t(l.gamma.size())};
    fn(std::string(name) + ".running_mean", d, l.running_mean.data(), l.running_mean.size());
    fn(std::string(name) + ".running_var", d, l.running_var.data(), l.running_var.size());
  };
  // learnable arrays in layer order, then running statistics
  conv("enc_spatial", m.enc_spatial);
  bnorm("bn1", m.bn1);
  conv("enc_temporal", m.enc_temporal);
  bnorm("bn2", m.bn2);
  conv("dec_temporal", m.dec_temporal);
  bnorm("bn3", m.bn3);
  conv("dec_spatial", m.dec_spatial);
  bnorm("bn4", m.bn4);
  conv("dec_out", m.dec_out);
  bstats("bn1", m.bn1);
  bstats("bn2", m.bn2);
  bstats("bn3", m.bn3);
  bstats("bn4", m.bn4);
}

}  // namespace detail

inline void save_checkpoint(const CleegnModelF& model, const CheckpointMeta& meta,
                            std::ostream& os) {
  detail::ByteWriter w{os};
  w.bytes("CLGN", 4);
  w.u16(1);
  w.u32(static_cast<uint32_t>(model.config.channels));
  w.f32(model.config.fs);
  w.u32(static_cast<uint32_t>(model.config.n_filters));
  w.f32(model.config.window_sec);
  w.f32(model.bn1.eps);
  w.f32(model.bn1.momentum);
  detail::for_each_model_array(
      const_cast<CleegnModelF&>(model),
      [&](const std::string& name, const std::vector<uint32_t>& dims, float* data, size_t n) {
        detail::write_named_array(w, name, dims, data, n);
      });
  w.u32(meta.epoch);
  w.f32(meta.val_loss);
  w.u64(meta.seed);
  if (!os) throw std::runtime_error("save_checkpoint: write failed");
}

struct LoadedCheckpoint {
  CleegnModelF model;
  CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(std::istream& is) {
  detail::ByteReader r{is, 0, "load_checkpoint"};
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "CLGN", 4) != 0) {
    r.offset = 0;
    r.fail("bad magic, not a CLEEGN checkpoint");
  }
  const uint16_t version = r.u16();
  if (version != 1) r.fail("unsupported version " + std::to_string(version));

  const uint32_t c = r.u32();
  const float fs = r.f32();
  const uint32_t nf = r.u32();
  const float window_sec = r.f32();
  const float eps = r.f32();
  const float momentum = r.f32();

  LoadedCheckpoint out;
  out.model = build_model<float>(make_config(c, fs, nf, window_sec), 0);
  for (BatchNormLayer<float>* bn : {&out.model.bn1, &out.model.bn2, &out.model.bn3, &out.model.bn4}) {
    bn->eps = eps;
    bn->momentum = momentum;
  }
  detail::for_each_model_array(
      out.model,
      [&](const std::string& name, const std::vector<uint32_t>& dims, float* data, size_t n) {
        detail::read_named_array(r, name, dims, data, n);
      });
  out.meta.epoch = r.u32();
  out.meta.val_loss = r.f32();
  out.meta.seed = r.u64();
  return out;
}

inline void save_checkpoint_file(const CleegnModelF& model, const CheckpointMeta& meta,
                                 const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open '" + path + "' for writing");
  save_checkpoint(model, meta, os);
}

inline LoadedCheckpoint load_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
  return load_checkpoint(is);
}

}  // namespace cleegn
