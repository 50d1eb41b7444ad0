// SPDX-License-Identifier: Apache-2.0
#include "avsr/train/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "avsr/core/error.hpp"

namespace avsr::train {

namespace {

constexpr char kMagic[8] = {'A', 'V', 'S', 'R', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void u8(std::uint8_t v) { b_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    b_.insert(b_.end(), c, c + n);
  }
  const std::vector<std::uint8_t>& bytes() const { return b_; }

 private:
  std::vector<std::uint8_t> b_;
};

class Reader {
 public:
  Reader(std::vector<std::uint8_t> b, std::string where) : b_(std::move(b)), where_(std::move(where)) {}

  const std::uint8_t* take(std::size_t n) {
    if (pos_ + n > b_.size()) throw FormatError(where_ + ": truncated checkpoint");
    const auto* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return *take(1); }
  std::uint16_t u16() {
    const auto* p = take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool at_end() const { return pos_ == b_.size(); }
  const std::string& where() const { return where_; }

 private:
  std::vector<std::uint8_t> b_;
  std::string where_;
  std::size_t pos_ = 0;
};

}  // namespace

Digest sha256(std::string_view text) {
  Digest d{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 || len != d.size()) {
    throw Error(ErrorKind::kData, "SHA-256 digest failed");
  }
  return d;
}

Digest config_digest(const models::ModelConfig& cfg, models::Modality modality) {
  return sha256(cfg.canonical() + ";modality=" + models::modality_name(modality));
}

std::string digest_hex(const Digest& d) {
  std::string out;
  char buf[3];
  for (auto b : d) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    out += buf;
  }
  return out;
}

Checkpoint make_checkpoint(const models::SequenceModel& model, std::uint32_t epoch, double metric) {
  Checkpoint c;
  for (const auto& e : model.state()) {
    std::vector<double> v(e.tensor.data().begin(), e.tensor.data().end());
    for (double& x : v) x = static_cast<float>(x);
    c.state.entries.emplace_back(e.name, ad::Tensor::from(e.tensor.shape(), std::move(v)));
  }
  c.meta.epoch = epoch;
  c.meta.metric = static_cast<float>(metric);
  c.meta.digest = config_digest(model.config(), model.modality());
  return c;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.state.entries.size()));
  for (const auto& [name, t] : ckpt.state.entries) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw CheckpointError("entry name too long: " + name);
    if (t.rank() > std::numeric_limits<std::uint8_t>::max()) throw CheckpointError("rank too large for " + name);
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.f32(static_cast<float>(v));
  }
  w.u32(ckpt.meta.epoch);
  w.f32(ckpt.meta.metric);
  w.raw(ckpt.meta.digest.data(), ckpt.meta.digest.size());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  Reader r(std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {}), path.string());
  if (std::memcmp(r.take(sizeof kMagic), kMagic, sizeof kMagic) != 0) {
    throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": checkpoint version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    const auto* p = r.take(len);
    std::string name(reinterpret_cast<const char*>(p), len);
    ad::Shape shape(r.u8());
    for (auto& d : shape) d = r.u32();
    std::vector<double> values(ad::numel(shape));
    for (double& v : values) v = r.f32();
    if (c.state.find(name)) throw FormatError(path.string() + ": duplicate entry " + name);
    c.state.entries.emplace_back(std::move(name), ad::Tensor::from(std::move(shape), std::move(values)));
  }
  c.meta.epoch = r.u32();
  c.meta.metric = r.f32();
  std::memcpy(c.meta.digest.data(), r.take(c.meta.digest.size()), c.meta.digest.size());
  if (!r.at_end()) throw FormatError(path.string() + ": trailing bytes after the metadata block");
  return c;
}

void save_checkpoint(const models::SequenceModel& model, std::uint32_t epoch, double metric,
                     const std::filesystem::path& path) {
  write_checkpoint(make_checkpoint(model, epoch, metric), path);
}

void apply_checkpoint(const Checkpoint& ckpt, models::SequenceModel& model) {
  const Digest want = config_digest(model.config(), model.modality());
  if (ckpt.meta.digest != want) {
    throw CheckpointError("config digest mismatch: checkpoint " + digest_hex(ckpt.meta.digest).substr(0, 12) +
                          ", model " + digest_hex(want).substr(0, 12) + " (" +
                          models::modality_name(model.modality()) + ", " + model.config().canonical() + ")");
  }
  nn::load_state_dict(model, ckpt.state);
}

std::unique_ptr<models::SequenceModel> load_checkpoint(const std::filesystem::path& path,
                                                       models::Modality modality,
                                                       const models::ModelConfig& cfg) {
  const Checkpoint ckpt = read_checkpoint(path);
  auto model = models::make_model(modality, cfg, 0);
  apply_checkpoint(ckpt, *model);
  return model;
}

}  // namespace avsr::train
