#include "cgdetect/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_set>

namespace cgd {
namespace {

constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::uint8_t kDtypeBytes = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint16_t u16() {
    auto p = need(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    auto p = need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::span<const std::uint8_t> need(std::size_t n) {
    if (pos_ + n > in_.size()) throw DataError("checkpoint: truncated file");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_name(Writer& w, const std::string& name) {
  if (name.size() > 0xFFFF) throw DataError("checkpoint: entry name too long");
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.bytes(name.data(), name.size());
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes("CGDN", 4);
  w.u32(kCheckpointVersion);
  const bool has_config = !ckpt.config_json.empty();
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size() + (has_config ? 1 : 0)));
  if (has_config) {
    write_name(w, kConfigEntryName);
    w.u8(kDtypeBytes);
    w.u8(1);
    w.u32(static_cast<std::uint32_t>(ckpt.config_json.size()));
    w.bytes(ckpt.config_json.data(), ckpt.config_json.size());
  }
  for (const auto& t : ckpt.tensors) {
    write_name(w, t.name);
    w.u8(kDtypeF32);
    w.u8(static_cast<std::uint8_t>(t.dims.size()));
    std::size_t count = 1;
    for (auto d : t.dims) {
      w.u32(d);
      count *= d;
    }
    if (count != t.values.size()) throw DataError("checkpoint: dims do not match " + t.name);
    for (float v : t.values) w.u32(std::bit_cast<std::uint32_t>(v));
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.need(4);
  if (std::memcmp(magic.data(), "CGDN", 4) != 0) throw DataError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    auto name_bytes = r.need(len);
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::uint8_t dtype = r.u8();
    const std::uint8_t ndim = r.u8();
    std::vector<std::uint32_t> dims(ndim);
    std::size_t elems = 1;
    for (auto& d : dims) {
      d = r.u32();
      elems *= d;
    }
    if (dtype == kDtypeBytes) {
      if (name != kConfigEntryName || ndim != 1) {
        throw DataError("checkpoint: byte entry only allowed for " + std::string(kConfigEntryName));
      }
      auto payload = r.need(elems);
      ckpt.config_json.assign(payload.begin(), payload.end());
    } else if (dtype == kDtypeF32) {
      TensorRecord t{std::move(name), std::move(dims), std::vector<float>(elems)};
      auto payload = r.need(elems * 4);
      for (std::size_t k = 0; k < elems; ++k) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[4 * k + b]) << (8 * b);
        t.values[k] = std::bit_cast<float>(bits);
      }
      ckpt.tensors.push_back(std::move(t));
    } else {
      throw DataError("checkpoint: unknown dtype code " + std::to_string(dtype));
    }
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes");
  return ckpt;
}

void write_checkpoint_file(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Checkpoint checkpoint_from_store(const ParamStore<float>& store, std::string config_json) {
  Checkpoint ckpt{std::move(config_json), {}};
  for (const auto& e : store.entries()) {
    const Shape4& s = e.value.shape();
    ckpt.tensors.push_back({e.name,
                            {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                             static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)},
                            std::vector<float>(e.value.values().begin(), e.value.values().end())});
  }
  return ckpt;
}

void restore_store(ParamStore<float>& store, const Checkpoint& ckpt) {
  std::unordered_set<std::string> seen;
  for (const auto& t : ckpt.tensors) {
    if (!store.contains(t.name)) throw DataError("checkpoint: unexpected entry " + t.name);
    auto& e = store.at(t.name);
    const Shape4& s = e.value.shape();
    const std::vector<std::uint32_t> want{
        static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
        static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
    if (t.dims != want) throw DataError("checkpoint: shape mismatch for " + t.name);
    e.value = Tensor4<float>(s, t.values);
    seen.insert(t.name);
  }
  for (const auto& e : store.entries()) {
    if (seen.count(e.name) == 0) throw DataError("checkpoint: missing entry " + e.name);
  }
}

}  // namespace cgd
