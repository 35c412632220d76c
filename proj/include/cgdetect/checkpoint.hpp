#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cgdetect/param_store.hpp"

// Binary checkpoint layout (all integers little-endian):
//   "CGDN" | u32 version (1) | u32 entry count
//   per entry: u16 name length | UTF-8 name | u8 dtype | u8 ndim |
//              ndim x u32 dims | raw payload
// dtype 0 is f32. dtype 1 is raw bytes and is used only for the reserved
// "__config__" entry holding the model configuration as JSON.

namespace cgd {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr const char* kConfigEntryName = "__config__";

struct TensorRecord {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

struct Checkpoint {
  std::string config_json;  // empty when the file has no "__config__" entry
  std::vector<TensorRecord> tensors;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint_file(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint_file(const std::filesystem::path& path);

/// Every store entry (values only, in store order) as 4-D f32 records.
Checkpoint checkpoint_from_store(const ParamStore<float>& store, std::string config_json);

/// Copies record values into matching store entries. Every store entry must
/// be present with identical dims; extra records are an error.
void restore_store(ParamStore<float>& store, const Checkpoint& ckpt);

}  // namespace cgd
