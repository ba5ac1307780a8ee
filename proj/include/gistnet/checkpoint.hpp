#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "gistnet/model.hpp"
#include "gistnet/tensor.hpp"

namespace gist {

using ConfigDigest = std::array<std::uint8_t, 32>;

/// SHA-256 of `text`.
ConfigDigest sha256_digest(const std::string& text);
std::string to_hex(const ConfigDigest& digest);

struct NamedTensor {
  std::string name;
  std::variant<Tensor, Tensor64> value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Binary layout, all integers little-endian:
///   "GSTN" | u32 version | 32-byte config digest | u32 tensor count
///   per tensor: u16 name length | UTF-8 name | u8 dtype (1=f32, 2=f64)
///               | u8 rank | u64 dims[rank] | row-major data
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ConfigDigest digest{};
  std::vector<NamedTensor> tensors;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
/// Throws FormatError naming the byte offset on bad magic, an unknown version
/// or dtype, truncation or trailing bytes.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");

/// Writes via a temporary file and rename. Throws IoError.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// One `<layer>.weights` and one `<layer>.bias` entry per layer, in order.
template <typename T>
Checkpoint params_to_checkpoint(const ModelParams<T>& params, const ConfigDigest& digest);

/// Rebuilds parameters for `model`. Throws ValidationError when a tensor is
/// missing, extra, of the wrong dtype or of the wrong shape.
ModelParams<float> checkpoint_to_params(const Checkpoint& checkpoint, const Model& model);

/// Throws ValidationError on a digest mismatch unless `force`.
void check_digest(const Checkpoint& checkpoint, const ConfigDigest& expected, bool force,
                  const std::string& source);

}  // namespace gist
