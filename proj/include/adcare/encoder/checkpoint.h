#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "adcare/tensor/optim.h"

// Binary checkpoint layout (little-endian):
//   "ADCV" | u32 version | u32 array count |
//   per array: u32 name length | name bytes | u32 rank | u64 dims[rank] | f64 data[numel]
namespace adcare::encoder {

inline constexpr char kCheckpointMagic[4] = {'A', 'D', 'C', 'V'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> data;

  bool operator==(const NamedArray&) const = default;
};

std::string encode_checkpoint(std::span<const NamedArray> arrays);
std::vector<NamedArray> decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, std::span<const NamedArray> arrays);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);

std::vector<NamedArray> snapshot(std::span<const NamedParameter> params);
// Copies arrays into params by name. Every parameter must be present with a
// matching shape; extra arrays are an error as well.
void restore(std::span<const NamedParameter> params, std::span<const NamedArray> arrays);

}  // namespace adcare::encoder
