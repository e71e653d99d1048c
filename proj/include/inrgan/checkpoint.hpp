#pragma once

// Binary checkpoint container (little-endian throughout):
//
//   magic          8 bytes  "INRGANCK"
//   version        u32      currently 1
//   section_count  u32
//   section*:
//     name_len u32, name bytes
//     kind     u32      0 = JSON text, 1 = tensor table
//     size     u64      payload bytes
//     payload
//   tensor table payload:
//     count u32
//     tensor*: name_len u32, name bytes, ndim u32, dims u64[ndim],
//              values f32[prod(dims)]
//
// Sections written by the trainer: "meta" (JSON: resolved config, seed),
// "mlp_spec" (JSON: grid, widths, layers, frequencies, extents),
// "hypernet" and "disc" (tensor tables).

#include <filesystem>
#include <map>
#include <string>

#include "inrgan/ndarray.hpp"
#include "json.hpp"

namespace inrgan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, nlohmann::json> json_sections;
  std::map<std::string, TensorMap<float>> tensor_sections;

  const nlohmann::json& json(const std::string& name) const;
  const TensorMap<float>& tensors(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace inrgan
