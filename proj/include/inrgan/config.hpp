#pragma once

// Run configuration: JSON file plus flag overrides, with defaults and
// cross-field validation.
//
// Schema (every key optional):
//   seed, precision (32 | 64), deterministic, out_dir
//   data:  manifest, train_split, val_split, synth {SynthConfig keys}
//   model: grid [M, N], frequencies, coord_denominator ("extent_minus_one" |
//          "extent"), source_channels,
//          mlp {layers, hidden_width, leaky_slope},
//          hypernet {base_channels, max_channels, trunk_channels, trunk_blocks,
//                    leaky_slope, head_scale},
//          discriminator {channels [4 ints], leaky_slope}
//   train: lambda_rec, lr, epochs, batch_size, decay_every, decay_factor,
//          crop [H, W], flip_probability, noise_sigma, noise_on_source,
//          literal_gan, beta1, beta2, adam_eps, val_limit
//   sweep: grids [[M, N], ...]

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "inrgan/data.hpp"
#include "inrgan/training.hpp"
#include "json.hpp"

namespace inrgan {

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  bool deterministic = true;
  std::string out_dir = "runs/default";
  std::string manifest;  // empty: generate synthetic data from `synth`
  std::string train_split = "train";
  std::string val_split = "test";
  SynthConfig synth;
  TrainConfig train;  // also carries seed and precision
  std::vector<PatchGridSpec> sweep_grids{{1, 1}, {2, 2}, {4, 4}, {8, 8}};
};

// Fills defaults; throws ValidationError naming the key on unknown keys, type
// errors, negative hyperparameters or grids that do not divide the crop.
RunConfig parse_config(const nlohmann::json& j);
// Merges `overrides` (same schema) over the file contents, then parses.
RunConfig resolve_config(const std::filesystem::path& path, const nlohmann::json& overrides = nlohmann::json::object());
// Fully resolved form; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace inrgan
