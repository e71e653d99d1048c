#pragma once

// Conditional PatchGAN: D(s, t) over channel-concatenated source and target.
// Three 4x4 stride-2 blocks, then two 4x4 stride-1 blocks, padding 1. The last
// block emits a one-channel logit map.

#include <cstdint>
#include <vector>

#include "inrgan/graph.hpp"
#include "inrgan/image.hpp"
#include "inrgan/rng.hpp"
#include "json.hpp"

namespace inrgan {

struct DiscConfig {
  int source_channels = 1;
  int target_channels = 1;
  // Widths of the three stride-2 blocks and the first stride-1 block.
  std::vector<int> channels{64, 128, 256, 256};
  double leaky_slope = 0.2;
  // No normalization layers are implemented; kept so configs can state it.
  bool normalization = false;
  bool operator==(const DiscConfig&) const = default;
};

nlohmann::json to_json(const DiscConfig& cfg);
DiscConfig disc_config_from_json(const nlohmann::json& j);

// Logit map extent for an input extent; throws when the input is too small.
std::pair<int, int> logit_extent(const DiscConfig& cfg, int height, int width);

// Inputs "source" [B, m, H, W] and "target" [B, 1, H, W]; output "logits".
class DiscriminatorGraph {
 public:
  DiscriminatorGraph(const DiscConfig& cfg, int batch, int height, int width);
  const Graph& graph() const { return graph_; }
  int batch() const { return batch_; }

 private:
  Graph graph_;
  int batch_;
};

template <typename T>
TensorMap<T> init_disc_params(const DiscConfig& cfg, std::uint64_t seed);

template <typename T>
NdArray<T> discriminator_forward(std::span<const Image> sources, std::span<const Image> targets,
                                 const TensorMap<T>& params, const DiscConfig& cfg);

// image + sigma * N(0, 1), drawn from `rng`.
Image inject_noise(const Image& image, double sigma, Rng& rng);

}  // namespace inrgan
