#pragma once

// Hypernetwork-conditioned grid of local MLPs.
//
// The hypernetwork reduces the source image to the M x N patch resolution and
// emits, per cell, the flat parameter vector of that cell's MLP. Each MLP maps
// concat(gamma(x), s_x) to the target intensity of the pixels it owns.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "inrgan/geometry.hpp"
#include "inrgan/graph.hpp"
#include "inrgan/image.hpp"
#include "json.hpp"

namespace inrgan {

struct MlpSpec {
  int input_width = 25;
  int hidden_width = 64;
  int layers = 5;  // affine layers, >= 2
  int output_width = 1;
  double leaky_slope = 0.2;
  bool operator==(const MlpSpec&) const = default;
};

struct MlpLayerLayout {
  int in = 0;
  int out = 0;
  std::int64_t weight_offset = 0;  // row-major [out, in]
  std::int64_t bias_offset = 0;
};

struct MlpLayout {
  std::vector<MlpLayerLayout> layers;
  std::int64_t total = 0;
};

// Layer-major layout, weights before bias within each layer.
MlpLayout mlp_param_layout(const MlpSpec& spec);

struct HypernetConfig {
  int input_channels = 1;
  // Channels of downsampling stage s: min(base_channels * 2^s, max_channels).
  int base_channels = 16;
  int max_channels = 64;
  int trunk_channels = 64;
  int trunk_blocks = 7;
  double leaky_slope = 0.2;
  // Scale of the head weights relative to each target layer's init scale.
  double head_scale = 0.1;
  bool operator==(const HypernetConfig&) const = default;
};

struct GeneratorConfig {
  int height = 64;
  int width = 64;
  PatchGridSpec grid{8, 8};
  int frequencies = 6;
  CoordDenominator denominator = CoordDenominator::ExtentMinusOne;
  MlpSpec mlp{};
  HypernetConfig hyper{};

  // Throws std::invalid_argument when the extents, grid and widths disagree.
  void validate() const;
  // Number of stride-2 stages mapping (height, width) onto the grid.
  int downsample_stages() const;
  int feature_width() const { return 4 * frequencies + hyper.input_channels; }
  bool operator==(const GeneratorConfig&) const = default;
};

nlohmann::json to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

// Per-cell parameter vectors z(s) for one source image.
template <typename T>
struct WeightGrid {
  PatchGridSpec grid;
  NdArray<T> cells;  // [M * N, P]

  std::int64_t params_per_cell() const { return cells.dim(1); }
  const T* cell(int index) const { return cells.data() + static_cast<std::int64_t>(index) * params_per_cell(); }
  T* cell(int index) { return cells.data() + static_cast<std::int64_t>(index) * params_per_cell(); }
};

// Adds the hypernetwork to `graph` and returns the [B * M * N, P] cell node.
NodeId add_hypernet(Graph& graph, NodeId source, const GeneratorConfig& cfg, int batch);

// Adds the local MLP evaluation; `features` is [B * M * N, pixels_per_patch, F].
// Returns the [B, output_width, H, W] image node.
NodeId add_local_mlps(Graph& graph, NodeId cells, NodeId features, const GeneratorConfig& cfg,
                      const PatchMap& map, int batch);

template <typename T>
TensorMap<T> init_generator_params(const GeneratorConfig& cfg, std::uint64_t seed);

// [B, m, H, W] tensor from a batch of source images.
template <typename T>
NdArray<T> stack_images(std::span<const Image> images);

// [B * M * N, pixels_per_patch, 4i + m] MLP inputs in patch-major order.
template <typename T>
NdArray<T> patch_features(const EncodedCoords& enc, const PatchMap& map, std::span<const Image> sources);

// Full generator graph for a fixed batch size.
// Inputs: "source" [B, m, H, W], "features" [B*M*N, ppp, F].
// Outputs: "image" [B, 1, H, W], "weight_grid" [B*M*N, P].
class GeneratorGraph {
 public:
  GeneratorGraph(const GeneratorConfig& cfg, int batch);

  const Graph& graph() const { return graph_; }
  const GeneratorConfig& config() const { return cfg_; }
  const PatchMap& patch_map() const { return map_; }
  const EncodedCoords& encoding() const { return enc_; }
  int batch() const { return batch_; }

  template <typename T>
  TensorMap<T> bind_inputs(std::span<const Image> sources) const;

 private:
  GeneratorConfig cfg_;
  int batch_;
  PatchMap map_;
  EncodedCoords enc_;
  Graph graph_;
};

// Hypernetwork-only graph. Input "source"; output "weight_grid".
class HypernetGraph {
 public:
  HypernetGraph(const GeneratorConfig& cfg, int batch);
  const Graph& graph() const { return graph_; }

 private:
  Graph graph_;
};

template <typename T>
WeightGrid<T> hypernet_forward(const Image& source, const TensorMap<T>& params, const GeneratorConfig& cfg);

// Graph-free evaluation: each pixel goes through the MLP of its owning cell.
template <typename T>
Image local_mlp_eval(const WeightGrid<T>& weights, const EncodedCoords& enc, const Image& source,
                     const PatchMap& map, const MlpSpec& spec);

// One MLP applied to `rows` feature vectors at once.
template <typename T>
std::vector<T> mlp_forward_rows(std::span<const T> weights, const MlpSpec& spec, std::span<const T> features,
                                std::int64_t rows);

template <typename T>
Image generator_forward(const Image& source, const TensorMap<T>& params, const GeneratorConfig& cfg);

// Batch translation through an existing graph (sources.size() == graph.batch()).
template <typename T>
std::vector<Image> generator_forward_batch(const GeneratorGraph& gen, std::span<const Image> sources,
                                           const TensorMap<T>& params);

// NdArray [B, C, H, W] -> images.
template <typename T>
std::vector<Image> unstack_images(const NdArray<T>& batch);

}  // namespace inrgan
