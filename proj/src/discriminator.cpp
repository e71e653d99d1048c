#include "inrgan/discriminator.hpp"

#include <cmath>
#include <stdexcept>

#include "inrgan/generator.hpp"
#include "inrgan/kernels.hpp"

namespace inrgan {
namespace {

struct Block {
  int in, out, stride;
  bool activation;
};

std::vector<Block> disc_blocks(const DiscConfig& cfg) {
  if (cfg.channels.size() != 4) throw std::invalid_argument("DiscConfig: expected 4 channel widths");
  for (int c : cfg.channels) {
    if (c < 1) throw std::invalid_argument("DiscConfig: channel widths must be positive");
  }
  const int in = cfg.source_channels + cfg.target_channels;
  return {{in, cfg.channels[0], 2, true},
          {cfg.channels[0], cfg.channels[1], 2, true},
          {cfg.channels[1], cfg.channels[2], 2, true},
          {cfg.channels[2], cfg.channels[3], 1, true},
          {cfg.channels[3], 1, 1, false}};
}

}  // namespace

nlohmann::json to_json(const DiscConfig& cfg) {
  return {{"source_channels", cfg.source_channels},
          {"target_channels", cfg.target_channels},
          {"channels", cfg.channels},
          {"leaky_slope", cfg.leaky_slope},
          {"normalization", cfg.normalization}};
}

DiscConfig disc_config_from_json(const nlohmann::json& j) {
  DiscConfig cfg;
  cfg.source_channels = j.at("source_channels").get<int>();
  cfg.target_channels = j.at("target_channels").get<int>();
  cfg.channels = j.at("channels").get<std::vector<int>>();
  cfg.leaky_slope = j.at("leaky_slope").get<double>();
  cfg.normalization = j.at("normalization").get<bool>();
  return cfg;
}

std::pair<int, int> logit_extent(const DiscConfig& cfg, int height, int width) {
  std::int64_t h = height, w = width;
  for (const auto& b : disc_blocks(cfg)) {
    try {
      const auto g = kernels::conv_geometry(b.in, h, w, 4, b.stride, 1);
      h = g.out_height;
      w = g.out_width;
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("discriminator: input " + std::to_string(height) + "x" + std::to_string(width) +
                                  " is too small for the convolution stack");
    }
  }
  return {static_cast<int>(h), static_cast<int>(w)};
}

DiscriminatorGraph::DiscriminatorGraph(const DiscConfig& cfg, int batch, int height, int width) : batch_(batch) {
  logit_extent(cfg, height, width);
  NodeId s = graph_.input("source", {batch, cfg.source_channels, height, width});
  NodeId t = graph_.input("target", {batch, cfg.target_channels, height, width});
  NodeId x = graph_.concat_channels(s, t);
  const auto blocks = disc_blocks(cfg);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const std::string name = "disc.conv" + std::to_string(i);
    NodeId w = graph_.parameter(name + ".weight", {b.out, b.in, 4, 4});
    NodeId bias = graph_.parameter(name + ".bias", {b.out});
    x = graph_.conv2d(x, w, bias, b.stride, 1);
    if (b.activation) x = graph_.leaky_relu(x, cfg.leaky_slope);
  }
  graph_.mark_output("logits", x);
}

template <typename T>
TensorMap<T> init_disc_params(const DiscConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x646973ULL}));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double gain = std::sqrt(2.0 / (1.0 + cfg.leaky_slope * cfg.leaky_slope));
  TensorMap<T> params;
  const auto blocks = disc_blocks(cfg);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const std::string name = "disc.conv" + std::to_string(i);
    NdArray<T> w({b.out, b.in, 4, 4});
    const double std_dev = (b.activation ? gain : 1.0) / std::sqrt(static_cast<double>(b.in * 16));
    for (auto& v : w.values()) v = static_cast<T>(normal(rng) * std_dev);
    params.emplace(name + ".weight", std::move(w));
    params.emplace(name + ".bias", NdArray<T>({b.out}));
  }
  return params;
}

template <typename T>
NdArray<T> discriminator_forward(std::span<const Image> sources, std::span<const Image> targets,
                                 const TensorMap<T>& params, const DiscConfig& cfg) {
  if (sources.size() != targets.size() || sources.empty()) {
    throw std::invalid_argument("discriminator_forward: source/target batch mismatch");
  }
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (!sources[i].same_extent(targets[i])) {
      throw std::invalid_argument("discriminator_forward: source and target extents differ");
    }
  }
  DiscriminatorGraph dg(cfg, static_cast<int>(sources.size()), sources.front().height, sources.front().width);
  TensorMap<T> inputs;
  inputs.emplace("source", stack_images<T>(sources));
  inputs.emplace("target", stack_images<T>(targets));
  return eval_graph(dg.graph(), params, inputs).output("logits");
}

Image inject_noise(const Image& image, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("inject_noise: sigma must be >= 0");
  Image out = image;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> normal(0.0, sigma);
  for (float& v : out.data) v = static_cast<float>(v + normal(rng));
  return out;
}

template TensorMap<float> init_disc_params<float>(const DiscConfig&, std::uint64_t);
template TensorMap<double> init_disc_params<double>(const DiscConfig&, std::uint64_t);
template NdArray<float> discriminator_forward<float>(std::span<const Image>, std::span<const Image>,
                                                     const TensorMap<float>&, const DiscConfig&);
template NdArray<double> discriminator_forward<double>(std::span<const Image>, std::span<const Image>,
                                                       const TensorMap<double>&, const DiscConfig&);

}  // namespace inrgan
