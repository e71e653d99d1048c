#include "inrgan/generator.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "inrgan/kernels.hpp"
#include "inrgan/rng.hpp"

namespace inrgan {

MlpLayout mlp_param_layout(const MlpSpec& spec) {
  if (spec.layers < 2) throw std::invalid_argument("MlpSpec: at least 2 affine layers required");
  if (spec.input_width < 1 || spec.hidden_width < 1 || spec.output_width < 1) {
    throw std::invalid_argument("MlpSpec: widths must be positive");
  }
  MlpLayout layout;
  std::int64_t offset = 0;
  for (int l = 0; l < spec.layers; ++l) {
    MlpLayerLayout layer;
    layer.in = l == 0 ? spec.input_width : spec.hidden_width;
    layer.out = l == spec.layers - 1 ? spec.output_width : spec.hidden_width;
    layer.weight_offset = offset;
    offset += static_cast<std::int64_t>(layer.in) * layer.out;
    layer.bias_offset = offset;
    offset += layer.out;
    layout.layers.push_back(layer);
  }
  layout.total = offset;
  return layout;
}

void GeneratorConfig::validate() const {
  if (height < 1 || width < 1) throw std::invalid_argument("generator: image extents must be positive");
  if (grid.rows < 1 || grid.cols < 1) throw std::invalid_argument("generator: grid extents must be >= 1");
  if (frequencies < 1) throw std::invalid_argument("generator: frequencies must be >= 1");
  if (hyper.input_channels < 1) throw std::invalid_argument("generator: input channels must be >= 1");
  if (mlp.input_width != feature_width()) {
    throw std::invalid_argument("generator: MLP input width " + std::to_string(mlp.input_width) +
                                " != 4i + m = " + std::to_string(feature_width()));
  }
  mlp_param_layout(mlp);
  downsample_stages();
}

int GeneratorConfig::downsample_stages() const {
  if (height % grid.rows != 0 || width % grid.cols != 0) {
    throw std::invalid_argument("generator: image " + std::to_string(height) + "x" + std::to_string(width) +
                                " not divisible by grid " + std::to_string(grid.rows) + "x" +
                                std::to_string(grid.cols));
  }
  const int fr = height / grid.rows;
  const int fc = width / grid.cols;
  if (fr != fc || !std::has_single_bit(static_cast<unsigned>(fr))) {
    throw std::invalid_argument("generator: hypernetwork downsampling cannot map " + std::to_string(height) + "x" +
                                std::to_string(width) + " onto " + std::to_string(grid.rows) + "x" +
                                std::to_string(grid.cols) +
                                " (needs equal power-of-two reduction on both axes)");
  }
  return std::countr_zero(static_cast<unsigned>(fr));
}

nlohmann::json to_json(const GeneratorConfig& cfg) {
  return {
      {"height", cfg.height},
      {"width", cfg.width},
      {"grid", {cfg.grid.rows, cfg.grid.cols}},
      {"frequencies", cfg.frequencies},
      {"coord_denominator", cfg.denominator == CoordDenominator::ExtentMinusOne ? "extent_minus_one" : "extent"},
      {"mlp",
       {{"input_width", cfg.mlp.input_width},
        {"hidden_width", cfg.mlp.hidden_width},
        {"layers", cfg.mlp.layers},
        {"output_width", cfg.mlp.output_width},
        {"leaky_slope", cfg.mlp.leaky_slope}}},
      {"hypernet",
       {{"input_channels", cfg.hyper.input_channels},
        {"base_channels", cfg.hyper.base_channels},
        {"max_channels", cfg.hyper.max_channels},
        {"trunk_channels", cfg.hyper.trunk_channels},
        {"trunk_blocks", cfg.hyper.trunk_blocks},
        {"leaky_slope", cfg.hyper.leaky_slope},
        {"head_scale", cfg.hyper.head_scale}}},
  };
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig cfg;
  cfg.height = j.at("height").get<int>();
  cfg.width = j.at("width").get<int>();
  cfg.grid = {j.at("grid").at(0).get<int>(), j.at("grid").at(1).get<int>()};
  cfg.frequencies = j.at("frequencies").get<int>();
  cfg.denominator = j.at("coord_denominator").get<std::string>() == "extent" ? CoordDenominator::Extent
                                                                             : CoordDenominator::ExtentMinusOne;
  const auto& m = j.at("mlp");
  cfg.mlp = {m.at("input_width").get<int>(), m.at("hidden_width").get<int>(), m.at("layers").get<int>(),
             m.at("output_width").get<int>(), m.at("leaky_slope").get<double>()};
  const auto& h = j.at("hypernet");
  cfg.hyper.input_channels = h.at("input_channels").get<int>();
  cfg.hyper.base_channels = h.at("base_channels").get<int>();
  cfg.hyper.max_channels = h.at("max_channels").get<int>();
  cfg.hyper.trunk_channels = h.at("trunk_channels").get<int>();
  cfg.hyper.trunk_blocks = h.at("trunk_blocks").get<int>();
  cfg.hyper.leaky_slope = h.at("leaky_slope").get<double>();
  cfg.hyper.head_scale = h.at("head_scale").get<double>();
  cfg.validate();
  return cfg;
}

namespace {

int stage_channels(const HypernetConfig& h, int stage) {
  return std::min(h.base_channels << stage, h.max_channels);
}

struct ConvSpec {
  std::string name;
  int in, out, kernel;
};

std::vector<ConvSpec> hypernet_convs(const GeneratorConfig& cfg) {
  std::vector<ConvSpec> convs;
  int channels = cfg.hyper.input_channels;
  const int stages = cfg.downsample_stages();
  for (int s = 0; s < stages; ++s) {
    const int out = stage_channels(cfg.hyper, s);
    convs.push_back({"hyper.down" + std::to_string(s), channels, out, 4});
    channels = out;
  }
  for (int b = 0; b < cfg.hyper.trunk_blocks; ++b) {
    convs.push_back({"hyper.trunk" + std::to_string(b), channels, cfg.hyper.trunk_channels, 3});
    channels = cfg.hyper.trunk_channels;
  }
  return convs;
}

}  // namespace

NodeId add_hypernet(Graph& graph, NodeId source, const GeneratorConfig& cfg, int batch) {
  cfg.validate();
  const int stages = cfg.downsample_stages();
  const auto convs = hypernet_convs(cfg);
  NodeId x = source;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    const auto& c = convs[i];
    NodeId w = graph.parameter(c.name + ".weight", {c.out, c.in, c.kernel, c.kernel});
    NodeId b = graph.parameter(c.name + ".bias", {c.out});
    const bool down = static_cast<int>(i) < stages;
    x = graph.conv2d(x, w, b, down ? 2 : 1, 1);
    x = graph.leaky_relu(x, cfg.hyper.leaky_slope);
  }
  const int channels = convs.empty() ? cfg.hyper.input_channels : convs.back().out;
  const std::int64_t p = mlp_param_layout(cfg.mlp).total;
  NodeId hw = graph.parameter("hyper.head.weight", {p, channels});
  NodeId hb = graph.parameter("hyper.head.bias", {p});
  // 1x1 head applied per cell: [B, C, M, N] -> [B * M * N, C] -> [B * M * N, P].
  const std::int64_t cells = static_cast<std::int64_t>(cfg.grid.rows) * cfg.grid.cols;
  NodeId flat = graph.transpose_last2(graph.reshape(x, {batch, channels, cells}));
  return graph.affine(graph.reshape(flat, {batch * cells, channels}), hw, hb);
}

NodeId add_local_mlps(Graph& graph, NodeId cells, NodeId features, const GeneratorConfig& cfg, const PatchMap& map,
                      int batch) {
  const MlpLayout layout = mlp_param_layout(cfg.mlp);
  const std::int64_t n_cells = static_cast<std::int64_t>(batch) * map.cells();
  if (graph.shape(cells) != Shape{n_cells, layout.total}) {
    throw std::invalid_argument("add_local_mlps: weight grid " + shape_to_string(graph.shape(cells)) +
                                " does not match layout of " + std::to_string(layout.total) + " parameters");
  }
  NodeId x = features;
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& layer = layout.layers[l];
    NodeId w = graph.reshape(graph.narrow(cells, layer.weight_offset, static_cast<std::int64_t>(layer.in) * layer.out),
                             {n_cells, layer.out, layer.in});
    NodeId b = graph.narrow(cells, layer.bias_offset, layer.out);
    x = graph.affine(x, w, b);
    x = l + 1 < layout.layers.size() ? graph.leaky_relu(x, cfg.mlp.leaky_slope) : graph.tanh(x);
  }
  // [B*cells, ppp, out] in patch-major order -> [B, out, H, W].
  const int out = cfg.mlp.output_width;
  const std::int64_t plane = static_cast<std::int64_t>(map.height()) * map.width();
  auto index = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(batch * out * plane));
  const auto& image_order = map.image_order();
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < out; ++ch) {
      for (std::int64_t off = 0; off < plane; ++off) {
        const std::int64_t pos = b * plane + image_order[static_cast<std::size_t>(off)];
        (*index)[static_cast<std::size_t>((b * out + ch) * plane + off)] = pos * out + ch;
      }
    }
  }
  return graph.gather(x, index, {batch, out, map.height(), map.width()});
}

template <typename T>
TensorMap<T> init_generator_params(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, {0x67656eULL}));
  std::normal_distribution<double> normal(0.0, 1.0);
  TensorMap<T> params;
  const double conv_gain = std::sqrt(2.0 / (1.0 + cfg.hyper.leaky_slope * cfg.hyper.leaky_slope));
  const auto convs = hypernet_convs(cfg);
  for (const auto& c : convs) {
    NdArray<T> w({c.out, c.in, c.kernel, c.kernel});
    const double std_dev = conv_gain / std::sqrt(static_cast<double>(c.in * c.kernel * c.kernel));
    for (auto& v : w.values()) v = static_cast<T>(normal(rng) * std_dev);
    params.emplace(c.name + ".weight", std::move(w));
    params.emplace(c.name + ".bias", NdArray<T>({c.out}));
  }
  const int channels = convs.empty() ? cfg.hyper.input_channels : convs.back().out;
  const MlpLayout layout = mlp_param_layout(cfg.mlp);
  NdArray<T> head_w({layout.total, channels});
  NdArray<T> head_b({layout.total});
  const double mlp_gain = std::sqrt(2.0 / (1.0 + cfg.mlp.leaky_slope * cfg.mlp.leaky_slope));
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& layer = layout.layers[l];
    const bool last = l + 1 == layout.layers.size();
    // Standard fan-in init of the target layer lives in the head bias; the head
    // weights modulate it per cell.
    const double std_dev = (last ? 1.0 : mlp_gain) / std::sqrt(static_cast<double>(layer.in));
    const double bound = std::sqrt(3.0) * std_dev;
    const double mod = cfg.hyper.head_scale * std_dev / std::sqrt(static_cast<double>(channels));
    const std::int64_t count = static_cast<std::int64_t>(layer.in) * layer.out;
    for (std::int64_t k = 0; k < count + layer.out; ++k) {
      const std::int64_t p = layer.weight_offset + k;  // bias follows the weights
      if (k < count) head_b[p] = static_cast<T>(uniform(rng) * bound);
      for (int c = 0; c < channels; ++c) head_w[p * channels + c] = static_cast<T>(normal(rng) * mod);
    }
  }
  params.emplace("hyper.head.weight", std::move(head_w));
  params.emplace("hyper.head.bias", std::move(head_b));
  return params;
}

template <typename T>
NdArray<T> stack_images(std::span<const Image> images) {
  if (images.empty()) throw std::invalid_argument("stack_images: empty batch");
  const Image& first = images.front();
  NdArray<T> out({static_cast<std::int64_t>(images.size()), first.channels, first.height, first.width});
  T* dst = out.data();
  for (const Image& img : images) {
    if (img.channels != first.channels || !img.same_extent(first)) {
      throw std::invalid_argument("stack_images: images in a batch must share extents and channels");
    }
    for (float v : img.data) *dst++ = static_cast<T>(v);
  }
  return out;
}

template <typename T>
std::vector<Image> unstack_images(const NdArray<T>& batch) {
  if (batch.rank() != 4) throw std::invalid_argument("unstack_images: expected NCHW");
  std::vector<Image> out;
  const T* src = batch.data();
  for (std::int64_t b = 0; b < batch.dim(0); ++b) {
    Image img(static_cast<int>(batch.dim(1)), static_cast<int>(batch.dim(2)), static_cast<int>(batch.dim(3)));
    for (float& v : img.data) v = static_cast<float>(*src++);
    out.push_back(std::move(img));
  }
  return out;
}

template <typename T>
NdArray<T> patch_features(const EncodedCoords& enc, const PatchMap& map, std::span<const Image> sources) {
  if (sources.empty()) throw std::invalid_argument("patch_features: empty batch");
  const int m = sources.front().channels;
  const int fw = enc.feature_width() + m;
  const int ppp = map.pixels_per_patch();
  if (enc.height != map.height() || enc.width != map.width()) {
    throw std::invalid_argument("patch_features: encoding extent does not match the patch map");
  }
  NdArray<T> out({static_cast<std::int64_t>(sources.size()) * map.cells(), ppp, fw});
  T* dst = out.data();
  const auto& order = map.patch_order();
  for (const Image& src : sources) {
    if (src.height != map.height() || src.width != map.width() || src.channels != m) {
      throw std::invalid_argument("patch_features: source extent does not match the patch map");
    }
    for (std::int64_t off : order) {
      const double* e = enc.features.data() + off * enc.feature_width();
      for (int k = 0; k < enc.feature_width(); ++k) *dst++ = static_cast<T>(e[k]);
      for (int c = 0; c < m; ++c) *dst++ = static_cast<T>(src.data[static_cast<std::size_t>(c * src.plane() + off)]);
    }
  }
  return out;
}

GeneratorGraph::GeneratorGraph(const GeneratorConfig& cfg, int batch)
    : cfg_(cfg),
      batch_(batch),
      map_(cfg.height, cfg.width, cfg.grid),
      enc_(positional_encode(make_coord_grid(cfg.height, cfg.width, cfg.denominator), cfg.frequencies)) {
  cfg_.validate();
  if (batch < 1) throw std::invalid_argument("GeneratorGraph: batch must be >= 1");
  NodeId source = graph_.input("source", {batch, cfg.hyper.input_channels, cfg.height, cfg.width});
  NodeId features =
      graph_.input("features", {static_cast<std::int64_t>(batch) * map_.cells(), map_.pixels_per_patch(), cfg.feature_width()});
  NodeId cells = add_hypernet(graph_, source, cfg_, batch);
  NodeId image = add_local_mlps(graph_, cells, features, cfg_, map_, batch);
  graph_.mark_output("weight_grid", cells);
  graph_.mark_output("image", image);
}

template <typename T>
TensorMap<T> GeneratorGraph::bind_inputs(std::span<const Image> sources) const {
  if (static_cast<int>(sources.size()) != batch_) {
    throw std::invalid_argument("GeneratorGraph: expected batch of " + std::to_string(batch_) + ", got " +
                                std::to_string(sources.size()));
  }
  TensorMap<T> inputs;
  inputs.emplace("source", stack_images<T>(sources));
  inputs.emplace("features", patch_features<T>(enc_, map_, sources));
  return inputs;
}

HypernetGraph::HypernetGraph(const GeneratorConfig& cfg, int batch) {
  NodeId source = graph_.input("source", {batch, cfg.hyper.input_channels, cfg.height, cfg.width});
  graph_.mark_output("weight_grid", add_hypernet(graph_, source, cfg, batch));
}

template <typename T>
WeightGrid<T> hypernet_forward(const Image& source, const TensorMap<T>& params, const GeneratorConfig& cfg) {
  if (source.height != cfg.height || source.width != cfg.width || source.channels != cfg.hyper.input_channels) {
    throw std::invalid_argument("hypernet_forward: source " + std::to_string(source.channels) + "x" +
                                std::to_string(source.height) + "x" + std::to_string(source.width) +
                                " does not match the configured input");
  }
  HypernetGraph hg(cfg, 1);
  TensorMap<T> inputs;
  inputs.emplace("source", stack_images<T>(std::span<const Image>(&source, 1)));
  auto fw = eval_graph(hg.graph(), params, inputs);
  return WeightGrid<T>{cfg.grid, fw.output("weight_grid")};
}

template <typename T>
std::vector<T> mlp_forward_rows(std::span<const T> weights, const MlpSpec& spec, std::span<const T> features,
                                std::int64_t rows) {
  const MlpLayout layout = mlp_param_layout(spec);
  if (static_cast<std::int64_t>(weights.size()) != layout.total) {
    throw std::invalid_argument("mlp_forward_rows: weight vector has " + std::to_string(weights.size()) +
                                " entries, layout needs " + std::to_string(layout.total));
  }
  if (static_cast<std::int64_t>(features.size()) != rows * spec.input_width) {
    throw std::invalid_argument("mlp_forward_rows: feature block size mismatch");
  }
  std::vector<T> x(features.begin(), features.end());
  std::vector<T> y;
  const T slope = static_cast<T>(spec.leaky_slope);
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& layer = layout.layers[l];
    y.assign(static_cast<std::size_t>(rows * layer.out), T(0));
    kernels::affine_rows(x.data(), weights.data() + layer.weight_offset, weights.data() + layer.bias_offset, y.data(),
                         rows, layer.in, layer.out);
    if (l + 1 == layout.layers.size()) {
      for (T& v : y) v = std::tanh(v);
    } else {
      kernels::leaky_forward(y.data(), y.data(), static_cast<std::int64_t>(y.size()), slope);
    }
    std::swap(x, y);
  }
  return x;
}

template <typename T>
Image local_mlp_eval(const WeightGrid<T>& weights, const EncodedCoords& enc, const Image& source, const PatchMap& map,
                     const MlpSpec& spec) {
  const MlpLayout layout = mlp_param_layout(spec);
  if (weights.grid != map.spec() || weights.cells.rank() != 2 || weights.cells.dim(0) != map.cells()) {
    throw std::invalid_argument("local_mlp_eval: weight grid does not match the patch map");
  }
  if (weights.params_per_cell() != layout.total) {
    throw std::invalid_argument("local_mlp_eval: cells carry " + std::to_string(weights.params_per_cell()) +
                                " parameters, MLP layout needs " + std::to_string(layout.total));
  }
  if (spec.input_width != enc.feature_width() + source.channels) {
    throw std::invalid_argument("local_mlp_eval: MLP input width does not match encoding + source channels");
  }
  const NdArray<T> features = patch_features<T>(enc, map, std::span<const Image>(&source, 1));
  const int ppp = map.pixels_per_patch();
  const int out_w = spec.output_width;
  Image out(out_w, map.height(), map.width());
  for (int cell = 0; cell < map.cells(); ++cell) {
    std::span<const T> w(weights.cell(cell), static_cast<std::size_t>(layout.total));
    std::span<const T> f(features.data() + static_cast<std::int64_t>(cell) * ppp * spec.input_width,
                         static_cast<std::size_t>(ppp) * spec.input_width);
    const auto y = mlp_forward_rows<T>(w, spec, f, ppp);
    for (int k = 0; k < ppp; ++k) {
      const std::int64_t off = map.pixel_offset(cell, k);
      for (int ch = 0; ch < out_w; ++ch) {
        out.data[static_cast<std::size_t>(ch * out.plane() + off)] = static_cast<float>(y[static_cast<std::size_t>(k * out_w + ch)]);
      }
    }
  }
  return out;
}

template <typename T>
std::vector<Image> generator_forward_batch(const GeneratorGraph& gen, std::span<const Image> sources,
                                           const TensorMap<T>& params) {
  auto fw = eval_graph(gen.graph(), params, gen.bind_inputs<T>(sources));
  return unstack_images(fw.output("image"));
}

template <typename T>
Image generator_forward(const Image& source, const TensorMap<T>& params, const GeneratorConfig& cfg) {
  GeneratorGraph gen(cfg, 1);
  return generator_forward_batch<T>(gen, std::span<const Image>(&source, 1), params).front();
}

#define INRGAN_INSTANTIATE(T)                                                                                  \
  template TensorMap<T> init_generator_params<T>(const GeneratorConfig&, std::uint64_t);                       \
  template NdArray<T> stack_images<T>(std::span<const Image>);                                                 \
  template std::vector<Image> unstack_images<T>(const NdArray<T>&);                                            \
  template NdArray<T> patch_features<T>(const EncodedCoords&, const PatchMap&, std::span<const Image>);        \
  template TensorMap<T> GeneratorGraph::bind_inputs<T>(std::span<const Image>) const;                          \
  template WeightGrid<T> hypernet_forward<T>(const Image&, const TensorMap<T>&, const GeneratorConfig&);       \
  template std::vector<T> mlp_forward_rows<T>(std::span<const T>, const MlpSpec&, std::span<const T>,          \
                                              std::int64_t);                                                   \
  template Image local_mlp_eval<T>(const WeightGrid<T>&, const EncodedCoords&, const Image&, const PatchMap&,  \
                                   const MlpSpec&);                                                            \
  template std::vector<Image> generator_forward_batch<T>(const GeneratorGraph&, std::span<const Image>,        \
                                                         const TensorMap<T>&);                                 \
  template Image generator_forward<T>(const Image&, const TensorMap<T>&, const GeneratorConfig&);

INRGAN_INSTANTIATE(float)
INRGAN_INSTANTIATE(double)
#undef INRGAN_INSTANTIATE

}  // namespace inrgan
