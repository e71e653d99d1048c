#include "inrgan/diagnostics.hpp"

#include <functional>

#include "inrgan/discriminator.hpp"
#include "inrgan/generator.hpp"
#include "inrgan/rng.hpp"

namespace inrgan {

namespace {

NdArray<double> random_array(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  NdArray<double> a(shape);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : a.values()) v = u(rng);
  return a;
}

struct Case {
  Graph graph;
  TensorMap<double> params;
  TensorMap<double> inputs;
  std::vector<std::string> checked_inputs;
};

// Wraps y into sum(y * R) with R a fixed random input.
void contract(Case& c, NodeId y, Rng& rng) {
  NodeId r = c.graph.input("contraction", c.graph.shape(y));
  c.inputs.emplace("contraction", random_array(c.graph.shape(y), rng));
  c.graph.mark_output("objective", c.graph.mul(y, r));
}

NodeId add_input(Case& c, const std::string& name, const Shape& shape, Rng& rng, double lo = -1.0,
                 double hi = 1.0) {
  NodeId id = c.graph.input(name, shape);
  c.inputs.emplace(name, random_array(shape, rng, lo, hi));
  c.checked_inputs.push_back(name);
  return id;
}

NodeId add_param(Case& c, const std::string& name, const Shape& shape, Rng& rng) {
  NodeId id = c.graph.parameter(name, shape);
  c.params.emplace(name, random_array(shape, rng));
  return id;
}

NamedGradCheck run(const std::string& name, Case& c, const GradCheckOptions& base) {
  GradCheckOptions opts = base;
  opts.inputs = c.checked_inputs;
  return {name, grad_check(c.graph, c.params, c.inputs, "objective", opts)};
}

}  // namespace

std::vector<NamedGradCheck> primitive_grad_checks(const GradCheckOptions& opts) {
  std::vector<NamedGradCheck> out;
  Rng rng(derive_seed(opts.seed, {1}));
  using Build = std::function<NodeId(Case&)>;
  const std::vector<std::pair<std::string, Build>> cases = {
      {"affine",
       [&](Case& c) {
         return c.graph.affine(add_input(c, "x", {5, 4}, rng), add_param(c, "w", {3, 4}, rng),
                               add_param(c, "b", {3}, rng));
       }},
      {"affine_batched",
       [&](Case& c) {
         return c.graph.affine(add_input(c, "x", {2, 5, 4}, rng), add_input(c, "w", {2, 3, 4}, rng),
                               add_input(c, "b", {2, 3}, rng));
       }},
      {"conv2d_stride1",
       [&](Case& c) {
         return c.graph.conv2d(add_input(c, "x", {2, 2, 6, 5}, rng), add_param(c, "w", {3, 2, 3, 3}, rng),
                               add_param(c, "b", {3}, rng), 1, 1);
       }},
      {"conv2d_stride2",
       [&](Case& c) {
         return c.graph.conv2d(add_input(c, "x", {2, 2, 8, 8}, rng), add_param(c, "w", {3, 2, 4, 4}, rng),
                               add_param(c, "b", {3}, rng), 2, 1);
       }},
      {"leaky_relu", [&](Case& c) { return c.graph.leaky_relu(add_input(c, "x", {4, 6}, rng), 0.2); }},
      {"relu", [&](Case& c) { return c.graph.relu(add_input(c, "x", {4, 6}, rng)); }},
      {"tanh", [&](Case& c) { return c.graph.tanh(add_input(c, "x", {4, 6}, rng, -2.0, 2.0)); }},
      {"sin", [&](Case& c) { return c.graph.sin(add_input(c, "x", {4, 6}, rng, -3.0, 3.0)); }},
      {"cos", [&](Case& c) { return c.graph.cos(add_input(c, "x", {4, 6}, rng, -3.0, 3.0)); }},
      {"abs", [&](Case& c) { return c.graph.abs(add_input(c, "x", {4, 6}, rng)); }},
      {"add", [&](Case& c) { return c.graph.add(add_input(c, "a", {3, 4}, rng), add_input(c, "b", {3, 4}, rng)); }},
      {"sub", [&](Case& c) { return c.graph.sub(add_input(c, "a", {3, 4}, rng), add_input(c, "b", {3, 4}, rng)); }},
      {"mul", [&](Case& c) { return c.graph.mul(add_input(c, "a", {3, 4}, rng), add_input(c, "b", {3, 4}, rng)); }},
      {"scale", [&](Case& c) { return c.graph.scale(add_input(c, "x", {3, 4}, rng), -1.7); }},
      {"mean", [&](Case& c) { return c.graph.mean(add_input(c, "x", {3, 4}, rng)); }},
      {"bce_with_logits_real",
       [&](Case& c) { return c.graph.bce_with_logits(add_input(c, "x", {3, 4}, rng, -4.0, 4.0), 1.0); }},
      {"bce_with_logits_fake",
       [&](Case& c) { return c.graph.bce_with_logits(add_input(c, "x", {3, 4}, rng, -4.0, 4.0), 0.0); }},
      {"concat_channels",
       [&](Case& c) {
         return c.graph.concat_channels(add_input(c, "a", {2, 1, 3, 3}, rng), add_input(c, "b", {2, 2, 3, 3}, rng));
       }},
      {"reshape", [&](Case& c) { return c.graph.reshape(add_input(c, "x", {2, 6}, rng), {3, 4}); }},
      {"downsample", [&](Case& c) { return c.graph.downsample(add_input(c, "x", {1, 2, 6, 6}, rng), 2); }},
      {"transpose_last2", [&](Case& c) { return c.graph.transpose_last2(add_input(c, "x", {2, 3, 4}, rng)); }},
      {"narrow", [&](Case& c) { return c.graph.narrow(add_input(c, "x", {3, 7}, rng), 2, 4); }},
      {"gather",
       [&](Case& c) {
         auto idx = std::make_shared<std::vector<std::int64_t>>(std::vector<std::int64_t>{5, 0, 3, 3, 11, 7, 1, 2});
         return c.graph.gather(add_input(c, "x", {3, 4}, rng), idx, {2, 4});
       }},
  };
  for (const auto& [name, build] : cases) {
    Case c;
    NodeId y = build(c);
    contract(c, y, rng);
    out.push_back(run(name, c, opts));
  }
  return out;
}

std::vector<NamedGradCheck> network_grad_checks(const GradCheckOptions& opts) {
  std::vector<NamedGradCheck> out;
  Rng rng(derive_seed(opts.seed, {2}));

  GeneratorConfig g;
  g.height = 8;
  g.width = 8;
  g.grid = {2, 2};
  g.frequencies = 2;
  g.mlp = MlpSpec{4 * 2 + 1, 6, 3, 1, 0.2};
  g.hyper.base_channels = 3;
  g.hyper.max_channels = 4;
  g.hyper.trunk_channels = 4;
  g.hyper.trunk_blocks = 2;
  g.hyper.head_scale = 1.0;
  {
    GeneratorGraph gen(g, 2);
    Case c;
    c.graph = gen.graph();
    c.params = init_generator_params<double>(g, opts.seed);
    for (auto& [name, value] : c.params) {
      if (name.ends_with(".bias")) value = random_array(value.shape(), rng, -0.1, 0.1);
    }
    std::vector<Image> sources;
    for (int b = 0; b < 2; ++b) {
      Image img(1, g.height, g.width);
      std::uniform_real_distribution<float> u(-1.0f, 1.0f);
      for (auto& v : img.data) v = u(rng);
      sources.push_back(img);
    }
    c.inputs = gen.bind_inputs<double>(sources);
    const NodeId image = *c.graph.find_output("image");
    NodeId r = c.graph.input("contraction", c.graph.shape(image));
    c.inputs.emplace("contraction", random_array(c.graph.shape(image), rng));
    c.graph.mark_output("objective", c.graph.mul(image, r));
    c.checked_inputs = {"source"};
    out.push_back(run("generator", c, opts));
  }
  {
    DiscConfig d;
    d.channels = {3, 4, 4, 4};
    DiscriminatorGraph disc(d, 2, 32, 32);
    Case c;
    c.graph = disc.graph();
    c.params = init_disc_params<double>(d, opts.seed);
    for (auto& [name, value] : c.params) {
      if (name.ends_with(".bias")) value = random_array(value.shape(), rng, -0.1, 0.1);
    }
    c.inputs.emplace("source", random_array({2, 1, 32, 32}, rng));
    c.inputs.emplace("target", random_array({2, 1, 32, 32}, rng));
    const NodeId logits = *c.graph.find_output("logits");
    NodeId loss = c.graph.add(c.graph.mean(c.graph.bce_with_logits(logits, 1.0)),
                              c.graph.mean(c.graph.bce_with_logits(logits, 0.0)));
    NodeId r = c.graph.input("contraction", c.graph.shape(logits));
    c.inputs.emplace("contraction", random_array(c.graph.shape(logits), rng));
    NodeId weighted = c.graph.mean(c.graph.mul(logits, r));
    c.graph.mark_output("objective", c.graph.add(loss, weighted));
    c.checked_inputs = {"source", "target"};
    out.push_back(run("discriminator", c, opts));
  }
  return out;
}

}  // namespace inrgan
