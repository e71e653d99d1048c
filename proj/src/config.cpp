#include "inrgan/config.hpp"

#include <fstream>
#include <set>

#include "inrgan/probes.hpp"

namespace inrgan {

namespace {

class Section {
 public:
  Section(const nlohmann::json& j, std::string path, std::set<std::string> known)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("'" + path_ + "' must be an object");
    for (const auto& [key, value] : j_.items()) {
      if (!known.count(key)) throw ValidationError("unknown key '" + qualified(key) + "'");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <typename T>
  void get(const std::string& key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("'" + qualified(key) + "' has the wrong type");
    }
  }

  Section sub(const std::string& key, std::set<std::string> known) const {
    static const nlohmann::json empty = nlohmann::json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, qualified(key), std::move(known));
  }

  const nlohmann::json& raw(const std::string& key) const { return j_.at(key); }

 private:
  const nlohmann::json& j_;
  std::string path_;
};

std::pair<int, int> pair_of(const Section& s, const std::string& key, std::pair<int, int> fallback) {
  std::vector<int> v;
  s.get(key, v);
  if (!s.has(key)) return fallback;
  if (v.size() != 2) throw ValidationError("'" + s.qualified(key) + "' must be a pair of integers");
  return {v[0], v[1]};
}

void require(bool ok, const std::string& key, const std::string& msg) {
  if (!ok) throw ValidationError("'" + key + "' " + msg);
}

const char* denominator_name(CoordDenominator d) {
  return d == CoordDenominator::Extent ? "extent" : "extent_minus_one";
}

}  // namespace

RunConfig parse_config(const nlohmann::json& j) {
  RunConfig c;
  const Section root(j, "", {"seed", "precision", "deterministic", "out_dir", "data", "model", "train", "sweep"});
  TrainConfig& t = c.train;
  root.get("seed", t.seed);
  root.get("precision", t.precision);
  root.get("deterministic", c.deterministic);
  root.get("out_dir", c.out_dir);
  require(t.precision == 32 || t.precision == 64, "precision", "must be 32 or 64");

  const Section data = root.sub("data", {"manifest", "train_split", "val_split", "synth"});
  data.get("manifest", c.manifest);
  data.get("train_split", c.train_split);
  data.get("val_split", c.val_split);
  if (data.has("synth")) {
    try {
      c.synth = synth_config_from_json(data.raw("synth"));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("'data.synth': ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
  }
  try {
    c.synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("'data.synth': ") + e.what());
  }

  const Section model = root.sub("model", {"grid", "frequencies", "coord_denominator", "source_channels", "mlp",
                                           "hypernet", "discriminator"});
  GeneratorConfig& g = t.generator;
  const auto grid = pair_of(model, "grid", {40, 32});
  g.grid = {grid.first, grid.second};
  require(g.grid.rows >= 1 && g.grid.cols >= 1, "model.grid", "entries must be >= 1");
  model.get("frequencies", g.frequencies);
  require(g.frequencies >= 0, "model.frequencies", "must be >= 0");
  std::string denom = denominator_name(g.denominator);
  model.get("coord_denominator", denom);
  if (denom == "extent") {
    g.denominator = CoordDenominator::Extent;
  } else if (denom == "extent_minus_one") {
    g.denominator = CoordDenominator::ExtentMinusOne;
  } else {
    throw ValidationError("'model.coord_denominator' must be \"extent_minus_one\" or \"extent\"");
  }
  int source_channels = 1;
  model.get("source_channels", source_channels);
  require(source_channels >= 1, "model.source_channels", "must be >= 1");
  g.hyper.input_channels = source_channels;

  const Section mlp = model.sub("mlp", {"layers", "hidden_width", "leaky_slope"});
  g.mlp = sweep_mlp_spec(g.grid, 4 * g.frequencies + source_channels);
  mlp.get("layers", g.mlp.layers);
  mlp.get("hidden_width", g.mlp.hidden_width);
  mlp.get("leaky_slope", g.mlp.leaky_slope);
  require(g.mlp.layers >= 2, "model.mlp.layers", "must be >= 2");
  require(g.mlp.hidden_width >= 1, "model.mlp.hidden_width", "must be >= 1");
  require(g.mlp.leaky_slope >= 0.0, "model.mlp.leaky_slope", "must be >= 0");

  const Section hyper = model.sub("hypernet", {"base_channels", "max_channels", "trunk_channels", "trunk_blocks",
                                               "leaky_slope", "head_scale"});
  hyper.get("base_channels", g.hyper.base_channels);
  hyper.get("max_channels", g.hyper.max_channels);
  hyper.get("trunk_channels", g.hyper.trunk_channels);
  hyper.get("trunk_blocks", g.hyper.trunk_blocks);
  hyper.get("leaky_slope", g.hyper.leaky_slope);
  hyper.get("head_scale", g.hyper.head_scale);
  require(g.hyper.base_channels >= 1, "model.hypernet.base_channels", "must be >= 1");
  require(g.hyper.max_channels >= 1, "model.hypernet.max_channels", "must be >= 1");
  require(g.hyper.trunk_channels >= 1, "model.hypernet.trunk_channels", "must be >= 1");
  require(g.hyper.trunk_blocks >= 0, "model.hypernet.trunk_blocks", "must be >= 0");
  require(g.hyper.leaky_slope >= 0.0, "model.hypernet.leaky_slope", "must be >= 0");
  require(g.hyper.head_scale >= 0.0, "model.hypernet.head_scale", "must be >= 0");

  const Section disc = model.sub("discriminator", {"channels", "leaky_slope"});
  DiscConfig& d = t.discriminator;
  disc.get("channels", d.channels);
  disc.get("leaky_slope", d.leaky_slope);
  require(d.channels.size() == 4, "model.discriminator.channels", "must list 4 widths");
  for (int w : d.channels) require(w >= 1, "model.discriminator.channels", "entries must be >= 1");
  require(d.leaky_slope >= 0.0, "model.discriminator.leaky_slope", "must be >= 0");
  d.source_channels = source_channels;
  d.target_channels = 1;

  const Section train = root.sub("train", {"lambda_rec", "lr", "epochs", "batch_size", "decay_every", "decay_factor",
                                           "crop", "flip_probability", "noise_sigma", "noise_on_source",
                                           "literal_gan", "beta1", "beta2", "adam_eps", "val_limit"});
  train.get("lambda_rec", t.lambda_rec);
  train.get("lr", t.lr);
  train.get("epochs", t.epochs);
  train.get("batch_size", t.batch_size);
  train.get("decay_every", t.decay_every);
  train.get("decay_factor", t.decay_factor);
  const auto crop = pair_of(train, "crop", {160, 128});
  require(crop.first >= 1 && crop.second >= 1, "train.crop", "entries must be >= 1");
  g.height = crop.first;
  g.width = crop.second;
  train.get("flip_probability", t.flip_probability);
  train.get("noise_sigma", t.noise_sigma);
  train.get("noise_on_source", t.noise_on_source);
  train.get("literal_gan", t.literal_gan);
  train.get("beta1", t.beta1);
  train.get("beta2", t.beta2);
  train.get("adam_eps", t.adam_eps);
  train.get("val_limit", t.val_limit);
  if (g.height % g.grid.rows != 0 || g.width % g.grid.cols != 0) {
    throw ValidationError("'model.grid' " + std::to_string(g.grid.rows) + "x" + std::to_string(g.grid.cols) +
                          " does not divide 'train.crop' " + std::to_string(g.height) + "x" +
                          std::to_string(g.width));
  }
  try {
    t.validate();
  } catch (const ValidationError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }

  const Section sweep = root.sub("sweep", {"grids"});
  if (sweep.has("grids")) {
    std::vector<std::vector<int>> grids;
    sweep.get("grids", grids);
    c.sweep_grids.clear();
    for (const auto& gr : grids) {
      require(gr.size() == 2 && gr[0] >= 1 && gr[1] >= 1, "sweep.grids", "entries must be [M, N] with M, N >= 1");
      require(g.height % gr[0] == 0 && g.width % gr[1] == 0, "sweep.grids",
              "grid " + std::to_string(gr[0]) + "x" + std::to_string(gr[1]) + " does not divide the crop");
      c.sweep_grids.push_back({gr[0], gr[1]});
    }
  }
  return c;
}

RunConfig resolve_config(const std::filesystem::path& path, const nlohmann::json& overrides) {
  nlohmann::json j = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream is(path);
    if (!is) throw ValidationError("config file not found: " + path.string());
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("config " + path.string() + ": " + e.what());
    }
  }
  j.merge_patch(overrides);
  return parse_config(j);
}

nlohmann::json to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  const GeneratorConfig& g = t.generator;
  nlohmann::json grids = nlohmann::json::array();
  for (const auto& gr : c.sweep_grids) grids.push_back({gr.rows, gr.cols});
  return {{"seed", t.seed},
          {"precision", t.precision},
          {"deterministic", c.deterministic},
          {"out_dir", c.out_dir},
          {"data",
           {{"manifest", c.manifest},
            {"train_split", c.train_split},
            {"val_split", c.val_split},
            {"synth", to_json(c.synth)}}},
          {"model",
           {{"grid", {g.grid.rows, g.grid.cols}},
            {"frequencies", g.frequencies},
            {"coord_denominator", denominator_name(g.denominator)},
            {"source_channels", g.hyper.input_channels},
            {"mlp", {{"layers", g.mlp.layers}, {"hidden_width", g.mlp.hidden_width}, {"leaky_slope", g.mlp.leaky_slope}}},
            {"hypernet",
             {{"base_channels", g.hyper.base_channels},
              {"max_channels", g.hyper.max_channels},
              {"trunk_channels", g.hyper.trunk_channels},
              {"trunk_blocks", g.hyper.trunk_blocks},
              {"leaky_slope", g.hyper.leaky_slope},
              {"head_scale", g.hyper.head_scale}}},
            {"discriminator", {{"channels", t.discriminator.channels}, {"leaky_slope", t.discriminator.leaky_slope}}}}},
          {"train",
           {{"lambda_rec", t.lambda_rec},
            {"lr", t.lr},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"decay_every", t.decay_every},
            {"decay_factor", t.decay_factor},
            {"crop", {g.height, g.width}},
            {"flip_probability", t.flip_probability},
            {"noise_sigma", t.noise_sigma},
            {"noise_on_source", t.noise_on_source},
            {"literal_gan", t.literal_gan},
            {"beta1", t.beta1},
            {"beta2", t.beta2},
            {"adam_eps", t.adam_eps},
            {"val_limit", t.val_limit}}},
          {"sweep", {{"grids", grids}}}};
}

}  // namespace inrgan
