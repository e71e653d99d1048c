#include "inrgan/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <stdexcept>

#include "inrgan/binary_io.hpp"

namespace inrgan {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
  if (height < 8 || width < 8) throw std::invalid_argument("synth: extents must be at least 8x8");
  if (train_count < 0 || test_count < 0 || train_count + test_count < 1) {
    throw std::invalid_argument("synth: need at least one sample");
  }
  if (class_a_min < 0 || class_a_max < class_a_min || class_b_min < 0 || class_b_max < class_b_min) {
    throw std::invalid_argument("synth: invalid lesion count range");
  }
  if (radius_min <= 0.0 || radius_max < radius_min) throw std::invalid_argument("synth: invalid radius range");
  if (stripe_period <= 0.0 || noise_level < 0.0 || rim_width < 0.0) {
    throw std::invalid_argument("synth: stripe period must be positive, noise and rim width non-negative");
  }
  for (const auto& [r, c] : grid_divisors) {
    if (r < 1 || c < 1 || height % r != 0 || width % c != 0) {
      throw std::invalid_argument("synth: extent " + std::to_string(height) + "x" + std::to_string(width) +
                                  " not divisible by grid " + std::to_string(r) + "x" + std::to_string(c));
    }
  }
}

nlohmann::json to_json(const SynthConfig& c) {
  nlohmann::json divisors = nlohmann::json::array();
  for (const auto& [r, col] : c.grid_divisors) divisors.push_back({r, col});
  return {{"height", c.height},
          {"width", c.width},
          {"train_count", c.train_count},
          {"test_count", c.test_count},
          {"class_a_count", {c.class_a_min, c.class_a_max}},
          {"class_b_count", {c.class_b_min, c.class_b_max}},
          {"radius", {c.radius_min, c.radius_max}},
          {"tissue_level", c.tissue_level},
          {"tissue_variation", c.tissue_variation},
          {"lesion_level", c.lesion_level},
          {"stripe_period", c.stripe_period},
          {"stripe_amplitude", c.stripe_amplitude},
          {"enhancement_gain", c.enhancement_gain},
          {"rim_width", c.rim_width},
          {"rim_gain", c.rim_gain},
          {"noise_level", c.noise_level},
          {"seed", c.seed},
          {"grid_divisors", divisors}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  static const std::set<std::string> known = {
      "height", "width", "train_count", "test_count", "class_a_count", "class_b_count", "radius", "tissue_level",
      "tissue_variation", "lesion_level", "stripe_period", "stripe_amplitude", "enhancement_gain", "rim_width",
      "rim_gain", "noise_level", "seed", "grid_divisors"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::invalid_argument("unknown key 'data." + key + "'");
  }
  auto get = [&](const char* key, auto& out) {
    if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
  };
  get("height", c.height);
  get("width", c.width);
  get("train_count", c.train_count);
  get("test_count", c.test_count);
  if (j.contains("class_a_count")) {
    c.class_a_min = j["class_a_count"].at(0).get<int>();
    c.class_a_max = j["class_a_count"].at(1).get<int>();
  }
  if (j.contains("class_b_count")) {
    c.class_b_min = j["class_b_count"].at(0).get<int>();
    c.class_b_max = j["class_b_count"].at(1).get<int>();
  }
  if (j.contains("radius")) {
    c.radius_min = j["radius"].at(0).get<double>();
    c.radius_max = j["radius"].at(1).get<double>();
  }
  get("tissue_level", c.tissue_level);
  get("tissue_variation", c.tissue_variation);
  get("lesion_level", c.lesion_level);
  get("stripe_period", c.stripe_period);
  get("stripe_amplitude", c.stripe_amplitude);
  get("enhancement_gain", c.enhancement_gain);
  get("rim_width", c.rim_width);
  get("rim_gain", c.rim_gain);
  get("noise_level", c.noise_level);
  get("seed", c.seed);
  if (j.contains("grid_divisors")) {
    c.grid_divisors.clear();
    for (const auto& g : j["grid_divisors"]) c.grid_divisors.emplace_back(g.at(0).get<int>(), g.at(1).get<int>());
  }
  return c;
}

double Ellipse::radius_at(double r, double c) const {
  const double dy = r - cy;
  const double dx = c - cx;
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double u = dy * ca - dx * sa;
  const double v = dy * sa + dx * ca;
  return std::sqrt((u / ry) * (u / ry) + (v / rx) * (v / rx));
}

Scene sample_scene(const SynthConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  Scene s;
  s.height = cfg.height;
  s.width = cfg.width;
  s.head.cy = cfg.height / 2.0 - 0.5 + uniform(-2.0, 2.0);
  s.head.cx = cfg.width / 2.0 - 0.5 + uniform(-2.0, 2.0);
  s.head.ry = uniform(0.38, 0.45) * cfg.height;
  s.head.rx = uniform(0.33, 0.41) * cfg.width;
  s.head.angle = uniform(-0.3, 0.3);
  s.tissue_fy = uniform(0.5, 1.5);
  s.tissue_fx = uniform(0.5, 1.5);
  s.tissue_phase = uniform(0.0, 2.0 * std::numbers::pi);

  std::uniform_int_distribution<int> count_a(cfg.class_a_min, cfg.class_a_max);
  std::uniform_int_distribution<int> count_b(cfg.class_b_min, cfg.class_b_max);
  std::vector<bool> kinds(static_cast<std::size_t>(count_a(rng)), true);
  kinds.resize(kinds.size() + static_cast<std::size_t>(count_b(rng)), false);
  std::shuffle(kinds.begin(), kinds.end(), rng);

  const double head_min = std::min(s.head.ry, s.head.rx);
  for (bool enhancing : kinds) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      Ellipse e;
      e.ry = uniform(cfg.radius_min, cfg.radius_max);
      e.rx = uniform(cfg.radius_min, cfg.radius_max);
      e.angle = uniform(0.0, std::numbers::pi);
      e.cy = uniform(s.head.cy - s.head.ry, s.head.cy + s.head.ry);
      e.cx = uniform(s.head.cx - s.head.rx, s.head.cx + s.head.rx);
      e.enhancing = enhancing;
      e.stripe_angle = uniform(0.0, std::numbers::pi);
      e.stripe_phase = uniform(0.0, 2.0 * std::numbers::pi);
      const double reach = std::max(e.ry, e.rx);
      if (s.head.radius_at(e.cy, e.cx) > 1.0 - (reach + 2.0) / head_min) continue;
      bool clear = true;
      for (const auto& o : s.lesions) {
        if (std::hypot(o.cy - e.cy, o.cx - e.cx) < reach + std::max(o.ry, o.rx) + 2.0) clear = false;
      }
      if (!clear) continue;
      s.lesions.push_back(e);
      break;
    }
  }
  return s;
}

namespace {

// Index of the lesion owning each pixel, or -1.
std::vector<int> lesion_owner(const Scene& scene) {
  std::vector<int> owner(static_cast<std::size_t>(scene.height) * scene.width, -1);
  for (int r = 0; r < scene.height; ++r) {
    for (int c = 0; c < scene.width; ++c) {
      for (std::size_t k = 0; k < scene.lesions.size(); ++k) {
        if (scene.lesions[k].contains(r, c)) owner[static_cast<std::size_t>(r * scene.width + c)] = static_cast<int>(k);
      }
    }
  }
  return owner;
}

}  // namespace

namespace {
bool in_rim(const Ellipse& e, double r, double c, double rim_width) {
  return e.radius_at(r, c) > 1.0 - rim_width / std::min(e.rx, e.ry);
}
}  // namespace

SceneMasks scene_masks(const Scene& scene, const SynthConfig& cfg) {
  const auto owner = lesion_owner(scene);
  SceneMasks m;
  const std::size_t n = owner.size();
  m.class_a.assign(n, 0);
  m.class_a_interior.assign(n, 0);
  m.class_b.assign(n, 0);
  m.head.assign(n, 0);
  for (int r = 0; r < scene.height; ++r) {
    for (int c = 0; c < scene.width; ++c) {
      const std::size_t p = static_cast<std::size_t>(r * scene.width + c);
      m.head[p] = scene.head.contains(r, c) ? 1 : 0;
      if (owner[p] < 0) continue;
      const Ellipse& e = scene.lesions[static_cast<std::size_t>(owner[p])];
      (e.enhancing ? m.class_a : m.class_b)[p] = 1;
      if (e.enhancing && !in_rim(e, r, c, cfg.rim_width)) m.class_a_interior[p] = 1;
    }
  }
  return m;
}

SamplePair render_scene(const Scene& scene, const SynthConfig& cfg, std::uint64_t noise_seed) {
  const int h = scene.height, w = scene.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> src(n, -1.0);
  const auto owner = lesion_owner(scene);
  Rng noise_rng(noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t p = static_cast<std::size_t>(r * w + c);
      if (!scene.head.contains(r, c)) continue;
      double v = cfg.tissue_level +
                 cfg.tissue_variation * std::cos(2.0 * std::numbers::pi *
                                                     (scene.tissue_fy * r / h + scene.tissue_fx * c / w) +
                                                 scene.tissue_phase);
      if (owner[p] >= 0) {
        const Ellipse& e = scene.lesions[static_cast<std::size_t>(owner[p])];
        v = cfg.lesion_level;
        if (e.enhancing) {
          const double proj = (r - e.cy) * std::sin(e.stripe_angle) + (c - e.cx) * std::cos(e.stripe_angle);
          v += cfg.stripe_amplitude * std::sin(2.0 * std::numbers::pi * proj / cfg.stripe_period + e.stripe_phase);
        }
      }
      src[p] = v + cfg.noise_level * normal(noise_rng);
    }
  }
  // Recenter each lesion on lesion_level so both classes share one mean.
  for (std::size_t k = 0; k < scene.lesions.size(); ++k) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < n; ++p) {
      if (owner[p] == static_cast<int>(k)) {
        sum += src[p];
        ++count;
      }
    }
    if (count == 0) continue;
    const double shift = sum / static_cast<double>(count) - cfg.lesion_level;
    for (std::size_t p = 0; p < n; ++p) {
      if (owner[p] == static_cast<int>(k)) src[p] -= shift;
    }
  }
  SamplePair pair;
  pair.source = Image(1, h, w);
  pair.target = Image(1, h, w);
  for (std::size_t p = 0; p < n; ++p) {
    const double s = std::clamp(src[p], -1.0, 1.0);
    double t = s;
    if (owner[p] >= 0) {
      const Ellipse& e = scene.lesions[static_cast<std::size_t>(owner[p])];
      if (e.enhancing) {
        const bool rim = in_rim(e, static_cast<double>(p / static_cast<std::size_t>(w)),
                                static_cast<double>(p % static_cast<std::size_t>(w)), cfg.rim_width);
        t = std::clamp(s + (rim ? cfg.rim_gain : cfg.enhancement_gain), -1.0, 1.0);
      }
    }
    pair.source.data[p] = static_cast<float>(s);
    pair.target.data[p] = static_cast<float>(t);
  }
  return pair;
}

SynthDataset synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  SynthDataset ds;
  const int total = cfg.train_count + cfg.test_count;
  for (int i = 0; i < total; ++i) {
    Rng rng(derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(i)}));
    Scene scene = sample_scene(cfg, rng);
    SamplePair pair = render_scene(scene, cfg, derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(i)}));
    const bool train = i < cfg.train_count;
    pair.split = train ? "train" : "test";
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%s_%05d", train ? "train" : "test", train ? i : i - cfg.train_count);
    pair.id = id;
    ds.samples.push_back(std::move(pair));
    ds.scenes.push_back(std::move(scene));
  }
  return ds;
}

// ---------------------------------------------------------------------------

Image normalize_intensity(const Image& raw) {
  if (raw.data.empty()) throw std::invalid_argument("normalize_intensity: empty image");
  Image out = raw;
  for (int c = 0; c < raw.channels; ++c) {
    const auto begin = raw.data.begin() + c * raw.plane();
    const auto [lo_it, hi_it] = std::minmax_element(begin, begin + raw.plane());
    const double lo = *lo_it, hi = *hi_it;
    for (std::int64_t i = 0; i < raw.plane(); ++i) {
      float& v = out.data[static_cast<std::size_t>(c * raw.plane() + i)];
      v = hi > lo ? static_cast<float>(2.0 * (static_cast<double>(v) - lo) / (hi - lo) - 1.0) : -1.0f;
    }
  }
  return out;
}

CropResult nonzero_crop(const Image& raw, int row_divisor, int col_divisor) {
  if (row_divisor < 1 || col_divisor < 1) throw std::invalid_argument("nonzero_crop: divisors must be >= 1");
  int top = raw.height, bottom = -1, left = raw.width, right = -1;
  for (int c = 0; c < raw.channels; ++c) {
    for (int r = 0; r < raw.height; ++r) {
      for (int col = 0; col < raw.width; ++col) {
        if (raw.at(c, r, col) > 0.0f) {
          top = std::min(top, r);
          bottom = std::max(bottom, r);
          left = std::min(left, col);
          right = std::max(right, col);
        }
      }
    }
  }
  CropResult res;
  if (bottom < 0) {
    res.image = raw;
    res.all_zero = true;
    res.box_height = raw.height;
    res.box_width = raw.width;
    return res;
  }
  res.box_top = top;
  res.box_left = left;
  res.box_height = bottom - top + 1;
  res.box_width = right - left + 1;
  auto round_up = [](int v, int d) { return (v + d - 1) / d * d; };
  const int out_h = round_up(res.box_height, row_divisor);
  const int out_w = round_up(res.box_width, col_divisor);
  res.window_top = top - (out_h - res.box_height) / 2;
  res.window_left = left - (out_w - res.box_width) / 2;
  res.image = Image(raw.channels, out_h, out_w, 0.0f);
  for (int c = 0; c < raw.channels; ++c) {
    for (int r = 0; r < res.box_height; ++r) {
      for (int col = 0; col < res.box_width; ++col) {
        res.image.at(c, r + top - res.window_top, col + left - res.window_left) = raw.at(c, top + r, left + col);
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

namespace {
constexpr char kRawMagic[4] = {'I', 'N', 'R', 'T'};
constexpr std::uint32_t kDtypeF32 = 1;
}  // namespace

void write_raw_tensor(const fs::path& path, const float* data, const std::vector<std::uint64_t>& dims) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(kRawMagic, 4);
  io::write_pod<std::uint32_t>(os, kRawTensorVersion);
  io::write_pod<std::uint32_t>(os, kDtypeF32);
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(dims.size()));
  std::uint64_t count = 1;
  for (auto d : dims) {
    io::write_pod<std::uint64_t>(os, d);
    count *= d;
  }
  io::write_floats(os, data, count);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::vector<float> read_raw_tensor(const fs::path& path, std::vector<std::uint64_t>& dims) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || !std::equal(magic, magic + 4, kRawMagic)) throw std::runtime_error(path.string() + ": bad magic");
  const auto version = io::read_pod<std::uint32_t>(is);
  if (version != kRawTensorVersion) throw std::runtime_error(path.string() + ": unsupported version " + std::to_string(version));
  if (io::read_pod<std::uint32_t>(is) != kDtypeF32) throw std::runtime_error(path.string() + ": unsupported dtype");
  const auto ndim = io::read_pod<std::uint32_t>(is);
  dims.clear();
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    dims.push_back(io::read_pod<std::uint64_t>(is));
    count *= dims.back();
  }
  std::vector<float> values(count);
  io::read_floats(is, values.data(), count);
  return values;
}

void save_image_raw(const Image& image, const fs::path& path) {
  write_raw_tensor(path, image.data.data(),
                   {static_cast<std::uint64_t>(image.channels), static_cast<std::uint64_t>(image.height),
                    static_cast<std::uint64_t>(image.width)});
}

Image load_image_raw(const fs::path& path) {
  std::vector<std::uint64_t> dims;
  auto values = read_raw_tensor(path, dims);
  if (dims.size() == 2) dims.insert(dims.begin(), 1);
  if (dims.size() != 3) throw std::runtime_error(path.string() + ": expected [C, H, W] or [H, W]");
  Image img(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
  img.data = std::move(values);
  return img;
}

SampleRecord save_sample(const SamplePair& pair, const fs::path& dir) {
  if (!pair.source.same_extent(pair.target)) {
    throw std::invalid_argument("save_sample '" + pair.id + "': source and target extents differ");
  }
  fs::create_directories(dir);
  SampleRecord rec;
  rec.id = pair.id;
  rec.split = pair.split;
  rec.height = pair.source.height;
  rec.width = pair.source.width;
  rec.source_channels = pair.source.channels;
  rec.target_channels = pair.target.channels;
  auto write_channels = [&](const Image& img, const char* role, std::vector<std::string>& files) {
    for (int c = 0; c < img.channels; ++c) {
      const std::string name = pair.id + "_" + role + "_c" + std::to_string(c) + ".raw";
      write_raw_tensor(dir / name, img.data.data() + c * img.plane(),
                       {static_cast<std::uint64_t>(img.height), static_cast<std::uint64_t>(img.width)});
      files.push_back(name);
    }
  };
  write_channels(pair.source, "source", rec.source_files);
  write_channels(pair.target, "target", rec.target_files);
  return rec;
}

nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : m.samples) {
    samples.push_back({{"id", s.id},
                       {"split", s.split},
                       {"height", s.height},
                       {"width", s.width},
                       {"source_channels", s.source_channels},
                       {"target_channels", s.target_channels},
                       {"source_files", s.source_files},
                       {"target_files", s.target_files}});
  }
  nlohmann::json j = {{"format_version", m.format_version}, {"samples", samples}};
  if (m.synth_config) j["synth_config"] = *m.synth_config;
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.format_version = j.at("format_version").get<std::uint32_t>();
  if (m.format_version != kManifestVersion) {
    throw std::runtime_error("manifest: unsupported format_version " + std::to_string(m.format_version));
  }
  std::set<std::string> seen;
  for (const auto& s : j.at("samples")) {
    SampleRecord r;
    r.id = s.at("id").get<std::string>();
    if (!seen.insert(r.id).second) throw std::runtime_error("manifest: duplicate sample id '" + r.id + "'");
    r.split = s.value("split", std::string("train"));
    r.height = s.at("height").get<int>();
    r.width = s.at("width").get<int>();
    r.source_channels = s.at("source_channels").get<int>();
    r.target_channels = s.at("target_channels").get<int>();
    r.source_files = s.at("source_files").get<std::vector<std::string>>();
    r.target_files = s.at("target_files").get<std::vector<std::string>>();
    m.samples.push_back(std::move(r));
  }
  if (j.contains("synth_config")) m.synth_config = j["synth_config"];
  return m;
}

fs::path save_dataset(const std::vector<SamplePair>& samples, const fs::path& dir,
                      const std::optional<nlohmann::json>& synth_config) {
  fs::create_directories(dir);
  DatasetManifest m;
  m.synth_config = synth_config;
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.id).second) throw std::invalid_argument("save_dataset: duplicate sample id '" + s.id + "'");
    m.samples.push_back(save_sample(s, dir));
  }
  const fs::path path = dir / "manifest.json";
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << to_json(m).dump(2) << '\n';
  return path;
}

std::vector<SamplePair> load_dataset(const fs::path& manifest_path, const std::optional<std::string>& split) {
  std::ifstream is(manifest_path);
  if (!is) throw std::runtime_error("cannot open manifest " + manifest_path.string());
  const DatasetManifest m = manifest_from_json(nlohmann::json::parse(is));
  const fs::path dir = manifest_path.parent_path();
  std::vector<SamplePair> out;
  for (const auto& rec : m.samples) {
    if (split && rec.split != *split) continue;
    auto load_channels = [&](const std::vector<std::string>& files, int channels) {
      if (static_cast<int>(files.size()) != channels) {
        throw std::runtime_error("sample '" + rec.id + "': channel count does not match file list");
      }
      Image img(channels, rec.height, rec.width);
      for (int c = 0; c < channels; ++c) {
        const fs::path p = dir / files[static_cast<std::size_t>(c)];
        if (!fs::exists(p)) throw std::runtime_error("sample '" + rec.id + "': missing file " + p.string());
        std::vector<std::uint64_t> dims;
        std::vector<float> values;
        try {
          values = read_raw_tensor(p, dims);
        } catch (const std::exception& e) {
          throw std::runtime_error("sample '" + rec.id + "': " + e.what());
        }
        if (dims != std::vector<std::uint64_t>{static_cast<std::uint64_t>(rec.height), static_cast<std::uint64_t>(rec.width)}) {
          throw std::runtime_error("sample '" + rec.id + "': extent mismatch in " + p.string());
        }
        std::copy(values.begin(), values.end(), img.data.begin() + c * img.plane());
      }
      return img;
    };
    SamplePair pair;
    pair.id = rec.id;
    pair.split = rec.split;
    pair.source = load_channels(rec.source_files, rec.source_channels);
    pair.target = load_channels(rec.target_files, rec.target_channels);
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<SamplePair> filter_split(const std::vector<SamplePair>& samples, const std::string& split) {
  std::vector<SamplePair> out;
  for (const auto& s : samples) {
    if (s.split == split) out.push_back(s);
  }
  return out;
}

void export_png(const Image& image, const fs::path& path, int channel) {
  if (channel < 0 || channel >= image.channels) throw std::out_of_range("export_png: channel out of range");
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("libpng failure writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(image.width));
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const double v = (std::clamp(static_cast<double>(image.at(channel, r, c)), -1.0, 1.0) + 1.0) * 127.5;
      row[static_cast<std::size_t>(c)] = static_cast<png_byte>(std::lround(v));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace inrgan
