#include "inrgan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace inrgan {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kTagInitG = 11;
constexpr std::uint64_t kTagInitD = 12;
constexpr std::uint64_t kTagShuffle = 13;
constexpr std::uint64_t kTagAugment = 14;
constexpr std::uint64_t kTagNoise = 15;

[[noreturn]] void bad(const std::string& key, const std::string& msg) {
  throw std::invalid_argument("'" + key + "' " + msg);
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

template <typename T>
NdArray<T> add_arrays(const NdArray<T>& a, const NdArray<T>& b) {
  NdArray<T> out = a;
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Image crop_flip(const Image& img, int top, int left, int h, int w, bool flip) {
  Image out(img.channels, h, w);
  for (int c = 0; c < img.channels; ++c) {
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        out.at(c, r, col) = img.at(c, top + r, left + (flip ? w - 1 - col : col));
      }
    }
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lambda_rec >= 0.0)) bad("train.lambda_rec", "must be >= 0");
  if (!(lr > 0.0)) bad("train.lr", "must be > 0");
  if (epochs < 1) bad("train.epochs", "must be >= 1");
  if (batch_size < 1) bad("train.batch_size", "must be >= 1");
  if (decay_every < 1) bad("train.decay_every", "must be >= 1");
  if (!(decay_factor > 0.0)) bad("train.decay_factor", "must be > 0");
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) bad("train.flip_probability", "must lie in [0, 1]");
  if (!(noise_sigma >= 0.0)) bad("train.noise_sigma", "must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) bad("train.beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) bad("train.beta2", "must lie in [0, 1)");
  if (!(adam_eps > 0.0)) bad("train.adam_eps", "must be > 0");
  if (val_limit < 0) bad("train.val_limit", "must be >= 0");
  if (precision != 32 && precision != 64) bad("precision", "must be 32 or 64");
  if (generator.height % generator.grid.rows != 0 || generator.width % generator.grid.cols != 0) {
    bad("model.grid", "must divide the crop " + std::to_string(generator.height) + "x" +
                          std::to_string(generator.width) + " (got " + std::to_string(generator.grid.rows) + "x" +
                          std::to_string(generator.grid.cols) + ")");
  }
  try {
    generator.validate();
  } catch (const std::invalid_argument& e) {
    bad("model", e.what());
  }
  if (discriminator.source_channels != generator.hyper.input_channels) {
    bad("model.discriminator.source_channels", "must equal the generator input channels");
  }
  if (discriminator.target_channels != generator.mlp.output_width) {
    bad("model.discriminator.target_channels", "must equal the MLP output width");
  }
  try {
    logit_extent(discriminator, generator.height, generator.width);
  } catch (const std::invalid_argument& e) {
    bad("train.crop", e.what());
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"generator", to_json(c.generator)},
          {"discriminator", to_json(c.discriminator)},
          {"lambda_rec", c.lambda_rec},
          {"lr", c.lr},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"decay_every", c.decay_every},
          {"decay_factor", c.decay_factor},
          {"flip_probability", c.flip_probability},
          {"noise_sigma", c.noise_sigma},
          {"noise_on_source", c.noise_on_source},
          {"literal_gan", c.literal_gan},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"val_limit", c.val_limit},
          {"seed", c.seed},
          {"precision", c.precision}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.generator = generator_config_from_json(j.at("generator"));
  c.discriminator = disc_config_from_json(j.at("discriminator"));
  c.lambda_rec = j.at("lambda_rec").get<double>();
  c.lr = j.at("lr").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.decay_every = j.at("decay_every").get<int>();
  c.decay_factor = j.at("decay_factor").get<double>();
  c.flip_probability = j.at("flip_probability").get<double>();
  c.noise_sigma = j.at("noise_sigma").get<double>();
  c.noise_on_source = j.at("noise_on_source").get<bool>();
  c.literal_gan = j.at("literal_gan").get<bool>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.val_limit = j.at("val_limit").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.precision = j.at("precision").get<int>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

double bce_with_logits(double logit, double label) {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

template <typename T>
GanLoss gan_loss(const NdArray<T>& real, const NdArray<T>& fake, bool literal) {
  if (real.shape() != fake.shape()) {
    throw std::invalid_argument("gan_loss: logit maps differ in shape " + shape_to_string(real.shape()) + " vs " +
                                shape_to_string(fake.shape()));
  }
  double r1 = 0.0, f0 = 0.0, f1 = 0.0;
  for (std::int64_t i = 0; i < real.size(); ++i) {
    r1 += bce_with_logits(static_cast<double>(real[i]), 1.0);
    f0 += bce_with_logits(static_cast<double>(fake[i]), 0.0);
    f1 += bce_with_logits(static_cast<double>(fake[i]), 1.0);
  }
  const double n = static_cast<double>(real.size());
  return {r1 / n + f0 / n, literal ? -f0 / n : f1 / n};
}

template <typename T>
double rec_loss(const NdArray<T>& pred, const NdArray<T>& target) {
  if (pred.shape() != target.shape()) {
    throw std::invalid_argument("rec_loss: shape mismatch " + shape_to_string(pred.shape()) + " vs " +
                                shape_to_string(target.shape()));
  }
  double sum = 0.0;
  for (std::int64_t i = 0; i < pred.size(); ++i) sum += std::abs(static_cast<double>(pred[i]) - target[i]);
  return sum / static_cast<double>(pred.size());
}

double rec_loss(const Image& pred, const Image& target) {
  if (pred.channels != target.channels || !pred.same_extent(target)) {
    throw std::invalid_argument("rec_loss: shape mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    sum += std::abs(static_cast<double>(pred.data[i]) - target.data[i]);
  }
  return sum / static_cast<double>(pred.data.size());
}

double total_generator_objective(double g_loss, double rec, double lambda_rec) {
  if (lambda_rec < 0.0) throw std::invalid_argument("total_generator_objective: lambda_rec must be >= 0");
  return g_loss + lambda_rec * rec;
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) throw std::out_of_range("lr_schedule: epoch out of range");
  return cfg.lr * std::pow(cfg.decay_factor, epoch / cfg.decay_every);
}

double noise_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) throw std::out_of_range("noise_schedule: epoch out of range");
  if (cfg.epochs == 1) return 0.0;
  return cfg.noise_sigma * (1.0 - static_cast<double>(epoch) / (cfg.epochs - 1));
}

AugmentedPair augment(const Image& source, const Image& target, const TrainConfig& cfg, Rng& rng) {
  const int h = cfg.crop_height(), w = cfg.crop_width();
  if (!source.same_extent(target)) throw std::invalid_argument("augment: source and target extents differ");
  if (h > source.height || w > source.width) {
    throw std::invalid_argument("augment: crop " + std::to_string(h) + "x" + std::to_string(w) +
                                " larger than image " + std::to_string(source.height) + "x" +
                                std::to_string(source.width));
  }
  AugmentedPair out;
  out.top = std::uniform_int_distribution<int>(0, source.height - h)(rng);
  out.left = std::uniform_int_distribution<int>(0, source.width - w)(rng);
  out.flipped = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.flip_probability;
  out.source = crop_flip(source, out.top, out.left, h, w, out.flipped);
  out.target = crop_flip(target, out.top, out.left, h, w, out.flipped);
  return out;
}

std::pair<Image, Image> center_crop(const Image& source, const Image& target, const TrainConfig& cfg) {
  const int h = cfg.crop_height(), w = cfg.crop_width();
  if (h > source.height || w > source.width || !source.same_extent(target)) {
    throw std::invalid_argument("center_crop: image smaller than the crop or extents differ");
  }
  const int top = (source.height - h) / 2, left = (source.width - w) / 2;
  return {crop_flip(source, top, left, h, w, false), crop_flip(target, top, left, h, w, false)};
}

// ---------------------------------------------------------------------------

std::string RunHistory::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,d_loss,g_loss,rec_loss,val_mse,val_ssim,val_psnr,lr,sigma\n";
  for (const auto& r : records) {
    os << r.epoch << ',' << r.d_loss << ',' << r.g_loss << ',' << r.rec_loss << ',' << r.val_mse << ','
       << r.val_ssim << ',' << r.val_psnr << ',' << r.lr << ',' << r.sigma << '\n';
  }
  return os.str();
}

nlohmann::json RunHistory::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    arr.push_back({{"epoch", r.epoch},
                   {"d_loss", r.d_loss},
                   {"g_loss", r.g_loss},
                   {"rec_loss", r.rec_loss},
                   {"val_mse", r.val_mse},
                   {"val_ssim", r.val_ssim},
                   {"val_psnr", r.val_psnr},
                   {"lr", r.lr},
                   {"sigma", r.sigma},
                   {"objective", r.objective},
                   {"wall_seconds", i < wall_seconds.size() ? wall_seconds[i] : 0.0}});
  }
  return {{"records", arr}};
}

// ---------------------------------------------------------------------------

template <typename T>
Trainer<T>::Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  gen_params_ = init_generator_params<T>(cfg_.generator, derive_seed(cfg_.seed, {kTagInitG}));
  disc_params_ = init_disc_params<T>(cfg_.discriminator, derive_seed(cfg_.seed, {kTagInitD}));
}

template <typename T>
Trainer<T>::Trainer(TrainConfig cfg, const Checkpoint& ckpt) : Trainer(std::move(cfg)) {
  auto load = [](TensorMap<T>& dst, const TensorMap<float>& src, const char* section) {
    for (auto& [name, value] : dst) {
      auto it = src.find(name);
      if (it == src.end()) throw std::runtime_error(std::string(section) + ": checkpoint lacks '" + name + "'");
      if (it->second.shape() != value.shape()) {
        throw std::runtime_error(std::string(section) + ": '" + name + "' has shape " +
                                 shape_to_string(it->second.shape()) + ", expected " + shape_to_string(value.shape()));
      }
      value = it->second.template cast<T>();
    }
  };
  load(gen_params_, ckpt.tensors("hypernet"), "hypernet");
  load(disc_params_, ckpt.tensors("disc"), "disc");
}

template <typename T>
const GeneratorGraph& Trainer<T>::gen_graph(int batch) {
  auto& slot = gen_graphs_[batch];
  if (!slot) slot = std::make_unique<GeneratorGraph>(cfg_.generator, batch);
  return *slot;
}

template <typename T>
const DiscriminatorGraph& Trainer<T>::disc_graph(int batch) {
  auto& slot = disc_graphs_[batch];
  if (!slot) {
    slot = std::make_unique<DiscriminatorGraph>(cfg_.discriminator, batch, cfg_.generator.height, cfg_.generator.width);
  }
  return *slot;
}

template <typename T>
typename Trainer<T>::Noise Trainer<T>::draw_noise(int batch, double sigma, std::span<const std::uint64_t> seeds) const {
  const std::int64_t h = cfg_.generator.height, w = cfg_.generator.width;
  const std::int64_t m = cfg_.generator.hyper.input_channels, o = cfg_.generator.mlp.output_width;
  Noise n{NdArray<T>({batch, m, h, w}), NdArray<T>({batch, o, h, w}), NdArray<T>({batch, o, h, w})};
  if (sigma == 0.0) return n;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int b = 0; b < batch; ++b) {
    Rng rng(seeds[static_cast<std::size_t>(b)]);
    for (std::int64_t i = 0; i < o * h * w; ++i) n.real[b * o * h * w + i] = static_cast<T>(sigma * normal(rng));
    for (std::int64_t i = 0; i < o * h * w; ++i) n.fake[b * o * h * w + i] = static_cast<T>(sigma * normal(rng));
    if (cfg_.noise_on_source) {
      for (std::int64_t i = 0; i < m * h * w; ++i) n.source[b * m * h * w + i] = static_cast<T>(sigma * normal(rng));
    }
  }
  return n;
}

template <typename T>
double Trainer<T>::d_update(const NdArray<T>& source, const NdArray<T>& real, const NdArray<T>& fake, double lr) {
  const auto& dg = disc_graph(static_cast<int>(source.dim(0)));
  TensorMap<T> inputs{{"source", source}, {"target", real}};
  const auto fw_real = eval_graph(dg.graph(), disc_params_, inputs);
  inputs["target"] = fake;
  const auto fw_fake = eval_graph(dg.graph(), disc_params_, inputs);
  const auto& lr_map = fw_real.output("logits");
  const auto& lf_map = fw_fake.output("logits");
  const GanLoss loss = gan_loss(lr_map, lf_map, cfg_.literal_gan);
  if (!std::isfinite(loss.d_loss)) throw TrainingError("non-finite discriminator loss");
  const double inv = 1.0 / static_cast<double>(lr_map.size());
  NdArray<T> seed_real(lr_map.shape()), seed_fake(lf_map.shape());
  for (std::int64_t i = 0; i < lr_map.size(); ++i) {
    seed_real[i] = static_cast<T>((sigmoid(static_cast<double>(lr_map[i])) - 1.0) * inv);
    seed_fake[i] = static_cast<T>(sigmoid(static_cast<double>(lf_map[i])) * inv);
  }
  auto grads = backward(dg.graph(), fw_real, TensorMap<T>{{"logits", seed_real}}).params;
  const auto grads_fake = backward(dg.graph(), fw_fake, TensorMap<T>{{"logits", seed_fake}}).params;
  for (auto& [name, g] : grads) {
    const auto& other = grads_fake.at(name);
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += other[i];
  }
  adam_step(disc_params_, grads, disc_adam_, AdamHyper{lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps});
  return loss.d_loss;
}

template <typename T>
StepStats Trainer<T>::g_update(const GeneratorGraph& gen, const Forward<T>& gen_fw, const NdArray<T>& d_source,
                               const NdArray<T>& fake_noise, const NdArray<T>& target, double lr) {
  const NdArray<T>& fake = gen_fw.output("image");
  const auto& dg = disc_graph(gen.batch());
  const auto fw = eval_graph(dg.graph(), disc_params_,
                             TensorMap<T>{{"source", d_source}, {"target", add_arrays(fake, fake_noise)}});
  const auto& logits = fw.output("logits");
  const GanLoss loss = gan_loss(logits, logits, cfg_.literal_gan);
  StepStats stats;
  stats.g_loss = loss.g_loss;
  stats.rec_loss = rec_loss(fake, target);
  if (!std::isfinite(stats.g_loss) || !std::isfinite(stats.rec_loss)) {
    throw TrainingError("non-finite generator loss");
  }
  const double inv = 1.0 / static_cast<double>(logits.size());
  NdArray<T> seed(logits.shape());
  for (std::int64_t i = 0; i < logits.size(); ++i) {
    const double s = sigmoid(static_cast<double>(logits[i]));
    seed[i] = static_cast<T>((cfg_.literal_gan ? -s : s - 1.0) * inv);
  }
  NdArray<T> image_seed = backward(dg.graph(), fw, TensorMap<T>{{"logits", seed}}).inputs.at("target");
  const double rec_scale = cfg_.lambda_rec / static_cast<double>(fake.size());
  for (std::int64_t i = 0; i < fake.size(); ++i) {
    const T d = fake[i] - target[i];
    const double sign = d > T(0) ? 1.0 : (d < T(0) ? -1.0 : 0.0);
    image_seed[i] += static_cast<T>(rec_scale * sign);
  }
  const auto grads = backward(gen.graph(), gen_fw, TensorMap<T>{{"image", image_seed}}).params;
  adam_step(gen_params_, grads, gen_adam_, AdamHyper{lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps});
  return stats;
}

template <typename T>
StepStats Trainer<T>::step(std::span<const Image> sources, std::span<const Image> targets, double lr, double sigma,
                           std::span<const std::uint64_t> noise_seeds) {
  const int batch = static_cast<int>(sources.size());
  if (batch < 1 || targets.size() != sources.size() || noise_seeds.size() != sources.size()) {
    throw std::invalid_argument("Trainer::step: batch arrays differ in length");
  }
  const auto& gen = gen_graph(batch);
  const auto gen_fw = eval_graph(gen.graph(), gen_params_, gen.template bind_inputs<T>(sources));
  const Noise noise = draw_noise(batch, sigma, noise_seeds);
  const NdArray<T> target = stack_images<T>(targets);
  const NdArray<T> d_source = add_arrays(stack_images<T>(sources), noise.source);
  StepStats stats;
  const NdArray<T>& fake = gen_fw.output("image");
  stats.d_loss = d_update(d_source, add_arrays(target, noise.real), add_arrays(fake, noise.fake), lr);
  const StepStats g = g_update(gen, gen_fw, d_source, noise.fake, target, lr);
  stats.g_loss = g.g_loss;
  stats.rec_loss = g.rec_loss;
  return stats;
}

template <typename T>
double Trainer<T>::d_step(std::span<const Image> sources, std::span<const Image> targets, double lr, double sigma,
                          std::span<const std::uint64_t> noise_seeds) {
  const int batch = static_cast<int>(sources.size());
  if (batch < 1 || targets.size() != sources.size() || noise_seeds.size() != sources.size()) {
    throw std::invalid_argument("Trainer::d_step: batch arrays differ in length");
  }
  const auto& gen = gen_graph(batch);
  const auto gen_fw = eval_graph(gen.graph(), gen_params_, gen.template bind_inputs<T>(sources));
  const Noise noise = draw_noise(batch, sigma, noise_seeds);
  const NdArray<T> d_source = add_arrays(stack_images<T>(sources), noise.source);
  return d_update(d_source, add_arrays(stack_images<T>(targets), noise.real),
                  add_arrays(gen_fw.output("image"), noise.fake), lr);
}

template <typename T>
StepStats Trainer<T>::g_step(std::span<const Image> sources, std::span<const Image> targets, double lr) {
  const int batch = static_cast<int>(sources.size());
  if (batch < 1 || targets.size() != sources.size()) {
    throw std::invalid_argument("Trainer::g_step: batch arrays differ in length");
  }
  const auto& gen = gen_graph(batch);
  const auto gen_fw = eval_graph(gen.graph(), gen_params_, gen.template bind_inputs<T>(sources));
  const NdArray<T> zeros(gen_fw.output("image").shape());
  return g_update(gen, gen_fw, stack_images<T>(sources), zeros, stack_images<T>(targets), lr);
}

template <typename T>
double Trainer<T>::generator_objective(std::span<const Image> sources, std::span<const Image> targets) {
  const int batch = static_cast<int>(sources.size());
  const auto& gen = gen_graph(batch);
  const auto gen_fw = eval_graph(gen.graph(), gen_params_, gen.template bind_inputs<T>(sources));
  const NdArray<T>& fake = gen_fw.output("image");
  const auto& dg = disc_graph(batch);
  const auto fw = eval_graph(dg.graph(), disc_params_,
                             TensorMap<T>{{"source", stack_images<T>(sources)}, {"target", fake}});
  const auto& logits = fw.output("logits");
  const double g = gan_loss(logits, logits, cfg_.literal_gan).g_loss;
  return total_generator_objective(g, rec_loss(fake, stack_images<T>(targets)), cfg_.lambda_rec);
}

template <typename T>
std::vector<Image> Trainer<T>::translate(std::span<const Image> sources) {
  std::vector<Image> out;
  out.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); i += static_cast<std::size_t>(cfg_.batch_size)) {
    const std::size_t n = std::min(sources.size() - i, static_cast<std::size_t>(cfg_.batch_size));
    auto part = generator_forward_batch<T>(gen_graph(static_cast<int>(n)), sources.subspan(i, n), gen_params_);
    for (auto& img : part) out.push_back(std::move(img));
  }
  return out;
}

template <typename T>
Checkpoint Trainer<T>::checkpoint(int epochs_completed) const {
  Checkpoint ck;
  ck.json_sections["meta"] = {{"format", "inrgan"},
                              {"train_config", to_json(cfg_)},
                              {"seed", cfg_.seed},
                              {"epochs_completed", epochs_completed}};
  ck.json_sections["mlp_spec"] = to_json(cfg_.generator);
  ck.tensor_sections["hypernet"] = cast_all<float>(gen_params_);
  ck.tensor_sections["disc"] = cast_all<float>(disc_params_);
  return ck;
}

template class Trainer<float>;
template class Trainer<double>;
template GanLoss gan_loss<float>(const NdArray<float>&, const NdArray<float>&, bool);
template GanLoss gan_loss<double>(const NdArray<double>&, const NdArray<double>&, bool);
template double rec_loss<float>(const NdArray<float>&, const NdArray<float>&);
template double rec_loss<double>(const NdArray<double>&, const NdArray<double>&);

// ---------------------------------------------------------------------------

std::pair<std::vector<Image>, std::vector<Image>> reference_batch(const TrainConfig& cfg,
                                                                  const std::vector<SamplePair>& train_set) {
  std::pair<std::vector<Image>, std::vector<Image>> out;
  const std::size_t n = std::min(train_set.size(), static_cast<std::size_t>(cfg.batch_size));
  for (std::size_t i = 0; i < n; ++i) {
    auto [s, t] = center_crop(train_set[i].source, train_set[i].target, cfg);
    out.first.push_back(std::move(s));
    out.second.push_back(std::move(t));
  }
  return out;
}

namespace {

void check_dataset(const TrainConfig& cfg, const std::vector<SamplePair>& samples, const char* what) {
  for (const auto& s : samples) {
    if (s.source.channels != cfg.generator.hyper.input_channels || s.target.channels != cfg.generator.mlp.output_width) {
      throw std::invalid_argument(std::string(what) + " sample '" + s.id + "': channel counts do not match the model");
    }
    if (s.source.height < cfg.crop_height() || s.source.width < cfg.crop_width() || !s.source.same_extent(s.target)) {
      throw std::invalid_argument(std::string(what) + " sample '" + s.id + "': extent smaller than the crop");
    }
  }
}

template <typename T>
TrainResult train_impl(const TrainConfig& cfg, const std::vector<SamplePair>& train_set,
                       const std::vector<SamplePair>& val, const EpochCallback& on_epoch) {
  Trainer<T> trainer(cfg);
  std::vector<Image> val_src, val_tgt;
  std::vector<std::string> val_ids;
  const auto& val_pool = val.empty() ? train_set : val;
  std::size_t val_n = val.empty() ? std::min<std::size_t>(16, train_set.size()) : val.size();
  if (cfg.val_limit > 0) val_n = std::min(val_n, static_cast<std::size_t>(cfg.val_limit));
  for (std::size_t i = 0; i < val_n; ++i) {
    auto [s, t] = center_crop(val_pool[i].source, val_pool[i].target, cfg);
    val_src.push_back(std::move(s));
    val_tgt.push_back(std::move(t));
    val_ids.push_back(val_pool[i].id);
  }
  const auto [ref_src, ref_tgt] = reference_batch(cfg, train_set);

  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, {kTagShuffle, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = lr_schedule(epoch, cfg);
    const double sigma = noise_schedule(epoch, cfg);
    double d_sum = 0.0, g_sum = 0.0, r_sum = 0.0;
    int batches = 0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n = std::min(order.size() - first, static_cast<std::size_t>(cfg.batch_size));
      std::vector<Image> src, tgt;
      std::vector<std::uint64_t> seeds;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = order[first + k];
        Rng aug_rng(derive_seed(cfg.seed, {kTagAugment, static_cast<std::uint64_t>(epoch), idx}));
        auto pair = augment(train_set[idx].source, train_set[idx].target, cfg, aug_rng);
        src.push_back(std::move(pair.source));
        tgt.push_back(std::move(pair.target));
        seeds.push_back(derive_seed(cfg.seed, {kTagNoise, static_cast<std::uint64_t>(epoch), idx}));
      }
      StepStats s;
      try {
        s = trainer.step(src, tgt, lr, sigma, seeds);
      } catch (const std::runtime_error& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batches) + ": " + e.what());
      }
      d_sum += s.d_loss;
      g_sum += s.g_loss;
      r_sum += s.rec_loss;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.d_loss = d_sum / batches;
    rec.g_loss = g_sum / batches;
    rec.rec_loss = r_sum / batches;
    rec.lr = lr;
    rec.sigma = sigma;
    const auto preds = trainer.translate(val_src);
    const auto report = evaluate_predictions(preds, val_tgt, val_ids);
    rec.val_mse = report.summary("mse").mean;
    rec.val_ssim = report.summary("ssim").mean;
    rec.val_psnr = report.summary("psnr").mean;
    rec.objective = trainer.generator_objective(ref_src, ref_tgt);
    for (double v : {rec.d_loss, rec.g_loss, rec.rec_loss, rec.val_mse, rec.val_ssim, rec.val_psnr, rec.objective}) {
      if (!std::isfinite(v)) throw TrainingError("epoch " + std::to_string(epoch) + ": non-finite history value");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.records.push_back(rec);
    result.history.wall_seconds.push_back(secs);
    if (on_epoch) on_epoch(rec, secs);
  }
  result.checkpoint = trainer.checkpoint(cfg.epochs);
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<SamplePair>& train_set,
                  const std::vector<SamplePair>& val, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  check_dataset(cfg, train_set, "training");
  check_dataset(cfg, val, "validation");
  return cfg.precision == 64 ? train_impl<double>(cfg, train_set, val, on_epoch)
                             : train_impl<float>(cfg, train_set, val, on_epoch);
}

// ---------------------------------------------------------------------------

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model m;
  m.config = train_config_from_json(ckpt.json("meta").at("train_config"));
  const GeneratorConfig spec = generator_config_from_json(ckpt.json("mlp_spec"));
  if (!(spec == m.config.generator)) throw std::runtime_error("checkpoint: mlp_spec disagrees with meta");
  m.generator_params = ckpt.tensors("hypernet");
  m.disc_params = ckpt.tensors("disc");
  const auto expected = init_generator_params<float>(m.config.generator, 0);
  for (const auto& [name, value] : expected) {
    auto it = m.generator_params.find(name);
    if (it == m.generator_params.end() || it->second.shape() != value.shape()) {
      throw std::runtime_error("checkpoint: generator parameter '" + name + "' missing or misshapen");
    }
  }
  return m;
}

std::vector<Image> translate(const Model& model, std::span<const Image> sources, int batch) {
  if (batch < 1) throw std::invalid_argument("translate: batch must be >= 1");
  for (const auto& s : sources) {
    if (s.channels != model.config.generator.hyper.input_channels) {
      throw std::invalid_argument("translate: source has " + std::to_string(s.channels) + " channels, model expects " +
                                  std::to_string(model.config.generator.hyper.input_channels));
    }
  }
  std::vector<Image> out;
  std::map<int, std::unique_ptr<GeneratorGraph>> graphs;
  for (std::size_t i = 0; i < sources.size(); i += static_cast<std::size_t>(batch)) {
    const int n = static_cast<int>(std::min(sources.size() - i, static_cast<std::size_t>(batch)));
    auto& g = graphs[n];
    if (!g) g = std::make_unique<GeneratorGraph>(model.config.generator, n);
    for (auto& img : generator_forward_batch<float>(*g, sources.subspan(i, static_cast<std::size_t>(n)),
                                                    model.generator_params)) {
      out.push_back(std::move(img));
    }
  }
  return out;
}

std::vector<Image> copy_source_predictions(const TrainConfig& cfg, const std::vector<SamplePair>& dataset) {
  std::vector<Image> out;
  for (const auto& s : dataset) out.push_back(center_crop(s.source, s.target, cfg).first.channel(0));
  return out;
}

Evaluation evaluate(const Model& model, const std::vector<SamplePair>& dataset,
                    const std::vector<Image>* baseline_predictions) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  check_dataset(model.config, dataset, "evaluation");
  std::vector<Image> sources, targets;
  std::vector<std::string> ids;
  for (const auto& s : dataset) {
    auto [src, tgt] = center_crop(s.source, s.target, model.config);
    sources.push_back(std::move(src));
    targets.push_back(std::move(tgt));
    ids.push_back(s.id);
  }
  Evaluation ev;
  ev.report = evaluate_predictions(translate(model, sources, model.config.batch_size), targets, ids);
  if (baseline_predictions) {
    ev.baseline = evaluate_predictions(*baseline_predictions, targets, ids);
    ev.comparisons = compare_reports(ev.report, *ev.baseline);
  }
  return ev;
}

}  // namespace inrgan
