#pragma once

// Conditional GAN training of the hypernetwork generator against the PatchGAN
// discriminator: losses, schedules, augmentation, the optimization loop and
// checkpointing.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "inrgan/adam.hpp"
#include "inrgan/checkpoint.hpp"
#include "inrgan/data.hpp"
#include "inrgan/discriminator.hpp"
#include "inrgan/generator.hpp"
#include "inrgan/metrics.hpp"
#include "inrgan/rng.hpp"

namespace inrgan {

struct TrainConfig {
  GeneratorConfig generator;  // height/width are the crop extents
  DiscConfig discriminator;
  double lambda_rec = 100.0;
  double lr = 1e-4;
  int epochs = 60;
  int batch_size = 8;
  int decay_every = 20;
  double decay_factor = 0.5;
  double flip_probability = 0.5;  // horizontal
  double noise_sigma = 0.1;       // initial noise std; annealed linearly to 0 at the final epoch
  bool noise_on_source = false;
  bool literal_gan = false;  // generator minimizes log(1 - D(s, G(s))) instead of -log D(s, G(s))
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int val_limit = 0;  // 0: whole validation split
  std::uint64_t seed = 0;
  int precision = 32;

  int crop_height() const { return generator.height; }
  int crop_width() const { return generator.width; }
  void validate() const;  // std::invalid_argument naming the offending key
};

nlohmann::json to_json(const TrainConfig& cfg);
// Reads a TrainConfig written by to_json (all keys required).
TrainConfig train_config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Losses

struct GanLoss {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

// Numerically stable sigmoid cross-entropy of one logit against a label.
double bce_with_logits(double logit, double label);

// d_loss = mean BCE(real, 1) + mean BCE(fake, 0); g_loss = mean BCE(fake, 1),
// or -mean BCE(fake, 0) when `literal`.
template <typename T>
GanLoss gan_loss(const NdArray<T>& logits_real, const NdArray<T>& logits_fake, bool literal = false);

double rec_loss(const Image& pred, const Image& target);
template <typename T>
double rec_loss(const NdArray<T>& pred, const NdArray<T>& target);

double total_generator_objective(double g_loss, double rec, double lambda_rec);

double lr_schedule(int epoch, const TrainConfig& cfg);
double noise_schedule(int epoch, const TrainConfig& cfg);

struct AugmentedPair {
  Image source;
  Image target;
  int top = 0, left = 0;
  bool flipped = false;
};

// Same crop window and same horizontal flip for source and target.
AugmentedPair augment(const Image& source, const Image& target, const TrainConfig& cfg, Rng& rng);
// Deterministic centered crop to the configured extent.
std::pair<Image, Image> center_crop(const Image& source, const Image& target, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// History

struct EpochRecord {
  int epoch = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double rec_loss = 0.0;
  double val_mse = 0.0;
  double val_ssim = 0.0;
  double val_psnr = 0.0;
  double lr = 0.0;
  double sigma = 0.0;
  // Generator objective on the reference batch with end-of-epoch parameters.
  double objective = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct RunHistory {
  std::vector<EpochRecord> records;
  std::vector<double> wall_seconds;  // aligned with records; not part of equality

  bool operator==(const RunHistory& o) const { return records == o.records; }
  std::string to_csv() const;
  nlohmann::json to_json() const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Trainer

struct StepStats {
  double d_loss = 0.0;
  double g_loss = 0.0;
  double rec_loss = 0.0;
};

template <typename T>
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);
  // Resumes parameters (not optimizer state) from a checkpoint.
  Trainer(TrainConfig cfg, const Checkpoint& ckpt);

  const TrainConfig& config() const { return cfg_; }
  TensorMap<T>& generator_params() { return gen_params_; }
  TensorMap<T>& disc_params() { return disc_params_; }
  const TensorMap<T>& generator_params() const { return gen_params_; }
  const TensorMap<T>& disc_params() const { return disc_params_; }

  // One alternating update: D step on detached noisy pairs, then G step
  // through the updated D. noise_seeds[i] drives sample i's noise.
  StepStats step(std::span<const Image> sources, std::span<const Image> targets, double lr, double sigma,
                 std::span<const std::uint64_t> noise_seeds);
  // Updates D only.
  double d_step(std::span<const Image> sources, std::span<const Image> targets, double lr, double sigma,
                std::span<const std::uint64_t> noise_seeds);
  // Updates G only (no noise).
  StepStats g_step(std::span<const Image> sources, std::span<const Image> targets, double lr);

  // g_loss + lambda_rec * rec with current parameters and no noise.
  double generator_objective(std::span<const Image> sources, std::span<const Image> targets);
  std::vector<Image> translate(std::span<const Image> sources);

  Checkpoint checkpoint(int epochs_completed) const;

 private:
  const GeneratorGraph& gen_graph(int batch);
  const DiscriminatorGraph& disc_graph(int batch);
  struct Noise {
    NdArray<T> source, real, fake;
  };
  Noise draw_noise(int batch, double sigma, std::span<const std::uint64_t> seeds) const;
  double d_update(const NdArray<T>& source, const NdArray<T>& real, const NdArray<T>& fake, double lr);
  StepStats g_update(const GeneratorGraph& gen, const Forward<T>& gen_fw, const NdArray<T>& d_source,
                     const NdArray<T>& fake_noise, const NdArray<T>& target, double lr);

  TrainConfig cfg_;
  TensorMap<T> gen_params_;
  TensorMap<T> disc_params_;
  AdamState<T> gen_adam_;
  AdamState<T> disc_adam_;
  std::map<int, std::unique_ptr<GeneratorGraph>> gen_graphs_;
  std::map<int, std::unique_ptr<DiscriminatorGraph>> disc_graphs_;
};

struct TrainResult {
  Checkpoint checkpoint;
  RunHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&, double wall_seconds)>;

// Validation metrics use `val` (or the first 16 training pairs when empty).
TrainResult train(const TrainConfig& cfg, const std::vector<SamplePair>& train_set,
                  const std::vector<SamplePair>& val, const EpochCallback& on_epoch = {});

// The first min(batch_size, n) training pairs, center-cropped.
std::pair<std::vector<Image>, std::vector<Image>> reference_batch(const TrainConfig& cfg,
                                                                  const std::vector<SamplePair>& train_set);

// ---------------------------------------------------------------------------
// Trained model access

struct Model {
  TrainConfig config;
  TensorMap<float> generator_params;
  TensorMap<float> disc_params;
};

Model model_from_checkpoint(const Checkpoint& ckpt);
// Translates in batches through the 32-bit graph.
std::vector<Image> translate(const Model& model, std::span<const Image> sources, int batch = 8);

// Scores the model (and optionally a baseline) on a dataset; the baseline
// comparison holds one signed-rank test per metric.
struct Evaluation {
  MetricsReport report;
  std::optional<MetricsReport> baseline;
  std::vector<MetricComparison> comparisons;
};
Evaluation evaluate(const Model& model, const std::vector<SamplePair>& dataset,
                    const std::vector<Image>* baseline_predictions = nullptr);

// Copy-source baseline: each prediction is the first source channel, center-cropped.
std::vector<Image> copy_source_predictions(const TrainConfig& cfg, const std::vector<SamplePair>& dataset);

}  // namespace inrgan
