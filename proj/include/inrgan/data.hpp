#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "inrgan/image.hpp"
#include "inrgan/rng.hpp"
#include "json.hpp"

namespace inrgan {

struct SamplePair {
  std::string id;
  std::string split = "train";
  Image source;  // m channels
  Image target;  // 1 channel
};

// ---------------------------------------------------------------------------
// Synthetic paired data
//
// A head-shaped ellipse of smooth tissue on a -1 background carries two
// populations of lesion ellipses with identical mean intensity: class A with a
// zero-mean stripe texture, class B flat. The target equals the source except
// inside class-A lesions, which gain `enhancement_gain` in the interior and
// `rim_gain` in a band of `rim_width` pixels along the boundary. The
// enhancement therefore has to be inferred from texture, not from intensity.

struct SynthConfig {
  int height = 64;
  int width = 64;
  int train_count = 256;
  int test_count = 64;
  int class_a_min = 1, class_a_max = 2;
  int class_b_min = 1, class_b_max = 2;
  double radius_min = 6.0, radius_max = 11.0;
  double tissue_level = -0.2;
  double tissue_variation = 0.1;
  double lesion_level = 0.0;
  double stripe_period = 4.0;  // pixels
  double stripe_amplitude = 0.3;
  double enhancement_gain = 0.45;
  double rim_width = 1.5;  // pixels
  double rim_gain = 0.65;
  double noise_level = 0.02;
  std::uint64_t seed = 1;
  // Every emitted extent must be divisible by each of these grid sizes.
  std::vector<std::pair<int, int>> grid_divisors{{1, 1}, {2, 2}, {4, 4}, {8, 8}};

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct Ellipse {
  double cy = 0, cx = 0;  // center (row, col)
  double ry = 1, rx = 1;  // semi-axes
  double angle = 0;       // rotation, radians
  bool enhancing = false;  // class A
  double stripe_angle = 0;
  double stripe_phase = 0;

  // Normalized radius; <= 1 inside.
  double radius_at(double r, double c) const;
  bool contains(double r, double c) const { return radius_at(r, c) <= 1.0; }
};

struct Scene {
  int height = 0, width = 0;
  Ellipse head;
  double tissue_fy = 0, tissue_fx = 0, tissue_phase = 0;
  std::vector<Ellipse> lesions;  // drawn in order; later wins on overlap
};

Scene sample_scene(const SynthConfig& cfg, Rng& rng);
// Renders the pair; `noise_seed` drives the acquisition noise.
SamplePair render_scene(const Scene& scene, const SynthConfig& cfg, std::uint64_t noise_seed);

struct SynthDataset {
  std::vector<SamplePair> samples;  // train split first, then test
  std::vector<Scene> scenes;        // aligned with samples
};

SynthDataset synth_dataset(const SynthConfig& cfg);

// Class membership masks of a rendered scene (1 where the lesion owns the pixel).
// class_a_interior excludes the rim band of width cfg.rim_width.
struct SceneMasks {
  std::vector<std::uint8_t> class_a, class_a_interior, class_b, head;
};
SceneMasks scene_masks(const Scene& scene, const SynthConfig& cfg = {});

// ---------------------------------------------------------------------------
// Preprocessing

// Per-channel min-max map onto [-1, 1]; a constant channel maps to -1.
Image normalize_intensity(const Image& raw);

struct CropResult {
  Image image;
  bool all_zero = false;  // input returned unchanged
  // Tight bounding box of strictly positive pixels (any channel).
  int box_top = 0, box_left = 0, box_height = 0, box_width = 0;
  // Top-left of the padded window in input coordinates; may be negative.
  int window_top = 0, window_left = 0;
};

// Bounding-box crop, then symmetric zero padding up to the next multiple of
// (row_divisor, col_divisor).
CropResult nonzero_crop(const Image& raw, int row_divisor = 1, int col_divisor = 1);

// ---------------------------------------------------------------------------
// Storage
//
// Raw tensor file: magic "INRT", u32 version (1), u32 dtype (1 = float32),
// u32 ndim, u64 dims[ndim], then little-endian float32 values.
// Manifest: JSON {"format_version": 1, "samples": [{"id", "split", "height",
// "width", "source_channels", "target_channels", "source_files",
// "target_files"}], "synth_config"?: {...}}. Paths are relative to the
// manifest's directory.

inline constexpr std::uint32_t kManifestVersion = 1;
inline constexpr std::uint32_t kRawTensorVersion = 1;

void write_raw_tensor(const std::filesystem::path& path, const float* data, const std::vector<std::uint64_t>& dims);
std::vector<float> read_raw_tensor(const std::filesystem::path& path, std::vector<std::uint64_t>& dims);

void save_image_raw(const Image& image, const std::filesystem::path& path);  // dims [C, H, W]
Image load_image_raw(const std::filesystem::path& path);

struct SampleRecord {
  std::string id;
  std::string split;
  int height = 0, width = 0;
  int source_channels = 0, target_channels = 0;
  std::vector<std::string> source_files;
  std::vector<std::string> target_files;
};

// One file per channel, named <id>_source_c<k>.raw / <id>_target_c<k>.raw.
SampleRecord save_sample(const SamplePair& pair, const std::filesystem::path& dir);

struct DatasetManifest {
  std::uint32_t format_version = kManifestVersion;
  std::vector<SampleRecord> samples;
  std::optional<nlohmann::json> synth_config;
};

nlohmann::json to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j);

// Writes every sample plus manifest.json into `dir`; returns the manifest path.
std::filesystem::path save_dataset(const std::vector<SamplePair>& samples, const std::filesystem::path& dir,
                                   const std::optional<nlohmann::json>& synth_config = std::nullopt);
std::vector<SamplePair> load_dataset(const std::filesystem::path& manifest_path,
                                     const std::optional<std::string>& split = std::nullopt);

std::vector<SamplePair> filter_split(const std::vector<SamplePair>& samples, const std::string& split);

// 8-bit grayscale, linear map of [-1, 1] onto [0, 255]. Visual inspection only.
void export_png(const Image& image, const std::filesystem::path& path, int channel = 0);

}  // namespace inrgan
