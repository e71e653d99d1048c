#pragma once

// Ablations on trained models: single-MLP full-image forwarding and the
// M x N grid sweep.

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "inrgan/training.hpp"

namespace inrgan {

// Every pixel goes through cell (row, col)'s MLP with its own global encoding.
// Throws std::out_of_range when the cell lies outside the grid.
template <typename T>
Image probe_single_mlp(const WeightGrid<T>& weights, const EncodedCoords& enc, const Image& source,
                       const PatchMap& map, const MlpSpec& spec, int row, int col);
Image probe_single_mlp(const Model& model, const Image& source, int row, int col);

struct ProbeCells {
  std::pair<int, int> foreground;  // maximal source variance inside the patch
  std::pair<int, int> background;  // minimal source variance inside the patch
};
ProbeCells select_probe_cells(const Image& source, const PatchMap& map);

// Population variance of all values of an image.
double image_variance(const Image& image);

struct ProbeOutcome {
  std::pair<int, int> cell;
  Image output;
  double variance = 0.0;
  double mse = 0.0;  // whole image against the target
};

struct ProbeExperiment {
  Image full_output;
  double full_variance = 0.0;
  double full_mse = 0.0;
  ProbeOutcome foreground;
  ProbeOutcome background;
};

// Cells default to select_probe_cells on the (center-cropped) source.
ProbeExperiment run_probe_experiment(const Model& model, const SamplePair& sample,
                                     std::optional<ProbeCells> cells = std::nullopt);

// MLP used for a grid in the sweep: 8 layers of width 128 for the single global
// MLP, 5 layers of width 64 otherwise.
MlpSpec sweep_mlp_spec(PatchGridSpec grid, int input_width);

struct SweepRow {
  PatchGridSpec grid;
  MetricsReport report;
  RunHistory history;
  std::vector<MetricComparison> vs_global;  // empty for the 1x1 row or when it is absent
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::string to_csv() const;  // grid, mse_e3, ssim_x100, psnr, p-values against 1x1
  nlohmann::json to_json() const;
};

using SweepCallback = std::function<void(PatchGridSpec, const EpochRecord&, double)>;

// Trains one model per grid with the base config's seed and budget. When
// `out_dir` is given each run's checkpoint and history land in
// out_dir/grid_<M>x<N>/.
SweepTable grid_sweep(const TrainConfig& base, const std::vector<PatchGridSpec>& grids,
                      const std::vector<SamplePair>& train_set, const std::vector<SamplePair>& test_set,
                      const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                      const SweepCallback& on_epoch = {});

}  // namespace inrgan
