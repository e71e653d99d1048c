#include "inrgan/probes.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace inrgan {

template <typename T>
Image probe_single_mlp(const WeightGrid<T>& weights, const EncodedCoords& enc, const Image& source,
                       const PatchMap& map, const MlpSpec& spec, int row, int col) {
  if (row < 0 || row >= map.spec().rows || col < 0 || col >= map.spec().cols) {
    throw std::out_of_range("probe_single_mlp: cell (" + std::to_string(row) + ", " + std::to_string(col) +
                            ") outside the " + std::to_string(map.spec().rows) + "x" +
                            std::to_string(map.spec().cols) + " grid");
  }
  WeightGrid<T> shared = weights;
  const int chosen = row * map.spec().cols + col;
  const std::int64_t p = weights.params_per_cell();
  for (int cell = 0; cell < map.cells(); ++cell) std::copy_n(weights.cell(chosen), p, shared.cell(cell));
  return local_mlp_eval(shared, enc, source, map, spec);
}

template Image probe_single_mlp<float>(const WeightGrid<float>&, const EncodedCoords&, const Image&, const PatchMap&,
                                       const MlpSpec&, int, int);
template Image probe_single_mlp<double>(const WeightGrid<double>&, const EncodedCoords&, const Image&,
                                        const PatchMap&, const MlpSpec&, int, int);

Image probe_single_mlp(const Model& model, const Image& source, int row, int col) {
  const GeneratorConfig& g = model.config.generator;
  const auto weights = hypernet_forward<float>(source, model.generator_params, g);
  const PatchMap map = partition(g.height, g.width, g.grid);
  const EncodedCoords enc = positional_encode(make_coord_grid(g.height, g.width, g.denominator), g.frequencies);
  return probe_single_mlp(weights, enc, source, map, g.mlp, row, col);
}

ProbeCells select_probe_cells(const Image& source, const PatchMap& map) {
  ProbeCells cells;
  double best_hi = -1.0, best_lo = std::numeric_limits<double>::infinity();
  for (int r = 0; r < map.spec().rows; ++r) {
    for (int c = 0; c < map.spec().cols; ++c) {
      double sum = 0.0, sq = 0.0;
      const auto [r0, r1] = map.row_range(r);
      const auto [c0, c1] = map.col_range(c);
      for (int ch = 0; ch < source.channels; ++ch) {
        for (int y = r0; y < r1; ++y) {
          for (int x = c0; x < c1; ++x) {
            const double v = source.at(ch, y, x);
            sum += v;
            sq += v * v;
          }
        }
      }
      const double n = static_cast<double>(source.channels) * map.pixels_per_patch();
      const double var = sq / n - (sum / n) * (sum / n);
      if (var > best_hi) {
        best_hi = var;
        cells.foreground = {r, c};
      }
      if (var < best_lo) {
        best_lo = var;
        cells.background = {r, c};
      }
    }
  }
  return cells;
}

double image_variance(const Image& image) {
  double sum = 0.0;
  for (float v : image.data) sum += v;
  const double mean = sum / static_cast<double>(image.data.size());
  double ss = 0.0;
  for (float v : image.data) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(image.data.size());
}

ProbeExperiment run_probe_experiment(const Model& model, const SamplePair& sample, std::optional<ProbeCells> cells) {
  const GeneratorConfig& g = model.config.generator;
  const auto [source, target] = center_crop(sample.source, sample.target, model.config);
  const PatchMap map = partition(g.height, g.width, g.grid);
  const EncodedCoords enc = positional_encode(make_coord_grid(g.height, g.width, g.denominator), g.frequencies);
  const auto weights = hypernet_forward<float>(source, model.generator_params, g);
  if (!cells) cells = select_probe_cells(source, map);

  ProbeExperiment ex;
  ex.full_output = local_mlp_eval(weights, enc, source, map, g.mlp);
  ex.full_variance = image_variance(ex.full_output);
  ex.full_mse = mse(ex.full_output, target);
  auto run = [&](std::pair<int, int> cell) {
    ProbeOutcome o;
    o.cell = cell;
    o.output = probe_single_mlp(weights, enc, source, map, g.mlp, cell.first, cell.second);
    o.variance = image_variance(o.output);
    o.mse = mse(o.output, target);
    return o;
  };
  ex.foreground = run(cells->foreground);
  ex.background = run(cells->background);
  return ex;
}

MlpSpec sweep_mlp_spec(PatchGridSpec grid, int input_width) {
  MlpSpec spec;
  spec.input_width = input_width;
  const bool global = grid.rows == 1 && grid.cols == 1;
  spec.layers = global ? 8 : 5;
  spec.hidden_width = global ? 128 : 64;
  return spec;
}

std::string SweepTable::to_csv() const {
  std::ostringstream os;
  os.precision(8);
  os << "grid,mse_e3,mse_e3_std,ssim_x100,ssim_x100_std,psnr,psnr_std,p_mse,p_ssim,p_psnr\n";
  for (const auto& row : rows) {
    const auto m = row.report.summary("mse");
    const auto s = row.report.summary("ssim");
    const auto p = row.report.summary("psnr");
    os << row.grid.rows << 'x' << row.grid.cols << ',' << m.mean * 1e3 << ',' << m.std * 1e3 << ','
       << s.mean * 100.0 << ',' << s.std * 100.0 << ',' << p.mean << ',' << p.std;
    for (const char* metric : {"mse", "ssim", "psnr"}) {
      os << ',';
      for (const auto& c : row.vs_global) {
        if (c.metric == metric && c.test) os << c.test->p_value;
      }
    }
    os << '\n';
  }
  return os.str();
}

nlohmann::json SweepTable::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json j = row.report.aggregate_json();
    j["grid"] = {row.grid.rows, row.grid.cols};
    if (!row.vs_global.empty()) j["wilcoxon_vs_1x1"] = inrgan::to_json(row.vs_global);
    arr.push_back(std::move(j));
  }
  return {{"rows", arr}};
}

SweepTable grid_sweep(const TrainConfig& base, const std::vector<PatchGridSpec>& grids,
                      const std::vector<SamplePair>& train_set, const std::vector<SamplePair>& test_set,
                      const std::optional<std::filesystem::path>& out_dir, const SweepCallback& on_epoch) {
  if (grids.empty()) throw std::invalid_argument("grid_sweep: no grids");
  if (test_set.empty()) throw std::invalid_argument("grid_sweep: empty test set");
  for (const auto& g : grids) {
    if (base.generator.height % g.rows != 0 || base.generator.width % g.cols != 0) {
      throw std::invalid_argument("grid_sweep: grid " + std::to_string(g.rows) + "x" + std::to_string(g.cols) +
                                  " does not divide the crop " + std::to_string(base.generator.height) + "x" +
                                  std::to_string(base.generator.width));
    }
  }
  SweepTable table;
  for (const auto& g : grids) {
    TrainConfig cfg = base;
    cfg.generator.grid = g;
    cfg.generator.mlp = sweep_mlp_spec(g, cfg.generator.feature_width());
    cfg.generator.mlp.leaky_slope = base.generator.mlp.leaky_slope;
    cfg.generator.mlp.output_width = base.generator.mlp.output_width;
    EpochCallback cb;
    if (on_epoch) cb = [&](const EpochRecord& r, double s) { on_epoch(g, r, s); };
    TrainResult result = train(cfg, train_set, test_set, cb);
    SweepRow row;
    row.grid = g;
    row.history = std::move(result.history);
    row.report = evaluate(model_from_checkpoint(result.checkpoint), test_set).report;
    if (out_dir) {
      const auto dir = *out_dir / ("grid_" + std::to_string(g.rows) + "x" + std::to_string(g.cols));
      std::filesystem::create_directories(dir);
      save_checkpoint(result.checkpoint, dir / "checkpoint.bin");
      std::ofstream(dir / "history.csv") << row.history.to_csv();
      std::ofstream(dir / "report.csv") << row.report.to_csv();
    }
    table.rows.push_back(std::move(row));
  }
  const SweepRow* global = nullptr;
  for (const auto& row : table.rows) {
    if (row.grid.rows == 1 && row.grid.cols == 1) global = &row;
  }
  if (global) {
    for (auto& row : table.rows) {
      if (&row != global) row.vs_global = compare_reports(row.report, global->report);
    }
  }
  return table;
}

}  // namespace inrgan
