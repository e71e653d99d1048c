#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "inrgan/config.hpp"
#include "inrgan/diagnostics.hpp"
#include "inrgan/probes.hpp"

namespace fs = std::filesystem;
using namespace inrgan;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<bool> deterministic;
  std::optional<int> precision;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "Base seed");
  app->add_option("--out-dir", f.out_dir, "Run directory");
  app->add_option("--deterministic", f.deterministic, "Deterministic mode (true/false)");
  app->add_option("--precision", f.precision, "Training precision")->check(CLI::IsMember({32, 64}));
}

nlohmann::json common_overrides(const CommonFlags& f) {
  nlohmann::json o = nlohmann::json::object();
  if (f.seed) o["seed"] = *f.seed;
  if (f.out_dir) o["out_dir"] = *f.out_dir;
  if (f.deterministic) o["deterministic"] = *f.deterministic;
  if (f.precision) o["precision"] = *f.precision;
  return o;
}

fs::path prepare_run_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << to_json(cfg).dump(2) << '\n';
  return dir;
}

std::vector<SamplePair> load_samples(const RunConfig& cfg, const std::string& split) {
  std::vector<SamplePair> all;
  if (cfg.manifest.empty()) {
    all = synth_dataset(cfg.synth).samples;
  } else {
    all = load_dataset(cfg.manifest);
  }
  return filter_split(all, split);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void log_epoch(const EpochRecord& r, double secs) {
  std::printf("epoch %3d  d %.4f  g %.4f  rec %.5f  val mse %.3fe-3 ssim %.2f psnr %.2f  lr %.2e  sigma %.3f  %.1fs\n",
              r.epoch, r.d_loss, r.g_loss, r.rec_loss, r.val_mse * 1e3, r.val_ssim * 100.0, r.val_psnr, r.lr, r.sigma,
              secs);
  std::fflush(stdout);
}

std::vector<PatchGridSpec> parse_grids(const std::string& text) {
  std::vector<PatchGridSpec> grids;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos) throw ValidationError("'--grids' entries look like 8x8, got '" + item + "'");
    try {
      grids.push_back({std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1))});
    } catch (const std::exception&) {
      throw ValidationError("'--grids' entries look like 8x8, got '" + item + "'");
    }
  }
  return grids;
}

void save_prediction(const Image& img, const fs::path& dir, const std::string& stem) {
  save_image_raw(img, dir / (stem + ".raw"));
  export_png(img, dir / (stem + ".png"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypernetwork-conditioned local MLP image translation"};
  app.require_subcommand(1);

  // gen-data
  CommonFlags gen_flags;
  int previews = 4;
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic paired dataset");
  add_common(gen, gen_flags);
  gen->add_option("--previews", previews, "PNG previews to export per split");

  // train
  CommonFlags train_flags;
  std::string train_data;
  std::optional<int> epochs, batch;
  std::optional<double> lr;
  std::optional<std::string> grid;
  auto* trn = app.add_subcommand("train", "Train a model");
  add_common(trn, train_flags);
  trn->add_option("--data", train_data, "Dataset manifest (default: synthesize from config)");
  trn->add_option("--epochs", epochs, "Epoch count");
  trn->add_option("--lr", lr, "Initial learning rate");
  trn->add_option("--batch-size", batch, "Batch size");
  trn->add_option("--grid", grid, "Patch grid, e.g. 8x8");

  // translate / evaluate / probe share checkpoint + data flags
  std::string ckpt_path, data_path, split = "test";
  std::string out_dir = "translate_out";
  bool with_baseline = false;
  int sample_index = 0;
  std::vector<int> cell;
  auto* trans = app.add_subcommand("translate", "Translate sources with a trained model");
  auto* eval = app.add_subcommand("evaluate", "Score a trained model");
  auto* probe = app.add_subcommand("probe", "Forward a whole image through one cell's MLP");
  for (auto* sub : {trans, eval, probe}) {
    sub->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
    sub->add_option("--data", data_path, "Dataset manifest (default: synthesize from the checkpoint config)");
    sub->add_option("--split", split, "Dataset split");
    sub->add_option("--out-dir", out_dir, "Output directory");
  }
  eval->add_flag("--baseline", with_baseline, "Also score the copy-source baseline and run signed-rank tests");
  probe->add_option("--sample", sample_index, "Sample index within the split");
  probe->add_option("--cell", cell, "Cell row and column (default: automatic foreground/background)")->expected(2);

  // sweep
  CommonFlags sweep_flags;
  std::string sweep_data, grids_text;
  std::optional<int> sweep_epochs;
  auto* swp = app.add_subcommand("sweep", "Train one model per grid and tabulate");
  add_common(swp, sweep_flags);
  swp->add_option("--data", sweep_data, "Dataset manifest (default: synthesize from config)");
  swp->add_option("--grids", grids_text, "Comma-separated grids, e.g. 1x1,2x2,4x4,8x8");
  swp->add_option("--epochs", sweep_epochs, "Epoch count");

  // grad-check
  double gc_threshold = 1e-4;
  auto* gck = app.add_subcommand("grad-check", "Finite-difference check of every primitive and both networks");
  gck->add_option("--threshold", gc_threshold, "Relative error threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      const RunConfig cfg = resolve_config(gen_flags.config, [&] {
        auto o = common_overrides(gen_flags);
        if (gen_flags.seed) o["data"]["synth"]["seed"] = *gen_flags.seed;
        o.erase("seed");
        return o;
      }());
      const fs::path dir = prepare_run_dir(cfg);
      const auto ds = synth_dataset(cfg.synth);
      const auto manifest = save_dataset(ds.samples, dir, to_json(cfg.synth));
      int shown_train = 0, shown_test = 0;
      fs::create_directories(dir / "previews");
      for (const auto& s : ds.samples) {
        int& shown = s.split == "train" ? shown_train : shown_test;
        if (shown++ >= previews) continue;
        export_png(s.source, dir / "previews" / (s.id + "_source.png"));
        export_png(s.target, dir / "previews" / (s.id + "_target.png"));
      }
      std::printf("wrote %zu samples to %s\n", ds.samples.size(), manifest.string().c_str());
      return 0;
    }

    if (*trn) {
      auto o = common_overrides(train_flags);
      if (!train_data.empty()) o["data"]["manifest"] = train_data;
      if (epochs) o["train"]["epochs"] = *epochs;
      if (lr) o["train"]["lr"] = *lr;
      if (batch) o["train"]["batch_size"] = *batch;
      if (grid) {
        const auto g = parse_grids(*grid);
        if (g.size() != 1) throw ValidationError("'--grid' takes a single MxN value");
        o["model"]["grid"] = {g[0].rows, g[0].cols};
      }
      const RunConfig cfg = resolve_config(train_flags.config, o);
      const fs::path dir = prepare_run_dir(cfg);
      const auto train_set = load_samples(cfg, cfg.train_split);
      const auto val_set = load_samples(cfg, cfg.val_split);
      const auto result = train(cfg.train, train_set, val_set, log_epoch);
      save_checkpoint(result.checkpoint, dir / "checkpoint.bin");
      write_text(dir / "history.csv", result.history.to_csv());
      write_text(dir / "history.json", result.history.to_json().dump(2) + "\n");
      if (!val_set.empty()) {
        const Model model = model_from_checkpoint(result.checkpoint);
        const auto ev = evaluate(model, val_set);
        write_text(dir / "report.csv", ev.report.to_csv());
        write_text(dir / "report.json", ev.report.aggregate_json().dump(2) + "\n");
      }
      std::printf("checkpoint: %s\n", (dir / "checkpoint.bin").string().c_str());
      return 0;
    }

    if (*trans || *eval || *probe) {
      const Model model = model_from_checkpoint(load_checkpoint(ckpt_path));
      std::vector<SamplePair> samples;
      if (data_path.empty()) {
        SynthConfig sc;
        sc.height = model.config.generator.height;
        sc.width = model.config.generator.width;
        samples = filter_split(synth_dataset(sc).samples, split);
      } else {
        samples = load_dataset(data_path, split);
      }
      if (samples.empty()) throw ValidationError("'--split' " + split + " selects no samples");
      fs::create_directories(out_dir);

      if (*trans) {
        std::vector<Image> sources;
        for (const auto& s : samples) sources.push_back(center_crop(s.source, s.target, model.config).first);
        const auto preds = translate(model, sources, model.config.batch_size);
        for (std::size_t i = 0; i < preds.size(); ++i) save_prediction(preds[i], out_dir, samples[i].id + "_pred");
        std::printf("translated %zu samples into %s\n", preds.size(), out_dir.c_str());
        return 0;
      }
      if (*eval) {
        std::vector<Image> baseline;
        if (with_baseline) baseline = copy_source_predictions(model.config, samples);
        const auto ev = evaluate(model, samples, with_baseline ? &baseline : nullptr);
        write_text(fs::path(out_dir) / "report.csv", ev.report.to_csv());
        nlohmann::json j = {{"model", ev.report.aggregate_json()}};
        if (ev.baseline) {
          write_text(fs::path(out_dir) / "baseline.csv", ev.baseline->to_csv());
          j["copy_source"] = ev.baseline->aggregate_json();
          j["wilcoxon"] = to_json(ev.comparisons);
        }
        write_text(fs::path(out_dir) / "report.json", j.dump(2) + "\n");
        std::cout << j.dump(2) << '\n';
        return 0;
      }
      if (sample_index < 0 || sample_index >= static_cast<int>(samples.size())) {
        throw ValidationError("'--sample' out of range");
      }
      const SamplePair& s = samples[static_cast<std::size_t>(sample_index)];
      std::optional<ProbeCells> cells;
      if (!cell.empty()) cells = ProbeCells{{cell[0], cell[1]}, {cell[0], cell[1]}};
      const auto ex = run_probe_experiment(model, s, cells);
      save_prediction(ex.full_output, out_dir, s.id + "_full");
      save_prediction(ex.foreground.output, out_dir, s.id + "_cell_" + std::to_string(ex.foreground.cell.first) + "_" +
                                                         std::to_string(ex.foreground.cell.second));
      save_prediction(ex.background.output, out_dir, s.id + "_cell_" + std::to_string(ex.background.cell.first) + "_" +
                                                         std::to_string(ex.background.cell.second));
      const nlohmann::json j = {
          {"sample", s.id},
          {"full", {{"variance", ex.full_variance}, {"mse", ex.full_mse}}},
          {"foreground",
           {{"cell", {ex.foreground.cell.first, ex.foreground.cell.second}},
            {"variance", ex.foreground.variance},
            {"mse", ex.foreground.mse}}},
          {"background",
           {{"cell", {ex.background.cell.first, ex.background.cell.second}},
            {"variance", ex.background.variance},
            {"mse", ex.background.mse}}}};
      write_text(fs::path(out_dir) / "probe.json", j.dump(2) + "\n");
      std::cout << j.dump(2) << '\n';
      return 0;
    }

    if (*swp) {
      auto o = common_overrides(sweep_flags);
      if (!sweep_data.empty()) o["data"]["manifest"] = sweep_data;
      if (sweep_epochs) o["train"]["epochs"] = *sweep_epochs;
      if (!grids_text.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& g : parse_grids(grids_text)) arr.push_back({g.rows, g.cols});
        o["sweep"]["grids"] = arr;
      }
      const RunConfig cfg = resolve_config(sweep_flags.config, o);
      const fs::path dir = prepare_run_dir(cfg);
      const auto table = grid_sweep(cfg.train, cfg.sweep_grids, load_samples(cfg, cfg.train_split),
                                    load_samples(cfg, cfg.val_split), dir,
                                    [](PatchGridSpec g, const EpochRecord& r, double s) {
                                      std::printf("[%dx%d] ", g.rows, g.cols);
                                      log_epoch(r, s);
                                    });
      write_text(dir / "sweep.csv", table.to_csv());
      write_text(dir / "sweep.json", table.to_json().dump(2) + "\n");
      std::cout << table.to_csv();
      return 0;
    }

    if (*gck) {
      GradCheckOptions opts;
      opts.threshold = gc_threshold;
      bool ok = true;
      auto report = [&](const std::vector<NamedGradCheck>& checks) {
        for (const auto& c : checks) {
          std::printf("%-22s %s  max_rel_err=%.3e  checked=%lld  kinks=%lld\n", c.name.c_str(),
                      c.report.passed() ? "PASS" : "FAIL", c.report.max_rel_error(),
                      static_cast<long long>(c.report.checked()), static_cast<long long>(c.report.kinks_skipped()));
          ok = ok && c.report.passed();
        }
      };
      report(primitive_grad_checks(opts));
      report(network_grad_checks(opts));
      return ok ? 0 : 2;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
