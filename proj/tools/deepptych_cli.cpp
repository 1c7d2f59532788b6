// SPDX-License-Identifier: Apache-2.0
// Command-line front end: synth, train, simulate, recon, sweep, metrics.
// Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deepptych/deepptych.hpp"

namespace dp = deepptych;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct SynthArgs {
  std::size_t count = 200;
  std::size_t size = 32;
  std::uint64_t seed = 7;
  std::string out;
  std::string pgm_dir;
};

struct TrainArgs {
  std::string data;
  std::size_t synthetic = 0;
  std::uint64_t data_seed = 7;
  std::size_t size = 32;
  std::vector<std::size_t> arch;
  dp::TrainConfig cfg;
  std::string out;
};

struct SimulateArgs {
  std::string image;
  std::size_t grid = 3;
  double aperture = 9.0;
  double overlap = 0.65;
  bool full_aperture = false;
  double fraction = 1.0;
  double noise = 0.0;
  std::uint64_t seed = 1;
  std::string out;
};

struct ReconArgs {
  std::string measurements;
  std::string solver = "dp";
  std::string weights;
  std::string config;
  std::optional<std::size_t> steps;
  std::optional<double> learning_rate;
  std::optional<double> range_weight;
  std::optional<double> tv_weight;
  std::size_t iters = 100;
  std::uint64_t seed = 0;
  std::string out;
};

struct SweepArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> test_count;
};

struct MetricsArgs {
  std::string x;
  std::string ref;
};

void run_synth(const SynthArgs& a) {
  const auto images = dp::synth_dataset(a.count, a.size, a.seed);
  dp::save_ptyt(a.out, dp::to_tensor(images));
  if (!a.pgm_dir.empty()) {
    fs::create_directories(a.pgm_dir);
    for (std::size_t i = 0; i < images.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "img%05zu.pgm", i);
      dp::save_pgm(fs::path(a.pgm_dir) / name, images[i]);
    }
  }
  std::cout << "wrote " << images.size() << " images of " << a.size << "x" << a.size << " to " << a.out << '\n';
}

void run_train(TrainArgs a) {
  std::vector<dp::RealImage> data;
  if (!a.data.empty()) {
    data = dp::image_stack_from(dp::load_ptyt(a.data));
  } else if (a.synthetic > 0) {
    data = dp::synth_dataset(a.synthetic, a.size, a.data_seed);
  } else {
    throw dp::ConfigError("train needs --data or --synthetic");
  }
  const std::size_t n = data.front().size();
  if (a.arch.empty()) a.arch = {16, 128, n};
  if (a.arch.back() != n) throw dp::ConfigError("last --arch entry must equal the image pixel count");
  const auto r = dp::train_decoder(data, a.arch, a.cfg);
  dp::save_generator(a.out, r.decoder);
  std::printf("initial_mse %.6g final_mse %.6g\n", r.initial_loss, r.final_loss);
}

void run_simulate(const SimulateArgs& a) {
  const auto x = dp::real_image_from(dp::load_ptyt(a.image));
  const auto geometry = a.full_aperture ? dp::full_aperture_geometry(x.rows())
                                        : dp::build_camera_array(x.rows(), a.grid, a.aperture, a.overlap);
  const auto masks = dp::camera_masks(geometry, a.fraction, a.seed);
  const auto m = dp::measure(x, geometry, masks, a.noise, a.seed);
  dp::save_measurements(a.out, m);
  std::printf("cameras %zu subsampling_pct %.6f noise_std %g\n", m.cameras.size(), m.subsampling_percent(), a.noise);
}

void run_recon(const ReconArgs& a) {
  const auto m = dp::load_measurements(a.measurements);
  dp::SolverConfig cfg;
  if (!a.config.empty()) {
    std::ifstream is(a.config);
    if (!is) throw dp::ConfigError("cannot open " + a.config);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw dp::ConfigError(a.config + " is not valid JSON: " + e.what());
    }
    cfg = dp::solver_config_from_json(j);
  }
  if (a.steps) cfg.steps = *a.steps;
  if (a.learning_rate) cfg.learning_rate = *a.learning_rate;
  if (a.range_weight) cfg.range_weight = *a.range_weight;
  if (a.tv_weight) cfg.tv_weight = *a.tv_weight;
  cfg.seed = a.seed;

  const auto kind = dp::parse_solver(a.solver);
  dp::ReconResult r;
  if (kind == dp::SolverKind::iera) {
    r = dp::iera(m, m.geometry, a.iters, a.seed);
  } else {
    if (a.weights.empty()) throw dp::ConfigError("--weights is required for " + a.solver);
    const auto g = dp::load_generator(a.weights);
    if (kind == dp::SolverKind::dp) {
      r = dp::deep_ptych(m, g, cfg);
    } else {
      if (kind == dp::SolverKind::dp_plus) cfg.tv_weight = 0.0;
      if (kind == dp::SolverKind::dp_plus_tv && !a.tv_weight) cfg.tv_weight = 1e-4;
      r = dp::deep_ptych_plus(m, g, cfg);
    }
  }
  dp::save_recon(a.out, r);
  std::printf("steps_run %zu final_loss %.10g\n", r.steps_run, r.final_loss());
}

void run_sweep(const SweepArgs& a) {
  auto cfg = dp::load_experiment_config(a.config);
  if (a.seed) cfg.master_seed = *a.seed;
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (a.test_count) cfg.test_count = *a.test_count;
  const auto table = dp::run_experiment(cfg);
  std::size_t failed = 0;
  for (const auto& r : table.rows) failed += r.ok ? 0 : 1;
  std::cout << table.rows.size() << " rows (" << failed << " failed) written to "
            << (cfg.output_dir / "results.csv").string() << '\n';
}

void run_metrics(const MetricsArgs& a) {
  const auto x = dp::real_image_from(dp::load_ptyt(a.x));
  const auto ref = dp::real_image_from(dp::load_ptyt(a.ref));
  const auto r = dp::compare(x, ref);
  std::cout << "psnr_db " << dp::format_metric(r.psnr_db) << "\nssim " << dp::format_metric(r.ssim) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fourier ptychography reconstruction with generative priors"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate the synthetic shape dataset");
  s->add_option("--count", synth.count, "Number of images")->check(CLI::PositiveNumber);
  s->add_option("--size", synth.size, "Image side (power of two)");
  s->add_option("--seed", synth.seed, "Dataset seed");
  s->add_option("--out", synth.out, "Output PTYT stack")->required();
  s->add_option("--pgm-dir", synth.pgm_dir, "Also write one PGM per image here");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the decoder as an autoencoder");
  t->add_option("--data", train.data, "PTYT image stack");
  t->add_option("--synthetic", train.synthetic, "Train on this many synthetic images instead");
  t->add_option("--data-seed", train.data_seed, "Seed of the synthetic dataset");
  t->add_option("--size", train.size, "Synthetic image side");
  t->add_option("--arch", train.arch, "Decoder sizes from latent to pixels, e.g. 16 128 1024");
  t->add_option("--epochs", train.cfg.epochs);
  t->add_option("--batch-size", train.cfg.batch_size);
  t->add_option("--lr", train.cfg.learning_rate);
  t->add_option("--seed", train.cfg.seed);
  t->add_option("--out", train.out, "Output PTYG weights")->required();

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "Simulate camera-array magnitude measurements");
  m->add_option("--image", sim.image, "PTYT real image")->required();
  m->add_option("--grid", sim.grid);
  m->add_option("--aperture-diameter", sim.aperture);
  m->add_option("--overlap-frac", sim.overlap);
  m->add_flag("--full-aperture", sim.full_aperture, "Single camera with an all-pass pupil");
  m->add_option("--subsampling-fraction", sim.fraction);
  m->add_option("--noise-std", sim.noise);
  m->add_option("--seed", sim.seed, "Mask and noise master seed");
  m->add_option("--out", sim.out, "Output PTYM measurements")->required();

  ReconArgs rec;
  auto* r = app.add_subcommand("recon", "Reconstruct one image from measurements");
  r->add_option("--measurements", rec.measurements)->required();
  r->add_option("--solver", rec.solver, "iera, dp, dp_plus or dp_plus_tv");
  r->add_option("--weights", rec.weights, "PTYG generator weights");
  r->add_option("--config", rec.config, "JSON solver settings");
  r->add_option("--steps", rec.steps);
  r->add_option("--lr", rec.learning_rate);
  r->add_option("--range-weight", rec.range_weight);
  r->add_option("--tv-weight", rec.tv_weight);
  r->add_option("--iters", rec.iters, "IERA iterations");
  r->add_option("--seed", rec.seed);
  r->add_option("--out", rec.out, "Output stem for .ptyt and .csv")->required();

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "Run a full experiment from a JSON config");
  w->add_option("--config", sw.config)->required();
  w->add_option("--seed", sw.seed, "Override master_seed");
  w->add_option("--out", sw.out, "Override output_dir");
  w->add_option("--test-count", sw.test_count, "Override test_count");

  MetricsArgs met;
  auto* q = app.add_subcommand("metrics", "PSNR and SSIM of an image against a reference");
  q->add_option("x", met.x, "PTYT image")->required();
  q->add_option("ref", met.ref, "PTYT reference")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*s) run_synth(synth);
    if (*t) run_train(train);
    if (*m) run_simulate(sim);
    if (*r) run_recon(rec);
    if (*w) run_sweep(sw);
    if (*q) run_metrics(met);
  } catch (const dp::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const dp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
