// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "deepptych/dataset.hpp"
#include "deepptych/experiment.hpp"
#include "test_support.hpp"

using namespace deepptych;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("deepptych_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_be32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  os.write(b, 4);
}

std::string idx_bytes(std::uint32_t magic, std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                      unsigned char fill, std::size_t pixels) {
  std::ostringstream os;
  write_be32(os, magic);
  write_be32(os, count);
  write_be32(os, rows);
  write_be32(os, cols);
  os << std::string(pixels, static_cast<char>(fill));
  return os.str();
}

GeneratorWeights linear_prior(std::size_t side, std::size_t k, std::uint64_t seed) {
  SplitMix64 rng(seed);
  return make_linear_generator(side, k, test_support::random_vector(side * side * k, rng, 0.05),
                               std::vector<double>(side * side, 0.5));
}

ExperimentConfig small_experiment(const fs::path& dir, const fs::path& weights) {
  ExperimentConfig cfg;
  cfg.image_size = 16;
  cfg.grid = 2;
  cfg.aperture_diameter = 7;
  cfg.overlap_frac = 0.65;
  cfg.sweep = {{0.05, 0.0}, {0.2, 0.01}, {1.0, 0.0}};
  cfg.solvers = {SolverKind::iera, SolverKind::dp};
  cfg.solver.steps = 30;
  cfg.iera_iters = 5;
  cfg.generator_path = weights;
  cfg.test_count = 10;
  cfg.test_offset = 0;
  cfg.master_seed = 11;
  cfg.output_dir = dir;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DEEPPTYCH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(SynthDataset, DeterministicAndPrefixStable) {
  EXPECT_EQ(synth_dataset(1, 16, 5), synth_dataset(1, 16, 5));
  const auto longer = synth_dataset(10, 16, 5);
  const auto shorter = synth_dataset(4, 16, 5);
  for (std::size_t i = 0; i < shorter.size(); ++i) EXPECT_EQ(shorter[i], longer[i]);
  EXPECT_NE(synth_dataset(1, 16, 5), synth_dataset(1, 16, 6));
}

TEST(SynthDataset, RangeAndCoverageOverThousandImages) {
  const auto images = synth_dataset(1000, 16, 9);
  double covered = 0.0;
  for (const auto& img : images) {
    for (double v : img) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      covered += v > 0.0 ? 1.0 : 0.0;
    }
  }
  const double coverage = covered / (1000.0 * 256.0);
  EXPECT_GE(coverage, 0.05);
  EXPECT_LE(coverage, 0.60);
}

TEST(SynthDataset, RejectsBadArguments) {
  EXPECT_THROW(synth_dataset(1, 12, 0), ConfigError);
  EXPECT_THROW(synth_dataset(0, 16, 0), ConfigError);
}

TEST(LoadIdx, AllWhiteDigitIsPaddedWithZeroRing) {
  std::istringstream is(idx_bytes(0x803, 1, 28, 28, 255, 28 * 28));
  const auto images = read_idx(is);
  ASSERT_EQ(images.size(), 1u);
  const auto& img = images.front();
  ASSERT_EQ(img.rows(), 32u);
  for (std::size_t r = 0; r < 32; ++r) {
    for (std::size_t c = 0; c < 32; ++c) {
      const bool inside = r >= 2 && r < 30 && c >= 2 && c < 30;
      EXPECT_EQ(img(r, c), inside ? 1.0 : 0.0);
    }
  }
}

TEST(LoadIdx, MaxCountLimitsImages) {
  std::istringstream is(idx_bytes(0x803, 3, 28, 28, 10, 3 * 28 * 28));
  EXPECT_EQ(read_idx(is, 2).size(), 2u);
}

TEST(LoadIdx, MalformedFilesAreFormatErrors) {
  std::istringstream empty("");
  EXPECT_THROW(read_idx(empty), FormatError);
  std::istringstream magic(idx_bytes(0x801, 1, 28, 28, 0, 28 * 28));
  EXPECT_THROW(read_idx(magic), FormatError);
  std::istringstream truncated(idx_bytes(0x803, 2, 28, 28, 0, 28 * 28 + 10));
  EXPECT_THROW(read_idx(truncated), FormatError);
  std::istringstream dims(idx_bytes(0x803, 1, 32, 32, 0, 32 * 32));
  EXPECT_THROW(read_idx(dims), FormatError);
}

TEST(LoadIdx, MissingFileIsFormatError) { EXPECT_THROW(load_idx("/nonexistent/idx-file"), FormatError); }

TEST(SavePgm, WritesBinaryHeaderAndClampedPixels) {
  TempDir dir("pgm");
  RealImage img(2, 3, 0.5);
  img(0, 0) = -1.0;
  img(1, 2) = 2.0;
  save_pgm(dir.path() / "a.pgm", img);
  const auto bytes = read_file(dir.path() / "a.pgm");
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  ASSERT_EQ(bytes.size(), header.size() + 6);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size()]), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 1]), 128);
  EXPECT_EQ(static_cast<unsigned char>(bytes.back()), 255);
}

TEST(ExperimentConfig, ParsesAndRoundTrips) {
  TempDir dir("cfg");
  save_generator(dir.path() / "g.ptyg", linear_prior(16, 4, 1));
  const auto j = nlohmann::json::parse(R"({
    "dataset": {"kind": "synthetic", "seed": 3, "test_offset": 5},
    "image_size": 16,
    "geometry": {"grid": 2, "aperture_diameter": 7, "overlap_frac": 0.65},
    "sweep": [{"subsampling_fraction": 0.1, "noise_std": 0.01}],
    "solvers": ["iera", "dp_plus_tv"],
    "solver": {"steps": 12, "optimizer": "gd", "range_weight": 0.5},
    "generator_path": ")" + (dir.path() / "g.ptyg").string() + R"(",
    "test_count": 2,
    "master_seed": 99
  })");
  const auto cfg = experiment_config_from_json(j);
  EXPECT_EQ(cfg.dataset_seed, 3u);
  EXPECT_EQ(cfg.test_offset, 5u);
  EXPECT_EQ(cfg.grid, 2u);
  ASSERT_EQ(cfg.sweep.size(), 1u);
  EXPECT_EQ(cfg.sweep[0].noise_std, 0.01);
  ASSERT_EQ(cfg.solvers.size(), 2u);
  EXPECT_EQ(cfg.solvers[1], SolverKind::dp_plus_tv);
  EXPECT_EQ(cfg.solver.steps, 12u);
  EXPECT_EQ(cfg.solver.optimizer, OptimizerKind::gradient_descent);
  EXPECT_EQ(cfg.master_seed, 99u);
  EXPECT_NO_THROW(cfg.validate());
  const auto again = experiment_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(again), to_json(cfg));
}

TEST(ExperimentConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(experiment_config_from_json(nlohmann::json::parse(R"({"imagesize": 16})")), ConfigError);
  EXPECT_THROW(experiment_config_from_json(nlohmann::json::parse(R"({"geometry": {"grid": 2, "gird": 3}})")),
               ConfigError);
  EXPECT_THROW(experiment_config_from_json(nlohmann::json::parse(R"({"solver": {"stpes": 3}})")), ConfigError);
  EXPECT_THROW(experiment_config_from_json(nlohmann::json::parse(R"({"solvers": ["dp", "copram"]})")), ConfigError);
  EXPECT_THROW(experiment_config_from_json(nlohmann::json::parse(R"({"test_count": "ten"})")), ConfigError);
}

TEST(ExperimentConfig, ValidateEnforcesInvariants) {
  ExperimentConfig cfg;
  cfg.solvers = {SolverKind::iera};
  cfg.in_range = false;
  EXPECT_THROW(cfg.validate(), ConfigError);  // empty sweep
  cfg.sweep = {{0.5, 0.0}};
  EXPECT_NO_THROW(cfg.validate());
  cfg.test_count = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.test_count = 1;
  cfg.solvers = {SolverKind::dp};
  cfg.generator_path = "/nonexistent/weights.ptyg";
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(RunExperiment, RowCountSchemaAndAccounting) {
  TempDir dir("sweep_rows");
  save_generator(dir.path() / "g.ptyg", linear_prior(16, 10, 2));
  const auto cfg = small_experiment(dir.path() / "out", dir.path() / "g.ptyg");
  const auto table = run_experiment(cfg);
  ASSERT_EQ(table.rows.size(), 2u * 3u * 10u);
  const auto csv = read_file(cfg.output_dir / "results.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "solver,subsampling_pct,noise_pct,image_index,psnr_db,ssim,status");
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    ++count;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
  }
  EXPECT_EQ(count, 60u);
  // Kept samples per camera are round(f n); the reported percentage is
  // |kept| * 100 / (n L).
  for (const auto& row : table.rows) {
    const double f = cfg.sweep[row.point].subsampling_fraction;
    const double kept = std::llround(f * 256.0);
    EXPECT_DOUBLE_EQ(row.subsampling_pct, kept * 4.0 * 100.0 / (256.0 * 4.0));
    EXPECT_TRUE(row.ok) << row.error;
    EXPECT_TRUE(std::isfinite(row.ssim));
  }
  EXPECT_TRUE(fs::exists(cfg.output_dir / "timings.csv"));
  EXPECT_TRUE(fs::exists(cfg.output_dir / "images" / "p00_i0000_dp.ptyt"));
  EXPECT_TRUE(fs::exists(cfg.output_dir / "images" / "p02_i0009_iera.pgm"));
  const auto manifest = nlohmann::json::parse(read_file(cfg.output_dir / "manifest.json"));
  EXPECT_EQ(manifest.at("cells").size(), 30u);
  EXPECT_EQ(manifest.at("config").at("master_seed"), 11u);
}

TEST(RunExperiment, RepeatRunIsByteIdentical) {
  TempDir dir("sweep_repeat");
  save_generator(dir.path() / "g.ptyg", linear_prior(16, 10, 3));
  auto cfg = small_experiment(dir.path() / "a", dir.path() / "g.ptyg");
  cfg.test_count = 3;
  run_experiment(cfg);
  cfg.output_dir = dir.path() / "b";
  run_experiment(cfg);
  EXPECT_EQ(read_file(dir.path() / "a" / "results.csv"), read_file(dir.path() / "b" / "results.csv"));
  EXPECT_EQ(read_file(dir.path() / "a" / "manifest.json").size(),
            read_file(dir.path() / "b" / "manifest.json").size());
  cfg.master_seed = 12;
  cfg.output_dir = dir.path() / "c";
  run_experiment(cfg);
  EXPECT_NE(read_file(dir.path() / "a" / "results.csv"), read_file(dir.path() / "c" / "results.csv"));
}

TEST(RunExperiment, DeepPtychRecoversInRangeTargetAtFullSampling) {
  TempDir dir("sweep_oracle");
  save_generator(dir.path() / "g.ptyg", linear_prior(16, 10, 4));
  auto cfg = small_experiment(dir.path() / "out", dir.path() / "g.ptyg");
  cfg.sweep = {{1.0, 0.0}};
  cfg.solvers = {SolverKind::dp};
  cfg.solver.steps = 2000;
  cfg.test_count = 1;
  cfg.write_images = false;
  const auto table = run_experiment(cfg);
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_GT(table.rows.front().psnr_db, 40.0);
}

TEST(ResultsCsv, InfinityAndFailedRows) {
  ResultsTable t;
  ResultRow ok;
  ok.solver = SolverKind::dp;
  ok.subsampling_pct = 100.0;
  ok.psnr_db = std::numeric_limits<double>::infinity();
  ok.ssim = 1.0;
  ResultRow bad;
  bad.solver = SolverKind::iera;
  bad.ok = false;
  bad.image_index = 3;
  t.rows = {ok, bad};
  std::ostringstream os;
  write_results_csv(os, t);
  EXPECT_EQ(os.str(),
            "solver,subsampling_pct,noise_pct,image_index,psnr_db,ssim,status\n"
            "dp,100.000000,0.000000,0,inf,1,ok\n"
            "iera,0.000000,0.000000,3,,,failed\n");
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  const auto d = dir.path().string();
  EXPECT_EQ(run_cli("synth --count 3 --size 16 --out " + d + "/s.ptyt"), 0);
  EXPECT_TRUE(fs::exists(dir.path() / "s.ptyt"));
  EXPECT_EQ(run_cli("synth --size 16"), 2);  // missing --out
  EXPECT_EQ(run_cli("frobnicate"), 2);

  std::ofstream(dir.path() / "bad.json") << R"({"sweep": [], "unexpected": true})";
  EXPECT_EQ(run_cli("sweep --config " + d + "/bad.json"), 2);
  EXPECT_EQ(run_cli("sweep --config " + d + "/missing.json"), 2);

  // Non-finite measurements make the solver abort with a numeric error.
  save_generator(dir.path() / "g.ptyg", linear_prior(16, 4, 5));
  const auto geo = build_camera_array(16, 2, 7, 0.65);
  auto m = measure(RealImage(16, 16, 0.4), geo, camera_masks(geo, 1.0, 1), 0.0, 2);
  m.cameras[1].magnitudes[0] = std::numeric_limits<double>::quiet_NaN();
  save_measurements(dir.path() / "nan.ptym", m);
  EXPECT_EQ(run_cli("recon --measurements " + d + "/nan.ptym --solver dp --weights " + d + "/g.ptyg --out " + d +
                    "/r"),
            3);

  save_ptyt(dir.path() / "x.ptyt", to_tensor(RealImage(16, 16, 0.4)));
  EXPECT_EQ(run_cli("simulate --image " + d + "/x.ptyt --grid 2 --aperture-diameter 7 --subsampling-fraction 0.5 "
                    "--out " + d + "/m.ptym"),
            0);
  EXPECT_EQ(run_cli("recon --measurements " + d + "/m.ptym --solver iera --iters 3 --out " + d + "/ie"), 0);
  EXPECT_TRUE(fs::exists(dir.path() / "ie.ptyt"));
  EXPECT_TRUE(fs::exists(dir.path() / "ie.csv"));
  EXPECT_EQ(run_cli("metrics " + d + "/ie.ptyt " + d + "/x.ptyt"), 0);
  EXPECT_EQ(run_cli("simulate --image " + d + "/x.ptyt --grid 6 --aperture-diameter 7 --out " + d + "/g.ptym"), 2);
}
