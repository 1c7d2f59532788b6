// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "deepptych/dataset.hpp"
#include "deepptych/error.hpp"
#include "deepptych/generator.hpp"
#include "deepptych/metrics.hpp"
#include "deepptych/optics.hpp"
#include "deepptych/rng.hpp"
#include "deepptych/solvers.hpp"

namespace deepptych {

enum class SolverKind { iera, dp, dp_plus, dp_plus_tv };

inline std::string_view to_string(SolverKind k) noexcept {
  switch (k) {
    case SolverKind::iera: return "iera";
    case SolverKind::dp: return "dp";
    case SolverKind::dp_plus: return "dp_plus";
    case SolverKind::dp_plus_tv: return "dp_plus_tv";
  }
  return "?";
}

inline SolverKind parse_solver(std::string_view name) {
  for (auto k : {SolverKind::iera, SolverKind::dp, SolverKind::dp_plus, SolverKind::dp_plus_tv}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown solver '" + std::string(name) + "' (expected iera, dp, dp_plus or dp_plus_tv)");
}

struct SweepPoint {
  double subsampling_fraction = 1.0;
  double noise_std = 0.0;
};

struct ExperimentConfig {
  enum class Source { synthetic, idx };
  Source source = Source::synthetic;
  std::filesystem::path idx_path;
  std::uint64_t dataset_seed = 7;
  std::size_t test_offset = 200;  // first test image index; earlier ones are the training split

  std::size_t image_size = 32;
  std::size_t grid = 3;
  double aperture_diameter = 9.0;
  double overlap_frac = 0.65;

  std::vector<SweepPoint> sweep;
  std::vector<SolverKind> solvers;
  SolverConfig solver;             // shared by dp and the dp_plus variants
  double tv_weight = 1e-4;         // used by dp_plus_tv only
  std::size_t iera_iters = 100;

  std::filesystem::path generator_path;
  bool in_range = true;            // replace targets by their projection onto the generator range
  std::size_t projection_steps = 500;
  double projection_rate = 0.05;

  std::size_t test_count = 10;
  std::uint64_t master_seed = 1;
  std::filesystem::path output_dir = "deepptych_out";
  bool write_images = true;

  [[nodiscard]] bool needs_generator() const {
    for (auto s : solvers) {
      if (s != SolverKind::iera) return true;
    }
    return in_range;
  }

  void validate() const {
    if (sweep.empty()) throw ConfigError("sweep must contain at least one point");
    if (solvers.empty()) throw ConfigError("at least one solver must be enabled");
    if (test_count < 1) throw ConfigError("test_count must be >= 1");
    if (!is_power_of_two(image_size)) throw ConfigError("image_size must be a power of two");
    for (const auto& p : sweep) {
      if (!(p.subsampling_fraction > 0.0 && p.subsampling_fraction <= 1.0)) {
        throw ConfigError("subsampling_fraction must lie in (0, 1]");
      }
      if (!(p.noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
    }
    if (iera_iters < 1) throw ConfigError("iera_iters must be >= 1");
    if (!(tv_weight >= 0.0)) throw ConfigError("tv_weight must be >= 0");
    if (source == Source::idx && image_size != 32) throw ConfigError("IDX data is padded to 32x32; set image_size 32");
    if (needs_generator()) {
      if (generator_path.empty()) throw ConfigError("generator_path is required for dp, dp_plus and in_range targets");
      if (!std::filesystem::exists(generator_path)) {
        throw ConfigError("generator weights not found: " + generator_path.string());
      }
    }
    solver.validate();
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline SolverConfig solver_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(j,
                              {"steps", "learning_rate", "beta1", "beta2", "epsilon", "optimizer", "range_weight",
                               "tv_weight", "tv_epsilon", "x_steps", "z_steps", "seed"},
                              "solver");
  SolverConfig c;
  detail::read_key(j, "steps", c.steps);
  detail::read_key(j, "learning_rate", c.learning_rate);
  detail::read_key(j, "beta1", c.beta1);
  detail::read_key(j, "beta2", c.beta2);
  detail::read_key(j, "epsilon", c.epsilon);
  detail::read_key(j, "range_weight", c.range_weight);
  detail::read_key(j, "tv_weight", c.tv_weight);
  detail::read_key(j, "tv_epsilon", c.tv_epsilon);
  detail::read_key(j, "x_steps", c.x_steps);
  detail::read_key(j, "z_steps", c.z_steps);
  detail::read_key(j, "seed", c.seed);
  if (j.contains("optimizer")) {
    std::string name;
    detail::read_key(j, "optimizer", name);
    if (name == "adam") {
      c.optimizer = OptimizerKind::adam;
    } else if (name == "gd") {
      c.optimizer = OptimizerKind::gradient_descent;
    } else {
      throw ConfigError("optimizer must be 'adam' or 'gd'");
    }
  }
  return c;
}

inline nlohmann::json to_json(const SolverConfig& c) {
  return {{"steps", c.steps},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"optimizer", c.optimizer == OptimizerKind::adam ? "adam" : "gd"},
          {"range_weight", c.range_weight},
          {"tv_weight", c.tv_weight},
          {"tv_epsilon", c.tv_epsilon},
          {"x_steps", c.x_steps},
          {"z_steps", c.z_steps},
          {"seed", c.seed}};
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(j,
                              {"dataset", "image_size", "geometry", "sweep", "solvers", "solver", "tv_weight",
                               "iera_iters", "generator_path", "in_range", "projection_steps", "projection_rate",
                               "test_count", "master_seed", "output_dir", "write_images"},
                              "experiment config");
  ExperimentConfig c;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::reject_unknown_keys(d, {"kind", "idx_path", "seed", "test_offset"}, "dataset");
    std::string kind = "synthetic";
    detail::read_key(d, "kind", kind);
    if (kind == "synthetic") {
      c.source = ExperimentConfig::Source::synthetic;
    } else if (kind == "idx") {
      c.source = ExperimentConfig::Source::idx;
      std::string path;
      detail::read_key(d, "idx_path", path);
      if (path.empty()) throw ConfigError("dataset.idx_path is required for kind 'idx'");
      c.idx_path = path;
    } else {
      throw ConfigError("dataset.kind must be 'synthetic' or 'idx'");
    }
    detail::read_key(d, "seed", c.dataset_seed);
    detail::read_key(d, "test_offset", c.test_offset);
  }
  detail::read_key(j, "image_size", c.image_size);
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    detail::reject_unknown_keys(g, {"grid", "aperture_diameter", "overlap_frac"}, "geometry");
    detail::read_key(g, "grid", c.grid);
    detail::read_key(g, "aperture_diameter", c.aperture_diameter);
    detail::read_key(g, "overlap_frac", c.overlap_frac);
  }
  if (j.contains("sweep")) {
    if (!j.at("sweep").is_array()) throw ConfigError("sweep must be an array");
    for (const auto& p : j.at("sweep")) {
      detail::reject_unknown_keys(p, {"subsampling_fraction", "noise_std"}, "sweep point");
      SweepPoint sp;
      detail::read_key(p, "subsampling_fraction", sp.subsampling_fraction);
      detail::read_key(p, "noise_std", sp.noise_std);
      c.sweep.push_back(sp);
    }
  }
  if (j.contains("solvers")) {
    if (!j.at("solvers").is_array()) throw ConfigError("solvers must be an array");
    for (const auto& s : j.at("solvers")) {
      if (!s.is_string()) throw ConfigError("solver names must be strings");
      c.solvers.push_back(parse_solver(s.get<std::string>()));
    }
  }
  if (j.contains("solver")) c.solver = solver_config_from_json(j.at("solver"));
  detail::read_key(j, "tv_weight", c.tv_weight);
  detail::read_key(j, "iera_iters", c.iera_iters);
  std::string path;
  detail::read_key(j, "generator_path", path);
  c.generator_path = path;
  detail::read_key(j, "in_range", c.in_range);
  detail::read_key(j, "projection_steps", c.projection_steps);
  detail::read_key(j, "projection_rate", c.projection_rate);
  detail::read_key(j, "test_count", c.test_count);
  detail::read_key(j, "master_seed", c.master_seed);
  std::string out = c.output_dir.string();
  detail::read_key(j, "output_dir", out);
  c.output_dir = out;
  detail::read_key(j, "write_images", c.write_images);
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return experiment_config_from_json(j);
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json sweep = nlohmann::json::array();
  for (const auto& p : c.sweep) sweep.push_back({{"subsampling_fraction", p.subsampling_fraction}, {"noise_std", p.noise_std}});
  nlohmann::json solvers = nlohmann::json::array();
  for (auto s : c.solvers) solvers.push_back(std::string(to_string(s)));
  nlohmann::json dataset = {{"kind", c.source == ExperimentConfig::Source::synthetic ? "synthetic" : "idx"},
                            {"seed", c.dataset_seed},
                            {"test_offset", c.test_offset}};
  if (c.source == ExperimentConfig::Source::idx) dataset["idx_path"] = c.idx_path.string();
  return {{"dataset", dataset},
          {"image_size", c.image_size},
          {"geometry", {{"grid", c.grid}, {"aperture_diameter", c.aperture_diameter}, {"overlap_frac", c.overlap_frac}}},
          {"sweep", sweep},
          {"solvers", solvers},
          {"solver", to_json(c.solver)},
          {"tv_weight", c.tv_weight},
          {"iera_iters", c.iera_iters},
          {"generator_path", c.generator_path.string()},
          {"in_range", c.in_range},
          {"projection_steps", c.projection_steps},
          {"projection_rate", c.projection_rate},
          {"test_count", c.test_count},
          {"master_seed", c.master_seed},
          {"output_dir", c.output_dir.string()},
          {"write_images", c.write_images}};
}

struct ResultRow {
  SolverKind solver = SolverKind::dp;
  std::size_t point = 0;
  double subsampling_pct = 0.0;
  double noise_pct = 0.0;
  std::size_t image_index = 0;  // index into the source dataset
  double psnr_db = 0.0;
  double ssim = 0.0;
  double wall_seconds = 0.0;
  bool ok = true;
  std::string error;
};

struct ResultsTable {
  std::vector<ResultRow> rows;

  /// Mean PSNR of successful rows for one solver at one sweep point.
  [[nodiscard]] double mean_psnr(SolverKind solver, std::size_t point) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (r.ok && r.solver == solver && r.point == point) {
        sum += r.psnr_db;
        ++n;
      }
    }
    if (n == 0) throw NumericError("no successful rows for " + std::string(to_string(solver)));
    return sum / static_cast<double>(n);
  }
};

/// Seeds of one (sweep point, image) cell; every stream is a pure function
/// of the master seed and the cell coordinates.
struct CellSeeds {
  std::uint64_t masks = 0;
  std::uint64_t noise = 0;
  std::uint64_t solver = 0;
};

inline CellSeeds cell_seeds(std::uint64_t master, std::size_t point, std::size_t image) {
  return {derive_seed(master, point, image, 1), derive_seed(master, point, image, 2),
          derive_seed(master, point, image, 3)};
}

/// Seed for projecting test image `image` into the generator range; shared
/// across sweep points so every point sees the same targets.
inline std::uint64_t target_seed(std::uint64_t master, std::size_t image) {
  return derive_seed(master, image, 0, 4);
}

inline std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string format_pct(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_results_csv(std::ostream& os, const ResultsTable& t) {
  os << "solver,subsampling_pct,noise_pct,image_index,psnr_db,ssim,status\n";
  for (const auto& r : t.rows) {
    os << to_string(r.solver) << ',' << format_pct(r.subsampling_pct) << ',' << format_pct(r.noise_pct) << ','
       << r.image_index << ',';
    if (r.ok) {
      os << format_metric(r.psnr_db) << ',' << format_metric(r.ssim) << ",ok\n";
    } else {
      os << ",,failed\n";
    }
  }
}

inline void write_timings_csv(std::ostream& os, const ResultsTable& t) {
  os << "solver,subsampling_pct,noise_pct,image_index,wall_seconds\n";
  for (const auto& r : t.rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", r.wall_seconds);
    os << to_string(r.solver) << ',' << format_pct(r.subsampling_pct) << ',' << format_pct(r.noise_pct) << ','
       << r.image_index << ',' << buf << '\n';
  }
}

/// Test images of the configured source: indices test_offset .. +test_count.
inline std::vector<RealImage> load_test_images(const ExperimentConfig& cfg) {
  std::vector<RealImage> all;
  if (cfg.source == ExperimentConfig::Source::synthetic) {
    all = synth_dataset(cfg.test_offset + cfg.test_count, cfg.image_size, cfg.dataset_seed);
  } else {
    all = load_idx(cfg.idx_path, cfg.test_offset + cfg.test_count);
    if (all.size() < cfg.test_offset + cfg.test_count) {
      throw ConfigError("IDX file holds " + std::to_string(all.size()) + " images, need " +
                        std::to_string(cfg.test_offset + cfg.test_count));
    }
  }
  return {all.begin() + static_cast<std::ptrdiff_t>(cfg.test_offset), all.end()};
}

/// Percentage of kept samples recounted from the dense masks; must agree
/// with the kept-index lists.
inline double recount_subsampling_percent(const Measurements& m) {
  std::size_t kept = 0;
  for (const auto& cam : m.cameras) {
    for (bool b : cam.mask.dense()) kept += b ? 1 : 0;
  }
  const double n = static_cast<double>(m.geometry.image_size * m.geometry.image_size);
  return static_cast<double>(kept) * 100.0 / (n * static_cast<double>(m.cameras.size()));
}

inline ReconResult run_solver(SolverKind kind, const Measurements& m, const GeneratorWeights* g,
                              const ExperimentConfig& cfg, std::uint64_t seed) {
  SolverConfig sc = cfg.solver;
  sc.seed = seed;
  switch (kind) {
    case SolverKind::iera:
      return iera(m, m.geometry, cfg.iera_iters, seed);
    case SolverKind::dp:
      return deep_ptych(m, *g, sc);
    case SolverKind::dp_plus:
      sc.tv_weight = 0.0;
      return deep_ptych_plus(m, *g, sc);
    case SolverKind::dp_plus_tv:
      sc.tv_weight = cfg.tv_weight;
      return deep_ptych_plus(m, *g, sc);
  }
  throw ConfigError("unhandled solver");
}

/// Runs every enabled solver on every (sweep point, test image) cell and
/// writes results.csv, timings.csv, manifest.json and, if enabled, per-image
/// PTYT/PGM reconstructions under cfg.output_dir. Solver failures become
/// rows with status "failed"; the run continues.
inline ResultsTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto geometry = build_camera_array(cfg.image_size, cfg.grid, cfg.aperture_diameter, cfg.overlap_frac);
  std::optional<GeneratorWeights> generator;
  if (cfg.needs_generator()) {
    generator = load_generator(cfg.generator_path);
    if (generator->output_side != cfg.image_size) {
      throw ConfigError("generator emits " + std::to_string(generator->output_side) + "^2 images, image_size is " +
                        std::to_string(cfg.image_size));
    }
  }

  auto targets = load_test_images(cfg);
  if (targets.front().rows() != cfg.image_size) throw ConfigError("test images do not match image_size");
  if (cfg.in_range) {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const auto z = project_to_range(*generator, targets[i], cfg.projection_steps, cfg.projection_rate,
                                      target_seed(cfg.master_seed, i));
      targets[i] = generate(*generator, z);
    }
  }

  const auto& out = cfg.output_dir;
  std::filesystem::create_directories(out);
  if (cfg.write_images) std::filesystem::create_directories(out / "images");

  ResultsTable table;
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t p = 0; p < cfg.sweep.size(); ++p) {
    const auto& point = cfg.sweep[p];
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const auto seeds = cell_seeds(cfg.master_seed, p, i);
      const auto masks = camera_masks(geometry, point.subsampling_fraction, seeds.masks);
      const auto m = measure(targets[i], geometry, masks, point.noise_std, seeds.noise);
      const double pct = m.subsampling_percent();
      if (pct != recount_subsampling_percent(m)) throw NumericError("subsampling accounting mismatch");
      const std::size_t image_index = cfg.test_offset + i;
      cells.push_back({{"point", p},
                       {"image_index", image_index},
                       {"mask_seed", seeds.masks},
                       {"noise_seed", seeds.noise},
                       {"solver_seed", seeds.solver},
                       {"subsampling_pct", pct}});
      char stem[64];
      std::snprintf(stem, sizeof stem, "p%02zu_i%04zu", p, image_index);
      if (cfg.write_images) {
        save_ptyt(out / "images" / (std::string(stem) + "_target.ptyt"), to_tensor(targets[i]));
        save_pgm(out / "images" / (std::string(stem) + "_target.pgm"), targets[i]);
      }
      for (auto kind : cfg.solvers) {
        ResultRow row;
        row.solver = kind;
        row.point = p;
        row.subsampling_pct = pct;
        row.noise_pct = point.noise_std * 100.0;
        row.image_index = image_index;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          const auto r = run_solver(kind, m, generator ? &*generator : nullptr, cfg, seeds.solver);
          const auto metrics = compare(r.x_hat, targets[i]);
          row.psnr_db = metrics.psnr_db;
          row.ssim = metrics.ssim;
          if (cfg.write_images) {
            const auto base = out / "images" / (std::string(stem) + "_" + std::string(to_string(kind)));
            save_ptyt(std::filesystem::path(base).replace_extension(".ptyt"), to_tensor(r.x_hat));
            save_pgm(std::filesystem::path(base).replace_extension(".pgm"), r.x_hat);
          }
        } catch (const Error& e) {
          row.ok = false;
          row.error = e.what();
        }
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        table.rows.push_back(std::move(row));
      }
    }
  }

  {
    std::ofstream os(out / "results.csv", std::ios::binary);
    if (!os) throw FormatError("cannot write " + (out / "results.csv").string());
    write_results_csv(os, table);
  }
  {
    std::ofstream os(out / "timings.csv", std::ios::binary);
    if (!os) throw FormatError("cannot write " + (out / "timings.csv").string());
    write_timings_csv(os, table);
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& r : table.rows) {
    if (!r.ok) {
      failures.push_back({{"solver", std::string(to_string(r.solver))},
                          {"point", r.point},
                          {"image_index", r.image_index},
                          {"error", r.error}});
    }
  }
  const nlohmann::json manifest = {{"config", to_json(cfg)},
                                   {"mask_policy", "independent mask per camera, seed = mask_seed + camera + 1"},
                                   {"metric_range", "[0, 1], peak 1"},
                                   {"test_image_indices_start", cfg.test_offset},
                                   {"cells", cells},
                                   {"failures", failures}};
  std::ofstream os(out / "manifest.json", std::ios::binary);
  if (!os) throw FormatError("cannot write " + (out / "manifest.json").string());
  os << manifest.dump(2) << '\n';
  return table;
}

}  // namespace deepptych
