// lransac: synthetic instances, estimation runs, trial batches and
// stopping-rule tables for Latent-RANSAC.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latent_ransac/latent_ransac.hpp"

namespace lr = latent_ransac;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRejected = 1;
constexpr int kExitInput = 2;

struct SeedFlag {
  std::optional<std::uint64_t> value;

  // Generates and reports a seed when none was given.
  std::uint64_t resolve() {
    if (!value) {
      value = std::random_device{}() | (std::uint64_t{std::random_device{}()} << 32);
      std::cerr << "seed: " << *value << '\n';
    }
    return *value;
  }
};

struct EngineFlags {
  std::string mode = "latent";
  double p0 = 0.99;
  std::optional<double> tolerance;
  double cell_factor = 1.8;
  std::size_t tables = 4;
  std::optional<unsigned> table_bits;
  std::uint64_t max_iterations = 5'000'000;
  std::optional<double> threshold;
  std::optional<double> rho;
  std::string detection = "1";
  std::size_t min_inliers = 0;
};

struct SpecFlags {
  std::string problem = "homography";
  std::size_t n_matches = 1000;
  double inlier_rate = 0.1;
  double sigma = 1.0;
  std::vector<double> canvas{640.0, 480.0};
  double box = 200.0;
  double xi = 100.0;
};

void add_engine_flags(CLI::App* app, EngineFlags& f, bool with_mode) {
  if (with_mode) {
    app->add_option("--mode", f.mode, "vanilla or latent")
        ->check(CLI::IsMember({"vanilla", "latent"}))
        ->capture_default_str();
  }
  app->add_option("--p0", f.p0, "target success probability")->capture_default_str();
  app->add_option("--t", f.tolerance, "latent collision tolerance");
  app->add_option("--c-factor", f.cell_factor, "grid cell size as a multiple of t")
      ->capture_default_str();
  app->add_option("--tables", f.tables, "number of hash tables")->capture_default_str();
  app->add_option("--table-bits", f.table_bits, "log2 slots per table (default 19)");
  app->add_option("--max-iters", f.max_iterations, "iteration cap")->capture_default_str();
  app->add_option("--threshold", f.threshold, "inlier residual threshold (default 3)");
  app->add_option("--rho", f.rho, "rigid: length units per radian (default 1/3.6)");
  app->add_option("--pr2", f.detection,
                  "grid detection probability used by the latent stopping rule, or 'analytic'")
      ->capture_default_str();
  app->add_option("--min-inliers", f.min_inliers, "inliers needed to accept the estimate")
      ->capture_default_str();
}

void add_spec_flags(CLI::App* app, SpecFlags& f) {
  app->add_option("--problem", f.problem, "homography or rigid3d")
      ->check(CLI::IsMember({"homography", "rigid3d"}))
      ->capture_default_str();
  app->add_option("--matches", f.n_matches, "number of matches")->capture_default_str();
  app->add_option("--inlier-rate", f.inlier_rate, "planted inlier rate")->capture_default_str();
  app->add_option("--sigma", f.sigma, "inlier noise per coordinate")->capture_default_str();
  app->add_option("--canvas", f.canvas, "homography canvas width and height")
      ->expected(2)
      ->capture_default_str();
  app->add_option("--box", f.box, "rigid: side of the source cube")->capture_default_str();
  app->add_option("--xi", f.xi, "rigid: translation bound")->capture_default_str();
}

lr::InstanceSpec make_spec(const SpecFlags& f, std::uint64_t seed) {
  lr::InstanceSpec s;
  s.problem = *lr::problem_from_string(f.problem);
  s.n_matches = f.n_matches;
  s.inlier_rate = f.inlier_rate;
  s.sigma = f.sigma;
  s.canvas_w = f.canvas.at(0);
  s.canvas_h = f.canvas.at(1);
  s.box = f.box;
  s.xi = f.xi;
  s.seed = seed;
  s.validate();
  return s;
}

lr::EstimatorConfig make_config(const EngineFlags& f, std::uint64_t seed) {
  lr::EstimatorConfig c;
  c.mode = *lr::mode_from_string(f.mode);
  c.p0 = f.p0;
  if (f.tolerance) c.tolerance = *f.tolerance;
  c.cell_factor = f.cell_factor;
  c.tables = f.tables;
  c.table_bits = f.table_bits;
  c.max_iterations = f.max_iterations;
  if (f.threshold) c.threshold = *f.threshold;
  if (f.rho) c.embedding.rho = *f.rho;
  if (f.detection == "analytic") {
    c.analytic_detection = true;
  } else {
    std::size_t used = 0;
    try {
      c.detection_probability = std::stod(f.detection, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != f.detection.size()) {
      throw lr::InvalidArgument("--pr2 must be a probability or 'analytic'");
    }
  }
  c.min_inliers_to_accept = f.min_inliers;
  c.seed = seed;
  return c;
}

// Writes to --out when given, otherwise stdout.
void emit(const std::optional<std::string>& out_path, const std::string& text) {
  if (!out_path) {
    std::cout << text;
    return;
  }
  std::ofstream out(*out_path);
  if (!out) throw lr::ResourceError("cannot write " + *out_path);
  out << text;
}

int cmd_synth(const SpecFlags& sf, SeedFlag& seed, const std::optional<std::string>& out_path) {
  if (!out_path) throw lr::InvalidArgument("synth needs --out");
  const lr::InstanceSpec spec = make_spec(sf, seed.resolve());
  const lr::Instance inst = lr::synthesize(spec);
  std::ostringstream matches;
  std::optional<std::array<double, 2>> canvas;
  if (spec.problem == lr::ProblemKind::kHomography) canvas = {spec.canvas_w, spec.canvas_h};
  lr::io::write_matches(matches, inst.matches, canvas);
  emit(out_path, matches.str());
  emit(lr::io::truth_path_for(*out_path).string(),
       lr::io::truth_to_json(inst, spec).dump(2) + "\n");
  return kExitOk;
}

template <typename Problem>
int run_on(const lr::io::MatchFile& file, const lr::EstimatorConfig& cfg,
           const std::optional<std::string>& out_path) {
  using MatchT = typename Problem::MatchType;
  const auto& matches = std::get<std::vector<MatchT>>(file.matches.matches);
  const auto r = lr::estimate<Problem>(std::span<const MatchT>(matches), cfg);
  emit(out_path, lr::io::result_to_json(r, cfg, Problem::kKind, matches.size()).dump(2) + "\n");
  return r.accepted ? kExitOk : kExitRejected;
}

int cmd_run(const std::string& in_path, const EngineFlags& ef, SeedFlag& seed,
            const std::optional<std::string>& out_path) {
  const lr::io::MatchFile file = lr::io::read_matches(std::filesystem::path(in_path));
  lr::EstimatorConfig cfg = make_config(ef, seed.resolve());
  if (cfg.mode == lr::Mode::kLatent && !ef.tolerance) {
    throw lr::InvalidArgument("latent mode needs --t (see the calibrate subcommand)");
  }
  if (file.canvas) {
    cfg.embedding.canvas_w = (*file.canvas)[0];
    cfg.embedding.canvas_h = (*file.canvas)[1];
  }
  if (file.matches.problem() == lr::ProblemKind::kHomography) {
    return run_on<lr::HomographyProblem>(file, cfg, out_path);
  }
  return run_on<lr::RigidProblem>(file, cfg, out_path);
}

int cmd_bench(const SpecFlags& sf, const EngineFlags& ef, SeedFlag& seed, std::size_t trials,
              const std::vector<std::string>& modes, std::size_t jobs, double quantile,
              const std::optional<std::string>& out_path) {
  const std::uint64_t master = seed.resolve();
  lr::BenchOptions opt;
  opt.spec = make_spec(sf, lr::derive_seed(master, 0));
  opt.config = make_config(ef, lr::derive_seed(master, 1));
  opt.trials = trials;
  opt.jobs = jobs;
  opt.tolerance = ef.tolerance;
  opt.calibration_quantile = quantile;
  opt.modes.clear();
  for (const auto& m : modes) opt.modes.push_back(*lr::mode_from_string(m));
  if (trials < 1) throw lr::InvalidArgument("need at least one trial");

  const auto rows = lr::run_bench(opt);
  std::ostringstream csv;
  lr::write_bench_csv(csv, rows, lr::aggregate(rows));
  emit(out_path, csv.str());
  return kExitOk;
}

int cmd_stopping_table(const std::vector<double>& p0s, const std::vector<int>& sample_sizes,
                       const std::vector<double>& rate_range,
                       const std::optional<std::string>& out_path) {
  const auto rows = lr::stopping_table(
      p0s, sample_sizes, lr::linear_grid(rate_range.at(0), rate_range.at(1), rate_range.at(2)));
  std::ostringstream csv;
  lr::write_stopping_csv(csv, rows);
  emit(out_path, csv.str());
  return kExitOk;
}

int cmd_calibrate(const SpecFlags& sf, SeedFlag& seed, double quantile, std::size_t samples,
                  std::optional<double> rho, const std::optional<std::string>& out_path) {
  const lr::InstanceSpec spec = make_spec(sf, seed.resolve());
  const double r = rho.value_or(lr::EmbeddingConfig{}.rho);
  const double t = lr::calibrate_tolerance(spec, quantile, r, samples);
  emit(out_path, lr::io::format_double(t) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-RANSAC estimation and benchmarking"};
  app.require_subcommand(1);

  SeedFlag seed;
  std::optional<std::string> out_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed.value, "master seed (generated and printed if absent)");
    sub->add_option("--out", out_path, "output file (default: stdout)");
  };

  SpecFlags spec_flags;
  EngineFlags engine_flags;

  auto* synth = app.add_subcommand("synth", "generate a planted instance and its truth sidecar");
  add_common(synth);
  add_spec_flags(synth, spec_flags);

  std::string in_path;
  auto* run = app.add_subcommand("run", "estimate a model from a match file (JSON result)");
  add_common(run);
  add_engine_flags(run, engine_flags, true);
  run->add_option("input", in_path, "match file")->required()->check(CLI::ExistingFile);

  std::size_t trials = 10;
  std::vector<std::string> modes{"vanilla", "latent"};
  std::size_t jobs = 1;
  double quantile = 0.95;
  auto* bench = app.add_subcommand("bench", "seeded trial batch on synthetic instances (CSV)");
  add_common(bench);
  add_spec_flags(bench, spec_flags);
  add_engine_flags(bench, engine_flags, false);
  bench->add_option("--trials", trials, "trials per mode")->capture_default_str();
  bench->add_option("--modes", modes, "modes to run")
      ->check(CLI::IsMember({"vanilla", "latent"}))
      ->capture_default_str();
  bench->add_option("--jobs", jobs, "concurrent trials")->capture_default_str();
  bench->add_option("--quantile", quantile, "calibration quantile when --t is absent")
      ->capture_default_str();

  std::vector<double> p0s{0.9, 0.99, 0.999};
  std::vector<int> sample_sizes{3, 4};
  std::vector<double> rate_range{0.01, 0.95, 0.01};
  auto* table = app.add_subcommand("stopping-table", "vanilla vs latent iteration counts (CSV)");
  table->add_option("--out", out_path, "output file (default: stdout)");
  table->add_option("--p0", p0s, "success probabilities")->capture_default_str();
  table->add_option("--sample-size", sample_sizes, "minimal sample sizes")->capture_default_str();
  table->add_option("--inlier-rates", rate_range, "inlier-rate grid: first last step")
      ->expected(3)
      ->capture_default_str();

  std::size_t samples = 400;
  std::optional<double> calib_rho;
  auto* calibrate = app.add_subcommand("calibrate", "recommend a latent tolerance t");
  add_common(calibrate);
  add_spec_flags(calibrate, spec_flags);
  calibrate->add_option("--quantile", quantile, "quantile of good-pair distances")
      ->capture_default_str();
  calibrate->add_option("--samples", samples, "good hypotheses to draw")->capture_default_str();
  calibrate->add_option("--rho", calib_rho, "rigid: length units per radian (default 1/3.6)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*synth) return cmd_synth(spec_flags, seed, out_path);
    if (*run) return cmd_run(in_path, engine_flags, seed, out_path);
    if (*bench) {
      return cmd_bench(spec_flags, engine_flags, seed, trials, modes, jobs, quantile, out_path);
    }
    if (*table) return cmd_stopping_table(p0s, sample_sizes, rate_range, out_path);
    if (*calibrate) return cmd_calibrate(spec_flags, seed, quantile, samples, calib_rho, out_path);
  } catch (const lr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
