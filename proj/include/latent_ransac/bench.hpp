#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "latent_ransac/estimator.hpp"
#include "latent_ransac/io.hpp"
#include "latent_ransac/synth.hpp"

namespace latent_ransac {

struct BenchOptions {
  InstanceSpec spec;
  EstimatorConfig config;  // mode and tolerance are overridden per trial
  std::size_t trials = 10;
  std::vector<Mode> modes{Mode::kVanilla, Mode::kLatent};
  std::size_t jobs = 1;
  std::optional<double> tolerance;  // unset: calibrated per instance
  double calibration_quantile = 0.95;
  std::size_t calibration_samples = 400;
  double success_ratio = 0.9;
};

struct TrialRow {
  Mode mode = Mode::kLatent;
  std::size_t trial = 0;
  bool success = false;
  std::size_t recovered = 0;  // planted inliers inside the returned inlier set
  std::size_t inliers = 0;
  std::size_t planted = 0;
  double tolerance = 0.0;
  std::uint64_t iterations = 0;
  std::uint64_t fits = 0;
  std::uint64_t collisions = 0;
  std::uint64_t verifications = 0;
  StageTiming timing;
  std::string stop_reason;
  std::string error;
};

struct TrialAggregate {
  Mode mode = Mode::kLatent;
  std::size_t trials = 0;
  double success_rate = 0.0;
  double mean_inliers = 0.0;
  double mean_iterations = 0.0;
  double p95_iterations = 0.0;
  double mean_fits = 0.0;
  double mean_collisions = 0.0;
  double mean_verifications = 0.0;
  StageTiming mean_timing;  // seconds
};

/// Nearest-rank percentile.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

namespace detail {

template <typename Problem>
TrialRow run_trial(const Instance& inst, const EstimatorConfig& cfg, double success_ratio) {
  using MatchT = typename Problem::MatchType;
  const auto& matches = std::get<std::vector<MatchT>>(inst.matches.matches);
  TrialRow row;
  row.planted = static_cast<std::size_t>(
      std::count(inst.inlier_mask.begin(), inst.inlier_mask.end(), true));
  const auto r = estimate<Problem>(std::span<const MatchT>(matches), cfg);
  row.inliers = r.best_inlier_count;
  for (std::size_t i = 0; i < r.best_inlier_mask.size(); ++i) {
    if (r.best_inlier_mask[i] && inst.inlier_mask[i]) ++row.recovered;
  }
  row.success = static_cast<double>(row.recovered) >= success_ratio * static_cast<double>(row.planted);
  row.iterations = r.iterations_used;
  row.fits = r.counters.fits;
  row.collisions = r.counters.collisions_reported;
  row.verifications = r.counters.verifications_run;
  row.timing = r.timing;
  row.stop_reason = std::string(to_string(r.stop_reason));
  return row;
}

}  // namespace detail

/// One trial: a fresh instance derived from (spec seed, trial) and a fresh
/// estimator seed derived from (config seed, trial). Never throws; failures
/// come back as unsuccessful rows.
inline TrialRow run_bench_trial(const BenchOptions& opt, Mode mode, std::size_t trial) {
  TrialRow row;
  row.mode = mode;
  row.trial = trial;
  try {
    InstanceSpec spec = opt.spec;
    spec.seed = derive_seed(opt.spec.seed, trial);
    const Instance inst = synthesize(spec);
    EstimatorConfig cfg = opt.config;
    cfg.mode = mode;
    cfg.seed = derive_seed(opt.config.seed, trial);
    cfg.embedding = spec.embedding(opt.config.embedding.rho);
    if (mode == Mode::kLatent) {
      cfg.tolerance = opt.tolerance ? *opt.tolerance
                                    : calibrate_tolerance(spec, opt.calibration_quantile,
                                                          cfg.embedding.rho,
                                                          opt.calibration_samples);
    }
    TrialRow r = spec.problem == ProblemKind::kHomography
                     ? detail::run_trial<HomographyProblem>(inst, cfg, opt.success_ratio)
                     : detail::run_trial<RigidProblem>(inst, cfg, opt.success_ratio);
    r.mode = mode;
    r.trial = trial;
    r.tolerance = mode == Mode::kLatent ? cfg.tolerance : 0.0;
    return r;
  } catch (const std::exception& e) {
    row.success = false;
    row.error = e.what();
    return row;
  }
}

/// Rows ordered by (mode, trial). Trials run on up to opt.jobs threads.
inline std::vector<TrialRow> run_bench(const BenchOptions& opt) {
  const std::size_t total = opt.modes.size() * opt.trials;
  std::vector<TrialRow> rows(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      rows[k] = run_bench_trial(opt, opt.modes[k / opt.trials], k % opt.trials);
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(opt.jobs, 1, std::max<std::size_t>(total, 1));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  return rows;
}

inline std::vector<TrialAggregate> aggregate(const std::vector<TrialRow>& rows) {
  std::vector<TrialAggregate> out;
  for (const auto& row : rows) {
    if (std::none_of(out.begin(), out.end(), [&](const auto& a) { return a.mode == row.mode; })) {
      TrialAggregate agg;
      agg.mode = row.mode;
      out.push_back(agg);
    }
  }
  for (auto& agg : out) {
    std::vector<double> iters;
    for (const auto& r : rows) {
      if (r.mode != agg.mode) continue;
      ++agg.trials;
      agg.success_rate += r.success ? 1.0 : 0.0;
      agg.mean_inliers += static_cast<double>(r.inliers);
      agg.mean_iterations += static_cast<double>(r.iterations);
      agg.mean_fits += static_cast<double>(r.fits);
      agg.mean_collisions += static_cast<double>(r.collisions);
      agg.mean_verifications += static_cast<double>(r.verifications);
      agg.mean_timing.sampling += r.timing.sampling;
      agg.mean_timing.fitting += r.timing.fitting;
      agg.mean_timing.hashing += r.timing.hashing;
      agg.mean_timing.verification += r.timing.verification;
      iters.push_back(static_cast<double>(r.iterations));
    }
    const double n = static_cast<double>(agg.trials);
    agg.success_rate /= n;
    agg.mean_inliers /= n;
    agg.mean_iterations /= n;
    agg.mean_fits /= n;
    agg.mean_collisions /= n;
    agg.mean_verifications /= n;
    agg.mean_timing.sampling /= n;
    agg.mean_timing.fitting /= n;
    agg.mean_timing.hashing /= n;
    agg.mean_timing.verification /= n;
    agg.p95_iterations = percentile(std::move(iters), 0.95);
  }
  return out;
}

inline constexpr const char* kBenchCsvHeader =
    "kind,mode,trial,success,recovered,inliers,planted,tolerance,iterations,iterations_p95,fits,"
    "collisions,verifications,sampling_ms,fitting_ms,hashing_ms,verification_ms,total_ms,"
    "stop_reason,error";

inline void write_bench_csv(std::ostream& out, const std::vector<TrialRow>& rows,
                            const std::vector<TrialAggregate>& aggs) {
  using io::format_double;
  auto ms = [](double s) { return format_double(s * 1e3); };
  out << kBenchCsvHeader << '\n';
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << "trial," << to_string(r.mode) << ',' << r.trial << ',' << (r.success ? 1 : 0) << ','
        << r.recovered << ',' << r.inliers << ',' << r.planted << ',' << format_double(r.tolerance)
        << ',' << r.iterations << ",," << r.fits << ',' << r.collisions << ',' << r.verifications
        << ',' << ms(r.timing.sampling) << ',' << ms(r.timing.fitting) << ','
        << ms(r.timing.hashing) << ',' << ms(r.timing.verification) << ',' << ms(r.timing.total())
        << ',' << r.stop_reason << ',' << err << '\n';
  }
  for (const auto& a : aggs) {
    out << "aggregate," << to_string(a.mode) << ',' << a.trials << ','
        << format_double(a.success_rate) << ",," << format_double(a.mean_inliers) << ",,,"
        << format_double(a.mean_iterations) << ',' << format_double(a.p95_iterations) << ','
        << format_double(a.mean_fits) << ',' << format_double(a.mean_collisions) << ','
        << format_double(a.mean_verifications) << ',' << ms(a.mean_timing.sampling) << ','
        << ms(a.mean_timing.fitting) << ',' << ms(a.mean_timing.hashing) << ','
        << ms(a.mean_timing.verification) << ',' << ms(a.mean_timing.total()) << ",,\n";
  }
}

// Stopping-rule table ------------------------------------------------------------

struct StoppingRow {
  double inlier_rate;
  int sample_size;
  double p0;
  std::uint64_t n_vanilla;
  std::uint64_t n_latent;

  double ratio() const { return static_cast<double>(n_latent) / static_cast<double>(n_vanilla); }
};

/// Rows for every (inlier rate, sample size, p0), assuming every good pair collides.
inline std::vector<StoppingRow> stopping_table(const std::vector<double>& p0s,
                                               const std::vector<int>& gammas,
                                               const std::vector<double>& omegas) {
  std::vector<StoppingRow> rows;
  for (const double w : omegas) {
    for (const int g : gammas) {
      for (const double p0 : p0s) {
        rows.push_back({w, g, p0, required_iterations_vanilla(p0, w, g),
                        required_iterations_latent(p0, w, g, 1.0)});
      }
    }
  }
  return rows;
}

/// {lo, lo + step, ...} up to hi, built from integer multiples to avoid drift.
inline std::vector<double> linear_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw InvalidArgument("invalid grid");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) {
    out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  return out;
}

inline void write_stopping_csv(std::ostream& out, const std::vector<StoppingRow>& rows) {
  out << "inlier_rate,sample_size,p0,n_vanilla,n_latent,ratio\n";
  for (const auto& r : rows) {
    out << io::format_double(r.inlier_rate) << ',' << r.sample_size << ','
        << io::format_double(r.p0) << ',' << r.n_vanilla << ',' << r.n_latent << ','
        << io::format_double(r.ratio()) << '\n';
  }
}

}  // namespace latent_ransac
