#pragma once

// Population dynamics for the random recursion, in log space.
//
// A pool holds M samples of log R_n. One level maps the pool to M offspring,
// offspring k pairing two distinct parents drawn from the counter stream keyed
// by (seed, replica, n+1, k). Nothing depends on evaluation order, so results
// are bit-identical for any thread count.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "hpin/model.hpp"
#include "hpin/rng.hpp"
#include "hpin/stats.hpp"

namespace hpin {

struct McConfig {
  std::size_t M = 100'000;
  int replicas = 8;
  std::uint64_t seed = 1;
  unsigned threads = 1;  // execution only; never changes results
};

/// Draws omega from the disorder law exponentially tilted by e^{-lambda omega}
/// (lambda = 0 gives the law itself; for the Gaussian the tilt is a shift by -lambda).
class OmegaSampler {
 public:
  OmegaSampler(const DisorderSpec& disorder, double lambda = 0.0);
  double operator()(CounterStream& stream) const;

 private:
  bool gaussian_;
  double shift_ = 0.0;
  std::vector<double> values_;
  std::vector<double> cumulative_;
};

struct LogPool {
  int n = 0;
  std::vector<double> logs;
  std::uint64_t seed = 0;
  std::uint32_t replica_id = 0;

  std::size_t size() const { return logs.size(); }
};

LogPool pool_init(const ModelParams& params, const DisorderSpec& disorder, std::size_t M,
                  std::uint64_t seed, std::uint32_t replica_id, double tilt_lambda = 0.0,
                  unsigned threads = 1);

LogPool pool_step(const LogPool& pool, double B, unsigned threads = 1);

/// Mean of log R over the pool.
double pool_mean_log(const LogPool& pool);
/// log of the mean of R (stable log-sum-exp).
double pool_log_mean(const LogPool& pool);
/// Empirical E ([R-1]^+)^gamma.
double pool_frac_moment(const LogPool& pool, double gamma);
/// Empirical P(|R - 1| > tol).
double tail_prob(const LogPool& pool, double tol);

/// One pass over a pool: every statistic the estimators need at one level.
struct PoolSummary {
  double mean_log = 0.0;
  double log_mean = 0.0;
  double tail = 0.0;
  std::vector<double> frac;  // one per requested gamma
};

PoolSummary summarize(const LogPool& pool, std::span<const double> gammas, double tail_tol,
                      unsigned threads = 1);

/// Independent replica pools advanced in lockstep.
class Ensemble {
 public:
  Ensemble(const ModelParams& params, const DisorderSpec& disorder, const McConfig& config,
           double tilt_lambda = 0.0);

  void step();
  int level() const { return level_; }
  double B() const { return params_.B; }
  const std::vector<LogPool>& pools() const { return pools_; }
  const McConfig& config() const { return config_; }
  /// Offspring generated so far, summed over replicas.
  std::uint64_t pool_steps() const { return pool_steps_; }

  /// Per-replica summaries; log_mean is NaN unless with_log_mean is set.
  std::vector<PoolSummary> summarize(std::span<const double> gammas, double tail_tol,
                                     bool with_log_mean = false) const;

  /// Per replica, the fraction of entries with log R >= t for each sorted threshold t.
  std::vector<std::vector<double>> exceedance(std::span<const double> log_thresholds) const;

 private:
  ModelParams params_;
  McConfig config_;
  std::vector<LogPool> pools_;
  int level_ = 0;
  std::uint64_t pool_steps_ = 0;
};

struct FreeEnergyEstimate {
  int N = 0;
  double f = 0.0;  // replica mean of 2^{-N} <log R_N>
  double std_error = 0.0;
  double lower = 0.0;  // f - 2^{-N} log B
  double upper = 0.0;  // f + 2^{-N} log K_B
};

FreeEnergyEstimate free_energy_estimate(int N, double B, std::span<const PoolSummary> replicas);

/// f_N with its sandwich bounds; needs replicas >= 2.
FreeEnergyEstimate run_free_energy(const ModelParams& params, const DisorderSpec& disorder,
                                   const McConfig& config, int N);

/// Levels 0..N of the same run.
std::vector<FreeEnergyEstimate> run_trajectory(const ModelParams& params,
                                               const DisorderSpec& disorder,
                                               const McConfig& config, int N);

struct FracMomentEstimate {
  double gamma = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  double ci_upper = 0.0;  // statistical, not a rigorous bound
  double confidence = 0.99;
};

FracMomentEstimate frac_moment_estimate(std::span<const LogPool> replicas, double gamma,
                                        double confidence = 0.99);
FracMomentEstimate frac_moment_estimate(std::span<const PoolSummary> replicas, std::size_t index,
                                        double gamma, double confidence = 0.99);

void write_trajectory_csv(std::ostream& os, std::span<const FreeEnergyEstimate> rows);
void write_histogram_csv(std::ostream& os, const LogPool& pool, int bins);

}  // namespace hpin
