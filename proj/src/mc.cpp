#include "hpin/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "hpin/parallel.hpp"

namespace hpin {

namespace {

constexpr std::size_t kChunk = 8192;

std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

// log((e^a e^b + B - 1)/B). Below the crossover the result is written as
// log((B-1)/B) plus a non-negative term, so the floor holds exactly.
inline double pair_log(double a, double b, double log_bm1, double log_b, double log_floor) {
  const double s = a + b;
  if (s > log_bm1) return (s - log_b) + std::log1p(std::exp(log_bm1 - s));
  return log_floor + std::log1p(std::exp(s - log_bm1));
}

struct ChunkPartial {
  double sum_log = 0.0;
  double lse_max = -std::numeric_limits<double>::infinity();
  double lse_sum = 0.0;
  std::size_t tail = 0;
  std::vector<double> frac;
};

// Evenly spaced gammas let e^{gamma_k t} be built from two exponentials.
double common_spacing(std::span<const double> gammas) {
  if (gammas.size() < 3) return 0.0;
  const double d = gammas[1] - gammas[0];
  if (!(d > 0.0)) return 0.0;
  for (std::size_t g = 2; g < gammas.size(); ++g) {
    if (std::abs((gammas[g] - gammas[g - 1]) - d) > 1e-12) return 0.0;
  }
  return d;
}

ChunkPartial summarize_range(std::span<const double> logs, std::span<const double> gammas,
                             double tail_hi, double tail_lo, bool with_log_mean) {
  ChunkPartial part;
  part.frac.assign(gammas.size(), 0.0);
  const double spacing = common_spacing(gammas);
  double mx = -std::numeric_limits<double>::infinity();
  if (with_log_mean) {
    for (double l : logs) mx = std::max(mx, l);
    part.lse_max = mx;
  }
  for (double l : logs) {
    part.sum_log += l;
    if (with_log_mean) part.lse_sum += std::exp(l - mx);
    if (l > tail_hi || l < tail_lo) ++part.tail;
    if (l > 0.0) {
      const double t = l > 40.0 ? l : l + std::log(-std::expm1(-l));  // log(e^l - 1)
      if (spacing > 0.0) {
        double term = std::exp(gammas[0] * t);
        const double ratio = std::exp(spacing * t);
        for (std::size_t g = 0; g < gammas.size(); ++g) {
          part.frac[g] += term;
          term *= ratio;
        }
      } else {
        for (std::size_t g = 0; g < gammas.size(); ++g) part.frac[g] += std::exp(gammas[g] * t);
      }
    }
  }
  return part;
}

PoolSummary combine(const std::vector<ChunkPartial>& parts, std::size_t n) {
  PoolSummary out;
  const double inv = 1.0 / static_cast<double>(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& p : parts) mx = std::max(mx, p.lse_max);
  double sum_log = 0.0, lse = 0.0;
  std::size_t tail = 0;
  out.frac.assign(parts.empty() ? 0 : parts.front().frac.size(), 0.0);
  for (const auto& p : parts) {
    sum_log += p.sum_log;
    lse += p.lse_sum * std::exp(p.lse_max - mx);
    tail += p.tail;
    for (std::size_t g = 0; g < out.frac.size(); ++g) out.frac[g] += p.frac[g];
  }
  out.mean_log = sum_log * inv;
  out.log_mean = std::isfinite(mx) ? mx + std::log(lse * inv) : std::numeric_limits<double>::quiet_NaN();
  out.tail = static_cast<double>(tail) * inv;
  for (double& f : out.frac) f *= inv;
  return out;
}

void tail_thresholds(double tol, double& hi, double& lo) {
  if (!(tol > 0.0)) throw DomainError("tail tolerance must be positive");
  hi = std::log1p(tol);
  lo = tol < 1.0 ? std::log1p(-tol) : -std::numeric_limits<double>::infinity();
}

void fill_initial(std::span<double> out, std::size_t offset, const ModelParams& params,
                  const DisorderSpec& disorder, const OmegaSampler& sampler, std::uint64_t seed,
                  std::uint32_t replica) {
  if (params.beta == 0.0) {
    std::fill(out.begin(), out.end(), params.h);
    return;
  }
  const double shift = params.h - log_mgf(disorder, params.beta);
  for (std::size_t k = 0; k < out.size(); ++k) {
    CounterStream stream(seed, replica, 0, static_cast<std::uint32_t>(offset + k));
    out[k] = params.beta * sampler(stream) + shift;
  }
}

void fill_offspring(std::span<double> out, std::size_t offset, const LogPool& parent, double B) {
  const double log_bm1 = std::log(B - 1.0);
  const double log_b = std::log(B);
  const double log_floor = std::log((B - 1.0) / B);
  const std::uint64_t M = parent.logs.size();
  const auto level = static_cast<std::uint32_t>(parent.n + 1);
  const double* src = parent.logs.data();
  // Parents are drawn a batch ahead and prefetched: large pools are latency bound.
  constexpr std::size_t kBatch = 32;
  std::uint32_t pi[kBatch], pj[kBatch];
  for (std::size_t k0 = 0; k0 < out.size(); k0 += kBatch) {
    const std::size_t len = std::min(kBatch, out.size() - k0);
    for (std::size_t b = 0; b < len; ++b) {
      // Same draws as CounterStream::next_below twice on this key.
      const auto words = philox_pair(parent.seed, parent.replica_id, level,
                                     static_cast<std::uint32_t>(offset + k0 + b));
      const std::uint64_t i = scale_below(words[0], M);
      std::uint64_t j = scale_below(words[1], M - 1);
      if (j >= i) ++j;
      pi[b] = static_cast<std::uint32_t>(i);
      pj[b] = static_cast<std::uint32_t>(j);
      __builtin_prefetch(src + i);
      __builtin_prefetch(src + j);
    }
    for (std::size_t b = 0; b < len; ++b) {
      out[k0 + b] = pair_log(src[pi[b]], src[pj[b]], log_bm1, log_b, log_floor);
    }
  }
}

void check_pool_size(std::size_t M) {
  if (M < 2) throw DomainError("pool size M must be at least 2");
  if (M > std::numeric_limits<std::uint32_t>::max()) throw DomainError("pool size too large");
}

}  // namespace

// ---------------------------------------------------------------------------

OmegaSampler::OmegaSampler(const DisorderSpec& disorder, double lambda)
    : gaussian_(disorder.kind() == DisorderSpec::Kind::StdGaussian) {
  if (gaussian_) {
    shift_ = -lambda;
    return;
  }
  // Exponentially tilted atom weights p_i e^{-lambda v_i} / M(-lambda).
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& a : disorder.atoms()) mx = std::max(mx, -lambda * a.value);
  double total = 0.0;
  std::vector<double> w;
  for (const auto& a : disorder.atoms()) {
    w.push_back(a.prob * std::exp(-lambda * a.value - mx));
    total += w.back();
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i] / total;
    values_.push_back(disorder.atoms()[i].value);
    cumulative_.push_back(acc);
  }
  cumulative_.back() = 1.0;
}

double OmegaSampler::operator()(CounterStream& stream) const {
  if (gaussian_) return stream.next_normal() + shift_;
  const double u = stream.next_uniform();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return values_[static_cast<std::size_t>(std::min<std::ptrdiff_t>(
      it - cumulative_.begin(), static_cast<std::ptrdiff_t>(values_.size()) - 1))];
}

LogPool pool_init(const ModelParams& params, const DisorderSpec& disorder, std::size_t M,
                  std::uint64_t seed, std::uint32_t replica_id, double tilt_lambda,
                  unsigned threads) {
  require_growth(params.B);
  check_pool_size(M);
  LogPool pool;
  pool.n = 0;
  pool.seed = seed;
  pool.replica_id = replica_id;
  pool.logs.resize(M);
  const OmegaSampler sampler(disorder, tilt_lambda);
  parallel_for(chunk_count(M), threads, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t len = std::min(kChunk, M - begin);
    fill_initial(std::span(pool.logs).subspan(begin, len), begin, params, disorder, sampler, seed,
                 replica_id);
  });
  return pool;
}

LogPool pool_step(const LogPool& pool, double B, unsigned threads) {
  require_growth(B);
  check_pool_size(pool.size());
  LogPool next;
  next.n = pool.n + 1;
  next.seed = pool.seed;
  next.replica_id = pool.replica_id;
  next.logs.resize(pool.size());
  const std::size_t M = pool.size();
  parallel_for(chunk_count(M), threads, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t len = std::min(kChunk, M - begin);
    fill_offspring(std::span(next.logs).subspan(begin, len), begin, pool, B);
  });
  return next;
}

PoolSummary summarize(const LogPool& pool, std::span<const double> gammas, double tail_tol,
                      unsigned threads) {
  double hi, lo;
  tail_thresholds(tail_tol, hi, lo);
  const std::size_t M = pool.size();
  std::vector<ChunkPartial> parts(chunk_count(M));
  parallel_for(parts.size(), threads, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t len = std::min(kChunk, M - begin);
    parts[c] = summarize_range(std::span(pool.logs).subspan(begin, len), gammas, hi, lo, true);
  });
  return combine(parts, M);
}

double pool_mean_log(const LogPool& pool) { return summarize(pool, {}, 1.0).mean_log; }

double pool_log_mean(const LogPool& pool) { return summarize(pool, {}, 1.0).log_mean; }

double pool_frac_moment(const LogPool& pool, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0,1)");
  const double g[1] = {gamma};
  return summarize(pool, g, 1.0).frac[0];
}

double tail_prob(const LogPool& pool, double tol) { return summarize(pool, {}, tol).tail; }

// ---------------------------------------------------------------------------

Ensemble::Ensemble(const ModelParams& params, const DisorderSpec& disorder, const McConfig& config,
                   double tilt_lambda)
    : params_(params), config_(config) {
  require_growth(params.B);
  check_pool_size(config.M);
  if (config.replicas < 1) throw DomainError("need at least one replica");
  pools_.resize(static_cast<std::size_t>(config.replicas));
  const OmegaSampler sampler(disorder, tilt_lambda);
  const std::size_t chunks = chunk_count(config.M);
  for (std::size_t r = 0; r < pools_.size(); ++r) {
    pools_[r].seed = config.seed;
    pools_[r].replica_id = static_cast<std::uint32_t>(r);
    pools_[r].logs.resize(config.M);
  }
  parallel_for(pools_.size() * chunks, config.threads, [&](std::size_t task) {
    const std::size_t r = task / chunks;
    const std::size_t begin = (task % chunks) * kChunk;
    const std::size_t len = std::min(kChunk, config_.M - begin);
    fill_initial(std::span(pools_[r].logs).subspan(begin, len), begin, params_, disorder, sampler,
                 config_.seed, static_cast<std::uint32_t>(r));
  });
}

void Ensemble::step() {
  const std::size_t chunks = chunk_count(config_.M);
  std::vector<LogPool> next(pools_.size());
  for (std::size_t r = 0; r < pools_.size(); ++r) {
    next[r].n = level_ + 1;
    next[r].seed = pools_[r].seed;
    next[r].replica_id = pools_[r].replica_id;
    next[r].logs.resize(config_.M);
  }
  parallel_for(pools_.size() * chunks, config_.threads, [&](std::size_t task) {
    const std::size_t r = task / chunks;
    const std::size_t begin = (task % chunks) * kChunk;
    const std::size_t len = std::min(kChunk, config_.M - begin);
    fill_offspring(std::span(next[r].logs).subspan(begin, len), begin, pools_[r], params_.B);
  });
  pools_ = std::move(next);
  ++level_;
  pool_steps_ += static_cast<std::uint64_t>(config_.M) * pools_.size();
}

std::vector<PoolSummary> Ensemble::summarize(std::span<const double> gammas, double tail_tol,
                                             bool with_log_mean) const {
  double hi, lo;
  tail_thresholds(tail_tol, hi, lo);
  const std::size_t chunks = chunk_count(config_.M);
  std::vector<ChunkPartial> parts(pools_.size() * chunks);
  parallel_for(parts.size(), config_.threads, [&](std::size_t task) {
    const std::size_t r = task / chunks;
    const std::size_t begin = (task % chunks) * kChunk;
    const std::size_t len = std::min(kChunk, config_.M - begin);
    parts[task] = summarize_range(std::span(pools_[r].logs).subspan(begin, len), gammas, hi, lo,
                                  with_log_mean);
  });
  std::vector<PoolSummary> out;
  out.reserve(pools_.size());
  for (std::size_t r = 0; r < pools_.size(); ++r) {
    std::vector<ChunkPartial> mine(parts.begin() + static_cast<std::ptrdiff_t>(r * chunks),
                                   parts.begin() + static_cast<std::ptrdiff_t>((r + 1) * chunks));
    out.push_back(combine(mine, config_.M));
  }
  return out;
}

std::vector<std::vector<double>> Ensemble::exceedance(
    std::span<const double> log_thresholds) const {
  const std::size_t chunks = chunk_count(config_.M);
  const std::size_t nt = log_thresholds.size();
  std::vector<std::size_t> counts(pools_.size() * chunks * (nt + 1), 0);
  parallel_for(pools_.size() * chunks, config_.threads, [&](std::size_t task) {
    const std::size_t r = task / chunks;
    const std::size_t begin = (task % chunks) * kChunk;
    const std::size_t len = std::min(kChunk, config_.M - begin);
    std::size_t* bucket = counts.data() + task * (nt + 1);
    for (double l : std::span(pools_[r].logs).subspan(begin, len)) {
      const auto k = std::upper_bound(log_thresholds.begin(), log_thresholds.end(), l) -
                     log_thresholds.begin();
      ++bucket[k];  // k thresholds lie at or below l
    }
  });
  std::vector<std::vector<double>> out(pools_.size(), std::vector<double>(nt, 0.0));
  for (std::size_t r = 0; r < pools_.size(); ++r) {
    std::vector<std::size_t> at_least(nt + 1, 0);
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t* bucket = counts.data() + (r * chunks + c) * (nt + 1);
      for (std::size_t k = 0; k <= nt; ++k) at_least[k] += bucket[k];
    }
    std::size_t above = 0;
    for (std::size_t k = nt; k >= 1; --k) {
      above += at_least[k];
      out[r][k - 1] = static_cast<double>(above) / static_cast<double>(config_.M);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

FreeEnergyEstimate free_energy_estimate(int N, double B, std::span<const PoolSummary> replicas) {
  std::vector<double> per;
  per.reserve(replicas.size());
  for (const auto& s : replicas) per.push_back(std::ldexp(s.mean_log, -N));
  const MeanError me = mean_and_stderr(per);
  FreeEnergyEstimate est;
  est.N = N;
  est.f = me.mean;
  est.std_error = me.std_error;
  est.lower = est.f - std::ldexp(std::log(B), -N);
  est.upper = est.f + std::ldexp(std::log(kB(B)), -N);
  return est;
}

std::vector<FreeEnergyEstimate> run_trajectory(const ModelParams& params,
                                               const DisorderSpec& disorder,
                                               const McConfig& config, int N) {
  if (config.replicas < 2) throw DomainError("free-energy error bars need replicas >= 2");
  if (N < 0) throw DomainError("level N must be non-negative");
  Ensemble ens(params, disorder, config);
  std::vector<FreeEnergyEstimate> rows;
  for (int n = 0;; ++n) {
    const auto sums = ens.summarize({}, 1.0);
    rows.push_back(free_energy_estimate(n, params.B, sums));
    if (n == N) break;
    ens.step();
  }
  return rows;
}

FreeEnergyEstimate run_free_energy(const ModelParams& params, const DisorderSpec& disorder,
                                   const McConfig& config, int N) {
  return run_trajectory(params, disorder, config, N).back();
}

FracMomentEstimate frac_moment_estimate(std::span<const PoolSummary> replicas, std::size_t index,
                                        double gamma, double confidence) {
  std::vector<double> per;
  for (const auto& s : replicas) per.push_back(s.frac.at(index));
  FracMomentEstimate est;
  est.gamma = gamma;
  est.confidence = confidence;
  const bool finite = std::all_of(per.begin(), per.end(), [](double x) { return std::isfinite(x); });
  if (!finite) {
    est.mean = est.ci_upper = std::numeric_limits<double>::infinity();
    est.std_error = std::numeric_limits<double>::infinity();
    return est;
  }
  const MeanError me = mean_and_stderr(per);
  est.mean = me.mean;
  est.std_error = me.std_error;
  est.ci_upper = me.mean + z_for_confidence(confidence) * me.std_error;
  return est;
}

FracMomentEstimate frac_moment_estimate(std::span<const LogPool> replicas, double gamma,
                                        double confidence) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0,1)");
  const double g[1] = {gamma};
  std::vector<PoolSummary> sums;
  for (const auto& p : replicas) sums.push_back(summarize(p, g, 1.0));
  return frac_moment_estimate(sums, 0, gamma, confidence);
}

void write_trajectory_csv(std::ostream& os, std::span<const FreeEnergyEstimate> rows) {
  os << "n,f_n,lower,upper,stderr\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.N, r.f, r.lower, r.upper,
                  r.std_error);
    os << buf;
  }
}

void write_histogram_csv(std::ostream& os, const LogPool& pool, int bins) {
  if (bins < 1) throw DomainError("histogram needs at least one bin");
  const auto [mn, mx] = std::minmax_element(pool.logs.begin(), pool.logs.end());
  const double lo = *mn;
  const double width = (*mx > *mn) ? (*mx - *mn) / bins : 1.0;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (double l : pool.logs) {
    auto b = static_cast<std::size_t>((l - lo) / width);
    counts[std::min(b, counts.size() - 1)]++;
  }
  os << "bin_lo,bin_hi,count\n";
  char buf[128];
  for (std::size_t b = 0; b < counts.size(); ++b) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu\n", lo + width * static_cast<double>(b),
                  lo + width * static_cast<double>(b + 1), counts[b]);
    os << buf;
  }
}

}  // namespace hpin
