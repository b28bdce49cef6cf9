#include "hpin/phase.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "hpin/parallel.hpp"
#include "hpin/rng.hpp"

namespace hpin {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::vector<double> checked_grid(double B, const std::vector<double>& grid) {
  std::vector<double> g = grid.empty() ? default_gamma_grid(B) : grid;
  const double lo = std::log(2.0) / std::log(B);
  for (double x : g) {
    if (!(x > lo && x < 1.0)) {
      throw DomainError("gamma grid must lie in (log 2 / log B, 1)");
    }
  }
  if (g.empty()) throw DomainError("empty gamma grid");
  return g;
}

bool exact_applies(const ModelParams& params, const DisorderSpec& disorder) {
  return params.beta == 0.0 || disorder.has_finite_support();
}

// Rigorous scan of the exact law; returns Undecided if no level decides.
Certificate certify_exact(const ModelParams& params, const DisorderSpec& disorder,
                          const CertifyOptions& opts, const std::vector<double>& grid) {
  Certificate cert;
  cert.rigorous = true;
  cert.confidence = 1.0;
  const int cap = params.beta == 0.0 ? opts.degenerate_level_cap : opts.exact_level_cap;
  const double log_b = std::log(params.B);
  ExactDist d = exact_init(params, disorder);
  for (int n = 0;; ++n) {
    cert.level = n;
    const double fl = std::ldexp(d.mean_log() - log_b, -n);
    if (fl > 0.0) {
      cert.verdict = Verdict::Localized;
      cert.f_lower = fl;
      return cert;
    }
    for (double g : grid) {
      const double a = exact_frac_moment(d, g);
      const double thr = std::pow(params.B, g) - 2.0;
      if (a < thr) {
        cert.verdict = Verdict::Delocalized;
        cert.gamma = g;
        cert.a_upper = a;
        cert.threshold = thr;
        return cert;
      }
    }
    if (n >= cap) break;
    try {
      d = exact_step(d, params.B, opts.exact);
    } catch (const AtomCapExceeded&) {
      break;
    }
  }
  cert.rigorous = false;
  return cert;
}

// Layer-cake lower bound on E([R-1]^+)^gamma from P(R - 1 >= c_j), c_j = 2^j.
struct MomentFloor {
  std::vector<double> log_thresholds;  // log(1 + c_j), increasing
  std::vector<double> c;

  MomentFloor() {
    for (int j = -6; j <= 30; ++j) {
      c.push_back(std::ldexp(1.0, j));
      log_thresholds.push_back(std::log1p(c.back()));
    }
  }

  double bound(const std::vector<double>& exceed, double gamma) const {
    double lb = 0.0, prev = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      const double cg = std::pow(c[j], gamma);
      lb += exceed[j] * (cg - prev);
      prev = cg;
    }
    return lb;
  }
};

}  // namespace

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Delocalized:
      return "delocalized";
    case Verdict::Localized:
      return "localized";
    case Verdict::Undecided:
      return "undecided";
  }
  return "undecided";
}

std::vector<double> default_gamma_grid(double B) {
  require_growth(B);
  const double lo = std::log(2.0) / std::log(B);
  std::vector<double> grid;
  for (int k = 11; k <= 19; ++k) {
    const double g = k * 0.05;
    if (g > lo && g < 1.0) grid.push_back(g);
  }
  return grid;
}

Certificate certify(const ModelParams& params, const DisorderSpec& disorder,
                    const CertifyOptions& opts) {
  require_growth(params.B);
  if (opts.n_max < 1) throw DomainError("n_max must be at least 1");
  if (!(opts.confidence > 0.0 && opts.confidence < 1.0)) {
    throw DomainError("confidence must lie in (0,1)");
  }
  const std::vector<double> grid = checked_grid(params.B, opts.gamma_grid);

  if (exact_applies(params, disorder)) {
    Certificate cert = certify_exact(params, disorder, opts, grid);
    if (cert.verdict != Verdict::Undecided || params.beta == 0.0) return cert;
  }

  const double z = z_for_confidence(opts.confidence);
  std::vector<double> thresholds;
  for (double g : grid) thresholds.push_back(std::pow(params.B, g) - 2.0);

  Certificate cert;
  cert.confidence = opts.confidence;
  const MomentFloor floor;
  Ensemble ens(params, disorder, opts.mc);
  for (int n = 1; n <= opts.n_max; ++n) {
    ens.step();
    cert.level = n;
    cert.pool_steps = ens.pool_steps();
    // The moment pass is skipped when the replica mean of A_n(gamma) provably
    // exceeds every threshold; that level could not certify delocalization.
    const auto exceed = ens.exceedance(floor.log_thresholds);
    bool hopeless = true;
    for (std::size_t g = 0; g < grid.size() && hopeless; ++g) {
      double lb = 0.0;
      for (const auto& e : exceed) lb += floor.bound(e, grid[g]);
      hopeless = lb / static_cast<double>(exceed.size()) >= thresholds[g];
    }
    const auto sums = hopeless ? ens.summarize({}, 1.0) : ens.summarize(grid, 1.0);
    const FreeEnergyEstimate fe = free_energy_estimate(n, params.B, sums);
    const double fl = fe.lower - z * fe.std_error;
    if (fl > 0.0) {
      cert.verdict = Verdict::Localized;
      cert.f_lower = fl;
      return cert;
    }
    for (std::size_t g = 0; g < grid.size() && !hopeless; ++g) {
      const FracMomentEstimate a = frac_moment_estimate(sums, g, grid[g], opts.confidence);
      if (a.ci_upper < thresholds[g]) {
        cert.verdict = Verdict::Delocalized;
        cert.gamma = grid[g];
        cert.a_upper = a.ci_upper;
        cert.threshold = thresholds[g];
        return cert;
      }
    }
  }
  return cert;
}

std::vector<double> frac_moment_bound_orbit(double a0, double B, double gamma, int steps) {
  const double bg = std::pow(B, gamma);
  std::vector<double> xs{a0};
  for (int k = 0; k < steps; ++k) {
    const double x = xs.back();
    xs.push_back((x * x + 2.0 * x) / bg);
  }
  return xs;
}

// ---------------------------------------------------------------------------

CriticalBracket bracket_hc(double B, double beta, const DisorderSpec& disorder,
                           const BracketOptions& opts) {
  require_growth(B);
  if (!(beta >= 0.0)) throw DomainError("beta must be non-negative");
  if (!(opts.tol_h > 0.0)) throw DomainError("tol_h must be positive");
  if (!(opts.rel_tol >= 0.0 && opts.rel_tol < 1.0)) throw DomainError("rel_tol must lie in [0,1)");
  const double tol = opts.tol_h;
  const double hc0 = std::log(B - 1.0);
  const double top = hc0 + log_mgf(disorder, beta);

  CriticalBracket br;
  br.beta = beta;
  auto run = [&](double h) -> Verdict {
    CertifyOptions co = opts.certify;
    if (!opts.common_random_numbers) {
      co.mc.seed = splitmix64(co.mc.seed ^ splitmix64(br.probes.size()));
    }
    Probe p{h, certify({B, beta, h}, disorder, co)};
    br.budget_spent += p.cert.pool_steps;
    br.probes.push_back(p);
    return p.cert.verdict;
  };
  auto out_of_budget = [&] {
    if (br.budget_spent >= opts.budget) br.exhausted = true;
    return br.exhausted;
  };

  double d = kNaN, l = kNaN;
  for (int k = 0; k <= opts.max_outward_steps && !out_of_budget(); ++k) {
    const double h = hc0 - 0.5 * tol * std::ldexp(1.0, k);
    if (run(h) == Verdict::Delocalized) {
      d = h;
      break;
    }
  }
  for (int k = 0; k <= opts.max_outward_steps && !out_of_budget(); ++k) {
    const double h = top + 0.5 * tol * std::ldexp(1.0, k);
    if (run(h) == Verdict::Localized) {
      l = h;
      break;
    }
  }

  if (std::isfinite(d) && std::isfinite(l)) {
    for (int guard = 0; guard < 200; ++guard) {
      const double width = std::max(tol, opts.rel_tol * (0.5 * (d + l) - hc0));
      if (l - d <= width) {
        br.resolved = true;
        break;
      }
      double ulo = kNaN, uhi = kNaN;
      for (const auto& p : br.probes) {
        if (p.cert.verdict == Verdict::Undecided && p.h > d && p.h < l) {
          ulo = std::isnan(ulo) ? p.h : std::min(ulo, p.h);
          uhi = std::isnan(uhi) ? p.h : std::max(uhi, p.h);
        }
      }
      double mid;
      if (std::isnan(ulo)) {
        mid = 0.5 * (d + l);
      } else {
        const double g1 = ulo - d, g2 = l - uhi;
        if (std::max(g1, g2) <= 0.25 * width) break;
        mid = g1 >= g2 ? 0.5 * (d + ulo) : 0.5 * (uhi + l);
      }
      if (out_of_budget()) break;
      const Verdict v = run(mid);
      if (v == Verdict::Delocalized) d = mid;
      if (v == Verdict::Localized) l = mid;
    }
  }

  br.h_deloc = d;
  br.h_loc = l;
  br.gap = l - d;
  br.undecided_lo = br.undecided_hi = kNaN;
  for (const auto& p : br.probes) {
    if (p.cert.verdict == Verdict::Undecided && !(p.h <= d) && !(p.h >= l)) {
      br.undecided_lo = std::isnan(br.undecided_lo) ? p.h : std::min(br.undecided_lo, p.h);
      br.undecided_hi = std::isnan(br.undecided_hi) ? p.h : std::max(br.undecided_hi, p.h);
    }
  }
  return br;
}

ScalingResult scaling_study(double B, const std::vector<double>& betas,
                            const DisorderSpec& disorder, const BracketOptions& opts) {
  ScalingResult res;
  res.target = shift_exponent(B);  // rejects B <= B_c
  if (betas.size() < 2) throw DomainError("scaling study needs at least two betas");
  for (double b : betas) {
    if (!(b > 0.0)) throw DomainError("scaling study needs beta > 0");
  }
  const auto [mn, mx] = std::minmax_element(betas.begin(), betas.end());
  if (*mx < 2.0 * *mn) throw DomainError("betas must span at least a factor of 2");

  const double hc0 = std::log(B - 1.0);
  for (double b : betas) {
    ScalingRow row;
    row.beta = b;
    row.bracket = bracket_hc(B, b, disorder, opts);
    row.shift = 0.5 * (row.bracket.h_deloc + row.bracket.h_loc) - hc0;
    row.halfwidth = 0.5 * row.bracket.gap;
    res.rows.push_back(std::move(row));
  }
  for (const auto& row : res.rows) {
    char buf[160];
    if (!std::isfinite(row.shift) || !(row.shift > 0.0)) {
      std::snprintf(buf, sizeof buf, "beta=%.17g: no positive resolved shift", row.beta);
      res.refusal = buf;
      return res;
    }
    if (row.bracket.gap > 0.3 * row.shift) {
      std::snprintf(buf, sizeof buf, "beta=%.17g: gap %.3g exceeds 30%% of shift %.3g", row.beta,
                    row.bracket.gap, row.shift);
      res.refusal = buf;
      return res;
    }
  }
  std::vector<double> x, y, s;
  for (const auto& row : res.rows) {
    x.push_back(std::log(row.beta));
    y.push_back(std::log(row.shift));
    s.push_back(row.halfwidth / row.shift);
  }
  const bool weighted = std::all_of(s.begin(), s.end(), [](double v) { return v > 0.0; });
  res.fit = weighted ? least_squares(x, y, s) : least_squares(x, y);
  res.fitted = true;
  return res;
}

std::vector<IrrelevanceRow> irrelevance_check(double B, double beta, const DisorderSpec& disorder,
                                              const std::vector<double>& offsets,
                                              const McConfig& mc, int N, double confidence) {
  require_growth(B);
  if (!(B < kCriticalGrowth)) throw DomainError("irrelevance check needs 2 < B < 2 + sqrt(2)");
  const double dlt = delta_of_beta(B, beta, disorder);
  if (!(dlt <= irrelevance_threshold(B))) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "Delta(beta) = %.6g exceeds B^2 - 2(B-1)^2 = %.6g", dlt,
                  irrelevance_threshold(B));
    throw DomainError(buf);
  }
  const double z = z_for_confidence(confidence);
  const double hc0 = std::log(B - 1.0);
  std::vector<IrrelevanceRow> rows;
  for (double off : offsets) {
    if (!(off > 0.0)) throw DomainError("offsets must be positive");
    IrrelevanceRow row;
    row.offset = off;
    row.h = hc0 + off;
    const ModelParams p{B, beta, row.h};
    row.annealed = pure_free_energy(B, row.h);
    if (beta == 0.0) {
      row.quenched.N = N;
      row.quenched.f = row.annealed;
      row.quenched.lower = row.annealed - std::ldexp(std::log(B), -N);
      row.quenched.upper = row.annealed + std::ldexp(std::log(kB(B)), -N);
      row.ratio = row.ratio_lower = 1.0;
    } else {
      row.quenched = run_free_energy(p, disorder, mc, N);
      row.ratio = row.quenched.f / row.annealed;
      row.ratio_lower = (row.quenched.lower - z * row.quenched.std_error) / row.annealed;
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<MarginalRow> marginal_probe(double B, const std::vector<double>& betas,
                                        const DisorderSpec& disorder,
                                        const BracketOptions& opts) {
  if (!(std::abs(B - kCriticalGrowth) <= 1e-12)) {
    throw DomainError("marginal probe needs B = 2 + sqrt(2) within 1e-12");
  }
  const double hc0 = std::log(B - 1.0);
  const double l2 = std::log(2.0);
  std::vector<MarginalRow> rows;
  for (double b : betas) {
    if (!(b >= 0.0)) throw DomainError("beta must be non-negative");
    MarginalRow row;
    row.beta = b;
    row.curve = b > 0.0 ? std::exp(-l2 * l2 / (2.0 * b * b)) : 0.0;
    row.bracket = bracket_hc(B, b, disorder, opts);
    row.shift_upper = row.bracket.h_loc - hc0;
    rows.push_back(std::move(row));
  }
  return rows;
}

AnnealedExponentFit annealed_exponent_fit(double B, double delta_min, double delta_max,
                                          int points) {
  require_growth(B);
  if (!(delta_min > 0.0 && delta_max > delta_min) || points < 2) {
    throw DomainError("need 0 < delta_min < delta_max and at least two points");
  }
  AnnealedExponentFit out;
  out.h_c = annealed_critical_point(B, 1e-12);
  out.target = 1.0 / alpha(B);
  std::vector<double> x, y;
  const double step = std::log(delta_max / delta_min) / (points - 1);
  for (int k = 0; k < points; ++k) {
    const double dl = delta_min * std::exp(step * k);
    const double f = pure_free_energy(B, out.h_c + dl);
    out.deltas.push_back(dl);
    out.free_energies.push_back(f);
    x.push_back(std::log(dl));
    y.push_back(std::log(f));
  }
  out.fit = least_squares(x, y);
  return out;
}

// ---------------------------------------------------------------------------

double tilted_mean_r0(const ModelParams& params, const DisorderSpec& disorder, double lambda) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be non-negative");
  return std::exp(params.h + log_mgf(disorder, params.beta - lambda) -
                  log_mgf(disorder, params.beta) - log_mgf(disorder, -lambda));
}

double default_tilt_delta(double B, double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw DomainError("eta must lie in (0,1)");
  return std::pow(eta, 0.5 * (1.0 - 1.0 / (2.0 * alpha(B))));
}

TiltReport tilt_experiment(double B, double beta, const DisorderSpec& disorder,
                           const TiltOptions& opts) {
  if (disorder.kind() != DisorderSpec::Kind::StdGaussian) {
    throw DomainError("tilt experiment needs Gaussian disorder");
  }
  if (!(beta > 0.0)) throw DomainError("tilt experiment needs beta > 0");
  if (opts.samples < 2) throw DomainError("need at least two samples");
  TiltReport rep;
  rep.B = B;
  rep.beta = beta;
  rep.eps = opts.eta * std::pow(beta, shift_exponent(B));  // rejects B <= B_c
  rep.h = h_of_epsilon(B, rep.eps);

  int n0 = opts.n0;
  if (n0 < 0) {
    AnnealedState s = AnnealedState::initial({B, beta, rep.h}, disorder);
    n0 = 0;
    while (n0 < opts.n0_cap) {
      const AnnealedState next = annealed_step(s, B);
      if (next.p > 1.0) break;
      s = next;
      ++n0;
    }
  }
  if (n0 > 20) throw DomainError("n0 above 20 is not supported");
  rep.spec.n0 = n0;
  rep.spec.delta = opts.delta > 0.0 ? opts.delta : default_tilt_delta(B, opts.eta);
  rep.spec.lambda = rep.spec.delta / std::sqrt(std::ldexp(1.0, n0));
  if (rep.spec.lambda > beta) throw DomainError("tilt lambda exceeds beta");
  rep.a = opts.a > 0.0 ? opts.a : 2.0 * rep.spec.delta;
  rep.x = opts.x;
  rep.samples = opts.samples;

  const std::size_t sites = std::size_t{1} << n0;
  const double lam = rep.spec.lambda;
  const double shift = rep.h - log_mgf(disorder, beta);
  const double log_m_neg = log_mgf(disorder, -lam);
  std::vector<double> plain(opts.samples), tilted(opts.samples), log_lr(opts.samples);
  parallel_for(opts.samples, opts.threads, [&](std::size_t s) {
    CounterStream stream(opts.seed, static_cast<std::uint32_t>(s), 0, 0);
    std::vector<double> r_plain(sites), r_tilt(sites);
    double sum_tilted_omega = 0.0;
    for (std::size_t i = 0; i < sites; ++i) {
      const double z = stream.next_normal();
      r_plain[i] = std::exp(beta * z + shift);
      r_tilt[i] = std::exp(beta * (z - lam) + shift);
      sum_tilted_omega += z - lam;
    }
    plain[s] = tree_reduce(r_plain, B);
    tilted[s] = tree_reduce(r_tilt, B);
    log_lr[s] = lam * sum_tilted_omega + static_cast<double>(sites) * log_m_neg;
  });

  auto median = [](std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
      m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    return m;
  };
  const double inv = 1.0 / static_cast<double>(opts.samples);
  auto frac_below = [&](const std::vector<double>& v, double t) {
    return static_cast<double>(std::count_if(v.begin(), v.end(), [&](double r) { return r <= t; })) *
           inv;
  };
  rep.median_plain = median(plain);
  rep.median_tilted = median(tilted);
  rep.conc_plain = frac_below(plain, 1.0 + rep.x);
  rep.conc_tilted = frac_below(tilted, 1.0 + rep.x);
  rep.lr_small_freq =
      static_cast<double>(std::count_if(log_lr.begin(), log_lr.end(),
                                        [&](double v) { return v < -rep.a; })) *
      inv;
  const double dl = rep.spec.delta;
  rep.lr_small_exact = 0.5 * std::erfc(-((-rep.a + 0.5 * dl * dl) / dl) / std::sqrt(2.0));
  rep.lr_bound_shape = (dl / rep.a) * (dl / rep.a);
  rep.untilted_lower = std::exp(-rep.a) * std::max(0.0, rep.conc_tilted - rep.lr_small_freq);
  const MeanError me = mean_and_stderr(log_lr);
  rep.mean_log_lr = me.mean;
  rep.mean_log_lr_stderr = me.std_error;
  rep.mean_log_lr_exact = -0.5 * dl * dl;
  return rep;
}

void write_probes_csv(std::ostream& os, const std::vector<Probe>& probes, double beta) {
  os << "beta,h,verdict,level,gamma,a_upper,threshold,f_lower,confidence,rigorous,pool_steps\n";
  char buf[512];
  for (const auto& p : probes) {
    const auto& c = p.cert;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%llu\n",
                  beta, p.h, to_string(c.verdict), c.level, c.gamma, c.a_upper, c.threshold,
                  c.f_lower, c.confidence, c.rigorous ? 1 : 0,
                  static_cast<unsigned long long>(c.pool_steps));
    os << buf;
  }
}

}  // namespace hpin
