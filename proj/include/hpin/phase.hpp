#pragma once

// Phase verdicts and studies built on the exact oracle and the pool engine:
// delocalization/localization certificates, bisection brackets for h_c(beta),
// shift-exponent fits, the irrelevance and marginal checks, and the
// tilted-measure experiment.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hpin/exact.hpp"
#include "hpin/mc.hpp"
#include "hpin/model.hpp"
#include "hpin/stats.hpp"

namespace hpin {

enum class Verdict { Delocalized, Localized, Undecided };

const char* to_string(Verdict v);

struct Certificate {
  Verdict verdict = Verdict::Undecided;
  int level = 0;             // level that decided (last level scanned if undecided)
  double gamma = 0.0;        // delocalized: moment order used
  double a_upper = 0.0;      // delocalized: bound on A_n(gamma)
  double threshold = 0.0;    // delocalized: B^gamma - 2
  double f_lower = 0.0;      // localized: f_n - 2^{-n} log B - z * stderr
  double confidence = 1.0;
  bool rigorous = false;     // true only for exact-oracle certificates
  std::uint64_t pool_steps = 0;
};

struct CertifyOptions {
  int n_max = 25;
  McConfig mc;
  std::vector<double> gamma_grid;  // empty: default_gamma_grid(B)
  double confidence = 0.99;
  int exact_level_cap = 4;          // finite-support disorder
  int degenerate_level_cap = 2000;  // beta = 0: the law is a point mass
  ExactOptions exact;
};

/// {0.55, 0.60, ..., 0.95} restricted to (log 2 / log B, 1).
std::vector<double> default_gamma_grid(double B);

/// Exact oracle first (when it applies), then the pool engine for n = 1..n_max.
Certificate certify(const ModelParams& params, const DisorderSpec& disorder,
                    const CertifyOptions& opts = {});

/// Iterates x -> (x^2 + 2x)/B^gamma; the bound A_{n+1} <= that map.
std::vector<double> frac_moment_bound_orbit(double a0, double B, double gamma, int steps);

struct Probe {
  double h = 0.0;
  Certificate cert;
};

struct BracketOptions {
  CertifyOptions certify;
  std::uint64_t budget = 2'000'000'000;  // pool-steps over all probes
  double tol_h = 0.004;
  double rel_tol = 0.0;  // also stop once the gap is below rel_tol * (midpoint - h_c(0))
  bool common_random_numbers = true;  // same seed at every h
  int max_outward_steps = 8;
};

struct CriticalBracket {
  double beta = 0.0;
  double h_deloc = 0.0;  // largest h certified delocalized (NaN if none)
  double h_loc = 0.0;    // smallest h certified localized (NaN if none)
  double gap = 0.0;
  double undecided_lo = 0.0;  // undecided probes inside the bracket (NaN if none)
  double undecided_hi = 0.0;
  std::uint64_t budget_spent = 0;
  bool exhausted = false;
  bool resolved = false;  // gap <= max(tol_h, rel_tol * shift)
  std::vector<Probe> probes;
};

/// Bisection on h over [h_c(0), h_c(0) + log M(beta)] padded by tol_h/2.
CriticalBracket bracket_hc(double B, double beta, const DisorderSpec& disorder,
                           const BracketOptions& opts = {});

struct ScalingRow {
  double beta = 0.0;
  double shift = 0.0;      // bracket midpoint - h_c(0)
  double halfwidth = 0.0;  // half the bracket gap
  CriticalBracket bracket;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
  bool fitted = false;
  std::string refusal;  // why no fit was made
  LinearFit fit;        // log shift against log beta
  double target = 0.0;  // shift_exponent(B)
};

/// Needs B > B_c, at least two betas spanning a factor 2. Refuses to fit when
/// any bracket gap exceeds 30% of its shift.
ScalingResult scaling_study(double B, const std::vector<double>& betas,
                            const DisorderSpec& disorder, const BracketOptions& opts = {});

struct IrrelevanceRow {
  double offset = 0.0;  // h - h_c(0)
  double h = 0.0;
  FreeEnergyEstimate quenched;
  double annealed = 0.0;
  double ratio = 0.0;
  double ratio_lower = 0.0;  // (f_N - 2^{-N} log B - z stderr) / f(0,h)
};

/// Needs 2 < B < B_c and delta_of_beta below irrelevance_threshold(B).
std::vector<IrrelevanceRow> irrelevance_check(double B, double beta, const DisorderSpec& disorder,
                                              const std::vector<double>& offsets,
                                              const McConfig& mc, int N,
                                              double confidence = 0.99);

struct MarginalRow {
  double beta = 0.0;
  double shift_upper = 0.0;  // h_loc - h_c(0)
  double curve = 0.0;        // exp(-(log 2)^2 / (2 beta^2))
  CriticalBracket bracket;
};

/// Needs B = 2 + sqrt(2) within 1e-12.
std::vector<MarginalRow> marginal_probe(double B, const std::vector<double>& betas,
                                        const DisorderSpec& disorder,
                                        const BracketOptions& opts = {});

struct AnnealedExponentFit {
  double h_c = 0.0;  // orbit bisection
  std::vector<double> deltas;
  std::vector<double> free_energies;
  LinearFit fit;  // log f(0, h_c + delta) against log delta
  double target = 0.0;  // 1/alpha
};

AnnealedExponentFit annealed_exponent_fit(double B, double delta_min = 1e-6,
                                          double delta_max = 1e-3, int points = 31);

/// E~ R_0 = e^h M(beta - lambda) / (M(beta) M(-lambda)).
double tilted_mean_r0(const ModelParams& params, const DisorderSpec& disorder, double lambda);

struct TiltSpec {
  int n0 = 0;
  double delta = 0.0;
  double lambda = 0.0;  // delta 2^{-n0/2}
};

/// delta(eta) = eta^{(1 - 1/(2 alpha))/2}.
double default_tilt_delta(double B, double eta);

struct TiltOptions {
  double eta = 0.1;
  int n0 = -1;          // -1: largest n with annealed P_n <= 1 (capped by n0_cap)
  int n0_cap = 16;
  double delta = -1.0;  // -1: default_tilt_delta
  double a = -1.0;      // likelihood-ratio threshold; -1: 2 delta
  double x = 0.1;       // concentration window R <= 1 + x
  std::size_t samples = 4096;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct TiltReport {
  double B = 0.0, beta = 0.0, h = 0.0, eps = 0.0;
  TiltSpec spec;
  double a = 0.0, x = 0.0;
  std::size_t samples = 0;
  double median_plain = 0.0, median_tilted = 0.0;
  double conc_plain = 0.0, conc_tilted = 0.0;  // P(R_{n0} <= 1 + x)
  double lr_small_freq = 0.0;    // P~(dP/dP~ < e^{-a}), empirical
  double lr_small_exact = 0.0;   // same, Gaussian closed form
  double lr_bound_shape = 0.0;   // (delta/a)^2
  double untilted_lower = 0.0;   // e^{-a} (P~(R <= 1+x) - P~(dP/dP~ < e^{-a}))
  double mean_log_lr = 0.0;      // empirical E~ log dP/dP~
  double mean_log_lr_exact = 0.0;  // -delta^2/2
  double mean_log_lr_stderr = 0.0;
};

/// Gaussian disorder only. h = log(B - 1 + eta beta^{2 alpha/(2 alpha - 1)}); each
/// sample is a full tree over 2^{n0} sites, drawn once and evaluated under both laws.
TiltReport tilt_experiment(double B, double beta, const DisorderSpec& disorder,
                           const TiltOptions& opts = {});

void write_probes_csv(std::ostream& os, const std::vector<Probe>& probes, double beta);

}  // namespace hpin
