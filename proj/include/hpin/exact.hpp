#pragma once

// Exact propagation of the law of R_n for finite-support disorder, and the
// contact-set weights p(n, I) of the partition-function expansion. These are
// the ground truth the Monte Carlo estimators are checked against.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "hpin/model.hpp"

namespace hpin {

/// Thrown when a step would create more atoms than ExactOptions::atom_cap.
class AtomCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExactOptions {
  double merge_tol = 1e-13;  // relative
  double prune_tol = 0.0;    // atoms lighter than this are dropped
  std::size_t atom_cap = 4'000'000;
};

struct ExactDist {
  int n = 0;
  std::vector<Atom> atoms;  // strictly increasing values
  double mass_dropped = 0.0;

  double kept_mass() const;
  /// Expectations are conditional on the kept atoms.
  double mean() const;
  double variance() const;
  double mean_log() const;
  double min_value() const { return atoms.front().value; }
};

/// Law of R_0. Needs finite-support disorder (or beta = 0, which is degenerate).
ExactDist exact_init(const ModelParams& params, const DisorderSpec& disorder);

/// Law of (XY + B - 1)/B for X, Y independent copies of d.
ExactDist exact_step(const ExactDist& d, double B, const ExactOptions& opts = {});

struct ExactLevel {
  int n = 0;
  double f = 0.0;      // 2^{-n} E log R_n
  double lower = 0.0;  // f - 2^{-n} log B
  double upper = 0.0;  // f + 2^{-n} log K_B
  double mass_dropped = 0.0;
  std::size_t atoms = 0;
};

/// Levels 0..n_max of the exact free-energy sequence with its sandwich.
std::vector<ExactLevel> exact_free_energy_seq(const ExactDist& d0, double B, int n_max,
                                              const ExactOptions& opts = {});

/// E ([R - 1]^+)^gamma.
double exact_frac_moment(const ExactDist& d, double gamma);
/// P(|R - 1| > tol).
double exact_tail_prob(const ExactDist& d, double tol);

void write_csv(std::ostream& os, const ExactDist& d);

/// Dense table of p(n, I) indexed by the bitmask of I over the 2^n sites.
struct ContactWeights {
  int n = 0;
  double B = 0.0;
  std::vector<double> weights;

  std::size_t sites() const { return std::size_t{1} << n; }
  double weight(std::uint32_t mask) const { return weights.at(mask); }
  double total() const;
  /// R_n = sum_I p(n, I) exp(sum_{i in I} u_i) for site rewards u.
  double reconstruct(std::span<const double> rewards) const;
};

/// Built from p(n+1, I) = p(n, I_left) p(n, I_right)/B + ((B-1)/B)[I empty],
/// starting at p(0, {1}) = 1. Needs n <= 4.
ContactWeights contact_weights(int n, double B);

/// R_n for one disorder draw by direct pairwise recursion over the sites.
double tree_reduce(std::span<const double> r0, double B);

}  // namespace hpin
