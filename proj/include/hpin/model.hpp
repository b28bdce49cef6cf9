#pragma once

// Parameters, disorder laws and the deterministic recursions of the
// hierarchical pinning model:
//
//   R_{n+1} = (R_n^(1) R_n^(2) + (B-1)) / B,   R_0 = exp(beta*omega - log M(beta) + h).
//
// Every function here is pure; derived constants (alpha, K_B, ...) are
// recomputed on each call.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hpin {

/// Raised when an argument lies outside the domain an operation supports.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Marginal growth parameter 2 + sqrt(2), where alpha = 1/2.
inline constexpr double kCriticalGrowth = 3.4142135623730950488;

/// Throws DomainError unless B > 2. B in (1,2) must go through dualize();
/// B = 1 and B = 2 get dedicated messages.
void require_growth(double B);

struct ModelParams {
  double B = 3.0;
  double beta = 0.0;
  double h = 0.0;
};

/// eps = e^h - (B-1), the offset of <R_0> from the annealed critical value.
double epsilon_of_h(double B, double h);
/// Inverse of epsilon_of_h; requires eps > -(B-1).
double h_of_epsilon(double B, double eps);

struct Atom {
  double value = 0.0;
  double prob = 0.0;
};

/// Law of a single disorder variable omega (mean 0, variance 1).
class DisorderSpec {
 public:
  enum class Kind { StdGaussian, Rademacher, FiniteSupport };

  static DisorderSpec gaussian();
  static DisorderSpec rademacher();
  /// Validates positivity, normalization (1e-12), mean 0 and variance 1.
  static DisorderSpec finite_support(std::vector<Atom> atoms);

  /// Accepts "gaussian", "rademacher" or "finite:v1@p1,v2@p2,...".
  static DisorderSpec parse(std::string_view text);

  Kind kind() const { return kind_; }
  bool has_finite_support() const { return kind_ != Kind::StdGaussian; }
  /// Atoms sorted by value; empty for the Gaussian.
  const std::vector<Atom>& atoms() const { return atoms_; }
  /// Round-trips through parse().
  std::string name() const;

 private:
  DisorderSpec(Kind kind, std::vector<Atom> atoms) : kind_(kind), atoms_(std::move(atoms)) {}
  Kind kind_;
  std::vector<Atom> atoms_;
};

/// M(t) = E exp(t * omega).
double mgf(const DisorderSpec& disorder, double t);
double log_mgf(const DisorderSpec& disorder, double t);

/// log R_0 = beta*omega - log M(beta) + h.
double log_r0(const ModelParams& params, const DisorderSpec& disorder, double omega);
double r0_sample(const ModelParams& params, const DisorderSpec& disorder, double omega);

/// r -> (r^2 + B - 1) / B.
double pure_step(double r, double B);
/// Same map on log r; stays finite where r^2 would overflow.
double log_pure_step(double log_r, double B);
/// Log of (x*y + B - 1)/B given log x and log y.
double log_pair_step(double log_x, double log_y, double B);

/// z = 1/2 - r/(2(B-1)); conjugates pure_step to the logistic map.
double logistic_conjugate(double r, double B);
double logistic_inverse(double z, double B);
/// z -> (2(B-1)/B) z (1 - z).
double logistic_step(double z, double B);

std::vector<double> pure_orbit(double r0, double B, int steps);

/// Mean/variance track of the law of R_n.
struct AnnealedState {
  int n = 0;
  double rbar = 0.0;   // <R_n>
  double p = 0.0;      // <R_n> - (B-1)
  double delta = 0.0;  // Var(R_n)
  double q = 0.0;      // delta / rbar^2

  static AnnealedState from_moments(int n, double B, double mean, double variance);
  static AnnealedState initial(const ModelParams& params, const DisorderSpec& disorder);
};

/// Advances mean, variance, P and Q one level. P uses its own recursion so
/// that it keeps full relative precision near the critical value.
AnnealedState annealed_step(const AnnealedState& state, double B);

/// <R_n>^4 / (<R_{n+1}>^2 (B-1)^2), the factor multiplying the Q recursion.
double q_prefactor(double rbar_n, double rbar_next, double B);

/// alpha = log(2(B-1)/B) / log 2.
double alpha(double B);
/// q = 2(B-1)^2/B^2 and qbar = 2(B-1)/B.
double variance_growth(double B);
double mean_growth(double B);
/// 2 alpha / (2 alpha - 1); requires B > 2 + sqrt(2).
double shift_exponent(double B);

/// Delta(beta) = (B-1)^2 (M(2 beta)/M(beta)^2 - 1), the variance of R_0 at h = h_c.
double delta_of_beta(double B, double beta, const DisorderSpec& disorder);
/// B^2 - 2(B-1)^2: disorder strength below which the critical point is unshifted (B < B_c).
double irrelevance_threshold(double B);

/// K_B = (B^2 + B - 1) / (B(B-1)).
double kB(double B);

/// B in (1,2) -> B/(B-1) > 2.
double dualize(double B);
/// Inverse of dualize: Bhat > 2 -> Bhat/(Bhat-1) in (1,2).
double undualize(double Bhat);

/// f(x) = sqrt(Bx + (B-1)^2) - (B-1); inverse of the P recursion.
double inverse_map(double x, double B);
/// g(x) = (2(B-1)x + x^2)/B; the P recursion itself.
double forward_map(double x, double B);

struct InverseSeqState {
  int n = 0;
  double value = 0.0;
  double scaled = 0.0;  // value * 2^{alpha n}
};

/// Iterates a_{k+1} = f(a_k) from `start` for `steps` steps (steps+1 states).
/// Requires start > -(B-2).
std::vector<InverseSeqState> inverse_map_seq(double start, double B, int steps);

/// Annealed free energy f(0,h) = lim 2^{-n} log r_n of the pure orbit from e^h.
double pure_free_energy(double B, double h);

/// True if the pure orbit from e^h escapes above B-1 within max_steps.
bool pure_orbit_diverges(double B, double h, int max_steps = 100000);

/// Bisection on orbit divergence for h_c(0); returns the bracket midpoint.
double annealed_critical_point(double B, double tol = 1e-9);

}  // namespace hpin
