#include "hpin/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

namespace hpin {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(std::string_view s) {
  // std::from_chars for double is available in libstdc++ 11.
  double out = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) {
    throw DomainError("cannot parse number '" + std::string(s) + "'");
  }
  return out;
}

}  // namespace

void require_growth(double B) {
  if (!std::isfinite(B)) throw DomainError("B must be finite");
  if (B == 1.0) {
    throw DomainError(
        "B = 1 is the exactly solvable product case (f = h - log M(beta)); "
        "the recursions here require B > 2");
  }
  if (B == 2.0) {
    throw DomainError(
        "B = 2 has purely nonlinear growth of <R_n> - 1; the recursions here "
        "require B > 2");
  }
  if (B > 1.0 && B < 2.0) {
    throw DomainError("B in (1,2) must be mapped to B/(B-1) > 2 with dualize() first");
  }
  if (!(B > 2.0)) throw DomainError("B must satisfy B > 2 (got " + format_g17(B) + ")");
}

double epsilon_of_h(double B, double h) {
  // (B-1)(e^{h - log(B-1)} - 1) keeps relative precision near h_c.
  return (B - 1.0) * std::expm1(h - std::log(B - 1.0));
}

double h_of_epsilon(double B, double eps) {
  if (!(eps > -(B - 1.0))) throw DomainError("eps must exceed -(B-1)");
  return std::log(B - 1.0) + std::log1p(eps / (B - 1.0));
}

// ---------------------------------------------------------------------------
// Disorder

DisorderSpec DisorderSpec::gaussian() { return DisorderSpec(Kind::StdGaussian, {}); }

DisorderSpec DisorderSpec::rademacher() {
  return DisorderSpec(Kind::Rademacher, {{-1.0, 0.5}, {1.0, 0.5}});
}

DisorderSpec DisorderSpec::finite_support(std::vector<Atom> atoms) {
  if (atoms.empty()) throw DomainError("finite-support disorder needs at least one atom");
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.value < b.value; });
  double total = 0.0, mean = 0.0, second = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto& a = atoms[i];
    if (!std::isfinite(a.value)) throw DomainError("atom values must be finite");
    if (!(a.prob > 0.0)) throw DomainError("atom probabilities must be positive");
    if (i > 0 && atoms[i - 1].value == a.value) throw DomainError("duplicate atom value");
    total += a.prob;
    mean += a.prob * a.value;
    second += a.prob * a.value * a.value;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("atom probabilities must sum to 1");
  if (std::abs(mean) > 1e-12) throw DomainError("disorder must be centered (mean 0)");
  if (std::abs(second - 1.0) > 1e-12) throw DomainError("disorder must have unit variance");
  return DisorderSpec(Kind::FiniteSupport, std::move(atoms));
}

DisorderSpec DisorderSpec::parse(std::string_view text) {
  if (text == "gaussian" || text == "normal") return gaussian();
  if (text == "rademacher") return rademacher();
  constexpr std::string_view prefix = "finite:";
  if (text.substr(0, prefix.size()) == prefix) {
    std::vector<Atom> atoms;
    std::string_view rest = text.substr(prefix.size());
    while (!rest.empty()) {
      auto comma = rest.find(',');
      auto item = rest.substr(0, comma);
      auto at = item.find('@');
      if (at == std::string_view::npos) {
        throw DomainError("finite-support atom must be written value@prob");
      }
      atoms.push_back({parse_double(item.substr(0, at)), parse_double(item.substr(at + 1))});
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    return finite_support(std::move(atoms));
  }
  throw DomainError("unknown disorder '" + std::string(text) +
                    "' (expected gaussian, rademacher or finite:v@p,...)");
}

std::string DisorderSpec::name() const {
  switch (kind_) {
    case Kind::StdGaussian:
      return "gaussian";
    case Kind::Rademacher:
      return "rademacher";
    case Kind::FiniteSupport: {
      std::string out = "finite:";
      for (std::size_t i = 0; i < atoms_.size(); ++i) {
        if (i) out += ',';
        out += format_g17(atoms_[i].value) + "@" + format_g17(atoms_[i].prob);
      }
      return out;
    }
  }
  return {};
}

double mgf(const DisorderSpec& disorder, double t) {
  switch (disorder.kind()) {
    case DisorderSpec::Kind::StdGaussian:
      return std::exp(0.5 * t * t);
    case DisorderSpec::Kind::Rademacher:
      return std::cosh(t);
    case DisorderSpec::Kind::FiniteSupport: {
      double s = 0.0;
      for (const auto& a : disorder.atoms()) s += a.prob * std::exp(t * a.value);
      return s;
    }
  }
  return 0.0;
}

double log_mgf(const DisorderSpec& disorder, double t) {
  switch (disorder.kind()) {
    case DisorderSpec::Kind::StdGaussian:
      return 0.5 * t * t;
    case DisorderSpec::Kind::Rademacher: {
      // log cosh t = |t| + log1p(e^{-2|t|}) - log 2
      const double a = std::abs(t);
      return a + std::log1p(std::exp(-2.0 * a)) - kLn2;
    }
    case DisorderSpec::Kind::FiniteSupport: {
      double mx = -INFINITY;
      for (const auto& a : disorder.atoms()) mx = std::max(mx, t * a.value);
      double s = 0.0;
      for (const auto& a : disorder.atoms()) s += a.prob * std::exp(t * a.value - mx);
      return mx + std::log(s);
    }
  }
  return 0.0;
}

double log_r0(const ModelParams& params, const DisorderSpec& disorder, double omega) {
  if (params.beta == 0.0) return params.h;
  return params.beta * omega - log_mgf(disorder, params.beta) + params.h;
}

double r0_sample(const ModelParams& params, const DisorderSpec& disorder, double omega) {
  return std::exp(log_r0(params, disorder, omega));
}

// ---------------------------------------------------------------------------
// Pure map and its conjugacies

// Written as r + (r-1)(r-(B-1))/B so both fixed points are reproduced exactly.
double pure_step(double r, double B) { return r + (r - 1.0) * (r - (B - 1.0)) / B; }

double log_pair_step(double log_x, double log_y, double B) {
  // Same split as the pool engine: the floor log((B-1)/B) is exact.
  const double s = log_x + log_y;
  const double c = std::log(B - 1.0);
  if (s > c) return (s - std::log(B)) + std::log1p(std::exp(c - s));
  return std::log((B - 1.0) / B) + std::log1p(std::exp(s - c));
}

double log_pure_step(double log_r, double B) { return log_pair_step(log_r, log_r, B); }

double logistic_conjugate(double r, double B) { return 0.5 - r / (2.0 * (B - 1.0)); }

double logistic_inverse(double z, double B) { return (0.5 - z) * 2.0 * (B - 1.0); }

double logistic_step(double z, double B) { return mean_growth(B) * z * (1.0 - z); }

std::vector<double> pure_orbit(double r0, double B, int steps) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(steps, 0)) + 1);
  out.push_back(r0);
  for (int i = 0; i < steps; ++i) out.push_back(pure_step(out.back(), B));
  return out;
}

// ---------------------------------------------------------------------------
// Moment recursions

AnnealedState AnnealedState::from_moments(int n, double B, double mean, double variance) {
  AnnealedState s;
  s.n = n;
  s.p = mean - (B - 1.0);
  s.rbar = (B - 1.0) + s.p;
  s.delta = variance;
  s.q = variance / (s.rbar * s.rbar);
  return s;
}

AnnealedState AnnealedState::initial(const ModelParams& params, const DisorderSpec& disorder) {
  AnnealedState s;
  s.n = 0;
  s.p = epsilon_of_h(params.B, params.h);
  s.rbar = (params.B - 1.0) + s.p;
  // Var(R_0) = <R_0>^2 (M(2 beta)/M(beta)^2 - 1)
  const double ratio_m1 =
      std::expm1(log_mgf(disorder, 2.0 * params.beta) - 2.0 * log_mgf(disorder, params.beta));
  s.q = ratio_m1;
  s.delta = ratio_m1 * s.rbar * s.rbar;
  return s;
}

AnnealedState annealed_step(const AnnealedState& state, double B) {
  AnnealedState next;
  next.n = state.n + 1;
  next.p = forward_map(state.p, B);
  next.rbar = (B - 1.0) + next.p;
  next.delta = state.delta * (2.0 * state.rbar * state.rbar + state.delta) / (B * B);
  next.q = next.delta / (next.rbar * next.rbar);
  return next;
}

double q_prefactor(double rbar_n, double rbar_next, double B) {
  const double r2 = rbar_n * rbar_n;
  return (r2 * r2) / (rbar_next * rbar_next * (B - 1.0) * (B - 1.0));
}

double alpha(double B) {
  require_growth(B);
  return std::log(mean_growth(B)) / kLn2;
}

double variance_growth(double B) { return 2.0 * (B - 1.0) * (B - 1.0) / (B * B); }

double mean_growth(double B) { return 2.0 * (B - 1.0) / B; }

double shift_exponent(double B) {
  require_growth(B);
  if (!(B > kCriticalGrowth)) {
    throw DomainError("critical-shift exponent needs B > 2 + sqrt(2)");
  }
  const double a = alpha(B);
  return 2.0 * a / (2.0 * a - 1.0);
}

double delta_of_beta(double B, double beta, const DisorderSpec& disorder) {
  if (beta < 0.0) throw DomainError("beta must be non-negative");
  const double ratio_m1 = std::expm1(log_mgf(disorder, 2.0 * beta) - 2.0 * log_mgf(disorder, beta));
  return (B - 1.0) * (B - 1.0) * ratio_m1;
}

double irrelevance_threshold(double B) { return B * B - 2.0 * (B - 1.0) * (B - 1.0); }

double kB(double B) {
  require_growth(B);
  return (B * B + B - 1.0) / (B * (B - 1.0));
}

double dualize(double B) {
  if (!(B > 1.0 && B < 2.0)) throw DomainError("dualize() needs B in (1,2)");
  return B / (B - 1.0);
}

double undualize(double Bhat) {
  if (!(Bhat > 2.0)) throw DomainError("undualize() needs Bhat > 2");
  return Bhat / (Bhat - 1.0);
}

double inverse_map(double x, double B) {
  // Rationalized; the difference form cancels for small |x|.
  return B * x / (std::sqrt(B * x + (B - 1.0) * (B - 1.0)) + (B - 1.0));
}

double forward_map(double x, double B) { return (2.0 * (B - 1.0) * x + x * x) / B; }

std::vector<InverseSeqState> inverse_map_seq(double start, double B, int steps) {
  require_growth(B);
  if (!(start > -(B - 2.0))) throw DomainError("inverse-map start must exceed -(B-2)");
  if (steps < 0) throw DomainError("steps must be non-negative");
  const double growth = mean_growth(B);
  std::vector<InverseSeqState> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  double value = start;
  double scale = 1.0;
  for (int n = 0; n <= steps; ++n) {
    out.push_back({n, value, value * scale});
    value = inverse_map(value, B);
    scale *= growth;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Annealed free energy and critical point

double pure_free_energy(double B, double h) {
  require_growth(B);
  double p = epsilon_of_h(B, h);
  if (!(p > 0.0)) return 0.0;
  int n = 0;
  // P-form while <R_n> is near B-1: the update has no cancellation.
  while (p <= 1.0) {
    p = forward_map(p, B);
    ++n;
  }
  double l = std::log((B - 1.0) + p);
  while (l < 40.0) {
    l = log_pure_step(l, B);
    ++n;
  }
  // For log r >= 40 the remaining corrections log1p((B-1) r^-2) are below 1e-34 relative.
  return std::ldexp(l - std::log(B), -n);
}

bool pure_orbit_diverges(double B, double h, int max_steps) {
  require_growth(B);
  double r = std::exp(h);
  const double low = 0.5 * B;  // between the fixed points 1 and B-1
  for (int i = 0; i < max_steps; ++i) {
    if (r > B) return true;
    if (r < low) return false;
    r = pure_step(r, B);
  }
  return false;
}

double annealed_critical_point(double B, double tol) {
  require_growth(B);
  if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
  double lo = std::log(B - 1.0) - 1.0;
  double hi = std::log(B - 1.0) + 1.0;
  if (pure_orbit_diverges(B, lo) || !pure_orbit_diverges(B, hi)) {
    throw std::logic_error("annealed bisection window does not bracket the transition");
  }
  while (hi - lo > 0.25 * tol) {
    const double mid = 0.5 * (lo + hi);
    if (pure_orbit_diverges(B, mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace hpin
