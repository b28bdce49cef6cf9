#include "hpin/exact.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace hpin {

double ExactDist::kept_mass() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.prob;
  return s;
}

double ExactDist::mean() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.prob * a.value;
  return s / kept_mass();
}

double ExactDist::variance() const {
  const double m = mean();
  double s = 0.0;
  for (const auto& a : atoms) s += a.prob * (a.value - m) * (a.value - m);
  return s / kept_mass();
}

double ExactDist::mean_log() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.prob * std::log(a.value);
  return s / kept_mass();
}

ExactDist exact_init(const ModelParams& params, const DisorderSpec& disorder) {
  require_growth(params.B);
  ExactDist d;
  if (params.beta == 0.0) {
    d.atoms.push_back({std::exp(params.h), 1.0});
    return d;
  }
  if (!disorder.has_finite_support()) {
    throw DomainError("exact propagation needs finite-support disorder");
  }
  for (const auto& a : disorder.atoms()) {
    d.atoms.push_back({r0_sample(params, disorder, a.value), a.prob});
  }
  std::sort(d.atoms.begin(), d.atoms.end(),
            [](const Atom& x, const Atom& y) { return x.value < y.value; });
  return d;
}

ExactDist exact_step(const ExactDist& d, double B, const ExactOptions& opts) {
  const std::size_t k = d.atoms.size();
  const std::size_t projected = k * (k + 1) / 2;
  if (projected > opts.atom_cap) {
    throw AtomCapExceeded("exact step would produce " + std::to_string(projected) +
                          " atoms (cap " + std::to_string(opts.atom_cap) + ")");
  }
  std::vector<Atom> pairs;
  pairs.reserve(projected);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& x = d.atoms[i];
    pairs.push_back({pure_step(x.value, B), x.prob * x.prob});
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto& y = d.atoms[j];
      pairs.push_back({(x.value * y.value + (B - 1.0)) / B, 2.0 * x.prob * y.prob});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Atom& a, const Atom& b) {
    return a.value < b.value || (a.value == b.value && a.prob < b.prob);
  });

  ExactDist out;
  out.n = d.n + 1;
  const double kept_in = 1.0 - d.mass_dropped;
  out.mass_dropped = 1.0 - kept_in * kept_in;
  out.atoms.reserve(pairs.size());
  std::size_t i = 0;
  while (i < pairs.size()) {
    const double start = pairs[i].value;
    double p = 0.0, pv = 0.0;
    while (i < pairs.size() && pairs[i].value <= start * (1.0 + opts.merge_tol)) {
      p += pairs[i].prob;
      pv += pairs[i].prob * pairs[i].value;
      ++i;
    }
    if (p < opts.prune_tol) {
      out.mass_dropped += p;
      continue;
    }
    out.atoms.push_back({pv / p, p});
  }
  if (out.atoms.empty()) throw AtomCapExceeded("pruning removed every atom");
  return out;
}

std::vector<ExactLevel> exact_free_energy_seq(const ExactDist& d0, double B, int n_max,
                                              const ExactOptions& opts) {
  const double log_b = std::log(B);
  const double log_k = std::log(kB(B));
  std::vector<ExactLevel> out;
  ExactDist d = d0;
  for (int n = d0.n; n <= n_max; ++n) {
    if (n > d0.n) d = exact_step(d, B, opts);
    ExactLevel lv;
    lv.n = n;
    lv.f = std::ldexp(d.mean_log(), -n);
    lv.lower = lv.f - std::ldexp(log_b, -n);
    lv.upper = lv.f + std::ldexp(log_k, -n);
    lv.mass_dropped = d.mass_dropped;
    lv.atoms = d.atoms.size();
    out.push_back(lv);
  }
  return out;
}

double exact_frac_moment(const ExactDist& d, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0,1)");
  double s = 0.0;
  for (const auto& a : d.atoms) {
    if (a.value > 1.0) s += a.prob * std::pow(a.value - 1.0, gamma);
  }
  return s / d.kept_mass();
}

double exact_tail_prob(const ExactDist& d, double tol) {
  if (!(tol > 0.0)) throw DomainError("tail tolerance must be positive");
  double s = 0.0;
  for (const auto& a : d.atoms) {
    if (std::abs(a.value - 1.0) > tol) s += a.prob;
  }
  return s / d.kept_mass();
}

void write_csv(std::ostream& os, const ExactDist& d) {
  os << "value,prob\n";
  char buf[96];
  for (const auto& a : d.atoms) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", a.value, a.prob);
    os << buf;
  }
}

double ContactWeights::total() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

double ContactWeights::reconstruct(std::span<const double> rewards) const {
  if (rewards.size() != sites()) throw DomainError("one reward per site expected");
  double r = 0.0;
  for (std::size_t mask = 0; mask < weights.size(); ++mask) {
    if (weights[mask] == 0.0) continue;
    double energy = 0.0;
    for (std::size_t i = 0; i < sites(); ++i) {
      if (mask >> i & 1u) energy += rewards[i];
    }
    r += weights[mask] * std::exp(energy);
  }
  return r;
}

ContactWeights contact_weights(int n, double B) {
  require_growth(B);
  if (n < 0 || n > 4) throw DomainError("contact weights are tabulated for 0 <= n <= 4");
  ContactWeights cw;
  cw.B = B;
  cw.weights = {0.0, 1.0};
  for (int level = 0; level < n; ++level) {
    const std::size_t half = cw.weights.size();
    const unsigned shift = 1u << level;  // sites per half
    std::vector<double> next(half * half);
    for (std::size_t right = 0; right < half; ++right) {
      for (std::size_t left = 0; left < half; ++left) {
        next[left | (right << shift)] = cw.weights[left] * cw.weights[right] / B;
      }
    }
    next[0] += (B - 1.0) / B;
    cw.weights = std::move(next);
  }
  cw.n = n;
  return cw;
}

double tree_reduce(std::span<const double> r0, double B) {
  std::vector<double> level(r0.begin(), r0.end());
  if (level.empty() || (level.size() & (level.size() - 1)) != 0) {
    throw DomainError("tree_reduce needs a power-of-two number of sites");
  }
  while (level.size() > 1) {
    for (std::size_t i = 0; i < level.size() / 2; ++i) {
      level[i] = (level[2 * i] * level[2 * i + 1] + (B - 1.0)) / B;
    }
    level.resize(level.size() / 2);
  }
  return level.front();
}

}  // namespace hpin
