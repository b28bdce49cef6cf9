#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "hpin/phase.hpp"

using namespace hpin;

namespace {

const double kLog2 = std::log(2.0);

CertifyOptions small_certify(std::size_t M, int n_max) {
  CertifyOptions co;
  co.mc.M = M;
  co.n_max = n_max;
  return co;
}

}  // namespace

TEST_CASE("gamma grid") {
  const auto g3 = default_gamma_grid(3.0);
  REQUIRE(!g3.empty());
  for (double g : g3) {
    CHECK(g > kLog2 / std::log(3.0));
    CHECK(g < 1.0);
  }
  CHECK(g3.front() == doctest::Approx(0.65));
  CHECK(g3.back() == doctest::Approx(0.95));
  CHECK(default_gamma_grid(6.0).size() == 9);
  CHECK(default_gamma_grid(6.0).front() == doctest::Approx(0.55));
}

TEST_CASE("certify at beta = 0 is decided exactly") {
  const auto g = DisorderSpec::gaussian();
  const auto below = certify({3.0, 0.0, kLog2 - 0.05}, g);
  CHECK(below.verdict == Verdict::Delocalized);
  CHECK(below.rigorous);
  CHECK(below.a_upper < below.threshold);
  CHECK(below.gamma > kLog2 / std::log(3.0));

  const auto above = certify({3.0, 0.0, kLog2 + 0.05}, g);
  CHECK(above.verdict == Verdict::Localized);
  CHECK(above.rigorous);
  CHECK(above.f_lower > 0.0);
}

TEST_CASE("certify examples") {
  // Large beta with unbounded disorder: R_0 -> 0 and A_0 drops below threshold.
  const auto big = certify({3.0, 3.0, kLog2}, DisorderSpec::gaussian(), small_certify(20000, 25));
  CHECK(big.verdict == Verdict::Delocalized);

  // Rademacher is bounded: half the sites keep R_0 near 4 and A_0 stays above
  // every threshold, so no delocalization certificate exists at this beta.
  const auto rad0 = exact_init({3.0, 3.0, kLog2}, DisorderSpec::rademacher());
  for (double gm : default_gamma_grid(3.0)) {
    CHECK(exact_frac_moment(rad0, gm) > std::pow(3.0, gm) - 2.0);
  }
  const auto rad = certify({3.0, 3.0, kLog2}, DisorderSpec::rademacher(), small_certify(20000, 25));
  CHECK(rad.verdict != Verdict::Delocalized);

  const auto g = certify({4.0, 0.8, std::log(3.0) + 1e-4}, DisorderSpec::gaussian(),
                         small_certify(20000, 25));
  CHECK(g.verdict == Verdict::Delocalized);
  CHECK_FALSE(g.rigorous);
  CHECK(g.confidence == 0.99);
  CHECK(g.a_upper < g.threshold);
  CHECK(g.threshold == doctest::Approx(std::pow(4.0, g.gamma) - 2.0));

  const auto loc = certify({3.0, 0.5, kLog2 + 0.4}, DisorderSpec::gaussian(),
                           small_certify(20000, 25));
  CHECK(loc.verdict == Verdict::Localized);
  CHECK(loc.f_lower > 0.0);
}

TEST_CASE("rigorous certificates drive the moment map to zero") {
  const auto rad = DisorderSpec::rademacher();
  for (double h : {kLog2 - 0.3, kLog2 - 0.15}) {
    const auto c = certify({3.0, 0.5, h}, rad);
    REQUIRE(c.verdict == Verdict::Delocalized);
    CHECK(c.rigorous);
    const auto orbit = frac_moment_bound_orbit(c.a_upper, 3.0, c.gamma, 200);
    REQUIRE(orbit.size() == 201);
    for (std::size_t k = 1; k < orbit.size(); ++k) CHECK(orbit[k] <= orbit[k - 1]);
    CHECK(orbit.back() < 1e-12);
  }
  // At the threshold the map has a fixed point.
  const double g = 0.8;
  const auto fixed = frac_moment_bound_orbit(std::pow(3.0, g) - 2.0, 3.0, g, 10);
  CHECK(fixed.back() == doctest::Approx(fixed.front()));
}

TEST_CASE("bracket at beta = 0 collapses onto log(B-1)") {
  BracketOptions bo;
  bo.tol_h = 0.002;
  const auto br = bracket_hc(3.0, 0.0, DisorderSpec::gaussian(), bo);
  CHECK(br.resolved);
  CHECK(br.h_deloc < kLog2);
  CHECK(br.h_loc > kLog2);
  CHECK(br.gap <= bo.tol_h);
  // Only h_c itself can stay undecided: the orbit sits on the fixed point.
  for (const auto& p : br.probes) {
    if (p.cert.verdict == Verdict::Undecided) CHECK(std::abs(p.h - kLog2) <= 1e-12);
  }
}

TEST_CASE("bracket sanity and monotone verdicts") {
  BracketOptions bo;
  bo.certify = small_certify(20000, 18);
  bo.tol_h = 0.01;
  const double beta = 0.6;
  const auto br = bracket_hc(3.0, beta, DisorderSpec::gaussian(), bo);
  const double lo = kLog2 - bo.tol_h, hi = kLog2 + 0.5 * beta * beta + bo.tol_h;
  REQUIRE(std::isfinite(br.h_deloc));
  REQUIRE(std::isfinite(br.h_loc));
  CHECK(br.h_deloc < br.h_loc);
  CHECK(br.h_deloc >= lo);
  CHECK(br.h_loc <= hi);
  std::uint64_t spent = 0;
  for (const auto& p : br.probes) {
    spent += p.cert.pool_steps;
    for (const auto& q : br.probes) {
      if (p.h < q.h && p.cert.verdict == Verdict::Localized) {
        CHECK(q.cert.verdict != Verdict::Delocalized);
      }
    }
  }
  CHECK(spent == br.budget_spent);

  std::ostringstream os;
  write_probes_csv(os, br.probes, beta);
  CHECK(os.str().rfind("beta,h,verdict,level,gamma,a_upper,threshold,f_lower,confidence,"
                       "rigorous,pool_steps\n",
                       0) == 0);

  // A tiny budget is reported, not hidden.
  BracketOptions poor = bo;
  poor.budget = 1;
  const auto ex = bracket_hc(3.0, beta, DisorderSpec::gaussian(), poor);
  CHECK(ex.exhausted);
  CHECK_FALSE(ex.resolved);
}

TEST_CASE("relative bracket tolerance") {
  BracketOptions bo;
  bo.certify = small_certify(20000, 20);
  bo.tol_h = 1e-6;
  bo.rel_tol = 0.5;
  bo.max_outward_steps = 2;
  const auto br = bracket_hc(6.0, 1.0, DisorderSpec::gaussian(), bo);
  if (br.resolved) {
    CHECK(br.gap <= 0.5 * (0.5 * (br.h_deloc + br.h_loc) - std::log(5.0)));
  }
  bo.rel_tol = 1.0;
  CHECK_THROWS_AS(bracket_hc(6.0, 1.0, DisorderSpec::gaussian(), bo), DomainError);
}

TEST_CASE("scaling study preconditions") {
  const auto g = DisorderSpec::gaussian();
  CHECK_THROWS_AS(scaling_study(6.0, {0.5}, g), DomainError);
  CHECK_THROWS_AS(scaling_study(6.0, {0.5, 0.8}, g), DomainError);
  CHECK_THROWS_AS(scaling_study(3.0, {0.5, 1.0}, g), DomainError);
  CHECK(shift_exponent(6.0) == doctest::Approx(3.1100109564821596).epsilon(1e-12));
  CHECK(shift_exponent(10.0) == doctest::Approx(2.436794381162259).epsilon(1e-12));
}

TEST_CASE("scaling study refuses unresolved brackets") {
  BracketOptions bo;
  bo.certify = small_certify(5000, 10);
  bo.tol_h = 0.2;
  const auto res = scaling_study(6.0, {0.5, 1.0}, DisorderSpec::gaussian(), bo);
  CHECK_FALSE(res.fitted);
  CHECK(!res.refusal.empty());
  CHECK(res.rows.size() == 2);
}

TEST_CASE("irrelevance check") {
  const auto g = DisorderSpec::gaussian();
  McConfig mc;
  mc.M = 2000;
  mc.replicas = 4;
  const auto zero = irrelevance_check(3.0, 0.0, g, {0.05, 0.1}, mc, 20);
  for (const auto& row : zero) {
    CHECK(row.ratio == 1.0);
    CHECK(row.quenched.std_error == 0.0);
  }
  // Delta(beta) = 1.5 exceeds the threshold 1 at B = 3.
  const double beta = std::sqrt(std::log1p(1.5 / 4.0));
  CHECK(delta_of_beta(3.0, beta, g) == doctest::Approx(1.5));
  CHECK_THROWS_AS(irrelevance_check(3.0, beta, g, {0.1}, mc, 20), DomainError);
  CHECK_THROWS_AS(irrelevance_check(6.0, 0.3, g, {0.1}, mc, 20), DomainError);

  mc.M = 20000;
  const auto rows = irrelevance_check(3.0, 0.3, g, {0.1}, mc, 22);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].h == doctest::Approx(kLog2 + 0.1));
  CHECK(rows[0].annealed == doctest::Approx(pure_free_energy(3.0, kLog2 + 0.1)));
  CHECK(rows[0].ratio_lower <= rows[0].ratio);
  CHECK(rows[0].ratio <= 1.0 + 4.0 * rows[0].quenched.std_error / rows[0].annealed);
}

TEST_CASE("marginal probe") {
  const double Bc = 2.0 + std::sqrt(2.0);
  CHECK_THROWS_AS(marginal_probe(3.0, {0.6}, DisorderSpec::gaussian()), DomainError);
  BracketOptions bo;
  bo.tol_h = 0.002;
  const auto rows = marginal_probe(Bc, {0.0}, DisorderSpec::gaussian(), bo);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].curve == 0.0);
  CHECK(rows[0].shift_upper > 0.0);
  CHECK(rows[0].shift_upper <= bo.tol_h);
  CHECK(std::exp(-kLog2 * kLog2 / 0.72) == doctest::Approx(0.5130).epsilon(1e-4));
}

TEST_CASE("annealed exponent fit") {
  const auto fit = annealed_exponent_fit(3.0);
  CHECK(std::abs(fit.h_c - kLog2) <= 1e-9);
  CHECK(std::abs(fit.fit.slope / fit.target - 1.0) <= 0.05);
  CHECK(fit.deltas.size() == 31);
}

TEST_CASE("tilted mean of R_0") {
  const auto g = DisorderSpec::gaussian();
  const ModelParams p{6.0, 0.5, kLog2};
  CHECK(tilted_mean_r0(p, g, 0.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(std::abs(tilted_mean_r0(p, g, 0.1) - 2.0 * std::exp(-0.05)) <= 1e-12);
  CHECK(std::abs(tilted_mean_r0(p, g, 0.1) - 1.9024588) <= 1e-7);
  double prev = tilted_mean_r0(p, DisorderSpec::rademacher(), 0.0);
  for (double lam = 0.05; lam <= 0.5; lam += 0.05) {
    const double cur = tilted_mean_r0(p, DisorderSpec::rademacher(), lam);
    CHECK(cur < prev);
    prev = cur;
  }
  CHECK_THROWS_AS(tilted_mean_r0(p, g, -0.1), DomainError);

  // Against the empirical tilted pool.
  for (const auto& dis : {g, DisorderSpec::rademacher()}) {
    const auto pool = pool_init(p, dis, 400000, 4, 0, 0.2);
    std::vector<double> r;
    r.reserve(pool.size());
    for (double l : pool.logs) r.push_back(std::exp(l));
    const auto me = mean_and_stderr(r);
    CHECK(std::abs(me.mean - tilted_mean_r0(p, dis, 0.2)) <= 4.0 * me.std_error);
  }
  // lambda = 0 is the plain law, bit for bit.
  CHECK(pool_init(p, g, 1000, 4, 0, 0.0).logs == pool_init(p, g, 1000, 4, 0).logs);
}

TEST_CASE("tilt experiment") {
  TiltOptions o;
  o.samples = 512;
  o.n0_cap = 10;
  const auto rep = tilt_experiment(6.0, 0.6, DisorderSpec::gaussian(), o);
  CHECK(rep.spec.n0 >= 1);
  CHECK(rep.spec.lambda == doctest::Approx(rep.spec.delta / std::sqrt(std::ldexp(1.0, rep.spec.n0))));
  CHECK(rep.spec.lambda <= rep.beta);
  CHECK(rep.median_tilted < rep.median_plain);
  CHECK(rep.conc_tilted >= rep.conc_plain);
  CHECK(rep.mean_log_lr_exact == doctest::Approx(-0.5 * rep.spec.delta * rep.spec.delta));
  CHECK(std::abs(rep.mean_log_lr - rep.mean_log_lr_exact) <= 4.0 * rep.mean_log_lr_stderr);
  CHECK(rep.untilted_lower >= 0.0);
  CHECK(rep.h == doctest::Approx(h_of_epsilon(6.0, 0.1 * std::pow(0.6, shift_exponent(6.0)))));

  o.threads = 3;
  const auto again = tilt_experiment(6.0, 0.6, DisorderSpec::gaussian(), o);
  CHECK(again.median_plain == rep.median_plain);
  CHECK(again.mean_log_lr == rep.mean_log_lr);

  CHECK_THROWS_AS(tilt_experiment(6.0, 0.6, DisorderSpec::rademacher(), o), DomainError);
  CHECK_THROWS_AS(tilt_experiment(3.0, 0.6, DisorderSpec::gaussian(), o), DomainError);
}
