#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "cli.hpp"
#include "config.hpp"
#include "hpin/exact.hpp"
#include "hpin/io.hpp"
#include "hpin/mc.hpp"
#include "hpin/model.hpp"
#include "hpin/phase.hpp"

namespace hpin::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  json results = json::object();
  std::vector<std::pair<std::string, bool>> gates;
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  std::vector<std::string> lines;                          // human summary
};

struct Command {
  std::string name;
  std::string help;
  std::vector<std::string> keys;
  std::map<std::string, std::string> defaults;
  std::function<Outcome(RunConfig&, unsigned)> run;
};

std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    s += fmt_real(xs[i]);
  }
  return s;
}

std::string fmt_short(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// h from either h or eps; echoes both into the results.
double resolve_h(const RunConfig& cfg, double B, Outcome& o) {
  const auto h = cfg.real("h");
  const auto eps = cfg.real("eps");
  if (h && eps) throw UsageError("give h or eps, not both");
  if (!h && !eps) throw UsageError("missing h (or eps)");
  const double hv = h ? *h : h_of_epsilon(B, *eps);
  o.results["h"] = hv;
  o.results["eps"] = eps ? *eps : epsilon_of_h(B, hv);
  return hv;
}

McConfig mc_config(const RunConfig& cfg, unsigned threads) {
  McConfig mc;
  const long long M = cfg.integer("M", 100000);
  const long long reps = cfg.integer("replicas", 8);
  if (M < 2) throw DomainError("M must be at least 2");
  if (reps < 1) throw DomainError("replicas must be at least 1");
  mc.M = static_cast<std::size_t>(M);
  mc.replicas = static_cast<int>(reps);
  mc.seed = cfg.u64("seed", 1);
  mc.threads = threads;
  return mc;
}

CertifyOptions certify_options(const RunConfig& cfg, double B, unsigned threads) {
  CertifyOptions co;
  co.n_max = static_cast<int>(cfg.integer("n_max", 25));
  co.mc = mc_config(cfg, threads);
  co.gamma_grid = cfg.reals("gamma_grid", default_gamma_grid(B));
  co.confidence = cfg.real("confidence", 0.99);
  co.exact_level_cap = static_cast<int>(cfg.integer("exact_level_cap", 4));
  return co;
}

BracketOptions bracket_options(const RunConfig& cfg, double B, unsigned threads) {
  BracketOptions bo;
  bo.certify = certify_options(cfg, B, threads);
  bo.budget = cfg.u64("budget", bo.budget);
  bo.tol_h = cfg.real("tol_h", bo.tol_h);
  bo.rel_tol = cfg.real("rel_tol", bo.rel_tol);
  bo.common_random_numbers = cfg.flag("common_random_numbers", true);
  return bo;
}

json certificate_json(const Certificate& c) {
  return {{"verdict", to_string(c.verdict)}, {"level", c.level},
          {"gamma", c.gamma},                {"a_upper", c.a_upper},
          {"threshold", c.threshold},        {"f_lower", c.f_lower},
          {"confidence", c.confidence},      {"rigorous", c.rigorous},
          {"pool_steps", c.pool_steps}};
}

json bracket_json(const CriticalBracket& br, double B) {
  return {{"beta", br.beta},
          {"h_c0", std::log(B - 1.0)},
          {"h_deloc", br.h_deloc},
          {"h_loc", br.h_loc},
          {"gap", br.gap},
          {"undecided_lo", br.undecided_lo},
          {"undecided_hi", br.undecided_hi},
          {"budget_spent", br.budget_spent},
          {"exhausted", br.exhausted},
          {"resolved", br.resolved},
          {"probes", br.probes.size()}};
}

std::string bracket_line(const CriticalBracket& br, double B) {
  const double hc0 = std::log(B - 1.0);
  return "beta=" + fmt_short(br.beta) + "  bracket [" + fmt_real(br.h_deloc) + ", " +
         fmt_real(br.h_loc) + "]  shift in [" + fmt_short(br.h_deloc - hc0) + ", " +
         fmt_short(br.h_loc - hc0) + "]  gap=" + fmt_short(br.gap) +
         (br.resolved ? "" : (br.exhausted ? "  (budget exhausted)" : "  (unresolved)"));
}

// ---------------------------------------------------------------------------

Outcome cmd_anneal(RunConfig& cfg, unsigned) {
  Outcome o;
  const double B = cfg.real("B", 3.0);
  require_growth(B);
  const AnnealedExponentFit fit =
      annealed_exponent_fit(B, cfg.real("delta_min", 1e-6), cfg.real("delta_max", 1e-3),
                            static_cast<int>(cfg.integer("points", 31)));
  const double exact_hc = std::log(B - 1.0);
  const double rel = std::abs(fit.fit.slope - fit.target) / fit.target;
  o.results["h_c"] = fit.h_c;
  o.results["h_c_error"] = std::abs(fit.h_c - exact_hc);
  o.results["alpha"] = alpha(B);
  o.results["exponent_target"] = fit.target;
  o.results["slope"] = fit.fit.slope;
  o.results["slope_stderr"] = fit.fit.slope_stderr;
  o.results["slope_rel_error"] = rel;
  o.results["residuals"] = fit.fit.residuals;
  o.gates.push_back({"h_c_within_1e-9", std::abs(fit.h_c - exact_hc) <= 1e-9});
  o.gates.push_back({"exponent_within_5pct", rel <= 0.05});

  std::ostringstream fcsv;
  fcsv << "delta,f,residual\n";
  for (std::size_t i = 0; i < fit.deltas.size(); ++i) {
    fcsv << fmt_real(fit.deltas[i]) << ',' << fmt_real(fit.free_energies[i]) << ','
         << fmt_real(fit.fit.residuals[i]) << '\n';
  }
  o.files.push_back({"anneal_fit.csv", fcsv.str()});
  o.lines.push_back("h_c = " + fmt_real(fit.h_c) + "  (log(B-1) = " + fmt_real(exact_hc) + ")");
  o.lines.push_back("slope of log f(0, h_c + delta) = " + fmt_short(fit.fit.slope) +
                    "  target 1/alpha = " + fmt_short(fit.target));

  if (cfg.has("h") || cfg.has("eps")) {
    const double h = resolve_h(cfg, B, o);
    const int N = static_cast<int>(cfg.integer("N", 30));
    o.results["f0"] = pure_free_energy(B, h);
    std::ostringstream ocsv;
    ocsv << "n,log_r,r,z\n";
    double lr = h;
    for (int n = 0; n <= N; ++n) {
      const double r = std::exp(lr);
      ocsv << n << ',' << fmt_real(lr) << ',' << fmt_real(r) << ','
           << fmt_real(logistic_conjugate(r, B)) << '\n';
      lr = log_pure_step(lr, B);
    }
    o.files.push_back({"anneal_orbit.csv", ocsv.str()});
    o.lines.push_back("h = " + fmt_real(h) + "  eps = " + fmt_real(o.results["eps"].get<double>()) +
                      "  f(0,h) = " + fmt_real(o.results["f0"].get<double>()));
  }
  return o;
}

Outcome cmd_fe(RunConfig& cfg, unsigned threads) {
  Outcome o;
  const double B = cfg.real("B", 3.0);
  require_growth(B);
  const double h = resolve_h(cfg, B, o);
  const ModelParams p{B, cfg.real("beta", 0.0), h};
  const DisorderSpec dis = DisorderSpec::parse(cfg.str("disorder", "gaussian"));
  const McConfig mc = mc_config(cfg, threads);
  if (mc.replicas < 2) throw DomainError("fe needs replicas >= 2");
  const int N = static_cast<int>(cfg.integer("N", 20));
  if (N < 0) throw DomainError("N must be non-negative");
  Ensemble ens(p, dis, mc);
  std::vector<FreeEnergyEstimate> rows;
  for (int n = 0;; ++n) {
    rows.push_back(free_energy_estimate(n, B, ens.summarize({}, 1.0)));
    if (n == N) break;
    ens.step();
  }
  std::ostringstream csv;
  write_trajectory_csv(csv, rows);
  o.files.push_back({"fe_trajectory.csv", csv.str()});
  const int bins = static_cast<int>(cfg.integer("bins", 0));
  if (bins > 0) {
    std::ostringstream hist;
    write_histogram_csv(hist, ens.pools().front(), bins);
    o.files.push_back({"fe_histogram.csv", hist.str()});
  }
  const auto& r = rows.back();
  o.results["N"] = N;
  o.results["f"] = r.f;
  o.results["stderr"] = r.std_error;
  o.results["lower"] = r.lower;
  o.results["upper"] = r.upper;
  o.results["annealed_f"] = pure_free_energy(B, h);
  o.lines.push_back("f_N = " + fmt_real(r.f) + " +- " + fmt_short(r.std_error) + "  sandwich [" +
                    fmt_real(r.lower) + ", " + fmt_real(r.upper) + "]");
  return o;
}

Outcome cmd_certify(RunConfig& cfg, unsigned threads) {
  Outcome o;
  const double B = cfg.real("B", 3.0);
  require_growth(B);
  const double h = resolve_h(cfg, B, o);
  const ModelParams p{B, cfg.real("beta", 0.0), h};
  const DisorderSpec dis = DisorderSpec::parse(cfg.str("disorder", "gaussian"));
  const Certificate c = certify(p, dis, certify_options(cfg, B, threads));
  o.results["certificate"] = certificate_json(c);
  if (cfg.has("expect")) {
    o.gates.push_back({"expected_verdict", cfg.str("expect", "") == to_string(c.verdict)});
  }
  o.lines.push_back(std::string(to_string(c.verdict)) + " at level " + std::to_string(c.level) +
                    (c.rigorous ? " (rigorous)" : " (statistical, confidence " +
                                                      fmt_short(c.confidence) + ")"));
  return o;
}

Outcome cmd_hc(RunConfig& cfg, unsigned threads) {
  Outcome o;
  const double B = cfg.real("B", 3.0);
  require_growth(B);
  const double beta = cfg.real("beta", 0.0);
  const DisorderSpec dis = DisorderSpec::parse(cfg.str("disorder", "gaussian"));
  const CriticalBracket br = bracket_hc(B, beta, dis, bracket_options(cfg, B, threads));
  o.results["bracket"] = bracket_json(br, B);
  o.results["window"] = {std::log(B - 1.0), std::log(B - 1.0) + log_mgf(dis, beta)};
  std::ostringstream csv;
  write_probes_csv(csv, br.probes, beta);
  o.files.push_back({"hc_probes.csv", csv.str()});
  o.gates.push_back({"resolved", br.resolved});
  o.lines.push_back(bracket_line(br, B));
  return o;
}

Outcome cmd_scaling(RunConfig& cfg, unsigned threads) {
  Outcome o;
  const double B = cfg.real("B", 6.0);
  require_growth(B);
  const auto betas = cfg.reals("betas", {});
  const DisorderSpec dis = DisorderSpec::parse(cfg.str("disorder", "gaussian"));
  const ScalingResult res = scaling_study(B, betas, dis, bracket_options(cfg, B, threads));
  std::ostringstream csv, probes;
  csv << "beta,shift,halfwidth,h_deloc,h_loc,gap,resolved\n";
  probes << "beta,h,verdict,level,gamma,a_upper,threshold,f_lower,confidence,rigorous,pool_steps\n";
  json rows = json::array();
  for (const auto& r : res.rows) {
    csv << fmt_real(r.beta) << ',' << fmt_real(r.shift) << ',' << fmt_real(r.halfwidth) << ','
        << fmt_real(r.bracket.h_deloc) << ',' << fmt_real(r.bracket.h_loc) << ','
        << fmt_real(r.bracket.gap) << ',' << (r.bracket.resolved ? 1 : 0) << '\n';
    std::ostringstream one;
    write_probes_csv(one, r.bracket.probes, r.beta);
    const std::string s = one.str();
    probes << s.substr(s.find('\n') + 1);
    rows.push_back(bracket_json(r.bracket, B));
    o.lines.push_back(bracket_line(r.bracket, B));
  }
  o.files.push_back({"scaling.csv", csv.str()});
  o.files.push_back({"scaling_probes.csv", probes.str()});
  o.results["rows"] = rows;
  o.results["fitted"] = res.fitted;
  o.results["refusal"] = res.refusal;
  o.results["target"] = res.target;
  o.gates.push_back({"fitted", res.fitted});
  if (res.fitted) {
    const double rel = std::abs(res.fit.slope - res.target) / res.target;
    o.results["slope"] = res.fit.slope;
    o.results["slope_stderr"] = res.fit.slope_stderr;
    o.results["slope_rel_error"] = rel;
    o.gates.push_back({"slope_within_tol", rel <= cfg.real("slope_tol", 0.25)});
    o.lines.push_back("slope = " + fmt_short(res.fit.slope) + " +- " +
                      fmt_short(res.fit.slope_stderr) + "  target " + fmt_short(res.target));
  } else {
    o.lines.push_back("no fit: " + res.refusal);
  }
  return o;
}

Outcome cmd_marginal(RunConfig& cfg, unsigned threads) {
  Outcome o;
  const double B = cfg.real("B", kCriticalGrowth);
  const auto betas = cfg.reals("betas", {});
  const DisorderSpec dis = DisorderSpec::parse(cfg.str("disorder", "gaussian"));
  const BracketOptions bo = bracket_options(cfg, B, threads);
  const auto rows = marginal_probe(B, betas, dis, bo);
  std::ostringstream csv;
  csv << "beta,shift_upper,curve,h_deloc,h_loc,gap\n";
  json jr = json::array();
  bool positive = true, collapse = true;
  for (const auto& r : rows) {
    csv << fmt_real(r.beta) << ',' << fmt_real(r.shift_upper) << ',' << fmt_real(r.curve) << ','
        << fmt_real(r.bracket.h_deloc) << ',' << fmt_real(r.bracket.h_loc) << ','
        << fmt_real(r.bracket.gap) << '\n';
    jr.push_back({{"beta", r.beta},
                  {"shift_upper", r.shift_upper},
                  {"curve", r.curve},
                  {"bracket", bracket_json(r.bracket, B)}});
    if (r.beta > 0.0) positive = positive && r.shift_upper > 0.0;
    if (r.beta == 0.0) collapse = collapse && std::abs(r.shift_upper) <= bo.tol_h;
    o.lines.push_back("beta=" + fmt_short(r.beta) + "  h_loc - h_c(0) = " +
                      fmt_short(r.shift_upper) + "  curve " + fmt_short(r.curve));
  }
  o.files.push_back({"marginal.csv", csv.str()});
  o.results["rows"] = jr;
  o.gates.push_back({"shift_upper_positive", positive});
  o.gates.push_back({"beta0_collapse", collapse});
  return o;
}

Outcome cmd_tilt(RunConfig& cfg, unsigned threads) {
  Outcome o;
  const double B = cfg.real("B", 6.0);
  require_growth(B);
  const DisorderSpec dis = DisorderSpec::parse(cfg.str("disorder", "gaussian"));
  TiltOptions t;
  t.eta = cfg.real("eta", t.eta);
  t.n0 = static_cast<int>(cfg.integer("n0", -1));
  t.delta = cfg.real("delta", -1.0);
  t.a = cfg.real("a", -1.0);
  t.x = cfg.real("x", t.x);
  t.samples = static_cast<std::size_t>(cfg.integer("samples", 4096));
  t.seed = cfg.u64("seed", 1);
  t.threads = threads;
  const TiltReport r = tilt_experiment(B, cfg.real("beta", 0.6), dis, t);
  o.results = {{"h", r.h},
               {"eps", r.eps},
               {"n0", r.spec.n0},
               {"delta", r.spec.delta},
               {"lambda", r.spec.lambda},
               {"a", r.a},
               {"x", r.x},
               {"samples", r.samples},
               {"tilted_mean_r0", tilted_mean_r0({B, r.beta, r.h}, dis, r.spec.lambda)},
               {"median_plain", r.median_plain},
               {"median_tilted", r.median_tilted},
               {"conc_plain", r.conc_plain},
               {"conc_tilted", r.conc_tilted},
               {"lr_small_freq", r.lr_small_freq},
               {"lr_small_exact", r.lr_small_exact},
               {"lr_bound_shape", r.lr_bound_shape},
               {"untilted_lower", r.untilted_lower},
               {"mean_log_lr", r.mean_log_lr},
               {"mean_log_lr_stderr", r.mean_log_lr_stderr},
               {"mean_log_lr_exact", r.mean_log_lr_exact}};
  o.gates.push_back({"median_decreases", r.median_tilted < r.median_plain});
  o.gates.push_back({"log_lr_mean",
                     std::abs(r.mean_log_lr - r.mean_log_lr_exact) <= 4.0 * r.mean_log_lr_stderr});
  o.lines.push_back("n0=" + std::to_string(r.spec.n0) + " delta=" + fmt_short(r.spec.delta) +
                    " lambda=" + fmt_short(r.spec.lambda) + "  median R: plain " +
                    fmt_short(r.median_plain) + ", tilted " + fmt_short(r.median_tilted));
  o.lines.push_back("P~(dP/dP~ < e^-a) = " + fmt_short(r.lr_small_freq) + " (closed form " +
                    fmt_short(r.lr_small_exact) + ")  untilted lower bound " +
                    fmt_short(r.untilted_lower));
  return o;
}

Outcome cmd_exact_check(RunConfig& cfg, unsigned threads) {
  Outcome o;
  const double B = cfg.real("B", 3.0);
  require_growth(B);
  const double h = resolve_h(cfg, B, o);
  const ModelParams p{B, cfg.real("beta", 0.5), h};
  const DisorderSpec dis = DisorderSpec::parse(cfg.str("disorder", "rademacher"));
  if (!dis.has_finite_support()) throw DomainError("exact-check needs finite-support disorder");
  const int levels = static_cast<int>(cfg.integer("levels", 4));
  if (levels < 1) throw DomainError("levels must be at least 1");
  const auto gammas = cfg.reals("gammas", {0.6, 0.8});
  for (double g : gammas) {
    if (!(g > 0.0 && g < 1.0)) throw DomainError("gammas must lie in (0,1)");
  }
  const double tail_tol = cfg.real("tail_tol", 0.05);
  const McConfig mc = mc_config(cfg, threads);
  if (mc.replicas < 2) throw DomainError("exact-check needs replicas >= 2");

  ExactDist d = exact_init(p, dis);
  Ensemble ens(p, dis, mc);
  std::ostringstream csv;
  csv << "n,quantity,exact,mc,stderr,zscore,gated,pass\n";
  bool all = true;
  for (int n = 1; n <= levels; ++n) {
    d = exact_step(d, B);
    ens.step();
    const auto sums = ens.summarize(gammas, tail_tol, true);
    struct Row {
      std::string name;
      double exact;
      std::vector<double> per;
    };
    std::vector<Row> rows;
    Row f{"f", std::ldexp(d.mean_log(), -n), {}}, tail{"tail", exact_tail_prob(d, tail_tol), {}},
        mean{"mean_R", d.mean(), {}};
    for (const auto& s : sums) {
      f.per.push_back(std::ldexp(s.mean_log, -n));
      tail.per.push_back(s.tail);
      mean.per.push_back(std::exp(s.log_mean));
    }
    rows.push_back(f);
    for (std::size_t g = 0; g < gammas.size(); ++g) {
      Row a{"A_" + fmt_short(gammas[g]), exact_frac_moment(d, gammas[g]), {}};
      for (const auto& s : sums) a.per.push_back(s.frac[g]);
      rows.push_back(a);
    }
    rows.push_back(tail);
    rows.push_back(mean);
    for (const auto& r : rows) {
      const MeanError me = mean_and_stderr(r.per);
      const double diff = me.mean - r.exact;
      const bool pass = me.std_error > 0.0 ? std::abs(diff) <= 3.0 * me.std_error
                                           : std::abs(diff) <= 1e-12 * std::abs(r.exact);
      const double zs = me.std_error > 0.0 ? diff / me.std_error : 0.0;
      // Gates: free energy and fractional moments at the deepest level.
      const bool gated = n == levels && (r.name == "f" || r.name.rfind("A_", 0) == 0);
      csv << n << ',' << r.name << ',' << fmt_real(r.exact) << ',' << fmt_real(me.mean) << ','
          << fmt_real(me.std_error) << ',' << fmt_real(zs) << ',' << (gated ? 1 : 0) << ','
          << (pass ? 1 : 0) << '\n';
      if (gated) {
        o.gates.push_back({r.name + "_level" + std::to_string(n), pass});
        all = all && pass;
        o.lines.push_back("n=" + std::to_string(n) + " " + r.name + ": exact " +
                          fmt_short(r.exact) + "  mc " + fmt_short(me.mean) + " +- " +
                          fmt_short(me.std_error) + (pass ? "  ok" : "  FAIL"));
      }
    }
  }
  std::ostringstream dist;
  write_csv(dist, d);
  o.files.push_back({"exact_check.csv", csv.str()});
  o.files.push_back({"exact_check_dist.csv", dist.str()});
  o.results["levels"] = levels;
  o.results["atoms"] = d.atoms.size();
  o.results["mass_dropped"] = d.mass_dropped;
  o.results["all_pass"] = all;
  return o;
}

Outcome cmd_irrelevance(RunConfig& cfg, unsigned threads) {
  Outcome o;
  const double B = cfg.real("B", 3.0);
  const double beta = cfg.real("beta", 0.3);
  const DisorderSpec dis = DisorderSpec::parse(cfg.str("disorder", "gaussian"));
  const auto offsets = cfg.reals("offsets", {0.1});
  const McConfig mc = mc_config(cfg, threads);
  const double conf = cfg.real("confidence", 0.99);
  const auto rows = irrelevance_check(B, beta, dis, offsets, mc,
                                      static_cast<int>(cfg.integer("N", 25)), conf);
  const double min_ratio = cfg.real("min_ratio", 0.5);
  std::ostringstream csv;
  csv << "offset,h,f_quenched,stderr,f_annealed,ratio,ratio_lower\n";
  json jr = json::array();
  bool ok = true;
  for (const auto& r : rows) {
    csv << fmt_real(r.offset) << ',' << fmt_real(r.h) << ',' << fmt_real(r.quenched.f) << ','
        << fmt_real(r.quenched.std_error) << ',' << fmt_real(r.annealed) << ','
        << fmt_real(r.ratio) << ',' << fmt_real(r.ratio_lower) << '\n';
    jr.push_back({{"offset", r.offset},
                  {"f_quenched", r.quenched.f},
                  {"stderr", r.quenched.std_error},
                  {"f_annealed", r.annealed},
                  {"ratio", r.ratio},
                  {"ratio_lower", r.ratio_lower}});
    ok = ok && r.ratio_lower >= min_ratio;
    o.lines.push_back("h - h_c = " + fmt_short(r.offset) + "  ratio " + fmt_short(r.ratio) +
                      "  lower " + fmt_short(r.ratio_lower));
  }
  o.results["delta_beta"] = delta_of_beta(B, beta, dis);
  o.results["threshold"] = irrelevance_threshold(B);
  o.results["rows"] = jr;
  o.files.push_back({"irrelevance.csv", csv.str()});
  o.gates.push_back({"ratio_lower_bound", ok});
  return o;
}

// ---------------------------------------------------------------------------

const std::vector<std::string> kMc = {"disorder", "M", "replicas", "seed"};
const std::vector<std::string> kCertify = {"n_max", "gamma_grid", "confidence", "exact_level_cap"};
const std::vector<std::string> kBracket = {"tol_h", "rel_tol", "budget",
                                           "common_random_numbers"};

std::vector<std::string> cat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

const std::map<std::string, std::string> kMcDefaults = {
    {"M", "100000"}, {"replicas", "8"}, {"seed", "1"}};
const std::map<std::string, std::string> kCertifyDefaults = {
    {"n_max", "25"}, {"confidence", "0.99"}, {"exact_level_cap", "4"}};
const std::map<std::string, std::string> kBracketDefaults = {
    {"tol_h", "0.004"}, {"rel_tol", "0"}, {"budget", "2000000000"}, {"common_random_numbers", "true"}};

std::map<std::string, std::string> merged(
    std::initializer_list<std::map<std::string, std::string>> parts) {
  std::map<std::string, std::string> out;
  for (const auto& p : parts) out.insert(p.begin(), p.end());
  return out;
}

std::vector<Command> commands() {
  return {
      {"anneal",
       "annealed critical point, exponent fit and pure orbit",
       {"B", "h", "eps", "N", "delta_min", "delta_max", "points"},
       {{"B", "3"}, {"N", "30"}, {"delta_min", "1e-6"}, {"delta_max", "1e-3"}, {"points", "31"}},
       cmd_anneal},
      {"fe",
       "Monte Carlo free-energy trajectory with sandwich bounds",
       cat({{"B", "beta", "h", "eps", "N", "bins"}, kMc}),
       merged({{{"B", "3"}, {"beta", "0"}, {"N", "20"}, {"bins", "0"}, {"disorder", "gaussian"}},
               kMcDefaults}),
       cmd_fe},
      {"certify",
       "delocalization / localization certificate at one (beta, h)",
       cat({{"B", "beta", "h", "eps", "expect"}, kMc, kCertify}),
       merged({{{"B", "3"}, {"beta", "0"}, {"disorder", "gaussian"}}, kMcDefaults,
               kCertifyDefaults}),
       cmd_certify},
      {"hc",
       "bracket h_c(beta) by bisection over certificates",
       cat({{"B", "beta"}, kMc, kCertify, kBracket}),
       merged({{{"B", "3"}, {"beta", "0"}, {"disorder", "gaussian"}}, kMcDefaults,
               kCertifyDefaults, kBracketDefaults}),
       cmd_hc},
      {"scaling",
       "critical-shift exponent fit over several betas (B > 2 + sqrt 2)",
       cat({{"B", "betas", "slope_tol"}, kMc, kCertify, kBracket}),
       merged({{{"B", "6"}, {"slope_tol", "0.25"}, {"disorder", "gaussian"}}, kMcDefaults,
               kCertifyDefaults, kBracketDefaults}),
       cmd_scaling},
      {"marginal",
       "shift upper brackets at B = 2 + sqrt 2",
       cat({{"B", "betas"}, kMc, kCertify, kBracket}),
       merged({{{"B", fmt_real(kCriticalGrowth)}, {"disorder", "gaussian"}}, kMcDefaults,
               kCertifyDefaults, kBracketDefaults}),
       cmd_marginal},
      {"tilt",
       "tilted-measure experiment (Gaussian disorder)",
       {"B", "beta", "disorder", "eta", "n0", "delta", "a", "x", "samples", "seed"},
       {{"B", "6"},
        {"beta", "0.6"},
        {"disorder", "gaussian"},
        {"eta", "0.1"},
        {"n0", "-1"},
        {"delta", "-1"},
        {"a", "-1"},
        {"x", "0.1"},
        {"samples", "4096"},
        {"seed", "1"}},
       cmd_tilt},
      {"exact-check",
       "Monte Carlo estimators against the exact oracle",
       cat({{"B", "beta", "h", "eps", "levels", "gammas", "tail_tol"}, kMc}),
       merged({{{"B", "3"},
                {"beta", "0.5"},
                {"disorder", "rademacher"},
                {"levels", "4"},
                {"gammas", "0.6,0.8"},
                {"tail_tol", "0.05"}},
               kMcDefaults}),
       cmd_exact_check},
      {"irrelevance",
       "quenched over annealed free energy for B < 2 + sqrt 2",
       cat({{"B", "beta", "offsets", "N", "confidence", "min_ratio"}, kMc}),
       merged({{{"B", "3"},
                {"beta", "0.3"},
                {"disorder", "gaussian"},
                {"offsets", "0.1"},
                {"N", "25"},
                {"confidence", "0.99"},
                {"min_ratio", "0.5"}},
               kMcDefaults}),
       cmd_irrelevance},
  };
}

std::string file_stem(const std::string& name) {
  std::string s = name;
  for (char& c : s) {
    if (c == '-') c = '_';
  }
  return s;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const std::vector<Command> cmds = commands();
  CLI::App app{"hpin: hierarchical pinning model with quenched disorder"};
  app.set_version_flag("--version", HPIN_VERSION);
  app.set_help_flag("--help", "print this help and exit");  // -h would shadow --h
  app.require_subcommand(1);

  struct Bound {
    CLI::App* sub = nullptr;
    std::map<std::string, std::string> flags;
    std::string config_file, summary_file, out_dir;
    unsigned threads = 1;
  };
  std::vector<Bound> bound(cmds.size());
  for (std::size_t i = 0; i < cmds.size(); ++i) {
    Bound& b = bound[i];
    b.sub = app.add_subcommand(cmds[i].name, cmds[i].help);
    b.sub->add_option("--config", b.config_file, "key = value config file");
    b.sub->add_option("--from-summary", b.summary_file, "rerun the config of a JSON summary");
    b.sub->add_option("--out", b.out_dir, "output directory (default $HPIN_OUT_DIR or .)");
    b.sub->add_option("--threads", b.threads, "worker threads (0 = all cores)");
    for (const auto& key : cmds[i].keys) {
      b.sub->add_option("--" + key, b.flags[key], config_schema().at(key));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  for (std::size_t i = 0; i < cmds.size(); ++i) {
    Bound& b = bound[i];
    if (!b.sub->parsed()) continue;
    const Command& cmd = cmds[i];
    try {
      RunConfig cfg;
      for (const auto& [k, v] : cmd.defaults) cfg.set(k, v);
      if (!b.summary_file.empty()) {
        std::ifstream in(b.summary_file);
        if (!in) throw UsageError("cannot read summary " + b.summary_file);
        const json j = json::parse(in);
        if (j.value("command", "") != cmd.name) {
          throw UsageError("summary was written by '" + j.value("command", "") + "'");
        }
        // A summary carries the full resolved config, so it replaces the defaults.
        cfg = RunConfig{};
        for (const auto& [k, v] : j.at("config").items()) cfg.set(k, v.get<std::string>());
      }
      if (!b.config_file.empty()) cfg.merge(RunConfig::load(b.config_file));
      for (const auto& key : cmd.keys) {
        if (b.sub->count("--" + key) > 0) cfg.set(key, b.flags[key]);
      }
      // eps and h are exclusive; an explicit one on the command line wins.
      auto given = [&](const char* name) {
        const CLI::Option* opt = b.sub->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
      };
      if (given("--h") && !given("--eps")) cfg.erase("eps");
      if (given("--eps") && !given("--h")) cfg.erase("h");
      RunConfig resolved;
      for (const auto& key : cmd.keys) {
        if (cfg.has(key)) resolved.set(key, cfg.str(key, ""));
      }
      if (resolved.has("B") && !resolved.has("gamma_grid") &&
          std::find(cmd.keys.begin(), cmd.keys.end(), "gamma_grid") != cmd.keys.end()) {
        const double B = resolved.real("B", 3.0);
        if (B > 2.0) resolved.set("gamma_grid", join(default_gamma_grid(B)));
      }

      Outcome o = cmd.run(resolved, b.threads);

      const fs::path dir = resolve_output_dir(b.out_dir);
      const std::string stem = file_stem(cmd.name);
      json summary;
      summary["tool"] = "hpin";
      summary["version"] = HPIN_VERSION;
      summary["command"] = cmd.name;
      summary["config"] = resolved.values();
      if (resolved.has("seed")) summary["seed"] = resolved.u64("seed", 1);
      summary["results"] = o.results;
      json gates = json::object();
      bool pass = true;
      for (const auto& [name, ok] : o.gates) {
        gates[name] = ok;
        pass = pass && ok;
      }
      summary["gates"] = gates;
      summary["pass"] = pass;
      json files = json::array();
      for (const auto& [name, content] : o.files) {
        write_file_atomic(dir / name, content);
        files.push_back(name);
      }
      files.push_back(stem + ".json");
      summary["files"] = files;
      write_file_atomic(dir / (stem + ".json"), summary.dump(2) + "\n");

      for (const auto& line : o.lines) out << line << '\n';
      for (const auto& [name, ok] : o.gates) {
        out << "gate " << name << ": " << (ok ? "pass" : "FAIL") << '\n';
      }
      out << "wrote " << (dir / (stem + ".json")).string() << '\n';
      return pass ? 0 : 1;
    } catch (const UsageError& e) {
      err << "usage error: " << e.what() << '\n';
      return 2;
    } catch (const DomainError& e) {
      err << "domain error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 2;
    }
  }
  return 2;
}

}  // namespace hpin::cli
