#pragma once

#include "appendix.hpp"
#include "diagnostics.hpp"
#include "estimation.hpp"
#include "evidence.hpp"
#include "io.hpp"
#include "mcmc.hpp"
#include "posterior_normal.hpp"
#include "priors.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace gevbayes::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr const char* kOutputDirEnv = "GEVBAYES_OUTPUT_DIR";
inline constexpr const char* kRunSchema = "gevbayes.run/1";

/// Everything a run depends on; echoed into each output.
struct RunConfig {
  std::string command;
  std::string data;  // input file; empty means simulate from theta0
  std::vector<double> theta0{1.0, 0.0, 0.5};
  std::string prior = "flat";
  std::vector<std::size_t> ns{500};
  std::vector<std::uint64_t> seeds{1};
  double tol = 1e-6;
  std::string out;  // empty means stdout
  std::string csv;
  unsigned jobs = 1;
  std::string format = "jsonl";
  double radius = 0.2;
  bool full3d = false;
  bool regions = false;
  std::size_t iter = 20000;
  std::size_t burn = 5000;
  int cases = 100;
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = {{"command", c.command}, {"theta0", c.theta0}, {"prior", c.prior}, {"n", c.ns},
                      {"seeds", c.seeds},     {"tol", c.tol}};
  if (!c.data.empty()) j["data"] = c.data;
  if (c.command == "evidence") j["full3d"] = c.full3d;
  if (c.command == "regions") j["radius"] = c.radius;
  if (c.command == "mcmc") {
    j["iter"] = c.iter;
    j["burn"] = c.burn;
  }
  if (c.command == "study") {
    j["regions"] = c.regions;
    j["radius"] = c.radius;
    j["jobs"] = c.jobs;
  }
  if (c.command == "checkfun") j["cases"] = c.cases;
  return j;
}

/// "flat", "power:alpha", "expdecay:c,knot" or "normal:m_lt,s_lt,m_mu,s_mu,m_xi,s_xi".
inline PriorSpec parse_prior(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  std::vector<double> args;
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      double v;
      if (!detail::parse_double(detail::trim(tok), v)) throw std::invalid_argument("bad prior parameter '" + tok + "'");
      args.push_back(v);
    }
  }
  auto want = [&](std::size_t k) {
    if (args.size() != k)
      throw std::invalid_argument("prior '" + name + "' takes " + std::to_string(k) + " parameter(s)");
  };
  if (name == "flat") {
    want(0);
    return flat_prior();
  }
  if (name == "power") {
    want(1);
    return power_prior(args[0]);
  }
  if (name == "expdecay") {
    want(2);
    return expdecay_prior(args[0], args[1]);
  }
  if (name == "normal") {
    want(6);
    return normal_proper_prior(args[0], args[1], args[2], args[3], args[4], args[5]);
  }
  throw std::invalid_argument("unknown prior '" + name + "'");
}

/// Relative output paths are placed under $GEVBAYES_OUTPUT_DIR when it is set.
inline std::string resolve_output(const std::string& path) {
  if (path.empty() || path == "-") return path;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  const char* dir = std::getenv(kOutputDirEnv);
  if (dir == nullptr || *dir == '\0') return path;
  return (std::filesystem::path(dir) / p).string();
}

/// Output sink: a file when a path is given, else the supplied stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    const std::string p = resolve_output(path);
    if (!p.empty() && p != "-") {
      const auto parent = std::filesystem::path(p).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
      file_ = std::make_unique<std::ofstream>(p);
      if (!*file_) throw IoError("cannot write " + p);
      os_ = file_.get();
    }
  }
  std::ostream& os() { return *os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_;
};

inline nlohmann::json header(const RunConfig& c) {
  return {{"type", "header"}, {"schema", kRunSchema}, {"tool_version", kToolVersion}, {"config", to_json(c)}};
}

inline GevParams theta0_of(const RunConfig& c) {
  if (c.theta0.size() != 3) throw std::invalid_argument("--theta0 needs three values tau,mu,xi");
  const GevParams p{c.theta0[0], c.theta0[1], c.theta0[2]};
  if (!p.valid()) throw std::invalid_argument("--theta0: tau must be positive");
  return p;
}

inline Sample input_sample(const RunConfig& c) {
  if (!c.data.empty()) return load_sample(c.data);
  return gev_sample(theta0_of(c), c.ns.at(0), c.seeds.at(0));
}

inline nlohmann::json mat_json(const Mat3& m) {
  nlohmann::json j = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) j.push_back({jnum(m(i, 0)), jnum(m(i, 1)), jnum(m(i, 2))});
  return j;
}

inline void emit(std::ostream& os, const nlohmann::json& j) { os << j.dump() << '\n'; }

// ---------------------------------------------------------------------------
// subcommands

inline int cmd_simulate(const RunConfig& c, std::ostream& out) {
  const GevParams th = theta0_of(c);
  Sink sink(c.out, out);
  sink.os() << "# " << header(c).dump() << '\n';
  write_values(sink.os(), gev_sample(th, c.ns.at(0), c.seeds.at(0)).values());
  return kExitOk;
}

inline int cmd_fit(const RunConfig& c, std::ostream& out) {
  const Sample s = input_sample(c);
  const PriorSpec pr = parse_prior(c.prior);
  const MleFit fit = fit_gev(s);
  Sink sink(c.out, out);
  const double n = static_cast<double>(s.n());
  double sum_t = kNaN, lb = kNaN, c1 = kNaN;
  if (fit.converged) {
    sum_t = sum_stat(fit.theta_hat, s, SumStatIndex(0, 1, 0));
    c1 = c1_statistic(fit);
    lb = log_Bn(fit, pr, s);
  }
  if (c.format == "text") {
    std::ostream& os = sink.os();
    char buf[256];
    std::snprintf(buf, sizeof buf, "theta_hat tau=%.10g mu=%.10g xi=%.10g\n", fit.theta_hat.tau, fit.theta_hat.mu,
                  fit.theta_hat.xi);
    os << buf << "status " << fit.status << '\n';
    std::snprintf(buf, sizeof buf, "log_lik %.12g\n", fit.log_lik_at_max);
    os << buf;
    std::snprintf(buf, sizeof buf, "sum w^(-1/xi) = %.12g (n = %zu, rel err %.3g)\n", sum_t, s.n(),
                  std::abs(sum_t - n) / n);
    os << buf;
    std::snprintf(buf, sizeof buf, "log_Bn %.12g\nc1 %.6g\n", lb, c1);
    os << buf;
  } else {
    emit(sink.os(), header(c));
    emit(sink.os(), {{"type", "fit"},
                     {"n", s.n()},
                     {"theta_hat", to_json(fit.theta_hat)},
                     {"converged", fit.converged},
                     {"status", fit.status},
                     {"iterations", fit.iterations},
                     {"log_lik", jnum(fit.log_lik_at_max)},
                     {"obs_info", mat_json(fit.obs_info)},
                     {"c1", jnum(c1)},
                     {"log_Bn", jnum(lb)},
                     {"score_identity", {{"sum_w_pow", jnum(sum_t)}, {"n", s.n()}, {"rel_err", jnum(std::abs(sum_t - n) / n)}}}});
  }
  return fit.converged ? kExitOk : kExitNumerical;
}

inline int cmd_evidence(const RunConfig& c, std::ostream& out) {
  const Sample s = input_sample(c);
  const PriorSpec pr = parse_prior(c.prior);
  const MleFit fit = fit_gev(s);
  if (!fit.converged) throw NumericalError("fit did not converge: " + fit.status);
  EvidenceOptions eo;
  eo.tol = c.tol;
  eo.full3d = c.full3d;
  const EvidenceResult ev = log_Cn(s, pr, eo, &fit);
  const double lb = log_Bn(fit, pr, s);
  Sink sink(c.out, out);
  emit(sink.os(), header(c));
  emit(sink.os(), {{"type", "evidence"},
                   {"n", s.n()},
                   {"theta_hat", to_json(fit.theta_hat)},
                   {"log_Cn", jnum(ev.log_Cn)},
                   {"abs_err_log", jnum(ev.abs_err_log)},
                   {"method", to_string(ev.method)},
                   {"converged", ev.converged},
                   {"log_Bn", jnum(lb)},
                   {"log_Cn_minus_log_Bn", jnum(ev.log_Cn - lb)},
                   {"lower_bound_holds", ev.log_Cn >= lb - 1e-4}});
  return ev.converged ? kExitOk : kExitNumerical;
}

inline int cmd_regions(const RunConfig& c, std::ostream& out) {
  const Sample s = input_sample(c);
  const PriorSpec pr = parse_prior(c.prior);
  const MleFit fit = fit_gev(s);
  if (!fit.converged) throw NumericalError("fit did not converge: " + fit.status);
  const RegionRadii rr = region_radii(fit.theta_hat, c.radius);
  const EvidenceResult ev = log_Cn(s, pr, c.tol);
  const RegionMasses m = region_masses(s, pr, rr, fit, c.tol);
  Sink sink(c.out, out);
  emit(sink.os(), header(c));
  nlohmann::json regs = nlohmann::json::array();
  bool conv = ev.converged;
  for (int k = 0; k < 5; ++k) {
    regs.push_back({{"region", k + 1},
                    {"log_mass", jnum(m.log_mass[k])},
                    {"log_fraction", jnum(m.log_mass[k] - ev.log_Cn)},
                    {"rel_err", jnum(m.log_err[k])},
                    {"converged", m.converged[k]}});
    conv = conv && m.converged[k];
  }
  conv = conv && m.converged[5];
  emit(sink.os(), {{"type", "regions"},
                   {"n", s.n()},
                   {"radii", {{"r", rr.r}, {"r1", rr.r1}, {"r2", rr.r2}, {"log_r3", rr.log_r3}}},
                   {"log_Cn", jnum(ev.log_Cn)},
                   {"log_ball", jnum(m.log_ball)},
                   {"ball_fraction", jnum(std::exp(m.log_ball - ev.log_Cn))},
                   {"log_total", jnum(m.log_total())},
                   {"regions", regs}});
  return conv ? kExitOk : kExitNumerical;
}

inline int cmd_mcmc(const RunConfig& c, std::ostream& out) {
  const Sample s = input_sample(c);
  const PriorSpec pr = parse_prior(c.prior);
  McmcOptions mo;
  mo.n_iter = c.iter;
  mo.burn_in = c.burn;
  mo.seed = c.seeds.at(0);
  const BvmReport r = bvm_check(s, pr, mo);
  Sink sink(c.out, out);
  emit(sink.os(), header(c));
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : r.boxes)
    boxes.push_back({{"a", {jnum(b.box.a[0]), jnum(b.box.a[1]), jnum(b.box.a[2])}},
                     {"b", {jnum(b.box.b[0]), jnum(b.box.b[1]), jnum(b.box.b[2])}},
                     {"empirical", b.empirical},
                     {"expected", b.expected},
                     {"deviation", b.deviation},
                     {"mc_se", b.mc_se}});
  emit(sink.os(), {{"type", "mcmc"},
                   {"n", s.n()},
                   {"draws", r.n_draws},
                   {"acceptance_rate", r.acceptance_rate},
                   {"min_ess", r.min_ess},
                   {"max_box_deviation", r.max_deviation},
                   {"ks", {r.ks[0], r.ks[1], r.ks[2]}},
                   {"z_mean", {r.z_mean[0], r.z_mean[1], r.z_mean[2]}},
                   {"z_cov", mat_json(r.z_cov)},
                   {"boxes", boxes}});
  return kExitOk;
}

inline int cmd_study(const RunConfig& c, std::ostream& out) {
  StudyConfig sc;
  sc.theta0 = theta0_of(c);
  sc.prior = c.prior;
  sc.ns = c.ns;
  sc.seeds = c.seeds;
  sc.tol = c.tol;
  sc.regions = c.regions;
  sc.region_r = c.radius;
  sc.jobs = c.jobs;
  const StudyReport rep = cn_bn_study(sc, parse_prior(c.prior));
  {
    Sink sink(c.out, out);
    write_study_jsonl(sink.os(), rep);
  }
  if (!c.csv.empty()) {
    Sink csv(c.csv, out);
    write_study_csv(csv.os(), rep);
  }
  for (const auto& r : rep.records)
    if (!r.ok) return kExitNumerical;
  return kExitOk;
}

inline int cmd_checkfun(const RunConfig& c, std::ostream& out) {
  const std::uint64_t seed = c.seeds.at(0);
  std::vector<SweepResult> sweeps{carlson_sweep(c.cases, seed), incgamma_sweep(c.cases, seed),
                                  beta_sweep(c.cases, seed), gp_moment_sweep(c.cases, seed),
                                  spacing_sweep(c.cases, seed, c.ns.at(0))};
  Sink sink(c.out, out);
  emit(sink.os(), header(c));
  bool ok = true;
  for (const auto& r : sweeps) {
    emit(sink.os(), {{"type", "sweep"},
                     {"name", r.name},
                     {"cases", r.cases},
                     {"held", r.held},
                     {"skipped", r.skipped},
                     {"worst_margin", jnum(r.worst)}});
    ok = ok && r.all_hold();
  }
  return ok ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------

/// Entry point; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Bayesian GEV inference and posterior-normality checks", "gevbayes"};
  app.set_version_flag("--version", kToolVersion);
  app.set_config("--config", "", "read options from a TOML/INI file")->check(CLI::ExistingFile);
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);

  RunConfig cfg;
  auto common = [&](CLI::App* sub, bool data, bool many) {
    if (data) sub->add_option("--data", cfg.data, "input sample, one observation per line");
    sub->add_option("--theta0", cfg.theta0, "tau,mu,xi for simulated data")->delimiter(',')->expected(3);
    sub->add_option("--prior", cfg.prior, "flat | power:a | expdecay:c,knot | normal:6 values");
    auto* n = sub->add_option("--n", cfg.ns, "sample size(s)")->delimiter(',');
    auto* s = sub->add_option("--seed,--seeds", cfg.seeds, "seed(s)")->delimiter(',');
    if (!many) {
      n->expected(1);
      s->expected(1);
    }
    sub->add_option("--tol", cfg.tol, "quadrature tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--out", cfg.out, "output path (default stdout)");
  };

  auto* simulate = app.add_subcommand("simulate", "write a GEV sample");
  common(simulate, false, false);
  auto* fit = app.add_subcommand("fit", "MLE and Laplace summary");
  common(fit, true, false);
  fit->add_option("--format", cfg.format, "jsonl or text")->check(CLI::IsMember({"jsonl", "text"}));
  auto* evidence = app.add_subcommand("evidence", "log C_n, log B_n and their difference");
  common(evidence, true, false);
  evidence->add_flag("--full3d", cfg.full3d, "use the brute-force 3D quadrature");
  auto* regions = app.add_subcommand("regions", "posterior mass by sub-region");
  common(regions, true, false);
  regions->add_option("--radius", cfg.radius, "ball radius r")->check(CLI::PositiveNumber);
  auto* mcmc = app.add_subcommand("mcmc", "sample the posterior and compare with its normal limit");
  common(mcmc, true, false);
  mcmc->add_option("--iter", cfg.iter, "total iterations");
  mcmc->add_option("--burn", cfg.burn, "burn-in iterations");
  auto* study = app.add_subcommand("study", "C_n against B_n over an (n, seed) grid");
  common(study, false, true);
  study->add_flag("--regions", cfg.regions, "also compute region masses");
  study->add_option("--radius", cfg.radius, "ball radius r")->check(CLI::PositiveNumber);
  study->add_option("--jobs", cfg.jobs, "worker threads")->check(CLI::PositiveNumber);
  study->add_option("--csv", cfg.csv, "summary CSV path");
  auto* checkfun = app.add_subcommand("checkfun", "randomized sweeps of the auxiliary inequalities");
  common(checkfun, false, false);
  checkfun->add_option("--cases", cfg.cases, "cases per inequality")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << kToolVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "gevbayes: " << e.what() << '\n';
    return kExitUsage;
  }
  const CLI::App* sub = app.get_subcommands().front();
  cfg.command = sub->get_name();
  if (cfg.command == "checkfun" && sub->count("--n") == 0) cfg.ns = {10000};

  try {
    if (cfg.command == "simulate") return cmd_simulate(cfg, out);
    if (cfg.command == "fit") return cmd_fit(cfg, out);
    if (cfg.command == "evidence") return cmd_evidence(cfg, out);
    if (cfg.command == "regions") return cmd_regions(cfg, out);
    if (cfg.command == "mcmc") return cmd_mcmc(cfg, out);
    if (cfg.command == "study") return cmd_study(cfg, out);
    if (cfg.command == "checkfun") return cmd_checkfun(cfg, out);
  } catch (const std::invalid_argument& e) {
    err << "gevbayes: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "gevbayes: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "gevbayes: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "gevbayes: " << e.what() << '\n';
    return kExitNumerical;
  }
  err << "gevbayes: unknown subcommand\n";
  return kExitUsage;
}

}  // namespace gevbayes::cli
