#pragma once

// Batch experiment runner. Every module is reachable through a subcommand;
// each run writes report.json plus CSV side files under the output directory
// and exits 0 when all in-run assertions pass, 2 on an assertion failure, and
// 1 on a usage or configuration error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geoxray/identity.hpp"

namespace geoxray::cli {

namespace detail {

using ordered_json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// All numbers are serialized through one fixed format so repeated runs with
// the same configuration produce byte-identical files.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct Config {
  std::string command;
  std::string identity_kind;  // transport | hilbert | conjugate
  std::string metric = "kind:euclidean";
  std::string psi = "radial,amp=0.05";
  int nr = 0, ntheta = 0, nbeta = 0, nalpha = 0, nphi = 0;
  double guard = kGuardBand;
  int seed = 1234;
  std::string out;
  int refine = 0;
  int modes = 8;
  bool plots = false;

  int pick(int flag, int fallback) const { return flag > 0 ? flag : fallback; }
};

inline std::map<std::string, double> parse_kv(const std::string& s) {
  std::map<std::string, double> kv;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw UsageError("expected key=value, got '" + item + "'");
    kv[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  return kv;
}

inline double kv_get(const std::map<std::string, double>& kv,
                     const std::string& key, double fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

inline MetricField metric_from_kind(const std::string& kind,
                                    const std::map<std::string, double>& kv) {
  if (kind == "euclidean") return euclidean_metric();
  if (kind == "conformal") return conformal_bump_metric(kv_get(kv, "c", 0.1));
  if (kind == "constant") return conformal_constant_metric(kv_get(kv, "c", 0.1));
  if (kind == "sheared") return sheared_metric(kv_get(kv, "a", 0.1));
  if (kind == "pullback")
    return pullback(radial_bump_diffeo(kv_get(kv, "amp", 0.05),
                                       kv_get(kv, "r0", 0.2),
                                       kv_get(kv, "r1", 0.8)),
                    euclidean_metric());
  throw UsageError("unknown metric kind '" + kind + "'");
}

inline MetricField metric_from_json(const nlohmann::json& doc) {
  if (!doc.contains("kind")) throw UsageError("metric JSON lacks 'kind'");
  const std::string kind = doc["kind"].get<std::string>();
  std::map<std::string, double> kv;
  if (doc.contains("params"))
    for (const auto& [key, val] : doc["params"].items())
      if (val.is_number()) kv[key] = val.get<double>();
  if (kind == "pullback" && doc.contains("params") &&
      doc["params"].contains("base"))
    return pullback(radial_bump_diffeo(kv_get(kv, "amp", 0.05),
                                       kv_get(kv, "r0", 0.2),
                                       kv_get(kv, "r1", 0.8)),
                    metric_from_json(doc["params"]["base"]));
  return metric_from_kind(kind, kv);
}

// --metric accepts either an inline "kind:name[,key=value,...]" spec or a
// path to a JSON document {"kind": ..., "params": {...}}.
inline MetricField parse_metric(const std::string& spec) {
  if (spec.rfind("kind:", 0) == 0) {
    const std::string rest = spec.substr(5);
    const auto comma = rest.find(',');
    const std::string kind = rest.substr(0, comma);
    std::map<std::string, double> kv;
    if (comma != std::string::npos) kv = parse_kv(rest.substr(comma + 1));
    return metric_from_kind(kind, kv);
  }
  std::ifstream in(spec);
  if (!in) throw UsageError("cannot open metric file '" + spec + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("metric JSON parse failure: ") + e.what());
  }
  return metric_from_json(doc);
}

inline DiskDiffeo parse_psi(const std::string& spec) {
  if (spec == "identity") return identity_diffeo();
  const auto comma = spec.find(',');
  const std::string kind = spec.substr(0, comma);
  std::map<std::string, double> kv;
  if (comma != std::string::npos) kv = parse_kv(spec.substr(comma + 1));
  if (kind == "radial")
    return radial_bump_diffeo(kv_get(kv, "amp", 0.05), kv_get(kv, "r0", 0.2),
                              kv_get(kv, "r1", 0.8));
  throw UsageError("unknown diffeomorphism '" + kind + "'");
}

inline double bump_target(const Vec2& p) {
  return std::exp(-dot(p, p) / (2.0 * 0.2 * 0.2));
}

// Accumulates the run manifest (config echo, artifacts, per-check verdicts)
// and owns the output directory.
class Runner {
 public:
  explicit Runner(const Config& cfg) : cfg_(cfg) {
    std::string dir = cfg.out;
    if (dir.empty()) {
      if (const char* env = std::getenv("OUT_DIR")) dir = env;
      if (dir.empty()) dir = "out";
    }
    dir_ = dir;
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& dir() const { return dir_; }
  const Config& cfg() const { return cfg_; }

  void check(const std::string& name, bool ok, double value = 0.0,
             double bound = 0.0) {
    ordered_json c;
    c["name"] = name;
    c["passed"] = ok;
    if (bound != 0.0) {
      c["value"] = value;
      c["bound"] = bound;
    }
    checks_.push_back(c);
    all_ok_ = all_ok_ && ok;
  }

  void note(const std::string& key, const ordered_json& val) {
    notes_[key] = val;
  }

  std::ofstream open_csv(const std::string& name,
                         const std::string& header) {
    outputs_.push_back(name);
    std::ofstream f(dir_ / name, std::ios::binary);
    f << header << "\n";
    return f;
  }

  // Minimal line plot of a positive series on a log scale, emitted as text.
  void plot(const std::string& name, const std::vector<double>& ys) {
    if (!cfg_.plots || ys.size() < 2) return;
    const double w = 480.0, h = 320.0, margin = 20.0;
    double lo = 1e300, hi = -1e300;
    for (double y : ys)
      if (y > 0.0) {
        lo = std::min(lo, std::log10(y));
        hi = std::max(hi, std::log10(y));
      }
    if (hi <= lo) hi = lo + 1.0;
    outputs_.push_back(name);
    std::ofstream f(dir_ / name, std::ios::binary);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n<polyline fill=\"none\" "
      << "stroke=\"black\" points=\"";
    for (size_t i = 0; i < ys.size(); ++i) {
      const double ly = ys[i] > 0.0 ? std::log10(ys[i]) : lo;
      const double px = margin + (w - 2 * margin) * i / (ys.size() - 1);
      const double py = h - margin - (h - 2 * margin) * (ly - lo) / (hi - lo);
      f << fmt(px) << "," << fmt(py) << " ";
    }
    f << "\"/>\n</svg>\n";
  }

  int finish() {
    ordered_json rep;
    rep["artifact_version"] = "1.0.0";
    rep["timestamp"] = static_cast<long long>(
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
    ordered_json config;
    config["command"] = cfg_.command;
    if (!cfg_.identity_kind.empty()) config["identity"] = cfg_.identity_kind;
    config["metric"] = cfg_.metric;
    config["psi"] = cfg_.psi;
    config["nr"] = cfg_.nr;
    config["ntheta"] = cfg_.ntheta;
    config["nbeta"] = cfg_.nbeta;
    config["nalpha"] = cfg_.nalpha;
    config["nphi"] = cfg_.nphi;
    config["guard"] = cfg_.guard;
    config["seed"] = cfg_.seed;
    config["refine"] = cfg_.refine;
    config["modes"] = cfg_.modes;
    config["plots"] = cfg_.plots;
    rep["config"] = config;
    rep["seed"] = cfg_.seed;
    outputs_.push_back("report.json");
    rep["outputs"] = outputs_;
    for (const auto& [k, v] : notes_.items()) rep[k] = v;
    rep["checks"] = checks_;
    rep["passed"] = all_ok_;
    std::ofstream f(dir_ / "report.json", std::ios::binary);
    f << rep.dump(2) << "\n";
    return all_ok_ ? 0 : 2;
  }

 private:
  Config cfg_;
  std::filesystem::path dir_;
  std::vector<std::string> outputs_;
  ordered_json checks_ = ordered_json::array();
  ordered_json notes_;
  bool all_ok_ = true;
};

inline void write_refinement_table(Runner& run, const IdentityReport& rep) {
  auto csv = run.open_csv("refinement.csv", "grid,residual");
  std::vector<double> series;
  for (const auto& row : rep.table) {
    csv << row.grid << "," << fmt(row.residual) << "\n";
    series.push_back(row.residual);
  }
  run.plot("refinement.svg", series);
  ordered_json j;
  j["residual"] = rep.residual;
  j["min_ratio"] = rep.min_ratio;
  j["max_abs_left"] = rep.max_abs_left;
  run.note("identity", j);
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

inline void run_certify(Runner& run, const MetricField& g) {
  CertifyOptions co;
  co.nbeta = run.cfg().pick(run.cfg().nbeta, co.nbeta);
  co.nalpha = run.cfg().pick(run.cfg().nalpha, co.nalpha);
  co.guard = run.cfg().guard;
  const SimplicityReport rep = certify_simple(g, co);
  ordered_json j;
  j["convex"] = rep.convex;
  j["nontrapping"] = rep.nontrapping;
  j["no_conjugate"] = rep.no_conjugate;
  j["tau_max_observed"] = rep.tau_max_observed;
  j["min_second_fundamental"] = rep.min_second_fundamental;
  run.note("simplicity", j);
  run.check("convex", rep.convex);
  run.check("nontrapping", rep.nontrapping);
  run.check("no_conjugate", rep.no_conjugate);
}

inline void run_distance(Runner& run, const MetricField& g) {
  const int n = run.cfg().pick(run.cfg().nbeta, 12);
  auto csv = run.open_csv("distance.csv", "beta1,beta2,d");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double b1 = kTwoPi * i / n, b2 = kTwoPi * j / n;
      csv << fmt(b1) << "," << fmt(b2) << ","
          << fmt(boundary_distance(g, b1, b2)) << "\n";
    }
  run.check("distance_table_complete", true);
}

inline void run_scatter(Runner& run, const MetricField& g) {
  const int nb = run.cfg().pick(run.cfg().nbeta, 32);
  const int na = run.cfg().pick(run.cfg().nalpha, 16);
  const ScatteringTable table(g, nb, na, run.cfg().guard);
  auto csv = run.open_csv("scatter.csv", "beta,alpha,beta_out,alpha_out,tau");
  const FanGrid& ref = table.tau_grid();
  bool in_range = true;
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < na; ++j) {
      const FanCoordinate fc{ref.beta_node(i), ref.alpha_node(j)};
      const ScatterResult s = table.map(fc);
      in_range = in_range && std::fabs(s.alpha_out) <= kPi / 2 && s.tau > 0.0;
      csv << fmt(fc.beta) << "," << fmt(fc.alpha) << "," << fmt(s.beta_out)
          << "," << fmt(s.alpha_out) << "," << fmt(s.tau) << "\n";
    }
  run.check("exit_data_in_range", in_range);
}

inline void run_xray(Runner& run, const MetricField& g) {
  const int nb = run.cfg().pick(run.cfg().nbeta, 64);
  const int na = run.cfg().pick(run.cfg().nalpha, 32);
  const FanGrid w = xray_fan(g, bump_target, nb, na, run.cfg().guard);
  auto csv = run.open_csv("xray.csv", "beta,alpha,value");
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < na; ++j)
      csv << fmt(w.beta_node(i)) << "," << fmt(w.alpha_node(j)) << ","
          << fmt(w.value(i, j)) << "\n";
  run.check("fan_transform_complete", true);
}

inline void run_normal(Runner& run, const MetricField& g) {
  const int nr = run.cfg().pick(run.cfg().nr, 8);
  const int nth = run.cfg().pick(run.cfg().ntheta, 16);
  BackprojectOptions bo;
  bo.nphi = run.cfg().pick(run.cfg().nphi, 64);
  const DiskGridFunction nf = normal_operator(g, bump_target, nr, nth, bo);
  auto csv = run.open_csv("normal.csv", "x,y,value");
  for (int i = 0; i <= nr; ++i)
    for (int j = 0; j < nth; ++j) {
      const Vec2 p = nf.node_point(i, j);
      csv << fmt(p.x) << "," << fmt(p.y) << "," << fmt(nf.node(i, j)) << "\n";
    }
  run.check("normal_operator_complete", true);
}

inline void run_dn(Runner& run, const MetricField& g, bool euclidean_ref) {
  const int nr = run.cfg().pick(run.cfg().nr, 64);
  const int nth = run.cfg().pick(run.cfg().ntheta, 128);
  auto csv = run.open_csv("dn.csv", "k,type,coefficient,reference,rel_err");
  double worst = 0.0;
  for (int k = 1; k <= run.cfg().modes; ++k)
    for (const bool sine : {false, true}) {
      const BoundaryFunction f0 = BoundaryFunction::harmonic_mode(k, sine, nth);
      const BoundaryFunction lam = dn_map(g, f0, nr, nth);
      double coef = 0.0;
      for (int j = 0; j < nth; ++j) coef += lam.node(j) * f0.node(j);
      coef *= 2.0 / nth;
      const double ref = -static_cast<double>(k);
      const double rel = std::fabs(coef - ref) / k;
      if (euclidean_ref) worst = std::max(worst, rel);
      csv << k << "," << (sine ? "sin" : "cos") << "," << fmt(coef) << ","
          << fmt(ref) << "," << fmt(rel) << "\n";
    }
  if (euclidean_ref)
    run.check("dn_spectrum_matches_reference", worst < 1e-2, worst, 1e-2);
  else
    run.check("dn_spectrum_complete", true);
}

inline void run_identity(Runner& run, const MetricField& g) {
  const std::string& which = run.cfg().identity_kind;
  if (which == "transport") {
    TransportOptions to;
    to.levels = run.cfg().pick(run.cfg().refine, to.levels);
    to.nbeta = run.cfg().pick(run.cfg().nbeta, to.nbeta);
    to.nalpha = run.cfg().pick(run.cfg().nalpha, to.nalpha);
    to.guard = run.cfg().guard;
    const IdentityReport rep = check_transport_identity(g, bump_target, to);
    write_refinement_table(run, rep);
    run.check("residual_small", rep.residual < 5e-3, rep.residual, 5e-3);
    run.check("refinement_ratio", rep.min_ratio >= 1.8, rep.min_ratio, 1.8);
  } else if (which == "hilbert") {
    HilbertOptions ho;
    ho.levels = run.cfg().pick(run.cfg().refine, 2);
    ho.guard = run.cfg().guard;
    const IdentityReport rep = check_hilbert_identity(g, taper_generator(1), ho);
    write_refinement_table(run, rep);
    run.check("residual_small", rep.residual < 5e-2, rep.residual, 5e-2);
    run.check("refinement_ratio", rep.min_ratio >= 1.8, rep.min_ratio, 1.8);
  } else if (which == "conjugate") {
    ConjugateOptions co;
    co.levels = run.cfg().pick(run.cfg().refine, co.levels);
    const ConjugateResult res = check_conjugate_identity(g, 1, false, co);
    write_refinement_table(run, res.report);
    ordered_json j;
    j["target_error"] = res.target_error;
    j["cg_iterations"] = res.cg_iterations;
    run.note("conjugate", j);
    run.check("residual_small", res.report.residual < 5e-2,
              res.report.residual, 5e-2);
    run.check("refinement_ratio", res.report.min_ratio >= 1.8,
              res.report.min_ratio, 1.8);
    run.check("target_error", res.target_error < 5e-2, res.target_error, 5e-2);
  } else {
    throw UsageError("identity needs one of: transport, hilbert, conjugate");
  }
}

inline void run_surjectivity(Runner& run, const MetricField& g) {
  SurjectivityOptions so;
  so.nbeta1 = run.cfg().pick(run.cfg().nbeta, so.nbeta1);
  so.nalpha1 = run.cfg().pick(run.cfg().nalpha, so.nalpha1);
  const SurjectivityResult res = solve_surjectivity(g, bump_target, so);
  auto csv = run.open_csv("cg_history.csv", "iteration,residual_norm");
  for (size_t i = 0; i < res.report.history.size(); ++i)
    csv << i << "," << fmt(res.report.history[i]) << "\n";
  run.plot("cg_history.svg", res.report.history);
  ordered_json j;
  j["iterations"] = res.report.iterations;
  j["rel_residual"] = res.report.rel_residual;
  j["verify_error"] = res.report.verify_error;
  run.note("surjectivity", j);
  run.check("cg_converged", res.report.converged);
  run.check("cg_monotone", res.report.monotone);
  run.check("verify_error", res.report.verify_error < 5e-2,
            res.report.verify_error, 5e-2);
}

inline void run_fbp(Runner& run) {
  const int nr = run.cfg().pick(run.cfg().nr, 32);
  const int nth = run.cfg().pick(run.cfg().ntheta, 64);
  const DiskGridFunction f =
      DiskGridFunction::from_function(bump_target, nr, nth, 1.0, false);
  const DiskGridFunction rec = filtered_backprojection(f);
  auto csv = run.open_csv("fbp.csv", "x,y,target,reconstruction");
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= nr; ++i)
    for (int j = 0; j < nth; ++j) {
      const Vec2 p = rec.node_point(i, j);
      csv << fmt(p.x) << "," << fmt(p.y) << "," << fmt(f.node(i, j)) << ","
          << fmt(rec.node(i, j)) << "\n";
      if (norm(p) > 0.7) continue;
      num += (rec.node(i, j) - f.node(i, j)) * (rec.node(i, j) - f.node(i, j));
      den += f.node(i, j) * f.node(i, j);
    }
  const double err = std::sqrt(num / den);
  run.check("reconstruction_error", err < 5e-2, err, 5e-2);
}

inline void run_thm1(Runner& run, const MetricField& g) {
  const MetricField g2 = pullback(parse_psi(run.cfg().psi), g);
  Theorem1Options opt;
  opt.seed = run.cfg().seed;
  opt.nfan = run.cfg().pick(run.cfg().nbeta, opt.nfan);
  const Theorem1Report rep = theorem1_experiment(g, g2, opt);
  ordered_json j;
  j["max_distance_mismatch"] = rep.max_distance_mismatch;
  j["max_recovered_mismatch"] = rep.max_recovered_mismatch;
  j["max_component_mismatch"] = rep.max_component_mismatch;
  j["max_scatter_mismatch"] = rep.max_scatter_mismatch;
  run.note("rigidity", j);
  run.check("distance_agreement", rep.max_distance_mismatch < 1e-3,
            rep.max_distance_mismatch, 1e-3);
  run.check("experiment_passed", rep.passed);
}

inline void run_thm3(Runner& run, const MetricField& g) {
  Theorem3Options opt;
  const Theorem3Report rep =
      theorem3_experiment(g, parse_psi(run.cfg().psi), run.cfg().modes, opt);
  auto csv = run.open_csv("dn_modes.csv", "k,type,rel_diff");
  for (const auto& m : rep.dn)
    csv << m.k << "," << (m.sine ? "sin" : "cos") << "," << fmt(m.rel_diff)
        << "\n";
  ordered_json j;
  j["max_distance_mismatch"] = rep.max_distance_mismatch;
  j["max_dn_mismatch"] = rep.max_dn_mismatch;
  j["target_error"] = rep.target_error;
  j["cr_residual"] = rep.cr_residual;
  j["conjugate_residual"] = rep.conjugate.residual;
  j["conjugate_min_ratio"] = rep.conjugate.min_ratio;
  run.note("gauge", j);
  run.check("dn_agreement", rep.dn_passed, rep.max_dn_mismatch, 1e-2);
  run.check("mechanism_stages", rep.mech_passed);
  run.check("experiment_passed", rep.passed);
}

}  // namespace detail

inline int run(int argc, char** argv) {
  detail::Config cfg;
  CLI::App app{"geodesic integral-geometry laboratory"};
  app.require_subcommand(1);

  const std::vector<std::string> names = {
      "certify", "distance", "scatter", "xray",          "normal", "dn",
      "identity", "fbp",     "thm1",    "surjectivity",  "thm3"};
  for (const std::string& name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--metric", cfg.metric,
                    "metric spec: JSON file or inline kind:name[,k=v,...]");
    sub->add_option("--nr", cfg.nr);
    sub->add_option("--ntheta", cfg.ntheta);
    sub->add_option("--nbeta", cfg.nbeta);
    sub->add_option("--nalpha", cfg.nalpha);
    sub->add_option("--nphi", cfg.nphi);
    sub->add_option("--guard", cfg.guard);
    sub->add_option("--seed", cfg.seed);
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--refine", cfg.refine, "refinement levels");
    sub->add_option("--modes", cfg.modes, "boundary modes");
    sub->add_option("--psi", cfg.psi, "diffeo: identity or radial[,amp=..]");
    sub->add_flag("--plots", cfg.plots, "emit SVG plots");
    if (name == "identity")
      sub->add_option("kind", cfg.identity_kind, "transport|hilbert|conjugate")
          ->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fprintf(stderr, "error: %s\n%s", e.what(), app.help().c_str());
    return 1;
  }
  cfg.command = app.get_subcommands().front()->get_name();

  try {
    detail::Runner runner(cfg);
    const MetricField g = detail::parse_metric(cfg.metric);
    const bool euclidean_ref = (cfg.metric == "kind:euclidean");
    if (cfg.command == "certify") detail::run_certify(runner, g);
    else if (cfg.command == "distance") detail::run_distance(runner, g);
    else if (cfg.command == "scatter") detail::run_scatter(runner, g);
    else if (cfg.command == "xray") detail::run_xray(runner, g);
    else if (cfg.command == "normal") detail::run_normal(runner, g);
    else if (cfg.command == "dn") detail::run_dn(runner, g, euclidean_ref);
    else if (cfg.command == "identity") detail::run_identity(runner, g);
    else if (cfg.command == "surjectivity") detail::run_surjectivity(runner, g);
    else if (cfg.command == "fbp") detail::run_fbp(runner);
    else if (cfg.command == "thm1") detail::run_thm1(runner, g);
    else if (cfg.command == "thm3") detail::run_thm3(runner, g);
    return runner.finish();
  } catch (const detail::UsageError& e) {
    fprintf(stderr, "error: %s\n%s", e.what(), app.help().c_str());
    return 1;
  } catch (const GeoxrayError& e) {
    fprintf(stderr, "assertion failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace geoxray::cli
