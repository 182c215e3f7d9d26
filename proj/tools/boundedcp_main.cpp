// boundedcp: change-point analysis of bounded count time series.
//
// Subcommands:
//   simulate    draw a series from a (possibly segmented) model
//   test        CUSUM parameter-change test on a series file
//   segment     multiple change-point estimation by penalized search
//   experiment  Monte Carlo batteries (size/power, segmentation quality)

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "boundedcp/bar_model.hpp"
#include "boundedcp/cusum.hpp"
#include "boundedcp/errors.hpp"
#include "boundedcp/estimation.hpp"
#include "boundedcp/evaluation.hpp"
#include "boundedcp/io.hpp"
#include "boundedcp/segmentation.hpp"
#include "boundedcp/version.hpp"

namespace bcp = boundedcp;
using json = nlohmann::ordered_json;

namespace {

std::string fmtf(double x, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, x);
  return buf;
}

std::string fmtg(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

std::string now_utc_iso() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int default_threads() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Master seed: flag wins, then BOUNDEDCP_SEED, then entropy. Explicitly
// seeded runs must be byte-identical, so they carry no timestamp.
struct SeedChoice {
  std::uint64_t value = 0;
  bool explicit_seed = false;
};

SeedChoice resolve_seed(bool flag_given, std::uint64_t flag_value) {
  if (flag_given) return {flag_value, true};
  if (const char* env = std::getenv("BOUNDEDCP_SEED")) {
    std::uint64_t v = 0;
    const char* last = env + std::string(env).size();
    auto [ptr, ec] = std::from_chars(env, last, v);
    if (ec != std::errc{} || ptr != last) {
      throw bcp::OutOfDomain(
          "BOUNDEDCP_SEED must be an unsigned integer, got '" +
          std::string(env) + "'");
    }
    return {v, true};
  }
  std::random_device rd;
  std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  v ^= static_cast<std::uint64_t>(
      std::chrono::steady_clock::now().time_since_epoch().count());
  return {v, false};
}

json make_manifest(const std::string& command, const json& config,
                   const SeedChoice& seed, const std::string& input_checksum) {
  json m;
  m["command"] = command;
  m["version"] = bcp::kVersion;
  m["seed"] = seed.value;
  m["seed_explicit"] = seed.explicit_seed;
  m["config"] = config;
  m["input_checksum"] = input_checksum;
  m["created_utc"] = seed.explicit_seed ? std::string() : now_utc_iso();
  return m;
}

void write_json_report(const std::string& path, const json& report) {
  if (path == "-") {
    std::cout << report.dump(2) << "\n";
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bcp::ParseError(0, "cannot open '" + path + "' for writing");
  out << report.dump(2) << "\n";
  if (!out) throw bcp::ParseError(0, "failed while writing '" + path + "'");
}

bcp::Method parse_method(const std::string& name) {
  if (name == "cls") return bcp::Method::cls;
  if (name == "mql") return bcp::Method::mql;
  if (name == "cml") return bcp::Method::cml;
  throw bcp::OutOfDomain("unknown method '" + name + "' (cls, mql, cml)");
}

bcp::SegmentLikelihood parse_likelihood(const std::string& name) {
  if (name == "cls-plugin") return bcp::SegmentLikelihood::cls_plugin;
  if (name == "full-cml") return bcp::SegmentLikelihood::full_cml;
  throw bcp::OutOfDomain("unknown likelihood '" + name +
                         "' (cls-plugin, full-cml)");
}

struct LoadedSeries {
  bcp::BoundedSeries series;
  bool inferred = false;
  std::string checksum;
};

LoadedSeries load_series(const std::string& path, int upper_bound_flag) {
  std::optional<int> ub;
  if (upper_bound_flag > 0) ub = upper_bound_flag;
  bcp::ReadResult r = bcp::read_series(path, ub);
  if (r.inferred_bound) std::cerr << "WARNING: " << r.warning << "\n";
  return {std::move(r.series), r.inferred_bound, bcp::hex64(bcp::fnv1a_file(path))};
}

json input_block(const LoadedSeries& in) {
  json j;
  j["n"] = static_cast<int>(in.series.counts.size());
  j["N"] = in.series.upper_bound;
  j["upper_bound_inferred"] = in.inferred;
  return j;
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
  std::string out;
  std::string scenario;
  std::string model_file;
  std::string segment_start = "carry-over";
  int n = 0;
  int upper_bound = 0;
  double p = 0.0;
  double rho = 0.0;
  bool p_set = false, rho_set = false, ub_set = false;
  bool seed_set = false;
  std::uint64_t seed = 0;
  std::string json_path;
};

bcp::SegmentedModel model_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bcp::ParseError(0, "cannot open '" + path + "' for reading");
  json j = json::parse(in);
  bcp::SegmentedModel model;
  model.upper_bound = j.at("upper_bound").get<int>();
  for (const auto& s : j.at("segments")) {
    model.segment_params.push_back(
        bcp::make_params(s.at("p").get<double>(), s.at("rho").get<double>()));
  }
  if (j.contains("change_points")) {
    model.change_points = j["change_points"].get<std::vector<int>>();
  }
  if (model.change_points.size() + 1 != model.segment_params.size()) {
    throw bcp::OutOfDomain(
        "model file needs one more segment than change-points");
  }
  return model;
}

int cmd_simulate(const SimulateOpts& opt) {
  const int mode_count = (opt.scenario.empty() ? 0 : 1) +
                         (opt.model_file.empty() ? 0 : 1) +
                         ((opt.p_set || opt.rho_set) ? 1 : 0);
  if (mode_count != 1) {
    throw bcp::OutOfDomain(
        "pick exactly one of --scenario, --model, or --p/--rho");
  }

  bcp::SegmentedModel model;
  if (!opt.scenario.empty()) {
    if (!bcp::scenario_known(opt.scenario)) {
      std::string ids;
      for (const auto& id : bcp::scenario_ids()) ids += " " + id;
      throw bcp::OutOfDomain("unknown scenario '" + opt.scenario +
                             "'; valid ids:" + ids);
    }
    model = bcp::make_scenario(opt.scenario, opt.n);
  } else if (!opt.model_file.empty()) {
    model = model_from_file(opt.model_file);
  } else {
    if (!opt.p_set || !opt.rho_set || !opt.ub_set) {
      throw bcp::OutOfDomain("--p, --rho and --upper-bound are all required");
    }
    model.upper_bound = opt.upper_bound;
    model.segment_params = {bcp::make_params(opt.p, opt.rho)};
  }
  bcp::check_model(model, opt.n);

  const bcp::SegmentStart start = opt.segment_start == "independent"
                                      ? bcp::SegmentStart::independent
                                      : bcp::SegmentStart::carry_over;
  const SeedChoice seed = resolve_seed(opt.seed_set, opt.seed);
  bcp::Rng rng(seed.value);
  const bcp::BoundedSeries series = bcp::simulate_mcp_bar(model, opt.n, rng, start);

  json config;
  config["n"] = opt.n;
  config["upper_bound"] = model.upper_bound;
  config["segment_start"] = opt.segment_start;
  if (!opt.scenario.empty()) config["scenario"] = opt.scenario;
  if (!opt.model_file.empty()) config["model_file"] = opt.model_file;
  json segs = json::array();
  for (const auto& pp : model.segment_params) {
    segs.push_back(json{{"p", pp.p}, {"rho", pp.rho}});
  }
  config["segments"] = segs;
  config["change_points"] = model.change_points;
  const json manifest = make_manifest("simulate", config, seed, "");

  bcp::write_series(opt.out, series, {"boundedcp simulate",
                                      "manifest: " + manifest.dump()});
  // keep stdout clean for machine consumers when the report goes there
  std::ostream& hos = opt.json_path == "-" ? std::cerr : std::cout;
  hos << "wrote " << series.counts.size() << " observations (N="
      << series.upper_bound << ") to " << opt.out << "\n";

  if (!opt.json_path.empty()) {
    json report;
    report["manifest"] = manifest;
    report["input"] = json{{"n", static_cast<int>(series.counts.size())},
                           {"N", series.upper_bound},
                           {"upper_bound_inferred", false}};
    json result;
    result["n"] = static_cast<int>(series.counts.size());
    result["upper_bound"] = series.upper_bound;
    result["change_points"] = model.change_points;
    report["result"] = result;
    write_json_report(opt.json_path, report);
  }
  return 0;
}

// -------------------------------------------------------------------- test

struct TestOpts {
  std::string in;
  int upper_bound = 0;
  std::vector<std::string> methods;
  std::vector<double> gammas;
  int k0 = 10;
  int mc_grid = 2000;
  int mc_reps = 20000;
  int threads = 1;
  bool seed_set = false;
  std::uint64_t seed = 0;
  std::string json_path;
};

int cmd_test(const TestOpts& opt) {
  const SeedChoice seed = resolve_seed(opt.seed_set, opt.seed);
  LoadedSeries in = load_series(opt.in, opt.upper_bound);

  std::vector<bcp::Method> methods;
  if (opt.methods.empty()) {
    methods = {bcp::Method::cls, bcp::Method::mql, bcp::Method::cml};
  } else {
    for (const auto& m : opt.methods) methods.push_back(parse_method(m));
  }
  std::vector<double> gammas = opt.gammas.empty()
                                   ? std::vector<double>{0.01, 0.05}
                                   : opt.gammas;

  // Resolve each level once: tabulated when available, Monte Carlo otherwise.
  struct Level {
    double gamma, critical;
    bool simulated;
  };
  std::vector<Level> levels;
  bcp::Rng crit_rng = bcp::Rng::stream(seed.value, 0xC31);
  for (double g : gammas) {
    if (g <= 0.0 || g >= 1.0) {
      throw bcp::OutOfDomain("--gamma must lie strictly inside (0, 1)");
    }
    try {
      levels.push_back({g, bcp::critical_value(g), false});
    } catch (const bcp::UnsupportedLevel&) {
      const double c = bcp::simulate_critical_value(g, opt.mc_grid,
                                                    opt.mc_reps, crit_rng,
                                                    opt.threads);
      levels.push_back({g, c, true});
    }
  }

  json config;
  config["in"] = opt.in;
  config["k0"] = opt.k0;
  json mnames = json::array();
  for (auto m : methods) mnames.push_back(bcp::method_name(m));
  config["methods"] = mnames;
  config["gammas"] = gammas;
  config["mc_grid"] = opt.mc_grid;
  config["mc_reps"] = opt.mc_reps;
  config["threads"] = opt.threads;
  const json manifest = make_manifest("test", config, seed, in.checksum);

  // keep stdout clean for machine consumers when the report goes there
  FILE* hf = opt.json_path == "-" ? stderr : stdout;
  std::fprintf(hf, "%-6s %12s %9s %9s %8s %10s %10s  %s\n", "method",
               "statistic", "argmax_k", "evaluated", "gamma", "critical",
               "simulated", "decision");
  json jmethods = json::array();
  for (auto m : methods) {
    const bcp::CusumScan scan = bcp::cusum_scan(in.series, m, opt.k0);
    json jm;
    jm["method"] = bcp::method_name(m);
    jm["statistic"] = scan.statistic;
    jm["argmax_k"] = scan.argmax_k;
    jm["evaluated"] = scan.evaluated;
    jm["skipped"] = scan.skipped;
    json jtests = json::array();
    for (const Level& lv : levels) {
      const bool reject = scan.statistic > lv.critical;
      std::fprintf(hf, "%-6s %12s %9d %9d %8s %10s %10s  %s\n",
                   bcp::method_name(m), fmtf(scan.statistic, 4).c_str(),
                   scan.argmax_k, scan.evaluated, fmtf(lv.gamma, 3).c_str(),
                   fmtf(lv.critical, 4).c_str(), lv.simulated ? "yes" : "no",
                   reject ? "reject" : "no rejection");
      jtests.push_back(json{{"gamma", lv.gamma},
                            {"critical", lv.critical},
                            {"simulated", lv.simulated},
                            {"reject", reject}});
    }
    jm["tests"] = jtests;
    jmethods.push_back(jm);
  }

  if (!opt.json_path.empty()) {
    json report;
    report["manifest"] = manifest;
    report["input"] = input_block(in);
    report["result"] = json{{"k0", opt.k0}, {"methods", jmethods}};
    write_json_report(opt.json_path, report);
  }
  return 0;
}

// ----------------------------------------------------------------- segment

struct SegmentOpts {
  std::string in;
  int upper_bound = 0;
  double epsilon_lambda = 0.0;
  double cf = 0.55;
  int generations = 300;
  int population_scale = 10;
  int population_size = 0;
  int max_cp = 0;
  bool compare_m0 = true;
  std::string likelihood = "cls-plugin";
  bool exhaustive = false;
  int threads = 1;
  bool seed_set = false;
  std::uint64_t seed = 0;
  std::string json_path;
};

int cmd_segment(const SegmentOpts& opt) {
  const SeedChoice seed = resolve_seed(opt.seed_set, opt.seed);
  LoadedSeries in = load_series(opt.in, opt.upper_bound);
  const int n = static_cast<int>(in.series.counts.size());

  bcp::GaConfig ga;
  ga.epsilon_lambda = opt.epsilon_lambda;
  ga.crossover_fraction = opt.cf;
  ga.generations = opt.generations;
  ga.population_scale = opt.population_scale;
  ga.population_size = opt.population_size;
  ga.max_changepoints = opt.max_cp;
  ga.compare_m0 = opt.compare_m0;
  ga.likelihood = parse_likelihood(opt.likelihood);
  ga.threads = opt.threads;

  bcp::Rng rng(seed.value);
  const bcp::MdlFit fit = opt.exhaustive
                              ? bcp::exhaustive_m_sweep(in.series, ga, rng)
                              : bcp::s_ga(in.series, ga, rng);
  const bcp::FitStats stats = bcp::model_fit_stats(in.series, fit);

  json config;
  config["in"] = opt.in;
  config["epsilon_lambda"] = bcp::effective_epsilon(ga, n);
  config["min_segment_length"] =
      bcp::min_segment_length(bcp::effective_epsilon(ga, n), n);
  config["cf"] = opt.cf;
  config["generations"] = opt.generations;
  config["population_scale"] = opt.population_scale;
  if (opt.population_size > 0) config["population_size"] = opt.population_size;
  config["max_cp"] = opt.max_cp;
  config["compare_m0"] = opt.compare_m0;
  config["likelihood"] = opt.likelihood;
  config["exhaustive_m"] = opt.exhaustive;
  config["threads"] = opt.threads;
  const json manifest = make_manifest("segment", config, seed, in.checksum);

  const int m = static_cast<int>(fit.change_points.size());
  // keep stdout clean for machine consumers when the report goes there
  std::ostream& hos = opt.json_path == "-" ? std::cerr : std::cout;
  hos << "n=" << n << " N=" << in.series.upper_bound << "\n";
  hos << "m_hat=" << m << "\n";
  hos << "change_points:";
  if (fit.change_points.empty()) hos << " (none)";
  for (int tau : fit.change_points) hos << " " << tau;
  hos << "\nrelative_locations:";
  if (fit.relative_locations.empty()) hos << " (none)";
  for (double lam : fit.relative_locations) hos << " " << fmtf(lam, 4);
  hos << "\n";

  json jsegs = json::array();
  int prev = 0;
  for (std::size_t j = 0; j < fit.segment_estimates.size(); ++j) {
    const int last = j < fit.change_points.size()
                         ? fit.change_points[j]
                         : n;
    const bcp::ParamEstimate& est = fit.segment_estimates[j];
    hos << "segment " << (j + 1) << ": t=" << (prev + 1) << ".." << last
        << "  rho=" << fmtf(est.params.rho, 4)
        << "  p=" << fmtf(est.params.p, 4)
        << "  loglik=" << fmtf(fit.segment_loglik[j], 4);
    if (est.optimizer_warning) hos << "  [optimizer warning]";
    hos << "\n";
    jsegs.push_back(json{{"index", static_cast<int>(j + 1)},
                         {"first", prev + 1},
                         {"last", last},
                         {"rho", est.params.rho},
                         {"p", est.params.p},
                         {"loglik", fit.segment_loglik[j]},
                         {"clamped", est.clamped},
                         {"optimizer_warning", est.optimizer_warning}});
    prev = last;
  }
  hos << "MDL=" << fmtf(fit.mdl, 4) << "  AIC=" << fmtf(stats.aic, 4)
      << "  BIC=" << fmtf(stats.bic, 4) << "  RMS=" << fmtf(stats.rms, 4)
      << "\n";

  if (!opt.json_path.empty()) {
    json result;
    result["m"] = m;
    result["change_points"] = fit.change_points;
    result["relative_locations"] = fit.relative_locations;
    result["mdl"] = fit.mdl;
    result["segments"] = jsegs;
    result["loglik"] = stats.loglik;
    result["k"] = stats.k;
    result["aic"] = stats.aic;
    result["bic"] = stats.bic;
    result["rms"] = stats.rms;
    // wall-clock timing is deliberately left out so seeded reruns stay
    // byte-identical
    json jsearch = json::array();
    for (const auto& tr : fit.search_log) {
      jsearch.push_back(json{{"m", tr.m},
                             {"best_mdl", tr.best_mdl},
                             {"generations",
                              static_cast<int>(tr.best_per_generation.size())}});
    }
    result["search"] = jsearch;
    json report;
    report["manifest"] = manifest;
    report["input"] = input_block(in);
    report["result"] = result;
    write_json_report(opt.json_path, report);
  }
  return 0;
}

// -------------------------------------------------------------- experiment

struct ExperimentOpts {
  std::string battery;
  std::string scenario;
  int n = 500;
  int reps = 0;  // 0 -> battery default
  std::vector<std::string> methods;
  std::vector<double> gammas;
  int k0 = 10;
  double epsilon_lambda = 0.0;
  double cf = 0.55;
  int generations = 300;
  int population_scale = 10;
  int max_cp = 0;
  bool compare_m0 = false;  // battery default mirrors the reference studies
  std::string likelihood = "cls-plugin";
  int threads = 1;
  bool seed_set = false;
  std::uint64_t seed = 0;
  std::string out;
};

void emit_csv(const std::string& path, const json& manifest,
              const std::vector<std::string>& lines) {
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!path.empty() && path != "-") {
    file.open(path, std::ios::binary);
    if (!file) throw bcp::ParseError(0, "cannot open '" + path + "' for writing");
    os = &file;
  }
  *os << "# boundedcp experiment\n# manifest: " << manifest.dump() << "\n";
  for (const auto& l : lines) *os << l << "\n";
  if (!*os) throw bcp::ParseError(0, "failed while writing experiment output");
}

int cmd_experiment(const ExperimentOpts& opt) {
  if (!bcp::scenario_known(opt.scenario)) {
    std::string ids;
    for (const auto& id : bcp::scenario_ids()) ids += " " + id;
    throw bcp::OutOfDomain("unknown scenario '" + opt.scenario +
                           "'; valid ids:" + ids);
  }
  const SeedChoice seed = resolve_seed(opt.seed_set, opt.seed);

  if (opt.battery == "size-power") {
    bcp::SizePowerConfig cfg;
    cfg.scenario = opt.scenario;
    cfg.n = opt.n;
    cfg.reps = opt.reps > 0 ? opt.reps : 1000;
    if (!opt.methods.empty()) {
      cfg.methods.clear();
      for (const auto& m : opt.methods) cfg.methods.push_back(parse_method(m));
    }
    if (!opt.gammas.empty()) cfg.gammas = opt.gammas;
    cfg.k0 = opt.k0;
    cfg.seed = seed.value;
    cfg.threads = opt.threads;

    json config;
    config["battery"] = "size-power";
    config["scenario"] = cfg.scenario;
    config["n"] = cfg.n;
    config["reps"] = cfg.reps;
    json mnames = json::array();
    for (auto m : cfg.methods) mnames.push_back(bcp::method_name(m));
    config["methods"] = mnames;
    config["gammas"] = cfg.gammas;
    config["k0"] = cfg.k0;
    config["threads"] = cfg.threads;
    const json manifest = make_manifest("experiment", config, seed, "");

    const bcp::SizePowerResult res = bcp::size_power_experiment(cfg);
    std::vector<std::string> lines;
    lines.push_back("scenario,n,reps,method,gamma,rejection_rate,skipped");
    for (auto m : cfg.methods) {
      for (double g : cfg.gammas) {
        lines.push_back(cfg.scenario + "," + std::to_string(cfg.n) + "," +
                        std::to_string(cfg.reps) + "," + bcp::method_name(m) +
                        "," + fmtg(g) + "," +
                        fmtg(res.rejection_rate.at({m, g})) + "," +
                        std::to_string(res.skipped.at(m)));
      }
    }
    emit_csv(opt.out, manifest, lines);
    return 0;
  }

  if (opt.battery == "segmentation") {
    bcp::SegmentationConfig cfg;
    cfg.scenario = opt.scenario;
    cfg.n = opt.n;
    cfg.reps = opt.reps > 0 ? opt.reps : 200;
    cfg.ga.epsilon_lambda = opt.epsilon_lambda;
    cfg.ga.crossover_fraction = opt.cf;
    cfg.ga.generations = opt.generations;
    cfg.ga.population_scale = opt.population_scale;
    cfg.ga.max_changepoints = opt.max_cp;
    cfg.ga.compare_m0 = opt.compare_m0;
    cfg.ga.likelihood = parse_likelihood(opt.likelihood);
    cfg.seed = seed.value;
    cfg.threads = opt.threads;

    json config;
    config["battery"] = "segmentation";
    config["scenario"] = cfg.scenario;
    config["n"] = cfg.n;
    config["reps"] = cfg.reps;
    config["epsilon_lambda"] = cfg.ga.epsilon_lambda;
    config["cf"] = cfg.ga.crossover_fraction;
    config["generations"] = cfg.ga.generations;
    config["population_scale"] = cfg.ga.population_scale;
    config["max_cp"] = cfg.ga.max_changepoints;
    config["compare_m0"] = cfg.ga.compare_m0;
    config["likelihood"] = opt.likelihood;
    config["threads"] = cfg.threads;
    const json manifest = make_manifest("experiment", config, seed, "");

    const bcp::SegmentationResult res = bcp::segmentation_experiment(cfg);
    std::vector<std::string> lines;
    std::string header =
        "scenario,n,reps,true_m,cr,zeta_est_given_truth,zeta_truth_given_est,"
        "d_mean,located,skipped";
    for (int l = 1; l <= 3; ++l) header += ",bias_l" + std::to_string(l);
    for (int l = 1; l <= 3; ++l) header += ",mse_l" + std::to_string(l);
    lines.push_back(header);
    std::string row = cfg.scenario + "," + std::to_string(cfg.n) + "," +
                      std::to_string(cfg.reps) + "," +
                      std::to_string(res.true_m) + "," + fmtg(res.cr) + "," +
                      fmtg(res.zeta_under_mean) + "," +
                      fmtg(res.zeta_over_mean) + "," + fmtg(res.d_mean) + "," +
                      std::to_string(res.located) + "," +
                      std::to_string(res.skipped);
    for (int l = 0; l < 3; ++l) {
      row += ",";
      if (l < static_cast<int>(res.bias.size())) row += fmtg(res.bias[l]);
    }
    for (int l = 0; l < 3; ++l) {
      row += ",";
      if (l < static_cast<int>(res.mse.size())) row += fmtg(res.mse[l]);
    }
    lines.push_back(row);
    // The m histogram rides along as extra rows so nothing is lost.
    lines.push_back("m_hat,count,,,,,,,,,,,,,,");
    for (const auto& [mh, cnt] : res.m_histogram) {
      lines.push_back(std::to_string(mh) + "," + std::to_string(cnt) +
                      ",,,,,,,,,,,,,,");
    }
    emit_csv(opt.out, manifest, lines);
    return 0;
  }

  throw bcp::OutOfDomain("unknown battery '" + opt.battery +
                         "' (size-power, segmentation)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bounded count time series: change-point tests and "
               "penalized multi-change-point segmentation"};
  app.set_version_flag("--version", bcp::kVersion);
  app.require_subcommand(1);

  SimulateOpts sim;
  CLI::App* c_sim = app.add_subcommand(
      "simulate", "draw a series from a (possibly segmented) model");
  c_sim->add_option("--out", sim.out, "output series file")->required();
  c_sim->add_option("--n", sim.n, "series length")->required()
      ->check(CLI::Range(2, 100000000));
  c_sim->add_option("--scenario", sim.scenario,
                    "built-in scenario id (see experiment --help)");
  c_sim->add_option("--model", sim.model_file,
                    "segmented model JSON file: {upper_bound, segments:"
                    " [{p, rho}...], change_points: [...]}");
  auto* o_p = c_sim->add_option("--p", sim.p, "success parameter p in (0,1)");
  auto* o_rho = c_sim->add_option("--rho", sim.rho, "autocorrelation rho");
  auto* o_ub = c_sim->add_option("--upper-bound", sim.upper_bound,
                                 "range N of the counts");
  c_sim->add_option("--segment-start", sim.segment_start,
                    "state handling at a change-point")
      ->check(CLI::IsMember({"carry-over", "independent"}));
  auto* o_seed_sim = c_sim->add_option("--seed", sim.seed, "master seed");
  c_sim->add_option("--json", sim.json_path, "also write a JSON report"
                    " ('-' for stdout)");

  TestOpts tst;
  CLI::App* c_test = app.add_subcommand(
      "test", "CUSUM parameter-change test on a series file");
  c_test->add_option("--in", tst.in, "input series file")->required();
  c_test->add_option("--upper-bound", tst.upper_bound,
                     "range N (default: inferred as max count, with warning)");
  c_test->add_option("--method", tst.methods,
                     "estimators to test with (default: all)")
      ->check(CLI::IsMember({"cls", "mql", "cml"}));
  c_test->add_option("--gamma", tst.gammas,
                     "significance levels (default: 0.01 0.05)");
  c_test->add_option("--k0", tst.k0, "smallest prefix entering the scan")
      ->check(CLI::Range(2, 100000000));
  c_test->add_option("--mc-grid", tst.mc_grid,
                     "bridge grid for non-tabulated levels")
      ->check(CLI::Range(10, 100000000));
  c_test->add_option("--mc-reps", tst.mc_reps,
                     "Monte Carlo replications for non-tabulated levels")
      ->check(CLI::Range(100, 100000000));
  c_test->add_option("--threads", tst.threads, "worker threads")
      ->check(CLI::Range(1, 4096));
  auto* o_seed_test = c_test->add_option("--seed", tst.seed, "master seed");
  c_test->add_option("--json", tst.json_path, "write a JSON report"
                     " ('-' for stdout)");

  SegmentOpts seg;
  CLI::App* c_seg = app.add_subcommand(
      "segment", "estimate number and locations of change-points");
  c_seg->add_option("--in", seg.in, "input series file")->required();
  c_seg->add_option("--upper-bound", seg.upper_bound,
                    "range N (default: inferred as max count, with warning)");
  c_seg->add_option("--epsilon-lambda", seg.epsilon_lambda,
                    "minimum relative segment length (default: 10/n)")
      ->check(CLI::Range(0.0, 0.5));
  c_seg->add_option("--cf", seg.cf, "crossover fraction")
      ->check(CLI::Range(0.0, 1.0));
  c_seg->add_option("--generations", seg.generations, "generations per level")
      ->check(CLI::Range(1, 1000000));
  c_seg->add_option("--population-scale", seg.population_scale,
                    "population = scale * m")
      ->check(CLI::Range(1, 1000000));
  c_seg->add_option("--population-size", seg.population_size,
                    "fixed population size (overrides --population-scale)");
  c_seg->add_option("--max-cp", seg.max_cp,
                    "cap on the number of change-points (0: spacing bound)");
  c_seg->add_flag("--compare-m0,!--no-compare-m0", seg.compare_m0,
                  "also score the no-change model (default: on)");
  c_seg->add_option("--likelihood", seg.likelihood, "segment scoring")
      ->check(CLI::IsMember({"cls-plugin", "full-cml"}));
  c_seg->add_flag("--exhaustive-m", seg.exhaustive,
                  "score every feasible m instead of stopping early");
  c_seg->add_option("--threads", seg.threads, "worker threads")
      ->check(CLI::Range(1, 4096));
  auto* o_seed_seg = c_seg->add_option("--seed", seg.seed, "master seed");
  c_seg->add_option("--json", seg.json_path, "write a JSON report"
                    " ('-' for stdout)");

  ExperimentOpts exp;
  CLI::App* c_exp = app.add_subcommand(
      "experiment", "Monte Carlo batteries over the built-in scenarios");
  c_exp->add_option("--battery", exp.battery, "size-power or segmentation")
      ->required()
      ->check(CLI::IsMember({"size-power", "segmentation"}));
  c_exp->add_option("--scenario", exp.scenario,
                    "scenario id: T1..T3 (stationary), T11..T33 (single"
                    " change), A1..A3, B1..B3 (multiple changes)")
      ->required();
  c_exp->add_option("--n", exp.n, "series length")->check(CLI::Range(2, 100000000));
  c_exp->add_option("--reps", exp.reps,
                    "replications (default: 1000 size-power, 200 segmentation)")
      ->check(CLI::Range(1, 100000000));
  c_exp->add_option("--method", exp.methods, "size-power: estimators")
      ->check(CLI::IsMember({"cls", "mql", "cml"}));
  c_exp->add_option("--gamma", exp.gammas, "size-power: significance levels");
  c_exp->add_option("--k0", exp.k0, "size-power: smallest prefix")
      ->check(CLI::Range(2, 100000000));
  c_exp->add_option("--epsilon-lambda", exp.epsilon_lambda,
                    "segmentation: minimum relative segment length")
      ->check(CLI::Range(0.0, 0.5));
  c_exp->add_option("--cf", exp.cf, "segmentation: crossover fraction")
      ->check(CLI::Range(0.0, 1.0));
  c_exp->add_option("--generations", exp.generations,
                    "segmentation: generations per level")
      ->check(CLI::Range(1, 1000000));
  c_exp->add_option("--population-scale", exp.population_scale,
                    "segmentation: population = scale * m")
      ->check(CLI::Range(1, 1000000));
  c_exp->add_option("--max-cp", exp.max_cp, "segmentation: cap on m");
  c_exp->add_flag("--compare-m0,!--no-compare-m0", exp.compare_m0,
                  "segmentation: also score the no-change model"
                  " (default: off, matching the reference studies)");
  c_exp->add_option("--likelihood", exp.likelihood, "segmentation: scoring")
      ->check(CLI::IsMember({"cls-plugin", "full-cml"}));
  c_exp->add_option("--threads", exp.threads, "worker threads")
      ->check(CLI::Range(1, 4096));
  auto* o_seed_exp = c_exp->add_option("--seed", exp.seed, "master seed");
  c_exp->add_option("--out", exp.out, "CSV output path (default: stdout)");

  tst.threads = seg.threads = exp.threads = default_threads();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  sim.p_set = o_p->count() > 0;
  sim.rho_set = o_rho->count() > 0;
  sim.ub_set = o_ub->count() > 0;
  sim.seed_set = o_seed_sim->count() > 0;
  tst.seed_set = o_seed_test->count() > 0;
  seg.seed_set = o_seed_seg->count() > 0;
  exp.seed_set = o_seed_exp->count() > 0;

  try {
    if (app.got_subcommand(c_sim)) return cmd_simulate(sim);
    if (app.got_subcommand(c_test)) return cmd_test(tst);
    if (app.got_subcommand(c_seg)) return cmd_segment(seg);
    if (app.got_subcommand(c_exp)) return cmd_experiment(exp);
    std::cerr << "usage error: no subcommand\n";
    return 2;
  } catch (const bcp::ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const bcp::OutOfDomain& e) {
    std::cerr << "invalid request: " << e.what() << "\n";
    return 2;
  } catch (const bcp::Infeasible& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const bcp::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
