#pragma once

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "graphsmooth/io.hpp"

namespace graphsmooth {

/// Documented default seed: every command is a deterministic function of its
/// inputs and this seed unless --seed overrides it.
inline constexpr std::uint64_t kDefaultSeed = 1729;

namespace cli_detail {

struct CommonOptions {
  std::string graph_path;
  std::string signals_path;
  std::string out_path;
  std::uint64_t seed = kDefaultSeed;
  std::string config_path;

  std::string detector = "semi";
  std::string h0_spec;
  std::string h1_spec = "allpass";
  std::string filter_spec;
  double sigma2 = 1.0;
  double alpha = 0.2;
  double tau = 0.1;
  int lpf_k = -1;
  std::optional<double> pfa;
  std::optional<double> threshold;
  int m_samples = 30;
  double noise_std = 0.0;
  int trials = 10000;
  double scale_h1 = 1.0;

  int rbf_n = 30;
  double kernel_sigma = 0.5;
  double cutoff = 0.55;
};

/// Fill options from a JSON config file; explicitly passed flags win.
inline void apply_config_file(CLI::App* cmd, CommonOptions* opt) {
  if (opt->config_path.empty()) return;
  std::ifstream in(opt->config_path);
  if (!in) {
    fail(ErrorCode::ParseError, "cannot open config " + opt->config_path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(ErrorCode::ParseError,
         "config " + opt->config_path + ": " + e.what());
  }
  const auto unset = [&](const char* flag) {
    const CLI::Option* o = cmd->get_option_no_throw(flag);
    return o == nullptr || o->count() == 0;
  };
  if (j.contains("detector") && unset("--detector")) {
    opt->detector = j["detector"].get<std::string>();
  }
  if (j.contains("h0") && unset("--h0")) opt->h0_spec = j["h0"].get<std::string>();
  if (j.contains("h1") && unset("--h1")) opt->h1_spec = j["h1"].get<std::string>();
  if (j.contains("sigma2") && unset("--sigma2")) opt->sigma2 = j["sigma2"].get<double>();
  if (j.contains("alpha") && unset("--alpha")) opt->alpha = j["alpha"].get<double>();
  if (j.contains("tau") && unset("--tau")) opt->tau = j["tau"].get<double>();
  if (j.contains("k") && unset("--k")) opt->lpf_k = j["k"].get<int>();
  if (j.contains("pfa") && unset("--pfa")) opt->pfa = j["pfa"].get<double>();
  if (j.contains("threshold") && unset("--threshold")) {
    opt->threshold = j["threshold"].get<double>();
  }
  if (j.contains("seed") && unset("--seed")) opt->seed = j["seed"].get<std::uint64_t>();
  if (j.contains("trials") && unset("--trials")) opt->trials = j["trials"].get<int>();
  if (j.contains("noise_std") && unset("--noise-std")) {
    opt->noise_std = j["noise_std"].get<double>();
  }
}

inline DetectorConfig build_detector_config(const CommonOptions& opt) {
  DetectorConfig config;
  config.name = parse_detector_name(opt.detector);
  config.sigma2 = opt.sigma2;
  config.alpha = opt.alpha;
  config.tau = opt.tau;
  config.lpf_k = opt.lpf_k;
  config.threshold = opt.threshold;
  config.target_pfa = opt.pfa;
  if (config.name == DetectorName::lrt) {
    if (opt.h0_spec.empty()) {
      fail(ErrorCode::InvalidParameter, "generic lrt needs --h0 and --h1");
    }
    config.h0 = parse_filter_spec(opt.h0_spec);
    config.h1 = parse_filter_spec(opt.h1_spec);
  }
  return config;
}

inline ExperimentSpec build_experiment_spec(const CommonOptions& opt) {
  ExperimentSpec spec;
  if (!opt.graph_path.empty()) {
    spec.graph = parse_graph_csv(opt.graph_path);
  } else {
    spec.graph = RbfGraphParams{opt.rbf_n, opt.kernel_sigma, opt.cutoff};
  }
  if (opt.h0_spec.empty()) {
    fail(ErrorCode::InvalidParameter, "--h0 generating filter is required");
  }
  spec.h0_filter = parse_filter_spec(opt.h0_spec);
  spec.h1_filter = parse_filter_spec(opt.h1_spec);
  spec.m_samples = opt.m_samples;
  spec.sigma2 = opt.sigma2;
  spec.noise_std = opt.noise_std;
  spec.trials = opt.trials;
  spec.seed = opt.seed;
  return spec;
}

inline int run_generate_graph(const CommonOptions& opt) {
  const auto coords = sample_coords(opt.rbf_n, opt.seed);
  const WeightedGraph g = rbf_graph(coords, opt.kernel_sigma, opt.cutoff);
  write_graph_csv(opt.out_path, g);
  std::cout << "wrote " << opt.out_path << " (" << g.n_nodes() << " nodes, "
            << g.edges().size() << " edges)\n";
  return 0;
}

inline int run_generate_signals(const CommonOptions& opt) {
  const WeightedGraph g = parse_graph_csv(opt.graph_path);
  const SpectralGraph sg = build_spectral_graph(g);
  const SpectralFilter filter = make_filter(sg, parse_filter_spec(opt.filter_spec));
  const SignalBatch batch = generate_batch(sg, filter, opt.sigma2, opt.m_samples,
                                           opt.noise_std, opt.seed);
  write_signals_csv(opt.out_path, batch);
  std::cout << "wrote " << opt.out_path << " (" << batch.n_samples() << " x "
            << batch.n_nodes() << ")\n";
  return 0;
}

inline int run_filter_info(const CommonOptions& opt) {
  const WeightedGraph g = parse_graph_csv(opt.graph_path);
  const SpectralGraph sg = build_spectral_graph(g);
  const SpectralFilter filter = make_filter(sg, parse_filter_spec(opt.filter_spec));
  const double r = smoothness_ratio(filter, sg);
  std::cout << "filter: " << filter.description() << "\n";
  std::cout << "beta: " << format_double(filter.beta()) << "\n";
  std::cout << "r: " << format_double(r) << (r < 1.0 ? "  (smooth)" : "  (not smooth)")
            << "\n";
  std::cout << "k,eta_k\n";
  for (int k = 1; k < sg.n_nodes(); ++k) {
    std::cout << k << ",";
    try {
      std::cout << format_double(lpf_order_ratio(filter, k));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::LowBandZero) throw;
      std::cout << "inf";
    }
    std::cout << "\n";
  }
  return 0;
}

inline int run_detect(const CommonOptions& opt) {
  const WeightedGraph g = parse_graph_csv(opt.graph_path);
  const SpectralGraph sg = build_spectral_graph(g);
  const SignalBatch batch = parse_signals_csv(opt.signals_path, sg.n_nodes());
  const DetectorConfig config = build_detector_config(opt);
  const DetectionReport report = run_detector(config, batch, sg);
  const nlohmann::json j = report_to_json(report);
  if (!opt.out_path.empty()) {
    write_file_atomic(opt.out_path, j.dump(2) + "\n");
  }
  std::cout << report.detector << ": decision=" << decision_name(report.decision)
            << " statistic=" << format_double(report.statistic)
            << " threshold=" << format_double(report.threshold) << "\n";
  for (const auto& w : report.meta.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  return report.decision == Decision::H0 ? 0 : 1;
}

inline int run_calibrate(const CommonOptions& opt) {
  const WeightedGraph g = parse_graph_csv(opt.graph_path);
  const SpectralGraph sg = build_spectral_graph(g);
  if (!opt.pfa) {
    fail(ErrorCode::InvalidParameter, "calibrate needs --pfa");
  }
  const DetectorConfig config = build_detector_config(opt);
  const double threshold = calibrate_threshold(config, sg, opt.m_samples, *opt.pfa);

  double achieved = 0.0;
  switch (config.name) {
    case DetectorName::semi:
      achieved = semi_tail_prob(sg, opt.m_samples, threshold * sg.lambda_avg());
      break;
    default: {
      const auto [h0, h1] = detail::lrt_filters(config, sg);
      achieved = lrt_tail_prob(h0, h1, opt.m_samples, threshold);
      break;
    }
  }
  std::cout << "threshold: " << format_double(threshold) << "\n";
  std::cout << "analytic_pfa: " << format_double(achieved) << "\n";
  if (!opt.out_path.empty()) {
    nlohmann::json j;
    j["detector"] = opt.detector;
    j["threshold"] = threshold;
    j["target_pfa"] = *opt.pfa;
    j["analytic_pfa"] = achieved;
    j["m_samples"] = opt.m_samples;
    write_file_atomic(opt.out_path, j.dump(2) + "\n");
  }
  return 0;
}

inline std::string sidecar_path(const std::string& out_path) {
  const auto dot = out_path.find_last_of('.');
  const std::string stem =
      dot == std::string::npos ? out_path : out_path.substr(0, dot);
  return stem + ".summary.json";
}

inline int run_roc(const CommonOptions& opt) {
  const ExperimentSpec spec = build_experiment_spec(opt);
  const DetectorConfig config = build_detector_config(opt);
  const RocCurve curve =
      scaling_experiment(spec, {config}, opt.scale_h1).front();
  write_file_atomic(opt.out_path, roc_csv_string(curve));
  write_file_atomic(sidecar_path(opt.out_path),
                    roc_summary_json(curve, opt.seed).dump(2) + "\n");
  std::cout << "auc: " << format_double(curve.auc) << " (" << curve.trials
            << " trials)\n";
  return 0;
}

inline int run_sweep(const CommonOptions& opt, const std::string& param,
                     const std::vector<double>& grid,
                     const std::vector<std::string>& detector_names) {
  ExperimentSpec spec = build_experiment_spec(opt);
  SweepSpec sweep;
  sweep.parameter = parse_sweep_parameter(param);
  sweep.grid = grid;
  spec.sweep = sweep;
  if (!opt.pfa) {
    fail(ErrorCode::InvalidParameter, "sweep needs --pfa");
  }
  std::vector<DetectorConfig> detectors;
  for (const auto& name : detector_names) {
    CommonOptions one = opt;
    one.detector = name;
    one.threshold.reset();  // sweeps calibrate per grid point
    one.pfa.reset();
    detectors.push_back(build_detector_config(one));
  }
  const SweepTable table = pd_sweep(spec, detectors, *opt.pfa);
  write_file_atomic(opt.out_path, sweep_csv_string(table));
  std::cout << "wrote " << opt.out_path << " (" << table.rows.size()
            << " rows)\n";
  return 0;
}

}  // namespace cli_detail

/// Entry point shared by the binary and the tests; argv-style arguments
/// without the program name.
inline int run_cli(const std::vector<std::string>& args) {
  using cli_detail::CommonOptions;
  CLI::App app{"Smoothness detection for graph signals"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string sweep_param = "m";
  std::vector<double> sweep_grid;
  std::vector<std::string> sweep_detectors = {"semi"};

  const auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--seed", opt.seed, "RNG seed (default 1729)");
    if (needs_out) {
      cmd->add_option("--out", opt.out_path, "output path")->required();
    } else {
      cmd->add_option("--out", opt.out_path, "output path");
    }
    return cmd;
  };

  CLI::App* gen_graph = app.add_subcommand("generate-graph",
                                           "draw an RBF graph and write CSV");
  gen_graph->add_flag("--rbf", "RBF generator (the default and only one)");
  gen_graph->add_option("--n", opt.rbf_n, "number of nodes");
  gen_graph->add_option("--kernel-sigma", opt.kernel_sigma, "RBF kernel width");
  gen_graph->add_option("--cutoff", opt.cutoff, "minimum edge weight kept");
  add_common(gen_graph, true);

  CLI::App* gen_signals =
      app.add_subcommand("generate-signals", "filter white noise on a graph");
  gen_signals->add_option("--graph", opt.graph_path, "graph CSV")->required();
  gen_signals->add_option("--filter", opt.filter_spec, "FILTERSPEC")->required();
  gen_signals->add_option("--sigma2", opt.sigma2, "input noise variance");
  gen_signals->add_option("--m", opt.m_samples, "number of samples");
  gen_signals->add_option("--noise-std", opt.noise_std, "additive noise std");
  add_common(gen_signals, true);

  CLI::App* filter_info =
      app.add_subcommand("filter-info", "print r, beta and the eta_k table");
  filter_info->add_option("--graph", opt.graph_path, "graph CSV")->required();
  filter_info->add_option("--filter", opt.filter_spec, "FILTERSPEC")->required();

  CLI::App* detect = app.add_subcommand("detect", "run a detector on signals");
  detect->add_option("--graph", opt.graph_path, "graph CSV")->required();
  detect->add_option("--signals", opt.signals_path, "signals CSV")->required();
  detect->add_option("--detector", opt.detector,
                     "lrt|lrt-gmrf|lrt-tikhonov|lrt-diffusion|semi|tv|lpf");
  detect->add_option("--h0", opt.h0_spec, "H0 FILTERSPEC (generic lrt)");
  detect->add_option("--h1", opt.h1_spec, "H1 FILTERSPEC (generic lrt)");
  detect->add_option("--sigma2", opt.sigma2, "known noise variance (lrt)");
  detect->add_option("--alpha", opt.alpha, "lrt-tikhonov alpha");
  detect->add_option("--tau", opt.tau, "lrt-diffusion tau");
  detect->add_option("--k", opt.lpf_k, "lpf order (default floor(N/2))");
  detect->add_option("--pfa", opt.pfa, "target false-alarm probability");
  detect->add_option("--threshold", opt.threshold, "explicit threshold");
  detect->add_option("--config", opt.config_path, "JSON config file");
  add_common(detect, false);

  CLI::App* calibrate =
      app.add_subcommand("calibrate", "analytic threshold for a target PFA");
  calibrate->add_option("--graph", opt.graph_path, "graph CSV")->required();
  calibrate->add_option("--detector", opt.detector, "lrt*|semi");
  calibrate->add_option("--h0", opt.h0_spec, "H0 FILTERSPEC (generic lrt)");
  calibrate->add_option("--h1", opt.h1_spec, "H1 FILTERSPEC (generic lrt)");
  calibrate->add_option("--alpha", opt.alpha, "lrt-tikhonov alpha");
  calibrate->add_option("--tau", opt.tau, "lrt-diffusion tau");
  calibrate->add_option("--m", opt.m_samples, "number of samples")->required();
  calibrate->add_option("--pfa", opt.pfa, "target false-alarm probability")
      ->required();
  calibrate->add_option("--config", opt.config_path, "JSON config file");
  add_common(calibrate, false);

  CLI::App* roc = app.add_subcommand("roc", "Monte Carlo ROC curve");
  roc->add_option("--graph", opt.graph_path, "graph CSV (else RBF params)");
  roc->add_option("--rbf-n", opt.rbf_n, "RBF node count");
  roc->add_option("--kernel-sigma", opt.kernel_sigma, "RBF kernel width");
  roc->add_option("--cutoff", opt.cutoff, "RBF cutoff");
  roc->add_option("--h0", opt.h0_spec, "H0 generating FILTERSPEC")->required();
  roc->add_option("--h1", opt.h1_spec, "H1 generating FILTERSPEC");
  roc->add_option("--detector", opt.detector, "detector name");
  roc->add_option("--sigma2", opt.sigma2, "input noise variance");
  roc->add_option("--alpha", opt.alpha, "lrt-tikhonov alpha");
  roc->add_option("--tau", opt.tau, "lrt-diffusion tau");
  roc->add_option("--k", opt.lpf_k, "lpf order");
  roc->add_option("--m", opt.m_samples, "samples per trial");
  roc->add_option("--noise-std", opt.noise_std, "additive noise std");
  roc->add_option("--trials", opt.trials, "Monte Carlo trials");
  roc->add_option("--scale-h1", opt.scale_h1, "scale the H1 filter");
  roc->add_option("--config", opt.config_path, "JSON config file");
  add_common(roc, true);

  CLI::App* sweep = app.add_subcommand("sweep", "PD at fixed PFA over a grid");
  sweep->add_option("--graph", opt.graph_path, "graph CSV (else RBF params)");
  sweep->add_option("--rbf-n", opt.rbf_n, "RBF node count");
  sweep->add_option("--kernel-sigma", opt.kernel_sigma, "RBF kernel width");
  sweep->add_option("--cutoff", opt.cutoff, "RBF cutoff");
  sweep->add_option("--param", sweep_param, "m|alpha|r");
  sweep->add_option("--grid", sweep_grid, "strictly increasing grid")
      ->required()
      ->delimiter(',');
  sweep->add_option("--detectors", sweep_detectors, "detector names")
      ->delimiter(',');
  sweep->add_option("--h0", opt.h0_spec, "H0 generating FILTERSPEC")->required();
  sweep->add_option("--h1", opt.h1_spec, "H1 generating FILTERSPEC");
  sweep->add_option("--sigma2", opt.sigma2, "input noise variance");
  sweep->add_option("--m", opt.m_samples, "samples per trial");
  sweep->add_option("--noise-std", opt.noise_std, "additive noise std");
  sweep->add_option("--trials", opt.trials, "trials per grid point");
  sweep->add_option("--pfa", opt.pfa, "target false-alarm probability");
  sweep->add_option("--config", opt.config_path, "JSON config file");
  add_common(sweep, true);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    cli_detail::apply_config_file(cmd, &opt);
    if (cmd == gen_graph) return cli_detail::run_generate_graph(opt);
    if (cmd == gen_signals) return cli_detail::run_generate_signals(opt);
    if (cmd == filter_info) return cli_detail::run_filter_info(opt);
    if (cmd == detect) return cli_detail::run_detect(opt);
    if (cmd == calibrate) return cli_detail::run_calibrate(opt);
    if (cmd == roc) return cli_detail::run_roc(opt);
    if (cmd == sweep) {
      return cli_detail::run_sweep(opt, sweep_param, sweep_grid, sweep_detectors);
    }
    fail(ErrorCode::InvalidParameter, "unknown subcommand");
  } catch (const Error& e) {
    nlohmann::json j;
    j["error"]["code"] = error_code_name(e.code());
    j["error"]["message"] = e.what();
    std::cerr << j.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json j;
    j["error"]["code"] = "Internal";
    j["error"]["message"] = e.what();
    std::cerr << j.dump() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace graphsmooth
