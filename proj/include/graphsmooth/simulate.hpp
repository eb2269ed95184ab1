#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "graphsmooth/detectors.hpp"
#include "graphsmooth/rng.hpp"

namespace graphsmooth {

namespace detail {

// Stream ids carving up one experiment seed. Each trial owns independent
// substreams, so results never depend on the thread count or order.
inline constexpr std::uint64_t kStreamCoords = 0xC0;
inline constexpr std::uint64_t kStreamH0 = 0;
inline constexpr std::uint64_t kStreamH1 = 1;
inline constexpr std::uint64_t kStreamCalib = 2;

template <typename Fn>
inline void parallel_trials(int trials, int workers, const Fn& fn) {
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
  }
  workers = std::max(1, std::min(workers, trials));
  if (workers == 1) {
    for (int t = 0; t < trials; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int t = next.fetch_add(1, std::memory_order_relaxed);
        if (t >= trials) return;
        try {
          fn(t);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// n i.i.d. uniform points in the unit square; deterministic per seed.
inline std::vector<std::array<double, 2>> sample_coords(int n,
                                                        std::uint64_t seed) {
  if (n < 2) {
    fail(ErrorCode::InvalidParameter, "need at least two points");
  }
  RngStream rng(seed, detail::kStreamCoords);
  std::vector<std::array<double, 2>> coords(static_cast<std::size_t>(n));
  for (auto& p : coords) {
    p[0] = rng.next_uniform();
    p[1] = rng.next_uniform();
  }
  return coords;
}

/// Gaussian radial-basis graph: W_ij = exp(-d(i,j)^2 / (2 sigma^2)), edges
/// below the cutoff removed. Errors out if the survivors no longer connect
/// the nodes.
inline WeightedGraph rbf_graph(const std::vector<std::array<double, 2>>& coords,
                               double kernel_sigma, double cutoff) {
  const int n = static_cast<int>(coords.size());
  if (n < 2) {
    fail(ErrorCode::InvalidParameter, "need at least two points");
  }
  if (!(kernel_sigma > 0.0)) {
    fail(ErrorCode::InvalidParameter, "kernel width must be positive");
  }
  std::vector<Edge> edges;
  std::vector<int> parent(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
  auto find = [&](int v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      parent[static_cast<std::size_t>(v)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
      v = parent[static_cast<std::size_t>(v)];
    }
    return v;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dx = coords[static_cast<std::size_t>(i)][0] -
                        coords[static_cast<std::size_t>(j)][0];
      const double dy = coords[static_cast<std::size_t>(i)][1] -
                        coords[static_cast<std::size_t>(j)][1];
      const double w =
          std::exp(-(dx * dx + dy * dy) / (2.0 * kernel_sigma * kernel_sigma));
      if (w >= cutoff) {
        edges.push_back({i, j, w});
        parent[static_cast<std::size_t>(find(i))] = find(j);
      }
    }
  }
  for (int v = 0; v < n; ++v) {
    if (find(v) != find(0)) {
      fail(ErrorCode::DisconnectedAfterCutoff,
           "cutoff " + std::to_string(cutoff) + " disconnects the graph");
    }
  }
  return WeightedGraph(n, std::move(edges));
}

/// x[m] = h(L) y[m] + n[m], y ~ N(0, sigma^2 I), n ~ N(0, noise_std^2 I).
/// Consumes the stream in a fixed order (signal matrix, then noise matrix).
inline SignalBatch generate_batch(const SpectralGraph& sg,
                                  const SpectralFilter& filter, double sigma2,
                                  int m_samples, double noise_std,
                                  RngStream rng) {
  if (m_samples < 1) {
    fail(ErrorCode::InvalidParameter, "need at least one sample");
  }
  if (!(sigma2 > 0.0)) {
    fail(ErrorCode::NonPositiveSigma, "sigma^2 must be positive");
  }
  if (noise_std < 0.0) {
    fail(ErrorCode::InvalidParameter, "noise std must be nonnegative");
  }
  if (filter.size() != sg.n_nodes()) {
    fail(ErrorCode::DimensionMismatch, "filter built for a different spectrum");
  }
  const int n = sg.n_nodes();
  const double sigma = std::sqrt(sigma2);
  Matrix y(n, m_samples);
  for (int col = 0; col < m_samples; ++col) {
    for (int row = 0; row < n; ++row) y(row, col) = sigma * rng.next_normal();
  }
  Matrix x_tilde = sg.eigenvectors().transpose() * y;
  x_tilde.array().colwise() *= filter.response().array();
  Matrix x = sg.eigenvectors() * x_tilde;
  if (noise_std > 0.0) {
    for (int col = 0; col < m_samples; ++col) {
      for (int row = 0; row < n; ++row) x(row, col) += noise_std * rng.next_normal();
    }
  }
  return SignalBatch(x.transpose());
}

inline SignalBatch generate_batch(const SpectralGraph& sg,
                                  const SpectralFilter& filter, double sigma2,
                                  int m_samples, double noise_std,
                                  std::uint64_t seed) {
  return generate_batch(sg, filter, sigma2, m_samples, noise_std,
                        RngStream(seed, detail::kStreamH0, 0));
}

struct RbfGraphParams {
  int n_nodes = 30;
  double kernel_sigma = 0.5;
  double cutoff = 0.55;
};

enum class SweepParameter { m_samples, alpha, r };

struct SweepSpec {
  SweepParameter parameter = SweepParameter::m_samples;
  std::vector<double> grid;
};

/// One synthetic experiment: a fixed graph (drawn once from the seed when
/// given as RBF parameters), generating filters for both hypotheses, batch
/// size, additive noise level, trial count, and an optional sweep.
struct ExperimentSpec {
  std::variant<RbfGraphParams, WeightedGraph> graph = RbfGraphParams{};
  FilterConfig h0_filter;
  FilterConfig h1_filter;
  int m_samples = 30;
  double sigma2 = 1.0;
  double noise_std = 0.0;
  int trials = 10000;
  std::uint64_t seed = 0;
  std::optional<SweepSpec> sweep;
};

inline WeightedGraph experiment_graph(const ExperimentSpec& spec) {
  if (const auto* params = std::get_if<RbfGraphParams>(&spec.graph)) {
    return rbf_graph(sample_coords(params->n_nodes, spec.seed),
                     params->kernel_sigma, params->cutoff);
  }
  return std::get<WeightedGraph>(spec.graph);
}

struct RocPoint {
  double threshold = 0.0;
  double pfa = 0.0;
  double pd = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // sorted by threshold
  int trials = 0;
  double auc = 0.0;
};

namespace detail {

inline void validate_trials(const ExperimentSpec& spec) {
  if (spec.trials < 1) {
    fail(ErrorCode::InvalidParameter, "trials must be >= 1");
  }
  if (spec.noise_std < 0.0) {
    fail(ErrorCode::InvalidParameter, "noise std must be nonnegative");
  }
}

/// Exceedance probability of s1 over s0 with half-weight ties; equals the
/// trapezoidal area under the empirical ROC.
inline double mann_whitney_auc(std::vector<double> s0,
                               const std::vector<double>& s1) {
  std::sort(s0.begin(), s0.end());
  double total = 0.0;
  for (double v : s1) {
    const auto lo = std::lower_bound(s0.begin(), s0.end(), v);
    const auto hi = std::upper_bound(s0.begin(), s0.end(), v);
    total += static_cast<double>(lo - s0.begin()) +
             0.5 * static_cast<double>(hi - lo);
  }
  return total / (static_cast<double>(s0.size()) * static_cast<double>(s1.size()));
}

inline RocCurve build_roc(std::vector<double> s0, std::vector<double> s1) {
  RocCurve curve;
  curve.trials = static_cast<int>(s0.size());
  curve.auc = mann_whitney_auc(s0, s1);

  std::vector<double> pool;
  pool.reserve(s0.size() + s1.size());
  for (double v : s0) {
    if (std::isfinite(v)) pool.push_back(v);
  }
  for (double v : s1) {
    if (std::isfinite(v)) pool.push_back(v);
  }
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  std::sort(s0.begin(), s0.end());
  std::sort(s1.begin(), s1.end());
  const double t0 = static_cast<double>(s0.size());
  const double t1 = static_cast<double>(s1.size());
  curve.points.reserve(pool.size());
  for (double threshold : pool) {
    RocPoint p;
    p.threshold = threshold;
    p.pfa = static_cast<double>(s0.end() -
                                std::upper_bound(s0.begin(), s0.end(), threshold)) /
            t0;
    p.pd = static_cast<double>(s1.end() -
                               std::upper_bound(s1.begin(), s1.end(), threshold)) /
           t1;
    curve.points.push_back(p);
  }
  return curve;
}

struct TrialEngine {
  const ExperimentSpec& spec;
  const SpectralGraph& sg;
  SpectralFilter h0;
  SpectralFilter h1;

  TrialEngine(const ExperimentSpec& s, const SpectralGraph& graph,
              double h1_scale)
      : spec(s), sg(graph), h0(make_filter(graph, s.h0_filter)),
        h1(make_filter(graph, scaled(s.h1_filter, h1_scale))) {}

  static FilterConfig scaled(FilterConfig config, double factor) {
    config.scale *= factor;
    return config;
  }

  SignalBatch draw(std::uint64_t stream, int trial) const {
    const SpectralFilter& f = stream == kStreamH1 ? h1 : h0;
    return generate_batch(sg, f, spec.sigma2, spec.m_samples, spec.noise_std,
                          RngStream(spec.seed, stream,
                                    static_cast<std::uint64_t>(trial)));
  }
};

}  // namespace detail

/// Per-detector empirical ROC curves from shared trials: each trial draws one
/// H0 batch and one H1 batch and evaluates every detector on both. h1_scale
/// multiplies the H1 generating filter (the scaling-mismatch knob).
inline std::vector<RocCurve> roc_curves(const ExperimentSpec& spec,
                                        const std::vector<DetectorConfig>& detectors,
                                        double h1_scale = 1.0,
                                        int workers = 0) {
  detail::validate_trials(spec);
  if (detectors.empty()) {
    fail(ErrorCode::InvalidParameter, "need at least one detector");
  }
  const WeightedGraph graph = experiment_graph(spec);
  const SpectralGraph sg = build_spectral_graph(graph);
  detail::TrialEngine engine(spec, sg, h1_scale);

  const std::size_t n_det = detectors.size();
  std::vector<std::vector<double>> s0(n_det), s1(n_det);
  for (auto& v : s0) v.resize(static_cast<std::size_t>(spec.trials));
  for (auto& v : s1) v.resize(static_cast<std::size_t>(spec.trials));

  detail::parallel_trials(spec.trials, workers, [&](int t) {
    const SignalBatch b0 = engine.draw(detail::kStreamH0, t);
    const SignalBatch b1 = engine.draw(detail::kStreamH1, t);
    for (std::size_t d = 0; d < n_det; ++d) {
      s0[d][static_cast<std::size_t>(t)] = evaluate_statistic(detectors[d], b0, sg);
      s1[d][static_cast<std::size_t>(t)] = evaluate_statistic(detectors[d], b1, sg);
    }
  });

  std::vector<RocCurve> curves;
  curves.reserve(n_det);
  for (std::size_t d = 0; d < n_det; ++d) {
    curves.push_back(detail::build_roc(std::move(s0[d]), std::move(s1[d])));
  }
  return curves;
}

inline RocCurve roc_curve(const ExperimentSpec& spec,
                          const DetectorConfig& detector, int workers = 0) {
  return roc_curves(spec, {detector}, 1.0, workers).front();
}

/// ROC curves with the H1 filter multiplied by `scale` before generation;
/// scale = 1 reproduces roc_curves exactly (same streams, same data).
inline std::vector<RocCurve> scaling_experiment(
    const ExperimentSpec& spec, const std::vector<DetectorConfig>& detectors,
    double scale, int workers = 0) {
  if (!(scale > 0.0)) {
    fail(ErrorCode::InvalidParameter, "scale must be positive");
  }
  return roc_curves(spec, detectors, scale, workers);
}

/// Linear interpolation of the empirical ROC at a false-alarm level.
inline double pd_at_pfa(const RocCurve& curve, double pfa) {
  // Points are sorted by threshold, so PFA runs in the opposite direction.
  std::vector<std::pair<double, double>> ops;  // (pfa, pd), pfa ascending
  ops.reserve(curve.points.size() + 2);
  ops.emplace_back(0.0, 0.0);
  for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it) {
    ops.emplace_back(it->pfa, it->pd);
  }
  ops.emplace_back(1.0, 1.0);
  double best = 0.0;
  for (std::size_t i = 1; i < ops.size(); ++i) {
    const auto& [xa, ya] = ops[i - 1];
    const auto& [xb, yb] = ops[i];
    if (pfa < xa || pfa > xb) continue;
    const double t = xb > xa ? (pfa - xa) / (xb - xa) : 0.0;
    best = std::max(best, ya + t * (yb - ya));
  }
  return best;
}

/// Solves the Tikhonov smoothing strength alpha whose smoothness ratio on
/// this spectrum equals r_target, by bisection on the monotone map
/// r(alpha) = sum lambda (1+alpha lambda)^-2 / (lambda_avg sum (1+alpha lambda)^-2).
inline double alpha_from_r(const SpectralGraph& sg, double r_target) {
  if (!(r_target > 0.0 && r_target < 1.0)) {
    fail(ErrorCode::InvalidParameter, "target r must lie in (0, 1)");
  }
  const auto ratio = [&](double alpha) {
    double num = 0.0, den = 0.0;
    for (int n = 0; n < sg.n_nodes(); ++n) {
      const double lambda = sg.eigenvalues()(n);
      const double g = 1.0 / (1.0 + alpha * lambda);
      num += lambda * g * g;
      den += g * g;
    }
    return num / (den * sg.lambda_avg());
  };
  double lo = 1e-10, hi = 1e10;  // r(lo) ~ 1, r(hi) ~ 0, r decreasing
  if (ratio(lo) < r_target || ratio(hi) > r_target) {
    fail(ErrorCode::NumericalFailure, "alpha bracket does not straddle target r");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = std::sqrt(lo * hi);  // bisect in log space
    (ratio(mid) > r_target ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

struct SweepRow {
  double parameter = 0.0;
  std::string detector;
  double pd = 0.0;
};

struct SweepTable {
  SweepParameter parameter = SweepParameter::m_samples;
  std::vector<SweepRow> rows;
};

/// Detection probability at a fixed false-alarm target across the sweep grid.
/// LRT-family and semi thresholds are analytic (from the known H0 generating
/// filter); tv and lpf get empirical thresholds from an auxiliary H0 run
/// with 10x trials.
inline SweepTable pd_sweep(const ExperimentSpec& spec,
                           const std::vector<DetectorConfig>& detectors,
                           double target_pfa, int workers = 0) {
  detail::validate_trials(spec);
  if (!spec.sweep) {
    fail(ErrorCode::InvalidParameter, "experiment spec carries no sweep");
  }
  const SweepSpec& sweep = *spec.sweep;
  if (sweep.grid.empty()) {
    fail(ErrorCode::InvalidParameter, "sweep grid is empty");
  }
  for (std::size_t i = 1; i < sweep.grid.size(); ++i) {
    if (!(sweep.grid[i] > sweep.grid[i - 1])) {
      fail(ErrorCode::InvalidParameter, "sweep grid must increase strictly");
    }
  }

  const WeightedGraph graph = experiment_graph(spec);
  const SpectralGraph sg = build_spectral_graph(graph);

  SweepTable table;
  table.parameter = sweep.parameter;
  for (double value : sweep.grid) {
    ExperimentSpec point = spec;
    point.sweep.reset();
    switch (sweep.parameter) {
      case SweepParameter::m_samples: {
        const int m = static_cast<int>(std::lround(value));
        if (m < 1 || std::abs(value - m) > 1e-9) {
          fail(ErrorCode::InvalidParameter, "M grid values must be integers >= 1");
        }
        point.m_samples = m;
        break;
      }
      case SweepParameter::alpha:
        if (!(value > 0.0)) {
          fail(ErrorCode::InvalidParameter, "alpha grid values must be positive");
        }
        point.h0_filter.kind = FilterKind::tikhonov;
        point.h0_filter.alpha = value;
        break;
      case SweepParameter::r:
        point.h0_filter.kind = FilterKind::tikhonov;
        point.h0_filter.alpha = alpha_from_r(sg, value);
        break;
    }

    detail::TrialEngine engine(point, sg, 1.0);

    for (const DetectorConfig& det : detectors) {
      double threshold = 0.0;
      if (det.name == DetectorName::tv || det.name == DetectorName::lpf) {
        const int calib_trials = 10 * point.trials;
        std::vector<double> h0_stats(static_cast<std::size_t>(calib_trials));
        detail::parallel_trials(calib_trials, workers, [&](int t) {
          const SignalBatch b = generate_batch(
              sg, engine.h0, point.sigma2, point.m_samples, point.noise_std,
              RngStream(point.seed, detail::kStreamCalib,
                        static_cast<std::uint64_t>(t)));
          h0_stats[static_cast<std::size_t>(t)] = evaluate_statistic(det, b, sg);
        });
        std::sort(h0_stats.begin(), h0_stats.end(), std::greater<>());
        const auto k = static_cast<std::size_t>(target_pfa * calib_trials);
        threshold = h0_stats[std::min(k, h0_stats.size() - 1)];
      } else if (det.name == DetectorName::semi) {
        threshold = tv_ratio_threshold(sg, engine.h0, point.m_samples,
                                       target_pfa) /
                    sg.lambda_avg();
      } else {
        DetectorConfig matched = det;
        if (sweep.parameter == SweepParameter::alpha ||
            sweep.parameter == SweepParameter::r) {
          matched.alpha = point.h0_filter.alpha;
          if (matched.name == DetectorName::lrt) {
            matched.h0 = point.h0_filter;
          }
        }
        threshold =
            calibrate_threshold(matched, sg, point.m_samples, target_pfa);
      }

      std::vector<int> hits(static_cast<std::size_t>(point.trials), 0);
      DetectorConfig eval = det;
      if ((sweep.parameter == SweepParameter::alpha ||
           sweep.parameter == SweepParameter::r)) {
        eval.alpha = point.h0_filter.alpha;
        if (eval.name == DetectorName::lrt) eval.h0 = point.h0_filter;
      }
      detail::parallel_trials(point.trials, workers, [&](int t) {
        const SignalBatch b = engine.draw(detail::kStreamH1, t);
        hits[static_cast<std::size_t>(t)] =
            evaluate_statistic(eval, b, sg) > threshold ? 1 : 0;
      });
      double pd = 0.0;
      for (int h : hits) pd += h;
      pd /= static_cast<double>(point.trials);
      table.rows.push_back({value, detector_name_string(det.name), pd});
    }
  }
  return table;
}

}  // namespace graphsmooth
