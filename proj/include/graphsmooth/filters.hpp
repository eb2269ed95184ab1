#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graphsmooth/graph.hpp"
#include "graphsmooth/signal.hpp"

namespace graphsmooth {

enum class FilterKind { allpass, gmrf, tikhonov, diffusion, polynomial, tabulated };

inline const char* filter_kind_name(FilterKind kind) {
  switch (kind) {
    case FilterKind::allpass: return "allpass";
    case FilterKind::gmrf: return "gmrf";
    case FilterKind::tikhonov: return "tikhonov";
    case FilterKind::diffusion: return "diffusion";
    case FilterKind::polynomial: return "poly";
    case FilterKind::tabulated: return "tabulated";
  }
  return "unknown";
}

/// A graph filter as a frequency response sampled on the ascending spectrum
/// of one SpectralGraph. Immutable; all operations on it are pure.
class SpectralFilter {
 public:
  SpectralFilter(FilterKind kind, Vector response, double beta,
                 std::string description)
      : kind_(kind),
        response_(std::move(response)),
        beta_(beta),
        description_(std::move(description)) {}

  FilterKind kind() const { return kind_; }
  const Vector& response() const { return response_; }
  double beta() const { return beta_; }
  const std::string& description() const { return description_; }
  int size() const { return static_cast<int>(response_.size()); }

  double operator()(int n) const { return response_(n); }

  Vector squared_response() const { return response_.cwiseAbs2(); }

 private:
  FilterKind kind_;
  Vector response_;
  double beta_;
  std::string description_;
};

namespace detail {

inline double normalization_beta(const Vector& raw) {
  const double energy = raw.squaredNorm();
  if (!(energy > 0.0)) {
    fail(ErrorCode::ZeroFilter, "cannot normalize an all-zero response");
  }
  return std::sqrt(static_cast<double>(raw.size()) / energy);
}

inline SpectralFilter finish_filter(FilterKind kind, Vector raw, bool normalize,
                                    std::string description) {
  double beta = 1.0;
  if (normalize) {
    beta = normalization_beta(raw);
    raw *= beta;
  }
  return SpectralFilter(kind, std::move(raw), beta, std::move(description));
}

/// Equal eigenvalues must carry equal responses for h(L) to be a function
/// of L; violations in tabulated input are construction errors.
inline void check_repeated_eigenvalue_consistency(const SpectralGraph& sg,
                                                  const Vector& response) {
  const double h_scale = response.cwiseAbs().maxCoeff();
  const double tol_abs = tol::kGroupRel * std::max(h_scale, 1e-300);
  for (const auto& group : sg.eigenvalue_groups()) {
    for (std::size_t i = 1; i < group.size(); ++i) {
      if (std::abs(response(group[i]) - response(group[0])) > tol_abs) {
        fail(ErrorCode::InvalidParameter,
             "response differs across the repeated eigenvalue group at lambda=" +
                 std::to_string(sg.eigenvalues()(group[0])));
      }
    }
  }
}

}  // namespace detail

inline SpectralFilter make_allpass(const SpectralGraph& sg) {
  return SpectralFilter(FilterKind::allpass, Vector::Ones(sg.n_nodes()), 1.0,
                        "allpass");
}

/// h(lambda) = beta / sqrt(lambda), zero at lambda = 0 (the precision-matrix
/// model with a singular covariance).
inline SpectralFilter make_gmrf_filter(const SpectralGraph& sg,
                                       bool normalize = true) {
  const Vector& lambda = sg.eigenvalues();
  const double zero_tol = sg.group_tolerance();
  Vector raw(lambda.size());
  for (int n = 0; n < lambda.size(); ++n) {
    raw(n) = lambda(n) > zero_tol ? 1.0 / std::sqrt(lambda(n)) : 0.0;
  }
  return detail::finish_filter(FilterKind::gmrf, std::move(raw), normalize,
                               "gmrf");
}

/// h(lambda) = beta / (1 + alpha * lambda), alpha > 0.
inline SpectralFilter make_tikhonov_filter(const SpectralGraph& sg, double alpha,
                                           bool normalize = true) {
  if (!(alpha > 0.0)) {
    fail(ErrorCode::InvalidParameter, "tikhonov alpha must be > 0");
  }
  Vector raw = (1.0 + alpha * sg.eigenvalues().array()).inverse().matrix();
  return detail::finish_filter(FilterKind::tikhonov, std::move(raw), normalize,
                               "tikhonov:alpha=" + std::to_string(alpha));
}

/// h(lambda) = beta * exp(-tau * lambda), tau > 0.
inline SpectralFilter make_diffusion_filter(const SpectralGraph& sg, double tau,
                                            bool normalize = true) {
  if (!(tau > 0.0)) {
    fail(ErrorCode::InvalidParameter, "diffusion tau must be > 0");
  }
  Vector raw = (-tau * sg.eigenvalues().array()).exp().matrix();
  return detail::finish_filter(FilterKind::diffusion, std::move(raw), normalize,
                               "diffusion:tau=" + std::to_string(tau));
}

enum class Box1Kind { gmrf, tikhonov, diffusion };

/// Dispatch over the common smooth-filter family; param is alpha for
/// tikhonov, tau for diffusion, ignored for gmrf.
inline SpectralFilter make_box1_filter(const SpectralGraph& sg, Box1Kind kind,
                                       double param = 0.0,
                                       bool normalize = true) {
  switch (kind) {
    case Box1Kind::gmrf: return make_gmrf_filter(sg, normalize);
    case Box1Kind::tikhonov: return make_tikhonov_filter(sg, param, normalize);
    case Box1Kind::diffusion: return make_diffusion_filter(sg, param, normalize);
  }
  fail(ErrorCode::InvalidParameter, "unknown box1 filter kind");
}

/// h(lambda) = sum_k c_k lambda^k sampled on the spectrum.
inline SpectralFilter make_polynomial_filter(const SpectralGraph& sg,
                                             const std::vector<double>& coeffs,
                                             bool normalize = false) {
  if (coeffs.empty()) {
    fail(ErrorCode::InvalidParameter, "polynomial filter needs coefficients");
  }
  Vector raw = Vector::Zero(sg.n_nodes());
  for (int n = 0; n < sg.n_nodes(); ++n) {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
      acc = acc * sg.eigenvalues()(n) + *it;
    }
    raw(n) = acc;
  }
  std::string desc = "poly:coeffs=";
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    if (i) desc += ",";
    desc += std::to_string(coeffs[i]);
  }
  return detail::finish_filter(FilterKind::polynomial, std::move(raw), normalize,
                               std::move(desc));
}

inline SpectralFilter make_tabulated_filter(const SpectralGraph& sg,
                                            Vector values,
                                            bool normalize = false) {
  if (values.size() != sg.n_nodes()) {
    fail(ErrorCode::DimensionMismatch,
         "tabulated response length != number of nodes");
  }
  detail::check_repeated_eigenvalue_consistency(sg, values);
  return detail::finish_filter(FilterKind::tabulated, std::move(values),
                               normalize, "tabulated");
}

/// Smoothness ratio r: the h^2-weighted mean of the eigenvalues over their
/// plain mean. r < 1 marks a smooth filter.
inline double smoothness_ratio(const SpectralFilter& filter,
                               const SpectralGraph& sg) {
  if (filter.size() != sg.n_nodes()) {
    fail(ErrorCode::DimensionMismatch, "filter built for a different spectrum");
  }
  const Vector h_sq = filter.squared_response();
  const double energy = h_sq.sum();
  if (!(energy > 0.0)) {
    fail(ErrorCode::ZeroFilter, "smoothness ratio of an all-zero filter");
  }
  return h_sq.dot(sg.eigenvalues()) / (energy * sg.lambda_avg());
}

/// eta_k: max high-band amplitude over min low-band amplitude, with the low
/// band being the first k frequencies (1 <= k <= N-1).
inline double lpf_order_ratio(const SpectralFilter& filter, int k) {
  const int n = filter.size();
  if (k < 1 || k > n - 1) {
    fail(ErrorCode::InvalidOrder,
         "lpf order k must lie in [1, N-1], got " + std::to_string(k));
  }
  const Vector amp = filter.response().cwiseAbs();
  const double low_min = amp.head(k).minCoeff();
  const double high_max = amp.tail(n - k).maxCoeff();
  if (low_min <= tol::kLowBandRel * amp.maxCoeff()) {
    fail(ErrorCode::LowBandZero,
         "low-band response vanishes; eta_" + std::to_string(k) +
             " is unbounded");
  }
  return high_max / low_min;
}

struct Claim1Result {
  bool is_lpf_smooth = false;  // the sufficient condition eta_K^2 < bound holds
  int order_j = 0;             // largest 1-based index with lambda_J <= lambda_avg
  double bound = 0.0;          // sum_{n<=K}(lambda_n - avg) / sum_{n<=J}(lambda_n - avg)
};

/// Sufficient low-pass condition under which an order-K LPF is smooth.
/// K is 1-based like eta_k; requires K <= J.
inline Claim1Result claim1_check(const SpectralGraph& sg,
                                 const SpectralFilter& filter, int k_order) {
  if (filter.size() != sg.n_nodes()) {
    fail(ErrorCode::DimensionMismatch, "filter built for a different spectrum");
  }
  const Vector& lambda = sg.eigenvalues();
  const double avg = sg.lambda_avg();
  int j = 0;
  while (j < lambda.size() && lambda(j) <= avg) ++j;
  if (k_order < 1 || k_order > j) {
    fail(ErrorCode::OrderTooHigh,
         "K = " + std::to_string(k_order) + " exceeds J = " + std::to_string(j));
  }
  double num = 0.0, den = 0.0;
  for (int n = 0; n < k_order; ++n) num += lambda(n) - avg;
  for (int n = 0; n < j; ++n) den += lambda(n) - avg;
  // Both sums are negative (every term has lambda_n <= lambda_avg), so the
  // bound lies in (0, 1]; K = J gives exactly 1.
  const double bound = num / den;

  Claim1Result result;
  result.order_j = j;
  result.bound = bound;
  try {
    const double eta = lpf_order_ratio(filter, k_order);
    result.is_lpf_smooth = eta * eta < bound;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::LowBandZero) throw;
    result.is_lpf_smooth = false;  // eta unbounded, condition cannot hold
  }
  return result;
}

namespace detail {

/// Elementwise pseudo-inversion: 1/s on entries above the relative singular
/// tolerance, 0 elsewhere.
inline Vector spectral_pseudo_invert(const Vector& values, double rel_tol) {
  const double scale = values.cwiseAbs().maxCoeff();
  const double tol_abs = rel_tol * scale;
  Vector out = Vector::Zero(values.size());
  for (int n = 0; n < values.size(); ++n) {
    if (std::abs(values(n)) > tol_abs) out(n) = 1.0 / values(n);
  }
  return out;
}

}  // namespace detail

/// Spectral pseudo-inverse of h^2(L): response 1/h^2 on the support of h,
/// zero where |h| falls below the relative singular tolerance.
inline SpectralFilter pseudo_inverse_square(const SpectralFilter& filter) {
  const double h_scale = filter.response().cwiseAbs().maxCoeff();
  const double tol_abs = tol::kSingularRel * h_scale;
  Vector out = Vector::Zero(filter.size());
  for (int n = 0; n < filter.size(); ++n) {
    const double h = filter.response()(n);
    if (std::abs(h) > tol_abs) out(n) = 1.0 / (h * h);
  }
  return SpectralFilter(FilterKind::tabulated, std::move(out), 1.0,
                        "pinv_sq(" + filter.description() + ")");
}

/// V diag(h) V^T x.
inline Vector apply_filter(const SpectralFilter& filter, const SpectralGraph& sg,
                           const Vector& x) {
  if (filter.size() != sg.n_nodes()) {
    fail(ErrorCode::DimensionMismatch, "filter built for a different spectrum");
  }
  Vector x_tilde = gft(sg, x);
  x_tilde.array() *= filter.response().array();
  return sg.eigenvectors() * x_tilde;
}

/// sum_m x[m]^T (sum_k c_k L^k) x[m], evaluated with Horner-style repeated
/// matrix-vector products only. This is the node-domain path that never
/// touches the eigendecomposition.
inline double quadform_polynomial(const Matrix& laplacian,
                                  const std::vector<double>& coeffs,
                                  const SignalBatch& batch) {
  if (coeffs.empty()) {
    fail(ErrorCode::InvalidParameter, "polynomial quadratic form needs coefficients");
  }
  if (laplacian.rows() != laplacian.cols() ||
      laplacian.rows() != batch.n_nodes()) {
    fail(ErrorCode::DimensionMismatch,
         "Laplacian is " + std::to_string(laplacian.rows()) + "x" +
             std::to_string(laplacian.cols()) + ", batch has " +
             std::to_string(batch.n_nodes()) + " nodes");
  }
  const Matrix xt = batch.values().transpose();  // N x M
  Matrix acc = coeffs.back() * xt;
  for (int k = static_cast<int>(coeffs.size()) - 2; k >= 0; --k) {
    acc = laplacian * acc + coeffs[static_cast<std::size_t>(k)] * xt;
  }
  return xt.cwiseProduct(acc).sum();
}

/// Folds a deterministic mean into the covariance filter: the returned h has
/// h^2 = h_bar^2 + (v_n^T mu)^2 / sigma^2 on the eigen-group mu aligns with.
/// mu must align (up to the projection tolerance) with a single eigenvector,
/// or with a repeated-eigenvalue eigenspace; the eigenspace case is the
/// documented generalization of the single-eigenvector requirement and the
/// result is then no longer constant across that group.
inline SpectralFilter absorb_mean(const SpectralGraph& sg,
                                  const SpectralFilter& h_bar, const Vector& mu,
                                  double sigma2) {
  if (!(sigma2 > 0.0)) {
    fail(ErrorCode::NonPositiveSigma, "sigma^2 must be positive");
  }
  if (h_bar.size() != sg.n_nodes()) {
    fail(ErrorCode::DimensionMismatch, "filter built for a different spectrum");
  }
  if (mu.size() != sg.n_nodes()) {
    fail(ErrorCode::DimensionMismatch, "mean length != number of nodes");
  }
  const double mu_sq = mu.squaredNorm();
  if (mu_sq == 0.0) return h_bar;

  const Vector proj = sg.eigenvectors().transpose() * mu;
  const auto groups = sg.eigenvalue_groups();
  double best_energy = -1.0;
  std::size_t best_group = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double energy = 0.0;
    for (int n : groups[g]) energy += proj(n) * proj(n);
    if (energy > best_energy) {
      best_energy = energy;
      best_group = g;
    }
  }
  if (best_energy < (1.0 - tol::kAlignLoss) * mu_sq) {
    fail(ErrorCode::MeanNotEigenvector,
         "mean is not aligned with any Laplacian eigenspace (best projection "
         "fraction " +
             std::to_string(best_energy / mu_sq) + ")");
  }

  Vector response = h_bar.response();
  for (int n : groups[best_group]) {
    const double h_sq = response(n) * response(n) + proj(n) * proj(n) / sigma2;
    const double sign = response(n) < 0.0 ? -1.0 : 1.0;
    response(n) = sign * std::sqrt(h_sq);
  }
  return SpectralFilter(FilterKind::tabulated, std::move(response), 1.0,
                        "absorb_mean(" + h_bar.description() + ")");
}

/// Relative gap between the squared-response energies of two filters. The
/// LRT assumes equal norms; callers surface a warning when this is large.
inline double filter_norm_gap(const SpectralFilter& a, const SpectralFilter& b) {
  const double ea = a.response().squaredNorm();
  const double eb = b.response().squaredNorm();
  const double scale = std::max(ea, eb);
  return scale > 0.0 ? std::abs(ea - eb) / scale : 0.0;
}

/// Declarative filter description, the form consumed by the CLI and the
/// simulation harness. `scale` multiplies the finished response (used by the
/// scaling-mismatch experiments).
struct FilterConfig {
  FilterKind kind = FilterKind::allpass;
  double alpha = 0.0;                 // tikhonov
  double tau = 0.0;                   // diffusion
  std::vector<double> coeffs;         // polynomial
  std::vector<double> values;         // tabulated
  bool normalize = true;
  double scale = 1.0;

  std::string spec_string() const {
    std::string s = filter_kind_name(kind);
    auto num = [](double v) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.12g", v);
      return std::string(buf);
    };
    auto list = [&](const std::vector<double>& vs) {
      std::string out;
      for (std::size_t i = 0; i < vs.size(); ++i) {
        if (i) out += ",";
        out += num(vs[i]);
      }
      return out;
    };
    switch (kind) {
      case FilterKind::tikhonov: s += ":alpha=" + num(alpha); break;
      case FilterKind::diffusion: s += ":tau=" + num(tau); break;
      case FilterKind::polynomial: s += ":coeffs=" + list(coeffs); break;
      case FilterKind::tabulated: s += ":values=" + list(values); break;
      default: break;
    }
    if (!normalize) s += (s.find(':') == std::string::npos ? ":" : ",");
    if (!normalize) s += "normalize=false";
    if (scale != 1.0) {
      s += (s.find(':') == std::string::npos ? ":" : ",");
      s += "scale=" + num(scale);
    }
    return s;
  }
};

inline SpectralFilter make_filter(const SpectralGraph& sg,
                                  const FilterConfig& config) {
  SpectralFilter base = [&]() -> SpectralFilter {
    switch (config.kind) {
      case FilterKind::allpass:
        return make_allpass(sg);
      case FilterKind::gmrf:
        return make_gmrf_filter(sg, config.normalize);
      case FilterKind::tikhonov:
        return make_tikhonov_filter(sg, config.alpha, config.normalize);
      case FilterKind::diffusion:
        return make_diffusion_filter(sg, config.tau, config.normalize);
      case FilterKind::polynomial:
        return make_polynomial_filter(sg, config.coeffs, config.normalize);
      case FilterKind::tabulated: {
        if (static_cast<int>(config.values.size()) != sg.n_nodes()) {
          fail(ErrorCode::DimensionMismatch,
               "tabulated filter needs one value per node");
        }
        Vector v(sg.n_nodes());
        for (int n = 0; n < sg.n_nodes(); ++n) v(n) = config.values[n];
        return make_tabulated_filter(sg, std::move(v), config.normalize);
      }
    }
    fail(ErrorCode::InvalidParameter, "unknown filter kind");
  }();
  if (config.scale == 1.0) return base;
  if (config.scale == 0.0 || !std::isfinite(config.scale)) {
    fail(ErrorCode::InvalidParameter, "filter scale must be finite and nonzero");
  }
  return SpectralFilter(base.kind(), config.scale * base.response(),
                        base.beta(), config.spec_string());
}

}  // namespace graphsmooth
