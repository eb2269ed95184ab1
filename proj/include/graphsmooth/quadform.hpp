#pragma once

#include <boost/math/special_functions/gamma.hpp>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "graphsmooth/filters.hpp"
#include "graphsmooth/graph.hpp"

namespace graphsmooth {

/// Law of T = sum_n w_n c_n with c_n i.i.d. central chi-square, M degrees of
/// freedom each. Weights may be negative; zero weights contribute nothing and
/// are dropped at construction.
class QuadFormLaw {
 public:
  QuadFormLaw(int dof, const std::vector<double>& weights) : dof_(dof) {
    if (dof_ < 1) {
      fail(ErrorCode::InvalidParameter, "degrees of freedom must be >= 1");
    }
    double w_max = 0.0;
    for (double w : weights) {
      if (!std::isfinite(w)) {
        fail(ErrorCode::InvalidParameter, "weights must be finite");
      }
      w_max = std::max(w_max, std::abs(w));
    }
    const double drop = 1e-14 * w_max;
    for (double w : weights) {
      if (std::abs(w) > drop) weights_.push_back(w);
    }
    if (weights_.empty()) {
      fail(ErrorCode::EmptySupport, "law has no nonzero weights");
    }
  }

  int dof() const { return dof_; }
  const std::vector<double>& weights() const { return weights_; }

  double mean() const {
    double s = 0.0;
    for (double w : weights_) s += w;
    return dof_ * s;
  }

  bool all_positive() const {
    return std::all_of(weights_.begin(), weights_.end(),
                       [](double w) { return w > 0.0; });
  }
  bool all_negative() const {
    return std::all_of(weights_.begin(), weights_.end(),
                       [](double w) { return w < 0.0; });
  }

 private:
  int dof_;
  std::vector<double> weights_;
};

namespace detail {

inline double chi_squared_cdf(double dof, double x) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

// 15-point Kronrod rule with embedded 7-point Gauss (QUADPACK dqk15).
inline constexpr double kGk15Nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0};
inline constexpr double kGk15Weights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
inline constexpr double kG7Weights[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

template <typename F>
inline void gauss_kronrod_15(const F& f, double a, double b, double* value,
                             double* error) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double resk = kGk15Weights[7] * fc;
  double resg = kG7Weights[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double x = h * kGk15Nodes[j];
    const double fsum = f(c - x) + f(c + x);
    resk += kGk15Weights[j] * fsum;
    if (j % 2 == 1) resg += kG7Weights[j / 2] * fsum;
  }
  *value = resk * h;
  *error = std::abs(resk - resg) * h;
}

/// Imhof-style inversion of the characteristic function of a weighted sum of
/// central chi-squares:
///   Pr(T > x) = 1/2 + (1/pi) Int_0^inf sin(theta(u)) / (u rho(u)) du,
///   theta(u) = (M/2) sum_r atan(w_r u) - x u / 2,
///   ln rho(u) = (M/4) sum_r ln(1 + w_r^2 u^2).
/// The envelope 1/(u rho(u)) obeys, for any subset S of the weights,
///   Int_U^inf <= [pi k_S U^{k_S} prod_S |w_r|^{M/2}]^{-1},  k_S = |S| M / 2,
/// which gives both the truncation point and the early-exit test.
class ImhofIntegrator {
 public:
  ImhofIntegrator(const std::vector<double>& weights, int dof)
      : weights_(weights), dof_(dof) {
    std::vector<double> abs_sorted(weights.size());
    std::transform(weights.begin(), weights.end(), abs_sorted.begin(),
                   [](double w) { return std::abs(w); });
    std::sort(abs_sorted.begin(), abs_sorted.end(), std::greater<>());
    log_prefix_.resize(abs_sorted.size() + 1, 0.0);
    for (std::size_t j = 0; j < abs_sorted.size(); ++j) {
      log_prefix_[j + 1] = log_prefix_[j] + std::log(abs_sorted[j]);
    }
    sum_abs_ = 0.0;
    for (double w : abs_sorted) sum_abs_ += w;
  }

  /// Pr(T > x) with absolute error target epsabs. achieved_error reports the
  /// quadrature error estimate plus the truncation bound actually reached.
  double tail(double x, double epsabs, double* achieved_error) const {
    const double eps_tail = 0.5 * epsabs;
    const double eps_quad = 0.5 * epsabs;
    const double u_end = truncation_point(eps_tail);

    const auto integrand = [&](double u) {
      double theta = -0.5 * x * u;
      double log_rho = 0.0;
      for (double w : weights_) {
        const double wu = w * u;
        theta += 0.5 * dof_ * std::atan(wu);
        log_rho += 0.25 * dof_ * std::log1p(wu * wu);
      }
      return std::sin(theta) * std::exp(-log_rho) / u;
    };

    double integral = 0.0;
    double err_total = 0.0;
    double tail_bound = tail_bound_at(u_end);
    long evals = 0;
    const long eval_budget = 6'000'000;

    double u = 0.0;
    while (u < u_end) {
      double width = panel_width(u, x);
      width = std::min(width, u_end - u);
      // Split a panel until its embedded error estimate is proportional to
      // its share of the span (panels in the decayed region cost nothing).
      struct Seg { double a, b; int depth; };
      std::vector<Seg> stack{{u, u + width, 0}};
      while (!stack.empty()) {
        const Seg seg = stack.back();
        stack.pop_back();
        double v = 0.0, e = 0.0;
        gauss_kronrod_15(integrand, seg.a, seg.b, &v, &e);
        evals += 15;
        const double local_tol =
            eps_quad * (seg.b - seg.a) / u_end + 1e-17 * std::abs(v);
        if (e > local_tol && seg.depth < 14) {
          const double mid = 0.5 * (seg.a + seg.b);
          stack.push_back({seg.a, mid, seg.depth + 1});
          stack.push_back({mid, seg.b, seg.depth + 1});
        } else {
          integral += v;
          err_total += e;
        }
      }
      u += width;
      if (evals > eval_budget) {
        tail_bound = std::min(tail_bound_at(u), 1.0);
        if (achieved_error) *achieved_error = err_total + tail_bound;
        fail(ErrorCode::NumericalFailure,
             "quad-form CDF integration exhausted its budget; achieved error "
             "bound " +
                 std::to_string(err_total + tail_bound) + " > requested " +
                 std::to_string(epsabs));
      }
    }

    if (achieved_error) *achieved_error = err_total + tail_bound;
    const double pi = 3.14159265358979323846;
    double tail_prob = 0.5 + integral / pi;
    return std::clamp(tail_prob, 0.0, 1.0);
  }

 private:
  // Smallest U with the best-subset envelope bound below eps.
  double truncation_point(double eps) const {
    const double pi = 3.14159265358979323846;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j <= weights_.size(); ++j) {
      const double k = 0.5 * dof_ * static_cast<double>(j);
      const double log_u = (-std::log(pi * k * eps) -
                            0.5 * dof_ * log_prefix_[j]) /
                           k;
      best = std::min(best, std::exp(log_u));
    }
    return std::max(best, 1e-10);
  }

  double tail_bound_at(double u) const {
    const double pi = 3.14159265358979323846;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j <= weights_.size(); ++j) {
      const double k = 0.5 * dof_ * static_cast<double>(j);
      const double log_bound = -std::log(pi * k) - k * std::log(u) -
                               0.5 * dof_ * log_prefix_[j];
      best = std::min(best, std::exp(log_bound));
    }
    return best;
  }

  // Roughly a half oscillation of sin(theta(u)) per panel, switching to
  // geometric spacing once the phase has settled.
  double panel_width(double u, double x) const {
    double rate = 0.5 * std::abs(x);
    for (double w : weights_) {
      const double wu = w * u;
      rate += 0.5 * dof_ * std::abs(w) / (1.0 + wu * wu);
    }
    const double pi = 3.14159265358979323846;
    const double oscillation_cap = pi / (2.0 * std::max(rate, 1e-300));
    const double geometric_cap = 3.0 * std::max(u, 1e-3 / std::max(sum_abs_, 1e-300));
    return std::min(oscillation_cap, geometric_cap);
  }

  std::vector<double> weights_;
  int dof_;
  std::vector<double> log_prefix_;
  double sum_abs_ = 0.0;
};

}  // namespace detail

/// Reference CDF Pr(T <= delta) of a weighted chi-square sum, by numerical
/// inversion of the characteristic function. Exact shortcuts cover the
/// single-weight and equal-weight cases. Throws NumericalFailure with the
/// achieved error bound if the integrator cannot reach epsabs.
inline double quadform_cdf(const QuadFormLaw& law, double delta,
                           double epsabs = 1e-8) {
  const auto& w = law.weights();
  if (law.all_positive() && delta <= 0.0) return 0.0;
  if (law.all_negative() && delta >= 0.0) return 1.0;

  // Saturation short-circuit: with probability 1 - 1e-13 every chi-square
  // stays below its union-bound quantile, confining T to [lo, hi]. Outside
  // that envelope the CDF equals 0 or 1 to working precision and the
  // oscillatory integral would only waste effort.
  {
    const double q = 2.0 * boost::math::gamma_p_inv(
                               0.5 * law.dof(),
                               1.0 - 1e-13 / static_cast<double>(w.size()));
    double hi = 0.0, lo = 0.0;
    for (double wi : w) (wi > 0.0 ? hi : lo) += wi * q;
    if (delta >= hi) return 1.0;
    if (delta <= lo) return 0.0;
  }

  const double w0 = w.front();
  const bool equal = std::all_of(w.begin(), w.end(), [&](double wi) {
    return std::abs(wi - w0) <= 1e-15 * std::abs(w0);
  });
  if (equal) {
    const double dof = static_cast<double>(law.dof()) * w.size();
    if (w0 > 0.0) return detail::chi_squared_cdf(dof, delta / w0);
    return 1.0 - detail::chi_squared_cdf(dof, delta / w0);
  }

  detail::ImhofIntegrator imhof(w, law.dof());
  double achieved = 0.0;
  const double tail = imhof.tail(delta, epsabs, &achieved);
  return 1.0 - tail;
}

/// Fast approximate CDF: Pearson's three-moment fit of a shifted, scaled
/// chi-square (normal fallback when the skew vanishes). Not used for
/// calibration; exposed for callers that trade accuracy for speed.
inline double quadform_cdf_approx(const QuadFormLaw& law, double delta) {
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (double w : law.weights()) {
    s1 += w;
    s2 += w * w;
    s3 += w * w * w;
  }
  const double m = static_cast<double>(law.dof());
  const double k1 = m * s1;
  const double k2 = 2.0 * m * s2;
  const double k3 = 8.0 * m * s3;
  if (std::abs(k3) < 1e-14 * std::pow(k2, 1.5)) {
    const double z = (delta - k1) / std::sqrt(k2);
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
  }
  const double a = k3 / (4.0 * k2);
  const double nu = 8.0 * k2 * k2 * k2 / (k3 * k3);
  const double b = k1 - a * nu;
  const double y = (delta - b) / a;
  const double p = detail::chi_squared_cdf(nu, y);
  return a > 0.0 ? p : 1.0 - p;
}

/// Weights w_n = h_a(lambda_n) h_b^2(lambda_n) over the support of h_b.
inline std::vector<double> quadform_weights(const SpectralFilter& h_a,
                                            const SpectralFilter& h_b) {
  if (h_a.size() != h_b.size()) {
    fail(ErrorCode::DimensionMismatch, "filters built for different spectra");
  }
  const double b_scale = h_b.response().cwiseAbs().maxCoeff();
  if (b_scale <= 0.0) {
    fail(ErrorCode::EmptySupport, "h_b is identically zero");
  }
  const double tol_abs = tol::kSingularRel * b_scale;
  std::vector<double> weights;
  for (int n = 0; n < h_b.size(); ++n) {
    const double hb = h_b.response()(n);
    if (std::abs(hb) > tol_abs) {
      weights.push_back(h_a.response()(n) * hb * hb);
    }
  }
  if (weights.empty()) {
    fail(ErrorCode::EmptySupport, "h_b support is empty at tolerance");
  }
  return weights;
}

namespace detail {

/// LRT weights h0^2 ((h0^2)^+ - (h1^2)^+) restricted to supp(h0). With the
/// pseudo-inverse convention this is 1 - h0^2 (h1^2)^+ there.
inline std::vector<double> lrt_law_weights(const SpectralFilter& h0,
                                           const SpectralFilter& h1) {
  if (h0.size() != h1.size()) {
    fail(ErrorCode::DimensionMismatch, "filters built for different spectra");
  }
  const double s0 = h0.response().cwiseAbs().maxCoeff();
  const double s1 = h1.response().cwiseAbs().maxCoeff();
  if (s0 <= 0.0) {
    fail(ErrorCode::EmptySupport, "h0 is identically zero");
  }
  std::vector<double> weights;
  for (int n = 0; n < h0.size(); ++n) {
    const double a = h0.response()(n);
    if (std::abs(a) <= tol::kSingularRel * s0) continue;
    const double b = h1.response()(n);
    double inv1_sq = 0.0;
    if (std::abs(b) > tol::kSingularRel * s1) inv1_sq = 1.0 / (b * b);
    weights.push_back(1.0 - a * a * inv1_sq);
  }
  return weights;
}

inline bool all_zero(const std::vector<double>& w) {
  double w_max = 0.0;
  for (double wi : w) w_max = std::max(w_max, std::abs(wi));
  return w_max <= 1e-14;
}

}  // namespace detail

/// Pr(LRT > gamma | H0). The LRT equals (1/2) sum_n w_n c_n in distribution
/// with the lrt_law_weights above, so the tail is evaluated at 2 gamma; the
/// input noise variance cancels and never enters.
inline double lrt_tail_prob(const SpectralFilter& h0, const SpectralFilter& h1,
                            int m_samples, double gamma,
                            double epsabs = 1e-8) {
  const std::vector<double> weights = detail::lrt_law_weights(h0, h1);
  if (detail::all_zero(weights)) {
    return gamma < 0.0 ? 1.0 : 0.0;  // statistic is identically zero
  }
  QuadFormLaw law(m_samples, weights);
  return 1.0 - quadform_cdf(law, 2.0 * gamma, epsabs);
}

/// Threshold gamma with Pr(LRT > gamma | H0) <= target_pfa, tight at the
/// bisection tolerance. Bracket endpoints bound the statistic through the
/// chi-square 50M envelope.
inline double lrt_threshold(const SpectralFilter& h0, const SpectralFilter& h1,
                            int m_samples, double target_pfa) {
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) {
    fail(ErrorCode::InvalidParameter, "target PFA must lie in (0, 1)");
  }
  const std::vector<double> weights = detail::lrt_law_weights(h0, h1);
  if (detail::all_zero(weights)) {
    fail(ErrorCode::EmptySupport,
         "LRT statistic is identically zero; no threshold exists");
  }
  double neg = 0.0, pos = 0.0;
  for (double w : weights) (w < 0.0 ? neg : pos) += w;
  double lo = std::min(0.0, neg * m_samples * 50.0);
  double hi = pos * m_samples * 50.0;
  const double epsabs = std::min(1e-7, 0.01 * target_pfa);
  QuadFormLaw law(m_samples, weights);
  const auto tail = [&](double gamma) {
    return 1.0 - quadform_cdf(law, 2.0 * gamma, epsabs);
  };
  if (tail(lo) < target_pfa || tail(hi) > target_pfa) {
    fail(ErrorCode::NumericalFailure, "LRT threshold bracket does not straddle");
  }
  const double tol_abs = 1e-10 * (hi - lo);
  for (int it = 0; it < 80 && hi - lo > tol_abs; ++it) {
    const double mid = 0.5 * (lo + hi);
    (tail(mid) > target_pfa ? lo : hi) = mid;
  }
  return hi;  // tail(hi) <= target_pfa
}

/// Weights {1 - gamma / lambda_n} over the nonzero eigenvalues: the law of
/// the defining quadratic form of the semi-parametric statistic under the
/// matched null x ~ N(0, sigma^2 L^+). DegenerateSpectrum when fewer than
/// two nonzero eigenvalues exist (the statistic is then a constant).
inline std::vector<double> semi_quadform_weights(const SpectralGraph& sg,
                                                 double gamma) {
  std::vector<double> weights;
  for (int n = 0; n < sg.n_nodes(); ++n) {
    const double lambda = sg.eigenvalues()(n);
    if (lambda > 0.0) weights.push_back(1.0 - gamma / lambda);
  }
  if (weights.size() < 2) {
    fail(ErrorCode::DegenerateSpectrum,
         "fewer than two nonzero eigenvalues; the smoothness statistic is a "
         "step function");
  }
  return weights;
}

/// Pr(sum_m x^T (L - gamma I) x > 0) under the matched null, which equals
/// Pr(TV ratio > gamma). Scale-free in sigma^2 by construction.
inline double semi_tail_prob(const SpectralGraph& sg, int m_samples,
                             double gamma, double epsabs = 1e-9) {
  const std::vector<double> weights = semi_quadform_weights(sg, gamma);
  if (detail::all_zero(weights)) return 0.0;
  QuadFormLaw law(m_samples, weights);
  return 1.0 - quadform_cdf(law, 0.0, epsabs);
}

/// Inverts semi_tail_prob over gamma in (0, lambda_max). The returned
/// threshold is in raw TV-ratio units (sum TV / sum energy); divide by
/// lambda_avg for the normalized r-hat scale.
inline double semi_threshold(const SpectralGraph& sg, int m_samples,
                             double target_pfa) {
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) {
    fail(ErrorCode::InvalidParameter, "target PFA must lie in (0, 1)");
  }
  semi_quadform_weights(sg, 0.0);  // degenerate-spectrum check
  const double lambda_max = sg.lambda_max();
  double lo = 1e-12 * lambda_max;
  double hi = lambda_max * (1.0 - 1e-12);
  const double tol_abs = 1e-10 * (hi - lo);
  for (int it = 0; it < 80 && hi - lo > tol_abs; ++it) {
    const double mid = 0.5 * (lo + hi);
    (semi_tail_prob(sg, m_samples, mid) > target_pfa ? lo : hi) = mid;
  }
  return hi;  // tail(hi) <= target_pfa
}

/// Tail of the raw TV-over-energy ratio when the data come from a known
/// generating filter: Pr(sum_m x^T (L - gamma I) x > 0 | x ~ h0-filtered
/// white noise), with Prop.-style weights (lambda_n - gamma) h0^2(lambda_n)
/// on supp(h0). The input variance scales all weights equally and cancels.
inline double tv_ratio_tail_prob(const SpectralGraph& sg,
                                 const SpectralFilter& h0, int m_samples,
                                 double gamma, double epsabs = 1e-9) {
  if (h0.size() != sg.n_nodes()) {
    fail(ErrorCode::DimensionMismatch, "filter built for a different spectrum");
  }
  const double s0 = h0.response().cwiseAbs().maxCoeff();
  if (s0 <= 0.0) {
    fail(ErrorCode::EmptySupport, "h0 is identically zero");
  }
  std::vector<double> weights;
  for (int n = 0; n < sg.n_nodes(); ++n) {
    const double h = h0.response()(n);
    if (std::abs(h) > tol::kSingularRel * s0) {
      weights.push_back((sg.eigenvalues()(n) - gamma) * h * h);
    }
  }
  if (weights.empty() || detail::all_zero(weights)) return 0.0;
  QuadFormLaw law(m_samples, weights);
  return 1.0 - quadform_cdf(law, 0.0, epsabs);
}

/// Inverts tv_ratio_tail_prob over gamma in (0, lambda_max); raw TV-ratio
/// units as in semi_threshold.
inline double tv_ratio_threshold(const SpectralGraph& sg,
                                 const SpectralFilter& h0, int m_samples,
                                 double target_pfa) {
  if (!(target_pfa > 0.0 && target_pfa < 1.0)) {
    fail(ErrorCode::InvalidParameter, "target PFA must lie in (0, 1)");
  }
  const double lambda_max = sg.lambda_max();
  double lo = 1e-12 * lambda_max;
  double hi = lambda_max * (1.0 - 1e-12);
  if (tv_ratio_tail_prob(sg, h0, m_samples, lo) < target_pfa) {
    return lo;  // even the smallest threshold over-delivers (tiny support)
  }
  const double tol_abs = 1e-10 * (hi - lo);
  for (int it = 0; it < 80 && hi - lo > tol_abs; ++it) {
    const double mid = 0.5 * (lo + hi);
    (tv_ratio_tail_prob(sg, h0, m_samples, mid) > target_pfa ? lo : hi) = mid;
  }
  return hi;
}

/// False-alarm tail of the variance-free GLRT at ratio threshold gamma:
/// weights h0^2 ((h0^2)^+ - gamma (h1^2)^+) on supp(h0), tail taken at zero.
/// Independent of the noise variance by construction.
inline double glrt_tail_prob(const SpectralFilter& h0, const SpectralFilter& h1,
                             int m_samples, double gamma,
                             double epsabs = 1e-9) {
  if (!(gamma > 0.0)) {
    fail(ErrorCode::InvalidParameter, "GLRT ratio threshold must be positive");
  }
  if (h0.size() != h1.size()) {
    fail(ErrorCode::DimensionMismatch, "filters built for different spectra");
  }
  const double s0 = h0.response().cwiseAbs().maxCoeff();
  const double s1 = h1.response().cwiseAbs().maxCoeff();
  if (s0 <= 0.0) {
    fail(ErrorCode::EmptySupport, "h0 is identically zero");
  }
  std::vector<double> weights;
  for (int n = 0; n < h0.size(); ++n) {
    const double a = h0.response()(n);
    if (std::abs(a) <= tol::kSingularRel * s0) continue;
    const double b = h1.response()(n);
    double inv1_sq = 0.0;
    if (std::abs(b) > tol::kSingularRel * s1) inv1_sq = 1.0 / (b * b);
    weights.push_back(1.0 - gamma * a * a * inv1_sq);
  }
  if (weights.empty()) {
    fail(ErrorCode::EmptySupport, "h0 support is empty at tolerance");
  }
  if (detail::all_zero(weights)) return 0.0;  // zero statistic, strict >
  QuadFormLaw law(m_samples, weights);
  return 1.0 - quadform_cdf(law, 0.0, epsabs);
}

/// GLRT weight list, exposed for cross-checks against the semi-parametric
/// law (the two coincide for h0^2 = L^+, h1 = I).
inline std::vector<double> glrt_law_weights(const SpectralFilter& h0,
                                            const SpectralFilter& h1,
                                            double gamma) {
  const double s0 = h0.response().cwiseAbs().maxCoeff();
  const double s1 = h1.response().cwiseAbs().maxCoeff();
  std::vector<double> weights;
  for (int n = 0; n < h0.size(); ++n) {
    const double a = h0.response()(n);
    if (std::abs(a) <= tol::kSingularRel * s0) continue;
    const double b = h1.response()(n);
    double inv1_sq = 0.0;
    if (std::abs(b) > tol::kSingularRel * s1) inv1_sq = 1.0 / (b * b);
    weights.push_back(1.0 - gamma * a * a * inv1_sq);
  }
  return weights;
}

}  // namespace graphsmooth
