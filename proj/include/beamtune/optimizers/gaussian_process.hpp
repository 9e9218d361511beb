#pragma once

// Gaussian-process regression with an anisotropic Matérn-5/2 kernel.
// Hyperparameters are fitted by maximizing the log marginal likelihood
// (projected Adam in log space, analytic gradients).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace beamtune {

class GpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GpHyperparameters {
  Eigen::VectorXd log_lengthscales;
  double log_signal_var = 0.0;
  double log_noise_var = std::log(1e-4);

  Eigen::Index dim() const { return log_lengthscales.size(); }
  double signal_var() const { return std::exp(log_signal_var); }
  double noise_var() const { return std::exp(log_noise_var); }
};

struct GpConfig {
  double min_lengthscale = 0.02;
  double max_lengthscale = 20.0;
  double min_signal_var = 0.01;
  double max_signal_var = 100.0;
  double min_noise_var = 1e-6;
  double max_noise_var = 0.5;
  double initial_lengthscale = 0.5;
  int iterations = 120;
  double learning_rate = 0.05;
};

namespace detail {

inline constexpr double kSqrt5 = 2.2360679774997896964;

inline double matern52(double r) { return (1.0 + kSqrt5 * r + 5.0 / 3.0 * r * r) * std::exp(-kSqrt5 * r); }

/// d k / d(log l_d) factor: multiply by (delta_d / l_d)^2.
inline double matern52_lengthscale_factor(double r) {
  return 5.0 / 3.0 * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
}

inline double scaled_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& ls) {
  return ((a - b).cwiseQuotient(ls)).norm();
}

}  // namespace detail

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Fitted GP on standardized targets. Inputs are used as given; callers
/// normalize them (settings map into [-1, 1]^5).
class GpModel {
 public:
  GpModel(Eigen::MatrixXd x, Eigen::VectorXd y, GpHyperparameters hyper)
      : x_(std::move(x)), y_raw_(std::move(y)), hyper_(std::move(hyper)) {
    if (x_.rows() == 0) throw std::invalid_argument("GP needs at least one sample");
    if (x_.rows() != y_raw_.size()) throw std::invalid_argument("GP input/target size mismatch");
    if (hyper_.dim() != x_.cols()) throw std::invalid_argument("GP lengthscale dimension mismatch");
    y_mean_ = y_raw_.mean();
    const double var = x_.rows() > 1 ? (y_raw_.array() - y_mean_).square().sum() / static_cast<double>(x_.rows()) : 0.0;
    y_scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
    y_ = (y_raw_.array() - y_mean_) / y_scale_;
    factorize();
  }

  const GpHyperparameters& hyperparameters() const { return hyper_; }
  const Eigen::MatrixXd& inputs() const { return x_; }
  const Eigen::VectorXd& standardized_targets() const { return y_; }
  double jitter() const { return jitter_; }

  double standardize(double y) const { return (y - y_mean_) / y_scale_; }
  double unstandardize(double z) const { return z * y_scale_ + y_mean_; }

  Eigen::VectorXd lengthscales() const { return hyper_.log_lengthscales.array().exp(); }

  /// Posterior of the latent function, standardized units.
  GpPrediction predict(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd ls = lengthscales();
    const double sf2 = hyper_.signal_var();
    Eigen::VectorXd k(x_.rows());
    for (Eigen::Index i = 0; i < x_.rows(); ++i)
      k(i) = sf2 * detail::matern52(detail::scaled_distance(x, x_.row(i).transpose(), ls));
    GpPrediction p;
    p.mean = k.dot(alpha_);
    const Eigen::VectorXd v = llt_.matrixL().solve(k);
    p.variance = std::max(sf2 - v.squaredNorm(), 0.0);
    return p;
  }

  double log_marginal_likelihood() const {
    const auto& L = llt_.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < x_.rows(); ++i) logdet += std::log(L(i, i));
    const double n = static_cast<double>(x_.rows());
    return -0.5 * y_.dot(alpha_) - logdet - 0.5 * n * std::log(2.0 * 3.14159265358979323846);
  }

  /// Log marginal likelihood and its gradient with respect to
  /// (log lengthscales..., log signal var, log noise var).
  double log_marginal_likelihood(Eigen::VectorXd& grad) const {
    const Eigen::Index n = x_.rows();
    const Eigen::Index d = x_.cols();
    const Eigen::VectorXd ls = lengthscales();
    const double sf2 = hyper_.signal_var();
    const Eigen::MatrixXd kinv = llt_.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd w = alpha_ * alpha_.transpose() - kinv;

    grad.setZero(d + 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::VectorXd delta = (x_.row(i) - x_.row(j)).transpose().cwiseQuotient(ls);
        const double r = delta.norm();
        const double f = sf2 * detail::matern52_lengthscale_factor(r);
        for (Eigen::Index k = 0; k < d; ++k) grad(k) += 0.5 * w(i, j) * f * delta(k) * delta(k);
        grad(d) += 0.5 * w(i, j) * sf2 * detail::matern52(r);
      }
    }
    grad(d + 1) = 0.5 * hyper_.noise_var() * w.trace();
    return log_marginal_likelihood();
  }

 private:
  void factorize() {
    const Eigen::Index n = x_.rows();
    const Eigen::VectorXd ls = lengthscales();
    const double sf2 = hyper_.signal_var();
    Eigen::MatrixXd kmat(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      kmat(i, i) = sf2;
      for (Eigen::Index j = 0; j < i; ++j) {
        const double v = sf2 * detail::matern52(detail::scaled_distance(x_.row(i).transpose(), x_.row(j).transpose(), ls));
        kmat(i, j) = v;
        kmat(j, i) = v;
      }
    }
    // Jitter escalation for near-singular kernels.
    jitter_ = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::MatrixXd a = kmat;
      a.diagonal().array() += hyper_.noise_var() + jitter_;
      llt_.compute(a);
      if (llt_.info() == Eigen::Success) {
        alpha_ = llt_.solve(y_);
        if (alpha_.allFinite()) return;
      }
      jitter_ = jitter_ == 0.0 ? 1e-10 * sf2 : jitter_ * 10.0;
    }
    throw GpError("kernel matrix is not positive definite even with jitter");
  }

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_raw_;
  Eigen::VectorXd y_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  GpHyperparameters hyper_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

namespace detail {

inline Eigen::VectorXd pack(const GpHyperparameters& h) {
  Eigen::VectorXd t(h.dim() + 2);
  t.head(h.dim()) = h.log_lengthscales;
  t(h.dim()) = h.log_signal_var;
  t(h.dim() + 1) = h.log_noise_var;
  return t;
}

inline GpHyperparameters unpack(const Eigen::VectorXd& t) {
  const Eigen::Index d = t.size() - 2;
  return {t.head(d), t(d), t(d + 1)};
}

inline void project(Eigen::VectorXd& t, const GpConfig& c) {
  const Eigen::Index d = t.size() - 2;
  for (Eigen::Index i = 0; i < d; ++i)
    t(i) = std::clamp(t(i), std::log(c.min_lengthscale), std::log(c.max_lengthscale));
  t(d) = std::clamp(t(d), std::log(c.min_signal_var), std::log(c.max_signal_var));
  t(d + 1) = std::clamp(t(d + 1), std::log(c.min_noise_var), std::log(c.max_noise_var));
}

}  // namespace detail

/// Fits hyperparameters by marginal likelihood, starting from the default
/// point and (if given) a warm start, and returns the better optimum.
inline GpModel gp_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpConfig& cfg = {},
                      const std::optional<GpHyperparameters>& warm_start = std::nullopt) {
  if (x.rows() == 0) throw std::invalid_argument("gp_fit needs at least one sample");
  const Eigen::Index d = x.cols();

  std::vector<GpHyperparameters> starts;
  GpHyperparameters def;
  def.log_lengthscales = Eigen::VectorXd::Constant(d, std::log(cfg.initial_lengthscale));
  def.log_signal_var = 0.0;
  def.log_noise_var = std::log(std::max(cfg.min_noise_var, 1e-4));
  starts.push_back(def);
  if (warm_start && warm_start->dim() == d) starts.push_back(*warm_start);

  std::optional<GpModel> best;
  double best_lml = -std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    Eigen::VectorXd theta = detail::pack(start);
    detail::project(theta, cfg);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd grad;
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::optional<GpModel> local_best;
    double local_lml = -std::numeric_limits<double>::infinity();
    for (int it = 1; it <= cfg.iterations; ++it) {
      GpModel model(x, y, detail::unpack(theta));
      const double lml = model.log_marginal_likelihood(grad);
      if (std::isfinite(lml) && lml > local_lml) {
        local_lml = lml;
        local_best = model;
      }
      if (!grad.allFinite()) break;
      m = b1 * m + (1.0 - b1) * grad;
      v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(b1, it);
      const double c2 = 1.0 - std::pow(b2, it);
      theta += cfg.learning_rate * (m / c1).cwiseQuotient(((v / c2).array().sqrt() + eps).matrix());
      detail::project(theta, cfg);
    }
    if (!local_best) local_best = GpModel(x, y, detail::unpack(theta));
    if (local_lml > best_lml || !best) {
      best_lml = local_lml;
      best = std::move(local_best);
    }
  }
  return std::move(*best);
}

}  // namespace beamtune
