#include "ipv/glmm.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <stdexcept>

#include "ipv/errors.hpp"

namespace ipv {

void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: need at least one node");
  Matrix jacobi = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) jacobi(k - 1, k) = jacobi(k, k - 1) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  nodes.resize(static_cast<std::size_t>(n));
  weights.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    nodes[static_cast<std::size_t>(k)] = eig.eigenvalues()(k);
    const double v0 = eig.eigenvectors()(0, k);
    weights[static_cast<std::size_t>(k)] = std::sqrt(std::numbers::pi) * v0 * v0;
  }
}

namespace {

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

class VbObjective {
 public:
  VbObjective(const Matrix& z, std::span<const int> y, std::span<const int> physician_of, int n_physicians,
              const GlmmConfig& cfg)
      : z_(z), y_(y), phys_(physician_of), J_(n_physicians), q_(static_cast<int>(z.cols()) + 1), cfg_(cfg) {
    gauss_hermite(cfg.quadrature, gh_x_, gh_w_);
    for (double& w : gh_w_) w /= std::sqrt(std::numbers::pi);
    z2_ = z.array().square();
  }

  int dim() const { return 2 * q_ + 2 * J_ + 2; }
  int q() const { return q_; }
  int n_physicians() const { return J_; }

  // Index helpers into the parameter vector.
  int mb(int l) const { return l; }
  int wb(int l) const { return q_ + l; }
  int mu(int j) const { return 2 * q_ + j; }
  int wu(int j) const { return 2 * q_ + J_ + j; }
  int mt() const { return 2 * q_ + 2 * J_; }
  int wt() const { return 2 * q_ + 2 * J_ + 1; }

  /// ELBO and its gradient.
  double elbo(const Vector& th, Vector& grad) const {
    grad.setZero(th.size());
    const auto n = static_cast<Eigen::Index>(y_.size());
    const int p = q_ - 1;
    Vector sb2(q_);
    for (int l = 0; l < q_; ++l) sb2(l) = std::exp(2.0 * th(wb(l)));
    Vector su2(J_);
    for (int j = 0; j < J_; ++j) su2(j) = std::exp(2.0 * th(wu(j)));

    double total = 0.0;
    Vector d_mu_phys = Vector::Zero(J_), d_v_phys = Vector::Zero(J_);
    Vector d_mb = Vector::Zero(q_), d_vb = Vector::Zero(q_);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int j = phys_[static_cast<std::size_t>(i)];
      double mean = th(mb(0)) + th(mu(j));
      double var = sb2(0) + su2(j);
      for (int l = 0; l < p; ++l) {
        mean += th(mb(l + 1)) * z_(i, l);
        var += sb2(l + 1) * z2_(i, l);
      }
      const double root = std::sqrt(2.0 * var);
      double e_sp = 0.0, e_sig = 0.0, e_curv = 0.0;
      for (std::size_t k = 0; k < gh_x_.size(); ++k) {
        const double t = mean + root * gh_x_[k];
        const double s = sigmoid(t);
        e_sp += gh_w_[k] * softplus(t);
        e_sig += gh_w_[k] * s;
        e_curv += gh_w_[k] * s * (1.0 - s);
      }
      const double yi = y_[static_cast<std::size_t>(i)];
      total += yi * mean - e_sp;
      const double g_mean = yi - e_sig;
      const double g_var = -0.5 * e_curv;
      d_mu_phys(j) += g_mean;
      d_v_phys(j) += g_var;
      d_mb(0) += g_mean;
      d_vb(0) += g_var;
      for (int l = 0; l < p; ++l) {
        d_mb(l + 1) += g_mean * z_(i, l);
        d_vb(l + 1) += g_var * z2_(i, l);
      }
    }

    const double log2pi = std::log(2.0 * std::numbers::pi);
    const double prior_var = cfg_.priors.fixed_effect_sd * cfg_.priors.fixed_effect_sd;
    for (int l = 0; l < q_; ++l) {
      const double m = th(mb(l));
      total += -0.5 * (log2pi + std::log(prior_var)) - (m * m + sb2(l)) / (2.0 * prior_var);
      total += 0.5 * (log2pi + 1.0) + th(wb(l));  // entropy
      grad(mb(l)) = d_mb(l) - m / prior_var;
      grad(wb(l)) = (d_vb(l) - 0.5 / prior_var) * 2.0 * sb2(l) + 1.0;
    }

    const double m_t = th(mt());
    const double st2 = std::exp(2.0 * th(wt()));
    const double inv_scale2 = std::exp(-2.0 * m_t + 2.0 * st2);  // E[exp(-2 tau)]
    double ss = 0.0;
    for (int j = 0; j < J_; ++j) {
      const double m = th(mu(j));
      ss += m * m + su2(j);
      total += -0.5 * log2pi - m_t - 0.5 * inv_scale2 * (m * m + su2(j));
      total += 0.5 * (log2pi + 1.0) + th(wu(j));
      grad(mu(j)) = d_mu_phys(j) - inv_scale2 * m;
      grad(wu(j)) = (d_v_phys(j) - 0.5 * inv_scale2) * 2.0 * su2(j) + 1.0;
    }
    const double pm = cfg_.priors.log_scale_mean, ps2 = cfg_.priors.log_scale_sd * cfg_.priors.log_scale_sd;
    total += -0.5 * (log2pi + std::log(ps2)) - ((m_t - pm) * (m_t - pm) + st2) / (2.0 * ps2);
    total += 0.5 * (log2pi + 1.0) + th(wt());
    grad(mt()) = -static_cast<double>(J_) + inv_scale2 * ss - (m_t - pm) / ps2;
    grad(wt()) = -0.5 * ss * inv_scale2 * 4.0 * st2 - st2 / ps2 + 1.0;
    return total;
  }

 private:
  const Matrix& z_;
  std::span<const int> y_;
  std::span<const int> phys_;
  int J_, q_;
  const GlmmConfig& cfg_;
  Matrix z2_;
  std::vector<double> gh_x_, gh_w_;
};

}  // namespace

GlmmFit fit_vb(const Matrix& z, std::span<const int> y, std::span<const int> physician_of, int n_physicians,
               const GlmmConfig& config) {
  const auto n = static_cast<std::size_t>(z.rows());
  if (y.size() != n || physician_of.size() != n) throw std::invalid_argument("fit_vb: length mismatch");
  if (n_physicians < 2) throw FitError("fit_vb: need at least two physicians");
  const auto ones = std::count(y.begin(), y.end(), 1);
  if (ones == 0 || ones == static_cast<std::ptrdiff_t>(n)) throw FitError("fit_vb: y has a single class");

  const VbObjective obj(z, y, physician_of, n_physicians, config);
  Vector th = Vector::Zero(obj.dim());
  const double rate = static_cast<double>(ones) / static_cast<double>(n);
  th(obj.mb(0)) = std::log(rate / (1.0 - rate));
  for (int l = 0; l < obj.q(); ++l) th(obj.wb(l)) = std::log(0.1);
  for (int j = 0; j < n_physicians; ++j) th(obj.wu(j)) = std::log(0.1);
  th(obj.mt()) = std::log(0.5);
  th(obj.wt()) = std::log(0.1);

  GlmmFit fit;
  // L-BFGS on -ELBO.
  Vector g(th.size());
  double f = -obj.elbo(th, g);
  g = -g;
  if (!std::isfinite(f)) throw FitError("fit_vb: non-finite ELBO at the starting point");
  fit.elbo_trace.push_back(-f);

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vector g_new(th.size());
  for (int it = 1; it <= config.max_iter; ++it) {
    // Two-loop recursion.
    Vector d = -g;
    std::vector<double> alpha(s_hist.size());
    for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
      alpha[static_cast<std::size_t>(k)] = rho_hist[static_cast<std::size_t>(k)] * s_hist[static_cast<std::size_t>(k)].dot(d);
      d -= alpha[static_cast<std::size_t>(k)] * y_hist[static_cast<std::size_t>(k)];
    }
    if (!s_hist.empty()) {
      d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      d /= std::max(1.0, g.norm());
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(d);
      d += (alpha[k] - beta) * s_hist[k];
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g / std::max(1.0, g.norm());
      slope = g.dot(d);
    }

    double step = 1.0;
    Vector trial;
    double f_trial = 0.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      trial = th + step * d;
      f_trial = -obj.elbo(trial, g_new);
      if (std::isfinite(f_trial) && f_trial <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    fit.iterations = it;
    if (!accepted) {
      fit.converged = true;  // no further descent possible at machine precision
      break;
    }
    g_new = -g_new;
    const Vector s = trial - th;
    const Vector yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12) {
      s_hist.push_back(s);
      y_hist.push_back(yv);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > config.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double rel = std::abs(f_trial - f) / std::max(std::abs(f), 1e-300);
    th = trial;
    f = f_trial;
    g = g_new;
    fit.elbo_trace.push_back(-f);
    if (!std::isfinite(f)) throw FitError("fit_vb: non-finite ELBO");
    if (rel < config.rel_tol) {
      fit.converged = true;
      break;
    }
  }

  const int q = obj.q();
  fit.beta0 = th(obj.mb(0));
  fit.beta.resize(static_cast<std::size_t>(q - 1));
  fit.beta_sd.resize(static_cast<std::size_t>(q));
  for (int l = 0; l < q; ++l) {
    if (l > 0) fit.beta[static_cast<std::size_t>(l - 1)] = th(obj.mb(l));
    fit.beta_sd[static_cast<std::size_t>(l)] = std::exp(th(obj.wb(l)));
  }
  fit.u.resize(static_cast<std::size_t>(n_physicians));
  fit.u_sd.resize(static_cast<std::size_t>(n_physicians));
  for (int j = 0; j < n_physicians; ++j) {
    fit.u[static_cast<std::size_t>(j)] = th(obj.mu(j));
    fit.u_sd[static_cast<std::size_t>(j)] = std::exp(th(obj.wu(j)));
  }
  fit.log_sigma_u_mean = th(obj.mt());
  fit.log_sigma_u_sd = std::exp(th(obj.wt()));
  fit.sigma_u = std::exp(fit.log_sigma_u_mean);
  for (double v : fit.beta)
    if (!std::isfinite(v)) throw FitError("fit_vb: non-finite posterior mean");
  return fit;
}

std::vector<double> fitted_probabilities(const GlmmFit& fit, const Matrix& z, std::span<const int> physician_of,
                                         int* clamped) {
  constexpr double kEps = 1e-9;
  std::vector<double> out(static_cast<std::size_t>(z.rows()));
  int n_clamped = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double eta = fit.beta0 + fit.u[static_cast<std::size_t>(physician_of[static_cast<std::size_t>(i)])];
    for (Eigen::Index l = 0; l < z.cols(); ++l) eta += fit.beta[static_cast<std::size_t>(l)] * z(i, l);
    double p = sigmoid(eta);
    if (p < kEps || p > 1.0 - kEps) {
      p = std::clamp(p, kEps, 1.0 - kEps);
      ++n_clamped;
    }
    out[static_cast<std::size_t>(i)] = p;
  }
  if (clamped) *clamped = n_clamped;
  return out;
}

OverdispersionScores overdispersion_scores(const GlmmFit& fit, const Matrix& z, std::span<const int> y,
                                           std::span<const int> physician_of, int n_physicians) {
  OverdispersionScores out;
  const auto p_hat = fitted_probabilities(fit, z, physician_of, &out.clamped);
  out.residuals.resize(p_hat.size());
  out.od.assign(static_cast<std::size_t>(n_physicians), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(n_physicians), 0);
  for (std::size_t i = 0; i < p_hat.size(); ++i) {
    const double r = (y[i] - p_hat[i]) / std::sqrt(p_hat[i] * (1.0 - p_hat[i]));
    out.residuals[i] = r;
    const auto j = static_cast<std::size_t>(physician_of[i]);
    out.od[j] += r * r;
    ++counts[j];
  }
  for (std::size_t j = 0; j < out.od.size(); ++j)
    if (counts[j] > 0) out.od[j] /= counts[j];
  return out;
}

std::vector<CalibrationBin> calibration_curve(std::span<const double> predicted, std::span<const int> y, int n_bins) {
  if (predicted.size() != y.size()) throw std::invalid_argument("calibration_curve: length mismatch");
  if (n_bins < 1) throw std::invalid_argument("calibration_curve: need at least one bin");
  std::vector<CalibrationBin> bins(static_cast<std::size_t>(n_bins));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int b = std::clamp(static_cast<int>(predicted[i] * n_bins), 0, n_bins - 1);
    auto& bin = bins[static_cast<std::size_t>(b)];
    bin.mean_predicted += predicted[i];
    bin.observed += y[i];
    ++bin.count;
  }
  std::vector<CalibrationBin> out;
  for (int b = 0; b < n_bins; ++b) {
    auto bin = bins[static_cast<std::size_t>(b)];
    if (bin.count == 0) continue;
    bin.lo = static_cast<double>(b) / n_bins;
    bin.hi = static_cast<double>(b + 1) / n_bins;
    bin.mean_predicted /= bin.count;
    bin.observed /= bin.count;
    out.push_back(bin);
  }
  return out;
}

std::vector<CalibrationBin> calibration_curve(const GlmmFit& fit, const Matrix& z, std::span<const int> y,
                                              std::span<const int> physician_of, int n_bins) {
  return calibration_curve(fitted_probabilities(fit, z, physician_of), y, n_bins);
}

}  // namespace ipv
