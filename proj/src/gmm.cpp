#include <tbb/parallel_for.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "ipv/errors.hpp"
#include "ipv/lpa.hpp"
#include "ipv/random.hpp"

namespace ipv {

void GmmConfig::validate() const {
  if (k_min < 1 || k_max < k_min) throw ConfigError("gmm: need 1 <= k_min <= k_max");
  if (n_init < 1 || max_iter < 1) throw ConfigError("gmm: n_init and max_iter must be positive");
  if (!(tol > 0.0) || reg < 0.0) throw ConfigError("gmm: tol must be positive and reg non-negative");
}

int GmmModel::n_parameters() const {
  const int p = static_cast<int>(means.cols());
  return K * p + K * p * (p + 1) / 2 + K - 1;
}

namespace {

constexpr double kTiny = 10.0 * std::numeric_limits<double>::epsilon();

// log N(x_i | mu_k, Sigma_k) + log w_k for every row and component; false on a
// covariance that is not positive definite.
bool weighted_log_density(const GmmModel& m, const Matrix& x, Matrix& logp) {
  const auto n = x.rows();
  const auto p = x.cols();
  logp.resize(n, m.K);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (int k = 0; k < m.K; ++k) {
    Eigen::LLT<Matrix> llt(m.covariances[static_cast<std::size_t>(k)]);
    if (llt.info() != Eigen::Success) return false;
    const Matrix L = llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index d = 0; d < p; ++d) logdet += 2.0 * std::log(L(d, d));
    Matrix centered = (x.rowwise() - m.means.row(k)).transpose();  // p x n
    llt.matrixL().solveInPlace(centered);
    const Vector maha = centered.colwise().squaredNorm().transpose();
    logp.col(k) = (-0.5 * (static_cast<double>(p) * log2pi + logdet) + std::log(m.weights(k))) -
                  0.5 * maha.array();
  }
  return true;
}

// Normalises logp into responsibilities in place and returns the total log-likelihood.
double e_step(Matrix& logp) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    const double mx = logp.row(i).maxCoeff();
    const double lse = mx + std::log((logp.row(i).array() - mx).exp().sum());
    logp.row(i) = (logp.row(i).array() - lse).exp();
    total += lse;
  }
  return total;
}

void m_step(GmmModel& m, const Matrix& x, const Matrix& resp, double reg) {
  const Vector nk = resp.colwise().sum().transpose().array() + kTiny;
  m.weights = nk / nk.sum();
  m.means = (resp.transpose() * x).array().colwise() / nk.array();
  m.covariances.resize(static_cast<std::size_t>(m.K));
  for (int k = 0; k < m.K; ++k) {
    const Matrix centered = x.rowwise() - m.means.row(k);
    Matrix cov = (centered.array().colwise() * resp.col(k).array()).matrix().transpose() * centered / nk(k);
    cov.diagonal().array() += reg;
    m.covariances[static_cast<std::size_t>(k)] = cov;
  }
}

Matrix kmeanspp_assignment(const Matrix& x, int K, Rng& rng) {
  const auto n = x.rows();
  std::vector<Eigen::Index> centers;
  centers.push_back(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  Vector d2 = (x.rowwise() - x.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < K) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > u && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    }
    centers.push_back(pick);
    d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
  }
  Matrix resp = Matrix::Zero(n, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      const double d = (x.row(i) - x.row(centers[static_cast<std::size_t>(k)])).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    resp(i, best) = 1.0;
  }
  return resp;
}

}  // namespace

GmmModel fit_gmm(const Matrix& x, int K, std::uint64_t seed, const GmmConfig& config, std::vector<double>* ll_trace) {
  if (K < 1 || x.rows() < K) throw std::invalid_argument("fit_gmm: need 1 <= K <= n");
  Rng rng(seed);
  GmmModel m;
  m.K = K;
  Matrix resp = kmeanspp_assignment(x, K, rng);
  m_step(m, x, resp, config.reg);

  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 1; it <= config.max_iter; ++it) {
    if (!weighted_log_density(m, x, resp)) {
      m.converged = false;
      m.log_likelihood = -std::numeric_limits<double>::infinity();
      m.iterations = it;
      m.bic = std::numeric_limits<double>::infinity();
      return m;
    }
    const double ll = e_step(resp);
    if (ll_trace) ll_trace->push_back(ll);
    m.iterations = it;
    if (std::isfinite(prev) && std::abs(ll - prev) <= config.tol * std::abs(prev)) {
      m.converged = true;
      m.log_likelihood = ll;
      break;
    }
    prev = ll;
    m.log_likelihood = ll;
    m_step(m, x, resp, config.reg);
  }
  // The model parameters are the last M-step; report their likelihood.
  m.log_likelihood = gmm_log_likelihood(m, x);
  m.bic = -2.0 * m.log_likelihood + m.n_parameters() * std::log(static_cast<double>(x.rows()));
  if (!std::isfinite(m.log_likelihood)) {
    m.converged = false;
    m.bic = std::numeric_limits<double>::infinity();
  }
  return m;
}

double gmm_log_likelihood(const GmmModel& model, const Matrix& x) {
  Matrix logp;
  if (!weighted_log_density(model, x, logp)) return -std::numeric_limits<double>::infinity();
  return e_step(logp);
}

Matrix gmm_responsibilities(const GmmModel& model, const Matrix& x) {
  Matrix logp;
  if (!weighted_log_density(model, x, logp)) throw FitError("gmm: covariance not positive definite");
  e_step(logp);
  return logp;
}

GmmSelection fit_gmm_bic(const Matrix& x, const GmmConfig& config) {
  config.validate();
  const int n_k = config.k_max - config.k_min + 1;
  const int runs = n_k * config.n_init;
  std::vector<GmmModel> fits(static_cast<std::size_t>(runs));
  tbb::parallel_for(0, runs, [&](int r) {
    const int K = config.k_min + r / config.n_init;
    const int init = r % config.n_init;
    const auto seed = derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(K)), static_cast<std::uint64_t>(init));
    fits[static_cast<std::size_t>(r)] = fit_gmm(x, K, seed, config);
  });

  GmmSelection out;
  std::vector<GmmModel> best_per_k;
  for (int kk = 0; kk < n_k; ++kk) {
    int best = kk * config.n_init;
    for (int init = 1; init < config.n_init; ++init) {
      const int r = kk * config.n_init + init;
      if (fits[static_cast<std::size_t>(r)].log_likelihood > fits[static_cast<std::size_t>(best)].log_likelihood) best = r;
    }
    const auto& f = fits[static_cast<std::size_t>(best)];
    out.candidates.push_back({f.K, f.converged, f.bic, f.log_likelihood, f.iterations});
    best_per_k.push_back(std::move(fits[static_cast<std::size_t>(best)]));
  }
  int chosen = -1;
  for (int kk = 0; kk < n_k; ++kk) {
    const auto& f = best_per_k[static_cast<std::size_t>(kk)];
    if (!f.converged) continue;
    if (chosen < 0 || f.bic < best_per_k[static_cast<std::size_t>(chosen)].bic) chosen = kk;
  }
  if (chosen < 0) {
    out.fallback = true;
    chosen = 0;
  }
  out.model = std::move(best_per_k[static_cast<std::size_t>(chosen)]);
  out.memberships = gmm_responsibilities(out.model, x);
  return out;
}

}  // namespace ipv
