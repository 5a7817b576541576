#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ipv/random.hpp"

namespace ipv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Fixed covariate order. Rules and exports index into this order.
enum Covariate : int {
  kAge = 0,
  kHba1c = 1,
  kNonHdl = 2,
  kHdl = 3,
  kLdl = 4,
  kSbp = 5,
  kEgfr = 6,
  kSmoker = 7,
  kMale = 8,
};
inline constexpr int kNumCovariates = 9;

enum class ValueKind { integer, continuous, binary };

struct Gaussian {
  double mean;
  double sd;
};
struct Bernoulli {
  double prob;
};
struct LogNormal {
  double mu;
  double sigma;
};
using Distribution = std::variant<Gaussian, Bernoulli, LogNormal>;

struct CovariateSpec {
  std::string name;
  Distribution distribution;
  double lo = 0.0;
  double hi = 1.0;
  ValueKind kind = ValueKind::continuous;

  /// Throws ConfigError when the spec violates its invariants.
  void validate() const;
};

/// The nine covariates with their main-benchmark generating distributions.
std::vector<CovariateSpec> default_covariates();

struct IndependentVariant {};
/// Gaussian copula between non-HDL and LDL with a target Spearman correlation.
struct CopulaVariant {
  double rho_target = 0.8;
};
/// HbA1c drawn from a lognormal instead of a clipped Gaussian.
struct LognormalHba1cVariant {
  double mu = 1.846;
  double sigma = 0.228;
};
using CohortVariant = std::variant<IndependentVariant, CopulaVariant, LognormalHba1cVariant>;

std::string variant_name(const CohortVariant& v);

struct CohortConfig {
  int n_patients = 10000;
  int n_physicians = 20;
  int min_panel_size = 90;
  std::vector<CovariateSpec> covariates = default_covariates();
  CohortVariant variant = IndependentVariant{};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Patients x covariates in natural units plus the physician of each patient.
/// Physician ids are 0-based internally; exports write 1-based ids.
struct Cohort {
  Matrix covariates;
  std::vector<int> physician_of;
  CohortConfig config;

  int n() const { return static_cast<int>(physician_of.size()); }
  int n_physicians() const { return config.n_physicians; }
  /// Patient indices of each physician in ascending order.
  std::vector<std::vector<int>> panels() const;
};

/// At least min_panel patients per physician (assigned in index order), the
/// remainder distributed i.i.d. uniformly over physicians.
std::vector<int> allocate_physicians(int n, int n_physicians, int min_panel, Rng& rng);

Cohort generate_cohort(const CohortConfig& config);

}  // namespace ipv
