#pragma once

#include <array>
#include <filesystem>
#include <json.hpp>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ipv/synthgen.hpp"

namespace ipv {

// ---------------------------------------------------------------- SCORE2 ---

/// Coefficients of one sex within one SCORE2-family model.
struct Score2SexModel {
  // Main effects and age interactions on the transformed scale.
  double age = 0, smoking = 0, sbp = 0, diabetes = 0, tchol = 0, hdl = 0;
  double smoking_age = 0, sbp_age = 0, tchol_age = 0, hdl_age = 0, diabetes_age = 0;
  double baseline_survival = 0;
  double mean_linear_predictor = 0;
  double scale1 = 0, scale2 = 0;  // region recalibration
};

struct Score2Transform {
  double age_center = 0, age_scale = 1;
  double sbp_center = 0, sbp_scale = 1;
  double tchol_center = 0, tchol_scale = 1;
  double hdl_center = 0, hdl_scale = 1;
};

struct Score2Model {
  std::string name;
  double age_lo = 0, age_hi = 0;
  Score2Transform transform;
  Score2SexModel male;
  Score2SexModel female;
};

/// SCORE2 (ages 40-69) and SCORE2-OP (70+) for one risk region.
struct Score2Coefficients {
  std::string version;
  std::string region_label;
  Score2Model score2;
  Score2Model score2_op;

  /// Throws ConfigError when any required entry is missing.
  static Score2Coefficients from_json(const nlohmann::json& j);
  static Score2Coefficients load(const std::filesystem::path& path);
  /// The compiled-in "Low" region set shipped in config/score2_low.json.
  static const Score2Coefficients& default_low();
};

struct Score2Inputs {
  double age;
  bool male;
  bool smoker;
  double sbp;
  double total_cholesterol;
  double hdl;
  bool diabetes = false;
};

/// Inputs from a covariate row; total cholesterol is non-HDL + HDL.
Score2Inputs score2_inputs(std::span<const double> patient_row);

/// 10-year risk in percent. SCORE2 below age 70, SCORE2-OP from 70.
double score2_risk(const Score2Inputs& in, const Score2Coefficients& coeffs);
double score2_risk(std::span<const double> patient_row, const Score2Coefficients& coeffs);

/// Moderate-to-high risk threshold by age band.
int score2_eligible(double age, double risk_percent);

// ------------------------------------------------------- threshold rules ---

/// Conjunction over a window of consecutive covariates: eligible when every
/// active covariate is at or below its threshold.
struct ConjunctiveWindow {
  std::vector<int> active_indices;
  std::vector<double> thresholds;

  int width() const { return static_cast<int>(active_indices.size()); }
  void validate() const;
};

struct Score2Rule {
  const Score2Coefficients* coeffs = &Score2Coefficients::default_low();
};

using EligibilityRule = std::variant<Score2Rule, ConjunctiveWindow>;

/// tau_l = empirical quantile of covariate l at level p_star^(1/w).
std::vector<double> calibrate_thresholds(const Cohort& cohort, std::span<const int> active_indices,
                                         double p_star);

int conjunctive_eligible(std::span<const double> patient_row, const ConjunctiveWindow& rule);

/// Eligibility flag m_i of every patient.
std::vector<int> evaluate_eligibility(const Cohort& cohort, const EligibilityRule& rule);

}  // namespace ipv
