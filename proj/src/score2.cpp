#include <cmath>
#include <fstream>

#include "ipv/errors.hpp"
#include "ipv/rules.hpp"
#include "score2_default.hpp"

namespace ipv {

namespace {

using nlohmann::json;

double req(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ConfigError("SCORE2 coefficients: missing '" + std::string(key) + "' in " + where);
  return j.at(key).get<double>();
}

Score2SexModel parse_sex(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError("SCORE2 coefficients: missing block " + where);
  if (!j.contains("coefficients")) throw ConfigError("SCORE2 coefficients: missing coefficients in " + where);
  const auto& c = j.at("coefficients");
  Score2SexModel m;
  m.age = req(c, "age", where);
  m.smoking = req(c, "smoking", where);
  m.sbp = req(c, "sbp", where);
  m.diabetes = req(c, "diabetes", where);
  m.tchol = req(c, "tchol", where);
  m.hdl = req(c, "hdl", where);
  m.smoking_age = req(c, "smoking_age", where);
  m.sbp_age = req(c, "sbp_age", where);
  m.tchol_age = req(c, "tchol_age", where);
  m.hdl_age = req(c, "hdl_age", where);
  m.diabetes_age = req(c, "diabetes_age", where);
  m.baseline_survival = req(j, "baseline_survival", where);
  m.mean_linear_predictor = req(j, "mean_linear_predictor", where);
  if (!j.contains("calibration")) throw ConfigError("SCORE2 coefficients: missing calibration in " + where);
  m.scale1 = req(j.at("calibration"), "scale1", where);
  m.scale2 = req(j.at("calibration"), "scale2", where);
  if (!(m.baseline_survival > 0.0 && m.baseline_survival < 1.0))
    throw ConfigError("SCORE2 coefficients: baseline_survival outside (0,1) in " + where);
  return m;
}

Score2Model parse_model(const json& j) {
  Score2Model m;
  m.name = j.at("name").get<std::string>();
  m.age_lo = j.at("age_range").at(0).get<double>();
  m.age_hi = j.at("age_range").at(1).get<double>();
  const auto& t = j.at("transform");
  auto pair = [&](const char* key, double& center, double& scale) {
    if (!t.contains(key)) throw ConfigError("SCORE2 coefficients: missing transform '" + std::string(key) + "'");
    center = req(t.at(key), "center", m.name);
    scale = req(t.at(key), "scale", m.name);
  };
  pair("age", m.transform.age_center, m.transform.age_scale);
  pair("sbp", m.transform.sbp_center, m.transform.sbp_scale);
  pair("tchol", m.transform.tchol_center, m.transform.tchol_scale);
  pair("hdl", m.transform.hdl_center, m.transform.hdl_scale);
  m.male = parse_sex(j.value("male", json()), m.name + ".male");
  m.female = parse_sex(j.value("female", json()), m.name + ".female");
  return m;
}

double model_risk(const Score2Model& model, const Score2Inputs& in) {
  const auto& t = model.transform;
  const auto& c = in.male ? model.male : model.female;
  const double age = (in.age - t.age_center) / t.age_scale;
  const double sbp = (in.sbp - t.sbp_center) / t.sbp_scale;
  const double tchol = (in.total_cholesterol - t.tchol_center) / t.tchol_scale;
  const double hdl = (in.hdl - t.hdl_center) / t.hdl_scale;
  const double smk = in.smoker ? 1.0 : 0.0;
  const double dia = in.diabetes ? 1.0 : 0.0;
  const double lp = c.age * age + c.smoking * smk + c.sbp * sbp + c.diabetes * dia + c.tchol * tchol +
                    c.hdl * hdl + c.smoking_age * smk * age + c.sbp_age * sbp * age +
                    c.tchol_age * tchol * age + c.hdl_age * hdl * age + c.diabetes_age * dia * age;
  const double uncalibrated = 1.0 - std::pow(c.baseline_survival, std::exp(lp - c.mean_linear_predictor));
  const double cloglog = std::log(-std::log(1.0 - uncalibrated));
  const double calibrated = 1.0 - std::exp(-std::exp(c.scale1 + c.scale2 * cloglog));
  return 100.0 * calibrated;
}

}  // namespace

Score2Coefficients Score2Coefficients::from_json(const json& j) {
  Score2Coefficients out;
  out.version = j.value("version", std::string("unversioned"));
  out.region_label = j.value("region_label", std::string());
  if (!j.contains("models") || !j.at("models").is_array())
    throw ConfigError("SCORE2 coefficients: missing 'models' array");
  bool have_main = false, have_op = false;
  for (const auto& mj : j.at("models")) {
    const auto name = mj.at("name").get<std::string>();
    if (name == "SCORE2") {
      out.score2 = parse_model(mj);
      have_main = true;
    } else if (name == "SCORE2-OP") {
      out.score2_op = parse_model(mj);
      have_op = true;
    }
  }
  if (!have_main || !have_op) throw ConfigError("SCORE2 coefficients: both SCORE2 and SCORE2-OP are required");
  return out;
}

Score2Coefficients Score2Coefficients::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open SCORE2 coefficient file " + path.string());
  return from_json(json::parse(in));
}

const Score2Coefficients& Score2Coefficients::default_low() {
  static const Score2Coefficients coeffs = from_json(json::parse(detail::kDefaultScore2Json));
  return coeffs;
}

Score2Inputs score2_inputs(std::span<const double> row) {
  return Score2Inputs{row[kAge],  row[kMale] > 0.5, row[kSmoker] > 0.5, row[kSbp],
                      row[kNonHdl] + row[kHdl], row[kHdl]};
}

double score2_risk(const Score2Inputs& in, const Score2Coefficients& coeffs) {
  const auto& model = in.age < coeffs.score2_op.age_lo ? coeffs.score2 : coeffs.score2_op;
  return model_risk(model, in);
}

double score2_risk(std::span<const double> row, const Score2Coefficients& coeffs) {
  return score2_risk(score2_inputs(row), coeffs);
}

int score2_eligible(double age, double risk) {
  if (age < 50.0) return risk >= 2.5 ? 1 : 0;
  if (age <= 69.0) return risk >= 5.0 ? 1 : 0;
  return risk >= 7.5 ? 1 : 0;
}

}  // namespace ipv
