#include "ipv/cohort_io.hpp"

#include <cstdio>
#include <array>
#include <fstream>
#include <sstream>

#include "ipv/errors.hpp"

namespace ipv {

namespace {

using nlohmann::json;

std::string kind_name(ValueKind k) {
  switch (k) {
    case ValueKind::integer: return "integer";
    case ValueKind::continuous: return "continuous";
    case ValueKind::binary: return "binary";
  }
  return "continuous";
}

ValueKind kind_from(const std::string& s) {
  if (s == "integer") return ValueKind::integer;
  if (s == "continuous") return ValueKind::continuous;
  if (s == "binary") return ValueKind::binary;
  throw ConfigError("unknown value_kind '" + s + "'");
}

json distribution_json(const Distribution& d) {
  if (const auto* g = std::get_if<Gaussian>(&d)) return {{"kind", "gaussian"}, {"mean", g->mean}, {"sd", g->sd}};
  if (const auto* b = std::get_if<Bernoulli>(&d)) return {{"kind", "bernoulli"}, {"prob", b->prob}};
  const auto& l = std::get<LogNormal>(d);
  return {{"kind", "lognormal"}, {"mu", l.mu}, {"sigma", l.sigma}};
}

Distribution distribution_from(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") return Gaussian{j.at("mean").get<double>(), j.at("sd").get<double>()};
  if (kind == "bernoulli") return Bernoulli{j.at("prob").get<double>()};
  if (kind == "lognormal") return LogNormal{j.at("mu").get<double>(), j.at("sigma").get<double>()};
  throw ConfigError("unknown distribution kind '" + kind + "'");
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

json cohort_config_to_json(const CohortConfig& config) {
  json covs = json::array();
  for (const auto& c : config.covariates) {
    covs.push_back({{"name", c.name},
                    {"distribution", distribution_json(c.distribution)},
                    {"clip_range", {c.lo, c.hi}},
                    {"value_kind", kind_name(c.kind)}});
  }
  json variant = {{"kind", variant_name(config.variant)}};
  if (const auto* cv = std::get_if<CopulaVariant>(&config.variant)) variant["rho_target"] = cv->rho_target;
  if (const auto* lv = std::get_if<LognormalHba1cVariant>(&config.variant)) {
    variant["mu"] = lv->mu;
    variant["sigma"] = lv->sigma;
  }
  return {{"n_patients", config.n_patients},
          {"n_physicians", config.n_physicians},
          {"min_panel_size", config.min_panel_size},
          {"covariates", covs},
          {"variant", variant},
          {"seed", config.seed}};
}

CohortConfig cohort_config_from_json(const json& j) {
  CohortConfig c;
  c.n_patients = j.at("n_patients").get<int>();
  c.n_physicians = j.at("n_physicians").get<int>();
  c.min_panel_size = j.value("min_panel_size", 90);
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("covariates")) {
    c.covariates.clear();
    for (const auto& cj : j.at("covariates")) {
      CovariateSpec s;
      s.name = cj.at("name").get<std::string>();
      s.distribution = distribution_from(cj.at("distribution"));
      s.lo = cj.at("clip_range").at(0).get<double>();
      s.hi = cj.at("clip_range").at(1).get<double>();
      s.kind = kind_from(cj.at("value_kind").get<std::string>());
      c.covariates.push_back(std::move(s));
    }
  }
  const auto& v = j.at("variant");
  const auto kind = v.at("kind").get<std::string>();
  if (kind == "independent") {
    c.variant = IndependentVariant{};
  } else if (kind == "copula_nonhdl_ldl") {
    c.variant = CopulaVariant{v.at("rho_target").get<double>()};
  } else if (kind == "lognormal_hba1c") {
    c.variant = LognormalHba1cVariant{v.at("mu").get<double>(), v.at("sigma").get<double>()};
  } else {
    throw ConfigError("unknown cohort variant '" + kind + "'");
  }
  return c;
}

void write_cohort_csv(const std::filesystem::path& csv_path, const Cohort& cohort, const std::vector<int>* y,
                      const std::vector<int>* m) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot write " + csv_path.string());
  for (const auto& c : cohort.config.covariates) out << c.name << ',';
  out << "physician";
  const bool with_outcomes = y != nullptr && m != nullptr;
  if (with_outcomes) out << ",y,m";
  out << '\n';
  for (int i = 0; i < cohort.n(); ++i) {
    for (int c = 0; c < kNumCovariates; ++c) out << fmt_double(cohort.covariates(i, c)) << ',';
    out << cohort.physician_of[static_cast<std::size_t>(i)] + 1;
    if (with_outcomes) out << ',' << (*y)[static_cast<std::size_t>(i)] << ',' << (*m)[static_cast<std::size_t>(i)];
    out << '\n';
  }
  std::ofstream side(csv_path.string() + ".json");
  side << cohort_config_to_json(cohort.config).dump(2) << '\n';
}

LoadedCohort read_cohort_csv(const std::filesystem::path& csv_path) {
  std::ifstream side(csv_path.string() + ".json");
  if (!side) throw std::runtime_error("missing sidecar " + csv_path.string() + ".json");
  LoadedCohort loaded;
  loaded.cohort.config = cohort_config_from_json(json::parse(side));

  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot read " + csv_path.string());
  std::string line;
  std::getline(in, line);
  const bool with_outcomes = line.size() >= 4 && line.ends_with(",y,m");
  std::vector<std::array<double, kNumCovariates>> rows;
  std::vector<int> phys, ys, ms;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::array<double, kNumCovariates> row{};
    for (int c = 0; c < kNumCovariates; ++c) {
      std::getline(ss, cell, ',');
      row[static_cast<std::size_t>(c)] = std::stod(cell);
    }
    std::getline(ss, cell, ',');
    phys.push_back(std::stoi(cell) - 1);
    if (with_outcomes) {
      std::getline(ss, cell, ',');
      ys.push_back(std::stoi(cell));
      std::getline(ss, cell, ',');
      ms.push_back(std::stoi(cell));
    }
    rows.push_back(row);
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  loaded.cohort.covariates.resize(n, kNumCovariates);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < kNumCovariates; ++c)
      loaded.cohort.covariates(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  loaded.cohort.physician_of = std::move(phys);
  if (with_outcomes) {
    loaded.y = std::move(ys);
    loaded.m = std::move(ms);
  }
  return loaded;
}

}  // namespace ipv
