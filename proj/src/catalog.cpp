#include "ipv/catalog.hpp"

#include <algorithm>
#include <cstdio>

#include "ipv/cohort_io.hpp"
#include "ipv/errors.hpp"

namespace ipv {

namespace {

using nlohmann::json;

std::string progressive_id(int pass, int w, int start) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "prog_p%d_w%d_s%d", pass, w, start);
  return buf;
}

ExperimentSpec score2_like(const std::string& id, ExperimentKind kind, const MasterConfig& master) {
  ExperimentSpec s;
  s.id = id;
  s.kind = kind;
  s.cohort.n_patients = master.n_patients;
  s.cohort.n_physicians = master.n_physicians;
  s.cohort.min_panel_size = master.min_panel_size;
  assign_seeds(s, master.master_seed);
  return s;
}

}  // namespace

std::string experiment_kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::score2: return "score2";
    case ExperimentKind::progressive: return "progressive";
    case ExperimentKind::sensitivity_copula: return "sensitivity_copula";
    case ExperimentKind::sensitivity_lognormal: return "sensitivity_lognormal";
    case ExperimentKind::continuous: return "continuous";
    case ExperimentKind::grid: return "grid";
  }
  return "score2";
}

ExperimentKind experiment_kind_from(const std::string& s) {
  for (auto k : {ExperimentKind::score2, ExperimentKind::progressive, ExperimentKind::sensitivity_copula,
                 ExperimentKind::sensitivity_lognormal, ExperimentKind::continuous, ExperimentKind::grid})
    if (experiment_kind_name(k) == s) return k;
  throw ConfigError("unknown experiment kind '" + s + "'");
}

std::uint64_t ExperimentSpec::stage_seed(std::string_view stage) const { return derive_seed(stream_seed, {stage}); }

void assign_seeds(ExperimentSpec& spec, std::uint64_t master_seed) {
  spec.cohort.seed = derive_seed(master_seed, {spec.id, "cohort"});
  spec.stream_seed = derive_seed(master_seed, {spec.id, "stages"});
}

std::vector<ExperimentSpec> build_catalog(const MasterConfig& master) {
  std::vector<ExperimentSpec> out;
  out.reserve(94);
  out.push_back(score2_like("score2", ExperimentKind::score2, master));

  for (int pass = 1; pass <= 2; ++pass) {
    for (int w = 1; w <= kNumCovariates; ++w) {
      for (int start = 0; start + w <= kNumCovariates; ++start) {
        ExperimentSpec s = score2_like(progressive_id(pass, w, start + 1), ExperimentKind::progressive, master);
        for (int k = 0; k < w; ++k) s.window.push_back(start + k);
        s.pass_index = pass;
        s.window_width = w;
        s.window_start = start + 1;
        Rng rng(derive_seed(master.master_seed, {s.id, "p_star"}));
        s.p_star = rng.uniform(0.2, 0.8);
        out.push_back(std::move(s));
      }
    }
  }

  ExperimentSpec copula = score2_like("sens_copula", ExperimentKind::sensitivity_copula, master);
  copula.cohort.variant = CopulaVariant{master.copula_rho};
  out.push_back(std::move(copula));

  ExperimentSpec lognormal = score2_like("sens_lognormal", ExperimentKind::sensitivity_lognormal, master);
  lognormal.cohort.variant = LognormalHba1cVariant{master.lognormal_mu, master.lognormal_sigma};
  out.push_back(std::move(lognormal));

  ExperimentSpec cont = score2_like("continuous", ExperimentKind::continuous, master);
  cont.physician_model = PhysicianModel::continuous_uniform;
  cont.cohort.n_patients = master.continuous_n_patients;
  cont.cohort.n_physicians = master.continuous_n_physicians;
  out.push_back(std::move(cont));
  return out;
}

std::vector<ExperimentSpec> build_grid(std::uint64_t master_seed, const GridConfig& grid) {
  if (grid.replicates < 1) throw ConfigError("grid needs at least one replicate per cell");
  std::vector<ExperimentSpec> out;
  for (int n : grid.n_values) {
    for (int j : grid.j_values) {
      for (int r = 1; r <= grid.replicates; ++r) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "grid_n%d_J%d_r%d", n, j, r);
        ExperimentSpec s;
        s.id = buf;
        s.kind = ExperimentKind::grid;
        s.cohort.n_patients = n;
        s.cohort.n_physicians = j;
        s.cohort.min_panel_size = std::min(90, n / j);
        s.grid_replicate = r;
        assign_seeds(s, master_seed);
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

json spec_to_json(const ExperimentSpec& s) {
  json j = {{"id", s.id},
            {"kind", experiment_kind_name(s.kind)},
            {"rule", s.uses_score2() ? json{{"kind", "score2"}}
                                     : json{{"kind", "conjunctive_window"}, {"active_indices", s.window}}},
            {"physician_model", physician_model_name(s.physician_model)},
            {"cohort", cohort_config_to_json(s.cohort)},
            {"stream_seed", s.stream_seed}};
  j["pass_index"] = s.pass_index ? json(*s.pass_index) : json(nullptr);
  j["window_width"] = s.window_width ? json(*s.window_width) : json(nullptr);
  j["window_start"] = s.window_start ? json(*s.window_start) : json(nullptr);
  j["p_star"] = s.p_star ? json(*s.p_star) : json(nullptr);
  if (s.grid_replicate) j["grid_replicate"] = *s.grid_replicate;
  return j;
}

ExperimentSpec spec_from_json(const json& j) {
  ExperimentSpec s;
  s.id = j.at("id").get<std::string>();
  s.kind = experiment_kind_from(j.at("kind").get<std::string>());
  const auto& rule = j.at("rule");
  if (rule.at("kind").get<std::string>() == "conjunctive_window")
    s.window = rule.at("active_indices").get<std::vector<int>>();
  s.physician_model = physician_model_from(j.at("physician_model").get<std::string>());
  s.cohort = cohort_config_from_json(j.at("cohort"));
  s.stream_seed = j.at("stream_seed").get<std::uint64_t>();
  auto opt_int = [&](const char* key) -> std::optional<int> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<int>();
  };
  s.pass_index = opt_int("pass_index");
  s.window_width = opt_int("window_width");
  s.window_start = opt_int("window_start");
  s.grid_replicate = opt_int("grid_replicate");
  if (j.contains("p_star") && !j.at("p_star").is_null()) s.p_star = j.at("p_star").get<double>();
  return s;
}

}  // namespace ipv
