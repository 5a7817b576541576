#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <vector>

#include "ipv/synthgen.hpp"

namespace ipv {

nlohmann::json cohort_config_to_json(const CohortConfig& config);
CohortConfig cohort_config_from_json(const nlohmann::json& j);

/// Columnar CSV export: one row per patient with the nine covariates and the
/// 1-based physician id. When outcomes are given, two more columns `y,m`.
/// A JSON sidecar `<csv>.json` carries the full CohortConfig and seed.
void write_cohort_csv(const std::filesystem::path& csv_path, const Cohort& cohort,
                      const std::vector<int>* y = nullptr, const std::vector<int>* m = nullptr);

struct LoadedCohort {
  Cohort cohort;
  std::optional<std::vector<int>> y;
  std::optional<std::vector<int>> m;
};

LoadedCohort read_cohort_csv(const std::filesystem::path& csv_path);

}  // namespace ipv
