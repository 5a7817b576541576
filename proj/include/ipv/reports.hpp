#pragma once

#include <filesystem>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "ipv/catalog.hpp"
#include "ipv/evalkit.hpp"

namespace ipv {

struct ReportContext {
  std::string command = "bench";
  std::string catalog = "all";
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  MasterConfig master;
  GridConfig grid;
  BootstrapSettings bootstrap;
};

struct GridCell {
  int n_patients = 0;
  int n_physicians = 0;
  Method method = Method::euclidean;
  int replicates = 0;
  Interval mean_delta;  // replicate-unit bootstrap of the per-replicate mean delta
};

/// One row per (n, J, method) over grid reports, ascending n then J.
std::vector<GridCell> grid_table(const std::vector<const ExperimentReport*>& grid_reports,
                                 const std::vector<Method>& methods, const BootstrapSettings& bs = {});

/// Reports ordered by experiment id, the fold order of every aggregate.
std::vector<const ExperimentReport*> by_id(const std::vector<ExperimentReport>& reports);

/// Every number the CSV tables carry, plus per-experiment summaries. Contains
/// no timings or paths, so it depends only on the configuration.
nlohmann::json build_manifest(const std::vector<ExperimentReport>& reports, const ReportContext& ctx);

struct WrittenOutputs {
  std::filesystem::path manifest;
  std::filesystem::path failures;
  int n_failures = 0;
};

/// Writes experiments/<id>.json, the table CSVs, long-format and diagnostic
/// CSVs, manifest.json, failures.json and (when given) timings.json.
WrittenOutputs write_outputs(const std::filesystem::path& dir, const std::vector<ExperimentReport>& reports,
                             const ReportContext& ctx,
                             const std::map<std::string, std::map<std::string, double>>* timings = nullptr);

/// Per-experiment reports previously written under dir/experiments.
std::vector<ExperimentReport> load_reports(const std::filesystem::path& dir);

}  // namespace ipv
