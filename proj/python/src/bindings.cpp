#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ipv/catalog.hpp"
#include "ipv/evalkit.hpp"
#include "ipv/matchcore.hpp"
#include "ipv/pipeline.hpp"
#include "ipv/prescribe.hpp"
#include "ipv/synthgen.hpp"

namespace py = pybind11;

namespace {

// JSON crosses the boundary as text; the Python side parses it.
std::string catalog_json(std::uint64_t master_seed) {
  ipv::MasterConfig master;
  master.master_seed = master_seed;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : ipv::build_catalog(master)) arr.push_back(ipv::spec_to_json(s));
  return arr.dump();
}

std::string run_json(const std::string& selection, std::uint64_t master_seed, const std::string& methods, bool smoke) {
  ipv::MasterConfig master;
  master.master_seed = master_seed;
  const auto specs = smoke ? std::vector<ipv::ExperimentSpec>{ipv::smoke_spec(master_seed)}
                           : ipv::select_specs(selection, master, ipv::GridConfig{});
  if (specs.size() != 1) throw std::invalid_argument("run takes exactly one experiment");
  py::gil_scoped_release release;
  const auto run = ipv::run_experiment(specs.front(), ipv::parse_methods(methods));
  return ipv::report_to_json(run.report).dump();
}

py::tuple cohort(int n_patients, int n_physicians, int min_panel_size, std::uint64_t seed) {
  ipv::CohortConfig cfg;
  cfg.n_patients = n_patients;
  cfg.n_physicians = n_physicians;
  cfg.min_panel_size = min_panel_size;
  cfg.seed = seed;
  const auto c = ipv::generate_cohort(cfg);
  std::vector<std::string> names;
  for (const auto& cov : cfg.covariates) names.push_back(cov.name);
  return py::make_tuple(c.covariates, c.physician_of, names);
}

std::vector<std::pair<int, int>> pair_panel(const Eigen::MatrixXd& d) {
  ipv::DistanceMatrix dm;
  dm.values = d;
  return ipv::pair_one_to_one(dm).pairs;
}

py::tuple bootstrap_mean(const std::vector<double>& v, int B, std::uint64_t seed) {
  const auto iv = ipv::percentile_bootstrap(v, ipv::mean_statistic, B, seed);
  return py::make_tuple(iv.point, iv.lo, iv.hi);
}

}  // namespace

PYBIND11_MODULE(_ipvbench, m) {
  m.doc() = "Bindings to the ipv benchmark core";
  m.def("catalog_json", &catalog_json, py::arg("master_seed") = 42);
  m.def("run_json", &run_json, py::arg("selection"), py::arg("master_seed") = 42, py::arg("methods") = "all",
        py::arg("smoke") = false);
  m.def("cohort", &cohort, py::arg("n_patients") = 10000, py::arg("n_physicians") = 20,
        py::arg("min_panel_size") = 90, py::arg("seed") = 0);
  m.def("pair_panel", &pair_panel, py::arg("distances"));
  m.def("bootstrap_mean", &bootstrap_mean, py::arg("values"), py::arg("B") = 2000, py::arg("seed") = 42);
  m.def("theoretical_discordance", &ipv::theoretical_discordance, py::arg("p_high"));
  m.def("ground_truth_discordance",
        [](const std::vector<int>& y) -> std::optional<double> {
          if (y.size() < 2) return std::nullopt;
          return ipv::ground_truth_discordance(y);
        },
        py::arg("eligible_outcomes"));
  m.def("method_names", [] {
    std::vector<std::string> out;
    for (auto mm : ipv::kAllMethods) out.push_back(ipv::method_name(mm));
    return out;
  });
}
