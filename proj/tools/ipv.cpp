// ipv: command-line front end of the physician-variability benchmark.

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "ipv/catalog.hpp"
#include "ipv/errors.hpp"
#include "ipv/evalkit.hpp"
#include "ipv/pipeline.hpp"
#include "ipv/reports.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config_path;
  std::string catalog;
  std::string methods;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
  bool smoke = false;
  std::string log_level = "info";
};

struct RunConfig {
  ipv::MasterConfig master;
  ipv::GridConfig grid;
  ipv::BootstrapSettings bootstrap;
  std::string catalog = "all";
  std::string methods = "all";
  fs::path out = "ipv_out";
  int jobs = 1;
  bool smoke = false;
};

RunConfig load_config(const Options& o, const std::string& default_catalog, const std::string& default_methods) {
  RunConfig rc;
  rc.catalog = default_catalog;
  rc.methods = default_methods;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ipv::ConfigError("cannot read config " + o.config_path);
    const json j = json::parse(in);
    auto& m = rc.master;
    m.master_seed = j.value("master_seed", m.master_seed);
    m.n_patients = j.value("n_patients", m.n_patients);
    m.n_physicians = j.value("n_physicians", m.n_physicians);
    m.min_panel_size = j.value("min_panel_size", m.min_panel_size);
    m.continuous_n_patients = j.value("continuous_n_patients", m.continuous_n_patients);
    m.continuous_n_physicians = j.value("continuous_n_physicians", m.continuous_n_physicians);
    m.copula_rho = j.value("copula_rho", m.copula_rho);
    m.lognormal_mu = j.value("lognormal_mu", m.lognormal_mu);
    m.lognormal_sigma = j.value("lognormal_sigma", m.lognormal_sigma);
    rc.catalog = j.value("catalog", rc.catalog);
    rc.methods = j.value("methods", rc.methods);
    rc.out = j.value("out", rc.out.string());
    rc.jobs = j.value("jobs", rc.jobs);
    rc.smoke = j.value("smoke", rc.smoke);
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      rc.grid.n_values = g.value("n_values", rc.grid.n_values);
      rc.grid.j_values = g.value("j_values", rc.grid.j_values);
      rc.grid.replicates = g.value("replicates", rc.grid.replicates);
    }
    if (j.contains("bootstrap")) {
      rc.bootstrap.B = j.at("bootstrap").value("B", rc.bootstrap.B);
      rc.bootstrap.seed = j.at("bootstrap").value("seed", rc.bootstrap.seed);
    }
  }
  if (!o.catalog.empty()) rc.catalog = o.catalog;
  if (!o.methods.empty()) rc.methods = o.methods;
  if (o.seed) rc.master.master_seed = *o.seed;
  if (!o.out.empty()) rc.out = o.out;
  if (o.jobs != 1 || rc.jobs < 1) rc.jobs = o.jobs;
  rc.smoke = rc.smoke || o.smoke;
  if (rc.jobs < 1) throw ipv::ConfigError("--jobs must be at least 1");
  return rc;
}

int finish(const RunConfig& rc, const std::string& command, std::vector<ipv::ExperimentRun>& runs,
           const std::vector<ipv::Method>& methods) {
  std::vector<ipv::ExperimentReport> reports;
  std::map<std::string, std::map<std::string, double>> timings;
  for (auto& r : runs) {
    timings[r.report.spec.id] = r.seconds;
    reports.push_back(std::move(r.report));
  }
  ipv::ReportContext ctx;
  ctx.command = command;
  ctx.catalog = rc.smoke ? "smoke" : rc.catalog;
  ctx.methods = methods;
  ctx.master = rc.master;
  ctx.grid = rc.grid;
  ctx.bootstrap = rc.bootstrap;
  const auto written = ipv::write_outputs(rc.out, reports, ctx, &timings);
  spdlog::info("manifest written to {}", written.manifest.string());
  if (written.n_failures > 0) {
    spdlog::error("{} failure(s); see {}", written.n_failures, written.failures.string());
    std::cerr << written.failures.string() << '\n';
    return 2;
  }
  return 0;
}

int execute(const RunConfig& rc, const std::string& command, std::vector<ipv::ExperimentSpec> specs,
            const std::vector<ipv::Method>& methods) {
  spdlog::info("{}: {} experiment(s), {} method(s), jobs={}", command, specs.size(), methods.size(), rc.jobs);
  const auto t0 = std::chrono::steady_clock::now();
  auto runs = ipv::run_specs(specs, methods, rc.jobs, [](const ipv::ExperimentRun& run, int done, int total) {
    double s = 0.0;
    for (const auto& [k, v] : run.seconds) s += v;
    spdlog::info("[{}/{}] {} ({:.1f} s){}", done, total, run.report.spec.id, s, run.report.error ? " FAILED" : "");
  });
  spdlog::info("{} finished in {:.1f} s", command,
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return finish(rc, command, runs, methods);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic benchmark of intra-physician prescribing variability estimators"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON configuration file");
    sub->add_option("--catalog", o.catalog,
                    "all, score2, progressive, sensitivity, sensitivity_copula, sensitivity_lognormal, continuous, "
                    "grid, or comma-separated experiment ids");
    sub->add_option("--methods", o.methods, "all or comma-separated method names");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--jobs", o.jobs, "concurrent worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--smoke", o.smoke, "n = 200, J = 2 smoke profile");
    sub->add_option("--log-level", o.log_level, "trace, debug, info, warn, error");
  };
  auto* catalog_cmd = app.add_subcommand("catalog", "emit the experiment catalog");
  auto* run_cmd = app.add_subcommand("run", "run one experiment by id");
  std::string run_id;
  run_cmd->add_option("id", run_id, "experiment id");
  auto* bench_cmd = app.add_subcommand("bench", "run the full or a filtered catalog");
  auto* grid_cmd = app.add_subcommand("grid", "cohort-size by panel-count sensitivity grid");
  auto* report_cmd = app.add_subcommand("report", "re-aggregate per-experiment JSON under --out");
  for (auto* s : {catalog_cmd, run_cmd, bench_cmd, grid_cmd, report_cmd}) add_common(s);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(o.log_level));
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");

  try {
    if (*catalog_cmd) {
      const auto rc = load_config(o, "all", "all");
      json arr = json::array();
      for (const auto& s : ipv::select_specs(rc.catalog, rc.master, rc.grid)) arr.push_back(ipv::spec_to_json(s));
      if (o.out.empty()) {
        std::cout << arr.dump(1) << '\n';
      } else {
        fs::create_directories(rc.out);
        std::ofstream(rc.out / "catalog.json") << arr.dump(1) << '\n';
        spdlog::info("{} specs written to {}", arr.size(), (rc.out / "catalog.json").string());
      }
      return 0;
    }
    if (*run_cmd) {
      auto rc = load_config(o, "score2", "all");
      if (!run_id.empty()) rc.catalog = run_id;
      const auto methods = ipv::parse_methods(rc.methods);
      if (rc.smoke) return execute(rc, "run", {ipv::smoke_spec(rc.master.master_seed)}, methods);
      auto specs = ipv::select_specs(rc.catalog, rc.master, rc.grid);
      if (specs.size() != 1) throw ipv::ConfigError("run takes exactly one experiment id");
      return execute(rc, "run", specs, methods);
    }
    if (*bench_cmd) {
      const auto rc = load_config(o, "all", "all");
      const auto methods = ipv::parse_methods(rc.methods);
      if (rc.smoke) return execute(rc, "bench", {ipv::smoke_spec(rc.master.master_seed)}, methods);
      return execute(rc, "bench", ipv::select_specs(rc.catalog, rc.master, rc.grid), methods);
    }
    if (*grid_cmd) {
      auto rc = load_config(o, "grid", "grid");
      rc.catalog = "grid";
      if (rc.smoke) {
        rc.grid.n_values = {1000};
        rc.grid.j_values = {5};
        rc.grid.replicates = 2;
      }
      const auto methods = ipv::parse_methods(rc.methods);
      for (auto m : methods)
        if (std::find(ipv::kGridMethods.begin(), ipv::kGridMethods.end(), m) == ipv::kGridMethods.end())
          throw ipv::ConfigError("method '" + ipv::method_name(m) + "' is not part of the grid");
      return execute(rc, "grid", ipv::build_grid(rc.master.master_seed, rc.grid), methods);
    }
    if (*report_cmd) {
      const auto rc = load_config(o, "all", "all");
      auto reports = ipv::load_reports(rc.out);
      if (reports.empty()) throw ipv::ConfigError("no reports under " + rc.out.string());
      ipv::ReportContext ctx;
      ctx.command = "report";
      ctx.catalog = rc.catalog;
      ctx.methods = ipv::parse_methods(rc.methods);
      ctx.master = rc.master;
      ctx.grid = rc.grid;
      ctx.bootstrap = rc.bootstrap;
      const auto written = ipv::write_outputs(rc.out, reports, ctx);
      spdlog::info("re-aggregated {} report(s) into {}", reports.size(), written.manifest.string());
      if (written.n_failures > 0) {
        std::cerr << written.failures.string() << '\n';
        return 2;
      }
      return 0;
    }
  } catch (const ipv::ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
