#include "ipv/reports.hpp"

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>

#include "ipv/errors.hpp"

namespace ipv {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) { return fmt::format("{}", v); }
std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

json interval_json(const Interval& i) { return {{"point", i.point}, {"lo", i.lo}, {"hi", i.hi}}; }
json interval_json(const std::optional<Interval>& i) { return i ? interval_json(*i) : json(nullptr); }
json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string interval_cells(const std::optional<Interval>& i) {
  if (!i) return ",,";
  return num(i->point) + "," + num(i->lo) + "," + num(i->hi);
}

class Csv {
 public:
  Csv(const fs::path& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << header << '\n';
  }
  void row(const std::string& line) { out_ << line << '\n'; }

 private:
  std::ofstream out_;
};

std::vector<const ExperimentReport*> of_kind(const std::vector<const ExperimentReport*>& all, ExperimentKind k) {
  std::vector<const ExperimentReport*> out;
  for (const auto* r : all)
    if (r->spec.kind == k && !r->error) out.push_back(r);
  return out;
}

const ExperimentReport* first_of(const std::vector<const ExperimentReport*>& all, ExperimentKind k) {
  const auto v = of_kind(all, k);
  return v.empty() ? nullptr : v.front();
}

json group_rows_json(const std::vector<GroupRow>& rows) {
  json a = json::array();
  for (const auto& g : rows) {
    json groups = json::array();
    for (const auto& c : g.groups) groups.push_back(interval_json(c));
    a.push_back({{"label", g.label}, {"groups", groups}, {"delta", interval_json(g.delta)}});
  }
  return a;
}

// Ground-truth and GLMM means per behaviour group; plain means, no intervals.
json glmm_group_means(const ExperimentReport& r) {
  const auto* g = r.find(Method::glmm);
  if (!g || g->error) return nullptr;
  json out = json::array();
  for (int grp = 1; grp <= 5; ++grp) {
    double s = 0.0;
    int c = 0;
    for (std::size_t j = 0; j < r.profiles.size(); ++j)
      if (r.profiles[j].group == grp && g->scores[j]) {
        s += *g->scores[j];
        ++c;
      }
    out.push_back(c ? json(s / c) : json(nullptr));
  }
  return out;
}

json experiment_summary(const ExperimentReport& r) {
  json methods = json::object();
  for (const auto& m : r.methods) {
    json mj = {{"spearman", opt(m.rank.rho)},
               {"spearman_vs_ground_truth", opt(m.rank_vs_gt.rho)},
               {"excluded", m.rank.excluded},
               {"error", m.error ? json(*m.error) : json(nullptr)}};
    if (is_rate_scale(m.method)) mj["mean_delta"] = opt(m.delta.value);
    methods[method_name(m.method)] = mj;
  }
  return {{"id", r.spec.id},
          {"kind", experiment_kind_name(r.spec.kind)},
          {"eligible_fraction", r.eligible_fraction},
          {"cohort_stats", r.cohort_stats},
          {"methods", methods},
          {"error", r.error ? json(*r.error) : json(nullptr)}};
}

void write_group_csv(const fs::path& path, const ExperimentReport& r, const BootstrapSettings& bs) {
  Csv csv(path,
          "row,g1,g1_lo,g1_hi,g2,g2_lo,g2_hi,g3,g3_lo,g3_hi,g4,g4_lo,g4_hi,g5,g5_lo,g5_hi,"
          "mean_delta,mean_delta_lo,mean_delta_hi,spearman");
  for (const auto& g : group_table(r, bs)) {
    std::string line = g.label;
    for (const auto& c : g.groups) line += "," + interval_cells(c);
    line += "," + interval_cells(g.delta);
    std::optional<double> rho;
    if (g.label != "ground_truth")
      if (const auto* m = r.find(method_from(g.label))) rho = m->rank.rho;
    line += "," + num(rho);
    csv.row(line);
  }
  if (const auto* g = r.find(Method::glmm); g && !g->error) csv.row("glmm,,,,,,,,,,,,,,,,,,," + num(g->rank.rho));
}

}  // namespace

std::vector<const ExperimentReport*> by_id(const std::vector<ExperimentReport>& reports) {
  std::vector<const ExperimentReport*> out;
  for (const auto& r : reports) out.push_back(&r);
  std::sort(out.begin(), out.end(), [](const auto* a, const auto* b) { return a->spec.id < b->spec.id; });
  return out;
}

std::vector<GridCell> grid_table(const std::vector<const ExperimentReport*>& grid_reports,
                                 const std::vector<Method>& methods, const BootstrapSettings& bs) {
  std::set<std::pair<int, int>> cells;
  for (const auto* r : grid_reports) cells.insert({r->spec.cohort.n_patients, r->spec.cohort.n_physicians});
  std::vector<GridCell> out;
  for (const auto& [n, J] : cells) {
    for (Method m : methods) {
      if (!is_rate_scale(m)) continue;
      std::vector<double> d;
      for (const auto* r : grid_reports) {
        if (r->spec.cohort.n_patients != n || r->spec.cohort.n_physicians != J) continue;
        const auto* mr = r->find(m);
        if (mr && mr->delta.value) d.push_back(*mr->delta.value);
      }
      if (d.empty()) continue;
      GridCell c;
      c.n_patients = n;
      c.n_physicians = J;
      c.method = m;
      c.replicates = static_cast<int>(d.size());
      c.mean_delta = percentile_bootstrap(d, mean_statistic, bs.B, bs.seed);
      out.push_back(c);
    }
  }
  return out;
}

json build_manifest(const std::vector<ExperimentReport>& reports, const ReportContext& ctx) {
  const auto all = by_id(reports);
  const auto& bs = ctx.bootstrap;
  json m;
  m["command"] = ctx.command;
  m["catalog"] = ctx.catalog;
  m["master_seed"] = ctx.master.master_seed;
  std::vector<std::string> names;
  for (Method x : ctx.methods) names.push_back(method_name(x));
  m["methods"] = names;
  m["bootstrap"] = {{"B", bs.B}, {"seed", bs.seed}};
  m["group_allocation"] =
      "five-group model: J/5 consecutive physicians per group (grid J values are all multiples of 5)";

  json experiments = json::array();
  int failures = 0;
  for (const auto* r : all) {
    experiments.push_back(experiment_summary(*r));
    if (r->error) ++failures;
    for (const auto& mr : r->methods)
      if (mr.error) ++failures;
  }
  m["experiments"] = experiments;
  m["n_experiments"] = all.size();
  m["n_failures"] = failures;

  json tables = json::object();
  auto group_section = [&](ExperimentKind k) -> json {
    const auto* r = first_of(all, k);
    if (!r) return nullptr;
    json spear = json::object();
    for (const auto& mr : r->methods) spear[method_name(mr.method)] = opt(mr.rank.rho);
    return {{"experiment", r->spec.id}, {"rows", group_rows_json(group_table(*r, bs))}, {"spearman", spear},
            {"glmm_group_means", glmm_group_means(*r)}, {"cohort_stats", r->cohort_stats}};
  };
  tables["score2"] = group_section(ExperimentKind::score2);
  tables["sensitivity_copula"] = group_section(ExperimentKind::sensitivity_copula);
  tables["sensitivity_lognormal"] = group_section(ExperimentKind::sensitivity_lognormal);

  const auto progressive = of_kind(all, ExperimentKind::progressive);
  if (!progressive.empty()) {
    json t5 = json::array();
    for (const auto& row : cross_experiment_summary(progressive, ctx.methods, bs))
      t5.push_back({{"method", method_name(row.method)},
                    {"n_experiments", row.n_experiments},
                    {"mean_delta", interval_json(row.mean_delta)},
                    {"mean_abs_delta", interval_json(row.mean_abs_delta)},
                    {"median_delta", interval_json(row.median_delta)},
                    {"percent_positive", interval_json(row.percent_positive)}});
    tables["cross_experiment"] = t5;
    json t6 = json::array();
    for (const auto& row : window_table(progressive, first_of(all, ExperimentKind::score2), ctx.methods, bs)) {
      json bins = json::array();
      for (std::size_t b = 0; b < 4; ++b)
        bins.push_back({{"bin", kWindowBinLabels[b]}, {"n", row.counts[b]}, {"mean_delta", interval_json(row.bins[b])}});
      t6.push_back({{"method", method_name(row.method)}, {"score2", opt(row.score2)}, {"bins", bins}});
    }
    tables["window_bins"] = t6;
    json t7 = json::array();
    for (const auto& row : pass_table(progressive, ctx.methods, bs))
      t7.push_back({{"method", method_name(row.method)},
                    {"pass1", interval_json(row.pass1)},
                    {"pass2", interval_json(row.pass2)},
                    {"n1", row.n1},
                    {"n2", row.n2}});
    tables["passes"] = t7;
  }

  if (const auto* c = first_of(all, ExperimentKind::continuous)) {
    json rows = json::array();
    for (const auto& mr : c->methods)
      rows.push_back({{"method", method_name(mr.method)},
                      {"spearman_vs_theoretical", opt(mr.rank.rho)},
                      {"spearman_vs_ground_truth", opt(mr.rank_vs_gt.rho)},
                      {"mean_delta", is_rate_scale(mr.method) ? opt(mr.delta.value) : json(nullptr)}});
    tables["continuous"] = {{"experiment", c->spec.id}, {"rows", rows}};
  }

  const auto grid = of_kind(all, ExperimentKind::grid);
  if (!grid.empty()) {
    json rows = json::array();
    for (const auto& c : grid_table(grid, ctx.methods, bs))
      rows.push_back({{"n", c.n_patients},
                      {"J", c.n_physicians},
                      {"method", method_name(c.method)},
                      {"replicates", c.replicates},
                      {"mean_delta", interval_json(c.mean_delta)}});
    tables["grid"] = rows;
  }
  m["tables"] = tables;
  return m;
}

WrittenOutputs write_outputs(const fs::path& dir, const std::vector<ExperimentReport>& reports,
                             const ReportContext& ctx,
                             const std::map<std::string, std::map<std::string, double>>* timings) {
  fs::create_directories(dir / "experiments");
  const auto all = by_id(reports);
  const auto& bs = ctx.bootstrap;

  for (const auto* r : all) {
    std::ofstream f(dir / "experiments" / (r->spec.id + ".json"));
    f << report_to_json(*r).dump(1) << '\n';
  }

  const auto manifest = build_manifest(reports, ctx);
  WrittenOutputs out;
  out.manifest = dir / "manifest.json";
  {
    std::ofstream f(out.manifest);
    f << manifest.dump(1) << '\n';
  }

  json failures = json::array();
  for (const auto* r : all) {
    if (r->error) failures.push_back({{"experiment", r->spec.id}, {"method", nullptr}, {"error", *r->error}});
    for (const auto& mr : r->methods)
      if (mr.error)
        failures.push_back({{"experiment", r->spec.id}, {"method", method_name(mr.method)}, {"error", *mr.error}});
  }
  out.n_failures = static_cast<int>(failures.size());
  out.failures = dir / "failures.json";
  {
    std::ofstream f(out.failures);
    f << failures.dump(1) << '\n';
  }
  if (timings) {
    std::ofstream f(dir / "timings.json");
    f << json(*timings).dump(1) << '\n';
  }

  if (const auto* r = first_of(all, ExperimentKind::score2)) write_group_csv(dir / "score2_groups.csv", *r, bs);
  if (const auto* r = first_of(all, ExperimentKind::sensitivity_copula))
    write_group_csv(dir / "sensitivity_copula.csv", *r, bs);
  if (const auto* r = first_of(all, ExperimentKind::sensitivity_lognormal))
    write_group_csv(dir / "sensitivity_lognormal.csv", *r, bs);

  const auto progressive = of_kind(all, ExperimentKind::progressive);
  if (!progressive.empty()) {
    Csv t5(dir / "cross_experiment.csv",
           "method,n_experiments,mean_delta,mean_delta_lo,mean_delta_hi,mean_abs_delta,mean_abs_delta_lo,"
           "mean_abs_delta_hi,median_delta,median_delta_lo,median_delta_hi,percent_positive,percent_positive_lo,"
           "percent_positive_hi");
    for (const auto& row : cross_experiment_summary(progressive, ctx.methods, bs))
      t5.row(method_name(row.method) + "," + std::to_string(row.n_experiments) + "," +
             interval_cells(row.mean_delta) + "," + interval_cells(row.mean_abs_delta) + "," +
             interval_cells(row.median_delta) + "," + interval_cells(row.percent_positive));

    Csv t6(dir / "window_bins.csv",
           "method,score2,w1,w1_lo,w1_hi,w1_n,w2_3,w2_3_lo,w2_3_hi,w2_3_n,w4_6,w4_6_lo,w4_6_hi,w4_6_n,"
           "w7_9,w7_9_lo,w7_9_hi,w7_9_n");
    for (const auto& row : window_table(progressive, first_of(all, ExperimentKind::score2), ctx.methods, bs)) {
      std::string line = method_name(row.method) + "," + num(row.score2);
      for (std::size_t b = 0; b < 4; ++b) line += "," + interval_cells(row.bins[b]) + "," + std::to_string(row.counts[b]);
      t6.row(line);
    }

    Csv t7(dir / "passes.csv", "method,pass1,pass1_lo,pass1_hi,pass1_n,pass2,pass2_lo,pass2_hi,pass2_n,difference");
    for (const auto& row : pass_table(progressive, ctx.methods, bs)) {
      std::optional<double> diff;
      if (row.pass1 && row.pass2) diff = row.pass1->point - row.pass2->point;
      t7.row(method_name(row.method) + "," + interval_cells(row.pass1) + "," + std::to_string(row.n1) + "," +
             interval_cells(row.pass2) + "," + std::to_string(row.n2) + "," + num(diff));
    }
  }

  if (const auto* c = first_of(all, ExperimentKind::continuous)) {
    Csv csv(dir / "continuous_correlations.csv", "method,spearman_vs_theoretical,spearman_vs_ground_truth,mean_delta");
    for (const auto& mr : c->methods)
      csv.row(method_name(mr.method) + "," + num(mr.rank.rho) + "," + num(mr.rank_vs_gt.rho) + "," +
              (is_rate_scale(mr.method) ? num(mr.delta.value) : std::string()));
  }

  const auto grid = of_kind(all, ExperimentKind::grid);
  if (!grid.empty()) {
    Csv csv(dir / "grid.csv", "n,J,method,replicates,mean_delta,mean_delta_lo,mean_delta_hi");
    for (const auto& c : grid_table(grid, ctx.methods, bs))
      csv.row(std::to_string(c.n_patients) + "," + std::to_string(c.n_physicians) + "," + method_name(c.method) + "," +
              std::to_string(c.replicates) + "," + interval_cells(c.mean_delta));
  }

  {
    Csv csv(dir / "long_format.csv", "experiment,method,physician,score,ground_truth");
    for (const auto* r : all)
      for (const auto& mr : r->methods)
        for (std::size_t j = 0; j < mr.scores.size(); ++j)
          csv.row(r->spec.id + "," + method_name(mr.method) + "," + std::to_string(j + 1) + "," + num(mr.scores[j]) +
                  "," + (j < r->ground_truth.size() ? num(r->ground_truth[j]) : std::string()));
  }

  {
    const auto covs = default_covariates();
    Csv csv(dir / "feature_weights.csv", "experiment,method,kind,covariate,weight");
    auto emit = [&](const ExperimentReport& r, const MethodResult& mr, const char* key) {
      if (!mr.diagnostics.contains(key)) return;
      const auto w = mr.diagnostics.at(key).get<std::vector<double>>();
      for (std::size_t l = 0; l < w.size() && l < covs.size(); ++l)
        csv.row(r.spec.id + "," + method_name(mr.method) + "," + key + "," + covs[l].name + "," + num(w[l]));
    };
    for (const auto* r : all)
      for (const auto& mr : r->methods) {
        emit(*r, mr, "importances");
        emit(*r, mr, "mi_weights");
        emit(*r, mr, "w_hat");
      }
  }

  {
    Csv csv(dir / "glmm_calibration.csv", "experiment,lo,hi,mean_predicted,observed,count");
    for (const auto* r : all) {
      const auto* g = r->find(Method::glmm);
      if (!g || g->error || !g->diagnostics.contains("calibration")) continue;
      for (const auto& b : g->diagnostics.at("calibration"))
        csv.row(r->spec.id + "," + num(b.at("lo").get<double>()) + "," + num(b.at("hi").get<double>()) + "," +
                num(b.at("mean_predicted").get<double>()) + "," + num(b.at("observed").get<double>()) + "," +
                std::to_string(b.at("count").get<int>()));
    }
  }
  return out;
}

std::vector<ExperimentReport> load_reports(const fs::path& dir) {
  const auto sub = dir / "experiments";
  if (!fs::is_directory(sub)) throw ConfigError("no experiments directory under " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(sub))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<ExperimentReport> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    out.push_back(report_from_json(json::parse(in)));
  }
  return out;
}

}  // namespace ipv
