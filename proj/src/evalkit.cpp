#include "ipv/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ipv/errors.hpp"
#include "ipv/random.hpp"
#include "ipv/stats.hpp"

namespace ipv {

using nlohmann::json;

std::string method_name(Method m) {
  switch (m) {
    case Method::euclidean: return "euclidean";
    case Method::mahalanobis: return "mahalanobis";
    case Method::learned_weights: return "learned_weights";
    case Method::genetic_mahalanobis: return "genetic_mahalanobis";
    case Method::rf_proximity: return "rf_proximity";
    case Method::lpa_guided: return "lpa_guided";
    case Method::mutual_info: return "mutual_info";
    case Method::glmm: return "glmm";
  }
  return "euclidean";
}

std::string method_label(Method m) {
  switch (m) {
    case Method::euclidean: return "Euclidean";
    case Method::mahalanobis: return "Mahalanobis";
    case Method::learned_weights: return "Learned Wts";
    case Method::genetic_mahalanobis: return "Genetic Mah.";
    case Method::rf_proximity: return "RF Proximity";
    case Method::lpa_guided: return "LPA-guided";
    case Method::mutual_info: return "Mutual Info";
    case Method::glmm: return "GLMM";
  }
  return "Euclidean";
}

Method method_from(const std::string& name) {
  for (Method m : kAllMethods)
    if (method_name(m) == name) return m;
  throw ConfigError("unknown method '" + name + "'");
}

std::vector<Method> parse_methods(const std::string& list) {
  if (list.empty() || list == "all") return {kAllMethods.begin(), kAllMethods.end()};
  if (list == "grid") return {kGridMethods.begin(), kGridMethods.end()};
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const Method m = method_from(item);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) throw ConfigError("method selection is empty");
  // Canonical order keeps report layout independent of how the list was typed.
  std::vector<Method> ordered;
  for (Method m : kAllMethods)
    if (std::find(out.begin(), out.end(), m) != out.end()) ordered.push_back(m);
  return ordered;
}

bool is_rate_scale(Method m) { return m != Method::glmm; }
bool is_unsupervised(Method m) {
  return m == Method::euclidean || m == Method::mahalanobis || m == Method::lpa_guided;
}
bool is_feature_weighted(Method m) {
  return m == Method::learned_weights || m == Method::rf_proximity || m == Method::mutual_info;
}

DeltaResult mean_delta(std::span<const std::optional<double>> estimates,
                       std::span<const std::optional<double>> ground_truth) {
  if (estimates.size() != ground_truth.size()) throw std::invalid_argument("mean_delta: length mismatch");
  DeltaResult r;
  double sum = 0.0;
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    if (!estimates[j] || !ground_truth[j]) {
      ++r.excluded;
      continue;
    }
    sum += *estimates[j] - *ground_truth[j];
    ++r.used;
  }
  if (r.used > 0) r.value = sum / r.used;
  return r;
}

RankResult spearman_rank(std::span<const std::optional<double>> scores,
                         std::span<const std::optional<double>> reference) {
  if (scores.size() != reference.size()) throw std::invalid_argument("spearman_rank: length mismatch");
  RankResult r;
  std::vector<double> a, b;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (!scores[j] || !reference[j]) {
      ++r.excluded;
      continue;
    }
    a.push_back(*scores[j]);
    b.push_back(*reference[j]);
  }
  r.used = static_cast<int>(a.size());
  if (a.size() >= 3) r.rho = stats::spearman(a, b);
  return r;
}

Interval percentile_bootstrap(std::span<const double> values, const Statistic& statistic, int B,
                              std::uint64_t seed) {
  if (values.empty()) throw std::invalid_argument("percentile_bootstrap: empty sample");
  if (B < 1) throw std::invalid_argument("percentile_bootstrap: B must be positive");
  Interval out;
  out.point = statistic(values);
  Rng rng(seed);
  const auto n = values.size();
  std::vector<double> sample(n), stats_b(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < n; ++i) sample[i] = values[rng.uniform_index(n)];
    stats_b[static_cast<std::size_t>(b)] = statistic(sample);
  }
  std::sort(stats_b.begin(), stats_b.end());
  out.lo = stats::quantile_sorted(stats_b, 0.025);
  out.hi = stats::quantile_sorted(stats_b, 0.975);
  return out;
}

double mean_statistic(std::span<const double> v) { return stats::mean(v); }
double mean_abs_statistic(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s / static_cast<double>(v.size());
}
double median_statistic(std::span<const double> v) { return stats::median(v); }
double percent_positive_statistic(std::span<const double> v) {
  double c = 0.0;
  for (double x : v) c += x > 0.0 ? 1.0 : 0.0;
  return 100.0 * c / static_cast<double>(v.size());
}

const MethodResult* ExperimentReport::find(Method m) const {
  for (const auto& r : methods)
    if (r.method == m) return &r;
  return nullptr;
}

// ------------------------------------------------------------------ json ---

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}
json opt_vec_json(const std::vector<std::optional<double>>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(opt_json(x));
  return a;
}
std::vector<std::optional<double>> opt_vec_from(const json& j) {
  std::vector<std::optional<double>> v;
  for (const auto& x : j) v.push_back(opt_from(x));
  return v;
}
json rank_json(const RankResult& r) { return {{"rho", opt_json(r.rho)}, {"used", r.used}, {"excluded", r.excluded}}; }
RankResult rank_from(const json& j) {
  RankResult r;
  r.rho = opt_from(j.at("rho"));
  r.used = j.at("used").get<int>();
  r.excluded = j.at("excluded").get<int>();
  return r;
}

}  // namespace

json report_to_json(const ExperimentReport& r) {
  json j;
  j["spec"] = spec_to_json(r.spec);
  json profiles = json::array();
  for (const auto& p : r.profiles)
    profiles.push_back({{"physician", p.physician_id + 1},
                        {"p_high", p.p_high},
                        {"p_low", p.p_low},
                        {"group", p.group ? json(*p.group) : json(nullptr)}});
  j["profiles"] = profiles;
  j["panel_sizes"] = r.panel_sizes;
  j["eligible_counts"] = r.eligible_counts;
  j["ground_truth"] = opt_vec_json(r.ground_truth);
  j["theoretical"] = r.theoretical;
  j["rank_reference"] = r.rank_reference;
  j["eligible_fraction"] = r.eligible_fraction;
  j["thresholds"] = r.thresholds;
  j["cohort_stats"] = r.cohort_stats;
  json methods = json::array();
  for (const auto& m : r.methods) {
    json mj;
    mj["method"] = method_name(m.method);
    mj["is_rate_scale"] = is_rate_scale(m.method);
    mj["scores"] = opt_vec_json(m.scores);
    if (is_rate_scale(m.method))
      mj["mean_delta"] = {{"value", opt_json(m.delta.value)}, {"used", m.delta.used}, {"excluded", m.delta.excluded}};
    mj["spearman"] = rank_json(m.rank);
    mj["spearman_vs_ground_truth"] = rank_json(m.rank_vs_gt);
    mj["diagnostics"] = m.diagnostics;
    mj["error"] = m.error ? json(*m.error) : json(nullptr);
    methods.push_back(mj);
  }
  j["methods"] = methods;
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  return j;
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  r.spec = spec_from_json(j.at("spec"));
  for (const auto& p : j.at("profiles")) {
    PhysicianProfile prof;
    prof.physician_id = p.at("physician").get<int>() - 1;
    prof.p_high = p.at("p_high").get<double>();
    prof.p_low = p.at("p_low").get<double>();
    if (!p.at("group").is_null()) prof.group = p.at("group").get<int>();
    r.profiles.push_back(prof);
  }
  r.panel_sizes = j.at("panel_sizes").get<std::vector<int>>();
  r.eligible_counts = j.at("eligible_counts").get<std::vector<int>>();
  r.ground_truth = opt_vec_from(j.at("ground_truth"));
  r.theoretical = j.at("theoretical").get<std::vector<double>>();
  r.rank_reference = j.at("rank_reference").get<std::string>();
  r.eligible_fraction = j.at("eligible_fraction").get<double>();
  r.thresholds = j.at("thresholds").get<std::vector<double>>();
  r.cohort_stats = j.at("cohort_stats");
  for (const auto& mj : j.at("methods")) {
    MethodResult m;
    m.method = method_from(mj.at("method").get<std::string>());
    m.scores = opt_vec_from(mj.at("scores"));
    if (mj.contains("mean_delta")) {
      const auto& d = mj.at("mean_delta");
      m.delta.value = opt_from(d.at("value"));
      m.delta.used = d.at("used").get<int>();
      m.delta.excluded = d.at("excluded").get<int>();
    }
    m.rank = rank_from(mj.at("spearman"));
    m.rank_vs_gt = rank_from(mj.at("spearman_vs_ground_truth"));
    m.diagnostics = mj.at("diagnostics");
    if (!mj.at("error").is_null()) m.error = mj.at("error").get<std::string>();
    r.methods.push_back(std::move(m));
  }
  if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  return r;
}

// ------------------------------------------------------------ aggregates ---

std::vector<GroupRow> group_table(const ExperimentReport& r, const BootstrapSettings& bs) {
  std::vector<GroupRow> rows;
  auto make_row = [&](const std::string& label, const std::vector<std::optional<double>>& scores, bool with_delta) {
    GroupRow row;
    row.label = label;
    for (int g = 1; g <= 5; ++g) {
      std::vector<double> vals;
      for (std::size_t j = 0; j < r.profiles.size(); ++j)
        if (r.profiles[j].group == g && scores[j]) vals.push_back(*scores[j]);
      if (!vals.empty()) row.groups[static_cast<std::size_t>(g - 1)] = percentile_bootstrap(vals, mean_statistic, bs.B, bs.seed);
    }
    if (with_delta) {
      std::vector<double> deltas;
      for (std::size_t j = 0; j < scores.size(); ++j)
        if (scores[j] && r.ground_truth[j]) deltas.push_back(*scores[j] - *r.ground_truth[j]);
      if (!deltas.empty()) row.delta = percentile_bootstrap(deltas, mean_statistic, bs.B, bs.seed);
    }
    return row;
  };
  rows.push_back(make_row("ground_truth", r.ground_truth, false));
  for (const auto& m : r.methods)
    if (is_rate_scale(m.method) && !m.error) rows.push_back(make_row(method_name(m.method), m.scores, true));
  return rows;
}

namespace {

std::vector<double> deltas_of(const std::vector<const ExperimentReport*>& reports, Method m) {
  std::vector<double> out;
  for (const auto* r : reports) {
    const auto* mr = r->find(m);
    if (mr && mr->delta.value) out.push_back(*mr->delta.value);
  }
  return out;
}

}  // namespace

std::vector<AggregateRow> cross_experiment_summary(const std::vector<const ExperimentReport*>& reports,
                                                   const std::vector<Method>& methods,
                                                   const BootstrapSettings& bs) {
  std::vector<AggregateRow> rows;
  for (Method m : methods) {
    if (!is_rate_scale(m)) continue;
    const auto d = deltas_of(reports, m);
    if (d.empty()) continue;
    AggregateRow row;
    row.method = m;
    row.n_experiments = static_cast<int>(d.size());
    row.mean_delta = percentile_bootstrap(d, mean_statistic, bs.B, bs.seed);
    row.mean_abs_delta = percentile_bootstrap(d, mean_abs_statistic, bs.B, bs.seed);
    row.median_delta = percentile_bootstrap(d, median_statistic, bs.B, bs.seed);
    row.percent_positive = percentile_bootstrap(d, percent_positive_statistic, bs.B, bs.seed);
    rows.push_back(row);
  }
  return rows;
}

int window_bin(int width) {
  if (width == 1) return 0;
  if (width >= 2 && width <= 3) return 1;
  if (width >= 4 && width <= 6) return 2;
  if (width >= 7 && width <= 9) return 3;
  throw std::invalid_argument("window_bin: width outside 1..9");
}

std::vector<WindowRow> window_table(const std::vector<const ExperimentReport*>& progressive,
                                    const ExperimentReport* score2, const std::vector<Method>& methods,
                                    const BootstrapSettings& bs) {
  std::vector<WindowRow> rows;
  for (Method m : methods) {
    if (!is_rate_scale(m)) continue;
    WindowRow row;
    row.method = m;
    if (score2) {
      const auto* mr = score2->find(m);
      if (mr) row.score2 = mr->delta.value;
    }
    for (int b = 0; b < 4; ++b) {
      std::vector<const ExperimentReport*> in_bin;
      for (const auto* r : progressive)
        if (r->spec.window_width && window_bin(*r->spec.window_width) == b) in_bin.push_back(r);
      const auto d = deltas_of(in_bin, m);
      row.counts[static_cast<std::size_t>(b)] = static_cast<int>(d.size());
      if (!d.empty()) row.bins[static_cast<std::size_t>(b)] = percentile_bootstrap(d, mean_statistic, bs.B, bs.seed);
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<PassRow> pass_table(const std::vector<const ExperimentReport*>& progressive,
                                const std::vector<Method>& methods, const BootstrapSettings& bs) {
  std::vector<PassRow> rows;
  for (Method m : methods) {
    if (!is_rate_scale(m)) continue;
    PassRow row;
    row.method = m;
    for (int pass = 1; pass <= 2; ++pass) {
      std::vector<const ExperimentReport*> sel;
      for (const auto* r : progressive)
        if (r->spec.pass_index == pass) sel.push_back(r);
      const auto d = deltas_of(sel, m);
      auto& slot = pass == 1 ? row.pass1 : row.pass2;
      (pass == 1 ? row.n1 : row.n2) = static_cast<int>(d.size());
      if (!d.empty()) slot = percentile_bootstrap(d, mean_statistic, bs.B, bs.seed);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ipv
