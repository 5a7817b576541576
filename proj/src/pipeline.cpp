#include "ipv/pipeline.hpp"

#include <spdlog/spdlog.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <sstream>

#include "ipv/errors.hpp"
#include "ipv/genmatch.hpp"
#include "ipv/glmm.hpp"
#include "ipv/lpa.hpp"
#include "ipv/matchcore.hpp"
#include "ipv/rules.hpp"
#include "ipv/stats.hpp"
#include "ipv/weights.hpp"

namespace ipv {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::vector<int>> panels_of(std::span<const int> physician_of, int J) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(J));
  for (std::size_t i = 0; i < physician_of.size(); ++i)
    out[static_cast<std::size_t>(physician_of[i])].push_back(static_cast<int>(i));
  return out;
}

using PanelDistance = std::function<DistanceMatrix(int physician, const std::vector<int>& panel)>;

// Caliper-paired discordance of every panel under the supplied distance.
EstimatorOutput pair_and_score(const EstimatorInput& in, const PanelDistance& distance) {
  const auto panels = panels_of(in.physician_of, in.n_physicians);
  const int J = in.n_physicians;
  EstimatorOutput out;
  out.scores.assign(static_cast<std::size_t>(J), std::nullopt);
  std::vector<int> n_pairs(static_cast<std::size_t>(J), 0);
  std::vector<double> calipers(static_cast<std::size_t>(J), 0.0);
  tbb::parallel_for(0, J, [&](int j) {
    const auto& panel = panels[static_cast<std::size_t>(j)];
    if (panel.size() < 2) return;
    DistanceMatrix d = distance(j, panel);
    const PairSet ps = pair_one_to_one_inplace(d);
    std::vector<int> y_panel;
    y_panel.reserve(panel.size());
    for (int i : panel) y_panel.push_back(in.y[static_cast<std::size_t>(i)]);
    out.scores[static_cast<std::size_t>(j)] = discordance_from_pairs(ps, y_panel);
    n_pairs[static_cast<std::size_t>(j)] = static_cast<int>(ps.pairs.size());
    calipers[static_cast<std::size_t>(j)] = ps.caliper;
  });
  out.diagnostics["pairs"] = n_pairs;
  out.diagnostics["calipers"] = calipers;
  return out;
}

Matrix panel_rows(const Matrix& m, const std::vector<int>& panel) { return select_rows(m, panel); }

EstimatorOutput run_euclidean(const EstimatorInput& in) {
  const auto sc = standardize(in.x);
  return pair_and_score(in, [&](int j, const std::vector<int>& panel) {
    return distance_matrix(EuclideanMetric{}, panel_rows(sc.z, panel), j);
  });
}

EstimatorOutput run_mahalanobis(const EstimatorInput& in) {
  const auto sc = standardize(in.x);
  const MahalanobisMetric metric{pseudo_inverse_psd(covariance(sc.z))};
  return pair_and_score(in, [&](int j, const std::vector<int>& panel) {
    return distance_matrix(metric, panel_rows(sc.z, panel), j);
  });
}

EstimatorOutput run_learned_weights(const EstimatorInput& in) {
  const auto sc = standardize(in.x);
  const auto cfg = ForestConfig::defaults_for(static_cast<int>(sc.z.rows()), static_cast<int>(sc.z.cols()),
                                              in.stage_seed("forest_lw"));
  const auto model = train_forest(sc.z, in.y, cfg, FeatureSpace::standardized);
  const WeightedMetric metric{gini_importances(model)};
  auto out = pair_and_score(in, [&](int j, const std::vector<int>& panel) {
    return distance_matrix(metric, panel_rows(sc.z, panel), j);
  });
  out.diagnostics["importances"] = metric.weights;
  out.diagnostics["min_samples_leaf"] = cfg.min_samples_leaf;
  return out;
}

EstimatorOutput run_rf_proximity(const EstimatorInput& in) {
  const auto cfg = ForestConfig::defaults_for(static_cast<int>(in.x.rows()), static_cast<int>(in.x.cols()),
                                              in.stage_seed("forest_rf"));
  const auto model = train_forest(in.x, in.y, cfg, FeatureSpace::raw);
  auto out = pair_and_score(in, [&](int j, const std::vector<int>& panel) {
    return rf_dissimilarity(model, panel_rows(in.x, panel), j);
  });
  out.diagnostics["importances"] = gini_importances(model);
  return out;
}

EstimatorOutput run_mutual_info(const EstimatorInput& in) {
  const auto sc = standardize(in.x);
  const WeightedMetric metric{mi_weights(sc.z, in.y, 3, in.stage_seed("mutual_info"))};
  auto out = pair_and_score(in, [&](int j, const std::vector<int>& panel) {
    return distance_matrix(metric, panel_rows(sc.z, panel), j);
  });
  out.diagnostics["mi_weights"] = metric.weights;
  return out;
}

EstimatorOutput run_genetic(const EstimatorInput& in) {
  const auto sc = standardize(in.x);
  DEConfig de;
  de.seed = in.stage_seed("genetic");
  const auto gw = optimize_weights(sc.z, in.y, de);
  const auto est = genetic_mahalanobis_estimate(sc.z, in.y, in.physician_of, in.n_physicians, gw.w_hat);
  EstimatorOutput out;
  out.scores = est.rates;
  out.diagnostics["w_hat"] = gw.w_hat;
  out.diagnostics["achieved_loss"] = gw.achieved_loss;
  out.diagnostics["uniform_loss"] = balance_loss(std::vector<double>(static_cast<std::size_t>(sc.z.cols()), 1.0),
                                                 sc.z, in.y);
  out.diagnostics["evaluations"] = gw.evaluations;
  out.diagnostics["loss_trace"] = gw.loss_trace;
  out.diagnostics["kept"] = est.kept;
  out.diagnostics["calipers"] = est.calipers;
  return out;
}

EstimatorOutput run_lpa(const EstimatorInput& in) {
  const auto sc = standardize(in.x);
  GmmConfig gc;
  gc.seed = in.stage_seed("gmm");
  const auto sel = fit_gmm_bic(sc.z_robust, gc);
  std::vector<int> degenerate(static_cast<std::size_t>(in.n_physicians), 0);
  auto out = pair_and_score(in, [&](int j, const std::vector<int>& panel) {
    bool deg = false;
    auto d = hybrid_distance(panel_rows(sel.memberships, panel), panel_rows(sc.z_robust, panel), 0.5, j, &deg);
    degenerate[static_cast<std::size_t>(j)] = deg ? 1 : 0;
    return d;
  });
  json table = json::array();
  for (const auto& c : sel.candidates)
    table.push_back({{"K", c.K},
                     {"converged", c.converged},
                     {"bic", std::isfinite(c.bic) ? json(c.bic) : json(nullptr)},
                     {"log_likelihood", std::isfinite(c.log_likelihood) ? json(c.log_likelihood) : json(nullptr)},
                     {"iterations", c.iterations}});
  out.diagnostics["selected_K"] = sel.model.K;
  out.diagnostics["fallback"] = sel.fallback;
  out.diagnostics["bic_table"] = table;
  out.diagnostics["degenerate_panels"] = degenerate;
  std::vector<int> robust_fallback;
  for (bool b : sc.robust_fallback) robust_fallback.push_back(b ? 1 : 0);
  out.diagnostics["robust_fallback_columns"] = robust_fallback;
  return out;
}

EstimatorOutput run_glmm(const EstimatorInput& in) {
  const auto sc = standardize(in.x);
  const auto fit = fit_vb(sc.z, in.y, in.physician_of, in.n_physicians);
  const auto od = overdispersion_scores(fit, sc.z, in.y, in.physician_of, in.n_physicians);
  EstimatorOutput out;
  for (double v : od.od) out.scores.emplace_back(v);
  json cal = json::array();
  for (const auto& b : calibration_curve(fit, sc.z, in.y, in.physician_of))
    cal.push_back({{"lo", b.lo}, {"hi", b.hi}, {"mean_predicted", b.mean_predicted}, {"observed", b.observed},
                   {"count", b.count}});
  out.diagnostics["beta0"] = fit.beta0;
  out.diagnostics["beta"] = fit.beta;
  out.diagnostics["u"] = fit.u;
  out.diagnostics["sigma_u"] = fit.sigma_u;
  out.diagnostics["iterations"] = fit.iterations;
  out.diagnostics["converged"] = fit.converged;
  out.diagnostics["elbo_final"] = fit.elbo_trace.empty() ? json(nullptr) : json(fit.elbo_trace.back());
  out.diagnostics["elbo_trace_length"] = fit.elbo_trace.size();
  out.diagnostics["residual_mean"] = stats::mean(od.residuals);
  out.diagnostics["residual_sd"] = stats::stddev(od.residuals);
  out.diagnostics["clamped"] = od.clamped;
  out.diagnostics["calibration"] = cal;
  // Residual histogram over [-5, 5] in 0.25 steps, tails folded into the end bins.
  std::vector<int> hist(40, 0);
  for (double r : od.residuals) {
    const int b = std::clamp(static_cast<int>(std::floor((r + 5.0) / 0.25)), 0, 39);
    ++hist[static_cast<std::size_t>(b)];
  }
  out.diagnostics["residual_histogram"] = {{"lo", -5.0}, {"width", 0.25}, {"counts", hist}};
  return out;
}

json cohort_statistics(const Cohort& cohort) {
  const auto& x = cohort.covariates;
  auto col = [&](int c) {
    std::vector<double> v(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) v[static_cast<std::size_t>(i)] = x(i, c);
    return v;
  };
  const auto nonhdl = col(kNonHdl), ldl = col(kLdl), hba1c = col(kHba1c);
  const auto rho = stats::spearman(nonhdl, ldl);
  return {{"nonhdl_ldl_spearman", rho ? json(*rho) : json(nullptr)}, {"hba1c_skewness", stats::skewness(hba1c)}};
}

}  // namespace

EstimatorOutput run_method(Method m, const EstimatorInput& input) {
  switch (m) {
    case Method::euclidean: return run_euclidean(input);
    case Method::mahalanobis: return run_mahalanobis(input);
    case Method::learned_weights: return run_learned_weights(input);
    case Method::genetic_mahalanobis: return run_genetic(input);
    case Method::rf_proximity: return run_rf_proximity(input);
    case Method::lpa_guided: return run_lpa(input);
    case Method::mutual_info: return run_mutual_info(input);
    case Method::glmm: return run_glmm(input);
  }
  throw ConfigError("unknown method");
}

std::vector<Method> methods_for(const ExperimentSpec& spec, const std::vector<Method>& requested) {
  std::vector<Method> out;
  for (Method m : requested) {
    if (spec.kind == ExperimentKind::continuous && m == Method::genetic_mahalanobis) continue;
    out.push_back(m);
  }
  return out;
}

ExperimentRun run_experiment(const ExperimentSpec& spec, const std::vector<Method>& methods) {
  ExperimentRun run;
  auto& r = run.report;
  r.spec = spec;
  const auto t_setup = Clock::now();
  Cohort cohort;
  OutcomeSet outcomes;
  try {
    spec.cohort.validate();
    cohort = generate_cohort(spec.cohort);
    std::vector<int> m;
    if (spec.uses_score2()) {
      m = evaluate_eligibility(cohort, Score2Rule{});
    } else {
      if (!spec.p_star) throw ConfigError("conjunctive rule without p_star");
      ConjunctiveWindow rule{spec.window, calibrate_thresholds(cohort, spec.window, *spec.p_star)};
      r.thresholds = rule.thresholds;
      m = evaluate_eligibility(cohort, rule);
    }
    Rng profile_rng(spec.stage_seed("profiles"));
    auto profiles = assign_profiles(spec.physician_model, cohort.n_physicians(), profile_rng);
    Rng outcome_rng(spec.stage_seed("outcomes"));
    outcomes = draw_outcomes(cohort, std::move(m), std::move(profiles), outcome_rng);
    r.profiles = outcomes.profiles;
    r.ground_truth = ground_truth_by_physician(cohort, outcomes);
    for (const auto& p : r.profiles) r.theoretical.push_back(theoretical_discordance(p.p_high));
    r.panel_sizes.assign(static_cast<std::size_t>(cohort.n_physicians()), 0);
    r.eligible_counts.assign(static_cast<std::size_t>(cohort.n_physicians()), 0);
    int eligible = 0;
    for (int i = 0; i < cohort.n(); ++i) {
      const auto j = static_cast<std::size_t>(cohort.physician_of[static_cast<std::size_t>(i)]);
      ++r.panel_sizes[j];
      r.eligible_counts[j] += outcomes.m[static_cast<std::size_t>(i)];
      eligible += outcomes.m[static_cast<std::size_t>(i)];
    }
    r.eligible_fraction = static_cast<double>(eligible) / cohort.n();
    r.cohort_stats = cohort_statistics(cohort);
    int both_classes = 0;
    for (int v : outcomes.y) both_classes += v;
    r.cohort_stats["prescription_rate"] = static_cast<double>(both_classes) / cohort.n();
  } catch (const std::exception& e) {
    r.error = spec.id + ": " + e.what();
    spdlog::error("{}", *r.error);
    return run;
  }
  run.seconds["setup"] = seconds_since(t_setup);

  r.rank_reference = spec.kind == ExperimentKind::continuous ? "theoretical" : "ground_truth";
  std::vector<std::optional<double>> theoretical(r.theoretical.begin(), r.theoretical.end());
  const auto& reference = spec.kind == ExperimentKind::continuous ? theoretical : r.ground_truth;

  // Estimators see only what EstimatorInput carries.
  const EstimatorInput input{cohort.covariates, outcomes.y, cohort.physician_of, cohort.n_physicians(),
                             spec.stage_seed("methods")};
  for (Method m : methods_for(spec, methods)) {
    MethodResult mr;
    mr.method = m;
    const auto t0 = Clock::now();
    try {
      auto est = run_method(m, input);
      mr.scores = std::move(est.scores);
      mr.diagnostics = std::move(est.diagnostics);
      if (is_rate_scale(m)) mr.delta = mean_delta(mr.scores, r.ground_truth);
      mr.rank = spearman_rank(mr.scores, reference);
      mr.rank_vs_gt = spearman_rank(mr.scores, r.ground_truth);
    } catch (const std::exception& e) {
      mr.scores.assign(static_cast<std::size_t>(cohort.n_physicians()), std::nullopt);
      mr.error = spec.id + ": " + method_name(m) + ": " + e.what();
      spdlog::error("{}", *mr.error);
    }
    run.seconds[method_name(m)] = seconds_since(t0);
    r.methods.push_back(std::move(mr));
  }
  return run;
}

ExperimentSpec smoke_spec(std::uint64_t master_seed) {
  ExperimentSpec s;
  s.id = "smoke";
  s.kind = ExperimentKind::continuous;
  s.physician_model = PhysicianModel::continuous_uniform;
  s.cohort.n_patients = 200;
  s.cohort.n_physicians = 2;
  s.cohort.min_panel_size = 90;
  assign_seeds(s, master_seed);
  return s;
}

std::vector<ExperimentSpec> select_specs(const std::string& selection, const MasterConfig& master,
                                         const GridConfig& grid) {
  if (selection == "grid") return build_grid(master.master_seed, grid);
  const auto catalog = build_catalog(master);
  if (selection.empty() || selection == "all") return catalog;
  std::vector<ExperimentSpec> out;
  auto add_kind = [&](ExperimentKind k) {
    for (const auto& s : catalog)
      if (s.kind == k) out.push_back(s);
  };
  if (selection == "sensitivity") {
    add_kind(ExperimentKind::sensitivity_copula);
    add_kind(ExperimentKind::sensitivity_lognormal);
    return out;
  }
  for (auto k : {ExperimentKind::score2, ExperimentKind::progressive, ExperimentKind::sensitivity_copula,
                 ExperimentKind::sensitivity_lognormal, ExperimentKind::continuous}) {
    if (selection == experiment_kind_name(k)) {
      add_kind(k);
      return out;
    }
  }
  std::stringstream ss(selection);
  std::string id;
  while (std::getline(ss, id, ',')) {
    if (id.empty()) continue;
    auto it = std::find_if(catalog.begin(), catalog.end(), [&](const ExperimentSpec& s) { return s.id == id; });
    if (it == catalog.end()) {
      const auto g = build_grid(master.master_seed, grid);
      auto gi = std::find_if(g.begin(), g.end(), [&](const ExperimentSpec& s) { return s.id == id; });
      if (gi == g.end()) throw ConfigError("unknown experiment id or catalog '" + id + "'");
      out.push_back(*gi);
    } else {
      out.push_back(*it);
    }
  }
  if (out.empty()) throw ConfigError("catalog selection is empty");
  return out;
}

std::vector<ExperimentRun> run_specs(const std::vector<ExperimentSpec>& specs, const std::vector<Method>& methods,
                                     int jobs, const ProgressFn& progress) {
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  std::vector<ExperimentRun> runs(specs.size());
  std::atomic<int> done{0};
  std::mutex progress_mutex;
  // Honour --jobs even above the hardware thread count.
  const auto hw = tbb::global_control::active_value(tbb::global_control::max_allowed_parallelism);
  tbb::global_control limit(tbb::global_control::max_allowed_parallelism, std::max<std::size_t>(hw, jobs));
  tbb::task_arena arena(jobs);
  arena.execute([&] {
    tbb::parallel_for(
        tbb::blocked_range<std::size_t>(0, specs.size(), 1),
        [&](const tbb::blocked_range<std::size_t>& range) {
          for (std::size_t i = range.begin(); i != range.end(); ++i) {
            runs[i] = run_experiment(specs[i], methods);
            const int d = ++done;
            if (progress) {
              std::lock_guard lock(progress_mutex);
              progress(runs[i], d, static_cast<int>(specs.size()));
            }
          }
        },
        tbb::simple_partitioner());
  });
  return runs;
}

}  // namespace ipv
