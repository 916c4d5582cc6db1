#include "fasc/pipeline.hpp"

#include <omp.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "fasc/errors.hpp"
#include "fasc/rng.hpp"
#include "fasc/sketch.hpp"
#include "fasc/stats.hpp"

namespace fasc {

namespace {

int rank_for(double rank_fraction, int d) {
  return std::clamp(static_cast<int>(std::lround(rank_fraction * d)), 1, d);
}

}  // namespace

std::vector<LayerPlan> plan_run(const Manifest& manifest, const RunConfig& cfg) {
  if (manifest.layers.empty()) throw validation_error("empty manifest");
  if (cfg.rank_fraction <= 0.0 || cfg.rank_fraction > 1.0)
    throw validation_error("plan_run: rank_fraction in (0, 1] required");

  const std::uint32_t total = static_cast<std::uint32_t>(manifest.layers.size());
  const Rng master(cfg.seed);
  std::vector<LayerPlan> plans(manifest.layers.size());

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(manifest.layers.size()); ++i) {
    const ManifestLayer& entry = manifest.layers[static_cast<std::size_t>(i)];
    const auto [xs, gs] = load_layer(entry);
    const CovarianceSet cov = covariance_of(xs, gs);

    LayerPlan plan;
    plan.layer_id = entry.layer_id;
    plan.d = static_cast<int>(xs.d());
    plan.k = rank_for(cfg.rank_fraction, plan.d);
    plan.rank_fraction = cfg.rank_fraction;
    plan.threshold = cfg.rho_threshold;
    plan.seed = master.derive(entry.layer_id).seed();

    RhoReport report;
    report.layer_id = entry.layer_id;
    try {
      report.rho = rho_score(cov);
    } catch (const degenerate_error&) {
      report.degenerate_gradients = true;
      report.rho = 0.0;
    }
    GateConfig gate_cfg;
    gate_cfg.threshold = cfg.rho_threshold;
    gate_cfg.exclude_boundary_layers = cfg.exclude_boundary_layers;
    plan.gate = gate_layer(report, entry.layer_id, total, gate_cfg);
    plan.rho = report.rho;
    plan.degenerate_gradients = report.degenerate_gradients;
    plan.excluded_layer_rule = report.excluded_layer_rule;

    if (plan.gate == Gate::use_fasc) {
      plan.method = Method::fasc;
      plan.gate_reason = "rho above threshold";
      if (!cfg.exact_only && plan.d > cfg.exact_dim_cutoff) {
        SketchConfig sketch_cfg;
        plan.sketch_m = choose_sketch_size(plan.rho, plan.k, plan.d, sketch_cfg);
      }
    } else {
      plan.method = Method::svd;
      if (plan.excluded_layer_rule)
        plan.gate_reason = "boundary-layer exclusion";
      else if (plan.degenerate_gradients)
        plan.gate_reason = "degenerate gradients";
      else
        plan.gate_reason = "rho at or below threshold";
    }
    plans[static_cast<std::size_t>(i)] = std::move(plan);
  }
  return plans;
}

RunReport execute_run(const std::vector<LayerPlan>& plans, const Manifest& manifest,
                      const RunConfig& cfg) {
  if (manifest.layers.empty()) throw validation_error("empty manifest");
  if (plans.size() != manifest.layers.size())
    throw validation_error("execute_run: plans do not match manifest");
  for (std::size_t i = 0; i < plans.size(); ++i)
    if (plans[i].layer_id != manifest.layers[i].layer_id)
      throw validation_error("execute_run: plan order does not match manifest");

  RunReport report;
  report.config = cfg;
  report.layers.resize(plans.size());

  // worker pool over layers; each result lands at its manifest index so
  // assembly order never depends on scheduling
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(plans.size()); ++i) {
    const double t0 = omp_get_wtime();
    LayerResult result;
    result.plan = plans[static_cast<std::size_t>(i)];
    try {
      const auto [xs, gs] = load_layer(manifest.layers[static_cast<std::size_t>(i)]);
      const CovarianceSet cov = covariance_of(xs, gs);

      // SVD baseline always, so delta-J and angle reports are available
      const Subspace svd = svd_subspace(cov, result.plan.k);
      result.j_svd = objective_J(svd, xs, gs);

      if (result.plan.method == Method::fasc) {
        Subspace fasc;
        if (result.plan.sketch_m > 0) {
          SketchConfig sketch_cfg;
          sketch_cfg.m = result.plan.sketch_m;
          sketch_cfg.seed = result.plan.seed;
          fasc = sketched_fasc_subspace(xs, gs, result.plan.k, sketch_cfg);
        } else {
          fasc = fasc_subspace(cov, result.plan.k);
        }
        result.j_fasc = objective_J(fasc, xs, gs);
        result.j_method = result.j_fasc;
        result.overlap_fasc_svd = subspace_overlap(fasc, svd);
        result.median_angle_deg = principal_angles(fasc, svd).median_deg;
      } else {
        result.j_method = result.j_svd;
      }
    } catch (const error& e) {
      result.error = e.what();
    }
    result.elapsed_s = omp_get_wtime() - t0;
    report.layers[static_cast<std::size_t>(i)] = std::move(result);
  }

  for (const LayerResult& r : report.layers) {
    if (!r.error.empty()) {
      ++report.n_failed;
      continue;
    }
    if (r.plan.method == Method::fasc) ++report.n_fasc;
    if (std::isfinite(r.j_method)) report.total_j += r.j_method;
  }
  return report;
}

namespace {

// NaN marks "not computed"; JSON gets null there
nlohmann::json num_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

nlohmann::json report_to_json(const RunReport& report) {
  nlohmann::json j;
  j["config"] = {{"rank_fraction", report.config.rank_fraction},
                 {"rho_threshold", report.config.rho_threshold},
                 {"seed", report.config.seed},
                 {"exact_only", report.config.exact_only},
                 {"exclude_boundary_layers", report.config.exclude_boundary_layers}};
  j["layers"] = nlohmann::json::array();
  for (const LayerResult& r : report.layers) {
    nlohmann::json row;
    row["layer_id"] = r.plan.layer_id;
    row["method"] = method_name(r.plan.method);
    row["gate"] = gate_name(r.plan.gate);
    row["gate_reason"] = r.plan.gate_reason;
    row["d"] = r.plan.d;
    row["k"] = r.plan.k;
    row["sketch_m"] = r.plan.sketch_m;
    row["seed"] = r.plan.seed;
    row["rho"] = r.plan.rho;
    row["degenerate_gradients"] = r.plan.degenerate_gradients;
    row["excluded_layer_rule"] = r.plan.excluded_layer_rule;
    row["j_method"] = num_or_null(r.j_method);
    row["j_svd"] = num_or_null(r.j_svd);
    row["j_fasc"] = num_or_null(r.j_fasc);
    row["overlap_fasc_svd"] = num_or_null(r.overlap_fasc_svd);
    row["median_angle_deg"] = num_or_null(r.median_angle_deg);
    row["elapsed_s"] = r.elapsed_s;
    row["error"] = r.error;
    j["layers"].push_back(std::move(row));
  }
  j["summary"] = {{"n_layers", report.layers.size()},
                  {"n_fasc", report.n_fasc},
                  {"n_failed", report.n_failed},
                  {"total_j", report.total_j}};
  return j;
}

void write_report_json(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open report for write: " + path.string());
  out << report_to_json(report).dump(2) << "\n";
  if (!out) throw io_error("short write: " + path.string());
}

void write_report_csv(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open CSV for write: " + path.string());
  out << "layer,rho,method,J_svd,J_fasc,overlap,median_angle_deg\n";
  auto cell = [](double v) {
    if (!std::isfinite(v)) return std::string{};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
  };
  for (const LayerResult& r : report.layers) {
    out << r.plan.layer_id << ',' << cell(r.plan.rho) << ','
        << method_name(r.plan.method) << ',' << cell(r.j_svd) << ','
        << cell(r.j_fasc) << ',' << cell(r.overlap_fasc_svd) << ','
        << cell(r.median_angle_deg) << '\n';
  }
  if (!out) throw io_error("short write: " + path.string());
}

}  // namespace fasc
