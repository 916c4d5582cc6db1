#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fasc/compress.hpp"
#include "fasc/diagnostics.hpp"
#include "fasc/tensor_io.hpp"

namespace fasc {

struct RunConfig {
  double rank_fraction = 0.5;
  double rho_threshold = 0.3;
  std::uint64_t seed = 0;
  bool exact_only = false;             // forces the unsketched path everywhere
  bool exclude_boundary_layers = true;
  int exact_dim_cutoff = 512;          // sketch only above this width
};

struct LayerPlan {
  std::uint32_t layer_id = 0;
  Method method = Method::svd;
  Gate gate = Gate::use_svd;
  int d = 0;
  int k = 0;
  double rank_fraction = 0.0;
  int sketch_m = 0;  // 0 = exact path
  std::uint64_t seed = 0;
  double rho = 0.0;
  double threshold = 0.0;
  bool degenerate_gradients = false;
  bool excluded_layer_rule = false;
  std::string gate_reason;
};

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct LayerResult {
  LayerPlan plan;
  double j_method = kMissing;   // J of the gated method's subspace
  double j_svd = kMissing;      // baseline, always computed
  double j_fasc = kMissing;     // set only when the FASC subspace was computed
  double overlap_fasc_svd = kMissing;
  double median_angle_deg = kMissing;
  double elapsed_s = 0.0;
  std::string error;  // empty = ok; failures never abort the other layers
};

struct RunReport {
  RunConfig config;
  std::vector<LayerResult> layers;  // manifest order, every layer exactly once
  int n_fasc = 0;
  int n_failed = 0;
  double total_j = 0.0;  // sum of j_method over layers that produced one
};

// Gate each manifest layer: compute covariances and rho, apply the exclusion
// and threshold rules, pick method and rank k = round(rank_fraction * d)
// clamped to [1, d], and a sketch size when the exact path would be too wide.
// Per-layer seeds derive from the master seed and layer_id.
std::vector<LayerPlan> plan_run(const Manifest& manifest, const RunConfig& cfg);

// Execute the plans: gated method's subspace plus the SVD baseline for every
// layer, J for both, FASC-vs-SVD overlap and principal angles when both
// exist. Layers run under a worker pool; per-layer errors are recorded in the
// report and the run continues.
RunReport execute_run(const std::vector<LayerPlan>& plans, const Manifest& manifest,
                      const RunConfig& cfg);

nlohmann::json report_to_json(const RunReport& report);
void write_report_json(const RunReport& report, const std::filesystem::path& path);
// Flat CSV: layer, rho, method, J_svd, J_fasc, overlap, median_angle_deg.
// Values that were not computed are left empty.
void write_report_csv(const RunReport& report, const std::filesystem::path& path);

}  // namespace fasc
