#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fasc/compress.hpp"
#include "fasc/stats.hpp"
#include "fasc/tensor_io.hpp"

namespace fasc {

enum class Gate { use_fasc, use_svd, excluded };

const char* gate_name(Gate g);

struct RhoReport {
  std::uint32_t layer_id = 0;
  double rho = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::int64_t n = 0;
  int resamples = 0;
  std::uint64_t seed = 0;
  Gate gate = Gate::use_svd;
  // failure-mode flags
  bool degenerate_gradients = false;  // ||sigma_gg||_F below 1e-4
  bool excluded_layer_rule = false;   // boundary-layer exclusion applied
};

// Dependence Violation Score:
//   rho = ||sigma_xg||_F / (||sigma_xx||_F^{1/2} * ||sigma_gg||_F^{1/2}).
// Throws degenerate_error when ||sigma_gg||_F < 1e-4 (near-constant
// gradients) and validation_error on zero sigma_xx.
double rho_score(const CovarianceSet& cov);

// Percentile bootstrap (2.5%, 97.5%) over sample resamples. Each resample
// draws its indices from an independent stream derived from (seed, resample
// index) and results are combined in index order, so the report is identical
// whether resamples run serially or under OpenMP. A degenerate layer yields
// rho = 0 with the flag set instead of throwing, so reports can still be
// written for it.
RhoReport rho_bootstrap(const TensorBlock& xs, const TensorBlock& gs,
                        int resamples = 1000, std::uint64_t seed = 0);
// Serial reference for the benchmark and the bitwise-equality test.
RhoReport rho_bootstrap_serial(const TensorBlock& xs, const TensorBlock& gs,
                               int resamples = 1000, std::uint64_t seed = 0);

struct GateConfig {
  double threshold = 0.3;
  // the paper's empirical exclusion rule: first three layers and the last
  // never gate to FASC; opt out for synthetic manifests
  bool exclude_boundary_layers = true;
};

// Applies the gate rule to a computed report and records the decision in it:
// excluded if the boundary rule hits, else use_fasc iff rho > threshold and
// the layer is not degenerate.
Gate gate_layer(RhoReport& report, std::uint32_t layer_id, std::uint32_t total_layers,
                const GateConfig& cfg = {});

struct AngleReport {
  std::uint32_t layer_id = 0;
  Eigen::VectorXd angles_deg;  // k ascending values in [0, 90]
  double median_deg = 0.0;
};

// Principal angles theta_i = arccos(sigma_i) from the SVD of Qa^T Qb,
// ascending, in degrees.
AngleReport principal_angles(const Subspace& a, const Subspace& b);

struct Pearson {
  double r = 0.0;
  bool defined = false;  // false when either input is constant or too short
};

Pearson rho_correlation(const std::vector<double>& rhos,
                        const std::vector<double>& gains);

}  // namespace fasc
