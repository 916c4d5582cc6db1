#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "fasc/diagnostics.hpp"
#include "fasc/tensor_io.hpp"

namespace fasc {

// Synthetic layer with designated low-variance, high-gradient axes: the
// ground truth for which dimensions a gradient-aware compressor must keep.
struct PlantedSpec {
  int d = 0;
  std::int64_t n = 0;
  std::vector<int> planted_axes;
  double variance_high = 10.0;  // non-planted axes
  double variance_low = 0.1;    // planted axes
  double gradient_gain = 100.0;
  double noise = 0.01;          // gradient noise scale, all axes
  std::uint64_t seed = 0;
  std::uint32_t layer_id = 0;
};

// x_j ~ N(0, variance per axis); g = gradient_gain * (x restricted to the
// planted axes) + noise * N(0, I). Deterministic per seed.
std::pair<TensorBlock, TensorBlock> generate_planted(const PlantedSpec& spec);

// Minimal analytic network: hidden layers a_{l+1} = act(a_l W_l^T), last
// layer linear, per-sample loss ||output - target||^2. No biases.
struct ToyNet {
  enum class Act { tanh_act, relu_act };
  std::vector<Eigen::MatrixXd> weights;  // layer l: out_l x in_l
  Act act = Act::tanh_act;
};

// Per layer l: the layer's input activations a_l and the exact analytic
// gradient of the per-sample loss with respect to a_l, one row per sample.
struct LayerTrace {
  Eigen::MatrixXd activations;
  Eigen::MatrixXd gradients;
};

std::vector<LayerTrace> toy_forward_backward(const ToyNet& net,
                                             const Eigen::MatrixXd& inputs,
                                             const Eigen::MatrixXd& targets);

// Overlap (mean squared cosine) between the top-k eigenspace of the empirical
// Fisher F = E[g g^T] at the given layer's input and the top-k eigenspace of
// the finite-difference Hessian of the mean loss with respect to a shared
// displacement of that input (central differences, step 1e-4, symmetrized).
// Layer width capped at 64.
double fim_hessian_overlap(const ToyNet& net, const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& targets, int layer, int k);

struct SweepRow {
  double threshold = 0.0;
  std::vector<std::uint32_t> fasc_layers;  // layer ids gated to FASC
  double total_j = 0.0;
  double wall_s = 0.0;
};

struct SweepLayerInfo {
  std::uint32_t layer_id = 0;
  double rho = 0.0;
  double j_fasc = 0.0;
  double j_svd = 0.0;
  bool degenerate = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;         // one per threshold, input order
  std::vector<SweepLayerInfo> layers; // per-layer values shared by all rows
  bool count_monotone = false;        // FASC count non-increasing when sorted by threshold
};

// Gates each layer at each threshold and totals J across layers: J(FASC
// subspace) for gated layers, J(SVD subspace) otherwise. Subspaces and J
// values are computed once per layer and shared across thresholds; wall_s
// times each row's assembly. Boundary-layer exclusion follows cfg.
SweepResult threshold_sweep(
    const std::vector<std::pair<TensorBlock, TensorBlock>>& layers,
    const std::vector<int>& ranks, const std::vector<double>& thresholds,
    const GateConfig& cfg = {});

struct GainRow {
  std::uint32_t layer_id = 0;
  double rho = 0.0;
  double delta_j = 0.0;  // J_svd - J_fasc
};

struct GainReport {
  std::vector<GainRow> rows;
  Pearson correlation;          // Pearson r between rho and delta_j
  double top20_mean_gain = 0.0;    // mean delta_j of the top 20% of layers by rho
  double bottom20_mean_gain = 0.0;
};

// Per-layer rho and FASC gain at the given rank fraction, with the summary
// correlation. At least 4 layers required.
GainReport layer_gain_experiment(
    const std::vector<std::pair<TensorBlock, TensorBlock>>& layers,
    double rank_fraction);

}  // namespace fasc
