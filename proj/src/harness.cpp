#include "fasc/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fasc/compress.hpp"
#include "fasc/errors.hpp"
#include "fasc/rng.hpp"
#include "fasc/stats.hpp"

namespace fasc {

std::pair<TensorBlock, TensorBlock> generate_planted(const PlantedSpec& spec) {
  if (spec.d < 1 || spec.n < 2) throw validation_error("generate_planted: need d >= 1, n >= 2");
  if (spec.variance_low >= spec.variance_high)
    throw validation_error("generate_planted: variance_low must be < variance_high");
  for (int a : spec.planted_axes)
    if (a < 0 || a >= spec.d)
      throw validation_error("generate_planted: planted axis " + std::to_string(a) +
                             " out of range");

  std::vector<bool> planted(static_cast<std::size_t>(spec.d), false);
  for (int a : spec.planted_axes) planted[static_cast<std::size_t>(a)] = true;
  Eigen::VectorXf sd(spec.d);
  for (int j = 0; j < spec.d; ++j)
    sd(j) = static_cast<float>(std::sqrt(
        planted[static_cast<std::size_t>(j)] ? spec.variance_low : spec.variance_high));

  TensorBlock xs, gs;
  xs.kind = TensorKind::activation;
  gs.kind = TensorKind::gradient;
  xs.layer_id = gs.layer_id = spec.layer_id;
  xs.data.resize(spec.n, spec.d);
  gs.data.resize(spec.n, spec.d);

  // fixed draw order (x row, then g row) so blocks are bit-identical per seed
  Rng rng(spec.seed);
  for (std::int64_t i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.d; ++j)
      xs.data(i, j) = static_cast<float>(rng.normal()) * sd(j);
    for (int j = 0; j < spec.d; ++j)
      gs.data(i, j) = static_cast<float>(spec.noise * rng.normal());
    for (int a : spec.planted_axes)
      gs.data(i, a) += static_cast<float>(spec.gradient_gain) * xs.data(i, a);
  }
  return {std::move(xs), std::move(gs)};
}

namespace {

Eigen::MatrixXd apply_act(const Eigen::MatrixXd& z, ToyNet::Act act) {
  if (act == ToyNet::Act::tanh_act) return z.array().tanh();
  return z.cwiseMax(0.0);
}

Eigen::MatrixXd act_derivative(const Eigen::MatrixXd& z, ToyNet::Act act) {
  if (act == ToyNet::Act::tanh_act) {
    const Eigen::ArrayXXd t = z.array().tanh();
    return (1.0 - t * t).matrix();
  }
  return (z.array() > 0.0).cast<double>().matrix();
}

void check_net(const ToyNet& net, const Eigen::MatrixXd& inputs,
               const Eigen::MatrixXd& targets) {
  if (net.weights.empty()) throw validation_error("toy net has no layers");
  if (inputs.cols() != net.weights.front().cols())
    throw validation_error("input width does not match first layer");
  for (std::size_t l = 1; l < net.weights.size(); ++l)
    if (net.weights[l].cols() != net.weights[l - 1].rows())
      throw validation_error("layer " + std::to_string(l) + " width mismatch");
  if (targets.cols() != net.weights.back().rows() || targets.rows() != inputs.rows())
    throw validation_error("target shape mismatch");
}

// Forward pass from layer `start` given that layer's input activations.
// Returns activations a_start .. a_L (a_L = network output). Hidden layers
// apply the activation; the last layer is linear.
std::vector<Eigen::MatrixXd> forward_from(const ToyNet& net, std::size_t start,
                                          const Eigen::MatrixXd& a_start) {
  const std::size_t layer_count = net.weights.size();
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(layer_count - start + 1);
  acts.push_back(a_start);
  for (std::size_t l = start; l < layer_count; ++l) {
    const Eigen::MatrixXd z = acts.back() * net.weights[l].transpose();
    acts.push_back(l + 1 == layer_count ? z : apply_act(z, net.act));
  }
  return acts;
}

// Gradients of the per-sample loss w.r.t. each activation a_start .. a_L,
// given the forward activations from forward_from.
std::vector<Eigen::MatrixXd> backward_from(const ToyNet& net, std::size_t start,
                                           const std::vector<Eigen::MatrixXd>& acts,
                                           const Eigen::MatrixXd& targets) {
  const std::size_t layer_count = net.weights.size();
  std::vector<Eigen::MatrixXd> grads(acts.size());
  grads.back() = 2.0 * (acts.back() - targets);  // d/dy ||y - t||^2
  for (std::size_t l = layer_count; l-- > start;) {
    const std::size_t local = l - start;  // index into acts/grads
    Eigen::MatrixXd delta = grads[local + 1];
    if (l + 1 != layer_count) {
      // hidden layer: pass back through the activation derivative at z_l
      const Eigen::MatrixXd z = acts[local] * net.weights[l].transpose();
      delta = delta.cwiseProduct(act_derivative(z, net.act));
    }
    grads[local] = delta * net.weights[l];
  }
  return grads;
}

}  // namespace

std::vector<LayerTrace> toy_forward_backward(const ToyNet& net,
                                             const Eigen::MatrixXd& inputs,
                                             const Eigen::MatrixXd& targets) {
  check_net(net, inputs, targets);
  const auto acts = forward_from(net, 0, inputs);
  const auto grads = backward_from(net, 0, acts, targets);
  std::vector<LayerTrace> traces(net.weights.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    traces[l].activations = acts[l];
    traces[l].gradients = grads[l];
  }
  return traces;
}

double fim_hessian_overlap(const ToyNet& net, const Eigen::MatrixXd& inputs,
                           const Eigen::MatrixXd& targets, int layer, int k) {
  check_net(net, inputs, targets);
  if (layer < 0 || layer >= static_cast<int>(net.weights.size()))
    throw validation_error("fim_hessian_overlap: layer out of range");
  const auto all_acts = forward_from(net, 0, inputs);
  const Eigen::MatrixXd a_layer = all_acts[static_cast<std::size_t>(layer)];
  const int width = static_cast<int>(a_layer.cols());
  if (width > 64)
    throw validation_error("fim_hessian_overlap: width " + std::to_string(width) +
                           " exceeds the finite-difference guard (64)");
  if (k < 1 || k > width) throw validation_error("fim_hessian_overlap: bad k");

  const std::size_t start = static_cast<std::size_t>(layer);
  const std::int64_t n = inputs.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  // empirical Fisher at this layer: uncentered second moment of the
  // per-sample activation gradients
  const auto grads = backward_from(net, start, forward_from(net, start, a_layer), targets);
  const Eigen::MatrixXd g = grads.front();
  const Eigen::MatrixXd fisher = (g.transpose() * g) * inv_n;

  // Hessian of the mean loss w.r.t. a displacement shared by every sample's
  // layer activation, by central differences of the analytic mean gradient
  const double step = 1e-4;
  auto mean_grad_at = [&](const Eigen::RowVectorXd& delta) -> Eigen::VectorXd {
    const Eigen::MatrixXd shifted = a_layer.rowwise() + delta;
    const auto gs = backward_from(net, start, forward_from(net, start, shifted), targets);
    return gs.front().colwise().mean().transpose();
  };
  Eigen::MatrixXd hess(width, width);
  for (int j = 0; j < width; ++j) {
    Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(width);
    e(j) = step;
    hess.col(j) = (mean_grad_at(e) - mean_grad_at(-e)) / (2.0 * step);
  }
  if (!hess.allFinite())
    throw degenerate_error("fim_hessian_overlap: non-finite finite-difference Hessian");
  hess = ((hess + hess.transpose()) * 0.5).eval();

  auto top_basis = [&](const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    Eigen::MatrixXd q(width, k);
    for (int i = 0; i < k; ++i) q.col(i) = eig.eigenvectors().col(width - 1 - i);
    return q;
  };
  const Eigen::MatrixXd qf = top_basis(fisher);
  const Eigen::MatrixXd qh = top_basis(hess);
  return std::clamp((qf.transpose() * qh).squaredNorm() / static_cast<double>(k),
                    0.0, 1.0);
}

namespace {

struct LayerEval {
  std::uint32_t layer_id = 0;
  double rho = 0.0;
  bool degenerate = false;
  double j_fasc = 0.0;
  double j_svd = 0.0;
};

// rho + both J values for one layer; FASC skipped on degenerate gradients.
LayerEval evaluate_layer(const TensorBlock& xs, const TensorBlock& gs, int k) {
  LayerEval eval;
  eval.layer_id = xs.layer_id;
  const CovarianceSet cov = covariance_of_parallel(xs, gs);
  const Subspace svd = svd_subspace(cov, k);
  eval.j_svd = objective_J(svd, xs, gs);
  try {
    eval.rho = rho_score(cov);
    const Subspace fasc = fasc_subspace(cov, k);
    eval.j_fasc = objective_J(fasc, xs, gs);
  } catch (const degenerate_error&) {
    eval.degenerate = true;
    eval.rho = 0.0;
    eval.j_fasc = eval.j_svd;  // no usable FASC direction: no gain, no loss
  }
  return eval;
}

}  // namespace

SweepResult threshold_sweep(
    const std::vector<std::pair<TensorBlock, TensorBlock>>& layers,
    const std::vector<int>& ranks, const std::vector<double>& thresholds,
    const GateConfig& cfg) {
  if (layers.size() < 2) throw validation_error("threshold_sweep: need >= 2 layers");
  if (thresholds.size() < 2) throw validation_error("threshold_sweep: need >= 2 thresholds");
  if (ranks.size() != layers.size())
    throw validation_error("threshold_sweep: one rank per layer required");

  const std::uint32_t total = static_cast<std::uint32_t>(layers.size());
  std::vector<LayerEval> evals(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i)
    evals[i] = evaluate_layer(layers[i].first, layers[i].second, ranks[i]);

  SweepResult result;
  for (const LayerEval& e : evals)
    result.layers.push_back({e.layer_id, e.rho, e.j_fasc, e.j_svd, e.degenerate});
  for (double t : thresholds) {
    const double t0 = omp_get_wtime();
    SweepRow row;
    row.threshold = t;
    GateConfig gate_cfg = cfg;
    gate_cfg.threshold = t;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      RhoReport r;
      r.layer_id = evals[i].layer_id;
      r.rho = evals[i].rho;
      r.degenerate_gradients = evals[i].degenerate;
      const Gate gate = gate_layer(r, evals[i].layer_id, total, gate_cfg);
      if (gate == Gate::use_fasc) {
        row.fasc_layers.push_back(evals[i].layer_id);
        row.total_j += evals[i].j_fasc;
      } else {
        row.total_j += evals[i].j_svd;
      }
    }
    row.wall_s = omp_get_wtime() - t0;
    result.rows.push_back(std::move(row));
  }

  // monotonicity check: FASC count non-increasing in threshold
  std::vector<std::size_t> order(result.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.rows[a].threshold < result.rows[b].threshold;
  });
  result.count_monotone = true;
  for (std::size_t i = 1; i < order.size(); ++i)
    if (result.rows[order[i]].fasc_layers.size() >
        result.rows[order[i - 1]].fasc_layers.size())
      result.count_monotone = false;
  return result;
}

GainReport layer_gain_experiment(
    const std::vector<std::pair<TensorBlock, TensorBlock>>& layers,
    double rank_fraction) {
  if (layers.size() < 4) throw validation_error("layer_gain_experiment: need >= 4 layers");
  if (rank_fraction <= 0.0 || rank_fraction > 1.0)
    throw validation_error("layer_gain_experiment: rank_fraction in (0, 1] required");

  GainReport report;
  std::vector<double> rhos, gains;
  for (const auto& [xs, gs] : layers) {
    const int d = static_cast<int>(xs.d());
    const int k = std::clamp(static_cast<int>(std::lround(rank_fraction * d)), 1, d);
    const LayerEval eval = evaluate_layer(xs, gs, k);
    GainRow row;
    row.layer_id = eval.layer_id;
    row.rho = eval.rho;
    row.delta_j = eval.j_svd - eval.j_fasc;
    rhos.push_back(row.rho);
    gains.push_back(row.delta_j);
    report.rows.push_back(row);
  }
  report.correlation = rho_correlation(rhos, gains);

  // top vs bottom 20% of layers by rho
  std::vector<std::size_t> order(report.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.rows[a].rho > report.rows[b].rho;
  });
  const std::size_t bucket =
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   std::ceil(0.2 * static_cast<double>(order.size()))));
  double top = 0.0, bottom = 0.0;
  for (std::size_t i = 0; i < bucket; ++i) {
    top += report.rows[order[i]].delta_j;
    bottom += report.rows[order[order.size() - 1 - i]].delta_j;
  }
  report.top20_mean_gain = top / static_cast<double>(bucket);
  report.bottom20_mean_gain = bottom / static_cast<double>(bucket);
  return report;
}

}  // namespace fasc
