#include "fasc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fasc/errors.hpp"
#include "fasc/rng.hpp"

namespace fasc {

const char* gate_name(Gate g) {
  switch (g) {
    case Gate::use_fasc: return "use_fasc";
    case Gate::use_svd: return "use_svd";
    case Gate::excluded: return "excluded";
  }
  return "?";
}

double rho_score(const CovarianceSet& cov) {
  const double nxx = cov.sigma_xx.norm();
  const double ngg = cov.sigma_gg.norm();
  if (nxx <= 0.0) throw validation_error("rho_score: zero sigma_xx");
  if (ngg < 1e-4)
    throw degenerate_error("degenerate gradients: ||sigma_gg||_F = " +
                           std::to_string(ngg) + " < 1e-4");
  // Eq. 2 exactly as printed: square roots of the two Frobenius norms
  return cov.sigma_xg.norm() / (std::sqrt(nxx) * std::sqrt(ngg));
}

namespace {

// rho of one resample, indices drawn with replacement from its own stream.
double resample_rho(const Eigen::MatrixXd& x, const Eigen::MatrixXd& g, Rng rng) {
  const std::int64_t n = x.rows();
  const int d = static_cast<int>(x.cols());
  // multiplicity form: sums weighted by how often each row was drawn
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n);
  for (std::int64_t i = 0; i < n; ++i)
    counts(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)))) += 1.0;

  const Eigen::MatrixXd xw = counts.asDiagonal() * x;
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::VectorXd mx = (x.transpose() * counts) * inv_n;
  const Eigen::VectorXd mg = (g.transpose() * counts) * inv_n;
  Eigen::MatrixXd sxx = (xw.transpose() * x) * inv_n - mx * mx.transpose();
  Eigen::MatrixXd sgg_m = ((counts.asDiagonal() * g).transpose() * g) * inv_n -
                          mg * mg.transpose();
  Eigen::MatrixXd sxg = (xw.transpose() * g) * inv_n - mx * mg.transpose();
  sxx = ((sxx + sxx.transpose()) * 0.5).eval();
  sgg_m = ((sgg_m + sgg_m.transpose()) * 0.5).eval();

  const double nxx = sxx.norm();
  const double ngg = sgg_m.norm();
  if (nxx <= 0.0 || ngg <= 0.0) return 0.0;  // all-identical resample
  (void)d;
  return sxg.norm() / (std::sqrt(nxx) * std::sqrt(ngg));
}

// Percentile with linear interpolation at rank p*(B-1) over sorted values.
double percentile(const std::vector<double>& sorted, double p) {
  const std::size_t b = sorted.size();
  if (b == 1) return sorted[0];
  const double pos = p * static_cast<double>(b - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, b - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

RhoReport bootstrap_impl(const TensorBlock& xs, const TensorBlock& gs, int resamples,
                         std::uint64_t seed, bool parallel) {
  if (xs.n() != gs.n() || xs.d() != gs.d())
    throw validation_error("rho_bootstrap: paired blocks disagree on dims");
  if (xs.n() < 32) throw validation_error("rho_bootstrap: need n >= 32");
  if (resamples < 1) throw validation_error("rho_bootstrap: resamples must be >= 1");

  RhoReport report;
  report.layer_id = xs.layer_id;
  report.n = xs.n();
  report.resamples = resamples;
  report.seed = seed;

  const CovarianceSet cov = covariance_of_parallel(xs, gs);
  try {
    report.rho = rho_score(cov);
  } catch (const degenerate_error&) {
    // keep the report writable: flag instead of propagating
    report.degenerate_gradients = true;
    report.rho = 0.0;
    report.ci_low = 0.0;
    report.ci_high = 0.0;
    return report;
  }

  const Eigen::MatrixXd x = xs.data.cast<double>();
  const Eigen::MatrixXd g = gs.data.cast<double>();
  const Rng master(seed);
  std::vector<double> rhos(static_cast<std::size_t>(resamples), 0.0);
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int b = 0; b < resamples; ++b)
    rhos[static_cast<std::size_t>(b)] =
        resample_rho(x, g, master.derive(static_cast<std::uint64_t>(b)));

  std::sort(rhos.begin(), rhos.end());
  report.ci_low = percentile(rhos, 0.025);
  report.ci_high = percentile(rhos, 0.975);
  return report;
}

}  // namespace

RhoReport rho_bootstrap(const TensorBlock& xs, const TensorBlock& gs, int resamples,
                        std::uint64_t seed) {
  return bootstrap_impl(xs, gs, resamples, seed, true);
}

RhoReport rho_bootstrap_serial(const TensorBlock& xs, const TensorBlock& gs,
                               int resamples, std::uint64_t seed) {
  return bootstrap_impl(xs, gs, resamples, seed, false);
}

Gate gate_layer(RhoReport& report, std::uint32_t layer_id, std::uint32_t total_layers,
                const GateConfig& cfg) {
  report.excluded_layer_rule = false;
  if (cfg.exclude_boundary_layers && total_layers > 0 &&
      (layer_id <= 2 || layer_id == total_layers - 1)) {
    report.excluded_layer_rule = true;
    report.gate = Gate::excluded;
  } else if (report.degenerate_gradients) {
    report.gate = Gate::use_svd;
  } else if (report.rho > cfg.threshold) {
    report.gate = Gate::use_fasc;
  } else {
    report.gate = Gate::use_svd;
  }
  return report.gate;
}

AngleReport principal_angles(const Subspace& a, const Subspace& b) {
  if (a.d != b.d) throw validation_error("principal_angles: dimension mismatch");
  if (a.k != b.k) throw validation_error("principal_angles: rank mismatch");
  const Eigen::MatrixXd cross = a.basis.transpose() * b.basis;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
  const int k = a.k;

  AngleReport report;
  report.angles_deg.resize(k);
  // singular values descend, so angles come out ascending
  for (int i = 0; i < k; ++i) {
    const double c = std::clamp(svd.singularValues()(i), 0.0, 1.0);
    report.angles_deg(i) = std::acos(c) * 180.0 / M_PI;
  }
  report.median_deg = (k % 2 == 1)
                          ? report.angles_deg(k / 2)
                          : 0.5 * (report.angles_deg(k / 2 - 1) + report.angles_deg(k / 2));
  return report;
}

Pearson rho_correlation(const std::vector<double>& rhos,
                        const std::vector<double>& gains) {
  if (rhos.size() != gains.size())
    throw validation_error("rho_correlation: length mismatch");
  Pearson out;
  const std::size_t n = rhos.size();
  if (n < 3) return out;

  double mr = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mr += rhos[i];
    mg += gains[i];
  }
  mr /= static_cast<double>(n);
  mg /= static_cast<double>(n);
  double srr = 0.0, sgg = 0.0, srg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rhos[i] - mr;
    const double b = gains[i] - mg;
    srr += a * a;
    sgg += b * b;
    srg += a * b;
  }
  if (srr <= 0.0 || sgg <= 0.0) return out;  // constant input: r undefined
  out.r = srg / std::sqrt(srr * sgg);
  out.defined = true;
  return out;
}

}  // namespace fasc
