#include "fasc/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fasc/errors.hpp"
#include "fasc/instrument.hpp"
#include "fasc/rng.hpp"

namespace fasc {

int choose_sketch_size(double rho, int k, int d, const SketchConfig& cfg) {
  if (k < 1 || k > d) throw validation_error("choose_sketch_size: need 1 <= k <= d");
  int m = (rho <= cfg.rho_gate) ? 2 * k : std::min(4 * k, std::max(d / 2, k));
  return std::clamp(m, k, d);
}

Subspace sketched_fasc_subspace(const TensorBlock& xs, const TensorBlock& gs, int k,
                                const SketchConfig& cfg, const FascConfig& fasc_cfg) {
  if (xs.n() != gs.n() || xs.d() != gs.d())
    throw validation_error("sketched_fasc_subspace: paired blocks disagree on dims");
  const int d = static_cast<int>(xs.d());
  const std::int64_t n = xs.n();
  const int m = cfg.m;
  if (k < 1) throw validation_error("sketched_fasc_subspace: k must be >= 1");
  if (m < k)
    throw validation_error("sketched_fasc_subspace: m = " + std::to_string(m) +
                           " < k = " + std::to_string(k));
  if (m > d)
    throw validation_error("sketched_fasc_subspace: m = " + std::to_string(m) +
                           " > d = " + std::to_string(d));
  if (cfg.identity && m != d)
    throw validation_error("identity sketch requires m == d");
  if (n < 2) throw validation_error("sketched_fasc_subspace: need n >= 2");

  // center before sketching; sketching does not commute with mean subtraction
  const Eigen::MatrixXd x = xs.data.cast<double>();
  const Eigen::MatrixXd g = gs.data.cast<double>();
  const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd gc = g.rowwise() - g.colwise().mean();

  Eigen::MatrixXd r1, r2;
  if (cfg.identity) {
    r1 = Eigen::MatrixXd::Identity(d, m);
    r2 = r1;
  } else {
    // entries N(0, 1/m); fill order is row-major per matrix, R1 fully then R2,
    // so a given seed always produces the same maps
    Rng rng(cfg.seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    r1.resize(d, m);
    r2.resize(d, m);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < m; ++j) r1(i, j) = rng.normal() * scale;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < m; ++j) r2(i, j) = rng.normal() * scale;
  }

  const Eigen::MatrixXd xs_sk = xc * r1;  // n x m
  const Eigen::MatrixXd gs_sk = gc * r2;

  // sketch-space covariance set; the only d-sized objects in this routine are
  // the n x d data and the d x m maps — never a d x d covariance
  instrument::note_cov_dim(m);
  const double inv_n = 1.0 / static_cast<double>(n);
  CovarianceSet cov;
  cov.n = n;
  cov.mean_x = Eigen::VectorXd::Zero(m);
  cov.mean_g = Eigen::VectorXd::Zero(m);
  cov.sigma_xx = (xs_sk.transpose() * xs_sk) * inv_n;
  cov.sigma_gg = (gs_sk.transpose() * gs_sk) * inv_n;
  cov.sigma_xg = (xs_sk.transpose() * gs_sk) * inv_n;
  cov.sigma_xx = ((cov.sigma_xx + cov.sigma_xx.transpose()) * 0.5).eval();
  cov.sigma_gg = ((cov.sigma_gg + cov.sigma_gg.transpose()) * 0.5).eval();

  Subspace inner = fasc_subspace(cov, k, fasc_cfg);

  Subspace sub;
  sub.d = d;
  sub.k = k;
  sub.method = Method::fasc;
  sub.seed = cfg.seed;
  sub.sketch_m = m;
  sub.eigenvalues = inner.eigenvalues;
  sub.degenerate_spectrum = inner.degenerate_spectrum;

  // lift each sketch-space eigenvector w to v = R1 w, then re-orthonormalize.
  // QR of a d x k matrix: cheap and restores the projector laws exactly.
  Eigen::MatrixXd lifted = r1 * inner.basis;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(lifted);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    Eigen::Index imax = 0;
    q.col(c).cwiseAbs().maxCoeff(&imax);
    if (q(imax, c) < 0.0) q.col(c) = -q.col(c);
  }
  sub.basis = std::move(q);
  return sub;
}

double subspace_overlap(const Subspace& a, const Subspace& b) {
  if (a.d != b.d) throw validation_error("subspace_overlap: dimension mismatch");
  if (a.k != b.k) throw validation_error("subspace_overlap: rank mismatch");
  const double f = (a.basis.transpose() * b.basis).squaredNorm() /
                   static_cast<double>(a.k);
  return std::clamp(f, 0.0, 1.0);
}

}  // namespace fasc
