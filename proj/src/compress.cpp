#include "fasc/compress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fasc/errors.hpp"

namespace fasc {

const char* method_name(Method m) {
  switch (m) {
    case Method::fasc: return "fasc";
    case Method::svd: return "svd";
    case Method::grad_weighted: return "grad_weighted";
    case Method::fisher_diag: return "fisher_diag";
  }
  return "?";
}

namespace {

void check_rank(int k, int d) {
  if (k < 1) throw validation_error("rank k must be >= 1 (empty subspace rejected)");
  if (k > d)
    throw validation_error("rank k = " + std::to_string(k) + " exceeds dimension d = " +
                           std::to_string(d));
}

// Deterministic sign convention: make the largest-magnitude component of each
// column positive. Fixes the arbitrary eigenvector/QR sign so identical inputs
// give bit-identical bases.
void fix_column_signs(Eigen::MatrixXd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    Eigen::Index imax = 0;
    m.col(c).cwiseAbs().maxCoeff(&imax);
    if (m(imax, c) < 0.0) m.col(c) = -m.col(c);
  }
}

// Thin-QR orthonormalization of the span of V, with the sign convention
// applied afterwards.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& v) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(v.rows(), v.cols());
  fix_column_signs(q);
  return q;
}

// Top-k eigenpairs of a symmetric matrix, descending; flags a tie at the cut.
struct TopEig {
  Eigen::MatrixXd vectors;     // d x k
  Eigen::VectorXd values;      // k, descending
  bool tie_at_cut = false;
};

TopEig top_eigenpairs(const Eigen::MatrixXd& sym, int k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success)
    throw degenerate_error("eigensolver failed to converge");
  const int d = static_cast<int>(sym.rows());
  TopEig out;
  out.vectors.resize(d, k);
  out.values.resize(k);
  // Eigen returns ascending order; take from the top
  for (int i = 0; i < k; ++i) {
    out.vectors.col(i) = eig.eigenvectors().col(d - 1 - i);
    out.values(i) = eig.eigenvalues()(d - 1 - i);
  }
  fix_column_signs(out.vectors);
  if (k < d) {
    const double lo = eig.eigenvalues()(d - k);      // last kept
    const double next = eig.eigenvalues()(d - k - 1);  // first dropped
    const double scale = std::max(std::abs(eig.eigenvalues()(d - 1)), 1e-300);
    out.tie_at_cut = (lo - next) <= 1e-12 * scale;
  }
  return out;
}

}  // namespace

Subspace fasc_subspace(const CovarianceSet& cov, int k, const FascConfig& cfg) {
  const int d = cov.d();
  check_rank(k, d);
  if (cfg.epsilon <= 0.0 || cfg.tau <= 0.0 || cfg.tau >= 1.0)
    throw validation_error("fasc_subspace: bad config (epsilon > 0, 0 < tau < 1)");

  // Appendix D failure mode: near-constant gradients make A numerically zero
  // and the top-k directions arbitrary. Refuse rather than return noise.
  if (cov.sigma_gg.norm() < 1e-12 * d)
    throw degenerate_error("degenerate gradients: ||sigma_gg||_F = " +
                           std::to_string(cov.sigma_gg.norm()));

  // W = pinv_sqrt(sigma_xx + eps I) by truncated eigendecomposition
  Eigen::MatrixXd b = cov.sigma_xx;
  b.diagonal().array() += cfg.epsilon;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> beig(b);
  if (beig.info() != Eigen::Success)
    throw degenerate_error("eigensolver failed on regularized sigma_xx");
  const double lambda_max = beig.eigenvalues()(d - 1);
  if (lambda_max <= 0.0) throw degenerate_error("sigma_xx has no positive spectrum");
  const double cut = cfg.tau * lambda_max;

  int kept = 0;
  for (int i = 0; i < d; ++i)
    if (beig.eigenvalues()(i) >= cut) ++kept;
  if (kept < k)
    throw degenerate_error("deficient rank: only " + std::to_string(kept) +
                           " usable directions in sigma_xx after truncation, need k = " +
                           std::to_string(k));

  Eigen::MatrixXd u_kept(d, kept);
  Eigen::VectorXd inv_sqrt(kept);
  int at = 0;
  for (int i = 0; i < d; ++i) {
    const double w = beig.eigenvalues()(i);
    if (w >= cut) {
      u_kept.col(at) = beig.eigenvectors().col(i);
      inv_sqrt(at) = 1.0 / std::sqrt(w);
      ++at;
    }
  }
  const Eigen::MatrixXd white =
      u_kept * inv_sqrt.asDiagonal() * u_kept.transpose();

  Eigen::MatrixXd a = cov.sigma_xg * cov.sigma_gg * cov.sigma_xg.transpose();
  a = ((a + a.transpose()) * 0.5).eval();
  Eigen::MatrixXd m = white * a * white;
  m = ((m + m.transpose()) * 0.5).eval();

  TopEig top = top_eigenpairs(m, k);

  Subspace sub;
  sub.d = d;
  sub.k = k;
  sub.method = Method::fasc;
  sub.basis = orthonormalize(white * top.vectors);
  sub.eigenvalues = top.values.cwiseMax(0.0);  // generalized eigenvalues, >= 0 up to roundoff
  sub.degenerate_spectrum = top.tie_at_cut;
  return sub;
}

Subspace svd_subspace(const CovarianceSet& cov, int k) {
  const int d = cov.d();
  check_rank(k, d);
  TopEig top = top_eigenpairs(cov.sigma_xx, k);
  Subspace sub;
  sub.d = d;
  sub.k = k;
  sub.method = Method::svd;
  sub.basis = top.vectors;  // eigenvectors of a symmetric matrix: already orthonormal
  sub.eigenvalues = top.values.cwiseMax(0.0);
  sub.degenerate_spectrum = top.tie_at_cut;
  return sub;
}

Subspace grad_weighted_subspace(const TensorBlock& xs, const TensorBlock& gs, int k) {
  if (xs.n() != gs.n() || xs.d() != gs.d())
    throw validation_error("grad_weighted_subspace: paired blocks disagree on dims");
  const int d = static_cast<int>(xs.d());
  check_rank(k, d);

  // centered covariance of h_i = g_i ⊙ x_i
  TensorBlock h;
  h.kind = TensorKind::activation;
  h.layer_id = xs.layer_id;
  h.data = xs.data.cwiseProduct(gs.data);
  const CovarianceSet hcov = covariance_of(h, h);

  if (hcov.sigma_xx.norm() < 1e-12 * d)
    throw degenerate_error("zero-variance weighted covariance");

  TopEig top = top_eigenpairs(hcov.sigma_xx, k);
  Subspace sub;
  sub.d = d;
  sub.k = k;
  sub.method = Method::grad_weighted;
  sub.basis = top.vectors;
  sub.eigenvalues = top.values.cwiseMax(0.0);
  sub.degenerate_spectrum = top.tie_at_cut;
  return sub;
}

Subspace fisher_diag_subspace(const CovarianceSet& cov, int k) {
  const int d = cov.d();
  check_rank(k, d);

  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd scores(d);
  for (int j = 0; j < d; ++j) scores(j) = cov.sigma_gg(j, j) * cov.sigma_xx(j, j);
  // descending score, ties won by the lower index (stable over iota order)
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores(a) > scores(b); });

  Subspace sub;
  sub.d = d;
  sub.k = k;
  sub.method = Method::fisher_diag;
  sub.basis = Eigen::MatrixXd::Zero(d, k);
  sub.eigenvalues.resize(k);
  for (int i = 0; i < k; ++i) {
    sub.basis(order[static_cast<std::size_t>(i)], i) = 1.0;
    sub.eigenvalues(i) = scores(order[static_cast<std::size_t>(i)]);
  }
  if (k < d)
    sub.degenerate_spectrum =
        (scores(order[static_cast<std::size_t>(k - 1)]) -
         scores(order[static_cast<std::size_t>(k)])) <=
        1e-12 * std::max(std::abs(scores(order[0])), 1e-300);
  return sub;
}

double objective_J(const Subspace& subspace, const TensorBlock& xs,
                   const TensorBlock& gs) {
  if (xs.n() != gs.n() || xs.d() != gs.d())
    throw validation_error("objective_J: paired blocks disagree on dims");
  if (subspace.d != xs.d())
    throw validation_error("objective_J: subspace dimension mismatch");
  if (subspace.k < 1) throw validation_error("objective_J: empty subspace rejected");

  const std::int64_t n = xs.n();
  const Eigen::MatrixXd x = xs.data.cast<double>();
  const Eigen::MatrixXd g = gs.data.cast<double>();
  const Eigen::RowVectorXd mx = x.colwise().mean();
  const Eigen::RowVectorXd mg = g.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - mx;
  const Eigen::MatrixXd gc = g.rowwise() - mg;

  // residual r_i = x_i - Q Q^T x_i; J = mean over i of (g_i . r_i)^2
  const Eigen::MatrixXd proj = (xc * subspace.basis) * subspace.basis.transpose();
  const Eigen::VectorXd s =
      ((xc - proj).array() * gc.array()).rowwise().sum().matrix();
  return s.squaredNorm() / static_cast<double>(n);
}

}  // namespace fasc
