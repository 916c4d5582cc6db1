#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "fasc/stats.hpp"
#include "fasc/tensor_io.hpp"

namespace fasc {

enum class Method { fasc, svd, grad_weighted, fisher_diag };

const char* method_name(Method m);

struct FascConfig {
  double epsilon = 1e-8;  // ridge on sigma_xx
  double tau = 1e-6;      // eigenvalue truncation, relative to the largest
};

// Rank-k subspace with an orthonormal basis. The projector P = basis basis^T
// satisfies the orthogonal-projector laws (idempotent, symmetric, trace k).
struct Subspace {
  int d = 0;
  int k = 0;
  Method method = Method::svd;
  Eigen::MatrixXd basis;        // d x k, orthonormal columns
  Eigen::VectorXd eigenvalues;  // k values, descending
  // true when the spectrum ties at the k-cut, i.e. the chosen span is not
  // unique (isotropic covariance, repeated eigenvalues)
  bool degenerate_spectrum = false;
  std::optional<std::uint64_t> seed;  // set when produced via sketching
  int sketch_m = 0;                   // 0 = exact path

  Eigen::MatrixXd projector() const { return basis * basis.transpose(); }
};

// Gradient-aligned subspace: solve sigma_xg sigma_gg sigma_xg^T v = lambda
// (sigma_xx + eps I) v by whitening — W = pinv_sqrt(sigma_xx + eps I) via
// truncated eigendecomposition, symmetric eigensolve of M = W A W, map back
// v = W u, and QR-orthonormalize the span.
Subspace fasc_subspace(const CovarianceSet& cov, int k, const FascConfig& cfg = {});

// Variance baseline: top-k eigenvectors of sigma_xx.
Subspace svd_subspace(const CovarianceSet& cov, int k);

// Gradient-weighted baseline: top-k eigenvectors of the centered covariance
// of elementwise products h_i = g_i ⊙ x_i.
Subspace grad_weighted_subspace(const TensorBlock& xs, const TensorBlock& gs, int k);

// Axis-aligned baseline: keep the k coordinates with the largest
// diag(sigma_gg)_j * diag(sigma_xx)_j, ties broken by lower index.
Subspace fisher_diag_subspace(const CovarianceSet& cov, int k);

// J(P) = (1/n) sum_i (g_i^T (I - P) x_i)^2 with x, g centered by this call.
double objective_J(const Subspace& subspace, const TensorBlock& xs,
                   const TensorBlock& gs);

}  // namespace fasc
