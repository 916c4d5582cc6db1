#include "fasc/stats.hpp"

#include <cmath>
#include <vector>

#include "fasc/errors.hpp"
#include "fasc/instrument.hpp"

namespace fasc {

namespace {
// Shard size is fixed so the shard partition depends on n alone, never on
// thread count; that's what makes serial and parallel results bitwise equal.
constexpr std::int64_t kShardRows = 512;
}  // namespace

CovAccumulator::CovAccumulator(int d) {
  if (d < 1) throw validation_error("CovAccumulator: d must be >= 1");
  instrument::note_cov_dim(d);
  sum_x_ = Eigen::VectorXd::Zero(d);
  sum_g_ = Eigen::VectorXd::Zero(d);
  sum_xx_ = Eigen::MatrixXd::Zero(d, d);
  sum_gg_ = Eigen::MatrixXd::Zero(d, d);
  sum_xg_ = Eigen::MatrixXd::Zero(d, d);
}

void CovAccumulator::accumulate(const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  if (x.size() != d() || g.size() != d())
    throw validation_error("accumulate: dimension mismatch");
  if (!x.allFinite() || !g.allFinite())
    throw validation_error("accumulate: non-finite input");
  sum_x_ += x;
  sum_g_ += g;
  sum_xx_.noalias() += x * x.transpose();
  sum_gg_.noalias() += g * g.transpose();
  sum_xg_.noalias() += x * g.transpose();
  ++n_;
}

void CovAccumulator::accumulate_rows(const TensorBlock& xs, const TensorBlock& gs,
                                     std::int64_t row_begin, std::int64_t row_end) {
  if (xs.d() != d() || gs.d() != d())
    throw validation_error("accumulate_rows: dimension mismatch");
  if (xs.n() != gs.n())
    throw validation_error("accumulate_rows: paired blocks disagree on n");
  if (row_begin < 0 || row_end > xs.n() || row_begin > row_end)
    throw validation_error("accumulate_rows: bad row range");
  const std::int64_t rows = row_end - row_begin;
  if (rows == 0) return;

  const Eigen::MatrixXd X =
      xs.data.middleRows(row_begin, rows).cast<double>();
  const Eigen::MatrixXd G =
      gs.data.middleRows(row_begin, rows).cast<double>();
  sum_x_ += X.colwise().sum().transpose();
  sum_g_ += G.colwise().sum().transpose();
  sum_xx_.noalias() += X.transpose() * X;
  sum_gg_.noalias() += G.transpose() * G;
  sum_xg_.noalias() += X.transpose() * G;
  n_ += rows;
}

void CovAccumulator::merge(const CovAccumulator& other) {
  if (other.d() != d()) throw validation_error("merge: dimension mismatch");
  sum_x_ += other.sum_x_;
  sum_g_ += other.sum_g_;
  sum_xx_ += other.sum_xx_;
  sum_gg_ += other.sum_gg_;
  sum_xg_ += other.sum_xg_;
  n_ += other.n_;
}

CovarianceSet CovAccumulator::finalize() const {
  if (n_ < 2) throw validation_error("finalize: need at least 2 samples");
  const double inv_n = 1.0 / static_cast<double>(n_);
  CovarianceSet cov;
  cov.n = n_;
  cov.mean_x = sum_x_ * inv_n;
  cov.mean_g = sum_g_ * inv_n;
  cov.sigma_xx = sum_xx_ * inv_n - cov.mean_x * cov.mean_x.transpose();
  cov.sigma_gg = sum_gg_ * inv_n - cov.mean_g * cov.mean_g.transpose();
  cov.sigma_xg = sum_xg_ * inv_n - cov.mean_x * cov.mean_g.transpose();
  // centering identity leaves ~1e-17 asymmetry; enforce exact symmetry
  cov.sigma_xx = ((cov.sigma_xx + cov.sigma_xx.transpose()) * 0.5).eval();
  cov.sigma_gg = ((cov.sigma_gg + cov.sigma_gg.transpose()) * 0.5).eval();
  return cov;
}

namespace {

CovarianceSet covariance_sharded(const TensorBlock& xs, const TensorBlock& gs,
                                 bool parallel) {
  if (xs.n() != gs.n() || xs.d() != gs.d())
    throw validation_error("covariance: paired blocks disagree on dims");
  const std::int64_t n = xs.n();
  const int d = static_cast<int>(xs.d());
  const std::int64_t shards = (n + kShardRows - 1) / kShardRows;

  std::vector<CovAccumulator> parts(static_cast<std::size_t>(shards),
                                    CovAccumulator(d));
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t s = 0; s < shards; ++s) {
    const std::int64_t lo = s * kShardRows;
    const std::int64_t hi = std::min(n, lo + kShardRows);
    parts[static_cast<std::size_t>(s)].accumulate_rows(xs, gs, lo, hi);
  }

  CovAccumulator total(d);
  for (std::int64_t s = 0; s < shards; ++s)
    total.merge(parts[static_cast<std::size_t>(s)]);
  return total.finalize();
}

}  // namespace

CovarianceSet covariance_of(const TensorBlock& xs, const TensorBlock& gs) {
  return covariance_sharded(xs, gs, false);
}

CovarianceSet covariance_of_parallel(const TensorBlock& xs, const TensorBlock& gs) {
  return covariance_sharded(xs, gs, true);
}

}  // namespace fasc
