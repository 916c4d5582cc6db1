#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "fasc/tensor_io.hpp"

namespace fasc {

// Centered covariance triple for one layer, population-normalized (1/n).
// sigma_xx and sigma_gg are symmetrized at finalize.
struct CovarianceSet {
  std::int64_t n = 0;
  Eigen::VectorXd mean_x, mean_g;
  Eigen::MatrixXd sigma_xx, sigma_gg, sigma_xg;

  int d() const { return static_cast<int>(sigma_xx.rows()); }
};

// Streaming accumulator over (x, g) sample pairs. Accumulates raw sums in
// 64-bit; centering happens at finalize via the sum-of-outer-products
// identity, so one pass over the dump suffices. Mergeable: merge() equals
// accumulation of the concatenated streams.
class CovAccumulator {
 public:
  explicit CovAccumulator(int d);

  int d() const { return static_cast<int>(sum_x_.size()); }
  std::int64_t count() const { return n_; }

  void accumulate(const Eigen::VectorXd& x, const Eigen::VectorXd& g);

  // Bulk path over rows [row_begin, row_end) of a float block pair;
  // mathematically the same sums, evaluated as matrix products.
  void accumulate_rows(const TensorBlock& xs, const TensorBlock& gs,
                       std::int64_t row_begin, std::int64_t row_end);

  void merge(const CovAccumulator& other);

  CovarianceSet finalize() const;  // requires n >= 2

 private:
  std::int64_t n_ = 0;
  Eigen::VectorXd sum_x_, sum_g_;
  Eigen::MatrixXd sum_xx_, sum_gg_, sum_xg_;
};

// Sharded covariance estimation. Both variants split the stream into
// fixed-size shards (a function of n only) and merge partial sums in shard
// order, so the result is bitwise identical between them and independent of
// thread count; the second runs shards under OpenMP.
CovarianceSet covariance_of(const TensorBlock& xs, const TensorBlock& gs);
CovarianceSet covariance_of_parallel(const TensorBlock& xs, const TensorBlock& gs);

}  // namespace fasc
