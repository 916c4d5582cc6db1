// Serial vs OpenMP timings for the two hot paths: sharded covariance
// accumulation and the rho bootstrap.  Also checks that the parallel
// results are bitwise identical to the serial reference, which the
// fixed-shard / index-merged design is supposed to guarantee.

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <functional>

#include "fasc/diagnostics.hpp"
#include "fasc/harness.hpp"
#include "fasc/stats.hpp"

namespace {

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(),
                     sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

double time_of(const std::function<void()>& fn, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = omp_get_wtime();
    fn();
    best = std::min(best, omp_get_wtime() - t0);
  }
  return best;
}

}  // namespace

int main() {
  fasc::PlantedSpec spec;
  spec.d = 96;
  spec.n = 20000;
  spec.planted_axes = {90, 91, 92, 93, 94, 95};
  spec.gradient_gain = 8.0;
  spec.seed = 17;
  const auto [xs, gs] = fasc::generate_planted(spec);

  std::printf("threads available: %d\n", omp_get_max_threads());
  std::printf("fixture: n=%lld d=%d\n\n", static_cast<long long>(spec.n), spec.d);

  fasc::CovarianceSet cov_serial, cov_parallel;
  const double t_cov_serial =
      time_of([&] { cov_serial = fasc::covariance_of(xs, gs); }, 3);
  const double t_cov_parallel =
      time_of([&] { cov_parallel = fasc::covariance_of_parallel(xs, gs); }, 3);
  const bool cov_same = bitwise_equal(cov_serial.sigma_xx, cov_parallel.sigma_xx) &&
                        bitwise_equal(cov_serial.sigma_gg, cov_parallel.sigma_gg) &&
                        bitwise_equal(cov_serial.sigma_xg, cov_parallel.sigma_xg);
  std::printf("covariance   serial %8.4fs  parallel %8.4fs  speedup %5.2fx  bitwise %s\n",
              t_cov_serial, t_cov_parallel, t_cov_serial / t_cov_parallel,
              cov_same ? "OK" : "MISMATCH");

  const int resamples = 200;
  fasc::RhoReport boot_serial, boot_parallel;
  const double t_boot_serial = time_of(
      [&] { boot_serial = fasc::rho_bootstrap_serial(xs, gs, resamples, 5); }, 2);
  const double t_boot_parallel = time_of(
      [&] { boot_parallel = fasc::rho_bootstrap(xs, gs, resamples, 5); }, 2);
  const bool boot_same = boot_serial.rho == boot_parallel.rho &&
                         boot_serial.ci_low == boot_parallel.ci_low &&
                         boot_serial.ci_high == boot_parallel.ci_high;
  std::printf("bootstrap    serial %8.4fs  parallel %8.4fs  speedup %5.2fx  bitwise %s\n",
              t_boot_serial, t_boot_parallel, t_boot_serial / t_boot_parallel,
              boot_same ? "OK" : "MISMATCH");

  return (cov_same && boot_same) ? 0 : 1;
}
