#pragma once

#include <cstdint>

#include "fasc/compress.hpp"
#include "fasc/tensor_io.hpp"

namespace fasc {

struct SketchConfig {
  int m = 0;                 // sketch dimension, k <= m <= d
  std::uint64_t seed = 0;
  bool identity = false;     // test hook: R1 = R2 = I (requires m == d)
  double rho_gate = 0.3;     // sizing rule switch point
};

// Dynamic sizing: m = 2k for low-coupling layers, else min(4k, max(d/2, k));
// always clamped to [k, d].
int choose_sketch_size(double rho, int k, int d, const SketchConfig& cfg = {});

// Randomized cross-covariance sketch: center X and G, project through
// independent Gaussian maps R1, R2 (entries N(0, 1/m)), solve the FASC
// eigenproblem in m dimensions, lift the basis back with v = R1 w, and
// QR-orthonormalize. Never materializes a d x d covariance.
Subspace sketched_fasc_subspace(const TensorBlock& xs, const TensorBlock& gs, int k,
                                const SketchConfig& cfg, const FascConfig& fasc_cfg = {});

// Mean squared cosine of principal angles: ||Qa^T Qb||_F^2 / k.
double subspace_overlap(const Subspace& a, const Subspace& b);

}  // namespace fasc
