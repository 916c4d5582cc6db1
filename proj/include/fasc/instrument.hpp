#pragma once

namespace fasc::instrument {

// Allocation-accounting hook: every materialized covariance records its
// dimension here. Lets tests assert that the sketched path never builds a
// d x d matrix for large d (it should only ever see m x m).
void note_cov_dim(int d);
int max_cov_dim();
void reset();

}  // namespace fasc::instrument
