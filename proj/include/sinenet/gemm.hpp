#pragma once

namespace sinenet {

/// C (m x n, row-major) = A (m x k) * B (k x n), optionally accumulating.
/// Backed by a tuned dense kernel in gemm.cpp; the rest of the library is
/// deliberately independent of the linear-algebra backend.
void gemm_rm(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
void gemm_rm(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);

/// C (m x n) = A^T (k x m stored row-major) * B (k x n).
void gemm_at_b(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
void gemm_at_b(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);

/// C (m x n) = A (m x k) * B^T (n x k stored row-major).
void gemm_a_bt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
void gemm_a_bt(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);

}  // namespace sinenet
