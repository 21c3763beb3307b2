#pragma once

#include <cblas.h>

#include "spritelab/core/tensor.hpp"

namespace spritelab::blas {

// C = alpha * op(A) * op(B) + beta * C, row-major.
inline void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
                k, alpha, a, lda, b, ldb, beta, c, ldc);
}

inline void set_threads(int n) { openblas_set_num_threads(n); }

}  // namespace spritelab::blas
