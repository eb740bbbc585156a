#ifndef MACBIG_GEMM_HPP
#define MACBIG_GEMM_HPP

#include <cstddef>

#ifdef MACBIG_WITH_BLAS
#include <cblas.h>
#endif

namespace macbig {

// C[m,n] = alpha * op(A) * op(B) + beta * C, all row-major.
// op(A) is [m,k]; when ta is set, A is stored as [k,m] and read transposed.
// The cblas path and the built-in path compute the same sums; the built-in
// path keeps a fixed accumulation order so results are reproducible without
// BLAS as well.
#ifdef MACBIG_WITH_BLAS

inline void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                 float alpha, const float* A, std::size_t lda, const float* B,
                 std::size_t ldb, float beta, float* C, std::size_t ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), alpha, A,
              static_cast<int>(lda), B, static_cast<int>(ldb), beta, C,
              static_cast<int>(ldc));
}

inline void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                 double alpha, const double* A, std::size_t lda,
                 const double* B, std::size_t ldb, double beta, double* C,
                 std::size_t ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, static_cast<int>(m),
              static_cast<int>(n), static_cast<int>(k), alpha, A,
              static_cast<int>(lda), B, static_cast<int>(ldb), beta, C,
              static_cast<int>(ldc));
}

inline void gemm_init() {
#ifdef OPENBLAS_VERSION
  openblas_set_num_threads(1);
#endif
}

#else  // built-in kernels

template <class T>
inline void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                 T alpha, const T* A, std::size_t lda, const T* B,
                 std::size_t ldb, T beta, T* C, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* c = C + i * ldc;
    if (beta == T(0)) {
      for (std::size_t j = 0; j < n; ++j) c[j] = T(0);
    } else if (beta != T(1)) {
      for (std::size_t j = 0; j < n; ++j) c[j] *= beta;
    }
    for (std::size_t p = 0; p < k; ++p) {
      T a = alpha * (ta ? A[p * lda + i] : A[i * lda + p]);
      if (a == T(0)) continue;
      if (!tb) {
        const T* b = B + p * ldb;
        for (std::size_t j = 0; j < n; ++j) c[j] += a * b[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) c[j] += a * B[j * ldb + p];
      }
    }
  }
}

inline void gemm_init() {}

#endif

}  // namespace macbig

#endif
