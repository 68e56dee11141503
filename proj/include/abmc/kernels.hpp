#pragma once

#include <cstddef>

namespace abmc::kernels {

// Dense inner loops, each in a serial reference form and an OpenMP form.
// Both orders accumulate over the contraction index identically, so the two
// variants are bit-identical and the parallel form is safe under any thread
// count. Dispatchers pick the OpenMP form above a work threshold.

// C[m,n] = A[m,k] * B[k,n]
void matmul_nn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void matmul_nn_omp(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n);

// C[m,n] += A[k,m]^T * B[k,n]
void matmul_tn_acc_serial(const double* a, const double* b, double* c,
                          std::size_t m, std::size_t k, std::size_t n);
void matmul_tn_acc_omp(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n);

// C[m,n] += A[m,k] * B[n,k]^T
void matmul_nt_acc_serial(const double* a, const double* b, double* c,
                          std::size_t m, std::size_t k, std::size_t n);
void matmul_nt_acc_omp(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n);

// D[i,j] = ||X_i - Y_j||^2 for row-major X[nx,d], Y[ny,d]
void pairwise_sqdist_serial(const double* x, const double* y, double* d,
                            std::size_t nx, std::size_t ny, std::size_t dim);
void pairwise_sqdist_omp(const double* x, const double* y, double* d,
                         std::size_t nx, std::size_t ny, std::size_t dim);

// Work thresholds (multiply-add count) below which the serial form is used.
inline constexpr std::size_t kParallelMinWork = std::size_t{1} << 16;

void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n);
void matmul_nt_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n);
void pairwise_sqdist(const double* x, const double* y, double* d,
                     std::size_t nx, std::size_t ny, std::size_t dim);

}  // namespace abmc::kernels
