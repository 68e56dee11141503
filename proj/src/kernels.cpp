#include "abmc/kernels.hpp"

#include <cstring>

namespace abmc::kernels {

namespace {

inline void matmul_nn_row(const double* a, const double* b, double* c,
                          std::size_t k, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) c[j] = 0.0;
  for (std::size_t l = 0; l < k; ++l) {
    const double av = a[l];
    const double* brow = b + l * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void matmul_tn_acc_row(const double* a, const double* b, double* c,
                              std::size_t i, std::size_t m, std::size_t k,
                              std::size_t n) {
  for (std::size_t l = 0; l < k; ++l) {
    const double av = a[l * m + i];
    const double* brow = b + l * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void matmul_nt_acc_row(const double* arow, const double* b, double* c,
                              std::size_t k, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b + j * k;
    double acc = 0.0;
    for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
    c[j] += acc;
  }
}

inline void sqdist_row(const double* xi, const double* y, double* drow,
                       std::size_t ny, std::size_t dim) {
  for (std::size_t j = 0; j < ny; ++j) {
    const double* yj = y + j * dim;
    double acc = 0.0;
    for (std::size_t l = 0; l < dim; ++l) {
      const double diff = xi[l] - yj[l];
      acc += diff * diff;
    }
    drow[j] = acc;
  }
}

}  // namespace

void matmul_nn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    matmul_nn_row(a + i * k, b, c + i * n, k, n);
  }
}

void matmul_nn_omp(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    matmul_nn_row(a + i * k, b, c + i * n, k, n);
  }
}

void matmul_tn_acc_serial(const double* a, const double* b, double* c,
                          std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    matmul_tn_acc_row(a, b, c + i * n, i, m, k, n);
  }
}

void matmul_tn_acc_omp(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    matmul_tn_acc_row(a, b, c + i * n, i, m, k, n);
  }
}

void matmul_nt_acc_serial(const double* a, const double* b, double* c,
                          std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    matmul_nt_acc_row(a + i * k, b, c + i * n, k, n);
  }
}

void matmul_nt_acc_omp(const double* a, const double* b, double* c,
                       std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    matmul_nt_acc_row(a + i * k, b, c + i * n, k, n);
  }
}

void pairwise_sqdist_serial(const double* x, const double* y, double* d,
                            std::size_t nx, std::size_t ny, std::size_t dim) {
  for (std::size_t i = 0; i < nx; ++i) {
    sqdist_row(x + i * dim, y, d + i * ny, ny, dim);
  }
}

void pairwise_sqdist_omp(const double* x, const double* y, double* d,
                         std::size_t nx, std::size_t ny, std::size_t dim) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < nx; ++i) {
    sqdist_row(x + i * dim, y, d + i * ny, ny, dim);
  }
}

void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelMinWork && m > 1) {
    matmul_nn_omp(a, b, c, m, k, n);
  } else {
    matmul_nn_serial(a, b, c, m, k, n);
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelMinWork && m > 1) {
    matmul_tn_acc_omp(a, b, c, m, k, n);
  } else {
    matmul_tn_acc_serial(a, b, c, m, k, n);
  }
}

void matmul_nt_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
  if (m * k * n >= kParallelMinWork && m > 1) {
    matmul_nt_acc_omp(a, b, c, m, k, n);
  } else {
    matmul_nt_acc_serial(a, b, c, m, k, n);
  }
}

void pairwise_sqdist(const double* x, const double* y, double* d,
                     std::size_t nx, std::size_t ny, std::size_t dim) {
  if (nx * ny * dim >= kParallelMinWork && nx > 1) {
    pairwise_sqdist_omp(x, y, d, nx, ny, dim);
  } else {
    pairwise_sqdist_serial(x, y, d, nx, ny, dim);
  }
}

}  // namespace abmc::kernels
