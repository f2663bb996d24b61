#include "vnn/simd/kernels.hpp"

namespace vnn::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* m, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(m + r * cols, x, cols);
}

void gemv_t_acc_scalar(const double* m, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(x[r], m + r * cols, y, cols);
}

void ger_scalar(double alpha, const double* x, const double* y, double* m, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy_scalar(alpha * x[r], y, m + r * cols, cols);
}

double quad_form_scalar(const double* m, const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t r = 0; r < n; ++r) s += x[r] * dot_scalar(m + r * n, x, n);
  return s;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar, dot_scalar, axpy_scalar, gemv_scalar,
                                 gemv_t_acc_scalar, ger_scalar, quad_form_scalar};
  return table;
}

}  // namespace vnn::simd
