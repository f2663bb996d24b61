#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Inner-loop arithmetic for the Volterra layers. Every kernel has a scalar
// reference implementation; wider variants are picked at runtime from what
// the CPU reports and must agree with the reference up to summation order.
namespace vnn::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = M x, M row-major rows x cols
  void (*gemv)(const double* m, const double* x, double* y, std::size_t rows, std::size_t cols);
  // y += M^T x
  void (*gemv_t_acc)(const double* m, const double* x, double* y, std::size_t rows, std::size_t cols);
  // M += alpha x y^T
  void (*ger)(double alpha, const double* x, const double* y, double* m, std::size_t rows, std::size_t cols);
  // x^T M x for square M (n x n)
  double (*quad_form)(const double* m, const double* x, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_table();

// Best ISA the running CPU supports (honours VNN_SIMD=scalar).
Isa detect_isa();
// Pins the active table; throws DomainError if `isa` is unavailable.
void set_active_isa(Isa isa);
Isa active_isa();
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace vnn::simd
