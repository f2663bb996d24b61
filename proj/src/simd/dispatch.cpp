#include <atomic>
#include <cstdlib>
#include <string>

#include "vnn/errors.hpp"
#include "vnn/simd/kernels.hpp"

namespace vnn::simd {

#if defined(VNN_HAVE_AVX2)
const KernelTable& avx2_table_impl();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(VNN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return &scalar_table();
    case Isa::avx2:
      return avx2_table();
  }
  return nullptr;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{table_for(detect_isa())};
  return current;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

const KernelTable* avx2_table() {
#if defined(VNN_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

Isa detect_isa() {
  if (const char* env = std::getenv("VNN_SIMD"); env && std::string(env) == "scalar") return Isa::scalar;
  return avx2_table() ? Isa::avx2 : Isa::scalar;
}

void set_active_isa(Isa isa) {
  const KernelTable* t = table_for(isa);
  if (!t) throw DomainError("kernel variant '" + std::string(isa_name(isa)) + "' is not available on this CPU");
  slot().store(t);
}

Isa active_isa() { return slot().load()->isa; }

const KernelTable& active() { return *slot().load(); }

}  // namespace vnn::simd
