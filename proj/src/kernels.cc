// SPDX-License-Identifier: Apache-2.0

#include "dpse/kernels.h"

#include <cstdlib>
#include <cstring>

namespace dpse::kernels {

const KernelTable* Avx2Table();

namespace {

bool CpuHasAvx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

}  // namespace

const KernelTable* Avx2() {
  static const KernelTable* table = CpuHasAvx2() ? Avx2Table() : nullptr;
  return table;
}

const KernelTable& Active() {
  static const KernelTable& table = [] () -> const KernelTable& {
    const char* forced = std::getenv("DPSE_SIMD");
    if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return Scalar();
    if (const KernelTable* avx = Avx2()) return *avx;
    return Scalar();
  }();
  return table;
}

}  // namespace dpse::kernels
