#include "stratus/kernels.hpp"

#include <cstdlib>
#include <cstring>

#if defined(__x86_64__) || defined(_M_X64)
#include <cpuid.h>
#endif

namespace stratus::kern {

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
    unsigned eax, ebx, ecx, edx;
    if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
    const bool fma = (ecx & (1u << 12)) != 0;
    const bool osxsave = (ecx & (1u << 27)) != 0;
    if (!fma || !osxsave) return false;
    if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
    return (ebx & (1u << 5)) != 0;  // AVX2
#else
    return false;
#endif
}

struct Selection {
    const KernelOps* ops;
    const char* name;
};

Selection detect() {
    const char* want = std::getenv("STRATUS_KERNELS");
#if defined(__x86_64__) || defined(_M_X64)
    const bool avx2_ok = cpu_has_avx2_fma();
    if (want && std::strcmp(want, "scalar") == 0) return {&scalar_ops, "scalar"};
    if (want && std::strcmp(want, "avx2") == 0 && avx2_ok) return {&avx2_ops, "avx2"};
    if (!want && avx2_ok) return {&avx2_ops, "avx2"};
#else
    (void)want;
#endif
    return {&scalar_ops, "scalar"};
}

Selection g_active = {nullptr, nullptr};

} // namespace

const KernelOps& active() {
    if (!g_active.ops) g_active = detect();
    return *g_active.ops;
}

const char* active_name() {
    if (!g_active.ops) g_active = detect();
    return g_active.name;
}

void set_active(const KernelOps& ops, const char* name) { g_active = {&ops, name}; }

} // namespace stratus::kern
