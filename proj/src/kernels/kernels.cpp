#include "mvf/kernels.hpp"

#include <cstring>
#include <stdexcept>

namespace mvf::kernels {

namespace {
Backend g_requested = Backend::Auto;
}

bool avx2_supported() {
#if defined(MVF_BUILD_AVX2) && (defined(__x86_64__) || defined(_M_X64))
  static const bool ok =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

#if !defined(MVF_BUILD_AVX2)
const Table* avx2_table() { return nullptr; }
#endif

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_table()) {
    throw std::invalid_argument("avx2 kernels not available on this build/CPU");
  }
  g_requested = b;
}

Backend requested_backend() { return g_requested; }

const Table& active() {
  switch (g_requested) {
    case Backend::Scalar:
      return scalar_table();
    case Backend::Avx2:
      return *avx2_table();
    case Backend::Auto:
    default: {
      const Table* t = avx2_table();
      return t ? *t : scalar_table();
    }
  }
}

Backend backend_from_name(const char* name) {
  if (std::strcmp(name, "auto") == 0) return Backend::Auto;
  if (std::strcmp(name, "scalar") == 0) return Backend::Scalar;
  if (std::strcmp(name, "avx2") == 0) return Backend::Avx2;
  throw std::invalid_argument(std::string("unknown kernel backend: ") + name);
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    default:
      return "auto";
  }
}

}  // namespace mvf::kernels
