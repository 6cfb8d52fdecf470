#include <atomic>
#include <string>

#include "ebm/error.hpp"
#include "ebm/kernels.hpp"

namespace ebm::kernels {
namespace {

constexpr KernelTable kScalarTable{
    &scalar::fwht,
    &scalar::add_scaled,
    &scalar::log_cosh,
    &scalar::log_cosh_tanh,
};

#if defined(EBM_WITH_AVX2)
constexpr KernelTable kAvx2Table{
    &avx2::fwht,
    &avx2::add_scaled,
    &avx2::log_cosh,
    &avx2::log_cosh_tanh,
};
#endif

Isa detect_best() { return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

std::atomic<Isa>& active_slot() {
  static std::atomic<Isa> slot{detect_best()};
  return slot;
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(EBM_WITH_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
#if defined(EBM_WITH_AVX2)
  if (isa == Isa::avx2) {
    if (!isa_supported(Isa::avx2)) throw DomainError("AVX2 kernels requested on a CPU without AVX2/FMA");
    return kAvx2Table;
  }
#else
  if (isa == Isa::avx2) throw DomainError("library built without AVX2 kernels");
#endif
  return kScalarTable;
}

Isa active_isa() { return active_slot().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw DomainError("instruction set not supported here: " + std::string(isa_name(isa)));
  }
  active_slot().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "auto") return detect_best();
  throw ConfigError("unknown instruction set '" + std::string(name) + "' (expected scalar|avx2|auto)");
}

void fwht(std::span<double> data) {
  const std::size_t n = data.size();
  if (n == 0 || (n & (n - 1)) != 0) throw DimensionError("fwht: length must be a power of two");
  table(active_isa()).fwht(data.data(), n);
}

void add_scaled(std::span<double> dst, std::span<const double> src, std::span<const double> row,
                double scale) {
  if (dst.size() != src.size() || dst.size() != row.size()) {
    throw DimensionError("add_scaled: length mismatch");
  }
  table(active_isa()).add_scaled(dst.data(), src.data(), row.data(), scale, dst.size());
}

void log_cosh(std::span<const double> x, std::span<double> out) {
  if (x.size() != out.size()) throw DimensionError("log_cosh: length mismatch");
  table(active_isa()).log_cosh(x.data(), out.data(), x.size());
}

void log_cosh_tanh(std::span<const double> x, std::span<double> lc, std::span<double> th) {
  if (x.size() != lc.size() || x.size() != th.size()) {
    throw DimensionError("log_cosh_tanh: length mismatch");
  }
  table(active_isa()).log_cosh_tanh(x.data(), lc.data(), th.data(), x.size());
}

}  // namespace ebm::kernels
