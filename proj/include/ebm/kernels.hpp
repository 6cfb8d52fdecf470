#pragma once

// Data-parallel inner loops with a scalar reference implementation and an
// AVX2 variant chosen at runtime. Every variant is tested for equivalence
// against the scalar one (bit-identical for fwht and add_scaled, within a
// few ulp for the transcendental kernels).

#include <cstddef>
#include <span>
#include <string_view>

namespace ebm::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  // In-place unnormalised Walsh-Hadamard butterfly over n = 2^k values.
  void (*fwht)(double* data, std::size_t n);
  // dst[k] = src[k] + scale * row[k]
  void (*add_scaled)(double* dst, const double* src, const double* row, double scale,
                     std::size_t n);
  // out[k] = ln cosh(x[k])
  void (*log_cosh)(const double* x, double* out, std::size_t n);
  // lc[k] = ln cosh(x[k]), th[k] = tanh(x[k])
  void (*log_cosh_tanh)(const double* x, double* lc, double* th, std::size_t n);
};

bool isa_supported(Isa isa);
const KernelTable& table(Isa isa);

// The variant used by the library. Defaults to the widest supported ISA.
Isa active_isa();
void set_active_isa(Isa isa);  // throws DomainError if unsupported
std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);  // "scalar" | "avx2" | "auto"

void fwht(std::span<double> data);
void add_scaled(std::span<double> dst, std::span<const double> src, std::span<const double> row,
                double scale);
void log_cosh(std::span<const double> x, std::span<double> out);
void log_cosh_tanh(std::span<const double> x, std::span<double> lc, std::span<double> th);

namespace scalar {
void fwht(double* data, std::size_t n);
void add_scaled(double* dst, const double* src, const double* row, double scale, std::size_t n);
void log_cosh(const double* x, double* out, std::size_t n);
void log_cosh_tanh(const double* x, double* lc, double* th, std::size_t n);
}  // namespace scalar

#if defined(EBM_WITH_AVX2)
namespace avx2 {
void fwht(double* data, std::size_t n);
void add_scaled(double* dst, const double* src, const double* row, double scale, std::size_t n);
void log_cosh(const double* x, double* out, std::size_t n);
void log_cosh_tanh(const double* x, double* lc, double* th, std::size_t n);
}  // namespace avx2
#endif

}  // namespace ebm::kernels
