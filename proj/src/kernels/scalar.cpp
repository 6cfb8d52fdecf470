#include <cmath>
#include <numbers>

#include "ebm/kernels.hpp"

namespace ebm::kernels::scalar {

void fwht(double* data, std::size_t n) {
  for (std::size_t h = 1; h < n; h <<= 1) {
    for (std::size_t block = 0; block < n; block += 2 * h) {
      for (std::size_t k = block; k < block + h; ++k) {
        const double a = data[k];
        const double b = data[k + h];
        data[k] = a + b;
        data[k + h] = a - b;
      }
    }
  }
}

void add_scaled(double* dst, const double* src, const double* row, double scale, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const double t = scale * row[k];
    dst[k] = src[k] + t;
  }
}

// ln cosh x = |x| + log1p(exp(-2|x|)) - ln 2 is overflow-free but cancels
// for small |x|; there -log1p(-tanh^2 x) / 2 keeps full relative accuracy.
inline constexpr double kSmall = 0.5;

void log_cosh(const double* x, double* out, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const double a = std::fabs(x[k]);
    if (a < kSmall) {
      const double t = std::tanh(a);
      out[k] = -0.5 * std::log1p(-(t * t));
    } else {
      out[k] = (a + std::log1p(std::exp(-2.0 * a))) - std::numbers::ln2;
    }
  }
}

void log_cosh_tanh(const double* x, double* lc, double* th, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    const double a = std::fabs(x[k]);
    const double t = std::tanh(x[k]);
    lc[k] = a < kSmall ? -0.5 * std::log1p(-(t * t)) : (a + std::log1p(std::exp(-2.0 * a))) - std::numbers::ln2;
    th[k] = t;
  }
}

}  // namespace ebm::kernels::scalar
