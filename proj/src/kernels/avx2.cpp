// AVX2/FMA variants of the kernels. Compiled with -mavx2 -mfma and only
// reached through the dispatch table after a runtime CPU check.

#include <immintrin.h>

#include <cmath>
#include <numbers>

#include "ebm/kernels.hpp"

namespace ebm::kernels::avx2 {
namespace {

// exp(y) and expm1(y) for y in [-708, 0]. Cody-Waite reduction y = k ln2 + r,
// |r| <= ln2/2, then a degree-13 Taylor polynomial for expm1(r).
struct ExpPair {
  __m256d exp;
  __m256d expm1;
};

inline ExpPair exp_nonpositive(__m256d y) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  y = _mm256_max_pd(y, lo);
  const __m256d log2e = _mm256_set1_pd(std::numbers::log2e);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d kd = _mm256_round_pd(_mm256_mul_pd(y, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(kd, ln2_hi, y);
  r = _mm256_fnmadd_pd(kd, ln2_lo, r);

  // q(r) = r + r^2/2! + ... + r^13/13!
  __m256d q = _mm256_set1_pd(1.0 / 6227020800.0);
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 479001600.0));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 39916800.0));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 3628800.0));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 362880.0));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 40320.0));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 5040.0));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 720.0));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 120.0));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 24.0));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0 / 6.0));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(0.5));
  q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(1.0));
  q = _mm256_mul_pd(q, r);

  // 2^k assembled directly in the exponent field; k >= -1022 after clamping.
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 2^52 + 2^51
  __m256i ki = _mm256_castpd_si256(_mm256_add_pd(kd, magic));
  ki = _mm256_sub_epi64(ki, _mm256_castpd_si256(magic));
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ki, _mm256_set1_epi64x(1023)), 52);
  const __m256d scale = _mm256_castsi256_pd(bits);

  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d e = _mm256_mul_pd(scale, _mm256_add_pd(one, q));
  const __m256d k_is_zero = _mm256_cmp_pd(kd, _mm256_setzero_pd(), _CMP_EQ_OQ);
  const __m256d em1 = _mm256_blendv_pd(_mm256_sub_pd(e, one), q, k_is_zero);
  return {e, em1};
}

// log1p(e) for e in [-0.25, 1]. log1p(e) = 2 atanh(t) with t = e / (2 + e), or
// ln 2 + 2 atanh((e - 1) / (e + 3)) above sqrt(2) - 1; either way |t| <= 0.1716.
inline __m256d log1p_unit(__m256d e) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d big = _mm256_cmp_pd(e, _mm256_set1_pd(std::numbers::sqrt2 - 1.0), _CMP_GT_OQ);
  const __m256d num = _mm256_blendv_pd(e, _mm256_sub_pd(e, one), big);
  const __m256d den = _mm256_blendv_pd(_mm256_add_pd(two, e), _mm256_add_pd(e, _mm256_set1_pd(3.0)), big);
  const __m256d t = _mm256_div_pd(num, den);
  const __m256d z = _mm256_mul_pd(t, t);
  __m256d p = _mm256_set1_pd(1.0 / 21.0);
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 19.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 17.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 15.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 13.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 11.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 9.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 7.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 5.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 3.0));
  p = _mm256_fmadd_pd(p, z, one);
  const __m256d atanh2 = _mm256_mul_pd(_mm256_add_pd(t, t), p);
  const __m256d offset = _mm256_and_pd(big, _mm256_set1_pd(std::numbers::ln2));
  return _mm256_add_pd(atanh2, offset);
}

inline __m256d abs_pd(__m256d x) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), x); }

inline void lc_th_block(__m256d x, __m256d* lc, __m256d* th) {
  const __m256d a = abs_pd(x);
  const ExpPair ep = exp_nonpositive(_mm256_mul_pd(_mm256_set1_pd(-2.0), a));
  // tanh|x| = -expm1(-2|x|) / (2 + expm1(-2|x|)).
  const __m256d mag =
      _mm256_div_pd(_mm256_sub_pd(_mm256_setzero_pd(), ep.expm1), _mm256_add_pd(_mm256_set1_pd(2.0), ep.expm1));
  if (lc != nullptr) {
    const __m256d large = _mm256_sub_pd(_mm256_add_pd(a, log1p_unit(ep.exp)), _mm256_set1_pd(std::numbers::ln2));
    // Below 0.5 the large-argument form cancels; use -log1p(-tanh^2) / 2.
    const __m256d small = _mm256_mul_pd(_mm256_set1_pd(-0.5),
                                        log1p_unit(_mm256_sub_pd(_mm256_setzero_pd(), _mm256_mul_pd(mag, mag))));
    *lc = _mm256_blendv_pd(large, small, _mm256_cmp_pd(a, _mm256_set1_pd(0.5), _CMP_LT_OQ));
  }
  if (th != nullptr) *th = _mm256_or_pd(mag, _mm256_and_pd(x, _mm256_set1_pd(-0.0)));
}

}  // namespace

void fwht(double* data, std::size_t n) {
  std::size_t h = 1;
  // The first two passes mix lanes inside a register; they are cheap enough
  // to leave scalar. Results stay bit-identical: each butterfly is one add
  // and one subtract regardless of vector width.
  for (; h < n && h < 4; h <<= 1) {
    for (std::size_t block = 0; block < n; block += 2 * h) {
      for (std::size_t k = block; k < block + h; ++k) {
        const double a = data[k];
        const double b = data[k + h];
        data[k] = a + b;
        data[k + h] = a - b;
      }
    }
  }
  for (; h < n; h <<= 1) {
    for (std::size_t block = 0; block < n; block += 2 * h) {
      for (std::size_t k = block; k < block + h; k += 4) {
        const __m256d a = _mm256_loadu_pd(data + k);
        const __m256d b = _mm256_loadu_pd(data + k + h);
        _mm256_storeu_pd(data + k, _mm256_add_pd(a, b));
        _mm256_storeu_pd(data + k + h, _mm256_sub_pd(a, b));
      }
    }
  }
}

void add_scaled(double* dst, const double* src, const double* row, double scale, std::size_t n) {
  const __m256d s = _mm256_set1_pd(scale);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    // Separate multiply and add to round exactly like the scalar loop.
    const __m256d t = _mm256_mul_pd(s, _mm256_loadu_pd(row + k));
    _mm256_storeu_pd(dst + k, _mm256_add_pd(_mm256_loadu_pd(src + k), t));
  }
  for (; k < n; ++k) {
    const double t = scale * row[k];
    dst[k] = src[k] + t;
  }
}

void log_cosh(const double* x, double* out, std::size_t n) {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m256d lc;
    lc_th_block(_mm256_loadu_pd(x + k), &lc, nullptr);
    _mm256_storeu_pd(out + k, lc);
  }
  if (k < n) {
    double in[4] = {0.0, 0.0, 0.0, 0.0};
    double res[4];
    for (std::size_t j = k; j < n; ++j) in[j - k] = x[j];
    __m256d lc;
    lc_th_block(_mm256_loadu_pd(in), &lc, nullptr);
    _mm256_storeu_pd(res, lc);
    for (std::size_t j = k; j < n; ++j) out[j] = res[j - k];
  }
}

void log_cosh_tanh(const double* x, double* lc, double* th, std::size_t n) {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    __m256d l, t;
    lc_th_block(_mm256_loadu_pd(x + k), &l, &t);
    _mm256_storeu_pd(lc + k, l);
    _mm256_storeu_pd(th + k, t);
  }
  if (k < n) {
    double in[4] = {0.0, 0.0, 0.0, 0.0};
    double rl[4], rt[4];
    for (std::size_t j = k; j < n; ++j) in[j - k] = x[j];
    __m256d l, t;
    lc_th_block(_mm256_loadu_pd(in), &l, &t);
    _mm256_storeu_pd(rl, l);
    _mm256_storeu_pd(rt, t);
    for (std::size_t j = k; j < n; ++j) {
      lc[j] = rl[j - k];
      th[j] = rt[j - k];
    }
  }
}

}  // namespace ebm::kernels::avx2
