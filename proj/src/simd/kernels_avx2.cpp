// Compiled with -mavx2 -mfma. Keep this file free of inline library code
// (std::max, std::abs, ...) so no AVX-encoded copy of a shared inline
// function can leak into the rest of the program through the linker.

#include <immintrin.h>

#include "randinf/simd/kernels.hpp"

namespace randinf::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

inline __m256d vabs(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

double sum(const double* x, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
  }
  for (; i + 4 <= n; i += 4) a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_sq_dev(const double* x, std::size_t n, double mean) {
  const __m256d m = _mm256_set1_pd(mean);
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), m);
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), m);
    a0 = _mm256_fmadd_pd(d0, d0, a0);
    a1 = _mm256_fmadd_pd(d1, d1, a1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), m);
    a0 = _mm256_fmadd_pd(d, d, a0);
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) {
    const double d = x[i] - mean;
    s += d * d;
  }
  return s;
}

double cross_dev(const double* x, double mx, const double* y, double my, std::size_t n) {
  const __m256d vx = _mm256_set1_pd(mx), vy = _mm256_set1_pd(my);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), vx), _mm256_sub_pd(_mm256_loadu_pd(y + i), vy), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += (x[i] - mx) * (y[i] - my);
  return s;
}

double sum_abs_cubed(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = vabs(_mm256_loadu_pd(x + i));
    acc = _mm256_fmadd_pd(_mm256_mul_pd(a, a), a, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double a = __builtin_fabs(x[i]);
    s += a * a * a;
  }
  return s;
}

double sum_pow(const double* x, std::size_t n, int r) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    __m256d p = v;
    for (int k = 1; k < r; ++k) p = _mm256_mul_pd(p, v);
    acc = _mm256_add_pd(acc, p);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    double p = x[i];
    for (int k = 1; k < r; ++k) p *= x[i];
    s += p;
  }
  return s;
}

double sum_sq_above(const double* x, std::size_t n, double threshold) {
  const __m256d t = _mm256_set1_pd(threshold);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d mask = _mm256_cmp_pd(vabs(v), t, _CMP_GT_OQ);
    acc = _mm256_add_pd(acc, _mm256_and_pd(mask, _mm256_mul_pd(v, v)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    if (__builtin_fabs(x[i]) > threshold) s += x[i] * x[i];
  }
  return s;
}

double max_abs(const double* x, std::size_t n) {
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) m = _mm256_max_pd(m, vabs(_mm256_loadu_pd(x + i)));
  double r = hmax(m);
  for (; i < n; ++i) {
    const double a = __builtin_fabs(x[i]);
    if (a > r) r = a;
  }
  return r;
}

void center(const double* x, const double* row_shift, double shift, double* out, std::size_t n) {
  const __m256d s = _mm256_set1_pd(shift);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(row_shift + i));
    _mm256_storeu_pd(out + i, _mm256_sub_pd(v, s));
  }
  for (; i < n; ++i) out[i] = x[i] - row_shift[i] - shift;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void add_squares(const double* x, double* acc, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(v, v, _mm256_loadu_pd(acc + i)));
  }
  for (; i < n; ++i) acc[i] += x[i] * x[i];
}

double sum_pow_three_halves(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(v, _mm256_sqrt_pd(v), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * __builtin_sqrt(x[i]);
  return s;
}

double gather_sum(const double* m, std::size_t ld, const std::int32_t* cols, std::size_t n) {
  const __m256i vld = _mm256_set1_epi64x(static_cast<long long>(ld));
  __m256i row = _mm256_setr_epi64x(0, 1, 2, 3);
  const __m256i step = _mm256_set1_epi64x(4);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256i c = _mm256_cvtepi32_epi64(_mm_loadu_si128(reinterpret_cast<const __m128i*>(cols + i)));
    const __m256i offset = _mm256_add_epi64(row, _mm256_mul_epu32(c, vld));
    acc = _mm256_add_pd(acc, _mm256_i64gather_pd(m, offset, 8));
    row = _mm256_add_epi64(row, step);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += m[i + static_cast<std::size_t>(cols[i]) * ld];
  return s;
}

}  // namespace

const KernelTable* avx2_table_impl() {
  static const KernelTable table{
      Backend::avx2, sum,           dot,    sum_sq_dev, cross_dev,   sum_abs_cubed,        sum_pow,
      sum_sq_above,  max_abs,       center, axpy,       add_squares, sum_pow_three_halves, gather_sum,
  };
  return &table;
}

}  // namespace randinf::simd
