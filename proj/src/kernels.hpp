#pragma once

// Batched MLP kernels shared by inference and training. Everything here is
// compiled only inside the library so that scalar and vector code paths see
// identical floating-point contraction.

#include <cmath>
#include <cstddef>
#include <vector>

namespace sci::kernel {

template <typename T>
struct Trig;

template <>
struct Trig<double> {
  static constexpr double kRound = 6755399441055744.0;  // 1.5 * 2^52
  static constexpr double kP1 = 1.57079625129699707031E0;
  static constexpr double kP2 = 7.54978941586159635335E-8;
  static constexpr double kP3 = 5.39030285815811905290E-15;
};

template <>
struct Trig<float> {
  static constexpr float kRound = 12582912.0f;  // 1.5 * 2^23
  static constexpr float kP1 = 1.5703125f;
  static constexpr float kP2 = 4.837512969970703125e-4f;
  static constexpr float kP3 = 7.54978995489188216e-8f;
};

// Branch-free sin/cos: Cody-Waite reduction by pi/2, minimax polynomials on
// [-pi/4, pi/4], quadrant fix-up by arithmetic selects. Vectorizes under
// `omp simd` and gives the same bits in scalar and vector form.
template <typename T>
inline void sincos(T x, T& s, T& c) {
  using K = Trig<T>;
  const T q = (x * T(0.63661977236758134308) + K::kRound) - K::kRound;
  const T r = ((x - q * K::kP1) - q * K::kP2) - q * K::kP3;
  const T z = r * r;
  T ps = T(1.58962301576546568060E-10);
  ps = ps * z - T(2.50507477628578072866E-8);
  ps = ps * z + T(2.75573136213857245213E-6);
  ps = ps * z - T(1.98412698295895385996E-4);
  ps = ps * z + T(8.33333333332211858878E-3);
  ps = ps * z - T(1.66666666666666307295E-1);
  const T sr = r + r * z * ps;
  T pc = T(-1.13585365213876817300E-11);
  pc = pc * z + T(2.08757008419747316778E-9);
  pc = pc * z - T(2.75573141792967388112E-7);
  pc = pc * z + T(2.48015872888517045348E-5);
  pc = pc * z - T(1.38888888888730564116E-3);
  pc = pc * z + T(4.16666666666665929218E-2);
  const T cr = T(1) - T(0.5) * z + z * z * pc;
  const T quad = q - T(4) * std::floor(q * T(0.25));
  const T odd = quad - T(2) * std::floor(quad * T(0.5));
  const T s0 = (T(1) - odd) * sr + odd * cr;
  const T c0 = (T(1) - odd) * cr + odd * sr;
  const T qc = quad + T(1);
  s = (T(1) - T(2) * std::floor(quad * T(0.5))) * s0;
  c = (T(1) - T(2) * std::floor((qc - T(4) * std::floor(qc * T(0.25))) * T(0.5))) * c0;
}

// Z (rows x n) = W (rows x cols) X (cols x n) + b, feature-major.
template <typename T>
inline void affine(const T* W, const T* b, std::size_t rows, std::size_t cols, const T* X,
                   std::size_t n, T* Z) {
  for (std::size_t o = 0; o < rows; ++o) {
    T* z = Z + o * n;
    const T bo = b[o];
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) z[j] = bo;
    for (std::size_t i = 0; i < cols; ++i) {
      const T w = W[o * cols + i];
      const T* x = X + i * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) z[j] += w * x[j];
    }
  }
}

// A = sin(w0 Z); optional C = cos(w0 Z).
template <typename T>
inline void sine(const T* Z, std::size_t count, T w0, T* A, T* C) {
  if (C) {
#pragma omp simd
    for (std::size_t j = 0; j < count; ++j) sincos(w0 * Z[j], A[j], C[j]);
  } else {
#pragma omp simd
    for (std::size_t j = 0; j < count; ++j) {
      T cc;
      sincos(w0 * Z[j], A[j], cc);
    }
  }
}

struct LayerShape {
  std::size_t in = 0, out = 0;
  std::size_t w_off = 0, b_off = 0;  // offsets into the flat parameter vector
};

// Forward over one tile of points. `coords` is point-major (n x in_dim);
// results go point-major into `out` (n x out_dim). `acts` receives the
// feature-major activation of every layer; `cosv` (optional) the cosines.
template <typename T>
void forward_tile(const std::vector<LayerShape>& layers, const T* params, T w0, const T* coords,
                  std::size_t n, T* out, std::vector<std::vector<T>>& acts,
                  std::vector<std::vector<T>>* cosv) {
  const std::size_t depth = layers.size();
  acts.resize(depth + 1);
  if (cosv) cosv->resize(depth);
  const std::size_t in_dim = layers.front().in;
  acts[0].resize(in_dim * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < in_dim; ++i) acts[0][i * n + j] = coords[j * in_dim + i];
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& L = layers[l];
    auto& z = acts[l + 1];
    z.resize(L.out * n);
    affine(params + L.w_off, params + L.b_off, L.out, L.in, acts[l].data(), n, z.data());
    if (l + 1 < depth) {
      T* c = nullptr;
      if (cosv) {
        (*cosv)[l].resize(L.out * n);
        c = (*cosv)[l].data();
      }
      sine(z.data(), L.out * n, w0, z.data(), c);
    }
  }
  const auto& last = acts[depth];
  const std::size_t od = layers.back().out;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t o = 0; o < od; ++o) out[j * od + o] = last[o * n + j];
}

inline constexpr std::size_t kTile = 256;

}  // namespace sci::kernel
