#pragma once

/// Differentiable tensor operations used by the network builders. Every op
/// creates a tape node holding the forward result plus a closure that scatters
/// gradients to its parents. Feature maps are [C, H, W] row-major; vectors are
/// flat. Convolutions use im2col plus a dense matrix product so the only tuned
/// kernel in the hot path is the GEMM.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <vector>

#include "sinenet/autograd.hpp"
#include "sinenet/gemm.hpp"
#include "sinenet/nn_types.hpp"

#if defined(__AVX512F__) && defined(__GLIBC__)
#include <immintrin.h>
extern "C" __m512 _ZGVeN16v_tanhf(__m512);
#define SINENET_HAVE_VEC_TANHF 1
#endif

namespace sinenet {

namespace detail {

/// In-place tanh over a contiguous range. The float instantiation goes
/// through the 16-lane vector math routine when available; scalar libm
/// otherwise (and always for double, the reference-precision path).
template <typename T>
inline void tanh_inplace(T* v, size_t n) {
  for (size_t i = 0; i < n; ++i) v[i] = std::tanh(v[i]);
}

#ifdef SINENET_HAVE_VEC_TANHF
/// The tail goes through the same routine under a mask so a value's result
/// never depends on its position in the buffer.
template <>
inline void tanh_inplace<float>(float* v, size_t n) {
  size_t i = 0;
  for (; i + 16 <= n; i += 16)
    _mm512_storeu_ps(v + i, _ZGVeN16v_tanhf(_mm512_loadu_ps(v + i)));
  if (i < n) {
    const __mmask16 m = static_cast<__mmask16>((1u << (n - i)) - 1u);
    _mm512_mask_storeu_ps(v + i, m, _ZGVeN16v_tanhf(_mm512_maskz_loadu_ps(m, v + i)));
  }
}
#endif

/// dst[j] = src[(j + off) mod W] for circular mode; zeros mode writes 0 where
/// j + off falls outside [0, W). Segmented copies keep this at memcpy speed.
template <typename T>
inline void copy_row_shifted(const T* src, T* dst, int w, int off, bool circular) {
  if (circular) {
    int o = ((off % w) + w) % w;
    if (o == 0) {
      std::memcpy(dst, src, sizeof(T) * static_cast<size_t>(w));
      return;
    }
    std::memcpy(dst, src + o, sizeof(T) * static_cast<size_t>(w - o));
    std::memcpy(dst + (w - o), src, sizeof(T) * static_cast<size_t>(o));
    return;
  }
  if (off >= w || off <= -w) {
    std::fill(dst, dst + w, T(0));
    return;
  }
  if (off >= 0) {
    int n = w - off;
    std::memcpy(dst, src + off, sizeof(T) * static_cast<size_t>(n));
    std::fill(dst + n, dst + w, T(0));
  } else {
    int s = -off;
    std::fill(dst, dst + s, T(0));
    std::memcpy(dst + s, src, sizeof(T) * static_cast<size_t>(w - s));
  }
}

/// dst[(j + off) mod W] += src[j]; zeros mode drops out-of-range taps.
template <typename T>
inline void add_row_shifted(const T* src, T* dst, int w, int off, bool circular) {
  if (circular) {
    int o = ((off % w) + w) % w;
    for (int j = 0; j < w - o; ++j) dst[j + o] += src[j];
    for (int j = w - o; j < w; ++j) dst[j + o - w] += src[j];
    return;
  }
  if (off >= w || off <= -w) return;
  if (off >= 0) {
    for (int j = 0; j < w - off; ++j) dst[j + off] += src[j];
  } else {
    for (int j = -off; j < w; ++j) dst[j + off] += src[j];
  }
}

inline int wrap_index(int i, int n) { return ((i % n) + n) % n; }
inline int clamp_index(int i, int n) { return std::min(std::max(i, 0), n - 1); }

/// Unfolds x [C,H,W] into col [C*k*k, H*W] for a stride-1 dilated conv whose
/// padding keeps the spatial size fixed.
template <typename T>
void im2col(const T* x, T* col, int c_in, int h, int w, int k, int dil, bool circular) {
  const int half = k / 2;
  const size_t plane = static_cast<size_t>(h) * w;
  for (int c = 0; c < c_in; ++c) {
    const T* xc = x + static_cast<size_t>(c) * plane;
    for (int ky = 0; ky < k; ++ky) {
      const int off_i = (ky - half) * dil;
      for (int kx = 0; kx < k; ++kx) {
        const int off_j = (kx - half) * dil;
        T* row = col + (static_cast<size_t>((c * k + ky) * k + kx)) * plane;
        for (int i = 0; i < h; ++i) {
          int si = i + off_i;
          T* dst = row + static_cast<size_t>(i) * w;
          if (circular) {
            copy_row_shifted(xc + static_cast<size_t>(wrap_index(si, h)) * w, dst, w, off_j, true);
          } else if (si < 0 || si >= h) {
            std::fill(dst, dst + w, T(0));
          } else {
            copy_row_shifted(xc + static_cast<size_t>(si) * w, dst, w, off_j, false);
          }
        }
      }
    }
  }
}

/// Transpose of im2col: scatters col-space gradients back onto the input grid.
template <typename T>
void col2im_add(const T* col, T* x, int c_in, int h, int w, int k, int dil, bool circular) {
  const int half = k / 2;
  const size_t plane = static_cast<size_t>(h) * w;
  for (int c = 0; c < c_in; ++c) {
    T* xc = x + static_cast<size_t>(c) * plane;
    for (int ky = 0; ky < k; ++ky) {
      const int off_i = (ky - half) * dil;
      for (int kx = 0; kx < k; ++kx) {
        const int off_j = (kx - half) * dil;
        const T* row = col + (static_cast<size_t>((c * k + ky) * k + kx)) * plane;
        for (int i = 0; i < h; ++i) {
          int si = i + off_i;
          const T* src = row + static_cast<size_t>(i) * w;
          if (circular) {
            add_row_shifted(src, xc + static_cast<size_t>(wrap_index(si, h)) * w, w, off_j, true);
          } else if (si >= 0 && si < h) {
            add_row_shifted(src, xc + static_cast<size_t>(si) * w, w, off_j, false);
          }
        }
      }
    }
  }
}

/// Reusable per-thread workspaces handed out as raw storage: unlike a
/// vector resize, regrowth leaves the contents uninitialized, so callers
/// must fully overwrite what they use.
template <typename T>
T* scratch_a(size_t n) {
  thread_local std::unique_ptr<T[]> buf;
  thread_local size_t cap = 0;
  if (n > cap) {
    buf = std::make_unique_for_overwrite<T[]>(n);
    cap = n;
  }
  return buf.get();
}
template <typename T>
T* scratch_b(size_t n) {
  thread_local std::unique_ptr<T[]> buf;
  thread_local size_t cap = 0;
  if (n > cap) {
    buf = std::make_unique_for_overwrite<T[]>(n);
    cap = n;
  }
  return buf.get();
}

}  // namespace detail

/// Stride-1 2D convolution with same-size output. x [C,H,W], w [Co,C,k,k],
/// b [Co]. Dilation scales both the tap offsets and the implied padding, so a
/// dilated model acts independently on each of the dil*dil subgrids.
template <typename T>
Value<T> conv2d(const Value<T>& x, const Value<T>& w, const Value<T>& b, PadMode pad,
                int dilation = 1) {
  const auto& xs = x->val.shape;
  const auto& ws = w->val.shape;
  if (xs.size() != 3 || ws.size() != 4) throw std::invalid_argument("conv2d: bad ranks");
  if (ws[1] != xs[0]) throw std::invalid_argument("conv2d: channel mismatch");
  if (ws[2] != ws[3]) throw std::invalid_argument("conv2d: kernel must be square");
  const int c_in = xs[0], h = xs[1], wd = xs[2];
  const int c_out = ws[0], k = ws[2];
  if (b->val.shape != std::vector<int>{c_out}) throw std::invalid_argument("conv2d: bias shape");
  const bool circular = pad == PadMode::circular;
  const size_t plane = static_cast<size_t>(h) * wd;
  const int kk = c_in * k * k;

  auto out = make_node<T>({c_out, h, wd}, {x, w, b}, "conv2d");
  // The column matrix built for the forward GEMM is kept alive for the
  // weight-gradient GEMM when a backward pass will need it.
  std::shared_ptr<T[]> col_keep;
  {
    const T* col_ptr;
    if (k == 1) {
      col_ptr = x->val.data.data();
    } else if (out->needs_grad && w->needs_grad) {
      col_keep = std::shared_ptr<T[]>(new T[static_cast<size_t>(kk) * plane]);
      detail::im2col(x->val.data.data(), col_keep.get(), c_in, h, wd, k, dilation, circular);
      col_ptr = col_keep.get();
    } else {
      T* col = detail::scratch_a<T>(static_cast<size_t>(kk) * plane);
      detail::im2col(x->val.data.data(), col, c_in, h, wd, k, dilation, circular);
      col_ptr = col;
    }
    gemm_rm(c_out, static_cast<int>(plane), kk, w->val.data.data(), col_ptr,
            out->val.data.data(), false);
    for (int co = 0; co < c_out; ++co) {
      T* row = out->val.data.data() + static_cast<size_t>(co) * plane;
      const T bv = b->val.data[co];
      for (size_t s = 0; s < plane; ++s) row[s] += bv;
    }
  }
  if (out->needs_grad) {
    out->backprop = [x, w, b, dilation, c_in, h, wd, c_out, k, kk, plane, circular,
                     col_keep](Node<T>& self) {
      const T* g = self.grad.data();
      if (b->needs_grad) {
        b->ensure_grad();
        for (int co = 0; co < c_out; ++co) {
          T acc = 0;
          const T* row = g + static_cast<size_t>(co) * plane;
          for (size_t s = 0; s < plane; ++s) acc += row[s];
          b->grad[co] += acc;
        }
      }
      if (w->needs_grad) {
        w->ensure_grad();
        const T* col_ptr = k == 1 ? x->val.data.data() : col_keep.get();
        gemm_a_bt(c_out, kk, static_cast<int>(plane), g, col_ptr, w->grad.data(), true);
      }
      if (x->needs_grad) {
        x->ensure_grad();
        if (k == 1) {
          gemm_at_b(kk, static_cast<int>(plane), c_out, w->val.data.data(), g, x->grad.data(),
                    true);
        } else {
          T* cg = detail::scratch_b<T>(static_cast<size_t>(kk) * plane);
          gemm_at_b(kk, static_cast<int>(plane), c_out, w->val.data.data(), g, cg, false);
          detail::col2im_add(cg, x->grad.data(), c_in, h, wd, k, dilation, circular);
        }
      }
    };
  }
  return out;
}

/// 2x2 mean pooling, halving each spatial side. With dilation r the pool acts
/// on each of the r*r phase subgrids separately: output site p on a given axis
/// averages input sites 2r*(p/r) + p%r and the same plus r.
template <typename T>
Value<T> avg_pool2(const Value<T>& x, int dilation = 1) {
  const auto& xs = x->val.shape;
  if (xs.size() != 3) throw std::invalid_argument("avg_pool2: bad rank");
  const int c = xs[0], h = xs[1], w = xs[2];
  const int r = dilation;
  if (h % (2 * r) != 0 || w % (2 * r) != 0)
    throw std::invalid_argument("avg_pool2: spatial dims must be divisible by 2*dilation");
  const int ho = h / 2, wo = w / 2;
  auto out = make_node<T>({c, ho, wo}, {x}, "avg_pool2");
  const size_t plane_in = static_cast<size_t>(h) * w;
  const size_t plane_out = static_cast<size_t>(ho) * wo;
  auto base = [r](int p) { return 2 * r * (p / r) + (p % r); };
  for (int cc = 0; cc < c; ++cc) {
    const T* xi = x->val.data.data() + static_cast<size_t>(cc) * plane_in;
    T* yo = out->val.data.data() + static_cast<size_t>(cc) * plane_out;
    for (int p = 0; p < ho; ++p) {
      const int bi = base(p);
      const T* r0 = xi + static_cast<size_t>(bi) * w;
      const T* r1 = xi + static_cast<size_t>(bi + r) * w;
      T* orow = yo + static_cast<size_t>(p) * wo;
      for (int q = 0; q < wo; ++q) {
        const int bj = base(q);
        orow[q] = T(0.25) * (r0[bj] + r0[bj + r] + r1[bj] + r1[bj + r]);
      }
    }
  }
  if (out->needs_grad) {
    out->backprop = [x, c, h, w, ho, wo, r, plane_in, plane_out, base](Node<T>& self) {
      if (!x->needs_grad) return;
      x->ensure_grad();
      for (int cc = 0; cc < c; ++cc) {
        T* xg = x->grad.data() + static_cast<size_t>(cc) * plane_in;
        const T* g = self.grad.data() + static_cast<size_t>(cc) * plane_out;
        for (int p = 0; p < ho; ++p) {
          const int bi = base(p);
          T* r0 = xg + static_cast<size_t>(bi) * w;
          T* r1 = xg + static_cast<size_t>(bi + r) * w;
          const T* grow = g + static_cast<size_t>(p) * wo;
          for (int q = 0; q < wo; ++q) {
            const int bj = base(q);
            const T gv = T(0.25) * grow[q];
            r0[bj] += gv;
            r0[bj + r] += gv;
            r1[bj] += gv;
            r1[bj + r] += gv;
          }
        }
      }
    };
  }
  return out;
}

namespace detail {

/// Scale-2 bicubic taps (a = -0.75) at half-pixel-aligned sample points.
/// Even outputs sit 0.25 cells before source t, odd outputs 0.25 cells after,
/// so each output mixes four consecutive sources with one of two weight sets.
template <typename T>
struct Bicubic2 {
  static constexpr T w175 = T(-0.03515625);
  static constexpr T w075 = T(0.26171875);
  static constexpr T w025 = T(0.87890625);
  static constexpr T w125 = T(-0.10546875);
  /// Returns the first source tap for output position p (subgrid coords) and
  /// fills w[4] for taps base..base+3.
  static int taps(int p, T wgt[4]) {
    const int t = p / 2;
    if (p % 2 == 0) {
      wgt[0] = w175;
      wgt[1] = w075;
      wgt[2] = w025;
      wgt[3] = w125;
      return t - 2;
    }
    wgt[0] = w125;
    wgt[1] = w025;
    wgt[2] = w075;
    wgt[3] = w175;
    return t - 1;
  }
};

}  // namespace detail

/// Doubles each spatial side with separable bicubic interpolation (a = -0.75)
/// on half-pixel-aligned sample points. Circular mode wraps source taps;
/// zeros mode clamps them to the edge. With dilation r each of the r*r phase
/// subgrids is upsampled independently.
template <typename T>
Value<T> upsample_bicubic2(const Value<T>& x, PadMode pad, int dilation = 1) {
  const auto& xs = x->val.shape;
  if (xs.size() != 3) throw std::invalid_argument("upsample_bicubic2: bad rank");
  const int c = xs[0], h = xs[1], w = xs[2];
  const int r = dilation;
  if (h % r != 0 || w % r != 0)
    throw std::invalid_argument("upsample_bicubic2: spatial dims must be divisible by dilation");
  const bool circular = pad == PadMode::circular;
  const int ho = 2 * h, wo = 2 * w;
  const int h_sub = h / r, w_sub = w / r;

  // Per-axis tap tables: for each output index, the four input indices and
  // weights (already mapped through the phase subgrid and boundary rule).
  auto build_axis = [&](int n_in_sub, int n_out, std::vector<int>& idx, std::vector<T>& wt) {
    idx.resize(static_cast<size_t>(n_out) * 4);
    wt.resize(static_cast<size_t>(n_out) * 4);
    for (int p = 0; p < n_out; ++p) {
      const int a = p % r;
      const int p_sub = p / r;
      T wgt[4];
      const int base = detail::Bicubic2<T>::taps(p_sub, wgt);
      for (int t = 0; t < 4; ++t) {
        int src = base + t;
        src = circular ? detail::wrap_index(src, n_in_sub) : detail::clamp_index(src, n_in_sub);
        idx[static_cast<size_t>(p) * 4 + t] = src * r + a;
        wt[static_cast<size_t>(p) * 4 + t] = wgt[t];
      }
    }
  };
  std::vector<int> row_idx, col_idx;
  std::vector<T> row_wt, col_wt;
  build_axis(h_sub, ho, row_idx, row_wt);
  build_axis(w_sub, wo, col_idx, col_wt);

  auto out = make_node<T>({c, ho, wo}, {x}, "upsample_bicubic2");
  const size_t plane_in = static_cast<size_t>(h) * w;
  const size_t plane_out = static_cast<size_t>(ho) * wo;
  {
    T* tmp = detail::scratch_a<T>(static_cast<size_t>(ho) * w);
    for (int cc = 0; cc < c; ++cc) {
      const T* xi = x->val.data.data() + static_cast<size_t>(cc) * plane_in;
      // Rows first: tmp[p][j] = sum_t row_wt * x[row_idx][j].
      for (int p = 0; p < ho; ++p) {
        T* trow = tmp + static_cast<size_t>(p) * w;
        const int* id = row_idx.data() + static_cast<size_t>(p) * 4;
        const T* wg = row_wt.data() + static_cast<size_t>(p) * 4;
        const T* s0 = xi + static_cast<size_t>(id[0]) * w;
        const T* s1 = xi + static_cast<size_t>(id[1]) * w;
        const T* s2 = xi + static_cast<size_t>(id[2]) * w;
        const T* s3 = xi + static_cast<size_t>(id[3]) * w;
        for (int j = 0; j < w; ++j)
          trow[j] = wg[0] * s0[j] + wg[1] * s1[j] + wg[2] * s2[j] + wg[3] * s3[j];
      }
      // Then columns.
      T* yo = out->val.data.data() + static_cast<size_t>(cc) * plane_out;
      for (int p = 0; p < ho; ++p) {
        const T* trow = tmp + static_cast<size_t>(p) * w;
        T* orow = yo + static_cast<size_t>(p) * wo;
        for (int q = 0; q < wo; ++q) {
          const int* id = col_idx.data() + static_cast<size_t>(q) * 4;
          const T* wg = col_wt.data() + static_cast<size_t>(q) * 4;
          orow[q] = wg[0] * trow[id[0]] + wg[1] * trow[id[1]] + wg[2] * trow[id[2]] +
                    wg[3] * trow[id[3]];
        }
      }
    }
  }
  if (out->needs_grad) {
    out->backprop = [x, c, h, w, ho, wo, plane_in, plane_out, row_idx, row_wt, col_idx,
                     col_wt](Node<T>& self) {
      if (!x->needs_grad) return;
      x->ensure_grad();
      const size_t tmp_n = static_cast<size_t>(ho) * w;
      T* tmp = detail::scratch_a<T>(tmp_n);
      for (int cc = 0; cc < c; ++cc) {
        std::fill(tmp, tmp + tmp_n, T(0));
        const T* g = self.grad.data() + static_cast<size_t>(cc) * plane_out;
        // Columns transpose: tmp[p][id] += wg * g[p][q].
        for (int p = 0; p < ho; ++p) {
          T* trow = tmp + static_cast<size_t>(p) * w;
          const T* grow = g + static_cast<size_t>(p) * wo;
          for (int q = 0; q < wo; ++q) {
            const int* id = col_idx.data() + static_cast<size_t>(q) * 4;
            const T* wg = col_wt.data() + static_cast<size_t>(q) * 4;
            const T gv = grow[q];
            trow[id[0]] += wg[0] * gv;
            trow[id[1]] += wg[1] * gv;
            trow[id[2]] += wg[2] * gv;
            trow[id[3]] += wg[3] * gv;
          }
        }
        // Rows transpose.
        T* xg = x->grad.data() + static_cast<size_t>(cc) * plane_in;
        for (int p = 0; p < ho; ++p) {
          const T* trow = tmp + static_cast<size_t>(p) * w;
          const int* id = row_idx.data() + static_cast<size_t>(p) * 4;
          const T* wg = row_wt.data() + static_cast<size_t>(p) * 4;
          for (int t = 0; t < 4; ++t) {
            T* xrow = xg + static_cast<size_t>(id[t]) * w;
            const T wv = wg[t];
            for (int j = 0; j < w; ++j) xrow[j] += wv * trow[j];
          }
        }
      }
    };
  }
  return out;
}

/// Layer normalization over the channel axis at each spatial site, with
/// per-channel affine parameters gamma and beta. eps = 1e-5.
template <typename T>
Value<T> layer_norm_chan(const Value<T>& x, const Value<T>& gamma, const Value<T>& beta) {
  const auto& xs = x->val.shape;
  if (xs.size() != 3) throw std::invalid_argument("layer_norm_chan: bad rank");
  const int c = xs[0], h = xs[1], w = xs[2];
  if (gamma->val.shape != std::vector<int>{c} || beta->val.shape != std::vector<int>{c})
    throw std::invalid_argument("layer_norm_chan: affine shape mismatch");
  const size_t plane = static_cast<size_t>(h) * w;
  const T eps = T(1e-5);

  auto out = make_node<T>({c, h, w}, {x, gamma, beta}, "layer_norm_chan");
  // Per-site statistics are kept for the backward pass; x-hat is recomputed.
  auto mu = std::make_shared<std::vector<T>>(plane, T(0));
  auto rstd = std::make_shared<std::vector<T>>(plane, T(0));
  {
    const T* xd = x->val.data.data();
    std::vector<T>& m = *mu;
    std::vector<T>& rs = *rstd;
    for (int cc = 0; cc < c; ++cc) {
      const T* row = xd + static_cast<size_t>(cc) * plane;
      for (size_t s = 0; s < plane; ++s) m[s] += row[s];
    }
    const T invc = T(1) / T(c);
    for (size_t s = 0; s < plane; ++s) m[s] *= invc;
    for (int cc = 0; cc < c; ++cc) {
      const T* row = xd + static_cast<size_t>(cc) * plane;
      for (size_t s = 0; s < plane; ++s) {
        const T d = row[s] - m[s];
        rs[s] += d * d;
      }
    }
    for (size_t s = 0; s < plane; ++s) rs[s] = T(1) / std::sqrt(rs[s] * invc + eps);
    T* yd = out->val.data.data();
    for (int cc = 0; cc < c; ++cc) {
      const T g = gamma->val.data[cc];
      const T b = beta->val.data[cc];
      const T* row = xd + static_cast<size_t>(cc) * plane;
      T* yrow = yd + static_cast<size_t>(cc) * plane;
      for (size_t s = 0; s < plane; ++s) yrow[s] = (row[s] - m[s]) * rs[s] * g + b;
    }
  }
  if (out->needs_grad) {
    out->backprop = [x, gamma, beta, c, plane, mu, rstd](Node<T>& self) {
      const T* g = self.grad.data();
      const T* xd = x->val.data.data();
      const std::vector<T>& m = *mu;
      const std::vector<T>& rs = *rstd;
      if (beta->needs_grad) {
        beta->ensure_grad();
        for (int cc = 0; cc < c; ++cc) {
          T acc = 0;
          const T* grow = g + static_cast<size_t>(cc) * plane;
          for (size_t s = 0; s < plane; ++s) acc += grow[s];
          beta->grad[cc] += acc;
        }
      }
      if (gamma->needs_grad) {
        gamma->ensure_grad();
        for (int cc = 0; cc < c; ++cc) {
          T acc = 0;
          const T* grow = g + static_cast<size_t>(cc) * plane;
          const T* xrow = xd + static_cast<size_t>(cc) * plane;
          for (size_t s = 0; s < plane; ++s) acc += grow[s] * (xrow[s] - m[s]) * rs[s];
          gamma->grad[cc] += acc;
        }
      }
      if (!x->needs_grad) return;
      x->ensure_grad();
      // gx = rstd * (gamma*g - mean_c(gamma*g) - xhat * mean_c(gamma*g*xhat)).
      T* s1 = detail::scratch_a<T>(plane);
      T* s2 = detail::scratch_b<T>(plane);
      std::fill(s1, s1 + plane, T(0));
      std::fill(s2, s2 + plane, T(0));
      for (int cc = 0; cc < c; ++cc) {
        const T gm = gamma->val.data[cc];
        const T* grow = g + static_cast<size_t>(cc) * plane;
        const T* xrow = xd + static_cast<size_t>(cc) * plane;
        for (size_t s = 0; s < plane; ++s) {
          const T gg = gm * grow[s];
          s1[s] += gg;
          s2[s] += gg * (xrow[s] - m[s]) * rs[s];
        }
      }
      const T invc = T(1) / T(c);
      for (size_t s = 0; s < plane; ++s) {
        s1[s] *= invc;
        s2[s] *= invc;
      }
      for (int cc = 0; cc < c; ++cc) {
        const T gm = gamma->val.data[cc];
        const T* grow = g + static_cast<size_t>(cc) * plane;
        const T* xrow = xd + static_cast<size_t>(cc) * plane;
        T* xgrow = x->grad.data() + static_cast<size_t>(cc) * plane;
        for (size_t s = 0; s < plane; ++s) {
          const T xh = (xrow[s] - m[s]) * rs[s];
          xgrow[s] += rs[s] * (gm * grow[s] - s1[s] - xh * s2[s]);
        }
      }
    };
  }
  return out;
}

/// Gaussian error linear unit in its tanh approximation:
/// y = 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
/// The tanh values are cached so the backward pass evaluates no transcendentals.
template <typename T>
Value<T> gelu(const Value<T>& x) {
  auto out = make_node<T>(x->val.shape, {x}, "gelu");
  const size_t n = x->val.data.size();
  auto tcache = std::make_shared<std::vector<T>>(n);
  constexpr T kRoot2OverPi = T(0.7978845608028654);
  constexpr T kCubic = T(0.044715);
  {
    const T* xd = x->val.data.data();
    T* yd = out->val.data.data();
    T* tc = tcache->data();
    for (size_t i = 0; i < n; ++i) {
      const T xv = xd[i];
      tc[i] = kRoot2OverPi * (xv + kCubic * xv * xv * xv);
    }
    detail::tanh_inplace(tc, n);
    for (size_t i = 0; i < n; ++i) yd[i] = T(0.5) * xd[i] * (T(1) + tc[i]);
  }
  if (out->needs_grad) {
    out->backprop = [x, n, tcache, kRoot2OverPi, kCubic](Node<T>& self) {
      if (!x->needs_grad) return;
      x->ensure_grad();
      const T* g = self.grad.data();
      const T* xd = x->val.data.data();
      const T* tc = tcache->data();
      T* xg = x->grad.data();
      for (size_t i = 0; i < n; ++i) {
        const T xv = xd[i];
        const T t = tc[i];
        const T dinner = kRoot2OverPi * (T(1) + T(3) * kCubic * xv * xv);
        const T dy = T(0.5) * (T(1) + t) + T(0.5) * xv * (T(1) - t * t) * dinner;
        xg[i] += g[i] * dy;
      }
    };
  }
  return out;
}

/// Concatenates two maps along the channel axis.
template <typename T>
Value<T> concat_ch(const Value<T>& a, const Value<T>& b) {
  const auto& as = a->val.shape;
  const auto& bs = b->val.shape;
  if (as.size() != 3 || bs.size() != 3 || as[1] != bs[1] || as[2] != bs[2])
    throw std::invalid_argument("concat_ch: spatial shape mismatch");
  auto out = make_node<T>({as[0] + bs[0], as[1], as[2]}, {a, b}, "concat_ch");
  const size_t na = a->val.data.size();
  const size_t nb = b->val.data.size();
  std::memcpy(out->val.data.data(), a->val.data.data(), na * sizeof(T));
  std::memcpy(out->val.data.data() + na, b->val.data.data(), nb * sizeof(T));
  if (out->needs_grad) {
    out->backprop = [a, b, na, nb](Node<T>& self) {
      if (a->needs_grad) {
        a->ensure_grad();
        const T* g = self.grad.data();
        T* ag = a->grad.data();
        for (size_t i = 0; i < na; ++i) ag[i] += g[i];
      }
      if (b->needs_grad) {
        b->ensure_grad();
        const T* g = self.grad.data() + na;
        T* bg = b->grad.data();
        for (size_t i = 0; i < nb; ++i) bg[i] += g[i];
      }
    };
  }
  return out;
}

/// Elementwise sum of two same-shape tensors.
template <typename T>
Value<T> add(const Value<T>& a, const Value<T>& b) {
  if (a->val.shape != b->val.shape) throw std::invalid_argument("add: shape mismatch");
  auto out = make_node<T>(a->val.shape, {a, b}, "add");
  const size_t n = a->val.data.size();
  const T* ad = a->val.data.data();
  const T* bd = b->val.data.data();
  T* yd = out->val.data.data();
  for (size_t i = 0; i < n; ++i) yd[i] = ad[i] + bd[i];
  if (out->needs_grad) {
    out->backprop = [a, b, n](Node<T>& self) {
      const T* g = self.grad.data();
      if (a->needs_grad) {
        a->ensure_grad();
        T* ag = a->grad.data();
        for (size_t i = 0; i < n; ++i) ag[i] += g[i];
      }
      if (b->needs_grad) {
        b->ensure_grad();
        T* bg = b->grad.data();
        for (size_t i = 0; i < n; ++i) bg[i] += g[i];
      }
    };
  }
  return out;
}

/// Adds a per-channel scalar to a feature map: y[c,:,:] = x[c,:,:] + v[c].
template <typename T>
Value<T> add_bias_ch(const Value<T>& x, const Value<T>& v) {
  const auto& xs = x->val.shape;
  if (xs.size() != 3) throw std::invalid_argument("add_bias_ch: bad rank");
  const int c = xs[0];
  if (v->val.shape != std::vector<int>{c}) throw std::invalid_argument("add_bias_ch: bias shape");
  const size_t plane = static_cast<size_t>(xs[1]) * xs[2];
  auto out = make_node<T>(xs, {x, v}, "add_bias_ch");
  for (int cc = 0; cc < c; ++cc) {
    const T* row = x->val.data.data() + static_cast<size_t>(cc) * plane;
    T* yrow = out->val.data.data() + static_cast<size_t>(cc) * plane;
    const T bv = v->val.data[cc];
    for (size_t s = 0; s < plane; ++s) yrow[s] = row[s] + bv;
  }
  if (out->needs_grad) {
    out->backprop = [x, v, c, plane](Node<T>& self) {
      const T* g = self.grad.data();
      if (x->needs_grad) {
        x->ensure_grad();
        T* xg = x->grad.data();
        const size_t n = static_cast<size_t>(c) * plane;
        for (size_t i = 0; i < n; ++i) xg[i] += g[i];
      }
      if (v->needs_grad) {
        v->ensure_grad();
        for (int cc = 0; cc < c; ++cc) {
          T acc = 0;
          const T* grow = g + static_cast<size_t>(cc) * plane;
          for (size_t s = 0; s < plane; ++s) acc += grow[s];
          v->grad[cc] += acc;
        }
      }
    };
  }
  return out;
}

/// Per-channel affine modulation: y[c,:,:] = x[c,:,:] * (1 + s[c]) + t[c].
template <typename T>
Value<T> scale_shift_ch(const Value<T>& x, const Value<T>& s, const Value<T>& t) {
  const auto& xs = x->val.shape;
  if (xs.size() != 3) throw std::invalid_argument("scale_shift_ch: bad rank");
  const int c = xs[0];
  if (s->val.shape != std::vector<int>{c} || t->val.shape != std::vector<int>{c})
    throw std::invalid_argument("scale_shift_ch: modulation shape");
  const size_t plane = static_cast<size_t>(xs[1]) * xs[2];
  auto out = make_node<T>(xs, {x, s, t}, "scale_shift_ch");
  for (int cc = 0; cc < c; ++cc) {
    const T* row = x->val.data.data() + static_cast<size_t>(cc) * plane;
    T* yrow = out->val.data.data() + static_cast<size_t>(cc) * plane;
    const T sv = T(1) + s->val.data[cc];
    const T tv = t->val.data[cc];
    for (size_t sp = 0; sp < plane; ++sp) yrow[sp] = row[sp] * sv + tv;
  }
  if (out->needs_grad) {
    out->backprop = [x, s, t, c, plane](Node<T>& self) {
      const T* g = self.grad.data();
      if (t->needs_grad) {
        t->ensure_grad();
        for (int cc = 0; cc < c; ++cc) {
          T acc = 0;
          const T* grow = g + static_cast<size_t>(cc) * plane;
          for (size_t sp = 0; sp < plane; ++sp) acc += grow[sp];
          t->grad[cc] += acc;
        }
      }
      if (s->needs_grad) {
        s->ensure_grad();
        for (int cc = 0; cc < c; ++cc) {
          T acc = 0;
          const T* grow = g + static_cast<size_t>(cc) * plane;
          const T* xrow = x->val.data.data() + static_cast<size_t>(cc) * plane;
          for (size_t sp = 0; sp < plane; ++sp) acc += grow[sp] * xrow[sp];
          s->grad[cc] += acc;
        }
      }
      if (x->needs_grad) {
        x->ensure_grad();
        for (int cc = 0; cc < c; ++cc) {
          const T sv = T(1) + s->val.data[cc];
          const T* grow = g + static_cast<size_t>(cc) * plane;
          T* xgrow = x->grad.data() + static_cast<size_t>(cc) * plane;
          for (size_t sp = 0; sp < plane; ++sp) xgrow[sp] += grow[sp] * sv;
        }
      }
    };
  }
  return out;
}

/// Dense layer on a flat vector: y = W x + b with W [m,n], x [n], b [m].
template <typename T>
Value<T> linear_vec(const Value<T>& x, const Value<T>& w, const Value<T>& b) {
  const auto& ws = w->val.shape;
  if (ws.size() != 2 || x->val.shape.size() != 1)
    throw std::invalid_argument("linear_vec: bad ranks");
  const int m = ws[0], n = ws[1];
  if (x->val.shape[0] != n || b->val.shape != std::vector<int>{m})
    throw std::invalid_argument("linear_vec: shape mismatch");
  auto out = make_node<T>({m}, {x, w, b}, "linear_vec");
  for (int i = 0; i < m; ++i) {
    T acc = b->val.data[i];
    const T* wrow = w->val.data.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) acc += wrow[j] * x->val.data[j];
    out->val.data[i] = acc;
  }
  if (out->needs_grad) {
    out->backprop = [x, w, b, m, n](Node<T>& self) {
      const T* g = self.grad.data();
      if (b->needs_grad) {
        b->ensure_grad();
        for (int i = 0; i < m; ++i) b->grad[i] += g[i];
      }
      if (w->needs_grad) {
        w->ensure_grad();
        for (int i = 0; i < m; ++i) {
          T* wg = w->grad.data() + static_cast<size_t>(i) * n;
          const T gv = g[i];
          for (int j = 0; j < n; ++j) wg[j] += gv * x->val.data[j];
        }
      }
      if (x->needs_grad) {
        x->ensure_grad();
        for (int i = 0; i < m; ++i) {
          const T* wrow = w->val.data.data() + static_cast<size_t>(i) * n;
          const T gv = g[i];
          for (int j = 0; j < n; ++j) x->grad[j] += gv * wrow[j];
        }
      }
    };
  }
  return out;
}

/// Relative-error training loss against a fixed target. pred and target are
/// [M,H,W]; the result is the mean over fields of ||pred_k - target_k||_2
/// divided by max(||target_k||_2, 1e-12). Accumulation is in double.
template <typename T>
Value<T> scaled_l2_loss(const Value<T>& pred, const Tensor<T>& target) {
  const auto& ps = pred->val.shape;
  if (ps.size() != 3) throw std::invalid_argument("scaled_l2_loss: bad rank");
  if (target.shape != ps) throw std::invalid_argument("scaled_l2_loss: target shape mismatch");
  const int m = ps[0];
  const size_t plane = static_cast<size_t>(ps[1]) * ps[2];
  constexpr double kFloor = 1e-12;

  auto norms = std::make_shared<std::vector<double>>();  // [num_k, denom_k] pairs
  norms->resize(static_cast<size_t>(m) * 2);
  double loss = 0;
  for (int k = 0; k < m; ++k) {
    const T* p = pred->val.data.data() + static_cast<size_t>(k) * plane;
    const T* t = target.data.data() + static_cast<size_t>(k) * plane;
    double num = 0, den = 0;
    for (size_t s = 0; s < plane; ++s) {
      const double d = static_cast<double>(p[s]) - static_cast<double>(t[s]);
      num += d * d;
      den += static_cast<double>(t[s]) * static_cast<double>(t[s]);
    }
    num = std::sqrt(num);
    den = std::max(std::sqrt(den), kFloor);
    (*norms)[static_cast<size_t>(k) * 2] = num;
    (*norms)[static_cast<size_t>(k) * 2 + 1] = den;
    loss += num / den;
  }
  loss /= m;

  auto out = make_node<T>({1}, {pred}, "scaled_l2_loss");
  out->val.data[0] = static_cast<T>(loss);
  if (out->needs_grad) {
    auto tgt = std::make_shared<Tensor<T>>(target);
    out->backprop = [pred, tgt, norms, m, plane](Node<T>& self) {
      if (!pred->needs_grad) return;
      pred->ensure_grad();
      const double g0 = static_cast<double>(self.grad[0]);
      for (int k = 0; k < m; ++k) {
        const double num = (*norms)[static_cast<size_t>(k) * 2];
        const double den = (*norms)[static_cast<size_t>(k) * 2 + 1];
        if (num == 0) continue;
        const double scale = g0 / (static_cast<double>(m) * num * den);
        const T* p = pred->val.data.data() + static_cast<size_t>(k) * plane;
        const T* t = tgt->data.data() + static_cast<size_t>(k) * plane;
        T* gp = pred->grad.data() + static_cast<size_t>(k) * plane;
        for (size_t s = 0; s < plane; ++s)
          gp[s] += static_cast<T>(scale * (static_cast<double>(p[s]) - static_cast<double>(t[s])));
      }
    };
  }
  return out;
}

/// Sum of several scalar loss nodes divided by a constant count.
template <typename T>
Value<T> mean_of_scalars(const std::vector<Value<T>>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_of_scalars: empty");
  for (const auto& v : xs)
    if (v->val.numel() != 1) throw std::invalid_argument("mean_of_scalars: non-scalar term");
  auto out = make_node<T>({1}, xs, "mean_of_scalars");
  T acc = 0;
  for (const auto& v : xs) acc += v->val.data[0];
  out->val.data[0] = acc / static_cast<T>(xs.size());
  if (out->needs_grad) {
    const T inv = T(1) / static_cast<T>(xs.size());
    out->backprop = [xs, inv](Node<T>& self) {
      for (const auto& v : xs) {
        if (!v->needs_grad) continue;
        v->ensure_grad();
        v->grad[0] += self.grad[0] * inv;
      }
    };
  }
  return out;
}

}  // namespace sinenet
