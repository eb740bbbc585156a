#ifndef MACBIG_LAYERS_HPP
#define MACBIG_LAYERS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "macbig/gemm.hpp"
#include "macbig/rng.hpp"
#include "macbig/tensor.hpp"
#include "macbig/util.hpp"

// Layer primitives. Every forward has a matching backward that accumulates
// parameter gradients (+=) into a same-shaped layer struct and returns the
// input gradient. Caches hold exactly what the backward needs; the forward
// input is passed back in explicitly to avoid duplicating large buffers.

namespace macbig {

constexpr std::size_t kPoolWindow = 3;

template <class T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// ---------- softmax ----------

// Stabilized by max subtraction; exact shift invariance up to rounding.
template <class T>
inline void softmax_span(const T* z, T* p, std::size_t n) {
  T m = z[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, z[i]);
  T sum = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (std::size_t i = 0; i < n; ++i) p[i] /= sum;
}

template <class T>
TensorT<T> softmax(const TensorT<T>& z) {
  if (z.shape.size() != 1) throw ShapeError("softmax expects a 1-d tensor");
  TensorT<T> p(z.shape);
  softmax_span(z.data.data(), p.data.data(), z.numel());
  return p;
}

// dL/dz_i = p_i * (dL/dp_i - sum_j p_j dL/dp_j)
template <class T>
inline void softmax_backward_span(const T* p, const T* dp, T* dz,
                                  std::size_t n) {
  T dot = T(0);
  for (std::size_t i = 0; i < n; ++i) dot += p[i] * dp[i];
  for (std::size_t i = 0; i < n; ++i) dz[i] = p[i] * (dp[i] - dot);
}

template <class T>
TensorT<T> softmax_backward(const TensorT<T>& p, const TensorT<T>& dp) {
  if (!p.same_shape(dp)) throw ShapeError("softmax_backward shape mismatch");
  TensorT<T> dz(p.shape);
  softmax_backward_span(p.data.data(), dp.data.data(), dz.data.data(),
                        p.numel());
  return dz;
}

// ---------- dense ----------

enum class Activation { linear, relu, softmax };

template <class T>
struct DenseLayerT {
  TensorT<T> W;  // [C_in, C_out]
  TensorT<T> b;  // [C_out]
  Activation act = Activation::linear;
};

template <class T>
struct DenseCacheT {
  TensorT<T> pre;  // [rows, C_out]
  TensorT<T> out;  // kept only for softmax backward
};

namespace detail {

template <class T>
inline void add_bias_rows(TensorT<T>& m, const TensorT<T>& b) {
  std::size_t rows = m.rows(), cols = m.shape[1];
  for (std::size_t r = 0; r < rows; ++r) {
    T* p = m.row(r);
    for (std::size_t c = 0; c < cols; ++c) p[c] += b[c];
  }
}

template <class T>
inline void colsum_add(const TensorT<T>& m, TensorT<T>& out) {
  std::size_t rows = m.rows(), cols = m.shape[1];
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = m.row(r);
    for (std::size_t c = 0; c < cols; ++c) out[c] += p[c];
  }
}

// y[0..n) += v . M  (v: [k], M: [k,n])
template <class T>
inline void addmv(T* y, const T* v, const TensorT<T>& M) {
  std::size_t k = M.shape[0], n = M.shape[1];
  for (std::size_t i = 0; i < k; ++i) {
    T a = v[i];
    if (a == T(0)) continue;
    const T* row = M.data.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) y[j] += a * row[j];
  }
}

template <class T>
inline TensorT<T> as_2d(const TensorT<T>& x) {
  if (x.shape.size() == 2) return x;
  TensorT<T> y = x;
  y.shape = {1, x.numel()};
  return y;
}

}  // namespace detail

// x: [rows, C_in] (a 1-d [C_in] input is treated as one row and the output
// collapses back to 1-d). Applying the same dense layer to every row is the
// time-distributed use.
template <class T>
TensorT<T> dense_forward(const TensorT<T>& x, const DenseLayerT<T>& L,
                         DenseCacheT<T>* cache = nullptr) {
  TensorT<T> x2 = detail::as_2d(x);
  std::size_t cin = L.W.shape[0], cout = L.W.shape[1];
  if (x2.shape[1] != cin) throw ShapeError("dense: input width mismatch");
  TensorT<T> pre({x2.rows(), cout});
  gemm(false, false, x2.rows(), cout, cin, T(1), x2.data.data(), cin,
       L.W.data.data(), cout, T(0), pre.data.data(), cout);
  detail::add_bias_rows(pre, L.b);
  TensorT<T> out = pre;
  if (L.act == Activation::relu) {
    for (auto& v : out.data) v = std::max(v, T(0));
  } else if (L.act == Activation::softmax) {
    for (std::size_t r = 0; r < out.rows(); ++r)
      softmax_span(pre.row(r), out.row(r), cout);
  }
  if (cache) {
    cache->pre = pre;
    if (L.act == Activation::softmax) cache->out = out;
  }
  if (x.shape.size() == 1) out.shape = {cout};
  return out;
}

// Shared tail once the pre-activation gradient is known.
template <class T>
TensorT<T> dense_backward_pre(const TensorT<T>& dpre_in, const TensorT<T>& x,
                              const DenseLayerT<T>& L, DenseLayerT<T>& grad) {
  TensorT<T> x2 = detail::as_2d(x);
  TensorT<T> dpre = detail::as_2d(dpre_in);
  std::size_t cin = L.W.shape[0], cout = L.W.shape[1], rows = x2.rows();
  gemm(true, false, cin, cout, rows, T(1), x2.data.data(), cin,
       dpre.data.data(), cout, T(1), grad.W.data.data(), cout);
  detail::colsum_add(dpre, grad.b);
  TensorT<T> dx({rows, cin});
  gemm(false, true, rows, cin, cout, T(1), dpre.data.data(), cout,
       L.W.data.data(), cout, T(0), dx.data.data(), cin);
  if (x.shape.size() == 1) dx.shape = {cin};
  return dx;
}

template <class T>
TensorT<T> dense_backward(const TensorT<T>& gout, const TensorT<T>& x,
                          const DenseCacheT<T>& c, const DenseLayerT<T>& L,
                          DenseLayerT<T>& grad) {
  TensorT<T> g2 = detail::as_2d(gout);
  TensorT<T> dpre = g2;
  if (L.act == Activation::relu) {
    for (std::size_t i = 0; i < dpre.numel(); ++i)
      if (c.pre.data[i] <= T(0)) dpre.data[i] = T(0);
  } else if (L.act == Activation::softmax) {
    std::size_t cols = dpre.shape[1];
    for (std::size_t r = 0; r < dpre.rows(); ++r)
      softmax_backward_span(c.out.row(r), g2.row(r), dpre.row(r), cols);
  }
  return dense_backward_pre(dpre, x, L, grad);
}

// ---------- 1-d convolution (valid padding) + ReLU ----------

template <class T>
struct Conv1dLayerT {
  TensorT<T> W;  // [k, C_in, C_out]; flat layout doubles as [k*C_in, C_out]
  TensorT<T> b;  // [C_out]
  std::size_t kernel() const { return W.shape[0]; }
};

template <class T>
struct Conv1dCacheT {
  TensorT<T> pre;  // [T-k+1, C_out]
};

namespace detail {

template <class T>
inline TensorT<T> im2row(const TensorT<T>& x, std::size_t k) {
  std::size_t rows = x.rows() - k + 1, cin = x.shape[1];
  TensorT<T> R({rows, k * cin});
  for (std::size_t t = 0; t < rows; ++t) {
    T* dst = R.row(t);
    const T* src = x.row(t);
    std::copy(src, src + k * cin, dst);
  }
  return R;
}

}  // namespace detail

template <class T>
TensorT<T> conv1d_relu_forward(const TensorT<T>& x, const Conv1dLayerT<T>& L,
                               Conv1dCacheT<T>* cache = nullptr) {
  if (x.shape.size() != 2) throw ShapeError("conv1d expects [T, C_in]");
  std::size_t k = L.kernel(), cin = L.W.shape[1], cout = L.W.shape[2];
  if (x.shape[1] != cin) throw ShapeError("conv1d: channel mismatch");
  if (x.rows() < k) throw ShapeError("conv1d: sequence shorter than kernel");
  TensorT<T> R = detail::im2row(x, k);
  TensorT<T> pre({R.rows(), cout});
  gemm(false, false, R.rows(), cout, k * cin, T(1), R.data.data(), k * cin,
       L.W.data.data(), cout, T(0), pre.data.data(), cout);
  detail::add_bias_rows(pre, L.b);
  TensorT<T> out = pre;
  for (auto& v : out.data) v = std::max(v, T(0));
  if (cache) cache->pre = std::move(pre);
  return out;
}

template <class T>
TensorT<T> conv1d_relu_backward(const TensorT<T>& gout, const TensorT<T>& x,
                                const Conv1dCacheT<T>& c,
                                const Conv1dLayerT<T>& L,
                                Conv1dLayerT<T>& grad) {
  std::size_t k = L.kernel(), cin = L.W.shape[1], cout = L.W.shape[2];
  std::size_t rows = x.rows() - k + 1;
  if (gout.rows() != rows || gout.shape[1] != cout)
    throw ShapeError("conv1d backward: gradient shape mismatch");
  TensorT<T> dpre = gout;
  for (std::size_t i = 0; i < dpre.numel(); ++i)
    if (c.pre.data[i] <= T(0)) dpre.data[i] = T(0);
  detail::colsum_add(dpre, grad.b);
  TensorT<T> R = detail::im2row(x, k);
  gemm(true, false, k * cin, cout, rows, T(1), R.data.data(), k * cin,
       dpre.data.data(), cout, T(1), grad.W.data.data(), cout);
  TensorT<T> dR({rows, k * cin});
  gemm(false, true, rows, k * cin, cout, T(1), dpre.data.data(), cout,
       L.W.data.data(), cout, T(0), dR.data.data(), k * cin);
  TensorT<T> dx(x.shape);
  for (std::size_t t = 0; t < rows; ++t) {
    const T* src = dR.row(t);
    T* dst = dx.row(t);
    for (std::size_t i = 0; i < k * cin; ++i) dst[i] += src[i];
  }
  return dx;
}

// ---------- max pooling, window 3, stride 3, remainder dropped ----------

// argmax keeps the winning input row per (window, channel); ties go to the
// first maximal element, which is also where the backward routes the gradient.
template <class T>
TensorT<T> maxpool1d3_forward(const TensorT<T>& x,
                              std::vector<std::uint32_t>* argmax = nullptr) {
  if (x.shape.size() != 2) throw ShapeError("maxpool expects [T, C]");
  std::size_t rows = x.rows(), cols = x.shape[1];
  if (rows < kPoolWindow)
    throw ShapeError("maxpool: sequence shorter than pooling window");
  std::size_t out_rows = rows / kPoolWindow;
  TensorT<T> out({out_rows, cols});
  if (argmax) argmax->assign(out_rows * cols, 0);
  for (std::size_t o = 0; o < out_rows; ++o) {
    std::size_t base = o * kPoolWindow;
    for (std::size_t c = 0; c < cols; ++c) {
      T best = x.at2(base, c);
      std::size_t best_t = base;
      for (std::size_t j = 1; j < kPoolWindow; ++j) {
        T v = x.at2(base + j, c);
        if (v > best) {
          best = v;
          best_t = base + j;
        }
      }
      out.at2(o, c) = best;
      if (argmax) (*argmax)[o * cols + c] = static_cast<std::uint32_t>(best_t);
    }
  }
  return out;
}

template <class T>
TensorT<T> maxpool1d3_backward(const TensorT<T>& gout,
                               const std::vector<std::uint32_t>& argmax,
                               std::size_t in_rows) {
  std::size_t cols = gout.shape[1];
  TensorT<T> dx({in_rows, cols});
  for (std::size_t o = 0; o < gout.rows(); ++o)
    for (std::size_t c = 0; c < cols; ++c)
      dx.at2(argmax[o * cols + c], c) += gout.at2(o, c);
  return dx;
}

// ---------- concatenation along time ----------

template <class T>
TensorT<T> concat_time(const std::vector<const TensorT<T>*>& parts) {
  if (parts.empty()) throw ShapeError("concat_time: no parts");
  std::size_t cols = parts[0]->shape[1], rows = 0;
  for (const auto* p : parts) {
    if (p->shape.size() != 2 || p->shape[1] != cols)
      throw ShapeError("concat_time: channel mismatch");
    rows += p->rows();
  }
  TensorT<T> out({rows, cols});
  std::size_t at = 0;
  for (const auto* p : parts) {
    std::copy(p->data.begin(), p->data.end(), out.data.begin() + at);
    at += p->numel();
  }
  return out;
}

template <class T>
std::vector<TensorT<T>> split_time(const TensorT<T>& g,
                                   const std::vector<std::size_t>& row_counts) {
  std::vector<TensorT<T>> parts;
  std::size_t cols = g.shape[1], at = 0;
  for (std::size_t rc : row_counts) {
    TensorT<T> p({rc, cols});
    std::copy(g.data.begin() + at, g.data.begin() + at + rc * cols,
              p.data.begin());
    at += rc * cols;
    parts.push_back(std::move(p));
  }
  if (at != g.numel()) throw ShapeError("split_time: row counts mismatch");
  return parts;
}

// ---------- GRU ----------

// Gate equations, zero initial state:
//   z = sigmoid(x W_z + h U_z + b_z)
//   r = sigmoid(x W_r + h U_r + b_r)
//   hcand = tanh(x W_h + (r * h) U_h + b_h)
//   h' = (1 - z) * h + z * hcand
template <class T>
struct GruCellT {
  TensorT<T> Wz, Wr, Wh;  // [C_in, H]
  TensorT<T> Uz, Ur, Uh;  // [H, H]
  TensorT<T> bz, br, bh;  // [H]
  std::size_t input() const { return Wz.shape[0]; }
  std::size_t hidden() const { return Wz.shape[1]; }
};

// Rows are stored in scan order; row s holds the values computed at the s-th
// processed step. For a reverse scan, step s reads input row T-1-s.
template <class T>
struct GruDirCacheT {
  TensorT<T> z, r, hc, h;  // [T, H] each
  bool reverse = false;
};

template <class T>
TensorT<T> gru_scan_forward(const TensorT<T>& x, const GruCellT<T>& cell,
                            bool reverse, GruDirCacheT<T>* cache = nullptr) {
  std::size_t steps = x.rows(), cin = cell.input(), H = cell.hidden();
  if (x.shape[1] != cin) throw ShapeError("gru: input width mismatch");
  auto proj = [&](const TensorT<T>& W) {
    TensorT<T> P({steps, H});
    gemm(false, false, steps, H, cin, T(1), x.data.data(), cin, W.data.data(),
         H, T(0), P.data.data(), H);
    return P;
  };
  TensorT<T> XZ = proj(cell.Wz), XR = proj(cell.Wr), XH = proj(cell.Wh);
  TensorT<T> out({steps, H});
  std::vector<T> hprev(H, T(0)), az(H), ar(H), ah(H), rh(H);
  if (cache) {
    cache->z = TensorT<T>({steps, H});
    cache->r = TensorT<T>({steps, H});
    cache->hc = TensorT<T>({steps, H});
    cache->h = TensorT<T>({steps, H});
    cache->reverse = reverse;
  }
  for (std::size_t s = 0; s < steps; ++s) {
    std::size_t row = reverse ? steps - 1 - s : s;
    for (std::size_t j = 0; j < H; ++j) {
      az[j] = XZ.at2(row, j) + cell.bz[j];
      ar[j] = XR.at2(row, j) + cell.br[j];
    }
    detail::addmv(az.data(), hprev.data(), cell.Uz);
    detail::addmv(ar.data(), hprev.data(), cell.Ur);
    for (std::size_t j = 0; j < H; ++j) {
      az[j] = sigmoid(az[j]);
      ar[j] = sigmoid(ar[j]);
      rh[j] = ar[j] * hprev[j];
      ah[j] = XH.at2(row, j) + cell.bh[j];
    }
    detail::addmv(ah.data(), rh.data(), cell.Uh);
    T* o = out.row(row);
    for (std::size_t j = 0; j < H; ++j) {
      T hc = std::tanh(ah[j]);
      T h = (T(1) - az[j]) * hprev[j] + az[j] * hc;
      if (cache) {
        cache->z.at2(s, j) = az[j];
        cache->r.at2(s, j) = ar[j];
        cache->hc.at2(s, j) = hc;
        cache->h.at2(s, j) = h;
      }
      o[j] = h;
      hprev[j] = h;
    }
  }
  return out;
}

// gout arrives in input order; returns dx in input order. Weight gradients
// are accumulated via GEMMs over per-step pre-activation gradients.
template <class T>
TensorT<T> gru_scan_backward(const TensorT<T>& gout, const TensorT<T>& x,
                             const GruDirCacheT<T>& c, const GruCellT<T>& cell,
                             GruCellT<T>& grad) {
  std::size_t steps = x.rows(), cin = cell.input(), H = cell.hidden();
  bool reverse = c.reverse;
  TensorT<T> DAz({steps, H}), DAr({steps, H}), DAh({steps, H});
  TensorT<T> RH({steps, H});
  std::vector<T> dh(H, T(0)), dhn(H), drh(H);
  const T zero = T(0);
  for (std::size_t si = steps; si-- > 0;) {
    std::size_t row = reverse ? steps - 1 - si : si;
    const T* g = gout.row(row);
    const T* z = c.z.row(si);
    const T* r = c.r.row(si);
    const T* hc = c.hc.row(si);
    const T* hprev = si > 0 ? c.h.row(si - 1) : nullptr;
    T* daz = DAz.row(si);
    T* dar = DAr.row(si);
    T* dah = DAh.row(si);
    T* rh = RH.row(si);
    for (std::size_t j = 0; j < H; ++j) {
      T hp = hprev ? hprev[j] : zero;
      T d = dh[j] + g[j];
      T dz = d * (hc[j] - hp);
      daz[j] = dz * z[j] * (T(1) - z[j]);
      T dhc = d * z[j];
      dah[j] = dhc * (T(1) - hc[j] * hc[j]);
      dhn[j] = d * (T(1) - z[j]);
      rh[j] = r[j] * hp;
    }
    // drh = Uh . dah ; dhn += Uz . daz + Ur . dar (+ r * drh)
    for (std::size_t kk = 0; kk < H; ++kk) {
      const T* uh = cell.Uh.row(kk);
      T sh = T(0);
      for (std::size_t j = 0; j < H; ++j) sh += uh[j] * dah[j];
      drh[kk] = sh;
    }
    for (std::size_t j = 0; j < H; ++j) {
      T hp = hprev ? hprev[j] : zero;
      T dr = drh[j] * hp;
      dar[j] = dr * r[j] * (T(1) - r[j]);
      dhn[j] += drh[j] * r[j];
    }
    for (std::size_t kk = 0; kk < H; ++kk) {
      const T* uz = cell.Uz.row(kk);
      const T* ur = cell.Ur.row(kk);
      T sz = T(0), sr = T(0);
      for (std::size_t j = 0; j < H; ++j) {
        sz += uz[j] * DAz.at2(si, j);
        sr += ur[j] * DAr.at2(si, j);
      }
      dhn[kk] += sz + sr;
    }
    dh = dhn;
  }
  // x rows in scan order for the input-weight gradients
  TensorT<T> Xs({steps, cin});
  for (std::size_t s = 0; s < steps; ++s) {
    std::size_t row = reverse ? steps - 1 - s : s;
    std::copy(x.row(row), x.row(row) + cin, Xs.row(s));
  }
  auto accum_w = [&](const TensorT<T>& DA, TensorT<T>& gW) {
    gemm(true, false, cin, H, steps, T(1), Xs.data.data(), cin, DA.data.data(),
         H, T(1), gW.data.data(), H);
  };
  accum_w(DAz, grad.Wz);
  accum_w(DAr, grad.Wr);
  accum_w(DAh, grad.Wh);
  if (steps > 1) {
    auto accum_u = [&](const TensorT<T>& DA, TensorT<T>& gU) {
      gemm(true, false, H, H, steps - 1, T(1), c.h.data.data(), H,
           DA.data.data() + H, H, T(1), gU.data.data(), H);
    };
    accum_u(DAz, grad.Uz);
    accum_u(DAr, grad.Ur);
  }
  gemm(true, false, H, H, steps, T(1), RH.data.data(), H, DAh.data.data(), H,
       T(1), grad.Uh.data.data(), H);
  detail::colsum_add(DAz, grad.bz);
  detail::colsum_add(DAr, grad.br);
  detail::colsum_add(DAh, grad.bh);
  TensorT<T> dXs({steps, cin});
  auto accum_x = [&](const TensorT<T>& DA, const TensorT<T>& W, T beta) {
    gemm(false, true, steps, cin, H, T(1), DA.data.data(), H, W.data.data(), H,
         beta, dXs.data.data(), cin);
  };
  accum_x(DAz, cell.Wz, T(0));
  accum_x(DAr, cell.Wr, T(1));
  accum_x(DAh, cell.Wh, T(1));
  TensorT<T> dx(x.shape);
  for (std::size_t s = 0; s < steps; ++s) {
    std::size_t row = reverse ? steps - 1 - s : s;
    std::copy(dXs.row(s), dXs.row(s) + cin, dx.row(row));
  }
  return dx;
}

template <class T>
struct BiGruCacheT {
  GruDirCacheT<T> f, b;
};

// Output row t is [forward state at t, backward state at t].
template <class T>
TensorT<T> bigru_forward(const TensorT<T>& x, const GruCellT<T>& fwd,
                         const GruCellT<T>& bwd,
                         BiGruCacheT<T>* cache = nullptr) {
  std::size_t steps = x.rows(), H = fwd.hidden();
  if (bwd.hidden() != H) throw ShapeError("bigru: hidden size mismatch");
  TensorT<T> hf = gru_scan_forward(x, fwd, false, cache ? &cache->f : nullptr);
  TensorT<T> hb = gru_scan_forward(x, bwd, true, cache ? &cache->b : nullptr);
  TensorT<T> out({steps, 2 * H});
  for (std::size_t t = 0; t < steps; ++t) {
    std::copy(hf.row(t), hf.row(t) + H, out.row(t));
    std::copy(hb.row(t), hb.row(t) + H, out.row(t) + H);
  }
  return out;
}

template <class T>
TensorT<T> bigru_backward(const TensorT<T>& gout, const TensorT<T>& x,
                          const BiGruCacheT<T>& c, const GruCellT<T>& fwd,
                          const GruCellT<T>& bwd, GruCellT<T>& gfwd,
                          GruCellT<T>& gbwd) {
  std::size_t steps = x.rows(), H = fwd.hidden();
  TensorT<T> gf({steps, H}), gb({steps, H});
  for (std::size_t t = 0; t < steps; ++t) {
    std::copy(gout.row(t), gout.row(t) + H, gf.row(t));
    std::copy(gout.row(t) + H, gout.row(t) + 2 * H, gb.row(t));
  }
  TensorT<T> dx = gru_scan_backward(gf, x, c.f, fwd, gfwd);
  TensorT<T> dxb = gru_scan_backward(gb, x, c.b, bwd, gbwd);
  for (std::size_t i = 0; i < dx.numel(); ++i) dx.data[i] += dxb.data[i];
  return dx;
}

// ---------- attention ----------

// u_t = relu(x_t W + b); score_t = u_t . ctx; weights = softmax(scores);
// context = sum_t weights_t * x_t  (weighted sum over the layer inputs).
template <class T>
struct AttentionLayerT {
  TensorT<T> W;    // [D, D]
  TensorT<T> b;    // [D]
  TensorT<T> ctx;  // [D] learned scoring vector
};

template <class T>
struct AttentionCacheT {
  TensorT<T> pre;      // [T, D]
  TensorT<T> u;        // [T, D]
  TensorT<T> weights;  // [T]
};

template <class T>
std::pair<TensorT<T>, TensorT<T>> attention_forward(
    const TensorT<T>& x, const AttentionLayerT<T>& L,
    AttentionCacheT<T>* cache = nullptr) {
  std::size_t steps = x.rows(), D = L.W.shape[0];
  if (x.shape[1] != D) throw ShapeError("attention: input width mismatch");
  TensorT<T> pre({steps, D});
  gemm(false, false, steps, D, D, T(1), x.data.data(), D, L.W.data.data(), D,
       T(0), pre.data.data(), D);
  detail::add_bias_rows(pre, L.b);
  TensorT<T> u = pre;
  for (auto& v : u.data) v = std::max(v, T(0));
  TensorT<T> scores({steps});
  for (std::size_t t = 0; t < steps; ++t) {
    T s = T(0);
    const T* ur = u.row(t);
    for (std::size_t j = 0; j < D; ++j) s += ur[j] * L.ctx[j];
    scores[t] = s;
  }
  TensorT<T> w = softmax(scores);
  TensorT<T> ctxv({D});
  for (std::size_t t = 0; t < steps; ++t) {
    const T* xr = x.row(t);
    for (std::size_t j = 0; j < D; ++j) ctxv[j] += w[t] * xr[j];
  }
  if (cache) {
    cache->pre = std::move(pre);
    cache->u = std::move(u);
    cache->weights = w;
  }
  return {std::move(ctxv), std::move(w)};
}

template <class T>
TensorT<T> attention_backward(const TensorT<T>& dcontext, const TensorT<T>& x,
                              const AttentionCacheT<T>& c,
                              const AttentionLayerT<T>& L,
                              AttentionLayerT<T>& grad) {
  std::size_t steps = x.rows(), D = L.W.shape[0];
  TensorT<T> da({steps});
  for (std::size_t t = 0; t < steps; ++t) {
    T s = T(0);
    const T* xr = x.row(t);
    for (std::size_t j = 0; j < D; ++j) s += dcontext[j] * xr[j];
    da[t] = s;
  }
  TensorT<T> ds = softmax_backward(c.weights, da);
  TensorT<T> dpre({steps, D});
  for (std::size_t t = 0; t < steps; ++t) {
    const T* ur = c.u.row(t);
    const T* pr = c.pre.row(t);
    T* dp = dpre.row(t);
    for (std::size_t j = 0; j < D; ++j) {
      grad.ctx[j] += ds[t] * ur[j];
      dp[j] = pr[j] > T(0) ? ds[t] * L.ctx[j] : T(0);
    }
  }
  gemm(true, false, D, D, steps, T(1), x.data.data(), D, dpre.data.data(), D,
       T(1), grad.W.data.data(), D);
  detail::colsum_add(dpre, grad.b);
  TensorT<T> dx({steps, D});
  gemm(false, true, steps, D, D, T(1), dpre.data.data(), D, L.W.data.data(), D,
       T(0), dx.data.data(), D);
  for (std::size_t t = 0; t < steps; ++t) {
    T* dxr = dx.row(t);
    for (std::size_t j = 0; j < D; ++j) dxr[j] += c.weights[t] * dcontext[j];
  }
  return dx;
}

// ---------- dropout (inverted) ----------

// Mask entries are 0 or 1/(1-rate); at inference the op is the identity.
template <class T>
TensorT<T> dropout_forward(const TensorT<T>& x, double rate, bool training,
                           Rng* rng, TensorT<T>* mask_out = nullptr) {
  if (rate < 0.0 || rate >= 1.0)
    throw UsageError("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) {
    if (mask_out) {
      *mask_out = TensorT<T>(x.shape);
      mask_out->fill(T(1));
    }
    return x;
  }
  if (!rng) throw UsageError("dropout: rng required in training mode");
  T scale = static_cast<T>(1.0 / (1.0 - rate));
  TensorT<T> mask(x.shape);
  TensorT<T> out(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    mask.data[i] = rng->next_unit() >= rate ? scale : T(0);
    out.data[i] = x.data[i] * mask.data[i];
  }
  if (mask_out) *mask_out = std::move(mask);
  return out;
}

template <class T>
TensorT<T> dropout_backward(const TensorT<T>& gout, const TensorT<T>& mask) {
  if (!gout.same_shape(mask)) throw ShapeError("dropout backward: mask shape");
  TensorT<T> dx = gout;
  for (std::size_t i = 0; i < dx.numel(); ++i) dx.data[i] *= mask.data[i];
  return dx;
}

}  // namespace macbig

#endif
