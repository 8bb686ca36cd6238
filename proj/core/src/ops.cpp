// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include "aad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace aad::nn {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

[[noreturn]] void shape_error(const std::string& op, const std::string& what) {
  throw Error(ErrorCode::ShapeMismatch, op + ": " + what);
}

template <typename T>
void require_ndim(const Tensor<T>& t, std::size_t nd, const char* op, const char* arg) {
  if (t.ndim() != nd) {
    shape_error(op, std::string(arg) + " must be " + std::to_string(nd) + "-d, got " + shape_string(t.shape()));
  }
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b)) shape_error(op, shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

// c = op(a)·op(b), or c += op(a)·op(b), row-major. Operands and result are
// staged in Eigen-allocated storage so the kernel path depends only on sizes.
template <typename T>
void gemm(const T* a, int a_rows, int a_cols, bool trans_a, const T* b, int b_rows, int b_cols, bool trans_b, T* c,
          bool accumulate) {
  const RowMat<T> A = CMapMat<T>(a, a_rows, a_cols);
  const RowMat<T> B = CMapMat<T>(b, b_rows, b_cols);
  RowMat<T> C;
  if (trans_a && trans_b) {
    C.noalias() = A.transpose() * B.transpose();
  } else if (trans_a) {
    C.noalias() = A.transpose() * B;
  } else if (trans_b) {
    C.noalias() = A * B.transpose();
  } else {
    C.noalias() = A * B;
  }
  const T* src = C.data();
  const std::size_t n = static_cast<std::size_t>(C.size());
  if (accumulate) {
    for (std::size_t i = 0; i < n; ++i) c[i] += src[i];
  } else {
    std::copy(src, src + n, c);
  }
}

// Sliding-window geometry of a convolution over a c×h×w image.
struct ConvGeom {
  int c, h, w, k, stride, pad, oh, ow;
  int ckk() const { return c * k * k; }
  int ohw() const { return oh * ow; }
  int hw() const { return h * w; }
};

// col: (c·k·k) × (oh·ow)
template <typename T>
void im2col(const T* img, const ConvGeom& g, T* col) {
  const int ohw = g.ohw();
  for (int c = 0; c < g.c; ++c) {
    const T* plane = img + static_cast<std::size_t>(c) * g.hw();
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        T* dst = col + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * ohw;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          T* row = dst + oy * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(row, row + g.ow, T(0));
            continue;
          }
          const T* src = plane + iy * g.w;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            row[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adds the columns back into img (inverse scatter of im2col).
template <typename T>
void col2im(const T* col, const ConvGeom& g, T* img) {
  const int ohw = g.ohw();
  for (int c = 0; c < g.c; ++c) {
    T* plane = img + static_cast<std::size_t>(c) * g.hw();
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const T* src = col + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * ohw;
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.h) continue;
          T* dst = plane + iy * g.w;
          const T* row = src + oy * g.ow;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kj;
            if (ix >= 0 && ix < g.w) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void check_bias(const Graph<T>& g, Var b, int channels, const char* op) {
  if (!b.valid()) return;
  const auto& bt = g.value(b);
  if (bt.ndim() != 1 || bt.dim(0) != channels) {
    shape_error(op, "bias " + shape_string(bt.shape()) + " for " + std::to_string(channels) + " channels");
  }
}

template <typename T>
std::vector<int> parents_of(std::initializer_list<Var> vars) {
  std::vector<int> out;
  for (Var v : vars) {
    if (v.valid()) out.push_back(v.id);
  }
  return out;
}

}  // namespace

template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b, int stride, int pad) {
  const Tensor<T>& X = g.value(x);
  const Tensor<T>& W = g.value(w);
  require_ndim(X, 4, "conv2d", "input");
  require_ndim(W, 4, "conv2d", "weight");
  if (W.dim(1) != X.dim(1) || W.dim(2) != W.dim(3)) {
    shape_error("conv2d", "weight " + shape_string(W.shape()) + " vs input " + shape_string(X.shape()));
  }
  const int n_batch = X.dim(0);
  const int cout = W.dim(0);
  ConvGeom geom{X.dim(1), X.dim(2), X.dim(3), W.dim(2), stride, pad, 0, 0};
  geom.oh = (geom.h + 2 * pad - geom.k) / stride + 1;
  geom.ow = (geom.w + 2 * pad - geom.k) / stride + 1;
  if (geom.oh < 1 || geom.ow < 1 || geom.h + 2 * pad < geom.k) {
    shape_error("conv2d", "kernel larger than padded input " + shape_string(X.shape()));
  }
  check_bias(g, b, cout, "conv2d");

  const bool direct = geom.k == 1 && stride == 1 && pad == 0;
  const int ckk = geom.ckk();
  const int ohw = geom.ohw();
  Tensor<T> Y({n_batch, cout, geom.oh, geom.ow});
  std::vector<T> col(direct ? 0 : static_cast<std::size_t>(ckk) * ohw);
  for (int n = 0; n < n_batch; ++n) {
    const T* xn = X.data() + static_cast<std::size_t>(n) * geom.c * geom.hw();
    const T* cp = xn;
    if (!direct) {
      im2col(xn, geom, col.data());
      cp = col.data();
    }
    T* yn = Y.data() + static_cast<std::size_t>(n) * cout * ohw;
    gemm(W.data(), cout, ckk, false, cp, ckk, ohw, false, yn, false);
    if (b.valid()) {
      const Tensor<T>& B = g.value(b);
      for (int c = 0; c < cout; ++c) {
        for (int i = 0; i < ohw; ++i) yn[static_cast<std::size_t>(c) * ohw + i] += B[c];
      }
    }
  }

  return g.record(std::move(Y), parents_of<T>({x, w, b}), [x, w, b, geom, n_batch, cout, direct](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    const Tensor<T>& X = g.value(x);
    const Tensor<T>& W = g.value(w);
    const bool need_x = g.requires_grad(x.id);
    const bool need_w = g.requires_grad(w.id);
    const bool need_b = b.valid() && g.requires_grad(b.id);
    const int ckk = geom.ckk();
    const int ohw = geom.ohw();
    T* dx = need_x ? g.grad_ref(x.id).data() : nullptr;
    T* dw = need_w ? g.grad_ref(w.id).data() : nullptr;
    T* db = need_b ? g.grad_ref(b.id).data() : nullptr;
    std::vector<T> col(direct ? 0 : static_cast<std::size_t>(ckk) * ohw);
    for (int n = 0; n < n_batch; ++n) {
      const T* xn = X.data() + static_cast<std::size_t>(n) * geom.c * geom.hw();
      const T* dyn = dY.data() + static_cast<std::size_t>(n) * cout * ohw;
      if (need_w) {
        const T* cp = xn;
        if (!direct) {
          im2col(xn, geom, col.data());
          cp = col.data();
        }
        gemm(dyn, cout, ohw, false, cp, ckk, ohw, true, dw, true);
      }
      if (need_b) {
        for (int c = 0; c < cout; ++c) {
          T s = 0;
          for (int i = 0; i < ohw; ++i) s += dyn[static_cast<std::size_t>(c) * ohw + i];
          db[c] += s;
        }
      }
      if (need_x) {
        T* dxn = dx + static_cast<std::size_t>(n) * geom.c * geom.hw();
        if (direct) {
          gemm(W.data(), cout, ckk, true, dyn, cout, ohw, false, dxn, true);
        } else {
          gemm(W.data(), cout, ckk, true, dyn, cout, ohw, false, col.data(), false);
          col2im(col.data(), geom, dxn);
        }
      }
    }
  });
}

template <typename T>
Var conv_transpose2d(Graph<T>& g, Var x, Var w, Var b, int stride, int pad, int output_pad) {
  const Tensor<T>& X = g.value(x);
  const Tensor<T>& W = g.value(w);
  require_ndim(X, 4, "conv_transpose2d", "input");
  require_ndim(W, 4, "conv_transpose2d", "weight");
  if (W.dim(0) != X.dim(1) || W.dim(2) != W.dim(3)) {
    shape_error("conv_transpose2d", "weight " + shape_string(W.shape()) + " vs input " + shape_string(X.shape()));
  }
  if (output_pad < 0 || output_pad >= stride) shape_error("conv_transpose2d", "output_pad must be in [0, stride)");
  const int n_batch = X.dim(0);
  const int cin = X.dim(1);
  const int h = X.dim(2);
  const int wd = X.dim(3);
  const int cout = W.dim(1);
  const int k = W.dim(2);
  const int oh = (h - 1) * stride - 2 * pad + k + output_pad;
  const int ow = (wd - 1) * stride - 2 * pad + k + output_pad;
  if (oh < 1 || ow < 1) shape_error("conv_transpose2d", "empty output for input " + shape_string(X.shape()));
  check_bias(g, b, cout, "conv_transpose2d");

  // The output image is the "input" of the adjoint convolution.
  ConvGeom geom{cout, oh, ow, k, stride, pad, h, wd};
  const int ckk = geom.ckk();
  const int hw_in = h * wd;
  Tensor<T> Y({n_batch, cout, oh, ow});
  std::vector<T> col(static_cast<std::size_t>(ckk) * hw_in);
  for (int n = 0; n < n_batch; ++n) {
    const T* xn = X.data() + static_cast<std::size_t>(n) * cin * hw_in;
    gemm(W.data(), cin, ckk, true, xn, cin, hw_in, false, col.data(), false);
    T* yn = Y.data() + static_cast<std::size_t>(n) * cout * oh * ow;
    col2im(col.data(), geom, yn);
    if (b.valid()) {
      const Tensor<T>& B = g.value(b);
      for (int c = 0; c < cout; ++c) {
        T* plane = yn + static_cast<std::size_t>(c) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) plane[i] += B[c];
      }
    }
  }

  return g.record(std::move(Y), parents_of<T>({x, w, b}), [x, w, b, geom, n_batch, cin, hw_in](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    const Tensor<T>& X = g.value(x);
    const Tensor<T>& W = g.value(w);
    const bool need_x = g.requires_grad(x.id);
    const bool need_w = g.requires_grad(w.id);
    const bool need_b = b.valid() && g.requires_grad(b.id);
    const int ckk = geom.ckk();
    const int out_hw = geom.hw();
    T* dx = need_x ? g.grad_ref(x.id).data() : nullptr;
    T* dw = need_w ? g.grad_ref(w.id).data() : nullptr;
    T* db = need_b ? g.grad_ref(b.id).data() : nullptr;
    std::vector<T> col(static_cast<std::size_t>(ckk) * hw_in);
    for (int n = 0; n < n_batch; ++n) {
      const T* dyn = dY.data() + static_cast<std::size_t>(n) * geom.c * out_hw;
      if (need_b) {
        for (int c = 0; c < geom.c; ++c) {
          const T* plane = dyn + static_cast<std::size_t>(c) * out_hw;
          T s = 0;
          for (int i = 0; i < out_hw; ++i) s += plane[i];
          db[c] += s;
        }
      }
      if (!need_x && !need_w) continue;
      im2col(dyn, geom, col.data());
      if (need_x) {
        gemm(W.data(), cin, ckk, false, col.data(), ckk, hw_in, false, dx + static_cast<std::size_t>(n) * cin * hw_in,
             true);
      }
      if (need_w) {
        const T* xn = X.data() + static_cast<std::size_t>(n) * cin * hw_in;
        gemm(xn, cin, hw_in, false, col.data(), ckk, hw_in, true, dw, true);
      }
    }
  });
}

template <typename T>
Var instance_norm(Graph<T>& g, Var x, T eps) {
  const Tensor<T>& X = g.value(x);
  require_ndim(X, 4, "instance_norm", "input");
  const int planes = X.dim(0) * X.dim(1);
  const int hw = X.dim(2) * X.dim(3);
  Tensor<T> Y(X.shape());
  std::vector<T> inv_std(planes);
  for (int p = 0; p < planes; ++p) {
    const T* src = X.data() + static_cast<std::size_t>(p) * hw;
    double mean = 0.0;
    for (int i = 0; i < hw; ++i) mean += src[i];
    mean /= hw;
    double var = 0.0;
    for (int i = 0; i < hw; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= hw;
    const T is = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    inv_std[p] = is;
    T* dst = Y.data() + static_cast<std::size_t>(p) * hw;
    const T m = static_cast<T>(mean);
    for (int i = 0; i < hw; ++i) dst[i] = (src[i] - m) * is;
  }
  return g.record(std::move(Y), {x.id}, [x, planes, hw, inv_std = std::move(inv_std)](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    const Tensor<T>& Y = g.value(self);
    T* dx = g.grad_ref(x.id).data();
    for (int p = 0; p < planes; ++p) {
      const std::size_t off = static_cast<std::size_t>(p) * hw;
      double mean_dy = 0.0;
      double mean_dyy = 0.0;
      for (int i = 0; i < hw; ++i) {
        mean_dy += dY[off + i];
        mean_dyy += static_cast<double>(dY[off + i]) * Y[off + i];
      }
      const T mdy = static_cast<T>(mean_dy / hw);
      const T mdyy = static_cast<T>(mean_dyy / hw);
      for (int i = 0; i < hw; ++i) dx[off + i] += inv_std[p] * (dY[off + i] - mdy - Y[off + i] * mdyy);
    }
  });
}

template <typename T>
Var relu(Graph<T>& g, Var x) {
  const Tensor<T>& X = g.value(x);
  Tensor<T> Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = X[i] > T(0) ? X[i] : T(0);
  return g.record(std::move(Y), {x.id}, [x](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    const Tensor<T>& X = g.value(x);
    Tensor<T>& dX = g.grad_ref(x.id);
    for (std::size_t i = 0; i < X.size(); ++i) {
      if (X[i] > T(0)) dX[i] += dY[i];
    }
  });
}

template <typename T>
Var sigmoid(Graph<T>& g, Var x) {
  const Tensor<T>& X = g.value(x);
  Tensor<T> Y(X.shape());
  const T lo = std::numeric_limits<T>::min();
  const T hi = std::nextafter(T(1), T(0));
  for (std::size_t i = 0; i < X.size(); ++i) {
    Y[i] = std::clamp(T(1) / (T(1) + std::exp(-X[i])), lo, hi);
  }
  return g.record(std::move(Y), {x.id}, [x](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    const Tensor<T>& Y = g.value(self);
    Tensor<T>& dX = g.grad_ref(x.id);
    for (std::size_t i = 0; i < Y.size(); ++i) dX[i] += dY[i] * Y[i] * (T(1) - Y[i]);
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& A = g.value(a);
  const Tensor<T>& B = g.value(b);
  require_same(A, B, "add");
  Tensor<T> Y(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) Y[i] = A[i] + B[i];
  return g.record(std::move(Y), {a.id, b.id}, [a, b](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    for (Var v : {a, b}) {
      if (!g.requires_grad(v.id)) continue;
      Tensor<T>& d = g.grad_ref(v.id);
      for (std::size_t i = 0; i < dY.size(); ++i) d[i] += dY[i];
    }
  });
}

template <typename T>
Var add_scalar(Graph<T>& g, Var a, T s) {
  const Tensor<T>& A = g.value(a);
  Tensor<T> Y(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) Y[i] = A[i] + s;
  return g.record(std::move(Y), {a.id}, [a](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    Tensor<T>& d = g.grad_ref(a.id);
    for (std::size_t i = 0; i < dY.size(); ++i) d[i] += dY[i];
  });
}

template <typename T>
Var scale(Graph<T>& g, Var a, T s) {
  const Tensor<T>& A = g.value(a);
  Tensor<T> Y(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) Y[i] = A[i] * s;
  return g.record(std::move(Y), {a.id}, [a, s](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    Tensor<T>& d = g.grad_ref(a.id);
    for (std::size_t i = 0; i < dY.size(); ++i) d[i] += dY[i] * s;
  });
}

template <typename T>
Var mul_channel_broadcast(Graph<T>& g, Var m, Var x) {
  const Tensor<T>& M = g.value(m);
  const Tensor<T>& X = g.value(x);
  require_ndim(M, 4, "mul_channel_broadcast", "map");
  require_ndim(X, 4, "mul_channel_broadcast", "input");
  if (M.dim(0) != X.dim(0) || M.dim(1) != 1 || M.dim(2) != X.dim(2) || M.dim(3) != X.dim(3)) {
    shape_error("mul_channel_broadcast", "map " + shape_string(M.shape()) + " vs input " + shape_string(X.shape()));
  }
  const int n_batch = X.dim(0);
  const int channels = X.dim(1);
  const int hw = X.dim(2) * X.dim(3);
  Tensor<T> Y(X.shape());
  for (int n = 0; n < n_batch; ++n) {
    const T* mp = M.data() + static_cast<std::size_t>(n) * hw;
    for (int c = 0; c < channels; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels + c) * hw;
      for (int i = 0; i < hw; ++i) Y[off + i] = mp[i] * X[off + i];
    }
  }
  return g.record(std::move(Y), {m.id, x.id}, [m, x, n_batch, channels, hw](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    const Tensor<T>& M = g.value(m);
    const Tensor<T>& X = g.value(x);
    const bool need_m = g.requires_grad(m.id);
    const bool need_x = g.requires_grad(x.id);
    T* dm = need_m ? g.grad_ref(m.id).data() : nullptr;
    T* dx = need_x ? g.grad_ref(x.id).data() : nullptr;
    for (int n = 0; n < n_batch; ++n) {
      const T* mp = M.data() + static_cast<std::size_t>(n) * hw;
      for (int c = 0; c < channels; ++c) {
        const std::size_t off = (static_cast<std::size_t>(n) * channels + c) * hw;
        for (int i = 0; i < hw; ++i) {
          if (need_m) dm[static_cast<std::size_t>(n) * hw + i] += dY[off + i] * X[off + i];
          if (need_x) dx[off + i] += dY[off + i] * mp[i];
        }
      }
    }
  });
}

template <typename T>
Var global_avg_pool(Graph<T>& g, Var x) {
  const Tensor<T>& X = g.value(x);
  require_ndim(X, 4, "global_avg_pool", "input");
  const int n_batch = X.dim(0);
  const int channels = X.dim(1);
  const int hw = X.dim(2) * X.dim(3);
  Tensor<T> Y({n_batch, channels});
  for (int p = 0; p < n_batch * channels; ++p) {
    const T* src = X.data() + static_cast<std::size_t>(p) * hw;
    T s = 0;
    for (int i = 0; i < hw; ++i) s += src[i];
    Y[p] = s / static_cast<T>(hw);
  }
  return g.record(std::move(Y), {x.id}, [x, n_batch, channels, hw](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    T* dx = g.grad_ref(x.id).data();
    for (int p = 0; p < n_batch * channels; ++p) {
      const T v = dY[p] / static_cast<T>(hw);
      T* dst = dx + static_cast<std::size_t>(p) * hw;
      for (int i = 0; i < hw; ++i) dst[i] += v;
    }
  });
}

template <typename T>
Var concat_channels(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& A = g.value(a);
  const Tensor<T>& B = g.value(b);
  if (A.ndim() < 2 || A.ndim() != B.ndim() || A.dim(0) != B.dim(0) ||
      !std::equal(A.shape().begin() + 2, A.shape().end(), B.shape().begin() + 2)) {
    shape_error("concat_channels", shape_string(A.shape()) + " vs " + shape_string(B.shape()));
  }
  const int n_batch = A.dim(0);
  const std::size_t inner = shape_size(std::vector<int>(A.shape().begin() + 2, A.shape().end()));
  const std::size_t sa = A.dim(1) * inner;
  const std::size_t sb = B.dim(1) * inner;
  std::vector<int> shape = A.shape();
  shape[1] = A.dim(1) + B.dim(1);
  Tensor<T> Y(shape);
  for (int n = 0; n < n_batch; ++n) {
    std::copy_n(A.data() + n * sa, sa, Y.data() + n * (sa + sb));
    std::copy_n(B.data() + n * sb, sb, Y.data() + n * (sa + sb) + sa);
  }
  return g.record(std::move(Y), {a.id, b.id}, [a, b, n_batch, sa, sb](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    if (g.requires_grad(a.id)) {
      T* da = g.grad_ref(a.id).data();
      for (int n = 0; n < n_batch; ++n) {
        for (std::size_t i = 0; i < sa; ++i) da[n * sa + i] += dY[n * (sa + sb) + i];
      }
    }
    if (g.requires_grad(b.id)) {
      T* db = g.grad_ref(b.id).data();
      for (int n = 0; n < n_batch; ++n) {
        for (std::size_t i = 0; i < sb; ++i) db[n * sb + i] += dY[n * (sa + sb) + sa + i];
      }
    }
  });
}

template <typename T>
Var linear(Graph<T>& g, Var x, Var w, Var b) {
  const Tensor<T>& X = g.value(x);
  const Tensor<T>& W = g.value(w);
  require_ndim(X, 2, "linear", "input");
  require_ndim(W, 2, "linear", "weight");
  if (W.dim(1) != X.dim(1)) shape_error("linear", "weight " + shape_string(W.shape()) + " vs input " + shape_string(X.shape()));
  const int n_batch = X.dim(0);
  const int k = X.dim(1);
  const int o = W.dim(0);
  check_bias(g, b, o, "linear");
  Tensor<T> Y({n_batch, o});
  gemm(X.data(), n_batch, k, false, W.data(), o, k, true, Y.data(), false);
  if (b.valid()) {
    const Tensor<T>& B = g.value(b);
    for (int n = 0; n < n_batch; ++n) {
      for (int j = 0; j < o; ++j) Y[n * o + j] += B[j];
    }
  }
  return g.record(std::move(Y), parents_of<T>({x, w, b}), [x, w, b, n_batch, k, o](Graph<T>& g, int self) {
    const T* dy = g.grad_ref(self).data();
    if (g.requires_grad(x.id)) gemm(dy, n_batch, o, false, g.value(w).data(), o, k, false, g.grad_ref(x.id).data(), true);
    if (g.requires_grad(w.id)) gemm(dy, n_batch, o, true, g.value(x).data(), n_batch, k, false, g.grad_ref(w.id).data(), true);
    if (b.valid() && g.requires_grad(b.id)) {
      T* db = g.grad_ref(b.id).data();
      for (int n = 0; n < n_batch; ++n) {
        for (int j = 0; j < o; ++j) db[j] += dy[n * o + j];
      }
    }
  });
}

template <typename T>
Var crop(Graph<T>& g, Var x, std::span<const CropOrigin> origins, int h, int w) {
  const Tensor<T>& X = g.value(x);
  require_ndim(X, 4, "crop", "input");
  const int n_batch = X.dim(0);
  const int channels = X.dim(1);
  const int H = X.dim(2);
  const int W = X.dim(3);
  if (static_cast<int>(origins.size()) != n_batch) {
    shape_error("crop", std::to_string(origins.size()) + " windows for batch of " + std::to_string(n_batch));
  }
  for (const auto& o : origins) {
    if (h < 1 || w < 1 || o.top < 0 || o.left < 0 || o.top + h > H || o.left + w > W) {
      throw Error(ErrorCode::RoiOutOfBounds, "window (" + std::to_string(o.top) + "," + std::to_string(o.left) + "," +
                                                 std::to_string(h) + "," + std::to_string(w) + ") outside " +
                                                 std::to_string(H) + "x" + std::to_string(W));
    }
  }
  std::vector<CropOrigin> org(origins.begin(), origins.end());
  Tensor<T> Y({n_batch, channels, h, w});
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < channels; ++c) {
      for (int i = 0; i < h; ++i) {
        const T* src = &X.at(n, c, org[n].top + i, org[n].left);
        std::copy_n(src, w, &Y.at(n, c, i, 0));
      }
    }
  }
  return g.record(std::move(Y), {x.id}, [x, org = std::move(org), channels, h, w](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    Tensor<T>& dX = g.grad_ref(x.id);
    for (std::size_t n = 0; n < org.size(); ++n) {
      for (int c = 0; c < channels; ++c) {
        for (int i = 0; i < h; ++i) {
          for (int j = 0; j < w; ++j) dX.at(n, c, org[n].top + i, org[n].left + j) += dY.at(n, c, i, j);
        }
      }
    }
  });
}

template <typename T>
Var upsample_nearest2x(Graph<T>& g, Var x) {
  const Tensor<T>& X = g.value(x);
  require_ndim(X, 4, "upsample_nearest2x", "input");
  const int planes = X.dim(0) * X.dim(1);
  const int h = X.dim(2);
  const int w = X.dim(3);
  Tensor<T> Y({X.dim(0), X.dim(1), 2 * h, 2 * w});
  for (int p = 0; p < planes; ++p) {
    const T* src = X.data() + static_cast<std::size_t>(p) * h * w;
    T* dst = Y.data() + static_cast<std::size_t>(p) * 4 * h * w;
    for (int i = 0; i < 2 * h; ++i) {
      for (int j = 0; j < 2 * w; ++j) dst[i * 2 * w + j] = src[(i / 2) * w + j / 2];
    }
  }
  return g.record(std::move(Y), {x.id}, [x, planes, h, w](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    T* dx = g.grad_ref(x.id).data();
    for (int p = 0; p < planes; ++p) {
      const T* src = dY.data() + static_cast<std::size_t>(p) * 4 * h * w;
      T* dst = dx + static_cast<std::size_t>(p) * h * w;
      for (int i = 0; i < 2 * h; ++i) {
        for (int j = 0; j < 2 * w; ++j) dst[(i / 2) * w + j / 2] += src[i * 2 * w + j];
      }
    }
  });
}

template <typename T>
Var avg_pool2x2(Graph<T>& g, Var x) {
  const Tensor<T>& X = g.value(x);
  require_ndim(X, 4, "avg_pool2x2", "input");
  if (X.dim(2) % 2 != 0 || X.dim(3) % 2 != 0) shape_error("avg_pool2x2", "odd spatial dims " + shape_string(X.shape()));
  const int planes = X.dim(0) * X.dim(1);
  const int oh = X.dim(2) / 2;
  const int ow = X.dim(3) / 2;
  Tensor<T> Y({X.dim(0), X.dim(1), oh, ow});
  for (int p = 0; p < planes; ++p) {
    const T* src = X.data() + static_cast<std::size_t>(p) * 4 * oh * ow;
    T* dst = Y.data() + static_cast<std::size_t>(p) * oh * ow;
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        const T* q = src + (2 * i) * (2 * ow) + 2 * j;
        dst[i * ow + j] = (q[0] + q[1] + q[2 * ow] + q[2 * ow + 1]) * T(0.25);
      }
    }
  }
  return g.record(std::move(Y), {x.id}, [x, planes, oh, ow](Graph<T>& g, int self) {
    const Tensor<T>& dY = g.grad_ref(self);
    T* dx = g.grad_ref(x.id).data();
    for (int p = 0; p < planes; ++p) {
      const T* src = dY.data() + static_cast<std::size_t>(p) * oh * ow;
      T* dst = dx + static_cast<std::size_t>(p) * 4 * oh * ow;
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          const T v = src[i * ow + j] * T(0.25);
          T* q = dst + (2 * i) * (2 * ow) + 2 * j;
          q[0] += v;
          q[1] += v;
          q[2 * ow] += v;
          q[2 * ow + 1] += v;
        }
      }
    }
  });
}

namespace {

// Scalar reduction sum_i f(x_i) / n with elementwise derivative f'(x_i) / n.
template <typename T, typename F, typename DF>
Var mean_reduce(Graph<T>& g, Var x, F f, DF df) {
  const Tensor<T>& X = g.value(x);
  if (X.empty()) shape_error("mean", "empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) s += static_cast<double>(f(X[i]));
  Tensor<T> Y({1}, static_cast<T>(s / static_cast<double>(X.size())));
  return g.record(std::move(Y), {x.id}, [x, df](Graph<T>& g, int self) {
    const T dy = g.grad_ref(self)[0];
    const Tensor<T>& X = g.value(x);
    Tensor<T>& dX = g.grad_ref(x.id);
    const T inv_n = T(1) / static_cast<T>(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) dX[i] += dy * inv_n * df(X[i]);
  });
}

}  // namespace

template <typename T>
Var mean_all(Graph<T>& g, Var x) {
  return mean_reduce(g, x, [](T v) { return v; }, [](T) { return T(1); });
}

template <typename T>
Var mean_square(Graph<T>& g, Var x) {
  return mean_reduce(g, x, [](T v) { return v * v; }, [](T v) { return T(2) * v; });
}

template <typename T>
Var mean_log_clamped(Graph<T>& g, Var x, T lo, T hi) {
  return mean_reduce(
      g, x, [lo, hi](T v) { return std::log(std::clamp(v, lo, hi)); },
      [lo, hi](T v) { return (v >= lo && v <= hi) ? T(1) / v : T(0); });
}

template <typename T>
Var mean_log1m_clamped(Graph<T>& g, Var x, T lo, T hi) {
  return mean_reduce(
      g, x, [lo, hi](T v) { return std::log(T(1) - std::clamp(v, lo, hi)); },
      [lo, hi](T v) { return (v >= lo && v <= hi) ? T(-1) / (T(1) - v) : T(0); });
}

template <typename T>
Var mean_abs_diff(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& A = g.value(a);
  const Tensor<T>& B = g.value(b);
  require_same(A, B, "mean_abs_diff");
  if (A.empty()) shape_error("mean_abs_diff", "empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += std::abs(static_cast<double>(A[i]) - static_cast<double>(B[i]));
  Tensor<T> Y({1}, static_cast<T>(s / static_cast<double>(A.size())));
  return g.record(std::move(Y), {a.id, b.id}, [a, b](Graph<T>& g, int self) {
    const T dy = g.grad_ref(self)[0];
    const Tensor<T>& A = g.value(a);
    const Tensor<T>& B = g.value(b);
    const T inv_n = T(1) / static_cast<T>(A.size());
    const bool need_a = g.requires_grad(a.id);
    const bool need_b = g.requires_grad(b.id);
    T* da = need_a ? g.grad_ref(a.id).data() : nullptr;
    T* db = need_b ? g.grad_ref(b.id).data() : nullptr;
    for (std::size_t i = 0; i < A.size(); ++i) {
      const T d = A[i] - B[i];
      const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      if (need_a) da[i] += dy * inv_n * s;
      if (need_b) db[i] -= dy * inv_n * s;
    }
  });
}

#define AAD_INSTANTIATE_OPS(T)                                                                 \
  template Var conv2d<T>(Graph<T>&, Var, Var, Var, int, int);                                  \
  template Var conv_transpose2d<T>(Graph<T>&, Var, Var, Var, int, int, int);                   \
  template Var instance_norm<T>(Graph<T>&, Var, T);                                            \
  template Var relu<T>(Graph<T>&, Var);                                                        \
  template Var sigmoid<T>(Graph<T>&, Var);                                                     \
  template Var add<T>(Graph<T>&, Var, Var);                                                    \
  template Var add_scalar<T>(Graph<T>&, Var, T);                                               \
  template Var scale<T>(Graph<T>&, Var, T);                                                    \
  template Var mul_channel_broadcast<T>(Graph<T>&, Var, Var);                                  \
  template Var global_avg_pool<T>(Graph<T>&, Var);                                             \
  template Var concat_channels<T>(Graph<T>&, Var, Var);                                        \
  template Var linear<T>(Graph<T>&, Var, Var, Var);                                            \
  template Var crop<T>(Graph<T>&, Var, std::span<const CropOrigin>, int, int);                 \
  template Var upsample_nearest2x<T>(Graph<T>&, Var);                                          \
  template Var avg_pool2x2<T>(Graph<T>&, Var);                                                 \
  template Var mean_all<T>(Graph<T>&, Var);                                                    \
  template Var mean_square<T>(Graph<T>&, Var);                                                 \
  template Var mean_log_clamped<T>(Graph<T>&, Var, T, T);                                      \
  template Var mean_log1m_clamped<T>(Graph<T>&, Var, T, T);                                    \
  template Var mean_abs_diff<T>(Graph<T>&, Var, Var);

AAD_INSTANTIATE_OPS(float)
AAD_INSTANTIATE_OPS(double)

}  // namespace aad::nn
