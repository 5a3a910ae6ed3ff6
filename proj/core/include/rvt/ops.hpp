#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "rvt/tensor.hpp"

// Dense kernels. Every op builds its output value eagerly and, when at least
// one input is tracked, attaches a node whose closure replays the chain rule
// into the parents. Kernels are sequential; accumulation order is fixed by
// the loop structure.

namespace rvt {

namespace detail {

template <typename T>
std::shared_ptr<Node<T>> make_node(
    Tensor<T>& out, std::initializer_list<std::shared_ptr<Node<T>>> parents) {
  auto node = std::make_shared<Node<T>>();
  node->numel = out.numel();
  for (const auto& p : parents)
    if (p) node->parents.push_back(p);
  out.set_node(node);
  return node;
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b,
                      const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  const std::size_t n = static_cast<std::size_t>(a.numel());
  std::vector<T> out(n);
  const T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] + pb[i];
  Tensor<T> r(a.shape(), std::move(out));
  if (a.tracked() || b.tracked()) {
    auto node = detail::make_node(r, {a.node(), b.node()});
    node->backprop = [an = a.node(), bn = b.node(), n](const std::vector<T>& g) {
      if (an) {
        auto& ga = an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (bn) {
        auto& gb = bn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
      }
    };
  }
  return r;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  const std::size_t n = static_cast<std::size_t>(a.numel());
  std::vector<T> out(n);
  const T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] * pb[i];
  Tensor<T> r(a.shape(), std::move(out));
  if (a.tracked() || b.tracked()) {
    auto node = detail::make_node(r, {a.node(), b.node()});
    node->backprop = [an = a.node(), bn = b.node(), av = a.detach(),
                      bv = b.detach(), n](const std::vector<T>& g) {
      if (an) {
        auto& ga = an->ensure_grad();
        const T* pb2 = bv.data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * pb2[i];
      }
      if (bn) {
        auto& gb = bn->ensure_grad();
        const T* pa2 = av.data();
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * pa2[i];
      }
    };
  }
  return r;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  const std::size_t n = static_cast<std::size_t>(x.numel());
  std::vector<T> out(n);
  const T* px = x.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = px[i] * c;
  Tensor<T> r(x.shape(), std::move(out));
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node(), c, n](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * c;
    };
  }
  return r;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
  const std::size_t n = static_cast<std::size_t>(x.numel());
  std::vector<T> out(n);
  const T* px = x.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = px[i] + c;
  Tensor<T> r(x.shape(), std::move(out));
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node(), n](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i];
    };
  }
  return r;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, scale(b, T(-1)));
}

// Broadcast a length-C bias over the trailing axis.
template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (bias.rank() != 1 || x.rank() < 1 ||
      x.dim(x.rank() - 1) != bias.dim(0))
    throw ShapeError("add_row_bias: trailing axis " + shape_str(x.shape()) +
                     " vs bias " + shape_str(bias.shape()));
  const std::size_t c = static_cast<std::size_t>(bias.dim(0));
  const std::size_t rows = static_cast<std::size_t>(x.numel()) / c;
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const T* px = x.data();
  const T* pb = bias.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = px[r * c + j] + pb[j];
  Tensor<T> r(x.shape(), std::move(out));
  if (x.tracked() || bias.tracked()) {
    auto node = detail::make_node(r, {x.node(), bias.node()});
    node->backprop = [xn = x.node(), bn = bias.node(), rows,
                      c](const std::vector<T>& g) {
      if (xn) {
        auto& gx = xn->ensure_grad();
        for (std::size_t i = 0; i < rows * c; ++i) gx[i] += g[i];
      }
      if (bn) {
        auto& gb = bn->ensure_grad();
        for (std::size_t r2 = 0; r2 < rows; ++r2)
          for (std::size_t j = 0; j < c; ++j) gb[j] += g[r2 * c + j];
      }
    };
  }
  return r;
}

// Broadcast a length-C bias over the channel axis of a [B,C,H,W] tensor.
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() != 4 || bias.rank() != 1 || x.dim(1) != bias.dim(0))
    throw ShapeError("add_channel_bias: " + shape_str(x.shape()) + " vs " +
                     shape_str(bias.shape()));
  const std::size_t b = static_cast<std::size_t>(x.dim(0));
  const std::size_t c = static_cast<std::size_t>(x.dim(1));
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) *
                         static_cast<std::size_t>(x.dim(3));
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  const T* px = x.data();
  const T* pb = bias.data();
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t ci = 0; ci < c; ++ci) {
      const std::size_t base = (bi * c + ci) * hw;
      for (std::size_t i = 0; i < hw; ++i) out[base + i] = px[base + i] + pb[ci];
    }
  Tensor<T> r(x.shape(), std::move(out));
  if (x.tracked() || bias.tracked()) {
    auto node = detail::make_node(r, {x.node(), bias.node()});
    node->backprop = [xn = x.node(), bn = bias.node(), b, c,
                      hw](const std::vector<T>& g) {
      if (xn) {
        auto& gx = xn->ensure_grad();
        for (std::size_t i = 0; i < b * c * hw; ++i) gx[i] += g[i];
      }
      if (bn) {
        auto& gb = bn->ensure_grad();
        for (std::size_t bi = 0; bi < b; ++bi)
          for (std::size_t ci = 0; ci < c; ++ci) {
            const std::size_t base = (bi * c + ci) * hw;
            T s = 0;
            for (std::size_t i = 0; i < hw; ++i) s += g[base + i];
            gb[ci] += s;
          }
      }
    };
  }
  return r;
}

// ---------------------------------------------------------------------------
// linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  const std::size_t m = static_cast<std::size_t>(a.dim(0));
  const std::size_t k = static_cast<std::size_t>(a.dim(1));
  const std::size_t n = static_cast<std::size_t>(b.dim(1));
  std::vector<T> out(m * n, T(0));
  const T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T av = pa[i * k + kk];
      const T* brow = pb + kk * n;
      T* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  Tensor<T> r(Shape{static_cast<int>(m), static_cast<int>(n)},
              std::move(out));
  if (a.tracked() || b.tracked()) {
    auto node = detail::make_node(r, {a.node(), b.node()});
    node->backprop = [an = a.node(), bn = b.node(), av = a.detach(),
                      bv = b.detach(), m, k, n](const std::vector<T>& g) {
      if (an) {  // dA = dC * B^T
        auto& ga = an->ensure_grad();
        const T* pb2 = bv.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t kk = 0; kk < k; ++kk) {
            T s = 0;
            const T* grow = g.data() + i * n;
            const T* brow = pb2 + kk * n;
            for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
            ga[i * k + kk] += s;
          }
      }
      if (bn) {  // dB = A^T * dC
        auto& gb = bn->ensure_grad();
        const T* pa2 = av.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t kk = 0; kk < k; ++kk) {
            const T a2 = pa2[i * k + kk];
            const T* grow = g.data() + i * n;
            T* gbrow = gb.data() + kk * n;
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += a2 * grow[j];
          }
      }
    };
  }
  return r;
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& x) {
  if (x.rank() != 2)
    throw ShapeError("transpose2d: expected rank 2, got " +
                     shape_str(x.shape()));
  const std::size_t m = static_cast<std::size_t>(x.dim(0));
  const std::size_t n = static_cast<std::size_t>(x.dim(1));
  std::vector<T> out(m * n);
  const T* px = x.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = px[i * n + j];
  Tensor<T> r(Shape{static_cast<int>(n), static_cast<int>(m)},
              std::move(out));
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node(), m, n](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[j * m + i];
    };
  }
  return r;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  Tensor<T> r(std::move(shape), x.vec());
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node()](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    };
  }
  return r;
}

// ---------------------------------------------------------------------------
// row assembly

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  const int c = parts[0].rank() == 2 ? parts[0].dim(1) : -1;
  int rows = 0;
  bool tracked = false;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.dim(1) != c)
      throw ShapeError("concat_rows: column mismatch at " +
                       shape_str(p.shape()));
    rows += p.dim(0);
    tracked = tracked || p.tracked();
  }
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(c));
  for (const auto& p : parts) out.insert(out.end(), p.vec().begin(), p.vec().end());
  Tensor<T> r(Shape{rows, c}, std::move(out));
  if (tracked) {
    std::vector<std::shared_ptr<Node<T>>> ns;
    std::vector<std::size_t> sizes;
    auto node = std::make_shared<Node<T>>();
    node->numel = r.numel();
    for (const auto& p : parts) {
      ns.push_back(p.node());
      sizes.push_back(static_cast<std::size_t>(p.numel()));
      if (p.node()) node->parents.push_back(p.node());
    }
    node->backprop = [ns, sizes](const std::vector<T>& g) {
      std::size_t off = 0;
      for (std::size_t i = 0; i < ns.size(); ++i) {
        if (ns[i]) {
          auto& gp = ns[i]->ensure_grad();
          for (std::size_t j = 0; j < sizes[i]; ++j) gp[j] += g[off + j];
        }
        off += sizes[i];
      }
    };
    r.set_node(node);
  }
  return r;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  const int rows = parts[0].rank() == 2 ? parts[0].dim(0) : -1;
  int cols = 0;
  bool tracked = false;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.dim(0) != rows)
      throw ShapeError("concat_cols: row mismatch at " + shape_str(p.shape()));
    cols += p.dim(1);
    tracked = tracked || p.tracked();
  }
  std::vector<T> out(static_cast<std::size_t>(rows) *
                     static_cast<std::size_t>(cols));
  std::size_t coff = 0;
  for (const auto& p : parts) {
    const std::size_t pc = static_cast<std::size_t>(p.dim(1));
    const T* pp = p.data();
    for (std::size_t r2 = 0; r2 < static_cast<std::size_t>(rows); ++r2)
      for (std::size_t j = 0; j < pc; ++j)
        out[r2 * static_cast<std::size_t>(cols) + coff + j] = pp[r2 * pc + j];
    coff += pc;
  }
  Tensor<T> r(Shape{rows, cols}, std::move(out));
  if (tracked) {
    auto node = std::make_shared<Node<T>>();
    node->numel = r.numel();
    std::vector<std::shared_ptr<Node<T>>> ns;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
      ns.push_back(p.node());
      widths.push_back(static_cast<std::size_t>(p.dim(1)));
      if (p.node()) node->parents.push_back(p.node());
    }
    const std::size_t rrows = static_cast<std::size_t>(rows);
    const std::size_t rcols = static_cast<std::size_t>(cols);
    node->backprop = [ns, widths, rrows, rcols](const std::vector<T>& g) {
      std::size_t off = 0;
      for (std::size_t i = 0; i < ns.size(); ++i) {
        if (ns[i]) {
          auto& gp = ns[i]->ensure_grad();
          for (std::size_t r2 = 0; r2 < rrows; ++r2)
            for (std::size_t j = 0; j < widths[i]; ++j)
              gp[r2 * widths[i] + j] += g[r2 * rcols + off + j];
        }
        off += widths[i];
      }
    };
    r.set_node(node);
  }
  return r;
}

// Select rows by index; repeated indices are allowed (backward scatter-adds).
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<int>& idx) {
  if (x.rank() != 2)
    throw ShapeError("gather_rows: expected rank 2, got " +
                     shape_str(x.shape()));
  const int n = x.dim(0);
  const std::size_t c = static_cast<std::size_t>(x.dim(1));
  for (int i : idx)
    if (i < 0 || i >= n)
      throw IndexError("gather_rows: index " + std::to_string(i) +
                       " out of range [0," + std::to_string(n) + ")");
  std::vector<T> out(idx.size() * c);
  const T* px = x.data();
  for (std::size_t m = 0; m < idx.size(); ++m)
    for (std::size_t j = 0; j < c; ++j)
      out[m * c + j] = px[static_cast<std::size_t>(idx[m]) * c + j];
  Tensor<T> r(Shape{static_cast<int>(idx.size()), static_cast<int>(c)},
              std::move(out));
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node(), idx, c](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      for (std::size_t m = 0; m < idx.size(); ++m)
        for (std::size_t j = 0; j < c; ++j)
          gx[static_cast<std::size_t>(idx[m]) * c + j] += g[m * c + j];
    };
  }
  return r;
}

template <typename T>
Tensor<T> take_row(const Tensor<T>& x, int i) {
  return reshape(gather_rows(x, std::vector<int>{i}), Shape{x.dim(1)});
}

// Mean over rows of [N x C] -> [C].
template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  if (x.rank() != 2)
    throw ShapeError("mean_rows: expected rank 2, got " +
                     shape_str(x.shape()));
  const std::size_t n = static_cast<std::size_t>(x.dim(0));
  const std::size_t c = static_cast<std::size_t>(x.dim(1));
  std::vector<T> out(c, T(0));
  const T* px = x.data();
  for (std::size_t r2 = 0; r2 < n; ++r2)
    for (std::size_t j = 0; j < c; ++j) out[j] += px[r2 * c + j];
  const T inv = T(1) / static_cast<T>(n);
  for (std::size_t j = 0; j < c; ++j) out[j] *= inv;
  Tensor<T> r(Shape{static_cast<int>(c)}, std::move(out));
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node(), n, c, inv](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      for (std::size_t r2 = 0; r2 < n; ++r2)
        for (std::size_t j = 0; j < c; ++j) gx[r2 * c + j] += g[j] * inv;
    };
  }
  return r;
}

template <typename T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
  std::vector<Tensor<T>> as2d;
  as2d.reserve(rows.size());
  for (const auto& v : rows) {
    if (v.rank() != 1) throw ShapeError("stack_rows: expected rank-1 rows");
    as2d.push_back(reshape(v, Shape{1, v.dim(0)}));
  }
  return concat_rows(as2d);
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const std::size_t n = static_cast<std::size_t>(x.numel());
  const T* px = x.data();
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += px[i];
  Tensor<T> r = Tensor<T>::scalar(s);
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node(), n](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[0];
    };
  }
  return r;
}

// ---------------------------------------------------------------------------
// nonlinear kernels

// Softmax over the trailing axis, computed with max-subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  if (x.rank() < 1) throw ShapeError("softmax: rank-0 input");
  const std::size_t c = static_cast<std::size_t>(x.dim(x.rank() - 1));
  const std::size_t rows = static_cast<std::size_t>(x.numel()) / c;
  const T* px = x.data();
  for (std::size_t i = 0; i < rows * c; ++i)
    if (!std::isfinite(px[i]))
      throw NumericError("softmax: non-finite input at flat index " +
                         std::to_string(i));
  std::vector<T> out(rows * c);
  for (std::size_t r2 = 0; r2 < rows; ++r2) {
    const T* row = px + r2 * c;
    T mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = row[j] > mx ? row[j] : mx;
    T denom = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const T e = std::exp(row[j] - mx);
      out[r2 * c + j] = e;
      denom += e;
    }
    const T inv = T(1) / denom;
    for (std::size_t j = 0; j < c; ++j) out[r2 * c + j] *= inv;
  }
  Tensor<T> r(x.shape(), std::move(out));
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node(), sv = r.detach(), rows,
                      c](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      const T* s = sv.data();
      for (std::size_t r2 = 0; r2 < rows; ++r2) {
        T dot = 0;
        for (std::size_t j = 0; j < c; ++j) dot += g[r2 * c + j] * s[r2 * c + j];
        for (std::size_t j = 0; j < c; ++j)
          gx[r2 * c + j] += s[r2 * c + j] * (g[r2 * c + j] - dot);
      }
    };
  }
  return r;
}

// Layer norm over the trailing axis with affine parameters.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5)) {
  if (x.rank() < 1 || gamma.rank() != 1 || beta.rank() != 1 ||
      x.dim(x.rank() - 1) != gamma.dim(0) || gamma.dim(0) != beta.dim(0))
    throw ShapeError("layer_norm: " + shape_str(x.shape()) + " with gamma " +
                     shape_str(gamma.shape()) + ", beta " +
                     shape_str(beta.shape()));
  const std::size_t c = static_cast<std::size_t>(x.dim(x.rank() - 1));
  const std::size_t rows = static_cast<std::size_t>(x.numel()) / c;
  std::vector<T> out(rows * c);
  std::vector<T> xhat(rows * c);
  std::vector<T> invstd(rows);
  const T* px = x.data();
  const T* pg = gamma.data();
  const T* pb = beta.data();
  for (std::size_t r2 = 0; r2 < rows; ++r2) {
    const T* row = px + r2 * c;
    T mean = 0;
    for (std::size_t j = 0; j < c; ++j) mean += row[j];
    mean /= static_cast<T>(c);
    T var = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const T d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<T>(c);
    const T inv = T(1) / std::sqrt(var + eps);
    invstd[r2] = inv;
    for (std::size_t j = 0; j < c; ++j) {
      const T h = (row[j] - mean) * inv;
      xhat[r2 * c + j] = h;
      out[r2 * c + j] = h * pg[j] + pb[j];
    }
  }
  Tensor<T> r(x.shape(), std::move(out));
  if (x.tracked() || gamma.tracked() || beta.tracked()) {
    auto node = detail::make_node(r, {x.node(), gamma.node(), beta.node()});
    node->backprop = [xn = x.node(), gn = gamma.node(), bn = beta.node(),
                      gv = gamma.detach(), xh = std::move(xhat),
                      inv = std::move(invstd), rows,
                      c](const std::vector<T>& g) {
      const T* pg2 = gv.data();
      if (bn) {
        auto& gb = bn->ensure_grad();
        for (std::size_t r2 = 0; r2 < rows; ++r2)
          for (std::size_t j = 0; j < c; ++j) gb[j] += g[r2 * c + j];
      }
      if (gn) {
        auto& gg = gn->ensure_grad();
        for (std::size_t r2 = 0; r2 < rows; ++r2)
          for (std::size_t j = 0; j < c; ++j)
            gg[j] += g[r2 * c + j] * xh[r2 * c + j];
      }
      if (xn) {
        auto& gx = xn->ensure_grad();
        for (std::size_t r2 = 0; r2 < rows; ++r2) {
          T mean_dh = 0, mean_dh_h = 0;
          for (std::size_t j = 0; j < c; ++j) {
            const T dh = g[r2 * c + j] * pg2[j];
            mean_dh += dh;
            mean_dh_h += dh * xh[r2 * c + j];
          }
          mean_dh /= static_cast<T>(c);
          mean_dh_h /= static_cast<T>(c);
          for (std::size_t j = 0; j < c; ++j) {
            const T dh = g[r2 * c + j] * pg2[j];
            gx[r2 * c + j] +=
                inv[r2] * (dh - mean_dh - xh[r2 * c + j] * mean_dh_h);
          }
        }
      }
    };
  }
  return r;
}

// Exact (erf-form) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kInvSqrt2 = T(0.70710678118654752440084436210485L);
  constexpr T kInvSqrt2Pi = T(0.39894228040143267793994605993438L);
  const std::size_t n = static_cast<std::size_t>(x.numel());
  std::vector<T> out(n);
  const T* px = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    const T v = px[i];
    out[i] = T(0.5) * v * (T(1) + std::erf(v * kInvSqrt2));
  }
  Tensor<T> r(x.shape(), std::move(out));
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node(), xv = x.detach(),
                      n](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      const T* px2 = xv.data();
      for (std::size_t i = 0; i < n; ++i) {
        const T v = px2[i];
        const T cdf = T(0.5) * (T(1) + std::erf(v * kInvSqrt2));
        const T pdf = kInvSqrt2Pi * std::exp(T(-0.5) * v * v);
        gx[i] += g[i] * (cdf + v * pdf);
      }
    };
  }
  return r;
}

// ---------------------------------------------------------------------------
// spatial kernels

// Cross-correlation (no kernel flip): x [B,Cin,H,W], w [Cout,Cin/g,kh,kw].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad,
                 int groups = 1) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ShapeError("conv2d: expected [B,C,H,W] and [O,I,kh,kw], got " +
                     shape_str(x.shape()) + " and " + shape_str(w.shape()));
  const int B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), Cw = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (groups < 1 || Cin % groups != 0 || Cout % groups != 0)
    throw ConfigError("conv2d: channels " + std::to_string(Cin) + "/" +
                      std::to_string(Cout) + " not divisible by groups " +
                      std::to_string(groups));
  if (Cw != Cin / groups)
    throw ShapeError("conv2d: weight input channels " + std::to_string(Cw) +
                     " != Cin/groups " + std::to_string(Cin / groups));
  if (stride < 1) throw ConfigError("conv2d: stride must be positive");
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  if (Ho <= 0 || Wo <= 0)
    throw ConfigError("conv2d: non-positive output extent " +
                      std::to_string(Ho) + "x" + std::to_string(Wo));
  const int cpg_in = Cin / groups, cpg_out = Cout / groups;
  std::vector<T> out(static_cast<std::size_t>(B) * Cout * Ho * Wo, T(0));
  const T* px = x.data();
  const T* pw = w.data();
  auto xat = [&](int b, int c, int y, int xx) {
    return px[((static_cast<std::size_t>(b) * Cin + c) * H + y) * W + xx];
  };
  for (int b = 0; b < B; ++b)
    for (int oc = 0; oc < Cout; ++oc) {
      const int gidx = oc / cpg_out;
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          T acc = 0;
          for (int ic = 0; ic < cpg_in; ++ic)
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= W) continue;
                acc += xat(b, gidx * cpg_in + ic, iy, ix) *
                       pw[((static_cast<std::size_t>(oc) * cpg_in + ic) * kh +
                           ky) * kw + kx];
              }
            }
          out[((static_cast<std::size_t>(b) * Cout + oc) * Ho + oy) * Wo + ox] =
              acc;
        }
    }
  Tensor<T> r(Shape{B, Cout, Ho, Wo}, std::move(out));
  if (x.tracked() || w.tracked()) {
    auto node = detail::make_node(r, {x.node(), w.node()});
    node->backprop = [xn = x.node(), wn = w.node(), xv = x.detach(),
                      wv = w.detach(), B, Cin, H, W, Cout, kh, kw, stride, pad,
                      Ho, Wo, cpg_in, cpg_out](const std::vector<T>& g) {
      const T* px2 = xv.data();
      const T* pw2 = wv.data();
      std::vector<T>* gx = xn ? &xn->ensure_grad() : nullptr;
      std::vector<T>* gw = wn ? &wn->ensure_grad() : nullptr;
      for (int b = 0; b < B; ++b)
        for (int oc = 0; oc < Cout; ++oc) {
          const int gidx = oc / cpg_out;
          for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox) {
              const T go =
                  g[((static_cast<std::size_t>(b) * Cout + oc) * Ho + oy) * Wo +
                    ox];
              if (go == T(0)) continue;
              for (int ic = 0; ic < cpg_in; ++ic)
                for (int ky = 0; ky < kh; ++ky) {
                  const int iy = oy * stride - pad + ky;
                  if (iy < 0 || iy >= H) continue;
                  for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= W) continue;
                    const std::size_t xoff =
                        ((static_cast<std::size_t>(b) * Cin +
                          (gidx * cpg_in + ic)) * H + iy) * W + ix;
                    const std::size_t woff =
                        ((static_cast<std::size_t>(oc) * cpg_in + ic) * kh +
                         ky) * kw + kx;
                    if (gx) (*gx)[xoff] += go * pw2[woff];
                    if (gw) (*gw)[woff] += go * px2[xoff];
                  }
                }
            }
        }
    };
  }
  return r;
}

// 2x2 stride-2 average pooling; odd extents replicate the last row/column.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x) {
  if (x.rank() != 4)
    throw ShapeError("avg_pool2d: expected [B,C,H,W], got " +
                     shape_str(x.shape()));
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = (H + 1) / 2, Wo = (W + 1) / 2;
  std::vector<T> out(static_cast<std::size_t>(B) * C * Ho * Wo);
  const T* px = x.data();
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          T acc = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int iy = std::min(2 * oy + dy, H - 1);
              const int ix = std::min(2 * ox + dx, W - 1);
              acc +=
                  px[((static_cast<std::size_t>(b) * C + c) * H + iy) * W + ix];
            }
          out[((static_cast<std::size_t>(b) * C + c) * Ho + oy) * Wo + ox] =
              acc * T(0.25);
        }
  Tensor<T> r(Shape{B, C, Ho, Wo}, std::move(out));
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node(), B, C, H, W, Ho,
                      Wo](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
          for (int oy = 0; oy < Ho; ++oy)
            for (int ox = 0; ox < Wo; ++ox) {
              const T go = g[((static_cast<std::size_t>(b) * C + c) * Ho + oy) *
                             Wo + ox] * T(0.25);
              for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                  const int iy = std::min(2 * oy + dy, H - 1);
                  const int ix = std::min(2 * ox + dx, W - 1);
                  gx[((static_cast<std::size_t>(b) * C + c) * H + iy) * W + ix] +=
                      go;
                }
            }
    };
  }
  return r;
}

// ---------------------------------------------------------------------------
// loss

// Mean over the batch of -log softmax(logits)[label]; log-sum-exp stabilized.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2)
    throw ShapeError("cross_entropy: expected [B,K] logits, got " +
                     shape_str(logits.shape()));
  const std::size_t b = static_cast<std::size_t>(logits.dim(0));
  const std::size_t k = static_cast<std::size_t>(logits.dim(1));
  if (labels.size() != b)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch " + std::to_string(b));
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw IndexError("cross_entropy: label " + std::to_string(y) +
                       " outside [0," + std::to_string(k) + ")");
  const T* pl = logits.data();
  std::vector<T> probs(b * k);
  T loss = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const T* row = pl + i * k;
    T mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = row[j] > mx ? row[j] : mx;
    T denom = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const T e = std::exp(row[j] - mx);
      probs[i * k + j] = e;
      denom += e;
    }
    const T inv = T(1) / denom;
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] *= inv;
    loss += std::log(denom) + mx - row[static_cast<std::size_t>(labels[i])];
  }
  loss /= static_cast<T>(b);
  Tensor<T> r = Tensor<T>::scalar(loss);
  if (logits.tracked()) {
    std::vector<int> ys(labels.begin(), labels.end());
    auto node = detail::make_node(r, {logits.node()});
    node->backprop = [ln = logits.node(), probs = std::move(probs),
                      ys = std::move(ys), b, k](const std::vector<T>& g) {
      auto& gl = ln->ensure_grad();
      const T invb = T(1) / static_cast<T>(b);
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          const T onehot =
              (j == static_cast<std::size_t>(ys[i])) ? T(1) : T(0);
          gl[i * k + j] += g[0] * (probs[i * k + j] - onehot) * invb;
        }
    };
  }
  return r;
}

// ---------------------------------------------------------------------------
// layout transforms between image grids and token matrices

// [1,C,h,w] -> [h*w, C], row-major over the grid.
template <typename T>
Tensor<T> nchw_to_tokens(const Tensor<T>& x) {
  if (x.rank() != 4 || x.dim(0) != 1)
    throw ShapeError("nchw_to_tokens: expected [1,C,h,w], got " +
                     shape_str(x.shape()));
  const std::size_t c = static_cast<std::size_t>(x.dim(1));
  const std::size_t h = static_cast<std::size_t>(x.dim(2));
  const std::size_t w = static_cast<std::size_t>(x.dim(3));
  std::vector<T> out(c * h * w);
  const T* px = x.data();
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        out[(y * w + xx) * c + ci] = px[(ci * h + y) * w + xx];
  Tensor<T> r(Shape{static_cast<int>(h * w), static_cast<int>(c)},
              std::move(out));
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node(), c, h, w](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t xx = 0; xx < w; ++xx)
            gx[(ci * h + y) * w + xx] += g[(y * w + xx) * c + ci];
    };
  }
  return r;
}

// [h*w, C] -> [1,C,h,w].
template <typename T>
Tensor<T> tokens_to_nchw(const Tensor<T>& x, int h, int w) {
  if (x.rank() != 2 || x.dim(0) != h * w)
    throw ConfigError("tokens_to_nchw: token count " +
                      std::to_string(x.rank() == 2 ? x.dim(0) : -1) +
                      " does not form a " + std::to_string(h) + "x" +
                      std::to_string(w) + " grid");
  const std::size_t c = static_cast<std::size_t>(x.dim(1));
  const std::size_t hh = static_cast<std::size_t>(h);
  const std::size_t ww = static_cast<std::size_t>(w);
  std::vector<T> out(c * hh * ww);
  const T* px = x.data();
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < hh; ++y)
      for (std::size_t xx = 0; xx < ww; ++xx)
        out[(ci * hh + y) * ww + xx] = px[(y * ww + xx) * c + ci];
  Tensor<T> r(Shape{1, static_cast<int>(c), h, w}, std::move(out));
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node(), c, hh, ww](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t y = 0; y < hh; ++y)
          for (std::size_t xx = 0; xx < ww; ++xx)
            gx[(y * ww + xx) * c + ci] += g[(ci * hh + y) * ww + xx];
    };
  }
  return r;
}

// [1,C,H,W] with a p x p cell grid -> [N, C*p*p]; each row is one cell
// flattened channel-major (c, then y, then x).
template <typename T>
Tensor<T> im2row_patches(const Tensor<T>& x, int patch) {
  if (x.rank() != 4 || x.dim(0) != 1)
    throw ShapeError("im2row_patches: expected [1,C,H,W], got " +
                     shape_str(x.shape()));
  const int C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (patch <= 0 || H % patch != 0 || W % patch != 0)
    throw ConfigError("im2row_patches: resolution " + std::to_string(H) + "x" +
                      std::to_string(W) + " not divisible by patch " +
                      std::to_string(patch));
  const int gh = H / patch, gw = W / patch;
  const std::size_t rowlen =
      static_cast<std::size_t>(C) * patch * patch;
  std::vector<T> out(static_cast<std::size_t>(gh) * gw * rowlen);
  const T* px = x.data();
  for (int gy = 0; gy < gh; ++gy)
    for (int gx2 = 0; gx2 < gw; ++gx2) {
      T* row = out.data() + (static_cast<std::size_t>(gy) * gw + gx2) * rowlen;
      std::size_t off = 0;
      for (int c = 0; c < C; ++c)
        for (int py = 0; py < patch; ++py)
          for (int px2 = 0; px2 < patch; ++px2)
            row[off++] = px[(static_cast<std::size_t>(c) * H + gy * patch + py) *
                            W + gx2 * patch + px2];
    }
  Tensor<T> r(Shape{gh * gw, static_cast<int>(rowlen)}, std::move(out));
  if (x.tracked()) {
    auto node = detail::make_node(r, {x.node()});
    node->backprop = [xn = x.node(), C, H, W, patch, gh, gw,
                      rowlen](const std::vector<T>& g) {
      auto& gx = xn->ensure_grad();
      for (int gy = 0; gy < gh; ++gy)
        for (int gx2 = 0; gx2 < gw; ++gx2) {
          const T* row =
              g.data() + (static_cast<std::size_t>(gy) * gw + gx2) * rowlen;
          std::size_t off = 0;
          for (int c = 0; c < C; ++c)
            for (int py = 0; py < patch; ++py)
              for (int px2 = 0; px2 < patch; ++px2)
                gx[(static_cast<std::size_t>(c) * H + gy * patch + py) * W +
                   gx2 * patch + px2] += row[off++];
        }
    };
  }
  return r;
}

}  // namespace rvt
