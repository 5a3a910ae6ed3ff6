#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "rvt/ops.hpp"
#include "rvt/rng.hpp"
#include "rvt/tensor.hpp"

// Scaled dot-product attention, its position-aware variant (a learnable
// per-position rescale of the pre-softmax logits), multi-head assembly,
// additive position encodings, and windowed attention.

namespace rvt {

enum class PosKind {
  none,
  learned_absolute,
  sincos_absolute,
  paas,
  // Recognized but intentionally unsupported encodings; constructors throw.
  learned_relative,
  input_conditioned,
};

namespace detail {

template <typename T>
void check_qkv(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 ||
      q.shape() != k.shape() || k.shape() != v.shape())
    throw ShapeError("attention: Q/K/V must share [N x d], got " +
                     shape_str(q.shape()) + ", " + shape_str(k.shape()) +
                     ", " + shape_str(v.shape()));
}

}  // namespace detail

// Pre-softmax logits QK^T / sqrt(d).
template <typename T>
Tensor<T> sdp_logits(const Tensor<T>& q, const Tensor<T>& k) {
  detail::check_qkv(q, k, k);
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(q.dim(1)));
  return scale(matmul(q, transpose2d(k)), inv_sqrt_d);
}

// Pre-softmax logits QK^T (.) (W_p / sqrt(d)); the elementwise rescale
// replaces the constant 1/sqrt(d) with a learnable per-position weight.
template <typename T>
Tensor<T> paas_logits(const Tensor<T>& q, const Tensor<T>& k,
                      const Tensor<T>& wp) {
  detail::check_qkv(q, k, k);
  const int n = q.dim(0);
  if (wp.rank() != 2 || wp.dim(0) != n || wp.dim(1) != n)
    throw ShapeError("paas: W_p must be [" + std::to_string(n) + "x" +
                     std::to_string(n) + "], got " + shape_str(wp.shape()));
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(q.dim(1)));
  return mul(matmul(q, transpose2d(k)), scale(wp, inv_sqrt_d));
}

template <typename T>
Tensor<T> sdp_attention(const Tensor<T>& q, const Tensor<T>& k,
                        const Tensor<T>& v) {
  detail::check_qkv(q, k, v);
  return matmul(softmax(sdp_logits(q, k)), v);
}

template <typename T>
Tensor<T> paas_attention(const Tensor<T>& q, const Tensor<T>& k,
                         const Tensor<T>& v, const Tensor<T>& wp) {
  detail::check_qkv(q, k, v);
  return matmul(softmax(paas_logits(q, k, wp)), v);
}

// ---------------------------------------------------------------------------
// multi-head assembly

template <typename T>
struct HeadParams {
  Tensor<T> wq, wk, wv;  // [C x d]
  Tensor<T> bq, bk, bv;  // [d]
  std::optional<Tensor<T>> wp;  // [N x N] when the block runs position-aware
};

template <typename T>
struct MhsaParams {
  std::vector<HeadParams<T>> heads;
  Tensor<T> wo;  // [C x C]
  Tensor<T> bo;  // [C]
};

// Fresh parameters: truncated-normal(0.02) projections, zero biases, and
// all-ones W_p so the position-aware path starts exactly at the plain one.
template <typename T>
MhsaParams<T> make_mhsa_params(int channels, int num_heads, int paas_tokens,
                               Rng& rng) {
  if (num_heads < 1 || channels % num_heads != 0)
    throw ConfigError("mhsa: channels " + std::to_string(channels) +
                      " not divisible by heads " + std::to_string(num_heads));
  const int d = channels / num_heads;
  auto tn = [&](Shape shape) {
    std::vector<T> data(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : data) x = static_cast<T>(rng.trunc_normal(0.02));
    return Tensor<T>::leaf(std::move(shape), std::move(data));
  };
  MhsaParams<T> p;
  for (int h = 0; h < num_heads; ++h) {
    HeadParams<T> hp{tn({channels, d}), tn({channels, d}), tn({channels, d}),
                     Tensor<T>::leaf_zeros({d}), Tensor<T>::leaf_zeros({d}),
                     Tensor<T>::leaf_zeros({d}), std::nullopt};
    if (paas_tokens > 0)
      hp.wp = Tensor<T>::leaf(
          {paas_tokens, paas_tokens},
          std::vector<T>(static_cast<std::size_t>(paas_tokens) * paas_tokens,
                         T(1)));
    p.heads.push_back(std::move(hp));
  }
  p.wo = tn({channels, channels});
  p.bo = Tensor<T>::leaf_zeros({channels});
  return p;
}

template <typename T>
Tensor<T> mhsa_forward(const Tensor<T>& x, const MhsaParams<T>& p) {
  if (x.rank() != 2)
    throw ShapeError("mhsa: expected [N x C] tokens, got " +
                     shape_str(x.shape()));
  const int c = x.dim(1);
  const int n_heads = static_cast<int>(p.heads.size());
  if (n_heads < 1 || c % n_heads != 0)
    throw ConfigError("mhsa: channels " + std::to_string(c) +
                      " not divisible by heads " + std::to_string(n_heads));
  std::vector<Tensor<T>> outs;
  outs.reserve(p.heads.size());
  for (const auto& h : p.heads) {
    Tensor<T> q = add_row_bias(matmul(x, h.wq), h.bq);
    Tensor<T> k = add_row_bias(matmul(x, h.wk), h.bk);
    Tensor<T> v = add_row_bias(matmul(x, h.wv), h.bv);
    outs.push_back(h.wp ? paas_attention(q, k, v, *h.wp)
                        : sdp_attention(q, k, v));
  }
  return add_row_bias(matmul(concat_cols(outs), p.wo), p.bo);
}

// ---------------------------------------------------------------------------
// additive position encodings

template <typename T>
struct PositionEncoding {
  PosKind kind;
  Tensor<T> table;  // [N x C]; zeros for `none`, fixed for sincos
};

// Interleaved sin/cos of geometrically spaced frequencies; position p fills
// channel 2i with sin(p * w_i) and 2i+1 with cos(p * w_i).
template <typename T>
Tensor<T> sincos_table(int n, int c) {
  std::vector<T> out(static_cast<std::size_t>(n) * c, T(0));
  for (int pos = 0; pos < n; ++pos)
    for (int i = 0; 2 * i < c; ++i) {
      const double freq = std::pow(10000.0, -2.0 * i / c);
      out[static_cast<std::size_t>(pos) * c + 2 * i] =
          static_cast<T>(std::sin(pos * freq));
      if (2 * i + 1 < c)
        out[static_cast<std::size_t>(pos) * c + 2 * i + 1] =
            static_cast<T>(std::cos(pos * freq));
    }
  return Tensor<T>(Shape{n, c}, std::move(out));
}

template <typename T>
PositionEncoding<T> make_position_encoding(PosKind kind, int n, int c,
                                           Rng& rng) {
  switch (kind) {
    case PosKind::none:
      return {kind, Tensor<T>::zeros({n, c})};
    case PosKind::learned_absolute: {
      std::vector<T> data(static_cast<std::size_t>(n) * c);
      for (auto& v : data) v = static_cast<T>(rng.normal(0.0, 0.02));
      return {kind, Tensor<T>::leaf({n, c}, std::move(data))};
    }
    case PosKind::sincos_absolute:
      return {kind, sincos_table<T>(n, c)};
    case PosKind::learned_relative:
      throw UnsupportedError("learned relative position encoding is not supported");
    case PosKind::input_conditioned:
      throw UnsupportedError("input-conditioned position encoding is not supported");
    case PosKind::paas:
      throw UnsupportedError(
          "paas is not an additive encoding; it lives inside attention");
  }
  throw ConfigError("unknown position encoding kind");
}

// ---------------------------------------------------------------------------
// windowed attention (tokens laid out on an h x w grid)

// Attention restricted to non-overlapping win x win windows; grids that do
// not divide evenly are replicate-padded on the right/bottom. Heads share
// the same projections as the global path.
template <typename T>
Tensor<T> local_window_attention(const Tensor<T>& x, int h, int w, int win,
                                 const MhsaParams<T>& p) {
  if (win <= 0) throw ConfigError("local window attention: window must be positive");
  if (x.rank() != 2 || x.dim(0) != h * w)
    throw ConfigError("local window attention: token count " +
                      std::to_string(x.rank() == 2 ? x.dim(0) : -1) +
                      " does not form a " + std::to_string(h) + "x" +
                      std::to_string(w) + " grid");
  const int c = x.dim(1);
  const int n_heads = static_cast<int>(p.heads.size());
  if (n_heads < 1 || c % n_heads != 0)
    throw ConfigError("mhsa: channels " + std::to_string(c) +
                      " not divisible by heads " + std::to_string(n_heads));

  const int wh = (h + win - 1) / win;
  const int ww = (w + win - 1) / win;

  // Per-token projections once, windows gather rows afterwards.
  std::vector<Tensor<T>> qs, ks, vs;
  for (const auto& hp : p.heads) {
    qs.push_back(add_row_bias(matmul(x, hp.wq), hp.bq));
    ks.push_back(add_row_bias(matmul(x, hp.wk), hp.bk));
    vs.push_back(add_row_bias(matmul(x, hp.wv), hp.bv));
  }

  std::vector<Tensor<T>> window_outs;   // concatenated window rows
  std::vector<int> scatter(static_cast<std::size_t>(h) * w, -1);
  int concat_row = 0;
  for (int wy = 0; wy < wh; ++wy)
    for (int wx = 0; wx < ww; ++wx) {
      std::vector<int> idx;
      idx.reserve(static_cast<std::size_t>(win) * win);
      for (int dy = 0; dy < win; ++dy)
        for (int dx = 0; dx < win; ++dx) {
          const int y = std::min(wy * win + dy, h - 1);
          const int xx = std::min(wx * win + dx, w - 1);
          idx.push_back(y * w + xx);
          const int src_y = wy * win + dy, src_x = wx * win + dx;
          if (src_y < h && src_x < w)
            scatter[static_cast<std::size_t>(src_y) * w + src_x] = concat_row;
          ++concat_row;
        }
      std::vector<Tensor<T>> heads_out;
      for (int hd = 0; hd < n_heads; ++hd)
        heads_out.push_back(sdp_attention(gather_rows(qs[hd], idx),
                                          gather_rows(ks[hd], idx),
                                          gather_rows(vs[hd], idx)));
      window_outs.push_back(concat_cols(heads_out));
    }

  Tensor<T> stacked = concat_rows(window_outs);
  Tensor<T> merged = gather_rows(stacked, scatter);
  return add_row_bias(matmul(merged, p.wo), p.bo);
}

}  // namespace rvt
