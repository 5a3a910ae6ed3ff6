#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rvt/attention.hpp"
#include "rvt/gradcheck.hpp"
#include "rvt/ops.hpp"
#include "rvt/rng.hpp"

using namespace rvt;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
  std::vector<T> data(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : data) v = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>(std::move(shape), std::move(data));
}

// Direct attention formula in long double. When `wp` is non-null the
// pre-softmax matrix is (QK^T)_{ij} * wp_{ij} / sqrt(d), otherwise
// (QK^T)_{ij} / sqrt(d).
std::vector<double> attention_oracle(const std::vector<double>& q,
                                     const std::vector<double>& k,
                                     const std::vector<double>& v, int n,
                                     int d, const std::vector<double>* wp) {
  std::vector<long double> logits(static_cast<std::size_t>(n) * n);
  const long double inv = 1.0L / std::sqrt(static_cast<long double>(d));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      long double acc = 0;
      for (int t = 0; t < d; ++t)
        acc += static_cast<long double>(q[i * d + t]) * k[j * d + t];
      logits[static_cast<std::size_t>(i) * n + j] =
          wp ? acc * (*wp)[static_cast<std::size_t>(i) * n + j] * inv
             : acc * inv;
    }
  std::vector<double> out(static_cast<std::size_t>(n) * d, 0.0);
  for (int i = 0; i < n; ++i) {
    long double mx = logits[static_cast<std::size_t>(i) * n];
    for (int j = 1; j < n; ++j)
      mx = std::max(mx, logits[static_cast<std::size_t>(i) * n + j]);
    std::vector<long double> a(n);
    long double denom = 0;
    for (int j = 0; j < n; ++j) {
      a[j] = std::exp(logits[static_cast<std::size_t>(i) * n + j] - mx);
      denom += a[j];
    }
    for (int t = 0; t < d; ++t) {
      long double acc = 0;
      for (int j = 0; j < n; ++j) acc += a[j] / denom * v[j * d + t];
      out[static_cast<std::size_t>(i) * d + t] = static_cast<double>(acc);
    }
  }
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("single key forces attention weight one") {
  Rng rng(3);
  auto q = random_tensor<double>({1, 4}, rng);
  auto k = random_tensor<double>({1, 4}, rng);
  auto v = random_tensor<double>({1, 4}, rng);
  auto out = sdp_attention(q, k, v);
  for (int t = 0; t < 4; ++t) CHECK(out.data()[t] == v.data()[t]);
}

TEST_CASE("identical keys average the values uniformly") {
  Rng rng(5);
  const int n = 4, d = 3;
  auto q = random_tensor<double>({n, d}, rng);
  auto krow = random_tensor<double>({1, d}, rng);
  std::vector<double> kd;
  for (int i = 0; i < n; ++i)
    kd.insert(kd.end(), krow.vec().begin(), krow.vec().end());
  auto v = random_tensor<double>({n, d}, rng);
  auto out = sdp_attention(q, Tensor64({n, d}, kd), v);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < d; ++t) {
      double mean = 0;
      for (int j = 0; j < n; ++j) mean += v.data()[j * d + t];
      mean /= n;
      REQUIRE(std::fabs(out.data()[i * d + t] - mean) <= 1e-12);
    }
}

TEST_CASE("sdp attention matches the direct formula oracle") {
  Rng rng(7);
  const int n = 3, d = 4;
  auto q = random_tensor<double>({n, d}, rng);
  auto k = random_tensor<double>({n, d}, rng);
  auto v = random_tensor<double>({n, d}, rng);
  auto want = attention_oracle(q.vec(), k.vec(), v.vec(), n, d, nullptr);
  CHECK(max_abs_diff(sdp_attention(q, k, v).vec(), want) <= 1e-6);
}

TEST_CASE("all-ones W_p reduces the position-aware path to the plain one") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(5));
    const int d = 1 + static_cast<int>(rng.uniform_index(6));
    auto q = random_tensor<double>({n, d}, rng);
    auto k = random_tensor<double>({n, d}, rng);
    auto v = random_tensor<double>({n, d}, rng);
    auto ones = Tensor64::full({n, n}, 1.0);
    REQUIRE(max_abs_diff(paas_attention(q, k, v, ones).vec(),
                         sdp_attention(q, k, v).vec()) <= 1e-7);
  }
}

TEST_CASE("all-zeros W_p collapses to the value column mean") {
  Rng rng(13);
  const int n = 5, d = 3;
  auto q = random_tensor<double>({n, d}, rng);
  auto k = random_tensor<double>({n, d}, rng);
  auto v = random_tensor<double>({n, d}, rng);
  auto out = paas_attention(q, k, v, Tensor64::zeros({n, n}));
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < d; ++t) {
      double mean = 0;
      for (int j = 0; j < n; ++j) mean += v.data()[j * d + t];
      mean /= n;
      REQUIRE(std::fabs(out.data()[i * d + t] - mean) <= 1e-12);
    }
}

TEST_CASE("position-aware attention matches the direct oracle") {
  Rng rng(17);
  const int n = 4, d = 5;
  auto q = random_tensor<double>({n, d}, rng);
  auto k = random_tensor<double>({n, d}, rng);
  auto v = random_tensor<double>({n, d}, rng);
  auto wp = random_tensor<double>({n, n}, rng, 0.2, 2.0);
  auto want = attention_oracle(q.vec(), k.vec(), v.vec(), n, d, &wp.vec());
  CHECK(max_abs_diff(paas_attention(q, k, v, wp).vec(), want) <= 1e-6);
}

TEST_CASE("W_p side mismatch raises a dimension error") {
  Rng rng(19);
  auto q = random_tensor<double>({3, 2}, rng);
  CHECK_THROWS_AS(paas_attention(q, q, q, Tensor64::zeros({4, 4})),
                  ShapeError);
}

TEST_CASE("pre-softmax decoupling: logits equal QK^T (.) W_p / sqrt(d)") {
  Rng rng(23);
  const int n = 6, d = 4;
  auto q = random_tensor<double>({n, d}, rng);
  auto k = random_tensor<double>({n, d}, rng);
  auto wp = random_tensor<double>({n, n}, rng, 0.1, 3.0);
  auto logits = paas_logits(q, k, wp);
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      long double acc = 0;
      for (int t = 0; t < d; ++t)
        acc += static_cast<long double>(q.data()[i * d + t]) *
               k.data()[j * d + t];
      const double want =
          static_cast<double>(acc) * wp.data()[i * n + j] * inv;
      REQUIRE(std::fabs(logits.data()[i * n + j] - want) <= 1e-6);
    }
}

TEST_CASE("attention weight rows sum to one on both paths") {
  Rng rng(29);
  const int n = 5, d = 3;
  auto q = random_tensor<double>({n, d}, rng, -3, 3);
  auto k = random_tensor<double>({n, d}, rng, -3, 3);
  auto wp = random_tensor<double>({n, n}, rng, 0.1, 2.0);
  for (auto& logits : {sdp_logits(q, k), paas_logits(q, k, wp)}) {
    auto a = softmax(logits);
    for (int i = 0; i < n; ++i) {
      double s = 0;
      for (int j = 0; j < n; ++j) s += a.data()[i * n + j];
      REQUIRE(std::fabs(s - 1.0) <= 1e-6);
    }
  }
}

// ---------------------------------------------------------------------------
// multi-head

TEST_CASE("single identity head reproduces plain attention") {
  Rng rng(31);
  const int c = 4;
  auto x = random_tensor<double>({3, c}, rng);
  MhsaParams<double> p = make_mhsa_params<double>(c, 1, 0, rng);
  std::vector<double> eye(c * c, 0.0);
  for (int i = 0; i < c; ++i) eye[i * c + i] = 1.0;
  p.heads[0].wq = Tensor64({c, c}, eye);
  p.heads[0].wk = Tensor64({c, c}, eye);
  p.heads[0].wv = Tensor64({c, c}, eye);
  p.wo = Tensor64({c, c}, eye);
  auto got = mhsa_forward(x, p);
  auto want = sdp_attention(x, x, x);
  CHECK(max_abs_diff(got.vec(), want.vec()) == 0.0);
}

TEST_CASE("output shape equals input shape across the head sweep") {
  Rng rng(37);
  const int c = 24, n = 5;
  auto x = random_tensor<double>({n, c}, rng);
  for (int heads : {1, 2, 4, 6, 8, 12}) {
    auto p = make_mhsa_params<double>(c, heads, 0, rng);
    auto y = mhsa_forward(x, p);
    REQUIRE(y.shape() == x.shape());
  }
}

TEST_CASE("indivisible head count is a configuration error") {
  Rng rng(41);
  CHECK_THROWS_AS(make_mhsa_params<double>(10, 4, 0, rng), ConfigError);
}

TEST_CASE("self-attention without position encoding is permutation-equivariant") {
  Rng rng(43);
  const int n = 6, c = 8;
  auto x = random_tensor<double>({n, c}, rng);
  auto p = make_mhsa_params<double>(c, 2, 0, rng);
  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  auto lhs = mhsa_forward(gather_rows(x, perm), p);
  auto rhs = gather_rows(mhsa_forward(x, p), perm);
  CHECK(max_abs_diff(lhs.vec(), rhs.vec()) <= 1e-5);
}

TEST_CASE("a non-symmetric W_p breaks permutation equivariance") {
  Rng rng(47);
  const int n = 6, c = 8;
  auto x = random_tensor<double>({n, c}, rng);
  auto p = make_mhsa_params<double>(c, 2, n, rng);
  // Init-scale projections keep the logits nearly flat; the witness needs
  // weights at a realistic magnitude for W_p to matter.
  for (auto& h : p.heads) {
    h.wq = random_tensor<double>({c, c / 2}, rng, -0.7, 0.7);
    h.wk = random_tensor<double>({c, c / 2}, rng, -0.7, 0.7);
    h.wv = random_tensor<double>({c, c / 2}, rng, -0.7, 0.7);
    h.wp = random_tensor<double>({n, n}, rng, -2.0, 2.0);
  }
  p.wo = random_tensor<double>({c, c}, rng, -0.7, 0.7);
  std::vector<int> perm{3, 0, 5, 1, 4, 2};
  auto lhs = mhsa_forward(gather_rows(x, perm), p);
  auto rhs = gather_rows(mhsa_forward(x, p), perm);
  CHECK(max_abs_diff(lhs.vec(), rhs.vec()) > 1e-3);
}

// ---------------------------------------------------------------------------
// position encodings

TEST_CASE("kind none adds nothing") {
  Rng rng(53);
  auto enc = make_position_encoding<double>(PosKind::none, 4, 6, rng);
  auto x = random_tensor<double>({4, 6}, rng);
  auto y = add(x, enc.table);
  CHECK(max_abs_diff(x.vec(), y.vec()) == 0.0);
}

TEST_CASE("sincos at position zero is sin=0 cos=1") {
  Rng rng(59);
  auto enc = make_position_encoding<double>(PosKind::sincos_absolute, 3, 8, rng);
  for (int i = 0; i < 4; ++i) {
    CHECK(enc.table.data()[2 * i] == 0.0);
    CHECK(enc.table.data()[2 * i + 1] == 1.0);
  }
}

TEST_CASE("sincos table matches the closed form for N=4 C=8") {
  Rng rng(61);
  auto enc = make_position_encoding<double>(PosKind::sincos_absolute, 4, 8, rng);
  for (int pos = 0; pos < 4; ++pos)
    for (int i = 0; i < 4; ++i) {
      const double freq = std::pow(10000.0, -2.0 * i / 8.0);
      REQUIRE(enc.table.data()[pos * 8 + 2 * i] == std::sin(pos * freq));
      REQUIRE(enc.table.data()[pos * 8 + 2 * i + 1] == std::cos(pos * freq));
    }
}

TEST_CASE("learned table is trainable and seeded deterministically") {
  Rng a(67), b(67);
  auto e1 = make_position_encoding<double>(PosKind::learned_absolute, 5, 4, a);
  auto e2 = make_position_encoding<double>(PosKind::learned_absolute, 5, 4, b);
  CHECK(e1.table.tracked());
  CHECK(max_abs_diff(e1.table.vec(), e2.table.vec()) == 0.0);
}

TEST_CASE("unsupported encodings fail loudly") {
  Rng rng(71);
  CHECK_THROWS_AS(
      make_position_encoding<double>(PosKind::learned_relative, 4, 4, rng),
      UnsupportedError);
  CHECK_THROWS_AS(
      make_position_encoding<double>(PosKind::input_conditioned, 4, 4, rng),
      UnsupportedError);
}

// ---------------------------------------------------------------------------
// local windows

TEST_CASE("window covering the whole grid equals global attention") {
  Rng rng(73);
  const int h = 3, w = 3, c = 6;
  auto x = random_tensor<double>({h * w, c}, rng);
  auto p = make_mhsa_params<double>(c, 2, 0, rng);
  auto local = local_window_attention(x, h, w, 3, p);
  auto global = mhsa_forward(x, p);
  CHECK(max_abs_diff(local.vec(), global.vec()) <= 1e-6);
}

TEST_CASE("window of one reduces to the per-token value path") {
  Rng rng(79);
  const int h = 2, w = 3, c = 4;
  auto x = random_tensor<double>({h * w, c}, rng);
  auto p = make_mhsa_params<double>(c, 2, 0, rng);
  auto local = local_window_attention(x, h, w, 1, p);
  std::vector<Tensor64> vs;
  for (const auto& hp : p.heads)
    vs.push_back(add_row_bias(matmul(x, hp.wv), hp.bv));
  auto want = add_row_bias(matmul(concat_cols(vs), p.wo), p.bo);
  CHECK(max_abs_diff(local.vec(), want.vec()) <= 1e-12);
}

TEST_CASE("2x2 windows on a 4x4 grid match the per-window oracle") {
  Rng rng(83);
  const int h = 4, w = 4, c = 4, win = 2;
  auto x = random_tensor<double>({h * w, c}, rng);
  auto p = make_mhsa_params<double>(c, 1, 0, rng);
  auto local = local_window_attention(x, h, w, win, p);

  // oracle: project, then run the direct attention formula inside each window
  auto q = add_row_bias(matmul(x, p.heads[0].wq), p.heads[0].bq);
  auto k = add_row_bias(matmul(x, p.heads[0].wk), p.heads[0].bk);
  auto v = add_row_bias(matmul(x, p.heads[0].wv), p.heads[0].bv);
  std::vector<double> merged(static_cast<std::size_t>(h) * w * c);
  for (int wy = 0; wy < 2; ++wy)
    for (int wx = 0; wx < 2; ++wx) {
      std::vector<double> qw, kw, vw;
      std::vector<int> rows;
      for (int dy = 0; dy < win; ++dy)
        for (int dx = 0; dx < win; ++dx) {
          const int r = (wy * win + dy) * w + wx * win + dx;
          rows.push_back(r);
          for (int t = 0; t < c; ++t) {
            qw.push_back(q.data()[r * c + t]);
            kw.push_back(k.data()[r * c + t]);
            vw.push_back(v.data()[r * c + t]);
          }
        }
      auto out = attention_oracle(qw, kw, vw, win * win, c, nullptr);
      for (std::size_t m = 0; m < rows.size(); ++m)
        for (int t = 0; t < c; ++t)
          merged[static_cast<std::size_t>(rows[m]) * c + t] = out[m * c + t];
    }
  auto want = add_row_bias(matmul(Tensor64({h * w, c}, merged), p.wo), p.bo);
  CHECK(max_abs_diff(local.vec(), want.vec()) <= 1e-6);
}

TEST_CASE("non-positive window is a configuration error") {
  Rng rng(89);
  auto x = random_tensor<double>({4, 4}, rng);
  auto p = make_mhsa_params<double>(4, 1, 0, rng);
  CHECK_THROWS_AS(local_window_attention(x, 2, 2, 0, p), ConfigError);
}

// ---------------------------------------------------------------------------
// gradients

TEST_CASE("attention gradients pass finite differences on both paths") {
  Rng rng(97);
  const int n = 3, d = 4;
  auto q = random_tensor<double>({n, d}, rng);
  auto k = random_tensor<double>({n, d}, rng);
  auto v = random_tensor<double>({n, d}, rng);
  auto wp = random_tensor<double>({n, n}, rng, 0.3, 1.7);
  auto r = random_tensor<double>({n, d}, rng);

  auto check = [&](const std::function<Tensor64(const Tensor64&)>& f,
                   const Tensor64& at) {
    REQUIRE(finite_diff_check<double>(f, at, 1e-5) <= 1e-6);
  };

  check([&](const Tensor64& t) { return sum(mul(r, sdp_attention(t, k, v))); }, q);
  check([&](const Tensor64& t) { return sum(mul(r, sdp_attention(q, t, v))); }, k);
  check([&](const Tensor64& t) { return sum(mul(r, sdp_attention(q, k, t))); }, v);
  check([&](const Tensor64& t) { return sum(mul(r, paas_attention(t, k, v, wp))); }, q);
  check([&](const Tensor64& t) { return sum(mul(r, paas_attention(q, t, v, wp))); }, k);
  check([&](const Tensor64& t) { return sum(mul(r, paas_attention(q, k, t, wp))); }, v);
  check([&](const Tensor64& t) { return sum(mul(r, paas_attention(q, k, v, t))); }, wp);
}
