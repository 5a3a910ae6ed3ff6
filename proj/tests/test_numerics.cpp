#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "rvt/gradcheck.hpp"
#include "rvt/ops.hpp"
#include "rvt/rng.hpp"
#include "rvt/tensor.hpp"

using namespace rvt;

namespace {

// ---------------------------------------------------------------------------
// independent oracles (kept free of the library kernels they check)

// Plain triple loop, accumulating in long double.
std::vector<double> matmul_oracle(const std::vector<double>& a,
                                  const std::vector<double>& b, int m, int k,
                                  int n) {
  std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      long double acc = 0.0L;
      for (int kk = 0; kk < k; ++kk)
        acc += static_cast<long double>(a[i * k + kk]) * b[kk * n + j];
      c[static_cast<std::size_t>(i) * n + j] = static_cast<double>(acc);
    }
  return c;
}

// Six-loop direct cross-correlation.
std::vector<double> conv_oracle(const std::vector<double>& x,
                                const std::vector<double>& w, int B, int Cin,
                                int H, int W, int Cout, int kh, int kw,
                                int stride, int pad, int groups) {
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  const int cpg_in = Cin / groups, cpg_out = Cout / groups;
  std::vector<double> out(static_cast<std::size_t>(B) * Cout * Ho * Wo, 0.0);
  for (int b = 0; b < B; ++b)
    for (int oc = 0; oc < Cout; ++oc)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          long double acc = 0.0L;
          for (int ic = 0; ic < cpg_in; ++ic)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                const int c = (oc / cpg_out) * cpg_in + ic;
                acc += static_cast<long double>(
                           x[((static_cast<std::size_t>(b) * Cin + c) * H + iy) *
                             W + ix]) *
                       w[((static_cast<std::size_t>(oc) * cpg_in + ic) * kh +
                          ky) * kw + kx];
              }
          out[((static_cast<std::size_t>(b) * Cout + oc) * Ho + oy) * Wo + ox] =
              static_cast<double>(acc);
        }
  return out;
}

// erf via its Maclaurin series in long double; converges fast for |z| <= 3.
long double erf_series(long double z) {
  long double term = z, sum = z;
  for (int n = 1; n < 80; ++n) {
    term *= -z * z / n;
    sum += term / (2 * n + 1);
  }
  return sum * 2.0L / std::sqrt(3.14159265358979323846264338327950288L);
}

long double gelu_series_oracle(long double v) {
  return 0.5L * v * (1.0L + erf_series(v / std::sqrt(2.0L)));
}

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
  std::vector<T> data(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : data) v = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>(std::move(shape), std::move(data));
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]) /
                        std::max({1.0, std::fabs(a[i]), std::fabs(b[i])}));
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("matmul identity and zero cases") {
  Tensor64 eye(Shape{2, 2}, {1, 0, 0, 1});
  Rng rng(7);
  Tensor64 a = random_tensor<double>({2, 3}, rng);
  Tensor64 r = matmul(eye, a);
  for (int i = 0; i < 6; ++i) CHECK(r.data()[i] == a.data()[i]);

  Tensor64 z = Tensor64::zeros({2, 3});
  Tensor64 b = random_tensor<double>({3, 2}, rng);
  Tensor64 zr = matmul(z, b);
  for (int i = 0; i < 4; ++i) CHECK(zr.data()[i] == 0.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
  Rng rng(11);
  Tensor64 a = random_tensor<double>({3, 4}, rng);
  Tensor64 b = random_tensor<double>({4, 2}, rng);
  auto want = matmul_oracle(a.vec(), b.vec(), 3, 4, 2);
  CHECK(max_rel_diff(matmul(a, b).vec(), want) <= 1e-6);
}

TEST_CASE("matmul oracle agreement over 100 random shapes") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + static_cast<int>(rng.uniform_index(8));
    const int k = 1 + static_cast<int>(rng.uniform_index(8));
    const int n = 1 + static_cast<int>(rng.uniform_index(8));
    Tensor64 a = random_tensor<double>({m, k}, rng);
    Tensor64 b = random_tensor<double>({k, n}, rng);
    auto want = matmul_oracle(a.vec(), b.vec(), m, k, n);
    REQUIRE(max_rel_diff(matmul(a, b).vec(), want) <= 1e-5);
  }
}

TEST_CASE("matmul shape mismatch reports both shapes") {
  Tensor64 a = Tensor64::zeros({2, 3});
  Tensor64 b = Tensor64::zeros({2, 3});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), ShapeError);
}

TEST_CASE("softmax trivial rows") {
  Tensor64 two(Shape{1, 2}, {0.0, 0.0});
  auto s = softmax(two);
  CHECK(s.data()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.data()[1] == doctest::Approx(0.5).epsilon(1e-12));

  Tensor64 one(Shape{1, 1}, {3.7});
  CHECK(softmax(one).data()[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax shift invariance") {
  Rng rng(17);
  Tensor64 x = random_tensor<double>({4, 6}, rng, -3, 3);
  Tensor64 xs = add_scalar(x, 12.345);
  auto a = softmax(x);
  auto b = softmax(xs);
  CHECK(max_abs_diff(a.vec(), b.vec()) <= 1e-7);
}

TEST_CASE("softmax rows sum to one for |x| <= 50") {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor64 x = random_tensor<double>({3, 7}, rng, -50, 50);
    auto s = softmax(x);
    for (int r = 0; r < 3; ++r) {
      double acc = 0;
      for (int j = 0; j < 7; ++j) acc += s.data()[r * 7 + j];
      REQUIRE(std::fabs(acc - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("softmax rejects NaN input") {
  Tensor64 x(Shape{1, 2}, {0.0, std::nan("")});
  CHECK_THROWS_AS(softmax(x), NumericError);
}

TEST_CASE("layer_norm trivial cases") {
  Tensor64 ones = Tensor64::full({3}, 1.0);
  Tensor64 zeros = Tensor64::zeros({3});
  Tensor64 row = Tensor64::full({1, 3}, 4.2);
  auto out = layer_norm(row, ones, zeros);
  for (int j = 0; j < 3; ++j)
    CHECK(std::fabs(out.data()[j]) <= 1e-9);  // eps guard on zero variance

  Tensor64 beta(Shape{3}, {0.5, -1.0, 2.0});
  Rng rng(23);
  Tensor64 x = random_tensor<double>({2, 3}, rng);
  auto out2 = layer_norm(x, Tensor64::zeros({3}), beta);
  for (int r = 0; r < 2; ++r)
    for (int j = 0; j < 3; ++j)
      CHECK(out2.data()[r * 3 + j] == beta.data()[j]);
}

TEST_CASE("layer_norm matches direct formula oracle") {
  Rng rng(29);
  const int c = 5;
  Tensor64 x = random_tensor<double>({1, c}, rng, -2, 2);
  Tensor64 gamma = random_tensor<double>({c}, rng);
  Tensor64 beta = random_tensor<double>({c}, rng);
  auto out = layer_norm(x, gamma, beta);

  long double mean = 0;
  for (int j = 0; j < c; ++j) mean += x.data()[j];
  mean /= c;
  long double var = 0;
  for (int j = 0; j < c; ++j) {
    const long double d = x.data()[j] - mean;
    var += d * d;
  }
  var /= c;
  for (int j = 0; j < c; ++j) {
    const long double want =
        (x.data()[j] - mean) / std::sqrt(var + 1e-5L) * gamma.data()[j] +
        beta.data()[j];
    REQUIRE(std::fabs(out.data()[j] - static_cast<double>(want)) <= 1e-6);
  }
}

TEST_CASE("gelu anchor values against erf series oracle") {
  Tensor64 x(Shape{3}, {0.0, 10.0, -1.0});
  auto y = gelu(x);
  CHECK(y.data()[0] == 0.0);
  CHECK(std::fabs(y.data()[1] - 10.0) <= 1e-4);
  CHECK(std::fabs(y.data()[2] - static_cast<double>(gelu_series_oracle(-1.0L))) <=
        1e-6);

  Rng rng(31);
  for (int i = 0; i < 20; ++i) {
    const double v = rng.uniform(-3, 3);
    Tensor64 t(Shape{1}, {v});
    REQUIRE(std::fabs(gelu(t).data()[0] -
                      static_cast<double>(gelu_series_oracle(v))) <= 1e-6);
  }
}

TEST_CASE("conv2d delta kernel is identity") {
  Rng rng(37);
  Tensor64 x = random_tensor<double>({1, 2, 5, 5}, rng);
  // 3x3 kernels with a centered 1 on the matching channel
  std::vector<double> w(2 * 2 * 9, 0.0);
  w[(0 * 2 + 0) * 9 + 4] = 1.0;
  w[(1 * 2 + 1) * 9 + 4] = 1.0;
  auto y = conv2d(x, Tensor64({2, 2, 3, 3}, w), 1, 1);
  CHECK(y.shape() == x.shape());
  CHECK(max_abs_diff(y.vec(), x.vec()) == 0.0);
}

TEST_CASE("conv2d all-ones kernel on constant image") {
  const double c = 0.75;
  Tensor64 x = Tensor64::full({1, 1, 5, 5}, c);
  Tensor64 w = Tensor64::full({1, 1, 3, 3}, 1.0);
  auto y = conv2d(x, w, 1, 1);
  // interior pixel sees the full 3x3 window
  CHECK(y.data()[2 * 5 + 2] == doctest::Approx(9 * c).epsilon(1e-12));
}

TEST_CASE("conv2d matches six-loop oracle") {
  Rng rng(41);
  Tensor64 x = random_tensor<double>({1, 2, 5, 5}, rng);
  Tensor64 w = random_tensor<double>({3, 2, 3, 3}, rng);
  auto y = conv2d(x, w, 1, 1);
  auto want = conv_oracle(x.vec(), w.vec(), 1, 2, 5, 5, 3, 3, 3, 1, 1, 1);
  CHECK(max_abs_diff(y.vec(), want) <= 1e-5);
}

TEST_CASE("conv2d oracle agreement over 100 random configurations") {
  Rng rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const int b = 1 + static_cast<int>(rng.uniform_index(2));
    const int groups = rng.bernoulli(0.3) ? 2 : 1;
    const int cin = groups * (1 + static_cast<int>(rng.uniform_index(2)));
    const int cout = groups * (1 + static_cast<int>(rng.uniform_index(2)));
    const int h = 3 + static_cast<int>(rng.uniform_index(5));
    const int w2 = 3 + static_cast<int>(rng.uniform_index(5));
    const int k = 1 + 2 * static_cast<int>(rng.uniform_index(2));  // 1 or 3
    const int stride = 1 + static_cast<int>(rng.uniform_index(2));
    const int pad = static_cast<int>(rng.uniform_index(2));
    if (h + 2 * pad < k || w2 + 2 * pad < k) continue;
    Tensor64 x = random_tensor<double>({b, cin, h, w2}, rng);
    Tensor64 w = random_tensor<double>({cout, cin / groups, k, k}, rng);
    auto y = conv2d(x, w, stride, pad, groups);
    auto want = conv_oracle(x.vec(), w.vec(), b, cin, h, w2, cout, k, k,
                            stride, pad, groups);
    REQUIRE(max_rel_diff(y.vec(), want) <= 1e-5);
  }
}

TEST_CASE("conv2d rejects non-positive output extents") {
  Tensor64 x = Tensor64::zeros({1, 1, 2, 2});
  Tensor64 w = Tensor64::zeros({1, 1, 5, 5});
  CHECK_THROWS_AS(conv2d(x, w, 1, 0), ConfigError);
}

TEST_CASE("avg_pool2d constant, forced window, and oracle") {
  Tensor64 c = Tensor64::full({1, 1, 4, 4}, 3.25);
  auto pc = avg_pool2d(c);
  for (int i = 0; i < 4; ++i) CHECK(pc.data()[i] == 3.25);

  Tensor64 win(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(avg_pool2d(win).data()[0] == doctest::Approx(2.5).epsilon(1e-12));

  Rng rng(47);
  Tensor64 x = random_tensor<double>({1, 1, 4, 4}, rng);
  auto y = avg_pool2d(x);
  for (int oy = 0; oy < 2; ++oy)
    for (int ox = 0; ox < 2; ++ox) {
      const double want =
          (x.data()[(2 * oy) * 4 + 2 * ox] + x.data()[(2 * oy) * 4 + 2 * ox + 1] +
           x.data()[(2 * oy + 1) * 4 + 2 * ox] +
           x.data()[(2 * oy + 1) * 4 + 2 * ox + 1]) *
          0.25;
      REQUIRE(y.data()[oy * 2 + ox] == want);
    }
}

TEST_CASE("avg_pool2d replicates the edge for odd extents") {
  Tensor64 x(Shape{1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto y = avg_pool2d(x);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y.data()[0] == doctest::Approx((1 + 2 + 4 + 5) * 0.25));
  CHECK(y.data()[1] == doctest::Approx((3 + 3 + 6 + 6) * 0.25));
  CHECK(y.data()[3] == doctest::Approx(9.0));
}

TEST_CASE("cross_entropy anchors") {
  Tensor64 uniform = Tensor64::zeros({1, 10});
  std::vector<int> y0{3};
  CHECK(cross_entropy(uniform, y0).item() ==
        doctest::Approx(std::log(10.0)).epsilon(1e-9));

  std::vector<double> sat(5, 0.0);
  sat[2] = 1e4;
  std::vector<int> y1{2};
  CHECK(cross_entropy(Tensor64({1, 5}, sat), y1).item() <= 1e-6);
}

TEST_CASE("cross_entropy matches log-sum-exp oracle") {
  Rng rng(53);
  Tensor64 logits = random_tensor<double>({2, 5}, rng, -4, 4);
  std::vector<int> labels{4, 1};
  long double want = 0;
  for (int i = 0; i < 2; ++i) {
    long double lse = 0;
    for (int j = 0; j < 5; ++j)
      lse += std::exp(static_cast<long double>(logits.data()[i * 5 + j]));
    want += std::log(lse) - logits.data()[i * 5 + labels[i]];
  }
  want /= 2;
  CHECK(std::fabs(cross_entropy(logits, labels).item() -
                  static_cast<double>(want)) <= 1e-6);
}

TEST_CASE("cross_entropy rejects out-of-range labels") {
  Tensor64 logits = Tensor64::zeros({1, 4});
  std::vector<int> bad{4};
  CHECK_THROWS_AS(cross_entropy(logits, bad), IndexError);
}

// ---------------------------------------------------------------------------
// backward

TEST_CASE("backward of sum of squares gives 2x") {
  Rng rng(59);
  Tensor64 xv = random_tensor<double>({6}, rng);
  Tensor64 x = Tensor64::leaf(xv.shape(), xv.vec());
  backward(sum(mul(x, x)));
  auto g = x.grad();
  for (int i = 0; i < 6; ++i)
    CHECK(g.data()[i] == doctest::Approx(2 * xv.data()[i]).epsilon(1e-12));
}

TEST_CASE("softmax + cross entropy composite gradient identity") {
  Rng rng(61);
  Tensor64 xv = random_tensor<double>({1, 5}, rng, -2, 2);
  Tensor64 x = Tensor64::leaf(xv.shape(), xv.vec());
  std::vector<int> y{2};
  backward(cross_entropy(x, y));
  auto g = x.grad();
  auto s = softmax(xv);
  for (int j = 0; j < 5; ++j) {
    const double want = s.data()[j] - (j == 2 ? 1.0 : 0.0);
    REQUIRE(std::fabs(g.data()[j] - want) <= 1e-12);
  }
}

TEST_CASE("backward rejects detached and non-scalar tensors") {
  Tensor64 plain = Tensor64::zeros({2});
  CHECK_THROWS_AS(backward(plain), UsageError);
  Tensor64 leaf = Tensor64::leaf_zeros({2});
  CHECK_THROWS_AS(backward(leaf), UsageError);
}

TEST_CASE("backward is deterministic bit for bit") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor64 x = Tensor64::leaf({4, 4}, random_tensor<double>({4, 4}, rng).vec());
    Tensor64 w = Tensor64::leaf({4, 4}, random_tensor<double>({4, 4}, rng).vec());
    auto y = gelu(matmul(x, w));
    auto z = softmax(add(y, matmul(x, w)));  // fan-out on the matmul result
    backward(sum(mul(z, z)));
    auto gx = x.grad().vec();
    auto gw = w.grad().vec();
    gx.insert(gx.end(), gw.begin(), gw.end());
    return gx;
  };
  auto a = run(101), b = run(101);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(std::memcmp(&a[i], &b[i], sizeof(double)) == 0);
}

// ---------------------------------------------------------------------------
// finite differences

TEST_CASE("finite_diff_check: sum with dyadic data is exact") {
  // Entries and step are powers of two, so every evaluation is exact and the
  // central difference reproduces the all-ones gradient with zero error.
  std::vector<double> data{0.25, 0.5, -0.75, 1.0, -1.5, 2.0};
  Tensor64 x(Shape{6}, data);
  auto f = [](const Tensor64& t) { return sum(t); };
  CHECK(finite_diff_check<double>(f, x, 0x1.0p-17) == 0.0);
}

TEST_CASE("finite_diff_check: quadratic form within 1e-8") {
  Rng rng(67);
  Tensor64 a = random_tensor<double>({4, 4}, rng);
  Tensor64 x = random_tensor<double>({4}, rng);
  auto f = [&](const Tensor64& t) {
    auto col = reshape(t, {4, 1});
    return sum(mul(col, matmul(a, col)));
  };
  CHECK(finite_diff_check<double>(f, x, 1e-5) <= 1e-8);
}

TEST_CASE("every differentiable op passes finite differences at 10 points") {
  Rng rng(71);
  auto readout = [&](Shape s) {
    // fixed random projection to a scalar
    return random_tensor<double>(std::move(s), rng, -1, 1);
  };

  struct Case {
    const char* name;
    Shape shape;
    std::function<Tensor64(const Tensor64&)> f;
  };
  std::vector<Case> cases;

  {
    Tensor64 b = random_tensor<double>({3, 2}, rng);
    Tensor64 r = readout({2, 2});
    cases.push_back({"matmul_lhs", {2, 3}, [=](const Tensor64& t) {
                       return sum(mul(r, matmul(t, b)));
                     }});
    Tensor64 a = random_tensor<double>({2, 3}, rng);
    cases.push_back({"matmul_rhs", {3, 2}, [=](const Tensor64& t) {
                       return sum(mul(r, matmul(a, t)));
                     }});
  }
  {
    Tensor64 r = readout({2, 4});
    cases.push_back({"softmax", {2, 4}, [=](const Tensor64& t) {
                       return sum(mul(r, softmax(t)));
                     }});
  }
  {
    Tensor64 gamma = random_tensor<double>({4}, rng, 0.5, 1.5);
    Tensor64 beta = random_tensor<double>({4}, rng);
    Tensor64 r = readout({2, 4});
    cases.push_back({"layer_norm_x", {2, 4}, [=](const Tensor64& t) {
                       return sum(mul(r, layer_norm(t, gamma, beta)));
                     }});
    Tensor64 x = random_tensor<double>({2, 4}, rng);
    cases.push_back({"layer_norm_gamma", {4}, [=](const Tensor64& t) {
                       return sum(mul(r, layer_norm(x, t, beta)));
                     }});
    cases.push_back({"layer_norm_beta", {4}, [=](const Tensor64& t) {
                       return sum(mul(r, layer_norm(x, gamma, t)));
                     }});
  }
  {
    Tensor64 r = readout({6});
    cases.push_back({"gelu", {6}, [=](const Tensor64& t) {
                       return sum(mul(r, gelu(t)));
                     }});
  }
  {
    Tensor64 w = random_tensor<double>({2, 2, 3, 3}, rng);
    Tensor64 r = readout({1, 2, 4, 4});
    cases.push_back({"conv2d_x", {1, 2, 4, 4}, [=](const Tensor64& t) {
                       return sum(mul(r, conv2d(t, w, 1, 1)));
                     }});
    Tensor64 x = random_tensor<double>({1, 2, 4, 4}, rng);
    cases.push_back({"conv2d_w", {2, 2, 3, 3}, [=](const Tensor64& t) {
                       return sum(mul(r, conv2d(x, t, 1, 1)));
                     }});
    Tensor64 dw = random_tensor<double>({2, 1, 3, 3}, rng);
    Tensor64 rg = readout({1, 2, 4, 4});
    cases.push_back({"conv2d_depthwise", {1, 2, 4, 4}, [=](const Tensor64& t) {
                       return sum(mul(rg, conv2d(t, dw, 1, 1, 2)));
                     }});
  }
  {
    Tensor64 r = readout({1, 1, 2, 2});
    cases.push_back({"avg_pool2d", {1, 1, 4, 4}, [=](const Tensor64& t) {
                       return sum(mul(r, avg_pool2d(t)));
                     }});
    Tensor64 r2 = readout({1, 1, 2, 2});
    cases.push_back({"avg_pool2d_odd", {1, 1, 3, 3}, [=](const Tensor64& t) {
                       return sum(mul(r2, avg_pool2d(t)));
                     }});
  }
  {
    std::vector<int> labels{1, 0};
    cases.push_back({"cross_entropy", {2, 3}, [=](const Tensor64& t) {
                       return cross_entropy(t, labels);
                     }});
  }
  {
    Tensor64 b = random_tensor<double>({2, 3}, rng);
    Tensor64 r = readout({2, 3});
    cases.push_back({"add", {2, 3}, [=](const Tensor64& t) {
                       return sum(mul(r, add(t, b)));
                     }});
    cases.push_back({"mul", {2, 3}, [=](const Tensor64& t) {
                       return sum(mul(r, mul(t, b)));
                     }});
    cases.push_back({"scale", {2, 3}, [=](const Tensor64& t) {
                       return sum(mul(r, scale(t, 1.7)));
                     }});
    cases.push_back({"add_scalar", {2, 3}, [=](const Tensor64& t) {
                       return sum(mul(r, add_scalar(t, -0.3)));
                     }});
  }
  {
    Tensor64 bias = random_tensor<double>({3}, rng);
    Tensor64 r = readout({2, 3});
    cases.push_back({"add_row_bias_x", {2, 3}, [=](const Tensor64& t) {
                       return sum(mul(r, add_row_bias(t, bias)));
                     }});
    Tensor64 x = random_tensor<double>({2, 3}, rng);
    cases.push_back({"add_row_bias_b", {3}, [=](const Tensor64& t) {
                       return sum(mul(r, add_row_bias(x, t)));
                     }});
    Tensor64 xc = random_tensor<double>({1, 3, 2, 2}, rng);
    Tensor64 rc = readout({1, 3, 2, 2});
    cases.push_back({"add_channel_bias_b", {3}, [=](const Tensor64& t) {
                       return sum(mul(rc, add_channel_bias(xc, t)));
                     }});
  }
  {
    Tensor64 r = readout({3, 2});
    cases.push_back({"transpose2d", {2, 3}, [=](const Tensor64& t) {
                       return sum(mul(r, transpose2d(t)));
                     }});
    Tensor64 r2 = readout({6});
    cases.push_back({"reshape", {2, 3}, [=](const Tensor64& t) {
                       return sum(mul(r2, reshape(t, {6})));
                     }});
  }
  {
    std::vector<int> idx{2, 0, 2, 1};
    Tensor64 r = readout({4, 3});
    cases.push_back({"gather_rows", {3, 3}, [=](const Tensor64& t) {
                       return sum(mul(r, gather_rows(t, idx)));
                     }});
    Tensor64 r2 = readout({3});
    cases.push_back({"mean_rows", {4, 3}, [=](const Tensor64& t) {
                       return sum(mul(r2, mean_rows(t)));
                     }});
  }
  {
    Tensor64 other = random_tensor<double>({2, 3}, rng);
    Tensor64 r = readout({4, 3});
    cases.push_back({"concat_rows", {2, 3}, [=](const Tensor64& t) {
                       return sum(mul(r, concat_rows<double>({t, other})));
                     }});
    Tensor64 other2 = random_tensor<double>({2, 2}, rng);
    Tensor64 r2 = readout({2, 5});
    cases.push_back({"concat_cols", {2, 3}, [=](const Tensor64& t) {
                       return sum(mul(r2, concat_cols<double>({t, other2})));
                     }});
  }
  {
    Tensor64 r = readout({4, 12});
    cases.push_back({"im2row_patches", {1, 3, 4, 4}, [=](const Tensor64& t) {
                       return sum(mul(r, im2row_patches(t, 2)));
                     }});
    Tensor64 r2 = readout({4, 3});
    cases.push_back({"nchw_to_tokens", {1, 3, 2, 2}, [=](const Tensor64& t) {
                       return sum(mul(r2, nchw_to_tokens(t)));
                     }});
    Tensor64 r3 = readout({1, 3, 2, 2});
    cases.push_back({"tokens_to_nchw", {4, 3}, [=](const Tensor64& t) {
                       return sum(mul(r3, tokens_to_nchw(t, 2, 2)));
                     }});
  }

  Rng points(73);
  for (const auto& c : cases) {
    for (int p = 0; p < 10; ++p) {
      Tensor64 x = random_tensor<double>(c.shape, points, -1.5, 1.5);
      const double err = finite_diff_check<double>(c.f, x, 1e-5);
      INFO(c.name << " point " << p << " rel err " << err);
      REQUIRE(err <= 1e-6);
    }
  }
}

TEST_CASE("gradient accumulates additively across fan-out") {
  Tensor64 x = Tensor64::leaf({2}, {1.0, 2.0});
  auto y = add(x, x);  // dy/dx = 2
  backward(sum(y));
  CHECK(x.grad().data()[0] == 2.0);
  CHECK(x.grad().data()[1] == 2.0);
}

TEST_CASE("detached tensors never accumulate gradient") {
  Tensor64 x = Tensor64::leaf({2}, {1.0, 2.0});
  Tensor64 d = x.detach();
  CHECK_FALSE(d.tracked());
  auto y = mul(x, d);  // d acts as a constant
  backward(sum(y));
  CHECK(x.grad().data()[0] == 1.0);  // grad = d, not 2x
  CHECK(x.grad().data()[1] == 2.0);
}
