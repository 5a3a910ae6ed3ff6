#include "rvt/gradsuite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "rvt/gradcheck.hpp"
#include "rvt/model.hpp"

namespace rvt {

namespace {

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
  std::vector<T> data(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& v : data) v = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
struct OpCase {
  std::string name;
  Shape shape;
  std::function<Tensor<T>(const Tensor<T>&)> f;
};

// Every differentiable kernel, composed with a fixed random readout so the
// checked function is scalar-valued.
template <typename T>
std::vector<OpCase<T>> op_cases(Rng& rng) {
  auto ro = [&rng](Shape s) { return random_tensor<T>(std::move(s), rng); };
  std::vector<OpCase<T>> cases;

  Tensor<T> b32 = random_tensor<T>({3, 2}, rng);
  Tensor<T> a23 = random_tensor<T>({2, 3}, rng);
  Tensor<T> r22 = ro({2, 2});
  cases.push_back({"matmul.a", {2, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r22, matmul(t, b32)));
                   }});
  cases.push_back({"matmul.b", {3, 2}, [=](const Tensor<T>& t) {
                     return sum(mul(r22, matmul(a23, t)));
                   }});

  Tensor<T> r24 = ro({2, 4});
  cases.push_back({"softmax", {2, 4}, [=](const Tensor<T>& t) {
                     return sum(mul(r24, softmax(t)));
                   }});

  Tensor<T> gamma = random_tensor<T>({4}, rng, 0.5, 1.5);
  Tensor<T> beta = random_tensor<T>({4}, rng);
  Tensor<T> x24 = random_tensor<T>({2, 4}, rng);
  cases.push_back({"layer_norm.x", {2, 4}, [=](const Tensor<T>& t) {
                     return sum(mul(r24, layer_norm(t, gamma, beta)));
                   }});
  cases.push_back({"layer_norm.gamma", {4}, [=](const Tensor<T>& t) {
                     return sum(mul(r24, layer_norm(x24, t, beta)));
                   }});
  cases.push_back({"layer_norm.beta", {4}, [=](const Tensor<T>& t) {
                     return sum(mul(r24, layer_norm(x24, gamma, t)));
                   }});

  Tensor<T> r6 = ro({6});
  cases.push_back(
      {"gelu", {6}, [=](const Tensor<T>& t) { return sum(mul(r6, gelu(t))); }});

  Tensor<T> w_conv = random_tensor<T>({2, 2, 3, 3}, rng);
  Tensor<T> x_conv = random_tensor<T>({1, 2, 4, 4}, rng);
  Tensor<T> r_conv = ro({1, 2, 4, 4});
  cases.push_back({"conv2d.x", {1, 2, 4, 4}, [=](const Tensor<T>& t) {
                     return sum(mul(r_conv, conv2d(t, w_conv, 1, 1)));
                   }});
  cases.push_back({"conv2d.w", {2, 2, 3, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r_conv, conv2d(x_conv, t, 1, 1)));
                   }});
  Tensor<T> dw = random_tensor<T>({2, 1, 3, 3}, rng);
  cases.push_back({"conv2d.depthwise", {1, 2, 4, 4}, [=](const Tensor<T>& t) {
                     return sum(mul(r_conv, conv2d(t, dw, 1, 1, 2)));
                   }});
  Tensor<T> w_stride = random_tensor<T>({2, 2, 3, 3}, rng);
  Tensor<T> r_stride = ro({1, 2, 2, 2});
  cases.push_back({"conv2d.stride2", {1, 2, 4, 4}, [=](const Tensor<T>& t) {
                     return sum(mul(r_stride, conv2d(t, w_stride, 2, 1)));
                   }});

  Tensor<T> r_pool = ro({1, 1, 2, 2});
  cases.push_back({"avg_pool2d", {1, 1, 4, 4}, [=](const Tensor<T>& t) {
                     return sum(mul(r_pool, avg_pool2d(t)));
                   }});
  cases.push_back({"avg_pool2d.odd", {1, 1, 3, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r_pool, avg_pool2d(t)));
                   }});

  std::vector<int> labels{1, 0};
  cases.push_back({"cross_entropy", {2, 3}, [=](const Tensor<T>& t) {
                     return cross_entropy(t, labels);
                   }});

  Tensor<T> other23 = random_tensor<T>({2, 3}, rng);
  Tensor<T> r23 = ro({2, 3});
  cases.push_back({"add", {2, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r23, add(t, other23)));
                   }});
  cases.push_back({"mul", {2, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r23, mul(t, other23)));
                   }});
  cases.push_back({"scale", {2, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r23, scale(t, T(1.7))));
                   }});
  cases.push_back({"add_scalar", {2, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r23, add_scalar(t, T(-0.4))));
                   }});

  Tensor<T> bias3 = random_tensor<T>({3}, rng);
  cases.push_back({"add_row_bias.x", {2, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r23, add_row_bias(t, bias3)));
                   }});
  cases.push_back({"add_row_bias.b", {3}, [=](const Tensor<T>& t) {
                     return sum(mul(r23, add_row_bias(other23, t)));
                   }});
  Tensor<T> xc = random_tensor<T>({1, 3, 2, 2}, rng);
  Tensor<T> rc = ro({1, 3, 2, 2});
  cases.push_back({"add_channel_bias.x", {1, 3, 2, 2}, [=](const Tensor<T>& t) {
                     return sum(mul(rc, add_channel_bias(t, bias3)));
                   }});
  cases.push_back({"add_channel_bias.b", {3}, [=](const Tensor<T>& t) {
                     return sum(mul(rc, add_channel_bias(xc, t)));
                   }});

  Tensor<T> r32 = ro({3, 2});
  cases.push_back({"transpose2d", {2, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r32, transpose2d(t)));
                   }});
  cases.push_back({"reshape", {2, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r6, reshape(t, {6})));
                   }});

  std::vector<int> idx{2, 0, 2, 1};
  Tensor<T> r43 = ro({4, 3});
  cases.push_back({"gather_rows", {3, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r43, gather_rows(t, idx)));
                   }});
  Tensor<T> r3 = ro({3});
  cases.push_back({"mean_rows", {4, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r3, mean_rows(t)));
                   }});
  cases.push_back({"concat_rows", {2, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r43, concat_rows<T>({t, other23})));
                   }});
  Tensor<T> other22 = random_tensor<T>({2, 2}, rng);
  Tensor<T> r25 = ro({2, 5});
  cases.push_back({"concat_cols", {2, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r25, concat_cols<T>({t, other22})));
                   }});

  Tensor<T> r412 = ro({4, 12});
  cases.push_back({"im2row_patches", {1, 3, 4, 4}, [=](const Tensor<T>& t) {
                     return sum(mul(r412, im2row_patches(t, 2)));
                   }});
  cases.push_back({"nchw_to_tokens", {1, 3, 2, 2}, [=](const Tensor<T>& t) {
                     return sum(mul(r43, nchw_to_tokens(t)));
                   }});
  cases.push_back({"tokens_to_nchw", {4, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(rc, tokens_to_nchw(t, 2, 2)));
                   }});

  Tensor<T> q = random_tensor<T>({3, 4}, rng);
  Tensor<T> k = random_tensor<T>({3, 4}, rng);
  Tensor<T> v = random_tensor<T>({3, 4}, rng);
  Tensor<T> wp = random_tensor<T>({3, 3}, rng, 0.3, 1.7);
  Tensor<T> r34 = ro({3, 4});
  cases.push_back({"attention.q", {3, 4}, [=](const Tensor<T>& t) {
                     return sum(mul(r34, sdp_attention(t, k, v)));
                   }});
  cases.push_back({"attention.k", {3, 4}, [=](const Tensor<T>& t) {
                     return sum(mul(r34, sdp_attention(q, t, v)));
                   }});
  cases.push_back({"attention.v", {3, 4}, [=](const Tensor<T>& t) {
                     return sum(mul(r34, sdp_attention(q, k, t)));
                   }});
  cases.push_back({"attention.wp", {3, 3}, [=](const Tensor<T>& t) {
                     return sum(mul(r34, paas_attention(q, k, v, t)));
                   }});
  return cases;
}

ModelConfig two_block_cfg() {
  ModelConfig cfg;
  cfg.stage.blocks = {0, 2, 0, 0};
  cfg.stage.channels = {0, 16, 0, 0};
  cfg.stage.heads = {0, 2, 0, 0};
  cfg.stage.head_dim = {0, 8, 0, 0};
  cfg.embed_kind = EmbedKind::conv_stem;
  cfg.ffn_kind = FfnKind::conv;
  cfg.pos_kind = PosKind::paas;
  cfg.head_kind = HeadKind::gap;
  cfg.num_classes = 3;
  cfg.input_res = 16;
  return cfg;
}

template <typename T>
void run_precision(GradSuiteResult& result, std::ostream* log, double tol,
                   T h, int points, const char* label) {
  Rng rng(0x5eed);
  auto cases = op_cases<T>(rng);
  Rng pts(0xab1e);
  for (const auto& c : cases) {
    double worst = 0;
    for (int p = 0; p < points; ++p) {
      Tensor<T> x = random_tensor<T>(c.shape, pts, -1.5, 1.5);
      worst = std::max(worst, finite_diff_check<T>(c.f, x, h));
    }
    GradCheckEntry entry{std::string(label) + "." + c.name, worst, tol,
                         worst <= tol};
    result.passed = result.passed && entry.passed;
    if (log)
      *log << (entry.passed ? "  ok   " : "  FAIL ") << entry.name
           << "  max rel " << entry.max_rel << "\n";
    result.entries.push_back(std::move(entry));
  }

  // end-to-end: input gradient plus sampled parameter coordinates
  Model<T> m = build_model<T>(two_block_cfg(), 99);
  Rng drng(0xda7a);
  Tensor<T> img = random_tensor<T>({1, 3, 16, 16}, drng, 0, 1);
  std::vector<int> label_vec{1};
  auto loss_of = [&]() {
    return cross_entropy(reshape(forward_one(m, img), {1, 3}), label_vec);
  };

  double worst = 0;
  {
    auto f = [&](const Tensor<T>& t) {
      return cross_entropy(reshape(forward_one(m, t), {1, 3}), label_vec);
    };
    worst = finite_diff_check<T>(f, img, h);
  }
  m.zero_grads();
  backward(loss_of());
  Rng pick(0x9ead);
  for (auto& [name, param] : m.params) {
    const Tensor<T> ad = param.grad();
    for (int trial = 0; trial < 2; ++trial) {
      const auto i = static_cast<std::size_t>(
          pick.uniform_index(static_cast<std::uint64_t>(param.numel())));
      const T keep = param.data()[i];
      param.data()[i] = keep + h;
      const double fp = static_cast<double>(loss_of().item());
      param.data()[i] = keep - h;
      const double fm = static_cast<double>(loss_of().item());
      param.data()[i] = keep;
      const double fd = (fp - fm) / (2.0 * static_cast<double>(h));
      const double av = static_cast<double>(ad.data()[i]);
      const double rel =
          std::fabs(fd - av) / std::max({1.0, std::fabs(fd), std::fabs(av)});
      worst = std::max(worst, rel);
    }
  }
  GradCheckEntry entry{std::string(label) + ".two_block_model", worst, tol,
                       worst <= tol};
  result.passed = result.passed && entry.passed;
  if (log)
    *log << (entry.passed ? "  ok   " : "  FAIL ") << entry.name
         << "  max rel " << entry.max_rel << "\n";
  result.entries.push_back(std::move(entry));
}

}  // namespace

GradSuiteResult run_gradient_suite(std::ostream* log) {
  GradSuiteResult result;
  run_precision<double>(result, log, 1e-6, 1e-5, 10, "f64");
  run_precision<float>(result, log, 1e-3, kGradCheckH32, 3, "f32");
  return result;
}

}  // namespace rvt
