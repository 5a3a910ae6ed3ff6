#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "rvt/ops.hpp"
#include "rvt/tensor.hpp"

namespace rvt {

// Central-difference check of reverse-mode gradients. `f` maps a tensor to a
// scalar tensor; it is evaluated on a tracked leaf once for the analytic
// gradient and on detached perturbed copies for the differences. Returns the
// max over coordinates of |fd - ad| / max(1, |fd|, |ad|).
template <typename T>
double finite_diff_check(const std::function<Tensor<T>(const Tensor<T>&)>& f,
                         const Tensor<T>& x, T h) {
  Tensor<T> leaf = Tensor<T>::leaf(x.shape(), x.vec());
  Tensor<T> loss = f(leaf);
  if (loss.numel() != 1)
    throw UsageError("finite_diff_check: f must be scalar-valued");
  backward(loss);
  const Tensor<T> ad = leaf.grad();

  double max_rel = 0.0;
  const std::size_t n = static_cast<std::size_t>(x.numel());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<T> plus = x.vec();
    std::vector<T> minus = x.vec();
    plus[i] += h;
    minus[i] -= h;
    const T fp = f(Tensor<T>(x.shape(), std::move(plus))).item();
    const T fm = f(Tensor<T>(x.shape(), std::move(minus))).item();
    const double fd = (static_cast<double>(fp) - static_cast<double>(fm)) /
                      (2.0 * static_cast<double>(h));
    const double av = static_cast<double>(ad.data()[i]);
    const double denom = std::max({1.0, std::fabs(fd), std::fabs(av)});
    max_rel = std::max(max_rel, std::fabs(fd - av) / denom);
  }
  return max_rel;
}

// Default step sizes: h = 1e-5 is near-optimal for f64 central differences;
// f32 needs a coarser step to stay above rounding noise.
inline constexpr double kGradCheckH64 = 1e-5;
inline constexpr float kGradCheckH32 = 4e-3f;

template <typename T>
constexpr T default_fd_step() {
  if constexpr (std::is_same_v<T, double>)
    return T(kGradCheckH64);
  else
    return T(kGradCheckH32);
}

}  // namespace rvt
