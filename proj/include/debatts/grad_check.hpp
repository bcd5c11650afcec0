#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

#include "debatts/autodiff.hpp"
#include "debatts/errors.hpp"

namespace debatts {

namespace detail {

inline void check_epsilon(double eps) {
  if (!(eps >= 1e-8 && eps <= 1e-3)) throw DomainError("grad_check: epsilon must lie in [1e-8, 1e-3]");
}

inline double scalar_of(const ad::Var<double>& y) {
  if (y.value().size() != 1) throw ShapeError("grad_check: function must be scalar-valued");
  const double v = y.value()[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
  return v;
}

inline double relative_error(double analytic, double numeric) {
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) throw NumericError("grad_check: non-finite gradient");
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace detail

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
inline double grad_check(const std::function<ad::Var<double>(const ad::Var<double>&)>& f,
                         const Tensor<double>& input, double eps) {
  detail::check_epsilon(eps);
  auto x = ad::Var<double>::leaf(input, true);
  auto y = f(x);
  detail::scalar_of(y);
  y.backward();
  const Tensor<double> analytic = x.grad();

  ad::NoGradGuard no_grad;
  double worst = 0;
  Tensor<double> probe = input;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = detail::scalar_of(f(ad::Var<double>::constant(probe)));
    probe[i] = orig - eps;
    const double down = detail::scalar_of(f(ad::Var<double>::constant(probe)));
    probe[i] = orig;
    worst = std::max(worst, detail::relative_error(analytic[i], (up - down) / (2 * eps)));
  }
  return worst;
}

// Same measure, perturbing parameters in place. f must rebuild its graph from
// the parameters on every call.
inline double grad_check_params(const std::function<ad::Var<double>()>& f, std::span<ad::Var<double>> params,
                                double eps) {
  detail::check_epsilon(eps);
  for (auto& p : params) p.zero_grad();
  auto y = f();
  detail::scalar_of(y);
  y.backward();
  std::vector<Tensor<double>> analytic;
  for (auto& p : params) analytic.push_back(p.grad());

  ad::NoGradGuard no_grad;
  double worst = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& w = params[k].mutable_value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + eps;
      const double up = detail::scalar_of(f());
      w[i] = orig - eps;
      const double down = detail::scalar_of(f());
      w[i] = orig;
      worst = std::max(worst, detail::relative_error(analytic[k][i], (up - down) / (2 * eps)));
    }
  }
  return worst;
}

}  // namespace debatts
