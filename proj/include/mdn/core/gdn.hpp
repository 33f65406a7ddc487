#pragma once

#include <Eigen/Core>

#include "mdn/core/conv.hpp"

namespace mdn {

// Effective (already reparameterized) normalization parameters.
template <typename T>
struct GdnParams {
  Var<T> beta;   // 1 x C x 1 x 1, strictly positive
  Var<T> gamma;  // C x C x 1 x 1, non-negative
  bool inverse = false;
};

// y_c = x_c / sqrt(beta_c + sum_j gamma_cj x_j^2) at every spatial position;
// the inverse variant multiplies by the square root instead.
template <typename T>
Var<T> gdn(const Var<T>& x, const GdnParams<T>& p) {
  const Shape xs = x.shape();
  const int C = xs.c;
  if (p.beta.shape() != Shape{1, C, 1, 1} || p.gamma.shape() != Shape{C, C, 1, 1}) {
    throw ShapeError("gdn: parameters beta " + p.beta.shape().str() + ", gamma " +
                     p.gamma.shape().str() + " do not match " + std::to_string(C) + " channels");
  }
  for (int c = 0; c < C; ++c) {
    if (!(p.beta.value()[c] > T(0))) {
      throw ValueError("gdn: beta[" + std::to_string(c) + "] is not positive");
    }
  }
  const bool inverse = p.inverse;
  const std::size_t hw = xs.plane();
  using Mat = detail::MatR<T>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  Eigen::Map<const Mat> G(p.gamma.value().data(), C, C);
  Eigen::Map<const Vec> B(p.beta.value().data(), C);
  // Keep sqrt(norm) for the backward pass.
  Tensor<T> root(xs);
  Tensor<T> out(xs);
  Mat sq(C, hw);
  for (int n = 0; n < xs.n; ++n) {
    Eigen::Map<const Mat> X(x.value().data() + n * xs.sample(), C, hw);
    Eigen::Map<Mat> R(root.data() + n * xs.sample(), C, hw);
    Eigen::Map<Mat> Y(out.data() + n * xs.sample(), C, hw);
    sq = X.array().square();
    R.noalias() = G * sq;
    R.colwise() += B;
    R = R.array().sqrt();
    if (inverse) {
      Y.array() = X.array() * R.array();
    } else {
      Y.array() = X.array() / R.array();
    }
  }

  GdnParams<T> params = p;
  return make_result<T>(std::move(out), {&x, &p.beta, &p.gamma},
                        [x, params, root = std::move(root), inverse, C, hw](Node<T>& self) mutable {
    const Shape xs = x.shape();
    Eigen::Map<const Mat> G(params.gamma.value().data(), C, C);
    Mat dnorm(C, hw);
    Mat sq(C, hw);
    for (int n = 0; n < xs.n; ++n) {
      Eigen::Map<const Mat> X(x.value().data() + n * xs.sample(), C, hw);
      Eigen::Map<const Mat> R(root.data() + n * xs.sample(), C, hw);
      Eigen::Map<const Mat> D(self.grad.data() + n * xs.sample(), C, hw);
      // d/dnorm of x * norm^(+-1/2)
      if (inverse) {
        dnorm = (D.array() * X.array() * T(0.5) / R.array()).matrix();
      } else {
        dnorm = (D.array() * X.array() * T(-0.5) / (R.array() * R.array() * R.array())).matrix();
      }
      sq = X.array().square();
      if (x.requires_grad()) {
        Eigen::Map<Mat> GX(x.grad_ref().data() + n * xs.sample(), C, hw);
        if (inverse) {
          GX.array() += D.array() * R.array();
        } else {
          GX.array() += D.array() / R.array();
        }
        Mat back = G.transpose() * dnorm;
        GX.array() += T(2) * X.array() * back.array();
      }
      if (params.gamma.requires_grad()) {
        Eigen::Map<Mat>(params.gamma.grad_ref().data(), C, C).noalias() += dnorm * sq.transpose();
      }
      if (params.beta.requires_grad()) {
        Eigen::Map<Vec>(params.beta.grad_ref().data(), C) += dnorm.rowwise().sum();
      }
    }
  });
}

}  // namespace mdn
