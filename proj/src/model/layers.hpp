#pragma once

// Small dense building blocks shared by the patch embedder and the
// transformer. Row-major matrices; every backward accumulates into its
// parameter gradients and returns the input gradient.

#include <cmath>

#include "fdm/model.hpp"

namespace fdm::detail {

inline constexpr double kNormEps = 1e-5;

template <class S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x * S(M_SQRT1_2)));
}
template <class S>
S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x * S(M_SQRT1_2)));
  const S pdf = std::exp(S(-0.5) * x * x) * S(0.5 * M_2_SQRTPI * M_SQRT1_2);
  return cdf + x * pdf;
}

template <class S>
struct NormCache {
  Mat<S> xhat;
  std::vector<S> rstd;
};

template <class S>
Mat<S> layer_norm(const Mat<S>& x, const RowVec<S>& g, const RowVec<S>& b,
                  NormCache<S>* cache) {
  const auto n = x.rows();
  const auto d = x.cols();
  Mat<S> xhat(n, d);
  std::vector<S> rstd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S mean = x.row(i).mean();
    const S var = (x.row(i).array() - mean).square().mean();
    rstd[i] = S(1) / std::sqrt(var + S(kNormEps));
    xhat.row(i) = (x.row(i).array() - mean) * rstd[i];
  }
  Mat<S> y = (xhat.array().rowwise() * g.array()).rowwise() + b.array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

template <class S>
Mat<S> layer_norm_backward(const Mat<S>& dy, const RowVec<S>& g,
                           const NormCache<S>& c, RowVec<S>& dg, RowVec<S>& db) {
  dg += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();
  Mat<S> dxhat = dy.array().rowwise() * g.array();
  Mat<S> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const S m1 = dxhat.row(i).mean();
    const S m2 = (dxhat.row(i).array() * c.xhat.row(i).array()).mean();
    dx.row(i) = (dxhat.row(i).array() - m1 - c.xhat.row(i).array() * m2) * c.rstd[i];
  }
  return dx;
}

// Group normalization over (P * positions) x K activations: statistics per
// patch and per group of K / groups channels.
template <class S>
Mat<S> group_norm(const Mat<S>& x, int positions, int groups, const RowVec<S>& g,
                  const RowVec<S>& b, NormCache<S>* cache) {
  const auto k = static_cast<int>(x.cols());
  const int cpg = k / groups;
  const auto patches = static_cast<int>(x.rows() / positions);
  Mat<S> xhat(x.rows(), k);
  std::vector<S> rstd(static_cast<std::size_t>(patches) * groups);
  for (int p = 0; p < patches; ++p) {
    for (int gi = 0; gi < groups; ++gi) {
      auto blk = x.block(p * positions, gi * cpg, positions, cpg);
      const S mean = blk.mean();
      const S var = (blk.array() - mean).square().mean();
      const S r = S(1) / std::sqrt(var + S(kNormEps));
      rstd[p * groups + gi] = r;
      xhat.block(p * positions, gi * cpg, positions, cpg) = (blk.array() - mean) * r;
    }
  }
  Mat<S> y = (xhat.array().rowwise() * g.array()).rowwise() + b.array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

template <class S>
Mat<S> group_norm_backward(const Mat<S>& dy, int positions, int groups,
                           const RowVec<S>& g, const NormCache<S>& c,
                           RowVec<S>& dg, RowVec<S>& db) {
  dg += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();
  const auto k = static_cast<int>(dy.cols());
  const int cpg = k / groups;
  const auto patches = static_cast<int>(dy.rows() / positions);
  Mat<S> dxhat = dy.array().rowwise() * g.array();
  Mat<S> dx(dy.rows(), k);
  for (int p = 0; p < patches; ++p) {
    for (int gi = 0; gi < groups; ++gi) {
      auto dh = dxhat.block(p * positions, gi * cpg, positions, cpg);
      auto xh = c.xhat.block(p * positions, gi * cpg, positions, cpg);
      const S m1 = dh.mean();
      const S m2 = (dh.array() * xh.array()).mean();
      dx.block(p * positions, gi * cpg, positions, cpg) =
          (dh.array() - m1 - xh.array() * m2) * c.rstd[p * groups + gi];
    }
  }
  return dx;
}

template <class S>
void check_finite(const Mat<S>& m, const std::string& what) {
  if (!m.allFinite()) throw NumericalError("non-finite values in " + what);
}

}  // namespace fdm::detail
