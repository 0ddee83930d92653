#include "internal.hpp"

namespace fdm::detail {

namespace {

constexpr int kSide = kPatchSize;
constexpr int kPositions = kSide * kSide;
constexpr int kPool = 4;  // pooled grid is kPool x kPool
constexpr int kCell = kSide / kPool;

// 3x3 same-padding patches of a (P * 256) x K activation map.
template <class S>
Mat<S> im2col(const Mat<S>& x, int k) {
  const auto rows = x.rows();
  Mat<S> cols = Mat<S>::Zero(rows, 9 * k);
  for (Eigen::Index base = 0; base < rows; base += kPositions) {
    for (int y = 0; y < kSide; ++y) {
      for (int xx = 0; xx < kSide; ++xx) {
        const auto r = base + y * kSide + xx;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= kSide) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= kSide) continue;
            cols.row(r).segment((ky * 3 + kx) * k, k) = x.row(base + sy * kSide + sx);
          }
        }
      }
    }
  }
  return cols;
}

template <class S>
Mat<S> col2im(const Mat<S>& cols, int k) {
  const auto rows = cols.rows();
  Mat<S> x = Mat<S>::Zero(rows, k);
  for (Eigen::Index base = 0; base < rows; base += kPositions) {
    for (int y = 0; y < kSide; ++y) {
      for (int xx = 0; xx < kSide; ++xx) {
        const auto r = base + y * kSide + xx;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= kSide) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= kSide) continue;
            x.row(base + sy * kSide + sx) += cols.row(r).segment((ky * 3 + kx) * k, k);
          }
        }
      }
    }
  }
  return x;
}

template <class S>
Mat<S> gelu_of(const Mat<S>& x) {
  return x.unaryExpr([](S v) { return gelu(v); });
}

}  // namespace

template <class S>
Mat<S> patch_forward(const ModelParams<S>& p, const ModelConfig& cfg,
                     const std::vector<const Patch*>& patches, PatchCache<S>* cache) {
  const int c = cfg.patch_channels, k = cfg.patch_hidden, groups = cfg.norm_groups;
  const auto n = static_cast<Eigen::Index>(patches.size());
  Mat<S> x0(n * kPositions, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Patch& pt = *patches[i];
    if (pt.channels != c) {
      throw ShapeError("patch has " + std::to_string(pt.channels) +
                       " channels, the model expects " + std::to_string(c));
    }
    for (int j = 0; j < kPositions * c; ++j) {
      x0(i * kPositions + j / c, j % c) = static_cast<S>(pt.pixels[j]);
    }
  }
  PatchCache<S> local;
  PatchCache<S>& pc = cache ? *cache : local;
  pc.cols0 = im2col(x0, c);
  pc.s = (pc.cols0 * p.stem_w).rowwise() + p.stem_b;
  pc.n1 = group_norm(pc.s, kPositions, groups, p.gn1_g, p.gn1_b, &pc.gn1);
  pc.cols1 = im2col(gelu_of(pc.n1), k);
  pc.c1 = (pc.cols1 * p.conv1_w).rowwise() + p.conv1_b;
  pc.n2 = group_norm(pc.c1, kPositions, groups, p.gn2_g, p.gn2_b, &pc.gn2);
  pc.cols2 = im2col(gelu_of(pc.n2), k);
  Mat<S> r = pc.s + ((pc.cols2 * p.conv2_w).rowwise() + p.conv2_b);

  pc.pooled = Mat<S>::Zero(n, kPool * kPool * k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int y = 0; y < kSide; ++y) {
      for (int xx = 0; xx < kSide; ++xx) {
        const int cell = (y / kCell) * kPool + xx / kCell;
        pc.pooled.row(i).segment(cell * k, k) += r.row(i * kPositions + y * kSide + xx);
      }
    }
  }
  pc.pooled /= S(kCell * kCell);
  return (pc.pooled * p.proj_w).rowwise() + p.proj_b;
}

template <class S>
void patch_backward(const ModelParams<S>& p, const ModelConfig& cfg,
                    const PatchCache<S>& pc, const Mat<S>& d_out, ModelParams<S>& g) {
  const int k = cfg.patch_hidden, groups = cfg.norm_groups;
  const auto n = d_out.rows();
  g.proj_w.noalias() += pc.pooled.transpose() * d_out;
  g.proj_b += d_out.colwise().sum();
  const Mat<S> d_pooled = (d_out * p.proj_w.transpose()) / S(kCell * kCell);

  Mat<S> dr(n * kPositions, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int y = 0; y < kSide; ++y) {
      for (int xx = 0; xx < kSide; ++xx) {
        const int cell = (y / kCell) * kPool + xx / kCell;
        dr.row(i * kPositions + y * kSide + xx) = d_pooled.row(i).segment(cell * k, k);
      }
    }
  }
  g.conv2_w.noalias() += pc.cols2.transpose() * dr;
  g.conv2_b += dr.colwise().sum();
  Mat<S> dn2 = col2im<S>(dr * p.conv2_w.transpose(), k);
  dn2.array() *= pc.n2.unaryExpr([](S v) { return gelu_grad(v); }).array();
  const Mat<S> dc1 = group_norm_backward(dn2, kPositions, groups, p.gn2_g, pc.gn2, g.gn2_g, g.gn2_b);
  g.conv1_w.noalias() += pc.cols1.transpose() * dc1;
  g.conv1_b += dc1.colwise().sum();
  Mat<S> dn1 = col2im<S>(dc1 * p.conv1_w.transpose(), k);
  dn1.array() *= pc.n1.unaryExpr([](S v) { return gelu_grad(v); }).array();
  const Mat<S> ds = dr + group_norm_backward(dn1, kPositions, groups, p.gn1_g, pc.gn1, g.gn1_g, g.gn1_b);
  g.stem_w.noalias() += pc.cols0.transpose() * ds;
  g.stem_b += ds.colwise().sum();
}

template Mat<float> patch_forward(const ModelParams<float>&, const ModelConfig&,
                                  const std::vector<const Patch*>&, PatchCache<float>*);
template Mat<double> patch_forward(const ModelParams<double>&, const ModelConfig&,
                                   const std::vector<const Patch*>&, PatchCache<double>*);
template void patch_backward(const ModelParams<float>&, const ModelConfig&,
                             const PatchCache<float>&, const Mat<float>&, ModelParams<float>&);
template void patch_backward(const ModelParams<double>&, const ModelConfig&,
                             const PatchCache<double>&, const Mat<double>&, ModelParams<double>&);

}  // namespace fdm::detail
