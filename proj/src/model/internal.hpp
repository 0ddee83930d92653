#pragma once

#include "fdm/model.hpp"
#include "layers.hpp"

namespace fdm::detail {

template <class S>
struct PatchCache {
  Mat<S> cols0, s, n1, cols1, c1, n2, cols2, pooled;
  NormCache<S> gn1, gn2;
};

// Embeds P patches into a P x width matrix; fills `cache` for backward.
template <class S>
Mat<S> patch_forward(const ModelParams<S>& p, const ModelConfig& cfg,
                     const std::vector<const Patch*>& patches, PatchCache<S>* cache);
template <class S>
void patch_backward(const ModelParams<S>& p, const ModelConfig& cfg,
                    const PatchCache<S>& cache, const Mat<S>& d_out,
                    ModelParams<S>& g);

}  // namespace fdm::detail
