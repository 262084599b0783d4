#pragma once

#include "opposd/dataset.hpp"
#include "opposd/matrix.hpp"

namespace opposd {

// Per-model input pipeline: optional fixed linear feature map (used for
// state-aliased tabular policies) followed by optional normalization in the
// mapped space.
struct InputAdapter {
  DenseMatrix feature_map;   // empty => identity
  NormalizationStats norm;   // empty => no normalization

  std::size_t out_dim(std::size_t state_dim) const {
    return feature_map.empty() ? state_dim : feature_map.cols;
  }

  DenseMatrix apply(const DenseMatrix& states) const {
    DenseMatrix mapped;
    const DenseMatrix* src = &states;
    if (!feature_map.empty()) {
      matmul(states, feature_map, mapped);
      src = &mapped;
    }
    if (norm.empty()) return *src;
    DenseMatrix out(src->rows, src->cols);
    for (std::size_t i = 0; i < src->rows; ++i) {
      norm.apply_row(src->row(i), out.row(i), src->cols);
    }
    return out;
  }

  VecD apply_one(const VecD& state) const {
    DenseMatrix m(1, state.size());
    std::copy(state.begin(), state.end(), m.row(0));
    DenseMatrix r = apply(m);
    return VecD(r.row(0), r.row(0) + r.cols);
  }
};

// Normalization computed in the adapter's mapped space over all non-sentinel
// dataset states.
NormalizationStats normalization_for_adapter(const Dataset& data,
                                             const DenseMatrix& feature_map);

}  // namespace opposd
