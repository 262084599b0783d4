#pragma once

#include "opposd/dataset.hpp"
#include "opposd/matrix.hpp"
#include "opposd/tabular_mdp.hpp"

namespace opposd {

// Evaluable target policy: the consumer-facing surface the ratio and critic
// learners need. Rows of `action_probs` are full distributions.
class TargetPolicy {
 public:
  virtual ~TargetPolicy() = default;
  virtual DenseMatrix action_probs(const DenseMatrix& canonical_states) const = 0;

  // pi(a_i | s_i) per batch row.
  VecD action_prob_rows(const MiniBatch& batch) const {
    const DenseMatrix probs = action_probs(batch.states);
    VecD out(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      out[i] = probs(i, static_cast<std::size_t>(batch.actions[i]));
    }
    return out;
  }
};

// Tabular policy addressed by one-hot canonical states.
class TableTargetPolicy final : public TargetPolicy {
 public:
  explicit TableTargetPolicy(PolicyTable table) : table_(std::move(table)) {}
  DenseMatrix action_probs(const DenseMatrix& canonical_states) const override {
    const std::size_t n_actions = table_.probs.cols;
    DenseMatrix out(canonical_states.rows, n_actions);
    for (std::size_t i = 0; i < canonical_states.rows; ++i) {
      const double* row = canonical_states.row(i);
      std::size_t s = 0;
      for (std::size_t j = 1; j < canonical_states.cols; ++j) {
        if (row[j] > row[s]) s = j;
      }
      if (row[s] == 0.0) {
        // All-zero row is the absorbing sentinel; any policy there is
        // value-irrelevant, so report uniform.
        for (std::size_t a = 0; a < n_actions; ++a) {
          out(i, a) = 1.0 / static_cast<double>(n_actions);
        }
      } else {
        for (std::size_t a = 0; a < n_actions; ++a) out(i, a) = table_.probs(s, a);
      }
    }
    return out;
  }

 private:
  PolicyTable table_;
};

}  // namespace opposd
