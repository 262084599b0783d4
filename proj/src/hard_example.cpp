#include "opposd/hard_example.hpp"

namespace opposd {

using namespace hard_example;

HardExampleFamily hard_example_mdp() {
  HardExampleFamily fam;
  TabularMdp& m = fam.mdp;
  m.n_states = kNumStates;
  m.n_actions = 2;
  m.gamma = 1.0;
  m.transition.assign(kNumStates * 2 * kNumStates, 0.0);
  m.reward.assign(kNumStates * 2, 0.0);
  m.initial_dist.assign(kNumStates, 0.0);
  m.initial_dist[kS0] = 1.0;

  m.p(kS0, kLeft, kS1) = 1.0;
  m.p(kS0, kRight, kS2) = 1.0;

  m.p(kS1, kLeft, kS3) = 1.0;
  m.p(kS1, kRight, kS3) = 0.5;
  m.p(kS1, kRight, kS4) = 0.5;

  m.p(kS2, kLeft, kS4) = 1.0;
  m.p(kS2, kRight, kS3) = 0.5;
  m.p(kS2, kRight, kS4) = 0.5;

  m.p(kS3, kLeft, kTerminal) = 1.0;
  m.p(kS3, kRight, kTerminal) = 1.0;
  m.r(kS3, kLeft) = 1.0;
  m.r(kS3, kRight) = 1.0;

  m.p(kS4, kLeft, kTerminal) = 1.0;
  m.p(kS4, kRight, kTerminal) = 1.0;

  m.p(kTerminal, kLeft, kTerminal) = 1.0;
  m.p(kTerminal, kRight, kTerminal) = 1.0;

  m.validate();
  fam.behavior = PolicyTable::uniform(kNumStates, 2);
  return fam;
}

PolicyTable HardExampleFamily::policy_alpha(double alpha) const {
  const double theta[1] = {alpha};
  return HardExampleAlphaFamily{}.policy(theta);
}

PolicyTable HardExampleAlphaFamily::policy(std::span<const double> theta) const {
  if (theta.size() != 1) throw NumericError("hard example family: theta size mismatch");
  const double alpha = theta[0];
  if (alpha < 0.0 || alpha > 1.0) throw NumericError("hard example family: alpha outside [0,1]");
  PolicyTable t;
  t.probs = DenseMatrix(kNumStates, 2, 0.0);
  for (std::size_t s = 0; s < kNumStates; ++s) t.probs(s, kLeft) = 1.0;
  t.probs(kS1, kLeft) = alpha;
  t.probs(kS1, kRight) = 1.0 - alpha;
  t.probs(kS2, kLeft) = alpha;
  t.probs(kS2, kRight) = 1.0 - alpha;
  return t;
}

VecD HardExampleAlphaFamily::prob_grad(std::span<const double> theta, std::size_t s,
                                       std::size_t a) const {
  (void)theta;
  VecD g(1, 0.0);
  if (s == kS1 || s == kS2) g[0] = (a == static_cast<std::size_t>(kLeft)) ? 1.0 : -1.0;
  return g;
}

DenseMatrix hard_example_actor_feature_map() {
  DenseMatrix map(kNumStates, 4, 0.0);
  map(kS0, 0) = 1.0;
  map(kS1, 1) = 1.0;
  map(kS2, 1) = 1.0;  // shared parameter for s1/s2
  map(kS3, 2) = 1.0;
  map(kS4, 2) = 1.0;  // aliased states
  map(kTerminal, 3) = 1.0;
  return map;
}

namespace {

class HardExampleConstraint final : public PolicyConstraint {
 public:
  std::optional<VecD> fixed_probs(std::span<const double> canonical_state) const override {
    std::size_t s = 0;
    for (std::size_t j = 1; j < canonical_state.size(); ++j) {
      if (canonical_state[j] > canonical_state[s]) s = j;
    }
    if (canonical_state[s] == 0.0) return std::nullopt;  // sentinel row
    if (s == kS1 || s == kS2) return std::nullopt;
    VecD p(2, 0.0);
    p[kLeft] = 1.0;
    return p;
  }
};

}  // namespace

std::shared_ptr<const PolicyConstraint> hard_example_policy_constraint() {
  return std::make_shared<HardExampleConstraint>();
}

}  // namespace opposd
