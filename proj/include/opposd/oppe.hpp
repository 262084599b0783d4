#pragma once

#include <optional>
#include <string>
#include <vector>

#include "opposd/dataset.hpp"
#include "opposd/env.hpp"
#include "opposd/ratio.hpp"
#include "opposd/target_policy.hpp"

namespace opposd {

struct EvaluationRecord {
  std::string checkpoint_id;
  std::size_t update_index = 0;
  double oppe_estimate = 0.0;
  std::optional<double> mc_estimate;
  double mc_std = 0.0;
  std::size_t n_mc_episodes = 0;
};

// Self-normalized ratio-based estimate of the policy's expected episodic
// return:  E_{d_gamma}[w rho r] / E_{d_gamma}[w rho] * sum_{t<H} gamma^t,
// with the timestep expectation taken exactly over the whole dataset.
// Throws NumericError when the normalizer is degenerate (< 1e-8).
double oppe_estimate(const TargetPolicy& policy, const Dataset& data,
                     const RatioModel& ratio, double gamma);

struct McEvalResult {
  double mean = 0.0;
  double std = 0.0;
  bool degenerate_std = false;  // set when n_episodes == 1
};

// On-policy Monte-Carlo: mean/std of discounted episodic returns over
// `n_episodes` rollouts of at most `horizon` steps.
McEvalResult onpolicy_mc_eval(const StochasticPolicy& policy, Environment& env,
                              std::size_t n_episodes, std::size_t horizon, double gamma,
                              Rng& rng);

// Argmax of oppe_estimate; ties go to the later checkpoint.
std::size_t select_best(std::span<const EvaluationRecord> records);

struct CorrelationReport {
  double pearson_r = 0.0;
  std::string csv;  // checkpoint_id,update_index,oppe_estimate,mc_estimate rows
};

// Pearson correlation between OPPE and MC estimates over records that carry
// both. Requires >= 3 such records and non-degenerate variances.
CorrelationReport correlation_report(std::span<const EvaluationRecord> records);

}  // namespace opposd
