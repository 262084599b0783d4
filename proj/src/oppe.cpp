#include "opposd/oppe.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace opposd {

double oppe_estimate(const TargetPolicy& policy, const Dataset& data,
                     const RatioModel& ratio, double gamma) {
  if (data.trajectories.empty()) throw ConfigError("oppe_estimate: empty dataset");
  const std::size_t H = data.horizon;
  VecD discounts(H);
  double mass = 0.0;
  {
    double g = 1.0;
    for (std::size_t t = 0; t < H; ++t, g *= gamma) {
      discounts[t] = g;
      mass += g;
    }
  }
  double num = 0.0, den = 0.0;
  DenseMatrix states(H, data.state_dim);
  for (const Trajectory& tr : data.trajectories) {
    for (std::size_t t = 0; t < H; ++t) {
      std::copy_n(tr.states[t].data(), data.state_dim, states.row(t));
    }
    const VecD w = ratio_values(ratio, states);
    const DenseMatrix probs = policy.action_probs(states);
    for (std::size_t t = 0; t < H; ++t) {
      const double rho =
          probs(t, static_cast<std::size_t>(tr.actions[t])) / tr.behavior_probs[t];
      const double weight = discounts[t] * w[t] * rho;
      num += weight * tr.rewards[t];
      den += weight;
    }
  }
  const double normalizer = den / (static_cast<double>(data.n_trajectories()) * mass);
  if (!(normalizer > 1e-8)) {
    throw NumericError("oppe_estimate: degenerate normalizer (" + format_double(normalizer) +
                       "); the policy has no usable overlap with the logged data");
  }
  return num / den * mass;
}

McEvalResult onpolicy_mc_eval(const StochasticPolicy& policy, Environment& env,
                              std::size_t n_episodes, std::size_t horizon, double gamma,
                              Rng& rng) {
  if (n_episodes == 0) throw ConfigError("onpolicy_mc_eval: need at least one episode");
  VecD returns(n_episodes, 0.0);
  for (std::size_t e = 0; e < n_episodes; ++e) {
    VecD state = env.reset(rng);
    double g = 1.0;
    double total = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      const VecD probs = policy.action_probs(state);
      const int action = rng.categorical(probs);
      StepOutcome out = env.step(state, action, rng);
      total += g * out.reward;
      g *= gamma;
      if (out.done) break;
      state = std::move(out.next_state);
    }
    returns[e] = total;
  }
  McEvalResult res;
  for (double r : returns) res.mean += r;
  res.mean /= static_cast<double>(n_episodes);
  if (n_episodes == 1) {
    res.std = 0.0;
    res.degenerate_std = true;
    return res;
  }
  double ss = 0.0;
  for (double r : returns) ss += (r - res.mean) * (r - res.mean);
  res.std = std::sqrt(ss / static_cast<double>(n_episodes - 1));
  return res;
}

std::size_t select_best(std::span<const EvaluationRecord> records) {
  if (records.empty()) throw ConfigError("select_best: no records");
  std::size_t best = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const bool better = records[i].oppe_estimate > records[best].oppe_estimate;
    const bool tie_later = records[i].oppe_estimate == records[best].oppe_estimate &&
                           records[i].update_index >= records[best].update_index;
    if (better || tie_later) best = i;
  }
  return best;
}

CorrelationReport correlation_report(std::span<const EvaluationRecord> records) {
  std::vector<const EvaluationRecord*> both;
  for (const auto& r : records) {
    if (r.mc_estimate.has_value()) both.push_back(&r);
  }
  if (both.size() < 3) {
    throw ConfigError("correlation_report: need at least 3 records with MC estimates");
  }
  const double n = static_cast<double>(both.size());
  double mx = 0.0, my = 0.0;
  for (const auto* r : both) {
    mx += r->oppe_estimate;
    my += *r->mc_estimate;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto* r : both) {
    const double dx = r->oppe_estimate - mx;
    const double dy = *r->mc_estimate - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    throw NumericError("correlation_report: zero-variance estimates, correlation undefined");
  }
  CorrelationReport rep;
  rep.pearson_r = sxy / std::sqrt(sxx * syy);
  std::ostringstream os;
  os << "checkpoint_id,update_index,oppe_estimate,mc_estimate,mc_std,n_mc_episodes\n";
  for (const auto& r : records) {
    os << r.checkpoint_id << "," << r.update_index << "," << format_double(r.oppe_estimate)
       << ",";
    if (r.mc_estimate) os << format_double(*r.mc_estimate);
    os << "," << format_double(r.mc_std) << "," << r.n_mc_episodes << "\n";
  }
  rep.csv = os.str();
  return rep;
}

}  // namespace opposd
