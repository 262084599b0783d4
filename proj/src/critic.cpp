#include "opposd/critic.hpp"

#include <cmath>
#include <unordered_map>

namespace opposd {

CriticModel make_critic_model(const std::vector<std::size_t>& layer_sizes,
                              InputAdapter input, double lr, Rng& rng) {
  CriticModel model;
  model.net = make_mlp(layer_sizes, Head::linear, rng);
  model.opt = make_adam(model.net, lr);
  model.input = std::move(input);
  return model;
}

VecD critic_values(const CriticModel& model, const DenseMatrix& canonical_states) {
  const DenseMatrix out = mlp_forward(model.net, model.input.apply(canonical_states));
  return VecD(out.data.begin(), out.data.end());
}

VecD lambda_returns(const Trajectory& tr, std::span<const double> critic_next_values,
                    std::span<const double> target_probs, double lambda, double gamma,
                    double rho_clip) {
  const std::size_t H = tr.length();
  if (critic_next_values.size() != H || target_probs.size() != H) {
    throw NumericError("lambda_returns: array length mismatch");
  }
  VecD rho(H);
  for (std::size_t t = 0; t < H; ++t) {
    rho[t] = target_probs[t] / tr.behavior_probs[t];
    if (!std::isfinite(rho[t])) throw NumericError("lambda_returns: non-finite ratio");
  }
  VecD returns(H, 0.0);
  double continuation = 0.0;  // R at t+1; 0 beyond the horizon
  for (std::size_t t = H; t-- > 0;) {
    if (tr.is_absorbing[t]) {
      returns[t] = 0.0;
      continuation = 0.0;
      continue;
    }
    const double bootstrap = critic_next_values[t];
    double r = tr.rewards[t] + (1.0 - lambda) * gamma * bootstrap;
    if (t + 1 < H) {
      const double rho_next = std::min(rho[t + 1], rho_clip);
      r += lambda * gamma * rho_next * continuation;
    }
    returns[t] = r;
    continuation = r;
  }
  return returns;
}

CriticLossResult critic_loss(const CriticModel& model, const MiniBatch& batch,
                             std::span<const double> rho_lead,
                             std::span<const double> returns) {
  const std::size_t n = batch.size();
  if (rho_lead.size() != n || returns.size() != n) {
    throw NumericError("critic_loss: array length mismatch");
  }
  ForwardCache cache;
  const DenseMatrix v = mlp_forward(model.net, model.input.apply(batch.states), &cache);
  double loss = 0.0;
  DenseMatrix upstream(n, 1);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double resid = returns[i] - v(i, 0);
    loss += rho_lead[i] * resid * resid;
    upstream(i, 0) = -2.0 * inv_n * rho_lead[i] * resid;
  }
  loss *= inv_n;
  if (!std::isfinite(loss)) throw NumericError("critic_loss: non-finite loss");
  CriticLossResult res;
  res.loss = loss;
  res.grads = mlp_backward(model.net, cache, upstream);
  return res;
}

VecD masked_q(const MiniBatch& batch, std::span<const double> returns) {
  VecD q(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    q[i] = batch.in_support[i] ? returns[i] : 0.0;
  }
  return q;
}

VecD batch_lambda_returns(const MlpParams& frozen_net, const InputAdapter& input,
                          const Dataset& data, const MiniBatch& batch,
                          const TargetPolicy* target, double lambda, double gamma,
                          double rho_clip, bool on_policy_rho) {
  if (!on_policy_rho && target == nullptr) {
    throw NumericError("batch_lambda_returns: target policy required");
  }
  const std::size_t n = batch.size();
  VecD out(n, 0.0);
  if (lambda == 0.0) {
    // R = r + gamma V(s') row by row; no recursion needed.
    const DenseMatrix vnext = mlp_forward(frozen_net, input.apply(batch.next_states));
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = batch.is_absorbing[i] ? 0.0 : batch.rewards[i] + gamma * vnext(i, 0);
    }
    return out;
  }
  // Full per-trajectory recursion for every distinct trajectory in the batch.
  std::unordered_map<std::uint32_t, VecD> cache;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t ti = batch.refs[i].traj;
    auto it = cache.find(ti);
    if (it == cache.end()) {
      const Trajectory& tr = data.trajectories[ti];
      const std::size_t H = tr.length();
      DenseMatrix next_states(H, data.state_dim);
      DenseMatrix states(H, data.state_dim);
      for (std::size_t t = 0; t < H; ++t) {
        std::copy_n(tr.states[t + 1].data(), data.state_dim, next_states.row(t));
        std::copy_n(tr.states[t].data(), data.state_dim, states.row(t));
      }
      const DenseMatrix vnext = mlp_forward(frozen_net, input.apply(next_states));
      VecD vn(vnext.data.begin(), vnext.data.end());
      VecD probs;
      if (on_policy_rho) {
        probs = tr.behavior_probs;  // rho == 1 exactly
      } else {
        const DenseMatrix p = target->action_probs(states);
        probs.resize(H);
        for (std::size_t t = 0; t < H; ++t) {
          probs[t] = p(t, static_cast<std::size_t>(tr.actions[t]));
        }
      }
      it = cache.emplace(ti, lambda_returns(tr, vn, probs, lambda, gamma, rho_clip)).first;
    }
    out[i] = it->second[batch.refs[i].step];
  }
  return out;
}

namespace {

double one_critic_round(CriticModel& model, const Dataset& data, const TargetPolicy* target,
                        const CriticRoundConfig& config, bool on_policy, Rng& rng) {
  const MlpParams snapshot = model.net;  // targets frozen for the whole round
  const DiscountedSampler uniform = make_discounted_sampler(1.0, data.horizon);
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < config.n_iters; ++i) {
    const auto refs = sample_minibatch_dgamma(data, uniform, config.batch_size, rng);
    const MiniBatch batch = gather(data, refs);
    VecD rho_lead(batch.size(), 1.0);
    if (!on_policy) {
      const VecD probs = target->action_prob_rows(batch);
      for (std::size_t k = 0; k < batch.size(); ++k) {
        rho_lead[k] = probs[k] / batch.behavior_probs[k];
      }
    }
    const VecD returns = batch_lambda_returns(snapshot, model.input, data, batch, target,
                                              config.lambda, config.gamma, config.rho_clip,
                                              on_policy);
    CriticLossResult res = critic_loss(model, batch, rho_lead, returns);
    adam_step(model.opt, model.net, res.grads);
    loss_sum += res.loss;
  }
  return loss_sum / static_cast<double>(config.n_iters);
}

}  // namespace

double critic_update_round(CriticModel& model, const Dataset& data,
                           const TargetPolicy& target, const CriticRoundConfig& config,
                           Rng& rng) {
  if (config.n_iters == 0) return 0.0;
  return one_critic_round(model, data, &target, config, /*on_policy=*/false, rng);
}

double warm_start_critic(CriticModel& model, const Dataset& data, std::size_t iterations,
                         const CriticRoundConfig& config, Rng& rng) {
  double last = 0.0;
  CriticRoundConfig per_step = config;
  per_step.n_iters = 1;
  for (std::size_t i = 0; i < iterations; ++i) {
    last = one_critic_round(model, data, nullptr, per_step, /*on_policy=*/true, rng);
  }
  return last;
}

}  // namespace opposd
