#include "opposd/actor.hpp"

#include <cmath>

namespace opposd {

ActorModel make_actor_model(const std::vector<std::size_t>& layer_sizes,
                            InputAdapter input, double lr, Rng& rng,
                            std::shared_ptr<const PolicyConstraint> constraint) {
  ActorModel actor;
  actor.net = make_mlp(layer_sizes, Head::softmax, rng);
  actor.opt = make_adam(actor.net, lr);
  actor.input = std::move(input);
  actor.constraint = std::move(constraint);
  return actor;
}

namespace {

struct ActorForward {
  ForwardCache cache;
  DenseMatrix probs;                    // constraint rows overridden
  std::vector<std::uint8_t> trainable;  // per row
};

ActorForward forward_with_constraint(const ActorModel& actor,
                                     const DenseMatrix& canonical_states) {
  ActorForward out;
  out.probs = mlp_forward(actor.net, actor.input.apply(canonical_states), &out.cache);
  out.trainable.assign(canonical_states.rows, 1);
  if (actor.constraint) {
    for (std::size_t i = 0; i < canonical_states.rows; ++i) {
      const auto fixed = actor.constraint->fixed_probs(canonical_states.row_span(i));
      if (fixed) {
        out.trainable[i] = 0;
        for (std::size_t a = 0; a < out.probs.cols; ++a) out.probs(i, a) = (*fixed)[a];
      }
    }
  }
  return out;
}

}  // namespace

DenseMatrix actor_probs(const ActorModel& actor, const DenseMatrix& canonical_states) {
  return forward_with_constraint(actor, canonical_states).probs;
}

DenseMatrix ActorTargetPolicy::action_probs(const DenseMatrix& canonical_states) const {
  return actor_probs(*actor_, canonical_states);
}

VecD ActorAsPolicy::action_probs(const VecD& state) const {
  DenseMatrix m(1, state.size());
  std::copy(state.begin(), state.end(), m.row(0));
  const DenseMatrix probs = actor_probs(*actor_, m);
  return VecD(probs.row(0), probs.row(0) + probs.cols);
}

double behavior_clone(ActorModel& actor, const Dataset& data, std::size_t iterations,
                      std::size_t batch_size, Rng& rng) {
  const DiscountedSampler uniform = make_discounted_sampler(1.0, data.horizon);
  double last_nll = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const auto refs = sample_minibatch_dgamma(data, uniform, batch_size, rng);
    const MiniBatch batch = gather(data, refs);
    ActorForward fwd = forward_with_constraint(actor, batch.states);
    DenseMatrix upstream(batch.size(), actor.net.output_dim(), 0.0);
    double nll = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!fwd.trainable[i] || batch.state_is_abs[i]) continue;
      ++counted;
      nll -= std::log(fwd.probs(i, static_cast<std::size_t>(batch.actions[i])));
    }
    if (counted == 0) continue;
    const double inv = 1.0 / static_cast<double>(counted);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (!fwd.trainable[i] || batch.state_is_abs[i]) continue;
      // d(-log pi(a)) / d logits = pi - e_a
      const double* p = fwd.probs.row(i);
      double* u = upstream.row(i);
      for (std::size_t a = 0; a < upstream.cols; ++a) u[a] = inv * p[a];
      u[static_cast<std::size_t>(batch.actions[i])] -= inv;
    }
    MlpGradients grads = mlp_backward_preact(actor.net, fwd.cache, upstream);
    adam_step(actor.opt, actor.net, grads);
    last_nll = nll * inv;
  }
  return last_nll;
}

namespace {

ActorGradResult gradient_impl(const ActorModel& actor, const MiniBatch& batch,
                              std::span<const double> w_values,
                              std::span<const double> q_values,
                              double entropy_coefficient) {
  const std::size_t n = batch.size();
  if (q_values.size() != n) throw NumericError("actor_gradient: q_values length mismatch");
  const bool corrected = !w_values.empty();
  if (corrected && w_values.size() != n) {
    throw NumericError("actor_gradient: w_values length mismatch");
  }

  ActorGradResult out;
  if (corrected) {
    double zsum = 0.0;
    for (double w : w_values) zsum += w;
    out.z_w = zsum / static_cast<double>(n);
    if (!(out.z_w > 0.0)) throw NumericError("actor_gradient: non-positive z_w");
  }

  ActorForward fwd = forward_with_constraint(actor, batch.states);
  const EntropyResult ent = entropy_of_policy(fwd.probs);

  DenseMatrix upstream(n, actor.net.output_dim(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  double entropy_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    entropy_sum += ent.entropy[i];
    if (!fwd.trainable[i]) continue;
    const double* p = fwd.probs.row(i);
    const std::size_t a = static_cast<std::size_t>(batch.actions[i]);
    const double rho = p[a] / batch.behavior_probs[i];
    const double lever = corrected ? w_values[i] / out.z_w : 1.0;
    const double coeff = inv_n * lever * rho * q_values[i];
    double* u = upstream.row(i);
    // coeff * d log pi(a)/d logits = coeff * (e_a - pi)
    for (std::size_t b = 0; b < upstream.cols; ++b) u[b] = -coeff * p[b];
    u[a] += coeff;
    if (entropy_coefficient != 0.0) {
      const double* dh = ent.d_logits.row(i);
      for (std::size_t b = 0; b < upstream.cols; ++b) {
        u[b] += inv_n * entropy_coefficient * dh[b];
      }
    }
    for (std::size_t b = 0; b < upstream.cols; ++b) {
      if (!std::isfinite(u[b])) throw NumericError("actor_gradient: non-finite update");
    }
  }
  out.entropy_mean = entropy_sum * inv_n;
  out.ascent = mlp_backward_preact(actor.net, fwd.cache, upstream);
  out.grad_norm = mlp_grad_norm(out.ascent);
  return out;
}

}  // namespace

ActorGradResult actor_gradient(const ActorModel& actor, const MiniBatch& batch,
                               std::span<const double> w_values,
                               std::span<const double> q_values,
                               double entropy_coefficient) {
  return gradient_impl(actor, batch, w_values, q_values, entropy_coefficient);
}

ActorGradResult offpac_actor_gradient(const ActorModel& actor, const MiniBatch& batch,
                                      std::span<const double> q_values,
                                      double entropy_coefficient) {
  return gradient_impl(actor, batch, {}, q_values, entropy_coefficient);
}

}  // namespace opposd
