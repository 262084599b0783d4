#include "opposd/invariant_suite.hpp"

#include <cmath>
#include <functional>

#include "opposd/actor.hpp"
#include "opposd/critic.hpp"
#include "opposd/gradcheck.hpp"
#include "opposd/ratio.hpp"

namespace opposd {

namespace {

struct Check {
  std::ostream& os;
  int failures = 0;

  void report(const std::string& name, bool ok, const std::string& detail = "") {
    os << (ok ? "[ok]   " : "[FAIL] ") << name;
    if (!detail.empty()) os << "  (" << detail << ")";
    os << "\n";
    if (!ok) ++failures;
  }
};

DenseMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  DenseMatrix m(r, c);
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

// Small synthetic dataset for loss-level checks: random states, two actions,
// stochastic propensities, no absorbing steps.
Dataset synthetic_dataset(Rng& rng, std::size_t n_traj = 12, std::size_t horizon = 5,
                          std::size_t dim = 3) {
  Dataset data;
  data.horizon = horizon;
  data.n_actions = 2;
  data.state_dim = dim;
  for (std::size_t i = 0; i < n_traj; ++i) {
    Trajectory tr;
    for (std::size_t t = 0; t <= horizon; ++t) {
      VecD s(dim);
      for (double& v : s) v = rng.normal();
      tr.states.push_back(std::move(s));
    }
    tr.state_is_abs.assign(horizon + 1, 0);
    for (std::size_t t = 0; t < horizon; ++t) {
      tr.actions.push_back(rng.uniform_int(2));
      tr.rewards.push_back(rng.uniform());
      tr.behavior_probs.push_back(rng.uniform(0.2, 0.9));
      tr.is_absorbing.push_back(0);
      tr.in_support.push_back(1);
      tr.is_padding.push_back(0);
    }
    data.trajectories.push_back(std::move(tr));
  }
  return data;
}

class ConstTargetPolicy final : public TargetPolicy {
 public:
  explicit ConstTargetPolicy(VecD probs) : probs_(std::move(probs)) {}
  DenseMatrix action_probs(const DenseMatrix& canonical_states) const override {
    DenseMatrix out(canonical_states.rows, probs_.size());
    for (std::size_t i = 0; i < out.rows; ++i) {
      for (std::size_t j = 0; j < probs_.size(); ++j) out(i, j) = probs_[j];
    }
    return out;
  }

 private:
  VecD probs_;
};

bool check_head_gradients(Check& ck, Head head, std::size_t points, Rng& rng) {
  double worst = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    const std::size_t out_dim = head == Head::softmax ? 3 : 1;
    MlpParams net = make_mlp({3, 5, out_dim}, head, rng, 0.5);
    // Move away from ReLU kinks by nudging biases.
    for (double* ptr : mlp_param_ptrs(net)) *ptr += 0.05 * rng.normal();
    const DenseMatrix inputs = random_matrix(4, 3, rng);
    const DenseMatrix weights = random_matrix(4, out_dim, rng);
    std::vector<int> labels(4);
    for (auto& l : labels) l = rng.uniform_int(static_cast<int>(out_dim));

    auto loss_and_grads = [&]() -> std::pair<double, MlpGradients> {
      ForwardCache cache;
      const DenseMatrix y = mlp_forward(net, inputs, &cache);
      double loss = 0.0;
      DenseMatrix upstream(y.rows, y.cols, 0.0);
      if (head == Head::softmax) {
        for (std::size_t i = 0; i < y.rows; ++i) {
          const std::size_t a = static_cast<std::size_t>(labels[i]);
          loss -= std::log(y(i, a));
          upstream(i, a) = -1.0 / y(i, a);
        }
      } else {
        for (std::size_t i = 0; i < y.rows; ++i) {
          for (std::size_t j = 0; j < y.cols; ++j) {
            loss += weights(i, j) * y(i, j);
            upstream(i, j) = weights(i, j);
          }
        }
      }
      return {loss, mlp_backward(net, cache, upstream)};
    };
    const GradCheckReport rep = gradient_check(net, loss_and_grads, 1e-4);
    worst = std::max(worst, rep.max_rel_err);
  }
  ck.report(std::string("head gradients: ") + head_name(head), worst <= 1e-4,
            "max rel err " + format_double(worst));
  return worst <= 1e-4;
}

void check_entropy_gradients(Check& ck, std::size_t points, Rng& rng) {
  double worst = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    DenseMatrix logits = random_matrix(3, 4, rng, 2.0);
    auto loss = [&]() {
      DenseMatrix probs = logits;
      for (std::size_t i = 0; i < probs.rows; ++i) softmax_row_inplace(probs.row(i), probs.cols);
      double h = 0.0;
      for (double e : entropy_of_policy(probs).entropy) h += e;
      return h;
    };
    DenseMatrix probs = logits;
    for (std::size_t i = 0; i < probs.rows; ++i) softmax_row_inplace(probs.row(i), probs.cols);
    const EntropyResult ent = entropy_of_policy(probs);
    std::vector<double*> params;
    for (double& v : logits.data) params.push_back(&v);
    const GradCheckReport rep =
        check_gradients(params, ent.d_logits.data, loss, 1e-6, 1e-4);
    worst = std::max(worst, rep.max_rel_err);
  }
  ck.report("entropy gradient vs logits", worst <= 1e-4, "max rel err " + format_double(worst));
}

void check_critic_gradients(Check& ck, std::size_t points, Rng& rng) {
  double worst = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    Dataset data = synthetic_dataset(rng);
    CriticModel critic = make_critic_model({3, 6, 1}, InputAdapter{}, 1e-3, rng);
    for (double* ptr : mlp_param_ptrs(critic.net)) *ptr += 0.2 * rng.normal();
    const DiscountedSampler uniform = make_discounted_sampler(1.0, data.horizon);
    const auto refs = sample_minibatch_dgamma(data, uniform, 10, rng);
    const MiniBatch batch = gather(data, refs);
    VecD rho(batch.size()), returns(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      rho[i] = rng.uniform(0.5, 2.0);
      returns[i] = rng.normal();
    }
    auto loss_and_grads = [&]() -> std::pair<double, MlpGradients> {
      CriticLossResult res = critic_loss(critic, batch, rho, returns);
      return {res.loss, std::move(res.grads)};
    };
    const GradCheckReport rep = gradient_check(critic.net, loss_and_grads, 1e-4);
    worst = std::max(worst, rep.max_rel_err);
  }
  ck.report("critic loss gradient", worst <= 1e-4, "max rel err " + format_double(worst));
}

void check_ratio_gradients(Check& ck, bool discounted, std::size_t points, Rng& rng) {
  double worst = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    Dataset data = synthetic_dataset(rng);
    KernelConfig kernel;
    kernel.bandwidth_mode = BandwidthMode::fixed;
    kernel.bandwidth = 1.3;
    RatioModel model = make_ratio_model({3, 6, 1}, InputAdapter{}, kernel, 1e-3, 0.0, rng);
    for (double* ptr : mlp_param_ptrs(model.net)) *ptr += 0.2 * rng.normal();
    const ConstTargetPolicy target({0.6, 0.4});
    const DiscountedSampler sampler = make_discounted_sampler(discounted ? 0.9 : 1.0, data.horizon);
    const RatioBatch batch = sample_ratio_batch(data, sampler, 12, target, rng);
    auto loss_and_grads = [&]() -> std::pair<double, MlpGradients> {
      RatioLossResult res = discounted ? ratio_loss_discounted(model, batch, 0.9)
                                       : ratio_loss_average(model, batch);
      return {res.loss, std::move(res.grads)};
    };
    const GradCheckReport rep = gradient_check(model.net, loss_and_grads, 1e-4);
    worst = std::max(worst, rep.max_rel_err);
  }
  ck.report(std::string("ratio loss gradient: ") + (discounted ? "discounted" : "average"),
            worst <= 1e-4, "max rel err " + format_double(worst));
}

void check_actor_gradients(Check& ck, std::size_t points, Rng& rng) {
  double worst = 0.0;
  for (std::size_t p = 0; p < points; ++p) {
    Dataset data = synthetic_dataset(rng);
    ActorModel actor = make_actor_model({3, 6, 2}, InputAdapter{}, 1e-3, rng);
    for (double* ptr : mlp_param_ptrs(actor.net)) *ptr += 0.2 * rng.normal();
    const DiscountedSampler uniform = make_discounted_sampler(1.0, data.horizon);
    const auto refs = sample_minibatch_dgamma(data, uniform, 10, rng);
    const MiniBatch batch = gather(data, refs);
    VecD w(batch.size()), q(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      w[i] = rng.uniform(0.3, 2.0);
      q[i] = rng.normal();
    }
    const double entropy_coef = 0.05;
    double z_w = 0.0;
    for (double v : w) z_w += v;
    z_w /= static_cast<double>(w.size());

    // Scalar objective whose gradient the actor update computes:
    // mean_i (w_i/z_w) (pi(a_i|s_i)/bp_i) Q_i + c_H mean_i H(pi(.|s_i)).
    auto objective = [&]() {
      const DenseMatrix probs = actor_probs(actor, batch.states);
      double obj = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const double pa = probs(i, static_cast<std::size_t>(batch.actions[i]));
        obj += (w[i] / z_w) * (pa / batch.behavior_probs[i]) * q[i];
      }
      obj /= static_cast<double>(batch.size());
      const EntropyResult ent = entropy_of_policy(probs);
      double h = 0.0;
      for (double e : ent.entropy) h += e;
      obj += entropy_coef * h / static_cast<double>(batch.size());
      return obj;
    };
    const ActorGradResult res = actor_gradient(actor, batch, w, q, entropy_coef);
    auto param_ptrs = mlp_param_ptrs(actor.net);
    auto grad_ptrs = mlp_grad_ptrs(res.ascent);
    VecD analytic(grad_ptrs.size());
    for (std::size_t i = 0; i < grad_ptrs.size(); ++i) analytic[i] = *grad_ptrs[i];
    const GradCheckReport rep = check_gradients(param_ptrs, analytic, objective, 1e-5, 1e-4);
    worst = std::max(worst, rep.max_rel_err);
  }
  ck.report("actor objective gradient", worst <= 1e-4, "max rel err " + format_double(worst));
}

void check_stability(Check& ck, Rng& rng) {
  bool softmax_ok = true;
  for (int i = 0; i < 1000; ++i) {
    VecD logits(4);
    for (double& v : logits) v = rng.uniform(-1e3, 1e3);
    VecD row = logits;
    softmax_row_inplace(row.data(), row.size());
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0) || !std::isfinite(v)) softmax_ok = false;
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9) softmax_ok = false;
  }
  ck.report("softmax stability at |logits| up to 1e3", softmax_ok);

  bool softplus_ok = true;
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-1e3, 1e3);
    const double y = softplus(x);
    if (!(y > 0.0) || !std::isfinite(y)) softplus_ok = false;
  }
  ck.report("softplus positivity at |x| up to 1e3", softplus_ok);
}

}  // namespace

int run_invariant_suite(std::uint64_t seed, std::ostream& os) {
  Check ck{os};
  Rng rng = Rng::derive(seed, "invariant-suite");
  check_stability(ck, rng);
  check_head_gradients(ck, Head::linear, 34, rng);
  check_head_gradients(ck, Head::softmax, 33, rng);
  check_head_gradients(ck, Head::softplus, 33, rng);
  check_entropy_gradients(ck, 25, rng);
  check_critic_gradients(ck, 25, rng);
  check_ratio_gradients(ck, false, 13, rng);
  check_ratio_gradients(ck, true, 12, rng);
  check_actor_gradients(ck, 25, rng);
  os << (ck.failures == 0 ? "invariant suite: all checks passed\n"
                          : "invariant suite: FAILURES present\n");
  return ck.failures;
}

}  // namespace opposd
