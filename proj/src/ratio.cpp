#include "opposd/ratio.hpp"

#include <cmath>
#include <unordered_set>

namespace opposd {

RatioModel make_ratio_model(const std::vector<std::size_t>& layer_sizes,
                            InputAdapter input, KernelConfig kernel, double lr,
                            double weight_decay, Rng& rng) {
  RatioModel model;
  model.net = make_mlp(layer_sizes, Head::softplus, rng);
  model.opt = make_adam(model.net, lr, weight_decay);
  model.input = std::move(input);
  model.kernel = kernel;
  model.bandwidth = kernel.bandwidth;
  return model;
}

double resolve_bandwidth(const KernelConfig& kernel, const InputAdapter& input,
                         const Dataset& data, std::size_t max_points) {
  if (kernel.bandwidth_mode == BandwidthMode::fixed) return kernel.bandwidth;
  // Evenly strided subsample of all non-sentinel states, deterministic.
  std::vector<const VecD*> all;
  for (const Trajectory& tr : data.trajectories) {
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
      if (!tr.state_is_abs[t]) all.push_back(&tr.states[t]);
    }
  }
  if (all.size() < 2) return 1.0;
  const std::size_t n = std::min(max_points, all.size());
  const std::size_t stride = all.size() / n;
  DenseMatrix sample(n, data.state_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const VecD& s = *all[i * stride];
    std::copy(s.begin(), s.end(), sample.row(i));
  }
  return median_bandwidth(input.apply(sample), max_points);
}

VecD ratio_values(const RatioModel& model, const DenseMatrix& canonical_states) {
  const DenseMatrix out = mlp_forward(model.net, model.input.apply(canonical_states));
  return VecD(out.data.begin(), out.data.end());
}

VecD delta(std::span<const double> w_values, std::span<const double> rho_values,
           std::span<const double> w_next_values) {
  if (w_values.size() != rho_values.size() || w_values.size() != w_next_values.size()) {
    throw NumericError("delta: length mismatch");
  }
  VecD out(w_values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = w_values[i] * rho_values[i] - w_next_values[i];
  }
  return out;
}

RatioBatch sample_ratio_batch(const Dataset& data, const DiscountedSampler& sampler,
                              std::size_t batch_size, const TargetPolicy& target,
                              Rng& rng) {
  if (batch_size == 0) throw ConfigError("sample_ratio_batch: empty batch");
  auto refs1 = sample_minibatch_dgamma(data, sampler, batch_size, rng);
  std::unordered_set<std::uint64_t> taken;
  taken.reserve(refs1.size());
  for (const auto& r : refs1) {
    taken.insert((static_cast<std::uint64_t>(r.traj) << 32) | r.step);
  }
  // Second batch disjoint from the first; small datasets may not allow it,
  // so retries are bounded.
  std::vector<TransitionRef> refs2(batch_size);
  const int n = static_cast<int>(data.n_trajectories());
  for (std::size_t i = 0; i < batch_size; ++i) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      TransitionRef r;
      r.traj = static_cast<std::uint32_t>(rng.uniform_int(n));
      r.step = static_cast<std::uint32_t>(sampler.sample_timestep(rng));
      refs2[i] = r;
      if (!taken.contains((static_cast<std::uint64_t>(r.traj) << 32) | r.step)) break;
    }
  }
  RatioBatch batch;
  batch.b1 = gather(data, refs1);
  batch.b2 = gather(data, refs2);
  batch.init1 = sample_initial_states(data, batch_size, rng);
  batch.init2 = sample_initial_states(data, batch_size, rng);
  batch.target_probs1 = target.action_prob_rows(batch.b1);
  batch.target_probs2 = target.action_prob_rows(batch.b2);
  return batch;
}

namespace {

VecD rho_of(const MiniBatch& b, const VecD& target_probs) {
  VecD rho(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) rho[i] = target_probs[i] / b.behavior_probs[i];
  return rho;
}

// K x (matrix-vector) and K^T x helpers for the quadratic forms below.
VecD matvec(const DenseMatrix& k, const VecD& x) {
  VecD out(k.rows, 0.0);
  for (std::size_t i = 0; i < k.rows; ++i) {
    const double* row = k.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < k.cols; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
  return out;
}

VecD matvec_t(const DenseMatrix& k, const VecD& x) {
  VecD out(k.cols, 0.0);
  for (std::size_t i = 0; i < k.rows; ++i) {
    const double* row = k.row(i);
    const double xi = x[i];
    for (std::size_t j = 0; j < k.cols; ++j) out[j] += xi * row[j];
  }
  return out;
}

double dot(const VecD& a, const VecD& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Forward pass of w over canonical states with cache, returning the values.
VecD forward_w(const RatioModel& model, const DenseMatrix& canonical, ForwardCache& cache) {
  const DenseMatrix out = mlp_forward(model.net, model.input.apply(canonical), &cache);
  return VecD(out.data.begin(), out.data.end());
}

void backprop_into(const RatioModel& model, const ForwardCache& cache, const VecD& d_w,
                   MlpGradients& acc) {
  DenseMatrix upstream(d_w.size(), 1);
  std::copy(d_w.begin(), d_w.end(), upstream.data.begin());
  MlpGradients g = mlp_backward(model.net, cache, upstream);
  add_gradients(acc, g);
}

}  // namespace

RatioLossResult ratio_loss_discounted(const RatioModel& model, const RatioBatch& batch,
                                      double gamma) {
  if (batch.b1.size() == 0 || batch.b2.size() == 0) {
    throw NumericError("ratio_loss_discounted: empty batch");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ConfigError("ratio_loss_discounted: needs 0 < gamma < 1");
  }
  ForwardCache c1s, c1n, c1i, c2s, c2n, c2i;
  const VecD w1s = forward_w(model, batch.b1.states, c1s);
  const VecD w1n = forward_w(model, batch.b1.next_states, c1n);
  const VecD w1i = forward_w(model, batch.init1, c1i);
  const VecD w2s = forward_w(model, batch.b2.states, c2s);
  const VecD w2n = forward_w(model, batch.b2.next_states, c2n);
  const VecD w2i = forward_w(model, batch.init2, c2i);
  const VecD rho1 = rho_of(batch.b1, batch.target_probs1);
  const VecD rho2 = rho_of(batch.b2, batch.target_probs2);
  const VecD d1 = delta(w1s, rho1, w1n);
  const VecD d2 = delta(w2s, rho2, w2n);
  VecD u1(w1i.size()), u2(w2i.size());
  for (std::size_t i = 0; i < u1.size(); ++i) u1[i] = 1.0 - w1i[i];
  for (std::size_t j = 0; j < u2.size(); ++j) u2[j] = 1.0 - w2i[j];

  // Kernels in the adapter's (normalized) input space.
  const DenseMatrix n1 = model.input.apply(batch.b1.next_states);
  const DenseMatrix n2 = model.input.apply(batch.b2.next_states);
  const DenseMatrix i1 = model.input.apply(batch.init1);
  const DenseMatrix i2 = model.input.apply(batch.init2);
  DenseMatrix k_nn, k_ii, k_ni;
  double s_nn, s_ii, s_ni;
  rbf_kernel_matrix(n1, n2, model.bandwidth, k_nn, s_nn);
  rbf_kernel_matrix(i1, i2, model.bandwidth, k_ii, s_ii);
  rbf_kernel_matrix(n1, i2, model.bandwidth, k_ni, s_ni);

  const double g2 = gamma * gamma;
  const double og2 = (1.0 - gamma) * (1.0 - gamma);
  const double cross = 2.0 * gamma * (1.0 - gamma);

  const VecD knn_d2 = matvec(k_nn, d2);
  const VecD knn_t_d1 = matvec_t(k_nn, d1);
  const VecD kii_u2 = matvec(k_ii, u2);
  const VecD kii_t_u1 = matvec_t(k_ii, u1);
  const VecD kni_u2 = matvec(k_ni, u2);
  const VecD kni_t_d1 = matvec_t(k_ni, d1);

  const double term_a = dot(d1, knn_d2) / s_nn;
  const double term_b = dot(u1, kii_u2) / s_ii;
  const double term_c = dot(d1, kni_u2) / s_ni;

  RatioLossResult res;
  res.loss = g2 * term_a + og2 * term_b + cross * term_c;
  if (!std::isfinite(res.loss)) throw NumericError("ratio_loss_discounted: non-finite loss");

  const std::size_t n1sz = batch.b1.size(), n2sz = batch.b2.size();
  VecD d_d1(n1sz), d_d2(n2sz);
  for (std::size_t i = 0; i < n1sz; ++i) {
    d_d1[i] = g2 * knn_d2[i] / s_nn + cross * kni_u2[i] / s_ni;
  }
  for (std::size_t j = 0; j < n2sz; ++j) d_d2[j] = g2 * knn_t_d1[j] / s_nn;

  VecD dw1s(n1sz), dw1n(n1sz), dw2s(n2sz), dw2n(n2sz), dw1i(u1.size()), dw2i(u2.size());
  for (std::size_t i = 0; i < n1sz; ++i) {
    dw1s[i] = d_d1[i] * rho1[i];
    dw1n[i] = -d_d1[i];
  }
  for (std::size_t j = 0; j < n2sz; ++j) {
    dw2s[j] = d_d2[j] * rho2[j];
    dw2n[j] = -d_d2[j];
  }
  for (std::size_t i = 0; i < u1.size(); ++i) dw1i[i] = -og2 * kii_u2[i] / s_ii;
  for (std::size_t j = 0; j < u2.size(); ++j) {
    dw2i[j] = -og2 * kii_t_u1[j] / s_ii - cross * kni_t_d1[j] / s_ni;
  }

  res.grads = zero_gradients_like(model.net);
  backprop_into(model, c1s, dw1s, res.grads);
  backprop_into(model, c1n, dw1n, res.grads);
  backprop_into(model, c1i, dw1i, res.grads);
  backprop_into(model, c2s, dw2s, res.grads);
  backprop_into(model, c2n, dw2n, res.grads);
  backprop_into(model, c2i, dw2i, res.grads);
  return res;
}

RatioLossResult ratio_loss_average(const RatioModel& model, const RatioBatch& batch) {
  if (batch.b1.size() == 0 || batch.b2.size() == 0) {
    throw NumericError("ratio_loss_average: empty batch");
  }
  ForwardCache c1s, c1n, c2s, c2n;
  const VecD w1s = forward_w(model, batch.b1.states, c1s);
  const VecD w1n = forward_w(model, batch.b1.next_states, c1n);
  const VecD w2s = forward_w(model, batch.b2.states, c2s);
  const VecD w2n = forward_w(model, batch.b2.next_states, c2n);
  const VecD rho1 = rho_of(batch.b1, batch.target_probs1);
  const VecD rho2 = rho_of(batch.b2, batch.target_probs2);
  const VecD d1 = delta(w1s, rho1, w1n);
  const VecD d2 = delta(w2s, rho2, w2n);

  const std::size_t n1sz = batch.b1.size(), n2sz = batch.b2.size();
  double zsum = 0.0;
  for (double v : w1s) zsum += v;
  for (double v : w2s) zsum += v;
  const double z = zsum / static_cast<double>(n1sz + n2sz);
  if (!(z > 0.0)) throw NumericError("ratio_loss_average: non-positive batch mean of w");

  const DenseMatrix n1 = model.input.apply(batch.b1.next_states);
  const DenseMatrix n2 = model.input.apply(batch.b2.next_states);
  DenseMatrix k_nn;
  double s_nn;
  rbf_kernel_matrix(n1, n2, model.bandwidth, k_nn, s_nn);

  const VecD knn_d2 = matvec(k_nn, d2);
  const VecD knn_t_d1 = matvec_t(k_nn, d1);
  const double quad = dot(d1, knn_d2);
  const double z2 = z * z;

  RatioLossResult res;
  res.loss = quad / (z2 * s_nn);
  if (!std::isfinite(res.loss)) throw NumericError("ratio_loss_average: non-finite loss");

  // d loss / d z through both the deltas' normalization: loss = quad/(z^2 S).
  const double dloss_dz = -2.0 * quad / (z2 * z * s_nn);
  const double dz_dw = 1.0 / static_cast<double>(n1sz + n2sz);

  VecD dw1s(n1sz), dw1n(n1sz), dw2s(n2sz), dw2n(n2sz);
  for (std::size_t i = 0; i < n1sz; ++i) {
    const double d_d1 = knn_d2[i] / (z2 * s_nn);
    dw1s[i] = d_d1 * rho1[i] + dloss_dz * dz_dw;
    dw1n[i] = -d_d1;
  }
  for (std::size_t j = 0; j < n2sz; ++j) {
    const double d_d2 = knn_t_d1[j] / (z2 * s_nn);
    dw2s[j] = d_d2 * rho2[j] + dloss_dz * dz_dw;
    dw2n[j] = -d_d2;
  }

  res.grads = zero_gradients_like(model.net);
  backprop_into(model, c1s, dw1s, res.grads);
  backprop_into(model, c1n, dw1n, res.grads);
  backprop_into(model, c2s, dw2s, res.grads);
  backprop_into(model, c2n, dw2n, res.grads);
  return res;
}

double ratio_update_step(RatioModel& model, const Dataset& data,
                         const DiscountedSampler& sampler, std::size_t batch_size,
                         const TargetPolicy& target, bool discounted_variant,
                         double gamma, Rng& rng) {
  const RatioBatch batch = sample_ratio_batch(data, sampler, batch_size, target, rng);
  RatioLossResult res = discounted_variant ? ratio_loss_discounted(model, batch, gamma)
                                           : ratio_loss_average(model, batch);
  adam_step(model.opt, model.net, res.grads);
  return res.loss;
}

VecD exact_ratio_tabular(const TabularMdp& mdp, const PolicyTable& target,
                         const PolicyTable& behavior, std::size_t horizon) {
  const OccupancyResult d_pi = exact_occupancy(mdp, target, horizon);
  const OccupancyResult d_mu = exact_occupancy(mdp, behavior, horizon);
  VecD w(mdp.n_states, 0.0);
  constexpr double kTol = 1e-12;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (d_mu.d[s] > kTol) {
      w[s] = d_pi.d[s] / d_mu.d[s];
    } else if (d_pi.d[s] > kTol) {
      throw NumericError("exact_ratio_tabular: target visits state " + std::to_string(s) +
                         " that the behavior policy never reaches (coverage violation)");
    }
  }
  return w;
}

}  // namespace opposd
