#include "opposd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace opposd {

Transition Trajectory::transition_at(std::size_t t) const {
  Transition tr;
  tr.state = states[t];
  tr.action = actions[t];
  tr.reward = rewards[t];
  tr.next_state = states[t + 1];
  tr.behavior_prob = behavior_probs[t];
  tr.timestep = t;
  tr.is_absorbing = is_absorbing[t] != 0;
  tr.state_is_abs = state_is_abs[t] != 0;
  tr.in_support = in_support[t] != 0;
  tr.is_padding = is_padding[t] != 0;
  return tr;
}

double Trajectory::total_reward() const {
  double acc = 0.0;
  for (double r : rewards) acc += r;
  return acc;
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const Trajectory& tr = trajectories[i];
    if (tr.length() != horizon || tr.states.size() != horizon + 1) {
      throw DataError("dataset: trajectory " + std::to_string(i) + " has wrong horizon");
    }
    bool absorbed = false;
    for (std::size_t t = 0; t < horizon; ++t) {
      if (tr.behavior_probs[t] <= 0.0) {
        throw DataError("dataset: non-positive behavior propensity");
      }
      if (tr.states[t].size() != state_dim) {
        throw DataError("dataset: state dimension mismatch");
      }
      if (absorbed && !tr.is_absorbing[t]) {
        throw DataError("dataset: absorbing flag not suffix-closed");
      }
      if (tr.is_absorbing[t]) {
        absorbed = true;
        if (tr.rewards[t] != 0.0 || !tr.state_is_abs[t + 1]) {
          throw DataError("dataset: absorbing transition must have zero reward and sentinel next state");
        }
      }
    }
  }
}

MiniBatch gather(const Dataset& data, std::span<const TransitionRef> refs) {
  MiniBatch b;
  const std::size_t n = refs.size();
  const std::size_t d = data.state_dim;
  b.states = DenseMatrix(n, d);
  b.next_states = DenseMatrix(n, d);
  b.actions.resize(n);
  b.rewards.resize(n);
  b.behavior_probs.resize(n);
  b.timesteps.resize(n);
  b.is_absorbing.resize(n);
  b.state_is_abs.resize(n);
  b.in_support.resize(n);
  b.refs.assign(refs.begin(), refs.end());
  for (std::size_t i = 0; i < n; ++i) {
    const Trajectory& tr = data.trajectories[refs[i].traj];
    const std::size_t t = refs[i].step;
    std::copy_n(tr.states[t].data(), d, b.states.row(i));
    std::copy_n(tr.states[t + 1].data(), d, b.next_states.row(i));
    b.actions[i] = tr.actions[t];
    b.rewards[i] = tr.rewards[t];
    b.behavior_probs[i] = tr.behavior_probs[t];
    b.timesteps[i] = t;
    b.is_absorbing[i] = tr.is_absorbing[t];
    b.state_is_abs[i] = tr.state_is_abs[t];
    b.in_support[i] = tr.in_support[t];
  }
  return b;
}

Dataset collect_dataset(Environment& env, const StochasticPolicy& behavior,
                        std::size_t n_trajectories, std::size_t horizon, Rng& rng) {
  if (n_trajectories == 0) throw ConfigError("collect_dataset: n_trajectories must be positive");
  if (horizon == 0) throw ConfigError("collect_dataset: horizon must be positive");
  Dataset data;
  data.horizon = horizon;
  data.n_actions = env.n_actions();
  data.state_dim = env.state_dim();
  data.trajectories.reserve(n_trajectories);
  for (std::size_t i = 0; i < n_trajectories; ++i) {
    Trajectory tr;
    tr.states.reserve(horizon + 1);
    tr.states.push_back(env.reset(rng));
    tr.state_is_abs.assign(horizon + 1, 0);
    bool terminated = false;
    for (std::size_t t = 0; t < horizon; ++t) {
      const VecD& state = tr.states.back();
      const VecD probs = behavior.action_probs(state);
      const int action = rng.categorical(probs);
      tr.actions.push_back(action);
      tr.behavior_probs.push_back(probs[action]);
      tr.in_support.push_back(1);
      tr.is_absorbing.push_back(0);
      if (terminated) {
        // Pad: repeat the final state, keep sampling actions, zero reward.
        tr.rewards.push_back(0.0);
        tr.is_padding.push_back(1);
        tr.states.push_back(state);
      } else {
        StepOutcome out = env.step(state, action, rng);
        tr.rewards.push_back(out.reward);
        tr.is_padding.push_back(0);
        tr.states.push_back(std::move(out.next_state));
        terminated = out.done;
      }
    }
    data.trajectories.push_back(std::move(tr));
  }
  return data;
}

Dataset epsilon_smooth(const Dataset& data, const StochasticPolicy& behavior_spec,
                       double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon >= 1.0) {
    throw ConfigError("epsilon_smooth: epsilon must be in [0,1)");
  }
  Dataset out = data;
  out.smoothing_epsilon = epsilon;
  if (epsilon == 0.0) return out;
  const std::size_t d = data.state_dim;
  const VecD sentinel(d, 0.0);
  const double uniform_prob = 1.0 / static_cast<double>(data.n_actions);
  for (Trajectory& tr : out.trajectories) {
    bool absorbed = false;
    for (std::size_t t = 0; t < data.horizon; ++t) {
      if (absorbed) {
        tr.states[t] = sentinel;
        tr.state_is_abs[t] = 1;
        tr.actions[t] = rng.uniform_int(static_cast<int>(data.n_actions));
        tr.behavior_probs[t] = uniform_prob;
        tr.rewards[t] = 0.0;
        tr.is_absorbing[t] = 1;
        tr.in_support[t] = 0;
        tr.is_padding[t] = 0;
        tr.states[t + 1] = sentinel;
        tr.state_is_abs[t + 1] = 1;
        continue;
      }
      const std::vector<int> zeros = behavior_spec.zero_prob_actions(tr.states[t]);
      if (zeros.empty()) continue;
      const std::size_t k = zeros.size();
      if (rng.uniform() < epsilon) {
        tr.actions[t] = zeros[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(k)))];
        tr.behavior_probs[t] = epsilon / static_cast<double>(k);
        tr.rewards[t] = 0.0;
        tr.is_absorbing[t] = 1;
        tr.in_support[t] = 0;
        tr.is_padding[t] = 0;
        tr.states[t + 1] = sentinel;
        tr.state_is_abs[t + 1] = 1;
        absorbed = true;
      } else {
        tr.behavior_probs[t] *= 1.0 - epsilon;
      }
    }
  }
  return out;
}

NormalizationStats compute_normalization(const Dataset& data) {
  if (data.trajectories.empty()) throw ConfigError("compute_normalization: empty dataset");
  const std::size_t d = data.state_dim;
  VecD mean(d, 0.0), m2(d, 0.0);
  std::size_t count = 0;
  for (const Trajectory& tr : data.trajectories) {
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
      if (tr.state_is_abs[t]) continue;
      ++count;
      const VecD& s = tr.states[t];
      // Welford in batch form: accumulate sums, finalize below.
      for (std::size_t j = 0; j < d; ++j) {
        mean[j] += s[j];
        m2[j] += s[j] * s[j];
      }
    }
  }
  if (count == 0) throw NumericError("compute_normalization: no non-absorbing states");
  NormalizationStats stats;
  stats.mean.resize(d);
  stats.std.resize(d);
  const double n = static_cast<double>(count);
  for (std::size_t j = 0; j < d; ++j) {
    stats.mean[j] = mean[j] / n;
    const double var = std::max(m2[j] / n - stats.mean[j] * stats.mean[j], 0.0);
    stats.std[j] = std::max(std::sqrt(var), 1e-6);
  }
  return stats;
}

std::size_t DiscountedSampler::sample_timestep(Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
  if (idx >= weights.size()) idx = weights.size() - 1;
  return idx;
}

DiscountedSampler make_discounted_sampler(double gamma, std::size_t horizon) {
  if (horizon == 0) throw ConfigError("discounted sampler: horizon must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("discounted sampler: gamma in (0,1]");
  DiscountedSampler s;
  s.gamma = gamma;
  s.weights.resize(horizon);
  double g = 1.0, mass = 0.0;
  for (std::size_t t = 0; t < horizon; ++t, g *= gamma) {
    s.weights[t] = g;
    mass += g;
  }
  s.cdf.resize(horizon);
  double acc = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    s.weights[t] /= mass;
    acc += s.weights[t];
    s.cdf[t] = acc;
  }
  return s;
}

std::vector<TransitionRef> sample_minibatch_dgamma(const Dataset& data,
                                                   const DiscountedSampler& sampler,
                                                   std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ConfigError("sample_minibatch_dgamma: batch_size must be >= 1");
  std::vector<TransitionRef> refs(batch_size);
  const int n = static_cast<int>(data.n_trajectories());
  for (std::size_t i = 0; i < batch_size; ++i) {
    refs[i].traj = static_cast<std::uint32_t>(rng.uniform_int(n));
    refs[i].step = static_cast<std::uint32_t>(sampler.sample_timestep(rng));
  }
  return refs;
}

DenseMatrix sample_initial_states(const Dataset& data, std::size_t count, Rng& rng) {
  DenseMatrix out(count, data.state_dim);
  const int n = static_cast<int>(data.n_trajectories());
  for (std::size_t i = 0; i < count; ++i) {
    const auto& s0 = data.trajectories[static_cast<std::size_t>(rng.uniform_int(n))].states[0];
    std::copy_n(s0.data(), data.state_dim, out.row(i));
  }
  return out;
}

namespace {

nlohmann::json flags_to_json(const std::vector<std::uint8_t>& flags) {
  nlohmann::json arr = nlohmann::json::array();
  for (auto f : flags) arr.push_back(static_cast<int>(f));
  return arr;
}

std::vector<std::uint8_t> flags_from_json(const nlohmann::json& arr) {
  std::vector<std::uint8_t> out;
  out.reserve(arr.size());
  for (const auto& v : arr) out.push_back(static_cast<std::uint8_t>(v.get<int>() != 0 ? 1 : 0));
  return out;
}

}  // namespace

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("save_dataset: cannot open " + path);
  nlohmann::json header;
  header["version"] = 1;
  header["kind"] = "opposd-dataset";
  header["horizon"] = data.horizon;
  header["n_actions"] = data.n_actions;
  header["state_dim"] = data.state_dim;
  header["epsilon"] = data.smoothing_epsilon;
  header["normalization"] = {{"mean", data.normalization.mean},
                             {"std", data.normalization.std}};
  os << header.dump() << "\n";
  for (const Trajectory& tr : data.trajectories) {
    nlohmann::json line;
    line["states"] = tr.states;
    line["sabs"] = flags_to_json(tr.state_is_abs);
    line["actions"] = tr.actions;
    line["rewards"] = tr.rewards;
    line["probs"] = tr.behavior_probs;
    line["absorbing"] = flags_to_json(tr.is_absorbing);
    line["support"] = flags_to_json(tr.in_support);
    line["padding"] = flags_to_json(tr.is_padding);
    os << line.dump() << "\n";
  }
  if (!os) throw DataError("save_dataset: write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("load_dataset: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("load_dataset: empty file " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_dataset: bad header line 1: " + std::string(e.what()));
  }
  if (!header.contains("version") || !header["version"].is_number_integer()) {
    throw DataError("load_dataset: missing version field in header");
  }
  if (header["version"].get<int>() != 1) {
    throw DataError("load_dataset: unsupported version " +
                    std::to_string(header["version"].get<int>()) + " (expected 1)");
  }
  Dataset data;
  data.horizon = header.at("horizon").get<std::size_t>();
  data.n_actions = header.at("n_actions").get<std::size_t>();
  data.state_dim = header.at("state_dim").get<std::size_t>();
  data.smoothing_epsilon = header.at("epsilon").get<double>();
  data.normalization.mean = header.at("normalization").at("mean").get<VecD>();
  data.normalization.std = header.at("normalization").at("std").get<VecD>();

  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("load_dataset: parse error at line " + std::to_string(line_no) +
                      ": " + e.what());
    }
    Trajectory tr;
    try {
      tr.states = j.at("states").get<std::vector<VecD>>();
      tr.state_is_abs = flags_from_json(j.at("sabs"));
      tr.actions = j.at("actions").get<std::vector<int>>();
      tr.rewards = j.at("rewards").get<VecD>();
      tr.behavior_probs = j.at("probs").get<VecD>();
      tr.is_absorbing = flags_from_json(j.at("absorbing"));
      tr.in_support = flags_from_json(j.at("support"));
      tr.is_padding = flags_from_json(j.at("padding"));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("load_dataset: malformed trajectory at line " +
                      std::to_string(line_no) + ": " + e.what());
    }
    data.trajectories.push_back(std::move(tr));
  }
  data.validate();
  return data;
}

}  // namespace opposd
