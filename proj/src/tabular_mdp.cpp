#include "opposd/tabular_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "json.hpp"
#include "opposd/mlp.hpp"

namespace opposd {

void TabularMdp::validate() const {
  if (n_states == 0 || n_actions == 0) throw NumericError("mdp: empty state or action space");
  if (transition.size() != n_states * n_actions * n_states ||
      reward.size() != n_states * n_actions || initial_dist.size() != n_states) {
    throw NumericError("mdp: array sizes inconsistent with n_states/n_actions");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) throw NumericError("mdp: gamma must be in (0,1]");
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (std::size_t sn = 0; sn < n_states; ++sn) {
        const double v = p(s, a, sn);
        if (v < 0.0) throw NumericError("mdp: negative transition probability");
        sum += v;
      }
      if (std::fabs(sum - 1.0) > 1e-12) {
        throw NumericError("mdp: transition row does not sum to 1 at state " +
                           std::to_string(s) + " action " + std::to_string(a));
      }
      const double rv = r(s, a);
      if (rv < -1e-12 || rv > 1.0 + 1e-12) throw NumericError("mdp: reward outside [0,1]");
    }
  }
  double p0sum = 0.0;
  for (double v : initial_dist) {
    if (v < 0.0) throw NumericError("mdp: negative initial probability");
    p0sum += v;
  }
  if (std::fabs(p0sum - 1.0) > 1e-12) throw NumericError("mdp: initial distribution does not sum to 1");
}

std::string TabularMdp::to_json() const {
  nlohmann::json j;
  j["n_states"] = n_states;
  j["n_actions"] = n_actions;
  j["gamma"] = gamma;
  j["initial_dist"] = initial_dist;
  nlohmann::json rew = nlohmann::json::array();
  for (std::size_t s = 0; s < n_states; ++s) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t a = 0; a < n_actions; ++a) row.push_back(r(s, a));
    rew.push_back(row);
  }
  j["reward"] = rew;
  nlohmann::json tr = nlohmann::json::array();
  for (std::size_t s = 0; s < n_states; ++s) {
    nlohmann::json by_action = nlohmann::json::array();
    for (std::size_t a = 0; a < n_actions; ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t sn = 0; sn < n_states; ++sn) row.push_back(p(s, a, sn));
      by_action.push_back(row);
    }
    tr.push_back(by_action);
  }
  j["transition"] = tr;
  return j.dump(2);
}

TabularMdp TabularMdp::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("mdp: bad json: ") + e.what());
  }
  TabularMdp m;
  m.n_states = j.at("n_states").get<std::size_t>();
  m.n_actions = j.at("n_actions").get<std::size_t>();
  m.gamma = j.at("gamma").get<double>();
  m.initial_dist = j.at("initial_dist").get<VecD>();
  m.reward.assign(m.n_states * m.n_actions, 0.0);
  m.transition.assign(m.n_states * m.n_actions * m.n_states, 0.0);
  const auto& rew = j.at("reward");
  const auto& tr = j.at("transition");
  for (std::size_t s = 0; s < m.n_states; ++s) {
    for (std::size_t a = 0; a < m.n_actions; ++a) {
      m.r(s, a) = rew.at(s).at(a).get<double>();
      for (std::size_t sn = 0; sn < m.n_states; ++sn) {
        m.p(s, a, sn) = tr.at(s).at(a).at(sn).get<double>();
      }
    }
  }
  m.validate();
  return m;
}

void PolicyTable::validate() const {
  for (std::size_t s = 0; s < probs.rows; ++s) {
    double sum = 0.0;
    for (std::size_t a = 0; a < probs.cols; ++a) {
      if (probs(s, a) < 0.0) throw NumericError("policy: negative probability");
      sum += probs(s, a);
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
      throw NumericError("policy: row " + std::to_string(s) + " does not sum to 1");
    }
  }
}

PolicyTable PolicyTable::uniform(std::size_t n_states, std::size_t n_actions) {
  PolicyTable t;
  t.probs = DenseMatrix(n_states, n_actions, 1.0 / static_cast<double>(n_actions));
  return t;
}

std::string PolicyTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t s = 0; s < probs.rows; ++s) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t a = 0; a < probs.cols; ++a) row.push_back(probs(s, a));
    rows.push_back(row);
  }
  nlohmann::json j;
  j["probs"] = rows;
  return j.dump(2);
}

PolicyTable PolicyTable::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("policy: bad json: ") + e.what());
  }
  const auto& rows = j.at("probs");
  PolicyTable t;
  t.probs = DenseMatrix(rows.size(), rows.at(0).size());
  for (std::size_t s = 0; s < t.probs.rows; ++s) {
    for (std::size_t a = 0; a < t.probs.cols; ++a) {
      t.probs(s, a) = rows.at(s).at(a).get<double>();
    }
  }
  t.validate();
  return t;
}

namespace {

// P_pi[s][s'] and r_pi[s] of the chain induced by the policy.
void induced_chain(const TabularMdp& mdp, const PolicyTable& policy, DenseMatrix& p_pi,
                   VecD& r_pi) {
  const std::size_t S = mdp.n_states, A = mdp.n_actions;
  p_pi = DenseMatrix(S, S, 0.0);
  r_pi.assign(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      const double pa = policy.probs(s, a);
      if (pa == 0.0) continue;
      r_pi[s] += pa * mdp.r(s, a);
      for (std::size_t sn = 0; sn < S; ++sn) p_pi(s, sn) += pa * mdp.p(s, a, sn);
    }
  }
}

// Strongly connected components (Tarjan). Returns component index per state;
// components are numbered in reverse topological order.
std::vector<int> tarjan_scc(const DenseMatrix& adj, int& n_components) {
  const std::size_t n = adj.rows;
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  int next_index = 0;
  n_components = 0;

  std::function<void(std::size_t)> strongconnect = [&](std::size_t v) {
    index[v] = low[v] = next_index++;
    stack.push_back(v);
    on_stack[v] = true;
    for (std::size_t w = 0; w < n; ++w) {
      if (adj(v, w) <= 0.0) continue;
      if (index[w] < 0) {
        strongconnect(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      while (true) {
        const std::size_t w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp[w] = n_components;
        if (w == v) break;
      }
      ++n_components;
    }
  };

  for (std::size_t v = 0; v < n; ++v) {
    if (index[v] < 0) strongconnect(v);
  }
  return comp;
}

}  // namespace

ValueResult exact_value(const TabularMdp& mdp, const PolicyTable& policy) {
  const std::size_t S = mdp.n_states, A = mdp.n_actions;
  DenseMatrix p_pi;
  VecD r_pi;
  induced_chain(mdp, policy, p_pi, r_pi);

  VecD v(S, 0.0);
  if (mdp.gamma < 1.0) {
    DenseMatrix a(S, S, 0.0);
    for (std::size_t i = 0; i < S; ++i) {
      for (std::size_t j = 0; j < S; ++j) a(i, j) = (i == j ? 1.0 : 0.0) - mdp.gamma * p_pi(i, j);
    }
    v = solve_linear(std::move(a), r_pi);
  } else {
    // gamma = 1: recurrent classes must carry zero reward (their value is 0);
    // solve the transient part against those boundary values.
    int n_comp = 0;
    auto comp = tarjan_scc(p_pi, n_comp);
    std::vector<bool> comp_closed(static_cast<std::size_t>(n_comp), true);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t sn = 0; sn < S; ++sn) {
        if (p_pi(s, sn) > 0.0 && comp[s] != comp[sn]) comp_closed[comp[s]] = false;
      }
    }
    std::vector<bool> recurrent(S, false);
    for (std::size_t s = 0; s < S; ++s) {
      if (comp_closed[comp[s]]) {
        recurrent[s] = true;
        if (std::fabs(r_pi[s]) > 1e-12) {
          throw NumericError(
              "exact_value: gamma=1 with a rewarded recurrent class (state " +
              std::to_string(s) + "); average-reward solves are unsupported");
        }
      }
    }
    std::vector<std::size_t> transient;
    for (std::size_t s = 0; s < S; ++s) {
      if (!recurrent[s]) transient.push_back(s);
    }
    if (!transient.empty()) {
      const std::size_t T = transient.size();
      DenseMatrix a(T, T, 0.0);
      VecD b(T, 0.0);
      for (std::size_t i = 0; i < T; ++i) {
        b[i] = r_pi[transient[i]];
        for (std::size_t j = 0; j < T; ++j) {
          a(i, j) = (i == j ? 1.0 : 0.0) - p_pi(transient[i], transient[j]);
        }
      }
      VecD vt = solve_linear(std::move(a), std::move(b));
      for (std::size_t i = 0; i < T; ++i) v[transient[i]] = vt[i];
    }
  }

  ValueResult res;
  res.v = std::move(v);
  res.q = DenseMatrix(S, A, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      double acc = mdp.r(s, a);
      for (std::size_t sn = 0; sn < S; ++sn) acc += mdp.gamma * mdp.p(s, a, sn) * res.v[sn];
      res.q(s, a) = acc;
    }
  }
  return res;
}

double exact_return(const TabularMdp& mdp, const PolicyTable& policy, bool normalize,
                    std::size_t horizon) {
  const ValueResult val = exact_value(mdp, policy);
  double ret = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) ret += mdp.initial_dist[s] * val.v[s];
  if (normalize) {
    double mass = 0.0;
    double g = 1.0;
    for (std::size_t t = 0; t < horizon; ++t, g *= mdp.gamma) mass += g;
    ret /= mass;
  }
  return ret;
}

OccupancyResult exact_occupancy(const TabularMdp& mdp, const PolicyTable& policy,
                                std::size_t horizon) {
  DenseMatrix p_pi;
  VecD r_pi;
  induced_chain(mdp, policy, p_pi, r_pi);

  const std::size_t S = mdp.n_states;
  VecD dt = mdp.initial_dist;
  VecD acc(S, 0.0);
  double mass = 0.0;
  double g = 1.0;
  const std::size_t cap = mdp.gamma < 1.0
                              ? 1000000
                              : 10 * std::max<std::size_t>(horizon, 1);
  std::size_t t = 0;
  for (; t < cap; ++t) {
    if (mdp.gamma < 1.0 && g < 1e-10) break;
    for (std::size_t s = 0; s < S; ++s) acc[s] += g * dt[s];
    mass += g;
    g *= mdp.gamma;
    VecD next(S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
      const double ds = dt[s];
      if (ds == 0.0) continue;
      const double* row = p_pi.row(s);
      for (std::size_t sn = 0; sn < S; ++sn) next[sn] += ds * row[sn];
    }
    dt = std::move(next);
  }
  if (mdp.gamma < 1.0 && g >= 1e-10) {
    throw NumericError("exact_occupancy: no convergence within " + std::to_string(cap) +
                       " iterations (gamma=" + format_double(mdp.gamma) + ")");
  }
  OccupancyResult res;
  res.discount_mass = mass;
  res.steps = t;
  res.d.resize(S);
  for (std::size_t s = 0; s < S; ++s) res.d[s] = acc[s] / mass;
  return res;
}

PolicyTable TabularSoftmaxFamily::policy(std::span<const double> theta) const {
  if (theta.size() != param_count()) throw NumericError("softmax family: theta size mismatch");
  PolicyTable t;
  t.probs = DenseMatrix(n_states_, n_actions_);
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) t.probs(s, a) = theta[s * n_actions_ + a];
    softmax_row_inplace(t.probs.row(s), n_actions_);
  }
  return t;
}

VecD TabularSoftmaxFamily::prob_grad(std::span<const double> theta, std::size_t s,
                                     std::size_t a) const {
  PolicyTable t = policy(theta);
  VecD grad(param_count(), 0.0);
  for (std::size_t b = 0; b < n_actions_; ++b) {
    const double delta = (a == b) ? 1.0 : 0.0;
    grad[s * n_actions_ + b] = t.probs(s, a) * (delta - t.probs(s, b));
  }
  return grad;
}

namespace {

VecD gradient_with_weighting(const TabularMdp& mdp, const PolicyFamily& family,
                             std::span<const double> theta, const VecD& state_weights) {
  const PolicyTable target = family.policy(theta);
  const ValueResult val = exact_value(mdp, target);
  VecD grad(family.param_count(), 0.0);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (state_weights[s] == 0.0) continue;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const VecD dpi = family.prob_grad(theta, s, a);
      const double coeff = state_weights[s] * val.q(s, a);
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += coeff * dpi[k];
    }
  }
  return grad;
}

}  // namespace

VecD exact_policy_gradient(const TabularMdp& mdp, const PolicyFamily& family,
                           std::span<const double> theta, std::size_t horizon) {
  const PolicyTable target = family.policy(theta);
  const OccupancyResult occ = exact_occupancy(mdp, target, horizon);
  VecD weights(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    weights[s] = occ.d[s] * occ.discount_mass;  // un-normalized occupancy
  }
  return gradient_with_weighting(mdp, family, theta, weights);
}

VecD offpac_gradient_exact(const TabularMdp& mdp, const PolicyTable& behavior,
                           const PolicyFamily& family, std::span<const double> theta,
                           std::size_t horizon) {
  const OccupancyResult occ = exact_occupancy(mdp, behavior, horizon);
  VecD weights(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    weights[s] = occ.d[s] * occ.discount_mass;
  }
  return gradient_with_weighting(mdp, family, theta, weights);
}

SupportSets compute_support(const TabularMdp& mdp, const PolicyTable& behavior,
                            double support_tol, std::size_t horizon) {
  const OccupancyResult occ = exact_occupancy(mdp, behavior, horizon);
  SupportSets sets;
  sets.state_in_support.resize(mdp.n_states);
  sets.sa_in_support.resize(mdp.n_states * mdp.n_actions);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    sets.state_in_support[s] = occ.d[s] > support_tol;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      sets.sa_in_support[s * mdp.n_actions + a] =
          occ.d[s] * behavior.probs(s, a) > support_tol;
    }
  }
  return sets;
}

AugmentedMdp build_augmented_mdp(const TabularMdp& mdp, const PolicyTable& behavior,
                                 double support_tol, std::size_t horizon) {
  AugmentedMdp out;
  out.support = compute_support(mdp, behavior, support_tol, horizon);
  if (std::none_of(out.support.state_in_support.begin(), out.support.state_in_support.end(),
                   [](bool b) { return b; })) {
    throw NumericError("build_augmented_mdp: behavior policy has empty support");
  }
  const std::size_t S = mdp.n_states, A = mdp.n_actions;
  out.abs_state = S;
  TabularMdp& aug = out.mdp;
  aug.n_states = S + 1;
  aug.n_actions = A;
  aug.gamma = mdp.gamma;
  aug.transition.assign((S + 1) * A * (S + 1), 0.0);
  aug.reward.assign((S + 1) * A, 0.0);
  aug.initial_dist.assign(S + 1, 0.0);
  for (std::size_t s = 0; s < S; ++s) aug.initial_dist[s] = mdp.initial_dist[s];

  for (std::size_t a = 0; a < A; ++a) {
    aug.p(S, a, S) = 1.0;  // absorbing self-loop, zero reward
  }
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      if (out.support.contains(s, a, A)) {
        aug.r(s, a) = mdp.r(s, a);
        double escaped = 0.0;
        for (std::size_t sn = 0; sn < S; ++sn) {
          if (out.support.state_in_support[sn]) {
            aug.p(s, a, sn) = mdp.p(s, a, sn);
          } else {
            escaped += mdp.p(s, a, sn);
          }
        }
        aug.p(s, a, S) = escaped;
      } else {
        aug.p(s, a, S) = 1.0;
      }
    }
  }
  aug.validate();
  return out;
}

PolicyTable extend_policy(const PolicyTable& policy, std::size_t n_actions) {
  PolicyTable out;
  out.probs = DenseMatrix(policy.probs.rows + 1, n_actions, 0.0);
  for (std::size_t s = 0; s < policy.probs.rows; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) out.probs(s, a) = policy.probs(s, a);
  }
  for (std::size_t a = 0; a < n_actions; ++a) {
    out.probs(policy.probs.rows, a) = 1.0 / static_cast<double>(n_actions);
  }
  return out;
}

}  // namespace opposd
