#include "opposd/run_config.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "opposd/hard_example.hpp"

namespace fs = std::filesystem;

namespace opposd {

namespace {

// Per-environment defaults; user values override these afterwards.
void apply_env_defaults(RunConfig& c) {
  if (c.environment == "cartpole") {
    c.horizon = 200;
    c.n_trajectories = 500;
    c.train.gamma = 1.0;
    c.train.hidden_actor = {32};
    c.train.hidden_critic = {32};
    c.train.hidden_w = {32};
    c.train.normalize_inputs = true;
  } else if (c.environment == "hard_example") {
    c.horizon = hard_example::kHorizon;
    c.n_trajectories = 5000;
    c.train.gamma = 1.0;
    c.train.hidden_actor = {};
    c.train.hidden_critic = {};
    c.train.hidden_w = {};
    c.train.normalize_inputs = false;
    c.train.batch_actor = 500;
    c.train.batch_critic = 500;
    c.train.batch_w = 128;
    c.train.n_w_iters = 10;
    c.train.bc_iterations = 500;
    c.train.warm_start_critic_iters = 500;
    c.train.warm_start_w_iters = 500;
    c.train.lr_actor = 3e-3;
    c.train.entropy_coefficient = 0.003;
    c.train.total_actor_updates = 2000;
    c.train.eval_episodes = 200;
  } else if (c.environment.rfind("tabular:", 0) == 0) {
    c.train.hidden_actor = {};
    c.train.hidden_critic = {};
    c.train.hidden_w = {};
    c.train.normalize_inputs = false;
    c.train.batch_actor = 500;
    c.train.batch_critic = 500;
    c.train.batch_w = 128;
    c.train.n_w_iters = 10;
  } else {
    throw ConfigError("config: unknown environment '" + c.environment +
                      "' (expected cartpole, hard_example, or tabular:<file>)");
  }
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_train(const nlohmann::json& j, TrainConfig& t) {
  get_if(j, "gamma", t.gamma);
  get_if(j, "lambda", t.lambda);
  get_if(j, "entropy_coefficient", t.entropy_coefficient);
  get_if(j, "lr_actor", t.lr_actor);
  get_if(j, "lr_critic", t.lr_critic);
  get_if(j, "lr_w", t.lr_w);
  get_if(j, "batch_actor", t.batch_actor);
  get_if(j, "batch_critic", t.batch_critic);
  get_if(j, "batch_w", t.batch_w);
  get_if(j, "n_critic_iters", t.n_critic_iters);
  get_if(j, "n_w_iters", t.n_w_iters);
  get_if(j, "weight_decay_w", t.weight_decay_w);
  get_if(j, "bc_iterations", t.bc_iterations);
  get_if(j, "warm_start_critic_iters", t.warm_start_critic_iters);
  get_if(j, "warm_start_w_iters", t.warm_start_w_iters);
  get_if(j, "total_actor_updates", t.total_actor_updates);
  get_if(j, "checkpoint_interval", t.checkpoint_interval);
  get_if(j, "epsilon_smoothing", t.epsilon_smoothing);
  get_if(j, "hidden_actor", t.hidden_actor);
  get_if(j, "hidden_critic", t.hidden_critic);
  get_if(j, "hidden_w", t.hidden_w);
  get_if(j, "normalize_inputs", t.normalize_inputs);
  get_if(j, "rho_clip", t.rho_clip);
  get_if(j, "eval_interval", t.eval_interval);
  get_if(j, "eval_episodes", t.eval_episodes);
  get_if(j, "bc_batch", t.bc_batch);
  if (j.contains("algorithm")) t.algorithm = algorithm_from_name(j.at("algorithm").get<std::string>());
  if (j.contains("discount_variant")) {
    t.discount_variant = variant_from_name(j.at("discount_variant").get<std::string>());
  }
  if (j.contains("kernel_bandwidth_mode")) {
    const std::string mode = j.at("kernel_bandwidth_mode").get<std::string>();
    if (mode == "median_heuristic") {
      t.kernel.bandwidth_mode = BandwidthMode::median_heuristic;
    } else if (mode == "fixed") {
      t.kernel.bandwidth_mode = BandwidthMode::fixed;
    } else {
      throw ConfigError("config: kernel_bandwidth_mode must be median_heuristic or fixed");
    }
  }
  get_if(j, "kernel_bandwidth", t.kernel.bandwidth);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: parse error in " + path + ": " + e.what());
  }

  RunConfig c;
  if (!j.contains("environment")) throw ConfigError("config: missing field 'environment'");
  c.environment = j.at("environment").get<std::string>();
  apply_env_defaults(c);

  if (j.contains("seed")) {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.seed_set = true;
    c.train.seed = c.seed;
  }
  get_if(j, "output_dir", c.output_dir);
  get_if(j, "dataset", c.dataset_path);

  if (j.contains("collect")) {
    const auto& col = j.at("collect");
    get_if(col, "n_trajectories", c.n_trajectories);
    get_if(col, "horizon", c.horizon);
    get_if(col, "epsilon", c.epsilon);
    get_if(col, "behavior_policy", c.behavior_policy_path);
    if (c.epsilon < 0.0 || c.epsilon >= 1.0) {
      throw ConfigError("config: collect.epsilon must be in [0,1)");
    }
  }
  if (j.contains("train")) parse_train(j.at("train"), c.train);
  c.train.epsilon_smoothing = c.epsilon;
  if (j.contains("evaluate")) {
    const auto& ev = j.at("evaluate");
    get_if(ev, "checkpoint_dir", c.checkpoint_dir);
    get_if(ev, "eval_dataset", c.eval_dataset_path);
    get_if(ev, "records", c.records_path);
    get_if(ev, "mc_episodes", c.mc_episodes);
    get_if(ev, "use_simulator", c.use_simulator);
    get_if(ev, "refit_w_iters", c.refit_w_iters);
  }

  if (c.environment.rfind("tabular:", 0) == 0) {
    const std::string file = c.environment.substr(8);
    if (!fs::exists(file)) throw ConfigError("config: tabular mdp file not found: " + file);
  }
  if (!c.behavior_policy_path.empty() && !fs::exists(c.behavior_policy_path)) {
    throw ConfigError("config: behavior policy file not found: " + c.behavior_policy_path);
  }
  return c;
}

void RunConfig::require_seed() const {
  if (!seed_set) throw ConfigError("config: field 'seed' is mandatory");
}

EnvBundle make_environment(const RunConfig& config) {
  EnvBundle bundle;
  if (config.environment == "cartpole") {
    bundle.env = std::make_unique<CartPoleEnv>();
    bundle.behavior = std::make_unique<UniformPolicy>(2);
  } else if (config.environment == "hard_example") {
    HardExampleFamily fam = hard_example_mdp();
    bundle.env = std::make_unique<TabularEnv>(fam.mdp);
    bundle.behavior = std::make_unique<TableLookupPolicy>(fam.behavior);
    bundle.setup.actor_feature_map = hard_example_actor_feature_map();
    bundle.setup.constraint = hard_example_policy_constraint();
  } else if (config.environment.rfind("tabular:", 0) == 0) {
    const std::string file = config.environment.substr(8);
    std::ifstream is(file);
    if (!is) throw ConfigError("cannot open tabular mdp file: " + file);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    TabularMdp mdp = TabularMdp::from_json(text);
    const std::size_t n_actions = mdp.n_actions;
    bundle.env = std::make_unique<TabularEnv>(std::move(mdp));
    if (config.behavior_policy_path.empty()) {
      bundle.behavior = std::make_unique<UniformPolicy>(n_actions);
    } else {
      std::ifstream ps(config.behavior_policy_path);
      std::string ptext((std::istreambuf_iterator<char>(ps)), std::istreambuf_iterator<char>());
      bundle.behavior = std::make_unique<TableLookupPolicy>(PolicyTable::from_json(ptext));
    }
  } else {
    throw ConfigError("unknown environment: " + config.environment);
  }
  return bundle;
}

std::string unique_path(const std::string& desired) {
  if (!fs::exists(desired)) return desired;
  const fs::path p(desired);
  const std::string stem = (p.parent_path() / p.stem()).string();
  const std::string ext = p.extension().string();
  for (int i = 2;; ++i) {
    const std::string candidate = stem + "-" + std::to_string(i) + ext;
    if (!fs::exists(candidate)) return candidate;
  }
}

}  // namespace opposd
