#pragma once

#include <memory>
#include <string>

#include "opposd/env.hpp"
#include "opposd/train.hpp"

namespace opposd {

// One structured config file drives every command. Every training field
// defaults to the CartPole reference values, so a minimal file needs only
// environment, collection size and seed.
struct RunConfig {
  std::string environment = "cartpole";  // cartpole | hard_example | tabular:<file>
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string output_dir = "runs";
  std::string dataset_path;  // collect output / train+evaluate input

  // collect
  std::size_t n_trajectories = 500;
  std::size_t horizon = 200;
  double epsilon = 0.0;
  std::string behavior_policy_path;  // optional policy table (tabular envs)

  TrainConfig train;

  // evaluate / select
  std::string checkpoint_dir;
  std::string eval_dataset_path;
  std::string records_path;  // evaluate output / select input
  std::size_t mc_episodes = 20;
  bool use_simulator = true;
  std::size_t refit_w_iters = 500;

  static RunConfig from_file(const std::string& path);
  void require_seed() const;
};

struct EnvBundle {
  std::unique_ptr<Environment> env;
  std::unique_ptr<StochasticPolicy> behavior;
  ModelSetup setup;
};

EnvBundle make_environment(const RunConfig& config);

// Nonexistent path derived from `desired`; appends -2, -3, ... before the
// extension when the name is taken, so reruns never overwrite artifacts.
std::string unique_path(const std::string& desired);

}  // namespace opposd
