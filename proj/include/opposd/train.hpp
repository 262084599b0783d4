#pragma once

#include <memory>
#include <optional>
#include <string>

#include "opposd/actor.hpp"
#include "opposd/critic.hpp"
#include "opposd/dataset.hpp"
#include "opposd/env.hpp"
#include "opposd/ratio.hpp"

namespace opposd {

enum class Algorithm { OPPOSD, OffPAC };
enum class DiscountVariant { average, discounted_w_only, discounted_full };

const char* algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);
const char* variant_name(DiscountVariant v);
DiscountVariant variant_from_name(const std::string& name);

struct TrainConfig {
  double gamma = 1.0;
  double lambda = 0.0;
  double entropy_coefficient = 0.01;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double lr_w = 1e-3;
  std::size_t batch_actor = 5000;
  std::size_t batch_critic = 5000;
  std::size_t batch_w = 200;
  std::size_t n_critic_iters = 10;   // N_c
  std::size_t n_w_iters = 50;        // N_w
  double weight_decay_w = 1e-5;
  std::size_t bc_iterations = 2000;
  std::size_t warm_start_critic_iters = 500;
  std::size_t warm_start_w_iters = 500;
  std::size_t total_actor_updates = 10000;
  std::size_t checkpoint_interval = 100;
  double epsilon_smoothing = 0.0;  // applied at collection time
  Algorithm algorithm = Algorithm::OPPOSD;
  DiscountVariant discount_variant = DiscountVariant::average;
  std::uint64_t seed = 0;

  // Artifact-level knobs.
  std::vector<std::size_t> hidden_actor{32};
  std::vector<std::size_t> hidden_critic{32};
  std::vector<std::size_t> hidden_w{32};
  bool normalize_inputs = true;
  double rho_clip = 10.0;
  KernelConfig kernel;
  std::size_t eval_interval = 100;
  std::size_t eval_episodes = 20;
  std::size_t bc_batch = 1000;

  void validate() const;
};

struct DispatchResult {
  bool discounted_ratio_loss = false;
  bool dgamma_sampling = false;  // ratio and actor mini-batches
  bool flagged = false;          // average-variant loss under gamma < 1
};

// Pure mapping from the variant switch to component configuration.
DispatchResult discount_variant_dispatch(const TrainConfig& config);

// Environment-specific model wiring (feature views and hard policy-class
// constraints); defaults mean plain identity features.
struct ModelSetup {
  DenseMatrix actor_feature_map;
  std::shared_ptr<const PolicyConstraint> constraint;
};

struct MetricsRow {
  std::size_t actor_update = 0;
  double ratio_loss = std::nan("");
  double critic_loss = std::nan("");
  double entropy = std::nan("");
  double grad_norm = std::nan("");
  double z_w = std::nan("");
  double mc_eval_mean = std::nan("");
  double mc_eval_std = std::nan("");
};

struct CheckpointRecord {
  std::size_t update_index = 0;
  std::string path;  // directory holding actor/critic/ratio + trainer_state.json
};

struct CheckpointStore {
  std::string directory;
  std::vector<CheckpointRecord> records;

  static std::vector<CheckpointRecord> scan(const std::string& directory);
};

struct TrainResult {
  std::string run_dir;
  CheckpointStore checkpoints;
  std::vector<MetricsRow> metrics;
  ActorModel actor;
  CriticModel critic;
  RatioModel ratio;   // untrained placeholder for the baseline algorithm
};

// Executes the full pipeline: warm starts (behavior cloning, on-policy
// critic regression, ratio fit against the cloned actor), then the
// interleaved ratio/critic/actor loop with periodic checkpoints and metric
// rows. `eval_env` may be null (MC columns stay empty). When
// `resume_checkpoint` names a previously written checkpoint directory the
// warm start is skipped and training continues from its stored state.
TrainResult train(const Dataset& data, const TrainConfig& config, Environment* eval_env,
                  const ModelSetup& setup, const std::string& run_dir,
                  const std::string& resume_checkpoint = "");

// Loads the actor stored in a checkpoint directory, rebuilding its input
// adapter and constraint from the dataset and setup.
ActorModel load_checkpoint_actor(const std::string& checkpoint_dir, const Dataset& data,
                                 const TrainConfig& config, const ModelSetup& setup);

// Loads the ratio model stored in a checkpoint directory.
RatioModel load_checkpoint_ratio(const std::string& checkpoint_dir, const Dataset& data,
                                 const TrainConfig& config);

}  // namespace opposd
