#include "opposd/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "opposd/checkpoint.hpp"
#include "opposd/oppe.hpp"

namespace fs = std::filesystem;

namespace opposd {

const char* algorithm_name(Algorithm a) {
  return a == Algorithm::OPPOSD ? "OPPOSD" : "OffPAC";
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "OPPOSD") return Algorithm::OPPOSD;
  if (name == "OffPAC") return Algorithm::OffPAC;
  throw ConfigError("unknown algorithm: " + name + " (expected OPPOSD or OffPAC)");
}

const char* variant_name(DiscountVariant v) {
  switch (v) {
    case DiscountVariant::average: return "average";
    case DiscountVariant::discounted_w_only: return "discounted_w_only";
    case DiscountVariant::discounted_full: return "discounted_full";
  }
  return "average";
}

DiscountVariant variant_from_name(const std::string& name) {
  if (name == "average") return DiscountVariant::average;
  if (name == "discounted_w_only") return DiscountVariant::discounted_w_only;
  if (name == "discounted_full") return DiscountVariant::discounted_full;
  throw ConfigError("unknown discount_variant: " + name);
}

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("config: gamma must be in (0,1]");
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("config: lambda must be in [0,1]");
  if (lr_actor <= 0.0 || lr_critic <= 0.0 || lr_w <= 0.0) {
    throw ConfigError("config: learning rates must be positive");
  }
  if (batch_actor == 0 || batch_critic == 0 || batch_w == 0 || bc_batch == 0) {
    throw ConfigError("config: batch sizes must be positive");
  }
  if (epsilon_smoothing < 0.0 || epsilon_smoothing >= 1.0) {
    throw ConfigError("config: epsilon_smoothing must be in [0,1)");
  }
  if (checkpoint_interval == 0) throw ConfigError("config: checkpoint_interval must be positive");
  if (gamma >= 1.0 && discount_variant != DiscountVariant::average) {
    throw ConfigError("config: gamma=1 admits only the average discount_variant");
  }
}

DispatchResult discount_variant_dispatch(const TrainConfig& config) {
  config.validate();
  DispatchResult d;
  switch (config.discount_variant) {
    case DiscountVariant::average:
      d.discounted_ratio_loss = false;
      d.dgamma_sampling = false;
      d.flagged = config.gamma < 1.0;  // permitted, but logged
      break;
    case DiscountVariant::discounted_w_only:
      d.discounted_ratio_loss = true;
      d.dgamma_sampling = false;
      break;
    case DiscountVariant::discounted_full:
      d.discounted_ratio_loss = true;
      d.dgamma_sampling = true;
      break;
  }
  return d;
}

namespace {

std::string checkpoint_name(std::size_t update) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%06zu", update);
  return buf;
}

std::string metric_field(double v) { return std::isnan(v) ? "" : format_double(v); }

class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, const std::string& header_comment) {
    os_.open(path, std::ios::trunc);
    if (!os_) throw DataError("cannot open metrics file: " + path);
    os_ << "# " << header_comment << "\n";
    os_ << "actor_update,ratio_loss,critic_loss,entropy,grad_norm,z_w,mc_eval_mean,mc_eval_std\n";
    os_.flush();
  }

  void append(const MetricsRow& row) {
    os_ << row.actor_update << "," << metric_field(row.ratio_loss) << ","
        << metric_field(row.critic_loss) << "," << metric_field(row.entropy) << ","
        << metric_field(row.grad_norm) << "," << metric_field(row.z_w) << ","
        << metric_field(row.mc_eval_mean) << "," << metric_field(row.mc_eval_std) << "\n";
    os_.flush();
  }

 private:
  std::ofstream os_;
};

struct TrainerState {
  ActorModel actor;
  CriticModel critic;
  RatioModel ratio;
  Rng rng{0};
  std::size_t next_update = 1;
};

std::string write_checkpoint(const std::string& checkpoints_dir, std::size_t update,
                             const TrainerState& st, const TrainConfig& config) {
  const std::string name = checkpoint_name(update);
  const fs::path final_dir = fs::path(checkpoints_dir) / name;
  const fs::path tmp_dir = fs::path(checkpoints_dir) / (name + ".tmp");
  fs::remove_all(tmp_dir);
  fs::create_directories(tmp_dir);

  save_model((tmp_dir / "actor").string(), st.actor.net, st.actor.opt);
  save_model((tmp_dir / "critic").string(), st.critic.net, st.critic.opt);
  nlohmann::json ratio_extra;
  ratio_extra["kernel"] = {{"bandwidth_mode", st.ratio.kernel.bandwidth_mode ==
                                                      BandwidthMode::median_heuristic
                                                  ? "median_heuristic"
                                                  : "fixed"},
                           {"bandwidth", st.ratio.kernel.bandwidth}};
  ratio_extra["resolved_bandwidth"] = st.ratio.bandwidth;
  ratio_extra["loss_variant"] = variant_name(config.discount_variant);
  save_model((tmp_dir / "ratio").string(), st.ratio.net, st.ratio.opt, ratio_extra.dump());

  nlohmann::json state;
  state["update_index"] = update;
  state["rng_state"] = st.rng.save_state();
  state["algorithm"] = algorithm_name(config.algorithm);
  state["discount_variant"] = variant_name(config.discount_variant);
  std::ofstream os(tmp_dir / "trainer_state.json", std::ios::trunc);
  os << state.dump(2) << "\n";
  os.close();

  fs::remove_all(final_dir);
  fs::rename(tmp_dir, final_dir);
  return final_dir.string();
}

InputAdapter make_adapter(const Dataset& data, const TrainConfig& config,
                          const DenseMatrix& feature_map) {
  InputAdapter adapter;
  adapter.feature_map = feature_map;
  if (config.normalize_inputs) {
    if (feature_map.empty() && !data.normalization.empty()) {
      adapter.norm = data.normalization;
    } else {
      adapter.norm = normalization_for_adapter(data, feature_map);
    }
  }
  return adapter;
}

std::vector<std::size_t> layer_spec(std::size_t in, const std::vector<std::size_t>& hidden,
                                    std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

std::vector<CheckpointRecord> CheckpointStore::scan(const std::string& directory) {
  std::vector<CheckpointRecord> out;
  if (!fs::is_directory(directory)) return out;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.rfind("ckpt_", 0) != 0) continue;
    CheckpointRecord rec;
    rec.update_index = static_cast<std::size_t>(std::stoull(name.substr(5)));
    rec.path = entry.path().string();
    out.push_back(std::move(rec));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.update_index < b.update_index;
  });
  return out;
}

TrainResult train(const Dataset& data, const TrainConfig& config, Environment* eval_env,
                  const ModelSetup& setup, const std::string& run_dir,
                  const std::string& resume_checkpoint) {
  config.validate();
  if (data.trajectories.empty()) throw ConfigError("train: empty dataset");
  const DispatchResult dispatch = discount_variant_dispatch(config);

  fs::create_directories(run_dir);
  const std::string checkpoints_dir = (fs::path(run_dir) / "checkpoints").string();
  fs::create_directories(checkpoints_dir);

  std::string header = std::string("algorithm=") + algorithm_name(config.algorithm) +
                       " variant=" + variant_name(config.discount_variant) +
                       " seed=" + std::to_string(config.seed) +
                       " gamma=" + format_double(config.gamma);
  if (dispatch.flagged) header += " note=average-variant-under-discounted-gamma";
  MetricsWriter metrics_out((fs::path(run_dir) / "metrics.csv").string(), header);

  TrainResult result;
  result.run_dir = run_dir;
  result.checkpoints.directory = checkpoints_dir;

  const InputAdapter full_adapter = make_adapter(data, config, DenseMatrix{});
  const InputAdapter actor_adapter = make_adapter(data, config, setup.actor_feature_map);

  TrainerState st;
  const bool resuming = !resume_checkpoint.empty();
  std::size_t start_update = 0;

  if (!resuming) {
    Rng init_actor = Rng::derive(config.seed, "init-actor");
    Rng init_critic = Rng::derive(config.seed, "init-critic");
    Rng init_w = Rng::derive(config.seed, "init-w");
    st.actor = make_actor_model(
        layer_spec(actor_adapter.out_dim(data.state_dim), config.hidden_actor, data.n_actions),
        actor_adapter, config.lr_actor, init_actor, setup.constraint);
    st.critic = make_critic_model(
        layer_spec(full_adapter.out_dim(data.state_dim), config.hidden_critic, 1), full_adapter,
        config.lr_critic, init_critic);
    st.ratio = make_ratio_model(
        layer_spec(full_adapter.out_dim(data.state_dim), config.hidden_w, 1), full_adapter,
        config.kernel, config.lr_w, config.weight_decay_w, init_w);
    st.ratio.bandwidth = resolve_bandwidth(config.kernel, full_adapter, data);
    st.rng = Rng(config.seed);
  } else {
    std::ifstream is(fs::path(resume_checkpoint) / "trainer_state.json");
    if (!is) throw ConfigError("train: cannot read trainer state in " + resume_checkpoint);
    nlohmann::json state;
    is >> state;
    start_update = state.at("update_index").get<std::size_t>();
    LoadedModel actor_m = load_model((fs::path(resume_checkpoint) / "actor").string());
    LoadedModel critic_m = load_model((fs::path(resume_checkpoint) / "critic").string());
    LoadedModel ratio_m = load_model((fs::path(resume_checkpoint) / "ratio").string());
    st.actor.net = std::move(actor_m.params);
    st.actor.opt = std::move(actor_m.opt);
    st.actor.input = actor_adapter;
    st.actor.constraint = setup.constraint;
    st.critic.net = std::move(critic_m.params);
    st.critic.opt = std::move(critic_m.opt);
    st.critic.input = full_adapter;
    st.ratio.net = std::move(ratio_m.params);
    st.ratio.opt = std::move(ratio_m.opt);
    st.ratio.input = full_adapter;
    st.ratio.kernel = config.kernel;
    st.ratio.bandwidth =
        nlohmann::json::parse(ratio_m.extra_json).at("resolved_bandwidth").get<double>();
    st.rng.restore_state(state.at("rng_state").get<std::string>());
  }

  const DiscountedSampler dgamma_sampler =
      make_discounted_sampler(dispatch.dgamma_sampling ? config.gamma : 1.0, data.horizon);
  const ActorTargetPolicy actor_policy(st.actor);

  CriticRoundConfig critic_round;
  critic_round.n_iters = config.n_critic_iters;
  critic_round.batch_size = config.batch_critic;
  critic_round.lambda = config.lambda;
  critic_round.gamma = config.gamma;
  critic_round.rho_clip = config.rho_clip;

  auto mc_eval_row = [&](MetricsRow& row, std::size_t update) {
    if (!eval_env) return;
    Rng eval_rng = Rng::derive(config.seed, "eval-" + std::to_string(update));
    const ActorAsPolicy policy(st.actor);
    const McEvalResult mc = onpolicy_mc_eval(policy, *eval_env, config.eval_episodes,
                                             data.horizon, config.gamma, eval_rng);
    row.mc_eval_mean = mc.mean;
    row.mc_eval_std = mc.std;
  };

  auto checkpoint_now = [&](std::size_t update) {
    CheckpointRecord rec;
    rec.update_index = update;
    rec.path = write_checkpoint(checkpoints_dir, update, st, config);
    result.checkpoints.records.push_back(std::move(rec));
  };

  if (!resuming) {
    // Warm starts: behavior cloning, then on-policy critic regression, then
    // the ratio fit against the cloned actor.
    behavior_clone(st.actor, data, config.bc_iterations, config.bc_batch, st.rng);
    warm_start_critic(st.critic, data, config.warm_start_critic_iters, critic_round, st.rng);
    if (config.algorithm == Algorithm::OPPOSD) {
      for (std::size_t i = 0; i < config.warm_start_w_iters; ++i) {
        ratio_update_step(st.ratio, data, dgamma_sampler, config.batch_w, actor_policy,
                          dispatch.discounted_ratio_loss, config.gamma, st.rng);
      }
    }
    MetricsRow row;
    row.actor_update = 0;
    mc_eval_row(row, 0);
    metrics_out.append(row);
    result.metrics.push_back(row);
    checkpoint_now(0);
  }

  for (std::size_t update = start_update + 1; update <= config.total_actor_updates; ++update) {
    MetricsRow row;
    row.actor_update = update;
    const char* stage = "ratio";
    try {
      if (config.algorithm == Algorithm::OPPOSD) {
        double loss_sum = 0.0;
        for (std::size_t i = 0; i < config.n_w_iters; ++i) {
          loss_sum += ratio_update_step(st.ratio, data, dgamma_sampler, config.batch_w,
                                        actor_policy, dispatch.discounted_ratio_loss,
                                        config.gamma, st.rng);
        }
        if (config.n_w_iters > 0) row.ratio_loss = loss_sum / config.n_w_iters;
      }

      stage = "critic";
      row.critic_loss = critic_update_round(st.critic, data, actor_policy, critic_round, st.rng);

      stage = "actor";
      const auto refs = sample_minibatch_dgamma(data, dgamma_sampler, config.batch_actor, st.rng);
      const MiniBatch batch = gather(data, refs);
      const VecD returns =
          batch_lambda_returns(st.critic.net, st.critic.input, data, batch, &actor_policy,
                               config.lambda, config.gamma, config.rho_clip);
      const VecD q = masked_q(batch, returns);
      ActorGradResult grad;
      if (config.algorithm == Algorithm::OPPOSD) {
        const VecD w = ratio_values(st.ratio, batch.states);
        grad = actor_gradient(st.actor, batch, w, q, config.entropy_coefficient);
      } else {
        grad = offpac_actor_gradient(st.actor, batch, q, config.entropy_coefficient);
      }
      scale_gradients(grad.ascent, -1.0);  // Adam descends; the objective ascends
      adam_step(st.actor.opt, st.actor.net, grad.ascent);
      row.entropy = grad.entropy_mean;
      row.grad_norm = grad.grad_norm;
      row.z_w = grad.z_w;
    } catch (const std::exception& e) {
      throw NumericError("train: " + std::string(stage) + " stage failed at actor update " +
                         std::to_string(update) + ": " + e.what());
    }

    if (update % config.eval_interval == 0 || update == config.total_actor_updates) {
      mc_eval_row(row, update);
    }
    metrics_out.append(row);
    result.metrics.push_back(row);
    if (update % config.checkpoint_interval == 0 || update == config.total_actor_updates) {
      checkpoint_now(update);
    }
  }

  result.actor = std::move(st.actor);
  result.critic = std::move(st.critic);
  result.ratio = std::move(st.ratio);
  return result;
}

ActorModel load_checkpoint_actor(const std::string& checkpoint_dir, const Dataset& data,
                                 const TrainConfig& config, const ModelSetup& setup) {
  LoadedModel m = load_model((fs::path(checkpoint_dir) / "actor").string());
  ActorModel actor;
  actor.net = std::move(m.params);
  actor.opt = std::move(m.opt);
  actor.input = make_adapter(data, config, setup.actor_feature_map);
  actor.constraint = setup.constraint;
  return actor;
}

RatioModel load_checkpoint_ratio(const std::string& checkpoint_dir, const Dataset& data,
                                 const TrainConfig& config) {
  LoadedModel m = load_model((fs::path(checkpoint_dir) / "ratio").string());
  RatioModel ratio;
  ratio.net = std::move(m.params);
  ratio.opt = std::move(m.opt);
  ratio.input = make_adapter(data, config, DenseMatrix{});
  ratio.kernel = config.kernel;
  ratio.bandwidth =
      nlohmann::json::parse(m.extra_json).at("resolved_bandwidth").get<double>();
  return ratio;
}

}  // namespace opposd
