// Command-line driver: collect | train | evaluate | select | gradcheck.
// Exit codes: 0 success, 2 configuration/input error, 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "opposd/dataset.hpp"
#include "opposd/invariant_suite.hpp"
#include "opposd/oppe.hpp"
#include "opposd/run_config.hpp"
#include "opposd/train.hpp"

namespace fs = std::filesystem;
using namespace opposd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::string resolve_output_dir(const RunConfig& config) {
  if (const char* env = std::getenv("OPPOSD_OUTPUT_DIR"); env && *env) return env;
  return config.output_dir;
}

std::string default_dataset_path(const RunConfig& config) {
  if (!config.dataset_path.empty()) return config.dataset_path;
  return (fs::path(resolve_output_dir(config)) / "dataset.jsonl").string();
}

int cmd_collect(const RunConfig& config) {
  config.require_seed();
  if (config.n_trajectories == 0) throw ConfigError("collect: n_trajectories must be positive");
  EnvBundle bundle = make_environment(config);
  Rng rng = Rng::derive(config.seed, "collect");
  Dataset data =
      collect_dataset(*bundle.env, *bundle.behavior, config.n_trajectories, config.horizon, rng);
  if (config.epsilon > 0.0) {
    Rng smooth_rng = Rng::derive(config.seed, "smooth");
    data = epsilon_smooth(data, *bundle.behavior, config.epsilon, smooth_rng);
  }
  data.normalization = compute_normalization(data);
  const std::string dir = resolve_output_dir(config);
  fs::create_directories(dir);
  const std::string path = unique_path(default_dataset_path(config));
  save_dataset(data, path);
  std::cout << path << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& config, const std::string& resume) {
  config.require_seed();
  const std::string dataset_path = default_dataset_path(config);
  if (!fs::exists(dataset_path)) {
    throw ConfigError("train: dataset not found: " + dataset_path + " (run collect first)");
  }
  const Dataset data = load_dataset(dataset_path);
  EnvBundle bundle = make_environment(config);
  const std::string run_dir = unique_path(
      (fs::path(resolve_output_dir(config)) /
       (std::string("train-") + algorithm_name(config.train.algorithm) + "-seed" +
        std::to_string(config.seed)))
          .string());
  TrainResult result =
      train(data, config.train, bundle.env.get(), bundle.setup, run_dir, resume);
  std::cout << result.run_dir << "\n";
  return kExitOk;
}

int cmd_evaluate(const RunConfig& config) {
  config.require_seed();
  if (config.checkpoint_dir.empty()) {
    throw ConfigError("evaluate: config field evaluate.checkpoint_dir is required");
  }
  const auto checkpoints = CheckpointStore::scan(config.checkpoint_dir);
  if (checkpoints.empty()) {
    throw ConfigError("evaluate: no checkpoints found under " + config.checkpoint_dir);
  }
  const std::string eval_path =
      config.eval_dataset_path.empty() ? default_dataset_path(config) : config.eval_dataset_path;
  if (!fs::exists(eval_path)) {
    throw ConfigError("evaluate: evaluation dataset not found: " + eval_path);
  }
  const Dataset eval_data = load_dataset(eval_path);
  EnvBundle bundle = make_environment(config);
  const DispatchResult dispatch = discount_variant_dispatch(config.train);
  const DiscountedSampler sampler = make_discounted_sampler(
      dispatch.dgamma_sampling ? config.train.gamma : 1.0, eval_data.horizon);

  std::vector<EvaluationRecord> records;
  for (const auto& ckpt : checkpoints) {
    ActorModel actor = load_checkpoint_actor(ckpt.path, eval_data, config.train, bundle.setup);
    RatioModel ratio = load_checkpoint_ratio(ckpt.path, eval_data, config.train);
    const ActorTargetPolicy policy(actor);
    Rng refit_rng = Rng::derive(config.seed, "oppe-refit-" + std::to_string(ckpt.update_index));
    for (std::size_t i = 0; i < config.refit_w_iters; ++i) {
      ratio_update_step(ratio, eval_data, sampler, config.train.batch_w, policy,
                        dispatch.discounted_ratio_loss, config.train.gamma, refit_rng);
    }
    EvaluationRecord rec;
    rec.checkpoint_id = fs::path(ckpt.path).filename().string();
    rec.update_index = ckpt.update_index;
    rec.oppe_estimate = oppe_estimate(policy, eval_data, ratio, config.train.gamma);
    if (config.use_simulator) {
      Rng mc_rng = Rng::derive(config.seed, "oppe-mc-" + std::to_string(ckpt.update_index));
      const ActorAsPolicy sim_policy(actor);
      const McEvalResult mc = onpolicy_mc_eval(sim_policy, *bundle.env, config.mc_episodes,
                                               eval_data.horizon, config.train.gamma, mc_rng);
      rec.mc_estimate = mc.mean;
      rec.mc_std = mc.std;
      rec.n_mc_episodes = config.mc_episodes;
    }
    records.push_back(std::move(rec));
  }

  const std::string out_dir = resolve_output_dir(config);
  fs::create_directories(out_dir);
  const std::string records_path =
      unique_path(config.records_path.empty()
                      ? (fs::path(out_dir) / "evaluation.csv").string()
                      : config.records_path);
  std::ofstream os(records_path, std::ios::trunc);
  os << "# oppe weighting=d_gamma gamma=" << format_double(config.train.gamma)
     << " refit_w_iters=" << config.refit_w_iters << "\n";
  os << "checkpoint_id,update_index,oppe_estimate,mc_estimate,mc_std,n_mc_episodes\n";
  for (const auto& r : records) {
    os << r.checkpoint_id << "," << r.update_index << "," << format_double(r.oppe_estimate)
       << ",";
    if (r.mc_estimate) os << format_double(*r.mc_estimate);
    os << "," << format_double(r.mc_std) << "," << r.n_mc_episodes << "\n";
  }
  std::size_t with_mc = 0;
  for (const auto& r : records) with_mc += r.mc_estimate.has_value() ? 1 : 0;
  if (with_mc >= 3) {
    try {
      const CorrelationReport rep = correlation_report(records);
      os << "# pearson_r=" << format_double(rep.pearson_r) << "\n";
    } catch (const NumericError&) {
      os << "# pearson_r=undefined\n";
    }
  }
  os.close();
  std::cout << records_path << "\n";
  return kExitOk;
}

std::vector<EvaluationRecord> parse_records_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("select: cannot open records file " + path);
  std::vector<EvaluationRecord> records;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column header
      continue;
    }
    std::istringstream ls(line);
    std::string field;
    EvaluationRecord rec;
    std::getline(ls, rec.checkpoint_id, ',');
    std::getline(ls, field, ',');
    rec.update_index = static_cast<std::size_t>(std::stoull(field));
    std::getline(ls, field, ',');
    rec.oppe_estimate = std::stod(field);
    if (std::getline(ls, field, ',') && !field.empty()) rec.mc_estimate = std::stod(field);
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw ConfigError("select: no records in " + path);
  return records;
}

int cmd_select(const RunConfig& config, const std::string& records_arg) {
  std::string path = records_arg;
  if (path.empty()) path = config.records_path;
  if (path.empty()) {
    path = (fs::path(resolve_output_dir(config)) / "evaluation.csv").string();
  }
  const auto records = parse_records_csv(path);
  const std::size_t best = select_best(records);
  std::cout << records[best].checkpoint_id << "\n";
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed) {
  const int failures = run_invariant_suite(seed, std::cout);
  return failures == 0 ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch off-policy policy-gradient laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string resume;
  std::string records;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  std::string output_override;
  std::string dataset_override;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path,
                                "Path to the JSON run configuration file");
    if (needs_config) opt->required();
    sub->add_option("--seed", seed_override, "Override the config seed")
        ->each([&](const std::string&) { seed_given = true; });
    sub->add_option("--output-dir", output_override,
                    "Override output_dir (env var OPPOSD_OUTPUT_DIR also applies)");
    sub->add_option("--dataset", dataset_override, "Override the dataset path");
  };

  auto* collect = app.add_subcommand(
      "collect", "Roll out the behavior policy and write the JSON-lines dataset");
  add_common(collect, true);
  auto* train_cmd = app.add_subcommand(
      "train", "Run the training loop and write checkpoints plus metrics.csv");
  add_common(train_cmd, true);
  train_cmd->add_option("--resume", resume, "Checkpoint directory to continue from");
  auto* evaluate = app.add_subcommand(
      "evaluate", "Estimate every checkpoint's value from logged data (plus optional MC)");
  add_common(evaluate, true);
  auto* select = app.add_subcommand(
      "select", "Print the checkpoint id with the best logged-data estimate");
  add_common(select, false);
  select->add_option("--records", records, "Evaluation CSV produced by the evaluate command");
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Run the numerical invariant suite (finite-difference gradient checks)");
  gradcheck->add_option("--seed", seed_override, "Suite seed")->each([&](const std::string&) {
    seed_given = true;
  });

  app.footer(
      "Config file fields (defaults are the cart-pole reference settings):\n"
      "  environment            cartpole | hard_example | tabular:<mdp.json>\n"
      "  seed                   mandatory integer seed for every random stream\n"
      "  output_dir             artifact directory (default runs)\n"
      "  dataset                dataset file path (default <output_dir>/dataset.jsonl)\n"
      "  collect.n_trajectories default 500\n"
      "  collect.horizon        default 200\n"
      "  collect.epsilon        smoothing factor in [0,1), default 0\n"
      "  train.gamma            default 1.0\n"
      "  train.lambda           default 0\n"
      "  train.entropy_coefficient default 0.01\n"
      "  train.lr_actor / lr_critic / lr_w   default 1e-3 / 1e-3 / 1e-3\n"
      "  train.batch_actor / batch_critic / batch_w  default 5000 / 5000 / 200\n"
      "  train.n_critic_iters   default 10\n"
      "  train.n_w_iters        default 50\n"
      "  train.weight_decay_w   default 1e-5\n"
      "  train.bc_iterations    default 2000\n"
      "  train.warm_start_critic_iters default 500\n"
      "  train.warm_start_w_iters      default 500\n"
      "  train.total_actor_updates     default 10000\n"
      "  train.checkpoint_interval     default 100\n"
      "  train.algorithm        OPPOSD | OffPAC\n"
      "  train.discount_variant average | discounted_w_only | discounted_full\n"
      "  train.hidden_actor/hidden_critic/hidden_w  layer widths, default [32]\n"
      "  train.normalize_inputs default true\n"
      "  train.rho_clip         default 10\n"
      "  train.kernel_bandwidth_mode  median_heuristic | fixed\n"
      "  train.kernel_bandwidth default 1.0 (fixed mode)\n"
      "  train.eval_interval / eval_episodes  default 100 / 20\n"
      "  evaluate.checkpoint_dir, evaluate.eval_dataset, evaluate.records\n"
      "  evaluate.mc_episodes   default 20\n"
      "  evaluate.use_simulator default true\n"
      "  evaluate.refit_w_iters default 500");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
      return app.exit(e);
    }
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config = RunConfig::from_file(config_path);
    if (seed_given) {
      config.seed = seed_override;
      config.seed_set = true;
      config.train.seed = seed_override;
    }
    if (!output_override.empty()) config.output_dir = output_override;
    if (!dataset_override.empty()) config.dataset_path = dataset_override;

    if (collect->parsed()) return cmd_collect(config);
    if (train_cmd->parsed()) return cmd_train(config, resume);
    if (evaluate->parsed()) return cmd_evaluate(config);
    if (select->parsed()) return cmd_select(config, records);
    if (gradcheck->parsed()) return cmd_gradcheck(seed_given ? seed_override : 0);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
