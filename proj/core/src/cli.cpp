#include "preqn/cli.hpp"

#include "preqn/common.hpp"
#include "preqn/env.hpp"
#include "preqn/linalg.hpp"
#include "preqn/nn.hpp"
#include "preqn/ntk.hpp"
#include "preqn/tabular.hpp"
#include "preqn/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <type_traits>

namespace preqn {

namespace {

using nlohmann::json;

// Seed streams: each logical random consumer gets its own constant so that
// adding one never perturbs the others.
constexpr std::uint64_t kStreamEnv = 7;
constexpr std::uint64_t kStreamNtkEnv = 10;
constexpr std::uint64_t kStreamNtkRails = 11;
constexpr std::uint64_t kStreamMdpGen = 20;
constexpr std::uint64_t kStreamKernel = 21;
constexpr std::uint64_t kStreamRho = 22;
constexpr std::uint64_t kStreamQ0 = 23;
constexpr std::uint64_t kStreamSearch = 24;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw StateError("cannot open output file " + path);
  f << text;
  if (!f) throw StateError("failed writing " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw StateError("cannot open input file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      if constexpr (std::is_same_v<T, std::uint64_t>)
        out.push_back(std::stoull(item));
      else
        out.push_back(static_cast<T>(std::stoll(item)));
    } catch (const std::exception&) {
      throw ArgumentError(std::string(what) + ": cannot parse '" + item + "' as an integer");
    }
  }
  if (out.empty()) throw ArgumentError(std::string(what) + ": empty list");
  return out;
}

std::vector<nn::Activation> parse_activations(const std::string& text) {
  std::vector<nn::Activation> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(nn::activation_from_string(item));
  }
  if (out.empty()) throw ArgumentError("activations: empty list");
  return out;
}

std::string config_echo_path(const std::string& out) { return out + ".config.json"; }

// -------------------------------------------------------------------------
// ntk subcommand

struct NtkArgs {
  std::string env;
  std::string widths = "64";
  std::string depths = "2";
  std::string activations = "tanh,relu,sin";
  int trials = 3;
  int samples = 256;
  std::uint64_t seed = 0;
  std::string out;
};

int run_ntk(const NtkArgs& a) {
  const auto widths = parse_list<int>(a.widths, "widths");
  const auto depths = parse_list<int>(a.depths, "depths");
  const auto acts = parse_activations(a.activations);
  if (a.samples <= 0) throw ArgumentError("samples must be positive");

  auto env = rl::make_env(a.env, derive_seed(a.seed, kStreamNtkEnv));
  Rng rails_rng(derive_seed(a.seed, kStreamNtkRails));
  const auto dataset = rl::collect_rails_dataset(*env, a.samples, rails_rng);
  const auto cells = ntk::ntk_sweep(a.env, dataset, widths, depths, acts, a.trials, a.seed);

  std::ostringstream csv;
  ntk::write_sweep_csv(cells, csv);
  write_file(a.out, csv.str());

  json echo;
  echo["subcommand"] = "ntk";
  echo["env"] = a.env;
  echo["widths"] = widths;
  echo["depths"] = depths;
  {
    json acts_j = json::array();
    for (auto act : acts) acts_j.push_back(std::string(nn::to_string(act)));
    echo["activations"] = std::move(acts_j);
  }
  echo["trials"] = a.trials;
  echo["samples"] = a.samples;
  echo["seed"] = a.seed;
  echo["out"] = a.out;
  write_file(config_echo_path(a.out), echo.dump(2) + "\n");
  return 0;
}

// -------------------------------------------------------------------------
// tabular subcommand

struct TabularArgs {
  int states = 4;
  int actions = 2;
  double gamma = 0.99;
  double alpha = 0.1;
  std::string kernel = "identity";
  std::string rho = "uniform";
  int net_width = 64;
  int net_depth = 2;
  std::string net_activation = "sin";
  int iters = 200;
  int search_pairs = 200;
  int witness_pairs = 2000;
  std::string mdp_file;
  std::string dump_mdp;
  std::uint64_t seed = 0;
  std::string out;
};

int run_tabular(const TabularArgs& a) {
  using namespace tabular;
  if (a.iters < 0) throw ArgumentError("iters must be nonnegative");

  const FiniteMdp mdp =
      a.mdp_file.empty()
          ? make_random_mdp(a.states, a.actions, a.gamma, derive_seed(a.seed, kStreamMdpGen))
          : load_mdp(a.mdp_file);
  if (!a.dump_mdp.empty()) save_mdp(mdp, a.dump_mdp);
  const int n = mdp.n_pairs();

  Rho rho = uniform_rho(n);
  if (a.rho == "random") {
    Rng rho_rng(derive_seed(a.seed, kStreamRho));
    rho = random_rho(n, rho_rng);
  } else if (a.rho != "uniform") {
    throw ArgumentError("rho must be 'uniform' or 'random'");
  }

  KernelSpec kernel;
  if (a.kernel == "identity") {
    kernel.matrix = Matrix::Identity(n, n);
  } else if (a.kernel == "random-psd") {
    Rng krng(derive_seed(a.seed, kStreamKernel));
    Matrix factor(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        factor(i, j) = krng.normal(0.0, 1.0) / std::sqrt(static_cast<double>(n));
    Matrix k = factor * factor.transpose();
    kernel.matrix = 0.5 * (k + k.transpose());
  } else if (a.kernel == "net") {
    std::vector<int> sizes;
    sizes.push_back(mdp.n_states + mdp.n_actions);
    for (int l = 0; l < a.net_depth; ++l) sizes.push_back(a.net_width);
    sizes.push_back(1);
    const nn::Mlp net = nn::mlp_init(sizes, nn::activation_from_string(a.net_activation),
                                     derive_seed(a.seed, kStreamKernel));
    kernel.matrix = ntk::build_ntk(nn::grad_per_sample(net, all_pair_features(mdp))).k;
  } else {
    throw ArgumentError("kernel must be 'identity', 'random-psd', or 'net'");
  }

  json report;
  try {
    report["modulus"] = update_modulus_bound(kernel, rho, a.alpha, mdp.gamma);
  } catch (const OvershootError&) {
    report["modulus"] = nullptr;  // step size overshoots on some diagonal entry
  }
  const ContractionReport rep = check_contraction_conditions(kernel, rho, a.alpha, mdp.gamma);
  report["eq15_rows"] = rep.step_size_ok;
  report["eq16_rows"] = rep.diag_dom_ok;
  report["contraction_guaranteed"] = rep.contraction_guaranteed;

  const QOperator op = [&](const QTable& q) {
    return kernel_bellman_update(mdp, q, rho, kernel, a.alpha);
  };
  Rng search_rng(derive_seed(a.seed, kStreamSearch));
  report["empirical_modulus"] = empirical_modulus(mdp, op, a.search_pairs, search_rng);
  report["expansion_witness_ratio"] =
      empirical_modulus(mdp, op, a.witness_pairs, search_rng);

  Rng q0_rng(derive_seed(a.seed, kStreamQ0));
  const QTable q0 = random_q(mdp, -10.0, 10.0, q0_rng);
  const SequenceRun run = operator_sequence_run(mdp, q0, {op}, a.iters);
  report["trajectory"] = run.dist_to_fixed_point;

  write_file(a.out, report.dump(2) + "\n");

  json echo;
  echo["subcommand"] = "tabular";
  echo["n_states"] = mdp.n_states;
  echo["n_actions"] = mdp.n_actions;
  echo["gamma"] = mdp.gamma;
  echo["alpha"] = a.alpha;
  echo["kernel"] = a.kernel;
  echo["rho"] = a.rho;
  if (a.kernel == "net") {
    echo["net_width"] = a.net_width;
    echo["net_depth"] = a.net_depth;
    echo["net_activation"] = a.net_activation;
  }
  echo["iters"] = a.iters;
  echo["search_pairs"] = a.search_pairs;
  echo["witness_pairs"] = a.witness_pairs;
  if (!a.mdp_file.empty()) echo["mdp_file"] = a.mdp_file;
  echo["seed"] = a.seed;
  echo["out"] = a.out;
  write_file(config_echo_path(a.out), echo.dump(2) + "\n");
  return 0;
}

// -------------------------------------------------------------------------
// train subcommand

struct TrainArgs {
  std::string algo = "preqn";
  bool target = false;
  bool desk_scale = false;
  std::string env;
  std::int64_t steps = 30000;
  std::string seeds = "0";
  std::string config_file;
  std::int64_t checkpoint_every = 0;
  std::string out;
};

struct HyperOverrides {
  // Parallel to PreqnConfig; only the flags the user actually set are applied.
  double gamma = 0, critic_lr = 0, actor_lr = 0, eta = 0, noise_std = 0, polyak = 0,
         linesearch_decay = 0, pinv_rel_tol = 0;
  int batch_size = 0, update_every = 0, update_after = 0, start_steps = 0,
      max_backtracks = 0;
  std::string hidden, activation;
};

int run_train(const TrainArgs& a, const HyperOverrides& h,
              const std::map<std::string, bool>& set_flags) {
  const auto seeds = parse_list<std::uint64_t>(a.seeds, "seeds");
  if (a.steps < 0) throw ArgumentError("steps must be nonnegative");
  const trainer::Algo algo = trainer::algo_from_string(a.algo, a.target);

  trainer::PreqnConfig cfg =
      a.desk_scale ? trainer::desk_scale_defaults() : trainer::PreqnConfig{};
  if (!a.config_file.empty()) trainer::apply_config_json(cfg, read_file(a.config_file));
  const auto on = [&](const char* name) {
    auto it = set_flags.find(name);
    return it != set_flags.end() && it->second;
  };
  if (on("gamma")) cfg.gamma = h.gamma;
  if (on("batch_size")) cfg.batch_size = h.batch_size;
  if (on("critic_lr")) cfg.critic_lr = h.critic_lr;
  if (on("actor_lr")) cfg.actor_lr = h.actor_lr;
  if (on("eta")) cfg.eta = h.eta;
  if (on("update_every")) cfg.update_every = h.update_every;
  if (on("update_after")) cfg.update_after = h.update_after;
  if (on("start_steps")) cfg.start_steps = h.start_steps;
  if (on("noise_std")) cfg.action_noise_std = h.noise_std;
  if (on("polyak")) cfg.polyak = h.polyak;
  if (on("linesearch_decay")) cfg.linesearch_decay = h.linesearch_decay;
  if (on("max_backtracks")) cfg.linesearch_max_backtracks = h.max_backtracks;
  if (on("pinv_rel_tol")) cfg.pinv_rel_tol = h.pinv_rel_tol;
  if (on("hidden")) cfg.hidden_sizes = parse_list<int>(h.hidden, "hidden");
  if (on("activation")) cfg.activation = nn::activation_from_string(h.activation);
  cfg.validate();

  json echo;
  echo["subcommand"] = "train";
  echo["algo"] = std::string(trainer::to_string(algo));
  if (algo == trainer::Algo::kBaselineTarget) echo["target_polyak"] = cfg.polyak;
  echo["env"] = a.env;
  echo["steps"] = a.steps;
  echo["seeds"] = seeds;
  echo["checkpoint_every"] = a.checkpoint_every;
  echo["out"] = a.out;
  echo["config"] = json::parse(trainer::config_to_json(cfg));
  write_file(config_echo_path(a.out), echo.dump(2) + "\n");

  bool any_tripped = false;
  json run_report = json::array();
  std::vector<std::vector<trainer::EvalPoint>> all_metrics;
  for (const std::uint64_t seed : seeds) {
    auto env = rl::make_env(a.env, derive_seed(seed, kStreamEnv));
    trainer::TrainHooks hooks;
    if (a.checkpoint_every > 0) {
      hooks.checkpoint_every = a.checkpoint_every;
      hooks.on_checkpoint = [&](std::int64_t step, const trainer::ActorCritic& ac) {
        const std::string stem =
            a.out + "_seed" + std::to_string(seed) + "_ckpt" + std::to_string(step);
        nn::save_mlp(ac.q_net, stem + "_q.json");
        nn::save_mlp(ac.mu_net, stem + "_mu.json");
      };
    }
    trainer::TrainResult res = trainer::train(*env, algo, cfg, a.steps, seed, hooks);

    std::ostringstream csv;
    trainer::write_metrics_csv(res.metrics, csv);
    write_file(a.out + "_seed" + std::to_string(seed) + ".csv", csv.str());

    json entry;
    entry["seed"] = seed;
    entry["watchdog_tripped"] = res.watchdog_tripped;
    entry["watchdog_step"] = res.watchdog_step;
    entry["updates_total"] = res.updates_total;
    entry["updates_accepted"] = res.updates_accepted;
    entry["updates_aborted"] = res.updates_aborted;
    entry["final_eval_return_mean"] =
        res.metrics.empty() ? 0.0 : res.metrics.back().eval_return_mean;
    run_report.push_back(std::move(entry));

    any_tripped = any_tripped || res.watchdog_tripped;
    all_metrics.push_back(std::move(res.metrics));
  }

  // Merged summary: per eval step, mean and population std of the per-seed
  // eval-return means, over the seeds that reached that step.
  std::ostringstream summary;
  summary << "step,eval_return_mean,eval_return_std,n_seeds\n";
  std::size_t longest = 0;
  for (const auto& m : all_metrics) longest = std::max(longest, m.size());
  for (std::size_t row = 0; row < longest; ++row) {
    std::int64_t step = 0;
    double sum = 0.0, sum_sq = 0.0;
    int count = 0;
    for (const auto& m : all_metrics)
      if (row < m.size()) {
        step = m[row].step;
        sum += m[row].eval_return_mean;
        sum_sq += m[row].eval_return_mean * m[row].eval_return_mean;
        ++count;
      }
    const double mean = sum / count;
    const double var = std::max(0.0, sum_sq / count - mean * mean);
    summary << step << ',' << format_double(mean) << ',' << format_double(std::sqrt(var))
            << ',' << count << '\n';
  }
  write_file(a.out + "_summary.csv", summary.str());
  write_file(a.out + "_run.json", run_report.dump(2) + "\n");

  return any_tripped ? 2 : 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Numerical laboratory for kernel-preconditioned Q-learning"};
  app.require_subcommand(1);

  NtkArgs ntk_args;
  auto* ntk_cmd = app.add_subcommand(
      "ntk", "Gradient-kernel statistics of fresh networks across architectures");
  ntk_cmd->add_option("--env", ntk_args.env, "Environment name (pendulum | masspoint)")
      ->required();
  ntk_cmd->add_option("--widths", ntk_args.widths, "Comma-separated hidden widths");
  ntk_cmd->add_option("--depths", ntk_args.depths, "Comma-separated hidden depths");
  ntk_cmd->add_option("--activations", ntk_args.activations,
                      "Comma-separated activations (tanh | relu | sin)");
  ntk_cmd->add_option("--trials", ntk_args.trials, "Independent initializations per cell");
  ntk_cmd->add_option("--samples", ntk_args.samples, "Dataset size (rails-random rollout)");
  ntk_cmd->add_option("--seed", ntk_args.seed, "Root seed");
  ntk_cmd->add_option("--out", ntk_args.out, "Output CSV path")->required();

  TabularArgs tab_args;
  auto* tab_cmd = app.add_subcommand(
      "tabular", "Contraction analysis of kernel-weighted updates on a finite MDP");
  tab_cmd->add_option("--states", tab_args.states, "Number of states (generated MDP)");
  tab_cmd->add_option("--actions", tab_args.actions, "Number of actions (generated MDP)");
  tab_cmd->add_option("--gamma", tab_args.gamma, "Discount factor (generated MDP)");
  tab_cmd->add_option("--alpha", tab_args.alpha, "Update step size");
  tab_cmd->add_option("--kernel", tab_args.kernel,
                      "Kernel choice: identity | random-psd | net");
  tab_cmd->add_option("--rho", tab_args.rho, "Pair weights: uniform | random");
  tab_cmd->add_option("--net-width", tab_args.net_width, "Hidden width for --kernel net");
  tab_cmd->add_option("--net-depth", tab_args.net_depth, "Hidden depth for --kernel net");
  tab_cmd->add_option("--net-activation", tab_args.net_activation,
                      "Activation for --kernel net");
  tab_cmd->add_option("--iters", tab_args.iters, "Iterations of the update trajectory");
  tab_cmd->add_option("--search-pairs", tab_args.search_pairs,
                      "Sampled pairs for the empirical modulus");
  tab_cmd->add_option("--witness-pairs", tab_args.witness_pairs,
                      "Additional pairs searched for an expansion witness");
  tab_cmd->add_option("--mdp-file", tab_args.mdp_file, "Load the MDP from JSON");
  tab_cmd->add_option("--dump-mdp", tab_args.dump_mdp, "Write the MDP used to JSON");
  tab_cmd->add_option("--seed", tab_args.seed, "Root seed");
  tab_cmd->add_option("--out", tab_args.out, "Output report path (JSON)")->required();

  TrainArgs train_args;
  HyperOverrides hyper;
  auto* train_cmd =
      app.add_subcommand("train", "Actor-critic training with evaluation logging");
  train_cmd->add_option("--algo", train_args.algo, "Algorithm: preqn | baseline");
  train_cmd->add_flag("--target", train_args.target,
                      "Use a polyak-averaged target critic (baseline only)");
  train_cmd->add_flag("--desk-scale", train_args.desk_scale,
                      "Start from the small-problem defaults");
  train_cmd->add_option("--env", train_args.env, "Environment name (pendulum | masspoint)")
      ->required();
  train_cmd->add_option("--steps", train_args.steps, "Environment steps per seed");
  train_cmd->add_option("--seeds", train_args.seeds, "Comma-separated seeds");
  train_cmd->add_option("--config", train_args.config_file,
                        "JSON config applied over the defaults");
  train_cmd->add_option("--checkpoint-every", train_args.checkpoint_every,
                        "Checkpoint period in env steps (0 = off)");
  train_cmd->add_option("--out", train_args.out, "Output prefix")->required();

  std::map<std::string, CLI::Option*> hyper_opts;
  hyper_opts["gamma"] = train_cmd->add_option("--gamma", hyper.gamma, "Discount factor");
  hyper_opts["batch_size"] =
      train_cmd->add_option("--batch-size", hyper.batch_size, "Minibatch size");
  hyper_opts["critic_lr"] =
      train_cmd->add_option("--critic-lr", hyper.critic_lr, "Critic step size");
  hyper_opts["actor_lr"] =
      train_cmd->add_option("--actor-lr", hyper.actor_lr, "Actor step size");
  hyper_opts["eta"] =
      train_cmd->add_option("--eta", hyper.eta, "Linesearch alignment threshold");
  hyper_opts["update_every"] =
      train_cmd->add_option("--update-every", hyper.update_every, "Steps between update rounds");
  hyper_opts["update_after"] =
      train_cmd->add_option("--update-after", hyper.update_after, "First update step");
  hyper_opts["start_steps"] =
      train_cmd->add_option("--start-steps", hyper.start_steps, "Uniform warmup steps");
  hyper_opts["noise_std"] =
      train_cmd->add_option("--noise-std", hyper.noise_std, "Exploration noise stddev");
  hyper_opts["polyak"] =
      train_cmd->add_option("--polyak", hyper.polyak, "Target averaging factor");
  hyper_opts["linesearch_decay"] = train_cmd->add_option(
      "--linesearch-decay", hyper.linesearch_decay, "Backtracking decay factor");
  hyper_opts["max_backtracks"] = train_cmd->add_option(
      "--max-backtracks", hyper.max_backtracks, "Backtracks before skipping an update");
  hyper_opts["pinv_rel_tol"] = train_cmd->add_option(
      "--pinv-rel-tol", hyper.pinv_rel_tol, "Relative eigenvalue cutoff for the solve");
  hyper_opts["hidden"] =
      train_cmd->add_option("--hidden", hyper.hidden, "Comma-separated hidden widths");
  hyper_opts["activation"] =
      train_cmd->add_option("--activation", hyper.activation, "Network activation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (ntk_cmd->parsed()) return run_ntk(ntk_args);
    if (tab_cmd->parsed()) return run_tabular(tab_args);
    if (train_cmd->parsed()) {
      std::map<std::string, bool> set_flags;
      for (const auto& [name, opt] : hyper_opts) set_flags[name] = opt->count() > 0;
      return run_train(train_args, hyper, set_flags);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.emplace_back("preqn-lab");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& s : full) argv.push_back(s.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace preqn
