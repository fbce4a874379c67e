#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "flam/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"FLAM: stability-shaped reinforcement learning for articulated agents"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a policy from a config file");
  std::string train_config;
  std::vector<std::string> train_sets;
  train->add_option("--config", train_config, "config file")->required();
  train->add_option("--set", train_sets, "override: section.key=value");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_config;
  int eval_episodes = 5;
  uint64_t eval_seed = 0;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--config", eval_config,
                   "resolved config (default: sibling of the checkpoint)");
  eval->add_option("--episodes", eval_episodes, "episodes to run");
  eval->add_option("--seed", eval_seed, "base evaluation seed");

  // retarget
  auto* retarget = app.add_subcommand(
      "retarget", "map a robot trajectory file onto the human skeleton");
  std::string rt_in, rt_out, rt_robot = "planar_biped", rt_human = "human",
              rt_mapping = "planar_biped_human";
  retarget->add_option("--in", rt_in, "robot trajectory file")->required();
  retarget->add_option("--out", rt_out, "human trajectory file")->required();
  retarget->add_option("--robot", rt_robot, "robot skeleton (builtin name or file)");
  retarget->add_option("--human", rt_human, "human skeleton (builtin name or file)");
  retarget->add_option("--mapping", rt_mapping, "mapping (builtin name or file)");

  // stabilize
  auto* stabilize = app.add_subcommand(
      "stabilize", "reconstruct a human trajectory file into a stable one");
  std::string st_in, st_out, st_diag, st_skel = "human", st_config;
  std::vector<std::string> st_sets;
  stabilize->add_option("--in", st_in, "human trajectory file")->required();
  stabilize->add_option("--out", st_out, "output trajectory file")->required();
  stabilize->add_option("--diagnostics", st_diag,
                        "per-frame diagnostics csv (default <out>.diag.csv)");
  stabilize->add_option("--skeleton", st_skel, "skeleton (builtin name or file)");
  stabilize->add_option("--config", st_config, "config file for the stabilizer section");
  stabilize->add_option("--set", st_sets, "override: section.key=value");

  // sweep-lambda
  auto* sweep = app.add_subcommand("sweep-lambda",
                                   "train over a lambda x seed grid");
  std::string sw_config, sw_out;
  std::vector<std::string> sw_lambdas, sw_seeds;
  int sw_jobs = 1;
  sweep->add_option("--config", sw_config, "config file")->required();
  sweep->add_option("--lambdas", sw_lambdas, "lambda values")->delimiter(',');
  sweep->add_option("--seeds", sw_seeds, "seeds")->delimiter(',');
  sweep->add_option("--jobs", sw_jobs, "parallel runs");
  sweep->add_option("--out", sw_out, "sweep output directory");

  // inspect-config
  auto* inspect = app.add_subcommand("inspect-config",
                                     "print the fully resolved config");
  std::string in_config;
  std::vector<std::string> in_sets;
  inspect->add_option("--config", in_config, "config file")->required();
  inspect->add_option("--set", in_sets, "override: section.key=value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return flam::cli::kUsageError;
  }

  if (train->parsed())
    return flam::cli::cmd_train(train_config, train_sets, std::cout, std::cerr);
  if (eval->parsed())
    return flam::cli::cmd_eval(eval_ckpt, eval_config, eval_episodes, eval_seed,
                               std::cout, std::cerr);
  if (retarget->parsed())
    return flam::cli::cmd_retarget(rt_in, rt_out, rt_robot, rt_human,
                                   rt_mapping, std::cerr);
  if (stabilize->parsed()) {
    if (st_diag.empty()) st_diag = st_out + ".diag.csv";
    return flam::cli::cmd_stabilize(st_in, st_out, st_diag, st_skel, st_config,
                                    st_sets, std::cerr);
  }
  if (sweep->parsed())
    return flam::cli::cmd_sweep_lambda(sw_config, sw_lambdas, sw_seeds, sw_jobs,
                                       sw_out, std::cout, std::cerr);
  if (inspect->parsed())
    return flam::cli::cmd_inspect_config(in_config, in_sets, std::cout,
                                         std::cerr);
  return flam::cli::kUsageError;
}
