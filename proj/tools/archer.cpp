// archer: train, evaluate and plot goal-conditioned DDPG agents.
//
//   archer run --config cfg.json [--env pointgoal] [--lambda-h 0.5] [--seeds 1,2,3] [--out dir]
//   archer eval --checkpoint runs/x/seed_1.ckpt [--episodes 100] [--seed 0]
//   archer plot --in runs/x/averaged.csv --out curve.svg

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "archer/harness.hpp"

namespace {

struct RunArgs {
  std::string config;
  std::optional<std::string> env, reward, strategy, out;
  std::optional<double> lambda_r, lambda_h;
  std::optional<std::size_t> k, cycles;
  std::vector<std::uint64_t> seeds;
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::size_t episodes = 100;
  std::uint64_t seed = 0;
};

struct PlotArgs {
  std::string in, out;
};

int do_run(const RunArgs& a) {
  using namespace archer;
  nlohmann::json j;
  {
    const ExperimentConfig base = ExperimentConfig::load(a.config);
    j = base.to_json();
  }
  if (a.env) j["env"] = *a.env;
  if (a.reward) j["reward"] = *a.reward;
  if (a.strategy) j["strategy"] = *a.strategy;
  if (a.out) j["output_dir"] = *a.out;
  if (a.lambda_r) j["lambda_r"] = *a.lambda_r;
  if (a.lambda_h) j["lambda_h"] = *a.lambda_h;
  if (a.k) j["k"] = *a.k;
  if (a.cycles) j["cycles"] = *a.cycles;
  if (!a.seeds.empty()) j["seeds"] = a.seeds;
  const ExperimentConfig config = ExperimentConfig::from_json(j);
  const TradeOffClass cls = config.validate();
  if (config.output_dir.empty()) throw ConfigError("output_dir must not be empty");

  if (!a.quiet) {
    std::fprintf(stderr, "env=%s reward=%s strategy=%s lambda_r=%g lambda_h=%g (%s) cycles=%zu seeds=%zu -> %s\n",
                 std::string(to_string(config.env)).c_str(), std::string(to_string(config.reward)).c_str(),
                 std::string(to_string(config.strategy)).c_str(), config.tradeoff.lambda_r,
                 config.tradeoff.lambda_h, std::string(to_string(cls)).c_str(), config.cycles, config.seeds.size(),
                 config.output_dir.c_str());
  }
  RunOptions options;
  if (!a.quiet) {
    options.progress = [&](std::uint64_t seed, std::size_t cycle, double success) {
      if (cycle % 10 == 0 || cycle == config.cycles) {
        std::fprintf(stderr, "seed %llu cycle %zu/%zu success %.2f\n", static_cast<unsigned long long>(seed), cycle,
                     config.cycles, success);
      }
    };
  }
  const ExperimentResult result = run_experiment(config, options);
  for (const auto& r : result.records) {
    if (r.error) std::fprintf(stderr, "seed %llu failed: %s\n", static_cast<unsigned long long>(r.seed), r.error->c_str());
  }
  std::cout << result.summary.dump(2) << '\n';
  return result.all_failed() ? 1 : 0;
}

int do_eval(const EvalArgs& a) {
  using namespace archer;
  const LoadedCheckpoint ckpt = load_checkpoint(a.checkpoint);
  if (!ckpt.metadata.contains("config")) throw FormatError(a.checkpoint + ".json has no config entry");
  const ExperimentConfig config = ExperimentConfig::from_json(ckpt.metadata.at("config"));
  Rng rng(mix_seed(a.seed));
  const double rate = evaluate(config.env_spec(), ckpt.agent, a.episodes, rng);
  nlohmann::json out;
  out["checkpoint"] = a.checkpoint;
  out["episodes"] = a.episodes;
  out["success_rate"] = rate;
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-conditioned DDPG with weighted hindsight replay"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "train one agent per seed and write CSV/JSON/SVG artifacts");
  run_cmd->add_option("--config", run.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--env", run.env, "reacher | pointgoal");
  run_cmd->add_option("--reward", run.reward, "binary_negative | binary_positive | shaped");
  run_cmd->add_option("--lambda-r", run.lambda_r, "weight on real rewards");
  run_cmd->add_option("--lambda-h", run.lambda_h, "weight on hindsight rewards");
  run_cmd->add_option("--strategy", run.strategy, "final | future | none");
  run_cmd->add_option("--k", run.k, "hindsight goals per step for the future strategy");
  run_cmd->add_option("--cycles", run.cycles, "training cycles per seed");
  run_cmd->add_option("--seeds", run.seeds, "comma-separated seed list")->delimiter(',');
  run_cmd->add_option("--out", run.out, "output directory");
  run_cmd->add_flag("--quiet", run.quiet, "no progress output");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "noise-free success rate of a saved checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint written by run")->required()->check(
      CLI::ExistingFile);
  eval_cmd->add_option("--episodes", eval.episodes, "evaluation episodes")->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed, "seed for goal sampling")->capture_default_str();

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "render the success-rate columns of a CSV as SVG");
  plot_cmd->add_option("--in", plot.in, "input CSV")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot.out, "output SVG")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return do_run(run);
    if (*eval_cmd) return do_eval(eval);
    if (*plot_cmd) {
      archer::plot_csv(plot.in, plot.out);
      return 0;
    }
  } catch (const archer::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
