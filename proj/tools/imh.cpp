#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "imh/experiments.hpp"

namespace {

imh::ExperimentConfig load_config(const std::string& path, std::uint64_t* seed,
                                  const std::string& out_override) {
  auto cfg = imh::ExperimentConfig::from_json(nlohmann::json::parse(imh::read_text(path)));
  if (seed) cfg.training.seed = *seed;
  if (!out_override.empty()) cfg.output_dir = out_override;
  return cfg;
}

/// Wall-clock note kept out of the deterministic outputs.
void write_sidecar(const std::string& dir, double seconds) {
  imh::ensure_dir(dir);
  nlohmann::json j{{"wall_seconds", seconds},
                   {"finished_unix_ms",
                    std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count()}};
  imh::write_text(dir + "/sidecar.json", j.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"implicit Metropolis-Hastings toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, chain_name = "chain", replay_path;
  std::string experiment_name, report_path;
  std::vector<std::string> checkpoints, suites;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t steps = 100000;
  long count = 1000;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
      seed_set = true;
    });
  };

  auto* train = app.add_subcommand("train", "train the configured discriminator");
  train->add_option("--config", config_path, "experiment config JSON")->required();
  train->add_option("--out", out_dir, "output directory override");
  add_seed(train);

  auto* sample = app.add_subcommand("sample", "run the configured sampler");
  sample->add_option("--config", config_path)->required();
  sample->add_option("--checkpoint", checkpoint, "discriminator checkpoint (.imhw)");
  sample->add_option("--n", steps, "chain length");
  sample->add_option("--name", chain_name, "chain file stem");
  sample->add_option("--out", out_dir);
  add_seed(sample);

  auto* eval = app.add_subcommand("eval", "per-snapshot metrics");
  eval->add_option("--config", config_path)->required();
  eval->add_option("--checkpoints", checkpoints, "snapshot paths, iteration order")->required();
  eval->add_option("--out", out_dir);
  add_seed(eval);

  auto* verify = app.add_subcommand("verify", "randomized bound-property suites");
  verify->add_option("--suite", suites, "suite names (default: all)");
  verify->add_option("--count", count, "instances per suite");
  verify->add_option("--out", report_path, "report JSON path");
  verify->add_option("--replay", replay_path, "re-check a dumped instance");
  add_seed(verify);

  auto* experiment = app.add_subcommand("experiment", "built-in end-to-end experiments");
  experiment
      ->add_option("--name", experiment_name,
                   "appendix-g-independent | appendix-g-markov | latent-spherical")
      ->required();
  experiment->add_option("--out", out_dir);
  add_seed(experiment);

  CLI11_PARSE(app, argc, argv);

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  try {
    if (*train) {
      auto cfg = load_config(config_path, seed_set ? &seed : nullptr, out_dir);
      auto result = imh::cmd_train(cfg);
      write_sidecar(cfg.output_dir, elapsed());
      std::cout << (result.aborted ? "aborted at iteration " : "trained to iteration ")
                << result.last_iteration << ", " << result.checkpoints.size()
                << " snapshots in " << cfg.output_dir << "\n";
      return result.aborted ? 1 : 0;
    }
    if (*sample) {
      auto cfg = load_config(config_path, seed_set ? &seed : nullptr, out_dir);
      auto result = imh::cmd_sample(cfg, checkpoint, steps, chain_name);
      write_sidecar(cfg.output_dir, elapsed());
      std::cout << "chain " << result.csv_path
                << " rejection_rate=" << result.stats.rejection_rate
                << " hist_tv=" << result.hist_tv << "\n";
      return 0;
    }
    if (*eval) {
      auto cfg = load_config(config_path, seed_set ? &seed : nullptr, out_dir);
      auto rows = imh::cmd_eval(cfg, checkpoints);
      write_sidecar(cfg.output_dir, elapsed());
      std::cout << "wrote " << rows.size() << " rows to " << cfg.output_dir
                << "/metrics.csv\n";
      return 0;
    }
    if (*verify) {
      if (!replay_path.empty()) {
        auto r = imh::cmd_replay(replay_path);
        std::cout << r.report.dump(2) << "\n";
        if (!r.valid) {
          std::cout << "instance rejected at validation\n";
          return 2;
        }
        return r.ok ? 0 : 1;
      }
      auto report = imh::cmd_verify(suites, seed, count);
      const std::string text = report.to_json().dump(2) + "\n";
      if (!report_path.empty()) imh::write_text(report_path, text);
      for (const auto& s : report.suites)
        std::cout << s.name << ": " << (s.violations == 0 ? "pass" : "FAIL") << " ("
                  << s.instances << " instances, " << s.violations << " violations)\n";
      return report.ok() ? 0 : 1;
    }
    if (*experiment) {
      if (out_dir.empty()) out_dir = "out/" + experiment_name;
      auto result = imh::cmd_experiment(experiment_name, out_dir, seed_set ? seed : 1);
      write_sidecar(out_dir, elapsed());
      std::cout << result.report.dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
