#ifndef IMH_EXPERIMENTS_HPP
#define IMH_EXPERIMENTS_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "imh/commands.hpp"

namespace imh {

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw Error("pearson: bad input lengths");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("pearson: degenerate input");
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Built-in experiment configurations. The synthetic setup throughout:
// target 0.5 N(-2, 0.5) + 0.5 N(2, 0.7) given as 5000 samples, 3-layer MLP
// with 100 hidden units, Adam for 1000 iterations. b = 0 for these
// density-ratio training runs; the clamp matters for the bound machinery,
// not for ratio estimation.
// ---------------------------------------------------------------------------

inline ExperimentConfig appendix_g_independent_config(LossKind loss, std::uint64_t seed,
                                                      const std::string& out_dir) {
  ExperimentConfig c;
  c.target = two_gaussian_target();
  c.proposal = ProposalKernel::independent(DensitySpec::gaussian(0.0, 2.0));
  c.discriminator.head = loss == LossKind::kCCE ? HeadKind::kFactorizedIndependent
                                                : HeadKind::kPairwiseLogitDiff;
  c.discriminator.b = 0.0;
  c.loss = loss;
  c.training.seed = seed;
  c.output_dir = out_dir;
  return c;
}

inline ExperimentConfig appendix_g_markov_config(LossKind loss, std::uint64_t seed,
                                                 const std::string& out_dir) {
  ExperimentConfig c;
  c.target = two_gaussian_target();
  c.proposal = ProposalKernel::random_walk(1.0);
  c.discriminator.head = HeadKind::kPairwiseLogitDiff;
  c.discriminator.b = 0.0;
  c.loss = loss;
  c.training.seed = seed;
  c.output_dir = out_dir;
  return c;
}

inline ExperimentConfig latent_spherical_config(std::uint64_t seed, const std::string& out_dir) {
  ExperimentConfig c;
  c.target = two_gaussian_target();
  const double third_pi = kTwoPi / 6.0;
  c.proposal = ProposalKernel::latent_spherical(third_pi, 1, GeneratorMap::identity(1));
  c.discriminator.head = HeadKind::kPairwiseLogitDiff;
  c.discriminator.b = 0.0;
  c.loss = LossKind::kMCE;
  c.training.seed = seed;
  c.output_dir = out_dir;
  return c;
}

/// The probe grid for the unnormalized-density check: 101 points across the
/// region holding essentially all target mass.
inline std::vector<Point> probe_grid() {
  std::vector<Point> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back({-4.0 + 8.0 * i / 100.0});
  return grid;
}

struct ExperimentResult {
  nlohmann::json report;
  std::string out_dir;
};

/// train + eval + (optionally) a filtered chain for one config; returns the
/// per-run summary and appends metric curves to the run directory.
inline nlohmann::json run_training_block(const ExperimentConfig& cfg,
                                         std::size_t final_chain_steps = 0) {
  TrainResult tr = cmd_train(cfg);
  std::vector<EvalRow> rows = cmd_eval(cfg, tr.checkpoints);
  nlohmann::json summary{{"loss", loss_name(cfg.loss)},
                         {"aborted", tr.aborted},
                         {"snapshots", tr.checkpoints.size()},
                         {"test_tv_initial", rows.front().test_tv_mean},
                         {"test_tv_final", rows.back().test_tv_mean},
                         {"test_tv_final_spread", rows.back().test_tv_spread},
                         {"rejection_rate_final", rows.back().rejection_rate},
                         {"final_checkpoint", tr.checkpoints.back()}};
  if (final_chain_steps > 0) {
    SampleResult s = cmd_sample(cfg, tr.checkpoints.back(), final_chain_steps, "filtered");
    summary["filtered_hist_tv"] = s.hist_tv;
    summary["filtered_rejection_rate"] = s.stats.rejection_rate;
  }
  return summary;
}

/// The three reproducible end-to-end experiments.
inline ExperimentResult cmd_experiment(const std::string& name, const std::string& out_base,
                                       std::uint64_t seed) {
  ExperimentResult result;
  result.out_dir = out_base;
  ensure_dir(out_base);
  nlohmann::json report;
  report["name"] = name;
  report["seed"] = seed;

  if (name == "appendix-g-independent") {
    const auto baseline =
        tv_continuous(two_gaussian_target(), DensitySpec::gaussian(0.0, 2.0));
    report["proposal_analytic_tv"] = baseline.tv;
    nlohmann::json runs = nlohmann::json::array();
    for (LossKind loss : {LossKind::kCCE, LossKind::kUB, LossKind::kLT}) {
      ExperimentConfig cfg =
          appendix_g_independent_config(loss, seed, out_base + "/" + loss_name(loss));
      const std::size_t chain = loss == LossKind::kCCE ? 100000 : 0;
      runs.push_back(run_training_block(cfg, chain));
    }
    report["runs"] = runs;
  } else if (name == "appendix-g-markov") {
    nlohmann::json runs = nlohmann::json::array();
    for (LossKind loss : {LossKind::kUB, LossKind::kMCE}) {
      ExperimentConfig cfg =
          appendix_g_markov_config(loss, seed, out_base + "/" + loss_name(loss));
      nlohmann::json summary = run_training_block(cfg, loss == LossKind::kUB ? 100000 : 0);

      // unnormalized-density probe off the trained pairwise discriminator
      Checkpoint cp = load_checkpoint(summary["final_checkpoint"].get<std::string>());
      auto grid = probe_grid();
      auto probe = unnormalized_density_probe(loss, cp.disc, {0.0}, grid);
      const double logp0 = cfg.target.log_density({0.0});
      std::vector<double> log_probe, logp_diff;
      CsvWriter csv(cfg.output_dir + "/probe.csv");
      csv.row({"x", "log_probe", "log_p_diff"});
      for (std::size_t i = 0; i < grid.size(); ++i) {
        log_probe.push_back(std::log(probe[i]));
        logp_diff.push_back(cfg.target.log_density(grid[i]) - logp0);
        csv.row({format_double(grid[i][0]), format_double(log_probe.back()),
                 format_double(logp_diff.back())});
      }
      summary["probe_pearson"] = pearson(log_probe, logp_diff);
      runs.push_back(summary);
    }
    report["runs"] = runs;
  } else if (name == "latent-spherical") {
    ExperimentConfig cfg = latent_spherical_config(seed, out_base + "/mce");
    nlohmann::json summary = run_training_block(cfg, 100000);

    // unfiltered baseline: the same kernel with an untrained discriminator
    // (zero output layer), which accepts every move
    ExperimentConfig raw = cfg;
    raw.training.iterations = 0;
    raw.output_dir = out_base + "/unfiltered";
    TrainResult tr0 = cmd_train(raw);
    SampleResult s0 = cmd_sample(raw, tr0.checkpoints.front(), 100000, "unfiltered");
    report["unfiltered_hist_tv"] = s0.hist_tv;
    report["unfiltered_rejection_rate"] = s0.stats.rejection_rate;
    report["run"] = summary;
  } else {
    throw Error("unknown experiment '" + name + "'");
  }

  write_text(out_base + "/report.json", report.dump(2) + "\n");
  result.report = report;
  return result;
}

}  // namespace imh

#endif
