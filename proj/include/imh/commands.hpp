#ifndef IMH_COMMANDS_HPP
#define IMH_COMMANDS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "imh/bounds.hpp"
#include "imh/config.hpp"
#include "imh/core.hpp"
#include "imh/discriminator.hpp"
#include "imh/io.hpp"
#include "imh/losses.hpp"
#include "imh/sampler.hpp"

namespace imh {

// Seed streams. Every randomized stage derives its own stream from the
// config seed, so commands are pure functions of (config, seed).
inline constexpr std::uint64_t kStreamDataset = 11;
inline constexpr std::uint64_t kStreamInit = 12;
inline constexpr std::uint64_t kStreamTrain = 13;
inline constexpr std::uint64_t kStreamChain = 14;
inline constexpr std::uint64_t kStreamEval = 15;
inline constexpr std::uint64_t kStreamLossEval = 16;

struct Dataset {
  SampleSet samples;
  std::vector<Point> latents;  // aligned with samples for latent-spherical proposals
};

inline Dataset make_dataset(const ExperimentConfig& cfg) {
  Dataset ds;
  ds.samples = cfg.target.sample(cfg.training.dataset_size,
                                 derive_seed(cfg.training.seed, kStreamDataset));
  if (cfg.proposal.kind() == ProposalKind::kLatentSpherical) {
    ds.latents.reserve(ds.samples.size());
    for (const auto& x : ds.samples.points)
      ds.latents.push_back(invert_generator(cfg.proposal.generator(), x).z);
  }
  return ds;
}

inline PairBatch draw_pair_batch(const ExperimentConfig& cfg, const Dataset& ds, int size,
                                 Rng& rng) {
  PairBatch batch;
  batch.xs.reserve(size);
  batch.ys.reserve(size);
  for (int i = 0; i < size; ++i) {
    const std::size_t idx = rng.next_index(ds.samples.size());
    const Point& x = ds.samples.points[idx];
    const Point& zx = ds.latents.empty() ? Point{} : ds.latents[idx];
    batch.xs.push_back(x);
    batch.ys.push_back(cfg.proposal.propose(x, zx, rng).x);
  }
  return batch;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainResult {
  std::vector<std::string> checkpoints;  // snapshot paths, iteration order
  std::vector<long> iterations;
  bool aborted = false;
  long last_iteration = 0;
};

inline std::string checkpoint_path(const std::string& out_dir, long iteration) {
  return out_dir + "/weights/iter_" + std::to_string(iteration) + ".imhw";
}

/// Trains the configured discriminator, snapshotting at the interval.
/// A non-finite loss or gradient aborts the run; the last good snapshot is
/// retained and the abort is recorded in the loss CSV sidecar.
inline TrainResult cmd_train(const ExperimentConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.output_dir);
  ensure_dir(cfg.output_dir + "/weights");
  write_text(cfg.output_dir + "/config.json", cfg.to_json().dump(2) + "\n");

  Dataset ds = make_dataset(cfg);
  const std::uint64_t seed = cfg.training.seed;
  Discriminator disc =
      cfg.discriminator.build(cfg.target.dim(), derive_seed(seed, kStreamInit));
  AdamState adam = AdamState::create(disc.params().size(), cfg.training.learning_rate);
  Rng rng(derive_seed(seed, kStreamTrain));

  TrainResult result;
  auto snapshot = [&](long iter) {
    const std::string path = checkpoint_path(cfg.output_dir, iter);
    save_checkpoint(disc, path, seed, static_cast<std::uint64_t>(iter));
    result.checkpoints.push_back(path);
    result.iterations.push_back(iter);
  };
  snapshot(0);

  CsvWriter loss_csv(cfg.output_dir + "/loss.csv");
  loss_csv.row({"iteration", "loss", "term_a", "term_b"});
  for (long it = 1; it <= cfg.training.iterations; ++it) {
    PairBatch batch = draw_pair_batch(cfg, ds, cfg.training.batch_size, rng);
    try {
      LossResult res = loss_eval(cfg.loss, disc, batch);
      check_finite(res.loss, "training loss");
      adam_step(disc.params(), res.grad, adam);
      loss_csv.row({std::to_string(it), format_double(res.loss), format_double(res.term_a),
                    format_double(res.term_b)});
    } catch (const Error&) {
      result.aborted = true;
      break;
    }
    result.last_iteration = it;
    if (it % cfg.training.snapshot_interval == 0) snapshot(it);
  }
  return result;
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

struct SampleResult {
  Chain chain;
  ChainStats stats;
  double hist_tv = std::numeric_limits<double>::quiet_NaN();
  std::string csv_path;
};

inline void write_chain_csv(const Chain& chain, const std::string& path) {
  CsvWriter csv(path);
  const std::size_t dim = chain.points.empty() ? 0 : chain.points.front().size();
  const std::size_t ldim = chain.latents.empty() ? 0 : chain.latents.front().size();
  std::vector<std::string> header = {"step", "accepted"};
  for (std::size_t i = 0; i < dim; ++i) header.push_back("coord_" + std::to_string(i));
  for (std::size_t i = 0; i < ldim; ++i) header.push_back("latent_" + std::to_string(i));
  csv.row(header);
  for (std::size_t s = 0; s < chain.size(); ++s) {
    std::vector<std::string> row = {std::to_string(s),
                                    chain.accepted[s] ? std::string("1") : std::string("0")};
    for (double v : chain.points[s]) row.push_back(format_double(v));
    if (ldim) {
      for (double v : chain.latents[s]) row.push_back(format_double(v));
    }
    csv.row(row);
  }
}

/// Runs the configured sampler from a checkpoint (or analytically, when the
/// resolved rule needs no discriminator) and dumps the chain plus stats.
inline SampleResult cmd_sample(const ExperimentConfig& cfg, const std::string& checkpoint,
                               std::size_t n, const std::string& name) {
  cfg.validate();
  ensure_dir(cfg.output_dir);
  ensure_dir(cfg.output_dir + "/chains");

  const RuleKind rk = cfg.resolved_rule();
  Checkpoint cp;
  AcceptanceRule rule;
  if (rk == RuleKind::kAnalytic) {
    rule = AcceptanceRule::analytic(cfg.target, cfg.proposal);
  } else {
    if (checkpoint.empty()) throw Error("cmd_sample: this rule needs a checkpoint");
    cp = load_checkpoint(checkpoint);
    rule = rk == RuleKind::kFactorized ? AcceptanceRule::factorized(cp.disc)
                                       : AcceptanceRule::pairwise(cp.disc);
  }

  Dataset ds = make_dataset(cfg);
  const Point& init = ds.samples.points.front();
  const Point init_latent = ds.latents.empty() ? Point{} : ds.latents.front();

  SampleResult out;
  out.chain = run_chain(rule, cfg.proposal, init, init_latent, n,
                        derive_seed(cfg.training.seed, kStreamChain));
  out.stats = chain_stats(out.chain);
  if (cfg.target.kind() != DensityKind::kFiniteCategorical)
    out.hist_tv = histogram_tv(out.chain.points, cfg.target);
  out.csv_path = cfg.output_dir + "/chains/" + name + ".csv";
  write_chain_csv(out.chain, out.csv_path);

  nlohmann::json stats{{"rejection_rate", out.stats.rejection_rate},
                       {"unique_count", out.stats.unique_count},
                       {"autocorr", out.stats.autocorr},
                       {"hist_tv", out.hist_tv},
                       {"steps", n},
                       {"rule", rule_name(rk)}};
  write_text(cfg.output_dir + "/chains/" + name + "_stats.json", stats.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalRow {
  long iteration = 0;
  double loss = 0.0;
  double test_tv_mean = std::numeric_limits<double>::quiet_NaN();
  double test_tv_spread = std::numeric_limits<double>::quiet_NaN();
  double rejection_rate = 0.0;
  double hist_tv = std::numeric_limits<double>::quiet_NaN();
};

/// Per-snapshot metrics: loss on a fixed held-out batch, the averaged
/// density-ratio error (mean and sample standard deviation over the
/// configured repetitions), and filtered-chain statistics.
inline std::vector<EvalRow> cmd_eval(const ExperimentConfig& cfg,
                                     const std::vector<std::string>& checkpoints) {
  cfg.validate();
  if (checkpoints.empty()) throw Error("cmd_eval: need at least one checkpoint");
  ensure_dir(cfg.output_dir);

  Dataset ds = make_dataset(cfg);
  Rng loss_rng(derive_seed(cfg.training.seed, kStreamLossEval));
  const PairBatch eval_batch = draw_pair_batch(cfg, ds, 1024, loss_rng);
  const bool tv_available = cfg.proposal.has_density() &&
                            cfg.target.kind() != DensityKind::kFiniteCategorical;

  std::vector<EvalRow> rows;
  for (const auto& path : checkpoints) {
    Checkpoint cp = load_checkpoint(path);
    EvalRow row;
    row.iteration = static_cast<long>(cp.iteration);
    row.loss = loss_eval(cfg.loss, cp.disc, eval_batch, /*want_grad=*/false).loss;

    if (tv_available) {
      auto dre = [&](const Point& x, const Point& y) {
        return dre_extract(cfg.loss, cp.disc, x, y);
      };
      if (cfg.evaluation.method == TestTvMethod::kQuadrature2d) {
        auto r = test_tv_metric(cfg.target, cfg.proposal, dre, TestTvMethod::kQuadrature2d,
                                QuadratureGrid{10.0, 401});
        row.test_tv_mean = r.value;
        row.test_tv_spread = 0.0;
      } else {
        std::vector<double> vals;
        const std::uint64_t base = derive_seed(cfg.training.seed, kStreamEval);
        for (int r = 0; r < cfg.evaluation.repetitions; ++r) {
          auto res = test_tv_metric(cfg.target, cfg.proposal, dre, TestTvMethod::kMonteCarlo,
                                    {}, cfg.evaluation.sample_count, derive_seed(base, r));
          vals.push_back(res.value);
        }
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        double sq = 0.0;
        for (double v : vals) sq += (v - mean) * (v - mean);
        row.test_tv_mean = mean;
        row.test_tv_spread = vals.size() > 1 ? std::sqrt(sq / (vals.size() - 1)) : 0.0;
      }
    }

    AcceptanceRule rule = cfg.resolved_rule() == RuleKind::kFactorized
                              ? AcceptanceRule::factorized(cp.disc)
                              : AcceptanceRule::pairwise(cp.disc);
    const Point& init = ds.samples.points.front();
    const Point init_latent = ds.latents.empty() ? Point{} : ds.latents.front();
    Chain chain = run_chain(rule, cfg.proposal, init, init_latent, cfg.evaluation.chain_length,
                            derive_seed(cfg.training.seed, kStreamChain));
    row.rejection_rate = chain.rejection_rate();
    if (cfg.target.kind() != DensityKind::kFiniteCategorical)
      row.hist_tv = histogram_tv(chain.points, cfg.target);
    rows.push_back(row);
  }

  CsvWriter csv(cfg.output_dir + "/metrics.csv");
  csv.row({"iteration", "loss", "test_tv_mean", "test_tv_spread", "rejection_rate", "hist_tv"});
  for (const auto& r : rows)
    csv.row({std::to_string(r.iteration), format_double(r.loss), format_double(r.test_tv_mean),
             format_double(r.test_tv_spread), format_double(r.rejection_rate),
             format_double(r.hist_tv)});
  return rows;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct SuiteResult {
  std::string name;
  long instances = 0;
  long violations = 0;
  std::vector<nlohmann::json> failures;  // first few offending instances

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"name", name}, {"instances", instances}, {"violations", violations},
        {"failures", failures}};
  }
};

struct VerifyReport {
  std::vector<SuiteResult> suites;
  std::uint64_t seed = 0;

  bool ok() const {
    for (const auto& s : suites)
      if (s.violations > 0) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json js = nlohmann::json::array();
    for (const auto& s : suites) js.push_back(s.to_json());
    return nlohmann::json{{"seed", seed}, {"ok", ok()}, {"suites", js}};
  }
};

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {"kernel",      "decay",       "one-step",
                                                 "pinsker",     "chain",       "exact-ratio",
                                                 "telescoping", "pointwise"};
  return names;
}

namespace detail {

inline void record_failure(SuiteResult& suite, const nlohmann::json& instance) {
  suite.violations += 1;
  if (suite.failures.size() < 5) suite.failures.push_back(instance);
}

inline std::vector<double> random_simplex(std::size_t k, Rng& rng) {
  std::vector<double> v(k);
  double sum = 0.0;
  for (auto& x : v) {
    x = -std::log(rng.next_unit_pos());
    sum += x;
  }
  for (auto& x : v) x /= sum;
  return v;
}

}  // namespace detail

/// Runs the randomized finite-instance property suites. Any violation makes
/// the report fail; offending instances are embedded for replay.
inline VerifyReport cmd_verify(std::vector<std::string> suites, std::uint64_t seed, long count) {
  if (suites.empty()) suites = verify_suite_names();
  VerifyReport report;
  report.seed = seed;

  for (const auto& name : suites) {
    SuiteResult suite;
    suite.name = name;
    Rng rng(derive_seed(seed, std::hash<std::string>{}(name)));

    if (name == "kernel") {
      for (long i = 0; i < count; ++i) {
        const std::size_t k = 2 + rng.next_index(5);
        auto inst = make_random_instance(k, 0.1, rng);
        auto t = assemble_kernel(inst);
        bool ok = true;
        for (std::size_t y = 0; y < k && ok; ++y) {
          double col = 0.0;
          for (std::size_t x = 0; x < k; ++x) {
            const double v = t[at(x, y, k)];
            col += v;
            if (x != y && !(v > 0.0)) ok = false;  // irreducibility witness
          }
          if (!(t[at(y, y, k)] > 0.0)) ok = false;  // aperiodicity witness
          if (std::abs(col - 1.0) > 1e-14) ok = false;
        }
        suite.instances += 1;
        if (!ok) detail::record_failure(suite, inst.to_json());
      }
    } else if (name == "decay") {
      for (long i = 0; i < count; ++i) {
        auto inst = make_random_instance(5, 0.1, rng);
        auto t = assemble_kernel(inst);
        auto t0 = detail::random_simplex(5, rng);
        auto check = geometric_decay_check(t, 5, t0, 50);
        suite.instances += 1;
        if (!check.ok) detail::record_failure(suite, inst.to_json());
      }
    } else if (name == "one-step") {
      for (long i = 0; i < count; ++i) {
        const std::size_t k = 2 + rng.next_index(5);
        auto inst = make_random_instance(k, 0.1, rng);
        auto r = one_step_bound_check(inst);
        suite.instances += 1;
        if (!r.ok) detail::record_failure(suite, inst.to_json());
      }
    } else if (name == "pinsker") {
      for (long i = 0; i < count; ++i) {
        const std::size_t k = 2 + rng.next_index(15);
        auto alpha = detail::random_simplex(k, rng);
        std::vector<double> f(k);
        for (auto& v : f) v = 0.01 + (2.0 - 0.01) * rng.next_unit();
        auto r = extended_pinsker(alpha, f);
        suite.instances += 1;
        if (!r.ok)
          detail::record_failure(suite, nlohmann::json{{"alpha", alpha}, {"f", f}});
      }
    } else if (name == "chain") {
      for (long i = 0; i < count; ++i) {
        const std::size_t k = 2 + rng.next_index(5);
        auto inst = make_random_instance(k, 0.1, rng);
        suite.instances += 1;
        try {
          final_bound(inst);
        } catch (const BoundViolation& v) {
          detail::record_failure(suite, v.instance);
        }
      }
    } else if (name == "exact-ratio") {
      for (long i = 0; i < count; ++i) {
        const std::size_t k = 2 + rng.next_index(5);
        auto base = make_random_instance(k, 0.1, rng);
        auto inst = exact_ratio_instance(base.p, base.q, k);
        auto t = assemble_kernel(inst);
        auto tinf = stationary_of_kernel(t, k);
        suite.instances += 1;
        if (tv_discrete(tinf, inst.p) > 1e-10) detail::record_failure(suite, inst.to_json());
      }
    } else if (name == "telescoping") {
      for (long i = 0; i < count; ++i) {
        const std::size_t k = 2 + rng.next_index(5);
        auto inst = make_random_instance(k, 0.1, rng);
        auto t = assemble_kernel(inst);
        auto t0 = detail::random_simplex(k, rng);
        auto t1 = apply_kernel(t, k, t0);
        auto tinf = stationary_of_kernel(t, k);
        const double be = inst.b * minorization_eps(inst.q, k).eps;
        const double lhs = tv_discrete(tinf, t0);
        const double rhs = tv_discrete(t1, t0) / be;
        suite.instances += 1;
        if (lhs > rhs + 1e-12 * std::max(1.0, rhs))
          detail::record_failure(suite, inst.to_json());
      }
    } else if (name == "pointwise") {
      for (double b : {0.05, 0.1, 0.5}) {
        for (long i = 0; i < count; ++i) {
          const double d_xy = b + (1.0 - b) * rng.next_unit();
          const double d_yx = b + (1.0 - b) * rng.next_unit();
          const double d_x = rng.next_unit();
          const double d_y = rng.next_unit();
          auto r = pointwise_inequalities(d_xy, d_yx, d_x, d_y, b);
          suite.instances += 1;
          if ((r.markov_checked && !r.markov_ok) || (r.indep_checked && !r.indep_ok)) {
            detail::record_failure(suite, nlohmann::json{{"d_xy", d_xy},
                                                         {"d_yx", d_yx},
                                                         {"d_x", d_x},
                                                         {"d_y", d_y},
                                                         {"b", b}});
          }
        }
      }
    } else {
      throw Error("unknown verify suite '" + name + "'");
    }
    report.suites.push_back(std::move(suite));
  }
  return report;
}

/// Re-runs the exact checks on a dumped instance. Instances that fail
/// validation are rejected up front and never counted as bound violations.
struct ReplayResult {
  bool valid = false;
  std::string validation_error;
  bool ok = false;
  nlohmann::json report;
};

inline ReplayResult cmd_replay(const std::string& path) {
  ReplayResult out;
  nlohmann::json j = nlohmann::json::parse(read_text(path));
  FiniteInstance inst;
  try {
    inst = FiniteInstance::from_json(j);
    out.valid = true;
  } catch (const Error& e) {
    out.validation_error = e.what();
    out.report = nlohmann::json{{"rejected", true}, {"error", out.validation_error}};
    return out;
  }
  auto one_step = one_step_bound_check(inst);
  bool chain_ok = true;
  nlohmann::json bound;
  try {
    bound = final_bound(inst).to_json();
  } catch (const BoundViolation& v) {
    chain_ok = false;
    bound = nlohmann::json{{"violation", std::string(v.what())}};
  }
  out.ok = one_step.ok && chain_ok;
  out.report = nlohmann::json{{"rejected", false},
                              {"one_step_ok", one_step.ok},
                              {"one_step_lhs", one_step.lhs},
                              {"one_step_rhs", one_step.rhs},
                              {"bound", bound},
                              {"ok", out.ok}};
  return out;
}

}  // namespace imh

#endif
