#ifndef IMH_CONFIG_HPP
#define IMH_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "imh/bounds.hpp"
#include "imh/core.hpp"
#include "imh/discriminator.hpp"
#include "imh/distributions.hpp"
#include "imh/losses.hpp"
#include "imh/proposals.hpp"
#include "imh/sampler.hpp"

namespace imh {

struct DiscriminatorConfig {
  HeadKind head = HeadKind::kPairwiseLogitDiff;
  ScorerKind scorer = ScorerKind::kMlp;
  std::vector<int> hidden = {100, 100};
  double b = 0.0;
  std::size_t states = 0;  // table scorers only

  Discriminator build(std::size_t input_dim, std::uint64_t seed) const {
    if (scorer == ScorerKind::kMlp) {
      std::vector<int> sizes;
      sizes.push_back(static_cast<int>(input_dim));
      for (int h : hidden) sizes.push_back(h);
      sizes.push_back(1);
      return Discriminator::mlp(head, std::move(sizes), b, seed);
    }
    return Discriminator::table_scorer(head, states, b);
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"head", head_name(head)},
                          {"scorer", scorer == ScorerKind::kMlp ? "mlp" : "table"},
                          {"hidden", hidden},
                          {"b", b},
                          {"states", states}};
  }

  static DiscriminatorConfig from_json(const nlohmann::json& j) {
    DiscriminatorConfig c;
    c.head = head_from_name(j.at("head").get<std::string>());
    c.scorer = j.at("scorer").get<std::string>() == "mlp" ? ScorerKind::kMlp : ScorerKind::kTable;
    c.hidden = j.at("hidden").get<std::vector<int>>();
    c.b = j.at("b").get<double>();
    c.states = j.at("states").get<std::size_t>();
    return c;
  }
};

struct TrainingConfig {
  long iterations = 1000;
  int batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  long snapshot_interval = 200;  // five in-training metric evaluations
  std::size_t dataset_size = 5000;

  nlohmann::json to_json() const {
    return nlohmann::json{{"iterations", iterations},
                          {"batch_size", batch_size},
                          {"learning_rate", learning_rate},
                          {"seed", seed},
                          {"snapshot_interval", snapshot_interval},
                          {"dataset_size", dataset_size}};
  }

  static TrainingConfig from_json(const nlohmann::json& j) {
    TrainingConfig c;
    c.iterations = j.at("iterations").get<long>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.snapshot_interval = j.at("snapshot_interval").get<long>();
    c.dataset_size = j.at("dataset_size").get<std::size_t>();
    return c;
  }
};

struct EvaluationConfig {
  std::size_t sample_count = 100000;  // Monte-Carlo draws per test-TV repetition
  int repetitions = 5;
  std::size_t chain_length = 20000;  // filtered chain per snapshot
  TestTvMethod method = TestTvMethod::kMonteCarlo;

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"sample_count", sample_count},
        {"repetitions", repetitions},
        {"chain_length", chain_length},
        {"method", method == TestTvMethod::kMonteCarlo ? "monte-carlo" : "quadrature-2d"}};
  }

  static EvaluationConfig from_json(const nlohmann::json& j) {
    EvaluationConfig c;
    c.sample_count = j.at("sample_count").get<std::size_t>();
    c.repetitions = j.at("repetitions").get<int>();
    c.chain_length = j.at("chain_length").get<std::size_t>();
    c.method = j.at("method").get<std::string>() == "quadrature-2d" ? TestTvMethod::kQuadrature2d
                                                                    : TestTvMethod::kMonteCarlo;
    return c;
  }
};

struct ExperimentConfig {
  DensitySpec target = two_gaussian_target();
  ProposalKernel proposal = ProposalKernel::random_walk(1.0);
  DiscriminatorConfig discriminator;
  LossKind loss = LossKind::kUB;
  TrainingConfig training;
  EvaluationConfig evaluation;
  std::string sampler_rule = "auto";  // auto | analytic | factorized | pairwise
  std::string output_dir = "out";

  void validate() const {
    if (training.iterations < 0) throw Error("config: iterations must be >= 0");
    if (training.snapshot_interval < 1) throw Error("config: snapshot interval must be >= 1");
    if (training.iterations % training.snapshot_interval != 0)
      throw Error("config: snapshot interval must divide the iteration count");
    if (training.batch_size < 1) throw Error("config: batch size must be >= 1");
    if (training.dataset_size < 1) throw Error("config: dataset size must be >= 1");
    check_loss_head(loss, discriminator.head);
    if (sampler_rule != "auto") rule_from_name(sampler_rule);
  }

  RuleKind resolved_rule() const {
    if (sampler_rule != "auto") return rule_from_name(sampler_rule);
    return discriminator.head == HeadKind::kFactorizedIndependent ? RuleKind::kFactorized
                                                                  : RuleKind::kPairwise;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"target", target.to_json()},
                          {"proposal", proposal.to_json()},
                          {"discriminator", discriminator.to_json()},
                          {"loss", loss_name(loss)},
                          {"training", training.to_json()},
                          {"evaluation", evaluation.to_json()},
                          {"sampler_rule", sampler_rule},
                          {"output_dir", output_dir}};
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.target = DensitySpec::from_json(j.at("target"));
    c.proposal = ProposalKernel::from_json(j.at("proposal"));
    c.discriminator = DiscriminatorConfig::from_json(j.at("discriminator"));
    c.loss = loss_from_name(j.at("loss").get<std::string>());
    c.training = TrainingConfig::from_json(j.at("training"));
    c.evaluation = EvaluationConfig::from_json(j.at("evaluation"));
    c.sampler_rule = j.at("sampler_rule").get<std::string>();
    c.output_dir = j.at("output_dir").get<std::string>();
    c.validate();
    return c;
  }
};

}  // namespace imh

#endif
