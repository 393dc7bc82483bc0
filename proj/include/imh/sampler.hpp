#ifndef IMH_SAMPLER_HPP
#define IMH_SAMPLER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "imh/core.hpp"
#include "imh/discriminator.hpp"
#include "imh/distributions.hpp"
#include "imh/proposals.hpp"
#include "imh/rng.hpp"

namespace imh {

enum class RuleKind { kAnalytic, kFactorized, kPairwise };

inline std::string rule_name(RuleKind r) {
  switch (r) {
    case RuleKind::kAnalytic: return "analytic";
    case RuleKind::kFactorized: return "factorized";
    case RuleKind::kPairwise: return "pairwise";
  }
  return "?";
}

inline RuleKind rule_from_name(const std::string& s) {
  if (s == "analytic") return RuleKind::kAnalytic;
  if (s == "factorized") return RuleKind::kFactorized;
  if (s == "pairwise") return RuleKind::kPairwise;
  throw Error("unknown acceptance rule '" + s + "'");
}

/// Which ratio enters the Metropolis test:
///   analytic    p(x)q(y|x) / (p(y)q(x|y))      needs both densities
///   factorized  d(x)(1-d(y)) / ((1-d(x))d(y))   independent proposals
///   pairwise    d(x,y) / d(y,x)                 any proposal
struct AcceptanceRule {
  RuleKind kind = RuleKind::kPairwise;
  const DensitySpec* target = nullptr;
  const ProposalKernel* proposal = nullptr;
  const Discriminator* disc = nullptr;

  static AcceptanceRule analytic(const DensitySpec& target, const ProposalKernel& proposal) {
    if (!proposal.has_density())
      throw Error("analytic rule needs a density-evaluable proposal");
    AcceptanceRule r;
    r.kind = RuleKind::kAnalytic;
    r.target = &target;
    r.proposal = &proposal;
    return r;
  }

  static AcceptanceRule factorized(const Discriminator& disc) {
    if (disc.head != HeadKind::kFactorizedIndependent)
      throw Error("factorized rule needs a factorized-independent discriminator");
    AcceptanceRule r;
    r.kind = RuleKind::kFactorized;
    r.disc = &disc;
    return r;
  }

  static AcceptanceRule pairwise(const Discriminator& disc) {
    AcceptanceRule r;
    r.kind = RuleKind::kPairwise;
    r.disc = &disc;
    return r;
  }
};

inline double acceptance_prob(const AcceptanceRule& rule, const Point& x, const Point& y) {
  double ratio = 0.0;
  switch (rule.kind) {
    case RuleKind::kAnalytic: {
      const double num = rule.target->density(x) * rule.proposal->density(y, x);
      const double den = rule.target->density(y) * rule.proposal->density(x, y);
      if (den <= 0.0) throw Error("acceptance_prob: zero denominator in analytic ratio");
      ratio = num / den;
      break;
    }
    case RuleKind::kFactorized: {
      const double dx = rule.disc->point_value(x);
      const double dy = rule.disc->point_value(y);
      const double num = dx * (1.0 - dy);
      const double den = (1.0 - dx) * dy;
      if (den <= 0.0) throw Error("acceptance_prob: zero denominator in factorized ratio");
      ratio = num / den;
      break;
    }
    case RuleKind::kPairwise: {
      const PairValues pv = disc_pair(*rule.disc, x, y);
      if (pv.d_yx <= 0.0) throw Error("acceptance_prob: zero denominator in pairwise ratio");
      ratio = pv.d_xy / pv.d_yx;
      break;
    }
  }
  check_finite(ratio, "acceptance_prob");
  return std::min(1.0, ratio);
}

/// Accepted states in order, one per step; rejected steps repeat the
/// previous state with the flag cleared.
struct Chain {
  std::vector<Point> points;
  std::vector<std::uint8_t> accepted;
  std::vector<Point> latents;  // threaded only for latent-spherical kernels
  std::uint64_t seed = 0;

  std::size_t size() const { return points.size(); }

  double rejection_rate() const {
    if (points.empty()) return 0.0;
    std::size_t rejected = 0;
    for (auto a : accepted)
      if (!a) ++rejected;
    return static_cast<double>(rejected) / static_cast<double>(points.size());
  }
};

/// The Metropolis-Hastings loop. The uniform accept draw happens on every
/// step, even when P = 1, so RNG streams stay aligned across rule variants.
/// A rejected proposal's latent is discarded; the chain keeps the latent of
/// the last accepted point.
inline Chain run_chain(const AcceptanceRule& rule, const ProposalKernel& kernel,
                       const Point& init, const Point& init_latent, std::size_t n,
                       std::uint64_t seed) {
  if (n < 1) throw Error("run_chain: n must be >= 1");
  const bool latent = kernel.kind() == ProposalKind::kLatentSpherical;
  if (latent && init_latent.size() != kernel.latent_dim())
    throw Error("run_chain: latent-spherical kernel needs the latent of the init point");
  Rng rng(seed);
  Chain chain;
  chain.seed = seed;
  chain.points.reserve(n);
  chain.accepted.reserve(n);
  if (latent) chain.latents.reserve(n);

  Point y = init;
  Point zy = init_latent;
  for (std::size_t i = 0; i < n; ++i) {
    auto prop = kernel.propose(y, zy, rng);
    const double p_acc = acceptance_prob(rule, prop.x, y);
    const double u = rng.next_unit();
    const bool accept = u < p_acc;
    if (accept) {
      y = std::move(prop.x);
      if (latent) zy = std::move(prop.latent);
    }
    chain.points.push_back(y);
    chain.accepted.push_back(accept ? 1 : 0);
    if (latent) chain.latents.push_back(zy);
  }
  return chain;
}

struct ChainStats {
  double rejection_rate = 0.0;
  std::size_t unique_count = 0;
  std::vector<double> autocorr;  // lags 1..L of coordinate 0
};

inline ChainStats chain_stats(const Chain& chain, int max_lag = 10) {
  if (chain.points.empty()) throw Error("chain_stats: empty chain");
  ChainStats st;
  st.rejection_rate = chain.rejection_rate();

  std::unordered_set<std::string> seen;
  for (const auto& p : chain.points) {
    std::string key(reinterpret_cast<const char*>(p.data()), p.size() * sizeof(double));
    seen.insert(std::move(key));
  }
  st.unique_count = seen.size();

  const std::size_t n = chain.points.size();
  double mean = 0.0;
  for (const auto& p : chain.points) mean += p[0];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& p : chain.points) var += (p[0] - mean) * (p[0] - mean);
  st.autocorr.assign(static_cast<std::size_t>(max_lag), 0.0);
  if (var > 0.0) {
    for (int lag = 1; lag <= max_lag && static_cast<std::size_t>(lag) < n; ++lag) {
      double acc = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i)
        acc += (chain.points[i][0] - mean) * (chain.points[i + lag][0] - mean);
      st.autocorr[lag - 1] = acc / var;
    }
  }
  return st;
}

}  // namespace imh

#endif
