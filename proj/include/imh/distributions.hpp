#ifndef IMH_DISTRIBUTIONS_HPP
#define IMH_DISTRIBUTIONS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "imh/core.hpp"
#include "imh/rng.hpp"

namespace imh {

enum class DensityKind { kGaussian, kGaussianMixture, kFiniteCategorical };

struct MixtureComponent {
  double weight;
  double mean;
  double stddev;
};

namespace detail {

inline double normal_pdf(double x, double mean, double stddev) {
  double z = (x - mean) / stddev;
  return std::exp(-0.5 * z * z) / (stddev * std::sqrt(kTwoPi));
}

inline double normal_log_pdf(double x, double mean, double stddev) {
  double z = (x - mean) / stddev;
  return -0.5 * z * z - std::log(stddev) - 0.5 * std::log(kTwoPi);
}

inline double normal_cdf(double x, double mean, double stddev) {
  return 0.5 * std::erfc(-(x - mean) / (stddev * std::sqrt(2.0)));
}

}  // namespace detail

/// Analytic target or proposal density: Gaussian, two-or-more component
/// Gaussian mixture, or a finite-categorical table. All shipped specs are
/// one-dimensional; categorical states are encoded as the single coordinate.
class DensitySpec {
 public:
  static DensitySpec gaussian(double mean, double stddev) {
    DensitySpec s;
    s.kind_ = DensityKind::kGaussian;
    s.components_ = {{1.0, mean, stddev}};
    s.validate();
    return s;
  }

  static DensitySpec mixture(std::vector<MixtureComponent> components) {
    DensitySpec s;
    s.kind_ = DensityKind::kGaussianMixture;
    s.components_ = std::move(components);
    s.validate();
    return s;
  }

  static DensitySpec categorical(std::vector<double> probs) {
    DensitySpec s;
    s.kind_ = DensityKind::kFiniteCategorical;
    s.probs_ = std::move(probs);
    s.validate();
    return s;
  }

  DensityKind kind() const { return kind_; }
  std::size_t dim() const { return 1; }
  const std::vector<MixtureComponent>& components() const { return components_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t state_count() const { return probs_.size(); }

  double density(const Point& x) const {
    check_dim(x, 1, "density_eval");
    switch (kind_) {
      case DensityKind::kGaussian:
        return detail::normal_pdf(x[0], components_[0].mean, components_[0].stddev);
      case DensityKind::kGaussianMixture: {
        double acc = 0.0;
        for (const auto& c : components_) acc += c.weight * detail::normal_pdf(x[0], c.mean, c.stddev);
        return acc;
      }
      case DensityKind::kFiniteCategorical:
        return probs_[state_index(x)];
    }
    return 0.0;
  }

  double log_density(const Point& x) const {
    check_dim(x, 1, "log_density_eval");
    switch (kind_) {
      case DensityKind::kGaussian:
        return detail::normal_log_pdf(x[0], components_[0].mean, components_[0].stddev);
      case DensityKind::kGaussianMixture: {
        // log-sum-exp over component log densities
        double best = -std::numeric_limits<double>::infinity();
        std::vector<double> terms;
        terms.reserve(components_.size());
        for (const auto& c : components_) {
          double t = std::log(c.weight) + detail::normal_log_pdf(x[0], c.mean, c.stddev);
          terms.push_back(t);
          best = std::max(best, t);
        }
        double acc = 0.0;
        for (double t : terms) acc += std::exp(t - best);
        return best + std::log(acc);
      }
      case DensityKind::kFiniteCategorical: {
        double p = probs_[state_index(x)];
        if (p == 0.0) throw ZeroDensityError("log_density_eval: zero density at state");
        return std::log(p);
      }
    }
    return 0.0;
  }

  /// P(X <= x) for the continuous kinds; used for exact bin masses.
  double cdf(double x) const {
    if (kind_ == DensityKind::kFiniteCategorical)
      throw Error("cdf: not defined for finite-categorical specs");
    double acc = 0.0;
    for (const auto& c : components_) acc += c.weight * detail::normal_cdf(x, c.mean, c.stddev);
    return acc;
  }

  Point sample_one(Rng& rng) const {
    switch (kind_) {
      case DensityKind::kGaussian:
        return {components_[0].mean + components_[0].stddev * rng.next_normal()};
      case DensityKind::kGaussianMixture: {
        double u = rng.next_unit();
        double cum = 0.0;
        std::size_t pick = components_.size() - 1;
        for (std::size_t i = 0; i < components_.size(); ++i) {
          cum += components_[i].weight;
          if (u < cum) {
            pick = i;
            break;
          }
        }
        const auto& c = components_[pick];
        return {c.mean + c.stddev * rng.next_normal()};
      }
      case DensityKind::kFiniteCategorical: {
        double u = rng.next_unit();
        double cum = 0.0;
        std::size_t pick = probs_.size() - 1;
        for (std::size_t i = 0; i < probs_.size(); ++i) {
          cum += probs_[i];
          if (u < cum) {
            pick = i;
            break;
          }
        }
        return {static_cast<double>(pick)};
      }
    }
    return {};
  }

  SampleSet sample(std::size_t n, std::uint64_t seed,
                   SampleSource source = SampleSource::kTarget) const {
    if (n < 1) throw Error("density_sample: n must be >= 1");
    Rng rng(seed);
    SampleSet out;
    out.source = source;
    out.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.points.push_back(sample_one(rng));
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    switch (kind_) {
      case DensityKind::kGaussian:
        j["kind"] = "gaussian";
        j["mean"] = components_[0].mean;
        j["stddev"] = components_[0].stddev;
        break;
      case DensityKind::kGaussianMixture: {
        j["kind"] = "gaussian-mixture";
        nlohmann::json comps = nlohmann::json::array();
        for (const auto& c : components_)
          comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"stddev", c.stddev}});
        j["components"] = comps;
        break;
      }
      case DensityKind::kFiniteCategorical:
        j["kind"] = "finite-categorical";
        j["probs"] = probs_;
        break;
    }
    return j;
  }

  static DensitySpec from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gaussian")
      return gaussian(j.at("mean").get<double>(), j.at("stddev").get<double>());
    if (kind == "gaussian-mixture") {
      std::vector<MixtureComponent> comps;
      for (const auto& c : j.at("components"))
        comps.push_back({c.at("weight").get<double>(), c.at("mean").get<double>(),
                         c.at("stddev").get<double>()});
      return mixture(std::move(comps));
    }
    if (kind == "finite-categorical")
      return categorical(j.at("probs").get<std::vector<double>>());
    throw Error("DensitySpec: unknown kind '" + kind + "'");
  }

  /// State index for categorical specs; the coordinate must be an integer.
  std::size_t state_index(const Point& x) const {
    check_dim(x, 1, "state_index");
    double r = std::round(x[0]);
    if (std::abs(x[0] - r) > 1e-9 || r < 0.0 || r >= static_cast<double>(probs_.size()))
      throw Error("categorical state index out of range");
    return static_cast<std::size_t>(r);
  }

 private:
  void validate() const {
    if (kind_ == DensityKind::kFiniteCategorical) {
      if (probs_.empty()) throw Error("categorical table must be non-empty");
      double sum = 0.0;
      for (double p : probs_) {
        if (!(p >= 0.0)) throw Error("categorical entries must be >= 0");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw Error("categorical table must sum to 1");
      return;
    }
    if (components_.empty()) throw Error("density needs at least one component");
    double wsum = 0.0;
    for (const auto& c : components_) {
      if (!(c.stddev > 0.0)) throw Error("stddev must be > 0");
      if (!(c.weight >= 0.0)) throw Error("mixture weights must be >= 0");
      check_finite(c.mean, "component mean");
      wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-12) throw Error("mixture weights must sum to 1");
  }

  DensityKind kind_ = DensityKind::kGaussian;
  std::vector<MixtureComponent> components_;
  std::vector<double> probs_;
};

/// The synthetic two-Gaussian target used by the built-in experiments:
/// 0.5 N(-2, 0.5) + 0.5 N(2, 0.7).
inline DensitySpec two_gaussian_target() {
  return DensitySpec::mixture({{0.5, -2.0, 0.5}, {0.5, 2.0, 0.7}});
}

}  // namespace imh

#endif
