#ifndef IMH_PROPOSALS_HPP
#define IMH_PROPOSALS_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "imh/core.hpp"
#include "imh/distributions.hpp"
#include "imh/rng.hpp"

namespace imh {

enum class GeneratorKind { kIdentity, kAffine, kTanhAffine };

/// Deterministic latent-to-data map standing in for a trained generator.
/// affine kinds store a row-major (dim_out x dim_in) matrix and a bias.
struct GeneratorMap {
  GeneratorKind kind = GeneratorKind::kIdentity;
  std::size_t dim_in = 1;
  std::size_t dim_out = 1;
  std::vector<double> matrix;
  std::vector<double> bias;

  static GeneratorMap identity(std::size_t dim) {
    GeneratorMap g;
    g.kind = GeneratorKind::kIdentity;
    g.dim_in = g.dim_out = dim;
    return g;
  }

  static GeneratorMap affine(std::size_t dim_out, std::size_t dim_in,
                             std::vector<double> matrix, std::vector<double> bias) {
    GeneratorMap g;
    g.kind = GeneratorKind::kAffine;
    g.dim_in = dim_in;
    g.dim_out = dim_out;
    g.matrix = std::move(matrix);
    g.bias = std::move(bias);
    g.validate();
    return g;
  }

  static GeneratorMap tanh_affine(std::size_t dim_out, std::size_t dim_in,
                                  std::vector<double> matrix, std::vector<double> bias) {
    GeneratorMap g = affine(dim_out, dim_in, std::move(matrix), std::move(bias));
    g.kind = GeneratorKind::kTanhAffine;
    return g;
  }

  void validate() const {
    if (kind == GeneratorKind::kIdentity) return;
    if (matrix.size() != dim_out * dim_in || bias.size() != dim_out)
      throw DimensionError("GeneratorMap: matrix/bias shape mismatch");
  }

  Point apply(const Point& z) const {
    check_dim(z, dim_in, "GeneratorMap::apply");
    if (kind == GeneratorKind::kIdentity) return z;
    Point out(dim_out, 0.0);
    for (std::size_t r = 0; r < dim_out; ++r) {
      double acc = bias[r];
      for (std::size_t c = 0; c < dim_in; ++c) acc += matrix[r * dim_in + c] * z[c];
      out[r] = (kind == GeneratorKind::kTanhAffine) ? std::tanh(acc) : acc;
    }
    return out;
  }

  /// J(z)^T v, the pullback of a data-space residual into latent space.
  Point jacobian_tv(const Point& z, const Point& v) const {
    check_dim(v, dim_out, "GeneratorMap::jacobian_tv");
    if (kind == GeneratorKind::kIdentity) return v;
    Point scaled = v;
    if (kind == GeneratorKind::kTanhAffine) {
      for (std::size_t r = 0; r < dim_out; ++r) {
        double acc = bias[r];
        for (std::size_t c = 0; c < dim_in; ++c) acc += matrix[r * dim_in + c] * z[c];
        double t = std::tanh(acc);
        scaled[r] *= 1.0 - t * t;
      }
    }
    Point out(dim_in, 0.0);
    for (std::size_t r = 0; r < dim_out; ++r)
      for (std::size_t c = 0; c < dim_in; ++c) out[c] += matrix[r * dim_in + c] * scaled[r];
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    switch (kind) {
      case GeneratorKind::kIdentity:
        j["kind"] = "identity";
        j["dim"] = dim_in;
        break;
      case GeneratorKind::kAffine:
      case GeneratorKind::kTanhAffine:
        j["kind"] = kind == GeneratorKind::kAffine ? "affine" : "tanh-affine";
        j["dim_out"] = dim_out;
        j["dim_in"] = dim_in;
        j["matrix"] = matrix;
        j["bias"] = bias;
        break;
    }
    return j;
  }

  static GeneratorMap from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "identity") return identity(j.at("dim").get<std::size_t>());
    auto m = j.at("matrix").get<std::vector<double>>();
    auto b = j.at("bias").get<std::vector<double>>();
    auto dout = j.at("dim_out").get<std::size_t>();
    auto din = j.at("dim_in").get<std::size_t>();
    return kind == "affine" ? affine(dout, din, std::move(m), std::move(b))
                            : tanh_affine(dout, din, std::move(m), std::move(b));
  }
};

struct InversionResult {
  Point z;
  double reconstruction_error;  // ||g(z) - x||^2 at the returned z
};

/// Latent recovery by gradient descent on 1/2 ||g(z) - x||^2 from z = 0.
inline InversionResult invert_generator(const GeneratorMap& g, const Point& x,
                                        int steps = 500, double step_size = 0.1) {
  check_dim(x, g.dim_out, "invert_generator");
  Point z(g.dim_in, 0.0);
  for (int it = 0; it < steps; ++it) {
    Point gx = g.apply(z);
    Point resid(g.dim_out);
    double loss = 0.0;
    for (std::size_t r = 0; r < g.dim_out; ++r) {
      resid[r] = gx[r] - x[r];
      loss += resid[r] * resid[r];
    }
    check_finite(loss, "invert_generator loss");
    Point grad = g.jacobian_tv(z, resid);
    for (std::size_t c = 0; c < g.dim_in; ++c) z[c] -= step_size * grad[c];
  }
  Point gx = g.apply(z);
  double err = 0.0;
  for (std::size_t r = 0; r < g.dim_out; ++r) err += (gx[r] - x[r]) * (gx[r] - x[r]);
  check_finite(err, "invert_generator final error");
  return {std::move(z), err};
}

enum class ProposalKind { kRandomWalk, kIndependent, kLatentSpherical, kFiniteMatrix };

/// Conditional proposal q(x | y). The latent-spherical kind is implicit by
/// design: it can be sampled but has no evaluable density.
class ProposalKernel {
 public:
  struct Proposal {
    Point x;
    Point latent;  // populated for latent-spherical kernels only
  };

  static ProposalKernel random_walk(double stddev, std::size_t dim = 1) {
    ProposalKernel k;
    k.kind_ = ProposalKind::kRandomWalk;
    k.stddev_ = stddev;
    k.dim_ = dim;
    if (!(stddev > 0.0)) throw Error("random-walk stddev must be > 0");
    return k;
  }

  static ProposalKernel independent(DensitySpec inner) {
    ProposalKernel k;
    k.kind_ = ProposalKind::kIndependent;
    k.dim_ = inner.dim();
    k.inner_ = std::move(inner);
    return k;
  }

  static ProposalKernel latent_spherical(double angle, std::size_t latent_dim, GeneratorMap g) {
    if (!(angle >= 0.0 && angle <= kTwoPi / 4.0))
      throw Error("latent-spherical angle must lie in [0, pi/2]");
    if (g.dim_in != latent_dim) throw DimensionError("latent dim does not match generator");
    ProposalKernel k;
    k.kind_ = ProposalKind::kLatentSpherical;
    k.angle_ = angle;
    k.latent_dim_ = latent_dim;
    k.dim_ = g.dim_out;
    k.generator_ = std::move(g);
    return k;
  }

  /// table[x*K + y] = q(x | y); every column y sums to 1, all entries > 0.
  static ProposalKernel finite_matrix(std::vector<double> table, std::size_t k_states) {
    if (table.size() != k_states * k_states) throw DimensionError("finite matrix must be K x K");
    for (std::size_t y = 0; y < k_states; ++y) {
      double col = 0.0;
      for (std::size_t x = 0; x < k_states; ++x) {
        if (!(table[at(x, y, k_states)] > 0.0))
          throw Error("finite-matrix entries must be strictly positive");
        col += table[at(x, y, k_states)];
      }
      if (std::abs(col - 1.0) > 1e-12) throw Error("finite-matrix columns must sum to 1");
    }
    ProposalKernel k;
    k.kind_ = ProposalKind::kFiniteMatrix;
    k.dim_ = 1;
    k.k_states_ = k_states;
    k.table_ = std::move(table);
    return k;
  }

  /// Header-free CSV, K rows by K columns, row x / column y orientation.
  static ProposalKernel finite_matrix_from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open proposal CSV: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
      rows.push_back(std::move(row));
    }
    const std::size_t k = rows.size();
    std::vector<double> table(k * k);
    for (std::size_t x = 0; x < k; ++x) {
      if (rows[x].size() != k) throw DimensionError("proposal CSV is not square");
      for (std::size_t y = 0; y < k; ++y) table[at(x, y, k)] = rows[x][y];
    }
    return finite_matrix(std::move(table), k);
  }

  ProposalKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t latent_dim() const { return latent_dim_; }
  std::size_t state_count() const { return k_states_; }
  double stddev() const { return stddev_; }
  double angle() const { return angle_; }
  const DensitySpec& inner() const { return inner_; }
  const GeneratorMap& generator() const { return generator_; }
  const std::vector<double>& table() const { return table_; }

  bool has_density() const { return kind_ != ProposalKind::kLatentSpherical; }
  bool is_symmetric() const { return kind_ == ProposalKind::kRandomWalk; }

  Proposal propose(const Point& y, const Point& latent_y, Rng& rng) const {
    switch (kind_) {
      case ProposalKind::kRandomWalk: {
        check_dim(y, dim_, "propose");
        Point x(dim_);
        for (std::size_t i = 0; i < dim_; ++i) x[i] = y[i] + stddev_ * rng.next_normal();
        return {std::move(x), {}};
      }
      case ProposalKind::kIndependent:
        return {inner_.sample_one(rng), {}};
      case ProposalKind::kLatentSpherical: {
        if (latent_y.size() != latent_dim_)
          throw Error("latent-spherical propose: missing latent state for current point");
        Point zx(latent_dim_);
        const double c = std::cos(angle_);
        const double s = std::sin(angle_);
        for (std::size_t i = 0; i < latent_dim_; ++i) zx[i] = c * latent_y[i] + s * rng.next_normal();
        Point x = generator_.apply(zx);
        return {std::move(x), std::move(zx)};
      }
      case ProposalKind::kFiniteMatrix: {
        std::size_t ys = state_of(y);
        double u = rng.next_unit();
        double cum = 0.0;
        std::size_t pick = k_states_ - 1;
        for (std::size_t x = 0; x < k_states_; ++x) {
          cum += table_[at(x, ys, k_states_)];
          if (u < cum) {
            pick = x;
            break;
          }
        }
        return {{static_cast<double>(pick)}, {}};
      }
    }
    return {};
  }

  double density(const Point& x, const Point& y) const {
    switch (kind_) {
      case ProposalKind::kRandomWalk: {
        check_dim(x, dim_, "proposal_density");
        check_dim(y, dim_, "proposal_density");
        double acc = 1.0;
        for (std::size_t i = 0; i < dim_; ++i) acc *= detail::normal_pdf(x[i], y[i], stddev_);
        return acc;
      }
      case ProposalKind::kIndependent:
        return inner_.density(x);
      case ProposalKind::kLatentSpherical:
        throw Error("implicit kernel has no density");
      case ProposalKind::kFiniteMatrix:
        return table_[at(state_of(x), state_of(y), k_states_)];
    }
    return 0.0;
  }

  std::size_t state_of(const Point& p) const {
    check_dim(p, 1, "finite-matrix state");
    double r = std::round(p[0]);
    if (std::abs(p[0] - r) > 1e-9 || r < 0.0 || r >= static_cast<double>(k_states_))
      throw Error("finite-matrix state index out of range");
    return static_cast<std::size_t>(r);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    switch (kind_) {
      case ProposalKind::kRandomWalk:
        j["kind"] = "random-walk";
        j["stddev"] = stddev_;
        j["dim"] = dim_;
        break;
      case ProposalKind::kIndependent:
        j["kind"] = "independent";
        j["density"] = inner_.to_json();
        break;
      case ProposalKind::kLatentSpherical:
        j["kind"] = "latent-spherical";
        j["angle"] = angle_;
        j["latent_dim"] = latent_dim_;
        j["generator"] = generator_.to_json();
        break;
      case ProposalKind::kFiniteMatrix:
        j["kind"] = "finite-matrix";
        j["states"] = k_states_;
        j["matrix"] = table_;
        break;
    }
    return j;
  }

  static ProposalKernel from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "random-walk")
      return random_walk(j.at("stddev").get<double>(), j.value("dim", std::size_t{1}));
    if (kind == "independent") return independent(DensitySpec::from_json(j.at("density")));
    if (kind == "latent-spherical")
      return latent_spherical(j.at("angle").get<double>(), j.at("latent_dim").get<std::size_t>(),
                              GeneratorMap::from_json(j.at("generator")));
    if (kind == "finite-matrix") {
      if (j.contains("csv")) return finite_matrix_from_csv(j.at("csv").get<std::string>());
      return finite_matrix(j.at("matrix").get<std::vector<double>>(),
                           j.at("states").get<std::size_t>());
    }
    throw Error("ProposalKernel: unknown kind '" + kind + "'");
  }

 private:
  ProposalKind kind_ = ProposalKind::kRandomWalk;
  std::size_t dim_ = 1;
  double stddev_ = 1.0;
  DensitySpec inner_ = DensitySpec::gaussian(0.0, 1.0);
  double angle_ = 0.0;
  std::size_t latent_dim_ = 0;
  GeneratorMap generator_;
  std::size_t k_states_ = 0;
  std::vector<double> table_;
};

}  // namespace imh

#endif
