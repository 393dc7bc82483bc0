#ifndef IMH_DISCRIMINATOR_HPP
#define IMH_DISCRIMINATOR_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "imh/core.hpp"
#include "imh/mlp.hpp"

namespace imh {

/// Branches so that sigmoid(t) + sigmoid(-t) == 1 holds bit-exactly: the
/// t >= 0 branch lands in [0.5, 1], where 1 - a is exact by Sterbenz.
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  return 1.0 - 1.0 / (1.0 + std::exp(t));
}

/// Affine clamp of a raw score into [b, 1]: b + (1-b) * sigmoid(s).
/// b == 0 short-circuits to the plain sigmoid so the exact-antisymmetry
/// identity survives the map.
inline double clamp_score(double b, double s) {
  const double sig = sigmoid(s);
  if (b == 0.0) return sig;
  return b + (1.0 - b) * sig;
}

/// d(clamp)/d(score) at raw score s.
inline double clamp_score_grad(double b, double s) {
  const double sig = sigmoid(s);
  return (1.0 - b) * sig * (1.0 - sig);
}

enum class HeadKind { kPairwiseLogitDiff, kFactorizedIndependent, kTabular };

enum class ScorerKind { kMlp, kTable };

inline std::string head_name(HeadKind h) {
  switch (h) {
    case HeadKind::kPairwiseLogitDiff: return "pairwise";
    case HeadKind::kFactorizedIndependent: return "factorized";
    case HeadKind::kTabular: return "tabular";
  }
  return "?";
}

inline HeadKind head_from_name(const std::string& s) {
  if (s == "pairwise") return HeadKind::kPairwiseLogitDiff;
  if (s == "factorized") return HeadKind::kFactorizedIndependent;
  if (s == "tabular") return HeadKind::kTabular;
  throw Error("unknown discriminator head '" + s + "'");
}

/// Parameterized scorer plus head. Three heads:
///   pairwise    d(x,y) = clamp(b, net(x) - net(y))      (shared network)
///   factorized  d(x,y) = d(x) (1 - d(y)),  d(.) = clamp(b, net(.))
///   tabular     d(x,y) = clamp(b, score[x][y])           (finite spaces)
/// The scorer behind pairwise/factorized heads is either the MLP or, on a
/// finite space, a per-state score vector.
struct Discriminator {
  HeadKind head = HeadKind::kPairwiseLogitDiff;
  ScorerKind scorer = ScorerKind::kMlp;
  double b = 0.1;
  Mlp net;                     // scorer == kMlp
  std::vector<double> table;   // scorer == kTable: K scores, or K*K for tabular head
  std::size_t states = 0;
  bool direct = false;         // tabular head holds values in [b,1], not raw scores

  static Discriminator mlp(HeadKind head, std::vector<int> sizes, double b, std::uint64_t seed) {
    if (head == HeadKind::kTabular) throw Error("tabular head requires a score table");
    Discriminator d;
    d.head = head;
    d.scorer = ScorerKind::kMlp;
    d.b = b;
    d.net = Mlp::create(std::move(sizes), seed);
    d.check_b();
    return d;
  }

  static Discriminator tabular(std::size_t states, double b, double init_score = 0.0) {
    Discriminator d;
    d.head = HeadKind::kTabular;
    d.scorer = ScorerKind::kTable;
    d.b = b;
    d.states = states;
    d.table.assign(states * states, init_score);
    d.check_b();
    return d;
  }

  /// Tabular head over explicit values in [b, 1] (no sigmoid), the natural
  /// carrier for an exact finite-space discriminator table.
  static Discriminator tabular_values(std::size_t states, std::vector<double> values, double b) {
    if (values.size() != states * states)
      throw DimensionError("tabular_values: table must be K x K");
    for (double v : values)
      if (!(v >= b && v <= 1.0)) throw Error("tabular_values: values must lie in [b, 1]");
    Discriminator d;
    d.head = HeadKind::kTabular;
    d.scorer = ScorerKind::kTable;
    d.direct = true;
    d.b = b;
    d.states = states;
    d.table = std::move(values);
    return d;
  }

  /// Per-state scorer for pairwise/factorized heads on a finite space.
  static Discriminator table_scorer(HeadKind head, std::size_t states, double b,
                                    double init_score = 0.0) {
    if (head == HeadKind::kTabular) return tabular(states, b, init_score);
    Discriminator d;
    d.head = head;
    d.scorer = ScorerKind::kTable;
    d.b = b;
    d.states = states;
    d.table.assign(states, init_score);
    d.check_b();
    return d;
  }

  void check_b() const {
    if (!(b >= 0.0 && b < 1.0)) throw Error("clamp floor b must lie in [0, 1)");
  }

  std::vector<double>& params() { return scorer == ScorerKind::kMlp ? net.params : table; }
  const std::vector<double>& params() const {
    return scorer == ScorerKind::kMlp ? net.params : table;
  }

  std::size_t state_of(const Point& p) const {
    check_dim(p, 1, "tabular state");
    double r = std::round(p[0]);
    if (std::abs(p[0] - r) > 1e-9 || r < 0.0 || r >= static_cast<double>(states))
      throw Error("tabular state index out of range");
    return static_cast<std::size_t>(r);
  }

  /// Raw score net(x) (MLP) or score[x] (per-state table).
  double point_score(const Point& x) const {
    if (scorer == ScorerKind::kMlp) return net_forward(net, x);
    return table[state_of(x)];
  }

  /// Per-point clamped value d(x) for the factorized head.
  double point_value(const Point& x) const { return clamp_score(b, point_score(x)); }
};

inline double disc_eval(const Discriminator& d, const Point& x, const Point& y) {
  switch (d.head) {
    case HeadKind::kPairwiseLogitDiff:
      return clamp_score(d.b, d.point_score(x) - d.point_score(y));
    case HeadKind::kFactorizedIndependent:
      return d.point_value(x) * (1.0 - d.point_value(y));
    case HeadKind::kTabular: {
      const double entry = d.table[at(d.state_of(x), d.state_of(y), d.states)];
      return d.direct ? entry : clamp_score(d.b, entry);
    }
  }
  return 0.0;
}

struct PairValues {
  double d_xy;
  double d_yx;
};

/// d(x,y) and d(y,x) together, bit-identical to the two disc_eval calls but
/// with each point scored once.
inline PairValues disc_pair(const Discriminator& d, const Point& x, const Point& y) {
  switch (d.head) {
    case HeadKind::kPairwiseLogitDiff: {
      const double s = d.point_score(x) - d.point_score(y);
      return {clamp_score(d.b, s), clamp_score(d.b, -s)};
    }
    case HeadKind::kFactorizedIndependent: {
      const double dx = d.point_value(x);
      const double dy = d.point_value(y);
      return {dx * (1.0 - dy), dy * (1.0 - dx)};
    }
    case HeadKind::kTabular: {
      const double u = d.table[at(d.state_of(x), d.state_of(y), d.states)];
      const double v = d.table[at(d.state_of(y), d.state_of(x), d.states)];
      if (d.direct) return {u, v};
      return {clamp_score(d.b, u), clamp_score(d.b, v)};
    }
  }
  return {0.0, 0.0};
}

// ---------------------------------------------------------------------------
// Checkpoint format (.imhw): 8-byte magic "IMHWv01\n", little-endian u64
// header length, JSON header, then the flat parameter vector as little-endian
// 64-bit floats in declared layer order.
// ---------------------------------------------------------------------------

static_assert(sizeof(double) == 8, "checkpoint format assumes 8-byte doubles");

inline constexpr char kCheckpointMagic[8] = {'I', 'M', 'H', 'W', 'v', '0', '1', '\n'};

inline void save_checkpoint(const Discriminator& d, const std::string& path,
                            std::uint64_t seed, std::uint64_t iteration) {
  nlohmann::json header;
  header["head"] = head_name(d.head);
  header["scorer"] = d.scorer == ScorerKind::kMlp ? "mlp" : "table";
  header["b"] = d.b;
  header["seed"] = seed;
  header["iteration"] = iteration;
  header["param_count"] = d.params().size();
  if (d.scorer == ScorerKind::kMlp) {
    header["layers"] = d.net.sizes;
    header["leak"] = d.net.leak;
  } else {
    header["states"] = d.states;
    header["direct"] = d.direct;
  }
  const std::string htext = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  std::uint64_t hlen = htext.size();
  unsigned char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<unsigned char>((hlen >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(lenbuf), 8);
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (double v : d.params()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(buf), 8);
  }
  if (!out) throw Error("short write on checkpoint: " + path);
}

struct Checkpoint {
  Discriminator disc;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw Error("bad checkpoint magic: " + path);
  unsigned char lenbuf[8];
  in.read(reinterpret_cast<char*>(lenbuf), 8);
  std::uint64_t hlen = 0;
  for (int i = 0; i < 8; ++i) hlen |= static_cast<std::uint64_t>(lenbuf[i]) << (8 * i);
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw Error("truncated checkpoint header: " + path);
  nlohmann::json header = nlohmann::json::parse(htext);

  Checkpoint cp;
  cp.seed = header.at("seed").get<std::uint64_t>();
  cp.iteration = header.at("iteration").get<std::uint64_t>();
  Discriminator& d = cp.disc;
  d.head = head_from_name(header.at("head").get<std::string>());
  d.b = header.at("b").get<double>();
  const std::string scorer = header.at("scorer").get<std::string>();
  const std::size_t n = header.at("param_count").get<std::size_t>();
  if (scorer == "mlp") {
    d.scorer = ScorerKind::kMlp;
    d.net.sizes = header.at("layers").get<std::vector<int>>();
    d.net.leak = header.at("leak").get<double>();
    if (d.net.param_count() != n) throw Error("checkpoint parameter count mismatch");
    d.net.params.resize(n);
  } else {
    d.scorer = ScorerKind::kTable;
    d.states = header.at("states").get<std::size_t>();
    d.direct = header.value("direct", false);
    d.table.resize(n);
  }
  std::vector<double>& params = d.params();
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw Error("truncated checkpoint parameters: " + path);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(buf[k]) << (8 * k);
    std::memcpy(&params[i], &bits, 8);
  }
  return cp;
}

}  // namespace imh

#endif
