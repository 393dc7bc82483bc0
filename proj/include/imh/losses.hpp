#ifndef IMH_LOSSES_HPP
#define IMH_LOSSES_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "imh/core.hpp"
#include "imh/discriminator.hpp"
#include "imh/mlp.hpp"

namespace imh {

enum class LossKind { kUB, kMCE, kCCE, kLT };

inline std::string loss_name(LossKind k) {
  switch (k) {
    case LossKind::kUB: return "ub";
    case LossKind::kMCE: return "mce";
    case LossKind::kCCE: return "cce";
    case LossKind::kLT: return "lt";
  }
  return "?";
}

inline LossKind loss_from_name(const std::string& s) {
  if (s == "ub") return LossKind::kUB;
  if (s == "mce") return LossKind::kMCE;
  if (s == "cce") return LossKind::kCCE;
  if (s == "lt") return LossKind::kLT;
  throw Error("unknown loss kind '" + s + "'");
}

/// CCE pairs only with the factorized head; the ratio losses need a pairwise
/// or tabular head.
inline void check_loss_head(LossKind kind, HeadKind head) {
  if (kind == LossKind::kCCE) {
    if (head != HeadKind::kFactorizedIndependent)
      throw Error("cce loss requires the factorized-independent head");
  } else if (head == HeadKind::kFactorizedIndependent) {
    throw Error(loss_name(kind) + " loss requires a pairwise or tabular head");
  }
}

inline void check_loss_head(LossKind kind, const Discriminator& d) {
  check_loss_head(kind, d.head);
}

/// Batch of conditioned pairs: x drawn from the target, y from q(.|x)
/// (unconditional for independent proposals).
struct PairBatch {
  std::vector<Point> xs;
  std::vector<Point> ys;
  std::uint64_t seed = 0;

  std::size_t size() const { return xs.size(); }
};

struct LossResult {
  double loss = 0.0;
  double term_a = 0.0;  // log term (UB), -log d(x,y) (MCE), -log d(x) (CCE), 0 (LT)
  double term_b = 0.0;  // linear term (UB/LT), -log(1-d(y,x)) (MCE), -log(1-d(y)) (CCE)
  long floor_hits = 0;  // denominator floors applied (b = 0 only)
  std::vector<double> grad;
};

namespace detail {

inline constexpr double kRatioFloor = 1e-12;

struct PairPartials {
  double term;
  double term_a;
  double term_b;
  double d_dxy;  // d(term)/d(d_xy)
  double d_dyx;  // d(term)/d(d_yx)
  bool floored = false;
};

inline double checked_log(double v, const char* what) {
  if (!(v > 0.0)) throw Error(std::string("log of nonpositive value in ") + what);
  return std::log(v);
}

/// Per-pair loss term and its partials w.r.t. the pairwise values
/// d_xy = d(x,y), d_yx = d(y,x).
inline PairPartials pair_partials(LossKind kind, double d_xy, double d_yx) {
  PairPartials p{};
  double den = d_xy;
  if (den < kRatioFloor) {
    den = kRatioFloor;
    p.floored = true;
  }
  switch (kind) {
    case LossKind::kUB: {
      const double ratio = d_yx / den;
      p.term_a = checked_log(d_yx, "ub loss") - checked_log(d_xy, "ub loss");
      p.term_b = ratio;
      p.term = p.term_a + p.term_b;
      p.d_dxy = -1.0 / den - d_yx / (den * den);
      p.d_dyx = 1.0 / d_yx + 1.0 / den;
      break;
    }
    case LossKind::kMCE: {
      p.term_a = -checked_log(d_xy, "mce loss");
      p.term_b = -checked_log(1.0 - d_yx, "mce loss");
      p.term = p.term_a + p.term_b;
      p.d_dxy = -1.0 / d_xy;
      p.d_dyx = 1.0 / (1.0 - d_yx);
      break;
    }
    case LossKind::kLT: {
      const double ratio = d_yx / den;
      p.term_b = ratio;
      p.term = ratio;
      p.d_dxy = -d_yx / (den * den);
      p.d_dyx = 1.0 / den;
      break;
    }
    case LossKind::kCCE:
      throw Error("cce is evaluated on per-point values");
  }
  return p;
}

}  // namespace detail

/// Accumulates one weighted pair into (result, grad). Exposed so the finite
/// full-sum evaluator and the Monte-Carlo batch evaluator share arithmetic.
inline void loss_accumulate_pair(LossKind kind, const Discriminator& d, const Point& x,
                                 const Point& y, double w, LossResult& out, bool want_grad) {
  if (kind == LossKind::kCCE) {
    const double sx = d.point_score(x);
    const double sy = d.point_score(y);
    const double dx = clamp_score(d.b, sx);
    const double dy = clamp_score(d.b, sy);
    const double ta = -detail::checked_log(dx, "cce loss");
    const double tb = -detail::checked_log(1.0 - dy, "cce loss");
    out.term_a += w * ta;
    out.term_b += w * tb;
    out.loss += w * (ta + tb);
    if (!want_grad) return;
    const double dsx = -clamp_score_grad(d.b, sx) / dx;
    const double dsy = clamp_score_grad(d.b, sy) / (1.0 - dy);
    if (d.scorer == ScorerKind::kMlp) {
      MlpCache cx, cy;
      net_forward(d.net, x, &cx);
      net_forward(d.net, y, &cy);
      net_backward(d.net, cx, w * dsx, out.grad);
      net_backward(d.net, cy, w * dsy, out.grad);
    } else {
      out.grad[d.state_of(x)] += w * dsx;
      out.grad[d.state_of(y)] += w * dsy;
    }
    return;
  }

  if (d.head == HeadKind::kTabular) {
    const std::size_t ix = d.state_of(x);
    const std::size_t iy = d.state_of(y);
    const double u = d.table[at(ix, iy, d.states)];
    const double v = d.table[at(iy, ix, d.states)];
    const double d_xy = clamp_score(d.b, u);
    const double d_yx = clamp_score(d.b, v);
    auto p = detail::pair_partials(kind, d_xy, d_yx);
    out.term_a += w * p.term_a;
    out.term_b += w * p.term_b;
    out.loss += w * p.term;
    if (p.floored) out.floor_hits += 1;
    if (!want_grad) return;
    if (ix == iy) {
      out.grad[at(ix, iy, d.states)] += w * (p.d_dxy + p.d_dyx) * clamp_score_grad(d.b, u);
    } else {
      out.grad[at(ix, iy, d.states)] += w * p.d_dxy * clamp_score_grad(d.b, u);
      out.grad[at(iy, ix, d.states)] += w * p.d_dyx * clamp_score_grad(d.b, v);
    }
    return;
  }

  // pairwise logit-difference head, shared scorer
  MlpCache cx, cy;
  double sx, sy;
  if (d.scorer == ScorerKind::kMlp) {
    sx = net_forward(d.net, x, want_grad ? &cx : nullptr);
    sy = net_forward(d.net, y, want_grad ? &cy : nullptr);
  } else {
    sx = d.table[d.state_of(x)];
    sy = d.table[d.state_of(y)];
  }
  const double s = sx - sy;
  const double a = sigmoid(s);
  const double d_xy = clamp_score(d.b, s);
  const double d_yx = (d.b == 0.0) ? (1.0 - a) : (d.b + (1.0 - d.b) * (1.0 - a));
  auto p = detail::pair_partials(kind, d_xy, d_yx);
  out.term_a += w * p.term_a;
  out.term_b += w * p.term_b;
  out.loss += w * p.term;
  if (p.floored) out.floor_hits += 1;
  if (!want_grad) return;
  const double ds = (1.0 - d.b) * a * (1.0 - a) * (p.d_dxy - p.d_dyx);
  if (d.scorer == ScorerKind::kMlp) {
    net_backward(d.net, cx, w * ds, out.grad);
    net_backward(d.net, cy, -w * ds, out.grad);
  } else {
    out.grad[d.state_of(x)] += w * ds;
    out.grad[d.state_of(y)] -= w * ds;
  }
}

/// Monte-Carlo mean loss over a batch, with exact parameter gradients.
/// Summation order is fixed, so results are reproducible bit for bit.
inline LossResult loss_eval(LossKind kind, const Discriminator& d, const PairBatch& batch,
                            bool want_grad = true) {
  check_loss_head(kind, d);
  if (batch.size() == 0 || batch.xs.size() != batch.ys.size())
    throw Error("loss_eval: empty or mismatched batch");
  LossResult out;
  if (want_grad) out.grad.assign(d.params().size(), 0.0);
  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    loss_accumulate_pair(kind, d, batch.xs[i], batch.ys[i], w, out, want_grad);
  return out;
}

/// Exact full-sum loss on a finite space: weight(x=i, y=j) = p(i) q(j|i).
/// q_table is row-major with q_table[at(j, i, K)] = q(propose j | current i).
inline LossResult loss_eval_finite(LossKind kind, const Discriminator& d,
                                   const std::vector<double>& p,
                                   const std::vector<double>& q_table, std::size_t k,
                                   bool want_grad = true) {
  check_loss_head(kind, d);
  LossResult out;
  if (want_grad) out.grad.assign(d.params().size(), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const Point x{static_cast<double>(i)};
    for (std::size_t j = 0; j < k; ++j) {
      const Point y{static_cast<double>(j)};
      const double w = p[i] * q_table[at(j, i, k)];
      if (w == 0.0) continue;
      loss_accumulate_pair(kind, d, x, y, w, out, want_grad);
    }
  }
  return out;
}

/// Density-ratio estimate p(x)q(y|x) / (p(y)q(x|y)) read off a trained
/// discriminator per its loss's extraction rule.
inline double dre_extract(LossKind kind, const Discriminator& d, const Point& x,
                          const Point& y) {
  const PairValues pv = disc_pair(d, x, y);
  double den = pv.d_yx;
  if (den < detail::kRatioFloor) den = detail::kRatioFloor;
  const double ratio = pv.d_xy / den;
  return kind == LossKind::kLT ? ratio * ratio : ratio;
}

/// Estimates p(x)/p(reference) for discriminators trained against a
/// symmetric proposal, where the proposal factors cancel.
inline std::vector<double> unnormalized_density_probe(LossKind kind, const Discriminator& d,
                                                      const Point& reference,
                                                      const std::vector<Point>& xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(dre_extract(kind, d, x, reference));
  return out;
}

/// Pointwise comparison of the UB integrand against cross-entropy + 1/b.
struct PointwiseReport {
  bool markov_checked = false;
  bool markov_ok = true;
  double markov_lhs = 0.0;
  double markov_rhs = 0.0;
  bool indep_checked = false;
  bool indep_ok = true;
  double indep_lhs = 0.0;
  double indep_rhs = 0.0;
};

inline PointwiseReport pointwise_inequalities(double d_xy, double d_yx, double d_x, double d_y,
                                              double b) {
  if (!(b > 0.0)) throw Error("pointwise_inequalities requires b > 0");
  PointwiseReport r;
  if (d_xy >= b && d_xy <= 1.0 && d_yx >= b && d_yx <= 1.0) {
    r.markov_checked = true;
    r.markov_lhs = std::log(d_yx / d_xy) + d_yx / d_xy;
    // -log(0) = +inf is the correct right side when d_yx == 1
    r.markov_rhs = -std::log(d_xy) - std::log(1.0 - d_yx) + 1.0 / b;
    r.markov_ok = r.markov_lhs <= r.markov_rhs;
  }
  const double prod_xy = d_x * (1.0 - d_y);
  const double prod_yx = d_y * (1.0 - d_x);
  if (prod_xy >= b && prod_xy <= 1.0 && prod_yx >= b && prod_yx <= 1.0) {
    r.indep_checked = true;
    r.indep_lhs = std::log(prod_yx / prod_xy) + prod_yx / prod_xy;
    r.indep_rhs = -std::log(d_x) - std::log(1.0 - d_y) + 1.0 / b;
    r.indep_ok = r.indep_lhs <= r.indep_rhs;
  }
  return r;
}

}  // namespace imh

#endif
