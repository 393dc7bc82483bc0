#ifndef IMH_MLP_HPP
#define IMH_MLP_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "imh/core.hpp"
#include "imh/rng.hpp"

namespace imh {

/// Fully-connected scalar-output network with leaky-rectifier hidden units.
/// Parameters are stored flat, per layer: weight matrix (out x in, row-major)
/// followed by the bias vector. Gradients are hand-derived; there is no
/// autodiff anywhere in this library.
struct Mlp {
  std::vector<int> sizes;  // e.g. {1, 100, 100, 1}
  double leak = 0.2;
  std::vector<double> params;

  std::size_t layer_count() const { return sizes.size() - 1; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
      n += static_cast<std::size_t>(sizes[l + 1]) * sizes[l] + sizes[l + 1];
    return n;
  }

  /// Hidden layers: uniform +-sqrt(6/(fan_in+fan_out)), biases zero.
  /// The output layer starts at zero so an untrained net scores everything
  /// identically (ratio estimate 1) and snapshot 0 is a clean baseline.
  static Mlp create(std::vector<int> sizes, std::uint64_t seed, double leak = 0.2) {
    if (sizes.size() < 2) throw Error("Mlp needs at least one layer");
    if (sizes.back() != 1) throw Error("Mlp output must be scalar");
    Mlp m;
    m.sizes = std::move(sizes);
    m.leak = leak;
    m.params.assign(m.param_count(), 0.0);
    Rng rng(seed);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < m.sizes.size(); ++l) {
      const int fan_in = m.sizes[l];
      const int fan_out = m.sizes[l + 1];
      const bool output_layer = (l + 2 == m.sizes.size());
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (int i = 0; i < fan_out * fan_in; ++i) {
        m.params[off + i] = output_layer ? 0.0 : bound * (2.0 * rng.next_unit() - 1.0);
      }
      off += static_cast<std::size_t>(fan_out) * fan_in + fan_out;  // biases stay zero
    }
    return m;
  }
};

/// Activations retained by a forward pass, enough for an exact backward.
struct MlpCache {
  std::vector<std::vector<double>> act;  // act[0] = input, act[L] = output
  std::vector<std::vector<double>> pre;  // preactivations per layer
};

inline double net_forward(const Mlp& m, const Point& x, MlpCache* cache = nullptr) {
  check_dim(x, static_cast<std::size_t>(m.sizes.front()), "net_forward");
  std::vector<double> cur(x.begin(), x.end());
  if (cache) {
    cache->act.assign(1, cur);
    cache->pre.clear();
  }
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < m.sizes.size(); ++l) {
    const int n_in = m.sizes[l];
    const int n_out = m.sizes[l + 1];
    const bool last = (l + 2 == m.sizes.size());
    std::vector<double> next(n_out);
    const double* w = m.params.data() + off;
    const double* b = w + static_cast<std::size_t>(n_out) * n_in;
    for (int r = 0; r < n_out; ++r) {
      double acc = b[r];
      const double* wr = w + static_cast<std::size_t>(r) * n_in;
      for (int c = 0; c < n_in; ++c) acc += wr[c] * cur[c];
      check_finite(acc, "net_forward");
      next[r] = acc;
    }
    if (cache) cache->pre.push_back(next);
    if (!last) {
      for (int r = 0; r < n_out; ++r)
        if (next[r] < 0.0) next[r] *= m.leak;
    }
    if (cache) cache->act.push_back(next);
    cur = std::move(next);
    off += static_cast<std::size_t>(n_out) * n_in + n_out;
  }
  return cur[0];
}

/// Accumulates d(loss)/d(params) into grad for a forward pass that produced
/// `cache`, given d(loss)/d(output) = dout. grad must be param-sized.
inline void net_backward(const Mlp& m, const MlpCache& cache, double dout,
                         std::vector<double>& grad) {
  const std::size_t layers = m.layer_count();
  std::vector<double> delta{dout};
  // walk layer offsets once, then go backwards
  std::vector<std::size_t> offsets(layers);
  std::size_t off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = off;
    off += static_cast<std::size_t>(m.sizes[l + 1]) * m.sizes[l] + m.sizes[l + 1];
  }
  for (std::size_t li = layers; li-- > 0;) {
    const int n_in = m.sizes[li];
    const int n_out = m.sizes[li + 1];
    const bool last = (li + 1 == layers);
    const std::vector<double>& input = cache.act[li];
    const std::vector<double>& pre = cache.pre[li];
    if (!last) {
      for (int r = 0; r < n_out; ++r)
        if (pre[r] < 0.0) delta[r] *= m.leak;
    }
    double* gw = grad.data() + offsets[li];
    double* gb = gw + static_cast<std::size_t>(n_out) * n_in;
    const double* w = m.params.data() + offsets[li];
    std::vector<double> prev_delta(n_in, 0.0);
    for (int r = 0; r < n_out; ++r) {
      const double d = delta[r];
      double* gwr = gw + static_cast<std::size_t>(r) * n_in;
      const double* wr = w + static_cast<std::size_t>(r) * n_in;
      for (int c = 0; c < n_in; ++c) {
        gwr[c] += d * input[c];
        prev_delta[c] += d * wr[c];
      }
      gb[r] += d;
    }
    delta = std::move(prev_delta);
  }
}

/// Bias-corrected Adam.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState create(std::size_t param_count, double learning_rate = 1e-3) {
    AdamState s;
    s.m.assign(param_count, 0.0);
    s.v.assign(param_count, 0.0);
    s.learning_rate = learning_rate;
    return s;
  }
};

inline void adam_step(std::vector<double>& params, const std::vector<double>& grad,
                      AdamState& st) {
  if (params.size() != grad.size() || params.size() != st.m.size())
    throw DimensionError("adam_step: shape mismatch");
  for (double g : grad) check_finite(g, "adam_step gradient");  // reject before mutating
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params[i] -= st.learning_rate * mhat / (std::sqrt(vhat) + st.epsilon);
  }
}

}  // namespace imh

#endif
