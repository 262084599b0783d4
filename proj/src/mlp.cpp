#include "opposd/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace opposd {

const char* head_name(Head h) {
  switch (h) {
    case Head::linear: return "linear";
    case Head::softmax: return "softmax";
    case Head::softplus: return "softplus";
  }
  return "linear";
}

Head head_from_name(const std::string& name) {
  if (name == "linear") return Head::linear;
  if (name == "softmax") return Head::softmax;
  if (name == "softplus") return Head::softplus;
  throw DataError("unknown head type: " + name);
}

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

MlpParams make_mlp(const std::vector<std::size_t>& layer_sizes, Head head, Rng& rng,
                   double output_scale) {
  if (layer_sizes.size() < 2) throw ConfigError("make_mlp: need at least input and output sizes");
  MlpParams p;
  p.layer_sizes = layer_sizes;
  p.head = head;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    const bool last = (l + 2 == layer_sizes.size());
    const double scale = last ? output_scale : std::sqrt(2.0 / static_cast<double>(fan_in));
    DenseMatrix w(fan_in, fan_out);
    for (double& v : w.data) v = scale * rng.normal();
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(1, fan_out, 0.0);
  }
  return p;
}

void softmax_row_inplace(double* z, std::size_t n) {
  double m = z[0];
  for (std::size_t j = 1; j < n; ++j) m = std::max(m, z[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    z[j] = std::exp(z[j] - m);
    sum += z[j];
  }
  for (std::size_t j = 0; j < n; ++j) z[j] /= sum;
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

void affine_forward(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& b,
                    DenseMatrix& out) {
  matmul(x, w, out);
  for (std::size_t i = 0; i < out.rows; ++i) {
    double* row = out.row(i);
    const double* brow = b.row(0);
    for (std::size_t j = 0; j < out.cols; ++j) row[j] += brow[j];
  }
}

void apply_head(Head head, DenseMatrix& m) {
  switch (head) {
    case Head::linear:
      return;
    case Head::softmax:
      for (std::size_t i = 0; i < m.rows; ++i) softmax_row_inplace(m.row(i), m.cols);
      return;
    case Head::softplus:
      for (double& v : m.data) v = softplus(v);
      return;
  }
}

}  // namespace

DenseMatrix mlp_forward(const MlpParams& params, const DenseMatrix& inputs,
                        ForwardCache* cache) {
  if (inputs.cols != params.input_dim()) {
    throw NumericError("mlp_forward: input dimension mismatch");
  }
  if (cache) {
    cache->inputs = inputs;
    cache->post.clear();
  }
  DenseMatrix cur = inputs;
  const std::size_t L = params.n_layers();
  for (std::size_t l = 0; l < L; ++l) {
    DenseMatrix next;
    affine_forward(cur, params.weights[l], params.biases[l], next);
    if (l + 1 < L) {
      // ReLU; the derivative at exactly 0 is taken as 0.
      for (double& v : next.data) v = v > 0.0 ? v : 0.0;
    }
    if (cache) cache->post.push_back(next);
    cur = std::move(next);
  }
  apply_head(params.head, cur);
  if (cache) cache->outputs = cur;
  return cur;
}

namespace {

MlpGradients backward_from_pre(const MlpParams& params, const ForwardCache& cache,
                               DenseMatrix delta) {
  const std::size_t L = params.n_layers();
  MlpGradients g;
  g.d_weights.resize(L);
  g.d_biases.resize(L);
  for (std::size_t li = L; li-- > 0;) {
    const DenseMatrix& layer_in = (li == 0) ? cache.inputs : cache.post[li - 1];
    matmul_at(layer_in, delta, g.d_weights[li]);
    DenseMatrix db(1, delta.cols, 0.0);
    for (std::size_t i = 0; i < delta.rows; ++i) {
      const double* row = delta.row(i);
      for (std::size_t j = 0; j < delta.cols; ++j) db(0, j) += row[j];
    }
    g.d_biases[li] = std::move(db);
    DenseMatrix d_in;
    matmul_bt(delta, params.weights[li], d_in);
    if (li > 0) {
      // Through the ReLU of the previous layer.
      const DenseMatrix& act = cache.post[li - 1];
      for (std::size_t k = 0; k < d_in.data.size(); ++k) {
        if (act.data[k] <= 0.0) d_in.data[k] = 0.0;
      }
    }
    delta = std::move(d_in);
  }
  g.d_inputs = std::move(delta);
  return g;
}

}  // namespace

MlpGradients mlp_backward(const MlpParams& params, const ForwardCache& cache,
                          const DenseMatrix& upstream) {
  if (!upstream.same_shape(cache.outputs)) {
    throw NumericError("mlp_backward: upstream shape mismatch");
  }
  DenseMatrix delta = upstream;
  switch (params.head) {
    case Head::linear:
      break;
    case Head::softmax: {
      // dz_j = p_j (g_j - sum_k g_k p_k)
      const DenseMatrix& p = cache.outputs;
      for (std::size_t i = 0; i < delta.rows; ++i) {
        const double* prow = p.row(i);
        double* grow = delta.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < delta.cols; ++j) dot += grow[j] * prow[j];
        for (std::size_t j = 0; j < delta.cols; ++j) grow[j] = prow[j] * (grow[j] - dot);
      }
      break;
    }
    case Head::softplus: {
      // softplus'(z) = sigmoid(z); recover z from the output: z = log(e^y - 1)
      // is unstable, so recompute sigma from the stored pre-activation.
      const DenseMatrix& pre = cache.post.back();
      for (std::size_t k = 0; k < delta.data.size(); ++k) {
        delta.data[k] *= sigmoid(pre.data[k]);
      }
      break;
    }
  }
  return backward_from_pre(params, cache, std::move(delta));
}

MlpGradients mlp_backward_preact(const MlpParams& params, const ForwardCache& cache,
                                 const DenseMatrix& upstream_pre) {
  if (upstream_pre.rows != cache.outputs.rows ||
      upstream_pre.cols != params.output_dim()) {
    throw NumericError("mlp_backward_preact: upstream shape mismatch");
  }
  return backward_from_pre(params, cache, upstream_pre);
}

void scale_gradients(MlpGradients& grads, double factor) {
  for (auto& m : grads.d_weights)
    for (double& v : m.data) v *= factor;
  for (auto& m : grads.d_biases)
    for (double& v : m.data) v *= factor;
  for (double& v : grads.d_inputs.data) v *= factor;
}

void add_gradients(MlpGradients& dst, const MlpGradients& src) {
  for (std::size_t l = 0; l < dst.d_weights.size(); ++l) {
    for (std::size_t k = 0; k < dst.d_weights[l].data.size(); ++k)
      dst.d_weights[l].data[k] += src.d_weights[l].data[k];
    for (std::size_t k = 0; k < dst.d_biases[l].data.size(); ++k)
      dst.d_biases[l].data[k] += src.d_biases[l].data[k];
  }
}

MlpGradients zero_gradients_like(const MlpParams& params) {
  MlpGradients g;
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    g.d_weights.emplace_back(params.weights[l].rows, params.weights[l].cols, 0.0);
    g.d_biases.emplace_back(1, params.biases[l].cols, 0.0);
  }
  return g;
}

std::vector<double*> mlp_param_ptrs(MlpParams& params) {
  std::vector<double*> out;
  out.reserve(params.param_count());
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    for (double& v : params.weights[l].data) out.push_back(&v);
    for (double& v : params.biases[l].data) out.push_back(&v);
  }
  return out;
}

std::vector<const double*> mlp_grad_ptrs(const MlpGradients& grads) {
  std::vector<const double*> out;
  for (std::size_t l = 0; l < grads.d_weights.size(); ++l) {
    for (const double& v : grads.d_weights[l].data) out.push_back(&v);
    for (const double& v : grads.d_biases[l].data) out.push_back(&v);
  }
  return out;
}

double mlp_grad_norm(const MlpGradients& grads) {
  double acc = 0.0;
  for (const auto& m : grads.d_weights)
    for (double v : m.data) acc += v * v;
  for (const auto& m : grads.d_biases)
    for (double v : m.data) acc += v * v;
  return std::sqrt(acc);
}

EntropyResult entropy_of_policy(const DenseMatrix& action_probs) {
  EntropyResult res;
  res.entropy.resize(action_probs.rows);
  res.d_logits = DenseMatrix(action_probs.rows, action_probs.cols, 0.0);
  for (std::size_t i = 0; i < action_probs.rows; ++i) {
    const double* p = action_probs.row(i);
    double h = 0.0;
    for (std::size_t j = 0; j < action_probs.cols; ++j) {
      if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
    }
    res.entropy[i] = h;
    double* d = res.d_logits.row(i);
    // dH/dz_j = -p_j (log p_j + H); the p log p -> 0 limit makes the
    // zero-probability contribution vanish.
    for (std::size_t j = 0; j < action_probs.cols; ++j) {
      d[j] = p[j] > 0.0 ? -p[j] * (std::log(p[j]) + h) : 0.0;
    }
  }
  return res;
}

}  // namespace opposd
