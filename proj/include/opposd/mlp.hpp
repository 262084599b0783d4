#pragma once

#include <cstddef>
#include <vector>

#include "opposd/common.hpp"
#include "opposd/matrix.hpp"

namespace opposd {

enum class Head { linear, softmax, softplus };

const char* head_name(Head h);
Head head_from_name(const std::string& name);

// Fixed-depth fully connected network: ReLU hidden layers, one of three
// output heads. Weights are stored input-major (in x out), y = x W + b.
struct MlpParams {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output
  std::vector<DenseMatrix> weights;      // weights[l]: sizes[l] x sizes[l+1]
  std::vector<DenseMatrix> biases;       // biases[l]: 1 x sizes[l+1]
  Head head = Head::linear;

  std::size_t n_layers() const { return weights.size(); }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t param_count() const;
};

// He-normal hidden layers, small-scale output layer, zero biases.
MlpParams make_mlp(const std::vector<std::size_t>& layer_sizes, Head head, Rng& rng,
                   double output_scale = 0.01);

// Intermediate activations from a forward pass, needed by the backward pass.
struct ForwardCache {
  DenseMatrix inputs;
  std::vector<DenseMatrix> post;  // post[l]: activations after layer l
                                  // (ReLU for hidden, pre-head for the last)
  DenseMatrix outputs;            // after the head transform
};

// Batch forward pass; inputs is batch x layer_sizes[0].
DenseMatrix mlp_forward(const MlpParams& params, const DenseMatrix& inputs,
                        ForwardCache* cache = nullptr);

struct MlpGradients {
  std::vector<DenseMatrix> d_weights;
  std::vector<DenseMatrix> d_biases;
  DenseMatrix d_inputs;
};

// Gradients of the scalar loss whose per-output derivatives are `upstream`
// (batch x output_dim, taken w.r.t. the head outputs).
MlpGradients mlp_backward(const MlpParams& params, const ForwardCache& cache,
                          const DenseMatrix& upstream);

// Same, but `upstream` is taken w.r.t. the final pre-head activations.
// Softmax losses (log-likelihood, entropy) have simple closed forms there.
MlpGradients mlp_backward_preact(const MlpParams& params, const ForwardCache& cache,
                                 const DenseMatrix& upstream_pre);

// Scales gradients in place.
void scale_gradients(MlpGradients& grads, double factor);

// Accumulate: dst += src (shapes must match).
void add_gradients(MlpGradients& dst, const MlpGradients& src);

MlpGradients zero_gradients_like(const MlpParams& params);

// Flat views over all parameters / matching gradient entries, used by the
// optimizer and by finite-difference checks. Order: per layer, weights then
// biases.
std::vector<double*> mlp_param_ptrs(MlpParams& params);
std::vector<const double*> mlp_grad_ptrs(const MlpGradients& grads);

double mlp_grad_norm(const MlpGradients& grads);

// Numerically stable primitives shared across the project.
void softmax_row_inplace(double* z, std::size_t n);
double softplus(double x);
double sigmoid(double x);

// H = -sum p log p per row plus the gradient of sum-of-row-entropies with
// respect to the softmax logits. Zero-probability entries contribute 0.
struct EntropyResult {
  VecD entropy;            // per row
  DenseMatrix d_logits;    // batch x n, gradient of sum(entropy)
};
EntropyResult entropy_of_policy(const DenseMatrix& action_probs);

}  // namespace opposd
