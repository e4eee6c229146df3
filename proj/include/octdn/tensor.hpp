#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "octdn/rng.hpp"

namespace octdn {

// Thrown when a forward or backward pass produces NaN/Inf. Values are
// required to stay finite through every pass; the training loop turns this
// into a divergence abort.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct TensorNode {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until needed; same length as values once allocated
  bool requires_grad = false;
  bool op_output = false;  // set when a tape node produced this tensor
};

}  // namespace detail

// Dense row-major tensor with shared-ownership value semantics: copies are
// cheap handles onto the same storage, so the tape can hold inputs/outputs
// without duplicating buffers.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v);
  static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int64_t size() const { return static_cast<int64_t>(node_->values.size()); }

  // Tensor is a handle: const applies to the handle, not the shared storage,
  // so values remain reachable for mutation through copies held on the tape.
  std::vector<double>& values() const { return node_->values; }

  // Scalar accessor; throws unless the tensor holds exactly one element.
  double value() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    node_->requires_grad = b;
    return *this;
  }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  // Allocates (zero-filled) on first use.
  std::vector<double>& grad_buffer() const;
  void zero_grad() const;

  // Deep copy of values only (fresh node, no grad, no flags).
  Tensor clone_values() const;

  bool same_shape(const Tensor& other) const { return node_->shape == other.node_->shape; }
  detail::TensorNode* node() const { return node_.get(); }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

// Reverse-mode tape. Ops append nodes in execution order (inputs always
// precede their consumers), backward() replays them once in reverse.
// A tape and the tensors it references are confined to one logical thread
// for the duration of a forward/backward cycle.
class Tape {
 public:
  struct Node {
    const char* op;
    std::vector<Tensor> inputs;
    Tensor output;
    std::function<void()> backward;
  };

  void record(const char* op, std::vector<Tensor> inputs, Tensor output,
              std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients onto every tensor
  // that requires them. loss must be a scalar produced by this tape.
  // Gradients sum when a tensor feeds multiple nodes. Calling backward twice
  // without reset() is an error.
  void backward(const Tensor& loss);

  void reset();
  size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Passing tape == nullptr runs pure forward
// (inference) with no recording. All ops validate shapes and reject
// non-finite outputs.
// ---------------------------------------------------------------------------

// Cross-correlation convolution (no kernel flip), zero padding.
//   input  [N,C,H,W], kernel [O,C,kH,kW], bias [O]
//   output [N,O,H',W'],  H' = floor((H + 2*padding - kH)/stride) + 1
Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding);

// Exact adjoint of conv2d for matching (stride, padding, kH, kW).
//   input  [N,C,H,W], kernel [C,O,kH,kW], bias [O]
//   output [N,O,H'',W''],  H'' = (H - 1)*stride - 2*padding + kH
Tensor conv2d_transpose(Tape* tape, const Tensor& input, const Tensor& kernel,
                        const Tensor& bias, int stride, int padding);

// Elementwise max(x, 0). Subgradient at 0 is taken as 0.
Tensor relu(Tape* tape, const Tensor& x);

// Elementwise logistic 1/(1+exp(-x)); output strictly inside (0,1).
Tensor sigmoid(Tape* tape, const Tensor& x);

// x [N,F] * weight[G,F]^T + bias[G] -> [N,G]
Tensor affine(Tape* tape, const Tensor& x, const Tensor& weight, const Tensor& bias);

// Per-channel spatial mean: [N,C,H,W] -> [N,C]
Tensor global_avg_pool(Tape* tape, const Tensor& x);

// Mean over the batch of -log softmax(logits)[label], computed via
// log-sum-exp. logits [N,K], labels in [0,K).
Tensor softmax_cross_entropy(Tape* tape, const Tensor& logits, const std::vector<int>& labels);

// Mean over all elements of (a-b)^2. Shapes must match exactly.
Tensor mse(Tape* tape, const Tensor& a, const Tensor& b);

// Elementwise a + b (identical shapes).
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);

// Elementwise factor * a.
Tensor scale(Tape* tape, const Tensor& a, double factor);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers mirroring a fixed parameter list. t counts
// completed steps and increases by exactly 1 per adam_step.
class AdamState {
 public:
  AdamState(const std::vector<Tensor>& params, AdamConfig cfg);

  long long step_count() const { return t_; }
  AdamConfig& config() { return cfg_; }
  const AdamConfig& config() const { return cfg_; }

  friend void adam_step(std::vector<Tensor>& params, AdamState& state);

 private:
  AdamConfig cfg_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::vector<std::vector<int>> shapes_;
};

// Standard bias-corrected Adam update reading each parameter's grad buffer.
// Throws on missing/non-finite gradients or on a shape drift from the state.
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace octdn
