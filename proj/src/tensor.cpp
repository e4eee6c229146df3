#include "octdn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace octdn {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw std::invalid_argument("tensor extents must be positive");
    n *= e;
  }
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape) {
  node_ = std::make_shared<detail::TensorNode>();
  node_->values.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
  node_->shape = std::move(shape);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw std::invalid_argument("tensor data length does not match shape " +
                                shape_to_string(shape));
  node_ = std::make_shared<detail::TensorNode>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.values().begin(), t.values().end(), v);
  return t;
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = rng.next_gaussian(0.0, stddev);
  return t;
}

double Tensor::value() const {
  if (!node_ || node_->values.size() != 1)
    throw std::invalid_argument("value() requires a single-element tensor");
  return node_->values[0];
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) throw std::invalid_argument("tensor has no gradient buffer");
  return node_->grad;
}

std::vector<double>& Tensor::grad_buffer() const {
  if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() const {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone_values() const {
  return Tensor(node_->shape, node_->values);
}

double Rng::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 in (0,1] so the log is finite.
  double u1 = 1.0 - next_unit();
  double u2 = next_unit();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 6.283185307179586476925286766559 * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

namespace {

void ensure_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x))
      throw NumericError(std::string(op) + " produced a non-finite value");
  }
}

bool wants_grad(const Tensor& t) {
  return t.requires_grad() || t.node()->op_output;
}

// C[M,N] += A[M,K] * B[K,N]
void gemm_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_abt_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
void gemm_atb_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<size_t>(p) * m;
    const double* brow = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// cols[(c,u,v),(i,j)] = img[c, i*stride - pad + u, j*stride - pad + v], 0 outside.
// The (i,j) grid extents are passed explicitly so callers can run the same
// geometry over either side of the conv/conv-transpose pair.
void im2col(const double* img, int ch, int h, int w, int kh, int kw, int stride, int pad,
            int oh, int ow, double* cols) {
  const int64_t grid = static_cast<int64_t>(oh) * ow;
  int64_t r = 0;
  for (int c = 0; c < ch; ++c) {
    const double* plane = img + static_cast<size_t>(c) * h * w;
    for (int u = 0; u < kh; ++u) {
      for (int v = 0; v < kw; ++v, ++r) {
        double* dst = cols + r * grid;
        for (int i = 0; i < oh; ++i) {
          const int y = i * stride - pad + u;
          double* drow = dst + static_cast<size_t>(i) * ow;
          if (y < 0 || y >= h) {
            std::fill(drow, drow + ow, 0.0);
            continue;
          }
          const double* srow = plane + static_cast<size_t>(y) * w;
          for (int j = 0; j < ow; ++j) {
            const int x = j * stride - pad + v;
            drow[j] = (x >= 0 && x < w) ? srow[x] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: img[c, i*stride - pad + u, j*stride - pad + v] += cols[...].
void col2im_add(const double* cols, int ch, int h, int w, int kh, int kw, int stride,
                int pad, int oh, int ow, double* img) {
  const int64_t grid = static_cast<int64_t>(oh) * ow;
  int64_t r = 0;
  for (int c = 0; c < ch; ++c) {
    double* plane = img + static_cast<size_t>(c) * h * w;
    for (int u = 0; u < kh; ++u) {
      for (int v = 0; v < kw; ++v, ++r) {
        const double* src = cols + r * grid;
        for (int i = 0; i < oh; ++i) {
          const int y = i * stride - pad + u;
          if (y < 0 || y >= h) continue;
          double* drow = plane + static_cast<size_t>(y) * w;
          const double* srow = src + static_cast<size_t>(i) * ow;
          for (int j = 0; j < ow; ++j) {
            const int x = j * stride - pad + v;
            if (x >= 0 && x < w) drow[x] += srow[j];
          }
        }
      }
    }
  }
}

void record_or_drop(Tape* tape, const char* op, std::vector<Tensor> inputs, Tensor output,
                    std::function<void()> backward) {
  if (tape) tape->record(op, std::move(inputs), std::move(output), std::move(backward));
}

void check_rank(const char* op, const Tensor& t, size_t rank, const char* what) {
  if (!t.defined() || t.shape().size() != rank)
    throw std::invalid_argument(std::string(op) + ": " + what + " must have rank " +
                                std::to_string(rank));
}

}  // namespace

void Tape::record(const char* op, std::vector<Tensor> inputs, Tensor output,
                  std::function<void()> backward) {
  output.node()->op_output = true;
  nodes_.push_back(Node{op, std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_)
    throw std::invalid_argument("tape already consumed; call reset() before reuse");
  if (!loss.defined() || loss.size() != 1)
    throw std::invalid_argument("backward requires a scalar loss");
  bool found = false;
  for (const Node& n : nodes_) {
    if (n.output.node() == loss.node()) {
      found = true;
      break;
    }
  }
  if (!found) throw std::invalid_argument("loss tensor was not produced by this tape");

  loss.grad_buffer()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;  // branch not reached from the loss
    it->backward();
  }
  for (const Node& n : nodes_) {
    for (const Tensor& in : n.inputs) {
      if (in.has_grad()) ensure_finite("backward", in.node()->grad);
    }
  }
  consumed_ = true;
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

// ---------------------------------------------------------------------------
// conv2d / conv2d_transpose
// ---------------------------------------------------------------------------

Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding) {
  check_rank("conv2d", input, 4, "input");
  check_rank("conv2d", kernel, 4, "kernel");
  check_rank("conv2d", bias, 1, "bias");
  if (stride <= 0) throw std::invalid_argument("conv2d: stride must be positive");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be non-negative");

  const int n = input.shape()[0], c = input.shape()[1], h = input.shape()[2],
            w = input.shape()[3];
  const int o = kernel.shape()[0], kc = kernel.shape()[1], kh = kernel.shape()[2],
            kw = kernel.shape()[3];
  if (kc != c)
    throw std::invalid_argument("conv2d: kernel channels " + std::to_string(kc) +
                                " do not match input channels " + std::to_string(c));
  if (bias.shape()[0] != o)
    throw std::invalid_argument("conv2d: bias length does not match output channels");
  if (kh > h + 2 * padding || kw > w + 2 * padding)
    throw std::invalid_argument("conv2d: kernel larger than padded input");

  const int oh = (h + 2 * padding - kh) / stride + 1;
  const int ow = (w + 2 * padding - kw) / stride + 1;
  const int64_t grid = static_cast<int64_t>(oh) * ow;
  const int ckk = c * kh * kw;

  Tensor out({n, o, oh, ow});
  std::vector<double> cols(static_cast<size_t>(ckk) * grid);
  const double* kmat = kernel.values().data();  // [O, C*kH*kW]
  for (int b = 0; b < n; ++b) {
    im2col(input.values().data() + static_cast<size_t>(b) * c * h * w, c, h, w, kh, kw,
           stride, padding, oh, ow, cols.data());
    double* dst = out.values().data() + static_cast<size_t>(b) * o * grid;
    gemm_acc(kmat, cols.data(), dst, o, ckk, static_cast<int>(grid));
    for (int oc = 0; oc < o; ++oc) {
      const double bv = bias.values()[oc];
      double* row = dst + static_cast<size_t>(oc) * grid;
      for (int64_t j = 0; j < grid; ++j) row[j] += bv;
    }
  }
  ensure_finite("conv2d", out.values());

  record_or_drop(tape, "conv2d", {input, kernel, bias}, out,
                 [input, kernel, bias, out, stride, padding, n, c, h, w, o, kh, kw, oh, ow,
                  ckk, grid]() mutable {
                   const std::vector<double>& gout = out.grad();
                   std::vector<double> cols(static_cast<size_t>(ckk) * grid);
                   std::vector<double> dcols;
                   const bool gx = wants_grad(input);
                   const bool gk = wants_grad(kernel);
                   const bool gb = wants_grad(bias);
                   if (gx) dcols.resize(cols.size());
                   for (int b = 0; b < n; ++b) {
                     const double* gy = gout.data() + static_cast<size_t>(b) * o * grid;
                     if (gk) {
                       im2col(input.values().data() + static_cast<size_t>(b) * c * h * w, c,
                              h, w, kh, kw, stride, padding, oh, ow, cols.data());
                       gemm_abt_acc(gy, cols.data(), kernel.grad_buffer().data(), o,
                                    static_cast<int>(grid), ckk);
                     }
                     if (gx) {
                       std::fill(dcols.begin(), dcols.end(), 0.0);
                       gemm_atb_acc(kernel.values().data(), gy, dcols.data(), ckk, o,
                                    static_cast<int>(grid));
                       col2im_add(dcols.data(), c, h, w, kh, kw, stride, padding, oh, ow,
                                  input.grad_buffer().data() +
                                      static_cast<size_t>(b) * c * h * w);
                     }
                     if (gb) {
                       double* db = bias.grad_buffer().data();
                       for (int oc = 0; oc < o; ++oc) {
                         const double* row = gy + static_cast<size_t>(oc) * grid;
                         double acc = 0.0;
                         for (int64_t j = 0; j < grid; ++j) acc += row[j];
                         db[oc] += acc;
                       }
                     }
                   }
                 });
  return out;
}

Tensor conv2d_transpose(Tape* tape, const Tensor& input, const Tensor& kernel,
                        const Tensor& bias, int stride, int padding) {
  check_rank("conv2d_transpose", input, 4, "input");
  check_rank("conv2d_transpose", kernel, 4, "kernel");
  check_rank("conv2d_transpose", bias, 1, "bias");
  if (stride <= 0) throw std::invalid_argument("conv2d_transpose: stride must be positive");
  if (padding < 0)
    throw std::invalid_argument("conv2d_transpose: padding must be non-negative");

  const int n = input.shape()[0], c = input.shape()[1], h = input.shape()[2],
            w = input.shape()[3];
  const int kc = kernel.shape()[0], o = kernel.shape()[1], kh = kernel.shape()[2],
            kw = kernel.shape()[3];
  if (kc != c)
    throw std::invalid_argument("conv2d_transpose: kernel dim 0 must equal input channels");
  if (bias.shape()[0] != o)
    throw std::invalid_argument("conv2d_transpose: bias length mismatch");

  const int oh = (h - 1) * stride - 2 * padding + kh;
  const int ow = (w - 1) * stride - 2 * padding + kw;
  if (oh <= 0 || ow <= 0)
    throw std::invalid_argument("conv2d_transpose: output would be empty");

  const int okk = o * kh * kw;
  const int64_t grid = static_cast<int64_t>(h) * w;

  Tensor out({n, o, oh, ow});
  std::vector<double> cols(static_cast<size_t>(okk) * grid);
  for (int b = 0; b < n; ++b) {
    std::fill(cols.begin(), cols.end(), 0.0);
    // cols[(o,u,v),(i,j)] = sum_c kernel[c,o,u,v] * x[b,c,i,j]
    gemm_atb_acc(kernel.values().data(),
                 input.values().data() + static_cast<size_t>(b) * c * grid, cols.data(),
                 okk, c, static_cast<int>(grid));
    double* dst = out.values().data() + static_cast<size_t>(b) * o * oh * ow;
    col2im_add(cols.data(), o, oh, ow, kh, kw, stride, padding, h, w, dst);
    for (int oc = 0; oc < o; ++oc) {
      const double bv = bias.values()[oc];
      double* plane = dst + static_cast<size_t>(oc) * oh * ow;
      for (int64_t j = 0; j < static_cast<int64_t>(oh) * ow; ++j) plane[j] += bv;
    }
  }
  ensure_finite("conv2d_transpose", out.values());

  record_or_drop(
      tape, "conv2d_transpose", {input, kernel, bias}, out,
      [input, kernel, bias, out, stride, padding, n, c, h, w, o, kh, kw, oh, ow, okk,
       grid]() mutable {
        const std::vector<double>& gout = out.grad();
        std::vector<double> cols(static_cast<size_t>(okk) * grid);
        const bool gx = wants_grad(input);
        const bool gk = wants_grad(kernel);
        const bool gb = wants_grad(bias);
        for (int b = 0; b < n; ++b) {
          const double* gz = gout.data() + static_cast<size_t>(b) * o * oh * ow;
          if (gx || gk) {
            // cols of the upstream gradient over the (h,w) grid
            im2col(gz, o, oh, ow, kh, kw, stride, padding, h, w, cols.data());
          }
          if (gx) {
            // dX[b] = kernel[C, O*kH*kW] * cols
            gemm_acc(kernel.values().data(), cols.data(),
                     input.grad_buffer().data() + static_cast<size_t>(b) * c * grid, c, okk,
                     static_cast<int>(grid));
          }
          if (gk) {
            // dK[c,(o,u,v)] += X[b][c,:] * cols[(o,u,v),:]^T
            gemm_abt_acc(input.values().data() + static_cast<size_t>(b) * c * grid,
                         cols.data(), kernel.grad_buffer().data(), c,
                         static_cast<int>(grid), okk);
          }
          if (gb) {
            double* db = bias.grad_buffer().data();
            for (int oc = 0; oc < o; ++oc) {
              const double* plane = gz + static_cast<size_t>(oc) * oh * ow;
              double acc = 0.0;
              for (int64_t j = 0; j < static_cast<int64_t>(oh) * ow; ++j) acc += plane[j];
              db[oc] += acc;
            }
          }
        }
      });
  return out;
}

// ---------------------------------------------------------------------------
// pointwise & reductions
// ---------------------------------------------------------------------------

Tensor relu(Tape* tape, const Tensor& x) {
  if (!x.defined()) throw std::invalid_argument("relu: undefined tensor");
  Tensor out(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  ensure_finite("relu", ov);

  record_or_drop(tape, "relu", {x}, out, [x, out]() mutable {
    if (!wants_grad(x)) return;
    const auto& g = out.grad();
    const auto& xv = x.values();
    auto& gx = x.grad_buffer();
    for (size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) gx[i] += g[i];
  });
  return out;
}

Tensor sigmoid(Tape* tape, const Tensor& x) {
  if (!x.defined()) throw std::invalid_argument("sigmoid: undefined tensor");
  Tensor out(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    if (v >= 0.0) {
      ov[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      ov[i] = e / (1.0 + e);
    }
  }
  ensure_finite("sigmoid", ov);

  record_or_drop(tape, "sigmoid", {x}, out, [x, out]() mutable {
    if (!wants_grad(x)) return;
    const auto& g = out.grad();
    const auto& ov = out.values();
    auto& gx = x.grad_buffer();
    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * ov[i] * (1.0 - ov[i]);
  });
  return out;
}

Tensor affine(Tape* tape, const Tensor& x, const Tensor& weight, const Tensor& bias) {
  check_rank("affine", x, 2, "input");
  check_rank("affine", weight, 2, "weight");
  check_rank("affine", bias, 1, "bias");
  const int n = x.shape()[0], f = x.shape()[1];
  const int g = weight.shape()[0];
  if (weight.shape()[1] != f)
    throw std::invalid_argument("affine: weight inner dimension " +
                                std::to_string(weight.shape()[1]) +
                                " does not match input features " + std::to_string(f));
  if (bias.shape()[0] != g) throw std::invalid_argument("affine: bias length mismatch");

  Tensor out({n, g});
  gemm_abt_acc(x.values().data(), weight.values().data(), out.values().data(), n, f, g);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < g; ++j) out.values()[static_cast<size_t>(i) * g + j] += bias.values()[j];
  ensure_finite("affine", out.values());

  record_or_drop(tape, "affine", {x, weight, bias}, out, [x, weight, bias, out, n, f,
                                                          g]() mutable {
    const auto& gy = out.grad();
    if (wants_grad(x))
      gemm_acc(gy.data(), weight.values().data(), x.grad_buffer().data(), n, g, f);
    if (wants_grad(weight))
      gemm_atb_acc(gy.data(), x.values().data(), weight.grad_buffer().data(), g, n, f);
    if (wants_grad(bias)) {
      auto& gb = bias.grad_buffer();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < g; ++j) gb[j] += gy[static_cast<size_t>(i) * g + j];
    }
  });
  return out;
}

Tensor global_avg_pool(Tape* tape, const Tensor& x) {
  check_rank("global_avg_pool", x, 4, "input");
  const int n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  const int64_t hw = static_cast<int64_t>(h) * w;
  Tensor out({n, c});
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* plane = x.values().data() + (static_cast<size_t>(b) * c + ch) * hw;
      double acc = 0.0;
      for (int64_t i = 0; i < hw; ++i) acc += plane[i];
      out.values()[static_cast<size_t>(b) * c + ch] = acc / static_cast<double>(hw);
    }
  }
  ensure_finite("global_avg_pool", out.values());

  record_or_drop(tape, "global_avg_pool", {x}, out, [x, out, n, c, hw]() mutable {
    if (!wants_grad(x)) return;
    const auto& g = out.grad();
    auto& gx = x.grad_buffer();
    for (int b = 0; b < n; ++b) {
      for (int ch = 0; ch < c; ++ch) {
        const double gv = g[static_cast<size_t>(b) * c + ch] / static_cast<double>(hw);
        double* plane = gx.data() + (static_cast<size_t>(b) * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) plane[i] += gv;
      }
    }
  });
  return out;
}

Tensor softmax_cross_entropy(Tape* tape, const Tensor& logits,
                             const std::vector<int>& labels) {
  check_rank("softmax_cross_entropy", logits, 2, "logits");
  const int n = logits.shape()[0], k = logits.shape()[1];
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("softmax_cross_entropy: labels length mismatch");
  for (int lab : labels)
    if (lab < 0 || lab >= k)
      throw std::invalid_argument("softmax_cross_entropy: label out of range [0," +
                                  std::to_string(k) + ")");

  // probs saved for the backward pass
  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(n) * k);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = logits.values().data() + static_cast<size_t>(i) * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    loss += lse - row[labels[i]];
    double* prow = probs->data() + static_cast<size_t>(i) * k;
    for (int j = 0; j < k; ++j) prow[j] = std::exp(row[j] - lse);
  }
  loss /= static_cast<double>(n);

  Tensor out = Tensor::scalar(loss);
  ensure_finite("softmax_cross_entropy", out.values());

  record_or_drop(tape, "softmax_cross_entropy", {logits}, out,
                 [logits, out, labels, probs, n, k]() mutable {
                   if (!wants_grad(logits)) return;
                   const double g = out.grad()[0] / static_cast<double>(n);
                   auto& gx = logits.grad_buffer();
                   for (int i = 0; i < n; ++i) {
                     const double* prow = probs->data() + static_cast<size_t>(i) * k;
                     double* grow = gx.data() + static_cast<size_t>(i) * k;
                     for (int j = 0; j < k; ++j) grow[j] += g * prow[j];
                     grow[labels[i]] -= g;
                   }
                 });
  return out;
}

Tensor mse(Tape* tape, const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined()) throw std::invalid_argument("mse: undefined tensor");
  if (!a.same_shape(b))
    throw std::invalid_argument("mse: shapes differ, " + shape_to_string(a.shape()) +
                                " vs " + shape_to_string(b.shape()));
  const auto& av = a.values();
  const auto& bv = b.values();
  double acc = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  const double inv_n = 1.0 / static_cast<double>(av.size());
  Tensor out = Tensor::scalar(acc * inv_n);
  ensure_finite("mse", out.values());

  record_or_drop(tape, "mse", {a, b}, out, [a, b, out, inv_n]() mutable {
    const double g = out.grad()[0];
    const auto& av = a.values();
    const auto& bv = b.values();
    const bool ga = wants_grad(a), gb = wants_grad(b);
    if (!ga && !gb) return;
    auto* gav = ga ? &a.grad_buffer() : nullptr;
    auto* gbv = gb ? &b.grad_buffer() : nullptr;
    for (size_t i = 0; i < av.size(); ++i) {
      const double d = 2.0 * (av[i] - bv[i]) * inv_n * g;
      if (gav) (*gav)[i] += d;
      if (gbv) (*gbv)[i] -= d;
    }
  });
  return out;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined()) throw std::invalid_argument("add: undefined tensor");
  if (!a.same_shape(b))
    throw std::invalid_argument("add: shapes differ, " + shape_to_string(a.shape()) +
                                " vs " + shape_to_string(b.shape()));
  Tensor out(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[i];
  ensure_finite("add", ov);

  record_or_drop(tape, "add", {a, b}, out, [a, b, out]() mutable {
    const auto& g = out.grad();
    if (wants_grad(a)) {
      auto& ga = a.grad_buffer();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (wants_grad(b)) {
      auto& gb = b.grad_buffer();
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
  return out;
}

Tensor scale(Tape* tape, const Tensor& a, double factor) {
  if (!a.defined()) throw std::invalid_argument("scale: undefined tensor");
  Tensor out(a.shape());
  const auto& av = a.values();
  auto& ov = out.values();
  for (size_t i = 0; i < av.size(); ++i) ov[i] = factor * av[i];
  ensure_finite("scale", ov);

  record_or_drop(tape, "scale", {a}, out, [a, out, factor]() mutable {
    if (!wants_grad(a)) return;
    const auto& g = out.grad();
    auto& ga = a.grad_buffer();
    for (size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamState::AdamState(const std::vector<Tensor>& params, AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
    throw std::invalid_argument("adam: betas must lie in [0,1)");
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("adam: eps must be positive");
  m_.reserve(params.size());
  v_.reserve(params.size());
  shapes_.reserve(params.size());
  for (const Tensor& p : params) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
    shapes_.push_back(p.shape());
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (params.size() != state.m_.size())
    throw std::invalid_argument("adam_step: parameter list does not match state");
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].shape() != state.shapes_[i])
      throw std::invalid_argument("adam_step: parameter shape drifted from state");

  const AdamConfig& c = state.cfg_;
  state.t_ += 1;
  const double t = static_cast<double>(state.t_);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const std::vector<double>& g = p.grad();  // throws when absent
    ensure_finite("adam_step gradient", g);
    auto& m = state.m_[i];
    auto& v = state.v_[i];
    auto& val = p.values();
    for (size_t j = 0; j < val.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      val[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace octdn
