#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "seismo/rng.hpp"

namespace seismo::nn {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One node of the dynamically built computation graph. Values are owned
// through a shared_ptr so that pure layout ops (reshape) can alias storage.
struct Node {
  std::shared_ptr<std::vector<double>> value;
  Shape shape;
  bool requires_grad = false;
  std::vector<double> grad;  // sized lazily during backward
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // pushes this->grad into parents

  double* data() { return value->data(); }
  const double* data() const { return value->data(); }
  int64_t size() const { return static_cast<int64_t>(value->size()); }
  void ensure_grad() {
    if (grad.size() != value->size()) grad.assign(value->size(), 0.0);
  }
};

// Value-semantic handle to a graph node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double stddev,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t dim(int i) const {
    return node_->shape[static_cast<size_t>(i < 0 ? i + ndim() : i)];
  }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  int64_t numel() const { return node_->size(); }
  double* data() { return node_->data(); }
  const double* data() const { return node_->data(); }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }
  std::vector<double>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->grad.size(), 0.0);
  }

  std::shared_ptr<Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

// Runs reverse-mode accumulation from a scalar loss.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Elementwise / linear algebra ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);          // same shape
Tensor sub(const Tensor& a, const Tensor& b);          // same shape
Tensor mul(const Tensor& a, const Tensor& b);          // same shape
Tensor scale(const Tensor& a, double s);
Tensor add_bias(const Tensor& x, const Tensor& bias);  // bias over last dim
Tensor add_rows(const Tensor& x, const Tensor& rows);  // [B,N,D] + [N,D]

// matmul: a [M,K] or [B,M,K] (folded to [B*M,K]) times w [K,N].
Tensor matmul(const Tensor& a, const Tensor& w);
// batched matmul over matching leading dim: a [G,M,K], b [G,K,N].
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a = false,
           bool trans_b = false);

Tensor reshape(const Tensor& x, Shape new_shape);  // aliases storage
Tensor transpose_12(const Tensor& x);              // [A,B,C] -> [A,C,B]
Tensor narrow(const Tensor& x, int dim, int64_t start, int64_t len);
Tensor concat(const std::vector<Tensor>& xs, int dim);

// ---------------------------------------------------------------------------
// Neural-net ops
// ---------------------------------------------------------------------------

Tensor gelu(const Tensor& x);  // tanh approximation (GPT-2 convention)
Tensor sigmoid(const Tensor& x);
Tensor tanh_act(const Tensor& x);
Tensor softmax_lastdim(const Tensor& x);
Tensor dropout(const Tensor& x, double p, bool training, Rng* rng);

// conv1d: x [B,Cin,T], w [Cout,Cin,K], b [Cout]; "same" padding so that
// T_out = T / stride (T must be divisible by stride).
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride);

struct BatchNormState {
  // shared so that layer structs can be moved/copied while persistence and
  // training keep referring to the same statistics
  std::shared_ptr<std::vector<double>> running_mean;
  std::shared_ptr<std::vector<double>> running_var;
  void init(int64_t channels) {
    running_mean = std::make_shared<std::vector<double>>(
        static_cast<size_t>(channels), 0.0);
    running_var = std::make_shared<std::vector<double>>(
        static_cast<size_t>(channels), 1.0);
  }
};

// batchnorm over (B,T) per channel of x [B,C,T].
Tensor batchnorm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, bool training,
                   double momentum = 0.1, double eps = 1e-5);

// layer norm over the last dim of x [...,D].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

Tensor upsample_nearest(const Tensor& x, int factor);  // [B,C,T] -> [B,C,fT]
Tensor mean_lastdim(const Tensor& x);                  // [B,C,T] -> [B,C]

// Row-causal softmax of attention scores [G,N,N]: entries j > i are masked.
Tensor causal_softmax(const Tensor& scores);

// [B,N,H*dh] -> [B*H,N,dh] and back.
Tensor split_heads(const Tensor& x, int n_heads);
Tensor merge_heads(const Tensor& x, int n_heads);

// Latent patching: features [B,C,T] -> tokens [B,N,C*P] with N = T/P.
// Token t is the channel-major concatenation of P consecutive samples.
Tensor latent_patch(const Tensor& features, int patch);
Tensor latent_unpatch(const Tensor& tokens, int64_t channels, int patch);

// ---------------------------------------------------------------------------
// Losses (scalar outputs, shape {1})
// ---------------------------------------------------------------------------

// Mean binary cross-entropy over all elements; probabilities are clipped to
// [eps, 1-eps] and the gradient is zero on the clipped region.
Tensor bce_mean(const Tensor& pred, const Tensor& target, double eps = 1e-7);

// Cross-entropy -sum(y log p) per row of pred [B,K], averaged over rows with
// mask[b] != 0. Rows of pred must sum to 1 within tol.
Tensor ce_rows(const Tensor& pred, const Tensor& onehot,
               const std::vector<uint8_t>& mask, double eps = 1e-7,
               double norm_tol = 1e-6);

// Huber loss averaged over elements of rows with mask[b] != 0.
Tensor huber_masked(const Tensor& pred, const Tensor& target, double delta,
                    const std::vector<uint8_t>& mask);

}  // namespace seismo::nn
