#include "seismo/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace seismo::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    out += std::to_string(s[i]);
    if (i + 1 < s.size()) out += " x ";
  }
  return out + "]";
}

namespace {

std::shared_ptr<Node> make_node(Shape shape, std::vector<Tensor> parents) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::make_shared<std::vector<double>>(
      static_cast<size_t>(numel(n->shape)), 0.0);
  for (const auto& p : parents) {
    n->requires_grad = n->requires_grad || p.requires_grad();
    n->parents.push_back(p.node());
  }
  return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::make_shared<std::vector<double>>(
      static_cast<size_t>(nn::numel(n->shape)), 0.0);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.node()->value->begin(), t.node()->value->end(), v);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  if (static_cast<int64_t>(data.size()) != nn::numel(shape)) {
    throw ShapeError("from_data: element count does not match shape " +
                     shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::make_shared<std::vector<double>>(std::move(data));
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (auto& v : *t.node()->value) v = rng.normal(0.0, stddev);
  return t;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item(): tensor has " + std::to_string(numel()) +
                     " elements");
  }
  return data()[0];
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) throw ShapeError("backward: loss must be scalar");
  // Iterative post-order DFS to get a topological order.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->ensure_grad();
  loss.node()->grad[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->requires_grad) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  auto n = make_node(a.shape(), {a, b});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = n->data();
  for (int64_t i = 0; i < n->size(); ++i) po[i] = pa[i] + pb[i];
  n->backward_fn = [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node* p = self.parents[k].get();
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (int64_t i = 0; i < self.size(); ++i) p->grad[i] += self.grad[i];
    }
  };
  return Tensor(n);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  auto n = make_node(a.shape(), {a, b});
  for (int64_t i = 0; i < n->size(); ++i)
    n->data()[i] = a.data()[i] - b.data()[i];
  n->backward_fn = [](Node& self) {
    Node* pa = self.parents[0].get();
    Node* pb = self.parents[1].get();
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (int64_t i = 0; i < self.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (int64_t i = 0; i < self.size(); ++i) pb->grad[i] -= self.grad[i];
    }
  };
  return Tensor(n);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  auto n = make_node(a.shape(), {a, b});
  for (int64_t i = 0; i < n->size(); ++i)
    n->data()[i] = a.data()[i] * b.data()[i];
  n->backward_fn = [](Node& self) {
    Node* pa = self.parents[0].get();
    Node* pb = self.parents[1].get();
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (int64_t i = 0; i < self.size(); ++i)
        pa->grad[i] += self.grad[i] * pb->value->at(static_cast<size_t>(i));
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (int64_t i = 0; i < self.size(); ++i)
        pb->grad[i] += self.grad[i] * pa->value->at(static_cast<size_t>(i));
    }
  };
  return Tensor(n);
}

Tensor scale(const Tensor& a, double s) {
  auto n = make_node(a.shape(), {a});
  for (int64_t i = 0; i < n->size(); ++i) n->data()[i] = a.data()[i] * s;
  n->backward_fn = [s](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t i = 0; i < self.size(); ++i) p->grad[i] += self.grad[i] * s;
  };
  return Tensor(n);
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const int64_t k = x.dim(-1);
  if (bias.ndim() != 1 || bias.dim(0) != k) {
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) +
                     " does not match last dim of " + shape_str(x.shape()));
  }
  auto n = make_node(x.shape(), {x, bias});
  const int64_t rows = x.numel() / k;
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < k; ++j)
      n->data()[r * k + j] = x.data()[r * k + j] + bias.data()[j];
  n->backward_fn = [k, rows](Node& self) {
    Node* px = self.parents[0].get();
    Node* pb = self.parents[1].get();
    if (px->requires_grad) {
      px->ensure_grad();
      for (int64_t i = 0; i < self.size(); ++i) px->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < k; ++j) pb->grad[j] += self.grad[r * k + j];
    }
  };
  return Tensor(n);
}

Tensor add_rows(const Tensor& x, const Tensor& rows) {
  if (x.ndim() != 3 || rows.ndim() != 2 || x.dim(1) != rows.dim(0) ||
      x.dim(2) != rows.dim(1)) {
    throw ShapeError("add_rows: " + shape_str(x.shape()) + " + " +
                     shape_str(rows.shape()));
  }
  const int64_t b = x.dim(0), nrow = x.dim(1), d = x.dim(2);
  auto n = make_node(x.shape(), {x, rows});
  for (int64_t i = 0; i < b; ++i)
    for (int64_t r = 0; r < nrow; ++r)
      for (int64_t j = 0; j < d; ++j)
        n->data()[(i * nrow + r) * d + j] =
            x.data()[(i * nrow + r) * d + j] + rows.data()[r * d + j];
  n->backward_fn = [b, nrow, d](Node& self) {
    Node* px = self.parents[0].get();
    Node* pr = self.parents[1].get();
    if (px->requires_grad) {
      px->ensure_grad();
      for (int64_t i = 0; i < self.size(); ++i) px->grad[i] += self.grad[i];
    }
    if (pr->requires_grad) {
      pr->ensure_grad();
      for (int64_t i = 0; i < b; ++i)
        for (int64_t r = 0; r < nrow; ++r)
          for (int64_t j = 0; j < d; ++j)
            pr->grad[r * d + j] += self.grad[(i * nrow + r) * d + j];
    }
  };
  return Tensor(n);
}

// ---------------------------------------------------------------------------
// Matmul / layout
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& w) {
  if (w.ndim() != 2) throw ShapeError("matmul: w must be 2-D");
  const int64_t k = w.dim(0), out = w.dim(1);
  if (a.dim(-1) != k) {
    throw ShapeError("matmul: inner dims " + shape_str(a.shape()) + " * " +
                     shape_str(w.shape()));
  }
  const int64_t m = a.numel() / k;
  Shape out_shape = a.shape();
  out_shape.back() = out;
  auto n = make_node(out_shape, {a, w});
  ConstMatMap ma(a.data(), m, k);
  ConstMatMap mw(w.data(), k, out);
  MatMap mo(n->data(), m, out);
  mo.noalias() = ma * mw;
  n->backward_fn = [m, k, out](Node& self) {
    Node* pa = self.parents[0].get();
    Node* pw = self.parents[1].get();
    ConstMatMap g(self.grad.data(), m, out);
    if (pa->requires_grad) {
      pa->ensure_grad();
      ConstMatMap mw(pw->data(), k, out);
      MatMap ga(pa->grad.data(), m, k);
      ga.noalias() += g * mw.transpose();
    }
    if (pw->requires_grad) {
      pw->ensure_grad();
      ConstMatMap ma(pa->data(), m, k);
      MatMap gw(pw->grad.data(), k, out);
      gw.noalias() += ma.transpose() * g;
    }
  };
  return Tensor(n);
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0)) {
    throw ShapeError("bmm: need matching 3-D inputs");
  }
  const int64_t g = a.dim(0);
  const int64_t m = trans_a ? a.dim(2) : a.dim(1);
  const int64_t k = trans_a ? a.dim(1) : a.dim(2);
  const int64_t kb = trans_b ? b.dim(2) : b.dim(1);
  const int64_t p = trans_b ? b.dim(1) : b.dim(2);
  if (k != kb) {
    throw ShapeError("bmm: inner dims " + shape_str(a.shape()) + " * " +
                     shape_str(b.shape()));
  }
  auto n = make_node({g, m, p}, {a, b});
  const int64_t sa = a.dim(1) * a.dim(2), sb = b.dim(1) * b.dim(2);
  for (int64_t i = 0; i < g; ++i) {
    ConstMatMap ma(a.data() + i * sa, a.dim(1), a.dim(2));
    ConstMatMap mb(b.data() + i * sb, b.dim(1), b.dim(2));
    MatMap mo(n->data() + i * m * p, m, p);
    if (!trans_a && !trans_b) mo.noalias() = ma * mb;
    else if (!trans_a && trans_b) mo.noalias() = ma * mb.transpose();
    else if (trans_a && !trans_b) mo.noalias() = ma.transpose() * mb;
    else mo.noalias() = ma.transpose() * mb.transpose();
  }
  n->backward_fn = [g, m, p, sa, sb, trans_a, trans_b](Node& self) {
    Node* pa = self.parents[0].get();
    Node* pb = self.parents[1].get();
    const int64_t ar = pa->shape[1], ac = pa->shape[2];
    const int64_t br = pb->shape[1], bc = pb->shape[2];
    if (pa->requires_grad) pa->ensure_grad();
    if (pb->requires_grad) pb->ensure_grad();
    for (int64_t i = 0; i < g; ++i) {
      ConstMatMap gy(self.grad.data() + i * m * p, m, p);
      ConstMatMap ma(pa->data() + i * sa, ar, ac);
      ConstMatMap mb(pb->data() + i * sb, br, bc);
      if (pa->requires_grad) {
        MatMap ga(pa->grad.data() + i * sa, ar, ac);
        if (!trans_a && !trans_b) ga.noalias() += gy * mb.transpose();
        else if (!trans_a && trans_b) ga.noalias() += gy * mb;
        else if (trans_a && !trans_b) ga.noalias() += mb * gy.transpose();
        else ga.noalias() += mb.transpose() * gy.transpose();
      }
      if (pb->requires_grad) {
        MatMap gb(pb->grad.data() + i * sb, br, bc);
        if (!trans_a && !trans_b) gb.noalias() += ma.transpose() * gy;
        else if (!trans_a && trans_b) gb.noalias() += gy.transpose() * ma;
        else if (trans_a && !trans_b) gb.noalias() += ma * gy;
        else gb.noalias() += gy.transpose() * ma.transpose();
      }
    }
  };
  return Tensor(n);
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (numel(new_shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " +
                     shape_str(new_shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(new_shape);
  n->value = x.node()->value;  // alias
  n->requires_grad = x.requires_grad();
  n->parents.push_back(x.node());
  n->backward_fn = [](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t i = 0; i < self.size(); ++i) p->grad[i] += self.grad[i];
  };
  return Tensor(n);
}

Tensor transpose_12(const Tensor& x) {
  if (x.ndim() != 3) throw ShapeError("transpose_12: need 3-D input");
  const int64_t a = x.dim(0), b = x.dim(1), c = x.dim(2);
  auto n = make_node({a, c, b}, {x});
  for (int64_t i = 0; i < a; ++i)
    for (int64_t j = 0; j < b; ++j)
      for (int64_t k = 0; k < c; ++k)
        n->data()[(i * c + k) * b + j] = x.data()[(i * b + j) * c + k];
  n->backward_fn = [a, b, c](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t i = 0; i < a; ++i)
      for (int64_t j = 0; j < b; ++j)
        for (int64_t k = 0; k < c; ++k)
          p->grad[(i * b + j) * c + k] += self.grad[(i * c + k) * b + j];
  };
  return Tensor(n);
}

Tensor narrow(const Tensor& x, int dim, int64_t start, int64_t len) {
  const auto& s = x.shape();
  if (dim < 0 || dim >= x.ndim() || start < 0 ||
      start + len > s[static_cast<size_t>(dim)]) {
    throw ShapeError("narrow: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of " +
                     shape_str(s));
  }
  Shape out_shape = s;
  out_shape[static_cast<size_t>(dim)] = len;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < dim; ++i) outer *= s[static_cast<size_t>(i)];
  for (int i = dim + 1; i < x.ndim(); ++i) inner *= s[static_cast<size_t>(i)];
  const int64_t full = s[static_cast<size_t>(dim)];
  auto n = make_node(out_shape, {x});
  for (int64_t o = 0; o < outer; ++o)
    std::copy_n(x.data() + (o * full + start) * inner, len * inner,
                n->data() + o * len * inner);
  n->backward_fn = [outer, inner, full, start, len](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < len * inner; ++i)
        p->grad[(o * full + start) * inner + i] +=
            self.grad[o * len * inner + i];
  };
  return Tensor(n);
}

Tensor concat(const std::vector<Tensor>& xs, int dim) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  Shape out_shape = xs[0].shape();
  int64_t total = 0;
  for (const auto& t : xs) {
    Shape s = t.shape();
    s[static_cast<size_t>(dim)] = 0;
    Shape ref = out_shape;
    ref[static_cast<size_t>(dim)] = 0;
    if (s != ref) throw ShapeError("concat: incompatible shapes");
    total += t.dim(dim);
  }
  out_shape[static_cast<size_t>(dim)] = total;
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < dim; ++i) outer *= out_shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(dim) + 1; i < out_shape.size(); ++i)
    inner *= out_shape[i];
  auto n = make_node(out_shape, xs);
  std::vector<int64_t> lens;
  lens.reserve(xs.size());
  for (const auto& t : xs) lens.push_back(t.dim(dim));
  int64_t offset = 0;
  for (size_t t = 0; t < xs.size(); ++t) {
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(xs[t].data() + o * lens[t] * inner, lens[t] * inner,
                  n->data() + (o * total + offset) * inner);
    offset += lens[t];
  }
  n->backward_fn = [outer, inner, total, lens](Node& self) {
    int64_t off = 0;
    for (size_t t = 0; t < self.parents.size(); ++t) {
      Node* p = self.parents[t].get();
      if (p->requires_grad) {
        p->ensure_grad();
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t i = 0; i < lens[t] * inner; ++i)
            p->grad[o * lens[t] * inner + i] +=
                self.grad[(o * total + off) * inner + i];
      }
      off += lens[t];
    }
  };
  return Tensor(n);
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

namespace {
constexpr double kGeluC = 0.7978845608028653558798921198687;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& x) {
  auto n = make_node(x.shape(), {x});
  for (int64_t i = 0; i < n->size(); ++i) {
    const double v = x.data()[i];
    n->data()[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  n->backward_fn = [](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t i = 0; i < self.size(); ++i) {
      const double v = p->value->at(static_cast<size_t>(i));
      const double u = kGeluC * (v + kGeluA * v * v * v);
      const double t = std::tanh(u);
      const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      p->grad[i] += self.grad[i] * d;
    }
  };
  return Tensor(n);
}

Tensor sigmoid(const Tensor& x) {
  auto n = make_node(x.shape(), {x});
  for (int64_t i = 0; i < n->size(); ++i)
    n->data()[i] = 1.0 / (1.0 + std::exp(-x.data()[i]));
  auto out_value = n->value;
  n->backward_fn = [out_value](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t i = 0; i < self.size(); ++i) {
      const double s = out_value->at(static_cast<size_t>(i));
      p->grad[i] += self.grad[i] * s * (1.0 - s);
    }
  };
  return Tensor(n);
}

Tensor tanh_act(const Tensor& x) {
  auto n = make_node(x.shape(), {x});
  for (int64_t i = 0; i < n->size(); ++i) n->data()[i] = std::tanh(x.data()[i]);
  auto out_value = n->value;
  n->backward_fn = [out_value](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t i = 0; i < self.size(); ++i) {
      const double t = out_value->at(static_cast<size_t>(i));
      p->grad[i] += self.grad[i] * (1.0 - t * t);
    }
  };
  return Tensor(n);
}

Tensor softmax_lastdim(const Tensor& x) {
  const int64_t k = x.dim(-1);
  const int64_t rows = x.numel() / k;
  auto n = make_node(x.shape(), {x});
  for (int64_t r = 0; r < rows; ++r) {
    const double* xi = x.data() + r * k;
    double* yo = n->data() + r * k;
    double mx = xi[0];
    for (int64_t j = 1; j < k; ++j) mx = std::max(mx, xi[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < k; ++j) {
      yo[j] = std::exp(xi[j] - mx);
      sum += yo[j];
    }
    for (int64_t j = 0; j < k; ++j) yo[j] /= sum;
  }
  auto out_value = n->value;
  n->backward_fn = [k, rows, out_value](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const double* s = out_value->data() + r * k;
      const double* gy = self.grad.data() + r * k;
      double dot = 0.0;
      for (int64_t j = 0; j < k; ++j) dot += gy[j] * s[j];
      for (int64_t j = 0; j < k; ++j)
        p->grad[r * k + j] += s[j] * (gy[j] - dot);
    }
  };
  return Tensor(n);
}

Tensor dropout(const Tensor& x, double p, bool training, Rng* rng) {
  if (!training || p <= 0.0) return x;
  if (rng == nullptr) throw std::runtime_error("dropout: rng required");
  auto n = make_node(x.shape(), {x});
  auto mask = std::make_shared<std::vector<double>>(
      static_cast<size_t>(x.numel()), 0.0);
  const double keep = 1.0 - p;
  for (int64_t i = 0; i < n->size(); ++i) {
    (*mask)[static_cast<size_t>(i)] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    n->data()[i] = x.data()[i] * (*mask)[static_cast<size_t>(i)];
  }
  n->backward_fn = [mask](Node& self) {
    Node* px = self.parents[0].get();
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (int64_t i = 0; i < self.size(); ++i)
      px->grad[i] += self.grad[i] * (*mask)[static_cast<size_t>(i)];
  };
  return Tensor(n);
}

// ---------------------------------------------------------------------------
// Conv / norm / pooling
// ---------------------------------------------------------------------------

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  if (x.ndim() != 3 || w.ndim() != 3) throw ShapeError("conv1d: bad ranks");
  const int64_t batch = x.dim(0), cin = x.dim(1), t = x.dim(2);
  const int64_t cout = w.dim(0), k = w.dim(2);
  if (w.dim(1) != cin)
    throw ShapeError("conv1d: weight " + shape_str(w.shape()) +
                     " does not accept input " + shape_str(x.shape()));
  if (t % stride != 0)
    throw ShapeError("conv1d: length " + std::to_string(t) +
                     " not divisible by stride " + std::to_string(stride));
  const int64_t to = t / stride;
  const int64_t pad_total = std::max<int64_t>((to - 1) * stride + k - t, 0);
  const int64_t pad_left = pad_total / 2;

  // im2col over the whole batch, then one gemm.
  auto col = std::make_shared<std::vector<double>>(
      static_cast<size_t>(cin * k * batch * to), 0.0);
  const int64_t col_cols = batch * to;
  for (int64_t bi = 0; bi < batch; ++bi) {
    const double* xi = x.data() + bi * cin * t;
    for (int64_t ci = 0; ci < cin; ++ci)
      for (int64_t kk = 0; kk < k; ++kk) {
        double* row = col->data() + (ci * k + kk) * col_cols + bi * to;
        for (int64_t o = 0; o < to; ++o) {
          const int64_t src = o * stride + kk - pad_left;
          row[o] = (src >= 0 && src < t) ? xi[ci * t + src] : 0.0;
        }
      }
  }
  auto n = make_node({batch, cout, to}, {x, w, b});
  {
    ConstMatMap mw(w.data(), cout, cin * k);
    ConstMatMap mc(col->data(), cin * k, col_cols);
    RowMat out = mw * mc;  // [cout, batch*to]
    for (int64_t co = 0; co < cout; ++co)
      for (int64_t bi = 0; bi < batch; ++bi)
        for (int64_t o = 0; o < to; ++o)
          n->data()[(bi * cout + co) * to + o] =
              out(co, bi * to + o) + b.data()[co];
  }
  n->backward_fn = [batch, cin, cout, t, to, k, stride, pad_left, col,
                    col_cols](Node& self) {
    Node* px = self.parents[0].get();
    Node* pw = self.parents[1].get();
    Node* pb = self.parents[2].get();
    // gather dOut as [cout, batch*to]
    RowMat gout(cout, col_cols);
    for (int64_t co = 0; co < cout; ++co)
      for (int64_t bi = 0; bi < batch; ++bi)
        for (int64_t o = 0; o < to; ++o)
          gout(co, bi * to + o) = self.grad[(bi * cout + co) * to + o];
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (int64_t co = 0; co < cout; ++co)
        pb->grad[co] += gout.row(co).sum();
    }
    if (pw->requires_grad) {
      pw->ensure_grad();
      ConstMatMap mc(col->data(), cin * k, col_cols);
      MatMap gw(pw->grad.data(), cout, cin * k);
      gw.noalias() += gout * mc.transpose();
    }
    if (px->requires_grad) {
      px->ensure_grad();
      ConstMatMap mw(pw->data(), cout, cin * k);
      RowMat gcol = mw.transpose() * gout;  // [cin*k, batch*to]
      for (int64_t bi = 0; bi < batch; ++bi)
        for (int64_t ci = 0; ci < cin; ++ci)
          for (int64_t kk = 0; kk < k; ++kk) {
            const double* row = gcol.data() + (ci * k + kk) * col_cols + bi * to;
            for (int64_t o = 0; o < to; ++o) {
              const int64_t src = o * stride + kk - pad_left;
              if (src >= 0 && src < t)
                px->grad[(bi * cin + ci) * t + src] += row[o];
            }
          }
    }
  };
  return Tensor(n);
}

Tensor batchnorm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& state, bool training, double momentum,
                   double eps) {
  if (x.ndim() != 3) throw ShapeError("batchnorm1d: need [B,C,T]");
  const int64_t b = x.dim(0), c = x.dim(1), t = x.dim(2);
  if (gamma.numel() != c || beta.numel() != c || !state.running_mean ||
      static_cast<int64_t>(state.running_mean->size()) != c) {
    throw ShapeError("batchnorm1d: channel mismatch");
  }
  auto n = make_node(x.shape(), {x, gamma, beta});
  auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(c));
  auto var = std::make_shared<std::vector<double>>(static_cast<size_t>(c));
  const double cnt = static_cast<double>(b * t);
  if (training) {
    for (int64_t ci = 0; ci < c; ++ci) {
      double m = 0.0;
      for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t ti = 0; ti < t; ++ti) m += x.data()[(bi * c + ci) * t + ti];
      m /= cnt;
      double v = 0.0;
      for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t ti = 0; ti < t; ++ti) {
          const double d = x.data()[(bi * c + ci) * t + ti] - m;
          v += d * d;
        }
      v /= cnt;  // population variance
      (*mean)[static_cast<size_t>(ci)] = m;
      (*var)[static_cast<size_t>(ci)] = v;
      (*state.running_mean)[static_cast<size_t>(ci)] =
          (1.0 - momentum) * (*state.running_mean)[static_cast<size_t>(ci)] +
          momentum * m;
      (*state.running_var)[static_cast<size_t>(ci)] =
          (1.0 - momentum) * (*state.running_var)[static_cast<size_t>(ci)] +
          momentum * v;
    }
  } else {
    *mean = *state.running_mean;
    *var = *state.running_var;
  }
  auto xhat = std::make_shared<std::vector<double>>(
      static_cast<size_t>(x.numel()));
  for (int64_t ci = 0; ci < c; ++ci) {
    const double inv = 1.0 / std::sqrt((*var)[static_cast<size_t>(ci)] + eps);
    const double m = (*mean)[static_cast<size_t>(ci)];
    const double g = gamma.data()[ci], be = beta.data()[ci];
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t ti = 0; ti < t; ++ti) {
        const int64_t idx = (bi * c + ci) * t + ti;
        const double xh = (x.data()[idx] - m) * inv;
        (*xhat)[static_cast<size_t>(idx)] = xh;
        n->data()[idx] = g * xh + be;
      }
  }
  n->backward_fn = [b, c, t, training, eps, mean, var, xhat](Node& self) {
    Node* px = self.parents[0].get();
    Node* pg = self.parents[1].get();
    Node* pb = self.parents[2].get();
    const double cnt = static_cast<double>(b * t);
    for (int64_t ci = 0; ci < c; ++ci) {
      double sum_gy = 0.0, sum_gy_xh = 0.0;
      for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t ti = 0; ti < t; ++ti) {
          const int64_t idx = (bi * c + ci) * t + ti;
          sum_gy += self.grad[idx];
          sum_gy_xh += self.grad[idx] * (*xhat)[static_cast<size_t>(idx)];
        }
      if (pg->requires_grad) {
        pg->ensure_grad();
        pg->grad[ci] += sum_gy_xh;
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        pb->grad[ci] += sum_gy;
      }
      if (px->requires_grad) {
        px->ensure_grad();
        const double g = pg->value->at(static_cast<size_t>(ci));
        const double inv =
            1.0 / std::sqrt((*var)[static_cast<size_t>(ci)] + eps);
        for (int64_t bi = 0; bi < b; ++bi)
          for (int64_t ti = 0; ti < t; ++ti) {
            const int64_t idx = (bi * c + ci) * t + ti;
            if (training) {
              px->grad[idx] +=
                  g * inv *
                  (self.grad[idx] - sum_gy / cnt -
                   (*xhat)[static_cast<size_t>(idx)] * sum_gy_xh / cnt);
            } else {
              px->grad[idx] += g * inv * self.grad[idx];
            }
          }
      }
    }
  };
  return Tensor(n);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const int64_t d = x.dim(-1);
  if (gamma.numel() != d || beta.numel() != d)
    throw ShapeError("layer_norm: parameter size mismatch");
  const int64_t rows = x.numel() / d;
  auto n = make_node(x.shape(), {x, gamma, beta});
  auto xhat = std::make_shared<std::vector<double>>(
      static_cast<size_t>(x.numel()));
  auto inv_std = std::make_shared<std::vector<double>>(
      static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const double* xi = x.data() + r * d;
    double m = 0.0;
    for (int64_t j = 0; j < d; ++j) m += xi[j];
    m /= static_cast<double>(d);
    double v = 0.0;
    for (int64_t j = 0; j < d; ++j) v += (xi[j] - m) * (xi[j] - m);
    v /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(v + eps);
    (*inv_std)[static_cast<size_t>(r)] = inv;
    for (int64_t j = 0; j < d; ++j) {
      const double xh = (xi[j] - m) * inv;
      (*xhat)[static_cast<size_t>(r * d + j)] = xh;
      n->data()[r * d + j] = gamma.data()[j] * xh + beta.data()[j];
    }
  }
  n->backward_fn = [d, rows, xhat, inv_std](Node& self) {
    Node* px = self.parents[0].get();
    Node* pg = self.parents[1].get();
    Node* pb = self.parents[2].get();
    if (pg->requires_grad) pg->ensure_grad();
    if (pb->requires_grad) pb->ensure_grad();
    if (px->requires_grad) px->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const double* gy = self.grad.data() + r * d;
      const double* xh = xhat->data() + r * d;
      double sum_gyg = 0.0, sum_gyg_xh = 0.0;
      for (int64_t j = 0; j < d; ++j) {
        if (pg->requires_grad) pg->grad[j] += gy[j] * xh[j];
        if (pb->requires_grad) pb->grad[j] += gy[j];
        const double gg = gy[j] * pg->value->at(static_cast<size_t>(j));
        sum_gyg += gg;
        sum_gyg_xh += gg * xh[j];
      }
      if (px->requires_grad) {
        const double inv = (*inv_std)[static_cast<size_t>(r)];
        for (int64_t j = 0; j < d; ++j) {
          const double gg = gy[j] * pg->value->at(static_cast<size_t>(j));
          px->grad[r * d + j] +=
              inv * (gg - sum_gyg / static_cast<double>(d) -
                     xh[j] * sum_gyg_xh / static_cast<double>(d));
        }
      }
    }
  };
  return Tensor(n);
}

Tensor upsample_nearest(const Tensor& x, int factor) {
  if (x.ndim() != 3) throw ShapeError("upsample_nearest: need [B,C,T]");
  if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  if (factor == 1) return x;
  const int64_t b = x.dim(0), c = x.dim(1), t = x.dim(2);
  auto n = make_node({b, c, t * factor}, {x});
  for (int64_t i = 0; i < b * c; ++i)
    for (int64_t ti = 0; ti < t; ++ti)
      for (int64_t f = 0; f < factor; ++f)
        n->data()[i * t * factor + ti * factor + f] = x.data()[i * t + ti];
  n->backward_fn = [b, c, t, factor](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t i = 0; i < b * c; ++i)
      for (int64_t ti = 0; ti < t; ++ti)
        for (int64_t f = 0; f < factor; ++f)
          p->grad[i * t + ti] += self.grad[i * t * factor + ti * factor + f];
  };
  return Tensor(n);
}

Tensor mean_lastdim(const Tensor& x) {
  if (x.ndim() < 2) throw ShapeError("mean_lastdim: need rank >= 2");
  const int64_t t = x.dim(-1);
  const int64_t rows = x.numel() / t;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  auto n = make_node(out_shape, {x});
  for (int64_t r = 0; r < rows; ++r) {
    double m = 0.0;
    for (int64_t j = 0; j < t; ++j) m += x.data()[r * t + j];
    n->data()[r] = m / static_cast<double>(t);
  }
  n->backward_fn = [t, rows](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t j = 0; j < t; ++j)
        p->grad[r * t + j] += self.grad[r] / static_cast<double>(t);
  };
  return Tensor(n);
}

Tensor causal_softmax(const Tensor& scores) {
  if (scores.ndim() != 3 || scores.dim(1) != scores.dim(2))
    throw ShapeError("causal_softmax: need [G,N,N]");
  const int64_t g = scores.dim(0), nn_ = scores.dim(1);
  auto n = make_node(scores.shape(), {scores});
  for (int64_t gi = 0; gi < g; ++gi)
    for (int64_t i = 0; i < nn_; ++i) {
      const double* xi = scores.data() + (gi * nn_ + i) * nn_;
      double* yo = n->data() + (gi * nn_ + i) * nn_;
      double mx = xi[0];
      for (int64_t j = 1; j <= i; ++j) mx = std::max(mx, xi[j]);
      double sum = 0.0;
      for (int64_t j = 0; j <= i; ++j) {
        yo[j] = std::exp(xi[j] - mx);
        sum += yo[j];
      }
      for (int64_t j = 0; j <= i; ++j) yo[j] /= sum;
      for (int64_t j = i + 1; j < nn_; ++j) yo[j] = 0.0;
    }
  auto out_value = n->value;
  n->backward_fn = [g, nn_, out_value](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t gi = 0; gi < g; ++gi)
      for (int64_t i = 0; i < nn_; ++i) {
        const double* s = out_value->data() + (gi * nn_ + i) * nn_;
        const double* gy = self.grad.data() + (gi * nn_ + i) * nn_;
        double dot = 0.0;
        for (int64_t j = 0; j <= i; ++j) dot += gy[j] * s[j];
        for (int64_t j = 0; j <= i; ++j)
          p->grad[(gi * nn_ + i) * nn_ + j] += s[j] * (gy[j] - dot);
      }
  };
  return Tensor(n);
}

Tensor split_heads(const Tensor& x, int n_heads) {
  if (x.ndim() != 3 || x.dim(2) % n_heads != 0)
    throw ShapeError("split_heads: bad input " + shape_str(x.shape()));
  const int64_t b = x.dim(0), nt = x.dim(1), d = x.dim(2);
  const int64_t dh = d / n_heads;
  auto n = make_node({b * n_heads, nt, dh}, {x});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t h = 0; h < n_heads; ++h)
      for (int64_t ti = 0; ti < nt; ++ti)
        std::copy_n(x.data() + (bi * nt + ti) * d + h * dh, dh,
                    n->data() + ((bi * n_heads + h) * nt + ti) * dh);
  n->backward_fn = [b, nt, d, dh, n_heads](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t h = 0; h < n_heads; ++h)
        for (int64_t ti = 0; ti < nt; ++ti)
          for (int64_t j = 0; j < dh; ++j)
            p->grad[(bi * nt + ti) * d + h * dh + j] +=
                self.grad[((bi * n_heads + h) * nt + ti) * dh + j];
  };
  return Tensor(n);
}

Tensor merge_heads(const Tensor& x, int n_heads) {
  if (x.ndim() != 3 || x.dim(0) % n_heads != 0)
    throw ShapeError("merge_heads: bad input " + shape_str(x.shape()));
  const int64_t b = x.dim(0) / n_heads, nt = x.dim(1), dh = x.dim(2);
  const int64_t d = dh * n_heads;
  auto n = make_node({b, nt, d}, {x});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t h = 0; h < n_heads; ++h)
      for (int64_t ti = 0; ti < nt; ++ti)
        std::copy_n(x.data() + ((bi * n_heads + h) * nt + ti) * dh, dh,
                    n->data() + (bi * nt + ti) * d + h * dh);
  n->backward_fn = [b, nt, d, dh, n_heads](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t h = 0; h < n_heads; ++h)
        for (int64_t ti = 0; ti < nt; ++ti)
          for (int64_t j = 0; j < dh; ++j)
            p->grad[((bi * n_heads + h) * nt + ti) * dh + j] +=
                self.grad[(bi * nt + ti) * d + h * dh + j];
  };
  return Tensor(n);
}

Tensor latent_patch(const Tensor& features, int patch) {
  if (features.ndim() != 3) throw ShapeError("latent_patch: need [B,C,T]");
  const int64_t b = features.dim(0), c = features.dim(1), t = features.dim(2);
  if (t % patch != 0)
    throw ShapeError("latent_patch: T=" + std::to_string(t) +
                     " not divisible by patch " + std::to_string(patch));
  const int64_t np = t / patch;
  auto n = make_node({b, np, c * patch}, {features});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t pi = 0; pi < np; ++pi)
      for (int64_t ci = 0; ci < c; ++ci)
        std::copy_n(features.data() + (bi * c + ci) * t + pi * patch, patch,
                    n->data() + (bi * np + pi) * c * patch + ci * patch);
  n->backward_fn = [b, c, t, np, patch](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t pi = 0; pi < np; ++pi)
        for (int64_t ci = 0; ci < c; ++ci)
          for (int64_t j = 0; j < patch; ++j)
            p->grad[(bi * c + ci) * t + pi * patch + j] +=
                self.grad[(bi * np + pi) * c * patch + ci * patch + j];
  };
  return Tensor(n);
}

Tensor latent_unpatch(const Tensor& tokens, int64_t channels, int patch) {
  if (tokens.ndim() != 3) throw ShapeError("latent_unpatch: need [B,N,D]");
  const int64_t b = tokens.dim(0), np = tokens.dim(1), d = tokens.dim(2);
  if (d != channels * patch)
    throw ShapeError("latent_unpatch: token dim " + std::to_string(d) +
                     " != C*P = " + std::to_string(channels * patch));
  const int64_t t = np * patch;
  auto n = make_node({b, channels, t}, {tokens});
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t pi = 0; pi < np; ++pi)
      for (int64_t ci = 0; ci < channels; ++ci)
        std::copy_n(tokens.data() + (bi * np + pi) * d + ci * patch, patch,
                    n->data() + (bi * channels + ci) * t + pi * patch);
  n->backward_fn = [b, channels, t, np, patch, d](Node& self) {
    Node* p = self.parents[0].get();
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (int64_t bi = 0; bi < b; ++bi)
      for (int64_t pi = 0; pi < np; ++pi)
        for (int64_t ci = 0; ci < channels; ++ci)
          for (int64_t j = 0; j < patch; ++j)
            p->grad[(bi * np + pi) * d + ci * patch + j] +=
                self.grad[(bi * channels + ci) * t + pi * patch + j];
  };
  return Tensor(n);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

Tensor bce_mean(const Tensor& pred, const Tensor& target, double eps) {
  check_same_shape(pred, target, "bce_mean");
  auto n = make_node({1}, {pred, target});
  const int64_t cnt = pred.numel();
  auto clipped = std::make_shared<std::vector<uint8_t>>(
      static_cast<size_t>(cnt), uint8_t{0});
  double acc = 0.0;
  for (int64_t i = 0; i < cnt; ++i) {
    double p = pred.data()[i];
    if (p < eps || p > 1.0 - eps) {
      (*clipped)[static_cast<size_t>(i)] = 1;
      p = std::clamp(p, eps, 1.0 - eps);
    }
    const double y = target.data()[i];
    acc -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  n->data()[0] = acc / static_cast<double>(cnt);
  n->backward_fn = [cnt, eps, clipped](Node& self) {
    Node* pp = self.parents[0].get();
    Node* pt = self.parents[1].get();
    const double g = self.grad[0] / static_cast<double>(cnt);
    if (pp->requires_grad) {
      pp->ensure_grad();
      for (int64_t i = 0; i < cnt; ++i) {
        if ((*clipped)[static_cast<size_t>(i)]) continue;
        const double p = pp->value->at(static_cast<size_t>(i));
        const double y = pt->value->at(static_cast<size_t>(i));
        pp->grad[i] += g * (p - y) / (p * (1.0 - p));
      }
    }
  };
  return Tensor(n);
}

Tensor ce_rows(const Tensor& pred, const Tensor& onehot,
               const std::vector<uint8_t>& mask, double eps, double norm_tol) {
  check_same_shape(pred, onehot, "ce_rows");
  if (pred.ndim() != 2) throw ShapeError("ce_rows: need [B,K]");
  const int64_t b = pred.dim(0), k = pred.dim(1);
  if (static_cast<int64_t>(mask.size()) != b)
    throw ShapeError("ce_rows: mask size mismatch");
  int64_t valid = 0;
  for (auto m : mask) valid += (m != 0);
  auto n = make_node({1}, {pred, onehot});
  if (valid == 0) {
    n->data()[0] = 0.0;
    return Tensor(n);
  }
  double acc = 0.0;
  for (int64_t r = 0; r < b; ++r) {
    if (!mask[static_cast<size_t>(r)]) continue;
    double row_sum = 0.0;
    for (int64_t j = 0; j < k; ++j) row_sum += pred.data()[r * k + j];
    if (std::abs(row_sum - 1.0) > norm_tol)
      throw std::domain_error("ce_rows: prediction row " + std::to_string(r) +
                              " sums to " + std::to_string(row_sum) +
                              ", not normalized");
    for (int64_t j = 0; j < k; ++j) {
      const double y = onehot.data()[r * k + j];
      if (y == 0.0) continue;
      const double p = std::clamp(pred.data()[r * k + j], eps, 1.0 - eps);
      acc -= y * std::log(p);
    }
  }
  n->data()[0] = acc / static_cast<double>(valid);
  auto mask_copy = std::make_shared<std::vector<uint8_t>>(mask);
  n->backward_fn = [b, k, valid, eps, mask_copy](Node& self) {
    Node* pp = self.parents[0].get();
    Node* pt = self.parents[1].get();
    if (!pp->requires_grad) return;
    pp->ensure_grad();
    const double g = self.grad[0] / static_cast<double>(valid);
    for (int64_t r = 0; r < b; ++r) {
      if (!(*mask_copy)[static_cast<size_t>(r)]) continue;
      for (int64_t j = 0; j < k; ++j) {
        const double y = pt->value->at(static_cast<size_t>(r * k + j));
        if (y == 0.0) continue;
        const double p = pp->value->at(static_cast<size_t>(r * k + j));
        if (p < eps || p > 1.0 - eps) continue;
        pp->grad[r * k + j] -= g * y / p;
      }
    }
  };
  return Tensor(n);
}

Tensor huber_masked(const Tensor& pred, const Tensor& target, double delta,
                    const std::vector<uint8_t>& mask) {
  check_same_shape(pred, target, "huber");
  if (delta <= 0.0)
    throw std::invalid_argument("huber: delta must be positive");
  const int64_t b = pred.dim(0);
  const int64_t per_row = pred.numel() / b;
  if (static_cast<int64_t>(mask.size()) != b)
    throw ShapeError("huber: mask size mismatch");
  int64_t valid = 0;
  for (auto m : mask) valid += (m != 0);
  auto n = make_node({1}, {pred, target});
  if (valid == 0) {
    n->data()[0] = 0.0;
    return Tensor(n);
  }
  const int64_t cnt = valid * per_row;
  double acc = 0.0;
  for (int64_t r = 0; r < b; ++r) {
    if (!mask[static_cast<size_t>(r)]) continue;
    for (int64_t j = 0; j < per_row; ++j) {
      const double res = pred.data()[r * per_row + j] -
                         target.data()[r * per_row + j];
      const double a = std::abs(res);
      acc += (a <= delta) ? 0.5 * res * res : delta * a - 0.5 * delta * delta;
    }
  }
  n->data()[0] = acc / static_cast<double>(cnt);
  auto mask_copy = std::make_shared<std::vector<uint8_t>>(mask);
  n->backward_fn = [b, per_row, cnt, delta, mask_copy](Node& self) {
    Node* pp = self.parents[0].get();
    Node* pt = self.parents[1].get();
    const double g = self.grad[0] / static_cast<double>(cnt);
    if (!pp->requires_grad) return;
    pp->ensure_grad();
    for (int64_t r = 0; r < b; ++r) {
      if (!(*mask_copy)[static_cast<size_t>(r)]) continue;
      for (int64_t j = 0; j < per_row; ++j) {
        const double res = pp->value->at(static_cast<size_t>(r * per_row + j)) -
                           pt->value->at(static_cast<size_t>(r * per_row + j));
        const double d = (std::abs(res) <= delta)
                             ? res
                             : delta * (res > 0 ? 1.0 : -1.0);
        pp->grad[r * per_row + j] += g * d;
      }
    }
  };
  return Tensor(n);
}

}  // namespace seismo::nn
