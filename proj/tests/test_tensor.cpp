#include <doctest.h>

#include <cmath>

#include "seismo/tensor.hpp"
#include "support/testutil.hpp"

using namespace seismo;
using nn::Tensor;
using testutil::central_diff;
using testutil::dot_probe;
using testutil::rel_err;

namespace {

Tensor leaf(nn::Shape shape, Rng& rng, double std = 1.0) {
  Tensor t = Tensor::randn(std::move(shape), rng, std, /*requires_grad=*/true);
  return t;
}

// Checks analytic gradients of `fwd` against central differences for every
// coordinate of every leaf.
void grad_check(const std::function<Tensor()>& fwd,
                const std::vector<Tensor>& leaves, double tol = 1e-5) {
  Tensor loss = fwd();
  REQUIRE(loss.numel() == 1);
  for (auto l : leaves) l.zero_grad();
  nn::backward(loss);
  auto eval = [&]() { return fwd().item(); };
  for (auto l : leaves) {
    REQUIRE(static_cast<int64_t>(l.grad().size()) == l.numel());
    for (int64_t i = 0; i < l.numel(); ++i) {
      const double fd = central_diff(l, i, eval);
      const double an = l.grad()[i];
      INFO("coordinate ", i, " analytic=", an, " fd=", fd);
      CHECK(rel_err(an, fd, 1e-6) < tol);
    }
  }
}

}  // namespace

TEST_SUITE("tensor engine") {

TEST_CASE("elementwise ops and broadcast bias gradients") {
  Rng rng(1);
  Tensor a = leaf({2, 3}, rng), b = leaf({2, 3}, rng), bias = leaf({3}, rng);
  grad_check([&] { return dot_probe(nn::add(nn::mul(a, b), nn::sub(a, b))); },
             {a, b});
  grad_check([&] { return dot_probe(nn::add_bias(a, bias)); }, {a, bias});
  grad_check([&] { return dot_probe(nn::scale(a, -2.5)); }, {a});
}

TEST_CASE("matmul and bmm gradients (all transpose combinations)") {
  Rng rng(2);
  Tensor x = leaf({4, 3}, rng), w = leaf({3, 5}, rng);
  grad_check([&] { return dot_probe(nn::matmul(x, w)); }, {x, w});
  Tensor x3 = leaf({2, 4, 3}, rng);
  grad_check([&] { return dot_probe(nn::matmul(x3, w)); }, {x3, w});

  Tensor a = leaf({2, 3, 4}, rng);
  Tensor bt = leaf({2, 4, 5}, rng);
  grad_check([&] { return dot_probe(nn::bmm(a, bt)); }, {a, bt});
  Tensor b2 = leaf({2, 5, 4}, rng);
  grad_check([&] { return dot_probe(nn::bmm(a, b2, false, true)); }, {a, b2});
  Tensor a2 = leaf({2, 4, 3}, rng);
  grad_check([&] { return dot_probe(nn::bmm(a2, bt, true, false)); }, {a2, bt});
  grad_check([&] { return dot_probe(nn::bmm(a2, b2, true, true)); }, {a2, b2});
}

TEST_CASE("layout ops: reshape, transpose, narrow, concat") {
  Rng rng(3);
  Tensor x = leaf({2, 3, 4}, rng);
  grad_check([&] { return dot_probe(nn::reshape(x, {6, 4})); }, {x});
  grad_check([&] { return dot_probe(nn::transpose_12(x)); }, {x});
  grad_check([&] { return dot_probe(nn::narrow(x, 1, 1, 2)); }, {x});
  grad_check([&] { return dot_probe(nn::narrow(x, 2, 0, 3)); }, {x});
  Tensor y = leaf({2, 2, 4}, rng);
  grad_check([&] { return dot_probe(nn::concat({x, y}, 1)); }, {x, y});
  CHECK_THROWS_AS(nn::narrow(x, 2, 3, 2), nn::ShapeError);
}

TEST_CASE("activations") {
  Rng rng(4);
  Tensor x = leaf({3, 7}, rng);
  grad_check([&] { return dot_probe(nn::gelu(x)); }, {x});
  grad_check([&] { return dot_probe(nn::sigmoid(x)); }, {x});
  grad_check([&] { return dot_probe(nn::tanh_act(x)); }, {x});
  grad_check([&] { return dot_probe(nn::softmax_lastdim(x)); }, {x});
  // softmax rows sum to one
  Tensor s = nn::softmax_lastdim(x);
  for (int r = 0; r < 3; ++r) {
    double sum = 0;
    for (int j = 0; j < 7; ++j) sum += s.data()[r * 7 + j];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("conv1d: shape, same padding, gradients") {
  Rng rng(5);
  Tensor x = leaf({2, 3, 8}, rng);
  Tensor w = leaf({4, 3, 3}, rng, 0.5);
  Tensor b = leaf({4}, rng, 0.5);
  Tensor out = nn::conv1d(x, w, b, 1);
  CHECK(out.shape() == nn::Shape{2, 4, 8});
  Tensor out2 = nn::conv1d(x, w, b, 2);
  CHECK(out2.shape() == nn::Shape{2, 4, 4});
  grad_check([&] { return dot_probe(nn::conv1d(x, w, b, 1)); }, {x, w, b});
  grad_check([&] { return dot_probe(nn::conv1d(x, w, b, 2)); }, {x, w, b});
  CHECK_THROWS_AS(nn::conv1d(x, w, b, 3), nn::ShapeError);  // 8 % 3 != 0

  // hand-checked value: single channel, kernel [1,0,-1], stride 1
  Tensor xi = Tensor::from_data({1, 1, 4}, {1, 2, 3, 4});
  Tensor wi = Tensor::from_data({1, 1, 3}, {1, 0, -1});
  Tensor bi = Tensor::from_data({1}, {0});
  Tensor yo = nn::conv1d(xi, wi, bi, 1);
  // same padding: y[t] = x[t-1] - x[t+1] with zeros outside
  CHECK(yo.data()[0] == doctest::Approx(-2));
  CHECK(yo.data()[1] == doctest::Approx(-2));
  CHECK(yo.data()[2] == doctest::Approx(-2));
  CHECK(yo.data()[3] == doctest::Approx(3));
}

TEST_CASE("batchnorm1d: train and eval modes") {
  Rng rng(6);
  Tensor x = leaf({2, 3, 5}, rng);
  Tensor g = leaf({3}, rng, 0.5);
  Tensor be = leaf({3}, rng, 0.5);
  nn::BatchNormState st;
  st.init(3);
  grad_check(
      [&] {
        nn::BatchNormState tmp;
        tmp.init(3);
        return dot_probe(nn::batchnorm1d(x, g, be, tmp, /*training=*/true));
      },
      {x, g, be}, 1e-4);
  // training mode: normalized output has ~zero mean, unit variance per channel
  nn::BatchNormState st2;
  st2.init(3);
  Tensor ones = Tensor::full({3}, 1.0);
  Tensor zeros = Tensor::zeros({3});
  Tensor y = nn::batchnorm1d(x, ones, zeros, st2, true);
  for (int c = 0; c < 3; ++c) {
    double m = 0;
    for (int bidx = 0; bidx < 2; ++bidx)
      for (int t = 0; t < 5; ++t) m += y.data()[(bidx * 3 + c) * 5 + t];
    CHECK(std::abs(m / 10.0) < 1e-12);
  }
  // eval mode with identity stats is an affine map
  nn::BatchNormState st3;
  st3.init(3);
  Tensor z = Tensor::zeros({1, 3, 4});
  Tensor yz = nn::batchnorm1d(z, ones, zeros, st3, false);
  for (int64_t i = 0; i < yz.numel(); ++i) CHECK(yz.data()[i] == 0.0);
  grad_check(
      [&] { return dot_probe(nn::batchnorm1d(x, g, be, st3, false)); },
      {x, g, be}, 1e-4);
}

TEST_CASE("layer_norm gradients") {
  Rng rng(7);
  Tensor x = leaf({2, 3, 6}, rng);
  Tensor g = leaf({6}, rng, 0.5);
  Tensor b = leaf({6}, rng, 0.5);
  grad_check([&] { return dot_probe(nn::layer_norm(x, g, b)); }, {x, g, b},
             1e-4);
}

TEST_CASE("upsample, pooling, positional add") {
  Rng rng(8);
  Tensor x = leaf({2, 3, 4}, rng);
  Tensor up = nn::upsample_nearest(x, 2);
  CHECK(up.shape() == nn::Shape{2, 3, 8});
  CHECK(up.data()[0] == x.data()[0]);
  CHECK(up.data()[1] == x.data()[0]);
  grad_check([&] { return dot_probe(nn::upsample_nearest(x, 3)); }, {x});
  grad_check([&] { return dot_probe(nn::mean_lastdim(x)); }, {x});
  Tensor rows = leaf({3, 4}, rng);
  Tensor x2 = leaf({2, 3, 4}, rng);
  grad_check([&] { return dot_probe(nn::add_rows(x2, rows)); }, {x2, rows});
}

TEST_CASE("causal softmax masks the future") {
  Rng rng(9);
  Tensor s = leaf({2, 4, 4}, rng);
  Tensor p = nn::causal_softmax(s);
  for (int g = 0; g < 2; ++g)
    for (int i = 0; i < 4; ++i) {
      double sum = 0;
      for (int j = 0; j < 4; ++j) {
        const double v = p.data()[(g * 4 + i) * 4 + j];
        if (j > i) CHECK(v == 0.0);
        sum += v;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  grad_check([&] { return dot_probe(nn::causal_softmax(s)); }, {s});
}

TEST_CASE("split/merge heads round-trip and gradients") {
  Rng rng(10);
  Tensor x = leaf({2, 3, 8}, rng);
  Tensor split = nn::split_heads(x, 4);
  CHECK(split.shape() == nn::Shape{8, 3, 2});
  Tensor merged = nn::merge_heads(split, 4);
  for (int64_t i = 0; i < x.numel(); ++i)
    CHECK(merged.data()[i] == x.data()[i]);
  grad_check([&] { return dot_probe(nn::merge_heads(nn::split_heads(x, 4), 4)); },
             {x});
}

TEST_CASE("latent patching: declared layout and bijection") {
  // C=2, T=4, P=2, rows [1,2,3,4] and [5,6,7,8] -> [[1,2,5,6],[3,4,7,8]]
  Tensor f = Tensor::from_data({1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  Tensor tok = nn::latent_patch(f, 2);
  CHECK(tok.shape() == nn::Shape{1, 2, 4});
  const double expect[8] = {1, 2, 5, 6, 3, 4, 7, 8};
  for (int i = 0; i < 8; ++i) CHECK(tok.data()[i] == expect[i]);

  Tensor back = nn::latent_unpatch(tok, 2, 2);
  CHECK(back.shape() == f.shape());
  for (int i = 0; i < 8; ++i) CHECK(back.data()[i] == f.data()[i]);

  // [1 x 8] token, C=2, P=4 -> features [2 x 4]
  Tensor one = Tensor::from_data({1, 1, 8}, {1, 2, 3, 4, 5, 6, 7, 8});
  Tensor feat = nn::latent_unpatch(one, 2, 4);
  CHECK(feat.shape() == nn::Shape{1, 2, 4});

  // bit-exact round-trip on random tensors
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t c = 1 + static_cast<int64_t>(rng.uniform_int(6ull));
    const int64_t n = 1 + static_cast<int64_t>(rng.uniform_int(5ull));
    const int p = 1 + static_cast<int>(rng.uniform_int(4ull));
    Tensor x = Tensor::randn({2, c, n * p}, rng, 1.0);
    Tensor rt = nn::latent_unpatch(nn::latent_patch(x, p), c, p);
    for (int64_t i = 0; i < x.numel(); ++i) CHECK(rt.data()[i] == x.data()[i]);
  }
  Rng rng2(12);
  Tensor x = leaf({2, 3, 8}, rng2);
  grad_check([&] { return dot_probe(nn::latent_patch(x, 4)); }, {x});
  CHECK_THROWS_AS(nn::latent_patch(x, 3), nn::ShapeError);
}

TEST_CASE("dropout: eval identity, train scaling") {
  Rng rng(13);
  Tensor x = leaf({4, 25}, rng);
  Tensor ev = nn::dropout(x, 0.5, /*training=*/false, nullptr);
  CHECK(ev.node() == x.node());  // pass-through
  Rng drng(99);
  Tensor tr = nn::dropout(x, 0.5, true, &drng);
  int64_t zeros = 0;
  for (int64_t i = 0; i < tr.numel(); ++i) {
    if (tr.data()[i] == 0.0) ++zeros;
    else CHECK(tr.data()[i] == doctest::Approx(2.0 * x.data()[i]));
  }
  CHECK(zeros > 20);
  CHECK(zeros < 80);
}

TEST_CASE("loss op gradients match finite differences") {
  Rng rng(14);
  // bce on sigmoid-like probabilities
  Tensor logits = leaf({2, 10}, rng);
  Tensor target = Tensor::zeros({2, 10});
  Rng trng(15);
  for (int64_t i = 0; i < target.numel(); ++i)
    target.data()[i] = trng.uniform();
  grad_check([&] { return nn::bce_mean(nn::sigmoid(logits), target); },
             {logits}, 1e-4);
  // ce on softmax rows
  Tensor cl = leaf({3, 2}, rng);
  Tensor onehot = Tensor::from_data({3, 2}, {1, 0, 0, 1, 1, 0});
  grad_check(
      [&] {
        return nn::ce_rows(nn::softmax_lastdim(cl), onehot, {1, 1, 1});
      },
      {cl}, 1e-4);
  // huber around both branches
  Tensor pred = Tensor::from_data({2, 3}, {0.1, 2.0, -3.0, 0.4, -0.2, 1.5},
                                  true);
  Tensor truth = Tensor::from_data({2, 3}, {0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  grad_check([&] { return nn::huber_masked(pred, truth, 1.0, {1, 1}); },
             {pred}, 1e-4);
  // masked rows receive no gradient
  Tensor loss = nn::huber_masked(pred, truth, 1.0, {1, 0});
  pred.zero_grad();
  nn::backward(loss);
  for (int j = 0; j < 3; ++j) CHECK(pred.grad()[3 + j] == 0.0);
}

}  // TEST_SUITE
