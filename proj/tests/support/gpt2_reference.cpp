#include "gpt2_reference.hpp"

#include <cmath>
#include <stdexcept>

#include "seismo/safetensors.hpp"

namespace gpt2ref {

namespace {

constexpr int kD = 768;
constexpr int kHeads = 12;
constexpr int kDh = kD / kHeads;

using Vec = std::vector<double>;

void layer_norm_rows(Vec& x, int n, const Vec& g, const Vec& b) {
  for (int r = 0; r < n; ++r) {
    double* row = x.data() + r * kD;
    double mean = 0.0;
    for (int j = 0; j < kD; ++j) mean += row[j];
    mean /= kD;
    double var = 0.0;
    for (int j = 0; j < kD; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= kD;
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (int j = 0; j < kD; ++j) row[j] = g[j] * (row[j] - mean) * inv + b[j];
  }
}

// y[n x out] = x[n x in] * w[in x out] + b
Vec affine(const Vec& x, int n, int in, int out, const Vec& w, const Vec& b) {
  Vec y(static_cast<size_t>(n) * out, 0.0);
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < in; ++i) {
      const double xv = x[r * in + i];
      if (xv == 0.0) continue;
      const double* wr = w.data() + static_cast<size_t>(i) * out;
      double* yr = y.data() + static_cast<size_t>(r) * out;
      for (int o = 0; o < out; ++o) yr[o] += xv * wr[o];
    }
  for (int r = 0; r < n; ++r)
    for (int o = 0; o < out; ++o) y[r * out + o] += b[o];
  return y;
}

double gelu_new(double v) {
  const double c = std::sqrt(2.0 / 3.14159265358979323846);
  return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v)));
}

}  // namespace

std::vector<double> forward(const std::string& checkpoint_path, int n_layers,
                            const std::vector<double>& tokens, int n) {
  if (static_cast<int>(tokens.size()) != n * kD)
    throw std::invalid_argument("gpt2ref: tokens must be [n x 768]");
  auto f = seismo::SafeTensorsFile::read(checkpoint_path);
  auto get = [&](const std::string& name) -> const Vec& {
    const std::string pfx =
        f.has(name) ? name : ("transformer." + name);
    return f.get(pfx).data;
  };

  Vec x = tokens;
  const Vec& wpe = get("wpe.weight");
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < kD; ++j) x[r * kD + j] += wpe[r * kD + j];

  for (int layer = 0; layer < n_layers; ++layer) {
    const std::string h = "h." + std::to_string(layer) + ".";
    // attention
    Vec a = x;
    layer_norm_rows(a, n, get(h + "ln_1.weight"), get(h + "ln_1.bias"));
    const Vec qkv = affine(a, n, kD, 3 * kD, get(h + "attn.c_attn.weight"),
                           get(h + "attn.c_attn.bias"));
    Vec ctx(static_cast<size_t>(n) * kD, 0.0);
    for (int head = 0; head < kHeads; ++head) {
      for (int i = 0; i < n; ++i) {
        // scores over j <= i
        Vec scores(static_cast<size_t>(i) + 1, 0.0);
        double mx = -1e300;
        for (int j = 0; j <= i; ++j) {
          double s = 0.0;
          for (int d = 0; d < kDh; ++d)
            s += qkv[i * 3 * kD + head * kDh + d] *
                 qkv[j * 3 * kD + kD + head * kDh + d];
          s /= std::sqrt(static_cast<double>(kDh));
          scores[static_cast<size_t>(j)] = s;
          mx = std::max(mx, s);
        }
        double denom = 0.0;
        for (int j = 0; j <= i; ++j) {
          scores[static_cast<size_t>(j)] =
              std::exp(scores[static_cast<size_t>(j)] - mx);
          denom += scores[static_cast<size_t>(j)];
        }
        for (int d = 0; d < kDh; ++d) {
          double acc = 0.0;
          for (int j = 0; j <= i; ++j)
            acc += scores[static_cast<size_t>(j)] / denom *
                   qkv[j * 3 * kD + 2 * kD + head * kDh + d];
          ctx[i * kD + head * kDh + d] = acc;
        }
      }
    }
    const Vec attn_out = affine(ctx, n, kD, kD, get(h + "attn.c_proj.weight"),
                                get(h + "attn.c_proj.bias"));
    for (size_t i = 0; i < x.size(); ++i) x[i] += attn_out[i];
    // mlp
    Vec m = x;
    layer_norm_rows(m, n, get(h + "ln_2.weight"), get(h + "ln_2.bias"));
    Vec hmid = affine(m, n, kD, 4 * kD, get(h + "mlp.c_fc.weight"),
                      get(h + "mlp.c_fc.bias"));
    for (auto& v : hmid) v = gelu_new(v);
    const Vec mlp_out = affine(hmid, n, 4 * kD, kD, get(h + "mlp.c_proj.weight"),
                               get(h + "mlp.c_proj.bias"));
    for (size_t i = 0; i < x.size(); ++i) x[i] += mlp_out[i];
  }
  layer_norm_rows(x, n, get("ln_f.weight"), get("ln_f.bias"));
  return x;
}

}  // namespace gpt2ref
