#include "seismo/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seismo::model {

using nn::ShapeError;

// ---------------------------------------------------------------------------
// Enums / config
// ---------------------------------------------------------------------------

std::string to_string(Task t) {
  switch (t) {
    case Task::picking: return "picking";
    case Task::azimuth: return "azimuth";
    case Task::distance: return "distance";
    case Task::magnitude: return "magnitude";
    case Task::polarity: return "polarity";
  }
  return "?";
}

Task task_from_string(const std::string& s) {
  for (Task t : {Task::picking, Task::azimuth, Task::distance, Task::magnitude,
                 Task::polarity})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown task '" + s + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_llm: return "no_llm";
    case Variant::llm2att: return "llm2att";
    case Variant::llm2trsf: return "llm2trsf";
    case Variant::no_pretrain: return "no_pretrain";
    case Variant::no_conv: return "no_conv";
    case Variant::layers_2: return "layers_2";
    case Variant::layers_6: return "layers_6";
    case Variant::layers_12: return "layers_12";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  for (Variant v : {Variant::full, Variant::no_llm, Variant::llm2att,
                    Variant::llm2trsf, Variant::no_pretrain, Variant::no_conv,
                    Variant::layers_2, Variant::layers_6, Variant::layers_12})
    if (to_string(v) == s) return v;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

int variant_layers(Variant v) {
  switch (v) {
    case Variant::no_llm: return 0;
    case Variant::llm2att:
    case Variant::llm2trsf: return 1;
    case Variant::layers_2: return 2;
    case Variant::layers_6: return 6;
    case Variant::layers_12: return 12;
    default: return -1;  // keep configured value
  }
}

void ModelConfig::validate() const {
  if (hidden % n_heads != 0)
    throw std::invalid_argument("model: hidden not divisible by heads");
  if (kernel_sizes.empty() || channels.size() != strides.size() ||
      channels.empty())
    throw std::invalid_argument("model: bad embedder configuration");
  for (int k : kernel_sizes)
    if (k % 2 == 0) throw std::invalid_argument("model: kernels must be odd");
  const int fixed = variant_layers(variant);
  if (fixed >= 0 && fixed != n_layers)
    throw std::invalid_argument(
        "model: variant " + to_string(variant) + " requires n_layers = " +
        std::to_string(fixed) + ", got " + std::to_string(n_layers));
  if (variant != Variant::no_llm && n_layers < 1)
    throw std::invalid_argument("model: n_layers must be positive");
  if (channels.back() * patch != hidden && variant != Variant::no_conv)
    throw std::invalid_argument(
        "model: final channels x patch must equal hidden dim");
}

int ModelConfig::total_stride() const {
  int s = 1;
  for (int st : strides) s *= st;
  return s;
}

int ModelConfig::compression() const {
  return variant == Variant::no_conv ? raw_patch : total_stride() * patch;
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

Tensor ParamRegistry::add(const std::string& name, Shape shape,
                          bool trainable) {
  if (index_.count(name))
    throw std::invalid_argument("registry: duplicate parameter " + name);
  Param p;
  p.name = name;
  p.tensor = Tensor::zeros(std::move(shape), trainable);
  p.trainable = trainable;
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back().tensor;
}

void ParamRegistry::add_buffer(const std::string& name,
                               std::shared_ptr<std::vector<double>> data) {
  buffers_.push_back({name, std::move(data)});
}

Param& ParamRegistry::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::out_of_range("registry: no parameter " + name);
  return params_[it->second];
}

const Param& ParamRegistry::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::out_of_range("registry: no parameter " + name);
  return params_[it->second];
}

int64_t ParamRegistry::total_elements() const {
  // parameters only; BN statistics are buffers, not optimizable parameters
  int64_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

int64_t ParamRegistry::trainable_elements() const {
  int64_t n = 0;
  for (const auto& p : params_)
    if (p.trainable) n += p.tensor.numel();
  return n;
}

void ParamRegistry::set_all_trainable() {
  for (auto& p : params_) {
    p.trainable = true;
    p.frozen = false;
    p.tensor.set_requires_grad(true);
  }
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

FileCheckpoint::FileCheckpoint(const std::string& path)
    : file_(SafeTensorsFile::read(path)) {
  if (!file_.has("wpe.weight") && file_.has("transformer.wpe.weight"))
    prefix_ = "transformer.";
}

bool FileCheckpoint::has(const std::string& name) const {
  return file_.has(prefix_ + name);
}

const SafeTensorEntry& FileCheckpoint::get(const std::string& name) const {
  return file_.get(prefix_ + name);
}

void write_surrogate_gpt2_checkpoint(const std::string& path, int n_layers,
                                     uint64_t seed) {
  Rng rng(seed);
  SafeTensorsFile f;
  auto randn = [&](std::vector<int64_t> shape, double std) {
    int64_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.normal(0.0, std);
    return v;
  };
  auto ones = [](std::vector<int64_t> shape) {
    int64_t n = 1;
    for (auto d : shape) n *= d;
    return std::vector<double>(static_cast<size_t>(n), 1.0);
  };
  f.set_metadata("format", "surrogate-gpt2");
  f.add("wpe.weight", {1024, 768}, randn({1024, 768}, 0.02), true);
  for (int i = 0; i < n_layers; ++i) {
    const std::string h = "h." + std::to_string(i) + ".";
    f.add(h + "ln_1.weight", {768}, ones({768}), true);
    f.add(h + "ln_1.bias", {768}, randn({768}, 0.01), true);
    f.add(h + "attn.c_attn.weight", {768, 2304}, randn({768, 2304}, 0.02),
          true);
    f.add(h + "attn.c_attn.bias", {2304}, randn({2304}, 0.01), true);
    f.add(h + "attn.c_proj.weight", {768, 768}, randn({768, 768}, 0.02), true);
    f.add(h + "attn.c_proj.bias", {768}, randn({768}, 0.01), true);
    f.add(h + "ln_2.weight", {768}, ones({768}), true);
    f.add(h + "ln_2.bias", {768}, randn({768}, 0.01), true);
    f.add(h + "mlp.c_fc.weight", {768, 3072}, randn({768, 3072}, 0.02), true);
    f.add(h + "mlp.c_fc.bias", {3072}, randn({3072}, 0.01), true);
    f.add(h + "mlp.c_proj.weight", {3072, 768}, randn({3072, 768}, 0.02),
          true);
    f.add(h + "mlp.c_proj.bias", {768}, randn({768}, 0.01), true);
  }
  f.add("ln_f.weight", {768}, ones({768}), true);
  f.add("ln_f.bias", {768}, randn({768}, 0.01), true);
  f.write(path);
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

Tensor DenseLayer::forward(const Tensor& x) const {
  return nn::add_bias(nn::matmul(x, w), b);
}

Tensor LoraDense::forward(const Tensor& x, bool training, Rng* rng) const {
  Tensor base = nn::add_bias(nn::matmul(x, w), b);
  if (!use_lora) return base;
  Tensor z = nn::dropout(x, dropout_p, training, rng);
  Tensor delta = nn::matmul(nn::matmul(z, lora_a), lora_b);
  return nn::add(base, nn::add_bias(nn::scale(delta, scale), lora_bias));
}

Tensor ConvLayer::forward(const Tensor& x) const {
  return nn::conv1d(x, w, b, stride);
}

Tensor BatchNormLayer::forward(const Tensor& x, bool training) {
  return nn::batchnorm1d(x, gamma, beta, state, training);
}

Tensor LayerNormLayer::forward(const Tensor& x) const {
  return nn::layer_norm(x, gamma, beta);
}

Tensor MultiScaleBlock::forward(const Tensor& x, bool training) {
  Tensor h = in_proj.forward(x);
  std::vector<Tensor> outs;
  outs.reserve(branches.size());
  for (size_t i = 0; i < branches.size(); ++i) {
    Tensor bi = branches[i].forward(h);
    outs.push_back(nn::gelu(branch_bn[i].forward(bi, training)));
  }
  Tensor cat = nn::concat(outs, 1);
  return out_bn.forward(out_proj.forward(cat), training);
}

Tensor Attention::forward(const Tensor& x, bool training, Rng* rng) {
  const int64_t d = x.dim(2);
  const int64_t dh = d / n_heads;
  Tensor qv = nn::split_heads(q.forward(x, training, rng), n_heads);
  Tensor kv = nn::split_heads(k.forward(x, training, rng), n_heads);
  Tensor vv = nn::split_heads(v.forward(x, training, rng), n_heads);
  Tensor scores =
      nn::scale(nn::bmm(qv, kv, false, true), 1.0 / std::sqrt(double(dh)));
  Tensor probs = nn::causal_softmax(scores);
  probs = nn::dropout(probs, dropout_p, training, rng);
  Tensor ctx = nn::merge_heads(nn::bmm(probs, vv), n_heads);
  Tensor o = out.forward(ctx, training, rng);
  return nn::dropout(o, dropout_p, training, rng);
}

Tensor Mlp::forward(const Tensor& x, bool training, Rng* rng) {
  Tensor h = nn::gelu(fc.forward(x, training, rng));
  Tensor o = proj.forward(h, training, rng);
  return nn::dropout(o, dropout_p, training, rng);
}

Tensor DecoderBlock::forward(const Tensor& x, bool training, Rng* rng) {
  Tensor h = nn::add(x, attn.forward(ln_1.forward(x), training, rng));
  return nn::add(h, mlp.forward(ln_2.forward(h), training, rng));
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

SeisMoLLM::SeisMoLLM(const ModelConfig& cfg)
    : cfg_(cfg), init_rng_(cfg.init_seed) {
  cfg_.validate();
  build();
  if (cfg_.variant == Variant::no_pretrain) params_.set_all_trainable();
}

DenseLayer SeisMoLLM::make_dense(const std::string& name, int64_t in,
                                 int64_t out, bool trainable,
                                 double init_std) {
  DenseLayer l;
  l.w = params_.add(name + ".w", {in, out}, trainable);
  l.b = params_.add(name + ".b", {out}, trainable);
  for (int64_t i = 0; i < l.w.numel(); ++i)
    l.w.data()[i] = init_rng_.normal(0.0, init_std);
  return l;
}

LoraDense SeisMoLLM::make_lora(const std::string& name, int64_t in,
                               int64_t out) {
  LoraDense l;
  // base affine: frozen pretrained weights (overwritten by the loader)
  l.w = params_.add(name + ".w", {in, out}, /*trainable=*/false);
  l.b = params_.add(name + ".b", {out}, /*trainable=*/false);
  params_.at(name + ".w").frozen = true;
  params_.at(name + ".b").frozen = true;
  for (int64_t i = 0; i < l.w.numel(); ++i)
    l.w.data()[i] = init_rng_.normal(0.0, 0.02);
  l.lora_a = params_.add(name + ".lora_a", {in, cfg_.lora_rank}, true);
  l.lora_b = params_.add(name + ".lora_b", {cfg_.lora_rank, out}, true);
  l.lora_bias = params_.add(name + ".lora_bias", {out}, true);
  for (int64_t i = 0; i < l.lora_a.numel(); ++i)
    l.lora_a.data()[i] = init_rng_.normal(0.0, 0.02);
  // lora_b stays zero: adapted forward equals the frozen forward at init
  l.scale = cfg_.lora_alpha / static_cast<double>(cfg_.lora_rank);
  l.dropout_p = cfg_.lora_dropout;
  l.use_lora = true;
  return l;
}

ConvLayer SeisMoLLM::make_conv(const std::string& name, int64_t cin,
                               int64_t cout, int k, int stride) {
  ConvLayer c;
  c.w = params_.add(name + ".w", {cout, cin, k}, true);
  c.b = params_.add(name + ".b", {cout}, true);
  c.stride = stride;
  const double std = std::sqrt(2.0 / static_cast<double>(cin * k));
  for (int64_t i = 0; i < c.w.numel(); ++i)
    c.w.data()[i] = init_rng_.normal(0.0, std);
  return c;
}

BatchNormLayer SeisMoLLM::make_bn(const std::string& name, int64_t channels) {
  BatchNormLayer bn;
  bn.gamma = params_.add(name + ".gamma", {channels}, true);
  bn.beta = params_.add(name + ".beta", {channels}, true);
  std::fill_n(bn.gamma.data(), channels, 1.0);
  bn.state.init(channels);
  params_.add_buffer(name + ".running_mean", bn.state.running_mean);
  params_.add_buffer(name + ".running_var", bn.state.running_var);
  return bn;
}

LayerNormLayer SeisMoLLM::make_ln(const std::string& name, int64_t dim,
                                  bool trainable) {
  LayerNormLayer ln;
  ln.gamma = params_.add(name + ".gamma", {dim}, trainable);
  ln.beta = params_.add(name + ".beta", {dim}, trainable);
  std::fill_n(ln.gamma.data(), dim, 1.0);
  return ln;
}

void SeisMoLLM::build() {
  const int64_t hidden = cfg_.hidden;
  const auto v = cfg_.variant;

  // Front end
  if (v == Variant::no_conv) {
    patch_embed_ = make_dense("patch_embed", 3 * cfg_.raw_patch, hidden, true,
                              std::sqrt(2.0 / (3.0 * cfg_.raw_patch)));
  } else {
    int64_t cin = 3;
    for (size_t bi = 0; bi < cfg_.channels.size(); ++bi) {
      const int64_t cout = cfg_.channels[bi];
      const int stride = cfg_.strides[bi];
      const std::string base = "embedder.block" + std::to_string(bi);
      MultiScaleBlock blk;
      blk.in_proj = make_conv(base + ".in_proj", cin, cout, 1, 1);
      for (size_t ki = 0; ki < cfg_.kernel_sizes.size(); ++ki) {
        const std::string bb = base + ".branch" + std::to_string(ki);
        blk.branches.push_back(
            make_conv(bb + ".conv", cout, cout, cfg_.kernel_sizes[ki], stride));
        blk.branch_bn.push_back(make_bn(bb + ".bn", cout));
      }
      blk.out_proj = make_conv(
          base + ".out_proj",
          cout * static_cast<int64_t>(cfg_.kernel_sizes.size()), cout, 1, 1);
      blk.out_bn = make_bn(base + ".out_bn", cout);
      embedder_.push_back(std::move(blk));
      cin = cout;
    }
  }

  // Backbone
  const bool llm_like = (v == Variant::full || v == Variant::no_pretrain ||
                         v == Variant::no_conv || v == Variant::layers_2 ||
                         v == Variant::layers_6 || v == Variant::layers_12);
  if (v != Variant::no_llm) {
    wpe_ = params_.add("llm.wpe", {cfg_.max_positions, hidden}, true);
    for (int64_t i = 0; i < wpe_.numel(); ++i)
      wpe_.data()[i] = init_rng_.normal(0.0, 0.02);
    has_wpe_ = true;
    has_backbone_ = true;
    if (llm_like) {
      for (int li = 0; li < cfg_.n_layers; ++li) {
        const std::string base = "llm.h" + std::to_string(li);
        DecoderBlock blk;
        blk.ln_1 = make_ln(base + ".ln_1", hidden);
        blk.ln_2 = make_ln(base + ".ln_2", hidden);
        blk.attn.q = make_lora(base + ".attn.q", hidden, hidden);
        blk.attn.k = make_lora(base + ".attn.k", hidden, hidden);
        blk.attn.v = make_lora(base + ".attn.v", hidden, hidden);
        blk.attn.out = make_lora(base + ".attn.out", hidden, hidden);
        blk.attn.n_heads = cfg_.n_heads;
        blk.attn.dropout_p = cfg_.block_dropout;
        blk.mlp.fc = make_lora(base + ".mlp.fc", hidden, 4 * hidden);
        blk.mlp.proj = make_lora(base + ".mlp.proj", 4 * hidden, hidden);
        blk.mlp.dropout_p = cfg_.block_dropout;
        blocks_.push_back(std::move(blk));
      }
    } else if (v == Variant::llm2att) {
      // single randomly initialized attention layer, no adapters
      DecoderBlock blk;
      blk.ln_1 = make_ln("llm.h0.ln_1", hidden);
      auto plain = [&](const std::string& n, int64_t in, int64_t out) {
        LoraDense d;
        DenseLayer base = make_dense(n, in, out, true, 0.02);
        d.w = base.w;
        d.b = base.b;
        d.use_lora = false;
        return d;
      };
      blk.attn.q = plain("llm.h0.attn.q", hidden, hidden);
      blk.attn.k = plain("llm.h0.attn.k", hidden, hidden);
      blk.attn.v = plain("llm.h0.attn.v", hidden, hidden);
      blk.attn.out = plain("llm.h0.attn.out", hidden, hidden);
      blk.attn.n_heads = cfg_.n_heads;
      blk.attn.dropout_p = cfg_.block_dropout;
      blocks_.push_back(std::move(blk));  // mlp unused for llm2att
    } else if (v == Variant::llm2trsf) {
      DecoderBlock blk;
      blk.ln_1 = make_ln("llm.h0.ln_1", hidden);
      blk.ln_2 = make_ln("llm.h0.ln_2", hidden);
      auto plain = [&](const std::string& n, int64_t in, int64_t out) {
        LoraDense d;
        DenseLayer base = make_dense(n, in, out, true, 0.02);
        d.w = base.w;
        d.b = base.b;
        d.use_lora = false;
        return d;
      };
      blk.attn.q = plain("llm.h0.attn.q", hidden, hidden);
      blk.attn.k = plain("llm.h0.attn.k", hidden, hidden);
      blk.attn.v = plain("llm.h0.attn.v", hidden, hidden);
      blk.attn.out = plain("llm.h0.attn.out", hidden, hidden);
      blk.attn.n_heads = cfg_.n_heads;
      blk.attn.dropout_p = cfg_.block_dropout;
      blk.mlp.fc = plain("llm.h0.mlp.fc", hidden, 4 * hidden);
      blk.mlp.proj = plain("llm.h0.mlp.proj", 4 * hidden, hidden);
      blk.mlp.dropout_p = cfg_.block_dropout;
      blocks_.push_back(std::move(blk));
    }
    ln_f_ = make_ln("llm.ln_f", hidden);
  }

  // Heads
  if (cfg_.task == Task::picking) {
    // Unpatching the tokens gives T = L / (compression/patch); three x2
    // upsample stages restore the input length (the no_conv geometry only
    // needs x4, so its last stage is x1).
    std::vector<int> factors;
    int needed = cfg_.compression() / cfg_.patch;
    for (int s = 0; s < 3; ++s) {
      const int f = needed >= 2 ? 2 : 1;
      factors.push_back(f);
      needed /= f;
    }
    if (needed != 1)
      throw std::invalid_argument("model: unsupported picking geometry");
    const int64_t chans[4] = {96, 48, 24, 8};
    for (int s = 0; s < 3; ++s) {
      picking_head_.stage_conv.push_back(
          make_conv("head.picking.stage" + std::to_string(s), chans[s],
                    chans[s + 1], 5, 1));
      picking_head_.stage_factor.push_back(factors[static_cast<size_t>(s)]);
    }
    picking_head_.final_conv = make_conv("head.picking.final", 8, 2, 5, 1);
  } else {
    discr_head_.conv1 = make_conv("head.conv1", cfg_.hidden, 256, 3, 1);
    discr_head_.conv2 = make_conv("head.conv2", 256, 128, 3, 1);
    const int64_t out_dim =
        (cfg_.task == Task::azimuth || cfg_.task == Task::polarity) ? 2 : 1;
    discr_head_.linear = make_dense("head.linear", 128, out_dim, true, 0.02);
  }
}

// ---------------------------------------------------------------------------
// Checkpoint loading
// ---------------------------------------------------------------------------

namespace {

void copy_checked(const SafeTensorEntry& src, Tensor dst,
                  const std::string& name) {
  int64_t n = 1;
  for (auto d : src.shape) n *= d;
  if (n != dst.numel())
    throw std::runtime_error("checkpoint: tensor " + name + " has " +
                             std::to_string(n) + " elements, expected " +
                             std::to_string(dst.numel()));
  std::copy(src.data.begin(), src.data.end(), dst.data());
}

// Copies a column slice [d, out] from a fused [d, cols] matrix.
void copy_cols(const SafeTensorEntry& src, Tensor dst, int64_t col0,
               int64_t ncols, const std::string& name) {
  if (src.shape.size() != 2)
    throw std::runtime_error("checkpoint: tensor " + name + " is not 2-D");
  const int64_t rows = src.shape[0], cols = src.shape[1];
  if (dst.numel() != rows * ncols || col0 + ncols > cols)
    throw std::runtime_error("checkpoint: slice mismatch for " + name);
  for (int64_t r = 0; r < rows; ++r)
    std::copy_n(src.data.begin() + r * cols + col0, ncols,
                dst.data() + r * ncols);
}

}  // namespace

void SeisMoLLM::load_checkpoint(const CheckpointSource& src) {
  const auto v = cfg_.variant;
  if (v == Variant::no_llm || v == Variant::llm2att || v == Variant::llm2trsf ||
      v == Variant::no_pretrain) {
    throw std::logic_error("model: variant " + to_string(v) +
                           " does not load a checkpoint");
  }
  auto need = [&](const std::string& name) -> const SafeTensorEntry& {
    if (!src.has(name))
      throw std::runtime_error("checkpoint: missing tensor " + name);
    return src.get(name);
  };
  {
    const auto& wpe = need("wpe.weight");
    if (wpe.shape != std::vector<int64_t>{cfg_.max_positions, cfg_.hidden})
      throw std::runtime_error("checkpoint: wpe.weight has unexpected shape");
    copy_checked(wpe, wpe_, "wpe.weight");
  }
  const int64_t h = cfg_.hidden;
  for (int li = 0; li < cfg_.n_layers; ++li) {
    const std::string hf = "h." + std::to_string(li) + ".";
    DecoderBlock& blk = blocks_[static_cast<size_t>(li)];
    copy_checked(need(hf + "ln_1.weight"), blk.ln_1.gamma, hf + "ln_1.weight");
    copy_checked(need(hf + "ln_1.bias"), blk.ln_1.beta, hf + "ln_1.bias");
    copy_checked(need(hf + "ln_2.weight"), blk.ln_2.gamma, hf + "ln_2.weight");
    copy_checked(need(hf + "ln_2.bias"), blk.ln_2.beta, hf + "ln_2.bias");
    // fused qkv (Conv1D convention: y = x W + b, W stored [in, out])
    const auto& ca = need(hf + "attn.c_attn.weight");
    copy_cols(ca, blk.attn.q.w, 0, h, hf + "attn.c_attn.weight[q]");
    copy_cols(ca, blk.attn.k.w, h, h, hf + "attn.c_attn.weight[k]");
    copy_cols(ca, blk.attn.v.w, 2 * h, h, hf + "attn.c_attn.weight[v]");
    const auto& cab = need(hf + "attn.c_attn.bias");
    if (static_cast<int64_t>(cab.data.size()) != 3 * h)
      throw std::runtime_error("checkpoint: bad shape for " + hf +
                               "attn.c_attn.bias");
    std::copy_n(cab.data.begin(), h, blk.attn.q.b.data());
    std::copy_n(cab.data.begin() + h, h, blk.attn.k.b.data());
    std::copy_n(cab.data.begin() + 2 * h, h, blk.attn.v.b.data());
    copy_checked(need(hf + "attn.c_proj.weight"), blk.attn.out.w,
                 hf + "attn.c_proj.weight");
    copy_checked(need(hf + "attn.c_proj.bias"), blk.attn.out.b,
                 hf + "attn.c_proj.bias");
    copy_checked(need(hf + "mlp.c_fc.weight"), blk.mlp.fc.w,
                 hf + "mlp.c_fc.weight");
    copy_checked(need(hf + "mlp.c_fc.bias"), blk.mlp.fc.b, hf + "mlp.c_fc.bias");
    copy_checked(need(hf + "mlp.c_proj.weight"), blk.mlp.proj.w,
                 hf + "mlp.c_proj.weight");
    copy_checked(need(hf + "mlp.c_proj.bias"), blk.mlp.proj.b,
                 hf + "mlp.c_proj.bias");
  }
  copy_checked(need("ln_f.weight"), ln_f_.gamma, "ln_f.weight");
  copy_checked(need("ln_f.bias"), ln_f_.beta, "ln_f.bias");
}

std::unique_ptr<SeisMoLLM> build_model(const ModelConfig& cfg,
                                       const CheckpointSource* checkpoint) {
  auto m = std::make_unique<SeisMoLLM>(cfg);
  const auto v = cfg.variant;
  const bool wants_ckpt = !(v == Variant::no_llm || v == Variant::llm2att ||
                            v == Variant::llm2trsf || v == Variant::no_pretrain);
  if (wants_ckpt) {
    if (checkpoint == nullptr)
      throw std::invalid_argument("build_model: variant " + to_string(v) +
                                  " requires a checkpoint");
    m->load_checkpoint(*checkpoint);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

Tensor SeisMoLLM::standardize(const Tensor& wave) {
  Tensor x = wave;
  if (x.ndim() == 2) x = nn::reshape(x, {1, x.dim(0), x.dim(1)});
  if (x.ndim() != 3 || x.dim(1) != 3)
    throw ShapeError("model: input must be [B,3,L]");
  const int64_t b = x.dim(0), c = x.dim(1), t = x.dim(2);
  Tensor out = Tensor::zeros({b, c, t});
  for (int64_t i = 0; i < b * c; ++i) {
    const double* src = x.data() + i * t;
    double m = 0.0;
    for (int64_t j = 0; j < t; ++j) m += src[j];
    m /= static_cast<double>(t);
    double var = 0.0;
    for (int64_t j = 0; j < t; ++j) var += (src[j] - m) * (src[j] - m);
    const double inv = 1.0 / (std::sqrt(var / static_cast<double>(t)) + 1e-8);
    for (int64_t j = 0; j < t; ++j) out.data()[i * t + j] = (src[j] - m) * inv;
  }
  return out;
}

Tensor SeisMoLLM::embedder_forward(const Tensor& wave, bool training) {
  Tensor x = wave;
  if (x.ndim() == 2) x = nn::reshape(x, {1, x.dim(0), x.dim(1)});
  if (cfg_.variant == Variant::no_conv)
    throw std::logic_error("model: no_conv variant has no conv embedder");
  const int64_t stride_total = cfg_.total_stride();
  if (x.dim(2) % stride_total != 0)
    throw ShapeError("model: input length " + std::to_string(x.dim(2)) +
                     " violates the pad-to-multiple-of-" +
                     std::to_string(stride_total * cfg_.patch) +
                     " contract");
  for (auto& blk : embedder_) x = blk.forward(x, training);
  return x;
}

Tensor SeisMoLLM::tokens_forward(const Tensor& wave, bool training, Rng* rng) {
  Tensor x = wave;
  if (x.ndim() == 2) x = nn::reshape(x, {1, x.dim(0), x.dim(1)});
  if (cfg_.variant == Variant::no_conv) {
    Tensor patches = nn::latent_patch(x, cfg_.raw_patch);  // [B,N,3*P]
    return patch_embed_.forward(patches);
  }
  Tensor feat = embedder_forward(x, training);
  (void)rng;
  return nn::latent_patch(feat, cfg_.patch);
}

Tensor SeisMoLLM::llm_blocks_forward(const Tensor& tokens, bool training,
                                     Rng* rng) {
  Tensor x = tokens;
  if (x.ndim() == 2) x = nn::reshape(x, {1, x.dim(0), x.dim(1)});
  if (!has_backbone_) return x;
  const int64_t n = x.dim(1);
  if (n > cfg_.max_positions)
    throw std::domain_error("model: " + std::to_string(n) +
                            " tokens exceed positional capacity " +
                            std::to_string(cfg_.max_positions));
  if (has_wpe_) {
    Tensor pos = nn::narrow(wpe_, 0, 0, n);
    x = nn::add_rows(x, pos);
    x = nn::dropout(x, cfg_.block_dropout, training, rng);
  }
  if (cfg_.variant == Variant::llm2att) {
    // bare attention layer with residual; no MLP
    DecoderBlock& blk = blocks_[0];
    x = nn::add(x, blk.attn.forward(blk.ln_1.forward(x), training, rng));
  } else {
    for (auto& blk : blocks_) x = blk.forward(x, training, rng);
  }
  return ln_f_.forward(x);
}

Tensor SeisMoLLM::head_forward(const Tensor& tokens, bool training, Rng* rng) {
  (void)rng;
  (void)training;  // heads are dropout- and BN-free
  Tensor x = tokens;
  if (x.ndim() == 2) x = nn::reshape(x, {1, x.dim(0), x.dim(1)});
  if (cfg_.task == Task::picking) {
    const int64_t unpatch_c = cfg_.variant == Variant::no_conv
                                  ? cfg_.hidden / cfg_.patch  // 96
                                  : cfg_.channels.back();
    Tensor f = nn::latent_unpatch(x, unpatch_c, cfg_.patch);
    for (size_t s = 0; s < picking_head_.stage_conv.size(); ++s) {
      f = nn::upsample_nearest(f, picking_head_.stage_factor[s]);
      f = nn::gelu(picking_head_.stage_conv[s].forward(f));
    }
    return nn::sigmoid(picking_head_.final_conv.forward(f));
  }
  Tensor f = nn::transpose_12(x);  // [B, hidden, N]
  f = nn::gelu(discr_head_.conv1.forward(f));
  f = nn::gelu(discr_head_.conv2.forward(f));
  Tensor pooled = nn::mean_lastdim(f);  // [B, 128]
  Tensor o = discr_head_.linear.forward(pooled);
  switch (cfg_.task) {
    case Task::azimuth: return nn::tanh_act(o);
    case Task::polarity: return nn::softmax_lastdim(o);
    case Task::distance:
    case Task::magnitude: return nn::sigmoid(o);
    default: break;
  }
  throw std::logic_error("model: unhandled task head");
}

Tensor SeisMoLLM::forward(const Tensor& wave, bool training, Rng* rng) {
  Tensor x = standardize(wave);
  Tensor tokens = tokens_forward(x, training, rng);
  Tensor mixed = llm_blocks_forward(tokens, training, rng);
  return head_forward(mixed, training, rng);
}

double SeisMoLLM::trainable_fraction() const {
  const int64_t total = params_.total_elements();
  if (total == 0) return 0.0;
  return static_cast<double>(params_.trainable_elements()) /
         static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Persistence: one safetensors archive with params + buffers + partition
// ---------------------------------------------------------------------------

void SeisMoLLM::save(const std::string& path,
                     const std::string& extra_config) const {
  SafeTensorsFile f;
  nlohmann::json cfg;
  cfg["task"] = to_string(cfg_.task);
  cfg["variant"] = to_string(cfg_.variant);
  cfg["n_layers"] = cfg_.n_layers;
  cfg["hidden"] = cfg_.hidden;
  cfg["n_heads"] = cfg_.n_heads;
  cfg["patch"] = cfg_.patch;
  cfg["raw_patch"] = cfg_.raw_patch;
  cfg["lora_rank"] = cfg_.lora_rank;
  cfg["lora_alpha"] = cfg_.lora_alpha;
  cfg["lora_dropout"] = cfg_.lora_dropout;
  cfg["block_dropout"] = cfg_.block_dropout;
  cfg["init_seed"] = cfg_.init_seed;
  nlohmann::json partition;
  partition["trainable"] = nlohmann::json::array();
  partition["frozen"] = nlohmann::json::array();
  for (const auto& p : params_.all())
    partition[p.trainable ? "trainable" : "frozen"].push_back(p.name);
  f.set_metadata("format", "seismollm.ckpt.v1");
  f.set_metadata("model_config", cfg.dump());
  f.set_metadata("partition", partition.dump());
  if (!extra_config.empty()) f.set_metadata("experiment_config", extra_config);
  for (const auto& p : params_.all()) {
    std::vector<double> v(p.tensor.data(), p.tensor.data() + p.tensor.numel());
    f.add(p.name, p.tensor.shape(), v);
  }
  for (const auto& b : params_.buffers())
    f.add("buffer." + b.name,
          {static_cast<int64_t>(b.data->size())}, *b.data);
  f.write(path);
}

std::unique_ptr<SeisMoLLM> SeisMoLLM::load(const std::string& path,
                                           std::string* extra_config) {
  SafeTensorsFile f = SafeTensorsFile::read(path);
  const auto& md = f.metadata();
  auto it = md.find("format");
  if (it == md.end() || it->second != "seismollm.ckpt.v1")
    throw std::runtime_error("model: " + path +
                             " is not a seismollm.ckpt.v1 archive");
  nlohmann::json cfg = nlohmann::json::parse(md.at("model_config"));
  ModelConfig mc;
  mc.task = task_from_string(cfg.at("task").get<std::string>());
  mc.variant = variant_from_string(cfg.at("variant").get<std::string>());
  mc.n_layers = cfg.at("n_layers").get<int>();
  mc.hidden = cfg.at("hidden").get<int>();
  mc.n_heads = cfg.at("n_heads").get<int>();
  mc.patch = cfg.at("patch").get<int>();
  mc.raw_patch = cfg.at("raw_patch").get<int>();
  mc.lora_rank = cfg.at("lora_rank").get<int>();
  mc.lora_alpha = cfg.at("lora_alpha").get<double>();
  mc.lora_dropout = cfg.at("lora_dropout").get<double>();
  mc.block_dropout = cfg.at("block_dropout").get<double>();
  mc.init_seed = cfg.at("init_seed").get<uint64_t>();
  auto m = std::make_unique<SeisMoLLM>(mc);
  for (auto& p : m->params_.all()) {
    if (!f.has(p.name))
      throw std::runtime_error("model: archive missing tensor " + p.name);
    const auto& e = f.get(p.name);
    if (static_cast<int64_t>(e.data.size()) != p.tensor.numel())
      throw std::runtime_error("model: archive tensor " + p.name +
                               " has wrong size");
    std::copy(e.data.begin(), e.data.end(), p.tensor.data());
  }
  for (const auto& b : m->params_.buffers()) {
    const std::string key = "buffer." + b.name;
    if (!f.has(key))
      throw std::runtime_error("model: archive missing buffer " + b.name);
    const auto& e = f.get(key);
    if (e.data.size() != b.data->size())
      throw std::runtime_error("model: archive buffer " + b.name +
                               " has wrong size");
    *b.data = e.data;
  }
  if (extra_config) {
    auto ec = md.find("experiment_config");
    *extra_config = (ec == md.end()) ? "" : ec->second;
  }
  return m;
}

}  // namespace seismo::model
