#include <doctest.h>

#include <cmath>

#include "seismo/model.hpp"
#include "support/gpt2_reference.hpp"
#include "support/testutil.hpp"

using namespace seismo;
using namespace seismo::model;
using nn::Tensor;

namespace {

ModelConfig small_cfg(Task task, Variant variant, int n_layers) {
  ModelConfig cfg;
  cfg.task = task;
  cfg.variant = variant;
  const int fixed = variant_layers(variant);
  cfg.n_layers = fixed >= 0 ? fixed : n_layers;
  cfg.init_seed = 33;
  return cfg;
}

// Checkpoint stub that counts reads and can hide one tensor.
class CountingCheckpoint : public CheckpointSource {
 public:
  explicit CountingCheckpoint(const std::string& path) : inner_(path) {}
  bool has(const std::string& name) const override {
    ++reads;
    if (name == hidden) return false;
    return inner_.has(name);
  }
  const SafeTensorEntry& get(const std::string& name) const override {
    ++reads;
    return inner_.get(name);
  }
  mutable int64_t reads = 0;
  std::string hidden;

 private:
  FileCheckpoint inner_;
};

}  // namespace

TEST_SUITE("model") {

TEST_CASE("multi-scale block: shapes, concat width, zero-weight identity") {
  SeisMoLLM m(small_cfg(Task::distance, Variant::no_llm, 0));
  auto& blocks = m.embedder_blocks();
  REQUIRE(blocks.size() == 4);

  // block 0: C_in=3 -> C_out=16, stride 2, T=64 -> [16 x 32]
  Rng rng(1);
  Tensor x = Tensor::randn({1, 3, 64}, rng, 1.0);
  Tensor y = blocks[0].forward(x, /*training=*/false);
  CHECK(y.shape() == nn::Shape{1, 16, 32});

  // concat width before the output projection is n * C_out
  const auto& w = m.params().at("embedder.block0.out_proj.w").tensor;
  CHECK(w.shape() == nn::Shape{16, 64, 1});

  // all-zero weights + identity BN statistics (as initialized) -> zeros
  for (const char* name :
       {"embedder.block0.in_proj.w", "embedder.block0.in_proj.b",
        "embedder.block0.out_proj.w", "embedder.block0.out_proj.b"}) {
    auto& t = m.params().at(name).tensor;
    std::fill(t.data(), t.data() + t.numel(), 0.0);
  }
  for (int br = 0; br < 4; ++br) {
    const std::string base = "embedder.block0.branch" + std::to_string(br);
    for (const std::string suffix : {".conv.w", ".conv.b", ".bn.beta"}) {
      auto& t = m.params().at(base + suffix).tensor;
      std::fill(t.data(), t.data() + t.numel(), 0.0);
    }
  }
  {
    auto& t = m.params().at("embedder.block0.out_bn.beta").tensor;
    std::fill(t.data(), t.data() + t.numel(), 0.0);
  }
  Tensor z = blocks[0].forward(x, false);
  for (int64_t i = 0; i < z.numel(); ++i) CHECK(z.data()[i] == 0.0);
}

TEST_CASE("embedder output shapes and padding contract") {
  SeisMoLLM m(small_cfg(Task::distance, Variant::no_llm, 0));
  Rng rng(2);
  Tensor x = Tensor::randn({1, 3, 6144}, rng, 1.0);
  Tensor f = m.embedder_forward(x);
  CHECK(f.shape() == nn::Shape{1, 96, 768});
  Tensor x2 = Tensor::randn({1, 3, 64}, rng, 1.0);
  CHECK(m.embedder_forward(x2).shape() == nn::Shape{1, 96, 8});
  Tensor bad = Tensor::randn({1, 3, 100}, rng, 1.0);
  CHECK_THROWS_AS(m.embedder_forward(bad), nn::ShapeError);

  // feature -> token geometry: C=96, T=768, P=8 -> 96 tokens of dim 768
  Tensor tok = nn::latent_patch(f, 8);
  CHECK(tok.shape() == nn::Shape{1, 96, 768});
}

TEST_CASE("LoRA dense: zero-init identity, scale, hand example") {
  Rng rng(3);
  LoraDense l;
  l.w = Tensor::randn({4, 4}, rng, 0.5);
  l.b = Tensor::randn({4}, rng, 0.5);
  l.lora_a = Tensor::randn({4, 2}, rng, 0.5);
  l.lora_b = Tensor::zeros({2, 4});
  l.lora_bias = Tensor::zeros({4});
  l.scale = 16.0 / 16.0;  // alpha = rank = 16
  l.dropout_p = 0.1;
  Tensor x = Tensor::randn({3, 4}, rng, 1.0);
  Tensor with_lora = l.forward(x, /*training=*/false, nullptr);
  Tensor base = nn::add_bias(nn::matmul(x, l.w), l.b);
  for (int64_t i = 0; i < base.numel(); ++i)
    CHECK(with_lora.data()[i] == doctest::Approx(base.data()[i]).epsilon(1e-15));

  // d=k=4, r=1, A=e1, B=e1^T, W=0, bias=0, x=I -> E11
  LoraDense unit;
  unit.w = Tensor::zeros({4, 4});
  unit.b = Tensor::zeros({4});
  unit.lora_a = Tensor::from_data({4, 1}, {1, 0, 0, 0});
  unit.lora_b = Tensor::from_data({1, 4}, {1, 0, 0, 0});
  unit.lora_bias = Tensor::zeros({4});
  unit.scale = 1.0;
  Tensor eye = Tensor::zeros({4, 4});
  for (int i = 0; i < 4; ++i) eye.data()[i * 4 + i] = 1.0;
  Tensor out = unit.forward(eye, false, nullptr);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(out.data()[i * 4 + j] == ((i == 0 && j == 0) ? 1.0 : 0.0));

  // nonzero B: output = base + scale * x A B
  LoraDense nz = l;
  nz.lora_b = Tensor::randn({2, 4}, rng, 0.5);
  nz.scale = 2.0;
  Tensor got = nz.forward(x, false, nullptr);
  Tensor delta = nn::matmul(nn::matmul(x, nz.lora_a), nz.lora_b);
  for (int64_t i = 0; i < got.numel(); ++i)
    CHECK(got.data()[i] ==
          doctest::Approx(base.data()[i] + 2.0 * delta.data()[i]).epsilon(1e-12));
}

TEST_CASE("decoder blocks: shape, causality, positional capacity") {
  auto cfg = small_cfg(Task::distance, Variant::no_pretrain, 2);
  SeisMoLLM m(cfg);
  Rng rng(4);
  Tensor tokens = Tensor::randn({1, 8, 768}, rng, 0.5);
  Tensor out = m.llm_blocks_forward(tokens);
  CHECK(out.shape() == nn::Shape{1, 8, 768});

  // causality: perturbing token j leaves outputs at positions < j unchanged
  const int64_t j = 5;
  Tensor perturbed = Tensor::zeros({1, 8, 768});
  std::copy(tokens.data(), tokens.data() + tokens.numel(), perturbed.data());
  for (int64_t d = 0; d < 768; ++d) perturbed.data()[j * 768 + d] += 0.37;
  Tensor out2 = m.llm_blocks_forward(perturbed);
  for (int64_t p = 0; p < j; ++p)
    for (int64_t d = 0; d < 768; ++d)
      CHECK(out.data()[p * 768 + d] == out2.data()[p * 768 + d]);
  bool changed = false;
  for (int64_t d = 0; d < 768; ++d)
    changed = changed || out.data()[j * 768 + d] != out2.data()[j * 768 + d];
  CHECK(changed);

  Tensor too_long = Tensor::zeros({1, 1025, 768});
  CHECK_THROWS_AS(m.llm_blocks_forward(too_long), std::domain_error);
}

TEST_CASE("loaded blocks match the independent reference forward") {
  const std::string ckpt = testutil::gpt2_checkpoint(3);
  auto cfg = small_cfg(Task::distance, Variant::full, 3);
  FileCheckpoint src(ckpt);
  auto m = build_model(cfg, &src);

  Rng rng(5);
  const int n = 16;
  Tensor tokens = Tensor::randn({n, 768}, rng, 0.6);
  Tensor ours = m->llm_blocks_forward(tokens);
  std::vector<double> toks(tokens.data(), tokens.data() + tokens.numel());
  const std::vector<double> ref = gpt2ref::forward(ckpt, 3, toks, n);
  double num = 0, den = 0;
  for (int64_t i = 0; i < ours.numel(); ++i) {
    num += (ours.data()[i] - ref[static_cast<size_t>(i)]) *
           (ours.data()[i] - ref[static_cast<size_t>(i)]);
    den += ref[static_cast<size_t>(i)] * ref[static_cast<size_t>(i)];
  }
  CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("checkpoint loading: bit-exact values, frozen counts, errors") {
  const std::string ckpt = testutil::gpt2_checkpoint(3);
  auto cfg = small_cfg(Task::distance, Variant::full, 3);
  CHECK(cfg.n_layers == 3);  // default backbone depth
  CountingCheckpoint src(ckpt);
  auto m = build_model(cfg, &src);
  CHECK(src.reads > 0);

  // loaded q slice equals columns [0, 768) of the fused c_attn matrix
  SafeTensorsFile raw = SafeTensorsFile::read(ckpt);
  const auto& fused = raw.get("h.0.attn.c_attn.weight");
  const auto& qw = m->params().at("llm.h0.attn.q.w").tensor;
  for (int r = 0; r < 768; r += 97)
    for (int c = 0; c < 768; c += 101)
      CHECK(qw.data()[r * 768 + c] == fused.data[static_cast<size_t>(r) * 2304 +
                                                 static_cast<size_t>(c)]);
  const auto& vw = m->params().at("llm.h0.attn.v.w").tensor;
  for (int r = 0; r < 768; r += 97)
    for (int c = 0; c < 768; c += 101)
      CHECK(vw.data()[r * 768 + c] ==
            fused.data[static_cast<size_t>(r) * 2304 + 1536 +
                       static_cast<size_t>(c)]);

  // per-layer frozen parameter count: 4*768*768 + 2*768*3072 (+ biases)
  int64_t frozen_h0 = 0;
  for (const auto& p : m->params().all())
    if (p.frozen && p.name.rfind("llm.h0.", 0) == 0)
      frozen_h0 += p.tensor.numel();
  const int64_t expect_mats = 4 * 768 * 768 + 2 * 768 * 3072;  // 7077888
  const int64_t expect_bias = 2304 + 768 + 3072 + 768;         // 6912
  CHECK(frozen_h0 == expect_mats + expect_bias);

  // missing tensor error names the tensor
  CountingCheckpoint broken(ckpt);
  broken.hidden = "h.1.mlp.c_fc.bias";
  CHECK_THROWS_WITH_AS(build_model(cfg, &broken),
                       doctest::Contains("h.1.mlp.c_fc.bias"),
                       std::runtime_error);

  // checkpointless build for a checkpoint-hungry variant fails
  CHECK_THROWS_AS(build_model(cfg, nullptr), std::invalid_argument);
}

TEST_CASE("trainable fraction") {
  // hand-built registry: 1 trainable scalar out of 10 parameters
  ParamRegistry reg;
  reg.add("a", {9}, false);
  reg.add("b", {1}, true);
  CHECK(static_cast<double>(reg.trainable_elements()) /
            static_cast<double>(reg.total_elements()) ==
        doctest::Approx(0.1));

  // all-frozen toy state
  ParamRegistry reg2;
  reg2.add("a", {5}, false);
  CHECK(reg2.trainable_elements() == 0);

  // default 3-layer model sits in the paper's band
  const std::string ckpt = testutil::gpt2_checkpoint(3);
  FileCheckpoint src(ckpt);
  auto m = build_model(small_cfg(Task::distance, Variant::full, 3), &src);
  const double frac = m->trainable_fraction();
  MESSAGE("default trainable fraction: ", frac);
  CHECK(frac >= 0.05);
  CHECK(frac <= 0.20);

  // no_pretrain trains everything
  auto np = build_model(small_cfg(Task::distance, Variant::no_pretrain, 3),
                        nullptr);
  CHECK(np->trainable_fraction() == 1.0);
}

TEST_CASE("head outputs: shapes and ranges") {
  Rng rng(6);
  // picking head on 96 tokens -> [2 x 6144], values in (0,1)
  SeisMoLLM pick(small_cfg(Task::picking, Variant::no_llm, 0));
  Tensor tokens = Tensor::randn({1, 96, 768}, rng, 0.5);
  Tensor out = pick.head_forward(tokens);
  CHECK(out.shape() == nn::Shape{1, 2, 6144});
  for (int64_t i = 0; i < out.numel(); ++i) {
    CHECK(out.data()[i] > 0.0);
    CHECK(out.data()[i] < 1.0);
  }
  // polarity: simplex output
  SeisMoLLM pol(small_cfg(Task::polarity, Variant::no_llm, 0));
  Tensor tok2 = Tensor::randn({2, 12, 768}, rng, 0.5);
  Tensor po = pol.head_forward(tok2);
  CHECK(po.shape() == nn::Shape{2, 2});
  for (int b = 0; b < 2; ++b)
    CHECK(po.data()[b * 2] + po.data()[b * 2 + 1] ==
          doctest::Approx(1.0).epsilon(1e-6));
  // azimuth: components in (-1, 1)
  SeisMoLLM az(small_cfg(Task::azimuth, Variant::no_llm, 0));
  Tensor ao = az.head_forward(tok2);
  CHECK(ao.shape() == nn::Shape{2, 2});
  for (int64_t i = 0; i < ao.numel(); ++i) {
    CHECK(ao.data()[i] > -1.0);
    CHECK(ao.data()[i] < 1.0);
  }
  // magnitude: scalar in (0,1)
  SeisMoLLM mag(small_cfg(Task::magnitude, Variant::no_llm, 0));
  Tensor mo = mag.head_forward(tok2);
  CHECK(mo.shape() == nn::Shape{2, 1});
  CHECK(mo.data()[0] > 0.0);
  CHECK(mo.data()[0] < 1.0);
}

TEST_CASE("standardization and full forward") {
  Rng rng(7);
  Tensor wave = Tensor::randn({2, 3, 128}, rng, 5.0);
  for (int64_t i = 0; i < 128; ++i) wave.data()[i] += 100.0;  // offset ch 0
  Tensor st = SeisMoLLM::standardize(wave);
  for (int64_t bc = 0; bc < 6; ++bc) {
    double m = 0, v = 0;
    for (int64_t t = 0; t < 128; ++t) m += st.data()[bc * 128 + t];
    m /= 128;
    for (int64_t t = 0; t < 128; ++t)
      v += (st.data()[bc * 128 + t] - m) * (st.data()[bc * 128 + t] - m);
    CHECK(std::abs(m) < 1e-10);
    CHECK(std::sqrt(v / 128) == doctest::Approx(1.0).epsilon(1e-4));
  }

  SeisMoLLM m2(small_cfg(Task::distance, Variant::no_pretrain, 2));
  Tensor pred = m2.forward(wave);
  CHECK(pred.shape() == nn::Shape{2, 1});
}

TEST_CASE("model archive round-trip") {
  testutil::TempDir dir("model_io");
  auto cfg = small_cfg(Task::azimuth, Variant::no_pretrain, 2);
  SeisMoLLM m(cfg);
  Rng rng(8);
  Tensor wave = Tensor::randn({1, 3, 128}, rng, 1.0);
  Tensor before = m.forward(wave);
  const std::string path = (dir.path() / "model.safetensors").string();
  m.save(path, "extra=1");
  std::string extra;
  auto loaded = SeisMoLLM::load(path, &extra);
  CHECK(extra == "extra=1");
  for (const auto& p : m.params().all()) {
    const auto& q = loaded->params().at(p.name);
    CHECK(q.trainable == p.trainable);
    for (int64_t i = 0; i < p.tensor.numel(); ++i)
      CHECK(q.tensor.data()[i] == p.tensor.data()[i]);
  }
  Tensor after = loaded->forward(wave);
  for (int64_t i = 0; i < before.numel(); ++i)
    CHECK(after.data()[i] == before.data()[i]);

  CHECK_THROWS_AS(SeisMoLLM::load((dir.path() / "nope.safetensors").string()),
                  std::runtime_error);
}

TEST_CASE("variant/n_layers consistency is enforced") {
  ModelConfig cfg;
  cfg.variant = Variant::layers_6;
  cfg.n_layers = 3;
  CHECK_THROWS_AS(SeisMoLLM{cfg}, std::invalid_argument);
  ModelConfig c2;
  c2.kernel_sizes = {4, 6};
  CHECK_THROWS_AS(SeisMoLLM{c2}, std::invalid_argument);
}

}  // TEST_SUITE
