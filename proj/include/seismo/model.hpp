#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "seismo/safetensors.hpp"
#include "seismo/tensor.hpp"

namespace seismo::model {

using nn::BatchNormState;
using nn::Shape;
using nn::Tensor;

enum class Task { picking, azimuth, distance, magnitude, polarity };
enum class Variant {
  full,
  no_llm,
  llm2att,
  llm2trsf,
  no_pretrain,
  no_conv,
  layers_2,
  layers_6,
  layers_12,
};

std::string to_string(Task t);
Task task_from_string(const std::string& s);
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

// Number of backbone layers a variant implies; 0 = keep config value.
int variant_layers(Variant v);

struct ModelConfig {
  Task task = Task::distance;
  Variant variant = Variant::full;
  int n_layers = 3;
  int hidden = 768;
  int n_heads = 12;
  int max_positions = 1024;
  int patch = 8;      // latent patch size and stride
  int raw_patch = 32; // patch size for the no_conv front end
  int lora_rank = 16;
  double lora_alpha = 16.0;
  double lora_dropout = 0.1;
  double block_dropout = 0.1;
  uint64_t init_seed = 1;
  // multi-scale embedder: 4 blocks, x8 total stride, 96 final channels so
  // that a patch of 8 gives 768-dim tokens
  std::vector<int> kernel_sizes = {3, 5, 7, 9};
  std::vector<int> channels = {16, 32, 64, 96};
  std::vector<int> strides = {2, 2, 2, 1};

  void validate() const;
  int total_stride() const;       // embedder stride product (8)
  int compression() const;        // input samples per token (64 or 32)
};

// ---------------------------------------------------------------------------
// Parameter registry with an explicit frozen/trainable partition
// ---------------------------------------------------------------------------

struct Param {
  std::string name;
  Tensor tensor;
  bool trainable = false;
  bool frozen = false;  // frozen-by-contract (pretrained base weights)
};

struct BufferRef {
  std::string name;
  std::shared_ptr<std::vector<double>> data;
};

class ParamRegistry {
 public:
  Tensor add(const std::string& name, Shape shape, bool trainable);
  void add_buffer(const std::string& name,
                  std::shared_ptr<std::vector<double>> data);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  std::deque<Param>& all() { return params_; }
  const std::deque<Param>& all() const { return params_; }
  const std::vector<BufferRef>& buffers() const { return buffers_; }

  int64_t total_elements() const;  // parameters only (buffers excluded)
  int64_t trainable_elements() const;
  void set_all_trainable();            // no_pretrain: full fine-tuning

 private:
  std::deque<Param> params_;  // insertion order, stable addresses
  std::map<std::string, size_t> index_;
  std::vector<BufferRef> buffers_;
};

// ---------------------------------------------------------------------------
// Checkpoint access (GPT-2 small tensors under canonical names)
// ---------------------------------------------------------------------------

class CheckpointSource {
 public:
  virtual ~CheckpointSource() = default;
  virtual bool has(const std::string& name) const = 0;
  virtual const SafeTensorEntry& get(const std::string& name) const = 0;
};

class FileCheckpoint : public CheckpointSource {
 public:
  explicit FileCheckpoint(const std::string& path);
  bool has(const std::string& name) const override;
  const SafeTensorEntry& get(const std::string& name) const override;

 private:
  SafeTensorsFile file_;
  std::string prefix_;  // "" or "transformer."
};

// Writes a randomly initialized checkpoint with the exact GPT-2-small tensor
// names and shapes (12 layers, hidden 768). Stands in for the published
// weight file on machines without it.
void write_surrogate_gpt2_checkpoint(const std::string& path, int n_layers,
                                     uint64_t seed);

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

struct DenseLayer {  // y = x W + b, weight stored [in, out]
  Tensor w, b;
  Tensor forward(const Tensor& x) const;
};

struct LoraDense {
  Tensor w, b;  // base affine; frozen when loaded from the checkpoint
  Tensor lora_a, lora_b, lora_bias;
  bool use_lora = true;
  double scale = 1.0;      // alpha / rank
  double dropout_p = 0.1;  // on the adapter input, training only
  Tensor forward(const Tensor& x, bool training, Rng* rng) const;
};

struct ConvLayer {  // weight [Cout, Cin, K]
  Tensor w, b;
  int stride = 1;
  Tensor forward(const Tensor& x) const;
};

struct BatchNormLayer {
  Tensor gamma, beta;
  BatchNormState state;
  Tensor forward(const Tensor& x, bool training);
};

struct LayerNormLayer {
  Tensor gamma, beta;
  Tensor forward(const Tensor& x) const;
};

// Multi-scale convolution block: a shared input projection feeds n strided
// branch convolutions with different kernel sizes; branch outputs are
// concatenated on the channel axis, projected back to C_out and normalized.
struct MultiScaleBlock {
  ConvLayer in_proj;                 // 1x1, C_in -> C_out
  std::vector<ConvLayer> branches;   // k_i, C_out -> C_out, stride s
  std::vector<BatchNormLayer> branch_bn;
  ConvLayer out_proj;                // 1x1, n*C_out -> C_out
  BatchNormLayer out_bn;
  Tensor forward(const Tensor& x, bool training);
};

struct Attention {
  LoraDense q, k, v, out;
  int n_heads = 12;
  double dropout_p = 0.1;
  Tensor forward(const Tensor& x, bool training, Rng* rng);
};

struct Mlp {
  LoraDense fc, proj;
  double dropout_p = 0.1;
  Tensor forward(const Tensor& x, bool training, Rng* rng);
};

struct DecoderBlock {  // pre-norm GPT-2 block
  LayerNormLayer ln_1, ln_2;
  Attention attn;
  Mlp mlp;
  Tensor forward(const Tensor& x, bool training, Rng* rng);
};

// ---------------------------------------------------------------------------
// The model
// ---------------------------------------------------------------------------

class SeisMoLLM {
 public:
  explicit SeisMoLLM(const ModelConfig& cfg);
  SeisMoLLM(const SeisMoLLM&) = delete;
  SeisMoLLM& operator=(const SeisMoLLM&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamRegistry& params() { return params_; }
  const ParamRegistry& params() const { return params_; }
  std::vector<MultiScaleBlock>& embedder_blocks() { return embedder_; }

  // Loads positional embeddings, the first n_layers blocks and the final
  // layer norm from a GPT-2-small checkpoint. Errors name the tensor.
  void load_checkpoint(const CheckpointSource& src);

  // Per-trace, per-channel standardization (not part of the autograd graph).
  static Tensor standardize(const Tensor& wave);

  // wave [B,3,L] (or [3,L]) -> task prediction; applies standardization,
  // the variant front end, the backbone and the task head.
  Tensor forward(const Tensor& wave, bool training = false,
                 Rng* rng = nullptr);

  // Exposed stages (operate on already standardized input).
  Tensor embedder_forward(const Tensor& wave, bool training = false);
  Tensor tokens_forward(const Tensor& wave, bool training, Rng* rng);
  Tensor llm_blocks_forward(const Tensor& tokens, bool training = false,
                            Rng* rng = nullptr);
  Tensor head_forward(const Tensor& tokens, bool training = false,
                      Rng* rng = nullptr);

  double trainable_fraction() const;

  void save(const std::string& path,
            const std::string& extra_config = "") const;
  static std::unique_ptr<SeisMoLLM> load(const std::string& path,
                                         std::string* extra_config = nullptr);

 private:
  void build();
  void init_params();
  DenseLayer make_dense(const std::string& name, int64_t in, int64_t out,
                        bool trainable, double init_std);
  LoraDense make_lora(const std::string& name, int64_t in, int64_t out);
  ConvLayer make_conv(const std::string& name, int64_t cin, int64_t cout,
                      int k, int stride);
  BatchNormLayer make_bn(const std::string& name, int64_t channels);
  LayerNormLayer make_ln(const std::string& name, int64_t dim,
                         bool trainable = true);

  ModelConfig cfg_;
  ParamRegistry params_;
  Rng init_rng_;

  // front end
  std::vector<MultiScaleBlock> embedder_;
  DenseLayer patch_embed_;  // no_conv variant

  // backbone
  Tensor wpe_;
  std::vector<DecoderBlock> blocks_;
  LayerNormLayer ln_f_;
  bool has_backbone_ = false;   // any token mixer present
  bool has_wpe_ = false;

  // heads
  struct PickingHead {
    std::vector<ConvLayer> stage_conv;
    std::vector<int> stage_factor;
    ConvLayer final_conv;
  } picking_head_;
  struct DiscrHead {
    ConvLayer conv1, conv2;
    DenseLayer linear;
  } discr_head_;
};

// Convenience wrapper mirroring the build contract: constructs the model for
// `cfg` and loads the checkpoint when the variant calls for one.
std::unique_ptr<SeisMoLLM> build_model(const ModelConfig& cfg,
                                       const CheckpointSource* checkpoint);

}  // namespace seismo::model
