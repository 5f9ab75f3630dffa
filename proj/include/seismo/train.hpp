#pragma once

#include <functional>
#include <string>
#include <vector>

#include "seismo/augment.hpp"
#include "seismo/data.hpp"
#include "seismo/model.hpp"
#include "seismo/tensor.hpp"

namespace seismo::train {

struct TrainConfig {
  int64_t batch_size = 128;
  double lr_low = 5e-4;
  double lr_high = 1e-3;
  double cycle_epochs = 10.0;  // half-cycle length of the triangular schedule
  int patience = 30;
  int max_epochs = 200;
  double huber_delta = 1.0;
  uint64_t seed = 0;
  bool augment_enabled = true;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  bool debug_freeze_check = false;  // checksum frozen tensors every epoch
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double wall_s = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

// ---------------------------------------------------------------------------
// Losses on plain values (delegate to the autograd ops, which training uses)
// ---------------------------------------------------------------------------

double bce_loss(const std::vector<double>& pred,
                const std::vector<double>& label);
double picking_loss(const std::vector<double>& pred_p,
                    const std::vector<double>& pred_s,
                    const std::vector<double>& label_p,
                    const std::vector<double>& label_s);
double ce_loss(const std::vector<double>& pred,
               const std::vector<double>& onehot);
double huber_loss(const std::vector<double>& pred,
                  const std::vector<double>& truth, double delta = 1.0);

// Triangular cyclic schedule in [lr_low, lr_high], period 2*cycle_epochs,
// starting at lr_low with the peak at cycle_epochs.
double cyclic_lr(double epoch_progress, const TrainConfig& cfg);

// True when the last `patience` validation losses all fail to improve on the
// best seen before them.
bool early_stop(const std::vector<double>& val_losses, int patience);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

class Adam {
 public:
  Adam(model::ParamRegistry& params, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(double lr);  // consumes accumulated gradients of trainable params
  void zero_grad();
  int64_t steps() const { return t_; }

 private:
  struct Slot {
    model::Param* param;
    std::vector<double> m, v;
  };
  std::vector<Slot> slots_;
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Batches and the fit loop
// ---------------------------------------------------------------------------

struct Batch {
  nn::Tensor wave;              // [B,3,L]
  nn::Tensor target;            // [B,2,L] picking, [B,2] az/pol, [B,1] scalar
  std::vector<uint8_t> valid;   // per-sample target validity
};

Batch make_batch(const std::vector<data::Sample>& samples,
                 const std::vector<size_t>& indices, model::Task task);

nn::Tensor task_loss(model::Task task, const nn::Tensor& pred,
                     const Batch& batch, double huber_delta);

struct FitOptions {
  std::string out_dir;                 // checkpoint + log destination
  std::string resolved_config_text;    // embedded in the checkpoint archive
  augment::AugmentationSpec augmentation;
  // optional early exit for tests; called after each epoch
  std::function<bool(int epoch, double train_loss)> stop_when;
};

struct FitResult {
  TrainHistory history;
  std::string checkpoint_path;  // empty when out_dir was empty
};

// Adam + cyclic LR + early stopping; only trainable parameters are updated,
// augmentation runs on training batches only, and per-sample targets flagged
// invalid are excluded from scalar-target losses. The best-validation
// parameter snapshot is restored into the model and persisted.
FitResult fit(model::SeisMoLLM& model, const std::vector<data::Sample>& train_set,
              const std::vector<data::Sample>& val_set, const TrainConfig& cfg,
              const FitOptions& opts);

}  // namespace seismo::train
