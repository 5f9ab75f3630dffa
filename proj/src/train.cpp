#include "seismo/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace seismo::train {

using model::SeisMoLLM;
using model::Task;
using nn::Tensor;

void TrainConfig::validate() const {
  if (!(lr_low < lr_high))
    throw std::invalid_argument("train: requires lr_low < lr_high");
  if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (batch_size < 1 || max_epochs < 1 || cycle_epochs <= 0)
    throw std::invalid_argument("train: bad batch/epoch configuration");
  if (huber_delta <= 0)
    throw std::invalid_argument("train: huber delta must be positive");
}

// ---------------------------------------------------------------------------
// Plain-value losses (thin wrappers over the autograd ops)
// ---------------------------------------------------------------------------

double bce_loss(const std::vector<double>& pred,
                const std::vector<double>& label) {
  if (pred.size() != label.size())
    throw nn::ShapeError("bce_loss: length mismatch");
  const int64_t n = static_cast<int64_t>(pred.size());
  Tensor p = Tensor::from_data({n}, pred);
  Tensor y = Tensor::from_data({n}, label);
  return nn::bce_mean(p, y).item();
}

double picking_loss(const std::vector<double>& pred_p,
                    const std::vector<double>& pred_s,
                    const std::vector<double>& label_p,
                    const std::vector<double>& label_s) {
  if (pred_p.size() != pred_s.size() || pred_p.size() != label_p.size() ||
      label_p.size() != label_s.size())
    throw nn::ShapeError("picking_loss: length mismatch");
  return bce_loss(pred_p, label_p) + bce_loss(pred_s, label_s);
}

double ce_loss(const std::vector<double>& pred,
               const std::vector<double>& onehot) {
  if (pred.size() != onehot.size())
    throw nn::ShapeError("ce_loss: length mismatch");
  const int64_t k = static_cast<int64_t>(pred.size());
  Tensor p = Tensor::from_data({1, k}, pred);
  Tensor y = Tensor::from_data({1, k}, onehot);
  return nn::ce_rows(p, y, {1}).item();
}

double huber_loss(const std::vector<double>& pred,
                  const std::vector<double>& truth, double delta) {
  if (pred.size() != truth.size())
    throw nn::ShapeError("huber_loss: length mismatch");
  const int64_t n = static_cast<int64_t>(pred.size());
  Tensor p = Tensor::from_data({1, n}, pred);
  Tensor y = Tensor::from_data({1, n}, truth);
  return nn::huber_masked(p, y, delta, {1}).item();
}

double cyclic_lr(double epoch_progress, const TrainConfig& cfg) {
  const double cycle = cfg.cycle_epochs;
  double phase = std::fmod(epoch_progress, 2.0 * cycle);
  if (phase < 0) phase += 2.0 * cycle;
  const double frac = phase <= cycle ? phase / cycle : 2.0 - phase / cycle;
  return cfg.lr_low + (cfg.lr_high - cfg.lr_low) * frac;
}

bool early_stop(const std::vector<double>& val_losses, int patience) {
  const int64_t n = static_cast<int64_t>(val_losses.size());
  if (n <= patience) return false;
  double best_before = val_losses[0];
  for (int64_t i = 1; i < n - patience; ++i)
    best_before = std::min(best_before, val_losses[static_cast<size_t>(i)]);
  double best_recent = val_losses[static_cast<size_t>(n - patience)];
  for (int64_t i = n - patience; i < n; ++i)
    best_recent = std::min(best_recent, val_losses[static_cast<size_t>(i)]);
  return best_recent >= best_before;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(model::ParamRegistry& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto& p : params.all()) {
    if (!p.trainable) continue;
    Slot s;
    s.param = &p;
    s.m.assign(static_cast<size_t>(p.tensor.numel()), 0.0);
    s.v.assign(static_cast<size_t>(p.tensor.numel()), 0.0);
    slots_.push_back(std::move(s));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& s : slots_) {
    auto& grad = s.param->tensor.grad();
    double* w = s.param->tensor.data();
    for (size_t i = 0; i < grad.size(); ++i) {
      const double g = grad[i];
      s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g;
      s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g * g;
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& s : slots_) s.param->tensor.zero_grad();
}

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

Batch make_batch(const std::vector<data::Sample>& samples,
                 const std::vector<size_t>& indices, Task task) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  const int64_t b = static_cast<int64_t>(indices.size());
  const int64_t len = samples[indices[0]].record.length;
  Batch out;
  out.wave = Tensor::zeros({b, 3, len});
  out.valid.assign(static_cast<size_t>(b), 1);
  for (int64_t i = 0; i < b; ++i) {
    const auto& rec = samples[indices[static_cast<size_t>(i)]].record;
    if (rec.length != len)
      throw nn::ShapeError("make_batch: mixed trace lengths");
    std::copy(rec.trace.begin(), rec.trace.end(),
              out.wave.data() + i * 3 * len);
  }
  switch (task) {
    case Task::picking: {
      out.target = Tensor::zeros({b, 2, len});
      for (int64_t i = 0; i < b; ++i) {
        const auto& lab = samples[indices[static_cast<size_t>(i)]].labels;
        std::copy(lab.pick_p.begin(), lab.pick_p.end(),
                  out.target.data() + (i * 2 + 0) * len);
        std::copy(lab.pick_s.begin(), lab.pick_s.end(),
                  out.target.data() + (i * 2 + 1) * len);
      }
      break;
    }
    case Task::azimuth: {
      out.target = Tensor::zeros({b, 2});
      for (int64_t i = 0; i < b; ++i) {
        const auto& lab = samples[indices[static_cast<size_t>(i)]].labels;
        out.target.data()[i * 2 + 0] = lab.azimuth_sin;
        out.target.data()[i * 2 + 1] = lab.azimuth_cos;
        out.valid[static_cast<size_t>(i)] =
            (lab.targets_valid && lab.has_azimuth) ? 1 : 0;
      }
      break;
    }
    case Task::distance:
    case Task::magnitude: {
      out.target = Tensor::zeros({b, 1});
      for (int64_t i = 0; i < b; ++i) {
        const auto& lab = samples[indices[static_cast<size_t>(i)]].labels;
        const bool has =
            task == Task::distance ? lab.has_distance : lab.has_magnitude;
        out.target.data()[i] =
            task == Task::distance ? lab.distance_unit : lab.magnitude_unit;
        out.valid[static_cast<size_t>(i)] = (lab.targets_valid && has) ? 1 : 0;
      }
      break;
    }
    case Task::polarity: {
      out.target = Tensor::zeros({b, 2});
      for (int64_t i = 0; i < b; ++i) {
        const auto& lab = samples[indices[static_cast<size_t>(i)]].labels;
        out.target.data()[i * 2 + 0] = lab.polarity_up;
        out.target.data()[i * 2 + 1] = lab.polarity_down;
        out.valid[static_cast<size_t>(i)] =
            (lab.targets_valid && lab.has_polarity) ? 1 : 0;
      }
      break;
    }
  }
  return out;
}

nn::Tensor task_loss(Task task, const Tensor& pred, const Batch& batch,
                     double huber_delta) {
  switch (task) {
    case Task::picking: {
      Tensor pp = nn::narrow(pred, 1, 0, 1);
      Tensor ps = nn::narrow(pred, 1, 1, 1);
      Tensor lp = nn::narrow(batch.target, 1, 0, 1);
      Tensor ls = nn::narrow(batch.target, 1, 1, 1);
      return nn::add(nn::bce_mean(pp, lp), nn::bce_mean(ps, ls));
    }
    case Task::azimuth:
    case Task::distance:
    case Task::magnitude:
      return nn::huber_masked(pred, batch.target, huber_delta, batch.valid);
    case Task::polarity:
      return nn::ce_rows(pred, batch.target, batch.valid);
  }
  throw std::logic_error("task_loss: unhandled task");
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

namespace {

uint64_t fnv1a(const double* data, int64_t n, uint64_t h = 1469598103934665603ULL) {
  const unsigned char* bytes = reinterpret_cast<const unsigned char*>(data);
  for (int64_t i = 0; i < n * 8; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t frozen_checksum(const model::ParamRegistry& params) {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params.all())
    if (p.frozen) h = fnv1a(p.tensor.data(), p.tensor.numel(), h);
  return h;
}

struct Snapshot {
  std::vector<std::vector<double>> params;
  std::vector<std::vector<double>> buffers;
};

Snapshot take_snapshot(const model::ParamRegistry& reg) {
  Snapshot s;
  for (const auto& p : reg.all())
    s.params.emplace_back(p.tensor.data(), p.tensor.data() + p.tensor.numel());
  for (const auto& b : reg.buffers()) s.buffers.push_back(*b.data);
  return s;
}

void restore_snapshot(model::ParamRegistry& reg, const Snapshot& s) {
  size_t i = 0;
  for (auto& p : reg.all())
    std::copy(s.params[i].begin(), s.params[i].end(), p.tensor.data()),
        ++i;
  i = 0;
  for (const auto& b : reg.buffers()) *b.data = s.buffers[i++];
}

double dataset_loss(SeisMoLLM& m, const std::vector<data::Sample>& set,
                    const TrainConfig& cfg) {
  // eval-mode loss, no augmentation
  double total = 0.0;
  int64_t count = 0;
  const int64_t bs = cfg.batch_size;
  for (size_t start = 0; start < set.size(); start += static_cast<size_t>(bs)) {
    std::vector<size_t> idx;
    for (size_t i = start; i < std::min(set.size(), start + static_cast<size_t>(bs)); ++i)
      idx.push_back(i);
    Batch batch = make_batch(set, idx, m.config().task);
    Tensor pred = m.forward(batch.wave, /*training=*/false, nullptr);
    const double l =
        task_loss(m.config().task, pred, batch, cfg.huber_delta).item();
    total += l * static_cast<double>(idx.size());
    count += static_cast<int64_t>(idx.size());
  }
  return count > 0 ? total / static_cast<double>(count) : 0.0;
}

}  // namespace

FitResult fit(SeisMoLLM& model, const std::vector<data::Sample>& train_set,
              const std::vector<data::Sample>& val_set, const TrainConfig& cfg,
              const FitOptions& opts) {
  cfg.validate();
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("fit: train and val splits must be non-empty");

  const Task task = model.config().task;
  Adam adam(model.params(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  Rng shuffle_rng = Rng::stream(cfg.seed, 0x51);
  Rng dropout_rng = Rng::stream(cfg.seed, 0xd0);

  std::ofstream log;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    log.open(std::filesystem::path(opts.out_dir) / "train_log.jsonl");
  }

  TrainHistory history;
  Snapshot best;
  std::vector<double> val_losses;
  uint64_t freeze_ref =
      cfg.debug_freeze_check ? frozen_checksum(model.params()) : 0;

  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cyclic_lr(static_cast<double>(epoch), cfg);
    shuffle_rng.shuffle(order);

    double train_loss = 0.0;
    int64_t seen = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t stop =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<size_t> idx(order.begin() + static_cast<int64_t>(start),
                              order.begin() + static_cast<int64_t>(stop));
      Batch batch;
      if (cfg.augment_enabled) {
        // independent augmentation stream per (seed, epoch, sample index)
        std::vector<data::Sample> augmented;
        augmented.reserve(idx.size());
        for (size_t i : idx) {
          Rng arng = Rng::stream(opts.augmentation.seed ^ cfg.seed,
                                 static_cast<uint64_t>(epoch) + 1,
                                 static_cast<uint64_t>(i) + 1);
          auto res = augment::apply_pipeline(train_set[i].record,
                                             train_set[i].labels,
                                             opts.augmentation, arng);
          augmented.push_back({std::move(res.record), std::move(res.labels)});
        }
        std::vector<size_t> all(augmented.size());
        for (size_t i = 0; i < all.size(); ++i) all[i] = i;
        batch = make_batch(augmented, all, task);
      } else {
        batch = make_batch(train_set, idx, task);
      }
      Tensor pred = model.forward(batch.wave, /*training=*/true, &dropout_rng);
      Tensor loss = task_loss(task, pred, batch, cfg.huber_delta);
      const double lv = loss.item();
      if (!std::isfinite(lv))
        throw std::runtime_error(
            "fit: non-finite training loss at epoch " + std::to_string(epoch) +
            ", batch starting at " + std::to_string(start) +
            " (lr=" + std::to_string(lr) + ")");
      adam.zero_grad();
      nn::backward(loss);
      adam.step(lr);
      train_loss += lv * static_cast<double>(idx.size());
      seen += static_cast<int64_t>(idx.size());
    }
    train_loss /= static_cast<double>(seen);

    const double val_loss = dataset_loss(model, val_set, cfg);
    val_losses.push_back(val_loss);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    history.epochs.push_back({epoch, train_loss, val_loss, lr, wall});
    if (log.is_open()) {
      log << "{\"epoch\":" << epoch << ",\"train_loss\":" << train_loss
          << ",\"val_loss\":" << val_loss << ",\"lr\":" << lr
          << ",\"wall_s\":" << wall << "}\n";
      log.flush();
    }

    if (cfg.debug_freeze_check &&
        frozen_checksum(model.params()) != freeze_ref)
      throw std::logic_error("fit: a frozen tensor changed during training");

    if (history.best_epoch < 0 || val_loss < history.best_val_loss) {
      history.best_epoch = epoch;
      history.best_val_loss = val_loss;
      best = take_snapshot(model.params());
    }
    if (opts.stop_when && opts.stop_when(epoch, train_loss)) break;
    if (early_stop(val_losses, cfg.patience)) {
      history.stopped_early = true;
      break;
    }
  }

  if (history.best_epoch >= 0) restore_snapshot(model.params(), best);

  FitResult result;
  result.history = std::move(history);
  if (!opts.out_dir.empty()) {
    result.checkpoint_path =
        (std::filesystem::path(opts.out_dir) / "checkpoint.safetensors")
            .string();
    model.save(result.checkpoint_path, opts.resolved_config_text);
  }
  return result;
}

}  // namespace seismo::train
