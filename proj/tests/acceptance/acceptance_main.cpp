// Acceptance suite: runs the build's verification criteria end to end and
// prints one pass/fail line per criterion. Exit code = number of failures.
//
//   acceptance_tests            run everything
//   acceptance_tests 1 5 12     run a subset by number

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "seismo/augment.hpp"
#include "seismo/data.hpp"
#include "seismo/eval.hpp"
#include "seismo/experiments.hpp"
#include "seismo/geo.hpp"
#include "seismo/model.hpp"
#include "seismo/train.hpp"
#include "support/gpt2_reference.hpp"
#include "support/testutil.hpp"

using namespace seismo;
using model::SeisMoLLM;
using model::Task;
using model::Variant;
using nn::Tensor;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw Failure(msg);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Shared synthetic sets: 3-channel events, 128 samples at 50 Hz, epicentral
// distances 2-12 km so both arrivals always fit.
std::vector<data::Sample> synth_set(int n, uint64_t seed,
                                    double noise = 0.02) {
  data::ScalingRanges sc;
  sc.distance_lo = 0.0;
  sc.distance_hi = 25.0;
  std::vector<data::Sample> out;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    data::SynthEventParams p;
    p.magnitude = rng.uniform(2.0, 5.0);
    p.distance_km = rng.uniform(2.0, 12.0);
    p.back_azimuth_deg = rng.uniform(0.0, 360.0);
    p.polarity = rng.bernoulli(0.5) ? data::Polarity::up : data::Polarity::down;
    p.noise_level = noise;
    auto [rec, lab] = data::synth_event(p, rng.next_u64(), 128, 50.0, sc);
    out.push_back({std::move(rec), std::move(lab)});
  }
  return out;
}

data::ScalingRanges desk_scaling() {
  data::ScalingRanges sc;
  sc.distance_lo = 0.0;
  sc.distance_hi = 25.0;
  return sc;
}

model::ModelConfig default_cfg(Task task, Variant variant = Variant::full,
                               int n_layers = 3, uint64_t seed = 2024) {
  model::ModelConfig cfg;
  cfg.task = task;
  cfg.variant = variant;
  const int fixed = model::variant_layers(variant);
  cfg.n_layers = fixed >= 0 ? fixed : n_layers;
  cfg.init_seed = seed;
  return cfg;
}

double picking_train_f1(SeisMoLLM& m, const std::vector<data::Sample>& set) {
  eval::EvalConfig ec;
  ec.scaling = desk_scaling();
  eval::ModelPredictor pred(m);
  auto rep = eval::evaluate(pred, set, ec);
  return std::min(rep.sections.at("phase_p").at("f1"),
                  rep.sections.at("phase_s").at("f1"));
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

void criterion_shapes(std::ostream& log) {
  for (int64_t len : {64, 6144, 12288}) {
    SeisMoLLM m(default_cfg(Task::distance, Variant::no_llm, 0));
    Rng rng(static_cast<uint64_t>(len));
    Tensor wave = Tensor::randn({1, 3, len}, rng, 1.0);
    Tensor feat = m.embedder_forward(wave);
    require(feat.shape() == nn::Shape{1, 96, len / 8},
            "embedder output for L=" + std::to_string(len) + " is " +
                nn::shape_str(feat.shape()));
    Tensor tokens = nn::latent_patch(feat, 8);
    require(tokens.dim(1) == len / 64,
            "token count for L=" + std::to_string(len) + " is " +
                std::to_string(tokens.dim(1)));
    require(tokens.dim(2) == 768, "token dim is not 768");
  }
  log << "embedder [96 x L/8], token count L/64 for L in {64, 6144, 12288}";
}

void criterion_lora_identity(std::ostream& log) {
  const std::string ckpt = testutil::gpt2_checkpoint(12);
  const bool surrogate =
      ckpt.find("surrogate") != std::string::npos;
  model::FileCheckpoint src(ckpt);
  auto m = model::build_model(default_cfg(Task::distance), &src);
  // adapters start at exact zero
  for (const auto& p : m->params().all())
    if (p.name.find("lora_b") != std::string::npos ||
        p.name.find("lora_bias") != std::string::npos)
      for (int64_t i = 0; i < p.tensor.numel(); ++i)
        require(p.tensor.data()[i] == 0.0, p.name + " not zero at init");

  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 8 + static_cast<int>(rng.uniform_int(25ull));  // 8..32
    Tensor tokens = Tensor::randn({n, 768}, rng, 0.7);
    Tensor ours = m->llm_blocks_forward(tokens);
    std::vector<double> in(tokens.data(), tokens.data() + tokens.numel());
    const auto ref = gpt2ref::forward(ckpt, 3, in, n);
    double num = 0, den = 0;
    for (int64_t i = 0; i < ours.numel(); ++i) {
      const double d = ours.data()[i] - ref[static_cast<size_t>(i)];
      num += d * d;
      den += ref[static_cast<size_t>(i)] * ref[static_cast<size_t>(i)];
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  require(worst <= 1e-4, "relative error vs reference " + fmt(worst));
  log << "10 sequences match the independent reference forward, max rel err "
      << fmt(worst) << " (" << (surrogate ? "surrogate" : "published")
      << " checkpoint)";
}

void criterion_freezing(std::ostream& log) {
  const std::string ckpt = testutil::gpt2_checkpoint(3);
  model::FileCheckpoint src(ckpt);
  auto m = model::build_model(default_cfg(Task::distance), &src);
  std::vector<std::pair<std::string, std::vector<double>>> before;
  for (const auto& p : m->params().all())
    if (p.frozen)
      before.emplace_back(p.name,
                          std::vector<double>(p.tensor.data(),
                                              p.tensor.data() +
                                                  p.tensor.numel()));
  require(!before.empty(), "no frozen tensors found");

  auto set = synth_set(32, 404);
  train::Adam adam(m->params());
  Rng drop_rng(11);
  std::vector<size_t> idx;
  for (size_t i = 0; i < 16; ++i) idx.push_back(i);
  for (int step = 0; step < 5; ++step) {
    for (auto& i : idx) i = (i + 16) % set.size();
    train::Batch batch = train::make_batch(set, idx, Task::distance);
    Tensor pred = m->forward(batch.wave, true, &drop_rng);
    Tensor loss = train::task_loss(Task::distance, pred, batch, 1.0);
    adam.zero_grad();
    nn::backward(loss);
    adam.step(7.5e-4);
  }
  require(adam.steps() == 5, "expected 5 optimizer steps");
  for (const auto& [name, vals] : before) {
    const auto& t = m->params().at(name).tensor;
    for (int64_t i = 0; i < t.numel(); ++i)
      require(t.data()[i] == vals[static_cast<size_t>(i)],
              "frozen tensor " + name + " changed at coordinate " +
                  std::to_string(i));
  }
  const double frac = m->trainable_fraction();
  require(frac >= 0.05 && frac <= 0.20,
          "trainable fraction " + fmt(frac) + " outside [0.05, 0.20]");
  char fbuf[32];
  std::snprintf(fbuf, sizeof(fbuf), "%.4f", frac);
  log << "frozen tensors bit-identical after 5 Adam steps; trainable fraction "
      << fbuf;
}

void criterion_gradients(std::ostream& log) {
  const double h = 1e-5, tol = 1e-3;
  int total_coords = 0;
  auto check_coord = [&](Tensor leaf, int64_t i,
                         const std::function<double()>& fwd, double analytic,
                         const std::string& what) {
    const double saved = leaf.data()[i];
    leaf.data()[i] = saved + h;
    const double up = fwd();
    leaf.data()[i] = saved - h;
    const double dn = fwd();
    leaf.data()[i] = saved;
    const double fd = (up - dn) / (2 * h);
    const double rel = std::abs(analytic - fd) /
                       std::max({std::abs(analytic), std::abs(fd), 1e-6});
    require(rel < tol, what + ": coordinate " + std::to_string(i) +
                           " rel err " + fmt(rel) + " (analytic " +
                           fmt(analytic) + ", fd " + fmt(fd) + ")");
    ++total_coords;
  };

  Rng rng(505);
  {  // binary cross-entropy (Eq. 4) on 60 probability coordinates
    Tensor p = Tensor::zeros({60}, true);
    Tensor y = Tensor::zeros({60});
    for (int i = 0; i < 60; ++i) {
      p.data()[i] = rng.uniform(0.05, 0.95);
      y.data()[i] = rng.uniform(0.0, 1.0);
    }
    auto fwd = [&] { return nn::bce_mean(p, y).item(); };
    Tensor loss = nn::bce_mean(p, y);
    p.zero_grad();
    nn::backward(loss);
    for (int i = 0; i < 60; ++i) check_coord(p, i, fwd, p.grad()[i], "bce");
  }
  {  // picking loss (Eq. 5) = BCE(P) + BCE(S), through sigmoid
    Tensor lp = Tensor::randn({2, 30}, rng, 1.0, true);
    Tensor ls = Tensor::randn({2, 30}, rng, 1.0, true);
    Tensor yp = Tensor::zeros({2, 30});
    Tensor ys = Tensor::zeros({2, 30});
    for (int64_t i = 0; i < 60; ++i) {
      yp.data()[i] = rng.uniform(0.0, 1.0);
      ys.data()[i] = rng.uniform(0.0, 1.0);
    }
    auto fwd = [&] {
      return nn::add(nn::bce_mean(nn::sigmoid(lp), yp),
                     nn::bce_mean(nn::sigmoid(ls), ys))
          .item();
    };
    Tensor loss = nn::add(nn::bce_mean(nn::sigmoid(lp), yp),
                          nn::bce_mean(nn::sigmoid(ls), ys));
    lp.zero_grad();
    ls.zero_grad();
    nn::backward(loss);
    for (int64_t i = 0; i < 60; i += 2)
      check_coord(lp, i, fwd, lp.grad()[i], "picking");
    for (int64_t i = 1; i < 60; i += 2)
      check_coord(ls, i, fwd, ls.grad()[i], "picking");
  }
  {  // cross-entropy (Eq. 6) through softmax logits
    Tensor logits = Tensor::randn({30, 2}, rng, 1.0, true);
    Tensor onehot = Tensor::zeros({30, 2});
    for (int i = 0; i < 30; ++i)
      onehot.data()[i * 2 + (rng.bernoulli(0.5) ? 1 : 0)] = 1.0;
    std::vector<uint8_t> mask(30, 1);
    auto fwd = [&] {
      return nn::ce_rows(nn::softmax_lastdim(logits), onehot, mask).item();
    };
    Tensor loss = nn::ce_rows(nn::softmax_lastdim(logits), onehot, mask);
    logits.zero_grad();
    nn::backward(loss);
    for (int64_t i = 0; i < 60; ++i)
      check_coord(logits, i, fwd, logits.grad()[i], "ce");
  }
  {  // Huber (Eq. 7), coordinates on both branches
    Tensor pred = Tensor::zeros({1, 60}, true);
    Tensor truth = Tensor::zeros({1, 60});
    for (int i = 0; i < 60; ++i)
      pred.data()[i] = (i % 2 == 0) ? rng.uniform(-0.9, 0.9)
                                    : rng.uniform(1.2, 3.0);
    std::vector<uint8_t> mask{1};
    auto fwd = [&] {
      return nn::huber_masked(pred, truth, 1.0, mask).item();
    };
    Tensor loss = nn::huber_masked(pred, truth, 1.0, mask);
    pred.zero_grad();
    nn::backward(loss);
    for (int64_t i = 0; i < 60; ++i)
      check_coord(pred, i, fwd, pred.grad()[i], "huber");
  }

  // 2-layer toy end-to-end model: probe one coordinate of every trainable
  // tensor (eval-mode forward keeps the function deterministic)
  {
    SeisMoLLM m(default_cfg(Task::distance, Variant::no_pretrain, 2, 31));
    auto set = synth_set(2, 747);
    std::vector<size_t> idx{0, 1};
    train::Batch batch = train::make_batch(set, idx, Task::distance);
    auto fwd = [&] {
      Tensor pred = m.forward(batch.wave, false, nullptr);
      return train::task_loss(Task::distance, pred, batch, 1.0).item();
    };
    Tensor pred = m.forward(batch.wave, false, nullptr);
    Tensor loss = train::task_loss(Task::distance, pred, batch, 1.0);
    for (auto& p : m.params().all()) p.tensor.zero_grad();
    nn::backward(loss);
    Rng coord_rng(99);
    int probed = 0;
    for (auto& p : m.params().all()) {
      if (!p.trainable) continue;
      const int64_t i =
          static_cast<int64_t>(coord_rng.uniform_int(
              static_cast<uint64_t>(p.tensor.numel())));
      const double analytic =
          p.tensor.grad().empty() ? 0.0 : p.tensor.grad()[i];
      check_coord(p.tensor, i, fwd, analytic, "toy-model " + p.name);
      ++probed;
    }
    require(probed >= 50, "toy model probed only " + std::to_string(probed) +
                              " tensors");
    log << "loss + end-to-end gradients match finite differences on "
        << total_coords << " coordinates (h=1e-5, tol 1e-3)";
  }
}

void criterion_patch_bijection(std::ostream& log) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t c = 1 + static_cast<int64_t>(rng.uniform_int(8ull));
    const int64_t n = 1 + static_cast<int64_t>(rng.uniform_int(7ull));
    const int p = 1 + static_cast<int>(rng.uniform_int(8ull));
    const int64_t b = 1 + static_cast<int64_t>(rng.uniform_int(3ull));
    Tensor x = Tensor::randn({b, c, n * p}, rng, 2.0);
    Tensor rt = nn::latent_unpatch(nn::latent_patch(x, p), c, p);
    require(rt.shape() == x.shape(), "round-trip changed the shape");
    for (int64_t i = 0; i < x.numel(); ++i)
      require(rt.data()[i] == x.data()[i],
              "round-trip not bit-exact at trial " + std::to_string(trial));
  }
  log << "latent_unpatch(latent_patch(x)) bit-exact on 100 random tensors";
}

void criterion_metrics(std::ostream& log) {
  auto cm = eval::classification_metrics(8, 2, 2);
  require(std::abs(cm.precision - 0.8) < 1e-12 &&
              std::abs(cm.recall - 0.8) < 1e-12 &&
              std::abs(cm.f1 - 0.8) < 1e-12,
          "classification fixture (8,2,2) failed");
  auto perfect = eval::classification_metrics(5, 0, 0);
  require(perfect.f1 == 1.0 && perfect.precision == 1.0 && perfect.recall == 1.0,
          "perfect counts fixture failed");
  auto degen = eval::classification_metrics(0, 0, 5);
  require(degen.f1 == 0.0 && degen.degenerate, "degenerate fixture failed");

  auto fix = eval::regression_metrics({2, 2, 2}, {1, 2, 3});
  require(std::abs(fix.mae - 2.0 / 3.0) < 1e-12, "MAE fixture failed");
  require(std::abs(fix.rmse - std::sqrt(2.0 / 3.0)) < 1e-12,
          "RMSE fixture failed");
  require(std::abs(fix.r2) < 1e-12, "mean predictor must give R2 = 0");

  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> preds, truths;
    for (int i = 0; i < 25; ++i) {
      preds.push_back(rng.normal(0, 3));
      truths.push_back(rng.normal(1, 2));
    }
    auto r = eval::regression_metrics(preds, truths);
    require(std::abs(r.rmse * r.rmse -
                     (r.mean * r.mean + r.stddev * r.stddev)) < 1e-9,
            "RMSE^2 = Mean^2 + Std^2 violated");
  }
  log << "Pr/Re/F1 and MAE/R2/Mean/Std/MAPE/RMSE fixtures, RMSE identity to "
         "1e-9, mean-predictor R2 = 0";
}

void criterion_location(std::ostream& log) {
  const double arc = 6371.0 * 3.14159265358979323846 / 180.0;  // 111.194927 km
  auto [lat_e, lon_e] = geo::locate_epicenter(0, 0, 90.0, arc);
  require(std::abs(lat_e) < 1e-6 && std::abs(lon_e - 1.0) < 1e-6,
          "east 1-degree arc failed: (" + fmt(lat_e) + ", " + fmt(lon_e) + ")");
  auto [lat_n, lon_n] = geo::locate_epicenter(0, 0, 0.0, arc);
  require(std::abs(lat_n - 1.0) < 1e-6 && std::abs(lon_n) < 1e-6,
          "north 1-degree arc failed");
  const double de = geo::location_error_km(0, 0, 0, 1);
  const double dn = geo::location_error_km(0, 0, 1, 0);
  require(std::abs(de - 111.195) < 1e-3 && std::abs(dn - 111.195) < 1e-3,
          "great-circle distances " + fmt(de) + ", " + fmt(dn));
  log << "1-degree arcs within 1e-6 deg; 111.195 km within 1e-3 km";
}

void criterion_overfit(std::ostream& log) {
  const std::string ckpt = testutil::gpt2_checkpoint(3);
  model::FileCheckpoint src(ckpt);
  std::ostringstream summary;
  for (Task task : {Task::distance, Task::magnitude, Task::azimuth,
                    Task::polarity, Task::picking}) {
    auto set = synth_set(64, 1000 + static_cast<uint64_t>(task));
    auto m = model::build_model(default_cfg(task), &src);
    train::TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.max_epochs = 500;
    cfg.patience = 500;  // overfit run: early stopping disabled
    cfg.seed = 7;
    cfg.augment_enabled = false;
    train::FitOptions opts;
    bool reached = false;
    if (task == Task::picking) {
      opts.stop_when = [&](int epoch, double) {
        if (epoch % 5 != 4) return false;
        const double f1 = picking_train_f1(*m, set);
        if (f1 >= 1.0) reached = true;
        return reached;
      };
    } else {
      opts.stop_when = [&](int, double train_loss) {
        if (train_loss < 0.01) reached = true;
        return reached;
      };
    }
    auto r = train::fit(*m, set, set, cfg, opts);
    if (task == Task::picking && !reached)
      reached = picking_train_f1(*m, set) >= 1.0;
    require(reached, to_string(task) + " did not reach its overfit target in " +
                         std::to_string(r.history.epochs.size()) + " epochs");
    summary << to_string(task) << ":" << r.history.epochs.size() << "ep ";
  }
  log << "all five tasks hit their overfit target (loss < 0.01 or train F1 = "
         "1.0) within 500 epochs [" << summary.str() << "]";
}

void criterion_generalization(std::ostream& log) {
  const std::string ckpt = testutil::gpt2_checkpoint(3);
  model::FileCheckpoint src(ckpt);
  auto train_set = synth_set(2000, 9001, 0.05);
  auto val_set = synth_set(100, 9002, 0.05);
  auto test_set = synth_set(500, 9003, 0.05);

  // mean-predictor baseline
  double mean_dist = 0;
  for (const auto& s : train_set) mean_dist += *s.record.distance_km;
  mean_dist /= static_cast<double>(train_set.size());
  double baseline_mae = 0;
  for (const auto& s : test_set)
    baseline_mae += std::abs(mean_dist - *s.record.distance_km);
  baseline_mae /= static_cast<double>(test_set.size());

  eval::EvalConfig ec;
  ec.scaling = desk_scaling();

  auto run = [&](Variant variant, const model::CheckpointSource* cs) {
    auto m = model::build_model(
        default_cfg(Task::distance, variant, 3, 4242), cs);
    train::TrainConfig cfg;
    cfg.batch_size = 32;
    cfg.max_epochs = 8;
    cfg.patience = 8;
    cfg.seed = 17;
    cfg.augment_enabled = true;
    train::FitOptions opts;
    opts.augmentation.seed = 17;
    train::fit(*m, train_set, val_set, cfg, opts);
    eval::ModelPredictor pred(*m);
    auto rep = eval::evaluate(pred, test_set, ec);
    return rep.sections.at("distance").at("mae");
  };

  const double full_mae = run(Variant::full, &src);
  const double no_llm_mae = run(Variant::no_llm, nullptr);
  log << "distance MAE: full " << fmt(full_mae) << " km, no_llm "
      << fmt(no_llm_mae) << " km, mean-baseline " << fmt(baseline_mae)
      << " km";
  require(full_mae <= 0.8 * baseline_mae,
          "full-model MAE " + fmt(full_mae) +
              " not 20% below the mean-predictor baseline " +
              fmt(baseline_mae));
  require(no_llm_mae >= full_mae,
          "no_llm MAE " + fmt(no_llm_mae) + " unexpectedly beat the full "
              "variant " + fmt(full_mae));
}

void criterion_ablation_matrix(std::ostream& log) {
  const std::string ckpt = testutil::gpt2_checkpoint(12);
  testutil::TempDir dir("ablate");
  experiments::ExperimentConfig cfg;
  cfg.task = "distance";
  cfg.seed = 5;
  cfg.checkpoint = ckpt;
  cfg.out_dir = dir.str();
  cfg.manifest = (dir.path() / "manifest.csv").string();
  cfg.split.train_fraction = 0.5;
  cfg.split.val_fraction = 0.25;
  cfg.split.eval_fraction = 0.25;
  cfg.scaling = desk_scaling();
  cfg.train.batch_size = 8;
  cfg.synth.n = 24;
  cfg.synth.length = 128;
  cfg.synth.sample_rate = 50.0;
  cfg.synth.distance_lo = 2;
  cfg.synth.distance_hi = 12;
  cfg.synth.scaling = cfg.scaling;
  cfg.matrix_variants = {"full",     "no_llm",   "llm2att",
                         "llm2trsf", "no_pretrain", "no_conv",
                         "layers_2", "layers_6", "layers_12"};
  cfg.matrix_epochs = 1;
  experiments::run_synth(cfg);
  auto results = experiments::run_matrix(cfg);
  require(results.size() == 9, "expected 9 matrix runs");
  for (const auto& r : results) {
    require(std::filesystem::exists(r.checkpoint_path),
            "missing checkpoint for " + r.out_dir);
    const auto metrics = eval::parse_metrics(
        (std::filesystem::path(r.report_dir) / "metrics.txt").string());
    require(metrics.count("distance") == 1 &&
                metrics.at("distance").count("mae") == 1,
            "missing distance metrics for " + r.out_dir);
  }
  log << "all 9 variants built, trained one epoch and evaluated";
}

void criterion_augment_stats(std::ostream& log) {
  auto [rec, lab] = data::synth_event({3.0, 8.0, 40.0, data::Polarity::up, 0.05},
                                      21, 512, 50.0, desk_scaling());
  rec.p_index = 150;
  rec.s_index = 250;  // away from the edges so drift never skips
  augment::AugmentationSpec spec;
  Rng rng(20250810);
  const int n = 10000;
  std::array<int, augment::kNumTransforms> counts{};
  for (int i = 0; i < n; ++i) {
    auto out = augment::apply_pipeline(rec, lab, spec, rng);
    for (int k = 0; k < augment::kNumTransforms; ++k)
      counts[static_cast<size_t>(k)] += out.applied[static_cast<size_t>(k)];
  }
  const double expected[] = {0.4, 0.4, 0.4, 0.4, 0.4, 0.97, 0.05};
  std::ostringstream rates;
  for (int k = 0; k < augment::kNumTransforms; ++k) {
    const double rate = static_cast<double>(counts[static_cast<size_t>(k)]) / n;
    rates << fmt(rate) << " ";
    require(std::abs(rate - expected[k]) < 0.02,
            augment::to_string(static_cast<augment::Transform>(k)) +
                " rate " + fmt(rate) + " outside +/-0.02 of " +
                fmt(expected[k]));
  }
  log << "10000 pipeline draws, empirical rates [" << rates.str()
      << "] within +/-0.02";
}

void criterion_label_fixtures(std::ostream& log) {
  const auto label = data::make_pick_label(6000, 1000, 100.0);
  require(label[1000] == 1.0, "pick label peak is not 1");
  require(std::abs(label[1010] - std::exp(-0.5)) < 1e-12,
          "1-sigma offset value wrong");
  require(label[1026] == 0.0, "value outside the 0.25 s window not 0");

  Rng rng(55);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const double theta = rng.uniform(0.0, 360.0);
    auto [s, c] = data::encode_azimuth(theta);
    worst = std::max(worst, std::abs(data::decode_azimuth(s, c) - theta));
  }
  require(worst < 1e-9, "azimuth round-trip error " + fmt(worst));
  log << "pick label {1, exp(-0.5), 0} at offsets {0, 1 sigma, past edge}; "
         "azimuth round-trip worst error " << fmt(worst);
}

struct Criterion {
  int id;
  const char* title;
  std::function<void(std::ostream&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "shape/compression suite", criterion_shapes},
      {2, "LoRA identity at init vs reference forward", criterion_lora_identity},
      {3, "freezing contract + trainable fraction", criterion_freezing},
      {4, "gradient suite (losses + 2-layer toy model)", criterion_gradients},
      {5, "latent patch bijection", criterion_patch_bijection},
      {6, "metric oracles", criterion_metrics},
      {7, "single-station location geometry", criterion_location},
      {8, "overfit sanity per task", criterion_overfit},
      {9, "synthetic generalization ordering", criterion_generalization},
      {10, "ablation matrix smoke", criterion_ablation_matrix},
      {11, "augmentation statistics", criterion_augment_stats},
      {12, "label fixtures", criterion_label_fixtures},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    std::ostringstream detail;
    bool ok = true;
    std::string error;
    try {
      c.run(detail);
    } catch (const std::exception& e) {
      ok = false;
      error = e.what();
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (ok) {
      std::printf("[PASS] criterion %2d: %s — %s (%.1f s)\n", c.id, c.title,
                  detail.str().c_str(), dt);
    } else {
      ++failures;
      std::printf("[FAIL] criterion %2d: %s — %s (%.1f s)\n", c.id, c.title,
                  error.c_str(), dt);
    }
    std::fflush(stdout);
  }
  if (failures == 0) std::printf("acceptance: all criteria passed\n");
  else std::printf("acceptance: %d criterion(s) failed\n", failures);
  return failures;
}
