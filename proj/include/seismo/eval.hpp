#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "seismo/data.hpp"
#include "seismo/geo.hpp"
#include "seismo/model.hpp"
#include "seismo/tensor.hpp"

namespace seismo::eval {

// ---------------------------------------------------------------------------
// Pick extraction and matching
// ---------------------------------------------------------------------------

struct PickMatchCounts {
  int64_t tp = 0, fp = 0, fn = 0;
  std::vector<double> residuals_s;  // pred - truth, seconds; one per TP
};

// Local maxima above threshold, kept greedily in descending height with an
// exclusion radius of min_separation; returned ascending.
std::vector<int64_t> extract_picks(const std::vector<double>& prob,
                                   double threshold, double min_separation_s,
                                   double sample_rate);

// Greedy nearest-first one-to-one matching with |dt| < tolerance.
PickMatchCounts match_picks(const std::vector<int64_t>& pred,
                            const std::vector<int64_t>& truth,
                            double tolerance_s, double sample_rate);

struct ClassificationMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  bool degenerate = false;  // a zero denominator was mapped to 0
};

ClassificationMetrics classification_metrics(int64_t tp, int64_t fp,
                                             int64_t fn);

struct RegressionMetrics {
  double mae = 0.0, r2 = 0.0, mean = 0.0, stddev = 0.0;
  double mape = 0.0, rmse = 0.0;
  int64_t count = 0;
  int64_t mape_skipped = 0;   // truths with |y| < 1e-9
  bool degenerate_r2 = false; // constant truths
};

RegressionMetrics regression_metrics(const std::vector<double>& preds,
                                     const std::vector<double>& truths);

// Same metrics computed from precomputed signed residuals (used for circular
// azimuth errors, where pred - truth must be wrapped first).
RegressionMetrics metrics_from_residuals(const std::vector<double>& residuals,
                                         const std::vector<double>& truths);

// ---------------------------------------------------------------------------
// Evaluation driver
// ---------------------------------------------------------------------------

struct EvalConfig {
  double pick_threshold = 0.3;
  double min_separation_s = 1.0;
  double tolerance_s = 0.1;
  int64_t batch_size = 64;
  data::ScalingRanges scaling;
};

// Prediction source; lets tests inject oracle predictions in place of a model.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual nn::Tensor predict(const nn::Tensor& wave) = 0;  // eval mode
  virtual model::Task task() const = 0;
};

class ModelPredictor : public Predictor {
 public:
  explicit ModelPredictor(model::SeisMoLLM& m) : m_(m) {}
  nn::Tensor predict(const nn::Tensor& wave) override {
    return m_.forward(wave, /*training=*/false, nullptr);
  }
  model::Task task() const override { return m_.config().task; }

 private:
  model::SeisMoLLM& m_;
};

struct EvalReport {
  std::string task;
  std::string setting;  // "standard" or "few_shot"
  int64_t sample_count = 0;
  // section -> metric -> value (sections: phase_p, phase_s, azimuth, ...)
  std::map<std::string, std::map<std::string, double>> sections;
  // section -> (signed residual, truth) pairs for plotting / re-rendering
  std::map<std::string, std::vector<double>> residuals;
  std::map<std::string, std::vector<double>> residual_truths;
  std::vector<std::string> notes;
};

EvalReport evaluate(Predictor& predictor,
                    const std::vector<data::Sample>& split,
                    const EvalConfig& cfg);

// Composes back-azimuth and distance predictions into single-station
// epicenter estimates; errors are great-circle km, and MAPE is reported as
// the mean of error / true epicentral distance (a fraction).
EvalReport evaluate_location(Predictor& azimuth_model,
                             Predictor& distance_model,
                             const std::vector<data::Sample>& split,
                             const EvalConfig& cfg);

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

// Writes metrics.txt (flat "task section.metric value count" lines),
// residuals_<section>.csv dumps, hist_<section>.svg histograms and a
// plain-text report.txt. Overwrites idempotently.
void emit_report(const EvalReport& report, const std::string& out_dir);

// Reads the scalar metrics back (round-trip check and the `report` verb).
std::map<std::string, std::map<std::string, double>> parse_metrics(
    const std::string& metrics_path);

// Re-renders report.txt and histograms from residual dumps in out_dir.
void rerender_report(const std::string& out_dir);

// Equal-width histogram bin counts over [min, max]; used by the SVG plots.
std::vector<int64_t> histogram_counts(const std::vector<double>& values,
                                      int bins);

}  // namespace seismo::eval
