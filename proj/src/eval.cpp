#include "seismo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace seismo::eval {

namespace fs = std::filesystem;
using model::Task;
using nn::Tensor;

// ---------------------------------------------------------------------------
// Picks
// ---------------------------------------------------------------------------

std::vector<int64_t> extract_picks(const std::vector<double>& prob,
                                   double threshold, double min_separation_s,
                                   double sample_rate) {
  if (threshold <= 0.0 || threshold >= 1.0)
    throw std::invalid_argument("extract_picks: threshold must be in (0,1)");
  const int64_t n = static_cast<int64_t>(prob.size());
  std::vector<int64_t> candidates;
  for (int64_t i = 0; i < n; ++i) {
    const double v = prob[static_cast<size_t>(i)];
    if (v <= threshold) continue;
    const bool left_ok = (i == 0) || v > prob[static_cast<size_t>(i - 1)];
    const bool right_ok = (i == n - 1) || v >= prob[static_cast<size_t>(i + 1)];
    if (left_ok && right_ok) candidates.push_back(i);
  }
  // greedy by descending height with exclusion radius
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](int64_t a, int64_t b) {
                     return prob[static_cast<size_t>(a)] >
                            prob[static_cast<size_t>(b)];
                   });
  const int64_t radius =
      static_cast<int64_t>(std::llround(min_separation_s * sample_rate));
  std::vector<int64_t> kept;
  for (int64_t c : candidates) {
    bool blocked = false;
    for (int64_t k : kept)
      if (std::llabs(k - c) < radius) {
        blocked = true;
        break;
      }
    if (!blocked) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

PickMatchCounts match_picks(const std::vector<int64_t>& pred,
                            const std::vector<int64_t>& truth,
                            double tolerance_s, double sample_rate) {
  if (tolerance_s <= 0.0)
    throw std::invalid_argument("match_picks: tolerance must be positive");
  std::vector<int64_t> p = pred, t = truth;
  std::sort(p.begin(), p.end());
  std::sort(t.begin(), t.end());
  struct Pair {
    double dt_abs;
    size_t pi, ti;
    int64_t p, t;
  };
  std::vector<Pair> pairs;
  for (size_t i = 0; i < p.size(); ++i)
    for (size_t j = 0; j < t.size(); ++j) {
      const double dt =
          static_cast<double>(p[i] - t[j]) / sample_rate;
      if (std::abs(dt) < tolerance_s)
        pairs.push_back({std::abs(dt), i, j, p[i], t[j]});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dt_abs != b.dt_abs) return a.dt_abs < b.dt_abs;
    if (a.p != b.p) return a.p < b.p;
    return a.t < b.t;
  });
  std::vector<bool> p_used(p.size(), false), t_used(t.size(), false);
  PickMatchCounts out;
  for (const auto& pr : pairs) {
    if (p_used[pr.pi] || t_used[pr.ti]) continue;
    p_used[pr.pi] = true;
    t_used[pr.ti] = true;
    ++out.tp;
    out.residuals_s.push_back(static_cast<double>(pr.p - pr.t) / sample_rate);
  }
  for (bool u : p_used)
    if (!u) ++out.fp;
  for (bool u : t_used)
    if (!u) ++out.fn;
  return out;
}

ClassificationMetrics classification_metrics(int64_t tp, int64_t fp,
                                             int64_t fn) {
  if (tp < 0 || fp < 0 || fn < 0)
    throw std::invalid_argument("classification_metrics: negative counts");
  ClassificationMetrics m;
  if (tp + fp > 0)
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  else
    m.degenerate = true;
  if (tp + fn > 0)
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  else
    m.degenerate = true;
  if (m.precision + m.recall > 0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  else
    m.degenerate = true;
  return m;
}

// ---------------------------------------------------------------------------
// Regression metrics
// ---------------------------------------------------------------------------

RegressionMetrics metrics_from_residuals(const std::vector<double>& residuals,
                                         const std::vector<double>& truths) {
  if (residuals.size() != truths.size())
    throw nn::ShapeError("regression_metrics: length mismatch");
  if (residuals.empty())
    throw std::invalid_argument("regression_metrics: empty input");
  const double n = static_cast<double>(residuals.size());
  RegressionMetrics m;
  m.count = static_cast<int64_t>(residuals.size());
  double sum_abs = 0, sum = 0, sum_sq = 0;
  for (double r : residuals) {
    sum_abs += std::abs(r);
    sum += r;
    sum_sq += r * r;
  }
  m.mae = sum_abs / n;
  m.mean = sum / n;
  m.rmse = std::sqrt(sum_sq / n);
  double var = 0;
  for (double r : residuals) var += (r - m.mean) * (r - m.mean);
  m.stddev = std::sqrt(var / n);  // population normalizer: rmse^2 = mean^2+std^2
  double ybar = 0;
  for (double y : truths) ybar += y;
  ybar /= n;
  double denom = 0;
  for (double y : truths) denom += (y - ybar) * (y - ybar);
  if (denom > 1e-30) {
    m.r2 = 1.0 - sum_sq / denom;
  } else {
    m.degenerate_r2 = true;
    m.r2 = sum_sq <= 1e-30 ? 1.0 : 0.0;
  }
  double mape_sum = 0;
  int64_t mape_n = 0;
  for (size_t i = 0; i < truths.size(); ++i) {
    if (std::abs(truths[i]) < 1e-9) {
      ++m.mape_skipped;
      continue;
    }
    mape_sum += std::abs(residuals[i] / truths[i]);
    ++mape_n;
  }
  m.mape = mape_n > 0 ? 100.0 * mape_sum / static_cast<double>(mape_n) : 0.0;
  return m;
}

RegressionMetrics regression_metrics(const std::vector<double>& preds,
                                     const std::vector<double>& truths) {
  if (preds.size() != truths.size())
    throw nn::ShapeError("regression_metrics: length mismatch");
  std::vector<double> residuals(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) residuals[i] = preds[i] - truths[i];
  return metrics_from_residuals(residuals, truths);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

void fill_regression_section(EvalReport& rep, const std::string& section,
                             const std::vector<double>& residuals,
                             const std::vector<double>& truths) {
  if (residuals.empty()) {
    rep.notes.push_back("section " + section + ": no labeled samples");
    return;
  }
  RegressionMetrics m = metrics_from_residuals(residuals, truths);
  auto& s = rep.sections[section];
  s["mae"] = m.mae;
  s["r2"] = m.r2;
  s["mean"] = m.mean;
  s["std"] = m.stddev;
  s["mape"] = m.mape;
  s["rmse"] = m.rmse;
  s["count"] = static_cast<double>(m.count);
  if (m.mape_skipped > 0)
    s["mape_skipped"] = static_cast<double>(m.mape_skipped);
  if (m.degenerate_r2)
    rep.notes.push_back("section " + section + ": R2 denominator degenerate");
  rep.residuals[section] = residuals;
  rep.residual_truths[section] = truths;
}

// Batched predictions over a split.
std::vector<Tensor> predict_split(Predictor& predictor,
                                  const std::vector<data::Sample>& split,
                                  int64_t batch_size) {
  std::vector<Tensor> preds;
  preds.reserve(split.size());
  for (size_t start = 0; start < split.size();
       start += static_cast<size_t>(batch_size)) {
    const size_t stop =
        std::min(split.size(), start + static_cast<size_t>(batch_size));
    const int64_t b = static_cast<int64_t>(stop - start);
    const int64_t len = split[start].record.length;
    Tensor wave = Tensor::zeros({b, 3, len});
    for (int64_t i = 0; i < b; ++i) {
      const auto& rec = split[start + static_cast<size_t>(i)].record;
      if (rec.length != len)
        throw nn::ShapeError("evaluate: mixed trace lengths in split");
      std::copy(rec.trace.begin(), rec.trace.end(),
                wave.data() + i * 3 * len);
    }
    Tensor out = predictor.predict(wave);
    // slice rows back out (keep per-sample tensors; eval-scale data)
    for (int64_t i = 0; i < b; ++i) preds.push_back(nn::narrow(out, 0, i, 1));
  }
  return preds;
}

}  // namespace

EvalReport evaluate(Predictor& predictor, const std::vector<data::Sample>& split,
                    const EvalConfig& cfg) {
  if (split.empty()) throw std::invalid_argument("evaluate: empty split");
  const Task task = predictor.task();
  EvalReport rep;
  rep.task = to_string(task);
  rep.sample_count = static_cast<int64_t>(split.size());
  const std::vector<Tensor> preds =
      predict_split(predictor, split, cfg.batch_size);

  switch (task) {
    case Task::picking: {
      const double rate = split[0].record.sample_rate;
      PickMatchCounts agg_p, agg_s;
      std::vector<double> truth_p_s, truth_s_s;  // truth times, seconds
      for (size_t i = 0; i < split.size(); ++i) {
        const auto& rec = split[i].record;
        const int64_t len = rec.length;
        const double* d = preds[i].data();
        std::vector<double> prob_p(d, d + len);
        std::vector<double> prob_s(d + len, d + 2 * len);
        const auto picks_p = extract_picks(prob_p, cfg.pick_threshold,
                                           cfg.min_separation_s, rate);
        const auto picks_s = extract_picks(prob_s, cfg.pick_threshold,
                                           cfg.min_separation_s, rate);
        std::vector<int64_t> tp, ts;
        if (rec.p_index) tp.push_back(*rec.p_index);
        if (rec.s_index) ts.push_back(*rec.s_index);
        auto mp = match_picks(picks_p, tp, cfg.tolerance_s, rate);
        auto ms = match_picks(picks_s, ts, cfg.tolerance_s, rate);
        agg_p.tp += mp.tp;
        agg_p.fp += mp.fp;
        agg_p.fn += mp.fn;
        for (double r : mp.residuals_s) {
          agg_p.residuals_s.push_back(r);
          truth_p_s.push_back(static_cast<double>(*rec.p_index) / rate);
        }
        agg_s.tp += ms.tp;
        agg_s.fp += ms.fp;
        agg_s.fn += ms.fn;
        for (double r : ms.residuals_s) {
          agg_s.residuals_s.push_back(r);
          truth_s_s.push_back(static_cast<double>(*rec.s_index) / rate);
        }
      }
      auto fill = [&](const std::string& sec, const PickMatchCounts& c,
                      const std::vector<double>& truths) {
        auto cm = classification_metrics(c.tp, c.fp, c.fn);
        auto& s = rep.sections[sec];
        s["precision"] = cm.precision;
        s["recall"] = cm.recall;
        s["f1"] = cm.f1;
        s["tp"] = static_cast<double>(c.tp);
        s["fp"] = static_cast<double>(c.fp);
        s["fn"] = static_cast<double>(c.fn);
        s["count"] = static_cast<double>(c.tp + c.fn);
        double mae_pts = 0;
        for (double r : c.residuals_s) mae_pts += std::abs(r) * rate;
        s["mae_points"] =
            c.residuals_s.empty()
                ? 0.0
                : mae_pts / static_cast<double>(c.residuals_s.size());
        if (cm.degenerate)
          rep.notes.push_back("section " + sec +
                              ": zero-denominator metric reported as 0");
        rep.residuals[sec] = c.residuals_s;
        rep.residual_truths[sec] = truths;
      };
      fill("phase_p", agg_p, truth_p_s);
      fill("phase_s", agg_s, truth_s_s);
      break;
    }
    case Task::azimuth: {
      std::vector<double> residuals, truths;
      for (size_t i = 0; i < split.size(); ++i) {
        const auto& rec = split[i].record;
        if (!rec.back_azimuth_deg) continue;
        const double pred_deg =
            data::decode_azimuth(preds[i].data()[0], preds[i].data()[1]);
        residuals.push_back(geo::azimuth_residual(pred_deg,
                                                  *rec.back_azimuth_deg));
        truths.push_back(*rec.back_azimuth_deg);
      }
      fill_regression_section(rep, "azimuth", residuals, truths);
      rep.notes.push_back(
          "azimuth residuals are circularly wrapped into (-180, 180]");
      break;
    }
    case Task::distance:
    case Task::magnitude: {
      const bool dist = task == Task::distance;
      std::vector<double> residuals, truths;
      for (size_t i = 0; i < split.size(); ++i) {
        const auto& rec = split[i].record;
        const auto& truth = dist ? rec.distance_km : rec.magnitude;
        if (!truth) continue;
        const double lo = dist ? cfg.scaling.distance_lo : cfg.scaling.magnitude_lo;
        const double hi = dist ? cfg.scaling.distance_hi : cfg.scaling.magnitude_hi;
        const double pred = data::unscale_output(preds[i].data()[0], lo, hi);
        residuals.push_back(pred - *truth);
        truths.push_back(*truth);
      }
      fill_regression_section(rep, dist ? "distance" : "magnitude", residuals,
                              truths);
      break;
    }
    case Task::polarity: {
      // positive class: up
      int64_t tp = 0, fp = 0, fn = 0, tn = 0;
      for (size_t i = 0; i < split.size(); ++i) {
        const auto& rec = split[i].record;
        if (!rec.polarity) continue;
        const bool pred_up = preds[i].data()[0] >= preds[i].data()[1];
        const bool true_up = *rec.polarity == data::Polarity::up;
        if (pred_up && true_up) ++tp;
        else if (pred_up && !true_up) ++fp;
        else if (!pred_up && true_up) ++fn;
        else ++tn;
      }
      auto cm = classification_metrics(tp, fp, fn);
      auto& s = rep.sections["polarity"];
      s["precision"] = cm.precision;
      s["recall"] = cm.recall;
      s["f1"] = cm.f1;
      s["tp"] = static_cast<double>(tp);
      s["fp"] = static_cast<double>(fp);
      s["fn"] = static_cast<double>(fn);
      s["tn"] = static_cast<double>(tn);
      s["count"] = static_cast<double>(tp + fp + fn + tn);
      break;
    }
  }
  return rep;
}

EvalReport evaluate_location(Predictor& azimuth_model,
                             Predictor& distance_model,
                             const std::vector<data::Sample>& split,
                             const EvalConfig& cfg) {
  if (split.empty()) throw std::invalid_argument("evaluate: empty split");
  if (azimuth_model.task() != Task::azimuth ||
      distance_model.task() != Task::distance)
    throw std::invalid_argument(
        "evaluate_location: needs an azimuth model and a distance model");
  EvalReport rep;
  rep.task = "location";
  rep.sample_count = static_cast<int64_t>(split.size());
  const auto az_preds = predict_split(azimuth_model, split, cfg.batch_size);
  const auto di_preds = predict_split(distance_model, split, cfg.batch_size);
  std::vector<double> errors, true_dists;
  int64_t skipped = 0;
  for (size_t i = 0; i < split.size(); ++i) {
    const auto& rec = split[i].record;
    if (!rec.station_lat_deg || !rec.station_lon_deg || !rec.event_lat_deg ||
        !rec.event_lon_deg || !rec.distance_km) {
      ++skipped;
      continue;
    }
    const double baz =
        data::decode_azimuth(az_preds[i].data()[0], az_preds[i].data()[1]);
    const double dist =
        data::unscale_output(di_preds[i].data()[0], cfg.scaling.distance_lo,
                             cfg.scaling.distance_hi);
    auto [lat, lon] = geo::locate_epicenter(*rec.station_lat_deg,
                                            *rec.station_lon_deg, baz, dist);
    errors.push_back(geo::location_error_km(lat, lon, *rec.event_lat_deg,
                                            *rec.event_lon_deg));
    true_dists.push_back(*rec.distance_km);
  }
  if (skipped > 0)
    rep.notes.push_back("location: skipped " + std::to_string(skipped) +
                        " samples lacking coordinates");
  if (!errors.empty()) {
    const double n = static_cast<double>(errors.size());
    double sum = 0, sum_sq = 0, mape = 0;
    for (size_t i = 0; i < errors.size(); ++i) {
      sum += errors[i];
      sum_sq += errors[i] * errors[i];
      mape += errors[i] / true_dists[i];
    }
    const double mean = sum / n;
    double var = 0;
    for (double e : errors) var += (e - mean) * (e - mean);
    auto& s = rep.sections["location"];
    s["mae"] = mean;  // errors are non-negative: MAE == mean error
    s["mean"] = mean;
    s["mape"] = mape / n;  // fraction: location error / epicentral distance
    s["rmse"] = std::sqrt(sum_sq / n);
    s["std"] = std::sqrt(var / n);
    s["count"] = n;
    rep.residuals["location"] = errors;
    rep.residual_truths["location"] = true_dists;
    rep.notes.push_back(
        "location mape is mean(error_km / true_distance_km), a fraction");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::vector<int64_t> histogram_counts(const std::vector<double>& values,
                                      int bins) {
  std::vector<int64_t> counts(static_cast<size_t>(bins), 0);
  if (values.empty() || bins <= 0) return counts;
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  const double mn = *mn_it, mx = *mx_it;
  const double width = (mx - mn) <= 0 ? 1.0 : (mx - mn);
  for (double v : values) {
    int b = static_cast<int>((v - mn) / width * bins);
    if (b >= bins) b = bins - 1;
    if (b < 0) b = 0;
    counts[static_cast<size_t>(b)]++;
  }
  return counts;
}

namespace {

void write_histogram_svg(const std::string& path,
                         const std::vector<double>& values,
                         const std::string& title) {
  const int bins = 30;
  const auto counts = histogram_counts(values, bins);
  const int64_t peak = *std::max_element(counts.begin(), counts.end());
  const double w = 640, h = 360, mx = 40, my = 30;
  const double bw = (w - 2 * mx) / bins;
  std::ofstream out(path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w
      << "' height='" << h << "'>\n";
  out << "<text x='" << w / 2 << "' y='18' text-anchor='middle' "
      << "font-family='sans-serif' font-size='14'>" << title << " (n="
      << values.size() << ")</text>\n";
  out << "<line x1='" << mx << "' y1='" << h - my << "' x2='" << w - mx
      << "' y2='" << h - my << "' stroke='black'/>\n";
  for (int b = 0; b < bins; ++b) {
    const double frac =
        peak > 0 ? static_cast<double>(counts[static_cast<size_t>(b)]) /
                       static_cast<double>(peak)
                 : 0.0;
    const double bh = frac * (h - 2 * my - 10);
    out << "<rect x='" << mx + b * bw << "' y='" << h - my - bh << "' width='"
        << bw * 0.92 << "' height='" << bh << "' fill='#4878a8'/>\n";
  }
  if (!values.empty()) {
    const auto [mn, mxv] = std::minmax_element(values.begin(), values.end());
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", *mn);
    out << "<text x='" << mx << "' y='" << h - 8
        << "' font-family='sans-serif' font-size='11'>" << buf << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.4g", *mxv);
    out << "<text x='" << w - mx << "' y='" << h - 8
        << "' text-anchor='end' font-family='sans-serif' font-size='11'>"
        << buf << "</text>\n";
  }
  out << "</svg>\n";
}

void write_report_txt(const std::string& path, const EvalReport& rep) {
  std::ofstream out(path);
  out << "task: " << rep.task << "\n";
  if (!rep.setting.empty()) out << "setting: " << rep.setting << "\n";
  out << "samples: " << rep.sample_count << "\n\n";
  for (const auto& [section, metrics] : rep.sections) {
    out << "[" << section << "]\n";
    for (const auto& [k, v] : metrics) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6g", v);
      out << "  " << k << " = " << buf << "\n";
    }
    out << "\n";
  }
  for (const auto& n : rep.notes) out << "note: " << n << "\n";
}

}  // namespace

void emit_report(const EvalReport& rep, const std::string& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream mf(fs::path(out_dir) / "metrics.txt");
    if (!mf) throw std::runtime_error("emit_report: cannot write to " + out_dir);
    if (!rep.setting.empty()) mf << "# setting=" << rep.setting << "\n";
    for (const auto& [section, metrics] : rep.sections) {
      double count = rep.sections.at(section).count("count")
                         ? rep.sections.at(section).at("count")
                         : static_cast<double>(rep.sample_count);
      for (const auto& [k, v] : metrics) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        mf << rep.task << " " << section << "." << k << " " << buf << " "
           << static_cast<int64_t>(count) << "\n";
      }
    }
  }
  for (const auto& [section, residuals] : rep.residuals) {
    std::ofstream rf(fs::path(out_dir) / ("residuals_" + section + ".csv"));
    rf << "residual,truth\n";
    const auto& truths = rep.residual_truths.count(section)
                             ? rep.residual_truths.at(section)
                             : std::vector<double>(residuals.size(), 0.0);
    rf.precision(12);
    for (size_t i = 0; i < residuals.size(); ++i)
      rf << residuals[i] << "," << truths[i] << "\n";
    if (residuals.empty()) {
      std::fprintf(stderr, "emit_report: no residuals for %s, histogram skipped\n",
                   section.c_str());
    } else {
      write_histogram_svg(
          (fs::path(out_dir) / ("hist_" + section + ".svg")).string(),
          residuals, rep.task + " " + section + " residuals");
    }
  }
  write_report_txt((fs::path(out_dir) / "report.txt").string(), rep);
}

std::map<std::string, std::map<std::string, double>> parse_metrics(
    const std::string& metrics_path) {
  std::ifstream in(metrics_path);
  if (!in) throw std::runtime_error("parse_metrics: cannot open " + metrics_path);
  std::map<std::string, std::map<std::string, double>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string task, key;
    double value;
    int64_t count;
    if (!(is >> task >> key >> value >> count)) continue;
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    out[key.substr(0, dot)][key.substr(dot + 1)] = value;
  }
  return out;
}

void rerender_report(const std::string& out_dir) {
  EvalReport rep;
  rep.task = "rerendered";
  const fs::path dir(out_dir);
  if (fs::exists(dir / "metrics.txt")) {
    // keep the original task name if the metrics file carries one
    std::ifstream in(dir / "metrics.txt");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream is(line);
      std::string task;
      if (is >> task) rep.task = task;
      break;
    }
  }
  bool any = false;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("residuals_", 0) != 0 || entry.path().extension() != ".csv")
      continue;
    const std::string section =
        name.substr(10, name.size() - 10 - 4);  // strip prefix/suffix
    std::ifstream in(entry.path());
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> residuals, truths;
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      residuals.push_back(std::stod(line.substr(0, comma)));
      truths.push_back(std::stod(line.substr(comma + 1)));
    }
    if (residuals.empty()) continue;
    fill_regression_section(rep, section, residuals, truths);
    rep.sample_count =
        std::max<int64_t>(rep.sample_count,
                          static_cast<int64_t>(residuals.size()));
    write_histogram_svg((dir / ("hist_" + section + ".svg")).string(),
                        residuals, rep.task + " " + section + " residuals");
    any = true;
  }
  if (!any)
    throw std::runtime_error("rerender_report: no residual dumps in " +
                             out_dir);
  write_report_txt((dir / "report.txt").string(), rep);
}

}  // namespace seismo::eval
