#include "seismo/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seismo::augment {

namespace {

const char* kNames[kNumTransforms] = {
    "gaussian_noise", "time_drift",     "gaps",            "channel_dropout",
    "amplitude_scale", "pre_emphasis", "noise_generation"};

double trace_std(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

// Rolls a sequence by d samples (positive = later), zero fill.
void roll(std::vector<double>& x, int64_t d) {
  const int64_t n = static_cast<int64_t>(x.size());
  std::vector<double> out(x.size(), 0.0);
  for (int64_t t = 0; t < n; ++t) {
    const int64_t src = t - d;
    if (src >= 0 && src < n) out[static_cast<size_t>(t)] = x[static_cast<size_t>(src)];
  }
  x.swap(out);
}

}  // namespace

std::string to_string(Transform t) { return kNames[static_cast<int>(t)]; }

Transform transform_from_string(const std::string& s) {
  for (int i = 0; i < kNumTransforms; ++i)
    if (s == kNames[i]) return static_cast<Transform>(i);
  throw std::invalid_argument("unknown augmentation transform '" + s + "'");
}

double AugmentationSpec::probability(Transform t) const {
  switch (t) {
    case Transform::gaussian_noise: return p_gaussian_noise;
    case Transform::time_drift: return p_time_drift;
    case Transform::gaps: return p_gaps;
    case Transform::channel_dropout: return p_channel_dropout;
    case Transform::amplitude_scale: return p_amplitude_scale;
    case Transform::pre_emphasis: return p_pre_emphasis;
    case Transform::noise_generation: return p_noise_generation;
  }
  throw std::invalid_argument("bad transform");
}

void AugmentationSpec::validate() const {
  for (int i = 0; i < kNumTransforms; ++i) {
    const double p = probability(static_cast<Transform>(i));
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("augment: probability of " +
                                  std::string(kNames[i]) + " outside [0,1]");
  }
}

Augmented augment_trace(const data::WaveformRecord& record,
                        const data::SampleLabels& labels, Transform kind,
                        const AugmentationSpec& spec, Rng& rng) {
  Augmented out{record, labels, true};
  auto& rec = out.record;
  auto& lab = out.labels;
  const int64_t len = rec.length;

  switch (kind) {
    case Transform::gaussian_noise: {
      const double amp = rng.uniform(spec.noise_amp_lo, spec.noise_amp_hi) *
                         trace_std(rec.trace);
      for (auto& v : rec.trace) v += rng.normal(0.0, amp);
      break;
    }
    case Transform::time_drift: {
      const int64_t max_d =
          static_cast<int64_t>(std::llround(spec.drift_max_s * rec.sample_rate));
      const int64_t d = rng.uniform_int(-max_d, max_d);
      const auto in_range = [&](const std::optional<int64_t>& idx) {
        return !idx || (*idx + d >= 0 && *idx + d < len);
      };
      if (!in_range(rec.p_index) || !in_range(rec.s_index)) {
        out.applied = false;  // drift would push a pick off the trace
        break;
      }
      for (int c = 0; c < 3; ++c) {
        std::vector<double> ch(rec.trace.begin() + c * len,
                               rec.trace.begin() + (c + 1) * len);
        roll(ch, d);
        std::copy(ch.begin(), ch.end(), rec.trace.begin() + c * len);
      }
      if (rec.p_index) *rec.p_index += d;
      if (rec.s_index) *rec.s_index += d;
      roll(lab.pick_p, d);
      roll(lab.pick_s, d);
      break;
    }
    case Transform::gaps: {
      const int n_gaps =
          static_cast<int>(rng.uniform_int(spec.gaps_min, spec.gaps_max));
      for (int g = 0; g < n_gaps; ++g) {
        const int64_t gl = static_cast<int64_t>(std::llround(
            rng.uniform(spec.gap_len_lo_s, spec.gap_len_hi_s) *
            rec.sample_rate));
        const int64_t start = rng.uniform_int(
            static_cast<uint64_t>(std::max<int64_t>(1, len - gl)));
        for (int c = 0; c < 3; ++c)
          for (int64_t t = start; t < std::min(len, start + gl); ++t)
            rec.at(c, t) = 0.0;
      }
      break;
    }
    case Transform::channel_dropout: {
      const int n_candidates = spec.protect_z ? 2 : 3;
      const int ch = static_cast<int>(rng.uniform_int(
          static_cast<uint64_t>(n_candidates)));
      for (int64_t t = 0; t < len; ++t) rec.at(ch, t) = 0.0;
      break;
    }
    case Transform::amplitude_scale: {
      const double f = rng.uniform(spec.amp_lo, spec.amp_hi);
      for (auto& v : rec.trace) v *= f;
      break;
    }
    case Transform::pre_emphasis: {
      const double a = spec.pre_emphasis_coeff;
      for (int c = 0; c < 3; ++c) {
        double prev = rec.at(c, 0);
        for (int64_t t = 1; t < len; ++t) {
          const double cur = rec.at(c, t);
          rec.at(c, t) = cur - a * prev;
          prev = cur;
        }
      }
      break;
    }
    case Transform::noise_generation: {
      // colored (AR(1)-filtered) Gaussian noise matched to per-channel RMS
      const double phi = spec.noise_gen_ar;
      for (int c = 0; c < 3; ++c) {
        double rms = 0.0;
        for (int64_t t = 0; t < len; ++t) rms += rec.at(c, t) * rec.at(c, t);
        rms = std::sqrt(rms / static_cast<double>(len));
        const double sw = rms * std::sqrt(std::max(0.0, 1.0 - phi * phi));
        double prev = 0.0;
        for (int64_t t = 0; t < len; ++t) {
          prev = phi * prev + rng.normal(0.0, sw);
          rec.at(c, t) = prev;
        }
      }
      std::fill(lab.pick_p.begin(), lab.pick_p.end(), 0.0);
      std::fill(lab.pick_s.begin(), lab.pick_s.end(), 0.0);
      rec.p_index.reset();
      rec.s_index.reset();
      lab.targets_valid = false;
      break;
    }
  }
  return out;
}

PipelineResult apply_pipeline(const data::WaveformRecord& record,
                              const data::SampleLabels& labels,
                              const AugmentationSpec& spec, Rng& rng) {
  spec.validate();
  PipelineResult out{record, labels, {}};
  for (int i = 0; i < kNumTransforms; ++i) {
    const auto kind = static_cast<Transform>(i);
    if (!rng.bernoulli(spec.probability(kind))) continue;
    Augmented a = augment_trace(out.record, out.labels, kind, spec, rng);
    out.record = std::move(a.record);
    out.labels = std::move(a.labels);
    out.applied[static_cast<size_t>(i)] = a.applied;
    if (kind == Transform::noise_generation && a.applied) break;  // terminal
  }
  return out;
}

}  // namespace seismo::augment
