#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "seismo/data.hpp"
#include "seismo/rng.hpp"

namespace seismo::augment {

enum class Transform : int {
  gaussian_noise = 0,
  time_drift = 1,
  gaps = 2,
  channel_dropout = 3,
  amplitude_scale = 4,
  pre_emphasis = 5,
  noise_generation = 6,
};

inline constexpr int kNumTransforms = 7;

std::string to_string(Transform t);
Transform transform_from_string(const std::string& s);

struct AugmentationSpec {
  // application probabilities, in pipeline order
  double p_gaussian_noise = 0.4;
  double p_time_drift = 0.4;
  double p_gaps = 0.4;
  double p_channel_dropout = 0.4;
  double p_amplitude_scale = 0.4;
  double p_pre_emphasis = 0.97;
  double p_noise_generation = 0.05;
  // parameter ranges
  double noise_amp_lo = 0.01, noise_amp_hi = 0.15;  // x trace std
  double drift_max_s = 0.5;
  int gaps_min = 1, gaps_max = 3;
  double gap_len_lo_s = 0.1, gap_len_hi_s = 0.5;
  double amp_lo = 0.5, amp_hi = 2.0;
  double pre_emphasis_coeff = 0.97;
  double noise_gen_ar = 0.9;  // AR(1) coefficient for colored noise
  bool protect_z = false;     // polarity lives on Z; never drop it then
  uint64_t seed = 0;

  double probability(Transform t) const;
  void validate() const;
};

struct Augmented {
  data::WaveformRecord record;
  data::SampleLabels labels;
  bool applied = true;  // false when the transform skipped itself
};

// Applies one named transform; labels are co-transformed where the transform
// moves or destroys signal. A drift that would push a pick outside the trace
// skips the transform for this sample.
Augmented augment_trace(const data::WaveformRecord& record,
                        const data::SampleLabels& labels, Transform kind,
                        const AugmentationSpec& spec, Rng& rng);

struct PipelineResult {
  data::WaveformRecord record;
  data::SampleLabels labels;
  std::array<bool, kNumTransforms> applied{};  // per-transform execution flag
};

// Applies every transform independently with its probability, in the fixed
// order of the Transform enum. noise_generation replaces the trace with pure
// noise, zeroes the pick labels and clears targets_valid.
PipelineResult apply_pipeline(const data::WaveformRecord& record,
                              const data::SampleLabels& labels,
                              const AugmentationSpec& spec, Rng& rng);

}  // namespace seismo::augment
