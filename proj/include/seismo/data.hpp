#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seismo/rng.hpp"

namespace seismo::data {

enum class Polarity { up, down };

std::string to_string(Polarity p);
Polarity polarity_from_string(const std::string& s);

// A 3-channel trace plus event metadata. Channel order is E, N, Z.
struct WaveformRecord {
  std::vector<double> trace;  // [3 * length], row-major per channel
  int64_t length = 0;
  double sample_rate = 0.0;
  std::optional<int64_t> p_index;
  std::optional<int64_t> s_index;
  std::optional<double> magnitude;
  std::optional<double> distance_km;
  std::optional<double> back_azimuth_deg;
  std::optional<Polarity> polarity;
  std::optional<double> station_lat_deg, station_lon_deg;
  std::optional<double> event_lat_deg, event_lon_deg;
  int64_t pad_samples = 0;  // zeros appended on load
  std::string trace_id;

  double& at(int channel, int64_t t) { return trace[channel * length + t]; }
  double at(int channel, int64_t t) const { return trace[channel * length + t]; }
  void validate() const;  // throws on violated invariants
};

// Per-task training targets.
struct SampleLabels {
  std::vector<double> pick_p, pick_s;  // length L, all-zero when absent
  double azimuth_sin = 0.0, azimuth_cos = 0.0;
  double magnitude_unit = 0.0, distance_unit = 0.0;
  double polarity_up = 0.0, polarity_down = 0.0;
  bool has_p = false, has_s = false, has_azimuth = false;
  bool has_magnitude = false, has_distance = false, has_polarity = false;
  // Cleared when an augmentation replaces the trace with pure noise; such
  // samples are excluded from regression/classification target losses.
  bool targets_valid = true;
};

struct ScalingRanges {
  double magnitude_lo = -1.0, magnitude_hi = 8.0;
  double distance_lo = 0.0, distance_hi = 300.0;  // km
};

// ---------------------------------------------------------------------------
// Label construction / codecs
// ---------------------------------------------------------------------------

// Truncated-Gaussian pick probability sequence: sigma = 0.1 s, support
// +/- 0.25 s, exactly 1 at pick_index, 0 outside the window.
std::vector<double> make_pick_label(int64_t length, int64_t pick_index,
                                    double sample_rate);

std::pair<double, double> encode_azimuth(double theta_deg);
double decode_azimuth(double sin_v, double cos_v);  // degrees in [0, 360)

// Unit-interval scaling with clip counting (counter may be null).
double scale_target(double value, double lo, double hi,
                    int64_t* clip_counter = nullptr);
double unscale_output(double u, double lo, double hi,
                      int64_t* clip_counter = nullptr);

// Builds every label the record's metadata supports.
SampleLabels build_labels(const WaveformRecord& rec,
                          const ScalingRanges& scaling);

// ---------------------------------------------------------------------------
// Synthetic seismogram generator (test-scale stand-in for real datasets).
// Fixed desk constants: Vp = 6.0 km/s, Vs = 3.5 km/s, truncated Ricker
// wavelets; these are documented test fixtures, not physical claims.
// ---------------------------------------------------------------------------

struct SynthEventParams {
  double magnitude = 3.0;
  double distance_km = 20.0;
  double back_azimuth_deg = 45.0;
  Polarity polarity = Polarity::up;
  double noise_level = 0.05;  // noise std as a fraction of peak amplitude
};

inline constexpr double kSynthVp = 6.0;  // km/s
inline constexpr double kSynthVs = 3.5;  // km/s

int64_t synth_sp_offset(double distance_km, double sample_rate);

std::pair<WaveformRecord, SampleLabels> synth_event(
    const SynthEventParams& params, uint64_t seed, int64_t length,
    double sample_rate, const ScalingRanges& scaling = {});

// ---------------------------------------------------------------------------
// Trace stores: one HDF5 container or one directory of raw float32 files,
// behind a single reader interface.
// ---------------------------------------------------------------------------

class TraceStore {
 public:
  virtual ~TraceStore() = default;
  virtual bool has(const std::string& trace_id) const = 0;
  // Returns [3 * length] float32 samples; throws on lookup/format errors.
  virtual std::vector<float> read(const std::string& trace_id,
                                  int64_t expected_length) const = 0;
};

class TraceStoreWriter {
 public:
  virtual ~TraceStoreWriter() = default;
  virtual void write(const std::string& trace_id,
                     const std::vector<float>& samples, int64_t length) = 0;
};

enum class StoreKind { hdf5, directory };

std::unique_ptr<TraceStore> open_trace_store(const std::string& path);
std::unique_ptr<TraceStoreWriter> create_trace_store(const std::string& path,
                                                     StoreKind kind);

// ---------------------------------------------------------------------------
// Manifest: delimited-text metadata table + store locator header.
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string trace_id;
  std::optional<int64_t> p_index, s_index;
  std::optional<double> magnitude, distance_km, back_azimuth_deg;
  std::optional<Polarity> polarity;
  std::optional<double> station_lat, station_lon, event_lat, event_lon;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  double sample_rate = 0.0;
  int64_t trace_length = 0;  // raw length in the store
  std::string store_path;    // resolved absolute/relative path
  std::string path;          // manifest file itself

  const ManifestEntry& find(const std::string& trace_id) const;
};

DatasetManifest load_manifest(const std::string& path);
void write_manifest(const std::string& path, const DatasetManifest& m,
                    const std::string& store_relpath);

// Reads one trace and right-pads it with zeros: to exactly `pad_to` samples
// when positive (must be a multiple of pad_multiple and >= the raw length),
// otherwise to the next multiple of `pad_multiple` (0 skips padding).
// Metadata from the manifest is attached and the pad length recorded.
WaveformRecord read_trace(const DatasetManifest& m, const std::string& trace_id,
                          int64_t pad_multiple = 64, int64_t pad_to = 0);

// Shared padding arithmetic for the reader paths.
int64_t padded_length(int64_t raw, int64_t pad_multiple, int64_t pad_to);

// A record paired with its training targets.
struct Sample {
  WaveformRecord record;
  SampleLabels labels;
};

// Loads every manifest entry into memory (desk-scale datasets).
std::vector<Sample> load_all(const DatasetManifest& m,
                             const ScalingRanges& scaling,
                             int64_t pad_multiple = 64, int64_t pad_to = 0);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitSpec {
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double eval_fraction = 0.1;
  uint64_t seed = 0;
  void validate() const;
};

struct SplitResult {
  DatasetManifest train, val, eval;
};

// Deterministic disjoint exhaustive split; floor allocation with the
// remainder going to eval, and a minimum of one entry for any split whose
// fraction is positive.
SplitResult split_dataset(const DatasetManifest& manifest,
                          const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Synthetic dataset emission (store + manifest)
// ---------------------------------------------------------------------------

struct SynthDatasetConfig {
  int64_t n = 256;
  int64_t length = 6144;
  double sample_rate = 100.0;
  double magnitude_lo = 2.0, magnitude_hi = 5.0;
  double distance_lo = 5.0, distance_hi = 40.0;
  double noise_level = 0.05;
  double station_lat = 35.0, station_lon = -117.0;
  StoreKind store = StoreKind::hdf5;
  ScalingRanges scaling;
};

// Writes the store and manifest under out_dir; returns the manifest path.
std::string generate_synthetic_dataset(const std::string& out_dir,
                                       const SynthDatasetConfig& cfg,
                                       uint64_t seed);

}  // namespace seismo::data
