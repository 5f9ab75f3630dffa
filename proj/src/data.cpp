#include "seismo/data.hpp"

#include <hdf5.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "seismo/geo.hpp"

namespace seismo::data {

namespace fs = std::filesystem;

std::string to_string(Polarity p) { return p == Polarity::up ? "up" : "down"; }

Polarity polarity_from_string(const std::string& s) {
  if (s == "up") return Polarity::up;
  if (s == "down") return Polarity::down;
  throw std::invalid_argument("unknown polarity value '" + s + "'");
}

void WaveformRecord::validate() const {
  if (length <= 0) throw std::invalid_argument("record: empty trace");
  if (static_cast<int64_t>(trace.size()) != 3 * length)
    throw std::invalid_argument("record: trace is not [3 x L]");
  if (p_index && s_index && !(*p_index < *s_index))
    throw std::invalid_argument("record: requires p_index < s_index");
  if (p_index && (*p_index < 0 || *p_index >= length))
    throw std::invalid_argument("record: p_index out of range");
  if (s_index && (*s_index < 0 || *s_index >= length))
    throw std::invalid_argument("record: s_index out of range");
  if (back_azimuth_deg && (*back_azimuth_deg < 0 || *back_azimuth_deg >= 360))
    throw std::invalid_argument("record: back_azimuth outside [0, 360)");
  if (distance_km && *distance_km < 0)
    throw std::invalid_argument("record: negative distance");
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

std::vector<double> make_pick_label(int64_t length, int64_t pick_index,
                                    double sample_rate) {
  if (sample_rate <= 0.0)
    throw std::domain_error("make_pick_label: sample_rate must be positive");
  if (pick_index < 0 || pick_index >= length)
    throw std::out_of_range("make_pick_label: pick_index " +
                            std::to_string(pick_index) + " outside [0, " +
                            std::to_string(length) + ")");
  std::vector<double> label(static_cast<size_t>(length), 0.0);
  const double sigma = 0.1 * sample_rate;            // samples
  const int64_t half = static_cast<int64_t>(std::llround(0.25 * sample_rate));
  const int64_t lo = std::max<int64_t>(0, pick_index - half);
  const int64_t hi = std::min<int64_t>(length - 1, pick_index + half);
  for (int64_t i = lo; i <= hi; ++i) {
    const double d = static_cast<double>(i - pick_index) / sigma;
    label[static_cast<size_t>(i)] = std::exp(-0.5 * d * d);
  }
  label[static_cast<size_t>(pick_index)] = 1.0;
  return label;
}

std::pair<double, double> encode_azimuth(double theta_deg) {
  if (!std::isfinite(theta_deg))
    throw std::domain_error("encode_azimuth: non-finite angle");
  double t = std::fmod(theta_deg, 360.0);
  if (t < 0) t += 360.0;
  const double rad = t * (3.14159265358979323846 / 180.0);
  return {std::sin(rad), std::cos(rad)};
}

double decode_azimuth(double sin_v, double cos_v) {
  if (sin_v == 0.0 && cos_v == 0.0)
    throw std::domain_error("decode_azimuth: degenerate (0, 0) input");
  double deg = std::atan2(sin_v, cos_v) * (180.0 / 3.14159265358979323846);
  if (deg < 0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

double scale_target(double value, double lo, double hi, int64_t* clip_counter) {
  if (!(hi > lo))
    throw std::invalid_argument("scale_target: requires hi > lo");
  double v = value;
  if (v < lo || v > hi) {
    if (clip_counter) ++*clip_counter;
    v = std::clamp(v, lo, hi);
  }
  return (v - lo) / (hi - lo);
}

double unscale_output(double u, double lo, double hi, int64_t* clip_counter) {
  if (!(hi > lo))
    throw std::invalid_argument("unscale_output: requires hi > lo");
  double v = u;
  if (v < 0.0 || v > 1.0) {
    if (clip_counter) ++*clip_counter;
    v = std::clamp(v, 0.0, 1.0);
  }
  return lo + v * (hi - lo);
}

SampleLabels build_labels(const WaveformRecord& rec,
                          const ScalingRanges& scaling) {
  SampleLabels lab;
  lab.pick_p.assign(static_cast<size_t>(rec.length), 0.0);
  lab.pick_s.assign(static_cast<size_t>(rec.length), 0.0);
  if (rec.p_index) {
    lab.pick_p = make_pick_label(rec.length, *rec.p_index, rec.sample_rate);
    lab.has_p = true;
  }
  if (rec.s_index) {
    lab.pick_s = make_pick_label(rec.length, *rec.s_index, rec.sample_rate);
    lab.has_s = true;
  }
  if (rec.back_azimuth_deg) {
    auto [s, c] = encode_azimuth(*rec.back_azimuth_deg);
    lab.azimuth_sin = s;
    lab.azimuth_cos = c;
    lab.has_azimuth = true;
  }
  if (rec.magnitude) {
    lab.magnitude_unit =
        scale_target(*rec.magnitude, scaling.magnitude_lo, scaling.magnitude_hi);
    lab.has_magnitude = true;
  }
  if (rec.distance_km) {
    lab.distance_unit =
        scale_target(*rec.distance_km, scaling.distance_lo, scaling.distance_hi);
    lab.has_distance = true;
  }
  if (rec.polarity) {
    lab.polarity_up = (*rec.polarity == Polarity::up) ? 1.0 : 0.0;
    lab.polarity_down = 1.0 - lab.polarity_up;
    lab.has_polarity = true;
  }
  return lab;
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

namespace {

// Ricker wavelet value at time tau (seconds) for dominant frequency f.
double ricker(double tau, double f) {
  const double pi = 3.14159265358979323846;
  const double a = pi * pi * f * f * tau * tau;
  return (1.0 - 2.0 * a) * std::exp(-a);
}

// Adds a one-sided Ricker pulse starting at onset (peak at the onset sample).
void add_pulse(std::vector<double>& channel, int64_t onset, double amp,
               double freq, double sample_rate) {
  const int64_t n = static_cast<int64_t>(channel.size());
  const int64_t span =
      static_cast<int64_t>(std::llround(1.5 / freq * sample_rate));
  for (int64_t j = 0; j <= span && onset + j < n; ++j) {
    channel[static_cast<size_t>(onset + j)] +=
        amp * ricker(static_cast<double>(j) / sample_rate, freq);
  }
}

constexpr double kSynthFreqP = 5.0;   // Hz, P wavelet dominant frequency
constexpr double kSynthFreqS = 2.5;   // Hz
constexpr double kSynthSLeakZ = 0.5;  // S amplitude leaked onto Z
constexpr double kSynthPLeakH = 0.3;  // P amplitude leaked onto horizontals

}  // namespace

int64_t synth_sp_offset(double distance_km, double sample_rate) {
  return static_cast<int64_t>(std::llround(
      distance_km * (1.0 / kSynthVs - 1.0 / kSynthVp) * sample_rate));
}

std::pair<WaveformRecord, SampleLabels> synth_event(
    const SynthEventParams& params, uint64_t seed, int64_t length,
    double sample_rate, const ScalingRanges& scaling) {
  if (length <= 0 || sample_rate <= 0)
    throw std::domain_error("synth_event: bad length/sample_rate");
  if (params.distance_km <= 0)
    throw std::domain_error("synth_event: distance must be positive");
  if (params.magnitude < scaling.magnitude_lo ||
      params.magnitude > scaling.magnitude_hi ||
      params.distance_km < scaling.distance_lo ||
      params.distance_km > scaling.distance_hi)
    throw std::domain_error("synth_event: parameters outside scaling ranges");

  Rng rng(seed);
  const int64_t sp = synth_sp_offset(params.distance_km, sample_rate);
  if (sp >= length)
    throw std::domain_error("synth_event: S-P offset " + std::to_string(sp) +
                            " cannot fit in trace of length " +
                            std::to_string(length));
  // P arrival somewhere in the first third; reject and resample while the
  // S arrival would fall off the end.
  int64_t p_index = 0, s_index = 0;
  const int64_t third = std::max<int64_t>(1, length / 3);
  for (int attempt = 0;; ++attempt) {
    p_index = static_cast<int64_t>(rng.uniform_int(
        static_cast<uint64_t>(third)));
    s_index = p_index + sp;
    if (s_index < length) break;
    if (attempt > 10000)
      throw std::domain_error("synth_event: cannot place S arrival");
  }

  const double amp =
      std::pow(10.0, 0.5 * params.magnitude) / params.distance_km;
  const double baz_rad =
      params.back_azimuth_deg * (3.14159265358979323846 / 180.0);
  const double se = std::sin(baz_rad), ce = std::cos(baz_rad);
  const double pol = (params.polarity == Polarity::up) ? 1.0 : -1.0;

  std::vector<double> e(static_cast<size_t>(length), 0.0);
  std::vector<double> nch(static_cast<size_t>(length), 0.0);
  std::vector<double> z(static_cast<size_t>(length), 0.0);

  add_pulse(z, p_index, pol * amp, kSynthFreqP, sample_rate);
  add_pulse(z, s_index, kSynthSLeakZ * amp, kSynthFreqS, sample_rate);
  add_pulse(e, s_index, se * amp, kSynthFreqS, sample_rate);
  add_pulse(e, p_index, se * kSynthPLeakH * amp, kSynthFreqP, sample_rate);
  add_pulse(nch, s_index, ce * amp, kSynthFreqS, sample_rate);
  add_pulse(nch, p_index, ce * kSynthPLeakH * amp, kSynthFreqP, sample_rate);

  if (params.noise_level > 0.0) {
    const double nstd = params.noise_level * amp;
    for (auto* ch : {&e, &nch, &z})
      for (auto& v : *ch) v += rng.normal(0.0, nstd);
  }

  WaveformRecord rec;
  rec.length = length;
  rec.sample_rate = sample_rate;
  rec.trace.resize(static_cast<size_t>(3 * length));
  std::copy(e.begin(), e.end(), rec.trace.begin());
  std::copy(nch.begin(), nch.end(), rec.trace.begin() + length);
  std::copy(z.begin(), z.end(), rec.trace.begin() + 2 * length);
  rec.p_index = p_index;
  rec.s_index = s_index;
  rec.magnitude = params.magnitude;
  rec.distance_km = params.distance_km;
  rec.back_azimuth_deg = params.back_azimuth_deg;
  rec.polarity = params.polarity;
  rec.validate();

  SampleLabels labels = build_labels(rec, scaling);
  return {std::move(rec), std::move(labels)};
}

// ---------------------------------------------------------------------------
// HDF5 store
// ---------------------------------------------------------------------------

namespace {

struct H5Silencer {
  H5Silencer() { H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr); }
};

void silence_h5() { static H5Silencer s; }

class Hdf5Store : public TraceStore {
 public:
  explicit Hdf5Store(const std::string& path) : path_(path) {
    silence_h5();
    file_ = H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT);
    if (file_ < 0)
      throw std::runtime_error("store: cannot open HDF5 file " + path);
  }
  ~Hdf5Store() override {
    if (file_ >= 0) H5Fclose(file_);
  }

  bool has(const std::string& trace_id) const override {
    return H5Lexists(file_, trace_id.c_str(), H5P_DEFAULT) > 0;
  }

  std::vector<float> read(const std::string& trace_id,
                          int64_t expected_length) const override {
    hid_t ds = H5Dopen2(file_, trace_id.c_str(), H5P_DEFAULT);
    if (ds < 0)
      throw std::out_of_range("store: trace '" + trace_id + "' not found in " +
                              path_);
    hid_t space = H5Dget_space(ds);
    hsize_t dims[2] = {0, 0};
    const int rank = H5Sget_simple_extent_ndims(space);
    if (rank == 2) H5Sget_simple_extent_dims(space, dims, nullptr);
    H5Sclose(space);
    if (rank != 2 || dims[0] != 3 ||
        (expected_length > 0 &&
         static_cast<int64_t>(dims[1]) != expected_length)) {
      H5Dclose(ds);
      throw std::runtime_error("store: trace '" + trace_id +
                               "' has unexpected shape");
    }
    std::vector<float> out(static_cast<size_t>(3 * dims[1]));
    const herr_t rc = H5Dread(ds, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL,
                              H5P_DEFAULT, out.data());
    H5Dclose(ds);
    if (rc < 0)
      throw std::runtime_error("store: read failed for trace '" + trace_id +
                               "'");
    return out;
  }

 private:
  std::string path_;
  hid_t file_ = -1;
};

class Hdf5StoreWriter : public TraceStoreWriter {
 public:
  explicit Hdf5StoreWriter(const std::string& path) {
    silence_h5();
    file_ = H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
    if (file_ < 0)
      throw std::runtime_error("store: cannot create HDF5 file " + path);
  }
  ~Hdf5StoreWriter() override {
    if (file_ >= 0) H5Fclose(file_);
  }

  void write(const std::string& trace_id, const std::vector<float>& samples,
             int64_t length) override {
    if (static_cast<int64_t>(samples.size()) != 3 * length)
      throw std::invalid_argument("store: samples must be [3 x L]");
    hsize_t dims[2] = {3, static_cast<hsize_t>(length)};
    hid_t space = H5Screate_simple(2, dims, nullptr);
    hid_t ds = H5Dcreate2(file_, trace_id.c_str(), H5T_IEEE_F32LE, space,
                          H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT);
    if (ds < 0) {
      H5Sclose(space);
      throw std::runtime_error("store: cannot create dataset " + trace_id);
    }
    H5Dwrite(ds, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT,
             samples.data());
    H5Dclose(ds);
    H5Sclose(space);
  }

 private:
  hid_t file_ = -1;
};

// ---------------------------------------------------------------------------
// Directory-of-binary-files store: <dir>/<trace_id>.f32, raw little-endian
// float32, channel-major [3 x L].
// ---------------------------------------------------------------------------

class DirStore : public TraceStore {
 public:
  explicit DirStore(const std::string& path) : dir_(path) {
    if (!fs::is_directory(dir_))
      throw std::runtime_error("store: not a directory: " + path);
  }

  bool has(const std::string& trace_id) const override {
    return fs::exists(dir_ / (trace_id + ".f32"));
  }

  std::vector<float> read(const std::string& trace_id,
                          int64_t expected_length) const override {
    const fs::path p = dir_ / (trace_id + ".f32");
    std::ifstream in(p, std::ios::binary | std::ios::ate);
    if (!in)
      throw std::out_of_range("store: trace '" + trace_id + "' not found in " +
                              dir_.string());
    const int64_t bytes = static_cast<int64_t>(in.tellg());
    if (bytes % (3 * 4) != 0)
      throw std::runtime_error("store: trace '" + trace_id +
                               "' has malformed size");
    const int64_t length = bytes / (3 * 4);
    if (expected_length > 0 && length != expected_length)
      throw std::runtime_error("store: trace '" + trace_id + "' has length " +
                               std::to_string(length) + ", expected " +
                               std::to_string(expected_length));
    std::vector<float> out(static_cast<size_t>(3 * length));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(out.data()), bytes);
    if (!in)
      throw std::runtime_error("store: read failed for trace '" + trace_id +
                               "'");
    return out;
  }

 private:
  fs::path dir_;
};

class DirStoreWriter : public TraceStoreWriter {
 public:
  explicit DirStoreWriter(const std::string& path) : dir_(path) {
    fs::create_directories(dir_);
  }

  void write(const std::string& trace_id, const std::vector<float>& samples,
             int64_t length) override {
    if (static_cast<int64_t>(samples.size()) != 3 * length)
      throw std::invalid_argument("store: samples must be [3 x L]");
    std::ofstream out(dir_ / (trace_id + ".f32"), std::ios::binary);
    out.write(reinterpret_cast<const char*>(samples.data()),
              static_cast<std::streamsize>(samples.size() * 4));
    if (!out)
      throw std::runtime_error("store: write failed for trace " + trace_id);
  }

 private:
  fs::path dir_;
};

}  // namespace

std::unique_ptr<TraceStore> open_trace_store(const std::string& path) {
  if (fs::is_directory(path)) return std::make_unique<DirStore>(path);
  return std::make_unique<Hdf5Store>(path);
}

std::unique_ptr<TraceStoreWriter> create_trace_store(const std::string& path,
                                                     StoreKind kind) {
  if (kind == StoreKind::directory)
    return std::make_unique<DirStoreWriter>(path);
  return std::make_unique<Hdf5StoreWriter>(path);
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

template <typename T>
std::string opt_str(const std::optional<T>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(12);
  os << *v;
  return os.str();
}

const char* kManifestColumns =
    "trace_id,p_index,s_index,magnitude,distance_km,back_azimuth_deg,"
    "polarity,station_lat,station_lon,event_lat,event_lon";

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  DatasetManifest m;
  m.path = path;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        std::string val = line.substr(eq + 1);
        key.erase(0, key.find_first_not_of(' '));
        key.erase(key.find_last_not_of(' ') + 1);
        if (key == "sample_rate") m.sample_rate = std::stod(val);
        else if (key == "length") m.trace_length = std::stoll(val);
        else if (key == "store") m.store_path = val;
      }
      continue;
    }
    if (!header_seen) {
      if (line != kManifestColumns)
        throw std::runtime_error("manifest: unexpected column header in " +
                                 path);
      header_seen = true;
      continue;
    }
    auto f = split_fields(line, ',');
    if (f.size() != 11)
      throw std::runtime_error("manifest: malformed row '" + line + "'");
    ManifestEntry e;
    e.trace_id = f[0];
    auto opt_ll = [](const std::string& s) -> std::optional<int64_t> {
      return s.empty() ? std::nullopt : std::optional<int64_t>(std::stoll(s));
    };
    auto opt_d = [](const std::string& s) -> std::optional<double> {
      return s.empty() ? std::nullopt : std::optional<double>(std::stod(s));
    };
    e.p_index = opt_ll(f[1]);
    e.s_index = opt_ll(f[2]);
    e.magnitude = opt_d(f[3]);
    e.distance_km = opt_d(f[4]);
    e.back_azimuth_deg = opt_d(f[5]);
    if (!f[6].empty()) e.polarity = polarity_from_string(f[6]);
    e.station_lat = opt_d(f[7]);
    e.station_lon = opt_d(f[8]);
    e.event_lat = opt_d(f[9]);
    e.event_lon = opt_d(f[10]);
    m.entries.push_back(std::move(e));
  }
  if (m.sample_rate <= 0 || m.trace_length <= 0 || m.store_path.empty())
    throw std::runtime_error("manifest: missing sample_rate/length/store in " +
                             path);
  // store path is relative to the manifest location
  fs::path sp(m.store_path);
  if (sp.is_relative()) m.store_path = (fs::path(path).parent_path() / sp).string();
  // trace ids must be unique
  std::vector<std::string> ids;
  ids.reserve(m.entries.size());
  for (const auto& e : m.entries) ids.push_back(e.trace_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw std::runtime_error("manifest: duplicate trace ids in " + path);
  return m;
}

void write_manifest(const std::string& path, const DatasetManifest& m,
                    const std::string& store_relpath) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("manifest: cannot write " + path);
  out << "# seismollm-manifest v1\n";
  out << "# sample_rate=" << m.sample_rate << "\n";
  out << "# length=" << m.trace_length << "\n";
  out << "# store=" << store_relpath << "\n";
  out << kManifestColumns << "\n";
  for (const auto& e : m.entries) {
    out << e.trace_id << ',' << opt_str(e.p_index) << ',' << opt_str(e.s_index)
        << ',' << opt_str(e.magnitude) << ',' << opt_str(e.distance_km) << ','
        << opt_str(e.back_azimuth_deg) << ','
        << (e.polarity ? to_string(*e.polarity) : "") << ','
        << opt_str(e.station_lat) << ',' << opt_str(e.station_lon) << ','
        << opt_str(e.event_lat) << ',' << opt_str(e.event_lon) << "\n";
  }
}

const ManifestEntry& DatasetManifest::find(const std::string& trace_id) const {
  for (const auto& e : entries)
    if (e.trace_id == trace_id) return e;
  throw std::out_of_range("manifest: unknown trace id '" + trace_id + "'");
}

int64_t padded_length(int64_t raw, int64_t pad_multiple, int64_t pad_to) {
  if (pad_to > 0) {
    if (pad_to < raw || (pad_multiple > 0 && pad_to % pad_multiple != 0))
      throw std::invalid_argument(
          "padding: pad_to=" + std::to_string(pad_to) +
          " must be a multiple of " + std::to_string(pad_multiple) +
          " no smaller than the trace length " + std::to_string(raw));
    return pad_to;
  }
  int64_t padded = raw;
  if (pad_multiple > 0 && padded % pad_multiple != 0)
    padded += pad_multiple - (padded % pad_multiple);
  return padded;
}

WaveformRecord read_trace(const DatasetManifest& m, const std::string& trace_id,
                          int64_t pad_multiple, int64_t pad_to) {
  const ManifestEntry& e = m.find(trace_id);
  auto store = open_trace_store(m.store_path);
  const std::vector<float> raw = store->read(trace_id, m.trace_length);

  const int64_t padded = padded_length(m.trace_length, pad_multiple, pad_to);

  WaveformRecord rec;
  rec.trace_id = trace_id;
  rec.length = padded;
  rec.sample_rate = m.sample_rate;
  rec.pad_samples = padded - m.trace_length;
  rec.trace.assign(static_cast<size_t>(3 * padded), 0.0);
  for (int c = 0; c < 3; ++c)
    for (int64_t t = 0; t < m.trace_length; ++t)
      rec.trace[static_cast<size_t>(c * padded + t)] =
          static_cast<double>(raw[static_cast<size_t>(c * m.trace_length + t)]);
  rec.p_index = e.p_index;
  rec.s_index = e.s_index;
  rec.magnitude = e.magnitude;
  rec.distance_km = e.distance_km;
  rec.back_azimuth_deg = e.back_azimuth_deg;
  rec.polarity = e.polarity;
  rec.station_lat_deg = e.station_lat;
  rec.station_lon_deg = e.station_lon;
  rec.event_lat_deg = e.event_lat;
  rec.event_lon_deg = e.event_lon;
  rec.validate();
  return rec;
}

std::vector<Sample> load_all(const DatasetManifest& m,
                             const ScalingRanges& scaling,
                             int64_t pad_multiple, int64_t pad_to) {
  std::vector<Sample> out;
  out.reserve(m.entries.size());
  auto store = open_trace_store(m.store_path);
  for (const auto& e : m.entries) {
    // read via the shared store handle instead of read_trace to avoid
    // reopening the container per entry
    const std::vector<float> raw = store->read(e.trace_id, m.trace_length);
    const int64_t padded = padded_length(m.trace_length, pad_multiple, pad_to);
    WaveformRecord rec;
    rec.trace_id = e.trace_id;
    rec.length = padded;
    rec.sample_rate = m.sample_rate;
    rec.pad_samples = padded - m.trace_length;
    rec.trace.assign(static_cast<size_t>(3 * padded), 0.0);
    for (int c = 0; c < 3; ++c)
      for (int64_t t = 0; t < m.trace_length; ++t)
        rec.trace[static_cast<size_t>(c * padded + t)] = static_cast<double>(
            raw[static_cast<size_t>(c * m.trace_length + t)]);
    rec.p_index = e.p_index;
    rec.s_index = e.s_index;
    rec.magnitude = e.magnitude;
    rec.distance_km = e.distance_km;
    rec.back_azimuth_deg = e.back_azimuth_deg;
    rec.polarity = e.polarity;
    rec.station_lat_deg = e.station_lat;
    rec.station_lon_deg = e.station_lon;
    rec.event_lat_deg = e.event_lat;
    rec.event_lon_deg = e.event_lon;
    rec.validate();
    SampleLabels lab = build_labels(rec, scaling);
    out.push_back({std::move(rec), std::move(lab)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
  for (double f : {train_fraction, val_fraction, eval_fraction})
    if (!(f > 0.0 && f < 1.0))
      throw std::invalid_argument("split: fractions must lie in (0, 1)");
  if (std::abs(train_fraction + val_fraction + eval_fraction - 1.0) > 1e-9)
    throw std::invalid_argument("split: fractions must sum to 1");
}

SplitResult split_dataset(const DatasetManifest& manifest,
                          const SplitSpec& spec) {
  spec.validate();
  const int64_t n = static_cast<int64_t>(manifest.entries.size());
  if (n == 0) throw std::domain_error("split: empty manifest");

  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  Rng rng(spec.seed);
  rng.shuffle(idx);

  int64_t n_train = static_cast<int64_t>(
      std::floor(spec.train_fraction * static_cast<double>(n)));
  int64_t n_val = static_cast<int64_t>(
      std::floor(spec.val_fraction * static_cast<double>(n)));
  int64_t n_eval = n - n_train - n_val;
  // every split with a positive fraction gets at least one entry
  auto steal_from_largest = [&](int64_t& target) {
    int64_t* largest = &n_eval;
    if (n_train > *largest) largest = &n_train;
    if (n_val > *largest) largest = &n_val;
    if (*largest <= 1)
      throw std::domain_error("split: too few entries to honor all fractions");
    --*largest;
    ++target;
  };
  if (n_train == 0) steal_from_largest(n_train);
  if (n_val == 0) steal_from_largest(n_val);
  if (n_eval == 0) steal_from_largest(n_eval);

  auto subset = [&](int64_t begin, int64_t count) {
    DatasetManifest out;
    out.sample_rate = manifest.sample_rate;
    out.trace_length = manifest.trace_length;
    out.store_path = manifest.store_path;
    out.path = manifest.path;
    out.entries.reserve(static_cast<size_t>(count));
    for (int64_t i = begin; i < begin + count; ++i)
      out.entries.push_back(
          manifest.entries[static_cast<size_t>(idx[static_cast<size_t>(i)])]);
    return out;
  };
  SplitResult r;
  r.train = subset(0, n_train);
  r.val = subset(n_train, n_val);
  r.eval = subset(n_train + n_val, n_eval);
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic dataset emission
// ---------------------------------------------------------------------------

std::string generate_synthetic_dataset(const std::string& out_dir,
                                       const SynthDatasetConfig& cfg,
                                       uint64_t seed) {
  fs::create_directories(out_dir);
  const std::string store_rel =
      cfg.store == StoreKind::hdf5 ? "traces.h5" : "traces";
  const std::string store_path = (fs::path(out_dir) / store_rel).string();
  auto writer = create_trace_store(store_path, cfg.store);

  DatasetManifest m;
  m.sample_rate = cfg.sample_rate;
  m.trace_length = cfg.length;
  m.store_path = store_path;

  Rng rng(seed);
  for (int64_t i = 0; i < cfg.n; ++i) {
    SynthEventParams p;
    p.magnitude = rng.uniform(cfg.magnitude_lo, cfg.magnitude_hi);
    p.distance_km = rng.uniform(cfg.distance_lo, cfg.distance_hi);
    p.back_azimuth_deg = rng.uniform(0.0, 360.0);
    p.polarity = rng.bernoulli(0.5) ? Polarity::up : Polarity::down;
    p.noise_level = cfg.noise_level;
    const uint64_t ev_seed = rng.next_u64();
    auto [rec, labels] = synth_event(p, ev_seed, cfg.length, cfg.sample_rate,
                                     cfg.scaling);
    char id[32];
    std::snprintf(id, sizeof(id), "ev%06lld", static_cast<long long>(i));
    rec.trace_id = id;

    std::vector<float> samples(rec.trace.size());
    for (size_t j = 0; j < rec.trace.size(); ++j)
      samples[j] = static_cast<float>(rec.trace[j]);
    writer->write(rec.trace_id, samples, cfg.length);

    ManifestEntry e;
    e.trace_id = rec.trace_id;
    e.p_index = rec.p_index;
    e.s_index = rec.s_index;
    e.magnitude = rec.magnitude;
    e.distance_km = rec.distance_km;
    e.back_azimuth_deg = rec.back_azimuth_deg;
    e.polarity = rec.polarity;
    e.station_lat = cfg.station_lat;
    e.station_lon = cfg.station_lon;
    auto [ev_lat, ev_lon] = geo::locate_epicenter(
        cfg.station_lat, cfg.station_lon, p.back_azimuth_deg, p.distance_km);
    e.event_lat = ev_lat;
    e.event_lon = ev_lon;
    m.entries.push_back(std::move(e));
  }
  const std::string manifest_path =
      (fs::path(out_dir) / "manifest.csv").string();
  write_manifest(manifest_path, m, store_rel);
  return manifest_path;
}

}  // namespace seismo::data
