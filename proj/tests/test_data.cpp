#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "seismo/data.hpp"
#include "support/testutil.hpp"

using namespace seismo;
using namespace seismo::data;

TEST_SUITE("data") {

TEST_CASE("pick label: peak, window edge, 1-sigma value, symmetry") {
  const auto label = make_pick_label(6000, 1000, 100.0);
  CHECK(label[1000] == 1.0);
  CHECK(label[1026] == 0.0);  // 0.26 s is outside the 0.25 s window
  CHECK(label[1010] == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  // symmetric about the pick up to truncation
  for (int d = 1; d <= 25; ++d)
    CHECK(label[1000 - d] == doctest::Approx(label[1000 + d]).epsilon(1e-15));
  // max attained only at the pick
  for (size_t i = 0; i < label.size(); ++i) {
    CHECK(label[i] >= 0.0);
    CHECK(label[i] <= 1.0);
    if (i != 1000) CHECK(label[i] < 1.0);
  }
  // truncation at the sequence edge
  const auto edge = make_pick_label(100, 5, 100.0);
  CHECK(edge[5] == 1.0);
  CHECK(edge[0] > 0.0);

  CHECK_THROWS_AS(make_pick_label(100, 100, 100.0), std::out_of_range);
  CHECK_THROWS_AS(make_pick_label(100, -1, 100.0), std::out_of_range);
  CHECK_THROWS_AS(make_pick_label(100, 10, 0.0), std::domain_error);
}

TEST_CASE("azimuth encode/decode") {
  auto [s0, c0] = encode_azimuth(0.0);
  CHECK(s0 == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(c0 == doctest::Approx(1.0));
  auto [s90, c90] = encode_azimuth(90.0);
  CHECK(s90 == doctest::Approx(1.0));
  CHECK(std::abs(c90) < 1e-12);
  auto [s30, c30] = encode_azimuth(30.0);
  CHECK(s30 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c30 == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));

  CHECK(decode_azimuth(0.0, 1.0) == doctest::Approx(0.0));
  CHECK(decode_azimuth(-1.0, 0.0) == doctest::Approx(270.0));
  // scale invariance
  CHECK(decode_azimuth(1.2, 1.6) ==
        doctest::Approx(decode_azimuth(0.6, 0.8)).epsilon(1e-12));
  CHECK(decode_azimuth(0.6, 0.8) ==
        doctest::Approx(36.869897645844).epsilon(1e-9));

  // round-trip over 1000 random angles
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    const double theta = rng.uniform(0.0, 360.0);
    auto [s, c] = encode_azimuth(theta);
    CHECK(s * s + c * c == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(decode_azimuth(s, c) - theta) < 1e-9);
  }
  CHECK_THROWS_AS(decode_azimuth(0.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(encode_azimuth(std::nan("")), std::domain_error);
}

TEST_CASE("target scaling") {
  CHECK(scale_target(2.0, 2.0, 10.0) == 0.0);
  CHECK(scale_target(10.0, 2.0, 10.0) == 1.0);
  CHECK(scale_target(3.5, 0.0, 8.0) == doctest::Approx(0.4375).epsilon(1e-15));
  CHECK(unscale_output(0.5, 0.0, 300.0) == doctest::Approx(150.0));
  CHECK(unscale_output(0.0, -1.0, 8.0) == doctest::Approx(-1.0));
  CHECK(unscale_output(0.4375, 0.0, 8.0) ==
        doctest::Approx(3.5).epsilon(1e-12));
  // round-trip exactness
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.uniform(-1.0, 8.0);
    CHECK(std::abs(unscale_output(scale_target(v, -1, 8), -1, 8) - v) < 1e-12);
  }
  // clip counting
  int64_t clips = 0;
  CHECK(scale_target(11.0, 2.0, 10.0, &clips) == 1.0);
  CHECK(unscale_output(1.5, 0.0, 1.0, &clips) == 1.0);
  CHECK(clips == 2);
  CHECK_THROWS_AS(scale_target(1.0, 5.0, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(unscale_output(0.5, 5.0, 2.0), std::invalid_argument);
}

TEST_CASE("synth_event: S-P formula, polarity, determinism, monotonicity") {
  ScalingRanges sc;
  SynthEventParams p;
  p.magnitude = 3.0;
  p.distance_km = 35.0;
  p.back_azimuth_deg = 123.0;
  p.polarity = Polarity::up;
  p.noise_level = 0.0;

  CHECK(synth_sp_offset(35.0, 100.0) == 417);

  auto [rec, lab] = synth_event(p, 99, 6144, 100.0, sc);
  CHECK(*rec.s_index - *rec.p_index == 417);
  CHECK(*rec.p_index < 6144 / 3);
  CHECK(lab.pick_p[static_cast<size_t>(*rec.p_index)] == 1.0);
  CHECK(lab.pick_s[static_cast<size_t>(*rec.s_index)] == 1.0);
  CHECK(lab.has_azimuth);
  CHECK(lab.polarity_up == 1.0);

  // first Z excursion at/after p_index is positive for polarity up
  int64_t first = -1;
  for (int64_t t = *rec.p_index; t < rec.length; ++t)
    if (rec.at(2, t) != 0.0) {
      first = t;
      break;
    }
  REQUIRE(first >= 0);
  CHECK(rec.at(2, first) > 0.0);

  p.polarity = Polarity::down;
  auto [rec_dn, lab_dn] = synth_event(p, 99, 6144, 100.0, sc);
  CHECK(rec_dn.at(2, *rec_dn.p_index) < 0.0);
  CHECK(lab_dn.polarity_down == 1.0);

  // determinism: same seed, same params, bit-identical traces
  p.noise_level = 0.1;
  auto [a1, l1] = synth_event(p, 1234, 6144, 100.0, sc);
  auto [a2, l2] = synth_event(p, 1234, 6144, 100.0, sc);
  CHECK(a1.trace == a2.trace);
  CHECK(*a1.p_index == *a2.p_index);
  auto [a3, l3] = synth_event(p, 1235, 6144, 100.0, sc);
  CHECK(a1.trace != a3.trace);

  // S-P time monotone increasing in distance
  int64_t prev = -1;
  for (double d = 5.0; d <= 100.0; d += 5.0) {
    const int64_t off = synth_sp_offset(d, 100.0);
    CHECK(off > prev);
    prev = off;
  }

  // horizontal amplitude ratio E:N = sin:cos at the S arrival
  p.noise_level = 0.0;
  p.polarity = Polarity::up;
  p.back_azimuth_deg = 25.0;
  auto [recr, labr] = synth_event(p, 5, 6144, 100.0, sc);
  const double se = std::sin(25.0 * 3.14159265358979323846 / 180.0);
  const double ce = std::cos(25.0 * 3.14159265358979323846 / 180.0);
  const int64_t s = *recr.s_index;
  CHECK(recr.at(0, s) / recr.at(1, s) ==
        doctest::Approx(se / ce).epsilon(1e-9));

  // impossible geometry is rejected
  SynthEventParams big;
  big.distance_km = 200.0;
  big.noise_level = 0.0;
  CHECK_THROWS_AS(synth_event(big, 1, 512, 100.0, sc), std::domain_error);
}

TEST_CASE("store + manifest round-trip (both backends)") {
  for (auto kind : {StoreKind::hdf5, StoreKind::directory}) {
    testutil::TempDir dir(kind == StoreKind::hdf5 ? "store_h5" : "store_dir");
    SynthDatasetConfig cfg;
    cfg.n = 3;
    cfg.length = 6000;  // pads to 6144
    cfg.sample_rate = 100.0;
    cfg.distance_lo = 5;
    cfg.distance_hi = 30;
    cfg.store = kind;
    const std::string manifest_path =
        generate_synthetic_dataset(dir.str(), cfg, 11);

    DatasetManifest m = load_manifest(manifest_path);
    CHECK(m.entries.size() == 3);
    CHECK(m.sample_rate == 100.0);
    CHECK(m.trace_length == 6000);

    for (const auto& e : m.entries) {
      WaveformRecord rec = read_trace(m, e.trace_id);
      CHECK(rec.length == 6016);  // next multiple of 64 past 6000
      CHECK(rec.pad_samples == 16);
      // explicit pad-to-6144 configuration
      WaveformRecord rec2 = read_trace(m, e.trace_id, 64, 6144);
      CHECK(rec2.length == 6144);
      CHECK(rec2.pad_samples == 144);
      for (int c = 0; c < 3; ++c)
        for (int64_t t = 6000; t < 6144; ++t) CHECK(rec2.at(c, t) == 0.0);
      CHECK(rec.p_index.has_value());
      CHECK(rec.back_azimuth_deg.has_value());
    }
    CHECK_THROWS_AS(read_trace(m, "missing-id"), std::out_of_range);
    CHECK_THROWS_AS(read_trace(m, m.entries[0].trace_id, 64, 4096),
                    std::invalid_argument);  // pad_to below raw length

    // load_all agrees with read_trace
    const auto samples = load_all(m, cfg.scaling);
    CHECK(samples.size() == 3);
    WaveformRecord direct = read_trace(m, m.entries[0].trace_id);
    CHECK(samples[0].record.trace == direct.trace);
  }
}

TEST_CASE("manifest rejects duplicate ids") {
  testutil::TempDir dir("manifest_bad");
  const std::string path = (dir.path() / "manifest.csv").string();
  {
    std::ofstream out(path);
    out << "# sample_rate=100\n# length=64\n# store=traces\n";
    out << "trace_id,p_index,s_index,magnitude,distance_km,back_azimuth_deg,"
           "polarity,station_lat,station_lon,event_lat,event_lon\n";
    out << "a,,,,,,,,,,\n";
    out << "a,,,,,,,,,,\n";
  }
  CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("duplicate"),
                       std::runtime_error);
}

TEST_CASE("split_dataset: sizes, determinism, partition, few-shot minimum") {
  testutil::TempDir dir("split");
  SynthDatasetConfig cfg;
  cfg.n = 100;
  cfg.length = 128;
  cfg.sample_rate = 50.0;
  cfg.distance_lo = 2;
  cfg.distance_hi = 12;
  cfg.store = StoreKind::directory;
  DatasetManifest m =
      load_manifest(generate_synthetic_dataset(dir.str(), cfg, 3));

  SplitSpec spec;
  spec.train_fraction = 0.8;
  spec.val_fraction = 0.1;
  spec.eval_fraction = 0.1;
  spec.seed = 5;
  auto r = split_dataset(m, spec);
  CHECK(r.train.entries.size() == 80);
  CHECK(r.val.entries.size() == 10);
  CHECK(r.eval.entries.size() == 10);

  // deterministic membership
  auto r2 = split_dataset(m, spec);
  for (size_t i = 0; i < r.train.entries.size(); ++i)
    CHECK(r.train.entries[i].trace_id == r2.train.entries[i].trace_id);

  // disjoint and exhaustive
  std::set<std::string> seen;
  for (const auto* part : {&r.train, &r.val, &r.eval})
    for (const auto& e : part->entries) CHECK(seen.insert(e.trace_id).second);
  CHECK(seen.size() == 100);

  // few-shot tiny manifest: every positive fraction gets at least one entry
  DatasetManifest tiny = m;
  tiny.entries.resize(10);
  SplitSpec fs;
  fs.train_fraction = 0.10;
  fs.val_fraction = 0.05;
  fs.eval_fraction = 0.85;
  auto rt = split_dataset(tiny, fs);
  CHECK(rt.train.entries.size() == 1);
  CHECK(rt.val.entries.size() == 1);
  CHECK(rt.eval.entries.size() == 8);

  DatasetManifest empty = m;
  empty.entries.clear();
  CHECK_THROWS_AS(split_dataset(empty, spec), std::domain_error);

  SplitSpec bad;
  bad.train_fraction = 0.5;
  bad.val_fraction = 0.5;
  bad.eval_fraction = 0.5;
  CHECK_THROWS_AS(split_dataset(m, bad), std::invalid_argument);
}

}  // TEST_SUITE
