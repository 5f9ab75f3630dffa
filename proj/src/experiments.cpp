#include "seismo/experiments.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace seismo::experiments {

namespace fs = std::filesystem;
using config::ConfigError;
using config::Ini;

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

const std::vector<std::pair<std::string, std::string>>& config_schema() {
  static const std::vector<std::pair<std::string, std::string>> schema = {
      {"experiment", "task"},
      {"experiment", "variant"},
      {"experiment", "n_layers"},
      {"experiment", "seed"},
      {"experiment", "checkpoint"},
      {"experiment", "out_dir"},
      {"experiment", "device"},
      {"data", "manifest"},
      {"data", "pad_multiple"},
      {"data", "pad_to"},
      {"split", "train_fraction"},
      {"split", "val_fraction"},
      {"split", "eval_fraction"},
      {"split", "setting"},
      {"scaling", "magnitude_lo"},
      {"scaling", "magnitude_hi"},
      {"scaling", "distance_lo"},
      {"scaling", "distance_hi"},
      {"train", "batch_size"},
      {"train", "lr_low"},
      {"train", "lr_high"},
      {"train", "cycle_epochs"},
      {"train", "patience"},
      {"train", "max_epochs"},
      {"train", "huber_delta"},
      {"train", "augment"},
      {"train", "debug_freeze_check"},
      {"augment", "p_gaussian_noise"},
      {"augment", "p_time_drift"},
      {"augment", "p_gaps"},
      {"augment", "p_channel_dropout"},
      {"augment", "p_amplitude_scale"},
      {"augment", "p_pre_emphasis"},
      {"augment", "p_noise_generation"},
      {"augment", "noise_amp_lo"},
      {"augment", "noise_amp_hi"},
      {"augment", "drift_max_s"},
      {"augment", "gaps_min"},
      {"augment", "gaps_max"},
      {"augment", "gap_len_lo_s"},
      {"augment", "gap_len_hi_s"},
      {"augment", "amp_lo"},
      {"augment", "amp_hi"},
      {"augment", "pre_emphasis_coeff"},
      {"augment", "noise_gen_ar"},
      {"eval", "pick_threshold"},
      {"eval", "min_separation_s"},
      {"eval", "tolerance_s"},
      {"eval", "batch_size"},
      {"eval", "azimuth_checkpoint"},
      {"eval", "distance_checkpoint"},
      {"synth", "n"},
      {"synth", "length"},
      {"synth", "sample_rate"},
      {"synth", "magnitude_lo"},
      {"synth", "magnitude_hi"},
      {"synth", "distance_lo"},
      {"synth", "distance_hi"},
      {"synth", "noise_level"},
      {"synth", "station_lat"},
      {"synth", "station_lon"},
      {"synth", "store"},
      {"matrix", "variants"},
      {"matrix", "seeds"},
      {"matrix", "epochs"},
  };
  return schema;
}

namespace {

void check_known_keys(const Ini& ini) {
  const auto& schema = config_schema();
  for (const auto& [section, kv] : ini.sections) {
    for (const auto& [key, value] : kv) {
      (void)value;
      const bool known =
          std::any_of(schema.begin(), schema.end(), [&](const auto& e) {
            return e.first == section && e.second == key;
          });
      if (!known)
        throw ConfigError("config: unknown key " + section + "." + key);
    }
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_ini(const Ini& ini) {
  check_known_keys(ini);
  ExperimentConfig c;
  c.task = ini.get_or("experiment", "task", c.task);
  c.variant = model::variant_from_string(
      ini.get_or("experiment", "variant", to_string(c.variant)));
  const int fixed = model::variant_layers(c.variant);
  if (ini.has("experiment", "n_layers")) {
    c.n_layers = static_cast<int>(ini.get_int("experiment", "n_layers", 3));
    if (fixed >= 0 && c.n_layers != fixed)
      throw ConfigError("config: variant " + to_string(c.variant) +
                        " forces n_layers = " + std::to_string(fixed));
  } else if (fixed >= 0) {
    c.n_layers = fixed;
  }
  c.seed = static_cast<uint64_t>(ini.get_int("experiment", "seed", 42));
  c.checkpoint = ini.get_or("experiment", "checkpoint", "");
  c.out_dir = ini.get_or("experiment", "out_dir", c.out_dir);
  c.device = ini.get_or("experiment", "device", c.device);
  if (c.device != "cpu")
    throw ConfigError("config: only device = cpu is supported, got '" +
                      c.device + "'");

  c.manifest = ini.get_or("data", "manifest", "");
  c.pad_multiple = ini.get_int("data", "pad_multiple", 64);
  c.pad_to = ini.get_int("data", "pad_to", 0);

  c.split.train_fraction = ini.get_double("split", "train_fraction", 0.8);
  c.split.val_fraction = ini.get_double("split", "val_fraction", 0.1);
  c.split.eval_fraction = ini.get_double("split", "eval_fraction", 0.1);
  c.split.seed = c.seed;
  c.split_setting = ini.get_or("split", "setting", "standard");
  if (c.split_setting != "standard" && c.split_setting != "few_shot")
    throw ConfigError("config: split.setting must be standard or few_shot");

  c.scaling.magnitude_lo = ini.get_double("scaling", "magnitude_lo", -1.0);
  c.scaling.magnitude_hi = ini.get_double("scaling", "magnitude_hi", 8.0);
  c.scaling.distance_lo = ini.get_double("scaling", "distance_lo", 0.0);
  c.scaling.distance_hi = ini.get_double("scaling", "distance_hi", 300.0);

  c.train.batch_size = ini.get_int("train", "batch_size", 128);
  c.train.lr_low = ini.get_double("train", "lr_low", 5e-4);
  c.train.lr_high = ini.get_double("train", "lr_high", 1e-3);
  c.train.cycle_epochs = ini.get_double("train", "cycle_epochs", 10.0);
  c.train.patience = static_cast<int>(ini.get_int("train", "patience", 30));
  c.train.max_epochs = static_cast<int>(ini.get_int("train", "max_epochs", 200));
  c.train.huber_delta = ini.get_double("train", "huber_delta", 1.0);
  c.train.augment_enabled = ini.get_bool("train", "augment", true);
  c.train.debug_freeze_check =
      ini.get_bool("train", "debug_freeze_check", false);
  c.train.seed = c.seed;

  auto& a = c.aug;
  a.p_gaussian_noise = ini.get_double("augment", "p_gaussian_noise", 0.4);
  a.p_time_drift = ini.get_double("augment", "p_time_drift", 0.4);
  a.p_gaps = ini.get_double("augment", "p_gaps", 0.4);
  a.p_channel_dropout = ini.get_double("augment", "p_channel_dropout", 0.4);
  a.p_amplitude_scale = ini.get_double("augment", "p_amplitude_scale", 0.4);
  a.p_pre_emphasis = ini.get_double("augment", "p_pre_emphasis", 0.97);
  a.p_noise_generation = ini.get_double("augment", "p_noise_generation", 0.05);
  a.noise_amp_lo = ini.get_double("augment", "noise_amp_lo", 0.01);
  a.noise_amp_hi = ini.get_double("augment", "noise_amp_hi", 0.15);
  a.drift_max_s = ini.get_double("augment", "drift_max_s", 0.5);
  a.gaps_min = static_cast<int>(ini.get_int("augment", "gaps_min", 1));
  a.gaps_max = static_cast<int>(ini.get_int("augment", "gaps_max", 3));
  a.gap_len_lo_s = ini.get_double("augment", "gap_len_lo_s", 0.1);
  a.gap_len_hi_s = ini.get_double("augment", "gap_len_hi_s", 0.5);
  a.amp_lo = ini.get_double("augment", "amp_lo", 0.5);
  a.amp_hi = ini.get_double("augment", "amp_hi", 2.0);
  a.pre_emphasis_coeff = ini.get_double("augment", "pre_emphasis_coeff", 0.97);
  a.noise_gen_ar = ini.get_double("augment", "noise_gen_ar", 0.9);
  a.seed = c.seed;
  a.protect_z = (c.task == "polarity");

  c.eval.pick_threshold = ini.get_double("eval", "pick_threshold", 0.3);
  c.eval.min_separation_s = ini.get_double("eval", "min_separation_s", 1.0);
  c.eval.tolerance_s = ini.get_double("eval", "tolerance_s", 0.1);
  c.eval.batch_size = ini.get_int("eval", "batch_size", 64);
  c.eval.scaling = c.scaling;
  c.azimuth_checkpoint = ini.get_or("eval", "azimuth_checkpoint", "");
  c.distance_checkpoint = ini.get_or("eval", "distance_checkpoint", "");

  c.synth.n = ini.get_int("synth", "n", 256);
  c.synth.length = ini.get_int("synth", "length", 6144);
  c.synth.sample_rate = ini.get_double("synth", "sample_rate", 100.0);
  c.synth.magnitude_lo = ini.get_double("synth", "magnitude_lo", 2.0);
  c.synth.magnitude_hi = ini.get_double("synth", "magnitude_hi", 5.0);
  c.synth.distance_lo = ini.get_double("synth", "distance_lo", 5.0);
  c.synth.distance_hi = ini.get_double("synth", "distance_hi", 40.0);
  c.synth.noise_level = ini.get_double("synth", "noise_level", 0.05);
  c.synth.station_lat = ini.get_double("synth", "station_lat", 35.0);
  c.synth.station_lon = ini.get_double("synth", "station_lon", -117.0);
  const std::string store = ini.get_or("synth", "store", "hdf5");
  if (store == "hdf5") c.synth.store = data::StoreKind::hdf5;
  else if (store == "directory") c.synth.store = data::StoreKind::directory;
  else throw ConfigError("config: synth.store must be hdf5 or directory");
  c.synth.scaling = c.scaling;

  c.matrix_variants = split_list(ini.get_or("matrix", "variants", ""));
  for (const auto& s : split_list(ini.get_or("matrix", "seeds", "")))
    c.matrix_seeds.push_back(std::stoull(s));
  c.matrix_epochs = static_cast<int>(ini.get_int("matrix", "epochs", 1));

  // validate task name early
  if (c.task != "location") (void)model::task_from_string(c.task);
  return c;
}

ExperimentConfig ExperimentConfig::from_file(
    const std::string& path, const std::vector<std::string>& overrides) {
  Ini ini = Ini::parse_file(path);
  for (const auto& ov : overrides)
    config::apply_override(ini, ov, config_schema());
  return from_ini(ini);
}

Ini ExperimentConfig::to_ini() const {
  Ini ini;
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
  };
  ini.set("experiment", "task", task);
  ini.set("experiment", "variant", to_string(variant));
  ini.set("experiment", "n_layers", std::to_string(n_layers));
  ini.set("experiment", "seed", std::to_string(seed));
  ini.set("experiment", "checkpoint", checkpoint);
  ini.set("experiment", "out_dir", out_dir);
  ini.set("experiment", "device", device);
  ini.set("data", "manifest", manifest);
  ini.set("data", "pad_multiple", std::to_string(pad_multiple));
  ini.set("data", "pad_to", std::to_string(pad_to));
  ini.set("split", "train_fraction", num(split.train_fraction));
  ini.set("split", "val_fraction", num(split.val_fraction));
  ini.set("split", "eval_fraction", num(split.eval_fraction));
  ini.set("split", "setting", split_setting);
  ini.set("scaling", "magnitude_lo", num(scaling.magnitude_lo));
  ini.set("scaling", "magnitude_hi", num(scaling.magnitude_hi));
  ini.set("scaling", "distance_lo", num(scaling.distance_lo));
  ini.set("scaling", "distance_hi", num(scaling.distance_hi));
  ini.set("train", "batch_size", std::to_string(train.batch_size));
  ini.set("train", "lr_low", num(train.lr_low));
  ini.set("train", "lr_high", num(train.lr_high));
  ini.set("train", "cycle_epochs", num(train.cycle_epochs));
  ini.set("train", "patience", std::to_string(train.patience));
  ini.set("train", "max_epochs", std::to_string(train.max_epochs));
  ini.set("train", "huber_delta", num(train.huber_delta));
  ini.set("train", "augment", train.augment_enabled ? "true" : "false");
  ini.set("train", "debug_freeze_check",
          train.debug_freeze_check ? "true" : "false");
  ini.set("augment", "p_gaussian_noise", num(aug.p_gaussian_noise));
  ini.set("augment", "p_time_drift", num(aug.p_time_drift));
  ini.set("augment", "p_gaps", num(aug.p_gaps));
  ini.set("augment", "p_channel_dropout", num(aug.p_channel_dropout));
  ini.set("augment", "p_amplitude_scale", num(aug.p_amplitude_scale));
  ini.set("augment", "p_pre_emphasis", num(aug.p_pre_emphasis));
  ini.set("augment", "p_noise_generation", num(aug.p_noise_generation));
  ini.set("augment", "noise_amp_lo", num(aug.noise_amp_lo));
  ini.set("augment", "noise_amp_hi", num(aug.noise_amp_hi));
  ini.set("augment", "drift_max_s", num(aug.drift_max_s));
  ini.set("augment", "gaps_min", std::to_string(aug.gaps_min));
  ini.set("augment", "gaps_max", std::to_string(aug.gaps_max));
  ini.set("augment", "gap_len_lo_s", num(aug.gap_len_lo_s));
  ini.set("augment", "gap_len_hi_s", num(aug.gap_len_hi_s));
  ini.set("augment", "amp_lo", num(aug.amp_lo));
  ini.set("augment", "amp_hi", num(aug.amp_hi));
  ini.set("augment", "pre_emphasis_coeff", num(aug.pre_emphasis_coeff));
  ini.set("augment", "noise_gen_ar", num(aug.noise_gen_ar));
  ini.set("eval", "pick_threshold", num(eval.pick_threshold));
  ini.set("eval", "min_separation_s", num(eval.min_separation_s));
  ini.set("eval", "tolerance_s", num(eval.tolerance_s));
  ini.set("eval", "batch_size", std::to_string(eval.batch_size));
  ini.set("eval", "azimuth_checkpoint", azimuth_checkpoint);
  ini.set("eval", "distance_checkpoint", distance_checkpoint);
  ini.set("synth", "n", std::to_string(synth.n));
  ini.set("synth", "length", std::to_string(synth.length));
  ini.set("synth", "sample_rate", num(synth.sample_rate));
  ini.set("synth", "magnitude_lo", num(synth.magnitude_lo));
  ini.set("synth", "magnitude_hi", num(synth.magnitude_hi));
  ini.set("synth", "distance_lo", num(synth.distance_lo));
  ini.set("synth", "distance_hi", num(synth.distance_hi));
  ini.set("synth", "noise_level", num(synth.noise_level));
  ini.set("synth", "station_lat", num(synth.station_lat));
  ini.set("synth", "station_lon", num(synth.station_lon));
  ini.set("synth", "store",
          synth.store == data::StoreKind::hdf5 ? "hdf5" : "directory");
  if (!matrix_variants.empty()) {
    std::string vs;
    for (size_t i = 0; i < matrix_variants.size(); ++i)
      vs += (i ? "," : "") + matrix_variants[i];
    ini.set("matrix", "variants", vs);
    std::string ss;
    for (size_t i = 0; i < matrix_seeds.size(); ++i)
      ss += (i ? "," : "") + std::to_string(matrix_seeds[i]);
    ini.set("matrix", "seeds", ss.empty() ? std::to_string(seed) : ss);
    ini.set("matrix", "epochs", std::to_string(matrix_epochs));
  }
  return ini;
}

model::Task ExperimentConfig::model_task() const {
  if (task == "location")
    throw ConfigError("config: task=location is evaluation-only; train the "
                      "azimuth and distance tasks first");
  return model::task_from_string(task);
}

model::ModelConfig ExperimentConfig::model_config() const {
  model::ModelConfig mc;
  mc.task = model_task();
  mc.variant = variant;
  const int fixed = model::variant_layers(variant);
  mc.n_layers = fixed >= 0 ? fixed : n_layers;
  mc.init_seed = seed;
  return mc;
}

// ---------------------------------------------------------------------------
// Variants / splits
// ---------------------------------------------------------------------------

std::unique_ptr<model::SeisMoLLM> build_variant(
    const ExperimentConfig& cfg, const model::CheckpointSource* checkpoint) {
  return model::build_model(cfg.model_config(), checkpoint);
}

data::SplitResult few_shot_split(const data::DatasetManifest& manifest,
                                 double train_fraction, double val_fraction,
                                 uint64_t seed) {
  if (!(val_fraction > 0.0))
    throw ConfigError("few_shot_split: val fraction must be positive");
  if (!(train_fraction > 0.0))
    throw ConfigError("few_shot_split: train fraction must be positive");
  data::SplitSpec spec;
  spec.train_fraction = train_fraction;
  spec.val_fraction = val_fraction;
  spec.eval_fraction = 1.0 - train_fraction - val_fraction;
  spec.seed = seed;
  return data::split_dataset(manifest, spec);
}

std::string resolve_pretrained_checkpoint(const ExperimentConfig& cfg) {
  if (!cfg.checkpoint.empty()) return cfg.checkpoint;
  if (const char* cache = std::getenv("SEISMOLLM_CACHE")) {
    const fs::path p = fs::path(cache) / "gpt2.safetensors";
    if (fs::exists(p)) return p.string();
  }
  return "";
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

void write_resolved_config(const ExperimentConfig& cfg,
                           const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "resolved.cfg");
  out << cfg.to_ini().serialize();
}

std::string run_synth(const ExperimentConfig& cfg) {
  const std::string manifest =
      data::generate_synthetic_dataset(cfg.out_dir, cfg.synth, cfg.seed);
  write_resolved_config(cfg, cfg.out_dir);
  return manifest;
}

namespace {

data::SplitResult load_split(const ExperimentConfig& cfg) {
  if (cfg.manifest.empty())
    throw ConfigError("config: data.manifest is required");
  data::DatasetManifest manifest = data::load_manifest(cfg.manifest);
  if (cfg.split_setting == "few_shot")
    return few_shot_split(manifest, cfg.split.train_fraction,
                          cfg.split.val_fraction, cfg.split.seed);
  return data::split_dataset(manifest, cfg.split);
}

}  // namespace

RunResult run_train(const ExperimentConfig& cfg) {
  const data::SplitResult splits = load_split(cfg);
  const auto train_set =
      data::load_all(splits.train, cfg.scaling, cfg.pad_multiple, cfg.pad_to);
  const auto val_set = data::load_all(splits.val, cfg.scaling, cfg.pad_multiple, cfg.pad_to);

  std::unique_ptr<model::FileCheckpoint> ckpt;
  const std::string ckpt_path = resolve_pretrained_checkpoint(cfg);
  if (!ckpt_path.empty())
    ckpt = std::make_unique<model::FileCheckpoint>(ckpt_path);
  auto m = build_variant(cfg, ckpt.get());

  train::FitOptions opts;
  opts.out_dir = cfg.out_dir;
  opts.augmentation = cfg.aug;
  opts.resolved_config_text = cfg.to_ini().serialize();
  write_resolved_config(cfg, cfg.out_dir);
  auto fit_result = train::fit(*m, train_set, val_set, cfg.train, opts);

  RunResult r;
  r.out_dir = cfg.out_dir;
  r.checkpoint_path = fit_result.checkpoint_path;
  r.history = std::move(fit_result.history);
  return r;
}

RunResult run_eval(const ExperimentConfig& cfg) {
  const data::SplitResult splits = load_split(cfg);
  const auto eval_set =
      data::load_all(splits.eval, cfg.scaling, cfg.pad_multiple, cfg.pad_to);
  const std::string report_dir =
      (fs::path(cfg.out_dir) / "eval").string();

  eval::EvalReport report;
  if (cfg.task == "location") {
    const std::string az_path =
        cfg.azimuth_checkpoint.empty()
            ? (fs::path(cfg.out_dir) / "azimuth" / "checkpoint.safetensors")
                  .string()
            : cfg.azimuth_checkpoint;
    const std::string di_path =
        cfg.distance_checkpoint.empty()
            ? (fs::path(cfg.out_dir) / "distance" / "checkpoint.safetensors")
                  .string()
            : cfg.distance_checkpoint;
    auto az = model::SeisMoLLM::load(az_path);
    auto di = model::SeisMoLLM::load(di_path);
    eval::ModelPredictor az_pred(*az), di_pred(*di);
    report = eval::evaluate_location(az_pred, di_pred, eval_set, cfg.eval);
  } else {
    // the configured checkpoint may be the GPT-2 weight file used for
    // training; eval only accepts trained model archives
    std::string model_path =
        (fs::path(cfg.out_dir) / "checkpoint.safetensors").string();
    if (!cfg.checkpoint.empty() && fs::exists(cfg.checkpoint)) {
      const auto md = SafeTensorsFile::read_metadata(cfg.checkpoint);
      auto it = md.find("format");
      if (it != md.end() && it->second == "seismollm.ckpt.v1")
        model_path = cfg.checkpoint;
    }
    auto m = model::SeisMoLLM::load(model_path);
    if (m->config().task != cfg.model_task())
      throw ConfigError("eval: checkpoint was trained for task " +
                        to_string(m->config().task) + ", config asks for " +
                        cfg.task);
    eval::ModelPredictor pred(*m);
    report = eval::evaluate(pred, eval_set, cfg.eval);
  }
  report.setting = cfg.split_setting;
  eval::emit_report(report, report_dir);
  write_resolved_config(cfg, report_dir);

  RunResult r;
  r.out_dir = cfg.out_dir;
  r.report_dir = report_dir;
  return r;
}

std::vector<RunResult> run_matrix(const ExperimentConfig& base) {
  if (base.matrix_variants.empty())
    throw ConfigError("ablate: matrix.variants is empty");
  std::vector<uint64_t> seeds = base.matrix_seeds;
  if (seeds.empty()) seeds.push_back(base.seed);
  std::vector<RunResult> results;
  for (const auto& vname : base.matrix_variants) {
    const model::Variant v = model::variant_from_string(vname);
    for (uint64_t s : seeds) {
      ExperimentConfig cfg = base;
      cfg.variant = v;
      const int fixed = model::variant_layers(v);
      if (fixed >= 0) cfg.n_layers = fixed;
      cfg.seed = s;
      cfg.split.seed = s;
      cfg.train.seed = s;
      cfg.aug.seed = s;
      cfg.train.max_epochs = base.matrix_epochs;
      cfg.out_dir =
          (fs::path(base.out_dir) / (vname + "_s" + std::to_string(s)))
              .string();
      RunResult tr = run_train(cfg);
      ExperimentConfig ecfg = cfg;
      ecfg.checkpoint.clear();  // eval the trained archive, not the gpt2 file
      RunResult ev = run_eval(ecfg);
      tr.report_dir = ev.report_dir;
      results.push_back(std::move(tr));
    }
  }
  return results;
}

}  // namespace seismo::experiments
