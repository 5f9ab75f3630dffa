#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "seismo/augment.hpp"
#include "seismo/data.hpp"
#include "seismo/eval.hpp"
#include "seismo/experiments.hpp"
#include "seismo/geo.hpp"
#include "seismo/model.hpp"
#include "seismo/train.hpp"

namespace py = pybind11;
using namespace seismo;

namespace {

py::array_t<double> vec_to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<double> trace_to_array(const data::WaveformRecord& rec) {
  py::array_t<double> out({static_cast<py::ssize_t>(3),
                           static_cast<py::ssize_t>(rec.length)});
  std::copy(rec.trace.begin(), rec.trace.end(), out.mutable_data());
  return out;
}

data::WaveformRecord record_from_array(py::array_t<double, py::array::c_style |
                                                              py::array::forcecast>
                                           trace,
                                       double sample_rate) {
  if (trace.ndim() != 2 || trace.shape(0) != 3)
    throw std::invalid_argument("trace must be a [3, L] array");
  data::WaveformRecord rec;
  rec.length = static_cast<int64_t>(trace.shape(1));
  rec.sample_rate = sample_rate;
  rec.trace.assign(trace.data(), trace.data() + 3 * rec.length);
  return rec;
}

nn::Tensor tensor_from_array(
    py::array_t<double, py::array::c_style | py::array::forcecast> a) {
  nn::Shape shape;
  for (py::ssize_t i = 0; i < a.ndim(); ++i)
    shape.push_back(static_cast<int64_t>(a.shape(i)));
  std::vector<double> buf(a.data(), a.data() + a.size());
  return nn::Tensor::from_data(std::move(shape), std::move(buf));
}

py::array_t<double> array_from_tensor(const nn::Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.data(), t.data() + t.numel(), out.mutable_data());
  return out;
}

py::dict labels_to_dict(const data::SampleLabels& lab) {
  py::dict d;
  d["pick_p"] = vec_to_array(lab.pick_p);
  d["pick_s"] = vec_to_array(lab.pick_s);
  d["azimuth_sincos"] = py::make_tuple(lab.azimuth_sin, lab.azimuth_cos);
  d["magnitude_unit"] = lab.magnitude_unit;
  d["distance_unit"] = lab.distance_unit;
  d["polarity_onehot"] = py::make_tuple(lab.polarity_up, lab.polarity_down);
  d["targets_valid"] = lab.targets_valid;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "seismic monitoring with a frozen GPT-2 backbone (C++ core)";

  // ---- labels / codecs -----------------------------------------------------
  m.def(
      "make_pick_label",
      [](int64_t length, int64_t pick_index, double sample_rate) {
        return vec_to_array(data::make_pick_label(length, pick_index,
                                                  sample_rate));
      },
      py::arg("length"), py::arg("pick_index"), py::arg("sample_rate"),
      "Truncated-Gaussian pick probability sequence (sigma 0.1 s, +/-0.25 s)");
  m.def("encode_azimuth", &data::encode_azimuth, py::arg("theta_deg"));
  m.def("decode_azimuth", &data::decode_azimuth, py::arg("sin"), py::arg("cos"));
  m.def(
      "scale_target",
      [](double v, double lo, double hi) { return data::scale_target(v, lo, hi); },
      py::arg("value"), py::arg("lo"), py::arg("hi"));
  m.def(
      "unscale_output",
      [](double u, double lo, double hi) {
        return data::unscale_output(u, lo, hi);
      },
      py::arg("u"), py::arg("lo"), py::arg("hi"));

  // ---- synthetic data ------------------------------------------------------
  m.def(
      "synth_event",
      [](double magnitude, double distance_km, double back_azimuth_deg,
         const std::string& polarity, double noise_level, uint64_t seed,
         int64_t length, double sample_rate) {
        data::SynthEventParams p;
        p.magnitude = magnitude;
        p.distance_km = distance_km;
        p.back_azimuth_deg = back_azimuth_deg;
        p.polarity = data::polarity_from_string(polarity);
        p.noise_level = noise_level;
        auto [rec, lab] = data::synth_event(p, seed, length, sample_rate);
        py::dict d;
        d["trace"] = trace_to_array(rec);
        d["p_index"] = *rec.p_index;
        d["s_index"] = *rec.s_index;
        d["labels"] = labels_to_dict(lab);
        return d;
      },
      py::arg("magnitude"), py::arg("distance_km"), py::arg("back_azimuth_deg"),
      py::arg("polarity") = "up", py::arg("noise_level") = 0.05,
      py::arg("seed") = 0, py::arg("length") = 6144,
      py::arg("sample_rate") = 100.0);
  m.def("synth_sp_offset", &data::synth_sp_offset, py::arg("distance_km"),
        py::arg("sample_rate"));

  // ---- augmentation --------------------------------------------------------
  py::class_<augment::AugmentationSpec>(m, "AugmentationSpec")
      .def(py::init<>())
      .def_readwrite("p_gaussian_noise",
                     &augment::AugmentationSpec::p_gaussian_noise)
      .def_readwrite("p_time_drift", &augment::AugmentationSpec::p_time_drift)
      .def_readwrite("p_gaps", &augment::AugmentationSpec::p_gaps)
      .def_readwrite("p_channel_dropout",
                     &augment::AugmentationSpec::p_channel_dropout)
      .def_readwrite("p_amplitude_scale",
                     &augment::AugmentationSpec::p_amplitude_scale)
      .def_readwrite("p_pre_emphasis",
                     &augment::AugmentationSpec::p_pre_emphasis)
      .def_readwrite("p_noise_generation",
                     &augment::AugmentationSpec::p_noise_generation)
      .def_readwrite("protect_z", &augment::AugmentationSpec::protect_z);
  m.def(
      "apply_pipeline",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> trace,
         double sample_rate, std::optional<int64_t> p_index,
         std::optional<int64_t> s_index, const augment::AugmentationSpec& spec,
         uint64_t seed) {
        data::WaveformRecord rec = record_from_array(trace, sample_rate);
        rec.p_index = p_index;
        rec.s_index = s_index;
        data::SampleLabels lab = data::build_labels(rec, {});
        Rng rng(seed);
        auto res = augment::apply_pipeline(rec, lab, spec, rng);
        py::dict d;
        d["trace"] = trace_to_array(res.record);
        d["applied"] = res.applied;
        d["p_index"] = res.record.p_index
                           ? py::cast(*res.record.p_index)
                           : py::none().cast<py::object>();
        d["s_index"] = res.record.s_index
                           ? py::cast(*res.record.s_index)
                           : py::none().cast<py::object>();
        d["targets_valid"] = res.labels.targets_valid;
        return d;
      },
      py::arg("trace"), py::arg("sample_rate"), py::arg("p_index") = py::none(),
      py::arg("s_index") = py::none(),
      py::arg("spec") = augment::AugmentationSpec{}, py::arg("seed") = 0);

  // ---- latent patching -----------------------------------------------------
  m.def(
      "latent_patch",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> feat,
         int patch) {
        if (feat.ndim() != 2)
          throw std::invalid_argument("features must be [C, T]");
        nn::Tensor f = nn::Tensor::from_data(
            {1, static_cast<int64_t>(feat.shape(0)),
             static_cast<int64_t>(feat.shape(1))},
            std::vector<double>(feat.data(), feat.data() + feat.size()));
        nn::Tensor tok = nn::latent_patch(f, patch);
        py::array_t<double> out({static_cast<py::ssize_t>(tok.dim(1)),
                                 static_cast<py::ssize_t>(tok.dim(2))});
        std::copy(tok.data(), tok.data() + tok.numel(), out.mutable_data());
        return out;
      },
      py::arg("features"), py::arg("patch") = 8);
  m.def(
      "latent_unpatch",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> tok,
         int64_t channels, int patch) {
        if (tok.ndim() != 2)
          throw std::invalid_argument("tokens must be [N, C*P]");
        nn::Tensor t = nn::Tensor::from_data(
            {1, static_cast<int64_t>(tok.shape(0)),
             static_cast<int64_t>(tok.shape(1))},
            std::vector<double>(tok.data(), tok.data() + tok.size()));
        nn::Tensor f = nn::latent_unpatch(t, channels, patch);
        py::array_t<double> out({static_cast<py::ssize_t>(f.dim(1)),
                                 static_cast<py::ssize_t>(f.dim(2))});
        std::copy(f.data(), f.data() + f.numel(), out.mutable_data());
        return out;
      },
      py::arg("tokens"), py::arg("channels"), py::arg("patch") = 8);

  // ---- losses / schedule ---------------------------------------------------
  m.def("bce_loss", &train::bce_loss, py::arg("pred"), py::arg("label"));
  m.def("picking_loss", &train::picking_loss, py::arg("pred_p"),
        py::arg("pred_s"), py::arg("label_p"), py::arg("label_s"));
  m.def("ce_loss", &train::ce_loss, py::arg("pred"), py::arg("onehot"));
  m.def("huber_loss", &train::huber_loss, py::arg("pred"), py::arg("truth"),
        py::arg("delta") = 1.0);
  m.def(
      "cyclic_lr",
      [](double progress, double lr_low, double lr_high, double cycle_epochs) {
        train::TrainConfig cfg;
        cfg.lr_low = lr_low;
        cfg.lr_high = lr_high;
        cfg.cycle_epochs = cycle_epochs;
        return train::cyclic_lr(progress, cfg);
      },
      py::arg("progress"), py::arg("lr_low") = 5e-4, py::arg("lr_high") = 1e-3,
      py::arg("cycle_epochs") = 10.0);
  m.def("early_stop", &train::early_stop, py::arg("val_losses"),
        py::arg("patience"));

  // ---- evaluation ----------------------------------------------------------
  m.def("extract_picks", &eval::extract_picks, py::arg("prob"),
        py::arg("threshold") = 0.3, py::arg("min_separation_s") = 1.0,
        py::arg("sample_rate") = 100.0);
  m.def(
      "match_picks",
      [](const std::vector<int64_t>& pred, const std::vector<int64_t>& truth,
         double tolerance_s, double sample_rate) {
        auto c = eval::match_picks(pred, truth, tolerance_s, sample_rate);
        py::dict d;
        d["tp"] = c.tp;
        d["fp"] = c.fp;
        d["fn"] = c.fn;
        d["residuals_s"] = vec_to_array(c.residuals_s);
        return d;
      },
      py::arg("pred"), py::arg("truth"), py::arg("tolerance_s") = 0.1,
      py::arg("sample_rate") = 100.0);
  m.def(
      "classification_metrics",
      [](int64_t tp, int64_t fp, int64_t fn) {
        auto c = eval::classification_metrics(tp, fp, fn);
        py::dict d;
        d["precision"] = c.precision;
        d["recall"] = c.recall;
        d["f1"] = c.f1;
        d["degenerate"] = c.degenerate;
        return d;
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"));
  m.def(
      "regression_metrics",
      [](const std::vector<double>& preds, const std::vector<double>& truths) {
        auto r = eval::regression_metrics(preds, truths);
        py::dict d;
        d["mae"] = r.mae;
        d["r2"] = r.r2;
        d["mean"] = r.mean;
        d["std"] = r.stddev;
        d["mape"] = r.mape;
        d["rmse"] = r.rmse;
        d["count"] = r.count;
        return d;
      },
      py::arg("preds"), py::arg("truths"));
  m.def("azimuth_residual", &geo::azimuth_residual, py::arg("pred_deg"),
        py::arg("true_deg"));
  m.def("locate_epicenter", &geo::locate_epicenter, py::arg("station_lat"),
        py::arg("station_lon"), py::arg("back_azimuth_deg"),
        py::arg("distance_km"));
  m.def("location_error_km", &geo::location_error_km, py::arg("lat1"),
        py::arg("lon1"), py::arg("lat2"), py::arg("lon2"));

  // ---- model ---------------------------------------------------------------
  py::class_<model::SeisMoLLM>(m, "Model")
      .def_static(
          "build",
          [](const std::string& task, const std::string& variant, int n_layers,
             const std::string& checkpoint, uint64_t seed) {
            model::ModelConfig cfg;
            cfg.task = model::task_from_string(task);
            cfg.variant = model::variant_from_string(variant);
            const int fixed = model::variant_layers(cfg.variant);
            cfg.n_layers = fixed >= 0 ? fixed : n_layers;
            cfg.init_seed = seed;
            std::unique_ptr<model::FileCheckpoint> src;
            if (!checkpoint.empty())
              src = std::make_unique<model::FileCheckpoint>(checkpoint);
            return model::build_model(cfg, src.get());
          },
          py::arg("task"), py::arg("variant") = "full", py::arg("n_layers") = 3,
          py::arg("checkpoint") = "", py::arg("seed") = 1)
      .def_static(
          "load",
          [](const std::string& path) { return model::SeisMoLLM::load(path); },
          py::arg("path"))
      .def(
          "forward",
          [](model::SeisMoLLM& self,
             py::array_t<double, py::array::c_style | py::array::forcecast>
                 wave) {
            return array_from_tensor(
                self.forward(tensor_from_array(wave), false, nullptr));
          },
          py::arg("wave"))
      .def("trainable_fraction", &model::SeisMoLLM::trainable_fraction)
      .def(
          "save",
          [](const model::SeisMoLLM& self, const std::string& path) {
            self.save(path);
          },
          py::arg("path"))
      .def_property_readonly("task", [](const model::SeisMoLLM& self) {
        return to_string(self.config().task);
      })
      .def_property_readonly("variant", [](const model::SeisMoLLM& self) {
        return to_string(self.config().variant);
      });

  m.def("write_surrogate_gpt2_checkpoint",
        &model::write_surrogate_gpt2_checkpoint, py::arg("path"),
        py::arg("n_layers") = 12, py::arg("seed") = 20250810);

  // ---- pipeline orchestration ----------------------------------------------
  m.def(
      "run_synth",
      [](const std::string& config_path, const std::vector<std::string>& ov) {
        return experiments::run_synth(
            experiments::ExperimentConfig::from_file(config_path, ov));
      },
      py::arg("config"), py::arg("overrides") = std::vector<std::string>{});
  m.def(
      "run_train",
      [](const std::string& config_path, const std::vector<std::string>& ov) {
        auto r = experiments::run_train(
            experiments::ExperimentConfig::from_file(config_path, ov));
        py::dict d;
        d["out_dir"] = r.out_dir;
        d["checkpoint"] = r.checkpoint_path;
        d["epochs"] = r.history.epochs.size();
        d["best_val_loss"] = r.history.best_val_loss;
        return d;
      },
      py::arg("config"), py::arg("overrides") = std::vector<std::string>{});
  m.def(
      "run_eval",
      [](const std::string& config_path, const std::vector<std::string>& ov) {
        auto r = experiments::run_eval(
            experiments::ExperimentConfig::from_file(config_path, ov));
        py::dict d;
        d["report_dir"] = r.report_dir;
        return d;
      },
      py::arg("config"), py::arg("overrides") = std::vector<std::string>{});

  m.attr("__version__") = "0.1.0";
}
