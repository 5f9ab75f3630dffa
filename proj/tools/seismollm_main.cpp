#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "seismo/config.hpp"
#include "seismo/eval.hpp"
#include "seismo/experiments.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string checkpoint;
  std::string device;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "experiment config file")
      ->required();
  sub->add_option("--override", args.overrides,
                  "config overrides as section.key=value (bare keys allowed "
                  "when unique)");
  sub->add_option("--out", args.out_dir, "output directory override");
  sub->add_option("--checkpoint", args.checkpoint,
                  "checkpoint path override (pretrained weights for train, "
                  "trained model archive for eval)");
  sub->add_option("--device", args.device, "compute device (cpu)");
}

seismo::experiments::ExperimentConfig load_config(const CommonArgs& args) {
  using seismo::experiments::ExperimentConfig;
  auto cfg = ExperimentConfig::from_file(args.config_path, args.overrides);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (!args.checkpoint.empty()) cfg.checkpoint = args.checkpoint;
  if (!args.device.empty()) {
    if (args.device != "cpu")
      throw seismo::config::ConfigError("only --device cpu is supported");
    cfg.device = args.device;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seismollm: seismic monitoring with a frozen GPT-2 backbone"};
  app.require_subcommand(1);

  CommonArgs synth_args, train_args, eval_args, ablate_args, report_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic dataset store + manifest");
  add_common(synth, synth_args);
  CLI::App* train =
      app.add_subcommand("train", "fit a task model and persist the best "
                                  "checkpoint");
  add_common(train, train_args);
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "evaluate a trained checkpoint and emit metric reports");
  add_common(eval_cmd, eval_args);
  CLI::App* ablate = app.add_subcommand(
      "ablate", "train + evaluate the configured variant matrix");
  add_common(ablate, ablate_args);
  CLI::App* report = app.add_subcommand(
      "report", "re-render reports from dumped residuals");
  add_common(report, report_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) {
      auto cfg = load_config(synth_args);
      const std::string manifest = seismo::experiments::run_synth(cfg);
      std::printf("synth: wrote %lld traces, manifest at %s\n",
                  static_cast<long long>(cfg.synth.n), manifest.c_str());
    } else if (train->parsed()) {
      auto cfg = load_config(train_args);
      auto r = seismo::experiments::run_train(cfg);
      const auto& h = r.history;
      std::printf("train: %zu epochs, best val loss %.6g at epoch %d, "
                  "checkpoint %s\n",
                  h.epochs.size(), h.best_val_loss, h.best_epoch,
                  r.checkpoint_path.c_str());
    } else if (eval_cmd->parsed()) {
      auto cfg = load_config(eval_args);
      auto r = seismo::experiments::run_eval(cfg);
      std::printf("eval: report written to %s\n", r.report_dir.c_str());
    } else if (ablate->parsed()) {
      auto cfg = load_config(ablate_args);
      auto rs = seismo::experiments::run_matrix(cfg);
      for (const auto& r : rs)
        std::printf("ablate: %s -> %s\n", r.out_dir.c_str(),
                    r.report_dir.c_str());
    } else if (report->parsed()) {
      auto cfg = load_config(report_args);
      const std::string dir =
          report_args.out_dir.empty()
              ? (cfg.out_dir + "/eval")
              : report_args.out_dir;
      seismo::eval::rerender_report(dir);
      std::printf("report: re-rendered %s\n", dir.c_str());
    }
  } catch (const seismo::config::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
