// Writes a randomly initialized checkpoint in the GPT-2-small safetensors
// layout (names, shapes, float32). Useful on machines without the published
// weight file; load-mapping and adapter tests work against either.
#include <CLI11.hpp>

#include <cstdio>

#include "seismo/model.hpp"

int main(int argc, char** argv) {
  CLI::App app{"write a surrogate GPT-2-small checkpoint (safetensors)"};
  std::string out = "gpt2.safetensors";
  int n_layers = 12;
  uint64_t seed = 20250810;
  app.add_option("--out", out, "output path");
  app.add_option("--layers", n_layers, "number of decoder blocks")
      ->check(CLI::Range(1, 12));
  app.add_option("--seed", seed, "rng seed");
  CLI11_PARSE(app, argc, argv);
  seismo::model::write_surrogate_gpt2_checkpoint(out, n_layers, seed);
  std::printf("wrote %d-layer surrogate checkpoint to %s\n", n_layers,
              out.c_str());
  return 0;
}
