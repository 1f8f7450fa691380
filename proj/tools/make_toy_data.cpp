#include <CLI11.hpp>
#include <cstdio>

#include "ludvae/toydata.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate a smooth-image toy dataset with a known degradation"};
  std::string out = "toy_data", mode = "awgn";
  ludvae::ToyDataConfig cfg;
  long seed = 7;
  app.add_option("--out", out, "output directory");
  app.add_option("--n", cfg.num_train, "training images per domain");
  app.add_option("--eval-pairs", cfg.num_eval_pairs, "held-out aligned pairs");
  app.add_option("--size", cfg.size, "image side length");
  app.add_option("--sigma", cfg.sigma, "AWGN std in [0,255] units");
  app.add_option("--mode", mode, "awgn or pg (Poisson-Gaussian)");
  app.add_option("--seed", seed, "dataset seed");
  CLI11_PARSE(app, argc, argv);
  cfg.noise = (mode == "pg") ? ludvae::ToyNoise::poisson_gaussian : ludvae::ToyNoise::awgn;
  cfg.seed = static_cast<std::uint64_t>(seed);
  ludvae::write_toy_dataset(out, cfg);
  std::printf("toy dataset written to %s\n", out.c_str());
  return 0;
}
