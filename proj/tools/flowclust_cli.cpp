// flowclust — run one pipeline stage from a JSON config.
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "flowclust/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"order-flow clustering and imbalance-signal pipeline"};
  std::string config_path;
  std::string stage = "all";
  int workers = 1;
  std::uint64_t seed = 0;
  std::string out_dir;

  app.add_option("--config", config_path, "JSON config file (default config when omitted)")
      ->envname("FLOWCLUST_CONFIG");
  app.add_option("--stage", stage, "synth | features | cluster | signals | roles | backtest | all")
      ->envname("FLOWCLUST_STAGE");
  const auto* workers_opt = app.add_option("--workers", workers, "worker thread count");
  const auto* seed_opt = app.add_option("--seed", seed, "master seed override");
  const auto* out_opt = app.add_option("--out", out_dir, "output directory override");
  CLI11_PARSE(app, argc, argv);

  try {
    flowclust::PipelineConfig config = config_path.empty()
                                           ? flowclust::default_config()
                                           : flowclust::load_config(config_path);
    flowclust::apply_env_overrides(config);
    if (workers_opt->count() > 0) config.workers = workers;
    if (seed_opt->count() > 0) config.seed = seed;
    if (out_opt->count() > 0) config.out_dir = out_dir;
    return flowclust::run_stage(stage, config);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
}
