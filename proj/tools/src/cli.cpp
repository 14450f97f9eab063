#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "commands.hpp"
#include "lithofield/error.hpp"

namespace lithofield::cli {

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::numeric: return 4;
    case ErrorKind::dimension:
    case ErrorKind::data:
    case ErrorKind::format: return 3;
  }
  return 3;
}

struct Overrides {
  std::string config;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> engine;
  std::optional<std::string> pe;
  std::optional<std::size_t> r;
  std::optional<std::size_t> kernel_dim;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> checkpoint_every;
  std::optional<std::string> out;
  std::optional<std::string> manifest;
  std::optional<std::string> kernels;
  std::optional<std::string> mask;
};

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.threads) {
    cfg.threads = *o.threads;
    cfg.train.threads = *o.threads;
  }
  if (o.seed) {
    cfg.train.seed = *o.seed;
    cfg.dataset.seed = *o.seed;
  }
  if (o.engine) cfg.engine = engine_from_string(*o.engine);
  if (o.pe) cfg.network.encoder.kind = encoding_from_string(*o.pe);
  if (o.r) cfg.train.r = *o.r;
  if (o.kernel_dim) cfg.train.kernel_dims = KernelDims{*o.kernel_dim, *o.kernel_dim};
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.checkpoint_every) cfg.checkpoint_every = *o.checkpoint_every;
  if (o.out) cfg.out = *o.out;
  if (o.manifest) cfg.manifest = *o.manifest;
  if (o.kernels) cfg.kernels = *o.kernels;
  if (o.mask) cfg.mask = *o.mask;
  cfg.validate();
  return cfg;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Learned optical kernels for lithography simulation"};
  app.require_subcommand(1);
  Overrides o;
  bool self_check = false;
  std::string split = "test";

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--threads", o.threads, "Worker threads");
    sub->add_option("--seed", o.seed, "Seed for data generation and training");
    sub->add_option("--out", o.out, "Output directory");
  };
  auto* gen = app.add_subcommand("gen-dataset", "Generate masks and oracle ground truth");
  common(gen);
  auto* sim = app.add_subcommand("simulate", "Oracle aerial and resist images for one mask");
  common(sim);
  sim->add_option("--engine", o.engine, "socs or abbe")->check(CLI::IsMember({"socs", "abbe"}));
  sim->add_option("--mask", o.mask, "Mask PGM");
  auto* trn = app.add_subcommand("train", "Fit the kernel network to a dataset");
  common(trn);
  auto* prd = app.add_subcommand("predict", "Aerial and resist images from stored kernels");
  common(prd);
  prd->add_option("--kernels", o.kernels, "NKRN kernel file");
  prd->add_option("--mask", o.mask, "Mask PGM");
  auto* evl = app.add_subcommand("eval", "Score kernels on a dataset split");
  common(evl);
  evl->add_option("--kernels", o.kernels, "NKRN kernel file");
  evl->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  evl->add_flag("--self-check", self_check, "Score the stored truth against itself");
  auto* bch = app.add_subcommand("bench", "Throughput of truncated vs near-full-rank kernels");
  common(bch);
  bch->add_option("--kernels", o.kernels, "NKRN kernel file (default: oracle truncated to --r)");
  auto* abl = app.add_subcommand("ablate", "Kernel-size and encoding sweeps");
  common(abl);

  for (auto* sub : {trn, bch, abl}) sub->add_option("--r", o.r, "Kernel order");
  for (auto* sub : {trn, abl}) {
    sub->add_option("--pe", o.pe, "Positional encoding")->check(CLI::IsMember({"none", "nerf", "rff"}));
    sub->add_option("--kernel-dim", o.kernel_dim, "Square kernel size (odd)");
    sub->add_option("--epochs", o.epochs, "Training epochs");
  }
  trn->add_option("--checkpoint-every", o.checkpoint_every, "Also write an NMLP snapshot every k epochs");
  for (auto* sub : {trn, evl, bch, abl}) sub->add_option("--manifest", o.manifest, "Dataset manifest.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = resolve(o);
    std::ostream& log = std::cout;
    if (*gen) return cmd_gen_dataset(cfg, log);
    if (*sim) return cmd_simulate(cfg, log);
    if (*trn) return cmd_train(cfg, log);
    if (*prd) return cmd_predict(cfg, log);
    if (*evl) return cmd_eval(cfg, self_check, split, log);
    if (*bch) return cmd_bench(cfg, log);
    if (*abl) return cmd_ablate(cfg, log);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}

}  // namespace lithofield::cli
