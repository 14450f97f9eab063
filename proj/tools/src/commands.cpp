#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <random>

#include "lithofield/datagen.hpp"
#include "lithofield/error.hpp"
#include "lithofield/image_io.hpp"
#include "lithofield/kernel_dims.hpp"
#include "lithofield/optics.hpp"
#include "lithofield/trainer.hpp"

namespace lithofield::cli {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double area_um2(const RealGrid& g, double pixel_nm) {
  return static_cast<double>(g.rows() * g.cols()) * pixel_nm * pixel_nm * 1e-6;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

void echo_config(const StagedOutput& out, const RunConfig& cfg) {
  write_text(out.file("config.json"), to_json(cfg).dump(2) + "\n");
}

void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("no ") + what + " given");
}

ImagingMeta meta_of(const ImagingConfig& c) {
  return {c.wavelength_nm, c.numerical_aperture, c.pixel_size_nm};
}

std::vector<TrainingSample> training_samples(const std::vector<LoadedSample>& loaded) {
  std::vector<TrainingSample> out;
  out.reserve(loaded.size());
  for (const auto& s : loaded) out.push_back({s.mask, s.aerial});
  return out;
}

// Every nonzero eigenpair of the oracle; equals Abbe summation up to round-off.
KernelStack full_rank_kernels(const ImagingConfig& imaging, std::size_t px) {
  const OracleModel model = OracleModel::build(imaging, px, px);
  const auto& ev = model.spectrum.eigenvalues;
  std::size_t r = 0;
  while (r < static_cast<std::size_t>(ev.size()) && ev(static_cast<Eigen::Index>(r)) > 0) ++r;
  return model.spectrum.kernels(std::max<std::size_t>(r, 1), imaging.kernel_metadata());
}

}  // namespace

StagedOutput::StagedOutput(fs::path out) : out_(std::move(out)) {
  fs::create_directories(out_);
  staging_ = out_ / (".staging-" + std::to_string(std::random_device{}()));
  fs::create_directories(staging_);
}

StagedOutput::~StagedOutput() {
  if (!committed_) {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
}

void StagedOutput::commit() {
  for (const auto& entry : fs::directory_iterator(staging_)) {
    fs::rename(entry.path(), out_ / entry.path().filename());
  }
  fs::remove(staging_);
  committed_ = true;
}

EvalReport evaluate_kernels(const KernelStack& kernels, const DatasetManifest& manifest,
                            const std::string& split, std::size_t threads) {
  EvalReport report;
  for (const LoadedSample& s : load_split(manifest, split)) {
    const RealGrid aerial = socs_image(kernels, s.mask, threads);
    const RealGrid resist = resist_image(aerial, manifest.threshold);
    report.samples.push_back(evaluate_sample(s.name, s.aerial, aerial, s.resist, resist));
  }
  finalize_report(report);
  return report;
}

int cmd_gen_dataset(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  DatasetRequest req;
  req.n_train = cfg.dataset.n_train;
  req.n_test = cfg.dataset.n_test;
  req.train_spec = cfg.dataset.train_mask;
  req.test_spec = cfg.dataset.test_mask;
  req.seed = cfg.dataset.seed;
  for (MaskSpec* s : {&req.train_spec, &req.test_spec}) {
    s->validate(cfg.imaging.wavelength_nm, cfg.imaging.numerical_aperture);
  }
  StagedOutput out(cfg.out);
  const auto t0 = Clock::now();
  const DatasetManifest m = build_dataset(req, cfg.imaging, cfg.threshold, out.file(""), cfg.threads);
  echo_config(out, cfg);
  out.commit();
  log << "wrote " << m.records.size() << " samples (" << req.n_train << " train, " << req.n_test
      << " test) to " << cfg.out.string() << "; oracle rank " << m.oracle_rank << ", "
      << std::fixed << std::setprecision(1) << seconds_since(t0) << " s\n";
  return 0;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  require_path(cfg.mask, "--mask");
  const RealGrid mask = load_pgm_mask(cfg.mask);
  if (mask.rows() != mask.cols()) throw DimensionError("simulation needs a square mask");
  StagedOutput out(cfg.out);
  const auto t0 = Clock::now();
  RealGrid aerial;
  if (cfg.engine == Engine::abbe) {
    aerial = abbe_image(build_source(cfg.imaging), build_pupil(cfg.imaging), mask,
                        cfg.imaging.pixel_size_nm, cfg.threads);
  } else {
    const KernelStack kernels = full_rank_kernels(cfg.imaging, mask.rows());
    aerial = socs_image(kernels, mask, cfg.threads);
    save_nkrn(out.file("kernels.nkrn"), kernels);
  }
  const double secs = seconds_since(t0);
  save_pfm(out.file("aerial.pfm"), aerial);
  save_pgm_mask(out.file("resist.pgm"), resist_image(aerial, cfg.threshold));
  echo_config(out, cfg);
  out.commit();
  log << "engine " << to_string(cfg.engine) << ": " << std::fixed << std::setprecision(3) << secs
      << " s\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  require_path(cfg.manifest, "--manifest");
  const DatasetManifest m = load_manifest(cfg.manifest);
  const auto train_set = training_samples(load_split(m, "train"));
  const auto val_set = training_samples(load_split(m, "test"));
  if (train_set.empty()) throw DataError("manifest has no train samples");
  TrainConfig tcfg = cfg.train;
  tcfg.threads = cfg.threads;

  StagedOutput out(cfg.out);
  const KernelDims dims = resolve_kernel_dims(tcfg, meta_of(m.imaging), train_set.front().mask.rows(),
                                              train_set.front().mask.cols());
  const TrainResult res = train(train_set, val_set, meta_of(m.imaging), tcfg, cfg.network,
                                [&](const EpochLog& e, const CMlpParams& params) {
                                  if (cfg.checkpoint_every > 0 && (e.epoch + 1) % cfg.checkpoint_every == 0) {
                                    char name[48];
                                    std::snprintf(name, sizeof name, "checkpoint_epoch_%04zu.nmlp", e.epoch + 1);
                                    const fs::path tmp = out.file(name);
                                    save_nmlp(tmp, Checkpoint{params, cfg.network.encoder, dims.rows, dims.cols});
                                    fs::rename(tmp, out.final_dir() / name);
                                  }
                                  log << "epoch " << e.epoch << " loss " << std::scientific
                                      << std::setprecision(4) << e.mean_loss << " val_psnr "
                                      << std::fixed << std::setprecision(2) << e.val_psnr_db
                                      << " dB  " << std::setprecision(1) << e.wall_seconds << " s\n"
                                      << std::flush;
                                });
  if (res.diverged) throw NumericError("training diverged: " + res.diagnostic);
  save_nmlp(out.file("checkpoint.nmlp"),
            Checkpoint{res.params, cfg.network.encoder, res.dims.rows, res.dims.cols});
  save_nkrn(out.file("kernels.nkrn"), res.kernels);
  {
    std::ofstream csv(out.file("train_log.csv"));
    write_training_log_csv(csv, res.log);
    if (!csv) throw DataError("cannot write training log");
  }
  echo_config(out, cfg);
  out.commit();
  log << "kernels " << res.kernels.order() << " x " << res.dims.rows << "x" << res.dims.cols
      << " written to " << cfg.out.string() << "\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  require_path(cfg.kernels, "--kernels");
  require_path(cfg.mask, "--mask");
  const KernelStack kernels = load_nkrn(cfg.kernels);
  const RealGrid mask = load_pgm_mask(cfg.mask);
  StagedOutput out(cfg.out);
  const auto t0 = Clock::now();
  const RealGrid aerial = socs_image(kernels, mask, cfg.threads);
  const double secs = seconds_since(t0);
  save_pfm(out.file("aerial.pfm"), aerial);
  save_pgm_mask(out.file("resist.pgm"), resist_image(aerial, cfg.threshold));
  echo_config(out, cfg);
  out.commit();
  const double area = area_um2(mask, kernels.meta.pixel_size_nm);
  log << "throughput: " << std::setprecision(6) << area / std::max(secs, 1e-12) << " um^2/s ("
      << area << " um^2 in " << secs << " s)\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, bool self_check, const std::string& split, std::ostream& log) {
  cfg.validate();
  require_path(cfg.manifest, "--manifest");
  const DatasetManifest m = load_manifest(cfg.manifest);
  EvalReport report;
  if (self_check) {
    for (const LoadedSample& s : load_split(m, split)) {
      report.samples.push_back(evaluate_sample(s.name, s.aerial, s.aerial, s.resist, s.resist));
    }
    finalize_report(report);
  } else {
    require_path(cfg.kernels, "--kernels");
    report = evaluate_kernels(load_nkrn(cfg.kernels), m, split, cfg.threads);
  }
  StagedOutput out(cfg.out);
  {
    std::ofstream csv(out.file("report.csv"));
    write_report_csv(csv, report);
    if (!csv) throw DataError("cannot write report");
  }
  write_text(out.file("report.json"), report_json(report));
  echo_config(out, cfg);
  out.commit();
  log << split << " samples " << report.count() << ": psnr " << std::fixed << std::setprecision(2)
      << report.mean.psnr_db << " dB, mse " << std::scientific << std::setprecision(3)
      << report.mean.mse << ", miou " << std::fixed << std::setprecision(4) << report.mean.miou
      << ", mpa " << report.mean.mpa << "\n";
  return 0;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "model,order,threads,images,image_px,seconds,um2_per_s,speedup\n";
  out << std::setprecision(9);
  for (const auto& r : rows) {
    out << r.model << ',' << r.order << ',' << r.threads << ',' << r.images << ',' << r.image_px
        << ',' << r.seconds << ',' << r.um2_per_s << ',' << r.speedup << '\n';
  }
}

std::vector<BenchRow> run_bench(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  require_path(cfg.manifest, "--manifest");
  const DatasetManifest m = load_manifest(cfg.manifest);
  std::vector<LoadedSample> samples = load_split(m, "test");
  if (samples.empty()) samples = load_split(m, "train");
  if (samples.empty()) throw DataError("manifest has no samples to benchmark");
  if (samples.size() > cfg.bench.max_masks) samples.resize(cfg.bench.max_masks);

  const TruthRenderer oracle(m.imaging, m.image_px, m.threshold);
  const KernelStack truncated = cfg.kernels.empty() ? oracle.kernels().truncated(std::min(cfg.train.r, oracle.rank()))
                                                    : load_nkrn(cfg.kernels);
  double area = 0;
  for (const auto& s : samples) area += area_um2(s.mask, m.imaging.pixel_size_nm);

  auto time_stack = [&](const KernelStack& k, std::size_t threads) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t rep = 0; rep < cfg.bench.repeats; ++rep) {
      const auto t0 = Clock::now();
      for (const auto& s : samples) {
        const RealGrid a = socs_image(k, s.mask, threads);
        if (!std::isfinite(a(0, 0))) throw NumericError("non-finite prediction during benchmark");
      }
      best = std::min(best, seconds_since(t0));
    }
    return best;
  };

  std::vector<BenchRow> rows;
  for (std::size_t t : cfg.bench.threads) {
    const double t_oracle = time_stack(oracle.kernels(), t);
    const double t_trunc = time_stack(truncated, t);
    rows.push_back({"truncated", truncated.order(), t, samples.size(), m.image_px, t_trunc,
                    area / t_trunc, t_oracle / t_trunc});
    rows.push_back({"oracle", oracle.rank(), t, samples.size(), m.image_px, t_oracle,
                    area / t_oracle, 1.0});
    log << "threads " << t << ": r=" << truncated.order() << " " << std::setprecision(4)
        << area / t_trunc << " um^2/s, oracle r=" << oracle.rank() << " " << area / t_oracle
        << " um^2/s, speedup " << t_oracle / t_trunc << "\n";
  }
  return rows;
}

int cmd_bench(const RunConfig& cfg, std::ostream& log) {
  const auto rows = run_bench(cfg, log);
  StagedOutput out(cfg.out);
  {
    std::ofstream csv(out.file("bench.csv"));
    write_bench_csv(csv, rows);
    if (!csv) throw DataError("cannot write bench.csv");
  }
  echo_config(out, cfg);
  out.commit();
  return 0;
}

std::vector<std::size_t> default_ablation_dims(std::size_t m_star) {
  std::size_t half = (m_star + 1) / 2;
  if (half % 2 == 0) ++half;
  return {m_star, m_star + 8, half};
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "sweep,encoding,kernel_rows,kernel_cols,psnr_db,miou,mse,seconds\n";
  out << std::setprecision(9);
  for (const auto& r : rows) {
    out << r.sweep << ',' << to_string(r.encoding) << ',' << r.dims.rows << ',' << r.dims.cols << ','
        << r.psnr_db << ',' << r.miou << ',' << r.mse << ',' << r.seconds << '\n';
  }
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  require_path(cfg.manifest, "--manifest");
  const DatasetManifest m = load_manifest(cfg.manifest);
  const auto train_set = training_samples(load_split(m, "train"));
  if (train_set.empty()) throw DataError("manifest has no train samples");
  const ImagingMeta meta = meta_of(m.imaging);
  const KernelDims star = kernel_dims(m.image_px, m.image_px, meta.wavelength_nm,
                                      meta.numerical_aperture, meta.pixel_size_nm);
  std::vector<std::size_t> dims = cfg.ablate.kernel_dims;
  if (dims.empty()) dims = default_ablation_dims(star.cols);

  std::map<std::pair<std::size_t, int>, AblationRow> cache;
  auto run = [&](std::size_t k, EncodingKind enc) {
    const auto key = std::pair{k, static_cast<int>(enc)};
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    TrainConfig tcfg = cfg.train;
    tcfg.threads = cfg.threads;
    tcfg.kernel_dims = KernelDims{k, k};
    if (cfg.ablate.epochs > 0) tcfg.epochs = cfg.ablate.epochs;
    NetworkConfig net = cfg.network;
    net.encoder.kind = enc;
    const auto t0 = Clock::now();
    const TrainResult res = train(train_set, {}, meta, tcfg, net);
    if (res.diverged) throw NumericError("ablation run diverged: " + res.diagnostic);
    const EvalReport rep = evaluate_kernels(res.kernels, m, "test", cfg.threads);
    AblationRow row{"", enc, res.dims, rep.mean.psnr_db, rep.mean.miou, rep.mean.mse, seconds_since(t0)};
    log << "kernel " << k << "x" << k << " encoding " << to_string(enc) << ": psnr " << std::fixed
        << std::setprecision(2) << row.psnr_db << " dB, miou " << std::setprecision(4) << row.miou
        << " (" << std::setprecision(0) << row.seconds << " s)\n"
        << std::flush;
    cache.emplace(key, row);
    return row;
  };

  std::vector<AblationRow> rows;
  for (std::size_t k : dims) {
    AblationRow r = run(k, cfg.network.encoder.kind);
    r.sweep = "kernel_dim";
    rows.push_back(r);
  }
  for (EncodingKind enc : cfg.ablate.encodings) {
    AblationRow r = run(star.cols, enc);
    r.sweep = "encoding";
    rows.push_back(r);
  }
  return rows;
}

int cmd_ablate(const RunConfig& cfg, std::ostream& log) {
  const auto rows = run_ablation(cfg, log);
  StagedOutput out(cfg.out);
  {
    std::ofstream csv(out.file("ablation.csv"));
    write_ablation_csv(csv, rows);
    if (!csv) throw DataError("cannot write ablation.csv");
  }
  echo_config(out, cfg);
  out.commit();
  return 0;
}

}  // namespace lithofield::cli
