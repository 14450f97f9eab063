// End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "lithofield/datagen.hpp"
#include "lithofield/metrics.hpp"
#include "lithofield/optics.hpp"
#include "lithofield/trainer.hpp"
#include "oracles.hpp"
#include "property.hpp"

using namespace lithofield;
using namespace lithofield::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << std::endl;
}

void oracle_equivalence(const cli::RunConfig& cfg) {
  const auto t0 = Clock::now();
  const std::size_t px = 256;
  const OracleModel model = OracleModel::build(cfg.imaging, px, px);
  const auto& ev = model.spectrum.eigenvalues;
  std::size_t full = 0;
  while (full < static_cast<std::size_t>(ev.size()) && ev(static_cast<Eigen::Index>(full)) > 0) ++full;
  const std::size_t r = model.spectrum.rank_for_coverage(0.99999);
  const KernelStack k_cov = model.spectrum.kernels(r);
  const KernelStack k_full = model.spectrum.kernels(full);
  const PupilFunction pupil = build_pupil(cfg.imaging);
  double worst_cov = 0, worst_full = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    MaskSpec spec = cfg.dataset.train_mask;
    spec.style = i % 2 ? MaskStyle::metal : MaskStyle::via;
    spec.seed = 1000 + i;
    const RealGrid mask = gen_mask(spec);
    const RealGrid abbe = abbe_image(model.source, pupil, mask, cfg.imaging.pixel_size_nm);
    worst_cov = std::max(worst_cov, rel_l2(abbe, socs_image(k_cov, mask)));
    worst_full = std::max(worst_full, rel_l2(abbe, socs_image(k_full, mask)));
  }
  const double secs = since(t0);
  report(1, worst_cov < 1e-3 && worst_full < 1e-6 && secs < 300,
         fmt("20 masks 256x256; rank %zu of %zu at coverage 0.99999: max rel L2 %.2e; full rank: %.2e; %.1f s",
             r, full, worst_cov, worst_full, secs));
}

void tcc_brute_force() {
  ImagingConfig cfg;
  cfg.pixel_size_nm = 8.0;
  cfg.source_grid = 9;
  const SourceMap src = build_source(cfg);
  const PupilFunction pupil = build_pupil(cfg);
  const double step = frequency_step(256, cfg.pixel_size_nm);
  const TccMatrix tcc = assemble_tcc(src, pupil, 5, 5, step);
  const auto ref = brute_force_tcc(src.points, pupil.cutoff_frequency(), 5, 5, step);
  double diff = 0, herm = 0;
  const Eigen::Index d = tcc.entries.rows();
  for (Eigen::Index p = 0; p < d; ++p)
    for (Eigen::Index q = 0; q < d; ++q) {
      diff = std::max(diff, std::abs(tcc.entries(p, q) - ref[static_cast<std::size_t>(p)][static_cast<std::size_t>(q)]));
      herm = std::max(herm, std::abs(tcc.entries(p, q) - std::conj(tcc.entries(q, p))));
    }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(tcc.entries);
  const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
  const bool count_ok = src.points.size() == count_annular_points(9, 0.5, 0.8);
  report(2, count_ok && diff <= 1e-12 && herm <= 1e-12 && lmin >= -1e-10 * lmax,
         fmt("5x5 kernels, %zu source points: max abs diff %.2e, hermitian defect %.2e, min eigenvalue %.2e (max %.2e)",
             src.points.size(), diff, herm, lmin, lmax));
}

void gradient_check() {
  EncoderSpec enc;
  enc.kind = EncodingKind::rff;
  enc.rff_features = 4;
  enc.sigma = 5.0;
  const KernelDims dims{9, 9};
  const auto widths = mlp_widths(enc.width(), 8, 1, 4);
  const CMlpParams p = init_params(widths, 101);
  Rng rng(102);
  const RealGrid mask = random_binary_grid(rng, 32, 32, 0.3);
  const RealGrid truth = forward_predict(init_params(widths, 103), enc, mask, dims);
  const LossAndGrad lg = loss_and_grad(p, enc, mask, truth, dims);
  const double h = 1e-6;
  double worst = 0;
  const int probes = 64;
  for (int i = 0; i < probes; ++i) {
    const std::size_t layer = uniform_size(rng, 0, p.layers.size() - 1);
    const bool bias = uniform_size(rng, 0, 3) == 0;
    const bool imag = uniform_size(rng, 0, 1) == 1;
    const auto& W = p.layers[layer].weight;
    const auto a = static_cast<Eigen::Index>(uniform_size(rng, 0, static_cast<std::size_t>(W.rows()) - 1));
    const auto b = static_cast<Eigen::Index>(uniform_size(rng, 0, static_cast<std::size_t>(W.cols()) - 1));
    auto perturbed = [&](double delta) {
      CMlpParams q = p;
      cplx& z = bias ? q.layers[layer].bias(a) : q.layers[layer].weight(a, b);
      z += imag ? cplx(0, delta) : cplx(delta, 0);
      return loss(forward_predict(q, enc, mask, dims), truth);
    };
    const double numeric = (perturbed(h) - perturbed(-h)) / (2 * h);
    const cplx g = bias ? lg.grad.layers[layer].bias(a) : lg.grad.layers[layer].weight(a, b);
    const double analytic = imag ? g.imag() : g.real();
    worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
  }
  report(3, worst < 1e-4, fmt("%d components, 32x32 mask, 9x9 kernels, r=4: max relative error %.2e", probes, worst));
}

struct Trained {
  KernelStack kernels;
  EvalReport test;
  double seconds = 0;
};

Trained train_model(const cli::RunConfig& cfg, const DatasetManifest& m, KernelDims dims, EncodingKind enc) {
  TrainConfig tcfg = cfg.train;
  tcfg.kernel_dims = dims;
  tcfg.threads = cfg.threads;
  NetworkConfig net = cfg.network;
  net.encoder.kind = enc;
  std::vector<TrainingSample> train_set;
  for (auto& s : load_split(m, "train")) train_set.push_back({std::move(s.mask), std::move(s.aerial)});
  const ImagingMeta meta{m.imaging.wavelength_nm, m.imaging.numerical_aperture, m.imaging.pixel_size_nm};
  const auto t0 = Clock::now();
  TrainResult res = train(train_set, {}, meta, tcfg, net);
  Trained out;
  out.seconds = since(t0);
  if (res.diverged) throw NumericError("training diverged: " + res.diagnostic);
  out.kernels = std::move(res.kernels);
  out.test = cli::evaluate_kernels(out.kernels, m, "test", cfg.threads);
  std::cerr << "  trained " << to_string(enc) << " " << dims.rows << "x" << dims.cols << ": PSNR "
            << out.test.mean.psnr_db << " dB, mIOU " << out.test.mean.miou << ", " << out.seconds << " s\n";
  return out;
}

DatasetManifest dataset(const cli::RunConfig& cfg, const fs::path& dir, std::size_t n_train, std::size_t n_test,
                        MaskStyle test_style, std::uint64_t seed) {
  if (fs::exists(dir / "manifest.json")) {
    const DatasetManifest m = load_manifest(dir / "manifest.json");
    if (m.split("train").size() == n_train && m.split("test").size() == n_test &&
        m.imaging.pixel_size_nm == cfg.imaging.pixel_size_nm && m.imaging.source_grid == cfg.imaging.source_grid)
      return m;
  }
  fs::remove_all(dir);
  DatasetRequest req;
  req.n_train = n_train;
  req.n_test = n_test;
  req.train_spec = cfg.dataset.train_mask;
  req.test_spec = cfg.dataset.train_mask;
  req.test_spec.style = test_style;
  req.seed = seed;
  return build_dataset(req, cfg.imaging, cfg.threshold, dir, cfg.threads);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work = (fs::temp_directory_path() / "lithofield_acceptance").string();
  std::size_t threads = 1;
  app.add_option("--work", work, "Working directory for datasets");
  app.add_option("--threads", threads, "Training and evaluation threads");
  CLI11_PARSE(app, argc, argv);

  cli::RunConfig cfg;
  cfg.threads = threads;
  fs::create_directories(work);
  std::cout << "imaging: pixel " << cfg.imaging.pixel_size_nm << " nm, source grid " << cfg.imaging.source_grid
            << ", network " << cfg.network.hidden_width << "x" << cfg.network.hidden_blocks << ", r=" << cfg.train.r
            << ", " << cfg.train.epochs << " epochs" << std::endl;

  auto guarded = [](int id, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
  };

  guarded(1, [&] { oracle_equivalence(cfg); });
  guarded(2, [] { tcc_brute_force(); });
  guarded(3, [] { gradient_check(); });

  DatasetManifest in_dist, ood;
  bool have_data = false;
  try {
    in_dist = dataset(cfg, fs::path(work) / "via", 64, 16, MaskStyle::via, 2024);
    ood = dataset(cfg, fs::path(work) / "metal", 0, 16, MaskStyle::metal, 4048);
    have_data = true;
  } catch (const std::exception& e) {
    for (int id = 4; id <= 8; ++id) report(id, false, std::string("dataset generation failed: ") + e.what());
  }

  if (have_data) {
    const std::size_t px = in_dist.image_px;
    const KernelDims star = kernel_dims(px, px, in_dist.imaging.wavelength_nm, in_dist.imaging.numerical_aperture,
                                        in_dist.imaging.pixel_size_nm);
    const auto sizes = cli::default_ablation_dims(star.cols);
    std::map<std::pair<std::size_t, EncodingKind>, Trained> runs;
    auto run = [&](std::size_t d, EncodingKind e) -> const Trained& {
      auto key = std::make_pair(d, e);
      if (!runs.count(key)) runs.emplace(key, train_model(cfg, in_dist, {d, d}, e));
      return runs.at(key);
    };

    guarded(4, [&] {
      const Trained& t = run(star.cols, EncodingKind::rff);
      report(4, t.test.mean.psnr_db > 40.0 && t.test.mean.miou > 0.98 && t.seconds < 7200,
             fmt("64 train / 16 test via masks, kernels %zux%zu: PSNR %.2f dB, mIOU %.4f, training %.0f s",
                 star.rows, star.cols, t.test.mean.psnr_db, t.test.mean.miou, t.seconds));
    });
    guarded(5, [&] {
      const Trained& t = run(star.cols, EncodingKind::rff);
      const EvalReport o = cli::evaluate_kernels(t.kernels, ood, "test", cfg.threads);
      const double drop = 100.0 * (t.test.mean.miou - o.mean.miou);
      report(5, drop < 3.0,
             fmt("metal-style mIOU %.4f (PSNR %.2f dB) vs via %.4f: drop %.2f points", o.mean.miou, o.mean.psnr_db,
                 t.test.mean.miou, drop));
    });
    guarded(6, [&] {
      const double p_star = run(sizes[0], EncodingKind::rff).test.mean.psnr_db;
      const double p_big = run(sizes[1], EncodingKind::rff).test.mean.psnr_db;
      const double p_half = run(sizes[2], EncodingKind::rff).test.mean.psnr_db;
      report(6, p_big - p_star < 1.0 && p_star - p_half > 3.0,
             fmt("PSNR m*=%zu %.2f dB, %zu %.2f dB (gain %.2f), %zu %.2f dB (loss %.2f)", sizes[0], p_star, sizes[1],
                 p_big, p_big - p_star, sizes[2], p_half, p_star - p_half));
    });
    guarded(7, [&] {
      const double rff = run(star.cols, EncodingKind::rff).test.mean.psnr_db;
      const double nerf = run(star.cols, EncodingKind::nerf).test.mean.psnr_db;
      const double none = run(star.cols, EncodingKind::none).test.mean.psnr_db;
      report(7, rff >= nerf && nerf > none + 10.0,
             fmt("PSNR rff %.2f dB, nerf %.2f dB, none %.2f dB", rff, nerf, none));
    });
    guarded(8, [&] {
      cli::RunConfig b = cfg;
      b.manifest = fs::path(work) / "via" / "manifest.json";
      b.bench.threads = {4};
      std::ostringstream log;
      const auto rows = cli::run_bench(b, log);
      std::ostringstream csv;
      cli::write_bench_csv(csv, rows);
      const bool schema = csv.str().rfind("model,order,threads,images,image_px,seconds,um2_per_s,speedup\n", 0) == 0;
      const auto& trunc = rows.at(0);
      const auto& oracle = rows.at(1);
      const double need = (static_cast<double>(oracle.order) / static_cast<double>(trunc.order)) / 3.0;
      report(8, schema && trunc.model == "truncated" && oracle.model == "oracle" && trunc.image_px == 256 &&
                    trunc.speedup >= need,
             fmt("4 threads, %zu masks: r=%zu %.3g um^2/s vs oracle r=%zu %.3g um^2/s, speedup %.2f (need %.2f)",
                 trunc.images, trunc.order, trunc.um2_per_s, oracle.order, oracle.um2_per_s, trunc.speedup, need));
    });
  }

  guarded(9, [] {
    const auto results = run_all_properties(kDefaultCases);
    std::size_t bad = 0, min_cases = SIZE_MAX;
    std::string first;
    for (const auto& r : results) {
      min_cases = std::min(min_cases, r.cases);
      if (!r.ok()) {
        if (bad++ == 0) first = r.name + ": " + r.first_failure;
      }
    }
    report(9, bad == 0 && min_cases >= 200,
           fmt("%zu properties, at least %zu cases each, %zu failing%s%s", results.size(), min_cases, bad,
               bad ? "; first: " : "", first.c_str()));
  });

  std::cout << (failures == 0 ? "ALL PASS" : fmt("%d FAILED", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
