#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lithofield/kernel_stack.hpp"
#include "lithofield/metrics.hpp"
#include "run_config.hpp"

namespace lithofield::cli {

/// Output directory written through a hidden staging directory; files appear
/// under their final names only on commit().
class StagedOutput {
 public:
  explicit StagedOutput(std::filesystem::path out);
  ~StagedOutput();
  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;

  std::filesystem::path file(const std::string& name) const { return staging_ / name; }
  const std::filesystem::path& final_dir() const noexcept { return out_; }
  void commit();

 private:
  std::filesystem::path out_;
  std::filesystem::path staging_;
  bool committed_ = false;
};

/// Masks evaluated against their stored truth under the given kernels.
EvalReport evaluate_kernels(const KernelStack& kernels, const DatasetManifest& manifest,
                            const std::string& split, std::size_t threads);

struct BenchRow {
  std::string model;   // "truncated" or "oracle"
  std::size_t order = 0;
  std::size_t threads = 0;
  std::size_t images = 0;
  std::size_t image_px = 0;
  double seconds = 0;
  double um2_per_s = 0;
  double speedup = 0;  // throughput relative to the oracle at the same thread count
};

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);
std::vector<BenchRow> run_bench(const RunConfig& cfg, std::ostream& log);

struct AblationRow {
  std::string sweep;  // "kernel_dim" or "encoding"
  EncodingKind encoding = EncodingKind::rff;
  KernelDims dims{};
  double psnr_db = 0;
  double miou = 0;
  double mse = 0;
  double seconds = 0;
};

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);
std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::ostream& log);

/// Kernel sizes for the dimension sweep: m*, m* + 8 and the odd size nearest
/// to ceil(m*/2), rounding up on ties.
std::vector<std::size_t> default_ablation_dims(std::size_t m_star);

int cmd_gen_dataset(const RunConfig& cfg, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, std::ostream& log);
int cmd_train(const RunConfig& cfg, std::ostream& log);
int cmd_predict(const RunConfig& cfg, std::ostream& log);
int cmd_eval(const RunConfig& cfg, bool self_check, const std::string& split, std::ostream& log);
int cmd_bench(const RunConfig& cfg, std::ostream& log);
int cmd_ablate(const RunConfig& cfg, std::ostream& log);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace lithofield::cli
