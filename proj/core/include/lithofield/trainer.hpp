#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lithofield/fft.hpp"
#include "lithofield/grid.hpp"
#include "lithofield/kernel_dims.hpp"
#include "lithofield/kernel_stack.hpp"
#include "lithofield/neural_field.hpp"

namespace lithofield {

enum class OptimizerKind { adam, sgd };
enum class Precision { f64, f32 };

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 4;
  double learning_rate = 1e-3;
  double final_learning_rate = 1e-5;  // cosine decay floor
  OptimizerKind optimizer = OptimizerKind::adam;
  AdamSettings adam;
  std::uint64_t seed = 0;
  std::size_t r = 24;
  std::optional<KernelDims> kernel_dims;  // overrides the passband rule
  Precision precision = Precision::f64;
  std::size_t threads = 1;

  void validate() const;
};

struct NetworkConfig {
  EncoderSpec encoder;
  std::size_t hidden_width = 128;
  std::size_t hidden_blocks = 2;
  double output_gain = 0.02;

  void validate() const;
};

/// Per-layer gradients w.r.t. (re, im) of every parameter, packed as
/// dL/d(re) + j dL/d(im). Shapes mirror CMlpParams.
struct GradientSet {
  std::vector<ComplexLinear> layers;

  static GradientSet zeros_like(const CMlpParams& params);
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double s);
};

/// Adam or SGD over the (re, im) pairs of every parameter. Adam keeps its
/// second moments as (re^2, im^2) packed into a complex value.
class ParameterOptimizer {
 public:
  ParameterOptimizer(const TrainConfig& cfg, const CMlpParams& params);
  void step(CMlpParams& params, const GradientSet& g, double lr);
  const GradientSet& first_moment() const noexcept { return m_; }
  const GradientSet& second_moment() const noexcept { return v_; }
  std::size_t steps() const noexcept { return t_; }

 private:
  OptimizerKind kind_;
  AdamSettings adam_;
  GradientSet m_, v_;
  std::size_t t_ = 0;
};

/// Mask and ground-truth aerial for one training clip.
struct TrainingSample {
  RealGrid mask;
  RealGrid aerial;
};

/// Optics metadata carried into exported kernel stacks.
struct ImagingMeta {
  double wavelength_nm = 193.0;
  double numerical_aperture = 1.35;
  double pixel_size_nm = 1.0;
};

/// Kernel support for a dataset: config override or the passband rule.
KernelDims resolve_kernel_dims(const TrainConfig& cfg, const ImagingMeta& meta,
                               std::size_t image_rows, std::size_t image_cols);

/// Learned aerial image: SOCS with the kernels the network predicts.
RealGrid forward_predict(const CMlpParams& params, const CMatrix& features, const RealGrid& mask,
                         KernelDims dims, std::size_t threads = 1);
RealGrid forward_predict(const CMlpParams& params, const EncoderSpec& encoder,
                         const RealGrid& mask, KernelDims dims, std::size_t threads = 1);

/// Mean squared pixel difference.
double loss(const RealGrid& predicted, const RealGrid& truth);

struct LossAndGrad {
  double loss = 0;
  GradientSet grad;
};

/// Loss of one (mask, truth) pair and its analytic gradient by reverse-mode
/// propagation through |.|^2, the inverse FFT, the spectral product and the
/// network. Throws NumericError on a non-finite loss.
LossAndGrad loss_and_grad(const CMlpParams& params, const CMatrix& features, const RealGrid& mask,
                          const RealGrid& truth, KernelDims dims,
                          Precision precision = Precision::f64);
LossAndGrad loss_and_grad(const CMlpParams& params, const EncoderSpec& encoder,
                          const RealGrid& mask, const RealGrid& truth, KernelDims dims,
                          Precision precision = Precision::f64);

/// One CMLP evaluation over the coordinate grid; no network is needed after this.
KernelStack export_kernels(const CMlpParams& params, const EncoderSpec& encoder, KernelDims dims,
                           const ImagingMeta& meta = {});

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0;
  double val_psnr_db = 0;  // NaN without a validation split
  double wall_seconds = 0;
};

void write_training_log_csv(std::ostream& out, const std::vector<EpochLog>& log);

struct TrainResult {
  CMlpParams params;
  KernelStack kernels;
  KernelDims dims{};
  std::vector<EpochLog> log;
  bool diverged = false;  // params then hold the last finite-loss state
  std::string diagnostic;
};

/// Invoked after each epoch with (epoch index, current params).
using EpochCallback = std::function<void(const EpochLog&, const CMlpParams&)>;

/// Forward training: fixed coordinate encoding, per-batch gradient
/// accumulation, Adam or SGD steps with cosine learning-rate decay.
/// Deterministic for a fixed seed and thread count.
TrainResult train(const std::vector<TrainingSample>& train_set,
                  const std::vector<TrainingSample>& validation_set, const ImagingMeta& meta,
                  const TrainConfig& tcfg, const NetworkConfig& net,
                  const EpochCallback& on_epoch = {});

}  // namespace lithofield
