#include "lithofield/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

#include "lithofield/metrics.hpp"
#include "lithofield/optics.hpp"
#include "lithofield/parallel.hpp"

namespace lithofield {

namespace {

// ---------------------------------------------------------------------------
// Network forward/backward with cached activations.

template <class Scalar>
using MatrixT = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
struct NetworkTrace {
  std::vector<MatrixT<Scalar>> inputs;  // input of layer i
  std::vector<MatrixT<Scalar>> pre;     // pre-activation of layer i
  MatrixT<Scalar> output;
};

template <class Scalar>
std::complex<Scalar> crelu_t(std::complex<Scalar> z) {
  return {z.real() > 0 ? z.real() : Scalar(0), z.imag() > 0 ? z.imag() : Scalar(0)};
}

template <class Scalar>
NetworkTrace<Scalar> forward_traced(const CMlpParams& params, const CMatrix& features) {
  NetworkTrace<Scalar> t;
  const std::size_t L = params.layers.size();
  MatrixT<Scalar> x = features.cast<std::complex<Scalar>>();
  for (std::size_t i = 0; i < L; ++i) {
    const auto& layer = params.layers[i];
    MatrixT<Scalar> z = x * layer.weight.cast<std::complex<Scalar>>().transpose();
    z.rowwise() += layer.bias.cast<std::complex<Scalar>>().transpose();
    t.inputs.push_back(std::move(x));
    const bool activated = i > 0 && i + 1 < L;
    x = activated ? MatrixT<Scalar>(z.unaryExpr([](std::complex<Scalar> v) { return crelu_t(v); }))
                  : z;
    t.pre.push_back(std::move(z));
  }
  t.output = std::move(x);
  return t;
}

// Real-pair reverse mode: for z = W x + b, g_x = W^H g_z, g_W = g_z x^H, g_b = g_z.
template <class Scalar>
GradientSet backward_traced(const CMlpParams& params, const NetworkTrace<Scalar>& t,
                            const CMatrix& grad_output) {
  const std::size_t L = params.layers.size();
  GradientSet g;
  g.layers.resize(L);
  MatrixT<Scalar> ga = grad_output.cast<std::complex<Scalar>>();
  for (std::size_t i = L; i-- > 0;) {
    const bool activated = i > 0 && i + 1 < L;
    MatrixT<Scalar> gz = std::move(ga);
    if (activated) {
      const auto& z = t.pre[i];
      for (Eigen::Index k = 0; k < gz.size(); ++k) {
        const auto zv = z.data()[k];
        const auto gv = gz.data()[k];
        gz.data()[k] = {zv.real() > 0 ? gv.real() : Scalar(0), zv.imag() > 0 ? gv.imag() : Scalar(0)};
      }
    }
    g.layers[i].weight = (gz.transpose() * t.inputs[i].conjugate()).template cast<cplx>();
    g.layers[i].bias = gz.colwise().sum().transpose().template cast<cplx>();
    if (i > 0) ga = gz * params.layers[i].weight.cast<std::complex<Scalar>>().conjugate();
  }
  return g;
}

struct TracedOutput {
  CMatrix output;
  std::function<GradientSet(const CMatrix&)> backward;
};

TracedOutput trace_network(const CMlpParams& params, const CMatrix& features, Precision precision) {
  params.validate();
  if (static_cast<std::size_t>(features.cols()) != params.input_width()) {
    throw DimensionError("feature width does not match network input width");
  }
  if (precision == Precision::f32) {
    auto trace = std::make_shared<NetworkTrace<float>>(forward_traced<float>(params, features));
    CMatrix out = trace->output.cast<cplx>();
    return {std::move(out), [&params, trace](const CMatrix& g) {
              return backward_traced<float>(params, *trace, g);
            }};
  }
  auto trace = std::make_shared<NetworkTrace<double>>(forward_traced<double>(params, features));
  CMatrix out = trace->output;
  return {std::move(out), [&params, trace](const CMatrix& g) {
            return backward_traced<double>(params, *trace, g);
          }};
}

// ---------------------------------------------------------------------------
// SOCS forward and adjoint for one sample at full resolution.

struct PreparedSample {
  std::vector<cplx> support;  // centered n x m crop of the mask spectrum
  const RealGrid* truth = nullptr;
};

PreparedSample prepare(const RealGrid& mask, const RealGrid& truth, const SpectrumWindow& window) {
  require_same_shape(mask, truth, "training sample");
  if (mask.rows() != window.rows() || mask.cols() != window.cols()) {
    throw DimensionError("sample size differs from the dataset image size");
  }
  std::vector<cplx> native(mask.begin(), mask.end());
  fft2_inplace(native, mask.rows(), mask.cols(), FftDirection::forward);
  PreparedSample s;
  s.support.resize(window.support_size());
  window.gather(native, s.support);
  s.truth = &truth;
  return s;
}

class SocsWorkspace {
 public:
  explicit SocsWorkspace(const SpectrumWindow& w) : window_(w) {}

  /// Predicted aerial for kernel columns of `kernels` ((n*m) x r).
  RealGrid predict(const CMatrix& kernels, const PreparedSample& s) {
    fields(kernels, s);
    return intensity_;
  }

  /// MSE loss for one sample; adds weight * dL/dK into grad_kernels.
  double loss_grad(const CMatrix& kernels, const PreparedSample& s, double weight,
                   CMatrix& grad_kernels) {
    fields(kernels, s);
    const RealGrid& truth = *s.truth;
    const std::size_t RC = truth.size();
    const double inv = 1.0 / static_cast<double>(RC);
    double loss = 0;
    // dL/dI = 2 (I - T) / RC; dL/dE = 2 E dL/dI.
    std::vector<double> dI(RC);
    for (std::size_t k = 0; k < RC; ++k) {
      const double d = intensity_[k] - truth[k];
      loss += d * d;
      dI[k] = 4.0 * d * inv;
    }
    loss *= inv;
    const auto idx = window_.native_index();
    const std::size_t r = static_cast<std::size_t>(kernels.cols());
    for (std::size_t i = 0; i < r; ++i) {
      std::vector<cplx>& e = fields_[i];
      for (std::size_t k = 0; k < RC; ++k) e[k] *= dI[k];
      // Adjoint of E = IFFT(G) / RC is G_bar = FFT(E_bar) / RC.
      fft2_inplace(e, truth.rows(), truth.cols(), FftDirection::forward);
      for (std::size_t p = 0; p < idx.size(); ++p) {
        grad_kernels(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)) +=
            weight * inv * std::conj(s.support[p]) * e[idx[p]];
      }
    }
    return loss;
  }

 private:
  void fields(const CMatrix& kernels, const PreparedSample& s) {
    const std::size_t R = window_.rows(), C = window_.cols(), RC = R * C;
    const std::size_t r = static_cast<std::size_t>(kernels.cols());
    const double inv = 1.0 / static_cast<double>(RC);
    const auto idx = window_.native_index();
    fields_.resize(r);
    intensity_ = RealGrid(R, C);
    for (std::size_t i = 0; i < r; ++i) {
      auto& e = fields_[i];
      e.assign(RC, cplx{});
      for (std::size_t p = 0; p < idx.size(); ++p) {
        e[idx[p]] = kernels(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)) * s.support[p];
      }
      fft2_inplace(e, R, C, FftDirection::inverse);
      for (std::size_t k = 0; k < RC; ++k) {
        e[k] *= inv;
        intensity_[k] += std::norm(e[k]);
      }
    }
  }

  const SpectrumWindow& window_;
  std::vector<std::vector<cplx>> fields_;
  RealGrid intensity_;
};

double cosine_lr(const TrainConfig& cfg, std::size_t step, std::size_t total) {
  if (total <= 1) return cfg.learning_rate;
  const double progress = static_cast<double>(step) / static_cast<double>(total - 1);
  return cfg.final_learning_rate + 0.5 * (cfg.learning_rate - cfg.final_learning_rate) *
                                       (1.0 + std::cos(std::numbers::pi * progress));
}

bool all_finite(const GradientSet& g) {
  for (const auto& l : g.layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------

ParameterOptimizer::ParameterOptimizer(const TrainConfig& cfg, const CMlpParams& params)
    : kind_(cfg.optimizer),
      adam_(cfg.adam),
      m_(GradientSet::zeros_like(params)),
      v_(GradientSet::zeros_like(params)) {}

void ParameterOptimizer::step(CMlpParams& params, const GradientSet& g, double lr) {
  ++t_;
  if (kind_ == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
      params.layers[i].weight -= lr * g.layers[i].weight;
      params.layers[i].bias -= lr * g.layers[i].bias;
    }
    return;
  }
  const auto& a = adam_;
  const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(t_));
  auto update = [&](auto& p, const auto& grad, auto& m, auto& v) {
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const cplx gk = grad.data()[k];
      cplx& mk = m.data()[k];
      cplx& vk = v.data()[k];  // (re^2, im^2) second moments
      mk = a.beta1 * mk + (1.0 - a.beta1) * gk;
      vk = {a.beta2 * vk.real() + (1.0 - a.beta2) * gk.real() * gk.real(),
            a.beta2 * vk.imag() + (1.0 - a.beta2) * gk.imag() * gk.imag()};
      const double dre = (mk.real() / c1) / (std::sqrt(vk.real() / c2) + a.epsilon);
      const double dim = (mk.imag() / c1) / (std::sqrt(vk.imag() / c2) + a.epsilon);
      p.data()[k] -= lr * cplx{dre, dim};
    }
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, g.layers[i].weight, m_.layers[i].weight, v_.layers[i].weight);
    update(params.layers[i].bias, g.layers[i].bias, m_.layers[i].bias, v_.layers[i].bias);
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (!(final_learning_rate > 0) || final_learning_rate > learning_rate) {
    throw ConfigError("final_learning_rate must lie in (0, learning_rate]");
  }
  if (r == 0) throw ConfigError("r must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (threads == 0) throw ConfigError("threads must be >= 1");
  if (kernel_dims && (kernel_dims->rows % 2 == 0 || kernel_dims->cols % 2 == 0 ||
                      kernel_dims->rows < 3 || kernel_dims->cols < 3)) {
    throw ConfigError("kernel dims override must be odd and >= 3");
  }
  if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1 && adam.epsilon > 0)) {
    throw ConfigError("invalid Adam settings");
  }
}

void NetworkConfig::validate() const {
  if (hidden_width == 0) throw ConfigError("hidden_width must be >= 1");
  if (!(output_gain > 0)) throw ConfigError("output_gain must be > 0");
  if (encoder.kind == EncodingKind::rff && (encoder.rff_features == 0 || !(encoder.sigma > 0))) {
    throw ConfigError("RFF encoding needs rff_features >= 1 and sigma > 0");
  }
  if (encoder.kind == EncodingKind::nerf && encoder.nerf_octaves == 0) {
    throw ConfigError("NeRF encoding needs nerf_octaves >= 1");
  }
}

GradientSet GradientSet::zeros_like(const CMlpParams& params) {
  GradientSet g;
  for (const auto& l : params.layers) {
    g.layers.push_back({CMatrix::Zero(l.weight.rows(), l.weight.cols()), CVector::Zero(l.bias.size())});
  }
  return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (other.layers.size() != layers.size()) throw DimensionError("gradient layer count mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double s) {
  for (auto& l : layers) {
    l.weight *= s;
    l.bias *= s;
  }
  return *this;
}

KernelDims resolve_kernel_dims(const TrainConfig& cfg, const ImagingMeta& meta,
                               std::size_t image_rows, std::size_t image_cols) {
  const KernelDims dims = cfg.kernel_dims
                              ? *cfg.kernel_dims
                              : kernel_dims(image_cols, image_rows, meta.wavelength_nm,
                                            meta.numerical_aperture, meta.pixel_size_nm);
  if (dims.rows > image_rows || dims.cols > image_cols) {
    throw DimensionError("kernel dims exceed image dims");
  }
  return dims;
}

RealGrid forward_predict(const CMlpParams& params, const CMatrix& features, const RealGrid& mask,
                         KernelDims dims, std::size_t threads) {
  return socs_image(cmlp_forward(params, features, dims.rows, dims.cols), mask, threads);
}

RealGrid forward_predict(const CMlpParams& params, const EncoderSpec& encoder,
                         const RealGrid& mask, KernelDims dims, std::size_t threads) {
  return forward_predict(params, encoder.encode(make_coord_grid(dims.rows, dims.cols)), mask, dims,
                         threads);
}

double loss(const RealGrid& predicted, const RealGrid& truth) { return mse(predicted, truth); }

LossAndGrad loss_and_grad(const CMlpParams& params, const CMatrix& features, const RealGrid& mask,
                          const RealGrid& truth, KernelDims dims, Precision precision) {
  const SpectrumWindow window(mask.rows(), mask.cols(), dims.rows, dims.cols);
  if (static_cast<std::size_t>(features.rows()) != dims.rows * dims.cols) {
    throw DimensionError("feature rows do not match kernel dims");
  }
  const PreparedSample sample = prepare(mask, truth, window);
  TracedOutput net = trace_network(params, features, precision);
  CMatrix grad_k = CMatrix::Zero(net.output.rows(), net.output.cols());
  SocsWorkspace ws(window);
  LossAndGrad out;
  out.loss = ws.loss_grad(net.output, sample, 1.0, grad_k);
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss in loss_and_grad");
  out.grad = net.backward(grad_k);
  return out;
}

LossAndGrad loss_and_grad(const CMlpParams& params, const EncoderSpec& encoder,
                          const RealGrid& mask, const RealGrid& truth, KernelDims dims,
                          Precision precision) {
  return loss_and_grad(params, encoder.encode(make_coord_grid(dims.rows, dims.cols)), mask, truth,
                       dims, precision);
}

KernelStack export_kernels(const CMlpParams& params, const EncoderSpec& encoder, KernelDims dims,
                           const ImagingMeta& meta) {
  const CMatrix features = encoder.encode(make_coord_grid(dims.rows, dims.cols));
  return cmlp_forward(params, features, dims.rows, dims.cols,
                      {meta.wavelength_nm, meta.numerical_aperture, meta.pixel_size_nm,
                       Provenance::learned});
}

void write_training_log_csv(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,mean_loss,val_psnr_db,wall_seconds\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << std::setprecision(17) << e.mean_loss << ',' << e.val_psnr_db << ','
        << e.wall_seconds << '\n';
  }
}

TrainResult train(const std::vector<TrainingSample>& train_set,
                  const std::vector<TrainingSample>& validation_set, const ImagingMeta& meta,
                  const TrainConfig& tcfg, const NetworkConfig& net, const EpochCallback& on_epoch) {
  tcfg.validate();
  net.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  const std::size_t R = train_set.front().mask.rows(), C = train_set.front().mask.cols();
  for (const auto* set : {&train_set, &validation_set})
    for (const auto& s : *set) {
      if (s.mask.rows() != R || s.mask.cols() != C || !s.mask.same_shape(s.aerial)) {
        throw DataError("all masks and aerial images must share one size");
      }
    }

  TrainResult result;
  result.dims = resolve_kernel_dims(tcfg, meta, R, C);
  const KernelDims dims = result.dims;
  const SpectrumWindow window(R, C, dims.rows, dims.cols);
  const CMatrix features = net.encoder.encode(make_coord_grid(dims.rows, dims.cols));

  std::vector<PreparedSample> prepared;
  prepared.reserve(train_set.size());
  for (const auto& s : train_set) prepared.push_back(prepare(s.mask, s.aerial, window));
  std::vector<PreparedSample> validation;
  for (const auto& s : validation_set) validation.push_back(prepare(s.mask, s.aerial, window));

  CMlpParams params = init_params(
      mlp_widths(features.cols(), net.hidden_width, net.hidden_blocks, tcfg.r), tcfg.seed,
      net.output_gain);
  ParameterOptimizer opt(tcfg, params);

  const std::size_t batches = (prepared.size() + tcfg.batch_size - 1) / tcfg.batch_size;
  const std::size_t total_steps = tcfg.epochs * batches;
  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(tcfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t step = 0;
  CMlpParams last_good = params;

  for (std::size_t epoch = 0; epoch < tcfg.epochs && !result.diverged; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * tcfg.batch_size;
      const std::size_t end = std::min(prepared.size(), begin + tcfg.batch_size);
      const std::size_t count = end - begin;
      TracedOutput traced = trace_network(params, features, tcfg.precision);

      const std::size_t chunks = chunk_count(count, tcfg.threads);
      std::vector<CMatrix> grads(chunks, CMatrix::Zero(traced.output.rows(), traced.output.cols()));
      std::vector<double> losses(chunks, 0.0);
      parallel_chunks(count, tcfg.threads, [&](std::size_t chunk, std::size_t lo, std::size_t hi) {
        SocsWorkspace ws(window);
        for (std::size_t k = lo; k < hi; ++k) {
          losses[chunk] += ws.loss_grad(traced.output, prepared[order[begin + k]],
                                        1.0 / static_cast<double>(count), grads[chunk]);
        }
      });
      double batch_loss = 0;
      for (std::size_t c = 0; c < chunks; ++c) {
        batch_loss += losses[c];
        if (c > 0) grads[0] += grads[c];
      }
      batch_loss /= static_cast<double>(count);
      GradientSet g = traced.backward(grads[0]);
      if (!std::isfinite(batch_loss) || !all_finite(g)) {
        result.diverged = true;
        params = last_good;
        result.diagnostic = "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(b);
        break;
      }
      loss_sum += batch_loss * static_cast<double>(count);
      last_good = params;
      opt.step(params, g, cosine_lr(tcfg, step++, total_steps));
    }
    if (result.diverged) break;

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = loss_sum / static_cast<double>(prepared.size());
    entry.val_psnr_db = std::numeric_limits<double>::quiet_NaN();
    if (!validation.empty()) {
      const CMatrix kernels = cmlp_evaluate(params, features);
      SocsWorkspace ws(window);
      double acc = 0;
      for (const auto& v : validation) acc += psnr(*v.truth, ws.predict(kernels, v));
      entry.val_psnr_db = acc / static_cast<double>(validation.size());
    }
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry, params);
  }

  result.kernels = cmlp_forward(params, features, dims.rows, dims.cols,
                                {meta.wavelength_nm, meta.numerical_aperture, meta.pixel_size_nm,
                                 Provenance::learned});
  result.params = std::move(params);
  return result;
}

}  // namespace lithofield
