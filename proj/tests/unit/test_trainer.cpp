#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lithofield/error.hpp"
#include "lithofield/metrics.hpp"
#include "lithofield/optics.hpp"
#include "lithofield/trainer.hpp"
#include "oracles.hpp"
#include "property.hpp"

using namespace lithofield;
using namespace lithofield::testing;

namespace {

EncoderSpec small_rff(std::size_t features, double sigma = 5.0) {
  EncoderSpec e;
  e.kind = EncodingKind::rff;
  e.rff_features = features;
  e.sigma = sigma;
  e.seed = 11;
  return e;
}

double& component(CMlpParams& p, std::size_t layer, bool bias, Eigen::Index i, Eigen::Index j, bool imag) {
  cplx& z = bias ? p.layers[layer].bias(i) : p.layers[layer].weight(i, j);
  return reinterpret_cast<double(&)[2]>(z)[imag ? 1 : 0];
}

cplx gradient_entry(const GradientSet& g, std::size_t layer, bool bias, Eigen::Index i, Eigen::Index j) {
  return bias ? g.layers[layer].bias(i) : g.layers[layer].weight(i, j);
}

}  // namespace

TEST_CASE("kernel dims resolution") {
  TrainConfig cfg;
  const ImagingMeta meta{193.0, 1.35, 8.0};
  CHECK(resolve_kernel_dims(cfg, meta, 256, 256) == KernelDims{59, 59});
  cfg.kernel_dims = KernelDims{31, 21};
  CHECK(resolve_kernel_dims(cfg, meta, 256, 256) == KernelDims{31, 21});
  cfg.kernel_dims = KernelDims{301, 21};
  CHECK_THROWS_AS(resolve_kernel_dims(cfg, meta, 256, 256), DimensionError);
}

TEST_CASE("configuration validation") {
  TrainConfig t;
  t.validate();
  t.learning_rate = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  t = TrainConfig{};
  t.r = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  NetworkConfig n;
  n.validate();
  n.hidden_width = 0;
  CHECK_THROWS_AS(n.validate(), ConfigError);
}

TEST_CASE("loss") {
  Rng rng(1);
  const RealGrid a = random_real_grid(rng, 8, 8), b = random_real_grid(rng, 8, 8);
  CHECK(loss(a, a) == 0.0);
  CHECK(loss(RealGrid(4, 4, 0.3), RealGrid(4, 4, 0.0)) == doctest::Approx(0.09));
  CHECK(loss(a, b) == mse(a, b));
}

TEST_CASE("forward_predict matches a straight-line implementation") {
  Rng rng(2);
  const EncoderSpec enc = small_rff(6);
  const CMlpParams p = init_params(mlp_widths(enc.width(), 10, 2, 3), 5);
  const KernelDims dims{9, 7};
  const CMatrix features = enc.encode(make_coord_grid(dims.rows, dims.cols));
  const RealGrid mask = random_binary_grid(rng, 64, 64, 0.3);
  const RealGrid fast = forward_predict(p, enc, mask, dims);
  const RealGrid slow = straight_line_forward(p, features, mask, dims.rows, dims.cols);
  CHECK(max_abs_diff(fast, slow) < 1e-12 * std::max(1.0, *std::max_element(slow.begin(), slow.end())));
  for (double v : fast) CHECK(v >= 0.0);
}

TEST_CASE("zero network output gives a zero image") {
  CMlpParams p = init_params(mlp_widths(4, 4, 1, 2), 1);
  for (auto& l : p.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  Rng rng(3);
  const RealGrid img = forward_predict(p, small_rff(2), random_binary_grid(rng, 16, 16), {5, 5});
  CHECK(img == RealGrid(16, 16));
}

TEST_CASE("oracle kernels through the learned path match socs_image") {
  const OracleModel m = OracleModel::build(ImagingConfig{193, 1.35, 8.0, SourceShape{}, 11}, 64, 64);
  const KernelStack k = m.spectrum.kernels(6);
  // A single linear layer with identity weights reproduces any kernel stack.
  const std::size_t P = k.rows * k.cols;
  CMlpParams p;
  p.layers.push_back({CMatrix::Identity(6, 6), CVector::Zero(6)});
  CMatrix features(static_cast<Eigen::Index>(P), 6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t b = 0; b < P; ++b) features(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(i)) = k.kernels[i][b];
  Rng rng(4);
  const RealGrid mask = random_binary_grid(rng, 64, 64, 0.4);
  CHECK(forward_predict(p, features, mask, {k.rows, k.cols}) == socs_image(k, mask));
}

TEST_CASE("zero mask gives zero gradients") {
  const EncoderSpec enc = small_rff(4);
  const CMlpParams p = init_params(mlp_widths(enc.width(), 8, 1, 4), 7);
  const LossAndGrad lg = loss_and_grad(p, enc, RealGrid(32, 32), RealGrid(32, 32), {9, 9});
  CHECK(lg.loss == 0.0);
  for (const auto& l : lg.grad.layers) {
    CHECK(l.weight.isZero(0));
    CHECK(l.bias.isZero(0));
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  const EncoderSpec enc = small_rff(4);
  const KernelDims dims{9, 9};
  const CMlpParams p = init_params(mlp_widths(enc.width(), 8, 1, 4), 13);
  const CMlpParams target = init_params(mlp_widths(enc.width(), 8, 1, 4), 14);
  Rng rng(15);
  const RealGrid mask = random_binary_grid(rng, 32, 32, 0.3);
  const RealGrid truth = forward_predict(target, enc, mask, dims);
  const LossAndGrad lg = loss_and_grad(p, enc, mask, truth, dims);
  CHECK(lg.loss == doctest::Approx(loss(forward_predict(p, enc, mask, dims), truth)).epsilon(1e-12));

  const double h = 1e-6;
  double worst = 0;
  for (int probe = 0; probe < 60; ++probe) {
    const std::size_t layer = uniform_size(rng, 0, p.layers.size() - 1);
    const bool bias = uniform_size(rng, 0, 3) == 0;
    const bool imag = uniform_size(rng, 0, 1) == 1;
    const auto& W = p.layers[layer].weight;
    const auto i = static_cast<Eigen::Index>(uniform_size(rng, 0, static_cast<std::size_t>(W.rows()) - 1));
    const auto j = static_cast<Eigen::Index>(uniform_size(rng, 0, static_cast<std::size_t>(W.cols()) - 1));
    CMlpParams plus = p, minus = p;
    component(plus, layer, bias, i, j, imag) += h;
    component(minus, layer, bias, i, j, imag) -= h;
    const double numeric = (loss(forward_predict(plus, enc, mask, dims), truth) -
                            loss(forward_predict(minus, enc, mask, dims), truth)) / (2 * h);
    const cplx g = gradient_entry(lg.grad, layer, bias, i, j);
    const double analytic = imag ? g.imag() : g.real();
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, rel);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("bias gradient of a linear network on a 2x2 problem") {
  // One output layer, 1x1 kernel at the DC bin. With S = sum(mask) the field is
  // the constant K S / 4, so I = |K|^2 S^2 / 16 on every pixel and
  // dL/d(re b) + j dL/d(im b) = 2 mean(I - T) * 2 K S^2 / 16.
  CMlpParams p;
  CMatrix W(2, 3);
  W << cplx(0.3, -0.2), cplx(0.1, 0.5), cplx(-0.4, 0.2), cplx(0.7, 0.1), cplx(-0.3, -0.6), cplx(0.2, 0.2);
  CVector b(2);
  b << cplx(0.05, -0.1), cplx(-0.2, 0.3);
  p.layers.push_back({W, b});
  CMatrix f(1, 3);
  f << cplx(1.0, 0.5), cplx(-0.5, 0.25), cplx(0.2, -1.0);
  const RealGrid mask(2, 2, std::vector<double>{1, 0, 1, 1});
  const RealGrid truth(2, 2, std::vector<double>{0.2, 0.4, 0.1, 0.3});
  const double S = 3.0;
  const CVector K = W * f.row(0).transpose() + b;
  const double I = (std::norm(K(0)) + std::norm(K(1))) * S * S / 16;
  const double mean_resid = ((I - 0.2) + (I - 0.4) + (I - 0.1) + (I - 0.3)) / 4;
  const LossAndGrad lg = loss_and_grad(p, f, mask, truth, {1, 1});
  CHECK(lg.loss == doctest::Approx(((I - 0.2) * (I - 0.2) + (I - 0.4) * (I - 0.4) +
                                    (I - 0.1) * (I - 0.1) + (I - 0.3) * (I - 0.3)) / 4));
  for (Eigen::Index k = 0; k < 2; ++k) {
    const cplx expected = 2 * mean_resid * 2.0 * K(k) * S * S / 16.0;
    CHECK(std::abs(lg.grad.layers[0].bias(k) - expected) < 1e-14);
  }
}

TEST_CASE("f32 network path stays close to f64") {
  const EncoderSpec enc = small_rff(4);
  const CMlpParams p = init_params(mlp_widths(enc.width(), 8, 1, 4), 13);
  Rng rng(16);
  const RealGrid mask = random_binary_grid(rng, 32, 32, 0.3);
  const RealGrid truth = random_real_grid(rng, 32, 32, 0.0, 0.1);
  const LossAndGrad a = loss_and_grad(p, enc, mask, truth, {9, 9}, Precision::f64);
  const LossAndGrad b = loss_and_grad(p, enc, mask, truth, {9, 9}, Precision::f32);
  CHECK(b.loss == doctest::Approx(a.loss).epsilon(1e-4));
}

TEST_CASE("optimizer moments mirror parameter shapes") {
  const CMlpParams p0 = init_params(mlp_widths(6, 5, 2, 3), 1);
  TrainConfig cfg;
  ParameterOptimizer opt(cfg, p0);
  CMlpParams p = p0;
  GradientSet g = GradientSet::zeros_like(p);
  for (auto& l : g.layers) l.weight.setConstant(cplx(1.0, -1.0));
  opt.step(p, g, 1e-3);
  CHECK(opt.steps() == 1);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    CHECK(opt.first_moment().layers[i].weight.rows() == p.layers[i].weight.rows());
    CHECK(opt.second_moment().layers[i].bias.size() == p.layers[i].bias.size());
    // Adam's first step moves every weight by lr against the gradient sign.
    const CMatrix d = p.layers[i].weight - p0.layers[i].weight;
    CHECK((d.real().array() + 1e-3).abs().maxCoeff() < 1e-9);
    CHECK((d.imag().array() - 1e-3).abs().maxCoeff() < 1e-9);
    CHECK(p.layers[i].bias == p0.layers[i].bias);
  }
}

namespace {

struct ToyData {
  std::vector<TrainingSample> train, test;
  ImagingMeta meta{193.0, 1.35, 16.0};
};

ToyData toy_data(std::size_t px, std::size_t n_train, std::size_t n_test) {
  ImagingConfig cfg;
  cfg.pixel_size_nm = 16.0;
  cfg.source_grid = 9;
  const OracleModel m = OracleModel::build(cfg, px, px);
  const KernelStack k = m.spectrum.kernels(m.spectrum.rank_for_coverage(0.999999));
  Rng rng(99);
  ToyData d;
  for (std::size_t i = 0; i < n_train + n_test; ++i) {
    const RealGrid mask = random_binary_grid(rng, px, px, 0.3);
    (i < n_train ? d.train : d.test).push_back({mask, socs_image(k, mask)});
  }
  return d;
}

}  // namespace

TEST_CASE("zero epochs return the initial parameters") {
  const ToyData d = toy_data(16, 2, 0);
  TrainConfig t;
  t.epochs = 0;
  t.r = 3;
  NetworkConfig n;
  n.encoder = small_rff(4);
  n.hidden_width = 8;
  n.hidden_blocks = 1;
  const TrainResult res = train(d.train, {}, d.meta, t, n);
  CHECK(res.log.empty());
  CHECK(res.params == init_params(mlp_widths(8, 8, 1, 3), t.seed, n.output_gain));
  CHECK(res.kernels.meta.provenance == Provenance::learned);
  CHECK_THROWS_AS(train({}, {}, d.meta, t, n), DataError);
}

TEST_CASE("training is deterministic with one thread") {
  const ToyData d = toy_data(16, 5, 2);
  TrainConfig t;
  t.epochs = 4;
  t.batch_size = 2;
  t.r = 3;
  t.seed = 77;
  NetworkConfig n;
  n.encoder = small_rff(4);
  n.hidden_width = 8;
  n.hidden_blocks = 1;
  const TrainResult a = train(d.train, d.test, d.meta, t, n);
  const TrainResult b = train(d.train, d.test, d.meta, t, n);
  REQUIRE(a.log.size() == 4);
  CHECK(a.params == b.params);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].mean_loss == b.log[i].mean_loss);
    CHECK(a.log[i].val_psnr_db == b.log[i].val_psnr_db);
  }
  t.threads = 3;
  const TrainResult c = train(d.train, d.test, d.meta, t, n);
  const TrainResult e = train(d.train, d.test, d.meta, t, n);
  CHECK(c.params == e.params);

  std::ostringstream csv;
  write_training_log_csv(csv, a.log);
  CHECK(csv.str().rfind("epoch,mean_loss,val_psnr_db,wall_seconds\n", 0) == 0);
}

TEST_CASE("exported kernels reproduce forward_predict without the network") {
  const ToyData d = toy_data(16, 3, 1);
  TrainConfig t;
  t.epochs = 3;
  t.r = 3;
  NetworkConfig n;
  n.encoder = small_rff(4);
  n.hidden_width = 8;
  n.hidden_blocks = 1;
  const TrainResult res = train(d.train, {}, d.meta, t, n);
  const KernelStack k = export_kernels(res.params, n.encoder, res.dims, d.meta);
  CHECK(k == res.kernels);
  CHECK(k.meta.provenance == Provenance::learned);
  CHECK(k.meta.pixel_size_nm == 16.0);
  const RealGrid a = forward_predict(res.params, n.encoder, d.test[0].mask, res.dims);
  const RealGrid b = socs_image(k, d.test[0].mask);
  CHECK(max_abs_diff(a, b) < 1e-12);
  std::stringstream ss;
  write_nkrn(ss, k);
  CHECK(read_nkrn(ss) == k);
}

TEST_CASE("memorizes a single sample") {
  const ToyData d = toy_data(16, 1, 0);
  TrainConfig t;
  t.epochs = 4000;
  t.batch_size = 1;
  t.learning_rate = 3e-3;
  t.final_learning_rate = 3e-5;
  t.r = 8;
  NetworkConfig n;
  n.encoder = small_rff(32, 5.0);
  n.hidden_width = 64;
  n.hidden_blocks = 2;
  n.output_gain = 1.0;
  const TrainResult res = train(d.train, {}, d.meta, t, n);
  REQUIRE(res.log.size() == t.epochs);
  // Loss falls on average: each quarter's mean is below the previous one.
  double prev = INFINITY;
  for (std::size_t q = 0; q < 4; ++q) {
    double s = 0;
    for (std::size_t e = q * 1000; e < (q + 1) * 1000; ++e) s += res.log[e].mean_loss;
    CHECK(s < prev);
    prev = s;
  }
  const RealGrid pred = socs_image(res.kernels, d.train[0].mask);
  CHECK(psnr(d.train[0].aerial, pred) > 60.0);
}
