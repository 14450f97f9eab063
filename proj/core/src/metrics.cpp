#include "lithofield/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <ostream>

namespace lithofield {

namespace {

struct ClassCounts {
  // [class][class]: truth class row, predicted class column. Class 1 = resist.
  double n[2][2] = {{0, 0}, {0, 0}};
};

ClassCounts confusion(const RealGrid& truth, const RealGrid& pred) {
  require_same_shape(truth, pred, "resist metric");
  ClassCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i] >= 0.5 ? 1 : 0;
    const int p = pred[i] >= 0.5 ? 1 : 0;
    c.n[t][p] += 1;
  }
  return c;
}

}  // namespace

double mse(const RealGrid& a, const RealGrid& b) {
  require_same_shape(a, b, "mse");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double psnr(const RealGrid& truth, const RealGrid& predicted) {
  const double e = mse(truth, predicted);
  if (e == 0) return kPsnrExactMatchDb;
  const double peak = *std::max_element(truth.begin(), truth.end());
  return std::min(kPsnrExactMatchDb, 10.0 * std::log10(peak * peak / e));
}

double max_error(const RealGrid& a, const RealGrid& b) {
  require_same_shape(a, b, "max_error");
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double miou(const RealGrid& truth, const RealGrid& predicted) {
  const ClassCounts c = confusion(truth, predicted);
  double sum = 0;
  for (int k = 0; k < 2; ++k) {
    const double inter = c.n[k][k];
    const double uni = c.n[k][0] + c.n[k][1] + c.n[0][k] + c.n[1][k] - inter;
    sum += uni == 0 ? 1.0 : inter / uni;
  }
  return sum / 2.0;
}

double mpa(const RealGrid& truth, const RealGrid& predicted) {
  const ClassCounts c = confusion(truth, predicted);
  double sum = 0;
  int classes = 0;
  for (int k = 0; k < 2; ++k) {
    const double total = c.n[k][0] + c.n[k][1];
    if (total == 0) continue;
    sum += c.n[k][k] / total;
    ++classes;
  }
  return classes == 0 ? 1.0 : sum / classes;
}

SampleMetrics evaluate_sample(std::string name, const RealGrid& aerial_truth,
                              const RealGrid& aerial_pred, const RealGrid& resist_truth,
                              const RealGrid& resist_pred) {
  return {std::move(name),
          mse(aerial_truth, aerial_pred),
          psnr(aerial_truth, aerial_pred),
          max_error(aerial_truth, aerial_pred),
          miou(resist_truth, resist_pred),
          mpa(resist_truth, resist_pred)};
}

void finalize_report(EvalReport& report) {
  SampleMetrics m{"mean"};
  const double n = static_cast<double>(report.samples.size());
  if (n > 0) {
    for (const auto& s : report.samples) {
      m.mse += s.mse;
      m.psnr_db += s.psnr_db;
      m.max_error += s.max_error;
      m.miou += s.miou;
      m.mpa += s.mpa;
    }
    m.mse /= n;
    m.psnr_db /= n;
    m.max_error /= n;
    m.miou /= n;
    m.mpa /= n;
  }
  report.mean = m;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "sample,mse,psnr_db,max_error,miou,mpa\n";
  auto row = [&](const SampleMetrics& s) {
    out << s.name << ',' << std::setprecision(17) << s.mse << ',' << s.psnr_db << ','
        << s.max_error << ',' << s.miou << ',' << s.mpa << '\n';
  };
  for (const auto& s : report.samples) row(s);
  row(report.mean);
}

std::string report_json(const EvalReport& report) {
  auto to_json = [](const SampleMetrics& s) {
    return nlohmann::json{{"sample", s.name},    {"mse", s.mse},   {"psnr_db", s.psnr_db},
                          {"max_error", s.max_error}, {"miou", s.miou}, {"mpa", s.mpa}};
  };
  nlohmann::json j;
  j["count"] = report.samples.size();
  j["samples"] = nlohmann::json::array();
  for (const auto& s : report.samples) j["samples"].push_back(to_json(s));
  j["mean"] = to_json(report.mean);
  return j.dump(2);
}

}  // namespace lithofield
