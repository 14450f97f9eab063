#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lithofield/grid.hpp"

namespace lithofield {

inline constexpr double kPsnrExactMatchDb = 200.0;

double mse(const RealGrid& a, const RealGrid& b);

/// 10 log10(max(truth)^2 / mse). Peak comes from the first argument; an exact
/// match returns kPsnrExactMatchDb.
double psnr(const RealGrid& truth, const RealGrid& predicted);

double max_error(const RealGrid& a, const RealGrid& b);

/// Two-class (resist, background) mean intersection-over-union. A class absent
/// from both grids scores 1.
double miou(const RealGrid& truth, const RealGrid& predicted);

/// Two-class mean pixel accuracy (per-class recall). Classes absent from the
/// truth are left out of the mean.
double mpa(const RealGrid& truth, const RealGrid& predicted);

struct SampleMetrics {
  std::string name;
  double mse = 0;
  double psnr_db = 0;
  double max_error = 0;
  double miou = 0;
  double mpa = 0;
};

struct EvalReport {
  std::vector<SampleMetrics> samples;
  SampleMetrics mean;  // name "mean"

  std::size_t count() const noexcept { return samples.size(); }
};

SampleMetrics evaluate_sample(std::string name, const RealGrid& aerial_truth,
                              const RealGrid& aerial_pred, const RealGrid& resist_truth,
                              const RealGrid& resist_pred);

/// Fills report.mean with arithmetic means over samples.
void finalize_report(EvalReport& report);

void write_report_csv(std::ostream& out, const EvalReport& report);
std::string report_json(const EvalReport& report);

}  // namespace lithofield
