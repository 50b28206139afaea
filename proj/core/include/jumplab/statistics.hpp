#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace jumplab {

/// Pairwise (cascade) summation in index order. Deterministic for a given
/// input sequence.
double pairwise_sum(std::span<const double> values);

struct SampleMoments {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
  std::size_t count = 0;
};

/// Sample mean and standard error of the mean, both via pairwise sums.
SampleMoments sample_moments(std::span<const double> values);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool rejected(double level) const { return p_value < level; }
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
/// distribution and Stephens' small-sample correction.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);

/// Halton low-discrepancy sequence element `index` (1-based) in `base`.
double halton(std::size_t index, unsigned base);

}  // namespace jumplab
