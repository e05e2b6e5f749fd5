#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ncsum {

double normal_cdf(double x);

// Asymptotic Kolmogorov tail probability P(K > lambda).
double kolmogorov_tail(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

KsResult ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

double mean(std::span<const double> x);
// Unbiased sample variance; 0 for fewer than two points.
double variance(std::span<const double> x);
double standard_error(std::span<const double> x);
double quantile(std::vector<double> x, double q);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r_squared = 0.0;
  std::vector<double> residuals;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

// c * r^n envelope fitted on log values; c is raised so the envelope covers every point used.
struct GeometricFit {
  bool ok = false;
  double c = 0.0;
  double rate = 0.0;
  double r_squared = 0.0;
  std::vector<double> residuals;
};

GeometricFit fit_geometric(std::span<const double> n, std::span<const double> values);

struct ExponentFit {
  bool defined = false;  // false when every envelope value is zero
  double exponent = 0.0;
  double intercept = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> residuals;
};

// rows = replicates, columns = t grid. Fits log(mean over replicates) against log t and
// bootstraps replicates for a percentile interval.
ExponentFit fit_envelope_exponent(std::span<const double> t_grid,
                                  const std::vector<std::vector<double>>& per_replicate,
                                  std::uint64_t seed, int resamples = 1000, double level = 0.95);

std::vector<std::int64_t> geometric_grid(std::int64_t lo, std::int64_t hi, int points);

// n-point Gauss-Legendre rule on [0,1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace ncsum
