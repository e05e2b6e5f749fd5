#include "ncsum/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ncsum/common.hpp"

namespace ncsum {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf) {
  KsResult out;
  out.n = sample.size();
  if (sample.empty()) return out;
  std::sort(sample.begin(), sample.end());
  double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    double f = cdf(sample[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  out.statistic = d;
  double sn = std::sqrt(n);
  out.p_value = kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d);
  return out;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  KsResult out;
  if (a.empty() || b.empty()) return out;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  out.statistic = d;
  out.n = a.size() + b.size();
  double ne = std::sqrt(na * nb / (na + nb));
  out.p_value = kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d);
  return out;
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double standard_error(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

double quantile(std::vector<double> x, double q) {
  if (x.empty()) return 0.0;
  std::sort(x.begin(), x.end());
  double pos = q * static_cast<double>(x.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, x.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return x[lo] * (1.0 - frac) + x[hi] * frac;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  LineFit f;
  std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return f;
  double mx = mean(x.first(n)), my = mean(y.first(n));
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  f.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.residuals[i] = y[i] - (f.intercept + f.slope * x[i]);
    sse += f.residuals[i] * f.residuals[i];
  }
  f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  if (n > 2) f.slope_se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  return f;
}

GeometricFit fit_geometric(std::span<const double> n, std::span<const double> values) {
  GeometricFit g;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < std::min(n.size(), values.size()); ++i) {
    if (values[i] > 1e-300) {
      xs.push_back(n[i]);
      ys.push_back(std::log(values[i]));
    }
  }
  if (xs.size() < 2) return g;
  LineFit lf = fit_line(xs, ys);
  g.rate = std::exp(lf.slope);
  g.r_squared = lf.r_squared;
  g.residuals = lf.residuals;
  double logc = lf.intercept;
  for (std::size_t i = 0; i < xs.size(); ++i) logc = std::max(logc, ys[i] - lf.slope * xs[i]);
  g.c = std::exp(logc);
  g.ok = g.rate < 1.0 && lf.r_squared > 0.9;
  return g;
}

namespace {

double slope_of_means(std::span<const double> logt, const std::vector<std::vector<double>>& rows,
                      std::span<const std::size_t> pick, std::vector<double>* residuals,
                      double* intercept) {
  std::size_t cols = logt.size();
  std::vector<double> ly(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    double s = 0.0;
    for (std::size_t r : pick) s += rows[r][c];
    ly[c] = std::log(std::max(s / static_cast<double>(pick.size()), 1e-300));
  }
  LineFit lf = fit_line(logt, ly);
  if (residuals) *residuals = lf.residuals;
  if (intercept) *intercept = lf.intercept;
  return lf.slope;
}

}  // namespace

ExponentFit fit_envelope_exponent(std::span<const double> t_grid,
                                  const std::vector<std::vector<double>>& per_replicate,
                                  std::uint64_t seed, int resamples, double level) {
  ExponentFit out;
  if (per_replicate.empty() || t_grid.size() < 2) return out;
  bool any = false;
  for (const auto& row : per_replicate)
    for (double v : row) any = any || v > 0.0;
  if (!any) return out;
  out.defined = true;
  std::vector<double> logt(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) logt[i] = std::log(t_grid[i]);
  std::vector<std::size_t> all(per_replicate.size());
  std::iota(all.begin(), all.end(), 0);
  out.exponent = slope_of_means(logt, per_replicate, all, &out.residuals, &out.intercept);

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, per_replicate.size() - 1);
  std::vector<double> slopes;
  slopes.reserve(resamples);
  std::vector<std::size_t> idx(per_replicate.size());
  for (int b = 0; b < resamples; ++b) {
    for (auto& k : idx) k = pick(rng);
    slopes.push_back(slope_of_means(logt, per_replicate, idx, nullptr, nullptr));
  }
  double tail = (1.0 - level) / 2.0;
  out.ci_low = quantile(slopes, tail);
  out.ci_high = quantile(slopes, 1.0 - tail);
  return out;
}

std::vector<std::int64_t> geometric_grid(std::int64_t lo, std::int64_t hi, int points) {
  std::vector<std::int64_t> grid;
  if (points < 2 || hi <= lo) {
    grid.push_back(hi);
    return grid;
  }
  double a = std::log(static_cast<double>(lo)), b = std::log(static_cast<double>(hi));
  for (int i = 0; i < points; ++i) {
    auto t = static_cast<std::int64_t>(std::llround(std::exp(a + (b - a) * i / (points - 1))));
    if (grid.empty() || t > grid.back()) grid.push_back(t);
  }
  grid.back() = hi;
  return grid;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < n; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[n - 1 - i] = 0.5 * (x + 1.0);
    weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
}

}  // namespace ncsum
