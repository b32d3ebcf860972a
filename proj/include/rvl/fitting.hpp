#pragma once

// Small statistics helpers: least-squares lines with standard errors, the
// Kolmogorov-Smirnov distance against a reference cdf, and max-ratio constant
// fits for one-sided bounds.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace rvl {

struct fit_line {
  double slope = 0, intercept = 0;
  double se_slope = 0, se_intercept = 0;
  double r2 = 1;
  std::size_t n = 0;
};

inline fit_line linfit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("linfit: need matching xs, ys with n >= 2");
  std::size_t n = xs.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0)) throw std::invalid_argument("linfit: xs are degenerate");
  fit_line f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = ys[i] - (f.intercept + f.slope * xs[i]);
    rss += r * r;
  }
  if (n > 2) {
    double s2 = rss / double(n - 2);
    f.se_slope = std::sqrt(s2 / sxx);
    f.se_intercept = std::sqrt(s2 * (1.0 / double(n) + mx * mx / sxx));
  }
  f.r2 = syy > 0 ? 1 - rss / syy : 1;
  return f;
}

// sup_t |F_n(t) - F(t)| for the empirical cdf of samples.  Samples need not
// be pre-sorted.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(samples.begin(), samples.end());
  double n = double(samples.size());
  double d = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double F = cdf(samples[i]);
    d = std::max(d, std::abs(double(i + 1) / n - F));
    d = std::max(d, std::abs(double(i) / n - F));
  }
  return d;
}

// Smallest c with lhs_i <= c * rhs_i for all i; rhs must be positive wherever
// lhs is nonzero.  Entries with rhs <= 0 and |lhs| <= atol are skipped.
struct max_ratio_result {
  double c = 0;
  std::size_t argmax = 0;
  std::size_t used = 0;
};

inline max_ratio_result max_ratio_fit(const std::vector<double>& lhs,
                                      const std::vector<double>& rhs, double atol = 0) {
  if (lhs.size() != rhs.size() || lhs.empty())
    throw std::invalid_argument("max_ratio_fit: need matching nonempty inputs");
  max_ratio_result r;
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    if (!(rhs[i] > 0)) {
      if (std::abs(lhs[i]) <= atol) continue;
      throw std::domain_error("max_ratio_fit: nonpositive rhs against nonzero lhs");
    }
    double q = lhs[i] / rhs[i];
    ++r.used;
    if (q > r.c) {
      r.c = q;
      r.argmax = i;
    }
  }
  if (r.used == 0) throw std::domain_error("max_ratio_fit: no usable entries");
  return r;
}

// Successive-differences decay: ratios r_k = a_{k+1} / a_k of a positive
// sequence, e.g. refinement increments.
inline std::vector<double> decay_ratios(const std::vector<double>& a) {
  std::vector<double> r;
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    if (!(a[i] > 0)) throw std::domain_error("decay_ratios: needs positive terms");
    r.push_back(a[i + 1] / a[i]);
  }
  return r;
}

}  // namespace rvl
