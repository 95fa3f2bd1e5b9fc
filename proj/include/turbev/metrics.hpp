#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "turbev/core.hpp"

namespace turbev::metrics {

inline double mse(const Frame& a, const Frame& b) {
  require_same_shape(a, b, "metric inputs differ in geometry");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    acc += d * d;
  }
  return a.values().empty() ? 0.0 : acc / static_cast<double>(a.values().size());
}

/// 10 log10(1 / MSE) on unit-range frames; +infinity when the frames match.
inline double psnr(const Frame& a, const Frame& b) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

inline double rmse(const Frame& a, const Frame& b) { return std::sqrt(mse(a, b)); }

/// Mean of sqrt(d^2 + epsilon^2) over pixels.
inline double charbonnier(const Frame& a, const Frame& b, double epsilon = 1e-3) {
  require_same_shape(a, b, "metric inputs differ in geometry");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    acc += std::sqrt(d * d + epsilon * epsilon);
  }
  return a.values().empty() ? epsilon : acc / static_cast<double>(a.values().size());
}

/// Mean SSIM over every `window` x `window` box (stride 1) with uniform
/// weights and population statistics; c1 = k1^2, c2 = k2^2 for unit range.
inline double ssim(const Frame& a, const Frame& b, int window = 8, double k1 = 0.01, double k2 = 0.03) {
  require_same_shape(a, b, "metric inputs differ in geometry");
  detail::require(window >= 1, ErrorCode::BadParam, "window must be >= 1");
  detail::require(a.width() >= window && a.height() >= window, ErrorCode::TooSmall, "frame smaller than SSIM window");
  const double c1 = k1 * k1;
  const double c2 = k2 * k2;
  const int W = a.width();
  const int H = a.height();

  const double n = static_cast<double>(window) * window;
  double total = 0.0;
  long count = 0;
  for (int y0 = 0; y0 + window <= H; ++y0)
    for (int x0 = 0; x0 + window <= W; ++x0) {
      double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
      for (int y = y0; y < y0 + window; ++y)
        for (int x = x0; x < x0 + window; ++x) {
          const double va = a(x, y), vb = b(x, y);
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      const double ma = sa / n, mb = sb / n;
      const double var_a = saa / n - ma * ma;
      const double var_b = sbb / n - mb * mb;
      const double cov = sab / n - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

}  // namespace turbev::metrics
