#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "turbev/core.hpp"
#include "turbev/imgproc.hpp"

namespace turbev {

/// Polarity-alternation event pairs: per pixel, consecutive events in
/// [t_begin, t_end) with opposite polarity at most `max_gap` µs apart. Pairs
/// overlap, so +,-,+ counts 2.
inline PaepMap count_paep(const EventStream& stream, Micros t_begin, Micros t_end, Micros max_gap) {
  detail::require(t_end > t_begin, ErrorCode::BadSpan, "PAEP window must have t_end > t_begin");
  const int W = stream.width();
  const int H = stream.height();
  Grid<std::uint32_t> count(W, H, 0u);
  struct Last {
    Micros t = 0;
    std::int8_t p = 0;
  };
  Grid<Last> last(W, H);
  for (const Event& e : stream.slice(t_begin, t_end)) {
    Last& l = last(e.x, e.y);
    if (l.p != 0 && l.p != e.p && e.t - l.t <= max_gap) ++count(e.x, e.y);
    l = {e.t, e.p};
  }
  return PaepMap(std::move(count), t_end - t_begin);
}

/// 3x3 Sobel magnitude and direction with clamped borders.
inline GradientMap gradient_map(const Frame& frame) {
  detail::require(frame.width() >= 3 && frame.height() >= 3, ErrorCode::TooSmall, "gradient map needs >= 3x3");
  auto s = img::sobel(frame.pixels());
  Grid<double> mag(frame.width(), frame.height(), 0.0);
  Grid<double> dir(frame.width(), frame.height(), 0.0);
  for (std::size_t i = 0; i < mag.size(); ++i) {
    const double gx = s.gx.values()[i];
    const double gy = s.gy.values()[i];
    mag.values()[i] = std::sqrt(gx * gx + gy * gy);
    dir.values()[i] = std::atan2(gy, gx);
  }
  return GradientMap(std::move(mag), std::move(dir));
}

/// Pearson correlation between two rasters over pixels at least
/// `border_margin` away from every edge.
template <typename A, typename B>
double pearson_interior(const Grid<A>& a, const Grid<B>& b, int border_margin) {
  require_same_shape(a, b, "correlated maps differ in geometry");
  const int x0 = border_margin, x1 = a.width() - border_margin;
  const int y0 = border_margin, y1 = a.height() - border_margin;
  detail::require(x1 - x0 >= 1 && y1 - y0 >= 1 && (x1 - x0) * (y1 - y0) >= 2, ErrorCode::DegenerateVariance,
                  "fewer than 2 interior pixels");
  double ma = 0.0, mb = 0.0;
  const double n = static_cast<double>(x1 - x0) * (y1 - y0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      ma += static_cast<double>(a(x, y));
      mb += static_cast<double>(b(x, y));
    }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const double da = static_cast<double>(a(x, y)) - ma;
      const double db = static_cast<double>(b(x, y)) - mb;
      sab += da * db;
      saa += da * da;
      sbb += db * db;
    }
  detail::require(saa > 0.0 && sbb > 0.0, ErrorCode::DegenerateVariance, "map is constant on the interior");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline double paep_gradient_correlation(const PaepMap& paep, const GradientMap& grad, int border_margin) {
  return pearson_interior(paep.count(), grad.magnitude(), border_margin);
}

/// w = 1 + beta * count / max_count, or 1 everywhere when no pair was seen.
inline Grid<double> epaw_weights(const PaepMap& paep, double beta) {
  detail::require(std::isfinite(beta) && beta >= 0.0, ErrorCode::BadParam, "beta must be >= 0");
  Grid<double> w(paep.width(), paep.height(), 1.0);
  const std::uint32_t max_count = paep.max_count();
  if (max_count == 0) return w;
  for (std::size_t i = 0; i < w.size(); ++i)
    w.values()[i] = 1.0 + beta * static_cast<double>(paep.count().values()[i]) / static_cast<double>(max_count);
  return w;
}

}  // namespace turbev
