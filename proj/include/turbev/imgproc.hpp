#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "turbev/grid.hpp"
#include "turbev/parallel.hpp"

// Small raster kernels shared by the simulation and restoration stages. All
// of them treat the image border by clamping to the nearest pixel.
namespace turbev::img {

inline int clamp_index(int i, int n) noexcept { return std::clamp(i, 0, n - 1); }

/// Bilinear sample at continuous pixel coordinates (pixel centres on integers).
inline double bilinear(const Grid<double>& g, double x, double y) noexcept {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const int w = g.width();
  const int h = g.height();
  const int xa = clamp_index(x0, w), xb = clamp_index(x0 + 1, w);
  const int ya = clamp_index(y0, h), yb = clamp_index(y0 + 1, h);
  const double top = (1.0 - ax) * g(xa, ya) + ax * g(xb, ya);
  const double bottom = (1.0 - ax) * g(xa, yb) + ax * g(xb, yb);
  return (1.0 - ay) * top + ay * bottom;
}

/// Bilinear sample that treats everything outside the raster as zero.
inline double bilinear_zero(const Grid<double>& g, double x, double y) noexcept {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  auto at = [&](int xi, int yi) { return g.contains(xi, yi) ? g(xi, yi) : 0.0; };
  const double top = (1.0 - ax) * at(x0, y0) + ax * at(x0 + 1, y0);
  const double bottom = (1.0 - ax) * at(x0, y0 + 1) + ax * at(x0 + 1, y0 + 1);
  return (1.0 - ay) * top + ay * bottom;
}

/// Normalised sampled Gaussian, radius ceil(4 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable convolution with clamp-to-edge borders.
inline Grid<double> convolve_separable(const Grid<double>& src, const std::vector<double>& kernel, Exec exec = {}) {
  const int w = src.width();
  const int h = src.height();
  const int r = static_cast<int>(kernel.size() / 2);
  Grid<double> tmp(w, h, 0.0);
  parallel_for(static_cast<std::size_t>(h), exec, [&](std::size_t b, std::size_t e) {
    for (int y = static_cast<int>(b); y < static_cast<int>(e); ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += kernel[static_cast<std::size_t>(i + r)] * src(clamp_index(x + i, w), y);
        tmp(x, y) = acc;
      }
  });
  Grid<double> out(w, h, 0.0);
  parallel_for(static_cast<std::size_t>(h), exec, [&](std::size_t b, std::size_t e) {
    for (int y = static_cast<int>(b); y < static_cast<int>(e); ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += kernel[static_cast<std::size_t>(i + r)] * tmp(x, clamp_index(y + i, h));
        out(x, y) = acc;
      }
  });
  return out;
}

/// Gaussian blur; sigma <= 0 returns the input unchanged.
inline Grid<double> gaussian_blur(const Grid<double>& src, double sigma, Exec exec = {}) {
  if (!(sigma > 0.0)) return src;
  return convolve_separable(src, gaussian_kernel(sigma), exec);
}

struct SobelResponse {
  Grid<double> gx;
  Grid<double> gy;
};

/// Unnormalised 3x3 Sobel derivatives.
inline SobelResponse sobel(const Grid<double>& g) {
  const int w = g.width();
  const int h = g.height();
  SobelResponse s{Grid<double>(w, h, 0.0), Grid<double>(w, h, 0.0)};
  auto at = [&](int x, int y) { return g(clamp_index(x, w), clamp_index(y, h)); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      s.gx(x, y) = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)) -
                   (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
      s.gy(x, y) = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)) -
                   (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
    }
  return s;
}

/// Binary dilation with a (2r+1)x(2r+1) square.
inline Mask dilate(const Mask& m, int radius) {
  if (radius <= 0) return m;
  const int w = m.width();
  const int h = m.height();
  Mask rows(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int i = std::max(0, x - radius); i <= std::min(w - 1, x + radius) && !v; ++i) v = m(i, y) ? 1 : 0;
      rows(x, y) = v;
    }
  Mask out(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = 0;
      for (int j = std::max(0, y - radius); j <= std::min(h - 1, y + radius) && !v; ++j) v = rows(x, j) ? 1 : 0;
      out(x, y) = v;
    }
  return out;
}

}  // namespace turbev::img
