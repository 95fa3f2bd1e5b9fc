#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "turbev/core.hpp"
#include "turbev/imgproc.hpp"
#include "turbev/paep.hpp"

namespace turbev {

/// True on turbulence-only scene pixels: everything outside the TUBE pixels
/// dilated by a (2r+1) square.
inline Mask scene_mask(const TubeFitMap& fits, int dilate_radius) {
  Mask tube(fits.width(), fits.height(), 0);
  for (std::size_t i = 0; i < tube.size(); ++i) tube.values()[i] = fits.label.values()[i] == TubeLabel::Tube ? 1 : 0;
  Mask grown = img::dilate(tube, dilate_radius);
  for (auto& v : grown.values()) v = v ? 0 : 1;
  return grown;
}

/// Per-pixel mean over frames. Where `mask` is false the temporally central
/// frame (index size/2) is copied instead.
inline Frame temporal_average(const FrameSequence& seq, const std::optional<Mask>& mask = std::nullopt) {
  if (mask) require_same_shape(*mask, seq[0], "mask and frames differ in geometry");
  const std::size_t n = seq.size();
  const Frame& central = seq[n / 2];
  Grid<double> out(seq.width(), seq.height(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask && !mask->values()[i]) {
      out.values()[i] = central.values()[i];
      continue;
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += seq[k].values()[i];
    out.values()[i] = acc / static_cast<double>(n);
  }
  return Frame::clamped(std::move(out));
}

/// Unsharp masking scaled by the EPAW weight excess:
/// clamp(avg + lambda (w - 1) (avg - blur(avg, sigma))).
inline Frame epaw_sharpen(const Frame& avg, const Grid<double>& weights, double lambda, double sigma) {
  require_same_shape(avg, weights, "average and weights differ in geometry");
  detail::require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::BadParam, "lambda must be >= 0");
  detail::require(std::isfinite(sigma) && sigma > 0.0, ErrorCode::BadParam, "unsharp sigma must be > 0");
  const Grid<double> blurred = img::gaussian_blur(avg.pixels(), sigma);
  Grid<double> out = avg.pixels();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double excess = weights.values()[i] - 1.0;
    if (excess == 0.0 || lambda == 0.0) continue;
    out.values()[i] += lambda * excess * (avg.values()[i] - blurred.values()[i]);
  }
  return Frame::clamped(std::move(out));
}

struct EpawParams {
  double beta = 1.0;
  double lambda = 1.0;
  double sigma_us = 1.5;
  /// Maximum PAEP gap in µs; 0 selects twice the frame interval.
  Micros max_gap = 0;
  /// PAEP counting window; unset means the frame sequence span.
  std::optional<Micros> window_begin;
  std::optional<Micros> window_end;
};

/// count_paep -> epaw_weights -> temporal_average -> epaw_sharpen.
inline Frame epaw_restore_scene(const FrameSequence& seq, const EventStream& stream, const EpawParams& params,
                                const std::optional<Mask>& mask = std::nullopt) {
  require_same_shape(stream, seq[0], "stream and frames differ in geometry");
  detail::require(stream.t_begin() <= seq.t0() && stream.t_end() >= seq.t_last(), ErrorCode::BadSpan,
                  "event stream does not cover the frame span");
  const Micros begin = params.window_begin.value_or(seq.t0());
  // Events at the last frame timestamp belong to the window.
  const Micros end = params.window_end.value_or(seq.t_last() + 1);
  const Micros gap = params.max_gap > 0 ? params.max_gap : 2 * seq.dt();
  const PaepMap paep = count_paep(stream, begin, end, gap);
  const Grid<double> weights = epaw_weights(paep, params.beta);
  const Frame avg = temporal_average(seq, mask);
  return epaw_sharpen(avg, weights, params.lambda, params.sigma_us);
}

}  // namespace turbev
