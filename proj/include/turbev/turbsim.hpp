#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "turbev/core.hpp"
#include "turbev/imgproc.hpp"
#include "turbev/parallel.hpp"

namespace turbev {

/// Tilt-field generator parameters. `sigma_tilt` is the RMS displacement
/// magnitude in px, `corr_len` the spatial correlation length in px and
/// `rho_t` the frame-to-frame AR(1) coefficient.
struct TurbParams {
  double sigma_tilt = 1.0;
  double corr_len = 8.0;
  double rho_t = 0.5;
  double blur_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(std::isfinite(sigma_tilt) && sigma_tilt >= 0.0, ErrorCode::BadParam, "sigma_tilt must be >= 0");
    detail::require(std::isfinite(corr_len) && corr_len > 0.0, ErrorCode::BadParam, "corr_len must be > 0");
    detail::require(rho_t >= 0.0 && rho_t < 1.0, ErrorCode::BadParam, "rho_t must lie in [0,1)");
    detail::require(std::isfinite(blur_sigma) && blur_sigma >= 0.0, ErrorCode::BadParam, "blur_sigma must be >= 0");
  }
};

/// Spatially correlated, temporally AR(1) Gaussian tilts, rescaled to RMS
/// magnitude `sigma_tilt` and made exactly zero-mean per pixel.
///
/// All noise is drawn up front from one generator in (frame, component, row,
/// column) order over a padded raster, so the threaded convolution stage
/// cannot perturb the result. The padding lets the kernel see real noise at
/// the image border instead of clamped copies.
inline TurbulenceField generate_tilt_field(int width, int height, int n_frames, const TurbParams& params,
                                           Exec exec = {}) {
  params.validate();
  detail::require(width > 0 && height > 0, ErrorCode::BadParam, "empty geometry");
  detail::require(n_frames >= 2, ErrorCode::BadParam, "tilt field needs at least 2 frames");

  const std::size_t plane = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t total = plane * static_cast<std::size_t>(n_frames);
  if (params.sigma_tilt == 0.0) {
    return TurbulenceField(width, height, n_frames, std::vector<Vec2>(total), 0.0);
  }

  const std::vector<double> kernel = img::gaussian_kernel(params.corr_len);
  const int r = static_cast<int>(kernel.size() / 2);
  const int pw = width + 2 * r;
  const int ph = height + 2 * r;
  const std::size_t padded = static_cast<std::size_t>(pw) * static_cast<std::size_t>(ph);

  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(padded * 2 * static_cast<std::size_t>(n_frames));
  for (double& v : noise) v = normal(rng);

  // Smoothed white noise per frame and component.
  std::vector<Vec2> smooth(total);
  parallel_for(static_cast<std::size_t>(n_frames) * 2, exec, [&](std::size_t b, std::size_t e) {
    std::vector<double> rows(static_cast<std::size_t>(width) * static_cast<std::size_t>(ph));
    for (std::size_t job = b; job < e; ++job) {
      const std::size_t k = job / 2;
      const bool is_y = (job % 2) == 1;
      const double* src = noise.data() + job * padded;
      for (int y = 0; y < ph; ++y)
        for (int x = 0; x < width; ++x) {
          double acc = 0.0;
          for (int i = 0; i <= 2 * r; ++i) acc += kernel[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(y) * pw + x + i];
          rows[static_cast<std::size_t>(y) * width + x] = acc;
        }
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          double acc = 0.0;
          for (int i = 0; i <= 2 * r; ++i) acc += kernel[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>(y + i) * width + x];
          Vec2& d = smooth[k * plane + static_cast<std::size_t>(y) * width + x];
          (is_y ? d.y : d.x) = acc;
        }
    }
  });

  // AR(1) in time, stationary variance preserved.
  const double innov = std::sqrt(1.0 - params.rho_t * params.rho_t);
  for (int k = 1; k < n_frames; ++k)
    for (std::size_t i = 0; i < plane; ++i) {
      Vec2& cur = smooth[static_cast<std::size_t>(k) * plane + i];
      const Vec2& prev = smooth[static_cast<std::size_t>(k - 1) * plane + i];
      cur.x = params.rho_t * prev.x + innov * cur.x;
      cur.y = params.rho_t * prev.y + innov * cur.y;
    }

  for (std::size_t i = 0; i < plane; ++i) {
    double mx = 0.0, my = 0.0;
    for (int k = 0; k < n_frames; ++k) {
      mx += smooth[static_cast<std::size_t>(k) * plane + i].x;
      my += smooth[static_cast<std::size_t>(k) * plane + i].y;
    }
    mx /= n_frames;
    my /= n_frames;
    for (int k = 0; k < n_frames; ++k) {
      smooth[static_cast<std::size_t>(k) * plane + i].x -= mx;
      smooth[static_cast<std::size_t>(k) * plane + i].y -= my;
    }
  }

  double sq = 0.0;
  for (const Vec2& d : smooth) sq += d.x * d.x + d.y * d.y;
  const double rms = std::sqrt(sq / static_cast<double>(total));
  const double scale = rms > 0.0 ? params.sigma_tilt / rms : 0.0;
  double max_tilt = 0.0;
  for (Vec2& d : smooth) {
    d.x *= scale;
    d.y *= scale;
    max_tilt = std::max(max_tilt, std::hypot(d.x, d.y));
  }
  return TurbulenceField(width, height, n_frames, std::move(smooth), max_tilt);
}

/// output(x,y) = input sampled bilinearly at (x - dx, y - dy), clamped border.
inline Frame warp_frame(const Frame& frame, const TiltView& tilt) {
  detail::require(frame.width() == tilt.width && frame.height() == tilt.height, ErrorCode::GeometryMismatch,
                  "frame and tilt slice differ in geometry");
  Grid<double> out(frame.width(), frame.height(), 0.0);
  for (int y = 0; y < frame.height(); ++y)
    for (int x = 0; x < frame.width(); ++x) {
      const Vec2& d = tilt(x, y);
      out(x, y) = img::bilinear(frame.pixels(), x - d.x, y - d.y);
    }
  return Frame::clamped(std::move(out));
}

/// Warp every frame by its tilt slice, then blur by `blur_sigma` (skipped at 0).
inline FrameSequence apply_turbulence(const FrameSequence& seq, const TurbulenceField& field, double blur_sigma,
                                      Exec exec = {}) {
  detail::require(static_cast<int>(seq.size()) == field.n_frames(), ErrorCode::LengthMismatch,
                  "sequence has " + std::to_string(seq.size()) + " frames, field has " +
                      std::to_string(field.n_frames()));
  detail::require(seq.width() == field.width() && seq.height() == field.height(), ErrorCode::GeometryMismatch,
                  "sequence and tilt field differ in geometry");
  detail::require(std::isfinite(blur_sigma) && blur_sigma >= 0.0, ErrorCode::BadParam, "blur_sigma must be >= 0");
  std::vector<Frame> out(seq.size());
  parallel_for(seq.size(), exec, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      Frame warped = warp_frame(seq[k], field.slice(static_cast<int>(k)));
      out[k] = blur_sigma > 0.0 ? Frame::clamped(img::gaussian_blur(warped.pixels(), blur_sigma)) : std::move(warped);
    }
  });
  return FrameSequence(std::move(out), seq.t0(), seq.dt());
}

/// Foreground object: intensities plus an alpha matte in [0,1].
struct Sprite {
  Frame image;
  Grid<double> alpha;

  int width() const noexcept { return image.width(); }
  int height() const noexcept { return image.height(); }
};

struct InjectedScene {
  FrameSequence frames;
  std::vector<Mask> object_masks;  ///< alpha > 0, one per frame
  MotionField truth;               ///< sprite velocity on the last frame's support
};

/// Alpha-composites `sprite` with its top-left corner at the sub-pixel
/// position `pos`. Returns the composite and the alpha coverage.
inline std::pair<Frame, Grid<double>> composite_sprite(const Frame& background, const Sprite& sprite, Vec2 pos) {
  require_same_shape(sprite.image, sprite.alpha, "sprite image and alpha differ in geometry");
  Grid<double> premult(sprite.width(), sprite.height(), 0.0);
  for (int y = 0; y < sprite.height(); ++y)
    for (int x = 0; x < sprite.width(); ++x) premult(x, y) = sprite.alpha(x, y) * sprite.image(x, y);

  Grid<double> out = background.pixels();
  Grid<double> coverage(background.width(), background.height(), 0.0);
  const int x0 = std::max(0, static_cast<int>(std::floor(pos.x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(pos.y)));
  const int x1 = std::min(background.width() - 1, static_cast<int>(std::ceil(pos.x)) + sprite.width() - 1);
  const int y1 = std::min(background.height() - 1, static_cast<int>(std::ceil(pos.y)) + sprite.height() - 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double u = x - pos.x;
      const double v = y - pos.y;
      const double a = img::bilinear_zero(sprite.alpha, u, v);
      const double s = img::bilinear_zero(premult, u, v);
      out(x, y) = background(x, y) * (1.0 - a) + s;
      coverage(x, y) = a;
    }
  return {Frame::clamped(std::move(out)), std::move(coverage)};
}

/// Composites the sprite into each background frame along the trajectory
/// start + k * velocity (px/frame).
inline InjectedScene inject_object(const FrameSequence& backgrounds, const Sprite& sprite, Vec2 start, Vec2 velocity) {
  const int W = backgrounds.width();
  const int H = backgrounds.height();
  const int n = static_cast<int>(backgrounds.size());
  for (int k = 0; k < n; ++k) {
    const Vec2 p{start.x + k * velocity.x, start.y + k * velocity.y};
    const bool inside = std::floor(p.x) >= 0.0 && std::floor(p.y) >= 0.0 &&
                        std::ceil(p.x) + sprite.width() <= W && std::ceil(p.y) + sprite.height() <= H;
    detail::require(inside, ErrorCode::TrajectoryOutOfBounds,
                    "sprite leaves the frame at frame " + std::to_string(k));
  }
  std::vector<Frame> frames;
  std::vector<Mask> masks;
  for (int k = 0; k < n; ++k) {
    const Vec2 p{start.x + k * velocity.x, start.y + k * velocity.y};
    auto [frame, coverage] = composite_sprite(backgrounds[static_cast<std::size_t>(k)], sprite, p);
    Mask m(W, H, 0);
    for (std::size_t i = 0; i < m.size(); ++i) m.values()[i] = coverage.values()[i] > 0.0 ? 1 : 0;
    frames.push_back(std::move(frame));
    masks.push_back(std::move(m));
  }
  Grid<Vec2f> vel(W, H);
  const Mask& last = masks.back();
  for (std::size_t i = 0; i < last.size(); ++i)
    if (last.values()[i]) vel.values()[i] = {static_cast<float>(velocity.x), static_cast<float>(velocity.y)};
  return {FrameSequence(std::move(frames), backgrounds.t0(), backgrounds.dt()), std::move(masks),
          MotionField(std::move(vel), last)};
}

inline InjectedScene inject_object(const Frame& background, const Sprite& sprite, Vec2 start, Vec2 velocity,
                                   int n_frames, Micros dt, Micros t0 = 0) {
  detail::require(n_frames >= 1, ErrorCode::BadParam, "n_frames must be >= 1");
  return inject_object(FrameSequence(std::vector<Frame>(static_cast<std::size_t>(n_frames), background), t0, dt),
                       sprite, start, velocity);
}

}  // namespace turbev
