#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "turbev/core.hpp"
#include "turbev/parallel.hpp"

namespace turbev {

/// Event-tube fitting parameters: temporal half-window (µs), spatial
/// neighbourhood radius (px), minimum inlier count, inlier/residual
/// tolerance (px), minimum time covered by the inliers (µs), RANSAC
/// hypothesis count and seed.
///
/// residual_tol stays below 1 px so a line cannot sit between two adjacent
/// rows of events and claim both.
struct TubeParams {
  Micros half_window = 20000;
  int radius = 3;
  std::uint32_t min_support = 4;
  double residual_tol = 0.5;
  Micros min_duration = 9000;
  int ransac_iters = 64;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(half_window > 0, ErrorCode::BadParam, "half_window must be > 0");
    detail::require(radius >= 1, ErrorCode::BadParam, "radius must be >= 1");
    detail::require(min_support >= 3, ErrorCode::BadParam, "min_support must be >= 3");
    detail::require(std::isfinite(residual_tol) && residual_tol > 0.0, ErrorCode::BadParam, "residual_tol must be > 0");
    detail::require(ransac_iters >= 1, ErrorCode::BadParam, "ransac_iters must be >= 1");
  }
};

enum class TubeEstimator { Ransac, LeastSquares };

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Event in tube coordinates: pixel position and time relative to t0 (µs).
struct TubePoint {
  double x;
  double y;
  double t;
  int p = 1;
};

/// x(t) = base + t * vel, t relative to t0 in µs.
struct Line {
  Vec2 base;
  Vec2 vel;

  double dist2(const TubePoint& p) const noexcept {
    const double dx = p.x - (base.x + p.t * vel.x);
    const double dy = p.y - (base.y + p.t * vel.y);
    return dx * dx + dy * dy;
  }
};

/// Least-squares trajectory through `pts`; nullopt when all share one time.
inline std::optional<Line> least_squares_line(std::span<const TubePoint> pts) {
  const double n = static_cast<double>(pts.size());
  double mt = 0.0, mx = 0.0, my = 0.0;
  for (const auto& p : pts) {
    mt += p.t;
    mx += p.x;
    my += p.y;
  }
  mt /= n;
  mx /= n;
  my /= n;
  double stt = 0.0, stx = 0.0, sty = 0.0;
  for (const auto& p : pts) {
    const double dt = p.t - mt;
    stt += dt * dt;
    stx += dt * (p.x - mx);
    sty += dt * (p.y - my);
  }
  if (stt <= 0.0) return std::nullopt;
  const Vec2 vel{stx / stt, sty / stt};
  return Line{{mx - mt * vel.x, my - mt * vel.y}, vel};
}

inline double rms_distance(const Line& line, std::span<const TubePoint> pts) {
  double acc = 0.0;
  for (const auto& p : pts) acc += line.dist2(p);
  return pts.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(pts.size()));
}

struct LineFit {
  Line line;
  double residual = 0.0;
  std::uint32_t support = 0;
  std::uint32_t pixels = 0;  ///< distinct pixels among the inliers
  double duration = 0.0;     ///< time covered by the inliers, µs
};

/// Fills the residual, support, pixel and duration fields from `inliers`.
inline LineFit describe_fit(const Line& line, std::span<const TubePoint> inliers) {
  LineFit fit{line, rms_distance(line, inliers), static_cast<std::uint32_t>(inliers.size())};
  std::vector<std::pair<double, double>> px;
  px.reserve(inliers.size());
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < inliers.size(); ++i) {
    px.emplace_back(inliers[i].x, inliers[i].y);
    lo = i == 0 ? inliers[i].t : std::min(lo, inliers[i].t);
    hi = i == 0 ? inliers[i].t : std::max(hi, inliers[i].t);
  }
  std::sort(px.begin(), px.end());
  fit.pixels = static_cast<std::uint32_t>(std::unique(px.begin(), px.end()) - px.begin());
  fit.duration = hi - lo;
  return fit;
}

/// RANSAC over event pairs. A moving edge keeps its polarity, so a
/// hypothesis is drawn from two events of equal polarity and only counts
/// inliers of that polarity. Ties in inlier count go to the lower squared
/// error, then to the earlier hypothesis. The winner is refit by least
/// squares on its inliers.
inline std::optional<LineFit> ransac_line(std::span<const TubePoint> pts, double tol, int iters, std::uint64_t seed) {
  const std::size_t n = pts.size();
  if (n < 2) return std::nullopt;
  std::mt19937_64 rng(seed);
  const double tol2 = tol * tol;
  std::optional<Line> best;
  std::size_t best_count = 0;
  double best_sse = 0.0;
  int best_p = 0;
  for (int it = 0; it < iters; ++it) {
    const std::size_t i = static_cast<std::size_t>(rng() % n);
    std::size_t j = static_cast<std::size_t>(rng() % (n - 1));
    if (j >= i) ++j;
    const TubePoint& a = pts[i];
    const TubePoint& b = pts[j];
    if (a.t == b.t || a.p != b.p) continue;
    const Vec2 vel{(b.x - a.x) / (b.t - a.t), (b.y - a.y) / (b.t - a.t)};
    const Line hyp{{a.x - a.t * vel.x, a.y - a.t * vel.y}, vel};
    std::size_t count = 0;
    double sse = 0.0;
    for (const auto& p : pts) {
      if (p.p != a.p) continue;
      const double d2 = hyp.dist2(p);
      if (d2 <= tol2) {
        ++count;
        sse += d2;
      }
    }
    if (!best || count > best_count || (count == best_count && sse < best_sse)) {
      best = hyp;
      best_p = a.p;
      best_count = count;
      best_sse = sse;
    }
  }
  if (!best) return std::nullopt;

  std::vector<TubePoint> inliers;
  inliers.reserve(best_count);
  for (const auto& p : pts)
    if (p.p == best_p && best->dist2(p) <= tol2) inliers.push_back(p);
  return describe_fit(least_squares_line(inliers).value_or(*best), inliers);
}

}  // namespace detail

/// Fits one linear trajectory per pixel to the events within `radius` px of
/// it and within [t0 - half_window, t0 + half_window].
///
/// Pixels with fewer than `min_support` neighbouring events are EMPTY. The
/// rest are TUBE when the fitted line keeps at least `min_support` inliers
/// with RMS residual <= `residual_tol`, and those inliers come from at least
/// `min_support` distinct pixels and cover at least `min_duration` µs;
/// otherwise TURBULENCE. Turbulence jitter re-fires the same pixels or
/// sweeps an edge in a fraction of a frame, so it fails the last two tests.
/// Velocities are reported in px/frame when `frame_dt` is given, px/ms
/// otherwise.
///
/// Each pixel draws from its own generator seeded with seed ^ pixel index,
/// so the map is identical for any thread count.
inline TubeFitMap fit_event_tubes(const EventStream& stream, Micros t0, const TubeParams& params,
                                  std::optional<Micros> frame_dt = std::nullopt,
                                  TubeEstimator estimator = TubeEstimator::Ransac, Exec exec = {}) {
  params.validate();
  const Micros hw = params.half_window;
  detail::require(t0 >= hw && t0 - hw >= stream.t_begin() && t0 + hw <= stream.t_end(), ErrorCode::WindowOutOfSpan,
                  "tube window [t0-" + std::to_string(hw) + ", t0+" + std::to_string(hw) + "] leaves the stream span");
  const int W = stream.width();
  const int H = stream.height();
  const double unit = frame_dt ? static_cast<double>(*frame_dt) : 1000.0;
  TubeFitMap fits = TubeFitMap::empty(W, H, t0, hw, unit, params.residual_tol, params.min_support);

  // Bucket window events by pixel (CSR layout, stream order within a pixel).
  const auto window = stream.slice(t0 - hw, t0 + hw + 1);
  std::vector<std::uint32_t> start(static_cast<std::size_t>(W) * H + 1, 0);
  for (const Event& e : window) ++start[static_cast<std::size_t>(e.y) * W + e.x + 1];
  for (std::size_t i = 1; i < start.size(); ++i) start[i] += start[i - 1];
  std::vector<detail::TubePoint> bucket(window.size());
  {
    std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
    for (const Event& e : window) {
      const double rel = static_cast<double>(e.t) - static_cast<double>(t0);
      bucket[fill[static_cast<std::size_t>(e.y) * W + e.x]++] = {double(e.x), double(e.y), rel, e.p};
    }
  }

  std::vector<std::pair<int, int>> offsets;
  for (int dy = -params.radius; dy <= params.radius; ++dy)
    for (int dx = -params.radius; dx <= params.radius; ++dx)
      if (dx * dx + dy * dy <= params.radius * params.radius) offsets.emplace_back(dx, dy);

  parallel_for(static_cast<std::size_t>(H), exec, [&](std::size_t yb, std::size_t ye) {
    std::vector<detail::TubePoint> pts;
    for (int y = static_cast<int>(yb); y < static_cast<int>(ye); ++y)
      for (int x = 0; x < W; ++x) {
        pts.clear();
        for (auto [dx, dy] : offsets) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
          const std::size_t p = static_cast<std::size_t>(ny) * W + nx;
          pts.insert(pts.end(), bucket.begin() + start[p], bucket.begin() + start[p + 1]);
        }
        if (pts.size() < params.min_support) continue;

        std::optional<detail::LineFit> fit;
        if (estimator == TubeEstimator::Ransac) {
          const std::uint64_t px = static_cast<std::uint64_t>(y) * W + x;
          fit = detail::ransac_line(pts, params.residual_tol, params.ransac_iters, detail::splitmix64(params.seed ^ px));
        } else if (auto line = detail::least_squares_line(pts)) {
          fit = detail::describe_fit(*line, pts);
        }
        if (!fit) {
          // Every neighbouring event shares one timestamp: no trajectory.
          fits.support(x, y) = static_cast<std::uint32_t>(pts.size());
          fits.residual(x, y) = std::numeric_limits<double>::infinity();
          fits.label(x, y) = TubeLabel::Turbulence;
          continue;
        }
        fits.base(x, y) = fit->line.base;
        fits.velocity(x, y) = {fit->line.vel.x * unit, fit->line.vel.y * unit};
        fits.residual(x, y) = fit->residual;
        fits.support(x, y) = fit->support;
        const bool tube = fit->residual <= params.residual_tol && fit->support >= params.min_support &&
                          fit->pixels >= params.min_support &&
                          fit->duration >= static_cast<double>(params.min_duration);
        fits.label(x, y) = tube ? TubeLabel::Tube : TubeLabel::Turbulence;
      }
  });
  return fits;
}

/// Spatial distance between an event and the fitted line of `pixel` at the
/// event's own timestamp.
inline double tube_distance(const TubeFitMap& fits, int x, int y, const Event& e) {
  const double rel = (static_cast<double>(e.t) - static_cast<double>(fits.t0)) / fits.time_unit_us;
  const Vec2 b = fits.base(x, y);
  const Vec2 v = fits.velocity(x, y);
  return std::hypot(e.x - (b.x + rel * v.x), e.y - (b.y + rel * v.y));
}

/// One label per stream event: TUBE iff the event lies in the fit window,
/// its pixel is TUBE, and it is within `tol` px of that pixel's line.
inline std::vector<TubeLabel> classify_events(const EventStream& stream, const TubeFitMap& fits, double tol) {
  require_same_shape(stream, fits, "stream and fits differ in geometry");
  std::vector<TubeLabel> labels;
  labels.reserve(stream.size());
  const Micros lo = fits.t0 >= fits.half_window ? fits.t0 - fits.half_window : 0;
  const Micros hi = fits.t0 + fits.half_window;
  for (const Event& e : stream.events()) {
    const bool in_window = e.t >= lo && e.t <= hi;
    const bool tube = in_window && fits.label(e.x, e.y) == TubeLabel::Tube && tube_distance(fits, e.x, e.y, e) <= tol;
    labels.push_back(tube ? TubeLabel::Tube : TubeLabel::Turbulence);
  }
  return labels;
}

/// The h x w x 2 velocity tensor: TUBE velocities, invalid elsewhere.
inline MotionField project_to_motion_field(const TubeFitMap& fits) {
  Grid<Vec2f> vel(fits.width(), fits.height());
  Mask valid(fits.width(), fits.height(), 0);
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (fits.label.values()[i] != TubeLabel::Tube) continue;
    const Vec2 v = fits.velocity.values()[i];
    vel.values()[i] = {static_cast<float>(v.x), static_cast<float>(v.y)};
    valid.values()[i] = 1;
  }
  return MotionField(std::move(vel), std::move(valid));
}

/// Keeps motion only where the gradient magnitude reaches `grad_thresh`.
inline MotionField edge_masked_motion(const MotionField& field, const GradientMap& grad, double grad_thresh) {
  require_same_shape(field, grad, "motion field and gradient map differ in geometry");
  Grid<Vec2f> vel = field.velocity();
  Mask valid = field.valid();
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (valid.values()[i] && grad.magnitude().values()[i] >= grad_thresh) continue;
    valid.values()[i] = 0;
    vel.values()[i] = {};
  }
  return MotionField(std::move(vel), std::move(valid));
}

}  // namespace turbev
