#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "turbev/core.hpp"
#include "turbev/epaw.hpp"
#include "turbev/ettube.hpp"
#include "turbev/imgproc.hpp"

namespace turbev {

/// Aligns every frame to frame `t_ref`: valid pixels sample frame k at
/// x + (k - t_ref) v (bilinear, clamped border); invalid pixels pass through.
inline FrameSequence motion_compensate(const FrameSequence& seq, const MotionField& field, std::size_t t_ref) {
  require_same_shape(field, seq[0], "motion field and frames differ in geometry");
  detail::require(t_ref < seq.size(), ErrorCode::BadParam, "t_ref outside the sequence");
  std::vector<Frame> out;
  out.reserve(seq.size());
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const double steps = static_cast<double>(k) - static_cast<double>(t_ref);
    Grid<double> g = seq[k].pixels();
    for (int y = 0; y < g.height(); ++y)
      for (int x = 0; x < g.width(); ++x) {
        if (!field.is_valid(x, y)) continue;
        const Vec2f v = field.velocity()(x, y);
        g(x, y) = img::bilinear(seq[k].pixels(), x + steps * v.x, y + steps * v.y);
      }
    out.push_back(Frame::clamped(std::move(g)));
  }
  return FrameSequence(std::move(out), seq.t0(), seq.dt());
}

struct RestoreParams {
  TubeParams tube;
  EpawParams epaw;
  int dilate_radius = 2;
  /// Reference frame index; unset selects the last frame.
  std::optional<std::size_t> t_ref;
};

/// Intermediate products of one restore_frame run, kept for inspection.
struct RestoreResult {
  Frame restored;
  Frame scene;
  Frame object;
  TubeFitMap fits;
  MotionField motion;
  Mask scene_region;
  Micros t0 = 0;
  Micros half_window = 0;
};

/// Blend weight of the object branch: 1 inside the object region, 1/2 on
/// the one-pixel ring of scene pixels touching it, 0 elsewhere.
inline Grid<double> object_blend_weight(const Mask& scene_region) {
  const int W = scene_region.width();
  const int H = scene_region.height();
  Grid<double> w(W, H, 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!scene_region(x, y)) {
        w(x, y) = 1.0;
        continue;
      }
      bool touches = false;
      for (int dy = -1; dy <= 1 && !touches; ++dy)
        for (int dx = -1; dx <= 1 && !touches; ++dx)
          touches = scene_region.contains(x + dx, y + dy) && !scene_region(x + dx, y + dy);
      if (touches) w(x, y) = 0.5;
    }
  return w;
}

/// Full restoration of frame `t_ref`: tube fitting separates object motion
/// from turbulence, the scene branch runs EPAW restoration on the
/// turbulence-only region, the object branch motion-compensates and
/// averages, and the two are blended across a one-pixel feather.
///
/// The tube window is centred as close to the reference time as the stream
/// span allows and shrinks to half the span for short streams.
inline RestoreResult restore_frame_detailed(const FrameSequence& seq, const EventStream& stream,
                                            const RestoreParams& params, Exec exec = {}) {
  detail::require(seq.size() >= 2, ErrorCode::TooFewFrames, "restoration needs at least 2 frames");
  require_same_shape(stream, seq[0], "stream and frames differ in geometry");
  const std::size_t t_ref = params.t_ref.value_or(seq.size() - 1);
  detail::require(t_ref < seq.size(), ErrorCode::BadParam, "t_ref outside the sequence");

  TubeParams tube = params.tube;
  const Micros span = stream.t_end() - stream.t_begin();
  tube.half_window = std::max<Micros>(1, std::min(tube.half_window, span / 2));
  const Micros t0 = std::clamp(seq.timestamp(t_ref), stream.t_begin() + tube.half_window,
                               stream.t_end() - tube.half_window);
  TubeFitMap fits = fit_event_tubes(stream, t0, tube, seq.dt(), TubeEstimator::Ransac, exec);

  // Scene statistics come from the events the tubes do not explain.
  const std::vector<TubeLabel> labels = classify_events(stream, fits, tube.residual_tol);
  std::vector<Event> scene_events;
  scene_events.reserve(stream.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != TubeLabel::Tube) scene_events.push_back(stream.events()[i]);
  const EventStream scene_stream(stream.width(), stream.height(), std::move(scene_events), stream.t_begin(),
                                 stream.t_end());

  Mask region = scene_mask(fits, params.dilate_radius);
  Frame scene = epaw_restore_scene(seq, scene_stream, params.epaw, region);
  MotionField motion = project_to_motion_field(fits);
  Frame object = temporal_average(motion_compensate(seq, motion, t_ref));

  const Grid<double> w = object_blend_weight(region);
  Grid<double> out = scene.pixels();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double wi = w.values()[i];
    if (wi == 0.0) continue;
    out.values()[i] = (1.0 - wi) * scene.values()[i] + wi * object.values()[i];
  }
  return {Frame::clamped(std::move(out)), std::move(scene), std::move(object), std::move(fits), std::move(motion),
          std::move(region), t0, tube.half_window};
}

inline Frame restore_frame(const FrameSequence& seq, const EventStream& stream, const RestoreParams& params,
                           Exec exec = {}) {
  return restore_frame_detailed(seq, stream, params, exec).restored;
}

}  // namespace turbev
