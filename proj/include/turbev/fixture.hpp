#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "turbev/core.hpp"
#include "turbev/evsynth.hpp"
#include "turbev/turbsim.hpp"

// Standard synthetic scenes. Their construction is part of the public
// contract: every quantity below is fixed so runs are reproducible.
namespace turbev::fixture {

enum class Preset { Static, Bar, Textured };

inline Preset parse_preset(std::string_view name) {
  if (name == "static") return Preset::Static;
  if (name == "bar") return Preset::Bar;
  if (name == "textured") return Preset::Textured;
  throw Error(ErrorCode::BadParam, "unknown preset '" + std::string(name) + "'");
}

inline std::string_view preset_name(Preset p) {
  switch (p) {
    case Preset::Static: return "static";
    case Preset::Bar: return "bar";
    case Preset::Textured: return "textured";
  }
  return "?";
}

struct FixtureParams {
  Preset preset = Preset::Textured;
  int width = 0;   ///< 0 selects the preset default
  int height = 0;  ///< 0 selects the preset default
  int n_frames = 8;
  Micros dt = 6000;
  std::uint64_t seed = 7;
  TurbParams turb{};
  EvsParams evs{};
  /// Bar preset: sprite velocity in px/frame.
  Vec2 bar_velocity{2.0, 0.0};
};

struct Fixture {
  FixtureParams params;
  FrameSequence clean;
  FrameSequence turbulent;
  EventStream events;
  /// Tilts for the pre-roll frames followed by the visible frames.
  TurbulenceField field;
  int preroll = 0;
  std::vector<Mask> object_masks;
  MotionField truth;
  /// Construction-time label per event: 1 when the moving object caused it.
  std::vector<std::uint8_t> event_is_object;

  const Frame& clean_reference() const { return clean[clean.size() - 1]; }
};

inline constexpr std::uint64_t kSceneSeed = 0x5eedULL;
inline constexpr double kBandLevel = 0.55;

/// Piecewise-constant texture: overlapping rectangles of random intensity on
/// a mid-grey canvas. Independent of the turbulence seed.
inline Grid<double> textured_scene(int width, int height) {
  Grid<double> g(width, height, 0.5);
  std::mt19937_64 rng(kSceneSeed);
  const int n_rects = std::max(4, width * height / 160);
  for (int i = 0; i < n_rects; ++i) {
    const int w = 3 + static_cast<int>(rng() % 14);
    const int h = 3 + static_cast<int>(rng() % 14);
    const int x0 = static_cast<int>(rng() % static_cast<std::uint64_t>(width)) - w / 2;
    const int y0 = static_cast<int>(rng() % static_cast<std::uint64_t>(height)) - h / 2;
    const double v = 0.1 + 0.8 * static_cast<double>(rng() % 1001) / 1000.0;
    for (int y = std::max(0, y0); y < std::min(height, y0 + h); ++y)
      for (int x = std::max(0, x0); x < std::min(width, x0 + w); ++x) g(x, y) = v;
  }
  return g;
}

/// Geometry of the bar sprite: seven one-pixel stripes on alternate rows with
/// log-linear ramps at both ends, so each stripe end crosses one contrast
/// level at a single, exactly linear instant.
struct BarGeometry {
  static constexpr int kStripes = 7;
  static constexpr int kHeight = 2 * kStripes - 1;
  static constexpr int kTrailRamp = 11;
  static constexpr int kCore = 20;
  static constexpr int kLeadRamp = 8;
  static constexpr int kLength = kTrailRamp + kCore + kLeadRamp;
  static constexpr int kPreroll = 6;
  static constexpr int kBandMargin = 7;
};

/// Sprite whose stripe intensity rises by 1.8 C in log units over the band
/// level. Stripes sit on even rows; odd rows are transparent.
inline Sprite bar_sprite(const EvsParams& evs) {
  using G = BarGeometry;
  const double lb = std::log(kBandLevel + evs.eps);
  const double rise = 1.8 * evs.C;
  Grid<double> image(G::kLength, G::kHeight, 0.0);
  Grid<double> alpha(G::kLength, G::kHeight, 0.0);
  for (int u = 0; u < G::kLength; ++u) {
    const int q = u + 1;             // steps from the left (trailing) outside
    const int s = G::kLength - u;    // steps from the right (leading) outside
    double frac = 1.0;
    if (q <= G::kTrailRamp) frac = static_cast<double>(q) / (G::kTrailRamp + 1);
    if (s <= G::kLeadRamp) frac = std::min(frac, static_cast<double>(s) / (G::kLeadRamp + 1));
    const double value = std::exp(lb + rise * frac) - evs.eps;
    for (int row = 0; row < G::kHeight; row += 2) {
      image(u, row) = value;
      alpha(u, row) = 1.0;
    }
  }
  return {Frame::clamped(std::move(image)), std::move(alpha)};
}

namespace internal {

inline std::vector<std::uint8_t> label_object_events(const EventStream& events, const std::vector<Mask>& masks,
                                                     const FrameSequence& seq) {
  std::vector<std::uint8_t> labels;
  labels.reserve(events.size());
  for (const Event& e : events.events()) {
    const std::size_t k = static_cast<std::size_t>((e.t - seq.t0()) / seq.dt());
    const std::size_t k0 = std::min(k, masks.size() - 1);
    const std::size_t k1 = std::min(k + 1, masks.size() - 1);
    labels.push_back(masks[k0](e.x, e.y) || masks[k1](e.x, e.y) ? 1 : 0);
  }
  return labels;
}

}  // namespace internal

/// Builds the clean and turbulent sequences plus events for a preset.
///
/// static: textured scene, no turbulence, no motion.
/// textured: textured scene under turbulence.
/// bar: striped bar moving over a flat band of a textured scene; only the
///   background is tilted, and events come from a run that starts
///   BarGeometry::kPreroll frames before the first visible frame.
inline Fixture make_fixture(const FixtureParams& params, Exec exec = {}) {
  turbev::detail::require(params.n_frames >= 2, ErrorCode::BadParam, "fixture needs at least 2 frames");
  Fixture fx;
  fx.params = params;
  const bool bar = params.preset == Preset::Bar;
  const int W = params.width > 0 ? params.width : (bar ? 96 : 64);
  const int H = params.height > 0 ? params.height : 64;
  const int pre = bar ? BarGeometry::kPreroll : 0;
  const int total = pre + params.n_frames;
  fx.preroll = pre;

  TurbParams turb = params.turb;
  turb.seed = params.seed;
  if (params.preset == Preset::Static) turb.sigma_tilt = 0.0;

  Grid<double> scene = textured_scene(W, H);
  int band_y0 = 0;
  if (bar) {
    using G = BarGeometry;
    band_y0 = (H - G::kHeight) / 2;
    for (int y = std::max(0, band_y0 - G::kBandMargin); y < std::min(H, band_y0 + G::kHeight + G::kBandMargin); ++y)
      for (int x = 0; x < W; ++x) scene(x, y) = kBandLevel;
  }
  const Frame scene_frame(std::move(scene));
  const Micros t_first = static_cast<Micros>(pre) * params.dt;
  const FrameSequence still(std::vector<Frame>(static_cast<std::size_t>(total), scene_frame), 0, params.dt);

  fx.field = generate_tilt_field(W, H, total, turb, exec);
  FrameSequence turbulent_all = apply_turbulence(still, fx.field, turb.blur_sigma, exec);

  FrameSequence clean_all = still;
  std::vector<Mask> masks_all(static_cast<std::size_t>(total), Mask(W, H, 0));
  MotionField truth(W, H);
  if (bar) {
    using G = BarGeometry;
    const Sprite sprite = bar_sprite(params.evs);
    const Vec2 start{4.0, static_cast<double>(band_y0)};
    InjectedScene clean_obj = inject_object(still, sprite, start, params.bar_velocity);
    InjectedScene turb_obj = inject_object(turbulent_all, sprite, start, params.bar_velocity);
    clean_all = std::move(clean_obj.frames);
    turbulent_all = std::move(turb_obj.frames);
    masks_all = std::move(turb_obj.object_masks);
    truth = std::move(turb_obj.truth);
    (void)G::kLength;
  }

  const EventStream all_events = synthesize_events(turbulent_all, params.evs, exec);
  auto visible = [&](const FrameSequence& s) {
    std::vector<Frame> f(s.frames().begin() + pre, s.frames().end());
    return FrameSequence(std::move(f), t_first, params.dt);
  };
  fx.clean = visible(clean_all);
  fx.turbulent = visible(turbulent_all);
  const auto kept = all_events.slice(t_first, fx.turbulent.t_last() + 1);
  fx.events = EventStream(W, H, std::vector<Event>(kept.begin(), kept.end()), t_first, fx.turbulent.t_last());
  fx.object_masks.assign(masks_all.begin() + pre, masks_all.end());
  fx.truth = std::move(truth);
  fx.event_is_object = internal::label_object_events(fx.events, fx.object_masks, fx.turbulent);
  return fx;
}

}  // namespace turbev::fixture
