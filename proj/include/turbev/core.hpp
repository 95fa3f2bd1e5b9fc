#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "turbev/error.hpp"
#include "turbev/grid.hpp"

namespace turbev {

/// Timestamps are integer microseconds throughout.
using Micros = std::uint64_t;

struct Event {
  Micros t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Canonical stream order: time, then row, column, polarity.
inline bool event_before(const Event& a, const Event& b) noexcept {
  return std::tie(a.t, a.y, a.x, a.p) < std::tie(b.t, b.y, b.x, b.p);
}

inline void sort_events(std::vector<Event>& events) {
  std::sort(events.begin(), events.end(), event_before);
}

class EventStream {
 public:
  EventStream() = default;

  /// Validates polarity and bounds, then sorts. The span defaults to the
  /// first and last timestamps (0..0 for an empty stream).
  EventStream(int width, int height, std::vector<Event> events)
      : EventStream(width, height, std::move(events), std::nullopt, std::nullopt) {}

  EventStream(int width, int height, std::vector<Event> events, std::optional<Micros> t_begin,
              std::optional<Micros> t_end)
      : width_(width), height_(height), events_(std::move(events)) {
    detail::require(width > 0 && height > 0 && width <= 65535 && height <= 65535, ErrorCode::BadParam,
                    "sensor geometry must be within 1..65535");
    for (const Event& e : events_) {
      detail::require(e.p == 1 || e.p == -1, ErrorCode::BadPolarity,
                      "polarity " + std::to_string(int(e.p)) + " is not +1 or -1");
      detail::require(e.x < width && e.y < height, ErrorCode::OutOfBounds,
                      "event at (" + std::to_string(e.x) + "," + std::to_string(e.y) + ") outside " +
                          std::to_string(width) + "x" + std::to_string(height));
    }
    sort_events(events_);
    const Micros first = events_.empty() ? 0 : events_.front().t;
    const Micros last = events_.empty() ? 0 : events_.back().t;
    t_begin_ = t_begin.value_or(first);
    t_end_ = t_end.value_or(std::max(last, t_begin_));
    detail::require(t_begin_ <= t_end_, ErrorCode::BadSpan, "t_begin > t_end");
    detail::require(events_.empty() || (t_begin_ <= first && last <= t_end_), ErrorCode::OutOfBounds,
                    "event timestamp outside the stream span");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  Micros t_begin() const noexcept { return t_begin_; }
  Micros t_end() const noexcept { return t_end_; }
  std::span<const Event> events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }

  /// Events with t in [t_begin, t_end).
  std::span<const Event> slice(Micros t_begin, Micros t_end) const {
    auto lo = std::lower_bound(events_.begin(), events_.end(), t_begin,
                               [](const Event& e, Micros t) { return e.t < t; });
    auto hi = std::lower_bound(lo, events_.end(), t_end, [](const Event& e, Micros t) { return e.t < t; });
    return {lo, hi};
  }

  friend bool operator==(const EventStream&, const EventStream&) = default;

 private:
  int width_ = 1;
  int height_ = 1;
  std::vector<Event> events_;
  Micros t_begin_ = 0;
  Micros t_end_ = 0;
};

inline EventStream new_event_stream(int width, int height, std::vector<Event> events) {
  return EventStream(width, height, std::move(events));
}

/// Grayscale frame with linear intensities in [0,1].
class Frame {
 public:
  Frame() = default;
  explicit Frame(Grid<double> pixels) : pixels_(std::move(pixels)) {
    for (double v : pixels_.values()) {
      detail::require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorCode::InvalidValue,
                      "frame intensity " + std::to_string(v) + " outside [0,1]");
    }
  }
  Frame(int width, int height, std::vector<double> pixels) : Frame(Grid<double>(width, height, std::move(pixels))) {}

  static Frame constant(int width, int height, double value) { return Frame(Grid<double>(width, height, value)); }

  /// Clamps into [0,1]; NaN is rejected rather than silently mapped.
  static Frame clamped(Grid<double> pixels) {
    for (double& v : pixels.values()) {
      detail::require(!std::isnan(v), ErrorCode::InvalidValue, "NaN intensity");
      v = std::clamp(v, 0.0, 1.0);
    }
    return Frame(std::move(pixels));
  }

  int width() const noexcept { return pixels_.width(); }
  int height() const noexcept { return pixels_.height(); }
  double operator()(int x, int y) const noexcept { return pixels_(x, y); }
  const Grid<double>& pixels() const noexcept { return pixels_; }
  std::span<const double> values() const noexcept { return pixels_.values(); }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  Grid<double> pixels_;
};

class FrameSequence {
 public:
  FrameSequence() = default;
  FrameSequence(std::vector<Frame> frames, Micros t0, Micros dt)
      : frames_(std::move(frames)), t0_(t0), dt_(dt) {
    detail::require(!frames_.empty(), ErrorCode::TooFewFrames, "sequence needs at least one frame");
    detail::require(dt_ > 0, ErrorCode::BadParam, "frame interval must be positive");
    for (const Frame& f : frames_) require_same_shape(f, frames_.front(), "frames differ in geometry");
  }

  int width() const noexcept { return frames_.front().width(); }
  int height() const noexcept { return frames_.front().height(); }
  std::size_t size() const noexcept { return frames_.size(); }
  const Frame& operator[](std::size_t k) const noexcept { return frames_[k]; }
  std::span<const Frame> frames() const noexcept { return frames_; }
  Micros t0() const noexcept { return t0_; }
  Micros dt() const noexcept { return dt_; }
  Micros timestamp(std::size_t k) const noexcept { return t0_ + static_cast<Micros>(k) * dt_; }
  Micros t_last() const noexcept { return timestamp(frames_.size() - 1); }

  friend bool operator==(const FrameSequence&, const FrameSequence&) = default;

 private:
  std::vector<Frame> frames_;
  Micros t0_ = 0;
  Micros dt_ = 1;
};

/// One frame of a tilt field, borrowed from its owner.
struct TiltView {
  int width = 0;
  int height = 0;
  std::span<const Vec2> displacement;

  const Vec2& operator()(int x, int y) const noexcept {
    return displacement[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

class TurbulenceField {
 public:
  static constexpr double kMeanTolerance = 1e-6;

  TurbulenceField() = default;

  /// `displacement` is indexed (frame, y, x). Rejects fields whose per-pixel
  /// temporal mean exceeds 1e-6 px or whose magnitudes exceed `max_tilt`.
  TurbulenceField(int width, int height, int n_frames, std::vector<Vec2> displacement, double max_tilt)
      : width_(width), height_(height), n_frames_(n_frames), d_(std::move(displacement)), max_tilt_(max_tilt) {
    detail::require(width > 0 && height > 0 && n_frames > 0, ErrorCode::BadParam, "empty tilt field");
    const std::size_t plane = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    detail::require(d_.size() == plane * static_cast<std::size_t>(n_frames), ErrorCode::GeometryMismatch,
                    "tilt payload does not match geometry");
    detail::require(std::isfinite(max_tilt) && max_tilt >= 0.0, ErrorCode::BadParam, "bad max_tilt");
    for (const Vec2& v : d_) {
      detail::require(std::isfinite(v.x) && std::isfinite(v.y) && std::hypot(v.x, v.y) <= max_tilt,
                      ErrorCode::InvalidValue, "tilt exceeds max_tilt");
    }
    for (std::size_t i = 0; i < plane; ++i) {
      double sx = 0.0, sy = 0.0;
      for (int k = 0; k < n_frames; ++k) {
        sx += d_[k * plane + i].x;
        sy += d_[k * plane + i].y;
      }
      detail::require(std::hypot(sx, sy) / n_frames <= kMeanTolerance, ErrorCode::InvalidValue,
                      "tilt field is not zero-mean in time");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int n_frames() const noexcept { return n_frames_; }
  double max_tilt() const noexcept { return max_tilt_; }
  std::span<const Vec2> displacement() const noexcept { return d_; }

  TiltView slice(int frame) const noexcept {
    const std::size_t plane = static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    return {width_, height_, std::span<const Vec2>(d_).subspan(static_cast<std::size_t>(frame) * plane, plane)};
  }

  const Vec2& at(int frame, int x, int y) const noexcept { return slice(frame)(x, y); }

  friend bool operator==(const TurbulenceField&, const TurbulenceField&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int n_frames_ = 0;
  std::vector<Vec2> d_;
  double max_tilt_ = 0.0;
};

/// Per-pixel velocity in px/frame with a validity mask. Velocities are held
/// in single precision, the resolution of the on-disk format.
class MotionField {
 public:
  MotionField() = default;
  MotionField(int width, int height) : velocity_(width, height), valid_(width, height, 0) {}
  MotionField(Grid<Vec2f> velocity, Mask valid) : velocity_(std::move(velocity)), valid_(std::move(valid)) {
    require_same_shape(velocity_, valid_, "velocity and validity differ in geometry");
    for (std::size_t i = 0; i < valid_.size(); ++i) {
      const Vec2f v = velocity_.values()[i];
      if (valid_.values()[i]) {
        detail::require(std::isfinite(v.x) && std::isfinite(v.y), ErrorCode::InvalidValue,
                        "non-finite velocity on a valid pixel");
      } else {
        detail::require(v.x == 0.0f && v.y == 0.0f, ErrorCode::InvalidValue, "invalid pixel carries a velocity");
      }
    }
  }

  int width() const noexcept { return velocity_.width(); }
  int height() const noexcept { return velocity_.height(); }
  const Grid<Vec2f>& velocity() const noexcept { return velocity_; }
  const Mask& valid() const noexcept { return valid_; }
  bool is_valid(int x, int y) const noexcept { return valid_(x, y) != 0; }
  std::size_t valid_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(valid_.values().begin(), valid_.values().end(),
                                                  [](std::uint8_t v) { return v != 0; }));
  }

  friend bool operator==(const MotionField&, const MotionField&) = default;

 private:
  Grid<Vec2f> velocity_;
  Mask valid_;
};

/// Per-pixel polarity-alternation counts over a window of `window` µs.
class PaepMap {
 public:
  PaepMap() = default;
  PaepMap(Grid<std::uint32_t> count, Micros window) : count_(std::move(count)), window_(window) {}

  int width() const noexcept { return count_.width(); }
  int height() const noexcept { return count_.height(); }
  const Grid<std::uint32_t>& count() const noexcept { return count_; }
  std::uint32_t operator()(int x, int y) const noexcept { return count_(x, y); }
  Micros window() const noexcept { return window_; }
  std::uint32_t max_count() const noexcept {
    std::uint32_t m = 0;
    for (std::uint32_t c : count_.values()) m = std::max(m, c);
    return m;
  }

 private:
  Grid<std::uint32_t> count_;
  Micros window_ = 0;
};

class GradientMap {
 public:
  GradientMap() = default;
  GradientMap(Grid<double> magnitude, Grid<double> direction)
      : magnitude_(std::move(magnitude)), direction_(std::move(direction)) {
    require_same_shape(magnitude_, direction_, "magnitude and direction differ in geometry");
    for (double m : magnitude_.values()) {
      detail::require(std::isfinite(m) && m >= 0.0, ErrorCode::InvalidValue, "bad gradient magnitude");
    }
  }

  int width() const noexcept { return magnitude_.width(); }
  int height() const noexcept { return magnitude_.height(); }
  const Grid<double>& magnitude() const noexcept { return magnitude_; }
  const Grid<double>& direction() const noexcept { return direction_; }
  double operator()(int x, int y) const noexcept { return magnitude_(x, y); }

 private:
  Grid<double> magnitude_;
  Grid<double> direction_;
};

enum class TubeLabel : std::uint8_t { Empty = 0, Tube = 1, Turbulence = 2 };

/// Per-pixel linear trajectory fits around a reference time `t0`.
///
/// `velocity` is expressed in px per `time_unit_us` microseconds: one frame
/// interval when the source frame rate is known, otherwise one millisecond.
struct TubeFitMap {
  Grid<Vec2> base;
  Grid<Vec2> velocity;
  Grid<double> residual;
  Grid<std::uint32_t> support;
  Grid<TubeLabel> label;
  Micros t0 = 0;
  Micros half_window = 0;
  double time_unit_us = 1000.0;
  double residual_tol = 1.0;
  std::uint32_t min_support = 3;

  int width() const noexcept { return label.width(); }
  int height() const noexcept { return label.height(); }

  /// All-EMPTY map.
  static TubeFitMap empty(int width, int height, Micros t0, Micros half_window, double time_unit_us,
                          double residual_tol, std::uint32_t min_support) {
    TubeFitMap m;
    m.base = Grid<Vec2>(width, height);
    m.velocity = Grid<Vec2>(width, height);
    m.residual = Grid<double>(width, height, 0.0);
    m.support = Grid<std::uint32_t>(width, height, 0u);
    m.label = Grid<TubeLabel>(width, height, TubeLabel::Empty);
    m.t0 = t0;
    m.half_window = half_window;
    m.time_unit_us = time_unit_us;
    m.residual_tol = residual_tol;
    m.min_support = min_support;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) m.base(x, y) = {double(x), double(y)};
    return m;
  }

  /// Checks the label/support/residual consistency rules; throws InvalidValue.
  void validate() const {
    for (std::size_t i = 0; i < label.size(); ++i) {
      const TubeLabel l = label.values()[i];
      const std::uint32_t s = support.values()[i];
      detail::require((l == TubeLabel::Empty) == (s == 0), ErrorCode::InvalidValue, "EMPTY label iff zero support");
      if (l == TubeLabel::Tube) {
        detail::require(residual.values()[i] <= residual_tol && s >= min_support, ErrorCode::InvalidValue,
                        "TUBE pixel violates the fit thresholds");
      }
    }
  }

  std::size_t count(TubeLabel l) const noexcept {
    return static_cast<std::size_t>(
        std::count(label.values().begin(), label.values().end(), l));
  }
};

}  // namespace turbev
