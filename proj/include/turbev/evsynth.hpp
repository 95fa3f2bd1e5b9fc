#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "turbev/core.hpp"
#include "turbev/parallel.hpp"

namespace turbev {

/// Contrast threshold `C` in log-intensity units, the intensity floor `eps`
/// added before the log, and the per-pixel refractory period in µs.
struct EvsParams {
  double C = 0.25;
  double eps = 1.0 / 255.0;
  Micros refractory = 0;

  void validate() const {
    detail::require(std::isfinite(C) && C > 0.0, ErrorCode::BadParam, "contrast threshold must be > 0");
    detail::require(std::isfinite(eps) && eps > 0.0, ErrorCode::BadParam, "eps must be > 0");
  }
};

/// Log-unit slack on threshold comparisons, so a change of exactly k*C emits
/// k events despite rounding in log().
inline constexpr double kThresholdSlack = 1e-9;

namespace detail {

/// Emits the threshold crossings of one pixel's log-intensity trace. The
/// reference is tracked as base + level*C with an integer level so repeated
/// crossings do not accumulate rounding error.
inline void pixel_events(std::span<const double> log_trace, const FrameSequence& seq, const EvsParams& p,
                         std::uint16_t x, std::uint16_t y, std::vector<Event>& out) {
  const double base = log_trace[0];
  long level = 0;
  std::optional<Micros> last;
  const double dt = static_cast<double>(seq.dt());
  auto emit = [&](Micros t, std::int8_t pol) {
    if (!last || t - *last >= p.refractory) {
      out.push_back({t, x, y, pol});
      last = t;
    }
  };
  for (std::size_t k = 0; k + 1 < log_trace.size(); ++k) {
    const double a = log_trace[k];
    const double b = log_trace[k + 1];
    const Micros tk = seq.timestamp(k);
    if (b > a) {
      for (;;) {
        const double target = base + static_cast<double>(level + 1) * p.C;
        if (b < target - kThresholdSlack) break;
        const double s = std::clamp((target - a) / (b - a), 0.0, 1.0);
        ++level;
        emit(tk + static_cast<Micros>(std::llround(s * dt)), 1);
      }
    } else if (b < a) {
      for (;;) {
        const double target = base + static_cast<double>(level - 1) * p.C;
        if (b > target + kThresholdSlack) break;
        const double s = std::clamp((a - target) / (a - b), 0.0, 1.0);
        --level;
        emit(tk + static_cast<Micros>(std::llround(s * dt)), -1);
      }
    }
  }
}

}  // namespace detail

/// Threshold-crossing event synthesis with log intensity interpolated
/// linearly in time between frames. The stream spans the first to the last
/// frame timestamp.
inline EventStream synthesize_events(const FrameSequence& seq, const EvsParams& params, Exec exec = {}) {
  params.validate();
  detail::require(seq.size() >= 2, ErrorCode::TooFewFrames, "event synthesis needs at least 2 frames");
  const int W = seq.width();
  const int H = seq.height();
  std::vector<std::vector<Event>> per_row(static_cast<std::size_t>(H));
  parallel_for(static_cast<std::size_t>(H), exec, [&](std::size_t b, std::size_t e) {
    std::vector<double> trace(seq.size());
    for (std::size_t y = b; y < e; ++y)
      for (int x = 0; x < W; ++x) {
        for (std::size_t k = 0; k < seq.size(); ++k) trace[k] = std::log(seq[k](x, static_cast<int>(y)) + params.eps);
        detail::pixel_events(trace, seq, params, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                             per_row[y]);
      }
  });
  std::vector<Event> all;
  for (auto& row : per_row) all.insert(all.end(), row.begin(), row.end());
  return EventStream(W, H, std::move(all), seq.t0(), seq.t_last());
}

/// Signed polarity sums indexed (bin, y, x).
struct VoxelGrid {
  int n_bins = 0;
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> value;
  Micros t_begin = 0;
  Micros t_end = 0;

  std::int32_t& at(int bin, int x, int y) {
    return value[(static_cast<std::size_t>(bin) * height + y) * width + x];
  }
  std::int32_t at(int bin, int x, int y) const {
    return value[(static_cast<std::size_t>(bin) * height + y) * width + x];
  }
};

/// Events with t in [t_begin, t_end) add their polarity to bin
/// floor(n_bins * (t - t_begin) / (t_end - t_begin)).
inline VoxelGrid accumulate_voxels(const EventStream& stream, int n_bins, Micros t_begin, Micros t_end) {
  detail::require(t_end > t_begin, ErrorCode::BadSpan, "voxel span must have t_end > t_begin");
  detail::require(n_bins >= 1, ErrorCode::BadSpan, "n_bins must be >= 1");
  VoxelGrid g{n_bins, stream.width(), stream.height(),
              std::vector<std::int32_t>(static_cast<std::size_t>(n_bins) * stream.width() * stream.height(), 0),
              t_begin, t_end};
  const unsigned __int128 span = t_end - t_begin;
  for (const Event& e : stream.slice(t_begin, t_end)) {
    const int bin = static_cast<int>(static_cast<unsigned __int128>(n_bins) * (e.t - t_begin) / span);
    g.at(bin, e.x, e.y) += e.p;
  }
  return g;
}

}  // namespace turbev
