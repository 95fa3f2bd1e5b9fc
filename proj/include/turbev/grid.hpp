#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "turbev/error.hpp"

namespace turbev {

template <typename T>
struct Vec2T {
  T x{};
  T y{};

  friend bool operator==(const Vec2T&, const Vec2T&) = default;
};

using Vec2 = Vec2T<double>;
using Vec2f = Vec2T<float>;

/// Row-major 2D raster. Plain value type; the validated domain types below
/// wrap it and keep their own invariants.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    detail::require(width >= 0 && height >= 0, ErrorCode::BadParam, "negative grid size");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    detail::require(width >= 0 && height >= 0, ErrorCode::BadParam, "negative grid size");
    detail::require(data_.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
                    ErrorCode::GeometryMismatch, "grid payload does not match width*height");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return data_[index(x, y)]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }
  std::vector<T> release() && { return std::move(data_); }

  bool same_shape(const auto& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Boolean rasters are stored as bytes so spans and `==` behave normally.
using Mask = Grid<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  detail::require(a.width() == b.width() && a.height() == b.height(), ErrorCode::GeometryMismatch, what);
}

}  // namespace turbev
