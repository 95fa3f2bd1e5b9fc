#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "turbev/metrics.hpp"

using namespace turbev;

namespace {

Frame random_frame(std::uint64_t seed, int w, int h, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Grid<double> g(w, h);
  for (double& v : g.values()) v = u(rng);
  return Frame(std::move(g));
}

Frame offset(const Frame& f, double d) {
  Grid<double> g = f.pixels();
  for (double& v : g.values()) v += d;
  return Frame(std::move(g));
}

// Two-pass local statistics, one window at a time.
double ssim_reference(const Frame& a, const Frame& b, int win) {
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  int count = 0;
  for (int y0 = 0; y0 + win <= a.height(); ++y0)
    for (int x0 = 0; x0 + win <= a.width(); ++x0) {
      std::vector<double> va, vb;
      for (int y = y0; y < y0 + win; ++y)
        for (int x = x0; x < x0 + win; ++x) {
          va.push_back(a(x, y));
          vb.push_back(b(x, y));
        }
      const double n = static_cast<double>(va.size());
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < va.size(); ++i) {
        ma += va[i] / n;
        mb += vb[i] / n;
      }
      double sa = 0, sb = 0, sab = 0;
      for (std::size_t i = 0; i < va.size(); ++i) {
        sa += (va[i] - ma) * (va[i] - ma) / n;
        sb += (vb[i] - mb) * (vb[i] - mb) / n;
        sab += (va[i] - ma) * (vb[i] - mb) / n;
      }
      total += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST(Psnr, IdenticalIsInfinite) {
  const Frame a = random_frame(1, 8, 8);
  EXPECT_TRUE(std::isinf(metrics::psnr(a, a)));
}

TEST(Psnr, ClosedForms) {
  const Frame a = random_frame(2, 16, 16, 0.0, 0.9);
  EXPECT_NEAR(metrics::psnr(a, offset(a, 0.1)), 20.0, 1e-9 * 20.0);
  EXPECT_NEAR(metrics::psnr(a, offset(a, 0.01)), 40.0, 1e-9 * 40.0);
}

TEST(Ssim, IdenticalIsOne) {
  const Frame a = random_frame(3, 12, 10);
  EXPECT_NEAR(metrics::ssim(a, a), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(metrics::ssim(Frame::constant(8, 8, 0.3), Frame::constant(8, 8, 0.3)), 1.0);
}

TEST(Ssim, InvertedTextureMatchesReference) {
  const Frame a = random_frame(4, 16, 16, 0.3, 0.7);
  Grid<double> inv = a.pixels();
  for (double& v : inv.values()) v = 1.0 - v;
  const Frame b(inv);
  const double s = metrics::ssim(a, b);
  EXPECT_LT(s, 0.5);
  EXPECT_NEAR(s, ssim_reference(a, b, 8), 1e-9);
}

TEST(Ssim, RejectsSmallFrames) {
  try {
    metrics::ssim(Frame::constant(7, 9, 0.1), Frame::constant(7, 9, 0.1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooSmall);
  }
}

TEST(Charbonnier, FloorAndClosedForm) {
  const Frame a = random_frame(5, 9, 9, 0.0, 0.9);
  EXPECT_DOUBLE_EQ(metrics::charbonnier(a, a), 1e-3);
  EXPECT_NEAR(metrics::charbonnier(a, offset(a, 0.1)), std::sqrt(0.01 + 1e-6), 1e-9);
}

TEST(Charbonnier, ApproachesMeanAbsoluteError) {
  const Frame a = random_frame(6, 9, 9);
  const Frame b = random_frame(7, 9, 9);
  double mae = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) mae += std::abs(a.values()[i] - b.values()[i]);
  mae /= static_cast<double>(a.values().size());
  EXPECT_NEAR(metrics::charbonnier(a, b, 1e-9), mae, 1e-8);
}

TEST(Rmse, HandCases) {
  const Frame a = random_frame(8, 4, 4, 0.0, 0.9);
  EXPECT_EQ(metrics::rmse(a, a), 0.0);
  EXPECT_NEAR(metrics::rmse(a, offset(a, 0.1)), 0.1, 1e-12);
  EXPECT_NEAR(metrics::rmse(Frame(2, 2, {0, 0, 0, 0}), Frame(2, 2, {0.2, 0, 0, 0})), 0.1, 1e-15);
}

TEST(Metrics, Symmetric) {
  const Frame a = random_frame(9, 10, 10);
  const Frame b = random_frame(10, 10, 10);
  EXPECT_EQ(metrics::psnr(a, b), metrics::psnr(b, a));
  EXPECT_NEAR(metrics::ssim(a, b), metrics::ssim(b, a), 1e-15);
  EXPECT_EQ(metrics::charbonnier(a, b), metrics::charbonnier(b, a));
  EXPECT_EQ(metrics::rmse(a, b), metrics::rmse(b, a));
}

TEST(Metrics, GeometryMismatch) {
  const Frame a = Frame::constant(8, 8, 0.1);
  const Frame b = Frame::constant(8, 9, 0.1);
  for (auto fn : {+[](const Frame& x, const Frame& y) { return metrics::psnr(x, y); },
                  +[](const Frame& x, const Frame& y) { return metrics::ssim(x, y); },
                  +[](const Frame& x, const Frame& y) { return metrics::charbonnier(x, y); },
                  +[](const Frame& x, const Frame& y) { return metrics::rmse(x, y); }}) {
    try {
      fn(a, b);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::GeometryMismatch);
    }
  }
}
