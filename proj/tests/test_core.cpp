#include <gtest/gtest.h>

#include <random>

#include "turbev/core.hpp"

using namespace turbev;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

}  // namespace

TEST(EventStream, EmptyStreamHasZeroSpan) {
  const EventStream s = new_event_stream(4, 4, {});
  EXPECT_TRUE(s.empty());
  EXPECT_EQ(s.t_begin(), 0u);
  EXPECT_EQ(s.t_end(), 0u);
}

TEST(EventStream, SortsByTime) {
  const EventStream s = new_event_stream(4, 4, {{5, 1, 1, 1}, {2, 0, 0, -1}});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.events()[0].t, 2u);
  EXPECT_EQ(s.events()[1].t, 5u);
  EXPECT_EQ(s.t_begin(), 2u);
  EXPECT_EQ(s.t_end(), 5u);
}

TEST(EventStream, TiesBrokenByRowColumnPolarity) {
  const EventStream s = new_event_stream(4, 4, {{3, 2, 1, 1}, {3, 0, 2, 1}, {3, 1, 1, 1}, {3, 1, 1, -1}});
  const std::vector<Event> want{{3, 1, 1, -1}, {3, 1, 1, 1}, {3, 2, 1, 1}, {3, 0, 2, 1}};
  EXPECT_EQ(std::vector<Event>(s.events().begin(), s.events().end()), want);
}

TEST(EventStream, RejectsOutOfBounds) {
  EXPECT_EQ(code_of([] { new_event_stream(4, 4, {{1, 9, 0, 1}}); }), ErrorCode::OutOfBounds);
  EXPECT_EQ(code_of([] { new_event_stream(4, 4, {{1, 0, 4, 1}}); }), ErrorCode::OutOfBounds);
}

TEST(EventStream, RejectsBadPolarity) {
  EXPECT_EQ(code_of([] { new_event_stream(4, 4, {{1, 0, 0, 0}}); }), ErrorCode::BadPolarity);
  EXPECT_EQ(code_of([] { new_event_stream(4, 4, {{1, 0, 0, 2}}); }), ErrorCode::BadPolarity);
}

TEST(EventStream, ExplicitSpanMustCoverEvents) {
  EXPECT_EQ(code_of([] { EventStream(4, 4, {{10, 0, 0, 1}}, 11, 20); }), ErrorCode::OutOfBounds);
  EXPECT_EQ(code_of([] { EventStream(4, 4, {}, 5, 4); }), ErrorCode::BadSpan);
  const EventStream s(4, 4, {{10, 0, 0, 1}}, 0, 100);
  EXPECT_EQ(s.t_begin(), 0u);
  EXPECT_EQ(s.t_end(), 100u);
}

TEST(EventStream, SliceIsHalfOpen) {
  const EventStream s = new_event_stream(2, 1, {{1, 0, 0, 1}, {2, 1, 0, 1}, {3, 0, 0, -1}, {4, 1, 0, -1}});
  const auto mid = s.slice(2, 4);
  ASSERT_EQ(mid.size(), 2u);
  EXPECT_EQ(mid.front().t, 2u);
  EXPECT_EQ(mid.back().t, 3u);
  EXPECT_TRUE(s.slice(5, 9).empty());
}

TEST(EventStream, RandomInputsAlwaysSatisfyOrdering) {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 20; ++round) {
    std::vector<Event> ev;
    for (int i = 0; i < 200; ++i)
      ev.push_back({rng() % 50, static_cast<std::uint16_t>(rng() % 7), static_cast<std::uint16_t>(rng() % 5),
                    static_cast<std::int8_t>(rng() % 2 ? 1 : -1)});
    const EventStream s = new_event_stream(7, 5, ev);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_FALSE(event_before(s.events()[i], s.events()[i - 1]));
  }
}

TEST(Frame, RejectsOutOfRangeAndNaN) {
  EXPECT_EQ(code_of([] { Frame(2, 1, {0.5, 1.5}); }), ErrorCode::InvalidValue);
  EXPECT_EQ(code_of([] { Frame(2, 1, {0.5, -0.1}); }), ErrorCode::InvalidValue);
  EXPECT_EQ(code_of([] { Frame::clamped(Grid<double>(1, 1, std::nan(""))); }), ErrorCode::InvalidValue);
  const Frame f = Frame::clamped(Grid<double>(2, 1, std::vector<double>{-1.0, 2.0}));
  EXPECT_EQ(f(0, 0), 0.0);
  EXPECT_EQ(f(1, 0), 1.0);
}

TEST(FrameSequence, Validates) {
  EXPECT_EQ(code_of([] { FrameSequence({}, 0, 1); }), ErrorCode::TooFewFrames);
  EXPECT_EQ(code_of([] { FrameSequence({Frame::constant(2, 2, 0.1)}, 0, 0); }), ErrorCode::BadParam);
  EXPECT_EQ(code_of([] { FrameSequence({Frame::constant(2, 2, 0.1), Frame::constant(3, 2, 0.1)}, 0, 1); }),
            ErrorCode::GeometryMismatch);
  const FrameSequence seq({Frame::constant(2, 2, 0.1), Frame::constant(2, 2, 0.2)}, 100, 40);
  EXPECT_EQ(seq.timestamp(1), 140u);
  EXPECT_EQ(seq.t_last(), 140u);
}

TEST(TurbulenceField, EnforcesZeroMeanAndBound) {
  // One pixel, two frames.
  EXPECT_NO_THROW(TurbulenceField(1, 1, 2, {{0.5, 0.0}, {-0.5, 0.0}}, 0.5));
  EXPECT_EQ(code_of([] { TurbulenceField(1, 1, 2, {{0.5, 0.0}, {-0.4, 0.0}}, 0.5); }), ErrorCode::InvalidValue);
  EXPECT_EQ(code_of([] { TurbulenceField(1, 1, 2, {{0.5, 0.0}, {-0.5, 0.0}}, 0.4); }), ErrorCode::InvalidValue);
  EXPECT_EQ(code_of([] { TurbulenceField(1, 1, 2, {{0.5, 0.0}}, 0.5); }), ErrorCode::GeometryMismatch);
}

TEST(MotionField, InvalidPixelsCarryNoVelocity) {
  Grid<Vec2f> v(2, 1);
  v(1, 0) = {1.0f, 0.0f};
  Mask valid(2, 1, 0);
  EXPECT_EQ(code_of([&] { MotionField(v, valid); }), ErrorCode::InvalidValue);
  valid(1, 0) = 1;
  const MotionField f(v, valid);
  EXPECT_EQ(f.valid_count(), 1u);
  EXPECT_TRUE(f.is_valid(1, 0));
}

TEST(TubeFitMap, ValidateCatchesInconsistentLabels) {
  TubeFitMap m = TubeFitMap::empty(2, 2, 0, 10, 1000.0, 0.5, 4);
  EXPECT_NO_THROW(m.validate());
  m.label(0, 0) = TubeLabel::Tube;
  EXPECT_THROW(m.validate(), Error);  // TUBE with zero support
  m.support(0, 0) = 5;
  m.residual(0, 0) = 0.2;
  EXPECT_NO_THROW(m.validate());
  m.residual(0, 0) = 0.7;
  EXPECT_THROW(m.validate(), Error);
  m.residual(0, 0) = 0.2;
  m.support(0, 0) = 3;
  EXPECT_THROW(m.validate(), Error);
  EXPECT_EQ(m.count(TubeLabel::Empty), 3u);
}
