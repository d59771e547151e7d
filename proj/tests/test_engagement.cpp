#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "fform/engagement.hpp"
#include "fform/error.hpp"
#include "oracles.hpp"

using namespace fform;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> trace(std::initializer_list<int> pattern) {
  std::vector<char> bits;
  for (int b : pattern) bits.push_back(b != 0 ? 1 : 0);
  std::unique_ptr<bool[]> buf(new bool[bits.size()]);
  for (std::size_t i = 0; i < bits.size(); ++i) buf[i] = bits[i] != 0;
  return engagement_from_membership(std::span<const bool>(buf.get(), bits.size()));
}

GroupingTimeline dyad_timeline(const std::vector<int>& in, int a = 0, int b = 1) {
  GroupingTimeline t;
  for (std::size_t f = 0; f < in.size(); ++f) {
    auto& groups = t.frames[static_cast<int>(f)];
    if (in[f]) groups.push_back({0, {a, b}});
    else groups.push_back({0, {5, 6}});
  }
  return t;
}

}  // namespace

TEST_CASE("interpersonal distance") {
  CHECK(interpersonal_distance({0, 0}, {3, 4}) == 5.0);
  CHECK(interpersonal_distance({2, 2}, {2, 2}) == 0.0);
  CHECK(interpersonal_distance({1, 1}, {4, 5}) == 5.0);
}

TEST_CASE("reciprocal angle") {
  CHECK(reciprocal_angle({{0, 0}, 0.0}, {{10, 0}, kPi}) == doctest::Approx(0.0));
  CHECK(reciprocal_angle({{0, 0}, kPi}, {{10, 0}, 0.0}) == doctest::Approx(2 * kPi));
  CHECK(reciprocal_angle({{0, 0}, 0.0}, {{10, 0}, kPi / 2}) == doctest::Approx(kPi / 2));
  CHECK_THROWS_AS(reciprocal_angle({{1, 1}, 0.0}, {{1, 1}, 0.0}), ValidationError);
}

TEST_CASE("score tables") {
  CHECK(engagement_for_run(1) == 0.5);
  CHECK(engagement_for_run(2) == 0.8);
  CHECK(engagement_for_run(3) == 1.0);
  CHECK(engagement_for_run(40) == 1.0);
  CHECK(engagement_for_break(1) == 0.5);
  CHECK(engagement_for_break(2) == 0.2);
  CHECK(engagement_for_break(3) == 0.0);
}

TEST_CASE("worked traces") {
  CHECK(trace({1, 1, 1, 1}) == std::vector<double>{0.5, 0.8, 1, 1});
  CHECK(trace({1, 1, 1, 1, 1, 0, 1, 1}) == std::vector<double>{0.5, 0.8, 1, 1, 1, 0.5, 1, 1});
  CHECK(trace({1, 1, 0, 0, 0, 1}) == std::vector<double>{0.5, 0.8, 0.5, 0.2, 0, 0.5});
}

TEST_CASE("state machine agrees with the run-length oracle up to length 10") {
  for (int len = 1; len <= 10; ++len) {
    for (int mask = 0; mask < (1 << len); ++mask) {
      std::vector<bool> bits(len);
      std::unique_ptr<bool[]> buf(new bool[len]);
      for (int i = 0; i < len; ++i) buf[i] = bits[i] = ((mask >> i) & 1) != 0;
      const auto got = engagement_from_membership(std::span<const bool>(buf.get(), len));
      for (int t = 0; t < len; ++t) REQUIRE(got[t] == oracle::engagement_at(bits, t));
    }
  }
}

TEST_CASE("tracker restarts on a different formation") {
  EngagementTracker t;
  CHECK(t.step(MemberSet{1, 2}) == 0.5);
  CHECK(t.step(MemberSet{1, 2}) == 0.8);
  CHECK(t.step(MemberSet{1, 2}) == 1.0);
  CHECK(t.step(MemberSet{1, 3}) == 0.5);
  CHECK(t.step(std::nullopt) == 0.5);
  CHECK(t.step(MemberSet{1, 3}) == 0.8);  // run resumes at 2
}

TEST_CASE("tracker with a looser formation identity") {
  EngagementTracker t(0.5);
  CHECK(t.step(MemberSet{1, 2, 3}) == 0.5);
  CHECK(t.step(MemberSet{1, 2, 3, 4}) == 0.8);
  CHECK(t.step(MemberSet{7, 8}) == 0.5);
}

TEST_CASE("person engagement from a timeline") {
  GroupingTimeline t;
  for (int f = 0; f < 5; ++f) t.frames[f].push_back({0, {1, 2}});
  t.frames[5] = {};
  const auto tr = engagement_scores(t, {1, std::nullopt});
  CHECK(tr.frames.size() == 6);
  CHECK(tr.scores == std::vector<double>{0.5, 0.8, 1, 1, 1, 0.5});
  CHECK(engagement_scores(t, {99, std::nullopt}).frames.empty());
}

TEST_CASE("dyad engagement is co-membership") {
  const auto t = dyad_timeline({1, 1, 1, 0, 1, 1});
  const auto tr = engagement_scores(t, {0, 1});
  CHECK(tr.scores == std::vector<double>{0.5, 0.8, 1, 0.5, 1, 1});
  // never together
  const auto apart = engagement_scores(dyad_timeline({0, 0, 0, 0, 0}), {0, 1});
  for (double s : apart.scores) CHECK(s == 0.0);
}

TEST_CASE("dyad report rows") {
  FrameSequence seq;
  for (int f = 0; f < 6; ++f) {
    Frame fr;
    fr.index = f;
    fr.participants.push_back({0, f, 0.0, 0.0, 0.0, 0.0});
    fr.participants.push_back({1, f, 200.0 - 20.0 * f, 0.0, kPi, kPi});
    seq.frames.push_back(fr);
  }
  const auto t = dyad_timeline({0, 0, 1, 1, 1, 1});
  const auto rows = dyad_report(seq, t, 0, 1);
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].distance < rows[i - 1].distance);
  CHECK(rows[3].reciprocal_angle == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(rows[0].engagement == 0.0);
  CHECK(rows[5].engagement == 1.0);
  DyadReportOptions torso;
  torso.use_torso = true;
  CHECK(dyad_report(seq, t, 0, 1, torso)[2].reciprocal_angle == doctest::Approx(0.0));
}
