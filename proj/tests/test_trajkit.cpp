#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "skycatch/trajkit.hpp"
#include "test_support.hpp"

using namespace skycatch;
using skycatch::testing::ballistic_samples;
using skycatch::testing::ballistic_trajectory;
using skycatch::testing::random_lob;

TEST(DeriveStates, QuadraticInteriorIsExact) {
  const Vec3 p0(0.2, -0.1, 1.5), v0(3.0, 0.5, 4.0);
  const auto s = ballistic_samples(p0, v0, 0.0, 12);
  const auto states = derive_states(s, kCaptureDt);
  ASSERT_EQ(states.size(), s.size());
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const Vec3 v_true = v0 + kGravity * s[i].t;
    EXPECT_LT((states[i].velocity - v_true).norm(), 1e-9) << i;
  }
  for (std::size_t i = 2; i + 2 < s.size(); ++i) EXPECT_LT((states[i].acceleration - kGravity).norm(), 1e-6) << i;
}

TEST(DeriveStates, OneSidedEnds) {
  const Vec3 p0(0, 0, 1), v0(1, 2, 3);
  const auto s = ballistic_samples(p0, v0, 0.0, 8);
  const auto st = derive_states(s, kCaptureDt);
  const double dt = kCaptureDt;
  // Forward difference of a quadratic: v(t0) + a dt / 2; backward at the far end: v(tn) - a dt / 2.
  EXPECT_LT((st.front().velocity - (v0 + 0.5 * dt * kGravity)).norm(), 1e-9);
  EXPECT_LT((st.back().velocity - (v0 + kGravity * s.back().t - 0.5 * dt * kGravity)).norm(), 1e-9);
  // Acceleration at the ends sees the half-step velocity offsets: a / 2.
  EXPECT_LT((st.front().acceleration - 0.5 * kGravity).norm(), 1e-6);
  EXPECT_LT((st.back().acceleration - 0.5 * kGravity).norm(), 1e-6);
  EXPECT_EQ(st[3].position, s[3].position);
}

TEST(DeriveStates, RejectsBadInput) {
  const auto s = ballistic_samples(Vec3::Zero(), Vec3::UnitZ(), 0.0, 2);
  EXPECT_THROW(derive_states(s, kCaptureDt), InputError);
  auto gap = ballistic_samples(Vec3::Zero(), Vec3::UnitZ(), 0.0, 6);
  gap[3].t += 0.5 * kCaptureDt;
  EXPECT_THROW(derive_states(gap, kCaptureDt), InputError);
  EXPECT_THROW(derive_states(ballistic_samples(Vec3::Zero(), Vec3::UnitZ(), 0.0, 6), 0.0), InputError);
}

TEST(DeriveStates, SmoothingAveragesInteriorPositions) {
  std::vector<Sample> s;
  for (int i = 0; i < 7; ++i) s.push_back({i * kCaptureDt, Vec3(i % 2 == 0 ? 0.0 : 1.0, 0, 0)});
  DeriveOptions opt;
  opt.smooth = true;
  const auto st = derive_states(s, kCaptureDt, opt);
  // Interior smoothed x alternates 1/3, 2/3; central differences cancel to zero velocity at i = 2..4.
  for (int i = 2; i <= 4; ++i) EXPECT_NEAR(st[static_cast<std::size_t>(i)].velocity.x(), 0.0, 1e-9);
}

TEST(Crossing, InterpolatesAndPinsHeight) {
  const std::vector<Vec3> p{{0, 0, 2.0}, {1, 0, 1.0}, {2, 2, 0.2}, {3, 0, -1.0}};
  const Crossing c = find_descending_crossing(p, 0.6);
  EXPECT_EQ(c.index_above, 1u);
  EXPECT_DOUBLE_EQ(c.fraction, 0.4 / 0.8);
  EXPECT_DOUBLE_EQ(c.point.x(), 1.5);
  EXPECT_DOUBLE_EQ(c.point.y(), 1.0);
  EXPECT_EQ(c.point.z(), 0.6);
  EXPECT_EQ(c.steps_from(0), 1);
}

TEST(Crossing, SampleExactlyOnPlaneCountsAsAbove) {
  const std::vector<Vec3> p{{0, 0, 1.0}, {1, 0, 0.6}, {2, 0, 0.2}};
  const Crossing c = find_descending_crossing(p, 0.6);
  EXPECT_EQ(c.index_above, 1u);
  EXPECT_EQ(c.fraction, 0.0);
  EXPECT_EQ(c.point.x(), 1.0);
}

TEST(Crossing, FirstDescendingCrossingWins) {
  // Rises through the plane, dips below, bounces back up, dips again.
  const std::vector<Vec3> p{{0, 0, 0.1}, {1, 0, 0.9}, {2, 0, 0.3}, {3, 0, 0.8}, {4, 0, 0.2}};
  EXPECT_EQ(find_descending_crossing(p, 0.6).index_above, 1u);
  const std::vector<Vec3> up{{0, 0, 0.1}, {1, 0, 0.9}, {2, 0, 1.2}};
  EXPECT_THROW(find_descending_crossing(up, 0.6), NoCrossingError);
  EXPECT_THROW(find_descending_crossing(std::vector<Vec3>{}, 0.6), NoCrossingError);
}

TEST(Windows, IndexingMatchesCrossing) {
  Rng rng(1);
  const auto traj = ballistic_trajectory(random_lob(rng));
  const int T = 5;
  const auto c = ground_truth_impact(traj, PlaneSpec{});
  const auto windows = make_windows(traj, T, PlaneSpec{});
  ASSERT_EQ(windows.size(), c.index_above - static_cast<std::size_t>(T));
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& w = windows[k];
    const int t = T + static_cast<int>(k);
    EXPECT_EQ(w.t_index, t);
    EXPECT_EQ(w.steps_to_impact, static_cast<int>(c.index_above) - t);
    ASSERT_EQ(w.history.size(), static_cast<std::size_t>(T + 1));
    ASSERT_EQ(w.history_samples.size(), static_cast<std::size_t>(T + 1));
    ASSERT_EQ(w.future.size(), static_cast<std::size_t>(w.steps_to_impact));
    EXPECT_EQ(w.history.back().position, traj.samples[static_cast<std::size_t>(t)].position);
    EXPECT_EQ(w.future.back().position, traj.samples[c.index_above].position);
    EXPECT_EQ(w.impact_point, c.point);
    EXPECT_EQ(w.crossing_fraction, c.fraction);
  }
  EXPECT_EQ(windows.back().steps_to_impact, 1);
}

TEST(Windows, PropertyStepsDecreaseByOne) {
  Rng rng(2);
  for (int trial = 0; trial < 25; ++trial) {
    const double h = rng.uniform(0.3, 1.0);
    const auto traj = ballistic_trajectory(random_lob(rng), h);
    const int T = static_cast<int>(rng.index(8));
    const auto windows = make_windows(traj, T, PlaneSpec{h});
    ASSERT_FALSE(windows.empty());
    for (std::size_t k = 1; k < windows.size(); ++k)
      ASSERT_EQ(windows[k - 1].steps_to_impact - 1, windows[k].steps_to_impact);
  }
}

TEST(Augment, RigidYawAndTranslation) {
  Rng rng(3);
  const auto traj = ballistic_trajectory(random_lob(rng));
  const auto aug = augment(traj, 0.7, Vec2(0.3, -0.4));
  ASSERT_EQ(aug.samples.size(), traj.samples.size());
  const Vec3 start_shift = aug.samples.front().position - traj.samples.front().position;
  EXPECT_NEAR(start_shift.x(), 0.3, 1e-12);
  EXPECT_NEAR(start_shift.y(), -0.4, 1e-12);
  for (std::size_t i = 0; i < traj.samples.size(); i += 7) {
    EXPECT_DOUBLE_EQ(aug.samples[i].position.z(), traj.samples[i].position.z());
    EXPECT_EQ(aug.samples[i].t, traj.samples[i].t);
    for (std::size_t j = 0; j < traj.samples.size(); j += 11) {
      const double d0 = (traj.samples[i].position - traj.samples[j].position).norm();
      const double d1 = (aug.samples[i].position - aug.samples[j].position).norm();
      EXPECT_NEAR(d0, d1, 1e-12);
    }
  }
  // Horizontal velocity rotates by the yaw angle.
  const Vec3 v0 = traj.states[10].velocity, v1 = aug.states[10].velocity;
  EXPECT_NEAR(std::atan2(v1.y(), v1.x()) - std::atan2(v0.y(), v0.x()), 0.7, 1e-9);
}

TEST(ExpandDataset, SizesOrderAndDeterminism) {
  Rng rng(4);
  std::vector<Trajectory> base{ballistic_trajectory(random_lob(rng), 0.6, "a", "0"),
                               ballistic_trajectory(random_lob(rng), 0.6, "b", "0")};
  const auto x = expand_dataset(base, 4, 9);
  ASSERT_EQ(x.size(), 8u);
  EXPECT_EQ(x[0].samples.front().position, base[0].samples.front().position);
  EXPECT_EQ(x[4].object_id, "b");
  std::set<std::string> trials;
  for (const auto& t : x) trials.insert(t.object_id + t.trial_id);
  EXPECT_EQ(trials.size(), 8u);
  const auto y = expand_dataset(base, 4, 9);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i].samples.back().position, y[i].samples.back().position);
  EXPECT_THROW(expand_dataset(base, 0, 9), InputError);
}

namespace {

std::vector<Trajectory> labelled(int per_object, const std::vector<std::string>& ids) {
  Rng rng(5);
  std::vector<Trajectory> out;
  for (const auto& id : ids)
    for (int i = 0; i < per_object; ++i)
      out.push_back(ballistic_trajectory(random_lob(rng), 0.6, id, std::to_string(i)));
  return out;
}

}  // namespace

TEST(Split, PartitionsSeenObjectsAndHoldsOutUnseen) {
  const auto data = labelled(20, {"a", "b", "c"});
  const auto split = split_dataset(data, {"a", "b"}, {"c"}, 11);
  EXPECT_EQ(split.train.size(), 32u);
  EXPECT_EQ(split.val.size(), 4u);
  EXPECT_EQ(split.test.size(), 4u);
  EXPECT_EQ(split.unseen.size(), 20u);
  std::set<std::size_t> all;
  for (const auto* part : {&split.train, &split.val, &split.test, &split.unseen})
    for (auto i : *part) EXPECT_TRUE(all.insert(i).second) << "index in two partitions: " << i;
  EXPECT_EQ(all.size(), data.size());
  for (auto i : split.unseen) EXPECT_EQ(data[i].object_id, "c");

  const auto again = split_dataset(data, {"a", "b"}, {"c"}, 11);
  EXPECT_EQ(again.train, split.train);
  EXPECT_EQ(again.test, split.test);
  const auto other = split_dataset(data, {"a", "b"}, {"c"}, 12);
  EXPECT_NE(other.train, split.train);
}

TEST(Split, RejectsInconsistentLists) {
  const auto data = labelled(3, {"a", "b"});
  EXPECT_THROW(split_dataset(data, {"a", "b"}, {"b"}, 1), InputError);
  EXPECT_THROW(split_dataset(data, {"a"}, {}, 1), InputError);
}

TEST(DatasetIo, RoundTripIsExact) {
  const auto data = labelled(2, {"a", "b"});
  std::stringstream buf;
  write_dataset(buf, data);
  const auto back = read_dataset(buf);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].object_id, data[i].object_id);
    EXPECT_EQ(back[i].trial_id, data[i].trial_id);
    ASSERT_EQ(back[i].samples.size(), data[i].samples.size());
    for (std::size_t k = 0; k < data[i].samples.size(); ++k) {
      EXPECT_EQ(back[i].samples[k].t, data[i].samples[k].t);
      EXPECT_EQ(back[i].samples[k].position, data[i].samples[k].position);
    }
    EXPECT_EQ(back[i].states.size(), data[i].states.size());
  }
  EXPECT_EQ(object_ids(back), (std::vector<std::string>{"a", "b"}));
}

TEST(DatasetIo, ParseErrorsCarryLineNumbers) {
  std::stringstream buf;
  write_dataset(buf, labelled(1, {"a"}));
  buf << "{\"object_id\": \"x\", \"trial_id\": \"1\", \"dt\": 0.008333, \"samples\": [[0, 1, 2]]}\n";
  try {
    read_dataset(buf);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::stringstream bad("not json\n");
  EXPECT_THROW(read_dataset(bad), ParseError);
  std::stringstream backwards(
      "{\"object_id\":\"x\",\"trial_id\":\"1\",\"dt\":0.5,\"samples\":[[1,0,0,1],[0.5,0,0,1],[1.5,0,0,1]]}\n");
  EXPECT_THROW(read_dataset(backwards), ParseError);
}

TEST(StateVec, FlatRoundTrip) {
  const StateVec s{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  const auto f = s.flat();
  EXPECT_EQ(f[4], 5.0);
  const StateVec r = StateVec::from_flat(f);
  EXPECT_EQ(r.acceleration, s.acceleration);
  EXPECT_THROW(StateVec::from_flat(std::vector<double>(8)), InputError);
}

TEST(Crossing, ParabolaWithinInterpolationBound) {
  Rng rng(6);
  const double g = -kGravity.z(), dt = kCaptureDt;
  for (int k = 0; k < 30; ++k) {
    const auto lob = random_lob(rng);
    const auto traj = ballistic_trajectory(lob);
    const double h = kDefaultPlaneHeight;
    const double t = (lob.v0.z() + std::sqrt(lob.v0.z() * lob.v0.z() + 2.0 * g * (lob.p0.z() - h))) / g;
    const Vec3 exact = lob.p0 + lob.v0 * t + 0.5 * kGravity * t * t;
    const Crossing c = ground_truth_impact(traj, PlaneSpec{h});
    EXPECT_EQ(c.point.z(), h);
    EXPECT_LT((c.point.head<2>() - exact.head<2>()).norm(), 2.0 * dt * dt * g);
  }
}

TEST(Windows, FortyAboveThePlaneGivesThirtyFour) {
  std::vector<Sample> s;
  for (int i = 0; i < 46; ++i) s.push_back({i * kCaptureDt, Vec3(0.01 * i, 0.0, 1.0 - 0.01 * i)});
  const auto traj = make_trajectory("line", "0", kCaptureDt, s);
  const auto windows = make_windows(traj, 5, PlaneSpec{0.605});
  ASSERT_EQ(windows.size(), 34u);
  EXPECT_EQ(windows.front().steps_to_impact, 34);
  EXPECT_EQ(windows.back().steps_to_impact, 1);
}

TEST(ExpandDataset, HundredTimesFourIsFourHundred) {
  const auto base = labelled(100, {"a"});
  const auto x = expand_dataset(base, 4, 1);
  EXPECT_EQ(x.size(), 400u);
  const auto split = split_dataset(x, {"a"}, {}, 2);
  EXPECT_EQ(split.train.size(), 320u);
  EXPECT_EQ(split.val.size(), 40u);
  EXPECT_EQ(split.test.size(), 40u);
}
