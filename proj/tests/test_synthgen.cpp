#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "skycatch/analysis.hpp"
#include "skycatch/synthgen.hpp"

using namespace skycatch;

namespace {

ObjectProfile plain_ball() {
  ObjectProfile p;
  p.object_id = "plain";
  p.mass = 0.1;
  return p;
}

const ObjectProfile& find(const std::vector<ObjectProfile>& cat, const std::string& id) {
  for (const auto& p : cat)
    if (p.object_id == id) return p;
  throw std::runtime_error("missing " + id);
}

}  // namespace

TEST(Aerodynamics, GravityOnlyWithoutCoefficients) {
  const Vec3 a = aerodynamic_acceleration(plain_ball(), 0.3, Vec3(3, 1, 2));
  EXPECT_EQ(a, Vec3(0, 0, -9.81));
}

TEST(Aerodynamics, DragOpposesVelocityQuadratically) {
  ObjectProfile p = plain_ball();
  p.drag_coeff = 0.002;
  const Vec3 v(4, 0, 3);
  const Vec3 a = aerodynamic_acceleration(p, 0.0, v, 0.0);
  // |a| = (c / m) |v|^2 along -v.
  EXPECT_NEAR(a.norm(), 0.002 / 0.1 * 25.0, 1e-12);
  EXPECT_NEAR(a.normalized().dot(v.normalized()), -1.0, 1e-12);
}

TEST(Aerodynamics, MagnusDoesNoWork) {
  ObjectProfile p = plain_ball();
  p.magnus_coeff = 0.002;
  p.magnus_omega = Vec3(3, -20, 7);
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const Vec3 v(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    EXPECT_NEAR(aerodynamic_acceleration(p, 0.0, v, 0.0).dot(v), 0.0, 1e-12);
  }
  // Integrated without gravity or drag the speed stays constant.
  SimOptions opt;
  opt.gravity = 0.0;
  opt.max_flight_time = 0.5;
  LaunchSpec launch;
  launch.origin = Vec3(0, 0, 1.5);
  launch.speed = 5.0;
  launch.elevation = -0.6;  // descends through the plane without gravity
  const auto thr = simulate_detailed(p, launch, PlaneSpec{}, opt);
  for (const auto& v : thr.true_velocity) EXPECT_NEAR(v.norm(), 5.0, 1e-8);
}

TEST(Simulate, BallisticMatchesClosedForm) {
  LaunchSpec launch;
  launch.origin = Vec3(0.0, 0.0, 1.5);
  launch.speed = 7.0;
  launch.elevation = 0.8;
  launch.azimuth = 0.1;
  const PlaneSpec plane{0.6};
  const auto thr = simulate_detailed(plain_ball(), launch, plane);
  const Vec3 v0 = launch.velocity();
  const double g = 9.81;
  const double t_hit = (v0.z() + std::sqrt(v0.z() * v0.z() + 2 * g * (launch.origin.z() - plane.height))) / g;
  const Vec3 expected = launch.origin + v0 * t_hit + 0.5 * Vec3(0, 0, -g) * t_hit * t_hit;
  EXPECT_NEAR(thr.exact_impact_time, t_hit, 1e-9);
  EXPECT_LT((thr.exact_impact - expected).norm(), 1e-9);
  EXPECT_DOUBLE_EQ(thr.exact_impact.z(), plane.height);
  const auto& s = thr.trajectory.samples;
  for (std::size_t i = 0; i < s.size(); i += 9) {
    const double t = s[i].t;
    EXPECT_LT((s[i].position - (launch.origin + v0 * t + 0.5 * Vec3(0, 0, -g) * t * t)).norm(), 1e-9);
  }
  // Recording continues past the crossing by the configured tail.
  EXPECT_GT(s.back().t, t_hit + 0.2 - 2 * kCaptureDt);
}

TEST(Simulate, DragShortensRange) {
  LaunchSpec launch;
  ObjectProfile drag = plain_ball();
  drag.drag_coeff = 0.002;
  const auto a = measure_extent(simulate(plain_ball(), launch, PlaneSpec{}), PlaneSpec{});
  const auto b = measure_extent(simulate(drag, launch, PlaneSpec{}), PlaneSpec{});
  EXPECT_LT(b.range, a.range);
  EXPECT_LT(b.apex, a.apex);
}

TEST(Simulate, NoCrossingThrows) {
  SimOptions opt;
  opt.max_flight_time = 0.1;
  EXPECT_THROW(simulate(plain_ball(), LaunchSpec{}, PlaneSpec{}, opt), NoCrossingError);
}

TEST(Catalog, TwentyDistinctProfilesAndDefaultPartition) {
  const auto cat = catalog(7);
  ASSERT_EQ(cat.size(), 20u);
  std::set<std::string> ids;
  for (const auto& p : cat) {
    ids.insert(p.object_id);
    EXPECT_GT(p.mass, 0.0);
    EXPECT_GE(p.drag_coeff, 0.0);
  }
  EXPECT_EQ(ids.size(), 20u);
  const auto seen = default_seen_ids();
  const auto unseen = default_unseen_ids();
  EXPECT_EQ(seen.size(), 15u);
  EXPECT_EQ(unseen.size(), 5u);
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(cat[i].object_id, seen[i]);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(cat[15 + i].object_id, unseen[i]);
  // Same seed, same catalog.
  const auto again = catalog(7);
  for (std::size_t i = 0; i < cat.size(); ++i) EXPECT_EQ(again[i].drag_coeff, cat[i].drag_coeff);
}

TEST(Catalog, SpansNearBallisticToStronglyAerodynamic) {
  const auto cat = catalog(3);
  const auto data = generate_dataset(cat, 100, 3);
  const auto rep = dataset_report(data);
  int low = 0, high = 0;
  for (const auto& row : rep.rows) {
    low += row.mean < 0.02;
    high += row.mean > 0.05;
  }
  EXPECT_GE(low, 3);
  EXPECT_GE(high, 5);
}

TEST(Catalog, JsonRoundTrip) {
  const auto cat = catalog(11);
  const auto path = (std::filesystem::temp_directory_path() / "skycatch_catalog_test.json").string();
  write_catalog(path, cat, 11);
  const auto back = read_catalog(path);
  std::remove(path.c_str());
  ASSERT_EQ(back.size(), cat.size());
  for (std::size_t i = 0; i < cat.size(); ++i) {
    EXPECT_EQ(back[i].object_id, cat[i].object_id);
    EXPECT_EQ(back[i].drag_coeff, cat[i].drag_coeff);
    EXPECT_EQ(back[i].magnus_omega, cat[i].magnus_omega);
    EXPECT_EQ(back[i].flutter_phase, cat[i].flutter_phase);
    EXPECT_EQ(back[i].lift_coeff, cat[i].lift_coeff);
  }
}

TEST(Launch, PropertyEnvelopeHoldsForEveryObject) {
  const auto cat = catalog(5);
  const LaunchEnvelope env;
  for (std::size_t k = 0; k < cat.size(); ++k)
    for (std::uint64_t s = 0; s < 3; ++s) {
      const auto traj = simulate(cat[k], sample_launch(derive_seed(5, k, s), cat[k]), PlaneSpec{});
      const auto e = measure_extent(traj, PlaneSpec{});
      EXPECT_GE(e.range, env.min_range) << cat[k].object_id;
      EXPECT_LE(e.range, env.max_range) << cat[k].object_id;
      EXPECT_GE(e.apex, env.min_apex) << cat[k].object_id;
      EXPECT_LE(e.apex, env.max_apex) << cat[k].object_id;
    }
}

TEST(GenerateDataset, CountsIdsAndDeterminism) {
  const auto cat = catalog(2);
  const std::vector<ObjectProfile> two{find(cat, "cap"), find(cat, "frisbee")};
  const auto a = generate_dataset(two, 4, 2);
  const auto b = generate_dataset(two, 4, 2);
  ASSERT_EQ(a.size(), 8u);
  EXPECT_EQ(a[0].object_id, "cap");
  EXPECT_EQ(a[7].object_id, "frisbee");
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].samples.size(), b[i].samples.size());
    EXPECT_EQ(a[i].samples.back().position, b[i].samples.back().position);
    EXPECT_EQ(a[i].states.size(), a[i].samples.size());
  }
  const auto c = generate_dataset(two, 4, 3);
  EXPECT_NE(a[0].samples[5].position, c[0].samples[5].position);
}

TEST(Simulate, DragOnlyThrowDeviatesFromParabola) {
  ObjectProfile p;
  p.object_id = "drag";
  p.mass = 0.05;
  p.drag_coeff = 0.02;
  LaunchSpec launch;
  launch.speed = 7.0;
  EXPECT_GT(pds(simulate(p, launch, PlaneSpec{})), 0.01);
}

TEST(Simulate, HalvingTheStepBarelyMovesTheImpact) {
  const auto cat = catalog(8);
  for (const char* id : {"cap", "frisbee", "ball-sponge"}) {
    const auto& p = find(cat, id);
    const LaunchSpec launch = sample_launch(8, p);
    SimOptions fine;
    fine.dt = kCaptureDt / 2.0;
    const auto a = simulate_detailed(p, launch, PlaneSpec{});
    const auto b = simulate_detailed(p, launch, PlaneSpec{}, fine);
    EXPECT_LT((a.exact_impact - b.exact_impact).norm(), 1e-6) << id;
  }
}

TEST(Launch, DragFreeThrowsMeetTheEnvelopeExactly) {
  const LaunchEnvelope env;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto traj = simulate(plain_ball(), sample_launch(s, plain_ball()), PlaneSpec{});
    const auto e = measure_extent(traj, PlaneSpec{});
    EXPECT_GE(e.range, env.min_range);
    EXPECT_LE(e.range, env.max_range);
    EXPECT_GE(e.apex, env.min_apex);
    EXPECT_LE(e.apex, env.max_apex);
  }
}
