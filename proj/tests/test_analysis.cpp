#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "skycatch/analysis.hpp"
#include "skycatch/synthgen.hpp"
#include "test_support.hpp"

using namespace skycatch;
using skycatch::testing::ballistic_samples;

namespace {

// Least squares through a QR solve of the stacked design, independent of the closed form.
Vec3 qr_v0(const std::vector<Sample>& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3 * n, 3);
  Eigen::VectorXd b(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double tau = s[static_cast<std::size_t>(i)].t - s.front().t;
    const Vec3 r = s[static_cast<std::size_t>(i)].position - s.front().position - 0.5 * kGravity * tau * tau;
    for (int a = 0; a < 3; ++a) {
      A(3 * i + a, a) = tau;
      b(3 * i + a) = r[a];
    }
  }
  return A.colPivHouseholderQr().solve(b);
}

double mean_residual(const std::vector<Sample>& s, const Vec3& v0) {
  double sum = 0.0;
  for (const auto& x : s) {
    const double tau = x.t - s.front().t;
    sum += (x.position - s.front().position - v0 * tau - 0.5 * kGravity * tau * tau).norm();
  }
  return sum / static_cast<double>(s.size());
}

}  // namespace

TEST(Pds, ExactParabolaScoresZero) {
  Rng rng(1);
  for (int k = 0; k < 10; ++k) {
    const Vec3 p0(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 2));
    const Vec3 v0(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0, 6));
    const double t0 = rng.uniform(0, 1);
    const auto s = ballistic_samples(p0, v0, t0, 80);
    EXPECT_LT(pds(s), 1e-9);
    // Fitted v0 is the velocity at the first sample time.
    EXPECT_LT((fit_parabola_v0(s) - (v0 + kGravity * t0)).norm(), 1e-7);
  }
}

TEST(Pds, PropertyMatchesIndependentLeastSquares) {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    auto s = ballistic_samples(Vec3(0, 0, 1.5), Vec3(rng.uniform(1, 3), 0, rng.uniform(2, 5)), 0.0,
                               10 + static_cast<int>(rng.index(60)));
    for (auto& x : s) x.position += Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
    const Vec3 expected = qr_v0(s);
    EXPECT_LT((fit_parabola_v0(s) - expected).norm(), 1e-8);
    EXPECT_NEAR(pds(s), mean_residual(s, expected), 1e-10);
  }
}

TEST(Pds, TrajectoryOverloadAndAugmentationInvariance) {
  const auto cat = catalog(4);
  const auto traj = simulate(cat[8], sample_launch(4, cat[8]), PlaneSpec{});
  EXPECT_EQ(pds(traj), pds(traj.samples));
  EXPECT_NEAR(pds(augment(traj, 2.1, Vec2(0.5, -0.7))), pds(traj), 1e-9);
}

TEST(Pds, NeedsTwoSamples) {
  EXPECT_THROW(pds(ballistic_samples(Vec3::Zero(), Vec3::Zero(), 0, 1)), InputError);
}

TEST(DatasetReport, GroupsSortsAndUsesSampleStd) {
  std::vector<Trajectory> trajs;
  const double offsets[] = {0.0, 0.03, 0.09};
  for (int i = 0; i < 3; ++i) {
    // A single displaced sample of d metres among n samples gives PDS close to d / n; use the scorer itself.
    auto s = ballistic_samples(Vec3(0, 0, 1.5), Vec3(2, 0, 4), 0.0, 30);
    s[15].position.x() += offsets[i];
    trajs.push_back(make_trajectory("zeta", std::to_string(i), kCaptureDt, s));
  }
  trajs.push_back(make_trajectory("alpha", "0", kCaptureDt, ballistic_samples(Vec3(0, 0, 1.5), Vec3(1, 1, 3), 0, 30)));
  const auto rep = dataset_report(trajs);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].object_id, "alpha");
  EXPECT_EQ(rep.rows[0].n_trajectories, 1u);
  EXPECT_EQ(rep.rows[0].stddev, 0.0);
  const double a = pds(trajs[0]), b = pds(trajs[1]), c = pds(trajs[2]);
  const double mean = (a + b + c) / 3.0;
  const double var = ((a - mean) * (a - mean) + (b - mean) * (b - mean) + (c - mean) * (c - mean)) / 2.0;
  EXPECT_NEAR(rep.rows[1].mean, mean, 1e-15);
  EXPECT_NEAR(rep.rows[1].stddev, std::sqrt(var), 1e-15);

  std::ostringstream out;
  write_pds_csv(out, rep);
  std::istringstream lines(out.str());
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  EXPECT_EQ(header, "object_id,n_trajectories,pds_mean_m,pds_std_m");
  EXPECT_EQ(first.rfind("alpha,1,", 0), 0u);
}
