#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "skycatch/baselines.hpp"
#include "skycatch/predictors.hpp"
#include "test_support.hpp"

using namespace skycatch;
using skycatch::testing::ballistic_samples;

namespace {

// Descending root of the vertical quadratic, evaluated from the generating parameters.
Vec3 closed_form_impact(const Vec3& p0, const Vec3& v0, double h) {
  const double g = -kGravity.z();
  const double t = (v0.z() + std::sqrt(v0.z() * v0.z() + 2.0 * g * (p0.z() - h))) / g;
  Vec3 p = p0 + v0 * t + 0.5 * kGravity * t * t;
  p.z() = h;
  return p;
}

}  // namespace

TEST(BallisticFit, RecoversGeneratingParameters) {
  const Vec3 p0(0.1, 0.2, 1.4), v0(2.5, -0.5, 3.0);
  const auto s = ballistic_samples(p0, v0, 0.0, 10);
  std::vector<std::size_t> all(s.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const double t_ref = s.back().t;
  const ParabolaFit fit = fit_ballistic_least_squares(s, all, t_ref, kGravity);
  EXPECT_LT((fit.c0 - (p0 + v0 * t_ref + 0.5 * kGravity * t_ref * t_ref)).norm(), 1e-10);
  EXPECT_LT((fit.c1 - (v0 + kGravity * t_ref)).norm(), 1e-8);
  EXPECT_LT((fit.at(0.0, kGravity) - p0).norm(), 1e-10);
}

TEST(Newton, NoiseFreeMatchesQuadraticRoot) {
  Rng rng(1);
  for (int k = 0; k < 30; ++k) {
    const Vec3 p0(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1.3, 1.7));
    const Vec3 v0(rng.uniform(1, 4), rng.uniform(-1, 1), rng.uniform(-1, 6));
    const auto s = ballistic_samples(p0, v0, 0.0, 6);
    EXPECT_LT((newton_predict(s, PlaneSpec{}) - closed_form_impact(p0, v0, 0.6)).norm(), 1e-6);
  }
}

TEST(Newton, PropertyRobustToOutliers) {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const Vec3 p0(0, 0, 1.5), v0(rng.uniform(1, 4), rng.uniform(-1, 1), rng.uniform(1, 6));
    auto s = ballistic_samples(p0, v0, 0.0, 20);
    for (int j = 0; j < 4; ++j) {
      const Vec3 dir = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized();
      s[static_cast<std::size_t>(1 + 5 * j)].position += 0.5 * dir;
    }
    RansacConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(k);
    const ParabolaFit fit = ransac_ballistic_fit(s, cfg);
    EXPECT_EQ(fit.inliers.size(), 16u);
    EXPECT_LT((newton_predict(s, PlaneSpec{}, cfg) - closed_form_impact(p0, v0, 0.6)).norm(), 1e-3);
  }
}

TEST(Newton, TwoOutliersInTenAreRejected) {
  const Vec3 p0(0.2, 0.1, 1.5), v0(3.0, 0.4, 2.0);
  const auto clean = ballistic_samples(p0, v0, 0.0, 10);
  const Vec3 truth = closed_form_impact(p0, v0, 0.6);
  EXPECT_LT((newton_predict(clean, PlaneSpec{}) - truth).norm(), 1e-6);
  auto dirty = clean;
  dirty[3].position.z() += 0.5;
  dirty[7].position.x() -= 0.5;
  RansacConfig cfg;
  cfg.inlier_threshold = 0.01;
  EXPECT_LT((newton_predict(dirty, PlaneSpec{}, cfg) - newton_predict(clean, PlaneSpec{}, cfg)).norm(), 1e-6);
}

TEST(Newton, FailuresAreReportedNotThrown) {
  // Starts below the plane and keeps rising: no descending crossing exists.
  const auto s = ballistic_samples(Vec3(0, 0, 0.1), Vec3(0, 0, 0.1), 0.0, 6);
  EXPECT_THROW(newton_predict(s, PlaneSpec{1.0}), NoCrossingError);
  const NewtonPredictor p(6);
  History h;
  h.samples = s;
  const auto est = p.predict(h, PlaneSpec{1.0});
  EXPECT_FALSE(est.ok);
  EXPECT_FALSE(est.diagnostic.empty());
  EXPECT_THROW(newton_predict(std::span<const Sample>(s).first(2), PlaneSpec{}), InputError);
}

TEST(LinearSvr, FitsNoiselessLinearTargets) {
  Rng rng(3);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    xs.push_back({a, b});
    ys.push_back(2.0 * a - 0.5 * b + 0.3);
  }
  SvrTrainOptions opt;
  opt.epochs = 3000;
  opt.lambda = 0.0;
  const auto res = fit_linear_svr(xs, ys, opt);
  EXPECT_NEAR(res.model.weights[0], 2.0, 0.02);
  EXPECT_NEAR(res.model.weights[1], -0.5, 0.02);
  EXPECT_NEAR(res.model.bias, 0.3, 0.02);
  // Best-iterate selection: the reported objective never increases.
  for (std::size_t k = 1; k < res.objective_history.size(); ++k)
    EXPECT_LE(res.objective_history[k], res.objective_history[k - 1]);
  EXPECT_DOUBLE_EQ(res.objective_history.back(), svr_objective(res.model, xs, ys, opt.epsilon, opt.lambda));
}

TEST(LinearSvr, ToyLineIsRecovered) {
  const std::vector<std::vector<double>> xs{{0.0}, {1.0}, {2.0}};
  const std::vector<double> ys{0.0, 1.0, 2.0};
  SvrTrainOptions opt;
  opt.epsilon = 0.0;
  opt.lambda = 0.0;
  opt.epochs = 20000;
  const auto res = fit_linear_svr(xs, ys, opt);
  EXPECT_NEAR(res.model.weights[0], 1.0, 1e-3);
  EXPECT_NEAR(res.model.bias, 0.0, 1e-3);
  EXPECT_NEAR(res.model.predict(std::vector<double>{3.0}), 3.0, 1e-3);
}

TEST(LinearSvr, ObjectiveByHand) {
  LinearSvr m;
  m.weights = {1.0, -2.0};
  m.bias = 0.5;
  const std::vector<std::vector<double>> xs{{1, 1}, {0, 2}};
  const std::vector<double> ys{0.0, 0.0};
  // residuals -0.5 and -3.5; epsilon 1 leaves 0 and 2.5; mean 1.25; lambda |w|^2 = 0.5.
  EXPECT_DOUBLE_EQ(svr_objective(m, xs, ys, 1.0, 0.1), 1.25 + 0.5);
  EXPECT_THROW(fit_linear_svr({}, {}, {}), InputError);
}

TEST(SvrModel, LearnsBallisticImpactsAndPersists) {
  Rng rng(4);
  std::vector<TrainingWindow> windows;
  for (int k = 0; k < 40; ++k) {
    const auto traj = skycatch::testing::ballistic_trajectory(skycatch::testing::random_lob(rng));
    auto w = make_windows(traj, 3, PlaneSpec{});
    for (std::size_t i = 0; i < w.size(); i += 10) windows.push_back(w[i]);
  }
  SvrTrainOptions opt;
  opt.epochs = 400;
  const SvrModel model = svr_fit(windows, opt);
  ASSERT_TRUE(model.trained);
  EXPECT_EQ(model.history_length, 4);
  double err = 0.0, spread = 0.0;
  Vec3 mean = Vec3::Zero();
  for (const auto& w : windows) mean += w.impact_point / static_cast<double>(windows.size());
  for (const auto& w : windows) {
    err += (svr_predict(model, w.history_samples) - w.impact_point).norm();
    spread += (mean - w.impact_point).norm();
  }
  // Clearly better than predicting the mean impact point.
  EXPECT_LT(err, 0.5 * spread);

  const auto path = (std::filesystem::temp_directory_path() / "skycatch_svr_test.ckpt").string();
  save_svr_checkpoint(path, model, opt);
  EXPECT_EQ(checkpoint_kind(path), "svr");
  const SvrModel back = load_svr_checkpoint(path);
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".json");
  for (const auto& w : windows) EXPECT_EQ(svr_predict(back, w.history_samples), svr_predict(model, w.history_samples));
  EXPECT_THROW(svr_predict(model, std::span<const Sample>(windows[0].history_samples).first(2)), InputError);
}
