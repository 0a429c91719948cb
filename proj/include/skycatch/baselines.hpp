#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "skycatch/common.hpp"
#include "skycatch/predictor.hpp"
#include "skycatch/trajkit.hpp"

namespace skycatch {

struct RansacConfig {
  int iterations = 200;
  double inlier_threshold = 0.01;  // m
  int min_inliers = 0;             // 0: max(3, ceil(0.6 * history size))
  std::uint64_t seed = 0;
  Vec3 gravity = kGravity;
};

// Ballistic model p(t) = c0 + c1 t + g t^2 / 2 with gravity fixed; t relative to `t_ref`.
struct ParabolaFit {
  Vec3 c0 = Vec3::Zero();
  Vec3 c1 = Vec3::Zero();
  double t_ref = 0.0;
  std::vector<std::size_t> inliers;

  Vec3 at(double t, const Vec3& gravity) const;
};

ParabolaFit fit_ballistic_least_squares(std::span<const Sample> samples, std::span<const std::size_t> subset,
                                        double t_ref, const Vec3& gravity);
ParabolaFit ransac_ballistic_fit(std::span<const Sample> history, const RansacConfig& cfg);

Vec3 newton_predict(std::span<const Sample> history, const PlaneSpec& plane, const RansacConfig& cfg = {});

class NewtonPredictor final : public ImpactPredictor {
 public:
  NewtonPredictor(int history_length, RansacConfig cfg = {}) : history_length_(history_length), cfg_(cfg) {}
  std::string name() const override { return "newton"; }
  int history_length() const override { return history_length_; }
  ImpactEstimate predict(const History& h, const PlaneSpec& plane) const override;

 private:
  int history_length_;
  RansacConfig cfg_;
};

// Linear epsilon-insensitive regressor y = w . x + b.
struct LinearSvr {
  std::vector<double> weights;
  double bias = 0.0;

  double predict(std::span<const double> x) const;
};

struct SvrTrainOptions {
  double epsilon = 0.0;
  double lambda = 1e-6;
  int epochs = 2000;
  int batch = 0;  // 0: full batch
  double step = 0.1;
  std::uint64_t seed = 0;
};

struct SvrFitResult {
  LinearSvr model;
  // Regularized objective of the returned iterate after each epoch.
  std::vector<double> objective_history;
};

double svr_objective(const LinearSvr& m, std::span<const std::vector<double>> xs, std::span<const double> ys,
                     double epsilon, double lambda);

// Stochastic subgradient descent with step/sqrt(k) and iterate averaging;
// the returned iterate is the best averaged iterate seen at an epoch boundary.
SvrFitResult fit_linear_svr(std::span<const std::vector<double>> xs, std::span<const double> ys,
                            const SvrTrainOptions& options);

struct SvrModel {
  int history_length = 0;
  // Features: newest position, then successive position differences, standardized.
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::array<LinearSvr, 3> outputs;
  double epsilon = 0.0;
  double lambda = 0.0;
  bool trained = false;

  std::vector<double> features(std::span<const Sample> history) const;
  Vec3 predict(std::span<const Sample> history) const;
};

SvrModel svr_fit(const std::vector<TrainingWindow>& windows, const SvrTrainOptions& options);
Vec3 svr_predict(const SvrModel& model, std::span<const Sample> history);

class SvrPredictor final : public ImpactPredictor {
 public:
  explicit SvrPredictor(SvrModel model) : model_(std::move(model)) {}
  std::string name() const override { return "svr"; }
  int history_length() const override { return model_.history_length; }
  ImpactEstimate predict(const History& h, const PlaneSpec& plane) const override;
  const SvrModel& model() const { return model_; }

 private:
  SvrModel model_;
};

}  // namespace skycatch
