#include "skycatch/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace skycatch {

Vec3 ParabolaFit::at(double t, const Vec3& gravity) const {
  const double tau = t - t_ref;
  return c0 + c1 * tau + 0.5 * gravity * tau * tau;
}

ParabolaFit fit_ballistic_least_squares(std::span<const Sample> samples, std::span<const std::size_t> subset,
                                        double t_ref, const Vec3& gravity) {
  // Per axis: y_i = p_i - g tau_i^2 / 2 = c0 + c1 tau_i, a straight-line fit.
  const double n = static_cast<double>(subset.size());
  double st = 0.0, stt = 0.0;
  Vec3 sy = Vec3::Zero(), sty = Vec3::Zero();
  for (std::size_t idx : subset) {
    const double tau = samples[idx].t - t_ref;
    const Vec3 y = samples[idx].position - 0.5 * gravity * tau * tau;
    st += tau;
    stt += tau * tau;
    sy += y;
    sty += tau * y;
  }
  const double det = n * stt - st * st;
  if (!(std::abs(det) > 1e-300)) throw InputError("degenerate sample times in ballistic fit");
  ParabolaFit fit;
  fit.t_ref = t_ref;
  fit.c1 = (n * sty - st * sy) / det;
  fit.c0 = (sy - fit.c1 * st) / n;
  fit.inliers.assign(subset.begin(), subset.end());
  return fit;
}

ParabolaFit ransac_ballistic_fit(std::span<const Sample> history, const RansacConfig& cfg) {
  const std::size_t n = history.size();
  if (n < 3) throw InputError("Newton baseline needs at least 3 history samples, got " + std::to_string(n));
  if (cfg.iterations < 1) throw InputError("RANSAC needs at least one iteration");
  if (!(cfg.inlier_threshold > 0.0)) throw InputError("RANSAC inlier threshold must be positive");
  const std::size_t min_inliers =
      cfg.min_inliers > 0 ? static_cast<std::size_t>(cfg.min_inliers)
                          : std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(0.6 * static_cast<double>(n))));
  const double t_ref = history.back().t;

  // Minimal subsets: all triples when they fit the budget, otherwise seeded draws.
  std::vector<std::array<std::size_t, 3>> subsets;
  const std::size_t n_triples = n * (n - 1) * (n - 2) / 6;
  if (n_triples <= static_cast<std::size_t>(cfg.iterations)) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) subsets.push_back({i, j, k});
  } else {
    Rng rng(cfg.seed);
    for (int it = 0; it < cfg.iterations; ++it) {
      std::size_t a = rng.index(n), b = rng.index(n - 1), c = rng.index(n - 2);
      if (b >= a) ++b;
      const std::size_t lo = std::min(a, b), hi = std::max(a, b);
      if (c >= lo) ++c;
      if (c >= hi) ++c;
      subsets.push_back({a, b, c});
    }
  }

  std::vector<std::size_t> best;
  for (const auto& subset : subsets) {
    const ParabolaFit fit = fit_ballistic_least_squares(history, subset, t_ref, cfg.gravity);
    std::vector<std::size_t> consensus;
    for (std::size_t i = 0; i < n; ++i)
      if ((history[i].position - fit.at(history[i].t, cfg.gravity)).norm() <= cfg.inlier_threshold)
        consensus.push_back(i);
    if (consensus.size() > best.size()) best = std::move(consensus);
  }
  if (best.size() < min_inliers) {
    throw Error("RANSAC consensus of " + std::to_string(best.size()) + " samples is below the minimum of " +
                std::to_string(min_inliers));
  }
  return fit_ballistic_least_squares(history, best, t_ref, cfg.gravity);
}

Vec3 newton_predict(std::span<const Sample> history, const PlaneSpec& plane, const RansacConfig& cfg) {
  const ParabolaFit fit = ransac_ballistic_fit(history, cfg);
  // z(tau) = a tau^2 + b tau + c = 0 at the plane; take the root where z is decreasing.
  const double a = 0.5 * cfg.gravity.z();
  const double b = fit.c1.z();
  const double c = fit.c0.z() - plane.height;
  double tau;
  if (a == 0.0) {
    if (!(b < 0.0)) throw NoCrossingError("ballistic fit never descends through the plane");
    tau = -c / b;
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) throw NoCrossingError("ballistic fit has no real crossing with the plane");
    const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    const double r1 = q / a;
    const double r2 = q != 0.0 ? c / q : r1;
    // dz/dtau = 2 a tau + b; choose the descending root.
    tau = (2.0 * a * r1 + b < 0.0) ? r1 : r2;
    if (!(2.0 * a * tau + b <= 0.0)) throw NoCrossingError("ballistic fit has no descending crossing");
  }
  Vec3 p = fit.at(fit.t_ref + tau, cfg.gravity);
  p.z() = plane.height;
  return p;
}

ImpactEstimate NewtonPredictor::predict(const History& h, const PlaneSpec& plane) const {
  try {
    return ImpactEstimate::success(newton_predict(h.samples, plane, cfg_));
  } catch (const Error& e) {
    return ImpactEstimate::failure(e.what());
  }
}

double LinearSvr::predict(std::span<const double> x) const {
  double y = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) y += weights[i] * x[i];
  return y;
}

double svr_objective(const LinearSvr& m, std::span<const std::vector<double>> xs, std::span<const double> ys,
                     double epsilon, double lambda) {
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) loss += std::max(0.0, std::abs(ys[i] - m.predict(xs[i])) - epsilon);
  double reg = 0.0;
  for (double w : m.weights) reg += w * w;
  return lambda * reg + loss / static_cast<double>(xs.size());
}

SvrFitResult fit_linear_svr(std::span<const std::vector<double>> xs, std::span<const double> ys,
                            const SvrTrainOptions& options) {
  if (xs.empty()) throw InputError("SVR training set is empty");
  if (xs.size() != ys.size()) throw InputError("SVR features and targets differ in length");
  const std::size_t dim = xs.front().size();
  const std::size_t n = xs.size();
  const std::size_t batch = options.batch > 0 ? std::min<std::size_t>(static_cast<std::size_t>(options.batch), n) : n;

  LinearSvr w{std::vector<double>(dim, 0.0), 0.0};
  LinearSvr avg = w;
  SvrFitResult result{avg, {}};
  double best = svr_objective(avg, xs, ys, options.epsilon, options.lambda);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(options.seed);
  std::vector<double> gw(dim);
  long k = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    if (batch < n) rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      std::fill(gw.begin(), gw.end(), 0.0);
      double gb = 0.0;
      for (std::size_t j = start; j < stop; ++j) {
        const std::size_t i = order[j];
        const double r = ys[i] - w.predict(xs[i]);
        if (std::abs(r) > options.epsilon) {
          const double s = r > 0.0 ? -1.0 : 1.0;
          for (std::size_t d = 0; d < dim; ++d) gw[d] += s * xs[i][d];
          gb += s;
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      const double eta = options.step / std::sqrt(static_cast<double>(k) + 1.0);
      for (std::size_t d = 0; d < dim; ++d) w.weights[d] -= eta * (gw[d] * inv + 2.0 * options.lambda * w.weights[d]);
      w.bias -= eta * gb * inv;
      // Averaging with weights proportional to the iteration count.
      const double rho = 2.0 / (static_cast<double>(k) + 2.0);
      for (std::size_t d = 0; d < dim; ++d) avg.weights[d] += rho * (w.weights[d] - avg.weights[d]);
      avg.bias += rho * (w.bias - avg.bias);
      ++k;
    }
    const double obj = svr_objective(avg, xs, ys, options.epsilon, options.lambda);
    if (obj <= best) {
      best = obj;
      result.model = avg;
    }
    result.objective_history.push_back(best);
  }
  return result;
}

std::vector<double> SvrModel::features(std::span<const Sample> history) const {
  if (static_cast<int>(history.size()) != history_length) {
    throw InputError("SVR expects " + std::to_string(history_length) + " history samples, got " +
                     std::to_string(history.size()));
  }
  std::vector<double> phi;
  phi.reserve(history.size() * 3);
  for (int a = 0; a < 3; ++a) phi.push_back(history.back().position[a]);
  for (std::size_t k = 1; k < history.size(); ++k)
    for (int a = 0; a < 3; ++a) phi.push_back(history[k].position[a] - history[k - 1].position[a]);
  if (!feature_mean.empty())
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = (phi[i] - feature_mean[i]) / feature_scale[i];
  return phi;
}

Vec3 SvrModel::predict(std::span<const Sample> history) const {
  const std::vector<double> phi = features(history);
  return {outputs[0].predict(phi), outputs[1].predict(phi), outputs[2].predict(phi)};
}

SvrModel svr_fit(const std::vector<TrainingWindow>& windows, const SvrTrainOptions& options) {
  if (windows.empty()) throw InputError("SVR training set is empty");
  SvrModel model;
  model.history_length = static_cast<int>(windows.front().history_samples.size());
  model.epsilon = options.epsilon;
  model.lambda = options.lambda;

  std::vector<std::vector<double>> xs;
  xs.reserve(windows.size());
  for (const auto& w : windows) xs.push_back(model.features(w.history_samples));
  const std::size_t dim = xs.front().size();
  const double n = static_cast<double>(xs.size());
  model.feature_mean.assign(dim, 0.0);
  model.feature_scale.assign(dim, 0.0);
  for (const auto& x : xs)
    for (std::size_t i = 0; i < dim; ++i) model.feature_mean[i] += x[i] / n;
  for (const auto& x : xs)
    for (std::size_t i = 0; i < dim; ++i)
      model.feature_scale[i] += (x[i] - model.feature_mean[i]) * (x[i] - model.feature_mean[i]) / n;
  for (auto& s : model.feature_scale) s = std::max(std::sqrt(s), 1e-9);
  for (auto& x : xs)
    for (std::size_t i = 0; i < dim; ++i) x[i] = (x[i] - model.feature_mean[i]) / model.feature_scale[i];

  for (int axis = 0; axis < 3; ++axis) {
    std::vector<double> ys;
    ys.reserve(windows.size());
    for (const auto& w : windows) ys.push_back(w.impact_point[axis]);
    SvrTrainOptions opt = options;
    opt.seed = derive_seed(options.seed, static_cast<std::uint64_t>(axis));
    model.outputs[static_cast<std::size_t>(axis)] = fit_linear_svr(xs, ys, opt).model;
  }
  model.trained = true;
  return model;
}

Vec3 svr_predict(const SvrModel& model, std::span<const Sample> history) {
  if (!model.trained) throw InputError("SVR model is not trained");
  return model.predict(history);
}

ImpactEstimate SvrPredictor::predict(const History& h, const PlaneSpec&) const {
  try {
    return ImpactEstimate::success(svr_predict(model_, h.samples));
  } catch (const Error& e) {
    return ImpactEstimate::failure(e.what());
  }
}

FunctionPredictor oracle_predictor(int history_length) {
  return FunctionPredictor("oracle", history_length, [](const History& h, const PlaneSpec& plane) {
    if (h.source == nullptr) return ImpactEstimate::failure("oracle needs the source trajectory");
    try {
      return ImpactEstimate::success(ground_truth_impact(*h.source, plane).point);
    } catch (const Error& e) {
      return ImpactEstimate::failure(e.what());
    }
  });
}

FunctionPredictor biased_predictor(const ImpactPredictor& inner, const Vec3& offset) {
  return FunctionPredictor(inner.name() + "+bias", inner.history_length(),
                           [&inner, offset](const History& h, const PlaneSpec& plane) {
                             ImpactEstimate e = inner.predict(h, plane);
                             if (e.ok) e.point += offset;
                             return e;
                           });
}

}  // namespace skycatch
