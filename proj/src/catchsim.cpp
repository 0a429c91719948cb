#include "skycatch/catchsim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numbers>
#include <ostream>
#include <thread>

#include "skycatch/csv.hpp"

namespace skycatch {

void validate(const SimConfig& cfg) {
  if (!(cfg.v_max > 0.0)) throw InputError("v_max must be positive");
  if (!(cfg.dt > 0.0)) throw InputError("control dt must be positive");
  if (!(cfg.init_radius >= 0.0)) throw InputError("initial radius must be non-negative");
  if (cfg.update_interval < 1) throw InputError("prediction update interval must be at least 1 step");
  if (cfg.basket_radii.empty()) throw InputError("at least one basket radius is required");
  for (std::size_t i = 0; i < cfg.basket_radii.size(); ++i) {
    if (!(cfg.basket_radii[i] > 0.0)) throw InputError("basket radii must be positive");
    if (i > 0 && !(cfg.basket_radii[i] > cfg.basket_radii[i - 1])) throw InputError("basket radii must be ascending");
  }
}

RobotState make_robot(const Vec2& position) {
  RobotState s;
  s.position = position;
  s.previous_position = position;
  return s;
}

RobotState robot_step(const RobotState& state, const Vec2& target, const SimConfig& cfg) {
  RobotState next = state;
  const Vec2 error = target - state.position;
  next.integral += error * cfg.dt;
  const Vec2 rate = (state.position - state.previous_position) / cfg.dt;
  Vec2 v = cfg.pid.kp * error + cfg.pid.ki * next.integral - cfg.pid.kd * rate;
  const double speed = v.norm();
  if (speed > cfg.v_max) v *= cfg.v_max / speed;
  next.velocity = v;
  next.previous_position = state.position;
  next.position = state.position + v * cfg.dt;
  return next;
}

CatchEpisodeResult run_episode(const Trajectory& traj, const ImpactPredictor& predictor, const PlaneSpec& plane,
                               const SimConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (std::abs(traj.dt - cfg.dt) > 1e-9) throw InputError("trajectory dt differs from the control dt");
  const Crossing crossing = ground_truth_impact(traj, plane);
  const int hist = predictor.history_length();
  if (hist < 1) throw InputError("predictor history length must be positive");

  CatchEpisodeResult out;
  out.method = predictor.name();
  out.object_id = traj.object_id;
  out.trial_id = traj.trial_id;
  out.impact_point = crossing.point;
  out.impact_time = traj.samples[crossing.index_above].t + crossing.fraction * traj.dt;
  out.radii = cfg.basket_radii;

  Rng rng(seed);
  const double r = cfg.init_radius * std::sqrt(rng.uniform());
  const double theta = 2.0 * std::numbers::pi * rng.uniform();
  out.initial_position = crossing.point.head<2>() + r * Vec2(std::cos(theta), std::sin(theta));

  RobotState robot = make_robot(out.initial_position);
  bool have_target = false;
  Vec2 target = Vec2::Zero();
  Vec2 at_impact = robot.position;

  for (std::size_t i = 0; i <= crossing.index_above; ++i) {
    const auto n_seen = static_cast<int>(i) + 1;
    if (n_seen >= hist && (n_seen - hist) % cfg.update_interval == 0) {
      const std::size_t lo = i + 1 - static_cast<std::size_t>(hist);
      History h{std::span<const Sample>(traj.samples).subspan(lo, static_cast<std::size_t>(hist)),
                std::span<const StateVec>(traj.states).subspan(lo, static_cast<std::size_t>(hist)), &traj};
      PredictionRecord rec;
      rec.t = traj.samples[i].t;
      const auto start = std::chrono::steady_clock::now();
      const ImpactEstimate est = predictor.predict(h, plane);
      rec.inference_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rec.ok = est.ok && est.point.allFinite();
      rec.point = est.point;
      rec.diagnostic = est.ok ? std::string() : est.diagnostic;
      if (rec.ok) {
        target = est.point.head<2>();
        have_target = true;
      } else {
        ++out.failed_predictions;
        if (cfg.on_failure == PredictionFailurePolicy::fail_episode && !out.failed) {
          out.failed = true;
          out.diagnostic = "prediction failed at t=" + std::to_string(rec.t) + ": " + est.diagnostic;
        }
      }
      out.predictions.push_back(std::move(rec));
    }
    const Vec2 before = robot.position;
    if (have_target) robot = robot_step(robot, target, cfg);
    out.max_speed = std::max(out.max_speed, (robot.position - before).norm() / cfg.dt);
    if (i == crossing.index_above) at_impact = before + crossing.fraction * (robot.position - before);
  }

  if (!have_target && !out.failed) {
    out.failed = true;
    out.diagnostic = out.predictions.empty() ? "flight ended before a full history was observed"
                                             : "no successful prediction before impact";
  }
  out.robot_at_impact = at_impact;
  const double miss = out.miss_distance();
  for (double radius : cfg.basket_radii) out.success.push_back(!out.failed && miss <= radius);
  return out;
}

std::vector<std::size_t> episode_slice(const std::vector<Trajectory>& trajs, std::span<const std::size_t> indices,
                                       int max_objects, int per_object) {
  std::vector<std::string> objects;
  std::vector<int> counts;
  std::vector<std::size_t> out;
  for (std::size_t idx : indices) {
    const std::string& id = trajs.at(idx).object_id;
    auto it = std::find(objects.begin(), objects.end(), id);
    if (it == objects.end()) {
      if (static_cast<int>(objects.size()) >= max_objects) continue;
      objects.push_back(id);
      counts.push_back(0);
      it = objects.end() - 1;
    }
    int& n = counts[static_cast<std::size_t>(it - objects.begin())];
    if (n >= per_object) continue;
    ++n;
    out.push_back(idx);
  }
  return out;
}

double SrTable::sr(const std::string& method, double radius, bool seen) const {
  for (const auto& row : rows)
    if (row.method == method && std::abs(row.radius - radius) < 1e-12) return seen ? row.seen_sr : row.unseen_sr;
  throw InputError("no SR entry for " + method);
}

SrTable success_table(const std::vector<Trajectory>& trajs, std::span<const std::size_t> seen,
                      std::span<const std::size_t> unseen, std::span<const ImpactPredictor* const> predictors,
                      const PlaneSpec& plane, const SimConfig& cfg) {
  validate(cfg);
  struct Job {
    const ImpactPredictor* predictor;
    std::size_t traj;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::vector<bool> job_seen;
  for (const ImpactPredictor* p : predictors) {
    std::uint64_t k = 0;
    for (std::size_t idx : seen) {
      jobs.push_back({p, idx, derive_seed(cfg.seed, k++)});
      job_seen.push_back(true);
    }
    for (std::size_t idx : unseen) {
      jobs.push_back({p, idx, derive_seed(cfg.seed, k++)});
      job_seen.push_back(false);
    }
  }

  SrTable table;
  table.episodes.resize(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j) {
      try {
        table.episodes[j] = run_episode(trajs.at(jobs[j].traj), *jobs[j].predictor, plane, cfg, jobs[j].seed);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, static_cast<std::size_t>(std::max(1, cfg.threads)));
  if (threads == 1 || jobs.size() < 2) {
    work(0, jobs.size());
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back(work, jobs.size() * t / threads, jobs.size() * (t + 1) / threads);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::size_t j = 0;
  for (const ImpactPredictor* p : predictors) {
    const std::size_t n = seen.size() + unseen.size();
    for (std::size_t ri = 0; ri < cfg.basket_radii.size(); ++ri) {
      SrRow row{p->name(), cfg.basket_radii[ri], 0.0, 0.0, 0, 0};
      int seen_ok = 0, unseen_ok = 0;
      for (std::size_t e = j; e < j + n; ++e) {
        const bool ok = table.episodes[e].success[ri];
        if (job_seen[e]) {
          ++row.seen_n;
          seen_ok += ok;
        } else {
          ++row.unseen_n;
          unseen_ok += ok;
        }
      }
      row.seen_sr = row.seen_n > 0 ? static_cast<double>(seen_ok) / row.seen_n : 0.0;
      row.unseen_sr = row.unseen_n > 0 ? static_cast<double>(unseen_ok) / row.unseen_n : 0.0;
      table.rows.push_back(row);
    }
    j += n;
  }
  return table;
}

void write_sr_csv(std::ostream& out, const SrTable& table) {
  out << "method,radius_m,seen_sr,unseen_sr\n";
  for (const auto& row : table.rows)
    out << row.method << ',' << csv::num(row.radius) << ',' << csv::num(row.seen_sr) << ',' << csv::num(row.unseen_sr)
        << '\n';
}

void write_episode_log(std::ostream& out, const std::vector<CatchEpisodeResult>& episodes) {
  out << "method,object_id,trial_id,init_x,init_y,robot_x,robot_y,impact_x,impact_y,impact_t,miss_m,"
         "predictions,failed_predictions,failed";
  const std::size_t n_radii = episodes.empty() ? 0 : episodes.front().radii.size();
  for (std::size_t i = 0; i < n_radii; ++i) out << ",success_r" << csv::num(episodes.front().radii[i]);
  out << '\n';
  for (const auto& e : episodes) {
    out << e.method << ',' << e.object_id << ',' << e.trial_id << ',' << csv::num(e.initial_position.x()) << ','
        << csv::num(e.initial_position.y()) << ',' << csv::num(e.robot_at_impact.x()) << ','
        << csv::num(e.robot_at_impact.y()) << ',' << csv::num(e.impact_point.x()) << ','
        << csv::num(e.impact_point.y()) << ',' << csv::num(e.impact_time) << ',' << csv::num(e.miss_distance()) << ','
        << e.predictions.size() << ',' << e.failed_predictions << ',' << (e.failed ? 1 : 0);
    for (bool s : e.success) out << ',' << (s ? 1 : 0);
    out << '\n';
  }
}

}  // namespace skycatch
