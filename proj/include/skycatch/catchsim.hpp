#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "skycatch/common.hpp"
#include "skycatch/predictor.hpp"
#include "skycatch/trajkit.hpp"

namespace skycatch {

struct PidGains {
  double kp = 6.0;
  double ki = 0.0;
  double kd = 0.5;
};

// What happens when a predictor fails mid-episode.
enum class PredictionFailurePolicy { hold_target, fail_episode };

struct SimConfig {
  double v_max = 2.5;  // m/s
  PidGains pid;
  double init_radius = 0.3;  // m
  std::vector<double> basket_radii{0.05, 0.10, 0.15, 0.20};
  double dt = kCaptureDt;
  int update_interval = 1;  // observation steps between predictions
  std::uint64_t seed = 0;
  PredictionFailurePolicy on_failure = PredictionFailurePolicy::hold_target;
  int threads = 1;
};

void validate(const SimConfig& cfg);

struct RobotState {
  Vec2 position = Vec2::Zero();
  Vec2 integral = Vec2::Zero();
  Vec2 previous_position = Vec2::Zero();  // derivative acts on the measurement
  Vec2 velocity = Vec2::Zero();           // last commanded velocity
};

RobotState make_robot(const Vec2& position);
RobotState robot_step(const RobotState& state, const Vec2& target, const SimConfig& cfg);

struct PredictionRecord {
  double t = 0.0;
  bool ok = false;
  Vec3 point = Vec3::Zero();
  double inference_time = 0.0;
  std::string diagnostic;
};

struct CatchEpisodeResult {
  std::string method;
  std::string object_id;
  std::string trial_id;
  Vec2 initial_position = Vec2::Zero();
  Vec2 robot_at_impact = Vec2::Zero();
  Vec3 impact_point = Vec3::Zero();
  double impact_time = 0.0;
  std::vector<double> radii;
  std::vector<bool> success;
  std::vector<PredictionRecord> predictions;
  double max_speed = 0.0;
  int failed_predictions = 0;
  bool failed = false;
  std::string diagnostic;

  double miss_distance() const { return (robot_at_impact - impact_point.head<2>()).norm(); }
};

// `seed` fixes the initial robot position.
CatchEpisodeResult run_episode(const Trajectory& traj, const ImpactPredictor& predictor, const PlaneSpec& plane,
                               const SimConfig& cfg, std::uint64_t seed);

// Up to `max_objects` objects (first-appearance order) with up to `per_object` trajectories each.
std::vector<std::size_t> episode_slice(const std::vector<Trajectory>& trajs, std::span<const std::size_t> indices,
                                       int max_objects, int per_object);

struct SrRow {
  std::string method;
  double radius = 0.0;
  double seen_sr = 0.0;
  double unseen_sr = 0.0;
  int seen_n = 0;
  int unseen_n = 0;
};

struct SrTable {
  std::vector<SrRow> rows;  // method-major, radii ascending
  std::vector<CatchEpisodeResult> episodes;

  double sr(const std::string& method, double radius, bool seen) const;
};

// Episode seeds depend on the trajectory position in the slice, so every
// method faces the same initial robot positions.
SrTable success_table(const std::vector<Trajectory>& trajs, std::span<const std::size_t> seen,
                      std::span<const std::size_t> unseen, std::span<const ImpactPredictor* const> predictors,
                      const PlaneSpec& plane, const SimConfig& cfg);

void write_sr_csv(std::ostream& out, const SrTable& table);
void write_episode_log(std::ostream& out, const std::vector<CatchEpisodeResult>& episodes);

}  // namespace skycatch
