#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "skycatch/common.hpp"

namespace skycatch {

inline constexpr double kCaptureDt = 1.0 / 120.0;
inline constexpr int kDefaultHistorySteps = 5;
inline constexpr double kDefaultPlaneHeight = 0.60;

struct Sample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
};

// Object state [position, velocity, acceleration]; flat() keeps that order.
struct StateVec {
  static constexpr int kDim = 9;

  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();

  std::array<double, kDim> flat() const;
  static StateVec from_flat(std::span<const double> v);
};

struct Trajectory {
  std::string object_id;
  std::string trial_id;
  double dt = kCaptureDt;
  std::vector<Sample> samples;
  std::vector<StateVec> states;
};

struct PlaneSpec {
  double height = kDefaultPlaneHeight;
};

struct TrainingWindow {
  std::string object_id;
  std::string trial_id;
  std::vector<Sample> history_samples;  // T+1
  std::vector<StateVec> history;        // s_{t-T..t}
  std::vector<StateVec> future;         // s_{t+1..t+K}
  Vec3 impact_point = Vec3::Zero();
  int steps_to_impact = 0;  // K
  int t_index = 0;
  // Position of the crossing between s_{t+K} and s_{t+K+1}, in [0, 1).
  double crossing_fraction = 0.0;
};

// Descending plane crossing located between samples index_above and index_above+1.
struct Crossing {
  Vec3 point = Vec3::Zero();
  std::size_t index_above = 0;
  double fraction = 0.0;

  // Steps from history end t to the bracketing sample above the plane.
  int steps_from(std::size_t t) const { return static_cast<int>(index_above) - static_cast<int>(t); }
};

struct DeriveOptions {
  bool smooth = false;  // width-3 moving average on positions before differencing
  double spacing_tolerance = 0.01;
};

std::vector<StateVec> derive_states(std::span<const Sample> samples, double dt,
                                    const DeriveOptions& options = {});

Trajectory make_trajectory(std::string object_id, std::string trial_id, double dt,
                           std::vector<Sample> samples, const DeriveOptions& options = {});

// Shared crossing rule: first i with z_i >= height > z_{i+1}, linearly
// interpolated; z of the result is exactly height. Throws NoCrossingError.
Crossing find_descending_crossing(std::span<const Vec3> positions, double height);

Crossing ground_truth_impact(const Trajectory& traj, const PlaneSpec& plane);

std::vector<TrainingWindow> make_windows(const Trajectory& traj, int history_steps,
                                         const PlaneSpec& plane);

Trajectory augment(const Trajectory& traj, double yaw, const Vec2& translation);

std::vector<Trajectory> expand_dataset(const std::vector<Trajectory>& trajs, int factor,
                                       std::uint64_t seed);

struct DatasetSplit {
  std::vector<std::string> seen_objects;
  std::vector<std::string> unseen_objects;
  // Indices into the trajectory list the split was built from.
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::vector<std::size_t> unseen;
};

DatasetSplit split_dataset(const std::vector<Trajectory>& trajs,
                           const std::vector<std::string>& seen_ids,
                           const std::vector<std::string>& unseen_ids, std::uint64_t seed);

// JSON Lines persistence; derived states are recomputed on read.
void write_dataset(std::ostream& out, const std::vector<Trajectory>& trajs);
void write_dataset(const std::string& path, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> read_dataset(std::istream& in, const DeriveOptions& options = {});
std::vector<Trajectory> read_dataset(const std::string& path, const DeriveOptions& options = {});

// Distinct object ids in first-appearance order.
std::vector<std::string> object_ids(const std::vector<Trajectory>& trajs);

}  // namespace skycatch
