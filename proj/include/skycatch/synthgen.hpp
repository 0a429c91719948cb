#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skycatch/common.hpp"
#include "skycatch/trajkit.hpp"

namespace skycatch {

// Point-mass aerodynamic model of one thrown object.
struct ObjectProfile {
  std::string object_id;
  double mass = 0.1;                       // kg
  double drag_coeff = 0.0;                 // kg/m, lumped 1/2 rho Cd A
  Vec3 magnus_omega = Vec3::Zero();        // rad/s
  double magnus_coeff = 0.0;               // kg
  Vec3 flutter_amplitude = Vec3::Zero();   // m/s^2 per axis
  double flutter_frequency = 0.0;          // Hz
  double flutter_phase = 0.0;              // rad
  double lift_coeff = 0.0;                 // fraction of weight, perpendicular to v in the vertical plane
};

struct LaunchSpec {
  Vec3 origin = Vec3(0.0, 0.0, 1.5);
  double speed = 6.0;
  double elevation = 0.9;
  double azimuth = 0.0;

  Vec3 velocity() const;
};

struct SimOptions {
  double dt = kCaptureDt;
  double gravity = 9.81;
  double tail_after_crossing = 0.2;  // s recorded past the plane crossing
  double max_flight_time = 5.0;
};

struct SimulatedThrow {
  Trajectory trajectory;
  std::vector<Vec3> true_velocity;  // integrator velocity at each sample
  Vec3 exact_impact = Vec3::Zero();  // crossing located inside the RK4 step, not interpolated
  double exact_impact_time = 0.0;
};

Vec3 aerodynamic_acceleration(const ObjectProfile& profile, double t, const Vec3& velocity,
                              double gravity = 9.81);

SimulatedThrow simulate_detailed(const ObjectProfile& profile, const LaunchSpec& launch,
                                 const PlaneSpec& plane, const SimOptions& options = {},
                                 const std::string& trial_id = "0");

Trajectory simulate(const ObjectProfile& profile, const LaunchSpec& launch, const PlaneSpec& plane,
                    const SimOptions& options = {}, const std::string& trial_id = "0");

// 20 profiles; first 15 are the default seen objects, last 5 the unseen ones.
std::vector<ObjectProfile> catalog(std::uint64_t seed);
std::vector<std::string> default_seen_ids();
std::vector<std::string> default_unseen_ids();

struct LaunchEnvelope {
  double min_range = 2.9;
  double max_range = 4.2;
  double min_apex = 2.5;
  double max_apex = 2.8;
  int max_rejections = 1000;
};

LaunchSpec sample_launch(std::uint64_t seed, const ObjectProfile& profile,
                         const PlaneSpec& plane = {}, const LaunchEnvelope& envelope = {},
                         const SimOptions& options = {});

// Horizontal distance from launch origin to the plane crossing, and peak height.
struct ThrowExtent {
  double range = 0.0;
  double apex = 0.0;
};
ThrowExtent measure_extent(const Trajectory& traj, const PlaneSpec& plane);

// trials throws per profile; trial i of object k uses a seed derived from (seed, k, i).
std::vector<Trajectory> generate_dataset(const std::vector<ObjectProfile>& profiles, int trials,
                                         std::uint64_t seed, const PlaneSpec& plane = {});

inline constexpr const char* kCatalogSchema = "skycatch.catalog/v1";
void write_catalog(const std::string& path, const std::vector<ObjectProfile>& profiles,
                   std::uint64_t seed);
std::vector<ObjectProfile> read_catalog(const std::string& path);

}  // namespace skycatch
