#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "skycatch/common.hpp"
#include "skycatch/trajkit.hpp"

namespace skycatch {

// Initial velocity of the gravity-anchored parabola p0 + v0 t + g t^2 / 2 that
// best fits the samples in least squares. Times are taken relative to the
// first sample and p0 is the first position.
Vec3 fit_parabola_v0(std::span<const Sample> samples, const Vec3& gravity = kGravity);

// Parabola Deviation Score: mean Euclidean residual against the fitted parabola.
double pds(std::span<const Sample> samples, const Vec3& gravity = kGravity);
double pds(const Trajectory& traj, const Vec3& gravity = kGravity);

struct PdsRow {
  std::string object_id;
  std::size_t n_trajectories = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single trajectory
};

struct PdsReport {
  std::vector<PdsRow> rows;  // sorted by object_id
};

PdsReport dataset_report(const std::vector<Trajectory>& trajs, const Vec3& gravity = kGravity);

void write_pds_csv(std::ostream& out, const PdsReport& report);
void write_pds_csv(const std::string& path, const PdsReport& report);

}  // namespace skycatch
