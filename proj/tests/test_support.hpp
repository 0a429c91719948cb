#pragma once

#include <string>
#include <vector>

#include "skycatch/common.hpp"
#include "skycatch/trajkit.hpp"

namespace skycatch::testing {

// Gravity-only samples p0 + v0 t + g t^2 / 2 at t = t0 + i dt.
inline std::vector<Sample> ballistic_samples(const Vec3& p0, const Vec3& v0, double t0, int n,
                                             double dt = kCaptureDt) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    const double t = t0 + i * dt;
    out.push_back({t, p0 + v0 * t + 0.5 * kGravity * t * t});
  }
  return out;
}

// Random lob that starts above the plane, rises and falls through it.
struct RandomLob {
  Vec3 p0;
  Vec3 v0;
};

inline RandomLob random_lob(Rng& rng) {
  return {Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1.2, 1.8)),
          Vec3(rng.uniform(1, 4), rng.uniform(-1.5, 1.5), rng.uniform(2, 6))};
}

// Ballistic trajectory that runs a few samples past the plane crossing.
inline Trajectory ballistic_trajectory(const RandomLob& lob, double plane = kDefaultPlaneHeight,
                                       std::string object_id = "parabola", std::string trial_id = "0") {
  std::vector<Sample> s;
  for (int i = 0;; ++i) {
    const double t = i * kCaptureDt;
    const Vec3 p = lob.p0 + lob.v0 * t + 0.5 * kGravity * t * t;
    s.push_back({t, p});
    if (p.z() < plane - 0.2) break;
  }
  return make_trajectory(std::move(object_id), std::move(trial_id), kCaptureDt, std::move(s));
}

}  // namespace skycatch::testing
