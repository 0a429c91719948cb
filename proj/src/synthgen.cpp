#include "skycatch/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/Geometry>
#include <json.hpp>

namespace skycatch {

namespace {

using json = nlohmann::json;

struct State {
  Vec3 p;
  Vec3 v;
};

State rk4_step(const ObjectProfile& profile, double t, const State& s, double h, double g) {
  auto accel = [&](double tt, const Vec3& v) { return aerodynamic_acceleration(profile, tt, v, g); };
  const Vec3 k1v = accel(t, s.v);
  const Vec3 k1p = s.v;
  const Vec3 k2v = accel(t + 0.5 * h, s.v + 0.5 * h * k1v);
  const Vec3 k2p = s.v + 0.5 * h * k1v;
  const Vec3 k3v = accel(t + 0.5 * h, s.v + 0.5 * h * k2v);
  const Vec3 k3p = s.v + 0.5 * h * k2v;
  const Vec3 k4v = accel(t + h, s.v + h * k3v);
  const Vec3 k4p = s.v + h * k3v;
  return {s.p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
          s.v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

// Seed-dependent multiplicative jitter in [1-spread, 1+spread].
double jitter(Rng& rng, double value, double spread = 0.05) { return value * rng.uniform(1.0 - spread, 1.0 + spread); }

ObjectProfile blend(const ObjectProfile& a, const ObjectProfile& b, double w, std::string id) {
  ObjectProfile p;
  p.object_id = std::move(id);
  p.mass = (1 - w) * a.mass + w * b.mass;
  p.drag_coeff = (1 - w) * a.drag_coeff + w * b.drag_coeff;
  p.magnus_omega = (1 - w) * a.magnus_omega + w * b.magnus_omega;
  p.magnus_coeff = (1 - w) * a.magnus_coeff + w * b.magnus_coeff;
  p.flutter_amplitude = (1 - w) * a.flutter_amplitude + w * b.flutter_amplitude;
  p.flutter_frequency = (1 - w) * a.flutter_frequency + w * b.flutter_frequency;
  p.flutter_phase = (1 - w) * a.flutter_phase + w * b.flutter_phase;
  p.lift_coeff = (1 - w) * a.lift_coeff + w * b.lift_coeff;
  return p;
}

json to_json(const ObjectProfile& p) {
  return {{"object_id", p.object_id},
          {"mass", p.mass},
          {"drag_coeff", p.drag_coeff},
          {"magnus_omega", {p.magnus_omega.x(), p.magnus_omega.y(), p.magnus_omega.z()}},
          {"magnus_coeff", p.magnus_coeff},
          {"flutter_amplitude", {p.flutter_amplitude.x(), p.flutter_amplitude.y(), p.flutter_amplitude.z()}},
          {"flutter_frequency", p.flutter_frequency},
          {"flutter_phase", p.flutter_phase},
          {"lift_coeff", p.lift_coeff}};
}

Vec3 vec3_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

}  // namespace

Vec3 LaunchSpec::velocity() const {
  const double horizontal = speed * std::cos(elevation);
  return {horizontal * std::cos(azimuth), horizontal * std::sin(azimuth), speed * std::sin(elevation)};
}

Vec3 aerodynamic_acceleration(const ObjectProfile& profile, double t, const Vec3& velocity, double gravity) {
  Vec3 a(0.0, 0.0, -gravity);
  const double speed = velocity.norm();
  a -= (profile.drag_coeff / profile.mass) * speed * velocity;
  a += (profile.magnus_coeff / profile.mass) * profile.magnus_omega.cross(velocity);
  if (profile.lift_coeff != 0.0 && speed > 1e-9) {
    // Unit vector perpendicular to v in the vertical plane containing v, pointing up.
    const Vec3 vhat = velocity / speed;
    Vec3 up = Vec3::UnitZ() - vhat.z() * vhat;
    const double n = up.norm();
    if (n > 1e-12) a += profile.lift_coeff * gravity * (up / n);
  }
  if (profile.flutter_frequency != 0.0 || !profile.flutter_amplitude.isZero()) {
    const double phase = 2.0 * std::numbers::pi * profile.flutter_frequency * t + profile.flutter_phase;
    a += profile.flutter_amplitude * std::sin(phase);
  }
  return a;
}

SimulatedThrow simulate_detailed(const ObjectProfile& profile, const LaunchSpec& launch,
                                 const PlaneSpec& plane, const SimOptions& options,
                                 const std::string& trial_id) {
  if (!(profile.mass > 0.0)) throw InputError("profile '" + profile.object_id + "': mass must be positive");
  if (!(options.dt > 0.0)) throw InputError("integration step must be positive");

  const double dt = options.dt;
  const auto max_steps = static_cast<std::size_t>(std::ceil(options.max_flight_time / dt));
  const auto tail_steps = static_cast<std::size_t>(std::llround(options.tail_after_crossing / dt));

  SimulatedThrow out;
  std::vector<Sample> samples;
  State s{launch.origin, launch.velocity()};
  samples.push_back({0.0, s.p});
  out.true_velocity.push_back(s.v);

  bool crossed = false;
  std::size_t stop_at = max_steps;
  double apex_z = s.p.z();
  for (std::size_t i = 0; i < stop_at; ++i) {
    const double t = static_cast<double>(i) * dt;
    const State next = rk4_step(profile, t, s, dt, options.gravity);
    apex_z = std::max(apex_z, next.p.z());
    if (!crossed && s.p.z() >= plane.height && next.p.z() < plane.height) {
      // Locate the crossing inside this step by bisection on the sub-step length.
      double lo = 0.0;
      double hi = dt;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (rk4_step(profile, t, s, mid, options.gravity).p.z() >= plane.height) lo = mid;
        else hi = mid;
      }
      const double tau = 0.5 * (lo + hi);
      out.exact_impact = rk4_step(profile, t, s, tau, options.gravity).p;
      out.exact_impact.z() = plane.height;
      out.exact_impact_time = t + tau;
      crossed = true;
      stop_at = std::min(max_steps, i + 1 + tail_steps);
    }
    s = next;
    samples.push_back({static_cast<double>(i + 1) * dt, s.p});
    out.true_velocity.push_back(s.v);
  }
  if (!crossed) {
    throw NoCrossingError("profile '" + profile.object_id + "' did not cross plane z=" +
                          std::to_string(plane.height) + " within " +
                          std::to_string(options.max_flight_time) + " s");
  }
  if (apex_z <= plane.height) throw InputError("plane is not below the launch apex");
  out.trajectory = make_trajectory(profile.object_id, trial_id, dt, std::move(samples));
  return out;
}

Trajectory simulate(const ObjectProfile& profile, const LaunchSpec& launch, const PlaneSpec& plane,
                    const SimOptions& options, const std::string& trial_id) {
  return simulate_detailed(profile, launch, plane, options, trial_id).trajectory;
}

std::vector<std::string> default_seen_ids() {
  return {"ball-heavy",    "ball-tennis",  "ball-rubber",     "ball-sponge",  "ball-pingpong",
          "shuttlecock",   "cap",          "paper-ball",      "frisbee",      "plush",
          "boomerang",     "big-plane",    "leaf-card",       "pinwheel",     "glider"};
}

std::vector<std::string> default_unseen_ids() {
  return {"fan", "ball-foam", "small-plane", "cone", "ribbon-ball"};
}

std::vector<ObjectProfile> catalog(std::uint64_t seed) {
  // Base parameters, from near-ballistic balls to strongly non-parabolic fliers.
  struct Base {
    const char* id;
    double mass, drag;
    Vec3 omega;
    double magnus;
    Vec3 flutter;
    double freq, phase, lift;
  };
  const Base bases[] = {
      {"ball-heavy", 0.40, 0.0004, {0, 0, 0}, 0.0, {0, 0, 0}, 0.0, 0.0, 0.0},
      {"ball-tennis", 0.058, 0.00065, {0, 0, 0}, 0.0, {0, 0, 0}, 0.0, 0.0, 0.0},
      {"ball-rubber", 0.150, 0.0012, {0, 0, 0}, 0.0, {0, 0, 0}, 0.0, 0.0, 0.0},
      {"ball-sponge", 0.030, 0.0035, {0, 0, 0}, 0.0, {0, 0, 0}, 0.0, 0.0, 0.0},
      {"ball-pingpong", 0.0027, 0.00045, {0, -30, 0}, 0.00002, {0, 0, 0}, 0.0, 0.0, 0.0},
      {"shuttlecock", 0.005, 0.0012, {0, 0, 0}, 0.0, {0, 0, 0}, 0.0, 0.0, 0.0},
      {"cap", 0.060, 0.0040, {0, 0, 8}, 0.0020, {0.8, 0.8, 1.2}, 3.0, 0.5, 0.10},
      {"paper-ball", 0.012, 0.0018, {0, 0, 0}, 0.0, {0.6, 0.6, 0.6}, 4.0, 1.0, 0.0},
      {"frisbee", 0.110, 0.0030, {0, 0, 25}, 0.0006, {0, 0, 0}, 0.0, 0.0, 0.30},
      {"plush", 0.080, 0.0040, {0, 0, 0}, 0.0, {0.5, 0.5, 0.8}, 2.0, 0.0, 0.05},
      {"boomerang", 0.050, 0.0025, {0, 0, 20}, 0.0015, {0.0, 1.2, 1.0}, 2.5, 0.3, 0.25},
      {"big-plane", 0.030, 0.0020, {0, 0, 0}, 0.0, {0.3, 0.3, 1.5}, 1.5, 1.2, 0.40},
      {"leaf-card", 0.010, 0.0012, {0, 0, 0}, 0.0, {1.5, 1.5, 2.0}, 5.0, 0.0, 0.20},
      {"pinwheel", 0.020, 0.0020, {0, 0, 15}, 0.0008, {0.8, 1.5, 1.2}, 3.5, 2.0, 0.20},
      {"glider", 0.025, 0.0015, {0, 0, 0}, 0.0, {0.2, 0.2, 0.6}, 1.0, 0.0, 0.50},
  };

  Rng rng(derive_seed(seed, 0xCA7A));
  std::vector<ObjectProfile> out;
  for (const auto& b : bases) {
    ObjectProfile p;
    p.object_id = b.id;
    p.mass = jitter(rng, b.mass);
    p.drag_coeff = jitter(rng, b.drag);
    p.magnus_omega = b.omega * rng.uniform(0.95, 1.05);
    p.magnus_coeff = jitter(rng, b.magnus);
    p.flutter_amplitude = b.flutter * rng.uniform(0.95, 1.05);
    p.flutter_frequency = jitter(rng, b.freq);
    p.flutter_phase = b.phase + rng.uniform(-0.1, 0.1);
    p.lift_coeff = jitter(rng, b.lift);
    out.push_back(std::move(p));
  }

  // Unseen objects sit between pairs of seen ones.
  const std::pair<const char*, std::pair<int, int>> mixes[] = {
      {"fan", {13, 10}}, {"ball-foam", {1, 3}}, {"small-plane", {11, 14}}, {"cone", {5, 9}}, {"ribbon-ball", {7, 12}}};
  for (const auto& [id, pair] : mixes) {
    const double w = rng.uniform(0.3, 0.7);
    out.push_back(blend(out[static_cast<std::size_t>(pair.first)], out[static_cast<std::size_t>(pair.second)], w, id));
  }
  return out;
}

ThrowExtent measure_extent(const Trajectory& traj, const PlaneSpec& plane) {
  ThrowExtent e;
  for (const auto& s : traj.samples) e.apex = std::max(e.apex, s.position.z());
  const Crossing c = ground_truth_impact(traj, plane);
  const Vec3 d = c.point - traj.samples.front().position;
  e.range = std::hypot(d.x(), d.y());
  return e;
}

LaunchSpec sample_launch(std::uint64_t seed, const ObjectProfile& profile, const PlaneSpec& plane,
                         const LaunchEnvelope& envelope, const SimOptions& options) {
  Rng rng(derive_seed(seed, 0x1A0C));
  for (int attempt = 0; attempt < envelope.max_rejections; ++attempt) {
    LaunchSpec launch;
    launch.origin = Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 1.5 + rng.uniform(-0.05, 0.05));
    const double vz = rng.uniform(1.5, 10.0);
    const double vh = rng.uniform(1.0, 10.0);
    launch.speed = std::hypot(vz, vh);
    launch.elevation = std::atan2(vz, vh);
    launch.azimuth = rng.uniform(-0.2, 0.2);
    try {
      const Trajectory traj = simulate(profile, launch, plane, options);
      const ThrowExtent e = measure_extent(traj, plane);
      if (e.range >= envelope.min_range && e.range <= envelope.max_range && e.apex >= envelope.min_apex &&
          e.apex <= envelope.max_apex)
        return launch;
    } catch (const Error&) {
      // no crossing within the time budget; reject
    }
  }
  throw InputError("profile '" + profile.object_id + "': no launch satisfied the throw envelope within " +
                   std::to_string(envelope.max_rejections) + " attempts");
}

std::vector<Trajectory> generate_dataset(const std::vector<ObjectProfile>& profiles, int trials,
                                         std::uint64_t seed, const PlaneSpec& plane) {
  std::vector<Trajectory> out;
  out.reserve(profiles.size() * static_cast<std::size_t>(std::max(trials, 0)));
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    for (int i = 0; i < trials; ++i) {
      const std::uint64_t trial_seed = derive_seed(seed, k + 1, static_cast<std::uint64_t>(i));
      const LaunchSpec launch = sample_launch(trial_seed, profiles[k], plane);
      out.push_back(simulate(profiles[k], launch, plane, {}, "t" + std::to_string(i)));
    }
  }
  return out;
}

void write_catalog(const std::string& path, const std::vector<ObjectProfile>& profiles, std::uint64_t seed) {
  json doc = {{"schema", kCatalogSchema}, {"seed", seed}, {"objects", json::array()}};
  for (const auto& p : profiles) doc["objects"].push_back(to_json(p));
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << doc.dump(2) << '\n';
}

std::vector<ObjectProfile> read_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const std::exception& e) {
    throw InputError("catalog '" + path + "': " + e.what());
  }
  if (doc.value("schema", "") != kCatalogSchema) throw InputError("catalog '" + path + "': unsupported schema tag");
  std::vector<ObjectProfile> out;
  for (const auto& j : doc.at("objects")) {
    ObjectProfile p;
    p.object_id = j.at("object_id").get<std::string>();
    p.mass = j.at("mass").get<double>();
    p.drag_coeff = j.at("drag_coeff").get<double>();
    p.magnus_omega = vec3_from(j.at("magnus_omega"));
    p.magnus_coeff = j.at("magnus_coeff").get<double>();
    p.flutter_amplitude = vec3_from(j.at("flutter_amplitude"));
    p.flutter_frequency = j.at("flutter_frequency").get<double>();
    p.flutter_phase = j.at("flutter_phase").get<double>();
    p.lift_coeff = j.at("lift_coeff").get<double>();
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace skycatch
