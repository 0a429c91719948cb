#include "skycatch/trajkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

namespace skycatch {

namespace {

using json = nlohmann::json;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vec3 rotate_yaw(const Vec3& v, double c, double s) { return {c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z()}; }

}  // namespace

std::array<double, StateVec::kDim> StateVec::flat() const {
  return {position.x(),     position.y(),     position.z(),     velocity.x(),    velocity.y(),
          velocity.z(),     acceleration.x(), acceleration.y(), acceleration.z()};
}

StateVec StateVec::from_flat(std::span<const double> v) {
  if (v.size() != kDim) throw InputError("state vector must have 9 entries");
  return {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, {v[6], v[7], v[8]}};
}

std::vector<StateVec> derive_states(std::span<const Sample> samples, double dt,
                                    const DeriveOptions& options) {
  const std::size_t n = samples.size();
  if (n < 3) throw InputError("state derivation needs at least 3 samples, got " + std::to_string(n));
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  for (std::size_t i = 1; i < n; ++i) {
    const double step = samples[i].t - samples[i - 1].t;
    if (std::abs(step - dt) > options.spacing_tolerance * dt) {
      std::ostringstream msg;
      msg << "non-uniform sample spacing at index " << i << ": " << step << " s vs dt " << dt << " s";
      throw InputError(msg.str());
    }
  }

  std::vector<Vec3> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = samples[i].position;
  if (options.smooth) {
    std::vector<Vec3> raw = p;
    for (std::size_t i = 1; i + 1 < n; ++i) p[i] = (raw[i - 1] + raw[i] + raw[i + 1]) / 3.0;
  }

  auto differentiate = [n, dt](const std::vector<Vec3>& f) {
    std::vector<Vec3> d(n);
    d[0] = (f[1] - f[0]) / dt;
    d[n - 1] = (f[n - 1] - f[n - 2]) / dt;
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * dt);
    return d;
  };
  const std::vector<Vec3> v = differentiate(p);
  const std::vector<Vec3> a = differentiate(v);

  std::vector<StateVec> states(n);
  for (std::size_t i = 0; i < n; ++i) states[i] = {samples[i].position, v[i], a[i]};
  return states;
}

Trajectory make_trajectory(std::string object_id, std::string trial_id, double dt,
                           std::vector<Sample> samples, const DeriveOptions& options) {
  Trajectory traj{std::move(object_id), std::move(trial_id), dt, std::move(samples), {}};
  traj.states = derive_states(traj.samples, dt, options);
  return traj;
}

Crossing find_descending_crossing(std::span<const Vec3> positions, double height) {
  for (std::size_t i = 0; i + 1 < positions.size(); ++i) {
    const double za = positions[i].z();
    const double zb = positions[i + 1].z();
    if (za >= height && zb < height) {
      const double fraction = (za - height) / (za - zb);
      Crossing c;
      c.index_above = i;
      c.fraction = fraction;
      c.point = positions[i] + fraction * (positions[i + 1] - positions[i]);
      c.point.z() = height;
      return c;
    }
  }
  throw NoCrossingError("no descending crossing of plane z=" + std::to_string(height));
}

Crossing ground_truth_impact(const Trajectory& traj, const PlaneSpec& plane) {
  std::vector<Vec3> positions(traj.samples.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = traj.samples[i].position;
  try {
    return find_descending_crossing(positions, plane.height);
  } catch (const NoCrossingError& e) {
    throw NoCrossingError(traj.object_id + "/" + traj.trial_id + ": " + e.what());
  }
}

std::vector<TrainingWindow> make_windows(const Trajectory& traj, int history_steps,
                                         const PlaneSpec& plane) {
  if (history_steps < 0) throw InputError("history length must be non-negative");
  const Crossing crossing = ground_truth_impact(traj, plane);
  const auto T = static_cast<std::size_t>(history_steps);

  std::vector<TrainingWindow> windows;
  for (std::size_t t = T; t < crossing.index_above; ++t) {
    TrainingWindow w;
    w.object_id = traj.object_id;
    w.trial_id = traj.trial_id;
    w.history_samples.assign(traj.samples.begin() + static_cast<std::ptrdiff_t>(t - T),
                             traj.samples.begin() + static_cast<std::ptrdiff_t>(t + 1));
    w.history.assign(traj.states.begin() + static_cast<std::ptrdiff_t>(t - T),
                     traj.states.begin() + static_cast<std::ptrdiff_t>(t + 1));
    w.future.assign(traj.states.begin() + static_cast<std::ptrdiff_t>(t + 1),
                    traj.states.begin() + static_cast<std::ptrdiff_t>(crossing.index_above + 1));
    w.impact_point = crossing.point;
    w.steps_to_impact = crossing.steps_from(t);
    w.t_index = static_cast<int>(t);
    w.crossing_fraction = crossing.fraction;
    windows.push_back(std::move(w));
  }
  return windows;
}

Trajectory augment(const Trajectory& traj, double yaw, const Vec2& translation) {
  Trajectory out = traj;
  if (traj.samples.empty()) return out;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const Vec3 pivot = traj.samples.front().position;
  const Vec3 shift{translation.x(), translation.y(), 0.0};
  for (auto& sample : out.samples) sample.position = pivot + rotate_yaw(sample.position - pivot, c, s) + shift;
  out.states = out.samples.size() >= 3 ? derive_states(out.samples, out.dt) : std::vector<StateVec>{};
  return out;
}

std::vector<Trajectory> expand_dataset(const std::vector<Trajectory>& trajs, int factor,
                                       std::uint64_t seed) {
  if (factor < 1) throw InputError("expansion factor must be >= 1");
  std::vector<Trajectory> out;
  out.reserve(trajs.size() * static_cast<std::size_t>(factor));
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    out.push_back(trajs[i]);
    Rng rng(derive_seed(seed, i));
    for (int k = 1; k < factor; ++k) {
      const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double tx = rng.uniform(-1.0, 1.0);
      const double ty = rng.uniform(-1.0, 1.0);
      Trajectory copy = augment(trajs[i], yaw, {tx, ty});
      copy.trial_id += "/a" + std::to_string(k);
      out.push_back(std::move(copy));
    }
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<Trajectory>& trajs,
                           const std::vector<std::string>& seen_ids,
                           const std::vector<std::string>& unseen_ids, std::uint64_t seed) {
  const std::set<std::string> seen(seen_ids.begin(), seen_ids.end());
  const std::set<std::string> unseen(unseen_ids.begin(), unseen_ids.end());
  for (const auto& id : unseen)
    if (seen.count(id)) throw InputError("object '" + id + "' is listed as both seen and unseen");

  DatasetSplit split{seen_ids, unseen_ids, {}, {}, {}, {}};
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto& id = trajs[i].object_id;
    if (unseen.count(id)) {
      split.unseen.push_back(i);
    } else if (!seen.count(id)) {
      throw InputError("object '" + id + "' is in neither the seen nor the unseen list");
    }
  }

  for (const auto& id : seen_ids) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < trajs.size(); ++i)
      if (trajs[i].object_id == id) members.push_back(i);
    Rng rng(derive_seed(seed, fnv1a(id)));
    rng.shuffle(std::span<std::size_t>(members));
    const std::size_t n = members.size();
    const auto n_train = static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(n) + 1e-9));
    const auto n_val = static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(n) + 1e-9));
    for (std::size_t k = 0; k < n; ++k) {
      auto& part = k < n_train ? split.train : (k < n_train + n_val ? split.val : split.test);
      part.push_back(members[k]);
    }
  }
  for (auto* part : {&split.train, &split.val, &split.test}) std::sort(part->begin(), part->end());
  return split;
}

void write_dataset(std::ostream& out, const std::vector<Trajectory>& trajs) {
  for (const auto& traj : trajs) {
    json samples = json::array();
    for (const auto& s : traj.samples)
      samples.push_back({s.t, s.position.x(), s.position.y(), s.position.z()});
    json record = {{"object_id", traj.object_id}, {"trial_id", traj.trial_id}, {"dt", traj.dt},
                   {"samples", std::move(samples)}};
    out << record.dump() << '\n';
  }
}

void write_dataset(const std::string& path, const std::vector<Trajectory>& trajs) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  write_dataset(out, trajs);
  if (!out) throw Error("write to '" + path + "' failed");
}

std::vector<Trajectory> read_dataset(std::istream& in, const DeriveOptions& options) {
  std::vector<Trajectory> trajs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Trajectory traj;
    try {
      const json record = json::parse(line);
      traj.object_id = record.at("object_id").get<std::string>();
      traj.trial_id = record.at("trial_id").get<std::string>();
      traj.dt = record.at("dt").get<double>();
      for (const auto& row : record.at("samples")) {
        if (!row.is_array() || row.size() != 4) throw ParseError(line_no, "sample must be [t, x, y, z]");
        traj.samples.push_back({row[0].get<double>(), {row[1].get<double>(), row[2].get<double>(), row[3].get<double>()}});
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, std::string("malformed trajectory record: ") + e.what());
    }
    const std::string name = traj.object_id + "/" + traj.trial_id;
    if (!(traj.dt > 0.0)) throw ParseError(line_no, "trial " + name + ": dt must be positive");
    for (std::size_t i = 0; i < traj.samples.size(); ++i) {
      const double t = traj.samples[i].t;
      if (!std::isfinite(t) || t < 0.0) throw ParseError(line_no, "trial " + name + ": negative or non-finite timestamp");
      if (i > 0 && !(t > traj.samples[i - 1].t))
        throw ParseError(line_no, "trial " + name + ": timestamps not strictly increasing at sample " + std::to_string(i));
    }
    try {
      traj.states = derive_states(traj.samples, traj.dt, options);
    } catch (const InputError& e) {
      throw ParseError(line_no, "trial " + name + ": " + e.what());
    }
    trajs.push_back(std::move(traj));
  }
  return trajs;
}

std::vector<Trajectory> read_dataset(const std::string& path, const DeriveOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_dataset(in, options);
}

std::vector<std::string> object_ids(const std::vector<Trajectory>& trajs) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& t : trajs)
    if (seen.insert(t.object_id).second) ids.push_back(t.object_id);
  return ids;
}

}  // namespace skycatch
