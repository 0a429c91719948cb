#include "skycatch/analysis.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "skycatch/csv.hpp"

namespace skycatch {

Vec3 fit_parabola_v0(std::span<const Sample> samples, const Vec3& gravity) {
  if (samples.size() < 2) throw InputError("parabola fit needs at least 2 samples");
  const Vec3 p0 = samples.front().position;
  const double t0 = samples.front().t;
  // Normal equation of the per-axis problem min_v sum (d_i - v t_i)^2.
  double stt = 0.0;
  Vec3 std_ = Vec3::Zero();
  for (const auto& s : samples) {
    const double t = s.t - t0;
    const Vec3 d = s.position - p0 - 0.5 * gravity * t * t;
    stt += t * t;
    std_ += t * d;
  }
  if (!(stt > 0.0)) throw InputError("parabola fit needs at least one sample after the first");
  return std_ / stt;
}

double pds(std::span<const Sample> samples, const Vec3& gravity) {
  const Vec3 v0 = fit_parabola_v0(samples, gravity);
  const Vec3 p0 = samples.front().position;
  const double t0 = samples.front().t;
  double total = 0.0;
  for (const auto& s : samples) {
    const double t = s.t - t0;
    total += (s.position - (p0 + v0 * t + 0.5 * gravity * t * t)).norm();
  }
  return total / static_cast<double>(samples.size());
}

double pds(const Trajectory& traj, const Vec3& gravity) { return pds(std::span<const Sample>(traj.samples), gravity); }

PdsReport dataset_report(const std::vector<Trajectory>& trajs, const Vec3& gravity) {
  std::map<std::string, std::vector<double>> groups;
  for (const auto& traj : trajs) groups[traj.object_id].push_back(pds(traj, gravity));

  PdsReport report;
  for (const auto& [id, values] : groups) {
    PdsRow row;
    row.object_id = id;
    row.n_trajectories = values.size();
    for (double v : values) row.mean += v;
    row.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - row.mean) * (v - row.mean);
      row.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_pds_csv(std::ostream& out, const PdsReport& report) {
  out << "object_id,n_trajectories,pds_mean_m,pds_std_m\n";
  for (const auto& r : report.rows)
    out << r.object_id << ',' << r.n_trajectories << ',' << csv::num(r.mean) << ',' << csv::num(r.stddev) << '\n';
}

void write_pds_csv(const std::string& path, const PdsReport& report) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  write_pds_csv(out, report);
}

}  // namespace skycatch
