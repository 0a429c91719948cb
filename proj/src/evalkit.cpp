#include "skycatch/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <thread>

#include "skycatch/csv.hpp"

namespace skycatch {

double impact_error(const Vec3& pred, const Vec3& gt) { return (pred - gt).norm(); }

EvalSet eval_windows(const std::vector<Trajectory>& trajs, std::span<const std::size_t> indices, int history_steps,
                     const PlaneSpec& plane, int stride) {
  if (stride < 1) throw InputError("window stride must be at least 1");
  EvalSet set;
  for (std::size_t idx : indices) {
    const Trajectory& traj = trajs.at(idx);
    std::vector<TrainingWindow> ws;
    try {
      ws = make_windows(traj, history_steps, plane);
    } catch (const NoCrossingError&) {
      continue;
    }
    for (std::size_t i = 0; i < ws.size(); i += static_cast<std::size_t>(stride)) {
      set.windows.push_back(std::move(ws[i]));
      set.sources.push_back(&traj);
    }
  }
  return set;
}

const IeBucket* IeCurve::bucket(int steps_to_impact) const {
  for (const auto& b : buckets)
    if (b.steps_to_impact == steps_to_impact) return &b;
  return nullptr;
}

std::vector<double> IeCurve::errors_from(int min_steps) const {
  std::vector<double> out;
  for (const auto& b : buckets)
    if (b.steps_to_impact >= min_steps) out.insert(out.end(), b.errors.begin(), b.errors.end());
  return out;
}

double IeCurve::mean_from(int min_steps) const {
  const std::vector<double> e = errors_from(min_steps);
  if (e.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
}

namespace {

void summarize(IeBucket& b) {
  const double n = static_cast<double>(b.errors.size());
  double sum = 0.0;
  for (double e : b.errors) sum += e;
  b.mean = sum / n;
  double ss = 0.0;
  for (double e : b.errors) ss += (e - b.mean) * (e - b.mean);
  b.stddev = b.errors.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

}  // namespace

IeCurve ie_curve(const ImpactPredictor& predictor, const EvalSet& set, const PlaneSpec& plane,
                 const std::string& partition, const IePolicy& policy) {
  const std::size_t n = set.windows.size();
  std::vector<ImpactEstimate> estimates(n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const TrainingWindow& w = set.windows[i];
      const History h{w.history_samples, w.history, i < set.sources.size() ? set.sources[i] : nullptr};
      try {
        estimates[i] = predictor.predict(h, plane);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = static_cast<std::size_t>(std::max(1, policy.threads));
  if (threads == 1 || n < 2) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, n * t / threads, n * (t + 1) / threads);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  IeCurve curve;
  curve.method = predictor.name();
  curve.partition = partition;
  std::map<int, IeBucket> buckets;
  for (std::size_t i = 0; i < n; ++i) {
    const TrainingWindow& w = set.windows[i];
    ++curve.evaluated;
    double err;
    if (estimates[i].ok && estimates[i].point.allFinite()) {
      err = impact_error(estimates[i].point, w.impact_point);
    } else {
      ++curve.failures;
      if (policy.exclude_failures) continue;
      err = policy.penalty;
    }
    IeBucket& b = buckets[w.steps_to_impact];
    b.steps_to_impact = w.steps_to_impact;
    b.errors.push_back(err);
  }
  for (auto& [k, b] : buckets) {
    summarize(b);
    curve.buckets.push_back(std::move(b));
  }
  return curve;
}

namespace {

// Midranks of the pooled sample; the first `na` entries belong to a.
std::vector<double> midranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return pooled[x] < pooled[y]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("significance test needs two non-empty samples");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  for (double x : pooled)
    if (!std::isfinite(x)) throw InputError("significance test needs finite samples");
  const std::vector<double> rank = midranks(pooled);

  MannWhitney out;
  double ra = 0.0;
  for (std::size_t i = 0; i < na; ++i) ra += rank[i];
  const double dna = static_cast<double>(na), dnb = static_cast<double>(nb);
  out.u = ra - dna * (dna + 1.0) / 2.0;
  const double mu = dna * dnb / 2.0;

  if (std::all_of(pooled.begin(), pooled.end(), [&](double x) { return x == pooled.front(); })) {
    out.degenerate = true;
    out.p_value = 1.0;
    return out;
  }

  if (na <= 8 && nb <= 8) {
    // Every assignment of the pooled midranks to the first group.
    out.exact = true;
    const double observed = std::abs(out.u - mu);
    long total = 0, extreme = 0;
    std::vector<int> pick(n, 0);
    std::fill(pick.end() - static_cast<std::ptrdiff_t>(na), pick.end(), 1);
    do {
      double r = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (pick[i]) r += rank[i];
      const double u = r - dna * (dna + 1.0) / 2.0;
      ++total;
      if (std::abs(u - mu) >= observed - 1e-9) ++extreme;
    } while (std::next_permutation(pick.begin(), pick.end()));
    out.p_value = static_cast<double>(extreme) / static_cast<double>(total);
    return out;
  }

  std::map<double, int> ties;
  for (double x : pooled) ++ties[x];
  double tie_sum = 0.0;
  for (const auto& [v, t] : ties) tie_sum += static_cast<double>(t) * t * t - t;
  const double dn = static_cast<double>(n);
  const double var = dna * dnb / 12.0 * ((dn + 1.0) - tie_sum / (dn * (dn - 1.0)));
  if (!(var > 0.0)) {
    out.degenerate = true;
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(0.0, std::abs(out.u - mu) - 0.5) / std::sqrt(var);
  out.p_value = std::clamp(std::erfc(z / std::sqrt(2.0)), std::numeric_limits<double>::min(), 1.0);
  return out;
}

double significance(std::span<const double> a, std::span<const double> b) { return mann_whitney(a, b).p_value; }

std::vector<SignificanceRow> significance_table(const std::vector<IeCurve>& curves) {
  std::vector<SignificanceRow> rows;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    for (std::size_t j = i + 1; j < curves.size(); ++j) {
      const IeCurve& a = curves[i];
      const IeCurve& b = curves[j];
      if (a.partition != b.partition) continue;
      for (const auto& ba : a.buckets) {
        const IeBucket* bb = b.bucket(ba.steps_to_impact);
        if (bb == nullptr || ba.errors.empty() || bb->errors.empty()) continue;
        rows.push_back({a.method, b.method, a.partition, ba.steps_to_impact, significance(ba.errors, bb->errors)});
      }
    }
  }
  return rows;
}

void write_ie_csv(std::ostream& out, const std::vector<IeCurve>& curves) {
  out << "method,partition,steps_to_impact,n,ie_mean_m,ie_std_m\n";
  for (const auto& c : curves)
    for (const auto& b : c.buckets)
      out << c.method << ',' << c.partition << ',' << b.steps_to_impact << ',' << b.errors.size() << ','
          << csv::num(b.mean) << ',' << csv::num(b.stddev) << '\n';
}

void write_significance_csv(std::ostream& out, const std::vector<SignificanceRow>& rows) {
  out << "method_a,method_b,partition,steps_to_impact,p_value\n";
  for (const auto& r : rows)
    out << r.method_a << ',' << r.method_b << ',' << r.partition << ',' << r.steps_to_impact << ','
        << csv::num(r.p_value) << '\n';
}

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "PASS";
    case CheckStatus::fail: return "FAIL";
    case CheckStatus::not_run: return "NOT RUN";
  }
  return "?";
}

const std::vector<std::string>& acceptance_titles() {
  static const std::vector<std::string> titles = {
      "gradient fidelity",
      "PDS correctness",
      "Newton baseline oracle",
      "dataset scale protocol",
      "IE trend at long horizons",
      "catching kinematics",
      "catching SR trend",
      "determinism and persistence",
      "embedding separation",
  };
  return titles;
}

std::vector<std::string> emit_report(const std::string& out_dir, const ReportInputs& in) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw InputError("cannot create report directory " + out_dir);

  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    const std::string path = (fs::path(out_dir) / name).string();
    std::ofstream f(path);
    if (!f) throw InputError("cannot write " + path);
    written.push_back(path);
    return f;
  };

  if (!in.curves.empty()) {
    auto f = open("ie_curve.csv");
    write_ie_csv(f, in.curves);
  }
  if (!in.significance.empty()) {
    auto f = open("significance.csv");
    write_significance_csv(f, in.significance);
  }
  if (in.sr) {
    auto f = open("sr_table.csv");
    write_sr_csv(f, *in.sr);
  }
  if (in.pds) {
    auto f = open("pds.csv");
    write_pds_csv(f, *in.pds);
  }

  auto summary = open("summary.txt");
  summary << "acceptance checks\n";
  const auto& titles = acceptance_titles();
  for (std::size_t i = 0; i < titles.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    auto it = std::find_if(in.checks.begin(), in.checks.end(), [&](const CheckOutcome& c) { return c.id == id; });
    summary << "  [" << id << "] " << titles[i] << ": "
            << (it == in.checks.end() ? std::string("NOT RUN") : to_string(it->status));
    if (it != in.checks.end() && !it->detail.empty()) summary << " (" << it->detail << ")";
    summary << '\n';
  }
  if (!in.curves.empty()) {
    summary << "ie curves\n";
    for (const auto& c : in.curves)
      summary << "  " << c.method << " " << c.partition << ": " << c.evaluated << " windows, " << c.failures
              << " failed predictions\n";
  }
  return written;
}

}  // namespace skycatch
