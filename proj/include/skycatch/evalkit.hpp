#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skycatch/analysis.hpp"
#include "skycatch/catchsim.hpp"
#include "skycatch/predictor.hpp"
#include "skycatch/trajkit.hpp"

namespace skycatch {

double impact_error(const Vec3& pred, const Vec3& gt);

// Windows to evaluate with the trajectory each came from.
struct EvalSet {
  std::vector<TrainingWindow> windows;
  std::vector<const Trajectory*> sources;
};

EvalSet eval_windows(const std::vector<Trajectory>& trajs, std::span<const std::size_t> indices, int history_steps,
                     const PlaneSpec& plane, int stride = 1);

struct IePolicy {
  bool exclude_failures = true;  // otherwise charge `penalty` metres
  double penalty = 1.0;
  int threads = 1;
};

struct IeBucket {
  int steps_to_impact = 0;
  std::vector<double> errors;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one entry
};

struct IeCurve {
  std::string method;
  std::string partition;
  std::vector<IeBucket> buckets;  // ascending steps_to_impact
  int evaluated = 0;
  int failures = 0;

  const IeBucket* bucket(int steps_to_impact) const;
  std::vector<double> errors_from(int min_steps) const;
  double mean_from(int min_steps) const;
};

IeCurve ie_curve(const ImpactPredictor& predictor, const EvalSet& set, const PlaneSpec& plane,
                 const std::string& partition, const IePolicy& policy = {});

struct MannWhitney {
  double p_value = 1.0;
  double u = 0.0;  // U statistic of the first sample
  bool exact = false;
  bool degenerate = false;  // every value tied
};

// Two-sided Mann-Whitney U; exact enumeration when both sizes are <= 8,
// otherwise normal approximation with tie and continuity correction.
MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b);
double significance(std::span<const double> a, std::span<const double> b);

struct SignificanceRow {
  std::string method_a;
  std::string method_b;
  std::string partition;
  int steps_to_impact = 0;
  double p_value = 1.0;
};

// Every method pair within a partition, per bucket present in both curves.
std::vector<SignificanceRow> significance_table(const std::vector<IeCurve>& curves);

void write_ie_csv(std::ostream& out, const std::vector<IeCurve>& curves);
void write_significance_csv(std::ostream& out, const std::vector<SignificanceRow>& rows);

enum class CheckStatus { pass, fail, not_run };
std::string to_string(CheckStatus s);

struct CheckOutcome {
  int id = 0;
  std::string title;
  CheckStatus status = CheckStatus::not_run;
  std::string detail;
  double seconds = 0.0;
};

// Titles of the acceptance checks, indexed by id - 1.
const std::vector<std::string>& acceptance_titles();

struct ReportInputs {
  std::vector<IeCurve> curves;
  std::vector<SignificanceRow> significance;
  std::optional<SrTable> sr;
  std::optional<PdsReport> pds;
  std::vector<CheckOutcome> checks;
};

// Writes ie_curve.csv, significance.csv, sr_table.csv and pds.csv for the
// inputs present, plus summary.txt.
std::vector<std::string> emit_report(const std::string& out_dir, const ReportInputs& in);

}  // namespace skycatch
