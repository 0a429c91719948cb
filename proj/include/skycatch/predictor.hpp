#pragma once

#include <functional>
#include <span>
#include <string>

#include "skycatch/common.hpp"
#include "skycatch/trajkit.hpp"

namespace skycatch {

// Observed history handed to an impact predictor: the last T+1 samples and
// their derived states. `source` is the full trajectory, for oracle-style
// predictors in tests and simulations only; real predictors ignore it.
struct History {
  std::span<const Sample> samples;
  std::span<const StateVec> states;
  const Trajectory* source = nullptr;
};

struct ImpactEstimate {
  bool ok = false;
  Vec3 point = Vec3::Zero();
  std::string diagnostic;

  static ImpactEstimate success(const Vec3& p) { return {true, p, {}}; }
  static ImpactEstimate failure(std::string why) { return {false, Vec3::Zero(), std::move(why)}; }
};

class ImpactPredictor {
 public:
  virtual ~ImpactPredictor() = default;
  virtual std::string name() const = 0;
  // Number of history samples consumed (T+1).
  virtual int history_length() const = 0;
  virtual ImpactEstimate predict(const History& history, const PlaneSpec& plane) const = 0;
};

// Adapts a callable; used for oracle and synthetic-bias predictors.
class FunctionPredictor final : public ImpactPredictor {
 public:
  using Fn = std::function<ImpactEstimate(const History&, const PlaneSpec&)>;
  FunctionPredictor(std::string name, int history_length, Fn fn)
      : name_(std::move(name)), history_length_(history_length), fn_(std::move(fn)) {}

  std::string name() const override { return name_; }
  int history_length() const override { return history_length_; }
  ImpactEstimate predict(const History& h, const PlaneSpec& plane) const override { return fn_(h, plane); }

 private:
  std::string name_;
  int history_length_;
  Fn fn_;
};

// Ground truth read from History::source.
FunctionPredictor oracle_predictor(int history_length);

// Wraps another predictor and adds a fixed offset to each successful estimate.
FunctionPredictor biased_predictor(const ImpactPredictor& inner, const Vec3& offset);

}  // namespace skycatch
