#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "skycatch/checks.hpp"

using namespace skycatch;

namespace {

CheckOutcome guarded(int id, const std::function<CheckOutcome()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    CheckOutcome c;
    c.id = id;
    c.title = acceptance_titles()[static_cast<std::size_t>(id - 1)];
    c.status = CheckStatus::fail;
    c.detail = std::string("threw: ") + e.what();
    return c;
  }
}

}  // namespace

int main() {
  const checks::Log log = [](const std::string& s) { std::cerr << s << std::endl; };
  std::vector<CheckOutcome> results;
  results.push_back(guarded(1, [&] { return checks::gradient_fidelity(log); }));
  results.push_back(guarded(2, [&] { return checks::pds_correctness(log); }));
  results.push_back(guarded(3, [&] { return checks::newton_oracle(log); }));
  results.push_back(guarded(4, [&] { return checks::dataset_scale(log); }));

  checks::DeskRun desk;
  std::string desk_error;
  try {
    desk = checks::run_desk(checks::DeskConfig{}, log);
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  auto trend = [&](int id, CheckOutcome (*fn)(const checks::DeskRun&, const checks::Log&)) {
    if (!desk_error.empty()) return guarded(id, [&]() -> CheckOutcome { throw std::runtime_error(desk_error); });
    return guarded(id, [&] { return fn(desk, log); });
  };
  results.push_back(trend(5, checks::ie_trend));
  results.push_back(guarded(6, [&] { return checks::catching_kinematics(log); }));
  results.push_back(trend(7, checks::sr_trend));
  results.push_back(guarded(8, [&] { return checks::determinism(log); }));
  results.push_back(trend(9, checks::embedding_separation));

  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.status == CheckStatus::pass ? "PASS" : "FAIL") << " criterion " << r.id << " " << r.title << ": "
              << r.detail << std::endl;
    ok = ok && r.status == CheckStatus::pass;
  }
  return ok ? EXIT_SUCCESS : EXIT_FAILURE;
}
