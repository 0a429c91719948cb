#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <Eigen/Dense>
#include <algorithm>

#include "skycatch/analysis.hpp"
#include "skycatch/baselines.hpp"
#include "skycatch/evalkit.hpp"
#include "skycatch/predictors.hpp"
#include "skycatch/synthgen.hpp"
#include "skycatch/trajkit.hpp"

namespace py = pybind11;
using namespace skycatch;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<Sample> to_samples(const Eigen::Ref<const Eigen::VectorXd>& times, const Eigen::Ref<const RowMatrix>& xyz) {
  if (xyz.cols() != 3) throw InputError("positions must have shape (n, 3)");
  if (times.size() != xyz.rows()) throw InputError("times and positions differ in length");
  std::vector<Sample> out(static_cast<std::size_t>(xyz.rows()));
  for (Eigen::Index i = 0; i < xyz.rows(); ++i) out[static_cast<std::size_t>(i)] = {times[i], xyz.row(i).transpose()};
  return out;
}

std::vector<StateVec> to_states(const Eigen::Ref<const RowMatrix>& m) {
  if (m.cols() != StateVec::kDim) throw InputError("states must have shape (n, 9)");
  std::vector<StateVec> out;
  std::array<double, StateVec::kDim> row{};
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (int k = 0; k < StateVec::kDim; ++k) row[static_cast<std::size_t>(k)] = m(i, k);
    out.push_back(StateVec::from_flat(row));
  }
  return out;
}

RowMatrix states_matrix(std::span<const StateVec> states) {
  RowMatrix m(static_cast<Eigen::Index>(states.size()), StateVec::kDim);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto f = states[i].flat();
    for (int k = 0; k < StateVec::kDim; ++k) m(static_cast<Eigen::Index>(i), k) = f[static_cast<std::size_t>(k)];
  }
  return m;
}

RowMatrix positions_matrix(std::span<const Sample> samples) {
  RowMatrix m(static_cast<Eigen::Index>(samples.size()), 3);
  for (std::size_t i = 0; i < samples.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = samples[i].position.transpose();
  return m;
}

Eigen::VectorXd times_vector(std::span<const Sample> samples) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) t[static_cast<Eigen::Index>(i)] = samples[i].t;
  return t;
}

std::vector<ObjectProfile> select_profiles(std::uint64_t catalog_seed, const std::vector<std::string>& ids) {
  const auto all = catalog(catalog_seed);
  if (ids.empty()) return all;
  std::vector<ObjectProfile> out;
  for (const auto& id : ids) {
    auto it = std::find_if(all.begin(), all.end(), [&](const ObjectProfile& p) { return p.object_id == id; });
    if (it == all.end()) throw InputError("unknown object id " + id);
    out.push_back(*it);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Impact-point prediction core";

  // Later registrations are tried first, so the subclass goes last.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

  m.attr("CAPTURE_DT") = kCaptureDt;
  m.attr("DEFAULT_PLANE_HEIGHT") = kDefaultPlaneHeight;

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("object_id", &Trajectory::object_id)
      .def_readonly("trial_id", &Trajectory::trial_id)
      .def_readonly("dt", &Trajectory::dt)
      .def_property_readonly("times", [](const Trajectory& t) { return times_vector(t.samples); })
      .def_property_readonly("positions", [](const Trajectory& t) { return positions_matrix(t.samples); })
      .def_property_readonly("states", [](const Trajectory& t) { return states_matrix(t.states); })
      .def("__len__", [](const Trajectory& t) { return t.samples.size(); })
      .def("__repr__", [](const Trajectory& t) {
        return "<Trajectory " + t.object_id + "/" + t.trial_id + " n=" + std::to_string(t.samples.size()) + ">";
      });

  py::class_<TrainingWindow>(m, "TrainingWindow")
      .def_readonly("object_id", &TrainingWindow::object_id)
      .def_readonly("trial_id", &TrainingWindow::trial_id)
      .def_readonly("t_index", &TrainingWindow::t_index)
      .def_readonly("steps_to_impact", &TrainingWindow::steps_to_impact)
      .def_readonly("impact_point", &TrainingWindow::impact_point)
      .def_property_readonly("history", [](const TrainingWindow& w) { return states_matrix(w.history); })
      .def_property_readonly("history_positions", [](const TrainingWindow& w) { return positions_matrix(w.history_samples); })
      .def_property_readonly("history_times", [](const TrainingWindow& w) { return times_vector(w.history_samples); });

  m.def("catalog_ids", [](std::uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& p : catalog(seed)) ids.push_back(p.object_id);
    return ids;
  }, py::arg("seed") = 0);
  m.def("default_seen_ids", &default_seen_ids);
  m.def("default_unseen_ids", &default_unseen_ids);

  m.def(
      "generate_dataset",
      [](const std::vector<std::string>& object_ids, int trials, std::uint64_t seed, double plane_height,
         std::uint64_t catalog_seed) {
        py::gil_scoped_release release;
        return generate_dataset(select_profiles(catalog_seed, object_ids), trials, seed, PlaneSpec{plane_height});
      },
      py::arg("object_ids") = std::vector<std::string>{}, py::arg("trials") = 10, py::arg("seed") = 0,
      py::arg("plane_height") = kDefaultPlaneHeight, py::arg("catalog_seed") = 0,
      "Simulated throws for the named catalog objects (all when empty).");

  m.def(
      "make_trajectory",
      [](const Eigen::Ref<const Eigen::VectorXd>& times, const Eigen::Ref<const RowMatrix>& positions,
         const std::string& object_id, const std::string& trial_id, double dt, bool smooth) {
        DeriveOptions opt;
        opt.smooth = smooth;
        return make_trajectory(object_id, trial_id, dt, to_samples(times, positions), opt);
      },
      py::arg("times"), py::arg("positions"), py::arg("object_id") = "object", py::arg("trial_id") = "0",
      py::arg("dt") = kCaptureDt, py::arg("smooth") = false);

  m.def("read_dataset", [](const std::string& path) { return read_dataset(path); }, py::arg("path"));
  m.def("write_dataset", [](const std::string& path, const std::vector<Trajectory>& t) { write_dataset(path, t); },
        py::arg("path"), py::arg("trajectories"));
  m.def("augment", [](const Trajectory& t, double yaw, const Vec2& shift) { return augment(t, yaw, shift); },
        py::arg("trajectory"), py::arg("yaw"), py::arg("translation"));
  m.def("expand_dataset", &expand_dataset, py::arg("trajectories"), py::arg("factor"), py::arg("seed"));

  m.def(
      "ground_truth_impact",
      [](const Trajectory& t, double plane_height) {
        const Crossing c = ground_truth_impact(t, PlaneSpec{plane_height});
        return py::make_tuple(c.point, c.index_above, c.fraction);
      },
      py::arg("trajectory"), py::arg("plane_height") = kDefaultPlaneHeight,
      "(point, index_above, fraction) of the first descending crossing.");
  m.def("make_windows",
        [](const Trajectory& t, int history_steps, double plane_height) {
          return make_windows(t, history_steps, PlaneSpec{plane_height});
        },
        py::arg("trajectory"), py::arg("history_steps") = kDefaultHistorySteps,
        py::arg("plane_height") = kDefaultPlaneHeight);

  m.def("pds", [](const Trajectory& t) { return pds(t); }, py::arg("trajectory"));
  m.def(
      "pds_samples",
      [](const Eigen::Ref<const Eigen::VectorXd>& times, const Eigen::Ref<const RowMatrix>& positions) {
        return pds(to_samples(times, positions));
      },
      py::arg("times"), py::arg("positions"));

  m.def(
      "newton_predict",
      [](const Eigen::Ref<const Eigen::VectorXd>& times, const Eigen::Ref<const RowMatrix>& positions,
         double plane_height, std::uint64_t seed) {
        RansacConfig cfg;
        cfg.seed = seed;
        return newton_predict(to_samples(times, positions), PlaneSpec{plane_height}, cfg);
      },
      py::arg("times"), py::arg("positions"), py::arg("plane_height") = kDefaultPlaneHeight, py::arg("seed") = 0);

  py::class_<Network>(m, "Model")
      .def_property_readonly("arch", [](const Network& n) { return to_string(n.arch.kind); })
      .def_property_readonly("hidden", [](const Network& n) { return n.arch.hidden; })
      .def_property_readonly("history_length", [](const Network& n) { return n.arch.history_length(); })
      .def(
          "predict",
          [](const Network& n, const Eigen::Ref<const RowMatrix>& history, double plane_height) {
            const auto states = to_states(history);
            PredictionResult r;
            {
              py::gil_scoped_release release;
              r = predict_impact(n, states, PlaneSpec{plane_height});
            }
            py::dict d;
            d["ok"] = r.ok;
            d["impact_point"] = r.impact_point;
            d["diagnostic"] = r.diagnostic;
            d["core_steps"] = r.core_steps;
            d["inference_time"] = r.inference_time;
            if (r.predicted_trajectory) d["trajectory"] = states_matrix(*r.predicted_trajectory);
            return d;
          },
          py::arg("history"), py::arg("plane_height") = kDefaultPlaneHeight,
          "Impact estimate from a (T+1, 9) history of raw states.");

  m.def("load_model", [](const std::string& path) { return load_checkpoint(path).net; }, py::arg("path"));
  m.def("checkpoint_kind", &checkpoint_kind, py::arg("path"));

  m.def(
      "mann_whitney",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const MannWhitney r = mann_whitney(a, b);
        py::dict d;
        d["p_value"] = r.p_value;
        d["u"] = r.u;
        d["exact"] = r.exact;
        d["degenerate"] = r.degenerate;
        return d;
      },
      py::arg("a"), py::arg("b"));
}
