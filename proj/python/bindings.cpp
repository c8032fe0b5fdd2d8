#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "oodshape/bench.hpp"
#include "oodshape/error.hpp"
#include "oodshape/intervals.hpp"
#include "oodshape/metrics.hpp"
#include "oodshape/optimizer.hpp"
#include "oodshape/scoring.hpp"
#include "oodshape/shaping.hpp"
#include "oodshape/tensor_io.hpp"

namespace py = pybind11;
using namespace oodshape;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array &a) {
  return std::vector<double>(a.data(), a.data() + a.size());
}

Array to_array(const std::vector<double> &v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Array to_array(const Tensor &t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Tensor to_tensor(const Array &a) {
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), to_vector(a));
}

FeatureMatrix to_features(const Array &a, const std::string &tag = "array") {
  if (a.ndim() != 2)
    throw RankMismatch("features must be a 2-D array");
  return FeatureMatrix(to_tensor(a), tag);
}

LinearClassifier to_classifier(const Array &weights, const Array &bias) {
  return LinearClassifier(to_tensor(weights), to_tensor(bias));
}

ScoreKind to_score(const std::string &name, double temperature) {
  if (name == "msp")
    return Msp{temperature};
  if (name == "mls")
    return Mls{};
  if (name == "energy")
    return Energy{temperature};
  if (name == "odin-noperturb")
    return Msp{1000.0};
  throw InvalidArgument("unknown score '" + name + "'");
}

py::dict solution_dict(const ThetaSolution &s) {
  py::dict d;
  d["theta"] = to_array(s.theta);
  d["objective"] = s.objective_value;
  d["method"] = to_string(s.method);
  d["iterations"] = s.iterations;
  d["converged"] = s.converged;
  return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Piecewise-constant feature shaping for OOD detection (C++ core)";

  py::register_exception<Error>(m, "OodShapeError");

  m.def("load_tensor", [](const std::filesystem::path &p) { return to_array(load_tensor(p)); });
  m.def("save_tensor", [](const Array &a, const std::filesystem::path &p) {
    save_tensor(to_tensor(a), p);
  });

  py::class_<IntervalPartition>(m, "IntervalPartition")
      .def(py::init<double, double, std::size_t>(), py::arg("alpha"), py::arg("beta"),
           py::arg("k"))
      .def_property_readonly("alpha", &IntervalPartition::alpha)
      .def_property_readonly("beta", &IntervalPartition::beta)
      .def_property_readonly("k", &IntervalPartition::k)
      .def_property_readonly("delta", &IntervalPartition::delta)
      .def("bin_index", &IntervalPartition::bin_index)
      .def("midpoint", &IntervalPartition::midpoint)
      .def("__repr__", [](const IntervalPartition &p) {
        return "IntervalPartition(alpha=" + std::to_string(p.alpha()) +
               ", beta=" + std::to_string(p.beta()) + ", k=" + std::to_string(p.k()) + ")";
      });

  m.def(
      "fit_partition",
      [](const Array &features, std::size_t k, double lo, double hi) {
        return fit_partition(to_features(features), k, lo, hi);
      },
      py::arg("features"), py::arg("k") = kDefaultBins, py::arg("lo_pct") = kDefaultLowPercentile,
      py::arg("hi_pct") = kDefaultHighPercentile);

  m.def("isfi_vector", [](const Array &z, const Array &w, const IntervalPartition &p) {
    return to_array(isfi_vector(to_vector(z), to_vector(w), p));
  });

  m.def("mean_isfi", [](const Array &features, const Array &weights, const Array &bias,
                        const IntervalPartition &p) {
    return to_array(mean_isfi(to_features(features), to_classifier(weights, bias), p).mean);
  });

  m.def("solve_id_only", [](const Array &mean, const IntervalPartition &p) {
    return solution_dict(solve_id_only({to_vector(mean), 1, p}));
  });
  m.def("solve_with_ood", [](const Array &id_mean, const Array &ood_mean,
                             const IntervalPartition &p) {
    return solution_dict(solve_with_ood({to_vector(id_mean), 1, p}, {to_vector(ood_mean), 1, p}));
  });
  m.def(
      "solve_alternating",
      [](const Array &features, const Array &weights, const Array &bias,
         const IntervalPartition &p, std::size_t iters, std::optional<std::size_t> subsample,
         std::uint64_t seed) {
        return solution_dict(solve_alternating(to_features(features),
                                               to_classifier(weights, bias), p,
                                               {iters, subsample, seed, OutOfRange::Zero}));
      },
      py::arg("features"), py::arg("weights"), py::arg("bias"), py::arg("partition"),
      py::arg("iters") = 10, py::arg("subsample") = std::optional<std::size_t>(10000),
      py::arg("seed") = 0);

  py::class_<Identity>(m, "Identity").def(py::init<>());
  py::class_<PiecewiseConstant>(m, "PiecewiseConstant")
      .def(py::init([](const Array &theta, const IntervalPartition &p, bool keep) {
             return PiecewiseConstant{to_vector(theta), p,
                                      keep ? OutOfRange::Keep : OutOfRange::Zero};
           }),
           py::arg("theta"), py::arg("partition"), py::arg("keep_out_of_range") = false);
  py::class_<ReAct>(m, "ReAct").def(py::init<double>(), py::arg("t"));
  py::class_<BFAct>(m, "BFAct").def(py::init<double, int>(), py::arg("t"), py::arg("n") = 2);
  py::class_<VraP>(m, "VraP").def(py::init<double, double>(), py::arg("low"), py::arg("high"));
  py::class_<AshP>(m, "AshP").def(py::init<double>(), py::arg("p") = 60.0);
  py::class_<AshB>(m, "AshB").def(py::init<double>(), py::arg("p") = 65.0);
  py::class_<AshS>(m, "AshS").def(py::init<double>(), py::arg("p") = 90.0);
  py::class_<DiceMask>(m, "DiceMask");

  m.def(
      "dice_mask",
      [](const Array &weights, const Array &bias, const Array &mean_features, double p) {
        return dice_mask(to_classifier(weights, bias), to_vector(mean_features), p).method;
      },
      py::arg("weights"), py::arg("bias"), py::arg("mean_features"), py::arg("p") = 70.0);

  m.def("apply", [](const ShapingMethod &method, const Array &features) {
    Array out(std::vector<py::ssize_t>(features.shape(), features.shape() + features.ndim()));
    const std::size_t cols = features.ndim() == 2 ? features.shape(1) : features.size();
    const std::size_t rows = cols ? features.size() / cols : 0;
    for (std::size_t r = 0; r < rows; ++r)
      apply_into(method, {features.data() + r * cols, cols}, {out.mutable_data() + r * cols, cols});
    return out;
  });
  m.def("theta_curve", [](const ShapingMethod &method, const IntervalPartition &p) {
    return to_array(theta_curve(method, p));
  });

  m.def(
      "score_dataset",
      [](const Array &features, const Array &weights, const Array &bias,
         const ShapingMethod &method, const std::string &score, double temperature) {
        return to_array(score_dataset(to_features(features), to_classifier(weights, bias), method,
                                      to_score(score, temperature))
                            .scores);
      },
      py::arg("features"), py::arg("weights"), py::arg("bias"), py::arg("method"),
      py::arg("score") = "mls", py::arg("temperature") = 1.0);

  m.def("auroc", [](const Array &id, const Array &ood) {
    return auroc(to_vector(id), to_vector(ood));
  });
  m.def(
      "fpr_at_tpr",
      [](const Array &id, const Array &ood, double tpr) {
        return fpr_at_tpr(to_vector(id), to_vector(ood), tpr);
      },
      py::arg("id_scores"), py::arg("ood_scores"), py::arg("tpr") = 0.95);

  m.def("run", [](const std::filesystem::path &config_path) {
    const auto config = bench::load_config(config_path);
    const auto report = bench::run(config, bench::load_data(config));
    bench::write_report(report, config.output_dir);
    return bench::report_csv(report);
  });
}
