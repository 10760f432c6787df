#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "apidrift/attribution.hpp"
#include "apidrift/chi2.hpp"
#include "apidrift/detector.hpp"
#include "apidrift/error.hpp"
#include "apidrift/simulator.hpp"
#include "apidrift/version.hpp"

namespace py = pybind11;
using namespace apidrift;

namespace {

using PriorPtr = std::shared_ptr<PriorSpec>;  // pybind11 holders cannot be const

PriorPtr make_prior(const FrequencyTable& baseline, double weight, double floor, double odds) {
  return std::make_shared<PriorSpec>(build_prior(baseline, {weight, floor, odds}));
}

std::vector<std::uint64_t> counts_of(const FrequencyTable& t) { return {t.counts().begin(), t.counts().end()}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "apidrift core bindings";
  m.attr("__version__") = std::string(kVersion);

  auto base_error = py::register_exception<Error>(m, "Error", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", base_error.ptr());
  py::register_exception<UnknownCategory>(m, "UnknownCategory", base_error.ptr());
  py::register_exception<ParseError>(m, "ParseError", base_error.ptr());
  py::register_exception<NumericFault>(m, "NumericFault", base_error.ptr());
  py::register_exception<CorruptSnapshot>(m, "CorruptSnapshot", base_error.ptr());

  py::class_<CategorySpace, std::shared_ptr<CategorySpace>>(m, "CategorySpace")
      .def(py::init([](std::vector<std::string> apis, const std::string& mode) {
             return std::make_shared<CategorySpace>(CategorySpace::build(std::move(apis), parse_space_mode(mode)));
           }),
           py::arg("apis"), py::arg("mode") = "pair")
      .def_property_readonly("mode", [](const CategorySpace& s) { return std::string(to_string(s.mode())); })
      .def_property_readonly("apis", &CategorySpace::apis)
      .def_property_readonly("size", &CategorySpace::size)
      .def("__len__", &CategorySpace::size)
      .def(
          "encode",
          [](const CategorySpace& s, std::optional<std::string> parent, std::optional<std::string> child) {
            return s.mode() == SpaceMode::Single ? s.encode(Observation::single(child.value_or(parent.value_or(""))))
                                                 : s.encode(Observation::pair(std::move(parent), std::move(child)));
          },
          py::arg("parent"), py::arg("child") = py::none(),
          "Pair mode: encode(parent, child) with None for the null element. Single mode: encode(name).")
      .def("decode",
           [](const CategorySpace& s, CategoryIndex i) {
             auto o = s.decode(i);
             return std::make_pair(o.parent, o.api);
           })
      .def("label", &CategorySpace::label);

  py::class_<FrequencyTable>(m, "FrequencyTable")
      .def(py::init([](std::shared_ptr<CategorySpace> space, std::vector<std::uint64_t> counts) {
             return FrequencyTable(std::move(space), std::move(counts));
           }),
           py::arg("space"), py::arg("counts"))
      .def_property_readonly("counts", &counts_of)
      .def_property_readonly("total", &FrequencyTable::total)
      .def("normalized", &FrequencyTable::normalized);

  py::class_<PriorSpec, PriorPtr>(m, "PriorSpec")
      .def_readonly("alpha0", &PriorSpec::alpha0)
      .def_readonly("theta0", &PriorSpec::theta0)
      .def_readonly("prior_weight", &PriorSpec::prior_weight)
      .def_readonly("floor", &PriorSpec::floor)
      .def_readonly("prior_odds", &PriorSpec::prior_odds)
      .def("to_json", [](const PriorSpec& p) { return to_json(p).dump(); });

  m.def("build_prior", &make_prior, py::arg("baseline"), py::arg("prior_weight") = 50.0,
        py::arg("floor") = 0.00006, py::arg("prior_odds") = 1.0);
  m.def("log_threshold", &log_threshold, py::arg("fp_level"));
  m.def(
      "log_bf_closed_form",
      [](const PriorSpec& p, const std::vector<double>& counts) { return log_bf_closed_form(p, counts); },
      py::arg("prior"), py::arg("counts"));

  py::class_<SequentialDetector>(m, "SequentialDetector")
      .def(py::init([](PriorPtr prior, std::vector<double> fp_levels, double forgetting, bool keep_history) {
             DetectorConfig c;
             c.fp_levels = std::move(fp_levels);
             c.forgetting = forgetting;
             c.keep_history = keep_history;
             return SequentialDetector(std::move(prior), c);
           }),
           py::arg("prior"), py::arg("fp_levels") = std::vector<double>{0.10, 0.05, 0.01},
           py::arg("forgetting") = 1.0, py::arg("keep_history") = false)
      .def("step",
           [](SequentialDetector& d, CategoryIndex c) {
             auto r = d.step(c);
             return py::make_tuple(r.log_psi, r.log_bf, r.newly_alarmed);
           })
      .def(
          "run",
          [](SequentialDetector& d, const std::vector<CategoryIndex>& stream) {
            std::vector<double> out;
            out.reserve(stream.size());
            for (auto c : stream) out.push_back(d.step(c).log_bf);
            return out;
          },
          "Steps through the whole stream and returns log BF after each observation.")
      .def_property_readonly("t", &SequentialDetector::t)
      .def_property_readonly("log_bf", &SequentialDetector::log_bf)
      .def_property_readonly("data_sum", &SequentialDetector::data_sum)
      .def_property_readonly("data_counts",
                             [](const SequentialDetector& d) {
                               return std::vector<double>(d.data_counts().begin(), d.data_counts().end());
                             })
      .def_property_readonly("alarmed_at", &SequentialDetector::alarmed_at)
      .def("posterior_mean", &SequentialDetector::posterior_mean)
      .def("history",
           [](const SequentialDetector& d) {
             std::vector<std::tuple<std::uint64_t, CategoryIndex, double>> out;
             for (const auto& e : d.history().entries()) out.emplace_back(e.t, e.category, e.log_psi);
             return out;
           })
      .def("snapshot", &SequentialDetector::snapshot)
      .def_static("restore", [](const std::string& bytes) { return SequentialDetector::restore(bytes); });

  m.def("chi2_sf", &chi2_sf, py::arg("x"), py::arg("dof"));
  m.def(
      "pearson_gof",
      [](const std::vector<double>& counts, const std::vector<double>& theta0) {
        auto r = pearson_gof(counts, theta0);
        return py::make_tuple(r.statistic, r.dof, r.p_value);
      },
      py::arg("counts"), py::arg("theta0"));
  m.def("sequential_chi2_monitor", &sequential_chi2_monitor, py::arg("stream"), py::arg("theta0"),
        py::arg("fp_level"), py::arg("warmup"));

  m.def(
      "sample_stream",
      [](const FrequencyTable& h, const FrequencyTable& h_alt, double pi, std::uint64_t n, std::uint64_t seed) {
        return sample_stream(Distribution::from_counts(h), Distribution::from_counts(h_alt), ConstantDrift{pi}, n,
                             seed);
      },
      py::arg("baseline"), py::arg("alternate"), py::arg("pi"), py::arg("n"), py::arg("seed"));

  m.def(
      "_run_experiment_json",
      [](const std::string& config, const std::string& base_dir, unsigned jobs) {
        auto cfg = experiment_config_from_json(nlohmann::json::parse(config), base_dir);
        py::gil_scoped_release release;
        return to_json(run_experiment(cfg, jobs)).dump();
      },
      py::arg("config"), py::arg("base_dir") = ".", py::arg("jobs") = 1);

  m.def(
      "_top_k_report_json",
      [](const SequentialDetector& d, std::size_t k, const std::string& metric, const std::string& reference) {
        ReportOptions o{k, parse_metric(metric), parse_rho_reference(reference)};
        return to_json(top_k_report(d, o), *d.prior().space).dump();
      },
      py::arg("detector"), py::arg("k") = 3, py::arg("metric") = "delta", py::arg("rho_reference") = "expected");
}
