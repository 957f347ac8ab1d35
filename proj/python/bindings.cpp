#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sense/calendar.hpp"
#include "sense/compute.hpp"
#include "sense/error.hpp"
#include "sense/harness.hpp"
#include "sense/protocol.hpp"
#include "sense/topology.hpp"

namespace py = pybind11;
using namespace sense;

// Documents cross the boundary as JSON text; the Python package wraps them.
namespace {

std::shared_ptr<const UnionModel> union_from(const std::string& models_json) {
  std::vector<DomainModel> models;
  for (const auto& m : json::parse(models_json)) models.push_back(model_from_json(m));
  return integrate_models(std::move(models));
}

harness::Manifest manifest_for(const std::string& preset, uint64_t seed, double latency_scale) {
  auto spec = harness::preset_spec(preset, seed);
  spec.latency_scale = latency_scale;
  return harness::gen_topology(spec);
}

class PyFabric {
 public:
  PyFabric(const std::string& preset, uint64_t seed, double latency_scale, bool http) {
    auto m = manifest_for(preset, seed, latency_scale);
    harness::FabricOptions o;
    o.http = http;
    o.orchestrator = harness::scaled_config(latency_scale);
    fabric_ = std::make_unique<harness::Fabric>(m, o);
  }

  std::string create(const std::string& intent) { return dump(fabric_->api().create(json::parse(intent))); }
  std::string negotiate(const std::string& id, const std::string& intent) {
    return dump(fabric_->api().negotiate(id, json::parse(intent)));
  }
  std::string reserve(const std::string& id) { return dump(fabric_->api().reserve(id)); }
  std::string commit(const std::string& id, bool async) { return dump(fabric_->api().commit(id, async)); }
  std::string cancel(const std::string& id) { return dump(fabric_->api().cancel(id)); }
  std::string status(const std::string& id) { return protocol::encode(fabric_->api().status(id)).dump(); }
  std::string run_table1() {
    return harness::to_json(harness::run_batch(harness::table1_batch(), *fabric_)).dump();
  }
  std::string audit() { return harness::to_json(harness::audit(*fabric_)).dump(); }
  std::string manifest() const { return harness::to_json(fabric_->manifest()).dump(); }
  void close() { fabric_->stop(); }

 private:
  static std::string dump(const protocol::ServiceResponse& r) { return protocol::encode(r).dump(); }
  std::unique_ptr<harness::Fabric> fabric_;
};

}  // namespace

PYBIND11_MODULE(_sense, m) {
  m.doc() = "Multi-domain network service orchestration core";

  // Kept alive for the life of the interpreter.
  static PyObject* error_type = [&] {
    py::object t = py::exception<Error>(m, "SenseError");
    return t.release().ptr();
  }();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object type = py::reinterpret_borrow<py::object>(error_type);
      py::object exc = type(std::string(e.what()));
      exc.attr("code") = std::string(code_name(wire_code(e.code())));
      exc.attr("internal_code") = std::string(code_name(e.code()));
      exc.attr("detail") = e.detail().dump();
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  m.def("gen_topology", [](const std::string& preset, uint64_t seed, double scale) {
    return harness::to_json(manifest_for(preset, seed, scale)).dump();
  }, py::arg("preset"), py::arg("seed") = 1, py::arg("latency_scale") = 0.1);

  m.def("union_graph", [](const std::string& models) { return union_from(models)->export_graph().dump(); });

  m.def("compute_design", [](const std::string& intent, const std::string& models, int64_t now) {
    auto u = union_from(models);
    ServiceIntent si = normalize_intent(json::parse(intent), now);
    ServiceDesign d = compute_design(si, *u, "py");
    d.deltas = partition_deltas(d, *u, "py");
    return to_json(d).dump();
  }, py::arg("intent"), py::arg("models"), py::arg("now"));

  m.def("answer_queries", [](const std::string& intent, const std::string& models, int64_t now, int offset) {
    auto u = union_from(models);
    return protocol::encode(answer_queries(normalize_intent(json::parse(intent), now), *u, now, offset)).dump();
  }, py::arg("intent"), py::arg("models"), py::arg("now"), py::arg("utc_offset_minutes") = 0);

  m.def("tbp_duration", &tbp_duration, py::arg("tbp_mbytes"), py::arg("mbps"));
  m.def("conformance_corpus", &harness::conformance_corpus);

  py::class_<ReservationCalendar>(m, "Calendar")
      .def(py::init([](const std::string& urn, Mbps reservable, int lo, int hi, double f) {
             return ReservationCalendar(Urn(urn), reservable, LabelRange({{lo, hi}}), f);
           }),
           py::arg("port"), py::arg("reservable"), py::arg("vlan_lo") = 1, py::arg("vlan_hi") = 4094,
           py::arg("overbook_factor") = kDefaultOverbookFactor)
      .def("available_bandwidth",
           [](const ReservationCalendar& c, int64_t start, int64_t end, const std::string& qos) {
             return c.available_bandwidth({start, end}, qos_from_string(qos));
           },
           py::arg("start"), py::arg("end"), py::arg("qos") = "guaranteedCapped")
      .def("available_labels",
           [](const ReservationCalendar& c, int64_t start, int64_t end) {
             return c.available_labels({start, end}).values();
           })
      .def("try_hold",
           [](ReservationCalendar& c, const std::string& segment, int64_t now, int64_t hold, const std::string& delta) {
             return to_json(c.try_hold(segment_from_json(json::parse(segment)), now, hold, delta)).dump();
           },
           py::arg("segment"), py::arg("now"), py::arg("hold_duration"), py::arg("delta_id") = "")
      .def("commit_hold", [](ReservationCalendar& c, const std::string& d, int64_t now) { c.commit_hold(d, now); })
      .def("release", [](ReservationCalendar& c, const std::string& conn) { c.release(conn); })
      .def("expire_holds", &ReservationCalendar::expire_holds)
      .def("allocations", [](const ReservationCalendar& c) {
        json out = json::array();
        for (const auto& a : c.allocations()) out.push_back(to_json(a));
        return out.dump();
      });

  py::class_<PyFabric>(m, "Fabric")
      .def(py::init<const std::string&, uint64_t, double, bool>(), py::arg("preset") = "baseline8",
           py::arg("seed") = 1, py::arg("latency_scale") = 0.0, py::arg("http") = false)
      .def("create", &PyFabric::create, py::call_guard<py::gil_scoped_release>())
      .def("negotiate", &PyFabric::negotiate, py::call_guard<py::gil_scoped_release>())
      .def("reserve", &PyFabric::reserve, py::call_guard<py::gil_scoped_release>())
      .def("commit", &PyFabric::commit, py::arg("instance_id"), py::arg("async_") = false,
           py::call_guard<py::gil_scoped_release>())
      .def("cancel", &PyFabric::cancel, py::call_guard<py::gil_scoped_release>())
      .def("status", &PyFabric::status, py::call_guard<py::gil_scoped_release>())
      .def("run_table1", &PyFabric::run_table1, py::call_guard<py::gil_scoped_release>())
      .def("audit", &PyFabric::audit, py::call_guard<py::gil_scoped_release>())
      .def("manifest", &PyFabric::manifest)
      .def("close", &PyFabric::close, py::call_guard<py::gil_scoped_release>());
}
