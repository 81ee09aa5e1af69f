#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "zigdrain/experiments.hpp"

namespace py = pybind11;
using namespace zigdrain;

namespace {

py::bytes to_py(const Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

Bytes from_py(const py::bytes& b) {
  const std::string s = b;
  return Bytes(s.begin(), s.end());
}

Key key_from(const py::bytes& b) {
  const std::string s = b;
  if (s.size() != 16) throw py::value_error("key must be 16 bytes");
  Key k{};
  std::copy(s.begin(), s.end(), k.begin());
  return k;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Battery-depletion attack simulator core";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<MismatchedScenarios>(m, "MismatchedScenarios", PyExc_ValueError);

  // frame_security
  m.def("suite_name", [](int level) { return std::string(suite_name(security_level_from(level))); });
  m.def("mic_length", [](int level) { return mic_length(security_level_from(level)); });
  m.def(
      "secure_payload",
      [](const py::bytes& key, std::uint64_t src, std::uint16_t dst, const py::bytes& payload, int level,
         std::uint32_t counter) {
        MacHeader h;
        h.ack_request = true;
        h.destination = dst;
        h.source = src;
        const Bytes p = from_py(payload);
        return to_py(encode_frame(secure_frame(key_from(key), h, p, security_level_from(level), counter)));
      },
      py::arg("key"), py::arg("src"), py::arg("dst"), py::arg("payload"), py::arg("level"), py::arg("counter"),
      "Builds a secured data frame and returns the MPDU bytes.");
  m.def(
      "unsecure",
      [](const py::bytes& key, const py::bytes& wire, std::uint32_t highest_counter) {
        const SecuredFrame f = decode_frame(from_py(wire));
        AclEntry acl{f.header.source, key_from(key), highest_counter, false};
        const UnsecureResult r = unsecure_frame(acl, f);
        return py::make_tuple(std::string(to_string(r.status)), to_py(r.payload), acl.highest_counter);
      },
      py::arg("key"), py::arg("wire"), py::arg("highest_counter") = 0,
      "Returns (status, plaintext, new high-water counter).");
  m.def("xor_recover", [](const py::bytes& a, const py::bytes& b) { return to_py(xor_recover(from_py(a), from_py(b))); });

  // energy_model
  py::class_<PowerProfile>(m, "PowerProfile")
      .def(py::init<>())
      .def_readwrite("p_rx", &PowerProfile::p_rx)
      .def_readwrite("p_tx", &PowerProfile::p_tx)
      .def_readwrite("p_cpu_active", &PowerProfile::p_cpu_active)
      .def_readwrite("p_cpu_idle", &PowerProfile::p_cpu_idle)
      .def_readwrite("p_cpu_powersave", &PowerProfile::p_cpu_powersave)
      .def_readwrite("voltage", &PowerProfile::voltage);
  py::class_<DutyCycle>(m, "DutyCycle")
      .def(py::init<>())
      .def(py::init([](double tau, double period) { return DutyCycle{tau, period}; }), py::arg("tau"), py::arg("period"))
      .def_readwrite("tau", &DutyCycle::tau)
      .def_readwrite("period", &DutyCycle::period);
  py::class_<CpuCostModel>(m, "CpuCostModel").def(py::init<>());
  py::class_<MessageTiming>(m, "MessageTiming")
      .def_readonly("t_rx", &MessageTiming::t_rx)
      .def_readonly("t_dec", &MessageTiming::t_dec)
      .def_property_readonly("t_a", &MessageTiming::t_a);
  m.def(
      "message_timing",
      [](std::size_t payload, double rate, int level) { return message_timing(payload, rate, level, CpuCostModel{}); },
      py::arg("payload_len"), py::arg("data_rate") = 250000.0, py::arg("level") = 7);
  m.def("messages_per_active_period", &messages_per_active_period);
  m.def(
      "lifetime_ratio",
      [](const DutyCycle& d, const MessageTiming& t, std::int64_t n_p, const PowerProfile& p, bool device_model) {
        return lifetime_ratio(d, t, n_p, p, device_model ? EnergyOptions::device_model() : EnergyOptions{});
      },
      py::arg("duty"), py::arg("timing"), py::arg("n_p"), py::arg("power") = PowerProfile{},
      py::arg("device_model") = true);
  m.def(
      "messages_to_depletion",
      [](double capacity_ah, double voltage, double threshold_ah, double e_p) {
        return messages_to_depletion(Battery::full(capacity_ah, voltage, threshold_ah), e_p);
      },
      py::arg("capacity_ah"), py::arg("voltage"), py::arg("threshold_ah"), py::arg("e_p"));

  // analytic_dos
  py::class_<NodeSolution>(m, "NodeSolution")
      .def_readonly("tau", &NodeSolution::tau)
      .def_readonly("alpha", &NodeSolution::alpha)
      .def_readonly("rho", &NodeSolution::rho)
      .def_readonly("p", &NodeSolution::p)
      .def_readonly("p_s", &NodeSolution::p_s)
      .def_readonly("S", &NodeSolution::S);
  py::class_<FixedPointResult>(m, "FixedPointResult")
      .def_readonly("nodes", &FixedPointResult::nodes)
      .def_readonly("residual", &FixedPointResult::residual)
      .def_readonly("iterations", &FixedPointResult::iterations);
  m.def(
      "solve_fig1",
      [](int attack_case, double p_att) {
        ChainSpec spec = fig1_chain(attack_case);
        spec.p_att = p_att;
        return solve_fixed_point(spec);
      },
      py::arg("attack_case"), py::arg("p_att"));

  // localization
  m.def(
      "estimate_location",
      [](const std::vector<NodeId>& group, const std::map<NodeId, double>& delta, const std::vector<std::pair<double, double>>& pos) {
        std::vector<Position> p;
        for (auto [x, y] : pos) p.push_back({x, y});
        const Position e = estimate_location(group, delta, p);
        return py::make_tuple(e.x, e.y);
      },
      py::arg("group"), py::arg("delta_pct"), py::arg("positions"));
  m.def("identify_suspects", &identify_suspects, py::arg("paths"), py::arg("delta_pct"), py::arg("delta"),
        py::arg("delta_prime"));

  // scenarios and runs
  py::class_<Scenario>(m, "Scenario")
      .def_readwrite("name", &Scenario::name)
      .def_readwrite("sim_end", &Scenario::sim_end)
      .def_property_readonly("node_count", [](const Scenario& s) { return s.topology.size(); })
      .def_property_readonly("gateway", [](const Scenario& s) { return s.topology.gateway; })
      .def_property_readonly("victims", &Scenario::victims)
      .def_property_readonly("positions", [](const Scenario& s) {
        std::vector<std::pair<double, double>> v;
        for (const auto& p : s.topology.positions) v.emplace_back(p.x, p.y);
        return v;
      });
  m.def("parse_scenario", &parse_scenario, py::arg("path"));
  m.def("parse_scenario_text", &parse_scenario_text, py::arg("text"), py::arg("name") = "scenario");
  m.def("parse_seed_list", &parse_seed_list);

  py::class_<NodeStats>(m, "NodeStats")
      .def_readonly("generated", &NodeStats::generated)
      .def_readonly("delivered", &NodeStats::delivered)
      .def_readonly("dropped", &NodeStats::dropped)
      .def_readonly("crypto_ops", &NodeStats::crypto_ops)
      .def_readonly("integrity_fail", &NodeStats::integrity_fail)
      .def_readonly("depleted_at", &NodeStats::depleted_at)
      .def_readonly("consumed_total_mas", &NodeStats::consumed_total_mas);
  py::class_<SimResult>(m, "SimResult")
      .def_readonly("nodes", &SimResult::nodes)
      .def_readonly("end_time", &SimResult::end_time)
      .def_readonly("events", &SimResult::events)
      .def_property_readonly("trace_hash", [](const SimResult& r) { return r.trace.hash(); })
      .def_property_readonly("trace_len", [](const SimResult& r) { return r.trace.size(); })
      .def("trace_csv", [](const SimResult& r) {
        std::ostringstream os;
        r.trace.write_csv(os);
        return os.str();
      });
  m.def("simulate", &simulate, py::arg("scenario"), py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("ledger_charge", &ledger_charge);

  m.def("experiment_kinds", [] {
    std::vector<std::string> v;
    for (auto k : all_experiment_kinds()) v.emplace_back(to_string(k));
    return v;
  });
  py::class_<RunReport>(m, "RunReport")
      .def_readonly("files", &RunReport::files)
      .def_readonly("summary", &RunReport::summary)
      .def_readonly("ok", &RunReport::ok);
  m.def(
      "run_experiment",
      [](const std::string& kind, const Scenario& s, const std::vector<std::uint64_t>& seeds,
         const std::filesystem::path& out) {
        py::gil_scoped_release release;
        return run_experiment(experiment_kind_from(kind), s, seeds, out);
      },
      py::arg("kind"), py::arg("scenario"), py::arg("seeds"), py::arg("out_dir"));
  m.def(
      "compare_runs",
      [](const std::filesystem::path& a, const std::filesystem::path& b) {
        std::vector<py::dict> out;
        for (const auto& r : compare_runs(a, b)) {
          py::dict d;
          d["node"] = r.node;
          d["delta_s_pct"] = r.delta_s_pct;
          d["delta_drain_pct"] = r.delta_drain_pct;
          out.push_back(d);
        }
        return out;
      },
      py::arg("dir_a"), py::arg("dir_b"));
}
