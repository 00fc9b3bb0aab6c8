// Thin JSON-string bindings: every heavyweight object crosses the boundary as
// the same serialized form the CLI reads and writes, so Python callers see
// exactly the on-disk artifact semantics.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sma/bounds.hpp"
#include "sma/circuit_compiler.hpp"
#include "sma/margin.hpp"
#include "sma/tm_compiler.hpp"

namespace py = pybind11;
using namespace sma;

namespace {

std::string py_compile_circuit(const std::string& netlist, int width, int depth,
                               bool corrections) {
  CompileOptions opts;
  opts.target_width = width;
  opts.target_depth = depth;
  opts.insert_corrections = corrections;
  return net_to_json(compile(layerize(parse_circuit(netlist)), opts), NumericMode::kRational);
}

std::string py_compile_tm(const std::string& tm_json) {
  return transformer_to_json(compile_tm(parse_tm(tm_json)).model, NumericMode::kRational);
}

std::vector<double> py_run_net(const std::string& net_json, const std::vector<double>& x) {
  Net net = net_from_json(net_json);
  Vec<Rational> xq;
  for (double v : x) xq.push_back(rational_from_double(v));
  Vec<Rational> y = forward<Rational>(net, xq);
  std::vector<double> out;
  for (const Rational& v : y) out.push_back(v.get_d());
  return out;
}

int py_run_tm(const std::string& tm_json, const std::vector<std::string>& input) {
  TMSpec m = parse_tm(tm_json);
  TMTrace tr = simulate(m, input);
  return decision(m, tr);
}

double py_decode(const std::string& model_json, const std::vector<int>& input) {
  TransformerModel m = transformer_from_json(model_json);
  return decode<Rational>(m, input).get_d();
}

bool py_verify_tm(const std::string& tm_json, const std::vector<std::string>& input) {
  TMSpec m = parse_tm(tm_json);
  CompiledTransformer ct = compile_tm(m);
  std::vector<int> in;
  for (const auto& s : input) in.push_back(m.symbol_index(s));
  return verify_tm(ct, in).pass;
}

std::string py_margin_upper(const std::string& net_json, const std::vector<double>& x, int y,
                            long budget, std::uint64_t seed) {
  Net net = net_from_json(net_json);
  return margin_report_to_json(margin_upper_bound(net, x, y, budget, seed));
}

double py_certify(const std::string& net_json) {
  Net net = net_from_json(net_json);
  if (net.input_dim > 14) fail("InvalidQuery", "too many inputs to enumerate");
  std::vector<Vec<double>> xs;
  for (unsigned long v = 0; v < (1ul << net.input_dim); ++v) {
    Vec<double> xx;
    for (int j = 0; j < net.input_dim; ++j) xx.push_back((v >> j) & 1u);
    xs.push_back(std::move(xx));
  }
  return certified_lower_bound(estimate_profile(net, xs));
}

}  // namespace

PYBIND11_MODULE(_sma, m) {
  m.doc() = "exact circuit/Turing-machine compilation and margin certification";

  m.def("compile_circuit", &py_compile_circuit, py::arg("netlist"), py::arg("width") = 0,
        py::arg("depth") = 0, py::arg("corrections") = true,
        "Compile a netlist to an exact ReLU net (JSON).");
  m.def("compile_tm", &py_compile_tm, py::arg("tm_json"),
        "Compile a Turing machine (JSON) to a hard-attention transformer (JSON).");
  m.def("run_net", &py_run_net, py::arg("net_json"), py::arg("x"),
        "Evaluate a compiled net exactly; returns the output vector as floats.");
  m.def("run_tm", &py_run_tm, py::arg("tm_json"), py::arg("input"),
        "Simulate a machine on a list of symbol strings; returns the 0/1 decision.");
  m.def("decode", &py_decode, py::arg("model_json"), py::arg("input"),
        "Run the transformer decoder on encoder symbol indices; returns the prediction.");
  m.def("verify_tm", &py_verify_tm, py::arg("tm_json"), py::arg("input"),
        "Compile and check the full per-step execution record on one input.");
  m.def("margin_upper", &py_margin_upper, py::arg("net_json"), py::arg("x"), py::arg("y"),
        py::arg("budget") = 20000, py::arg("seed") = 0,
        "Search a flipping parameter perturbation; returns the report JSON.");
  m.def("certify", &py_certify, py::arg("net_json"),
        "Margin lower bound from a profile estimated over all binary inputs.");
  m.def("surrogate_loss", &surrogate_loss, py::arg("margin"), py::arg("gamma"));
  m.def("solve_sample_complexity", &solve_sample_complexity, py::arg("alpha"), py::arg("p"),
        py::arg("gamma"), py::arg("eps"), py::arg("c_rad") = 1.0);
  m.def("sm_bound", &sm_bound, py::arg("eps_surrogate"), py::arg("n"), py::arg("delta_conf"));

  py::register_exception<Error>(m, "SmaError");
}
