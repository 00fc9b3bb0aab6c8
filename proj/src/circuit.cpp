#include "sma/circuit.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace sma {

int gate_arity(GateKind k) {
  switch (k) {
    case GateKind::kInput: return 0;
    case GateKind::kAnd:
    case GateKind::kOr: return 2;
    case GateKind::kNot:
    case GateKind::kId: return 1;
  }
  return 0;
}

const char* gate_kind_name(GateKind k) {
  switch (k) {
    case GateKind::kInput: return "INPUT";
    case GateKind::kAnd: return "AND";
    case GateKind::kOr: return "OR";
    case GateKind::kNot: return "NOT";
    case GateKind::kId: return "ID";
  }
  return "?";
}

namespace {

bool valid_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char ch : s)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) return false;
  return true;
}

[[noreturn]] void parse_fail(const std::string& code, int line, const std::string& msg) {
  fail(code, "line " + std::to_string(line) + ": " + msg);
}

}  // namespace

Circuit parse_circuit(const std::string& text) {
  Circuit c;
  std::unordered_map<std::string, int> index;
  bool saw_inputs = false;
  bool saw_output = false;
  std::string output_id;
  int output_line = 0;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;

    if (tok == "inputs") {
      if (saw_inputs) parse_fail("DuplicateId", lineno, "second 'inputs' line");
      saw_inputs = true;
      std::string id;
      while (ls >> id) {
        if (!valid_identifier(id)) parse_fail("BadIdentifier", lineno, "bad input id '" + id + "'");
        if (index.count(id)) parse_fail("DuplicateId", lineno, "duplicate id '" + id + "'");
        index[id] = static_cast<int>(c.gates.size());
        c.gates.push_back({id, GateKind::kInput, {}});
      }
      c.num_inputs = static_cast<int>(c.gates.size());
      if (c.num_inputs == 0) parse_fail("MissingInputs", lineno, "'inputs' line declares none");
    } else if (tok == "gate") {
      if (!saw_inputs) parse_fail("MissingInputs", lineno, "'gate' before 'inputs' line");
      std::string id, eq, kind;
      if (!(ls >> id >> eq >> kind) || eq != "=")
        parse_fail("BadSyntax", lineno, "expected 'gate <id> = <KIND> <args>'");
      if (!valid_identifier(id)) parse_fail("BadIdentifier", lineno, "bad gate id '" + id + "'");
      if (index.count(id)) parse_fail("DuplicateId", lineno, "duplicate id '" + id + "'");
      GateKind gk;
      if (kind == "AND") gk = GateKind::kAnd;
      else if (kind == "OR") gk = GateKind::kOr;
      else if (kind == "NOT") gk = GateKind::kNot;
      else if (kind == "ID") gk = GateKind::kId;
      else parse_fail("UnknownGateKind", lineno, "unknown gate kind '" + kind + "'");
      std::vector<int> args;
      std::string a;
      while (ls >> a) {
        auto it = index.find(a);
        if (it == index.end()) parse_fail("UndeclaredArg", lineno, "undeclared arg '" + a + "'");
        args.push_back(it->second);
      }
      if (static_cast<int>(args.size()) != gate_arity(gk))
        parse_fail("BadArity", lineno,
                   std::string(gate_kind_name(gk)) + " takes " + std::to_string(gate_arity(gk)) +
                       " args, got " + std::to_string(args.size()));
      index[id] = static_cast<int>(c.gates.size());
      c.gates.push_back({id, gk, std::move(args)});
    } else if (tok == "output") {
      if (saw_output) parse_fail("DuplicateId", lineno, "second 'output' line");
      saw_output = true;
      if (!(ls >> output_id)) parse_fail("BadSyntax", lineno, "expected 'output <id>'");
      output_line = lineno;
    } else {
      parse_fail("BadSyntax", lineno, "unknown directive '" + tok + "'");
    }
  }

  if (!saw_inputs) fail("MissingInputs", "no 'inputs' line");
  if (!saw_output) fail("MissingOutput", "no 'output' line");
  auto it = index.find(output_id);
  if (it == index.end()) parse_fail("UndeclaredArg", output_line, "output names undeclared id '" + output_id + "'");
  c.output = it->second;
  return c;
}

std::string print_circuit(const Circuit& c) {
  std::ostringstream out;
  out << "inputs";
  for (int i = 0; i < c.num_inputs; ++i) out << ' ' << c.gates[i].id;
  out << '\n';
  for (int i = c.num_inputs; i < c.num_gates_total(); ++i) {
    const Gate& g = c.gates[i];
    out << "gate " << g.id << " = " << gate_kind_name(g.kind);
    for (int a : g.args) out << ' ' << c.gates[a].id;
    out << '\n';
  }
  out << "output " << c.gates[c.output].id << '\n';
  return out.str();
}

int LayeredCircuit::width() const {
  int m = num_inputs;
  for (const auto& layer : layers) m = std::max(m, static_cast<int>(layer.size()));
  return m;
}

int LayeredCircuit::size() const {
  int c = num_inputs;
  for (const auto& layer : layers) c += static_cast<int>(layer.size());
  return c;
}

LayeredCircuit layerize(const Circuit& c) {
  int n = c.num_gates_total();
  // layer = 1 + max layer of args; inputs at layer 0.
  std::vector<int> layer(n, 0);
  int depth = 0;
  for (int i = c.num_inputs; i < n; ++i) {
    int l = 0;
    for (int a : c.gates[i].args) l = std::max(l, layer[a]);
    layer[i] = l + 1;
    depth = std::max(depth, layer[i]);
  }
  if (depth == 0) {
    // Output is an input gate; represent it as a single ID layer so the
    // result always has at least one gate layer.
    LayeredCircuit lc;
    lc.num_inputs = c.num_inputs;
    lc.layers.push_back({LayeredGate{GateKind::kId, {c.output}}});
    lc.output = 0;
    return lc;
  }
  depth = std::max(depth, layer[c.output]);

  LayeredCircuit lc;
  lc.num_inputs = c.num_inputs;
  lc.layers.resize(depth);

  // pos[l][gate] = position of gate's value in layer l (via ID bridges).
  std::vector<std::unordered_map<int, int>> pos(depth + 1);
  for (int i = 0; i < c.num_inputs; ++i) pos[0][i] = i;

  // Place real gates.
  for (int i = c.num_inputs; i < n; ++i) {
    auto& lay = lc.layers[layer[i] - 1];
    pos[layer[i]][i] = static_cast<int>(lay.size());
    lay.push_back(LayeredGate{c.gates[i].kind, {}});
  }

  // Bridge value of gate g from its own layer up to layer `upto` with a
  // single shared ID chain per gate.
  auto bridge = [&](int g, int upto) {
    for (int l = layer[g] + 1; l <= upto; ++l) {
      if (pos[l].count(g)) continue;
      int prev = pos[l - 1].at(g);
      auto& lay = lc.layers[l - 1];
      pos[l][g] = static_cast<int>(lay.size());
      lay.push_back(LayeredGate{GateKind::kId, {prev}});
    }
  };

  // Wire args, inserting bridges where an arg lives more than one layer up.
  for (int i = c.num_inputs; i < n; ++i) {
    for (int a : c.gates[i].args) bridge(a, layer[i] - 1);
  }
  // The output must sit in the final layer.
  bridge(c.output, depth);
  for (int i = c.num_inputs; i < n; ++i) {
    auto& g = lc.layers[layer[i] - 1][pos[layer[i]].at(i)];
    for (int a : c.gates[i].args) g.args.push_back(pos[layer[i] - 1].at(a));
  }
  lc.output = pos[depth].at(c.output);
  return lc;
}

namespace {

uint8_t apply_gate(GateKind k, uint8_t a, uint8_t b) {
  switch (k) {
    case GateKind::kAnd: return a & b;
    case GateKind::kOr: return a | b;
    case GateKind::kNot: return !a;
    case GateKind::kId: return a;
    case GateKind::kInput: break;
  }
  fail("InternalError", "apply_gate on INPUT");
}

}  // namespace

int evaluate(const Circuit& c, const std::vector<uint8_t>& x) {
  if (static_cast<int>(x.size()) != c.num_inputs)
    fail("LengthMismatch", "expected " + std::to_string(c.num_inputs) + " input bits");
  std::vector<uint8_t> val(c.gates.size());
  for (int i = 0; i < c.num_inputs; ++i) val[i] = x[i] ? 1 : 0;
  for (int i = c.num_inputs; i < c.num_gates_total(); ++i) {
    const Gate& g = c.gates[i];
    uint8_t a = val[g.args[0]];
    uint8_t b = g.args.size() > 1 ? val[g.args[1]] : 0;
    val[i] = apply_gate(g.kind, a, b);
  }
  return val[c.output];
}

int evaluate(const LayeredCircuit& c, const std::vector<uint8_t>& x) {
  if (static_cast<int>(x.size()) != c.num_inputs)
    fail("LengthMismatch", "expected " + std::to_string(c.num_inputs) + " input bits");
  std::vector<uint8_t> prev(x.begin(), x.end());
  for (const auto& layer : c.layers) {
    std::vector<uint8_t> cur(layer.size());
    for (size_t j = 0; j < layer.size(); ++j) {
      const LayeredGate& g = layer[j];
      uint8_t a = prev[g.args[0]];
      uint8_t b = g.args.size() > 1 ? prev[g.args[1]] : 0;
      cur[j] = apply_gate(g.kind, a, b);
    }
    prev = std::move(cur);
  }
  return prev[c.output];
}

int longest_path_to_output(const Circuit& c) {
  std::vector<int> longest(c.gates.size(), 0);
  for (int i = c.num_inputs; i < c.num_gates_total(); ++i) {
    for (int a : c.gates[i].args) longest[i] = std::max(longest[i], longest[a] + 1);
  }
  return longest[c.output];
}

}  // namespace sma
