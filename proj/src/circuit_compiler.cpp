#include "sma/circuit_compiler.hpp"

#include <json.hpp>

namespace sma {

std::pair<Sublayer, Sublayer> gate_block(const std::vector<LayeredGate>& gates,
                                         int in_width, int width) {
  int n = static_cast<int>(gates.size());
  if (n > width) fail("WidthTooSmall", "layer has more gates than the target width");
  Sublayer a;  // preactivations, one row per gate
  a.kind = SublayerKind::kLinReLU;
  a.W = Mat<Rational>(width, in_width);
  a.b = Vec<Rational>(width, Rational(0));
  Sublayer b;  // diagonal fixup so each gate outputs its truth value
  b.kind = SublayerKind::kLinReLU;
  b.W = Mat<Rational>(width, width);
  b.b = Vec<Rational>(width, Rational(0));
  for (int i = 0; i < n; ++i) {
    const LayeredGate& g = gates[i];
    for (int arg : g.args)
      if (arg < 0 || arg >= in_width) fail("BadArg", "gate argument out of range");
    switch (g.kind) {
      case GateKind::kAnd:  // phi(x1 + x2 - 1)
        a.W.at(i, g.args[0]) += 1;
        a.W.at(i, g.args[1]) += 1;
        a.b[i] = -1;
        b.W.at(i, i) = 1;
        break;
      case GateKind::kOr:  // 1 - phi(1 - x1 - x2)
        a.W.at(i, g.args[0]) += -1;
        a.W.at(i, g.args[1]) += -1;
        a.b[i] = 1;
        b.W.at(i, i) = -1;
        b.b[i] = 1;
        break;
      case GateKind::kNot:  // phi(1 - z)
        a.W.at(i, g.args[0]) = -1;
        a.b[i] = 1;
        b.W.at(i, i) = 1;
        break;
      case GateKind::kId:  // phi(z)
        a.W.at(i, g.args[0]) = 1;
        b.W.at(i, i) = 1;
        break;
      case GateKind::kInput:
        fail("BadArg", "input pseudo-gate inside a layer");
    }
  }
  return {std::move(a), std::move(b)};
}

Sublayer round_gadget(int width, int active) {
  if (active < 0 || active > width) fail("BadArg", "active coordinate count out of range");
  Sublayer s;
  s.kind = SublayerKind::kRound;
  s.correction = true;
  s.round_dim = width;
  s.round_active = active;
  return s;
}

Net compile(const LayeredCircuit& c, const CompileOptions& opts) {
  int m = c.width();
  int width = opts.target_width == 0 ? m : opts.target_width;
  if (width < m)
    fail("WidthTooSmall", "target width " + std::to_string(width) +
                              " below circuit width " + std::to_string(m));
  int natural_depth = static_cast<int>(c.layers.size());
  int depth = opts.target_depth == 0 ? natural_depth : opts.target_depth;
  if (depth < natural_depth)
    fail("WidthTooSmall", "target depth " + std::to_string(depth) +
                              " below circuit depth " + std::to_string(natural_depth));

  Net net;
  net.input_dim = c.num_inputs;
  int in_width = c.num_inputs;
  int last_n = 0;
  for (size_t l = 0; l < c.layers.size(); ++l) {
    auto [a, b] = gate_block(c.layers[l], in_width, width);
    net.sublayers.push_back(std::move(a));
    net.sublayers.push_back(std::move(b));
    last_n = static_cast<int>(c.layers[l].size());
    in_width = width;
    bool last_block = (l + 1 == c.layers.size()) && depth == natural_depth;
    if (opts.insert_corrections && !last_block)
      net.sublayers.push_back(round_gadget(width, last_n));
  }
  // Depth padding: identity blocks on the live coordinates.
  for (int l = natural_depth; l < depth; ++l) {
    std::vector<LayeredGate> ids(last_n);
    for (int i = 0; i < last_n; ++i) ids[i] = LayeredGate{GateKind::kId, {i}};
    auto [a, b] = gate_block(ids, in_width, width);
    net.sublayers.push_back(std::move(a));
    net.sublayers.push_back(std::move(b));
    in_width = width;
    if (opts.insert_corrections && l + 1 < depth)
      net.sublayers.push_back(round_gadget(width, last_n));
  }
  // Classifier head: 2 z_out - 1.
  Sublayer head;
  head.kind = SublayerKind::kLin;
  head.W = Mat<Rational>(1, in_width);
  head.W.at(0, c.output) = 2;
  head.b = Vec<Rational>(1, Rational(-1));
  net.sublayers.push_back(std::move(head));
  net.check_shapes();

  nlohmann::json meta;
  meta["kind"] = "circuit";
  meta["width"] = width;
  meta["gate_blocks"] = depth;
  meta["corrections"] = opts.insert_corrections;
  meta["theta_l1"] = rational_to_string(l1_norm(net));
  net.meta = meta.dump();
  return net;
}

}  // namespace sma
