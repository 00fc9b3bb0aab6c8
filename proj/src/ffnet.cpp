#include "sma/ffnet.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace sma {

using nlohmann::json;

void Net::check_shapes() const {
  int d = input_dim;
  for (size_t i = 0; i < sublayers.size(); ++i) {
    const Sublayer& s = sublayers[i];
    if (s.kind == SublayerKind::kRound) {
      if (s.round_dim <= 0 || s.round_active < 0 || s.round_active > s.round_dim)
        fail("BadShape", "round sublayer " + std::to_string(i) + " has bad dims");
    } else {
      if (s.W.rows <= 0 || s.W.cols <= 0 || static_cast<int>(s.b.size()) != s.W.rows)
        fail("BadShape", "sublayer " + std::to_string(i) + " has inconsistent W/b");
    }
    if (s.in_dim() != d)
      fail("BadShape", "sublayer " + std::to_string(i) + " expects input dim " +
                           std::to_string(s.in_dim()) + ", got " + std::to_string(d));
    d = s.out_dim();
  }
}

Net materialize_rounds(const Net& net) {
  Net out;
  out.input_dim = net.input_dim;
  out.meta = net.meta;
  const Rational third(1, 3), two_thirds(2, 3), three(3);
  for (const Sublayer& s : net.sublayers) {
    if (s.kind != SublayerKind::kRound) {
      out.sublayers.push_back(s);
      continue;
    }
    int d = s.round_dim, k = s.round_active;
    // First: y = relu([z - 1/3; z - 2/3]) on the active block.
    Sublayer a;
    a.kind = SublayerKind::kLinReLU;
    a.correction = true;
    a.W = Mat<Rational>(2 * d, d);
    a.b = Vec<Rational>(2 * d, Rational(0));
    for (int i = 0; i < k; ++i) {
      a.W.at(i, i) = 1;
      a.b[i] = -third;
      a.W.at(d + i, i) = 1;
      a.b[d + i] = -two_thirds;
    }
    // Second: round(z) = 3*y_i - 3*y_{d+i}, then relu (result is in [0,1]).
    Sublayer b;
    b.kind = SublayerKind::kLinReLU;
    b.correction = true;
    b.W = Mat<Rational>(d, 2 * d);
    b.b = Vec<Rational>(d, Rational(0));
    for (int i = 0; i < k; ++i) {
      b.W.at(i, i) = three;
      b.W.at(i, d + i) = -three;
    }
    out.sublayers.push_back(std::move(a));
    out.sublayers.push_back(std::move(b));
  }
  return out;
}

template <typename T>
Vec<T> forward(const Net& net, const Vec<T>& x, std::vector<Vec<T>>* record) {
  if (static_cast<int>(x.size()) != net.input_dim)
    fail("DimMismatch", "input has wrong dimension");
  Net m = materialize_rounds(net);
  Vec<T> h = x;
  for (const Sublayer& s : m.sublayers) {
    Vec<T> y(s.W.rows, T(0));
    for (int r = 0; r < s.W.rows; ++r) {
      T acc = scalar_cast<T>(s.b[r]);
      for (int c = 0; c < s.W.cols; ++c) {
        const Rational& w = s.W.at(r, c);
        if (w != 0) acc += scalar_cast<T>(w) * h[c];
      }
      y[r] = s.kind == SublayerKind::kLinReLU ? relu(acc) : acc;
    }
    h = std::move(y);
    if (record) record->push_back(h);
  }
  return h;
}

template Vec<Rational> forward<Rational>(const Net&, const Vec<Rational>&,
                                         std::vector<Vec<Rational>>*);
template Vec<double> forward<double>(const Net&, const Vec<double>&,
                                     std::vector<Vec<double>>*);

long num_params(const Net& net, bool with_corrections) {
  Net m = materialize_rounds(net);
  long n = 0;
  for (const Sublayer& s : m.sublayers) {
    if (s.correction && !with_corrections) continue;
    n += static_cast<long>(s.W.rows) * s.W.cols + s.W.rows;
  }
  return n;
}

Vec<Rational> flatten(const Net& net, bool with_corrections) {
  Net m = materialize_rounds(net);
  Vec<Rational> theta;
  for (int pass = 0; pass < 2; ++pass) {
    for (const Sublayer& s : m.sublayers) {
      if (s.correction != (pass == 1)) continue;
      if (pass == 1 && !with_corrections) continue;
      theta.insert(theta.end(), s.W.data.begin(), s.W.data.end());
      theta.insert(theta.end(), s.b.begin(), s.b.end());
    }
  }
  return theta;
}

void unflatten(Net& net, const Vec<Rational>& theta, bool with_corrections) {
  if (with_corrections)
    for (const Sublayer& s : net.sublayers)
      if (s.kind == SublayerKind::kRound)
        fail("RoundNotMaterialized",
             "cannot write correction params into an unexpanded round sublayer");
  if (theta.size() != static_cast<size_t>(num_params(net, with_corrections)))
    fail("DimMismatch", "flattened parameter vector has wrong length");
  size_t at = 0;
  for (int pass = 0; pass < 2; ++pass) {
    for (Sublayer& s : net.sublayers) {
      if (s.kind == SublayerKind::kRound) continue;
      if (s.correction != (pass == 1)) continue;
      if (pass == 1 && !with_corrections) continue;
      std::copy(theta.begin() + at, theta.begin() + at + s.W.data.size(), s.W.data.begin());
      at += s.W.data.size();
      std::copy(theta.begin() + at, theta.begin() + at + s.b.size(), s.b.begin());
      at += s.b.size();
    }
  }
}

Rational l1_norm(const Net& net) {
  Rational n(0);
  for (const Rational& v : flatten(net, false)) n += abs(v);
  return n;
}

Vec<double> forward_param_perturbed(const Net& net, const Vec<double>& x,
                                    const Vec<double>& delta) {
  if (delta.size() != static_cast<size_t>(num_params(net, true)))
    fail("DimMismatch", "parameter perturbation has wrong length");
  Net m = materialize_rounds(net);
  // Offsets: trainable sublayers first (in order), then corrections.
  std::vector<long> offset(m.sublayers.size(), 0);
  long at = 0;
  for (int pass = 0; pass < 2; ++pass) {
    for (size_t i = 0; i < m.sublayers.size(); ++i) {
      const Sublayer& s = m.sublayers[i];
      if (s.correction != (pass == 1)) continue;
      offset[i] = at;
      at += static_cast<long>(s.W.rows) * s.W.cols + s.W.rows;
    }
  }
  Vec<double> h(x);
  for (size_t i = 0; i < m.sublayers.size(); ++i) {
    const Sublayer& s = m.sublayers[i];
    const double* dW = delta.data() + offset[i];
    const double* db = dW + static_cast<long>(s.W.rows) * s.W.cols;
    Vec<double> y(s.W.rows, 0.0);
    for (int r = 0; r < s.W.rows; ++r) {
      double acc = to_double(s.b[r]) + db[r];
      for (int c = 0; c < s.W.cols; ++c) {
        double w = to_double(s.W.at(r, c)) + dW[static_cast<long>(r) * s.W.cols + c];
        acc += w * h[c];
      }
      y[r] = s.kind == SublayerKind::kLinReLU ? std::max(acc, 0.0) : acc;
    }
    h = std::move(y);
  }
  return h;
}

Vec<double> forward_layer_perturbed(const Net& net, const Vec<double>& x,
                                    const std::vector<Vec<double>>& delta) {
  Net m = materialize_rounds(net);
  if (delta.size() != m.sublayers.size())
    fail("DimMismatch", "need one perturbation slice per materialized sublayer");
  Vec<double> h(x);
  double maxnorm = std::max(l2_norm_double(h), 1.0);
  for (size_t i = 0; i < m.sublayers.size(); ++i) {
    const Sublayer& s = m.sublayers[i];
    if (delta[i].size() != static_cast<size_t>(s.out_dim()))
      fail("DimMismatch", "perturbation slice " + std::to_string(i) + " has wrong dim");
    Vec<double> y(s.W.rows, 0.0);
    for (int r = 0; r < s.W.rows; ++r) {
      double acc = to_double(s.b[r]);
      for (int c = 0; c < s.W.cols; ++c) acc += to_double(s.W.at(r, c)) * h[c];
      if (s.kind == SublayerKind::kLinReLU) acc = std::max(acc, 0.0);
      y[r] = acc + delta[i][r] * maxnorm;
    }
    h = std::move(y);
    maxnorm = std::max(maxnorm, l2_norm_double(h));
  }
  return h;
}

namespace {

json number_out(const Rational& q, NumericMode mode) {
  if (mode == NumericMode::kRational) return rational_to_string(q);
  return to_double(q);
}

Rational number_in(const json& j) {
  if (j.is_string()) return rational_from_string(j.get<std::string>());
  if (j.is_number()) return rational_from_double(j.get<double>());
  fail("SchemaError", "expected number or rational string");
}

}  // namespace

std::string net_to_json(const Net& net, NumericMode mode) {
  json j;
  j["input_dim"] = net.input_dim;
  json subs = json::array();
  for (const Sublayer& s : net.sublayers) {
    json e;
    if (s.kind == SublayerKind::kRound) {
      e["kind"] = "round";
      e["dim"] = s.round_dim;
      e["active"] = s.round_active;
    } else {
      e["kind"] = s.kind == SublayerKind::kLinReLU ? "linrelu" : "lin";
      json W = json::array();
      for (int r = 0; r < s.W.rows; ++r) {
        json row = json::array();
        for (int c = 0; c < s.W.cols; ++c) row.push_back(number_out(s.W.at(r, c), mode));
        W.push_back(std::move(row));
      }
      e["W"] = std::move(W);
      json b = json::array();
      for (const Rational& v : s.b) b.push_back(number_out(v, mode));
      e["b"] = std::move(b);
      e["correction"] = s.correction;
    }
    subs.push_back(std::move(e));
  }
  j["sublayers"] = std::move(subs);
  j["meta"] = net.meta.empty() ? json::object() : json::parse(net.meta);
  return j.dump(2);
}

Net net_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail("SchemaError", std::string("bad JSON: ") + e.what());
  }
  Net net;
  try {
    net.input_dim = j.at("input_dim").get<int>();
    for (const json& e : j.at("sublayers")) {
      Sublayer s;
      std::string kind = e.at("kind").get<std::string>();
      if (kind == "round") {
        s.kind = SublayerKind::kRound;
        s.correction = true;
        s.round_dim = e.at("dim").get<int>();
        s.round_active = e.at("active").get<int>();
      } else {
        if (kind == "linrelu") s.kind = SublayerKind::kLinReLU;
        else if (kind == "lin") s.kind = SublayerKind::kLin;
        else fail("SchemaError", "unknown sublayer kind '" + kind + "'");
        const json& W = e.at("W");
        int rows = static_cast<int>(W.size());
        if (rows == 0) fail("SchemaError", "empty weight matrix");
        int cols = static_cast<int>(W.at(0).size());
        s.W = Mat<Rational>(rows, cols);
        for (int r = 0; r < rows; ++r) {
          if (static_cast<int>(W.at(r).size()) != cols)
            fail("SchemaError", "ragged weight matrix");
          for (int c = 0; c < cols; ++c) s.W.at(r, c) = number_in(W.at(r).at(c));
        }
        for (const json& v : e.at("b")) s.b.push_back(number_in(v));
        s.correction = e.value("correction", false);
      }
      net.sublayers.push_back(std::move(s));
    }
    net.meta = j.value("meta", json::object()).dump();
  } catch (const json::exception& e) {
    fail("SchemaError", std::string("bad net description: ") + e.what());
  }
  net.check_shapes();
  return net;
}

}  // namespace sma
