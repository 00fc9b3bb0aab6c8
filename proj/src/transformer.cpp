#include "sma/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include <json.hpp>

namespace sma {

using nlohmann::json;

std::vector<int> bin_encode(long i, int bits) {
  if (i < 0 || (bits < 63 && i >= (1L << bits))) fail("Overflow", "index does not fit in " + std::to_string(bits) + " bits");
  std::vector<int> out(bits, 0);
  for (int k = bits - 1; k >= 0; --k) {
    out[k] = static_cast<int>(i & 1);
    i >>= 1;
  }
  return out;
}

long bin_decode(const std::vector<int>& bits) {
  long v = 0;
  for (int b : bits) v = (v << 1) | (b != 0 ? 1 : 0);
  return v;
}

AttentionParams AttentionParams::identity(int d) {
  AttentionParams p;
  p.d_k = 1;
  p.Wq = SpMat(1, d);
  p.Wk = SpMat(1, d);
  p.Wv = SpMat(d, d);
  p.bq = Vec<Rational>(1, Rational(0));
  p.bk = Vec<Rational>(1, Rational(0));
  p.bv = Vec<Rational>(d, Rational(0));
  p.k0 = Vec<Rational>(1, Rational(0));
  p.v0 = Vec<Rational>(d, Rational(0));
  return p;
}

namespace {

template <typename T>
T dot(const Vec<T>& a, const Vec<T>& b) {
  T s(0);
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
Vec<T> vcast(const Vec<Rational>& v) {
  Vec<T> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = scalar_cast<T>(v[i]);
  return out;
}

template <typename T>
Vec<T> affine(const SpMat& W, const Vec<Rational>& b, const Vec<T>& x) {
  Vec<T> y = sp_matvec<T>(W, x);
  for (size_t i = 0; i < y.size(); ++i) y[i] += scalar_cast<T>(b[i]);
  return y;
}

// Argmax-set averaging over the null candidate (index -1) and the cached
// keys/values. Updates gap with max - runner-up when a strictly smaller
// score exists.
template <typename T>
Vec<T> attend_core(const Vec<T>& h, const Vec<T>& q, const Vec<T>& k0, const Vec<T>& v0,
                   const std::vector<Vec<T>>& keys, const std::vector<Vec<T>>& vals,
                   std::optional<double>* gap) {
  std::vector<T> scores;
  scores.reserve(keys.size() + 1);
  scores.push_back(dot(q, k0));
  for (const Vec<T>& k : keys) scores.push_back(dot(q, k));
  T mx = scores[0];
  for (const T& s : scores) mx = std::max(mx, s);

  bool has_runner = false;
  T runner(0);
  std::vector<size_t> J;
  for (size_t t = 0; t < scores.size(); ++t) {
    bool in_max;
    if constexpr (std::is_same_v<T, double>)
      in_max = scores[t] >= mx - 1e-6;
    else
      in_max = scores[t] == mx;
    if (in_max) {
      J.push_back(t);
    } else if (!has_runner || scores[t] > runner) {
      runner = scores[t];
      has_runner = true;
    }
  }
  if (gap && has_runner) {
    double g = to_double_generic(mx) - to_double_generic(runner);
    if (!gap->has_value() || g < **gap) *gap = g;
  }
  Vec<T> out(h);
  T inv = T(1) / T(static_cast<int>(J.size()));
  for (size_t t : J) {
    const Vec<T>& v = t == 0 ? v0 : vals[t - 1];
    for (size_t i = 0; i < out.size(); ++i) out[i] += v[i] * inv;
  }
  return out;
}

}  // namespace

template <typename T>
Vec<T> hard_attend(const AttentionParams& p, const Vec<T>& h, const std::vector<Vec<T>>& H,
                   std::optional<double>* gap) {
  Vec<T> q = affine(p.Wq, p.bq, h);
  std::vector<Vec<T>> keys, vals;
  keys.reserve(H.size());
  vals.reserve(H.size());
  for (const Vec<T>& ht : H) {
    keys.push_back(affine(p.Wk, p.bk, ht));
    vals.push_back(affine(p.Wv, p.bv, ht));
  }
  return attend_core(h, q, vcast<T>(p.k0), vcast<T>(p.v0), keys, vals, gap);
}

template Vec<Rational> hard_attend<Rational>(const AttentionParams&, const Vec<Rational>&,
                                             const std::vector<Vec<Rational>>&,
                                             std::optional<double>*);
template Vec<double> hard_attend<double>(const AttentionParams&, const Vec<double>&,
                                         const std::vector<Vec<double>>&,
                                         std::optional<double>*);

template <typename T>
Vec<T> encode_symbol(const TransformerModel& m, int sym, long position) {
  if (sym < 0 || sym >= m.E.cols) fail("UnknownSymbol", "symbol index out of range");
  Vec<T> h(m.d, T(0));
  for (int r = 0; r < m.E.rows; ++r)
    for (const auto& [c, v] : m.E.row[r])
      if (c == sym) h[r] += scalar_cast<T>(v);
  if (m.enc_pos.bits > 0) {
    std::vector<int> bits = bin_encode(position, m.enc_pos.bits);
    for (int k = 0; k < m.enc_pos.bits; ++k) h[m.enc_pos.offset + k] += T(bits[k]);
  }
  return h;
}

template Vec<Rational> encode_symbol<Rational>(const TransformerModel&, int, long);
template Vec<double> encode_symbol<double>(const TransformerModel&, int, long);

template <typename T>
T decode(const TransformerModel& m, const std::vector<int>& input, DecodeTrace<T>* trace) {
  if (m.T_prime < 1) fail("InvalidSteps", "decoder step count must be >= 1");
  int L = m.num_layers();
  // Encoder pass: pure embedding, once.
  std::vector<Vec<T>> enc;
  for (size_t t = 0; t < input.size(); ++t)
    enc.push_back(encode_symbol<T>(m, input[t], static_cast<long>(t) + 1));
  // Per-layer cached encoder keys/values.
  std::vector<std::vector<Vec<T>>> enc_keys(L), enc_vals(L);
  for (int j = 0; j < L; ++j)
    for (const Vec<T>& e : enc) {
      enc_keys[j].push_back(affine(m.layers[j].enc_attn.Wk, m.layers[j].enc_attn.bk, e));
      enc_vals[j].push_back(affine(m.layers[j].enc_attn.Wv, m.layers[j].enc_attn.bv, e));
    }
  // Per-layer decoder histories (keys/values of the layer inputs).
  std::vector<std::vector<Vec<T>>> dec_keys(L), dec_vals(L);

  Vec<T> o = vcast<T>(m.h0);
  std::optional<double> gap;
  for (long i = 1; i <= m.T_prime; ++i) {
    Vec<T> h = o;
    if (m.dec_pos.bits > 0) {
      std::vector<int> bits = bin_encode(i, m.dec_pos.bits);
      for (int k = 0; k < m.dec_pos.bits; ++k) h[m.dec_pos.offset + k] += T(bits[k]);
    }
    if (trace) trace->states.emplace_back().push_back(h);
    for (int j = 0; j < L; ++j) {
      const TransformerLayer& lay = m.layers[j];
      dec_keys[j].push_back(affine(lay.dec_attn.Wk, lay.dec_attn.bk, h));
      dec_vals[j].push_back(affine(lay.dec_attn.Wv, lay.dec_attn.bv, h));
      Vec<T> q = affine(lay.dec_attn.Wq, lay.dec_attn.bq, h);
      h = attend_core(h, q, vcast<T>(lay.dec_attn.k0), vcast<T>(lay.dec_attn.v0),
                      dec_keys[j], dec_vals[j], &gap);
      q = affine(lay.enc_attn.Wq, lay.enc_attn.bq, h);
      h = attend_core(h, q, vcast<T>(lay.enc_attn.k0), vcast<T>(lay.enc_attn.v0),
                      enc_keys[j], enc_vals[j], &gap);
      for (const FFLayer& f : lay.ff) {
        Vec<T> y = affine(f.W, f.b, h);
        for (T& v : y) v = relu(v);
        h = std::move(y);
      }
      if (trace) trace->states.back().push_back(h);
    }
    o = std::move(h);
  }
  if (trace) trace->min_gap = gap;
  return dot(o, vcast<T>(m.theta_cls));
}

template Rational decode<Rational>(const TransformerModel&, const std::vector<int>&,
                                   DecodeTrace<Rational>*);
template double decode<double>(const TransformerModel&, const std::vector<int>&,
                               DecodeTrace<double>*);

namespace {

long attn_params(const AttentionParams& p, int d) {
  return 2L * p.d_k * d + 2L * p.d_k + static_cast<long>(d) * d + d + p.d_k + d;
}

}  // namespace

long num_params(const TransformerModel& m, bool with_corrections) {
  long n = 0;
  for (const TransformerLayer& lay : m.layers) {
    n += attn_params(lay.dec_attn, m.d) + attn_params(lay.enc_attn, m.d);
    for (const FFLayer& f : lay.ff) {
      if (f.correction && !with_corrections) continue;
      n += static_cast<long>(f.W.rows) * f.W.cols + f.W.rows;
    }
  }
  n += static_cast<long>(m.E.rows) * m.E.cols;  // embeddings
  n += m.d;                                     // h0
  n += m.d;                                     // theta_cls
  return n;
}

namespace {

// Dense double mirror of the model with a flat perturbation applied once per
// shared parameter; used only by the perturbed decode.
struct DAttn {
  int d_k;
  Mat<double> Wq, Wk, Wv;
  Vec<double> bq, bk, bv, k0, v0;
};
struct DFF {
  Mat<double> W;
  Vec<double> b;
};
struct DModel {
  int d;
  Mat<double> E;
  PosEncoding enc_pos, dec_pos;
  Vec<double> h0, cls;
  long T_prime;
  struct DLayer {
    DAttn dec, enc;
    std::vector<DFF> ff;
  };
  std::vector<DLayer> layers;
};

struct DeltaWalker {
  const Vec<double>& delta;
  size_t at = 0;
  double next() { return delta[at++]; }
};

Mat<double> densify(const SpMat& s, DeltaWalker& w) {
  Mat<double> m(s.rows, s.cols);
  for (int r = 0; r < s.rows; ++r)
    for (const auto& [c, v] : s.row[r]) m.at(r, c) = to_double(v);
  for (double& v : m.data) v += w.next();
  return m;
}

Vec<double> densify(const Vec<Rational>& b, DeltaWalker& w) {
  Vec<double> out(b.size());
  for (size_t i = 0; i < b.size(); ++i) out[i] = to_double(b[i]) + w.next();
  return out;
}

DAttn densify(const AttentionParams& p, DeltaWalker& w) {
  DAttn a;
  a.d_k = p.d_k;
  a.Wq = densify(p.Wq, w);
  a.bq = densify(p.bq, w);
  a.Wk = densify(p.Wk, w);
  a.bk = densify(p.bk, w);
  a.Wv = densify(p.Wv, w);
  a.bv = densify(p.bv, w);
  a.k0 = densify(p.k0, w);
  a.v0 = densify(p.v0, w);
  return a;
}

Vec<double> daffine(const Mat<double>& W, const Vec<double>& b, const Vec<double>& x) {
  Vec<double> y = matvec(W, x);
  for (size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return y;
}

}  // namespace

double decode_param_perturbed(const TransformerModel& m, const std::vector<int>& input,
                              const Vec<double>& delta) {
  if (delta.size() != static_cast<size_t>(num_params(m, true)))
    fail("DimMismatch", "perturbation length does not match the shared parameter count");
  if (m.T_prime < 1) fail("InvalidSteps", "decoder step count must be >= 1");
  DModel dm;
  dm.d = m.d;
  dm.enc_pos = m.enc_pos;
  dm.dec_pos = m.dec_pos;
  dm.T_prime = m.T_prime;
  DeltaWalker w{delta};
  for (const TransformerLayer& lay : m.layers) {
    DModel::DLayer dl;
    dl.dec = densify(lay.dec_attn, w);
    dl.enc = densify(lay.enc_attn, w);
    dl.ff.resize(lay.ff.size());
    for (size_t f = 0; f < lay.ff.size(); ++f)
      if (!lay.ff[f].correction) {
        dl.ff[f].W = densify(lay.ff[f].W, w);
        dl.ff[f].b = densify(lay.ff[f].b, w);
      }
    dm.layers.push_back(std::move(dl));
  }
  dm.E = densify(m.E, w);
  dm.h0 = densify(m.h0, w);
  dm.cls = densify(m.theta_cls, w);
  for (size_t j = 0; j < m.layers.size(); ++j)
    for (size_t f = 0; f < m.layers[j].ff.size(); ++f)
      if (m.layers[j].ff[f].correction) {
        dm.layers[j].ff[f].W = densify(m.layers[j].ff[f].W, w);
        dm.layers[j].ff[f].b = densify(m.layers[j].ff[f].b, w);
      }

  int L = static_cast<int>(dm.layers.size());
  std::vector<Vec<double>> enc;
  for (size_t t = 0; t < input.size(); ++t) {
    if (input[t] < 0 || input[t] >= dm.E.cols) fail("UnknownSymbol", "symbol index out of range");
    Vec<double> h(dm.d, 0.0);
    for (int r = 0; r < dm.E.rows; ++r) h[r] = dm.E.at(r, input[t]);
    if (dm.enc_pos.bits > 0) {
      std::vector<int> bits = bin_encode(static_cast<long>(t) + 1, dm.enc_pos.bits);
      for (int k = 0; k < dm.enc_pos.bits; ++k) h[dm.enc_pos.offset + k] += bits[k];
    }
    enc.push_back(std::move(h));
  }
  std::vector<std::vector<Vec<double>>> ek(L), ev(L), dk(L), dv(L);
  for (int j = 0; j < L; ++j)
    for (const Vec<double>& e : enc) {
      ek[j].push_back(daffine(dm.layers[j].enc.Wk, dm.layers[j].enc.bk, e));
      ev[j].push_back(daffine(dm.layers[j].enc.Wv, dm.layers[j].enc.bv, e));
    }
  Vec<double> o = dm.h0;
  for (long i = 1; i <= dm.T_prime; ++i) {
    Vec<double> h = o;
    if (dm.dec_pos.bits > 0) {
      std::vector<int> bits = bin_encode(i, dm.dec_pos.bits);
      for (int k = 0; k < dm.dec_pos.bits; ++k) h[dm.dec_pos.offset + k] += bits[k];
    }
    for (int j = 0; j < L; ++j) {
      const DModel::DLayer& dl = dm.layers[j];
      dk[j].push_back(daffine(dl.dec.Wk, dl.dec.bk, h));
      dv[j].push_back(daffine(dl.dec.Wv, dl.dec.bv, h));
      Vec<double> q = daffine(dl.dec.Wq, dl.dec.bq, h);
      h = attend_core(h, q, dl.dec.k0, dl.dec.v0, dk[j], dv[j], nullptr);
      q = daffine(dl.enc.Wq, dl.enc.bq, h);
      h = attend_core(h, q, dl.enc.k0, dl.enc.v0, ek[j], ev[j], nullptr);
      for (const DFF& f : dl.ff) {
        Vec<double> y = daffine(f.W, f.b, h);
        for (double& v : y) v = std::max(v, 0.0);
        h = std::move(y);
      }
    }
    o = std::move(h);
  }
  double pred = 0;
  for (int r = 0; r < dm.d; ++r) pred += o[r] * dm.cls[r];
  return pred;
}

namespace {

json num_out(const Rational& q, NumericMode mode) {
  if (mode == NumericMode::kRational) return rational_to_string(q);
  return to_double(q);
}

Rational num_in(const json& j) {
  if (j.is_string()) return rational_from_string(j.get<std::string>());
  if (j.is_number()) return rational_from_double(j.get<double>());
  fail("SchemaError", "expected number or rational string");
}

json spmat_out(const SpMat& m, NumericMode mode) {
  json j;
  j["rows"] = m.rows;
  j["cols"] = m.cols;
  json e = json::array();
  for (int r = 0; r < m.rows; ++r)
    for (const auto& [c, v] : m.row[r]) e.push_back({r, c, num_out(v, mode)});
  j["entries"] = std::move(e);
  return j;
}

SpMat spmat_in(const json& j) {
  SpMat m(j.at("rows").get<int>(), j.at("cols").get<int>());
  for (const json& e : j.at("entries")) {
    int r = e.at(0).get<int>(), c = e.at(1).get<int>();
    if (r < 0 || r >= m.rows || c < 0 || c >= m.cols)
      fail("SchemaError", "sparse entry out of range");
    m.set(r, c, num_in(e.at(2)));
  }
  return m;
}

json vec_out(const Vec<Rational>& v, NumericMode mode) {
  json j = json::array();
  for (const Rational& x : v) j.push_back(num_out(x, mode));
  return j;
}

Vec<Rational> vec_in(const json& j) {
  Vec<Rational> v;
  for (const json& e : j) v.push_back(num_in(e));
  return v;
}

json attn_out(const AttentionParams& p, NumericMode mode) {
  json j;
  j["d_k"] = p.d_k;
  j["Wq"] = spmat_out(p.Wq, mode);
  j["bq"] = vec_out(p.bq, mode);
  j["Wk"] = spmat_out(p.Wk, mode);
  j["bk"] = vec_out(p.bk, mode);
  j["Wv"] = spmat_out(p.Wv, mode);
  j["bv"] = vec_out(p.bv, mode);
  j["k0"] = vec_out(p.k0, mode);
  j["v0"] = vec_out(p.v0, mode);
  return j;
}

AttentionParams attn_in(const json& j) {
  AttentionParams p;
  p.d_k = j.at("d_k").get<int>();
  p.Wq = spmat_in(j.at("Wq"));
  p.bq = vec_in(j.at("bq"));
  p.Wk = spmat_in(j.at("Wk"));
  p.bk = vec_in(j.at("bk"));
  p.Wv = spmat_in(j.at("Wv"));
  p.bv = vec_in(j.at("bv"));
  p.k0 = vec_in(j.at("k0"));
  p.v0 = vec_in(j.at("v0"));
  return p;
}

}  // namespace

std::string transformer_to_json(const TransformerModel& m, NumericMode mode) {
  json j;
  j["d"] = m.d;
  j["E"] = spmat_out(m.E, mode);
  j["enc_pos"] = {{"offset", m.enc_pos.offset}, {"bits", m.enc_pos.bits}};
  j["dec_pos"] = {{"offset", m.dec_pos.offset}, {"bits", m.dec_pos.bits}};
  j["h0"] = vec_out(m.h0, mode);
  j["theta_cls"] = vec_out(m.theta_cls, mode);
  j["T_prime"] = m.T_prime;
  json layers = json::array();
  for (const TransformerLayer& lay : m.layers) {
    json l;
    l["dec_attn"] = attn_out(lay.dec_attn, mode);
    l["enc_attn"] = attn_out(lay.enc_attn, mode);
    json ff = json::array();
    for (const FFLayer& f : lay.ff) {
      json e;
      e["W"] = spmat_out(f.W, mode);
      e["b"] = vec_out(f.b, mode);
      e["correction"] = f.correction;
      ff.push_back(std::move(e));
    }
    l["ff"] = std::move(ff);
    l["provenance"] = lay.tag;
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  j["meta"] = m.meta.empty() ? json::object() : json::parse(m.meta);
  return j.dump(2);
}

TransformerModel transformer_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail("SchemaError", std::string("bad JSON: ") + e.what());
  }
  TransformerModel m;
  try {
    m.d = j.at("d").get<int>();
    m.E = spmat_in(j.at("E"));
    m.enc_pos = {j.at("enc_pos").at("offset").get<int>(), j.at("enc_pos").at("bits").get<int>()};
    m.dec_pos = {j.at("dec_pos").at("offset").get<int>(), j.at("dec_pos").at("bits").get<int>()};
    m.h0 = vec_in(j.at("h0"));
    m.theta_cls = vec_in(j.at("theta_cls"));
    m.T_prime = j.at("T_prime").get<long>();
    for (const json& l : j.at("layers")) {
      TransformerLayer lay;
      lay.dec_attn = attn_in(l.at("dec_attn"));
      lay.enc_attn = attn_in(l.at("enc_attn"));
      for (const json& e : l.at("ff")) {
        FFLayer f;
        f.W = spmat_in(e.at("W"));
        f.b = vec_in(e.at("b"));
        f.correction = e.value("correction", false);
        lay.ff.push_back(std::move(f));
      }
      lay.tag = l.value("provenance", "");
      m.layers.push_back(std::move(lay));
    }
    m.meta = j.value("meta", json::object()).dump();
  } catch (const json::exception& e) {
    fail("SchemaError", std::string("bad transformer description: ") + e.what());
  }
  return m;
}

}  // namespace sma
