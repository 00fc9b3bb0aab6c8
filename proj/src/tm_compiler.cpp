#include "sma/tm_compiler.hpp"

#include <algorithm>

#include <json.hpp>

namespace sma {

using nlohmann::json;

std::string CoordinateLayout::to_json() const {
  json j;
  j["d_pos"] = d_pos;
  j["d_tm"] = d_tm;
  auto g = [](const Group& gr) { return json{{"offset", gr.offset}, {"width", gr.width}}; };
  j["st"] = g(st);
  j["sym1"] = g(sym1);
  j["sym2"] = g(sym2);
  j["pos1"] = g(pos1);
  j["pos2"] = g(pos2);
  j["pos3"] = g(pos3);
  j["scr1"] = g(scr1);
  j["scr2"] = g(scr2);
  j["scr3"] = g(scr3);
  j["scr4"] = g(scr4);
  j["scrt"] = g(scrt);
  return j.dump();
}

CoordinateLayout make_layout(int num_states, int num_symbols, int d_pos) {
  CoordinateLayout lo;
  lo.d_pos = d_pos;
  int at = 0;
  auto place = [&](int w) {
    Group g{at, w};
    at += w;
    return g;
  };
  lo.st = place(num_states);
  lo.sym1 = place(num_symbols);
  lo.sym2 = place(num_symbols);
  lo.pos1 = place(d_pos);
  lo.pos2 = place(d_pos);
  lo.pos3 = place(d_pos);
  lo.scr1 = place(num_symbols);
  lo.scr2 = place(num_symbols);
  lo.scr3 = place(d_pos);
  lo.scr4 = place(3);
  lo.scrt = place(std::max({num_states * num_symbols, d_pos, 3}));
  lo.d_tm = at;
  return lo;
}

TMSpec augment_tm(const TMSpec& m) {
  TMSpec a = m;
  std::string pre = "@pre";
  while (std::find(a.states.begin(), a.states.end(), pre) != a.states.end()) pre += "_";
  int pre_idx = a.num_states();
  a.states.push_back(pre);
  for (int s = 0; s < a.num_symbols(); ++s)
    a.delta[{pre_idx, s}] = TMSpec::Step{m.init, a.blank, +1};
  for (int z = 0; z < m.num_states(); ++z) {
    if (!a.is_terminal(z)) continue;
    for (int s = 0; s < a.num_symbols(); ++s) a.delta[{z, s}] = TMSpec::Step{z, s, +1};
  }
  a.init = pre_idx;
  a.time_bound = m.time_bound + 1;
  return a;
}

namespace {

// Feedforward stage under construction: identity on the live coordinates,
// with rows selectively rewritten or zeroed.
struct FF1 {
  SpMat W;
  Vec<Rational> b;

  FF1(const CoordinateLayout& lo, int width) : W(width, width), b(width, Rational(0)) {
    for (int i = 0; i < lo.d_tm; ++i) W.set(i, i, 1);
  }
  void clear(int r) {
    W.row[r].clear();
    b[r] = 0;
  }
  void clear_group(const Group& g) {
    for (int i = 0; i < g.width; ++i) clear(g.offset + i);
  }
  void add(int r, int c, Rational v) { W.set(r, c, std::move(v)); }
};

FFLayer round_tail_a(const CoordinateLayout& lo, int width) {
  FFLayer f;
  f.correction = true;
  f.W = SpMat(2 * width, width);
  f.b = Vec<Rational>(2 * width, Rational(0));
  for (int i = 0; i < lo.d_tm; ++i) {
    f.W.set(i, i, 1);
    f.b[i] = Rational(-1, 3);
    f.W.set(width + i, i, 1);
    f.b[width + i] = Rational(-2, 3);
  }
  return f;
}

FFLayer round_tail_b(const CoordinateLayout& lo, int width) {
  FFLayer f;
  f.correction = true;
  f.W = SpMat(width, 2 * width);
  f.b = Vec<Rational>(width, Rational(0));
  for (int i = 0; i < lo.d_tm; ++i) {
    f.W.set(i, i, 3);
    f.W.set(i, width + i, -3);
  }
  return f;
}

TransformerLayer make_layer(const CoordinateLayout& lo, int width, const std::string& tag) {
  TransformerLayer lay;
  lay.dec_attn = AttentionParams::identity(width);
  lay.enc_attn = AttentionParams::identity(width);
  lay.tag = tag;
  FF1 id(lo, width);
  lay.ff.push_back(FFLayer{std::move(id.W), std::move(id.b), false});
  lay.ff.push_back(round_tail_a(lo, width));
  lay.ff.push_back(round_tail_b(lo, width));
  return lay;
}

void set_ff1(TransformerLayer& lay, FF1&& f) {
  lay.ff[0].W = std::move(f.W);
  lay.ff[0].b = std::move(f.b);
}

// Query rows 2*g - 1 over a group (one row per coordinate).
void map_pm_one(SpMat& W, Vec<Rational>& bias, int row0, const Group& g) {
  for (int k = 0; k < g.width; ++k) {
    W.set(row0 + k, g.offset + k, 2);
    bias[row0 + k] = -1;
  }
}

}  // namespace

std::vector<TransformerLayer> build_transition_block(const TMSpec& aug,
                                                     const CoordinateLayout& lo, int width) {
  int K = lo.st.width, A = lo.sym1.width;
  std::vector<TransformerLayer> out;

  TransformerLayer t1 = make_layer(lo, width, "transition-pair-onehot");
  {
    FF1 f(lo, width);
    f.clear_group(lo.scrt);
    for (int z = 0; z < K; ++z)
      for (int a = 0; a < A; ++a) {
        int r = lo.scrt.offset + z * A + a;
        f.add(r, lo.st.offset + z, 1);
        f.add(r, lo.sym1.offset + a, 1);
        f.b[r] = -1;
      }
    set_ff1(t1, std::move(f));
  }
  out.push_back(std::move(t1));

  TransformerLayer t2 = make_layer(lo, width, "transition-apply");
  {
    FF1 f(lo, width);
    f.clear_group(lo.st);
    f.clear_group(lo.sym1);
    f.clear_group(lo.sym2);
    f.clear_group(lo.scr4);
    f.clear_group(lo.scrt);
    for (int z = 0; z < K; ++z)
      for (int a = 0; a < A; ++a) {
        int c = lo.scrt.offset + z * A + a;
        TMSpec::Step st = aug.step(z, a);
        f.add(lo.st.offset + st.next_state, c, 1);
        f.add(lo.sym2.offset + st.write, c, 1);
        f.add(lo.scr4.offset + (st.move < 0 ? 0 : 1), c, 1);
      }
    set_ff1(t2, std::move(f));
  }
  out.push_back(std::move(t2));
  return out;
}

std::vector<TransformerLayer> build_location_block(const CoordinateLayout& lo, int width) {
  int d = lo.d_pos;
  int v1 = lo.scr4.offset, v2 = lo.scr4.offset + 1;
  std::vector<TransformerLayer> out;

  // Subtract v1: borrows in closed form, AND terms, then XOR assembly.
  TransformerLayer a1 = make_layer(lo, width, "loc-sub-borrow");
  {
    FF1 f(lo, width);
    f.clear_group(lo.scr3);
    for (int k = 0; k < d; ++k) {
      int r = lo.scr3.offset + k;
      f.add(r, v1, 1);
      for (int j = k + 1; j < d; ++j) f.add(r, lo.pos2.offset + j, -1);
    }
    set_ff1(a1, std::move(f));
  }
  out.push_back(std::move(a1));

  TransformerLayer a2 = make_layer(lo, width, "loc-sub-and");
  {
    FF1 f(lo, width);
    f.clear_group(lo.scrt);
    for (int k = 0; k < d; ++k) {
      int r = lo.scrt.offset + k;
      f.add(r, lo.pos2.offset + k, 1);
      f.add(r, lo.scr3.offset + k, 1);
      f.b[r] = -1;
    }
    set_ff1(a2, std::move(f));
  }
  out.push_back(std::move(a2));

  TransformerLayer a3 = make_layer(lo, width, "loc-sub-xor");
  {
    FF1 f(lo, width);
    f.clear_group(lo.pos3);
    for (int k = 0; k < d; ++k) {
      int r = lo.pos3.offset + k;
      f.add(r, lo.pos2.offset + k, 1);
      f.add(r, lo.scr3.offset + k, 1);
      f.add(r, lo.scrt.offset + k, -2);
    }
    f.clear_group(lo.scr3);
    f.clear_group(lo.scrt);
    f.clear(v1);
    set_ff1(a3, std::move(f));
  }
  out.push_back(std::move(a3));

  // Add v2 to the intermediate result now sitting in pos3.
  TransformerLayer b1 = make_layer(lo, width, "loc-add-carry");
  {
    FF1 f(lo, width);
    f.clear_group(lo.scr3);
    for (int k = 0; k < d; ++k) {
      int r = lo.scr3.offset + k;
      f.add(r, v2, 1);
      for (int j = k + 1; j < d; ++j) f.add(r, lo.pos3.offset + j, 1);
      f.b[r] = -(d - 1 - k);
    }
    set_ff1(b1, std::move(f));
  }
  out.push_back(std::move(b1));

  TransformerLayer b2 = make_layer(lo, width, "loc-add-and");
  {
    FF1 f(lo, width);
    f.clear_group(lo.scrt);
    for (int k = 0; k < d; ++k) {
      int r = lo.scrt.offset + k;
      f.add(r, lo.pos3.offset + k, 1);
      f.add(r, lo.scr3.offset + k, 1);
      f.b[r] = -1;
    }
    set_ff1(b2, std::move(f));
  }
  out.push_back(std::move(b2));

  TransformerLayer b3 = make_layer(lo, width, "loc-add-xor");
  {
    FF1 f(lo, width);
    f.clear_group(lo.pos3);
    for (int k = 0; k < d; ++k) {
      int r = lo.pos3.offset + k;
      f.add(r, lo.pos3.offset + k, 1);
      f.add(r, lo.scr3.offset + k, 1);
      f.add(r, lo.scrt.offset + k, -2);
    }
    f.clear_group(lo.scr3);
    f.clear_group(lo.scrt);
    f.clear(v2);
    set_ff1(b3, std::move(f));
  }
  out.push_back(std::move(b3));
  return out;
}

std::vector<TransformerLayer> build_search_stack(const CoordinateLayout& lo, int width) {
  int d = lo.d_pos;
  std::vector<TransformerLayer> out;

  // Existence: does any past step write at the current location?
  TransformerLayer ex = make_layer(lo, width, "search-exist");
  {
    AttentionParams p;
    p.d_k = d + 1;
    p.Wq = SpMat(p.d_k, width);
    p.bq = Vec<Rational>(p.d_k, Rational(0));
    p.Wk = SpMat(p.d_k, width);
    p.bk = Vec<Rational>(p.d_k, Rational(0));
    p.Wv = SpMat(width, width);
    p.bv = Vec<Rational>(width, Rational(0));
    p.k0 = Vec<Rational>(p.d_k, Rational(0));
    p.v0 = Vec<Rational>(width, Rational(0));
    map_pm_one(p.Wq, p.bq, 0, lo.pos3);
    p.bq[d] = 1;
    map_pm_one(p.Wk, p.bk, 0, lo.pos2);
    p.k0[d] = d - 1;
    p.bv[lo.scr4.offset] = 1;
    ex.dec_attn = std::move(p);
  }
  out.push_back(std::move(ex));

  // Bit-reveal: binary search for the most recent writer index.
  for (int j = 0; j < d; ++j) {
    TransformerLayer rl = make_layer(lo, width, "search-bit-" + std::to_string(j));
    AttentionParams p;
    p.d_k = d + j + 2;
    p.Wq = SpMat(p.d_k, width);
    p.bq = Vec<Rational>(p.d_k, Rational(0));
    p.Wk = SpMat(p.d_k, width);
    p.bk = Vec<Rational>(p.d_k, Rational(0));
    p.Wv = SpMat(width, width);
    p.bv = Vec<Rational>(width, Rational(0));
    p.k0 = Vec<Rational>(p.d_k, Rational(0));
    p.v0 = Vec<Rational>(width, Rational(0));
    map_pm_one(p.Wq, p.bq, 0, lo.pos3);
    map_pm_one(p.Wk, p.bk, 0, lo.pos2);
    for (int l = 0; l < j; ++l) {
      p.Wq.set(d + l, lo.scr3.offset + l, 2);
      p.bq[d + l] = -1;
      p.Wk.set(d + l, lo.pos1.offset + l, 2);
      p.bk[d + l] = -1;
    }
    p.bq[d + j] = 1;
    p.Wk.set(d + j, lo.pos1.offset + j, 2);
    p.bk[d + j] = -1;
    p.bq[d + j + 1] = 1;
    p.k0[d + j + 1] = d + j;
    p.bv[lo.scr4.offset + 2] = 1;
    rl.dec_attn = std::move(p);

    FF1 f(lo, width);
    int tgt = lo.scr3.offset + j, src = lo.scr4.offset + 2;
    f.clear(tgt);
    f.add(tgt, src, 1);
    f.clear(src);
    set_ff1(rl, std::move(f));
    out.push_back(std::move(rl));
  }

  // Fetch: attend exactly the writer step and copy its written symbol.
  TransformerLayer ft = make_layer(lo, width, "search-fetch");
  {
    AttentionParams p;
    p.d_k = 2 * d + 1;
    p.Wq = SpMat(p.d_k, width);
    p.bq = Vec<Rational>(p.d_k, Rational(0));
    p.Wk = SpMat(p.d_k, width);
    p.bk = Vec<Rational>(p.d_k, Rational(0));
    p.Wv = SpMat(width, width);
    p.bv = Vec<Rational>(width, Rational(0));
    p.k0 = Vec<Rational>(p.d_k, Rational(0));
    p.v0 = Vec<Rational>(width, Rational(0));
    map_pm_one(p.Wq, p.bq, 0, lo.pos3);
    map_pm_one(p.Wk, p.bk, 0, lo.pos2);
    map_pm_one(p.Wq, p.bq, d, lo.scr3);
    map_pm_one(p.Wk, p.bk, d, lo.pos1);
    p.bq[2 * d] = 1;
    p.k0[2 * d] = 2 * d - 1;
    for (int a = 0; a < lo.sym2.width; ++a)
      p.Wv.set(lo.scr1.offset + a, lo.sym2.offset + a, 1);
    ft.dec_attn = std::move(p);

    FF1 f(lo, width);
    f.clear_group(lo.scr3);
    set_ff1(ft, std::move(f));
  }
  out.push_back(std::move(ft));
  return out;
}

std::vector<TransformerLayer> build_encoder_read_block(const CoordinateLayout& lo, int width) {
  int d = lo.d_pos;
  TransformerLayer rd = make_layer(lo, width, "enc-read");
  AttentionParams p;
  p.d_k = d + 1;
  p.Wq = SpMat(p.d_k, width);
  p.bq = Vec<Rational>(p.d_k, Rational(0));
  p.Wk = SpMat(p.d_k, width);
  p.bk = Vec<Rational>(p.d_k, Rational(0));
  p.Wv = SpMat(width, width);
  p.bv = Vec<Rational>(width, Rational(0));
  p.k0 = Vec<Rational>(p.d_k, Rational(0));
  p.v0 = Vec<Rational>(width, Rational(0));
  map_pm_one(p.Wq, p.bq, 0, lo.pos3);
  map_pm_one(p.Wk, p.bk, 0, lo.pos1);
  p.bq[d] = 1;
  p.k0[d] = d - 1;
  for (int a = 0; a < lo.sym1.width; ++a)
    p.Wv.set(lo.scr2.offset + a, lo.sym1.offset + a, 1);
  p.bv[lo.scr4.offset + 1] = 1;
  rd.enc_attn = std::move(p);
  return {std::move(rd)};
}

std::vector<TransformerLayer> build_output_block(const TMSpec& aug,
                                                 const CoordinateLayout& lo, int width) {
  std::vector<TransformerLayer> out;
  int f1 = lo.scr4.offset, f2 = lo.scr4.offset + 1;
  int v1 = lo.scrt.offset, v2 = lo.scrt.offset + 1, v3 = lo.scrt.offset + 2;

  TransformerLayer o1 = make_layer(lo, width, "out-select");
  {
    FF1 f(lo, width);
    f.clear_group(lo.scrt);
    f.add(v1, f1, 1);
    f.add(v2, f2, 1);
    f.add(v2, f1, -1);
    f.add(v3, f1, -1);
    f.add(v3, f2, -1);
    f.b[v3] = 1;
    f.clear(f1);
    f.clear(f2);
    set_ff1(o1, std::move(f));
  }
  out.push_back(std::move(o1));

  TransformerLayer o2 = make_layer(lo, width, "out-gate");
  {
    FF1 f(lo, width);
    for (int a = 0; a < lo.scr1.width; ++a) {
      int r = lo.scr1.offset + a;
      f.clear(r);
      f.add(r, lo.scr1.offset + a, 1);
      f.add(r, v1, 1);
      f.b[r] = -1;
      r = lo.scr2.offset + a;
      f.clear(r);
      f.add(r, lo.scr2.offset + a, 1);
      f.add(r, v2, 1);
      f.b[r] = -1;
    }
    f.clear(v1);
    f.clear(v2);
    set_ff1(o2, std::move(f));
  }
  out.push_back(std::move(o2));

  TransformerLayer o3 = make_layer(lo, width, "out-emit");
  {
    FF1 f(lo, width);
    f.clear_group(lo.sym1);
    for (int a = 0; a < lo.sym1.width; ++a) {
      int r = lo.sym1.offset + a;
      f.add(r, lo.scr1.offset + a, 1);
      f.add(r, lo.scr2.offset + a, 1);
    }
    f.add(lo.sym1.offset + aug.blank, v3, 1);
    f.clear_group(lo.pos2);
    for (int k = 0; k < lo.d_pos; ++k) f.add(lo.pos2.offset + k, lo.pos3.offset + k, 1);
    f.clear_group(lo.sym2);
    f.clear_group(lo.pos1);
    f.clear_group(lo.pos3);
    f.clear_group(lo.scr1);
    f.clear_group(lo.scr2);
    f.clear_group(lo.scr3);
    f.clear_group(lo.scr4);
    f.clear_group(lo.scrt);
    set_ff1(o3, std::move(f));
  }
  out.push_back(std::move(o3));
  return out;
}

Rational l1_norm(const TransformerModel& m) {
  Rational n(0);
  auto add_sp = [&](const SpMat& W) {
    for (const auto& row : W.row)
      for (const auto& [c, v] : row) n += abs(v);
  };
  auto add_vec = [&](const Vec<Rational>& v) {
    for (const Rational& x : v) n += abs(x);
  };
  for (const TransformerLayer& lay : m.layers) {
    for (const AttentionParams* p : {&lay.dec_attn, &lay.enc_attn}) {
      add_sp(p->Wq);
      add_sp(p->Wk);
      add_sp(p->Wv);
      add_vec(p->bq);
      add_vec(p->bk);
      add_vec(p->bv);
      add_vec(p->k0);
      add_vec(p->v0);
    }
    for (const FFLayer& f : lay.ff) {
      if (f.correction) continue;
      add_sp(f.W);
      add_vec(f.b);
    }
  }
  add_sp(m.E);
  add_vec(m.h0);
  add_vec(m.theta_cls);
  return n;
}

CompiledTransformer compile_tm(const TMSpec& m, const TMCompileOptions& opts) {
  if (m.time_bound < 1) fail("TimeBoundTooSmall", "time bound must be >= 1");
  TMSpec aug = augment_tm(m);
  int d_pos = 1;
  while ((1L << d_pos) < m.time_bound + 2) ++d_pos;
  CoordinateLayout lo = make_layout(aug.num_states(), aug.num_symbols(), d_pos);
  int width = opts.target_width == 0 ? lo.d_tm : opts.target_width;
  if (width < lo.d_tm)
    fail("WidthTooSmall", "target width " + std::to_string(width) + " below required " +
                              std::to_string(lo.d_tm));

  CompiledTransformer ct;
  ct.layout = lo;
  ct.aug = aug;
  TransformerModel& md = ct.model;
  md.d = width;
  md.T_prime = aug.time_bound;
  md.E = SpMat(width, aug.num_symbols());
  for (int a = 0; a < aug.num_symbols(); ++a) md.E.set(lo.sym1.offset + a, a, 1);
  md.enc_pos = {lo.pos1.offset, d_pos};
  md.dec_pos = {lo.pos1.offset, d_pos};
  md.h0 = Vec<Rational>(width, Rational(0));
  md.h0[lo.st.offset + aug.init] = 1;
  md.h0[lo.sym1.offset + aug.blank] = 1;
  md.theta_cls = Vec<Rational>(width, Rational(0));
  for (int z = 0; z < lo.st.width; ++z)
    md.theta_cls[lo.st.offset + z] = aug.accept.count(z) ? 1 : -1;

  auto append = [&](std::vector<TransformerLayer>&& ls) {
    for (TransformerLayer& l : ls) md.layers.push_back(std::move(l));
  };
  append(build_transition_block(aug, lo, width));
  append(build_location_block(lo, width));
  append(build_search_stack(lo, width));
  append(build_encoder_read_block(lo, width));
  append(build_output_block(aug, lo, width));

  json meta;
  meta["kind"] = "turing";
  meta["layout"] = json::parse(lo.to_json());
  meta["num_layers"] = md.num_layers();
  meta["width"] = width;
  meta["theta_l1"] = rational_to_string(l1_norm(md));
  md.meta = meta.dump();
  return ct;
}

namespace {

void expect(Vec<Rational>& h, const Group& g, const std::vector<int>& bits) {
  for (int k = 0; k < g.width; ++k) h[g.offset + k] = bits[k];
}

void expect_onehot(Vec<Rational>& h, const Group& g, int idx) {
  for (int k = 0; k < g.width; ++k) h[g.offset + k] = (k == idx) ? 1 : 0;
}

}  // namespace

TMVerifyReport verify_tm(const CompiledTransformer& ct, const std::vector<int>& input) {
  const TMSpec& aug = ct.aug;
  const CoordinateLayout& lo = ct.layout;
  const TransformerModel& md = ct.model;
  int d = lo.d_pos;
  long n = static_cast<long>(input.size());

  TMVerifyReport rep;
  TMTrace tr = simulate(aug, input, 0);
  DecodeTrace<Rational> dt;
  Rational pred = decode<Rational>(md, input, &dt);
  rep.min_gap = dt.min_gap;

  auto fail_at = [&](long i, int layer, const std::string& what) {
    rep.pass = false;
    if (rep.detail.empty())
      rep.detail = "step " + std::to_string(i) + ", layer " + std::to_string(layer) + ": " + what;
  };
  auto check_eq = [&](long i, int layer, const Vec<Rational>& got, const Vec<Rational>& want,
                      const std::string& what) {
    ++rep.checks;
    if (got != want) fail_at(i, layer, what);
  };

  int expected_decision = aug.accept.count(tr.state.back()) ? 1 : 0;
  ++rep.checks;
  if (pred != Rational(2 * expected_decision - 1)) {
    rep.pass = false;
    rep.detail = "prediction " + rational_to_string(pred) + " != " +
                 std::to_string(2 * expected_decision - 1);
  }
  if (rep.min_gap && *rep.min_gap < 1.0 - 1e-9) {
    rep.pass = false;
    if (rep.detail.empty())
      rep.detail = "attention score separation " + std::to_string(*rep.min_gap) + " < 1";
  }

  // Layer indices of the block boundaries (states[i][j] = output of layer j).
  const int after_t1 = 1, after_t2 = 2, after_loc = 8, after_exist = 9;
  const int after_fetch = 9 + d + 1, after_read = after_fetch + 1;
  const int after_emit = after_read + 3;

  for (long i = 1; i <= md.T_prime; ++i) {
    rep.steps = i;
    const auto& st = dt.states[i - 1];
    // Binarity after every correction tail.
    for (size_t j = 1; j < st.size(); ++j) {
      ++rep.checks;
      for (const Rational& v : st[j])
        if (v != 0 && v != 1) {
          fail_at(i, static_cast<int>(j), "non-binary coordinate");
          break;
        }
    }
    int z_prev = tr.state[i - 1], z = tr.state[i];
    int a_prev = tr.sym[i - 1], a_cur = tr.sym[i];
    int w = tr.written[i - 1], mv = tr.move[i - 1];
    long loc_prev = tr.loc[i - 1], loc = tr.loc[i];
    long iprime = last_writer(tr, i);

    Vec<Rational> want(md.d, Rational(0));
    // After the pair one-hot stage.
    expect_onehot(want, lo.st, z_prev);
    expect_onehot(want, lo.sym1, a_prev);
    expect(want, lo.pos1, bin_encode(i, d));
    expect(want, lo.pos2, bin_encode(loc_prev, d));
    expect_onehot(want, lo.scrt, z_prev * lo.sym1.width + a_prev);
    check_eq(i, after_t1, st[after_t1], want, "pair one-hot stage");
    // After the transition applies.
    expect_onehot(want, lo.scrt, -1);
    expect_onehot(want, lo.st, z);
    expect_onehot(want, lo.sym1, -1);
    expect_onehot(want, lo.sym2, w);
    want[lo.scr4.offset] = mv < 0 ? 1 : 0;
    want[lo.scr4.offset + 1] = mv > 0 ? 1 : 0;
    check_eq(i, after_t2, st[after_t2], want, "transition stage");
    // After the location adder.
    expect(want, lo.pos3, bin_encode(loc, d));
    want[lo.scr4.offset] = 0;
    want[lo.scr4.offset + 1] = 0;
    check_eq(i, after_loc, st[after_loc], want, "location update");
    // After the existence layer.
    want[lo.scr4.offset] = iprime > 0 ? 1 : 0;
    check_eq(i, after_exist, st[after_exist], want, "writer existence");
    // After each bit-reveal layer.
    std::vector<int> ibits = bin_encode(iprime, d);
    for (int j = 0; j < d; ++j) {
      want[lo.scr3.offset + j] = ibits[j];
      check_eq(i, after_exist + j + 1, st[after_exist + j + 1], want,
               "bit reveal " + std::to_string(j));
    }
    // After the fetch layer (scr3 zeroed, written symbol in scr1).
    expect(want, lo.scr3, std::vector<int>(d, 0));
    if (iprime > 0) expect_onehot(want, lo.scr1, tr.written[iprime - 1]);
    check_eq(i, after_fetch, st[after_fetch], want, "writer fetch");
    // After the encoder read.
    bool in_input = loc >= 1 && loc <= n;
    if (in_input) {
      expect_onehot(want, lo.scr2, input[loc - 1]);
      want[lo.scr4.offset + 1] = 1;
    }
    check_eq(i, after_read, st[after_read], want, "encoder read");
    // Final emitted step state.
    Vec<Rational> out(md.d, Rational(0));
    expect_onehot(out, lo.st, z);
    expect_onehot(out, lo.sym1, a_cur);
    expect(out, lo.pos2, bin_encode(loc, d));
    check_eq(i, after_emit, st[after_emit], out, "step output");
  }
  return rep;
}

}  // namespace sma
