// Acceptance gate: one pass/fail line per criterion, exit 0 only if all pass.
// Usage: acceptance <data-dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sma/bounds.hpp"
#include "sma/circuit_compiler.hpp"
#include "sma/margin.hpp"
#include "sma/tm_compiler.hpp"

using namespace sma;

namespace {

std::string g_data = "data";
int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("CRITERION %d %s%s%s\n", criterion, pass ? "PASS" : "FAIL",
              detail.empty() ? "" : " — ", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f.good()) fail("IOError", "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Rational Q(long n, long d = 1) { return Rational(n, d); }

std::vector<uint8_t> bits_of(unsigned long v, int r) {
  std::vector<uint8_t> x(r);
  for (int i = 0; i < r; ++i) x[i] = (v >> i) & 1u;
  return x;
}

Vec<Rational> qvec(const std::vector<uint8_t>& x) {
  Vec<Rational> v;
  for (auto b : x) v.push_back(Q(b));
  return v;
}

std::string random_netlist(std::mt19937_64& rng, int r, int width, int depth) {
  std::uniform_int_distribution<int> kind_d(0, 2);
  std::string s = "inputs";
  for (int i = 0; i < r; ++i) s += " x" + std::to_string(i);
  s += "\n";
  std::vector<std::string> prev;
  for (int i = 0; i < r; ++i) prev.push_back("x" + std::to_string(i));
  int gid = 0;
  for (int l = 0; l < depth; ++l) {
    int w = std::uniform_int_distribution<int>(1, width)(rng);
    std::vector<std::string> cur;
    for (int j = 0; j < w; ++j) {
      std::uniform_int_distribution<size_t> pick(0, prev.size() - 1);
      std::string id = "g" + std::to_string(gid++);
      int k = kind_d(rng);
      if (k == 2)
        s += "gate " + id + " = NOT " + prev[pick(rng)] + "\n";
      else
        s += "gate " + id + " = " + (k == 0 ? "AND " : "OR ") + prev[pick(rng)] + " " +
             prev[pick(rng)] + "\n";
      cur.push_back(id);
    }
    prev = cur;
  }
  std::uniform_int_distribution<size_t> pick(0, prev.size() - 1);
  s += "output " + prev[pick(rng)] + "\n";
  return s;
}

// The circuit corpus shared by criteria 1, 2, and 4: fifty seeded random
// layered circuits (r <= 10, width <= 8, depth <= 10) plus the hand-written
// netlists shipped in the data directory.
std::vector<LayeredCircuit> build_corpus() {
  std::vector<LayeredCircuit> corpus;
  std::mt19937_64 rng(20240901);
  for (int i = 0; i < 50; ++i) {
    int r = std::uniform_int_distribution<int>(2, 10)(rng);
    int w = std::uniform_int_distribution<int>(1, 8)(rng);
    int d = std::uniform_int_distribution<int>(1, 10)(rng);
    corpus.push_back(layerize(parse_circuit(random_netlist(rng, r, w, d))));
  }
  for (const char* f : {"and.ckt", "or.ckt", "not.ckt", "majority3.ckt", "parity4.ckt"})
    corpus.push_back(layerize(parse_circuit(slurp(g_data + "/" + f))));
  return corpus;
}

int compiled_sign(const Net& net, const std::vector<uint8_t>& x) {
  Rational y = forward<Rational>(net, qvec(x))[0];
  if (y == Q(1)) return 1;
  if (y == Q(-1)) return -1;
  return 0;
}

void criterion1(const std::vector<LayeredCircuit>& corpus) {
  auto t0 = std::chrono::steady_clock::now();
  long mismatches = 0, inputs = 0;
  for (const auto& lc : corpus) {
    Net net = compile(lc, {});
    int r = lc.num_inputs;
    for (unsigned long v = 0; v < (1ul << r); ++v) {
      auto x = bits_of(v, r);
      ++inputs;
      if (compiled_sign(net, x) != 2 * evaluate(lc, x) - 1) ++mismatches;
    }
  }
  double dt = seconds_since(t0);
  std::ostringstream d;
  d << corpus.size() << " circuits, " << inputs << " inputs, " << mismatches
    << " mismatches, " << dt << " s";
  report(1, mismatches == 0 && dt <= 60.0, d.str());
}

void criterion2(const std::vector<LayeredCircuit>& corpus) {
  long violations = 0, inputs = 0;
  for (const auto& lc : corpus) {
    int m = lc.width();
    CompileOptions wide;
    wide.target_width = 4 * m;
    Net base = compile(lc, {});
    Net big = compile(lc, wide);
    Net base_m = materialize_rounds(base);
    Net big_m = materialize_rounds(big);
    int r = lc.num_inputs;
    for (unsigned long v = 0; v < (1ul << r); ++v) {
      auto xq = qvec(bits_of(v, r));
      ++inputs;
      std::vector<Vec<Rational>> rb, rw;
      Rational yb = forward<Rational>(base_m, xq, &rb)[0];
      Rational yw = forward<Rational>(big_m, xq, &rw)[0];
      if (yb != yw) ++violations;
      // Padding coordinates: every hidden vector of the wide net agrees with
      // the base net on its prefix and is exactly zero past it.
      for (size_t i = 0; i + 1 < rw.size(); ++i) {
        for (size_t j = 0; j < rw[i].size(); ++j) {
          // The stacked round intermediate doubles the width; map the base
          // prefix accordingly.
          bool half = rw[i].size() == static_cast<size_t>(8 * m);
          size_t wb = half ? rb[i].size() / 2 : rb[i].size();
          size_t ww = half ? rw[i].size() / 2 : rw[i].size();
          size_t jj = j % ww;
          bool upper = j >= ww;
          if (jj < wb) {
            if (rw[i][j] != rb[i][upper ? wb + jj : jj]) ++violations;
          } else if (rw[i][j] != Q(0)) {
            ++violations;
          }
        }
      }
    }
  }
  std::ostringstream d;
  d << inputs << " inputs, " << violations << " violations";
  report(2, violations == 0, d.str());
}

Net product_net(int depth, bool corrected) {
  Net n;
  n.input_dim = 1;
  for (int i = 0; i < depth - 1; ++i) {
    Sublayer s;
    s.kind = SublayerKind::kLinReLU;
    s.W = Mat<Rational>(1, 1);
    s.W.at(0, 0) = 1;
    s.b = {Q(0)};
    n.sublayers.push_back(std::move(s));
    if (corrected) n.sublayers.push_back(round_gadget(1, 1));
  }
  Sublayer head;
  head.kind = SublayerKind::kLin;
  head.W = Mat<Rational>(1, 1);
  head.W.at(0, 0) = 1;
  head.b = {Q(-1, 2)};
  n.sublayers.push_back(std::move(head));
  n.meta = "{}";
  return n;
}

void criterion3() {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::ostringstream d;

  Net plain = product_net(16, false);
  MarginReport up = margin_upper_bound(plain, {1.0}, 1, 30000, 2024);
  if (!up.upper_bound || *up.upper_bound > 0.75) ok = false;
  d << "plain upper " << (up.upper_bound ? std::to_string(*up.upper_bound) : "none");

  Net corrected = product_net(16, true);
  MarginReport cr = margin_upper_bound(corrected, {1.0}, 1, 15000, 2024);
  if (cr.evaluations < 10000) ok = false;
  if (cr.upper_bound && *cr.upper_bound < 1.0 / 3.0) ok = false;
  d << "; corrected " << (cr.upper_bound ? std::to_string(*cr.upper_bound) : "no flip")
    << " after " << cr.evaluations << " evals";

  RobustnessResult rr = robustness_property_test(corrected, {1.0}, 1000, 2024, 1.0 / 3.0);
  if (!rr.pass) ok = false;
  d << "; boundary samples " << (rr.pass ? "pass" : "fail");

  double dt = seconds_since(t0);
  d << "; " << dt << " s";
  report(3, ok && dt <= 120.0, d.str());
}

void criterion4(const std::vector<LayeredCircuit>& corpus) {
  LipschitzProfile ones;
  ones.rho = 0.9;
  bool exact = certified_lower_bound(ones) == 0.225;

  long violations = 0, compared = 0;
  for (const auto& lc : corpus) {
    Net net = compile(lc, {});  // corrections inserted by default
    int r = lc.num_inputs;
    std::vector<Vec<double>> xs;
    for (unsigned long v = 0; v < (1ul << r); ++v) {
      Vec<double> x;
      for (auto b : bits_of(v, r)) x.push_back(b);
      xs.push_back(std::move(x));
    }
    double cert = certified_lower_bound(estimate_profile(net, xs));
    for (unsigned long v = 0; v < xs.size(); ++v) {
      int y = evaluate(lc, bits_of(v, r));
      MarginReport rep = margin_upper_bound(net, xs[v], y, 400, 7 + v);
      if (rep.upper_bound) {
        ++compared;
        if (cert > *rep.upper_bound) ++violations;
      }
    }
  }
  std::ostringstream d;
  d << "all-ones rho=0.9 -> 0.225 " << (exact ? "exact" : "WRONG") << "; " << compared
    << " (certificate, upper bound) pairs, " << violations << " violations";
  report(4, exact && violations == 0, d.str());
}

void criterion5() {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::ostringstream d;
  for (const char* f : {"parity.json", "palindrome.json", "anbn.json"}) {
    TMSpec m = parse_tm(slurp(g_data + "/" + std::string(f)));
    CompiledTransformer ct = compile_tm(m);
    // Input symbols are the non-blank alphabet entries.
    std::vector<int> syms;
    for (int a = 0; a < m.num_symbols(); ++a)
      if (a != m.blank) syms.push_back(a);
    long inputs = 0, failures = 0;
    double min_gap = 1e300;
    for (int len = 0; len <= 6; ++len) {
      long count = 1;
      for (int i = 0; i < len; ++i) count *= static_cast<long>(syms.size());
      for (long v = 0; v < count; ++v) {
        std::vector<int> in;
        long t = v;
        for (int i = 0; i < len; ++i) {
          in.push_back(syms[t % syms.size()]);
          t /= syms.size();
        }
        TMVerifyReport rep = verify_tm(ct, in);
        ++inputs;
        if (!rep.pass) {
          ++failures;
          if (failures == 1) d << " first failure [" << f << "]: " << rep.detail << ";";
        }
        if (rep.min_gap) min_gap = std::min(min_gap, *rep.min_gap);
      }
    }
    if (failures > 0 || min_gap < 1.0 - 1e-9) ok = false;
    d << " " << f << ": " << inputs << " inputs, " << failures << " failures, min gap "
      << min_gap << ";";
  }
  double dt = seconds_since(t0);
  d << " " << dt << " s";
  report(5, ok && dt <= 600.0, d.str());
}

void criterion6() {
  bool ok = true;
  std::ostringstream d;

  // Three exact cases of the ramp loss.
  ok = ok && surrogate_loss(-0.5, 0.5) == 1.0 && surrogate_loss(0.25, 0.5) == 0.5 &&
       surrogate_loss(0.75, 0.5) == 0.0;

  // Surrogate dominates the 0-1 loss.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> md(-3, 3), gd(0.01, 4);
  long dom_viol = 0;
  for (long i = 0; i < 100000; ++i) {
    double m = md(rng), g = gd(rng);
    if (surrogate_loss(m, g) < (m <= 0 ? 1.0 : 0.0)) ++dom_viol;
  }
  ok = ok && dom_viol == 0;

  // Exact integer boundary on 100 random queries.
  std::uniform_real_distribution<double> ad(0.5, 4), gd2(0.1, 2), ed(0.02, 0.5);
  std::uniform_int_distribution<long> pd(2, 1000000);
  long bnd_viol = 0;
  for (int i = 0; i < 100; ++i) {
    double a = ad(rng), g = gd2(rng), eps = ed(rng);
    double p = static_cast<double>(pd(rng));
    long n = solve_sample_complexity(a, p, g, eps);
    BoundQuery q;
    q.alpha = a;
    q.p = p;
    q.gamma = g;
    q.n = n;
    if (rademacher_bound(q) > eps) ++bnd_viol;
    if (n > 8) {
      q.n = n - 1;
      if (rademacher_bound(q) <= eps) ++bnd_viol;
    }
  }
  ok = ok && bnd_viol == 0;

  double sm = sm_bound(0, 530, 0.01);
  ok = ok && std::abs(sm - 0.200) <= 0.001;

  d << "ramp cases ok; " << dom_viol << " domination violations; " << bnd_viol
    << " boundary violations; sm_bound(0,530,0.01) = " << sm;
  report(6, ok, d.str());
}

void criterion7() {
  bool ok = true;
  std::ostringstream d;

  // Seeded margin search report, byte-compared across two runs.
  Net n = product_net(12, false);
  std::string a = margin_report_to_json(margin_upper_bound(n, {1.0}, 1, 8000, 424242));
  std::string b = margin_report_to_json(margin_upper_bound(n, {1.0}, 1, 8000, 424242));
  ok = ok && a == b;
  d << "margin report " << (a == b ? "identical" : "DIFFERS");

  // Compilation output, byte-compared.
  Circuit c = parse_circuit(slurp(g_data + "/majority3.ckt"));
  std::string j1 = net_to_json(compile(layerize(c), {}), NumericMode::kRational);
  std::string j2 = net_to_json(compile(layerize(c), {}), NumericMode::kRational);
  ok = ok && j1 == j2;
  d << "; circuit artifact " << (j1 == j2 ? "identical" : "DIFFERS");

  TMSpec m = parse_tm(slurp(g_data + "/parity.json"));
  std::string t1 = transformer_to_json(compile_tm(m).model, NumericMode::kRational);
  std::string t2 = transformer_to_json(compile_tm(m).model, NumericMode::kRational);
  ok = ok && t1 == t2;
  d << "; tm artifact " << (t1 == t2 ? "identical" : "DIFFERS");

  // Seeded robustness sweep.
  RobustnessResult r1 = robustness_property_test(n, {1.0}, 200, 9, 0.01);
  RobustnessResult r2 = robustness_property_test(n, {1.0}, 200, 9, 0.01);
  ok = ok && r1.pass == r2.pass && r1.counterexample == r2.counterexample;
  d << "; robustness sweep " << (r1.pass == r2.pass ? "identical" : "DIFFERS");

  report(7, ok, d.str());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_data = argv[1];
  try {
    auto corpus = build_corpus();
    criterion1(corpus);
    criterion2(corpus);
    criterion3();
    criterion4(corpus);
    criterion5();
    criterion6();
    criterion7();
  } catch (const std::exception& e) {
    std::printf("ACCEPTANCE ABORTED — %s\n", e.what());
    return 2;
  }
  return g_failures == 0 ? 0 : 1;
}
