// Command-line front end: compile circuits and Turing machines, run the
// compiled artifacts, verify them against their sources, and evaluate margin
// and sample-complexity bounds. Exit codes: 0 ok, 1 verification/property
// failure, 2 usage or parse error, 3 semantic (compile) error.

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sma/bounds.hpp"
#include "sma/circuit_compiler.hpp"
#include "sma/margin.hpp"
#include "sma/tm_compiler.hpp"

using namespace sma;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr int kNetFormat = 1;
constexpr int kTransformerFormat = 1;

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f.good()) fail("IOError", "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f.good()) fail("IOError", "cannot write " + path);
  f << text;
  if (!f.good()) fail("IOError", "cannot write " + path);
}

// Stable digest of the input files so reports are self-describing without
// being time-dependent (FNV-1a, hex).
std::string digest(const std::string& text) {
  unsigned long long h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", h);
  return buf;
}

// Exit-code mapping for sma::Error codes.
int exit_code_for(const std::string& code) {
  static const char* semantic[] = {"WidthTooSmall", "TimeBoundTooSmall", "InvalidProfile",
                                   "InvalidQuery",  "InvalidGamma",      "TooFewSamples",
                                   "BadShape",      "DimMismatch"};
  for (const char* s : semantic)
    if (code == s) return 3;
  return 2;  // parse/schema/io errors
}

void write_report(const std::string& path, json& rep, const std::string& command) {
  if (path.empty()) return;
  rep["command"] = command;
  rep["version"] = kVersion;
  spit(path, rep.dump(2) + "\n");
}

NumericMode parse_mode(const std::string& s) {
  if (s == "rational") return NumericMode::kRational;
  if (s == "float") return NumericMode::kFloat;
  fail("BadMode", "mode must be 'rational' or 'float'");
}

// Inputs on the command line: a plain 0/1 string ("1011") or a
// comma-separated numeric vector ("0.5,1,-2").
Vec<double> parse_input_vec(const std::string& s) {
  Vec<double> v;
  if (s.find(',') == std::string::npos &&
      s.find_first_not_of("01") == std::string::npos) {
    for (char c : s) v.push_back(c - '0');
    return v;
  }
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    v.push_back(std::stod(tok));
  }
  if (v.empty()) fail("BadInput", "empty input vector");
  return v;
}

std::vector<int> parse_tm_input(const TMSpec& m, const std::string& s) {
  std::vector<int> in;
  for (char c : s) in.push_back(m.symbol_index(std::string(1, c)));
  return in;
}

int cmd_compile_circuit(const std::string& src, const std::string& out, int width, int depth,
                        bool no_correction, const std::string& mode,
                        const std::string& report_path) {
  Circuit c = parse_circuit(slurp(src));
  LayeredCircuit lc = layerize(c);
  CompileOptions opts;
  opts.target_width = width;
  opts.target_depth = depth;
  opts.insert_corrections = !no_correction;
  opts.mode = parse_mode(mode);
  Net net = compile(lc, opts);
  spit(out, net_to_json(net, opts.mode) + "\n");
  std::printf("compiled %s: width %d, %zu sublayers, |theta|_1 = %s -> %s\n", src.c_str(),
              lc.width(), net.sublayers.size(), rational_to_string(l1_norm(net)).c_str(),
              out.c_str());
  json rep;
  rep["inputs_digest"] = digest(slurp(src));
  rep["results"] = {{"width", lc.width()},
                    {"depth", lc.depth()},
                    {"sublayers", net.sublayers.size()},
                    {"params", num_params(net, false)},
                    {"output", out}};
  write_report(report_path, rep, "compile-circuit");
  return 0;
}

int cmd_compile_tm(const std::string& src, const std::string& out,
                   const std::string& report_path) {
  TMSpec m = parse_tm(slurp(src));
  CompiledTransformer ct = compile_tm(m);
  spit(out, transformer_to_json(ct.model, NumericMode::kRational) + "\n");
  std::printf("compiled %s: d = %d, %d layers, T' = %ld -> %s\n", src.c_str(), ct.model.d,
              ct.model.num_layers(), ct.model.T_prime, out.c_str());
  json rep;
  rep["inputs_digest"] = digest(slurp(src));
  rep["results"] = {{"d", ct.model.d},
                    {"layers", ct.model.num_layers()},
                    {"decoder_steps", ct.model.T_prime},
                    {"params", num_params(ct.model, false)},
                    {"output", out}};
  write_report(report_path, rep, "compile-tm");
  return 0;
}

int cmd_run_net(const std::string& path, const std::string& input, const std::string& mode) {
  Net net = net_from_json(slurp(path));
  Vec<double> x = parse_input_vec(input);
  if (parse_mode(mode) == NumericMode::kRational) {
    Vec<Rational> xq;
    for (double v : x) xq.push_back(rational_from_double(v));
    Vec<Rational> y = forward<Rational>(net, xq);
    for (size_t i = 0; i < y.size(); ++i)
      std::printf("%s%s", i ? " " : "", rational_to_string(y[i]).c_str());
  } else {
    Vec<double> y = forward<double>(net, x);
    for (size_t i = 0; i < y.size(); ++i) std::printf("%s%.17g", i ? " " : "", y[i]);
  }
  std::printf("\n");
  return 0;
}

int cmd_run_tm(const std::string& path, const std::string& input, bool trace) {
  TMSpec m = parse_tm(slurp(path));
  TMTrace tr = simulate(m, parse_tm_input(m, input));
  std::printf("decision %d\n", decision(m, tr));
  if (trace) {
    for (long t = 0; t <= tr.T; ++t) {
      std::printf("t=%ld state=%s loc=%ld read=%s", t, m.states[tr.state[t]].c_str(),
                  tr.loc[t], m.alphabet[tr.sym[t]].c_str());
      if (t > 0)
        std::printf(" wrote=%s move=%+d", m.alphabet[tr.written[t - 1]].c_str(),
                    tr.move[t - 1]);
      std::printf("\n");
    }
  }
  return 0;
}

int cmd_verify_circuit(const std::string& net_path, const std::string& ckt_path,
                       bool exhaustive, long samples, std::uint64_t seed,
                       const std::string& report_path) {
  Net net = net_from_json(slurp(net_path));
  LayeredCircuit lc = layerize(parse_circuit(slurp(ckt_path)));
  int r = lc.num_inputs;
  if (!exhaustive && samples <= 0) fail("BadSamples", "--samples must be positive");
  if (exhaustive && r > 24) fail("BadSamples", "too many inputs for --exhaustive");

  std::mt19937_64 rng(seed);
  long total = exhaustive ? (1L << r) : samples;
  long mismatches = 0;
  std::string first;
  for (long i = 0; i < total; ++i) {
    unsigned long v = exhaustive ? static_cast<unsigned long>(i) : rng() & ((1ul << r) - 1);
    Vec<Rational> x;
    std::string bits;
    for (int j = 0; j < r; ++j) {
      int b = (v >> j) & 1u;
      x.push_back(Rational(b));
      bits += char('0' + b);
    }
    std::vector<uint8_t> xb;
    for (int j = 0; j < r; ++j) xb.push_back((v >> j) & 1u);
    Rational want = Rational(2 * evaluate(lc, xb) - 1);
    Rational got = forward<Rational>(net, x)[0];
    if (got != want) {
      ++mismatches;
      if (first.empty()) first = bits;
    }
  }
  std::printf("verify circuit: %ld inputs, %ld mismatches%s%s\n", total, mismatches,
              first.empty() ? "" : ", first counterexample ", first.c_str());
  json rep;
  rep["inputs_digest"] = digest(slurp(net_path) + slurp(ckt_path));
  rep["seed"] = seed;
  rep["results"] = {{"inputs", total}, {"mismatches", mismatches}};
  if (!first.empty()) rep["results"]["counterexample"] = first;
  write_report(report_path, rep, "verify circuit");
  return mismatches == 0 ? 0 : 1;
}

int cmd_verify_tm(const std::string& tr_path, const std::string& tm_path, int max_len,
                  bool invariants, const std::string& report_path) {
  TMSpec m = parse_tm(slurp(tm_path));
  TransformerModel artifact = transformer_from_json(slurp(tr_path));
  CompiledTransformer ct = compile_tm(m);

  std::vector<int> syms;
  for (int a = 0; a < m.num_symbols(); ++a)
    if (a != m.blank) syms.push_back(a);

  long inputs = 0, failures = 0;
  std::string first;
  for (int len = 0; len <= max_len; ++len) {
    long count = 1;
    for (int i = 0; i < len; ++i) count *= static_cast<long>(syms.size());
    for (long v = 0; v < count; ++v) {
      std::vector<int> in;
      long t = v;
      std::string word;
      for (int i = 0; i < len; ++i) {
        in.push_back(syms[t % syms.size()]);
        word += m.alphabet[in.back()];
        t /= syms.size();
      }
      ++inputs;
      bool ok;
      std::string why;
      int want = 2 * decision(m, simulate(m, in)) - 1;
      Rational got = decode<Rational>(artifact, in);
      ok = got == Rational(want);
      if (!ok) why = "artifact prediction " + rational_to_string(got);
      if (ok && invariants) {
        TMVerifyReport rep = verify_tm(ct, in);
        ok = rep.pass;
        why = rep.detail;
      }
      if (!ok) {
        ++failures;
        if (first.empty()) first = "\"" + word + "\": " + why;
      }
    }
  }
  std::printf("verify tm: %ld inputs, %ld failures%s%s\n", inputs, failures,
              first.empty() ? "" : ", first: ", first.c_str());
  json rep;
  rep["inputs_digest"] = digest(slurp(tr_path) + slurp(tm_path));
  rep["results"] = {{"inputs", inputs}, {"failures", failures}, {"invariants", invariants}};
  if (!first.empty()) rep["results"]["counterexample"] = first;
  write_report(report_path, rep, "verify tm");
  return failures == 0 ? 0 : 1;
}

int cmd_margin_upper(const std::string& model_path, const std::string& input, int label,
                     long restarts, long budget, std::uint64_t seed, bool layer_based,
                     const std::string& report_path) {
  Net net = net_from_json(slurp(model_path));
  Vec<double> x = parse_input_vec(input);
  if (budget <= 0) budget = restarts * 500;  // evaluation allowance per restart
  MarginReport r = layer_based ? layer_margin_upper_bound(net, x, label, budget, seed)
                               : margin_upper_bound(net, x, label, budget, seed);
  if (r.upper_bound)
    std::printf("margin upper bound %.9g (%ld evaluations, %ld restarts)\n", *r.upper_bound,
                r.evaluations, r.restarts);
  else
    std::printf("no flipping perturbation found (%ld evaluations)\n", r.evaluations);
  if (!report_path.empty()) spit(report_path, margin_report_to_json(r) + "\n");
  return 0;
}

int cmd_margin_certify(const std::string& model_path, const std::string& profile_path,
                       const std::string& report_path) {
  Net net = net_from_json(slurp(model_path));
  LipschitzProfile p;
  if (!profile_path.empty()) {
    json j = json::parse(slurp(profile_path));
    p.N = j.value("N", 1.0);
    p.kappa0 = j.value("kappa0", 1.0);
    p.kappa_th = j.value("kappa_th", 1.0);
    p.kappa_f = j.value("kappa_f", 1.0);
    p.sigma_h = j.value("sigma_h", 1.0);
    p.sigma_th = j.value("sigma_th", 1.0);
    p.kappa_xi = j.value("kappa_xi", 1.0);
    p.sigma_xi = j.value("sigma_xi", 1.0);
    p.rho = j.value("rho", 0.5);
  } else {
    if (net.input_dim > 14)
      fail("InvalidQuery", "no --profile given and too many inputs to enumerate");
    std::vector<Vec<double>> xs;
    for (unsigned long v = 0; v < (1ul << net.input_dim); ++v) {
      Vec<double> x;
      for (int j = 0; j < net.input_dim; ++j) x.push_back((v >> j) & 1u);
      xs.push_back(std::move(x));
    }
    p = estimate_profile(net, xs);
  }
  double bound = certified_lower_bound(p);
  std::printf("certified all-layer margin lower bound %.9g\n", bound);
  json rep;
  rep["inputs_digest"] = digest(slurp(model_path));
  rep["results"] = {{"lower_bound", bound},
                    {"profile",
                     {{"N", p.N},
                      {"kappa0", p.kappa0},
                      {"kappa_th", p.kappa_th},
                      {"kappa_f", p.kappa_f},
                      {"sigma_h", p.sigma_h},
                      {"sigma_th", p.sigma_th},
                      {"kappa_xi", p.kappa_xi},
                      {"sigma_xi", p.sigma_xi},
                      {"rho", p.rho}}}};
  write_report(report_path, rep, "margin certify");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"boolean-circuit and Turing-machine to network compiler/verifier"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("sma ") + kVersion + " (net format " +
                                        std::to_string(kNetFormat) + ", transformer format " +
                                        std::to_string(kTransformerFormat) + ")");

  std::string src, out, mode = "rational", input, report_path, profile_path;
  std::string sub_path, sub_src;
  int width = 0, depth = 0, label = 1, max_len = 4;
  bool no_correction = false, trace = false, exhaustive = false, invariants = false,
       layer_based = false;
  long samples = 0, restarts = 40, budget = 0;
  std::uint64_t seed = 0;

  auto* cc = app.add_subcommand("compile-circuit", "netlist -> exact ReLU net");
  cc->add_option("source", src)->required();
  cc->add_option("-o,--output", out)->required();
  cc->add_option("--width", width);
  cc->add_option("--depth", depth);
  cc->add_flag("--no-correction", no_correction);
  cc->add_option("--mode", mode)->check(CLI::IsMember({"rational", "float"}));
  cc->add_option("--report", report_path);

  auto* ct = app.add_subcommand("compile-tm", "Turing machine -> exact transformer");
  ct->add_option("source", src)->required();
  ct->add_option("-o,--output", out)->required();
  ct->add_option("--report", report_path);

  auto* rn = app.add_subcommand("run-net", "evaluate a compiled net");
  rn->add_option("model", src)->required();
  rn->add_option("--input", input)->required();
  rn->add_option("--mode", mode)->check(CLI::IsMember({"rational", "float"}));

  auto* rt = app.add_subcommand("run-tm", "simulate a Turing machine");
  rt->add_option("machine", src)->required();
  rt->add_option("--input", input);
  rt->add_flag("--trace", trace);

  auto* vf = app.add_subcommand("verify", "check an artifact against its source");
  vf->require_subcommand(1);
  auto* vc = vf->add_subcommand("circuit", "net vs netlist");
  vc->add_option("model", sub_path)->required();
  vc->add_option("source", sub_src)->required();
  vc->add_flag("--exhaustive", exhaustive);
  vc->add_option("--samples", samples);
  vc->add_option("--seed", seed);
  vc->add_option("--report", report_path);
  auto* vt = vf->add_subcommand("tm", "transformer vs machine");
  vt->add_option("model", sub_path)->required();
  vt->add_option("source", sub_src)->required();
  vt->add_option("--max-len", max_len);
  vt->add_flag("--invariants", invariants);
  vt->add_option("--report", report_path);

  auto* mg = app.add_subcommand("margin", "all-layer margin bounds");
  mg->require_subcommand(1);
  auto* mu = mg->add_subcommand("upper", "multi-restart flipping-perturbation search");
  mu->add_option("model", sub_path)->required();
  mu->add_option("--input", input)->required();
  mu->add_option("--label", label)->check(CLI::IsMember({0, 1}));
  mu->add_option("--restarts", restarts);
  mu->add_option("--budget", budget);
  mu->add_option("--seed", seed);
  mu->add_flag("--layer-based", layer_based);
  mu->add_option("--report", report_path);
  auto* mc = mg->add_subcommand("certify", "Lipschitz-profile lower bound");
  mc->add_option("model", sub_path)->required();
  mc->add_option("--profile", profile_path);
  mc->add_option("--report", report_path);

  auto* bd = app.add_subcommand("bound", "loss and sample-complexity formulas");
  bd->require_subcommand(1);
  double alpha = 1, pcount = 1, gamma = 1, eps = 0.1, c_rad = 1, margin_v = 0,
         delta_conf = 0.01;
  long nsamples = 0;
  auto* bs = bd->add_subcommand("sample-complexity", "smallest n meeting the target error");
  bs->add_option("--alpha", alpha)->required();
  bs->add_option("--p", pcount)->required();
  bs->add_option("--gamma", gamma)->required();
  bs->add_option("--eps", eps)->required();
  bs->add_option("--c-rad", c_rad);
  bs->add_option("--report", report_path);
  auto* bg = bd->add_subcommand("surrogate", "ramp loss at a margin");
  bg->add_option("--margin", margin_v)->required();
  bg->add_option("--gamma", gamma)->required();
  auto* bm = bd->add_subcommand("sm", "population error tail bound");
  bm->add_option("--eps", eps)->required();
  bm->add_option("--n", nsamples)->required();
  bm->add_option("--delta-conf", delta_conf);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (cc->parsed())
      return cmd_compile_circuit(src, out, width, depth, no_correction, mode, report_path);
    if (ct->parsed()) return cmd_compile_tm(src, out, report_path);
    if (rn->parsed()) return cmd_run_net(src, input, mode);
    if (rt->parsed()) return cmd_run_tm(src, input, trace);
    if (vc->parsed())
      return cmd_verify_circuit(sub_path, sub_src, exhaustive, samples, seed, report_path);
    if (vt->parsed()) return cmd_verify_tm(sub_path, sub_src, max_len, invariants, report_path);
    if (mu->parsed())
      return cmd_margin_upper(sub_path, input, label, restarts, budget, seed, layer_based,
                              report_path);
    if (mc->parsed()) return cmd_margin_certify(sub_path, profile_path, report_path);
    if (bs->parsed()) {
      long n = solve_sample_complexity(alpha, pcount, gamma, eps, c_rad);
      std::printf("n = %ld\n", n);
      json rep;
      rep["results"] = {{"n", n}, {"alpha", alpha}, {"p", pcount}, {"gamma", gamma},
                        {"eps", eps}, {"c_rad", c_rad}};
      write_report(report_path, rep, "bound sample-complexity");
      return 0;
    }
    if (bg->parsed()) {
      std::printf("%.17g\n", surrogate_loss(margin_v, gamma));
      return 0;
    }
    if (bm->parsed()) {
      std::printf("%.17g\n", sm_bound(eps, nsamples, delta_conf));
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
