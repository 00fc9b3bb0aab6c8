#include "sma/margin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include <json.hpp>

namespace sma {

namespace {

bool flips(int y, double out) { return (y - 0.5) * out <= 0; }

double frob(const Mat<Rational>& W) {
  double s = 0;
  for (const Rational& v : W.data) {
    double d = to_double(v);
    s += d * d;
  }
  return std::sqrt(s);
}

// Dense double mirror of the materialized net, built once per search so the
// hot evaluation loop never touches exact arithmetic. `off` is each
// sublayer's offset into the flattened (trainable-first) parameter vector,
// matching forward_param_perturbed.
struct DenseSublayer {
  bool relu = true;
  Mat<double> W;
  Vec<double> b;
  long off = 0;
};

std::vector<DenseSublayer> densify_net(const Net& net) {
  Net m = materialize_rounds(net);
  std::vector<DenseSublayer> out(m.sublayers.size());
  long at = 0;
  for (int pass = 0; pass < 2; ++pass)
    for (size_t i = 0; i < m.sublayers.size(); ++i) {
      const Sublayer& s = m.sublayers[i];
      if (s.correction != (pass == 1)) continue;
      out[i].off = at;
      at += static_cast<long>(s.W.data.size()) + s.b.size();
    }
  for (size_t i = 0; i < m.sublayers.size(); ++i) {
    const Sublayer& s = m.sublayers[i];
    out[i].relu = s.kind == SublayerKind::kLinReLU;
    out[i].W = Mat<double>(s.W.rows, s.W.cols);
    for (size_t k = 0; k < s.W.data.size(); ++k) out[i].W.data[k] = to_double(s.W.data[k]);
    out[i].b.assign(s.b.size(), 0.0);
    for (size_t k = 0; k < s.b.size(); ++k) out[i].b[k] = to_double(s.b[k]);
  }
  return out;
}

double dense_forward_perturbed(const std::vector<DenseSublayer>& ls, const Vec<double>& x,
                               const Vec<double>& delta) {
  Vec<double> h(x);
  for (const DenseSublayer& s : ls) {
    const double* dW = delta.data() + s.off;
    const double* db = dW + static_cast<long>(s.W.rows) * s.W.cols;
    Vec<double> y(s.W.rows, 0.0);
    for (int r = 0; r < s.W.rows; ++r) {
      double acc = s.b[r] + db[r];
      const double* row = s.W.data.data() + static_cast<size_t>(r) * s.W.cols;
      const double* drow = dW + static_cast<long>(r) * s.W.cols;
      for (int c = 0; c < s.W.cols; ++c) acc += (row[c] + drow[c]) * h[c];
      y[r] = s.relu ? std::max(acc, 0.0) : acc;
    }
    h = std::move(y);
  }
  return h.at(0);
}

}  // namespace

MarginReport search_margin(const PerturbedModel& model, int y, long budget,
                           std::uint64_t seed, const std::vector<uint8_t>& mask) {
  if (!mask.empty() && mask.size() != static_cast<size_t>(model.dim))
    fail("DimMismatch", "mask length must equal the perturbation dimension");
  MarginReport rep;
  rep.y = y;
  rep.seed = seed;
  long evals = 0;
  auto eval = [&](const Vec<double>& d) {
    ++evals;
    return model.eval(d);
  };
  auto coord_live = [&](long i) { return mask.empty() || mask[i]; };

  Vec<double> zero(model.dim, 0.0);
  double base = eval(zero);
  if (flips(y, base)) {
    rep.upper_bound = 0.0;
    rep.witness = zero;
    rep.evaluations = evals;
    return rep;
  }

  const double tol = 1e-6;
  double best_norm = std::numeric_limits<double>::infinity();
  Vec<double> best;

  // Bisection along delta = s * dir (dir unit norm); returns the smallest
  // flipping s found, or nullopt.
  auto ray_min = [&](const Vec<double>& dir) -> std::optional<double> {
    double lo = 0, hi = 1e-3;
    bool found = false;
    while (hi <= 1e9 && evals < budget) {
      if (flips(y, eval([&] {
            Vec<double> d(dir);
            for (double& v : d) v *= hi;
            return d;
          }()))) {
        found = true;
        break;
      }
      lo = hi;
      hi *= 2;
    }
    if (!found) return std::nullopt;
    while (hi - lo > tol && evals < budget) {
      double mid = 0.5 * (lo + hi);
      Vec<double> d(dir);
      for (double& v : d) v *= mid;
      (flips(y, eval(d)) ? hi : lo) = mid;
    }
    return hi;
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const long max_restarts = 1000;
  for (long r = 0; r < max_restarts && evals < budget; ++r) {
    Vec<double> dir(model.dim, 0.0);
    if (r == 0 && model.dim <= budget - evals) {
      // Finite-difference descent direction of (y - 1/2) * output at zero.
      const double h = 1e-4;
      for (long i = 0; i < model.dim; ++i) {
        if (!coord_live(i)) continue;
        Vec<double> d(zero);
        d[i] = h;
        dir[i] = -(y - 0.5) * (eval(d) - base) / h;
      }
    } else {
      for (long i = 0; i < model.dim; ++i) {
        double g = gauss(rng);
        if (coord_live(i)) dir[i] = g;
      }
    }
    double n = l2_norm_double(dir);
    if (n == 0) continue;
    for (double& v : dir) v /= n;
    ++rep.restarts;
    auto s = ray_min(dir);
    if (s && *s < best_norm) {
      best_norm = *s;
      best = dir;
      for (double& v : best) v *= *s;
    }
  }

  if (!best.empty()) {
    // Per-coordinate pruning: zero out coordinates that are not needed for
    // the flip, then re-tighten along the remaining ray.
    bool changed = true;
    while (changed && evals < budget) {
      changed = false;
      for (long i = 0; i < model.dim && evals < budget; ++i) {
        if (best[i] == 0) continue;
        Vec<double> d(best);
        d[i] = 0;
        if (flips(y, eval(d))) {
          best = std::move(d);
          changed = true;
        }
      }
      double n = l2_norm_double(best);
      if (n == 0) break;
      double tlo = 0, thi = 1;
      while ((thi - tlo) * n > tol && evals < budget) {
        double mid = 0.5 * (tlo + thi);
        Vec<double> d(best);
        for (double& v : d) v *= mid;
        (flips(y, eval(d)) ? thi : tlo) = mid;
      }
      if (thi < 1) {
        for (double& v : best) v *= thi;
        changed = changed || thi < 1 - 1e-12;
      }
      best_norm = l2_norm_double(best);
      if (!changed) break;
    }
    // Witness re-validation, independent of the search bookkeeping.
    if (!flips(y, model.eval(best)))
      fail("WitnessInvalid", "search produced a non-flipping witness");
    rep.upper_bound = best_norm;
    rep.witness = std::move(best);
  }
  rep.evaluations = evals;
  return rep;
}

MarginReport margin_upper_bound(const Net& net, const Vec<double>& x, int y,
                                long budget, std::uint64_t seed,
                                bool perturb_corrections,
                                const std::vector<uint8_t>& mask) {
  long p_train = num_params(net, false);
  long p_all = num_params(net, true);
  long dim = perturb_corrections ? p_all : p_train;
  auto dense = std::make_shared<std::vector<DenseSublayer>>(densify_net(net));
  PerturbedModel model;
  model.dim = dim;
  model.eval = [dense, &x, p_all](const Vec<double>& d) {
    Vec<double> full(d);
    full.resize(p_all, 0.0);
    return dense_forward_perturbed(*dense, x, full);
  };
  MarginReport rep = search_margin(model, y, budget, seed, mask);
  rep.x = x;
  return rep;
}

MarginReport layer_margin_upper_bound(const Net& net, const Vec<double>& x, int y,
                                      long budget, std::uint64_t seed) {
  Net m = materialize_rounds(net);
  std::vector<int> dims;
  long total = 0;
  for (const Sublayer& s : m.sublayers) {
    dims.push_back(s.out_dim());
    total += s.out_dim();
  }
  PerturbedModel model;
  model.dim = total;
  model.eval = [&net, &x, dims](const Vec<double>& d) {
    std::vector<Vec<double>> slices;
    size_t at = 0;
    for (int k : dims) {
      slices.emplace_back(d.begin() + at, d.begin() + at + k);
      at += k;
    }
    return forward_layer_perturbed(net, x, slices).at(0);
  };
  MarginReport rep = search_margin(model, y, budget, seed);
  rep.x = x;
  return rep;
}

double certified_lower_bound(const LipschitzProfile& p) {
  const double vals[] = {p.N,       p.kappa0,  p.kappa_th, p.kappa_f, p.sigma_h,
                         p.sigma_th, p.kappa_xi, p.sigma_xi, p.rho};
  for (double v : vals)
    if (!(v > 0)) fail("InvalidProfile", "profile constants must be positive");
  if (!(p.rho < 1)) fail("InvalidProfile", "correction radius must be < 1");
  double terms[] = {p.N / p.kappa0,
                    p.rho / p.kappa0,
                    p.sigma_th,
                    p.sigma_xi,
                    1 / (2 * p.kappa_th),
                    p.rho / (2 * p.kappa_th * p.N),
                    p.sigma_h / (2 * p.kappa_xi * p.N),
                    p.rho / (4 * p.N * p.kappa_f * p.kappa_xi),
                    1 / (4 * p.kappa_f * p.kappa_xi)};
  return *std::min_element(std::begin(terms), std::end(terms));
}

LipschitzProfile estimate_profile(const Net& net, const std::vector<Vec<double>>& inputs) {
  if (inputs.empty()) fail("EmptyInputSet", "profile estimation needs inputs");
  Net m = materialize_rounds(net);
  size_t L = m.sublayers.size();
  // M[s] = max over inputs of the norm entering sublayer s (M[0] = input).
  std::vector<double> M(L + 1, 0.0);
  double N = 1.0;
  for (const Vec<double>& x : inputs) {
    std::vector<Vec<double>> rec;
    forward(m, x, &rec);
    M[0] = std::max(M[0], l2_norm_double(x));
    for (size_t s = 0; s < L; ++s) {
      double h = l2_norm_double(rec[s]);
      M[s + 1] = std::max(M[s + 1], h);
      N = std::max(N, h);
    }
  }

  LipschitzProfile p;
  p.N = N;
  p.rho = p.sigma_h = p.sigma_th = p.sigma_xi = 1.0 / 3.0;

  // kappa_f: worst per-block (between corrections) product of Frobenius norms.
  double kf = 1.0, cur = 1.0;
  for (const Sublayer& s : m.sublayers) {
    if (s.correction) {
      kf = std::max(kf, cur);
      cur = 1.0;
    } else {
      cur *= std::max(frob(s.W), 1.0);
    }
  }
  p.kappa_f = std::max(kf, cur);

  // kappa_th (and kappa0): sum over trainable sublayers of the downstream
  // amplification times the incoming norm, all over-estimated.
  double kth = 0.0;
  for (size_t s = 0; s < L; ++s) {
    if (m.sublayers[s].correction) continue;
    double amp = 1.0;
    for (size_t t = s + 1; t < L; ++t) amp *= frob(m.sublayers[t].W) + 1.0;
    kth += amp * (M[s] + 1.0);
  }
  p.kappa_th = std::max(kth, 1.0);
  p.kappa0 = p.kappa_th;

  // kappa_xi from the correction pairs.
  double kxi = 1.0;
  for (size_t s = 0; s + 1 < L; ++s) {
    if (!(m.sublayers[s].correction && m.sublayers[s + 1].correction)) continue;
    double b1 = 0;
    for (const Rational& v : m.sublayers[s].b) {
      double d = to_double(v);
      b1 += d * d;
    }
    double k = 2 * (frob(m.sublayers[s + 1].W) + p.sigma_xi) + frob(m.sublayers[s].W) +
               std::sqrt(b1) + 1.0;
    kxi = std::max(kxi, k);
    ++s;
  }
  p.kappa_xi = kxi;
  return p;
}

RobustnessResult robustness_property_test(const Net& net, const Vec<double>& x,
                                          long trials, std::uint64_t seed,
                                          double per_weight_bound) {
  Net m = materialize_rounds(net);
  long p_all = num_params(m, true);
  double base = forward(m, x).at(0);
  int base_sign = base >= 0 ? 1 : -1;
  // Positions of trainable weight entries in the flattened vector (biases and
  // correction parameters stay put).
  std::vector<long> weight_pos;
  long at = 0;
  for (int pass = 0; pass < 2; ++pass) {
    for (const Sublayer& s : m.sublayers) {
      if (s.correction != (pass == 1)) continue;
      if (pass == 0)
        for (long i = 0; i < static_cast<long>(s.W.data.size()); ++i)
          weight_pos.push_back(at + i);
      at += static_cast<long>(s.W.data.size()) + s.b.size();
    }
  }
  std::mt19937_64 rng(seed);
  RobustnessResult res;
  auto dense = densify_net(m);
  for (long t = 0; t < trials; ++t) {
    Vec<double> delta(p_all, 0.0);
    for (long pos : weight_pos)
      delta[pos] = (rng() & 1) ? per_weight_bound : -per_weight_bound;
    double out = dense_forward_perturbed(dense, x, delta);
    int sign = out >= 0 ? 1 : -1;
    if (sign != base_sign) {
      res.pass = false;
      res.counterexample = std::move(delta);
      return res;
    }
  }
  return res;
}

std::string margin_report_to_json(const MarginReport& r) {
  nlohmann::json j;
  j["x"] = r.x;
  j["y"] = r.y;
  if (r.upper_bound) j["upper_bound"] = *r.upper_bound;
  else j["upper_bound"] = nullptr;
  j["witness"] = r.witness;
  if (r.lower_bound) j["lower_bound"] = *r.lower_bound;
  else j["lower_bound"] = nullptr;
  j["restarts"] = r.restarts;
  j["evaluations"] = r.evaluations;
  j["seed"] = r.seed;
  return j.dump(2);
}

}  // namespace sma
