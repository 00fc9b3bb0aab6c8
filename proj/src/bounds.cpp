#include "sma/bounds.hpp"

#include <cmath>

namespace sma {

double surrogate_loss(double margin_value, double gamma) {
  if (!(gamma > 0)) fail("InvalidGamma", "gamma must be positive");
  if (margin_value <= 0) return 1.0;
  if (margin_value >= gamma) return 0.0;
  return 1.0 - margin_value / gamma;
}

double rademacher_bound(const BoundQuery& q) {
  if (q.n < 8) fail("TooFewSamples", "bound requires n >= 8");
  if (!(q.alpha > 0) || q.p < 1 || !(q.gamma > 0) || !(q.c_rad > 0))
    fail("InvalidQuery", "alpha, p, gamma, c_rad must be positive");
  double n = static_cast<double>(q.n);
  return q.c_rad * q.alpha * std::log(n) * std::sqrt(std::log(q.p)) /
         (q.gamma * std::sqrt(n));
}

long solve_sample_complexity(double alpha, double p, double gamma, double eps, double c_rad) {
  if (!(eps > 0)) fail("InvalidQuery", "eps must be positive");
  BoundQuery q;
  q.alpha = alpha;
  q.p = p;
  q.gamma = gamma;
  q.c_rad = c_rad;
  auto bound = [&](long n) {
    q.n = n;
    return rademacher_bound(q);
  };
  long lo = 8;
  if (bound(lo) <= eps) return lo;
  long hi = 16;
  while (bound(hi) > eps) {
    if (hi > (1L << 60)) fail("InvalidQuery", "sample complexity exceeds 2^60");
    hi *= 2;
  }
  // Invariant: bound(lo) > eps >= bound(hi); the tail is decreasing for n >= 8.
  while (hi - lo > 1) {
    long mid = lo + (hi - lo) / 2;
    (bound(mid) <= eps ? hi : lo) = mid;
  }
  return hi;
}

double sm_bound(double eps_surrogate, long n, double delta_conf) {
  if (n < 1) fail("InvalidQuery", "n must be >= 1");
  if (!(delta_conf > 0) || !(delta_conf < 1))
    fail("InvalidQuery", "delta_conf must lie in (0,1)");
  return 5.0 * eps_surrogate + 2.0 * std::sqrt(std::log(2.0 / delta_conf) / n);
}

long sample_complexity_from_net(const Net& net, double gamma_hat, double eps, double c_rad) {
  if (!(gamma_hat > 0)) fail("InvalidQuery", "gamma_hat must be positive");
  double alpha = to_double(l1_norm(net));
  double p = static_cast<double>(num_params(net, false));
  return solve_sample_complexity(alpha, p, gamma_hat, eps, c_rad);
}

}  // namespace sma
