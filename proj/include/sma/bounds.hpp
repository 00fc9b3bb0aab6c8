#pragma once

#include "sma/ffnet.hpp"

namespace sma {

struct BoundQuery {
  double alpha = 1;     // l1 bound on the trainable parameters
  double p = 1;         // parameter count (real-valued so ln p can be pinned exactly in tests)
  double gamma = 1;     // margin level
  double eps = 0.1;     // target error
  long n = 0;           // sample count
  double delta_conf = 0.01;
  double c_rad = 1;     // leading constant of the Rademacher bound
};

// Ramp loss: 1 for margin <= 0, 1 - margin/gamma on (0, gamma), 0 past gamma.
double surrogate_loss(double margin_value, double gamma);

// c_rad * alpha * ln(n) * sqrt(ln p) / (gamma * sqrt(n)); needs n >= 8 so the
// expression is decreasing in n.
double rademacher_bound(const BoundQuery& q);

// Smallest n >= 8 with rademacher_bound(n) <= eps.
long solve_sample_complexity(double alpha, double p, double gamma, double eps, double c_rad = 1);

// 5*eps_surrogate + 2*sqrt(ln(2/delta_conf)/n).
double sm_bound(double eps_surrogate, long n, double delta_conf);

// alpha = ||theta||_1 and p read off the net; gamma_hat typically a certified
// margin lower bound.
long sample_complexity_from_net(const Net& net, double gamma_hat, double eps, double c_rad = 1);

}  // namespace sma
