#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "sma/ffnet.hpp"

namespace sma {

// Constants of the certificate formula. All must be positive, rho < 1.
struct LipschitzProfile {
  double N = 1;        // hidden-norm bound
  double kappa0 = 1;   // input-layer parameter Lipschitz
  double kappa_th = 1; // parameter Lipschitz of the layers
  double kappa_f = 1;  // hidden-input Lipschitz of the layers
  double sigma_h = 1;  // hidden-perturbation validity radius
  double sigma_th = 1; // parameter validity radius
  double kappa_xi = 1; // correction parameter Lipschitz
  double sigma_xi = 1; // correction parameter radius
  double rho = 0.5;    // correction radius
};

struct MarginReport {
  Vec<double> x;
  int y = 0;
  std::optional<double> upper_bound;  // smallest flipping ||delta||_2 found
  Vec<double> witness;                // the flipping delta (empty if none)
  std::optional<double> lower_bound;  // certificate, if a profile was supplied
  long restarts = 0;
  long evaluations = 0;
  std::uint64_t seed = 0;
};

// Model abstraction for the search: scalar output as a function of a
// perturbation vector of fixed dimension (delta = 0 is the unperturbed model).
struct PerturbedModel {
  long dim = 0;
  std::function<double(const Vec<double>&)> eval;
};

// Generic search: multi-restart directions (finite-difference descent first,
// then Gaussian), exponential bracketing and bisection along each ray to
// 1e-6, then per-coordinate pruning of the best witness. mask (optional)
// freezes coordinates at zero. Budget counts model evaluations.
MarginReport search_margin(const PerturbedModel& model, int y, long budget,
                           std::uint64_t seed,
                           const std::vector<uint8_t>& mask = {});

// Parameter-space margin of a scalar-output net at (x, y). perturb_corrections
// extends the search to correction-layer parameters; mask (over the flattened
// parameter vector) freezes coordinates.
MarginReport margin_upper_bound(const Net& net, const Vec<double>& x, int y,
                                long budget, std::uint64_t seed,
                                bool perturb_corrections = false,
                                const std::vector<uint8_t>& mask = {});

// Hidden-layer perturbation variant: delta slices are added after each
// materialized sublayer, scaled by max{max_j ||h_j||, 1}.
MarginReport layer_margin_upper_bound(const Net& net, const Vec<double>& x, int y,
                                      long budget, std::uint64_t seed);

// min{N/k0, rho/k0, s_th, s_xi, 1/(2k_th), rho/(2k_th N), s_h/(2k_xi N),
//     rho/(4 N k_f k_xi), 1/(4 k_f k_xi)}.
double certified_lower_bound(const LipschitzProfile& p);

// Conservative constants measured on the net over a finite input set; every
// constant is an over-estimate so the certificate stays valid.
LipschitzProfile estimate_profile(const Net& net, const std::vector<Vec<double>>& inputs);

// Perturbs every weight entry (not biases) by exactly +-per_weight_bound with
// seeded random signs and checks the output sign never changes. Returns the
// counterexample delta on failure.
struct RobustnessResult {
  bool pass = true;
  Vec<double> counterexample;  // flattened weight perturbation, empty if pass
};
RobustnessResult robustness_property_test(const Net& net, const Vec<double>& x,
                                          long trials, std::uint64_t seed,
                                          double per_weight_bound);

std::string margin_report_to_json(const MarginReport& r);

}  // namespace sma
