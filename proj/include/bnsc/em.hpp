#pragma once

// Maximum-likelihood fitting of the latent-class likelihood by EM.

#include <vector>

#include "bnsc/model.hpp"

namespace bnsc {

struct EmOptions {
  int restarts = 20;
  double tol = 1e-8;
  int max_iter = 2000;
  Seed seed = 0;
};

struct EmFit {
  ParamSet params;
  double log_likelihood = 0.0;
  // Log-likelihood after each iteration of the winning restart.
  std::vector<double> trace;
  int iterations = 0;
};

/// One EM run from `init`. Responsibilities and updated parameters are
/// floored at 1e-12 before normalisation.
EmFit run_em(const NetworkSpec& spec, const Dataset& data, ParamSet init,
             double tol, int max_iter);

/// Best of `restarts` runs from Dirichlet(1) initialisations; restart r
/// uses derive_seed(seed, r).
EmFit fit_em(const NetworkSpec& spec, const Dataset& data, const EmOptions& options);

}  // namespace bnsc
