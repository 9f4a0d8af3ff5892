#pragma once

// Bayesian evidence for naive latent-class networks under independent
// Dirichlet priors: exact latent marginalisation, prior-sampling Monte
// Carlo, stochastic complexity, predictive distribution and generalisation
// error.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bnsc/model.hpp"

namespace bnsc {

/// Independent Dirichlet concentrations, one vector per simplex of a
/// ParamSet (same layout).
struct Prior {
  std::vector<std::vector<double>> alpha_a;
  std::vector<std::vector<std::vector<double>>> alpha_b;

  static Prior uniform(const NetworkSpec& spec, double concentration = 1.0);
};

void require_valid(const NetworkSpec& spec, const Prior& prior);

/// One parameter draw from the prior.
ParamSet sample_prior(const NetworkSpec& spec, const Prior& prior, Rng& rng);

/// log prod_i p(X_i|w), grouped by pattern; -inf if some pattern is impossible.
double log_likelihood(const NetworkSpec& spec, const ParamSet& params,
                      std::span<const Pattern> patterns);

enum class EvidenceMethod { exact, mc };

struct EvidenceResult {
  double log_Z0 = 0.0;
  // Filled in by stochastic_complexity(), which needs the truth.
  std::optional<double> S_emp;
  std::optional<double> F;
  EvidenceMethod method = EvidenceMethod::exact;
  double std_error = 0.0;
  std::uint64_t terms = 0;
};

inline constexpr double kDefaultMaxAllocations = 1e8;

/// Number of allocations the exact method enumerates:
/// prod_p binom(n_p + C - 1, C - 1) over distinct patterns p.
double exact_allocation_count(const NetworkSpec& spec, const Dataset& data);

/// Exact log marginal likelihood. Rows are grouped into distinct patterns;
/// every allocation of each pattern's multiplicity to the C joint hidden
/// cells contributes a multinomial coefficient times Dirichlet-multinomial
/// integrals for each hidden node (over its marginal counts) and for each
/// (cell, observable) pair. Throws Infeasible above `max_allocations`.
EvidenceResult log_evidence_exact(const NetworkSpec& spec, const Prior& prior,
                                  const Dataset& data,
                                  double max_allocations = kDefaultMaxAllocations);

/// Prior-sampling estimate log mean_d prod_i p(X_i|w_d). Draws are
/// generated in fixed blocks with per-block seeds, so the estimate is
/// independent of `workers`. std_error is the delta-method standard error
/// of the log estimate.
EvidenceResult log_evidence_mc(const NetworkSpec& spec, const Prior& prior,
                               const Dataset& data, std::size_t draws, Seed seed,
                               unsigned workers = 1);

/// S_emp = -sum_i log q(X_i), F = -log Z0 - S_emp.
EvidenceResult stochastic_complexity(EvidenceResult evidence,
                                     const TrueModel& truth, const Dataset& data);

/// p(x|X^n) = Z0(X^n + x) / Z0(X^n), exact.
double predictive(const NetworkSpec& spec, const Prior& prior,
                  const Dataset& data, std::span<const int> x);

/// p(x|X^n) for every x, indexed like observation_at().
std::vector<double> predictive_distribution(const NetworkSpec& spec,
                                            const Prior& prior,
                                            const Dataset& data);

struct ReplicateEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::vector<double> values;  // per replicate, in replicate order
};

ReplicateEstimate summarize(std::vector<double> values);

/// G(n) = E sum_x q(x) log(q(x) / p(x|X^n)) over `replicates` datasets.
/// Replicate r uses sample_dataset(truth, n, derive_seed(seed, r)).
ReplicateEstimate gen_error_direct(const TrueModel& truth, const NetworkSpec& spec,
                                   const Prior& prior, std::size_t n,
                                   std::size_t replicates, Seed seed,
                                   unsigned workers = 1);

using BoxFunction = std::function<double(std::span<const double>)>;

/// -log integral over [lower, upper] of exp(-n S(w)) psi(w) dw, by
/// tensor-product midpoint quadrature with `grid` points per axis.
/// At most three dimensions. Throws NumericalFailure if the integral is 0.
double laplace_functional(const BoxFunction& S, const BoxFunction& psi,
                          std::span<const double> lower,
                          std::span<const double> upper, double n, int grid);

}  // namespace bnsc
