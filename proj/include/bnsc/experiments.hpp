#pragma once

// Experiment orchestration: learning curves of the stochastic complexity,
// slope fitting, generalisation error from F differences, model selection
// and the Laplace-functional property checks.

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bnsc/coefficients.hpp"
#include "bnsc/em.hpp"
#include "bnsc/evidence.hpp"
#include "bnsc/model.hpp"

namespace bnsc {

/// How stochastic complexities are evaluated for one replicate dataset.
struct EvidenceSettings {
  double prior_alpha = 1.0;
  EvidenceMethod method = EvidenceMethod::exact;
  std::size_t mc_draws = 100000;
  double max_allocations = kDefaultMaxAllocations;
};

/// F(X^n) for one dataset. `mc_seed` is only used by the mc method.
double complexity_of(const TrueModel& truth, const NetworkSpec& learner,
                     const EvidenceSettings& settings, const Dataset& data,
                     Seed mc_seed);

struct CurveConfig {
  TrueModel truth;
  NetworkSpec learner;
  EvidenceSettings evidence;
  std::vector<std::size_t> ns;
  std::size_t replicates = 100;
  Seed seed = 0;
  unsigned workers = 1;
};

// Empty when the configuration is usable.
std::vector<std::string> check_config(const CurveConfig& config);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares of value against log n. Needs at least three
/// points and two distinct n.
SlopeFit fit_slope(std::span<const std::pair<double, double>> points);

struct CurvePoint {
  std::size_t n = 0;
  std::size_t replicates = 0;
  double mean_F = 0.0;
  double stderr_F = 0.0;
};

struct LearningCurve {
  std::vector<CurvePoint> points;
  std::optional<SlopeFit> fit;
};

/// Points used for the slope: the upper half of the grid when it has five
/// or more sizes, otherwise all of them.
std::vector<std::pair<double, double>> slope_points(const LearningCurve& curve);

/// Replaces the evidence computation; receives (dataset, n, replicate).
using ComplexityHook =
    std::function<double(const Dataset&, std::size_t, std::size_t)>;

/// Replicate r draws one stream sample_dataset(truth, max n,
/// derive_seed(seed, r)); the dataset at each n is its prefix, so every
/// replicate's curve is nested.
LearningCurve run_curve(const CurveConfig& config, const ComplexityHook& hook = {});

// Header "n,replicates,mean_F,stderr_F".
void write_curve_csv(std::ostream& out, const LearningCurve& curve);
// "lambda_hat=<real> stderr=<real> mu=<real> half_d=<real>"
std::string curve_summary(const LearningCurve& curve, const CoefficientReport& report);

/// Per-replicate F values at one n, tagged with the seed that produced
/// their datasets.
struct FEnsemble {
  std::size_t n = 0;
  Seed seed = 0;
  std::vector<double> values;
};

/// Replicate r uses sample_dataset(truth, n, derive_seed(seed, r)), the same
/// datasets gen_error_direct() uses.
FEnsemble complexity_ensemble(const TrueModel& truth, const NetworkSpec& learner,
                              const EvidenceSettings& settings, std::size_t n,
                              std::size_t replicates, Seed seed, unsigned workers = 1);

/// mean F(n+1) - mean F(n) with the paired standard error. Throws
/// InvalidInput unless the ensembles share seed and replicate count and
/// differ by one sample.
ReplicateEstimate gen_error_from_F(const FEnsemble& at_n, const FEnsemble& at_next);

struct SelectConfig {
  TrueModel truth;
  std::vector<NetworkSpec> candidates;
  std::size_t n = 64;
  std::size_t replicates = 20;
  EvidenceSettings evidence;
  EmOptions em;
  Seed seed = 0;
  unsigned workers = 1;
};

struct SelectRow {
  std::size_t replicate = 0;
  std::size_t candidate = 0;
  double neg_log_Z0 = 0.0;
  double bic_score = 0.0;
  double singular_score = 0.0;
};

struct SelectResult {
  std::vector<SelectRow> rows;
  // chosen candidate per replicate for each score
  std::vector<std::size_t> gold_choice;
  std::vector<std::size_t> bic_choice;
  std::vector<std::size_t> singular_choice;
  double bic_agreement = 0.0;
  double singular_agreement = 0.0;
};

/// Per replicate and candidate: exact (or mc) -log Z0, the BIC score
/// -maxloglik + (d/2) log n, and the singular score -maxloglik + mu log n
/// with mu taken against the declared truth. Lowest score wins; scores
/// within 1e-9 go to the candidate with smaller d.
SelectResult run_select(const SelectConfig& config);

// Header "replicate,candidate,neg_log_Z0,bic_score,singular_score".
void write_select_csv(std::ostream& out, const SelectResult& result);

struct PropCheck {
  std::string name;
  double margin = 0.0;
  bool passed = false;
  std::string detail;
};

struct PropsReport {
  std::vector<PropCheck> checks;
  bool passed() const;
};

PropsReport run_props(Seed seed, unsigned workers = 1);

// One line per check: "<name> margin=<real> PASS|FAIL <detail>".
void write_props(std::ostream& out, const PropsReport& report);

/// Random truth/learner shape pair satisfying H <= K, S[k] <= T[k].
std::pair<TrueModel, NetworkSpec> random_compatible_shapes(Rng& rng, int max_hidden,
                                                           int max_states,
                                                           int max_observables);

}  // namespace bnsc
