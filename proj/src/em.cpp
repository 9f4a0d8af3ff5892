#include "bnsc/em.hpp"

#include <cmath>

#include "bnsc/errors.hpp"
#include "bnsc/evidence.hpp"

namespace bnsc {
namespace {

constexpr double kFloor = 1e-12;

void floor_and_normalize(std::vector<double>& v) {
  double total = 0.0;
  for (double& x : v) {
    x = std::max(x, kFloor);
    total += x;
  }
  for (double& x : v) x /= total;
}

}  // namespace

EmFit run_em(const NetworkSpec& spec, const Dataset& data, ParamSet init,
             double tol, int max_iter) {
  require_valid(spec);
  require_in_range(spec, data);
  if (data.size() == 0) throw InvalidInput("EM needs at least one sample");
  require_valid(spec, init);

  const auto patterns = group_patterns(data);
  const auto C = spec.cell_count();
  const auto K = static_cast<std::size_t>(spec.hidden_count());
  const auto M = static_cast<std::size_t>(spec.observable_count());
  std::vector<std::vector<int>> states(C);
  for (std::size_t c = 0; c < C; ++c) states[c] = cell_states(spec, c);

  EmFit fit;
  fit.params = std::move(init);
  auto& w = fit.params;
  double previous = log_likelihood(spec, w, patterns);
  std::vector<double> resp(C);

  for (int iter = 0; iter < max_iter; ++iter) {
    // expected sufficient statistics
    std::vector<std::vector<double>> mixing_counts(K);
    for (std::size_t k = 0; k < K; ++k) mixing_counts[k].assign(w.mixing[k].size(), 0.0);
    std::vector<std::vector<std::vector<double>>> emission_counts(C);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t j = 0; j < M; ++j) {
        emission_counts[c].emplace_back(spec.observable_states[j], 0.0);
      }
    }
    const auto weights = cell_weights(spec, w);
    for (const auto& pattern : patterns) {
      double total = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        double r = weights[c];
        for (std::size_t j = 0; j < M; ++j) r *= w.emission[c][j][pattern.x[j]];
        resp[c] = std::max(r, kFloor);
        total += resp[c];
      }
      for (std::size_t c = 0; c < C; ++c) {
        const double share = pattern.count * resp[c] / total;
        for (std::size_t k = 0; k < K; ++k) mixing_counts[k][states[c][k]] += share;
        for (std::size_t j = 0; j < M; ++j) emission_counts[c][j][pattern.x[j]] += share;
      }
    }
    for (std::size_t k = 0; k < K; ++k) {
      floor_and_normalize(mixing_counts[k]);
      w.mixing[k] = std::move(mixing_counts[k]);
    }
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t j = 0; j < M; ++j) {
        floor_and_normalize(emission_counts[c][j]);
        w.emission[c][j] = std::move(emission_counts[c][j]);
      }
    }
    const double current = log_likelihood(spec, w, patterns);
    fit.trace.push_back(current);
    fit.iterations = iter + 1;
    const bool converged = current - previous < tol;
    previous = current;
    if (converged) break;
  }
  fit.log_likelihood = previous;
  return fit;
}

EmFit fit_em(const NetworkSpec& spec, const Dataset& data, const EmOptions& options) {
  require_valid(spec);
  if (options.restarts < 1) throw InvalidInput("EM needs at least one restart");
  const auto flat = Prior::uniform(spec, 1.0);
  EmFit best;
  bool have_best = false;
  for (int r = 0; r < options.restarts; ++r) {
    auto rng = make_rng(derive_seed(options.seed, static_cast<std::uint64_t>(r)));
    auto fit = run_em(spec, data, sample_prior(spec, flat, rng), options.tol,
                      options.max_iter);
    if (!have_best || fit.log_likelihood > best.log_likelihood) {
      best = std::move(fit);
      have_best = true;
    }
  }
  return best;
}

}  // namespace bnsc
