#include "doctest.h"

#include <cmath>

#include "bnsc/em.hpp"
#include "bnsc/evidence.hpp"
#include "test_support.hpp"

using namespace bnsc;
using namespace bnsc::testing;

TEST_CASE("EM on a single observable reaches the empirical frequencies") {
  // any mixture of categoricals is a categorical, so the MLE is the
  // empirical distribution
  const NetworkSpec spec{{2}, {3}};
  const auto data = rows(1, {1, 1, 2, 3, 3, 3, 1, 2, 3, 3});
  const auto fit = fit_em(spec, data, EmOptions{5, 1e-12, 5000, 3});
  const double expected = 3 * std::log(0.3) + 2 * std::log(0.2) + 5 * std::log(0.5);
  CHECK(fit.log_likelihood == doctest::Approx(expected).epsilon(1e-8));

  const auto same = rows(1, {2, 2, 2, 2});
  CHECK(std::abs(fit_em(spec, same, EmOptions{3, 1e-12, 5000, 1}).log_likelihood) <= 1e-9);
}

TEST_CASE("EM log-likelihood never decreases") {
  auto rng = make_rng(70);
  for (int i = 0; i < 10; ++i) {
    const NetworkSpec spec{{2, 2}, {2, 3, 2}};
    TrueModel truth{NetworkSpec{{3}, spec.observable_states}, {}};
    truth.params = random_params(truth.spec, rng);
    const auto data = sample_dataset(truth, 80, derive_seed(71, i));
    const auto fit = run_em(spec, data, random_params(spec, rng), 0.0, 200);
    REQUIRE(fit.trace.size() >= 2);
    for (std::size_t t = 1; t < fit.trace.size(); ++t) CHECK(fit.trace[t] >= fit.trace[t - 1] - 1e-9);
    CHECK(check_params(spec, fit.params).empty());
  }
}

TEST_CASE("EM maximum dominates the embedded truth") {
  TrueModel truth{NetworkSpec{{2}, {2, 2, 3}},
                  ParamSet{{{0.35, 0.65}},
                           {{{0.9, 0.1}, {0.8, 0.2}, {0.1, 0.1, 0.8}}, {{0.2, 0.8}, {0.3, 0.7}, {0.6, 0.3, 0.1}}}}};
  const NetworkSpec learner{{3}, {2, 2, 3}};
  for (int i = 0; i < 5; ++i) {
    const auto data = sample_dataset(truth, 150, derive_seed(80, i));
    const auto fit = fit_em(learner, data, EmOptions{20, 1e-10, 3000, derive_seed(81, i)});
    const double at_truth = log_likelihood(learner, embed_truth(truth, learner), group_patterns(data));
    CHECK(fit.log_likelihood >= at_truth - 1e-9);
  }
}

TEST_CASE("EM is reproducible") {
  const auto truth = product_truth(2, 0.3);
  const NetworkSpec spec{{2}, {2, 2}};
  const auto data = sample_dataset(truth, 40, 1);
  const auto a = fit_em(spec, data, EmOptions{4, 1e-9, 500, 9});
  const auto b = fit_em(spec, data, EmOptions{4, 1e-9, 500, 9});
  CHECK(a.log_likelihood == b.log_likelihood);
  CHECK(a.params.emission == b.params.emission);
}
