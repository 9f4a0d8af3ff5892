#include "doctest.h"

#include <cmath>
#include <sstream>

#include "bnsc/errors.hpp"
#include "bnsc/experiments.hpp"
#include "test_support.hpp"

using namespace bnsc;
using namespace bnsc::testing;

namespace {

CurveConfig small_curve() {
  CurveConfig config;
  config.truth = bernoulli_truth(0.5);
  config.learner = NetworkSpec{{2}, {2}};
  config.ns = {4, 8, 16};
  config.replicates = 12;
  config.seed = 5;
  return config;
}

}  // namespace

TEST_CASE("fit_slope") {
  std::vector<std::pair<double, double>> line, flat, noisy;
  for (double n : {8.0, 16.0, 32.0, 64.0}) {
    line.emplace_back(n, 1.5 * std::log(n) - 0.25);
    flat.emplace_back(n, 4.0);
  }
  const auto exact = fit_slope(line);
  CHECK(std::abs(exact.slope - 1.5) <= 1e-9);
  CHECK(std::abs(exact.intercept + 0.25) <= 1e-9);
  CHECK(exact.slope_stderr <= 1e-9);
  CHECK(std::abs(fit_slope(flat).slope) <= 1e-12);

  auto rng = make_rng(3);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (double n : {4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) noisy.emplace_back(n, 3.0 * std::log(n) + noise(rng));
  const auto fit = fit_slope(noisy);
  CHECK(fit.slope_stderr > 0.0);
  CHECK(std::abs(fit.slope - 3.0) <= 5.0 * fit.slope_stderr);

  const std::vector<std::pair<double, double>> same{{8, 1}, {8, 2}, {8, 3}};
  CHECK_THROWS_AS(fit_slope(same), InvalidInput);
  CHECK_THROWS_AS(fit_slope(std::span(line).first(2)), InvalidInput);
}

TEST_CASE("run_curve recovers an injected affine curve") {
  auto config = small_curve();
  config.ns = {4, 8, 16, 32, 64, 128};
  const auto curve = run_curve(config, [](const Dataset& data, std::size_t n, std::size_t) {
    CHECK(data.size() == n);
    return 2.5 * std::log(static_cast<double>(n)) + 1.0;
  });
  REQUIRE(curve.fit);
  CHECK(std::abs(curve.fit->slope - 2.5) <= 1e-9);
  CHECK(curve.fit->points == 3);  // upper half of six sizes
  for (const auto& p : curve.points) CHECK(p.stderr_F <= 1e-12);
}

TEST_CASE("run_curve datasets are nested across n") {
  auto config = small_curve();
  std::vector<Dataset> seen(config.ns.size() * config.replicates);
  run_curve(config, [&](const Dataset& data, std::size_t n, std::size_t r) {
    const std::size_t i = n == 4 ? 0 : n == 8 ? 1 : 2;
    seen[i * config.replicates + r] = data;
    return 0.0;
  });
  for (std::size_t r = 0; r < config.replicates; ++r) {
    CHECK(seen[r] == seen[2 * config.replicates + r].prefix(4));
    CHECK(seen[config.replicates + r] == seen[2 * config.replicates + r].prefix(8));
  }
}

TEST_CASE("run_curve is deterministic across worker counts") {
  auto config = small_curve();
  std::ostringstream one, many;
  write_curve_csv(one, run_curve(config));
  config.workers = 3;
  write_curve_csv(many, run_curve(config));
  CHECK(one.str() == many.str());
  CHECK(one.str().rfind("n,replicates,mean_F,stderr_F\n", 0) == 0);
}

TEST_CASE("run_curve validates its configuration") {
  auto config = small_curve();
  config.ns = {8, 4};
  CHECK_THROWS_AS(run_curve(config), InvalidInput);
  config = small_curve();
  config.replicates = 1;
  CHECK_THROWS_AS(run_curve(config), InvalidInput);
  config = small_curve();
  config.ns = {1, 4};
  CHECK_FALSE(check_config(config).empty());
  config = small_curve();
  config.ns = {4, 8};
  CHECK_FALSE(run_curve(config).fit.has_value());
}

TEST_CASE("curve summary line") {
  LearningCurve curve;
  curve.fit = SlopeFit{1.25, 0.0, 0.5, 3};
  CoefficientReport report;
  report.mu = HalfInteger{3};
  report.half_d = HalfInteger{3};
  CHECK(curve_summary(curve, report) == "lambda_hat=1.25 stderr=0.5 mu=1.5 half_d=1.5");
}

TEST_CASE("gen_error_from_F") {
  const auto truth = bernoulli_truth(0.5);
  const NetworkSpec learner{{2}, {2}};
  const auto at8 = complexity_ensemble(truth, learner, {}, 8, 40, 21);
  const auto at9 = complexity_ensemble(truth, learner, {}, 9, 40, 21);
  const auto g = gen_error_from_F(at8, at9);
  const auto direct = gen_error_direct(truth, learner, Prior::uniform(learner), 8, 40, 21);
  CHECK(std::abs(g.mean - direct.mean) <=
        4.0 * std::sqrt(g.std_error * g.std_error + direct.std_error * direct.std_error));

  const auto other_seed = complexity_ensemble(truth, learner, {}, 9, 40, 22);
  CHECK_THROWS_AS(gen_error_from_F(at8, other_seed), InvalidInput);
  CHECK_THROWS_AS(gen_error_from_F(at8, at8), InvalidInput);
  const auto fewer = complexity_ensemble(truth, learner, {}, 9, 30, 21);
  CHECK_THROWS_AS(gen_error_from_F(at8, fewer), InvalidInput);
}

TEST_CASE("gen_error_from_F is zero when the learner cannot learn") {
  // prior concentrated at the truth: F(n+1) - F(n) has mean ~0
  TrueModel truth{NetworkSpec{{2}, {2}}, single_node(0.3, 0.8, 0.4)};
  const NetworkSpec learner{{2}, {2}};
  FEnsemble a{10, 3, {}}, b{11, 3, {}};
  Prior sharp = Prior::uniform(learner);
  for (std::size_t k = 0; k < 2; ++k) sharp.alpha_a[0][k] = 1e7 * truth.params.mixing[0][k];
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t l = 0; l < 2; ++l) sharp.alpha_b[c][0][l] = 1e7 * truth.params.emission[c][0][l];
  }
  for (std::size_t r = 0; r < 20; ++r) {
    const auto data = sample_dataset(truth, 11, derive_seed(3, r));
    for (auto* e : {&a, &b}) {
      const auto d = data.prefix(e->n);
      e->values.push_back(*stochastic_complexity(log_evidence_exact(learner, sharp, d), truth, d).F);
    }
  }
  CHECK(std::abs(gen_error_from_F(a, b).mean) <= 1e-4);
}

TEST_CASE("run_select") {
  SelectConfig config;
  config.truth = bernoulli_truth(0.4);
  config.candidates = {NetworkSpec{{2}, {2}}};
  config.n = 20;
  config.replicates = 4;
  config.em.restarts = 3;
  const auto single = run_select(config);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(single.gold_choice[r] == 0);
    CHECK(single.bic_choice[r] == 0);
    CHECK(single.singular_choice[r] == 0);
  }
  CHECK(single.bic_agreement == 1.0);

  config.candidates = {NetworkSpec{{2}, {2}}, NetworkSpec{{3}, {2}}};
  const auto two = run_select(config);
  CHECK(two.rows.size() == 8);
  for (const auto& row : two.rows) {
    // identical max likelihood, so each penalty decides
    CHECK(row.bic_score >= row.singular_score);
  }
  std::ostringstream out;
  write_select_csv(out, two);
  CHECK(out.str().rfind("replicate,candidate,neg_log_Z0,bic_score,singular_score\n1,1,", 0) == 0);

  config.workers = 2;
  std::ostringstream threaded;
  write_select_csv(threaded, run_select(config));
  CHECK(threaded.str() == out.str());

  config.candidates = {NetworkSpec{{2}, {3}}};
  CHECK_THROWS_AS(run_select(config), InvalidInput);
}

TEST_CASE("random_compatible_shapes stays within bounds") {
  auto rng = make_rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto [truth, learner] = random_compatible_shapes(rng, 4, 5, 4);
    CHECK(check_compatible(truth, learner).empty());
    CHECK(validate_spec(learner).ok());
    CHECK(learner.hidden_count() <= 4);
    CHECK(learner.observable_count() <= 4);
  }
}
