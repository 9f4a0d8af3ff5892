#include "doctest.h"

#include <cmath>

#include "bnsc/divergence.hpp"
#include "bnsc/errors.hpp"
#include "test_support.hpp"

using namespace bnsc;
using namespace bnsc::testing;

namespace {

// 0.5 log 2 + 0.5 log(2/3), from tests/oracles/evidence_oracle.py
constexpr double kHalfVsQuarter = 0.14384103622589042;

TrueModel random_truth_for(const NetworkSpec& learner, Rng& rng) {
  TrueModel truth;
  const int H = 1 + static_cast<int>(rng() % learner.hidden_states.size());
  for (int k = 0; k < H; ++k) {
    truth.spec.hidden_states.push_back(1 + static_cast<int>(rng() % learner.hidden_states[k]));
  }
  truth.spec.observable_states = learner.observable_states;
  truth.params = random_params(truth.spec, rng, 0.8);
  return truth;
}

}  // namespace

TEST_CASE("categorical_kl") {
  const std::vector<double> p{0.5, 0.5}, q{0.25, 0.75};
  CHECK(categorical_kl(p, q).nats == doctest::Approx(kHalfVsQuarter).epsilon(1e-14));
  CHECK(categorical_kl(p, p).nats == 0.0);
  const std::vector<double> zero_p{1.0, 0.0}, zero_q{0.0, 1.0};
  CHECK(categorical_kl(zero_p, p).nats == doctest::Approx(std::log(2.0)));
  CHECK(categorical_kl(p, zero_q).is_infinite());
}

TEST_CASE("kl_full") {
  SUBCASE("embedded truth") {
    const auto truth = bernoulli_truth(0.5);
    const NetworkSpec learner{{2}, {2}};
    CHECK(kl_full(truth, learner, embed_truth(truth, learner)).nats == 0.0);
  }
  SUBCASE("Bernoulli(0.5) against Bernoulli(0.25)") {
    const auto truth = bernoulli_truth(0.5);
    const NetworkSpec learner{{2}, {2}};
    CHECK(kl_full(truth, learner, single_node(0.5, 0.25, 0.25)).nats ==
          doctest::Approx(kHalfVsQuarter).epsilon(1e-13));
  }
  SUBCASE("infinite when the learner misses a state") {
    const auto truth = bernoulli_truth(0.5);
    const NetworkSpec learner{{2}, {2}};
    CHECK(kl_full(truth, learner, single_node(0.5, 1.0, 1.0)).is_infinite());
  }
  SUBCASE("zero exactly when the tables agree") {
    auto rng = make_rng(8);
    for (int i = 0; i < 100; ++i) {
      const NetworkSpec learner{{2}, {2, 3}};
      const auto truth = random_truth_for(learner, rng);
      const auto w = random_params(learner, rng);
      const double kl = kl_full(truth, learner, w).nats;
      CHECK(kl >= 0.0);
      double max_gap = 0.0;
      for (std::size_t xi = 0; xi < learner.observation_space_size(); ++xi) {
        const auto x = observation_at(learner, xi);
        max_gap = std::max(max_gap, std::abs(joint_prob(learner, w, x) - true_density(truth, x)));
      }
      CHECK((kl <= 1e-10) == (max_gap <= 1e-6));
      CHECK(kl_full(truth, learner, embed_truth(truth, learner)).nats <= 1e-12);
    }
  }
}

TEST_CASE("kl_full vanishes at embedded truths of random shapes") {
  auto rng = make_rng(31);
  for (int i = 0; i < 100; ++i) {
    NetworkSpec learner;
    const int K = 1 + static_cast<int>(rng() % 3);
    for (int k = 0; k < K; ++k) learner.hidden_states.push_back(2 + static_cast<int>(rng() % 2));
    const int M = 1 + static_cast<int>(rng() % 3);
    for (int j = 0; j < M; ++j) learner.observable_states.push_back(2 + static_cast<int>(rng() % 2));
    const auto truth = random_truth_for(learner, rng);
    const auto kl = kl_full(truth, learner, embed_truth(truth, learner));
    CHECK(std::abs(kl.nats) <= 1e-12);
  }
}

TEST_CASE("singular set of the one-observable learner") {
  const double b_star = 0.3;
  const auto truth = bernoulli_truth(b_star);
  const NetworkSpec learner{{2}, {2}};
  for (int i = 0; i < 10; ++i) {
    const double t = (i + 0.5) / 10.0;
    CHECK(kl_full(truth, learner, single_node(1.0, b_star, t)).nats <= 1e-12);
    CHECK(kl_full(truth, learner, single_node(0.0, t, b_star)).nats <= 1e-12);
    CHECK(kl_full(truth, learner, single_node(t, b_star, b_star)).nats <= 1e-12);
  }
  auto rng = make_rng(17);
  for (int i = 0; i < 100; ++i) {
    const double a = uniform01(rng), b1 = uniform01(rng), b2 = uniform01(rng);
    CHECK(kl_full(truth, learner, single_node(a, b1, b2)).nats > 0.0);
  }
}

TEST_CASE("empirical_kl") {
  const auto truth = bernoulli_truth(0.5);
  const NetworkSpec learner{{2}, {2}};
  const auto data = sample_dataset(truth, 40, 3);
  CHECK(empirical_kl(truth, learner, embed_truth(truth, learner), data) == 0.0);

  const auto one = rows(1, {1});
  CHECK(empirical_kl(truth, learner, single_node(0.5, 0.25, 0.25), one) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(std::isinf(empirical_kl(truth, learner, single_node(0.5, 0.0, 0.0), one)));
  CHECK_THROWS_AS(empirical_kl(truth, learner, single_node(0.5, 0.5, 0.5), Dataset(1)),
                  InvalidInput);
}

TEST_CASE("empirical_kl averages to kl_full") {
  TrueModel truth{NetworkSpec{{2}, {2, 2}},
                  ParamSet{{{0.4, 0.6}}, {{{0.8, 0.2}, {0.3, 0.7}}, {{0.1, 0.9}, {0.6, 0.4}}}}};
  const NetworkSpec learner{{2}, {2, 2}};
  const ParamSet w{{{0.5, 0.5}}, {{{0.6, 0.4}, {0.5, 0.5}}, {{0.3, 0.7}, {0.4, 0.6}}}};
  const double exact = kl_full(truth, learner, w).nats;
  const int R = 200;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < R; ++r) {
    const double v = empirical_kl(truth, learner, w, sample_dataset(truth, 100, derive_seed(5, r)));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / R;
  const double se = std::sqrt((sum_sq / R - mean * mean) / (R - 1));
  CHECK(std::abs(mean - exact) <= 4.0 * se);
}

TEST_CASE("cell_kl") {
  TrueModel truth{NetworkSpec{{1}, {2, 2}}, ParamSet{{{1.0}}, {{{0.5, 0.5}, {0.5, 0.5}}}}};
  const NetworkSpec learner{{2}, {2, 2}};
  ParamSet w{{{0.5, 0.5}}, {{{0.25, 0.75}, {0.25, 0.75}}, {{0.5, 0.5}, {0.5, 0.5}}}};
  CHECK(cell_kl(truth, 0, learner, w, 0).nats == doctest::Approx(2 * kHalfVsQuarter).epsilon(1e-13));
  CHECK(cell_kl(truth, 0, learner, w, 1).nats == 0.0);
  CHECK_THROWS_AS(cell_kl(truth, 1, learner, w, 0), InvalidInput);

  // one observable: the cell kernel is the whole distribution
  const auto one = bernoulli_truth(0.5);
  const NetworkSpec single{{2}, {2}};
  const auto p = single_node(0.5, 0.25, 0.25);
  CHECK(cell_kl(one, 0, single, p, 0).nats == doctest::Approx(kl_full(one, single, p).nats));
}

TEST_CASE("cell_kl agrees with a brute-force sum over observations") {
  auto rng = make_rng(44);
  const NetworkSpec learner{{2, 2}, {3, 2, 2}};
  for (int i = 0; i < 30; ++i) {
    TrueModel truth{NetworkSpec{{2, 1}, learner.observable_states}, {}};
    truth.params = random_params(truth.spec, rng);
    const auto w = random_params(learner, rng);
    const std::size_t tc = rng() % truth.spec.cell_count();
    const std::size_t lc = rng() % learner.cell_count();
    double brute = 0.0;
    for (std::size_t xi = 0; xi < learner.observation_space_size(); ++xi) {
      const auto x = observation_at(learner, xi);
      double f = 1.0, g = 1.0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        f *= truth.params.emission[tc][j][x[j]];
        g *= w.emission[lc][j][x[j]];
      }
      brute += f * std::log(f / g);
    }
    CHECK(std::abs(cell_kl(truth, tc, learner, w, lc).nats - brute) <= 1e-12);
  }
}

TEST_CASE("sample_near_truth") {
  TrueModel truth{NetworkSpec{{2}, {2, 3}},
                  ParamSet{{{0.3, 0.7}}, {{{0.6, 0.4}, {0.2, 0.3, 0.5}}, {{0.1, 0.9}, {0.4, 0.4, 0.2}}}}};
  const NetworkSpec learner{{3, 2}, {2, 3}};
  const auto centre = embed_truth(truth, learner);

  const auto a = sample_near_truth(truth, learner, 0.05, 12);
  CHECK(check_params(learner, a).empty());
  CHECK(in_near_truth_region(truth, learner, a, 0.1));
  CHECK(a.emission == sample_near_truth(truth, learner, 0.05, 12).emission);

  const auto tiny = sample_near_truth(truth, learner, 1e-13, 4);
  for (std::size_t k = 0; k < tiny.mixing.size(); ++k) {
    for (std::size_t t = 0; t < tiny.mixing[k].size(); ++t) {
      CHECK(std::abs(tiny.mixing[k][t] - centre.mixing[k][t]) <= 1e-11);
    }
  }

  // mean divergence shrinks with the radius
  double previous = std::numeric_limits<double>::infinity();
  for (double eps : {0.1, 0.01, 0.001}) {
    double sum = 0.0;
    for (int d = 0; d < 100; ++d) {
      sum += kl_full(truth, learner, sample_near_truth(truth, learner, eps, derive_seed(77, d))).nats;
    }
    CHECK(sum / 100 < previous);
    previous = sum / 100;
  }
  CHECK(previous < 1e-4);

  CHECK_THROWS_AS(sample_near_truth(truth, learner, 0.0, 1), InvalidInput);
  // radius beyond the simplex: every renormalised point is accepted
  CHECK(check_params(learner, sample_near_truth(truth, learner, 5.0, 1)).empty());
}
