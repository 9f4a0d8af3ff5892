#include "bnsc/coefficients.hpp"

#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "bnsc/errors.hpp"

namespace bnsc {
namespace {

// Shape checks only; coefficients never look at parameter values.
void require_shapes(const TrueModel& truth, const NetworkSpec& learner) {
  require_valid(learner);
  for (int s : truth.spec.hidden_states) {
    if (s < 1) throw InvalidInput("true state counts must be at least 1");
  }
  require_compatible(truth, learner);
}

long long observable_excess(const NetworkSpec& spec) {
  long long sum = 0;
  for (int y : spec.observable_states) sum += y - 1;
  return sum;
}

long long true_cell_count(const TrueModel& truth) {
  long long product = 1;
  for (int s : truth.spec.hidden_states) product *= s;
  return product;
}

}  // namespace

HalfInteger lemma2_coeff(const TrueModel& truth, const NetworkSpec& learner) {
  require_shapes(truth, learner);
  long long inner = observable_excess(learner) * true_cell_count(truth);
  for (int s : truth.spec.hidden_states) inner += s - 1;
  return {inner};
}

HalfInteger lemma3_coeff(const TrueModel& truth, const NetworkSpec& learner) {
  require_shapes(truth, learner);
  const auto& S = truth.spec.hidden_states;
  const auto& T = learner.hidden_states;
  long long total = 0;
  for (std::size_t k = 0; k < T.size(); ++k) {
    total += k < S.size() ? T[k] - S[k] : T[k] - 1;
  }
  return HalfInteger::from_int(total);
}

CoefficientReport theorem1_mu(const TrueModel& truth, const NetworkSpec& learner) {
  require_shapes(truth, learner);
  const auto& S = truth.spec.hidden_states;
  const auto& T = learner.hidden_states;
  const long long sum_s = std::accumulate(S.begin(), S.end(), 0LL);
  const long long sum_t = std::accumulate(T.begin(), T.end(), 0LL);
  const auto H = static_cast<long long>(S.size());
  const auto K = static_cast<long long>(T.size());

  CoefficientReport report;
  report.mu = HalfInteger{observable_excess(learner) * true_cell_count(truth)} -
              HalfInteger{sum_s} + HalfInteger{H} +
              HalfInteger::from_int(sum_t - K);
  report.lemma2 = lemma2_coeff(truth, learner);
  report.lemma3 = lemma3_coeff(truth, learner);
  report.d = dimension(learner);
  report.half_d = HalfInteger{report.d};
  return report;
}

double penalty(const CoefficientReport& report, Criterion criterion, double n) {
  if (!(n >= 2.0)) throw InvalidInput("penalty: n must be at least 2");
  const auto coefficient =
      criterion == Criterion::bic ? report.half_d : report.mu;
  return coefficient.value() * std::log(n);
}

std::string format_report(const CoefficientReport& report) {
  return fmt::format("d={} half_d={:.1f} lemma2={:.1f} lemma3={:.1f} mu={:.1f}", report.d,
                     report.half_d.value(), report.lemma2.value(),
                     report.lemma3.value(), report.mu.value());
}

}  // namespace bnsc
