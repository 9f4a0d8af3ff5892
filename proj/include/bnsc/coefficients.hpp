#pragma once

// Learning-coefficient bound for naive Bayesian networks with latent nodes
// and the BIC coefficient it is compared against. All values are exact
// half-integers.

#include <compare>
#include <string>

#include "bnsc/model.hpp"

namespace bnsc {

/// A value v stored as the integer 2v.
struct HalfInteger {
  long long twice = 0;

  static constexpr HalfInteger from_int(long long v) { return {2 * v}; }
  constexpr double value() const { return static_cast<double>(twice) / 2.0; }

  friend constexpr HalfInteger operator+(HalfInteger a, HalfInteger b) {
    return {a.twice + b.twice};
  }
  friend constexpr HalfInteger operator-(HalfInteger a, HalfInteger b) {
    return {a.twice - b.twice};
  }
  friend constexpr auto operator<=>(HalfInteger, HalfInteger) = default;
};

struct CoefficientReport {
  HalfInteger mu;
  HalfInteger lemma2;  // regular part: identifiable sub-model of the truth
  HalfInteger lemma3;  // redundant-state part
  HalfInteger half_d;
  long long d = 0;
};

/// (1/2) { Msum * prod_k S[k] + sum_k (S[k] - 1) }, Msum = sum_j (Y[j] - 1).
HalfInteger lemma2_coeff(const TrueModel& truth, const NetworkSpec& learner);

/// sum_{k<=H} (T[k] - S[k]) + sum_{k>H} (T[k] - 1).
HalfInteger lemma3_coeff(const TrueModel& truth, const NetworkSpec& learner);

/// mu = (1/2) Msum prod S - (1/2) sum S + H/2 + sum T - K, evaluated
/// directly from the closed form (not as lemma2 + lemma3).
CoefficientReport theorem1_mu(const TrueModel& truth, const NetworkSpec& learner);

enum class Criterion { bic, singular };

/// bic: (d/2) log n; singular: mu log n. Requires n >= 2.
double penalty(const CoefficientReport& report, Criterion criterion, double n);

// "d=<int> half_d=<real> lemma2=<real> lemma3=<real> mu=<real>"
std::string format_report(const CoefficientReport& report);

}  // namespace bnsc
