#pragma once

// Exact Kullback informations over the finite observation space.

#include <cmath>
#include <limits>
#include <span>

#include "bnsc/model.hpp"

namespace bnsc {

/// Divergence in nats. Infinite when the truth puts mass where the
/// learner has none.
struct KLValue {
  double nats = 0.0;

  static KLValue infinite() { return {std::numeric_limits<double>::infinity()}; }
  // Clamps round-off negatives within 1e-12 of zero.
  static KLValue from_sum(double sum) { return {sum < 0.0 && sum >= -1e-12 ? 0.0 : sum}; }

  bool is_infinite() const { return std::isinf(nats); }
};

// sum_l p_l log(p_l / q_l) with 0 log 0 = 0.
KLValue categorical_kl(std::span<const double> p, std::span<const double> q);

/// H(w) = sum_x q(x) log(q(x) / p(x|w)).
KLValue kl_full(const TrueModel& truth, const NetworkSpec& spec,
                const ParamSet& params);

/// (1/n) sum_i log(q(X_i) / p(X_i|w)). May be negative; +inf when some
/// observed X_i has p(X_i|w) = 0. Requires n >= 1.
double empirical_kl(const TrueModel& truth, const NetworkSpec& spec,
                    const ParamSet& params, const Dataset& data);

/// Divergence between the product-categorical kernel of true cell
/// `true_cell` and learner cell `learner_cell`.
KLValue cell_kl(const TrueModel& truth, std::size_t true_cell,
                const NetworkSpec& spec, const ParamSet& params,
                std::size_t learner_cell);

/// Membership in the box neighbourhood W(eps) around the embedded truth.
/// Cells aligned with a true cell are centred on that cell's tables; all
/// other cells on the tables of the first true cell. Free coordinates are
/// the non-first entries of every simplex vector.
bool in_near_truth_region(const TrueModel& truth, const NetworkSpec& spec,
                          const ParamSet& params, double eps);

/// Random point of W(eps): embedded truth with every coordinate moved by
/// at most eps (extra mixing weights only upward), renormalised, and
/// accepted if it lies in W(2 eps). Throws NumericalFailure after 1000
/// rejections.
ParamSet sample_near_truth(const TrueModel& truth, const NetworkSpec& spec,
                           double eps, Seed seed);

}  // namespace bnsc
