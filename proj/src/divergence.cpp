#include "bnsc/divergence.hpp"

#include <fmt/format.h>

#include "bnsc/errors.hpp"

namespace bnsc {
namespace {

constexpr int kMaxRejections = 1000;

bool within_box(std::span<const double> v, std::span<const double> centre,
                double eps) {
  for (std::size_t l = 1; l < v.size(); ++l) {
    if (std::abs(v[l] - centre[l]) > eps) return false;
  }
  return true;
}

void perturb(std::vector<double>& v, std::span<const double> centre,
             std::size_t upward_from, double eps, Rng& rng) {
  double total = 0.0;
  for (std::size_t l = 0; l < v.size(); ++l) {
    const double u = uniform01(rng);
    const double step = l >= upward_from ? u * eps : (2.0 * u - 1.0) * eps;
    v[l] = std::max(0.0, centre[l] + step);
    total += v[l];
  }
  for (double& x : v) x /= total;
}

}  // namespace

KLValue categorical_kl(std::span<const double> p, std::span<const double> q) {
  double sum = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) {
    if (p[l] == 0.0) continue;
    if (q[l] == 0.0) return KLValue::infinite();
    sum += p[l] * std::log(p[l] / q[l]);
  }
  return KLValue::from_sum(sum);
}

KLValue kl_full(const TrueModel& truth, const NetworkSpec& spec,
                const ParamSet& params) {
  require_compatible(truth, spec);
  require_valid(spec, params);
  const auto X = spec.observation_space_size();
  double sum = 0.0;
  for (std::size_t i = 0; i < X; ++i) {
    const auto x = observation_at(spec, i);
    const double q = joint_prob(truth.spec, truth.params, x);
    if (q == 0.0) continue;
    const double p = joint_prob(spec, params, x);
    if (p == 0.0) return KLValue::infinite();
    sum += q * std::log(q / p);
  }
  return KLValue::from_sum(sum);
}

double empirical_kl(const TrueModel& truth, const NetworkSpec& spec,
                    const ParamSet& params, const Dataset& data) {
  if (data.size() == 0) throw InvalidInput("empirical_kl needs at least one sample");
  require_in_range(spec, data);
  double sum = 0.0;
  for (const auto& pattern : group_patterns(data)) {
    const double q = joint_prob(truth.spec, truth.params, pattern.x);
    const double p = joint_prob(spec, params, pattern.x);
    if (q == 0.0) {
      throw InvalidInput("dataset contains an observation impossible under the truth");
    }
    if (p == 0.0) return std::numeric_limits<double>::infinity();
    sum += pattern.count * std::log(q / p);
  }
  return sum / static_cast<double>(data.size());
}

KLValue cell_kl(const TrueModel& truth, std::size_t true_cell,
                const NetworkSpec& spec, const ParamSet& params,
                std::size_t learner_cell) {
  if (true_cell >= truth.params.emission.size() ||
      learner_cell >= params.emission.size()) {
    throw InvalidInput("cell_kl: cell index out of range");
  }
  const auto& p = truth.params.emission[true_cell];
  const auto& q = params.emission[learner_cell];
  if (p.size() != q.size() || q.size() != spec.observable_states.size()) {
    throw InvalidInput("cell_kl: observable count mismatch");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const auto term = categorical_kl(p[j], q[j]);
    if (term.is_infinite()) return term;
    sum += term.nats;
  }
  return KLValue::from_sum(sum);
}

bool in_near_truth_region(const TrueModel& truth, const NetworkSpec& spec,
                          const ParamSet& params, double eps) {
  if (!check_params(spec, params).empty()) return false;
  const auto centre = embed_truth(truth, spec);
  for (std::size_t k = 0; k < spec.hidden_states.size(); ++k) {
    if (!within_box(params.mixing[k], centre.mixing[k], eps)) return false;
  }
  for (std::size_t c = 0; c < params.emission.size(); ++c) {
    for (std::size_t j = 0; j < params.emission[c].size(); ++j) {
      if (!within_box(params.emission[c][j], centre.emission[c][j], eps)) return false;
    }
  }
  return true;
}

ParamSet sample_near_truth(const TrueModel& truth, const NetworkSpec& spec,
                           double eps, Seed seed) {
  if (!(eps > 0.0)) throw InvalidInput("sample_near_truth: eps must be positive");
  const auto centre = embed_truth(truth, spec);
  const auto H = truth.spec.hidden_states.size();
  auto rng = make_rng(seed);
  ParamSet point = centre;
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    for (std::size_t k = 0; k < point.mixing.size(); ++k) {
      const std::size_t upward_from =
          k < H ? static_cast<std::size_t>(truth.spec.hidden_states[k]) : 1;
      perturb(point.mixing[k], centre.mixing[k], upward_from, eps, rng);
    }
    for (std::size_t c = 0; c < point.emission.size(); ++c) {
      for (std::size_t j = 0; j < point.emission[c].size(); ++j) {
        perturb(point.emission[c][j], centre.emission[c][j],
                point.emission[c][j].size(), eps, rng);
      }
    }
    if (in_near_truth_region(truth, spec, point, 2.0 * eps)) return point;
  }
  throw NumericalFailure(fmt::format(
      "sample_near_truth: no point of W({}) after {} attempts", 2.0 * eps,
      kMaxRejections));
}

}  // namespace bnsc
