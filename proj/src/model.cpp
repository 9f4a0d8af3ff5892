#include "bnsc/model.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <limits>
#include <map>

#include "bnsc/errors.hpp"

namespace bnsc {
namespace {

constexpr std::size_t kMaxProduct =
    static_cast<std::size_t>(std::numeric_limits<std::int64_t>::max());

// Product of counts, or 0 on overflow past kMaxProduct.
std::size_t checked_product(const std::vector<int>& counts) {
  std::size_t total = 1;
  for (int c : counts) {
    if (c <= 0) return 0;
    if (total > kMaxProduct / static_cast<std::size_t>(c)) return 0;
    total *= static_cast<std::size_t>(c);
  }
  return total;
}

void check_simplex(std::span<const double> p, std::size_t expected,
                   const std::string& where,
                   std::vector<std::string>& problems) {
  if (p.size() != expected) {
    problems.push_back(fmt::format("{}: expected {} entries, got {}", where,
                                   expected, p.size()));
    return;
  }
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      problems.push_back(fmt::format("{}: entry {} is not a probability", where, v));
      return;
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    problems.push_back(fmt::format("{}: entries sum to {:.17g}", where, sum));
  }
}

[[noreturn]] void throw_problems(const std::string& what,
                                 const std::vector<std::string>& problems) {
  throw InvalidInput(fmt::format("{}: {}", what, fmt::join(problems, "; ")));
}

SpecReport validate_shape(const NetworkSpec& spec, int min_hidden_states) {
  SpecReport report;
  auto& v = report.violations;
  if (spec.hidden_states.empty()) v.push_back("K must be at least 1");
  if (spec.observable_states.empty()) v.push_back("M must be at least 1");
  for (std::size_t k = 0; k < spec.hidden_states.size(); ++k) {
    if (spec.hidden_states[k] < min_hidden_states) {
      v.push_back(fmt::format("T[{}] = {} < {}", k + 1, spec.hidden_states[k],
                              min_hidden_states));
    }
  }
  for (std::size_t j = 0; j < spec.observable_states.size(); ++j) {
    if (spec.observable_states[j] < 2) {
      v.push_back(fmt::format("Y[{}] = {} < 2", j + 1, spec.observable_states[j]));
    }
  }
  if (report.ok()) {
    if (checked_product(spec.hidden_states) == 0) {
      v.push_back("hidden cell count overflows");
    }
    if (checked_product(spec.observable_states) == 0) {
      v.push_back("observation space size overflows");
    }
  }
  return report;
}

}  // namespace

std::size_t NetworkSpec::cell_count() const {
  return checked_product(hidden_states);
}

std::size_t NetworkSpec::observation_space_size() const {
  return checked_product(observable_states);
}

SpecReport validate_spec(const NetworkSpec& spec) {
  return validate_shape(spec, 2);
}

void require_valid(const NetworkSpec& spec) {
  const auto report = validate_spec(spec);
  if (!report.ok()) throw_problems("invalid network spec", report.violations);
}

long long dimension(const NetworkSpec& spec) {
  long long mixing = 0;
  for (int t : spec.hidden_states) mixing += t - 1;
  long long per_cell = 0;
  for (int y : spec.observable_states) per_cell += y - 1;
  return mixing + per_cell * static_cast<long long>(spec.cell_count());
}

std::vector<int> cell_states(const NetworkSpec& spec, std::size_t cell) {
  std::vector<int> states(spec.hidden_states.size());
  for (std::size_t k = states.size(); k-- > 0;) {
    const auto t = static_cast<std::size_t>(spec.hidden_states[k]);
    states[k] = static_cast<int>(cell % t);
    cell /= t;
  }
  return states;
}

std::size_t cell_index(const NetworkSpec& spec, std::span<const int> states) {
  std::size_t index = 0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    index = index * static_cast<std::size_t>(spec.hidden_states[k]) +
            static_cast<std::size_t>(states[k]);
  }
  return index;
}

std::vector<int> observation_at(const NetworkSpec& spec, std::size_t index) {
  std::vector<int> x(spec.observable_states.size());
  for (std::size_t j = x.size(); j-- > 0;) {
    const auto y = static_cast<std::size_t>(spec.observable_states[j]);
    x[j] = static_cast<int>(index % y);
    index /= y;
  }
  return x;
}

std::vector<std::string> check_params(const NetworkSpec& spec,
                                      const ParamSet& params) {
  std::vector<std::string> problems;
  const auto K = spec.hidden_states.size();
  const auto M = spec.observable_states.size();
  if (params.mixing.size() != K) {
    problems.push_back(fmt::format("expected {} mixing rows, got {}", K,
                                   params.mixing.size()));
  } else {
    for (std::size_t k = 0; k < K; ++k) {
      check_simplex(params.mixing[k], static_cast<std::size_t>(spec.hidden_states[k]),
                    fmt::format("a.{}", k + 1), problems);
    }
  }
  const auto C = spec.cell_count();
  if (params.emission.size() != C) {
    problems.push_back(fmt::format("expected {} cells, got {}", C,
                                   params.emission.size()));
    return problems;
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (params.emission[c].size() != M) {
      problems.push_back(fmt::format("cell {}: expected {} rows, got {}", c + 1,
                                     M, params.emission[c].size()));
      continue;
    }
    for (std::size_t j = 0; j < M; ++j) {
      check_simplex(params.emission[c][j],
                    static_cast<std::size_t>(spec.observable_states[j]),
                    fmt::format("b.{}.{}", c + 1, j + 1), problems);
    }
  }
  return problems;
}

void require_valid(const NetworkSpec& spec, const ParamSet& params) {
  const auto problems = check_params(spec, params);
  if (!problems.empty()) throw_problems("invalid parameters", problems);
}

std::vector<double> cell_weights(const NetworkSpec& spec,
                                 const ParamSet& params) {
  const auto C = spec.cell_count();
  std::vector<double> weights(C, 1.0);
  for (std::size_t c = 0; c < C; ++c) {
    const auto states = cell_states(spec, c);
    for (std::size_t k = 0; k < states.size(); ++k) {
      weights[c] *= params.mixing[k][states[k]];
    }
  }
  return weights;
}

double joint_prob(const NetworkSpec& spec, const ParamSet& params,
                  std::span<const int> x) {
  if (params.mixing.size() != spec.hidden_states.size() ||
      params.emission.size() != spec.cell_count() ||
      x.size() != spec.observable_states.size()) {
    throw InvalidInput("joint_prob: parameter or observation shape does not match spec");
  }
  const auto weights = cell_weights(spec, params);
  double p = 0.0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (weights[c] == 0.0) continue;
    double emit = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      emit *= params.emission[c][j][x[j]];
    }
    p += weights[c] * emit;
  }
  return p;
}

void require_valid(const TrueModel& truth) {
  const auto report = validate_shape(truth.spec, 1);
  if (!report.ok()) throw_problems("invalid true model", report.violations);
  require_valid(truth.spec, truth.params);
}

std::vector<std::string> check_compatible(const TrueModel& truth,
                                          const NetworkSpec& learner) {
  std::vector<std::string> problems;
  const auto& S = truth.spec.hidden_states;
  const auto& T = learner.hidden_states;
  if (S.size() > T.size()) {
    problems.push_back(fmt::format("truth has H = {} hidden nodes but learner has K = {}",
                                   S.size(), T.size()));
  } else {
    for (std::size_t k = 0; k < S.size(); ++k) {
      if (S[k] > T[k]) {
        problems.push_back(fmt::format("S[{}] = {} exceeds T[{}] = {}", k + 1,
                                       S[k], k + 1, T[k]));
      }
    }
  }
  if (truth.spec.observable_states != learner.observable_states) {
    problems.push_back("truth and learner disagree on observable nodes");
  }
  return problems;
}

void require_compatible(const TrueModel& truth, const NetworkSpec& learner) {
  const auto problems = check_compatible(truth, learner);
  if (!problems.empty()) throw_problems("truth is not attainable by learner", problems);
}

double true_density(const TrueModel& truth, std::span<const int> x) {
  require_in_range(truth.spec, x);
  return joint_prob(truth.spec, truth.params, x);
}

bool is_truth_aligned_cell(const TrueModel& truth, const NetworkSpec& learner,
                           std::span<const int> learner_states) {
  const auto& S = truth.spec.hidden_states;
  for (std::size_t m = 0; m < learner.hidden_states.size(); ++m) {
    const int limit = m < S.size() ? S[m] : 1;
    if (learner_states[m] >= limit) return false;
  }
  return true;
}

ParamSet embed_truth(const TrueModel& truth, const NetworkSpec& learner) {
  require_compatible(truth, learner);
  const auto H = truth.spec.hidden_states.size();
  const auto K = learner.hidden_states.size();
  ParamSet out;
  out.mixing.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    out.mixing[k].assign(learner.hidden_states[k], 0.0);
    if (k < H) {
      std::copy(truth.params.mixing[k].begin(), truth.params.mixing[k].end(),
                out.mixing[k].begin());
    } else {
      out.mixing[k][0] = 1.0;
    }
  }
  const auto C = learner.cell_count();
  out.emission.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    const auto states = cell_states(learner, c);
    if (is_truth_aligned_cell(truth, learner, states)) {
      const std::span<const int> head(states.data(), H);
      out.emission[c] = truth.params.emission[cell_index(truth.spec, head)];
    } else {
      out.emission[c] = truth.params.emission[0];
    }
  }
  return out;
}

Dataset::Dataset(int observables, std::vector<int> values)
    : observables_(observables), values_(std::move(values)) {
  if (observables_ <= 0 || values_.size() % observables_ != 0) {
    throw InvalidInput("dataset values do not form whole rows");
  }
}

void Dataset::push_back(std::span<const int> x) {
  if (static_cast<int>(x.size()) != observables_) {
    throw InvalidInput("dataset row has wrong length");
  }
  values_.insert(values_.end(), x.begin(), x.end());
}

Dataset Dataset::prefix(std::size_t n) const {
  Dataset out(observables_);
  const auto count = std::min(n, size()) * static_cast<std::size_t>(observables_);
  out.values_.assign(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

void require_in_range(const NetworkSpec& spec, std::span<const int> x) {
  if (x.size() != spec.observable_states.size()) {
    throw InvalidInput(fmt::format("observation has {} entries, expected {}",
                                   x.size(), spec.observable_states.size()));
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] < 0 || x[j] >= spec.observable_states[j]) {
      throw InvalidInput(fmt::format("x{} = {} outside 1..{}", j + 1, x[j] + 1,
                                     spec.observable_states[j]));
    }
  }
}

void require_in_range(const NetworkSpec& spec, const Dataset& data) {
  if (data.size() == 0) return;
  for (std::size_t i = 0; i < data.size(); ++i) require_in_range(spec, data.row(i));
}

Dataset sample_dataset(const TrueModel& truth, std::size_t n, Seed seed) {
  const auto& spec = truth.spec;
  const int M = spec.observable_count();
  Dataset data(M);
  auto rng = make_rng(seed);
  std::vector<int> hidden(spec.hidden_states.size());
  std::vector<int> x(M);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < hidden.size(); ++k) {
      hidden[k] = sample_categorical(truth.params.mixing[k], rng);
    }
    const auto& cell = truth.params.emission[cell_index(spec, hidden)];
    for (int j = 0; j < M; ++j) x[j] = sample_categorical(cell[j], rng);
    data.push_back(x);
  }
  return data;
}

std::vector<Pattern> group_patterns(const Dataset& data) {
  std::map<std::vector<int>, int> counts;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.row(i);
    ++counts[std::vector<int>(row.begin(), row.end())];
  }
  std::vector<Pattern> patterns;
  patterns.reserve(counts.size());
  for (auto& [x, count] : counts) patterns.push_back({x, count});
  return patterns;
}

}  // namespace bnsc
