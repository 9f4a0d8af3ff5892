#include "bnsc/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numeric>

#include "bnsc/errors.hpp"
#include "bnsc/parallel.hpp"

namespace bnsc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMcBlock = 1024;

// Streaming log-sum-exp.
class LogSumExp {
 public:
  void add(double v) {
    if (v == kNegInf) return;
    if (v <= max_) {
      sum_ += std::exp(v - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - v) + 1.0;
      max_ = v;
    }
  }
  double value() const { return max_ == kNegInf ? kNegInf : max_ + std::log(sum_); }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

// log Gamma(alpha + m) - log Gamma(alpha) for m = 0..n, by cumulative sums so
// large concentrations keep full precision.
std::vector<double> rising_log_table(double alpha, int n) {
  std::vector<double> table(static_cast<std::size_t>(n) + 1, 0.0);
  for (int m = 1; m <= n; ++m) table[m] = table[m - 1] + std::log(alpha + m - 1);
  return table;
}

// Likelihood of grouped data at prior draws, with every parameter in one flat
// buffer so the Monte Carlo loop does not allocate. One gamma distribution
// per coordinate is kept for the whole block of draws.
class FlatPriorLikelihood {
 public:
  FlatPriorLikelihood(const NetworkSpec& spec, const Prior& prior,
                      std::span<const Pattern> patterns)
      : cells_(spec.cell_count()), observables_(spec.observable_states.size()) {
    std::vector<std::size_t> mixing_offset;
    for (const auto& alpha : prior.alpha_a) {
      mixing_offset.push_back(gammas_.size());
      add_group(alpha);
    }
    std::vector<std::vector<std::size_t>> emission_offset(cells_);
    for (std::size_t c = 0; c < cells_; ++c) {
      for (const auto& alpha : prior.alpha_b[c]) {
        emission_offset[c].push_back(gammas_.size());
        add_group(alpha);
      }
    }
    values_.resize(gammas_.size());
    weights_.resize(cells_);
    for (std::size_t c = 0; c < cells_; ++c) {
      const auto states = cell_states(spec, c);
      for (std::size_t k = 0; k < states.size(); ++k) {
        mixing_index_.push_back(mixing_offset[k] + states[k]);
      }
    }
    hidden_ = spec.hidden_states.size();
    for (const auto& pattern : patterns) {
      counts_.push_back(static_cast<double>(pattern.count));
      for (std::size_t c = 0; c < cells_; ++c) {
        for (std::size_t j = 0; j < observables_; ++j) {
          emission_index_.push_back(emission_offset[c][j] + pattern.x[j]);
        }
      }
    }
  }

  double operator()(Rng& rng) {
    for (const auto& [begin, size] : groups_) {
      double total = 0.0;
      for (std::size_t i = begin; i < begin + size; ++i) {
        values_[i] = gammas_[i](rng);
        total += values_[i];
      }
      if (total <= 0.0) {
        // every gamma draw underflowed (tiny concentrations)
        std::fill_n(values_.begin() + begin, size, 0.0);
        values_[begin + rng() % size] = 1.0;
        continue;
      }
      for (std::size_t i = begin; i < begin + size; ++i) values_[i] /= total;
    }
    for (std::size_t c = 0; c < cells_; ++c) {
      double w = 1.0;
      for (std::size_t k = 0; k < hidden_; ++k) w *= values_[mixing_index_[c * hidden_ + k]];
      weights_[c] = w;
    }
    double total = 0.0;
    const std::size_t* index = emission_index_.data();
    for (double count : counts_) {
      double p = 0.0;
      for (std::size_t c = 0; c < cells_; ++c) {
        double term = weights_[c];
        for (std::size_t j = 0; j < observables_; ++j) term *= values_[*index++];
        p += term;
      }
      if (p <= 0.0) return kNegInf;
      total += count * std::log(p);
    }
    return total;
  }

 private:
  void add_group(const std::vector<double>& alpha) {
    groups_.emplace_back(gammas_.size(), alpha.size());
    for (double a : alpha) gammas_.emplace_back(a, 1.0);
  }

  std::size_t cells_;
  std::size_t observables_;
  std::size_t hidden_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> groups_;
  std::vector<std::gamma_distribution<double>> gammas_;
  std::vector<double> values_;
  std::vector<double> weights_;
  std::vector<std::size_t> mixing_index_;
  std::vector<std::size_t> emission_index_;
  std::vector<double> counts_;
};

double log_binomial(double n, double k) {
  return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
}

// Enumerates every allocation of pattern multiplicities to hidden cells and
// accumulates the log-sum of allocation weights.
class AllocationEnumerator {
 public:
  AllocationEnumerator(const NetworkSpec& spec, const Prior& prior,
                       std::vector<Pattern> patterns, int n)
      : patterns_(std::move(patterns)),
        cells_(spec.cell_count()),
        hidden_(spec.hidden_count()),
        observables_(spec.observable_count()),
        stride_(static_cast<std::size_t>(n) + 1) {
    log_factorial_.resize(stride_);
    for (std::size_t m = 1; m < stride_; ++m) {
      log_factorial_[m] = log_factorial_[m - 1] + std::log(static_cast<double>(m));
    }

    // hidden node terms
    for (int k = 0; k < hidden_; ++k) {
      const auto& alpha = prior.alpha_a[k];
      marginal_base_.push_back(marginal_entries_);
      marginal_entries_ += alpha.size();
      const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
      auto sum_table = rising_log_table(total, n);
      hidden_sum_terms_.push_back(-sum_table[n]);
      for (double a : alpha) append_table(entry_tables_a_, rising_log_table(a, n));
    }
    cell_marginal_entry_.resize(cells_ * hidden_);
    for (std::size_t c = 0; c < cells_; ++c) {
      const auto states = cell_states(spec, c);
      for (int k = 0; k < hidden_; ++k) {
        cell_marginal_entry_[c * hidden_ + k] = marginal_base_[k] + states[k];
      }
    }

    // (cell, observable) terms
    for (std::size_t c = 0; c < cells_; ++c) {
      for (int j = 0; j < observables_; ++j) {
        const auto& alpha = prior.alpha_b[c][j];
        emission_base_.push_back(emission_entries_);
        emission_entries_ += alpha.size();
        const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
        auto sum_table = rising_log_table(total, n);
        for (double& v : sum_table) v = -v;
        append_table(pair_sum_tables_, sum_table);
        for (double a : alpha) append_table(entry_tables_b_, rising_log_table(a, n));
      }
    }

    pattern_entry_.resize(patterns_.size() * cells_ * observables_);
    for (std::size_t p = 0; p < patterns_.size(); ++p) {
      for (std::size_t c = 0; c < cells_; ++c) {
        for (int j = 0; j < observables_; ++j) {
          pattern_entry_[(p * cells_ + c) * observables_ + j] =
              emission_base_[c * observables_ + j] + patterns_[p].x[j];
        }
      }
      multinomial_base_ += log_factorial_[patterns_[p].count];
    }

    cell_total_.assign(cells_, 0);
    value_count_.assign(emission_entries_, 0);
    marginal_count_.assign(marginal_entries_, 0);
  }

  void run() { visit(0, 0, patterns_.empty() ? 0 : patterns_[0].count, multinomial_base_); }

  double log_sum() const { return total_.value(); }
  std::uint64_t terms() const { return terms_; }

 private:
  static void append_table(std::vector<double>& dst, const std::vector<double>& table) {
    dst.insert(dst.end(), table.begin(), table.end());
  }

  void assign(std::size_t p, std::size_t c, int m) {
    cell_total_[c] += m;
    const int* entries = &pattern_entry_[(p * cells_ + c) * observables_];
    for (int j = 0; j < observables_; ++j) value_count_[entries[j]] += m;
  }

  void visit(std::size_t p, std::size_t c, int remaining, double log_multinomial) {
    if (p == patterns_.size()) {
      leaf(log_multinomial);
      return;
    }
    if (c + 1 == cells_) {
      assign(p, c, remaining);
      const double next = log_multinomial - log_factorial_[remaining];
      if (p + 1 == patterns_.size()) {
        leaf(next);
      } else {
        visit(p + 1, 0, patterns_[p + 1].count, next);
      }
      assign(p, c, -remaining);
      return;
    }
    for (int m = 0; m <= remaining; ++m) {
      assign(p, c, m);
      visit(p, c + 1, remaining - m, log_multinomial - log_factorial_[m]);
      assign(p, c, -m);
    }
  }

  void leaf(double log_multinomial) {
    ++terms_;
    double w = log_multinomial;
    std::fill(marginal_count_.begin(), marginal_count_.end(), 0);
    for (std::size_t c = 0; c < cells_; ++c) {
      for (int k = 0; k < hidden_; ++k) {
        marginal_count_[cell_marginal_entry_[c * hidden_ + k]] += cell_total_[c];
      }
    }
    for (int k = 0; k < hidden_; ++k) w += hidden_sum_terms_[k];
    for (std::size_t e = 0; e < marginal_entries_; ++e) {
      w += entry_tables_a_[e * stride_ + marginal_count_[e]];
    }
    for (std::size_t c = 0; c < cells_; ++c) {
      const int total = cell_total_[c];
      for (int j = 0; j < observables_; ++j) {
        const std::size_t pair = c * observables_ + j;
        w += pair_sum_tables_[pair * stride_ + total];
      }
    }
    for (std::size_t e = 0; e < emission_entries_; ++e) {
      w += entry_tables_b_[e * stride_ + value_count_[e]];
    }
    total_.add(w);
  }

  std::vector<Pattern> patterns_;
  std::size_t cells_;
  int hidden_;
  int observables_;
  std::size_t stride_;

  std::vector<double> log_factorial_;
  double multinomial_base_ = 0.0;

  std::vector<std::size_t> marginal_base_;
  std::size_t marginal_entries_ = 0;
  std::vector<double> hidden_sum_terms_;
  std::vector<double> entry_tables_a_;
  std::vector<std::size_t> cell_marginal_entry_;

  std::vector<int> emission_base_;
  std::size_t emission_entries_ = 0;
  std::vector<double> pair_sum_tables_;
  std::vector<double> entry_tables_b_;
  std::vector<int> pattern_entry_;

  std::vector<int> cell_total_;
  std::vector<int> value_count_;
  std::vector<int> marginal_count_;

  LogSumExp total_;
  std::uint64_t terms_ = 0;
};

void check_same_layout(const std::vector<double>& alpha, std::size_t expected,
                       const std::string& where) {
  if (alpha.size() != expected) {
    throw InvalidInput(fmt::format("prior {}: expected {} concentrations, got {}",
                                   where, expected, alpha.size()));
  }
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw InvalidInput(fmt::format("prior {}: concentration {} is not positive", where, a));
    }
  }
}

}  // namespace

Prior Prior::uniform(const NetworkSpec& spec, double concentration) {
  Prior prior;
  for (int t : spec.hidden_states) prior.alpha_a.emplace_back(t, concentration);
  prior.alpha_b.resize(spec.cell_count());
  for (auto& cell : prior.alpha_b) {
    for (int y : spec.observable_states) cell.emplace_back(y, concentration);
  }
  return prior;
}

void require_valid(const NetworkSpec& spec, const Prior& prior) {
  require_valid(spec);
  if (prior.alpha_a.size() != spec.hidden_states.size() ||
      prior.alpha_b.size() != spec.cell_count()) {
    throw InvalidInput("prior shape does not match network spec");
  }
  for (std::size_t k = 0; k < prior.alpha_a.size(); ++k) {
    check_same_layout(prior.alpha_a[k], static_cast<std::size_t>(spec.hidden_states[k]),
                      fmt::format("a.{}", k + 1));
  }
  for (std::size_t c = 0; c < prior.alpha_b.size(); ++c) {
    if (prior.alpha_b[c].size() != spec.observable_states.size()) {
      throw InvalidInput("prior shape does not match network spec");
    }
    for (std::size_t j = 0; j < prior.alpha_b[c].size(); ++j) {
      check_same_layout(prior.alpha_b[c][j],
                        static_cast<std::size_t>(spec.observable_states[j]),
                        fmt::format("b.{}.{}", c + 1, j + 1));
    }
  }
}

ParamSet sample_prior(const NetworkSpec& spec, const Prior& prior, Rng& rng) {
  ParamSet params;
  params.mixing.reserve(spec.hidden_states.size());
  for (const auto& alpha : prior.alpha_a) params.mixing.push_back(sample_dirichlet(alpha, rng));
  params.emission.resize(prior.alpha_b.size());
  for (std::size_t c = 0; c < prior.alpha_b.size(); ++c) {
    for (const auto& alpha : prior.alpha_b[c]) {
      params.emission[c].push_back(sample_dirichlet(alpha, rng));
    }
  }
  return params;
}

double log_likelihood(const NetworkSpec& spec, const ParamSet& params,
                      std::span<const Pattern> patterns) {
  const auto weights = cell_weights(spec, params);
  double total = 0.0;
  for (const auto& pattern : patterns) {
    double p = 0.0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
      double term = weights[c];
      for (std::size_t j = 0; j < pattern.x.size() && term != 0.0; ++j) {
        term *= params.emission[c][j][pattern.x[j]];
      }
      p += term;
    }
    if (p <= 0.0) return kNegInf;
    total += pattern.count * std::log(p);
  }
  return total;
}

double exact_allocation_count(const NetworkSpec& spec, const Dataset& data) {
  const auto C = static_cast<double>(spec.cell_count());
  double log_count = 0.0;
  for (const auto& pattern : group_patterns(data)) {
    log_count += log_binomial(pattern.count + C - 1, C - 1);
  }
  return std::round(std::exp(log_count));
}

EvidenceResult log_evidence_exact(const NetworkSpec& spec, const Prior& prior,
                                  const Dataset& data, double max_allocations) {
  require_valid(spec, prior);
  require_in_range(spec, data);
  EvidenceResult result;
  result.method = EvidenceMethod::exact;
  if (data.size() == 0) return result;

  const double cost = exact_allocation_count(spec, data);
  if (cost > max_allocations) {
    throw Infeasible(fmt::format(
        "exact evidence needs {:.3g} allocations (limit {:.3g}); use the mc method",
        cost, max_allocations));
  }
  AllocationEnumerator enumerator(spec, prior, group_patterns(data),
                                  static_cast<int>(data.size()));
  enumerator.run();
  result.log_Z0 = enumerator.log_sum();
  result.terms = enumerator.terms();
  return result;
}

EvidenceResult log_evidence_mc(const NetworkSpec& spec, const Prior& prior,
                               const Dataset& data, std::size_t draws, Seed seed,
                               unsigned workers) {
  require_valid(spec, prior);
  require_in_range(spec, data);
  if (draws < 100) throw InvalidInput("mc evidence needs at least 100 draws");
  EvidenceResult result;
  result.method = EvidenceMethod::mc;
  result.terms = draws;
  if (data.size() == 0) return result;

  const auto patterns = group_patterns(data);
  std::vector<double> log_weights(draws);
  const std::size_t blocks = (draws + kMcBlock - 1) / kMcBlock;
  parallel_for(blocks, workers, [&](std::size_t b) {
    auto rng = make_rng(derive_seed(seed, b));
    FlatPriorLikelihood likelihood(spec, prior, patterns);
    const std::size_t end = std::min(draws, (b + 1) * kMcBlock);
    for (std::size_t d = b * kMcBlock; d < end; ++d) log_weights[d] = likelihood(rng);
  });

  const double shift = *std::max_element(log_weights.begin(), log_weights.end());
  if (shift == kNegInf) {
    throw NumericalFailure("every prior draw assigns zero likelihood to the data");
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double lw : log_weights) {
    const double w = std::exp(lw - shift);
    sum += w;
    sum_sq += w * w;
  }
  const double count = static_cast<double>(draws);
  const double mean = sum / count;
  const double variance = std::max(0.0, (sum_sq - count * mean * mean) / (count - 1.0));
  result.log_Z0 = shift + std::log(mean);
  result.std_error = std::sqrt(variance) / (mean * std::sqrt(count));
  return result;
}

EvidenceResult stochastic_complexity(EvidenceResult evidence,
                                     const TrueModel& truth, const Dataset& data) {
  require_in_range(truth.spec, data);
  double entropy = 0.0;
  for (const auto& pattern : group_patterns(data)) {
    const double q = joint_prob(truth.spec, truth.params, pattern.x);
    if (q <= 0.0) {
      throw InvalidInput("dataset contains an observation impossible under the truth");
    }
    entropy -= pattern.count * std::log(q);
  }
  evidence.S_emp = entropy;
  evidence.F = -evidence.log_Z0 - entropy;
  return evidence;
}

std::vector<double> predictive_distribution(const NetworkSpec& spec,
                                            const Prior& prior,
                                            const Dataset& data) {
  const double base = log_evidence_exact(spec, prior, data).log_Z0;
  const auto X = spec.observation_space_size();
  std::vector<double> probs(X);
  Dataset extended = data.size() == 0 ? Dataset(spec.observable_count()) : data;
  for (std::size_t i = 0; i < X; ++i) {
    Dataset with_x = extended;
    with_x.push_back(observation_at(spec, i));
    probs[i] = std::exp(log_evidence_exact(spec, prior, with_x).log_Z0 - base);
  }
  return probs;
}

double predictive(const NetworkSpec& spec, const Prior& prior,
                  const Dataset& data, std::span<const int> x) {
  require_in_range(spec, x);
  Dataset with_x = data.size() == 0 ? Dataset(spec.observable_count()) : data;
  with_x.push_back(x);
  return std::exp(log_evidence_exact(spec, prior, with_x).log_Z0 -
                  log_evidence_exact(spec, prior, data).log_Z0);
}

ReplicateEstimate summarize(std::vector<double> values) {
  ReplicateEstimate estimate;
  const double count = static_cast<double>(values.size());
  if (values.empty()) return estimate;
  estimate.mean = std::accumulate(values.begin(), values.end(), 0.0) / count;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - estimate.mean) * (v - estimate.mean);
    estimate.std_error = std::sqrt(ss / (count - 1.0) / count);
  }
  estimate.values = std::move(values);
  return estimate;
}

ReplicateEstimate gen_error_direct(const TrueModel& truth, const NetworkSpec& spec,
                                   const Prior& prior, std::size_t n,
                                   std::size_t replicates, Seed seed,
                                   unsigned workers) {
  require_compatible(truth, spec);
  const auto X = spec.observation_space_size();
  std::vector<double> q(X);
  for (std::size_t i = 0; i < X; ++i) q[i] = true_density(truth, observation_at(spec, i));

  std::vector<double> values(replicates);
  parallel_for(replicates, workers, [&](std::size_t r) {
    const auto data = sample_dataset(truth, n, derive_seed(seed, r));
    const auto p = predictive_distribution(spec, prior, data);
    double kl = 0.0;
    for (std::size_t i = 0; i < X; ++i) {
      if (q[i] > 0.0) kl += q[i] * std::log(q[i] / p[i]);
    }
    values[r] = kl;
  });
  return summarize(std::move(values));
}

double laplace_functional(const BoxFunction& S, const BoxFunction& psi,
                          std::span<const double> lower,
                          std::span<const double> upper, double n, int grid) {
  const std::size_t dims = lower.size();
  if (dims == 0 || dims > 3 || upper.size() != dims) {
    throw InvalidInput("laplace_functional: box must have 1 to 3 dimensions");
  }
  if (grid < 1) throw InvalidInput("laplace_functional: grid must be positive");
  std::vector<double> step(dims);
  double log_volume = 0.0;
  for (std::size_t d = 0; d < dims; ++d) {
    step[d] = (upper[d] - lower[d]) / grid;
    log_volume += std::log(step[d]);
  }
  std::size_t points = 1;
  for (std::size_t d = 0; d < dims; ++d) points *= static_cast<std::size_t>(grid);

  LogSumExp total;
  std::vector<double> w(dims);
  for (std::size_t i = 0; i < points; ++i) {
    std::size_t rest = i;
    for (std::size_t d = dims; d-- > 0;) {
      w[d] = lower[d] + (static_cast<double>(rest % grid) + 0.5) * step[d];
      rest /= grid;
    }
    const double weight = psi(w);
    if (weight <= 0.0) continue;
    total.add(-n * S(w) + std::log(weight));
  }
  const double log_integral = total.value() + log_volume;
  if (log_integral == kNegInf) {
    throw NumericalFailure("laplace_functional: integral is zero");
  }
  return -log_integral;
}

}  // namespace bnsc
