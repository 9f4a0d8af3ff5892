#pragma once

// Naive Bayesian networks with latent nodes: K independent hidden nodes,
// M observable nodes each conditioned on the joint hidden state.
//
// Joint hidden cells (i_1, ..., i_K) are enumerated lexicographically with
// i_K varying fastest. Observation states are 0-based in memory and 1-based
// in files.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bnsc/random.hpp"

namespace bnsc {

inline constexpr double kSimplexTolerance = 1e-12;
inline constexpr double kNormalizationTolerance = 1e-10;

struct NetworkSpec {
  std::vector<int> hidden_states;      // T, one entry per hidden node
  std::vector<int> observable_states;  // Y, one entry per observable node

  int hidden_count() const { return static_cast<int>(hidden_states.size()); }
  int observable_count() const {
    return static_cast<int>(observable_states.size());
  }
  // C = prod T[k]
  std::size_t cell_count() const;
  // X = prod Y[j]
  std::size_t observation_space_size() const;

  bool operator==(const NetworkSpec&) const = default;
};

struct SpecReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

SpecReport validate_spec(const NetworkSpec& spec);
// Throws InvalidInput listing every violation.
void require_valid(const NetworkSpec& spec);

/// Free-parameter count: sum_k (T[k]-1) + prod_k T[k] * sum_j (Y[j]-1).
long long dimension(const NetworkSpec& spec);

// Hidden states of each node for a cell index, and the inverse map.
std::vector<int> cell_states(const NetworkSpec& spec, std::size_t cell);
std::size_t cell_index(const NetworkSpec& spec, std::span<const int> states);

// Observation vector <-> mixed-radix index over prod Y[j] (x_M fastest).
std::vector<int> observation_at(const NetworkSpec& spec, std::size_t index);

struct ParamSet {
  // mixing[k] has T[k] entries
  std::vector<std::vector<double>> mixing;
  // emission[c][j] has Y[j] entries
  std::vector<std::vector<std::vector<double>>> emission;
};

// Shape and simplex checks; empty when params are valid for spec.
std::vector<std::string> check_params(const NetworkSpec& spec,
                                      const ParamSet& params);
void require_valid(const NetworkSpec& spec, const ParamSet& params);

/// Per-cell mixing weight prod_k a[k][c_k].
std::vector<double> cell_weights(const NetworkSpec& spec,
                                 const ParamSet& params);

/// p(x|w) = sum_c prod_k a[k][c_k] prod_j b[c][j][x_j].
double joint_prob(const NetworkSpec& spec, const ParamSet& params,
                  std::span<const int> x);

struct TrueModel {
  NetworkSpec spec;  // K = H, T = S
  ParamSet params;

  int hidden_count() const { return spec.hidden_count(); }
  const std::vector<int>& true_states() const { return spec.hidden_states; }
};

// Empty when H <= K, S[k] <= T[k] and the observables agree.
std::vector<std::string> check_compatible(const TrueModel& truth,
                                          const NetworkSpec& learner);
void require_compatible(const TrueModel& truth, const NetworkSpec& learner);

// The truth may use single-state hidden nodes (S[k] = 1); the learner may not.
void require_valid(const TrueModel& truth);

double true_density(const TrueModel& truth, std::span<const int> x);

/// The true parameter expressed in the learner's parameter space.
ParamSet embed_truth(const TrueModel& truth, const NetworkSpec& learner);

/// True when the learner cell is aligned with a true cell: i_m < S_m for
/// m < H and i_m = 0 for m >= H.
bool is_truth_aligned_cell(const TrueModel& truth, const NetworkSpec& learner,
                           std::span<const int> learner_states);

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(int observables) : observables_(observables) {}
  Dataset(int observables, std::vector<int> values);

  std::size_t size() const {
    return observables_ == 0 ? 0 : values_.size() / observables_;
  }
  int observables() const { return observables_; }
  std::span<const int> row(std::size_t i) const {
    return {values_.data() + i * observables_,
            static_cast<std::size_t>(observables_)};
  }
  void push_back(std::span<const int> x);
  Dataset prefix(std::size_t n) const;
  const std::vector<int>& values() const { return values_; }

  bool operator==(const Dataset&) const = default;

 private:
  int observables_ = 0;
  std::vector<int> values_;
};

void require_in_range(const NetworkSpec& spec, std::span<const int> x);
void require_in_range(const NetworkSpec& spec, const Dataset& data);

/// n i.i.d. draws from the truth. Rows are drawn sequentially from one
/// stream, so the dataset for n is a prefix of the dataset for n + 1.
Dataset sample_dataset(const TrueModel& truth, std::size_t n, Seed seed);

// Distinct observation vectors with multiplicities, in lexicographic order.
struct Pattern {
  std::vector<int> x;
  int count = 0;
};
std::vector<Pattern> group_patterns(const Dataset& data);

}  // namespace bnsc
