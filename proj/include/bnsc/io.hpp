#pragma once

// Line-oriented `key = value` model files and CSV datasets.
//
//   K = 1            learner hidden nodes
//   T = 2            learner state counts, comma-separated
//   M = 2            observable nodes
//   Y = 2,2          observable state counts
//   H = 1            true hidden nodes (truth files)
//   S = 1            true state counts (truth files)
//   a.1 = 1          mixing weights of hidden node 1
//   b.1.2 = 0.5,0.5  table of observable 2 in (1-based, i_K fastest) cell 1
//
// `#` starts a comment. Dataset CSV has header x1,...,xM and 1-based states.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bnsc/model.hpp"

namespace bnsc {

class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& source);
  static KeyValues parse_text(const std::string& text, const std::string& source = "<text>");
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  const std::string& get(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_real(const std::string& key) const;
  std::vector<int> get_ints(const std::string& key) const;
  std::vector<double> get_reals(const std::string& key) const;

  // Throws InvalidInput for keys outside `known` that also do not start with
  // one of `prefixes`.
  void require_known(const std::set<std::string>& known,
                     const std::vector<std::string>& prefixes = {}) const;

  const std::map<std::string, std::string>& entries() const { return values_; }
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  std::map<std::string, std::string> values_;
};

std::vector<int> parse_int_list(const std::string& text);
std::vector<double> parse_real_list(const std::string& text);

/// Learner shape from keys K, T, M, Y.
NetworkSpec spec_from_keys(const KeyValues& kv);
/// Parameters a.k and b.c.j for `spec`.
ParamSet params_from_keys(const NetworkSpec& spec, const KeyValues& kv);
/// Truth shape from H, S, M, Y without parameters (enough for coefficients).
TrueModel truth_shape_from_keys(const KeyValues& kv);
/// Full truth: shape plus a.k and b.c.j over the true cells.
TrueModel truth_from_keys(const KeyValues& kv);

std::string format_spec(const NetworkSpec& spec);
std::string format_params(const NetworkSpec& spec, const ParamSet& params);
std::string format_truth(const TrueModel& truth);

Dataset read_dataset(std::istream& in, const NetworkSpec& spec);
Dataset load_dataset(const std::filesystem::path& path, const NetworkSpec& spec);
void write_dataset(std::ostream& out, const Dataset& data);

// Shortest round-trip representation used by every text output.
std::string format_real(double v);

}  // namespace bnsc
