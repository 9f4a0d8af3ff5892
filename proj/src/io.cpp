#include "bnsc/io.hpp"

#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "bnsc/errors.hpp"

namespace bnsc {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) parts.push_back(trim(item));
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

template <class T>
T parse_number(const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw InvalidInput(fmt::format("'{}' is not a valid number", text));
  }
  return value;
}

std::string join_reals(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_real(values[i]);
  }
  return out;
}

std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

// Reads the a.* and b.*.* keys for a shape whose hidden node k has
// `states[k]` states (may be 1 for the truth).
ParamSet read_params(const std::vector<int>& states, std::size_t cells,
                     const std::vector<int>& observables, const KeyValues& kv) {
  ParamSet params;
  for (std::size_t k = 0; k < states.size(); ++k) {
    params.mixing.push_back(kv.get_reals(fmt::format("a.{}", k + 1)));
  }
  params.emission.resize(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t j = 0; j < observables.size(); ++j) {
      params.emission[c].push_back(kv.get_reals(fmt::format("b.{}.{}", c + 1, j + 1)));
    }
  }
  return params;
}

void require_count(const KeyValues& kv, const std::string& count_key,
                   std::size_t expected, const std::string& list_key) {
  if (static_cast<std::size_t>(kv.get_int(count_key)) != expected) {
    throw InvalidInput(fmt::format("{}: {} = {} but {} lists {} entries", kv.source(),
                                   count_key, kv.get(count_key), list_key, expected));
  }
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput(fmt::format("{}:{}: expected 'key = value'", source, number));
    }
    auto key = trim(std::string_view(text).substr(0, eq));
    auto value = trim(std::string_view(text).substr(eq + 1));
    if (key.empty()) throw InvalidInput(fmt::format("{}:{}: empty key", source, number));
    if (!kv.values_.emplace(key, value).second) {
      throw InvalidInput(fmt::format("{}:{}: duplicate key '{}'", source, number, key));
    }
  }
  return kv;
}

KeyValues KeyValues::parse_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse(in, source);
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput(fmt::format("cannot open '{}'", path.string()));
  return parse(in, path.string());
}

const std::string& KeyValues::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw InvalidInput(fmt::format("{}: missing key '{}'", source_, key));
  }
  return it->second;
}

std::optional<std::string> KeyValues::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

int KeyValues::get_int(const std::string& key) const {
  try {
    return parse_number<int>(get(key));
  } catch (const InvalidInput& e) {
    throw InvalidInput(fmt::format("{}: key '{}': {}", source_, key, e.what()));
  }
}

double KeyValues::get_real(const std::string& key) const {
  try {
    return parse_number<double>(get(key));
  } catch (const InvalidInput& e) {
    throw InvalidInput(fmt::format("{}: key '{}': {}", source_, key, e.what()));
  }
}

std::vector<int> KeyValues::get_ints(const std::string& key) const {
  try {
    return parse_int_list(get(key));
  } catch (const InvalidInput& e) {
    throw InvalidInput(fmt::format("{}: key '{}': {}", source_, key, e.what()));
  }
}

std::vector<double> KeyValues::get_reals(const std::string& key) const {
  try {
    return parse_real_list(get(key));
  } catch (const InvalidInput& e) {
    throw InvalidInput(fmt::format("{}: key '{}': {}", source_, key, e.what()));
  }
}

void KeyValues::require_known(const std::set<std::string>& known,
                              const std::vector<std::string>& prefixes) const {
  for (const auto& [key, value] : values_) {
    if (known.contains(key)) continue;
    bool matched = false;
    for (const auto& prefix : prefixes) matched = matched || key.starts_with(prefix);
    if (!matched) throw InvalidInput(fmt::format("{}: unknown key '{}'", source_, key));
  }
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_number<int>(part));
  return out;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_number<double>(part));
  return out;
}

NetworkSpec spec_from_keys(const KeyValues& kv) {
  NetworkSpec spec{kv.get_ints("T"), kv.get_ints("Y")};
  require_count(kv, "K", spec.hidden_states.size(), "T");
  require_count(kv, "M", spec.observable_states.size(), "Y");
  require_valid(spec);
  return spec;
}

ParamSet params_from_keys(const NetworkSpec& spec, const KeyValues& kv) {
  auto params = read_params(spec.hidden_states, spec.cell_count(),
                            spec.observable_states, kv);
  require_valid(spec, params);
  return params;
}

TrueModel truth_shape_from_keys(const KeyValues& kv) {
  TrueModel truth;
  truth.spec = NetworkSpec{kv.get_ints("S"), kv.get_ints("Y")};
  require_count(kv, "H", truth.spec.hidden_states.size(), "S");
  require_count(kv, "M", truth.spec.observable_states.size(), "Y");
  for (int s : truth.spec.hidden_states) {
    if (s < 1) throw InvalidInput(fmt::format("{}: true state counts must be >= 1", kv.source()));
  }
  for (int y : truth.spec.observable_states) {
    if (y < 2) throw InvalidInput(fmt::format("{}: observable state counts must be >= 2", kv.source()));
  }
  return truth;
}

TrueModel truth_from_keys(const KeyValues& kv) {
  auto truth = truth_shape_from_keys(kv);
  truth.params = read_params(truth.spec.hidden_states, truth.spec.cell_count(),
                             truth.spec.observable_states, kv);
  require_valid(truth);
  return truth;
}

std::string format_spec(const NetworkSpec& spec) {
  return fmt::format("K = {}\nT = {}\nM = {}\nY = {}\n", spec.hidden_states.size(),
                     join_ints(spec.hidden_states), spec.observable_states.size(),
                     join_ints(spec.observable_states));
}

std::string format_params(const NetworkSpec& spec, const ParamSet& params) {
  std::string out;
  for (std::size_t k = 0; k < params.mixing.size(); ++k) {
    out += fmt::format("a.{} = {}\n", k + 1, join_reals(params.mixing[k]));
  }
  for (std::size_t c = 0; c < params.emission.size(); ++c) {
    for (std::size_t j = 0; j < spec.observable_states.size(); ++j) {
      out += fmt::format("b.{}.{} = {}\n", c + 1, j + 1, join_reals(params.emission[c][j]));
    }
  }
  return out;
}

std::string format_truth(const TrueModel& truth) {
  return fmt::format("H = {}\nS = {}\nM = {}\nY = {}\n", truth.spec.hidden_states.size(),
                     join_ints(truth.spec.hidden_states),
                     truth.spec.observable_states.size(),
                     join_ints(truth.spec.observable_states)) +
         format_params(truth.spec, truth.params);
}

Dataset read_dataset(std::istream& in, const NetworkSpec& spec) {
  const int M = spec.observable_count();
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("dataset: missing header");
  const auto header = split(trim(line), ',');
  if (static_cast<int>(header.size()) != M) {
    throw InvalidInput(fmt::format("dataset: header has {} columns, expected {}",
                                   header.size(), M));
  }
  for (int j = 0; j < M; ++j) {
    if (header[j] != fmt::format("x{}", j + 1)) {
      throw InvalidInput(fmt::format("dataset: column {} must be named x{}", j + 1, j + 1));
    }
  }
  Dataset data(M);
  std::vector<int> row(M);
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto fields = split(text, ',');
    if (static_cast<int>(fields.size()) != M) {
      throw InvalidInput(fmt::format("dataset line {}: expected {} fields", number, M));
    }
    for (int j = 0; j < M; ++j) {
      try {
        row[j] = parse_number<int>(fields[j]) - 1;
      } catch (const InvalidInput& e) {
        throw InvalidInput(fmt::format("dataset line {}: {}", number, e.what()));
      }
    }
    require_in_range(spec, row);
    data.push_back(row);
  }
  return data;
}

Dataset load_dataset(const std::filesystem::path& path, const NetworkSpec& spec) {
  std::ifstream in(path);
  if (!in) throw InvalidInput(fmt::format("cannot open '{}'", path.string()));
  return read_dataset(in, spec);
}

void write_dataset(std::ostream& out, const Dataset& data) {
  for (int j = 0; j < data.observables(); ++j) out << (j ? ",x" : "x") << j + 1;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j] + 1;
    out << '\n';
  }
}

std::string format_real(double v) { return fmt::format("{}", v); }

}  // namespace bnsc
