// bnsc: command-line front end for coefficients, divergences, evidence and
// the learning-curve / model-selection / property experiments.
//
// Exit codes: 0 success, 1 invalid input, 2 infeasible computation,
// 3 numerical failure (including a failed property check).

#include <CLI11.hpp>
#include <fmt/core.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bnsc/coefficients.hpp"
#include "bnsc/divergence.hpp"
#include "bnsc/errors.hpp"
#include "bnsc/evidence.hpp"
#include "bnsc/experiments.hpp"
#include "bnsc/io.hpp"

namespace {

using namespace bnsc;

enum ExitCode { kOk = 0, kInvalid = 1, kInfeasible = 2, kNumerical = 3 };

struct GlobalOptions {
  Seed seed = 0;
  std::string out;
  unsigned threads = 1;
};

const std::set<std::string> kShapeKeys{"K", "T", "M", "Y", "H", "S"};
const std::set<std::string> kExperimentKeys{"ns", "replicates", "method", "mc_draws",
                                            "prior_alpha"};
const std::vector<std::string> kParamPrefixes{"a.", "b."};

// Writes to --out when given, otherwise to standard output.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty()) return;
    file_.open(path, std::ios::binary);
    if (!file_) throw InvalidInput(fmt::format("cannot open output file '{}'", path));
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  bool to_file() const { return file_.is_open(); }
  void close() {
    if (!file_.is_open()) return;
    file_.close();
    if (!file_) throw InvalidInput("failed to write output file");
  }

 private:
  std::ofstream file_;
};

EvidenceMethod parse_method(const std::string& text) {
  if (text == "exact") return EvidenceMethod::exact;
  if (text == "mc") return EvidenceMethod::mc;
  throw InvalidInput(fmt::format("unknown evidence method '{}' (expected exact or mc)", text));
}

KeyValues load_checked(const std::string& path, const std::set<std::string>& extra = {}) {
  auto kv = KeyValues::load(path);
  auto known = kShapeKeys;
  known.insert(extra.begin(), extra.end());
  kv.require_known(known, kParamPrefixes);
  return kv;
}

// Learner shape from --spec, or from K/T/M/Y in `fallback`.
NetworkSpec learner_from(const std::string& spec_path, const KeyValues& fallback) {
  if (!spec_path.empty()) return spec_from_keys(load_checked(spec_path));
  if (!fallback.has("T")) {
    throw InvalidInput(fmt::format("{}: no learner shape (pass --spec or add K and T)",
                                   fallback.source()));
  }
  return spec_from_keys(fallback);
}

struct CoeffArgs {
  std::string truth, spec;
};

void run_coeff(const CoeffArgs& args, Output& out) {
  const auto kv = load_checked(args.truth);
  const auto truth = truth_shape_from_keys(kv);
  const auto learner = learner_from(args.spec, kv);
  out.stream() << format_report(theorem1_mu(truth, learner)) << '\n';
}

struct KlArgs {
  std::string truth, spec, params, data;
};

void run_kl(const KlArgs& args, Output& out) {
  const auto truth_kv = load_checked(args.truth);
  const auto truth = truth_from_keys(truth_kv);
  std::optional<KeyValues> params_kv;
  if (!args.params.empty()) params_kv = load_checked(args.params);
  const auto learner =
      args.spec.empty() && params_kv ? learner_from("", *params_kv) : learner_from(args.spec, truth_kv);
  require_compatible(truth, learner);
  const auto params = params_kv ? params_from_keys(learner, *params_kv) : embed_truth(truth, learner);
  out.stream() << "kl=" << format_real(kl_full(truth, learner, params).nats);
  if (!args.data.empty()) {
    const auto data = load_dataset(args.data, learner);
    out.stream() << " empirical_kl=" << format_real(empirical_kl(truth, learner, params, data));
  }
  out.stream() << '\n';
}

struct EvidenceArgs {
  std::string truth, spec, data, method = "exact";
  double prior_alpha = 1.0;
  std::size_t mc_draws = 100000;
  double max_allocations = kDefaultMaxAllocations;
};

void run_evidence(const EvidenceArgs& args, const GlobalOptions& global, Output& out) {
  const auto truth_kv = load_checked(args.truth);
  const auto truth = truth_from_keys(truth_kv);
  const auto learner = learner_from(args.spec, truth_kv);
  require_compatible(truth, learner);
  const auto data = load_dataset(args.data, learner);
  const auto prior = Prior::uniform(learner, args.prior_alpha);
  const auto result = parse_method(args.method) == EvidenceMethod::exact
                          ? log_evidence_exact(learner, prior, data, args.max_allocations)
                          : log_evidence_mc(learner, prior, data, args.mc_draws, global.seed,
                                            global.threads);
  const auto full = stochastic_complexity(result, truth, data);
  out.stream() << fmt::format("log_Z0={} S={} F={} stderr={} terms={}\n",
                              format_real(full.log_Z0), format_real(*full.S_emp),
                              format_real(*full.F), format_real(full.std_error), full.terms);
}

struct CurveArgs {
  std::string config, truth, spec;
};

void run_curve_command(const CurveArgs& args, const GlobalOptions& global, Output& out) {
  const auto kv = load_checked(args.config, kExperimentKeys);
  CurveConfig config;
  config.truth = args.truth.empty() ? truth_from_keys(kv) : truth_from_keys(load_checked(args.truth));
  config.learner = learner_from(args.spec, kv);
  for (int n : kv.get_ints("ns")) {
    if (n < 2) throw InvalidInput(fmt::format("{}: every n must be at least 2", kv.source()));
    config.ns.push_back(static_cast<std::size_t>(n));
  }
  if (kv.has("replicates")) {
    const int r = kv.get_int("replicates");
    if (r < 2) throw InvalidInput(fmt::format("{}: replicates must be at least 2", kv.source()));
    config.replicates = static_cast<std::size_t>(r);
  }
  if (kv.has("method")) config.evidence.method = parse_method(kv.get("method"));
  if (kv.has("mc_draws")) {
    const int draws = kv.get_int("mc_draws");
    if (draws < 100) throw InvalidInput(fmt::format("{}: mc_draws must be at least 100", kv.source()));
    config.evidence.mc_draws = static_cast<std::size_t>(draws);
  }
  if (kv.has("prior_alpha")) config.evidence.prior_alpha = kv.get_real("prior_alpha");
  config.seed = global.seed;
  config.workers = global.threads;

  const auto curve = run_curve(config);
  write_curve_csv(out.stream(), curve);
  const auto report = theorem1_mu(config.truth, config.learner);
  if (curve.fit) {
    std::cout << curve_summary(curve, report) << '\n';
  } else {
    std::cout << fmt::format("lambda_hat=nan stderr=nan mu={:.1f} half_d={:.1f}\n",
                             report.mu.value(), report.half_d.value());
  }
}

struct SelectArgs {
  std::string truth, method = "exact";
  std::vector<std::string> candidates;
  std::size_t n = 64, replicates = 20, mc_draws = 100000;
  double prior_alpha = 1.0;
  int restarts = 20;
};

void run_select_command(const SelectArgs& args, const GlobalOptions& global, Output& out) {
  SelectConfig config;
  config.truth = truth_from_keys(load_checked(args.truth));
  for (const auto& path : args.candidates) config.candidates.push_back(learner_from(path, {}));
  config.n = args.n;
  config.replicates = args.replicates;
  config.evidence.method = parse_method(args.method);
  config.evidence.mc_draws = args.mc_draws;
  config.evidence.prior_alpha = args.prior_alpha;
  config.em.restarts = args.restarts;
  config.em.seed = global.seed;
  config.seed = global.seed;
  config.workers = global.threads;

  const auto result = run_select(config);
  write_select_csv(out.stream(), result);
  if (out.to_file()) {
    std::cout << fmt::format("bic_agreement={} singular_agreement={}\n",
                             format_real(result.bic_agreement),
                             format_real(result.singular_agreement));
  }
}

int run_check_props(const GlobalOptions& global, Output& out) {
  const auto report = run_props(global.seed, global.threads);
  write_props(out.stream(), report);
  return report.passed() ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic complexity of naive Bayesian networks with latent nodes"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Master seed for every random quantity");
  app.add_option("--out", global.out, "Write the primary output here instead of stdout");
  app.add_option("--threads", global.threads, "Worker threads (0 = all cores)");

  CoeffArgs coeff;
  auto* coeff_cmd = app.add_subcommand("coeff", "Learning-coefficient bound and BIC coefficient");
  coeff_cmd->add_option("--truth", coeff.truth, "Truth file (shape keys suffice)")->required();
  coeff_cmd->add_option("--spec", coeff.spec, "Learner spec file (default: K/T in the truth file)");

  KlArgs kl;
  auto* kl_cmd = app.add_subcommand("kl", "Kullback divergence from the truth to learner parameters");
  kl_cmd->add_option("--truth", kl.truth, "Truth file")->required();
  kl_cmd->add_option("--spec", kl.spec, "Learner spec file");
  kl_cmd->add_option("--params", kl.params, "Learner parameters (default: embedded truth)");
  kl_cmd->add_option("--data", kl.data, "Dataset for the empirical divergence");

  EvidenceArgs evidence;
  auto* evidence_cmd = app.add_subcommand("evidence", "Log evidence and stochastic complexity");
  evidence_cmd->add_option("--truth", evidence.truth, "Truth file")->required();
  evidence_cmd->add_option("--spec", evidence.spec, "Learner spec file");
  evidence_cmd->add_option("--data", evidence.data, "Dataset CSV")->required();
  evidence_cmd->add_option("--prior-alpha", evidence.prior_alpha, "Symmetric Dirichlet concentration");
  evidence_cmd->add_option("--method", evidence.method, "exact or mc");
  evidence_cmd->add_option("--mc-draws", evidence.mc_draws, "Prior draws for the mc method");
  evidence_cmd->add_option("--max-allocations", evidence.max_allocations,
                           "Cost bound for exact enumeration");

  CurveArgs curve;
  auto* curve_cmd = app.add_subcommand("curve", "Average stochastic complexity over an n grid");
  curve_cmd->add_option("--config", curve.config, "Experiment file (ns, replicates, ...)")->required();
  curve_cmd->add_option("--truth", curve.truth, "Truth file (default: the config file)");
  curve_cmd->add_option("--spec", curve.spec, "Learner spec file (default: K/T in the config)");

  SelectArgs select;
  auto* select_cmd = app.add_subcommand("select", "Compare evidence, BIC and singular criterion");
  select_cmd->add_option("--truth", select.truth, "Truth file")->required();
  select_cmd->add_option("--candidate", select.candidates, "Candidate spec file (repeatable)")
      ->required();
  select_cmd->add_option("--n", select.n, "Sample size");
  select_cmd->add_option("--replicates", select.replicates, "Replicate datasets");
  select_cmd->add_option("--method", select.method, "Evidence method: exact or mc");
  select_cmd->add_option("--mc-draws", select.mc_draws, "Prior draws for the mc method");
  select_cmd->add_option("--prior-alpha", select.prior_alpha, "Symmetric Dirichlet concentration");
  select_cmd->add_option("--restarts", select.restarts, "EM restarts per fit");

  app.add_subcommand("check-props", "Property checks of the Laplace functional and coefficients");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    Output out(global.out);
    int code = kOk;
    if (*coeff_cmd) {
      run_coeff(coeff, out);
    } else if (*kl_cmd) {
      run_kl(kl, out);
    } else if (*evidence_cmd) {
      run_evidence(evidence, global, out);
    } else if (*curve_cmd) {
      run_curve_command(curve, global, out);
    } else if (*select_cmd) {
      run_select_command(select, global, out);
    } else {
      code = run_check_props(global, out);
    }
    out.close();
    return code;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const Infeasible& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kNumerical;
  }
}
