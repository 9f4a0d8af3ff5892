#include "bnsc/experiments.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <algorithm>
#include <limits>
#include <ostream>

#include "bnsc/divergence.hpp"
#include "bnsc/errors.hpp"
#include "bnsc/io.hpp"
#include "bnsc/parallel.hpp"

namespace bnsc {
namespace {

constexpr std::uint64_t kMcStream = 0x6d63'6576'6964'656eULL;
constexpr std::uint64_t kEmStream = 0x656d'6669'7473'0000ULL;
constexpr double kTieTolerance = 1e-9;

Seed mc_seed_for(Seed replicate_seed, std::size_t n) {
  return derive_seed(replicate_seed ^ kMcStream, n);
}

std::size_t pick_lowest(const std::vector<double>& scores,
                        const std::vector<long long>& dims) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    const double diff = scores[c] - scores[best];
    if (diff < -kTieTolerance || (std::abs(diff) <= kTieTolerance && dims[c] < dims[best])) {
      best = c;
    }
  }
  return best;
}

// w = (a_1, b_{1,1}, b_{2,1}) for the one-observable, one binary hidden node
// learner with a binary observable.
ParamSet single_node_params(std::span<const double> w) {
  ParamSet params;
  params.mixing = {{w[0], 1.0 - w[0]}};
  params.emission = {{{w[1], 1.0 - w[1]}}, {{w[2], 1.0 - w[2]}}};
  return params;
}

PropCheck check(std::string name, double margin, bool passed, std::string detail) {
  return {std::move(name), margin, passed, std::move(detail)};
}

}  // namespace

double complexity_of(const TrueModel& truth, const NetworkSpec& learner,
                     const EvidenceSettings& settings, const Dataset& data,
                     Seed mc_seed) {
  const auto prior = Prior::uniform(learner, settings.prior_alpha);
  auto evidence =
      settings.method == EvidenceMethod::exact
          ? log_evidence_exact(learner, prior, data, settings.max_allocations)
          : log_evidence_mc(learner, prior, data, settings.mc_draws, mc_seed);
  return *stochastic_complexity(std::move(evidence), truth, data).F;
}

std::vector<std::string> check_config(const CurveConfig& config) {
  std::vector<std::string> problems;
  if (config.ns.empty()) problems.push_back("n grid is empty");
  for (std::size_t i = 0; i < config.ns.size(); ++i) {
    if (config.ns[i] < 2) problems.push_back(fmt::format("n = {} is below 2", config.ns[i]));
    if (i > 0 && config.ns[i] <= config.ns[i - 1]) {
      problems.push_back("n grid must be strictly increasing");
    }
  }
  if (config.replicates < 2) problems.push_back("replicates must be at least 2");
  if (!(config.evidence.prior_alpha > 0.0)) problems.push_back("prior_alpha must be positive");
  if (config.evidence.method == EvidenceMethod::mc && config.evidence.mc_draws < 100) {
    problems.push_back("mc_draws must be at least 100");
  }
  for (auto& p : check_compatible(config.truth, config.learner)) problems.push_back(p);
  return problems;
}

SlopeFit fit_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw InvalidInput("slope fit needs at least three points");
  const double k = static_cast<double>(points.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const auto& [n, value] : points) {
    if (!(n > 0.0)) throw InvalidInput("slope fit needs positive sample sizes");
    mean_x += std::log(n);
    mean_y += value;
  }
  mean_x /= k;
  mean_y /= k;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& [n, value] : points) {
    const double dx = std::log(n) - mean_x;
    sxx += dx * dx;
    sxy += dx * (value - mean_y);
  }
  if (sxx <= 0.0) throw InvalidInput("slope fit needs at least two distinct sample sizes");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  double ssr = 0.0;
  for (const auto& [n, value] : points) {
    const double r = value - (fit.intercept + fit.slope * std::log(n));
    ssr += r * r;
  }
  fit.slope_stderr = std::sqrt(ssr / (k - 2.0) / sxx);
  fit.points = points.size();
  return fit;
}

std::vector<std::pair<double, double>> slope_points(const LearningCurve& curve) {
  const std::size_t first = curve.points.size() >= 5 ? curve.points.size() / 2 : 0;
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = first; i < curve.points.size(); ++i) {
    out.emplace_back(static_cast<double>(curve.points[i].n), curve.points[i].mean_F);
  }
  return out;
}

LearningCurve run_curve(const CurveConfig& config, const ComplexityHook& hook) {
  if (const auto problems = check_config(config); !problems.empty()) {
    throw InvalidInput(fmt::format("invalid curve config: {}", fmt::join(problems, "; ")));
  }
  const std::size_t sizes = config.ns.size();
  const std::size_t largest = config.ns.back();
  // values[i * replicates + r]
  std::vector<double> values(sizes * config.replicates);
  parallel_for(config.replicates, config.workers, [&](std::size_t r) {
    const Seed replicate_seed = derive_seed(config.seed, r);
    const auto full = sample_dataset(config.truth, largest, replicate_seed);
    for (std::size_t i = 0; i < sizes; ++i) {
      const std::size_t n = config.ns[i];
      const auto data = full.prefix(n);
      values[i * config.replicates + r] =
          hook ? hook(data, n, r)
               : complexity_of(config.truth, config.learner, config.evidence, data,
                               mc_seed_for(replicate_seed, n));
    }
  });

  LearningCurve curve;
  for (std::size_t i = 0; i < sizes; ++i) {
    const auto begin = values.begin() + static_cast<std::ptrdiff_t>(i * config.replicates);
    const auto stats = summarize({begin, begin + static_cast<std::ptrdiff_t>(config.replicates)});
    curve.points.push_back({config.ns[i], config.replicates, stats.mean, stats.std_error});
  }
  if (sizes >= 3) {
    const auto pts = slope_points(curve);
    curve.fit = fit_slope(pts);
  }
  return curve;
}

void write_curve_csv(std::ostream& out, const LearningCurve& curve) {
  out << "n,replicates,mean_F,stderr_F\n";
  for (const auto& p : curve.points) {
    out << p.n << ',' << p.replicates << ',' << format_real(p.mean_F) << ','
        << format_real(p.stderr_F) << '\n';
  }
}

std::string curve_summary(const LearningCurve& curve, const CoefficientReport& report) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double slope = curve.fit ? curve.fit->slope : nan;
  const double stderr_slope = curve.fit ? curve.fit->slope_stderr : nan;
  return fmt::format("lambda_hat={} stderr={} mu={:.1f} half_d={:.1f}", format_real(slope),
                     format_real(stderr_slope), report.mu.value(), report.half_d.value());
}

FEnsemble complexity_ensemble(const TrueModel& truth, const NetworkSpec& learner,
                              const EvidenceSettings& settings, std::size_t n,
                              std::size_t replicates, Seed seed, unsigned workers) {
  require_compatible(truth, learner);
  FEnsemble ensemble{n, seed, std::vector<double>(replicates)};
  parallel_for(replicates, workers, [&](std::size_t r) {
    const Seed replicate_seed = derive_seed(seed, r);
    const auto data = sample_dataset(truth, n, replicate_seed);
    ensemble.values[r] =
        complexity_of(truth, learner, settings, data, mc_seed_for(replicate_seed, n));
  });
  return ensemble;
}

ReplicateEstimate gen_error_from_F(const FEnsemble& at_n, const FEnsemble& at_next) {
  if (at_n.seed != at_next.seed || at_n.values.size() != at_next.values.size()) {
    throw InvalidInput("gen_error_from_F: ensembles do not share replicate datasets");
  }
  if (at_next.n != at_n.n + 1) {
    throw InvalidInput("gen_error_from_F: ensembles must be at n and n + 1");
  }
  std::vector<double> diffs(at_n.values.size());
  for (std::size_t r = 0; r < diffs.size(); ++r) diffs[r] = at_next.values[r] - at_n.values[r];
  return summarize(std::move(diffs));
}

SelectResult run_select(const SelectConfig& config) {
  if (config.candidates.empty()) throw InvalidInput("select needs at least one candidate");
  if (config.n < 2) throw InvalidInput("select needs n >= 2");
  std::vector<CoefficientReport> reports;
  std::vector<long long> dims;
  for (const auto& candidate : config.candidates) {
    reports.push_back(theorem1_mu(config.truth, candidate));
    dims.push_back(reports.back().d);
  }
  const std::size_t count = config.candidates.size();
  const double log_n = std::log(static_cast<double>(config.n));

  SelectResult result;
  result.rows.resize(config.replicates * count);
  parallel_for(config.replicates, config.workers, [&](std::size_t r) {
    const Seed replicate_seed = derive_seed(config.seed, r);
    const auto data = sample_dataset(config.truth, config.n, replicate_seed);
    for (std::size_t c = 0; c < count; ++c) {
      const auto& candidate = config.candidates[c];
      const auto prior = Prior::uniform(candidate, config.evidence.prior_alpha);
      const auto evidence =
          config.evidence.method == EvidenceMethod::exact
              ? log_evidence_exact(candidate, prior, data, config.evidence.max_allocations)
              : log_evidence_mc(candidate, prior, data, config.evidence.mc_draws,
                                derive_seed(replicate_seed ^ kMcStream, c));
      auto em = config.em;
      em.seed = derive_seed(replicate_seed ^ kEmStream, c);
      const double max_ll = fit_em(candidate, data, em).log_likelihood;
      auto& row = result.rows[r * count + c];
      row.replicate = r;
      row.candidate = c;
      row.neg_log_Z0 = -evidence.log_Z0;
      row.bic_score = -max_ll + reports[c].half_d.value() * log_n;
      row.singular_score = -max_ll + reports[c].mu.value() * log_n;
    }
  });

  std::size_t bic_hits = 0;
  std::size_t singular_hits = 0;
  std::vector<double> gold(count), bic(count), singular(count);
  for (std::size_t r = 0; r < config.replicates; ++r) {
    for (std::size_t c = 0; c < count; ++c) {
      const auto& row = result.rows[r * count + c];
      gold[c] = row.neg_log_Z0;
      bic[c] = row.bic_score;
      singular[c] = row.singular_score;
    }
    result.gold_choice.push_back(pick_lowest(gold, dims));
    result.bic_choice.push_back(pick_lowest(bic, dims));
    result.singular_choice.push_back(pick_lowest(singular, dims));
    bic_hits += result.bic_choice.back() == result.gold_choice.back();
    singular_hits += result.singular_choice.back() == result.gold_choice.back();
  }
  if (config.replicates > 0) {
    result.bic_agreement = static_cast<double>(bic_hits) / config.replicates;
    result.singular_agreement = static_cast<double>(singular_hits) / config.replicates;
  }
  return result;
}

void write_select_csv(std::ostream& out, const SelectResult& result) {
  out << "replicate,candidate,neg_log_Z0,bic_score,singular_score\n";
  for (const auto& row : result.rows) {
    out << row.replicate + 1 << ',' << row.candidate + 1 << ',' << format_real(row.neg_log_Z0)
        << ',' << format_real(row.bic_score) << ',' << format_real(row.singular_score) << '\n';
  }
}

bool PropsReport::passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

std::pair<TrueModel, NetworkSpec> random_compatible_shapes(Rng& rng, int max_hidden,
                                                           int max_states,
                                                           int max_observables) {
  auto draw = [&](int lo, int hi) { return lo + static_cast<int>(rng() % (hi - lo + 1)); };
  NetworkSpec learner;
  const int K = draw(1, max_hidden);
  for (int k = 0; k < K; ++k) learner.hidden_states.push_back(draw(2, max_states));
  const int M = draw(1, max_observables);
  for (int j = 0; j < M; ++j) learner.observable_states.push_back(draw(2, max_states));
  TrueModel truth;
  const int H = draw(1, K);
  for (int k = 0; k < H; ++k) truth.spec.hidden_states.push_back(draw(1, learner.hidden_states[k]));
  truth.spec.observable_states = learner.observable_states;
  return {truth, learner};
}

PropsReport run_props(Seed seed, unsigned workers) {
  PropsReport report;

  // Jensen bound on the one-observable learner over a Bernoulli(0.3) truth:
  // mean F(n) <= -log int exp(-n H(w)) dw with the flat prior on [0,1]^3.
  {
    TrueModel truth{NetworkSpec{{1}, {2}}, ParamSet{{{1.0}}, {{{0.3, 0.7}}}}};
    const NetworkSpec learner{{2}, {2}};
    const std::vector<double> lower{0.0, 0.0, 0.0};
    const std::vector<double> upper{1.0, 1.0, 1.0};
    const BoxFunction kl = [&](std::span<const double> w) {
      return kl_full(truth, learner, single_node_params(w)).nats;
    };
    const BoxFunction flat = [](std::span<const double>) { return 1.0; };
    for (std::size_t n : {4u, 8u, 16u}) {
      const auto ensemble = complexity_ensemble(truth, learner, EvidenceSettings{}, n, 200,
                                                derive_seed(seed, n), workers);
      const auto stats = summarize(ensemble.values);
      const double bound = laplace_functional(kl, flat, lower, upper, static_cast<double>(n), 64);
      const double margin = bound + 3.0 * stats.std_error - stats.mean;
      report.checks.push_back(check(
          fmt::format("prop1_jensen_n{}", n), margin, margin >= 0.0,
          fmt::format("mean_F={} stderr={} bound={}", format_real(stats.mean),
                      format_real(stats.std_error), format_real(bound))));
    }
  }

  // Monotonicity in S (smaller is better) and psi (larger is better).
  {
    struct Pair {
      BoxFunction s1, s2, psi1, psi2;
    };
    const std::vector<Pair> pairs{
        {[](auto w) { return w[0] * w[0]; }, [](auto w) { return w[0] * w[0] + 0.1 * w[0]; },
         [](auto w) { return 1.0 + w[0]; }, [](auto) { return 1.0; }},
        {[](auto w) { return std::abs(w[0] - 0.5); }, [](auto w) { return 2.0 * std::abs(w[0] - 0.5); },
         [](auto) { return 2.0; }, [](auto) { return 1.5; }},
        {[](auto w) { return std::pow(w[0], 4); }, [](auto w) { return std::pow(w[0], 4); },
         [](auto w) { return 1.0 + w[0] * w[0]; }, [](auto w) { return w[0] * w[0]; }},
        {[](auto w) { return 0.5 * w[0]; }, [](auto w) { return w[0]; },
         [](auto) { return 1.0; }, [](auto) { return 1.0; }},
    };
    const std::vector<double> lower{0.0};
    const std::vector<double> upper{1.0};
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& p : pairs) {
      for (double n : {1.0, 10.0, 100.0, 1000.0}) {
        const double f1 = laplace_functional(p.s1, p.psi1, lower, upper, n, 2000);
        const double f2 = laplace_functional(p.s2, p.psi2, lower, upper, n, 2000);
        worst = std::min(worst, f2 - f1);
      }
    }
    report.checks.push_back(check("prop2_monotonicity", worst, worst >= -1e-10,
                                  fmt::format("pairs={} scales=4", pairs.size())));
  }

  // Additivity for separable S and product psi.
  {
    const BoxFunction s1 = [](auto w) { return (w[0] - 0.3) * (w[0] - 0.3); };
    const BoxFunction s2 = [](auto w) { return std::pow(w[0], 4); };
    const BoxFunction psi1 = [](auto w) { return 1.0 + w[0]; };
    const BoxFunction psi2 = [](auto w) { return 2.0 - w[0]; };
    const BoxFunction s12 = [&](auto w) { return s1(w.subspan(0, 1)) + s2(w.subspan(1, 1)); };
    const BoxFunction psi12 = [&](auto w) { return psi1(w.subspan(0, 1)) * psi2(w.subspan(1, 1)); };
    const std::vector<double> lo1{0.0}, hi1{1.0}, lo2{0.0, 0.0}, hi2{1.0, 1.0};
    double worst = 0.0;
    for (double n : {10.0, 100.0, 1000.0}) {
      const double joint = laplace_functional(s12, psi12, lo2, hi2, n, 400);
      const double parts = laplace_functional(s1, psi1, lo1, hi1, n, 400) +
                           laplace_functional(s2, psi2, lo1, hi1, n, 400);
      worst = std::max(worst, std::abs(joint - parts));
    }
    report.checks.push_back(check("prop3_additivity", worst, worst <= 1e-8, "scales=3"));
  }

  // mu = lemma2 + lemma3 and mu <= d/2 over random shapes.
  {
    auto rng = make_rng(derive_seed(seed, 0xC0EFF));
    long long worst_identity = 0;
    HalfInteger tightest{std::numeric_limits<long long>::max()};
    for (int i = 0; i < 500; ++i) {
      const auto [truth, learner] = random_compatible_shapes(rng, 4, 5, 4);
      const auto r = theorem1_mu(truth, learner);
      worst_identity = std::max(worst_identity, std::abs((r.mu - (r.lemma2 + r.lemma3)).twice));
      tightest = std::min(tightest, r.half_d - r.mu);
    }
    report.checks.push_back(check("mu_decomposition", static_cast<double>(worst_identity) / 2.0,
                                  worst_identity == 0, "shapes=500"));
    report.checks.push_back(check("mu_below_half_d", tightest.value(),
                                  tightest >= HalfInteger{0}, "shapes=500"));
  }

  // F = -log Z0 - S_emp against an independent prior-sampling estimate of
  // -log int exp(-n H_n(w)) phi(w) dw.
  {
    TrueModel truth{NetworkSpec{{2}, {2, 3}},
                    ParamSet{{{0.6, 0.4}},
                             {{{0.8, 0.2}, {0.1, 0.3, 0.6}}, {{0.3, 0.7}, {0.5, 0.4, 0.1}}}}};
    const NetworkSpec learner{{2}, {2, 3}};
    const auto data = sample_dataset(truth, 6, derive_seed(seed, 0xF1D));
    const auto prior = Prior::uniform(learner);
    const double F = *stochastic_complexity(log_evidence_exact(learner, prior, data), truth, data).F;
    const std::size_t draws = 200000;
    const double n = static_cast<double>(data.size());
    std::vector<double> log_terms(draws);
    auto rng = make_rng(derive_seed(seed, 0xF1E));
    for (auto& v : log_terms) v = -n * empirical_kl(truth, learner, sample_prior(learner, prior, rng), data);
    const double shift = *std::max_element(log_terms.begin(), log_terms.end());
    double sum = 0.0, sum_sq = 0.0;
    for (double v : log_terms) {
      const double w = std::exp(v - shift);
      sum += w;
      sum_sq += w * w;
    }
    const double mean = sum / draws;
    const double sd = std::sqrt(std::max(0.0, sum_sq / draws - mean * mean));
    const double estimate = -(shift + std::log(mean));
    const double se = sd / (mean * std::sqrt(static_cast<double>(draws)));
    const double margin = 3.0 * se - std::abs(estimate - F);
    report.checks.push_back(check("free_energy_identity", margin, margin >= 0.0,
                                  fmt::format("F={} mc={} stderr={}", format_real(F),
                                              format_real(estimate), format_real(se))));
  }
  return report;
}

void write_props(std::ostream& out, const PropsReport& report) {
  for (const auto& c : report.checks) {
    out << c.name << " margin=" << format_real(c.margin) << (c.passed ? " PASS " : " FAIL ")
        << c.detail << '\n';
  }
}

}  // namespace bnsc
