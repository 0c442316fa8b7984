#include "dop/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "dop/errors.hpp"
#include "dop/stsg.hpp"

namespace dop {

double coverage(const std::vector<SentenceResult>& results) {
  if (results.empty()) throw Error("empty result set");
  std::size_t parsed = 0;
  for (const auto& r : results) parsed += r.parsable();
  return static_cast<double>(parsed) / static_cast<double>(results.size());
}

double structural_consistency(const std::vector<SentenceResult>& results) {
  if (results.empty()) throw Error("empty result set");
  std::size_t hits = 0;
  for (const auto& r : results) {
    bool found = r.gold_among_found.value_or(r.parsable() && *r.proposed == r.gold);
    hits += found;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double parse_accuracy(const std::vector<SentenceResult>& results) {
  if (results.empty()) throw Error("empty result set");
  std::size_t hits = 0;
  for (const auto& r : results) hits += r.parsable() && *r.proposed == r.gold;
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

int crossing_brackets(const Tree& gold, const Tree& proposed) {
  if (yield_of(gold) != yield_of(proposed)) throw YieldMismatch();
  auto spans = [](const Tree& t) {
    std::vector<std::pair<int, int>> out;
    for (auto [i, j] : spans_of(t))
      if (j - i >= 2) out.emplace_back(i, j);  // width-<2 spans cannot cross
    return out;
  };
  std::vector<std::pair<int, int>> gold_spans = spans(gold);
  int crossings = 0;
  for (auto [i, j] : spans(proposed)) {
    bool crosses = false;
    for (auto [k, l] : gold_spans)
      if ((k < i && i < l && l < j) || (i < k && k < j && j < l)) crosses = true;
    crossings += crosses;
  }
  return crossings;
}

EvalReport evaluate(const std::vector<SentenceResult>& results) {
  EvalReport report;
  report.n = results.size();
  report.coverage = coverage(results);
  report.structural_consistency = structural_consistency(results);
  report.parse_accuracy = parse_accuracy(results);
  std::size_t compared = 0, zero = 0;
  double total = 0.0;
  for (const auto& r : results) {
    if (!r.parsable()) continue;
    int crossings = crossing_brackets(r.gold, *r.proposed);
    ++compared;
    zero += crossings == 0;
    total += crossings;
  }
  report.zero_crossing_rate = compared ? static_cast<double>(zero) / compared : 0.0;
  report.mean_crossing_brackets = compared ? total / compared : 0.0;
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

std::string report_to_table(const EvalReport& report) {
  std::string out;
  out += "metric                    value\n";
  out += "------------------------  ----------\n";
  out += "sentences                 " + std::to_string(report.n) + "\n";
  out += "coverage                  " + fmt(report.coverage) + "\n";
  out += "structural_consistency    " + fmt(report.structural_consistency) + "\n";
  out += "parse_accuracy            " + fmt(report.parse_accuracy) + "\n";
  out += "zero_crossing_rate        " + fmt(report.zero_crossing_rate) + "\n";
  out += "mean_crossing_brackets    " + fmt(report.mean_crossing_brackets) + "\n";
  return out;
}

std::string report_to_kv(const EvalReport& report) {
  std::string out;
  out += "n=" + std::to_string(report.n) + "\n";
  out += "coverage=" + fmt(report.coverage) + "\n";
  out += "structural_consistency=" + fmt(report.structural_consistency) + "\n";
  out += "parse_accuracy=" + fmt(report.parse_accuracy) + "\n";
  out += "zero_crossing_rate=" + fmt(report.zero_crossing_rate) + "\n";
  out += "mean_crossing_brackets=" + fmt(report.mean_crossing_brackets) + "\n";
  return out;
}

double poisson_binomial_tail(const std::vector<double>& probs, std::size_t min_successes) {
  for (double p : probs)
    if (!(p >= 0.0 && p <= 1.0)) throw BadProbability(p);
  if (min_successes > probs.size()) return 0.0;
  if (min_successes == 0) return 1.0;
  // dist[k] = P(k successes among the first i trials).
  std::vector<double> dist(probs.size() + 1, 0.0);
  dist[0] = 1.0;
  std::size_t upto = 0;
  for (double p : probs) {
    ++upto;
    for (std::size_t k = upto; k-- > 0;) {
      dist[k + 1] += dist[k] * p;
      dist[k] *= 1.0 - p;
    }
  }
  double tail = 0.0;
  for (std::size_t k = probs.size() + 1; k-- > min_successes;) tail += dist[k];
  return std::min(1.0, tail);
}

namespace {

std::set<Production> production_set(const Tree& tree) {
  auto prods = productions(tree);
  return {prods.begin(), prods.end()};
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t trial) {
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (trial + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<double> producibility_simulation(const Corpus& corpus, double test_fraction,
                                             std::size_t trials, std::uint64_t seed) {
  if (corpus.empty()) throw EmptyCorpus();
  if (trials == 0) throw Error("trials must be >= 1");
  const std::size_t n = corpus.size();

  std::vector<std::set<Production>> per_tree;
  per_tree.reserve(n);
  for (const Tree& tree : corpus) per_tree.push_back(production_set(tree));

  std::vector<std::size_t> in_test(n, 0), producible(n, 0);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::vector<bool> mask = split_test_mask(n, test_fraction, mix_seed(seed, trial));
    // Count how many training trees carry each production.
    std::map<Production, std::size_t> trained;
    for (std::size_t i = 0; i < n; ++i)
      if (!mask[i])
        for (const Production& p : per_tree[i]) ++trained[p];
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      ++in_test[i];
      bool ok = true;
      for (const Production& p : per_tree[i])
        if (!trained.count(p)) ok = false;
      producible[i] += ok;
    }
  }

  std::vector<double> estimates(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (in_test[i] > 0) {
      estimates[i] = static_cast<double>(producible[i]) / static_cast<double>(in_test[i]);
      continue;
    }
    // Never sampled into test: exact single-holdout producibility.
    bool ok = true;
    for (const Production& p : per_tree[i]) {
      bool elsewhere = false;
      for (std::size_t k = 0; k < n && !elsewhere; ++k)
        if (k != i && per_tree[k].count(p)) elsewhere = true;
      if (!elsewhere) ok = false;
    }
    estimates[i] = ok ? 1.0 : 0.0;
  }
  return estimates;
}

double chance_of_test_set(const std::vector<double>& probs, double threshold_fraction) {
  // The epsilon keeps 0.96 * 75 from ceiling to 73 under binary rounding.
  double raw = threshold_fraction * static_cast<double>(probs.size());
  auto min_successes = static_cast<std::size_t>(std::max(0.0, std::ceil(raw - 1e-9)));
  return poisson_binomial_tail(probs, min_successes);
}

double chance_of_test_set(const SplitAnalysis& analysis) {
  return chance_of_test_set(analysis.per_sentence_producibility, analysis.threshold_fraction);
}

SplitAnalysis make_split_analysis(std::vector<double> probs, double threshold_fraction) {
  SplitAnalysis analysis;
  analysis.per_sentence_producibility = std::move(probs);
  analysis.threshold_fraction = threshold_fraction;
  analysis.tail_probability = chance_of_test_set(analysis);
  return analysis;
}

}  // namespace dop
