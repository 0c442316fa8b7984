#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dop/tree.hpp"
#include "dop/treebank.hpp"

namespace dop {

struct SentenceResult {
  Tree gold;
  std::optional<Tree> proposed;  // empty = NoParse
  // Whether some parse in the full parse set equals gold; when absent,
  // falls back to proposed == gold.
  std::optional<bool> gold_among_found;

  bool parsable() const { return proposed.has_value(); }
};

struct EvalReport {
  std::size_t n = 0;
  double coverage = 0.0;
  double structural_consistency = 0.0;
  double parse_accuracy = 0.0;
  double zero_crossing_rate = 0.0;
  double mean_crossing_brackets = 0.0;
};

/// Fraction of sentences that received any parse.
double coverage(const std::vector<SentenceResult>& results);

/// Fraction of sentences for which a found parse equals gold. Not the same
/// thing as coverage; conflating the two is the §-famous mistake this module
/// exists to keep apart.
double structural_consistency(const std::vector<SentenceResult>& results);

/// Fraction of sentences whose selected parse equals gold; NoParse counts as
/// a mismatch.
double parse_accuracy(const std::vector<SentenceResult>& results);

/// Number of proposed constituents whose span strictly crosses some gold
/// span. Throws YieldMismatch when the yields differ.
int crossing_brackets(const Tree& gold, const Tree& proposed);

EvalReport evaluate(const std::vector<SentenceResult>& results);

std::string report_to_table(const EvalReport& report);
std::string report_to_kv(const EvalReport& report);

/// P(sum of independent Bernoulli(p_i) >= min_successes), exact convolution.
double poisson_binomial_tail(const std::vector<double>& probs, std::size_t min_successes);

struct SplitAnalysis {
  std::vector<double> per_sentence_producibility;
  double threshold_fraction = 0.0;
  double tail_probability = 0.0;
};

/// For each corpus sentence: the fraction of seeded random splits, among
/// those in which it fell into the test set, where its tree was producible
/// from the co-sampled training set. Sentences never drawn into the test set
/// over `trials` splits get their exact single-holdout producibility.
std::vector<double> producibility_simulation(const Corpus& corpus, double test_fraction,
                                             std::size_t trials, std::uint64_t seed);

/// poisson_binomial_tail(probs, ceil(threshold * n)): the chance of drawing
/// a test set that parses at the given rate.
double chance_of_test_set(const std::vector<double>& probs, double threshold_fraction);
double chance_of_test_set(const SplitAnalysis& analysis);

/// Bundles per-sentence probabilities with the threshold and its tail.
SplitAnalysis make_split_analysis(std::vector<double> probs, double threshold_fraction);

}  // namespace dop
