#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dop/stsg.hpp"
#include "dop/tree.hpp"

namespace dop {

/// A leftmost sequence of elementary-tree substitutions.
struct Derivation {
  std::vector<Tree> steps;  // first step is the root fragment
  Tree result;
  double log_probability = 0.0;
  double probability = 1.0;

  /// Step canonicals joined; the deterministic tie-break key.
  std::string canonical() const;
};

/// Packed chart of all derivations of a sentence under an Stsg. Elementary
/// trees are matched incrementally through dotted partial items; those items
/// never escape this class.
class DerivationForest {
 public:
  // Chart internals; defined in forest_detail.hpp, opaque to users.
  struct Fragment;
  struct Partial;
  struct Complete;

  /// Throws UnknownWord for words outside the grammar's lexicon. A sentence
  /// with known words but no parse yields an empty forest.
  DerivationForest(const Stsg& grammar, std::vector<std::string> sentence);
  DerivationForest(DerivationForest&&) noexcept;
  DerivationForest& operator=(DerivationForest&&) noexcept;
  DerivationForest(const DerivationForest&) = delete;
  DerivationForest& operator=(const DerivationForest&) = delete;
  ~DerivationForest();

  bool empty() const { return start_item_ < 0; }
  const std::vector<std::string>& sentence() const { return sentence_; }
  const Stsg& grammar() const { return *grammar_; }

  /// Derivation-sum mass of the start item; 0 for an empty forest.
  double inside_mass() const;

  /// Number of complete derivations, saturating at `cap`.
  std::uint64_t derivation_count(std::uint64_t cap = UINT64_C(1) << 62) const;

  /// Calls `fn` once per complete derivation, in chart order.
  void for_each_derivation(const std::function<void(Derivation&&)>& fn) const;

  Derivation most_probable() const;  // throws NoParse on an empty forest

  /// One derivation drawn with probability proportional to its probability.
  Derivation sample(std::uint64_t& rng_state) const;  // throws NoParse

 private:
  void build();
  void ensure_inside() const;
  double inside_of_complete(int c) const;
  double inside_of_partial(int p) const;

  const Stsg* grammar_;
  std::vector<std::string> sentence_;
  std::vector<Fragment> fragments_;
  std::vector<Partial> partials_;
  std::vector<Complete> completes_;
  int start_item_ = -1;

  mutable std::vector<double> inside_complete_, inside_partial_;
  mutable std::vector<char> state_complete_, state_partial_;
  mutable bool inside_ready_ = false;

  friend struct ForestOps;
};

DerivationForest build_forest(const Stsg& grammar, const std::vector<std::string>& sentence);

/// All derivations, most probable first (ties by canonical step text).
/// Throws LimitExceeded if the forest holds more than `limit` derivations,
/// unless `allow_truncation` is set, in which case a prefix is returned.
std::vector<Derivation> enumerate_derivations(const DerivationForest& forest, std::uint64_t limit,
                                              bool allow_truncation = false);

Derivation most_probable_derivation(const DerivationForest& forest);

/// Exact sum over derivations producing `tree`; 0 if the tree is not
/// derivable or does not yield the forest's sentence. Computed by a
/// grammar-side recursion, independent of derivation enumeration.
double tree_probability(const Tree& tree, const DerivationForest& forest);

struct ExactMptResult {
  Tree tree;
  double probability = 0.0;
  bool tied = false;  // runner-up within 1e-12
};

/// Enumerates (throws BudgetExceeded when derivation_count > budget) and
/// aggregates derivation mass per result tree.
ExactMptResult exact_most_probable_tree(const DerivationForest& forest, std::uint64_t budget);

Derivation sample_derivation(const DerivationForest& forest, std::uint64_t& rng_state);

struct MonteCarloResult {
  Tree tree;
  double frequency = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
  bool contested = false;  // runner-up within 3 combined standard errors
};

/// Tallies result trees over `samples` draws. Each draw's RNG stream is
/// derived from (seed, sample index), so tallies are independent of any
/// worker partitioning.
MonteCarloResult monte_carlo_mpt(const DerivationForest& forest, std::size_t samples,
                                 std::uint64_t seed);

/// Sequential stopping variant: samples in batches until the leader beats the
/// runner-up by 3 combined standard errors or max_samples is reached.
MonteCarloResult monte_carlo_mpt_sequential(const DerivationForest& forest,
                                            std::size_t max_samples, std::size_t batch,
                                            std::uint64_t seed);

}  // namespace dop
