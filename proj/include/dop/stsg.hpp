#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dop/tree.hpp"
#include "dop/treebank.hpp"

namespace dop {

/// A counted bank of elementary trees. Probabilities are relative frequencies
/// among fragments with the same root label and are computed on demand from
/// the exact integer counts.
class Stsg {
 public:
  struct Entry {
    Tree fragment;
    std::uint64_t count = 0;
    int depth = 0;
  };

  Stsg() = default;
  Stsg(std::map<std::string, Entry> entries, int max_depth, std::string start_symbol);

  const std::map<std::string, Entry>& entries() const { return entries_; }
  const std::map<std::string, std::uint64_t>& root_totals() const { return root_totals_; }
  int max_depth() const { return max_depth_; }  // 0 = unbounded
  const std::string& start_symbol() const { return start_symbol_; }
  bool empty() const { return entries_.empty(); }

  bool contains(const std::string& canonical) const { return entries_.count(canonical) > 0; }
  /// count / root_total for the entry's root label; throws UnknownElementaryTree.
  double probability(const std::string& canonical) const;
  double probability(const Tree& fragment) const;
  double log_probability(const std::string& canonical) const;

 private:
  std::map<std::string, Entry> entries_;  // keyed by canonical fragment text
  std::map<std::string, std::uint64_t> root_totals_;
  int max_depth_ = 0;
  std::string start_symbol_;
};

/// Every fragment of every corpus tree with depth <= max_depth (0 = no cap),
/// counted with multiplicity across the corpus. The start symbol defaults to
/// the most frequent corpus root label (ties to the lexicographically least).
Stsg extract_subtrees(const Corpus& corpus, int max_depth = 0,
                      const std::optional<std::string>& start_symbol = std::nullopt);

/// All fragments rooted at this node, depth-capped. The workhorse behind
/// extract_subtrees, exposed for the reduction and for tree-probability
/// computations.
std::vector<Tree> fragments_rooted_at(const Tree& node, int max_depth = 0);

/// Closed-form fragment count per internal node (preorder over internal
/// nodes): preterminals count 1, and an internal node multiplies (1 + child
/// count) over nonterminal children.
std::vector<std::uint64_t> subtree_count_per_node(const Tree& tree, int max_depth = 0);
std::uint64_t total_fragment_count(const Tree& tree, int max_depth = 0);

/// True iff every depth-1 production of the tree occurs in the bank.
bool is_producible(const Tree& tree, const Stsg& grammar);

/// Depth-1 fragment for a production, e.g. (S [A] [B]) or (A a).
Tree production_fragment(const Tree& internal_node);

std::string serialize_grammar(const Stsg& grammar);
Stsg load_grammar(const std::string& text);
Stsg load_grammar_file(const std::string& path);

}  // namespace dop
