#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dop/tree.hpp"
#include "dop/treebank.hpp"

namespace dop {

/// Node-indexed PCFG reduction of the all-subtrees STSG. Indexed
/// nonterminals are spelled LABEL@nodeId; plain nonterminals carry no id.
class IndexedPcfg {
 public:
  struct RhsSym {
    bool terminal = false;
    int id = -1;  // nonterminal id or terminal id
  };
  struct Rule {
    int lhs = -1;
    std::vector<RhsSym> rhs;
    double weight = 0.0;
  };

  int nonterminal_id(const std::string& name);         // interning
  int terminal_id(const std::string& name);            // interning
  std::optional<int> find_nonterminal(const std::string& name) const;
  std::optional<int> find_terminal(const std::string& name) const;
  const std::string& nonterminal_name(int id) const { return nonterminal_names_[id]; }
  const std::string& terminal_name(int id) const { return terminal_names_[id]; }
  /// Label with any @nodeId index erased.
  const std::string& plain_label(int id) const { return plain_labels_[id]; }
  std::size_t nonterminal_count() const { return nonterminal_names_.size(); }

  const std::vector<Rule>& rules() const { return rules_; }
  int start() const { return start_; }
  const std::string& start_name() const { return nonterminal_names_[start_]; }

  const std::map<int, std::uint64_t>& node_counts() const { return node_counts_; }
  const std::map<std::string, double>& label_totals() const { return label_totals_; }

  void set_start(const std::string& name) { start_ = nonterminal_id(name); }
  void add_rule(Rule rule) { rules_.push_back(std::move(rule)); }
  void set_node_count(int node, std::uint64_t a) { node_counts_[node] = a; }
  void set_label_total(const std::string& label, double a) { label_totals_[label] = a; }

 private:
  std::vector<std::string> nonterminal_names_;
  std::vector<std::string> plain_labels_;
  std::vector<std::string> terminal_names_;
  std::map<std::string, int> nonterminal_ids_;
  std::map<std::string, int> terminal_ids_;
  std::vector<Rule> rules_;
  int start_ = -1;
  std::map<int, std::uint64_t> node_counts_;
  std::map<std::string, double> label_totals_;
};

/// Collapses unary nonterminal chains into composite "X+Y" labels; the
/// reduction and in particular the constituents parse assume every rule is
/// lexical or has at least two nonterminals on the right.
Tree collapse_unary_chains(const Tree& tree);
/// Splits composite "X+Y" labels back into unary chains.
Tree expand_composite_labels(const Tree& tree);

/// Goodman's construction: every internal node j (label A, fragment count
/// a_j) yields, for each indexed/plain choice over its nonterminal children,
/// an indexed rule A@j -> ... with weight prod(a_k)/a_j and a plain rule
/// A -> ... with weight prod(a_k)/a(A). Depth caps truncate how far indexing
/// may propagate; identical rules merge by adding weights.
IndexedPcfg reduce(const Corpus& corpus, int max_depth = 0,
                   const std::optional<std::string>& start_symbol = std::nullopt);

/// Erases @nodeId indices and re-expands composite labels.
Tree project(const Tree& indexed_tree);

std::string serialize_rules(const IndexedPcfg& pcfg);
IndexedPcfg load_rules(const std::string& text);
IndexedPcfg load_rules_file(const std::string& path);

}  // namespace dop
