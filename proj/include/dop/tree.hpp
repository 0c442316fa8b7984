#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace dop {

/// A node of a labeled ordered tree. The same type serves parse trees
/// (every leaf is a terminal) and elementary-tree fragments (a leaf may
/// also be a nonterminal substitution site).
struct Tree {
  std::string label;
  bool terminal = false;  // true only for lexical leaves
  std::vector<Tree> children;

  bool leaf() const { return children.empty(); }
  // A nonterminal leaf: open substitution site of a fragment.
  bool site() const { return leaf() && !terminal; }
  // Exactly one terminal child.
  bool preterminal() const { return children.size() == 1 && children[0].terminal; }

  bool operator==(const Tree& other) const = default;
};

struct Symbol {
  std::string text;
  bool terminal = false;

  auto operator<=>(const Symbol&) const = default;
};

struct Production {
  std::string lhs;
  std::vector<Symbol> rhs;

  auto operator<=>(const Production&) const = default;
};

/// Parse-tree text, e.g. "(S (A a) (B b))".
std::string tree_to_string(const Tree& tree);

/// Fragment text: substitution sites in square brackets, e.g. "(S (A a) [B])".
/// Identical to tree_to_string on trees without sites; used as the canonical
/// identity key for fragments.
std::string fragment_to_string(const Tree& tree);

/// Parses one fragment (sites allowed) from canonical text.
Tree parse_fragment(const std::string& text);

/// Left-to-right terminal leaves.
std::vector<std::string> yield_of(const Tree& tree);

/// Left-to-right frontier of a fragment: terminals and substitution sites.
std::vector<Symbol> frontier_of(const Tree& tree);

/// One production per internal node, preorder.
std::vector<Production> productions(const Tree& tree);

std::size_t internal_node_count(const Tree& tree);

/// Max edge count from the root to any leaf.
int depth_of(const Tree& tree);

/// (start, end) word offsets per node, preorder order.
std::vector<std::pair<int, int>> spans_of(const Tree& tree);

}  // namespace dop
