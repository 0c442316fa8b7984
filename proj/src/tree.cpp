#include "dop/tree.hpp"

#include <functional>

#include "dop/errors.hpp"

namespace dop {

namespace {

void render(const Tree& t, bool mark_sites, std::string* out) {
  if (t.leaf()) {
    if (t.terminal) {
      *out += t.label;
    } else if (mark_sites) {
      *out += '[';
      *out += t.label;
      *out += ']';
    } else {
      *out += t.label;
    }
    return;
  }
  *out += '(';
  *out += t.label;
  for (const Tree& child : t.children) {
    *out += ' ';
    render(child, mark_sites, out);
  }
  *out += ')';
}

}  // namespace

std::string tree_to_string(const Tree& tree) {
  std::string out;
  render(tree, false, &out);
  return out;
}

std::string fragment_to_string(const Tree& tree) {
  std::string out;
  render(tree, true, &out);
  return out;
}

Tree parse_fragment(const std::string& text) {
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  };
  auto read_token = [&] {
    std::size_t start = pos;
    while (pos < text.size() && text[pos] != ' ' && text[pos] != '\t' && text[pos] != '(' &&
           text[pos] != ')' && text[pos] != '[' && text[pos] != ']')
      ++pos;
    if (pos == start) throw BadToken(pos, "expected a symbol");
    return text.substr(start, pos - start);
  };
  std::function<Tree()> parse_node = [&]() -> Tree {
    skip_ws();
    if (pos >= text.size()) throw UnbalancedBrackets(pos);
    if (text[pos] == '(') {
      std::size_t open = pos++;
      skip_ws();
      if (pos < text.size() && (text[pos] == '(' || text[pos] == ')')) throw EmptyNode(open);
      Tree node;
      node.label = read_token();
      skip_ws();
      while (pos < text.size() && text[pos] != ')') {
        node.children.push_back(parse_node());
        skip_ws();
      }
      if (pos >= text.size()) throw UnbalancedBrackets(open);
      ++pos;  // ')'
      if (node.children.empty()) throw EmptyNode(open);
      return node;
    }
    if (text[pos] == '[') {
      std::size_t open = pos++;
      Tree site;
      site.label = read_token();
      if (pos >= text.size() || text[pos] != ']') throw UnbalancedBrackets(open);
      ++pos;
      return site;
    }
    Tree leaf;
    leaf.terminal = true;
    leaf.label = read_token();
    return leaf;
  };
  skip_ws();
  if (pos >= text.size() || text[pos] != '(') throw BadToken(pos, "expected '('");
  Tree root = parse_node();
  skip_ws();
  if (pos != text.size()) throw UnbalancedBrackets(pos);
  return root;
}

std::vector<std::string> yield_of(const Tree& tree) {
  std::vector<std::string> words;
  std::function<void(const Tree&)> walk = [&](const Tree& t) {
    if (t.leaf()) {
      if (t.terminal) words.push_back(t.label);
      return;
    }
    for (const Tree& child : t.children) walk(child);
  };
  walk(tree);
  return words;
}

std::vector<Symbol> frontier_of(const Tree& tree) {
  std::vector<Symbol> out;
  std::function<void(const Tree&)> walk = [&](const Tree& t) {
    if (t.leaf()) {
      out.push_back(Symbol{t.label, t.terminal});
      return;
    }
    for (const Tree& child : t.children) walk(child);
  };
  walk(tree);
  return out;
}

std::vector<Production> productions(const Tree& tree) {
  std::vector<Production> out;
  std::function<void(const Tree&)> walk = [&](const Tree& t) {
    if (t.leaf()) return;
    Production p;
    p.lhs = t.label;
    for (const Tree& child : t.children)
      p.rhs.push_back(Symbol{child.label, child.terminal && child.leaf()});
    out.push_back(std::move(p));
    for (const Tree& child : t.children) walk(child);
  };
  walk(tree);
  return out;
}

std::size_t internal_node_count(const Tree& tree) {
  if (tree.leaf()) return 0;
  std::size_t n = 1;
  for (const Tree& child : tree.children) n += internal_node_count(child);
  return n;
}

int depth_of(const Tree& tree) {
  if (tree.leaf()) return 0;
  int best = 0;
  for (const Tree& child : tree.children) best = std::max(best, depth_of(child));
  return best + 1;
}

std::vector<std::pair<int, int>> spans_of(const Tree& tree) {
  std::vector<std::pair<int, int>> out;
  std::function<int(const Tree&, int)> walk = [&](const Tree& t, int start) -> int {
    std::size_t slot = out.size();
    out.emplace_back(start, start);
    if (t.leaf()) {
      int end = start + (t.terminal ? 1 : 0);
      out[slot].second = end;
      return end;
    }
    int end = start;
    for (const Tree& child : t.children) end = walk(child, end);
    out[slot].second = end;
    return end;
  };
  walk(tree, 0);
  return out;
}

}  // namespace dop
