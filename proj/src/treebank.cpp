#include "dop/treebank.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>

#include "dop/errors.hpp"

namespace dop {

namespace {

// Checks the parse-tree invariants on a tree read from corpus text:
// no substitution sites, terminals only as the single child of a preterminal.
void validate_parse_tree(const Tree& t, std::size_t position) {
  if (t.leaf()) {
    if (!t.terminal) throw BadToken(position, "childless nonterminal \"" + t.label + "\"");
    return;
  }
  bool has_terminal_child = false;
  for (const Tree& child : t.children) has_terminal_child |= child.terminal && child.leaf();
  if (has_terminal_child && t.children.size() != 1)
    throw BadToken(position, "terminal outside a preterminal under \"" + t.label + "\"");
  for (const Tree& child : t.children) validate_parse_tree(child, position);
}

}  // namespace

Corpus parse_bracketed(const std::string& text) {
  // Strip comment lines first, preserving offsets line by line is not needed
  // for error reporting beyond a character position in the filtered text.
  std::string filtered;
  filtered.reserve(text.size());
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == ';') {
      filtered += '\n';
      continue;
    }
    filtered += line;
    filtered += '\n';
  }

  Corpus corpus;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < filtered.size() &&
           (filtered[pos] == ' ' || filtered[pos] == '\t' || filtered[pos] == '\n' ||
            filtered[pos] == '\r'))
      ++pos;
  };
  auto read_token = [&] {
    std::size_t start = pos;
    while (pos < filtered.size() && filtered[pos] != ' ' && filtered[pos] != '\t' &&
           filtered[pos] != '\n' && filtered[pos] != '\r' && filtered[pos] != '(' &&
           filtered[pos] != ')')
      ++pos;
    std::string tok = filtered.substr(start, pos - start);
    if (tok.find('[') != std::string::npos || tok.find(']') != std::string::npos)
      throw BadToken(start, "bracket character in symbol \"" + tok + "\"");
    return tok;
  };
  std::function<Tree()> parse_node = [&]() -> Tree {
    std::size_t open = pos;
    ++pos;  // '('
    skip_ws();
    if (pos >= filtered.size()) throw UnbalancedBrackets(open);
    if (filtered[pos] == ')') throw EmptyNode(open);
    if (filtered[pos] == '(') throw EmptyNode(open);
    Tree node;
    node.label = read_token();
    if (node.label.empty()) throw EmptyNode(open);
    skip_ws();
    while (pos < filtered.size() && filtered[pos] != ')') {
      if (filtered[pos] == '(') {
        node.children.push_back(parse_node());
      } else {
        std::size_t tok_pos = pos;
        std::string tok = read_token();
        if (tok.empty()) throw BadToken(tok_pos, "unexpected character");
        Tree leaf;
        leaf.terminal = true;
        leaf.label = std::move(tok);
        node.children.push_back(std::move(leaf));
      }
      skip_ws();
    }
    if (pos >= filtered.size()) throw UnbalancedBrackets(open);
    ++pos;  // ')'
    if (node.children.empty()) throw EmptyNode(open);
    return node;
  };

  skip_ws();
  while (pos < filtered.size()) {
    if (filtered[pos] != '(') throw BadToken(pos, "expected '('");
    std::size_t tree_pos = pos;
    Tree tree = parse_node();
    validate_parse_tree(tree, tree_pos);
    corpus.push_back(std::move(tree));
    skip_ws();
  }
  return corpus;
}

Corpus load_corpus(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_bracketed(buf.str());
}

Corpus load_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path);
  return load_corpus(in);
}

std::string corpus_to_string(const Corpus& corpus) {
  std::string out;
  for (const Tree& tree : corpus) {
    out += tree_to_string(tree);
    out += '\n';
  }
  return out;
}

namespace {

bool all_epsilon(const Tree& t, const std::string& eps) {
  if (t.leaf()) return t.terminal && t.label == eps;
  for (const Tree& child : t.children)
    if (!all_epsilon(child, eps)) return false;
  return true;
}

Tree strip_epsilon(const Tree& t, const std::string& eps) {
  Tree out;
  out.label = t.label;
  out.terminal = t.terminal;
  for (const Tree& child : t.children) {
    if (all_epsilon(child, eps)) continue;
    out.children.push_back(strip_epsilon(child, eps));
  }
  return out;
}

}  // namespace

Tree normalize_epsilon(const Tree& tree, EpsilonMode mode, const std::string& epsilon_token) {
  if (mode == EpsilonMode::kKeep) return tree;
  if (all_epsilon(tree, epsilon_token)) throw EmptyTreeAfterStrip();
  return strip_epsilon(tree, epsilon_token);
}

std::vector<std::string> yield_of(const Tree& tree, EpsilonMode mode,
                                  const std::string& epsilon_token) {
  std::vector<std::string> words = yield_of(tree);
  if (mode == EpsilonMode::kKeep) return words;
  std::vector<std::string> kept;
  kept.reserve(words.size());
  for (auto& w : words)
    if (w != epsilon_token) kept.push_back(std::move(w));
  return kept;
}

namespace {

// splitmix64; used wherever a small deterministic stream is needed so that
// results do not depend on the standard library's shuffle implementation.
std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<bool> split_test_mask(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (n == 0) throw EmptyCorpus();
  auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  if (k < 1 || k >= n) throw DegenerateSplit();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t state = seed;
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(splitmix64(state) % (i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<bool> test(n, false);
  for (std::size_t i = 0; i < k; ++i) test[order[i]] = true;
  return test;
}

std::pair<Corpus, Corpus> random_split(const Corpus& corpus, double test_fraction,
                                       std::uint64_t seed) {
  std::vector<bool> mask = split_test_mask(corpus.size(), test_fraction, seed);
  Corpus train, test;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    (mask[i] ? test : train).push_back(corpus[i]);
  return {std::move(train), std::move(test)};
}

}  // namespace dop
