#include "dop/stsg.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "dop/errors.hpp"

namespace dop {

namespace {

constexpr std::uint64_t kCountCap = std::numeric_limits<std::uint64_t>::max() / 2;

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  return (a > kCountCap - b) ? kCountCap : a + b;
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a == 0 || b == 0) return 0;
  if (a > kCountCap / b) return kCountCap;
  return a * b;
}

}  // namespace

Stsg::Stsg(std::map<std::string, Entry> entries, int max_depth, std::string start_symbol)
    : entries_(std::move(entries)), max_depth_(max_depth), start_symbol_(std::move(start_symbol)) {
  for (const auto& [key, entry] : entries_)
    root_totals_[entry.fragment.label] = sat_add(root_totals_[entry.fragment.label], entry.count);
}

double Stsg::probability(const std::string& canonical) const {
  auto it = entries_.find(canonical);
  if (it == entries_.end()) throw UnknownElementaryTree(canonical);
  return static_cast<double>(it->second.count) /
         static_cast<double>(root_totals_.at(it->second.fragment.label));
}

double Stsg::probability(const Tree& fragment) const {
  return probability(fragment_to_string(fragment));
}

double Stsg::log_probability(const std::string& canonical) const {
  auto it = entries_.find(canonical);
  if (it == entries_.end()) throw UnknownElementaryTree(canonical);
  return std::log(static_cast<double>(it->second.count)) -
         std::log(static_cast<double>(root_totals_.at(it->second.fragment.label)));
}

std::vector<Tree> fragments_rooted_at(const Tree& node, int max_depth) {
  // Per-child options: a terminal child is always carried along; a
  // nonterminal child is either a substitution site or one of its own
  // fragments with one level less depth budget.
  std::vector<std::vector<Tree>> options;
  options.reserve(node.children.size());
  for (const Tree& child : node.children) {
    std::vector<Tree> opts;
    if (child.terminal && child.leaf()) {
      opts.push_back(child);
    } else {
      Tree site;
      site.label = child.label;
      opts.push_back(std::move(site));
      if (max_depth == 0 || max_depth >= 2) {
        int child_budget = max_depth == 0 ? 0 : max_depth - 1;
        for (Tree& sub : fragments_rooted_at(child, child_budget)) opts.push_back(std::move(sub));
      }
    }
    options.push_back(std::move(opts));
  }
  std::vector<Tree> out;
  Tree current;
  current.label = node.label;
  std::function<void(std::size_t)> build = [&](std::size_t i) {
    if (i == options.size()) {
      out.push_back(current);
      return;
    }
    for (const Tree& opt : options[i]) {
      current.children.push_back(opt);
      build(i + 1);
      current.children.pop_back();
    }
  };
  build(0);
  return out;
}

namespace {

std::uint64_t count_with_budget(const Tree& node, int budget) {
  std::uint64_t product = 1;
  for (const Tree& child : node.children) {
    if (child.terminal && child.leaf()) continue;
    bool expandable = budget == 0 || budget >= 2;
    std::uint64_t child_count =
        expandable ? count_with_budget(child, budget == 0 ? 0 : budget - 1) : 0;
    product = sat_mul(product, sat_add(1, child_count));
  }
  return product;
}

void collect_internal_preorder(const Tree& node, std::vector<const Tree*>* out) {
  if (node.leaf()) return;
  out->push_back(&node);
  for (const Tree& child : node.children) collect_internal_preorder(child, out);
}

}  // namespace

std::vector<std::uint64_t> subtree_count_per_node(const Tree& tree, int max_depth) {
  std::vector<const Tree*> nodes;
  collect_internal_preorder(tree, &nodes);
  std::vector<std::uint64_t> counts;
  counts.reserve(nodes.size());
  for (const Tree* node : nodes) counts.push_back(count_with_budget(*node, max_depth));
  return counts;
}

std::uint64_t total_fragment_count(const Tree& tree, int max_depth) {
  std::uint64_t total = 0;
  for (std::uint64_t c : subtree_count_per_node(tree, max_depth)) total = sat_add(total, c);
  return total;
}

Stsg extract_subtrees(const Corpus& corpus, int max_depth,
                      const std::optional<std::string>& start_symbol) {
  if (corpus.empty()) throw EmptyCorpus();
  std::map<std::string, Stsg::Entry> entries;
  std::function<void(const Tree&)> visit = [&](const Tree& node) {
    if (node.leaf()) return;
    for (Tree& fragment : fragments_rooted_at(node, max_depth)) {
      std::string key = fragment_to_string(fragment);
      auto [it, fresh] = entries.try_emplace(std::move(key));
      if (fresh) {
        it->second.depth = depth_of(fragment);
        it->second.fragment = std::move(fragment);
      }
      it->second.count = sat_add(it->second.count, 1);
    }
    for (const Tree& child : node.children) visit(child);
  };
  for (const Tree& tree : corpus) visit(tree);

  std::string start;
  if (start_symbol) {
    start = *start_symbol;
  } else {
    std::map<std::string, std::size_t> root_freq;
    for (const Tree& tree : corpus) ++root_freq[tree.label];
    std::size_t best = 0;
    for (const auto& [label, freq] : root_freq)
      if (freq > best) {
        best = freq;
        start = label;
      }
  }
  return Stsg(std::move(entries), max_depth, std::move(start));
}

Tree production_fragment(const Tree& internal_node) {
  Tree out;
  out.label = internal_node.label;
  for (const Tree& child : internal_node.children) {
    Tree leaf;
    leaf.label = child.label;
    leaf.terminal = child.terminal && child.leaf();
    out.children.push_back(std::move(leaf));
  }
  return out;
}

bool is_producible(const Tree& tree, const Stsg& grammar) {
  std::vector<const Tree*> nodes;
  collect_internal_preorder(tree, &nodes);
  for (const Tree* node : nodes)
    if (!grammar.contains(fragment_to_string(production_fragment(*node)))) return false;
  return true;
}

std::string serialize_grammar(const Stsg& grammar) {
  std::string out = "stsg\t1\n";
  out += "start\t" + grammar.start_symbol() + "\n";
  out += "max_depth\t" + std::to_string(grammar.max_depth()) + "\n";
  for (const auto& [key, entry] : grammar.entries())
    out += key + "\t" + std::to_string(entry.count) + "\n";
  return out;
}

Stsg load_grammar(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next_line() || line != "stsg\t1") throw BadGrammarFile(line_no, "missing stsg header");
  if (!next_line() || line.rfind("start\t", 0) != 0)
    throw BadGrammarFile(line_no, "missing start line");
  std::string start = line.substr(6);
  if (start.empty()) throw BadGrammarFile(line_no, "empty start symbol");
  if (!next_line() || line.rfind("max_depth\t", 0) != 0)
    throw BadGrammarFile(line_no, "missing max_depth line");
  int max_depth = 0;
  try {
    std::size_t used = 0;
    std::string field = line.substr(10);
    max_depth = std::stoi(field, &used);
    if (used != field.size() || max_depth < 0) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw BadGrammarFile(line_no, "bad max_depth");
  }

  std::map<std::string, Stsg::Entry> entries;
  while (next_line()) {
    std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos) throw BadGrammarFile(line_no, "expected <fragment>\\t<count>");
    std::string frag_text = line.substr(0, tab);
    std::string count_text = line.substr(tab + 1);
    std::uint64_t count = 0;
    try {
      std::size_t used = 0;
      long long parsed = std::stoll(count_text, &used);
      if (used != count_text.size() || parsed <= 0) throw std::invalid_argument("");
      count = static_cast<std::uint64_t>(parsed);
    } catch (const std::exception&) {
      throw BadGrammarFile(line_no, "bad count \"" + count_text + "\"");
    }
    Tree fragment;
    try {
      fragment = parse_fragment(frag_text);
    } catch (const Error& e) {
      throw BadGrammarFile(line_no, e.what());
    }
    std::string key = fragment_to_string(fragment);
    auto [it, fresh] = entries.try_emplace(std::move(key));
    if (!fresh) throw BadGrammarFile(line_no, "duplicate fragment");
    it->second.depth = depth_of(fragment);
    it->second.fragment = std::move(fragment);
    it->second.count = count;
  }
  if (entries.empty()) throw BadGrammarFile(line_no, "no entries");
  return Stsg(std::move(entries), max_depth, std::move(start));
}

Stsg load_grammar_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open grammar file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_grammar(buf.str());
}

}  // namespace dop
