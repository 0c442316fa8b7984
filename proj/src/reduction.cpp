#include "dop/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "dop/errors.hpp"
#include "dop/stsg.hpp"

namespace dop {

int IndexedPcfg::nonterminal_id(const std::string& name) {
  auto [it, fresh] = nonterminal_ids_.try_emplace(name, static_cast<int>(nonterminal_names_.size()));
  if (fresh) {
    nonterminal_names_.push_back(name);
    std::size_t at = name.rfind('@');
    bool indexed = at != std::string::npos && at + 1 < name.size();
    if (indexed)
      for (std::size_t i = at + 1; i < name.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(name[i]))) indexed = false;
    plain_labels_.push_back(indexed ? name.substr(0, at) : name);
  }
  return it->second;
}

int IndexedPcfg::terminal_id(const std::string& name) {
  auto [it, fresh] = terminal_ids_.try_emplace(name, static_cast<int>(terminal_names_.size()));
  if (fresh) terminal_names_.push_back(name);
  return it->second;
}

std::optional<int> IndexedPcfg::find_nonterminal(const std::string& name) const {
  auto it = nonterminal_ids_.find(name);
  if (it == nonterminal_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> IndexedPcfg::find_terminal(const std::string& name) const {
  auto it = terminal_ids_.find(name);
  if (it == terminal_ids_.end()) return std::nullopt;
  return it->second;
}

Tree collapse_unary_chains(const Tree& tree) {
  Tree out;
  out.label = tree.label;
  out.terminal = tree.terminal;
  if (tree.leaf()) return out;
  const Tree* node = &tree;
  while (node->children.size() == 1 && !node->children[0].leaf()) {
    out.label += "+" + node->children[0].label;
    node = &node->children[0];
  }
  for (const Tree& child : node->children) out.children.push_back(collapse_unary_chains(child));
  return out;
}

Tree expand_composite_labels(const Tree& tree) {
  if (tree.leaf()) return tree;
  std::vector<std::string> parts;
  std::size_t begin = 0;
  while (true) {
    std::size_t plus = tree.label.find('+', begin);
    if (plus == std::string::npos) {
      parts.push_back(tree.label.substr(begin));
      break;
    }
    parts.push_back(tree.label.substr(begin, plus - begin));
    begin = plus + 1;
  }
  Tree inner;
  inner.label = parts.back();
  for (const Tree& child : tree.children) inner.children.push_back(expand_composite_labels(child));
  for (std::size_t i = parts.size(); i-- > 1;) {
    Tree wrap;
    wrap.label = parts[i - 1];
    wrap.children.push_back(std::move(inner));
    inner = std::move(wrap);
  }
  return inner;
}

namespace {

struct NodeInfo {
  const Tree* node = nullptr;
  std::vector<int> child_nodes;  // indices into the node list, -1 for terminals
};

std::vector<NodeInfo> build_node_list(const Tree& root) {
  std::vector<NodeInfo> nodes;
  std::function<int(const Tree&)> walk = [&](const Tree& node) -> int {
    int id = static_cast<int>(nodes.size());
    nodes.push_back(NodeInfo{&node, {}});
    std::vector<int> children;
    for (const Tree& child : node.children)
      children.push_back(child.leaf() && child.terminal ? -1 : -2);
    nodes[id].child_nodes = std::move(children);
    int slot = 0;
    for (const Tree& child : node.children) {
      if (!(child.leaf() && child.terminal)) {
        int cid = walk(child);
        nodes[id].child_nodes[slot] = cid;
      }
      ++slot;
    }
    return id;
  };
  walk(root);
  return nodes;
}

}  // namespace

IndexedPcfg reduce(const Corpus& corpus, int max_depth,
                   const std::optional<std::string>& start_symbol) {
  if (corpus.empty()) throw EmptyCorpus();

  Corpus collapsed;
  collapsed.reserve(corpus.size());
  for (const Tree& tree : corpus) collapsed.push_back(collapse_unary_chains(tree));

  // Flatten all corpus nodes; a_j per node per remaining depth budget
  // (budget 0 stands for unbounded).
  struct CorpusNode {
    const Tree* node;
    std::vector<int> child_nodes;
  };
  std::vector<CorpusNode> all;
  for (const Tree& tree : collapsed) {
    std::vector<NodeInfo> nodes = build_node_list(tree);
    int base = static_cast<int>(all.size());
    for (NodeInfo& info : nodes) {
      CorpusNode cn;
      cn.node = info.node;
      for (int c : info.child_nodes) cn.child_nodes.push_back(c < 0 ? -1 : c + base);
      all.push_back(std::move(cn));
    }
  }

  auto count_for = [&](int node, int budget, auto&& self) -> std::uint64_t {
    std::uint64_t product = 1;
    for (int child : all[node].child_nodes) {
      if (child < 0) continue;
      bool expandable = budget == 0 || budget >= 2;
      std::uint64_t sub = expandable ? self(child, budget == 0 ? 0 : budget - 1, self) : 0;
      product *= 1 + sub;
    }
    return product;
  };
  auto a_of = [&](int node, int budget) { return count_for(node, budget, count_for); };

  IndexedPcfg pcfg;

  // Synthetic indexed-symbol ids, one per (node, budget) pair actually
  // referenced; the unbounded case uses exactly one per corpus node.
  std::map<std::pair<int, int>, int> synthetic;
  int next_synthetic = 0;
  auto indexed_name = [&](int node, int budget) {
    auto [it, fresh] = synthetic.try_emplace({node, budget}, next_synthetic);
    if (fresh) ++next_synthetic;
    return all[node].node->label + "@" + std::to_string(it->second);
  };

  std::map<std::string, double> label_totals;
  for (std::size_t j = 0; j < all.size(); ++j)
    label_totals[all[j].node->label] += static_cast<double>(a_of(static_cast<int>(j), max_depth));

  // Merge duplicate (lhs, rhs) pairs by summing weights.
  std::map<std::pair<int, std::vector<std::pair<bool, int>>>, double> merged;
  auto emit = [&](int lhs, const std::vector<IndexedPcfg::RhsSym>& rhs, double weight) {
    std::vector<std::pair<bool, int>> key;
    key.reserve(rhs.size());
    for (const auto& sym : rhs) key.emplace_back(sym.terminal, sym.id);
    merged[{lhs, std::move(key)}] += weight;
  };

  // Rules for one node under a given child budget; lhs weight denominator
  // and symbol are the caller's.
  auto emit_choices = [&](int node, int child_budget, int lhs, double denom) {
    const CorpusNode& cn = all[node];
    std::size_t m = cn.node->children.size();
    std::vector<IndexedPcfg::RhsSym> rhs(m);
    bool can_index = child_budget == 0 || child_budget >= 1;
    std::function<void(std::size_t, double)> assign = [&](std::size_t i, double numer) {
      if (i == m) {
        emit(lhs, rhs, numer / denom);
        return;
      }
      const Tree& child = cn.node->children[i];
      if (child.leaf() && child.terminal) {
        rhs[i] = {true, pcfg.terminal_id(child.label)};
        assign(i + 1, numer);
        return;
      }
      rhs[i] = {false, pcfg.nonterminal_id(child.label)};
      assign(i + 1, numer);
      if (can_index) {
        int child_node = cn.child_nodes[i];
        rhs[i] = {false, pcfg.nonterminal_id(indexed_name(child_node, child_budget))};
        assign(i + 1, numer * static_cast<double>(a_of(child_node, child_budget)));
      }
    };
    assign(0, 1.0);
  };

  for (std::size_t j = 0; j < all.size(); ++j) {
    int node = static_cast<int>(j);
    const std::string& label = all[j].node->label;
    // Plain-lhs rules: a fragment starts here; children continue with one
    // level less budget.
    int child_budget = max_depth == 0 ? 0 : max_depth - 1;
    emit_choices(node, max_depth == 1 ? -1 : child_budget, pcfg.nonterminal_id(label),
                 label_totals.at(label));
    // Indexed-lhs rules, one family per referenced budget.
    if (max_depth == 0) {
      emit_choices(node, 0, pcfg.nonterminal_id(indexed_name(node, 0)),
                   static_cast<double>(a_of(node, 0)));
    } else {
      for (int r = 1; r < max_depth; ++r)
        emit_choices(node, r >= 2 ? r - 1 : -1, pcfg.nonterminal_id(indexed_name(node, r)),
                     static_cast<double>(a_of(node, r)));
    }
  }

  for (const auto& [key, weight] : merged) {
    IndexedPcfg::Rule rule;
    rule.lhs = key.first;
    for (const auto& [terminal, id] : key.second) rule.rhs.push_back({terminal, id});
    rule.weight = weight;
    pcfg.add_rule(std::move(rule));
  }

  for (const auto& [node_budget, sid] : synthetic)
    pcfg.set_node_count(sid, a_of(node_budget.first, node_budget.second));
  for (const auto& [label, total] : label_totals) pcfg.set_label_total(label, total);

  std::string start;
  if (start_symbol) {
    start = *start_symbol;
  } else {
    std::map<std::string, std::size_t> root_freq;
    for (const Tree& tree : collapsed) ++root_freq[tree.label];
    std::size_t best = 0;
    for (const auto& [label, freq] : root_freq)
      if (freq > best) {
        best = freq;
        start = label;
      }
  }
  pcfg.set_start(start);
  return pcfg;
}

namespace {

Tree strip_indices(const Tree& tree) {
  Tree out;
  out.terminal = tree.terminal;
  out.label = tree.label;
  if (!tree.terminal) {
    std::size_t at = out.label.rfind('@');
    if (at != std::string::npos && at + 1 < out.label.size()) {
      bool digits = true;
      for (std::size_t i = at + 1; i < out.label.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(out.label[i]))) digits = false;
      if (digits) out.label.resize(at);
    }
  }
  for (const Tree& child : tree.children) out.children.push_back(strip_indices(child));
  return out;
}

std::string format_weight(double w) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", w);
  return buf;
}

}  // namespace

Tree project(const Tree& indexed_tree) {
  return expand_composite_labels(strip_indices(indexed_tree));
}

std::string serialize_rules(const IndexedPcfg& pcfg) {
  std::string out = "pcfg\t1\n";
  out += "start\t" + pcfg.start_name() + "\n";
  std::vector<std::string> lines;
  lines.reserve(pcfg.rules().size());
  for (const auto& rule : pcfg.rules()) {
    std::string line = pcfg.nonterminal_name(rule.lhs);
    for (const auto& sym : rule.rhs) {
      line += '\t';
      if (sym.terminal)
        line += "\"" + pcfg.terminal_name(sym.id) + "\"";
      else
        line += pcfg.nonterminal_name(sym.id);
    }
    line += '\t';
    line += format_weight(rule.weight);
    lines.push_back(std::move(line));
  }
  std::sort(lines.begin(), lines.end());
  for (const std::string& line : lines) {
    out += line;
    out += '\n';
  }
  return out;
}

IndexedPcfg load_rules(const std::string& text) {
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
  if (!next_line() || line != "pcfg\t1") throw BadGrammarFile(line_no, "missing pcfg header");
  if (!next_line() || line.rfind("start\t", 0) != 0)
    throw BadGrammarFile(line_no, "missing start line");
  IndexedPcfg pcfg;
  pcfg.set_start(line.substr(6));
  bool any = false;
  while (next_line()) {
    std::vector<std::string> fields;
    std::size_t begin = 0;
    while (true) {
      std::size_t tab = line.find('\t', begin);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(begin));
        break;
      }
      fields.push_back(line.substr(begin, tab - begin));
      begin = tab + 1;
    }
    if (fields.size() < 3) throw BadGrammarFile(line_no, "expected LHS, RHS..., weight");
    IndexedPcfg::Rule rule;
    rule.lhs = pcfg.nonterminal_id(fields.front());
    for (std::size_t i = 1; i + 1 < fields.size(); ++i) {
      const std::string& f = fields[i];
      if (f.size() >= 2 && f.front() == '"' && f.back() == '"')
        rule.rhs.push_back({true, pcfg.terminal_id(f.substr(1, f.size() - 2))});
      else
        rule.rhs.push_back({false, pcfg.nonterminal_id(f)});
    }
    try {
      std::size_t used = 0;
      rule.weight = std::stod(fields.back(), &used);
      if (used != fields.back().size() || !(rule.weight > 0.0))
        throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw BadGrammarFile(line_no, "bad weight \"" + fields.back() + "\"");
    }
    pcfg.add_rule(std::move(rule));
    any = true;
  }
  if (!any) throw BadGrammarFile(line_no, "no rules");
  return pcfg;
}

IndexedPcfg load_rules_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open rule file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_rules(buf.str());
}

}  // namespace dop
