#include "dop/inside_outside.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "dop/errors.hpp"

namespace dop {

namespace {

// Prefix match table for one rule over one span: ways[t][k] = summed ways
// the first t rhs symbols cover (i, k). All rhs symbols here are
// nonterminal (lexical rules are handled separately).
std::vector<std::vector<double>> prefix_ways(const IndexedPcfg::Rule& rule,
                                             const InsideOutsideTables& t, int i, int j) {
  int m = static_cast<int>(rule.rhs.size());
  std::vector<std::vector<double>> ways(m + 1, std::vector<double>(j + 1, 0.0));
  ways[0][i] = 1.0;
  for (int step = 1; step <= m; ++step) {
    int sym = rule.rhs[step - 1].id;
    for (int k = i + step; k <= j - (m - step); ++k) {
      double total = 0.0;
      for (int split = i + step - 1; split < k; ++split)
        if (ways[step - 1][split] > 0.0)
          total += ways[step - 1][split] * t.inside(split, k, sym);
      ways[step][k] = total;
    }
  }
  return ways;
}

std::vector<std::vector<double>> suffix_ways(const IndexedPcfg::Rule& rule,
                                             const InsideOutsideTables& t, int i, int j) {
  int m = static_cast<int>(rule.rhs.size());
  // ways[t][k] = summed ways rhs symbols t..m cover (k, j).
  std::vector<std::vector<double>> ways(m + 1, std::vector<double>(j + 1, 0.0));
  ways[m][j] = 1.0;
  for (int step = m - 1; step >= 0; --step) {
    int sym = rule.rhs[step].id;
    for (int k = i + step; k + (m - step) <= j; ++k) {
      double total = 0.0;
      for (int split = k + 1; split <= j - (m - step - 1); ++split)
        if (ways[step + 1][split] > 0.0)
          total += t.inside(k, split, sym) * ways[step + 1][split];
      ways[step][k] = total;
    }
  }
  return ways;
}

bool lexical(const IndexedPcfg::Rule& rule) {
  return rule.rhs.size() == 1 && rule.rhs[0].terminal;
}

}  // namespace

InsideOutsideTables inside(const IndexedPcfg& pcfg, const std::vector<std::string>& sentence) {
  if (sentence.empty()) throw Error("cannot parse an empty sentence");
  const int n = static_cast<int>(sentence.size());

  std::vector<std::optional<int>> word_ids(n);
  for (int i = 0; i < n; ++i) word_ids[i] = pcfg.find_terminal(sentence[i]);
  for (int i = 0; i < n; ++i)
    if (!word_ids[i]) throw UnknownWord(sentence[i], static_cast<std::size_t>(i));

  InsideOutsideTables t;
  t.sentence = sentence;
  std::size_t syms = pcfg.nonterminal_count();
  t.inside_table.assign(syms, std::vector<std::vector<double>>(n + 1, std::vector<double>(n + 1, 0.0)));
  t.outside_table = t.inside_table;

  for (const auto& rule : pcfg.rules())
    if (lexical(rule))
      for (int i = 0; i < n; ++i)
        if (*word_ids[i] == rule.rhs[0].id) t.inside_table[rule.lhs][i][i + 1] += rule.weight;

  for (int len = 2; len <= n; ++len)
    for (int i = 0; i + len <= n; ++i) {
      int j = i + len;
      for (const auto& rule : pcfg.rules()) {
        if (lexical(rule) || static_cast<int>(rule.rhs.size()) > len) continue;
        auto ways = prefix_ways(rule, t, i, j);
        double total = ways[rule.rhs.size()][j];
        if (total > 0.0) t.inside_table[rule.lhs][i][j] += rule.weight * total;
      }
    }

  t.sentence_mass = t.inside(0, n, pcfg.start());
  return t;
}

void outside(const IndexedPcfg& pcfg, InsideOutsideTables& t) {
  if (!(t.sentence_mass > 0.0)) throw NoParse();
  const int n = static_cast<int>(t.sentence.size());
  for (auto& per_sym : t.outside_table)
    for (auto& row : per_sym) std::fill(row.begin(), row.end(), 0.0);
  t.outside_table[pcfg.start()][0][n] = 1.0;

  for (int len = n; len >= 2; --len)
    for (int i = 0; i + len <= n; ++i) {
      int j = i + len;
      for (const auto& rule : pcfg.rules()) {
        if (lexical(rule) || static_cast<int>(rule.rhs.size()) > len) continue;
        double out = t.outside(i, j, rule.lhs);
        if (out == 0.0) continue;
        auto pre = prefix_ways(rule, t, i, j);
        auto suf = suffix_ways(rule, t, i, j);
        int m = static_cast<int>(rule.rhs.size());
        for (int pos = 0; pos < m; ++pos) {
          int sym = rule.rhs[pos].id;
          for (int u = i + pos; u < j; ++u)
            for (int v = u + 1; v <= j - (m - pos - 1); ++v) {
              double in_sub = t.inside(u, v, sym);
              if (in_sub == 0.0) continue;
              double around = pre[pos][u] * suf[pos + 1][v];
              if (around == 0.0) continue;
              t.outside_table[sym][u][v] += out * rule.weight * around;
            }
        }
      }
    }
  t.outside_ready = true;
}

std::pair<Tree, double> pcfg_viterbi(const IndexedPcfg& pcfg,
                                     const std::vector<std::string>& sentence) {
  InsideOutsideTables probe = inside(pcfg, sentence);  // validates words
  const int n = static_cast<int>(sentence.size());
  if (!(probe.sentence_mass > 0.0)) throw NoParse();

  struct Cell {
    double score = -std::numeric_limits<double>::infinity();
    Tree tree;
    std::string projected_key;
    bool set = false;
  };
  std::vector<std::vector<std::vector<Cell>>> best(
      pcfg.nonterminal_count(),
      std::vector<std::vector<Cell>>(n + 1, std::vector<Cell>(n + 1)));

  auto offer = [&](int sym, int i, int j, double score, Tree&& tree) {
    Cell& cell = best[sym][i][j];
    std::string key;
    if (cell.set && score == cell.score) key = tree_to_string(project(tree));
    if (!cell.set || score > cell.score ||
        (score == cell.score &&
         (key < cell.projected_key ||
          (key == cell.projected_key && tree_to_string(tree) < tree_to_string(cell.tree))))) {
      cell.score = score;
      cell.tree = std::move(tree);
      cell.projected_key = tree_to_string(project(cell.tree));
      cell.set = true;
    }
  };

  for (const auto& rule : pcfg.rules())
    if (lexical(rule))
      for (int i = 0; i < n; ++i)
        if (pcfg.terminal_name(rule.rhs[0].id) == sentence[i]) {
          Tree leaf;
          leaf.terminal = true;
          leaf.label = sentence[i];
          Tree node;
          node.label = pcfg.nonterminal_name(rule.lhs);
          node.children.push_back(std::move(leaf));
          offer(rule.lhs, i, i + 1, std::log(rule.weight), std::move(node));
        }

  for (int len = 2; len <= n; ++len)
    for (int i = 0; i + len <= n; ++i) {
      int j = i + len;
      for (const auto& rule : pcfg.rules()) {
        int m = static_cast<int>(rule.rhs.size());
        if (lexical(rule) || m > len) continue;
        // Enumerate split vectors; children must all be set. The last child
        // always ends at j, so only cuts[1..m-1] are free.
        std::vector<int> cuts(m + 1);
        cuts[0] = i;
        cuts[m] = j;
        std::function<void(int)> choose = [&](int pos) {
          if (pos == m - 1) {
            if (!best[rule.rhs[pos].id][cuts[pos]][j].set) return;
            double score = std::log(rule.weight);
            for (int c = 0; c < m; ++c) {
              const Cell& cell = best[rule.rhs[c].id][cuts[c]][cuts[c + 1]];
              if (!cell.set) return;
              score += cell.score;
            }
            Tree node;
            node.label = pcfg.nonterminal_name(rule.lhs);
            for (int c = 0; c < m; ++c)
              node.children.push_back(best[rule.rhs[c].id][cuts[c]][cuts[c + 1]].tree);
            offer(rule.lhs, i, j, score, std::move(node));
            return;
          }
          for (int k = cuts[pos] + 1; k <= j - (m - pos - 1); ++k) {
            if (!best[rule.rhs[pos].id][cuts[pos]][k].set) continue;
            cuts[pos + 1] = k;
            choose(pos + 1);
          }
        };
        choose(0);
      }
    }

  const Cell& top = best[pcfg.start()][0][n];
  if (!top.set) throw NoParse();
  return {project(top.tree), std::exp(top.score)};
}

ConstituentPosterior constituent_posteriors(const InsideOutsideTables& tables,
                                            const IndexedPcfg& pcfg) {
  ConstituentPosterior post;
  post.sentence_length = tables.sentence.size();
  if (!(tables.sentence_mass > 0.0)) return post;
  const int n = static_cast<int>(tables.sentence.size());
  for (int sym = 0; sym < static_cast<int>(pcfg.nonterminal_count()); ++sym)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j <= n; ++j) {
        double mass = tables.inside(i, j, sym) * tables.outside(i, j, sym);
        if (mass <= 0.0) continue;
        post.table[{i, j, pcfg.plain_label(sym)}] += mass / tables.sentence_mass;
      }
  return post;
}

namespace {

struct McpCell {
  double score = -std::numeric_limits<double>::infinity();
  std::string label;
  int split = -1;
  bool feasible = false;
};

std::vector<std::vector<McpCell>> mcp_chart(const ConstituentPosterior& post, int n,
                                            bool labeled) {
  std::vector<std::vector<McpCell>> chart(n + 1, std::vector<McpCell>(n + 1));
  for (int len = 1; len <= n; ++len)
    for (int i = 0; i + len <= n; ++i) {
      int j = i + len;
      McpCell& cell = chart[i][j];
      double label_score = -std::numeric_limits<double>::infinity();
      double label_mass = 0.0;
      std::string label;
      for (auto it = post.table.lower_bound({i, j, std::string()});
           it != post.table.end() && std::get<0>(it->first) == i && std::get<1>(it->first) == j;
           ++it) {
        if (it->second <= 0.0) continue;
        label_mass += it->second;
        if (it->second > label_score ||
            (it->second == label_score && std::get<2>(it->first) < label)) {
          label_score = it->second;
          label = std::get<2>(it->first);
        }
      }
      if (label.empty()) continue;  // no supported label: span unusable
      double base = labeled ? label_score : std::min(1.0, label_mass);
      if (len == 1) {
        cell.score = base;
        cell.label = label;
        cell.feasible = true;
        continue;
      }
      double best_split = -std::numeric_limits<double>::infinity();
      int split = -1;
      for (int k = i + 1; k < j; ++k) {
        if (!chart[i][k].feasible || !chart[k][j].feasible) continue;
        double s = chart[i][k].score + chart[k][j].score;
        if (s > best_split) {
          best_split = s;
          split = k;
        }
      }
      if (split < 0) continue;  // no feasible binary split
      cell.score = base + best_split;
      cell.label = label;
      cell.split = split;
      cell.feasible = true;
    }
  return chart;
}

}  // namespace

Tree maximum_constituents_parse(const ConstituentPosterior& posteriors,
                                const std::vector<std::string>& sentence, bool labeled) {
  const int n = static_cast<int>(sentence.size());
  if (n == 0) throw NoParse();
  auto chart = mcp_chart(posteriors, n, labeled);
  if (!chart[0][n].feasible) throw NoParse();
  std::function<Tree(int, int)> build = [&](int i, int j) -> Tree {
    const McpCell& cell = chart[i][j];
    Tree node;
    node.label = cell.label;
    if (j - i == 1) {
      Tree leaf;
      leaf.terminal = true;
      leaf.label = sentence[i];
      node.children.push_back(std::move(leaf));
    } else {
      node.children.push_back(build(i, cell.split));
      node.children.push_back(build(cell.split, j));
    }
    return node;
  };
  return expand_composite_labels(build(0, n));
}

double maximum_constituents_score(const ConstituentPosterior& posteriors,
                                  const std::vector<std::string>& sentence, bool labeled) {
  const int n = static_cast<int>(sentence.size());
  auto chart = mcp_chart(posteriors, n, labeled);
  if (!chart[0][n].feasible) throw NoParse();
  return chart[0][n].score;
}

}  // namespace dop
