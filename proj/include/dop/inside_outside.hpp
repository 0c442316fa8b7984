#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "dop/reduction.hpp"
#include "dop/tree.hpp"

namespace dop {

/// Span-symbol inside/outside sums for a sentence under an IndexedPcfg.
struct InsideOutsideTables {
  std::vector<std::string> sentence;
  // [symbol][i][j]; symbols indexed as in the pcfg.
  std::vector<std::vector<std::vector<double>>> inside_table;
  std::vector<std::vector<std::vector<double>>> outside_table;
  double sentence_mass = 0.0;
  bool outside_ready = false;

  double inside(int i, int j, int sym) const { return inside_table[sym][i][j]; }
  double outside(int i, int j, int sym) const { return outside_table[sym][i][j]; }
};

/// Inside half plus sentence mass. Throws UnknownWord; a zero mass means no
/// parse and is not an error here.
InsideOutsideTables inside(const IndexedPcfg& pcfg, const std::vector<std::string>& sentence);

/// Fills the outside half; requires mass > 0 (throws NoParse otherwise).
void outside(const IndexedPcfg& pcfg, InsideOutsideTables& tables);

/// Max-weight single indexed parse, projected to a plain tree. Throws NoParse.
std::pair<Tree, double> pcfg_viterbi(const IndexedPcfg& pcfg,
                                     const std::vector<std::string>& sentence);

/// Per (i, j, plain label): sum over indexed variants of in*out/mass.
struct ConstituentPosterior {
  std::map<std::tuple<int, int, std::string>, double> table;
  std::size_t sentence_length = 0;

  double at(int i, int j, const std::string& label) const {
    auto it = table.find({i, j, label});
    return it == table.end() ? 0.0 : it->second;
  }
};

ConstituentPosterior constituent_posteriors(const InsideOutsideTables& tables,
                                            const IndexedPcfg& pcfg);

/// The binary-branching tree maximizing the sum of constituent posteriors.
/// Spans without any positively supported label cannot be used; if no such
/// tree exists the parse fails (NoParse) rather than fabricating structure.
/// With labeled=false a span scores the total posterior mass over labels
/// (the label choice on output is still the argmax).
Tree maximum_constituents_parse(const ConstituentPosterior& posteriors,
                                const std::vector<std::string>& sentence, bool labeled = true);

/// DP score of the returned tree, for oracle comparisons.
double maximum_constituents_score(const ConstituentPosterior& posteriors,
                                  const std::vector<std::string>& sentence, bool labeled = true);

}  // namespace dop
