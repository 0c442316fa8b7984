#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>
#include <set>

#include "dop/errors.hpp"
#include "dop/inside_outside.hpp"
#include "dop/parser.hpp"
#include "dop/reduction.hpp"
#include "dop/stsg.hpp"
#include "dop/treebank.hpp"
#include "oracles.hpp"

using namespace dop;

namespace {

const std::string kSingle = "(S (A a) (B b))";
const std::string kWeighted = "(S (A a) (B b)) (S (A a) (B b)) (S (C a) (D b))";

std::map<std::string, double> rules_by_text(const IndexedPcfg& pcfg) {
  std::map<std::string, double> out;
  for (const auto& rule : pcfg.rules()) {
    std::string key = pcfg.nonterminal_name(rule.lhs) + " ->";
    for (const auto& sym : rule.rhs)
      key += " " + (sym.terminal ? "\"" + pcfg.terminal_name(sym.id) + "\""
                                 : pcfg.nonterminal_name(sym.id));
    out[key] += rule.weight;
  }
  return out;
}

}  // namespace

TEST_CASE("unary collapse and expansion") {
  Tree t = parse_bracketed("(S (X (A a)) (B b))")[0];
  Tree collapsed = collapse_unary_chains(t);
  CHECK(tree_to_string(collapsed) == "(S (X+A a) (B b))");
  CHECK(expand_composite_labels(collapsed) == t);

  Tree chain = parse_bracketed("(S (X (Y (A a) (B b))))")[0];
  Tree c2 = collapse_unary_chains(chain);
  CHECK(tree_to_string(c2) == "(S+X+Y (A a) (B b))");
  CHECK(expand_composite_labels(c2) == chain);

  Tree plain = parse_bracketed(kSingle)[0];
  CHECK(collapse_unary_chains(plain) == plain);
}

TEST_CASE("project erases indices") {
  Tree indexed = parse_fragment("(S (A@1 a) (B@22 b))");
  CHECK(tree_to_string(project(indexed)) == kSingle);
  Tree plain = parse_fragment(kSingle);
  CHECK(project(plain) == plain);

  // All four indexed parses of the single-tree reduction project to the
  // one corpus tree.
  IndexedPcfg pcfg = reduce(parse_bracketed(kSingle));
  auto parses = oracle::indexed_parses(pcfg, {"a", "b"});
  REQUIRE(parses.size() == 4);
  for (const auto& p : parses) CHECK(tree_to_string(project(p.tree)) == kSingle);
}

TEST_CASE("single-tree reduction weights") {
  IndexedPcfg pcfg = reduce(parse_bracketed(kSingle));
  auto rules = rules_by_text(pcfg);
  REQUIRE(rules.size() == 12);

  // Four plain-S rules at 1/4 each, four indexed-S rules at 1/4 each, and
  // weight-1 lexical rules for both flavors of A and B.
  int quarter_plain = 0, quarter_indexed = 0, unit_lexical = 0;
  for (const auto& [key, weight] : rules) {
    if (key.rfind("S ->", 0) == 0) {
      CHECK(weight == doctest::Approx(0.25).epsilon(1e-12));
      ++quarter_plain;
    } else if (key.rfind("S@", 0) == 0) {
      CHECK(weight == doctest::Approx(0.25).epsilon(1e-12));
      ++quarter_indexed;
    } else {
      CHECK(weight == doctest::Approx(1.0).epsilon(1e-12));
      ++unit_lexical;
    }
  }
  CHECK(quarter_plain == 4);
  CHECK(quarter_indexed == 4);
  CHECK(unit_lexical == 4);

  CHECK(pcfg.label_totals().at("S") == doctest::Approx(4.0));
  CHECK(pcfg.label_totals().at("A") == doctest::Approx(1.0));
}

TEST_CASE("rule weights are proper per lhs") {
  std::uint64_t state = 808;
  oracle::GenOptions opt;
  for (int round = 0; round < 20; ++round) {
    Corpus corpus = oracle::random_corpus(state, opt);
    IndexedPcfg pcfg = reduce(corpus, oracle::rng_range(state, 0, 3));
    std::map<int, double> sums;
    for (const auto& rule : pcfg.rules()) sums[rule.lhs] += rule.weight;
    for (const auto& [lhs, sum] : sums) CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("duplicate occurrences merge plain rules by weight") {
  IndexedPcfg pcfg = reduce(parse_bracketed(kWeighted));
  auto rules = rules_by_text(pcfg);
  CHECK(pcfg.label_totals().at("S") == doctest::Approx(12.0));
  CHECK(rules.at("S -> A B") == doctest::Approx(2.0 / 12).epsilon(1e-12));
  CHECK(rules.at("S -> C D") == doctest::Approx(1.0 / 12).epsilon(1e-12));
  CHECK(rules.at("A -> \"a\"") == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("inside mass on the worked examples") {
  IndexedPcfg single = reduce(parse_bracketed(kSingle));
  CHECK(inside(single, {"a", "b"}).sentence_mass == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(inside(single, {"b", "a"}).sentence_mass == 0.0);
  CHECK_THROWS_AS(inside(single, {"a", "z"}), UnknownWord);

  IndexedPcfg weighted = reduce(parse_bracketed(kWeighted));
  CHECK(inside(weighted, {"a", "b"}).sentence_mass == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("outside tables and posteriors on the worked examples") {
  IndexedPcfg single = reduce(parse_bracketed(kSingle));
  InsideOutsideTables t = inside(single, {"a", "b"});
  outside(single, t);
  CHECK(t.outside(0, 2, single.start()) == doctest::Approx(1.0).epsilon(1e-12));
  ConstituentPosterior post = constituent_posteriors(t, single);
  CHECK(post.at(0, 1, "A") == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(post.at(0, 2, "S") == doctest::Approx(1.0).epsilon(1e-9));

  IndexedPcfg weighted = reduce(parse_bracketed(kWeighted));
  InsideOutsideTables tw = inside(weighted, {"a", "b"});
  outside(weighted, tw);
  ConstituentPosterior pw = constituent_posteriors(tw, weighted);
  CHECK(pw.at(0, 1, "A") == doctest::Approx(2.0 / 3).epsilon(1e-9));
  CHECK(pw.at(0, 1, "C") == doctest::Approx(1.0 / 3).epsilon(1e-9));
  CHECK(pw.at(1, 2, "X") == 0.0);  // absent span-label pairs read as zero

  InsideOutsideTables empty = inside(single, {"b", "a"});
  CHECK_THROWS_AS(outside(single, empty), NoParse);
}

TEST_CASE("pcfg viterbi on the worked examples") {
  IndexedPcfg single = reduce(parse_bracketed(kSingle));
  auto [tree, prob] = pcfg_viterbi(single, {"a", "b"});
  CHECK(tree_to_string(tree) == kSingle);
  CHECK(prob == doctest::Approx(0.25).epsilon(1e-9));

  IndexedPcfg weighted = reduce(parse_bracketed(kWeighted));
  auto [tree3, prob3] = pcfg_viterbi(weighted, {"a", "b"});
  CHECK(tree_to_string(tree3) == kSingle);
  CHECK(prob3 == doctest::Approx(1.0 / 6).epsilon(1e-9));

  IndexedPcfg depth1 = reduce(parse_bracketed(kSingle), 1);
  auto [t1, p1] = pcfg_viterbi(depth1, {"a", "b"});
  CHECK(tree_to_string(t1) == kSingle);
  CHECK(p1 == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(pcfg_viterbi(single, {"b", "a"}), NoParse);
}

TEST_CASE("viterbi spans the whole sentence under mixed-arity competition") {
  // Attachment ambiguity with recursive NPs: a shorter parse that drops the
  // PP words has fewer probability factors and must never win a longer span.
  Corpus corpus = parse_bracketed(
      "(S (NP (D the) (N dog)) (VP (V saw) (NP (D the) (N cat))))"
      "(S (NP (D the) (N cat)) (VP (V ran)))"
      "(S (NP (D the) (N dog)) (VP (VP (V saw) (NP (D a) (N cat))) (PP (P with) (NP (D a) (N scope)))))"
      "(S (NP (D the) (N dog)) (VP (V saw) (NP (NP (D a) (N cat)) (PP (P with) (NP (D a) (N scope))))))");
  std::vector<std::string> words = {"the", "dog", "saw", "a", "cat", "with", "a", "scope"};
  IndexedPcfg pcfg = reduce(corpus, 2);
  auto [tree, prob] = pcfg_viterbi(pcfg, words);
  CHECK(yield_of(tree) == words);

  double best = 0.0;
  for (const auto& p : oracle::indexed_parses(pcfg, words)) best = std::max(best, p.weight);
  CHECK(prob == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("reduction equivalence with the STSG on random corpora") {
  std::uint64_t state = 20250810;
  oracle::GenOptions opt;  // unary-free: collapse is the identity there
  int corpora = 0;
  while (corpora < 30) {
    Corpus corpus = oracle::random_corpus(state, opt);
    int words_total = 0;
    for (const Tree& t : corpus) words_total += static_cast<int>(yield_of(t).size());
    if (words_total > 6) continue;
    ++corpora;
    for (int cap : {0, 1, 2}) {
      Stsg g = extract_subtrees(corpus, cap);
      IndexedPcfg pcfg = reduce(corpus, cap);
      std::set<std::vector<std::string>> sentences;
      for (const Tree& t : corpus) sentences.insert(yield_of(t));
      for (const auto& words : sentences) {
        if (words.size() > 4) continue;
        // Sentence level: reduced mass equals the brute derivation sum.
        double brute_mass = 0.0;
        for (const auto& d : oracle::brute_derivations(g, words)) brute_mass += d.probability;
        double reduced_mass = inside(pcfg, words).sentence_mass;
        CHECK(reduced_mass == doctest::Approx(brute_mass).epsilon(1e-9));

        // Tree level: summed indexed parses per projected tree equal the
        // STSG tree probabilities.
        std::map<std::string, double> stsg_masses = oracle::brute_tree_masses(g, words);
        std::map<std::string, double> pcfg_masses = oracle::projected_masses(pcfg, words);
        REQUIRE(pcfg_masses.size() == stsg_masses.size());
        for (const auto& [key, mass] : stsg_masses)
          CHECK(pcfg_masses.at(key) == doctest::Approx(mass).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("indexed parses group by derivation with matching mass") {
  // Each derivation corresponds to prod(count of deep steps) indexed parses
  // whose weights sum to the derivation probability; depth-1 steps merge.
  std::uint64_t state = 606;
  oracle::GenOptions opt;
  int rounds = 0;
  while (rounds < 12) {
    Corpus corpus = oracle::random_corpus(state, opt);
    Stsg g = extract_subtrees(corpus);
    IndexedPcfg pcfg = reduce(corpus);
    const Tree& probe = corpus[0];
    std::vector<std::string> words = yield_of(probe);
    if (words.size() > 4) continue;
    ++rounds;

    std::uint64_t expected_parses = 0;
    double total = 0.0;
    for (const auto& d : oracle::brute_derivations(g, words)) {
      std::uint64_t group = 1;
      for (const auto& step : d.steps) {
        const auto& entry = g.entries().at(step);
        if (entry.depth >= 2) group *= entry.count;
      }
      expected_parses += group;
      total += d.probability;
    }
    auto parses = oracle::indexed_parses(pcfg, words);
    CHECK(parses.size() == expected_parses);
    double parse_mass = 0.0;
    for (const auto& p : parses) parse_mass += p.weight;
    CHECK(parse_mass == doctest::Approx(total).epsilon(1e-9));
  }
}

TEST_CASE("viterbi equals the MPD tree when deep fragments are unrepeated") {
  std::uint64_t state = 70707;
  oracle::GenOptions opt;
  int rounds = 0;
  while (rounds < 15) {
    Corpus corpus = oracle::random_corpus(state, opt);
    Stsg g = extract_subtrees(corpus);
    bool repeated_deep = false;
    for (const auto& [key, entry] : g.entries())
      if (entry.depth >= 2 && entry.count > 1) repeated_deep = true;
    if (repeated_deep) continue;  // the bijection only holds one-to-one here
    IndexedPcfg pcfg = reduce(corpus);
    std::vector<std::string> words = yield_of(corpus[0]);
    if (words.size() > 4) continue;
    ++rounds;
    DerivationForest f(g, words);
    Derivation mpd = most_probable_derivation(f);
    auto [vtree, vprob] = pcfg_viterbi(pcfg, words);
    CHECK(vprob == doctest::Approx(mpd.probability).epsilon(1e-9));
    CHECK(tree_to_string(vtree) == tree_to_string(mpd.result));
  }
}

TEST_CASE("viterbi can diverge from the MPD tree when deep fragments repeat") {
  // A deep fragment with count 2 splits into two indexed parses of half the
  // derivation probability each, so Viterbi over the reduction maximizes a
  // different objective. Balanced tree x3, flat tree x2: the MPD uses the
  // count-3 full fragment (3/107) but the best single indexed parse is the
  // flat tree's all-plain parse (2/107).
  std::string deep = "(S (X (A a) (B b)) (Y (C c) (D d)))";
  std::string flat = "(S (A a) (B b) (C c) (D d))";
  Corpus corpus = parse_bracketed(deep + deep + deep + flat + flat);
  Stsg g = extract_subtrees(corpus);
  DerivationForest f(g, {"a", "b", "c", "d"});
  Derivation mpd = most_probable_derivation(f);
  CHECK(tree_to_string(mpd.result) == deep);
  CHECK(mpd.probability == doctest::Approx(3.0 / 107).epsilon(1e-12));

  IndexedPcfg pcfg = reduce(corpus);
  auto [vtree, vprob] = pcfg_viterbi(pcfg, {"a", "b", "c", "d"});
  CHECK(tree_to_string(vtree) == flat);
  CHECK(vprob == doctest::Approx(2.0 / 107).epsilon(1e-12));
}

TEST_CASE("posterior mass per span stays within one") {
  std::uint64_t state = 111;
  oracle::GenOptions opt;
  int rounds = 0;
  while (rounds < 15) {
    Corpus corpus = oracle::random_corpus(state, opt);
    IndexedPcfg pcfg = reduce(corpus);
    std::vector<std::string> words = yield_of(corpus[0]);
    if (words.size() > 4) continue;
    ++rounds;
    InsideOutsideTables t = inside(pcfg, words);
    outside(pcfg, t);
    ConstituentPosterior post = constituent_posteriors(t, pcfg);
    std::map<std::pair<int, int>, double> per_span;
    for (const auto& [key, mass] : post.table)
      per_span[{std::get<0>(key), std::get<1>(key)}] += mass;
    for (const auto& [span, mass] : per_span) CHECK(mass <= 1.0 + 1e-9);
  }
}

TEST_CASE("maximum constituents parse on the worked example") {
  IndexedPcfg pcfg = reduce(parse_bracketed(kWeighted));
  InsideOutsideTables t = inside(pcfg, {"a", "b"});
  outside(pcfg, t);
  ConstituentPosterior post = constituent_posteriors(t, pcfg);
  Tree mcp = maximum_constituents_parse(post, {"a", "b"});
  CHECK(tree_to_string(mcp) == kSingle);

  IndexedPcfg depth1 = reduce(parse_bracketed(kSingle), 1);
  InsideOutsideTables t1 = inside(depth1, {"a", "b"});
  outside(depth1, t1);
  Tree unambiguous = maximum_constituents_parse(constituent_posteriors(t1, depth1), {"a", "b"});
  CHECK(tree_to_string(unambiguous) == kSingle);
}

TEST_CASE("MCP DP matches the brute-force maximum") {
  std::uint64_t state = 3131;
  oracle::GenOptions opt;
  int rounds = 0;
  while (rounds < 15) {
    Corpus corpus = oracle::random_corpus(state, opt);
    IndexedPcfg pcfg = reduce(corpus);
    std::vector<std::string> words = yield_of(corpus[0]);
    if (words.size() > 5) continue;
    InsideOutsideTables t = inside(pcfg, words);
    if (!(t.sentence_mass > 0.0)) continue;
    outside(pcfg, t);
    ConstituentPosterior post = constituent_posteriors(t, pcfg);
    ++rounds;
    double brute = oracle::brute_mcp_score(post, 0, static_cast<int>(words.size()));
    try {
      double dp = maximum_constituents_score(post, words);
      CHECK(dp == doctest::Approx(brute).epsilon(1e-9));
    } catch (const NoParse&) {
      CHECK(brute == -std::numeric_limits<double>::infinity());
    }
  }
}

TEST_CASE("MCP can return a tree the grammar cannot produce") {
  // Search over corpora of four trees pairing left labels {E1,E2,E3} with
  // right labels {F1,F2,F3} over a fixed bracketing; the winning label pair
  // never co-occurs in training.
  std::vector<std::string> lefts = {"E1", "E2", "E3"};
  std::vector<std::string> rights = {"F1", "F2", "F3"};
  auto tree_text = [&](const std::string& l, const std::string& r) {
    return "(S (" + l + " (A a) (B b)) (" + r + " (C c) (D d)))";
  };
  std::optional<Corpus> witness;
  // All 4-subsets of the 9 label pairings, in deterministic order.
  std::vector<std::pair<int, int>> pairs;
  for (int l = 0; l < 3; ++l)
    for (int r = 0; r < 3; ++r) pairs.emplace_back(l, r);
  for (std::size_t a = 0; a < pairs.size() && !witness; ++a)
    for (std::size_t b = a + 1; b < pairs.size() && !witness; ++b)
      for (std::size_t c = b + 1; c < pairs.size() && !witness; ++c)
        for (std::size_t d = c + 1; d < pairs.size() && !witness; ++d) {
          std::string text;
          for (std::size_t idx : {a, b, c, d})
            text += tree_text(lefts[pairs[idx].first], rights[pairs[idx].second]) + " ";
          Corpus corpus = parse_bracketed(text);
          IndexedPcfg pcfg = reduce(corpus);
          InsideOutsideTables t = inside(pcfg, {"a", "b", "c", "d"});
          if (!(t.sentence_mass > 0.0)) continue;
          outside(pcfg, t);
          Tree mcp = maximum_constituents_parse(constituent_posteriors(t, pcfg),
                                                {"a", "b", "c", "d"});
          Stsg g = extract_subtrees(corpus);
          if (!is_producible(mcp, g)) witness = corpus;
        }
  REQUIRE(witness.has_value());

  // Freeze the canonical witness: E1 pairs with {F2, F3}, F1 with {E2, E3};
  // both argmax labels win their spans, yet S -> E1 F1 was never seen.
  Corpus fixed = parse_bracketed(tree_text("E1", "F2") + " " + tree_text("E1", "F3") + " " +
                                 tree_text("E2", "F1") + " " + tree_text("E3", "F1"));
  Stsg g = extract_subtrees(fixed);
  IndexedPcfg pcfg = reduce(fixed);
  InsideOutsideTables t = inside(pcfg, {"a", "b", "c", "d"});
  outside(pcfg, t);
  ConstituentPosterior post = constituent_posteriors(t, pcfg);
  Tree mcp = maximum_constituents_parse(post, {"a", "b", "c", "d"});
  CHECK(tree_to_string(mcp) == "(S (E1 (A a) (B b)) (F1 (C c) (D d)))");
  CHECK_FALSE(is_producible(mcp, g));
  DerivationForest f(g, {"a", "b", "c", "d"});
  CHECK(tree_probability(mcp, f) == 0.0);
}

TEST_CASE("depth-capped reduction equivalence") {
  // Caps restrict index propagation; the equivalence must hold per cap.
  Corpus corpus = parse_bracketed("(S (X (A a) (B b)) (C c)) (S (X (A a) (B b)) (C c))");
  for (int cap : {1, 2, 3, 0}) {
    Stsg g = extract_subtrees(corpus, cap);
    IndexedPcfg pcfg = reduce(corpus, cap);
    double brute_mass = 0.0;
    for (const auto& d : oracle::brute_derivations(g, {"a", "b", "c"})) brute_mass += d.probability;
    CHECK(inside(pcfg, {"a", "b", "c"}).sentence_mass ==
          doctest::Approx(brute_mass).epsilon(1e-9));
    std::map<std::string, double> stsg_masses = oracle::brute_tree_masses(g, {"a", "b", "c"});
    std::map<std::string, double> pcfg_masses = oracle::projected_masses(pcfg, {"a", "b", "c"});
    REQUIRE(pcfg_masses.size() == stsg_masses.size());
    for (const auto& [key, mass] : stsg_masses)
      CHECK(pcfg_masses.at(key) == doctest::Approx(mass).epsilon(1e-9));
  }
}

TEST_CASE("reduction collapses unary chains and re-expands on output") {
  Corpus corpus = parse_bracketed("(S (X (A a)) (B b)) (S (X (A a)) (B b))");
  IndexedPcfg pcfg = reduce(corpus);
  auto [vtree, vprob] = pcfg_viterbi(pcfg, {"a", "b"});
  CHECK(tree_to_string(vtree) == "(S (X (A a)) (B b))");

  InsideOutsideTables t = inside(pcfg, {"a", "b"});
  outside(pcfg, t);
  Tree mcp = maximum_constituents_parse(constituent_posteriors(t, pcfg), {"a", "b"});
  CHECK(tree_to_string(mcp) == "(S (X (A a)) (B b))");
}

TEST_CASE("rule file round trip") {
  IndexedPcfg pcfg = reduce(parse_bracketed(kWeighted));
  std::string text = serialize_rules(pcfg);
  IndexedPcfg back = load_rules(text);
  CHECK(serialize_rules(back) == text);
  CHECK(back.start_name() == pcfg.start_name());
  CHECK(inside(back, {"a", "b"}).sentence_mass == doctest::Approx(1.0).epsilon(1e-9));
  auto [tree, prob] = pcfg_viterbi(back, {"a", "b"});
  CHECK(tree_to_string(tree) == kSingle);
  CHECK(prob == doctest::Approx(1.0 / 6).epsilon(1e-9));

  CHECK_THROWS_AS(load_rules("pcfg\t1\nstart\tS\nS\tA\tnot-a-number\n"), BadGrammarFile);
  CHECK_THROWS_AS(load_rules("bogus\n"), BadGrammarFile);
  CHECK_THROWS_AS(load_rules("pcfg\t1\nstart\tS\n"), BadGrammarFile);
}

TEST_CASE("empty corpus is rejected") { CHECK_THROWS_AS(reduce({}), EmptyCorpus); }
