#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>

#include "dop/errors.hpp"
#include "dop/parser.hpp"
#include "dop/stsg.hpp"
#include "dop/treebank.hpp"
#include "oracles.hpp"

using namespace dop;

namespace {

Stsg grammar_of(const std::string& text, int cap = 0) {
  return extract_subtrees(parse_bracketed(text), cap);
}

const std::string kSingle = "(S (A a) (B b))";
const std::string kWeighted = "(S (A a) (B b)) (S (A a) (B b)) (S (C a) (D b))";

}  // namespace

TEST_CASE("single-tree forest") {
  Stsg g = grammar_of(kSingle);
  DerivationForest f(g, {"a", "b"});
  CHECK_FALSE(f.empty());
  CHECK(f.derivation_count() == 4);
  CHECK(f.inside_mass() == doctest::Approx(1.0).epsilon(1e-12));

  auto derivs = enumerate_derivations(f, 100);
  REQUIRE(derivs.size() == 4);
  for (const auto& d : derivs) {
    CHECK(d.probability == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(tree_to_string(d.result) == kSingle);
  }

  DerivationForest reversed(g, {"b", "a"});
  CHECK(reversed.empty());
  CHECK(reversed.inside_mass() == 0.0);

  CHECK_THROWS_AS(DerivationForest(g, {"a", "c"}), UnknownWord);
  try {
    DerivationForest(g, {"a", "c"});
  } catch (const UnknownWord& e) {
    CHECK(e.word == "c");
    CHECK(e.position == 1);
  }
}

TEST_CASE("unambiguous depth-1 grammar has one derivation") {
  Stsg g = grammar_of(kSingle, 1);
  DerivationForest f(g, {"a", "b"});
  CHECK(f.derivation_count() == 1);
  auto derivs = enumerate_derivations(f, 10);
  REQUIRE(derivs.size() == 1);
  CHECK(derivs[0].steps.size() == 3);
  CHECK(most_probable_derivation(f).canonical() == derivs[0].canonical());
  std::uint64_t state = 9;
  for (int i = 0; i < 5; ++i)
    CHECK(sample_derivation(f, state).canonical() == derivs[0].canonical());
}

TEST_CASE("weighted corpus derivations match the brute oracle") {
  Stsg g = grammar_of(kWeighted);
  DerivationForest f(g, {"a", "b"});
  CHECK(f.derivation_count() == 8);

  auto derivs = enumerate_derivations(f, 100);
  REQUIRE(derivs.size() == 8);
  int sixth = 0, twelfth = 0;
  for (const auto& d : derivs) {
    if (d.probability == doctest::Approx(1.0 / 6).epsilon(1e-9)) ++sixth;
    if (d.probability == doctest::Approx(1.0 / 12).epsilon(1e-9)) ++twelfth;
  }
  CHECK(sixth == 4);
  CHECK(twelfth == 4);
  // Descending probability with canonical tie-break.
  for (std::size_t i = 1; i < derivs.size(); ++i) {
    CHECK(derivs[i - 1].probability >= derivs[i].probability - 1e-15);
    if (derivs[i - 1].probability == derivs[i].probability)
      CHECK(derivs[i - 1].canonical() < derivs[i].canonical());
  }

  auto brute = oracle::brute_derivations(g, {"a", "b"});
  REQUIRE(brute.size() == 8);
  std::multiset<std::string> chart_keys, brute_keys;
  for (const auto& d : derivs) chart_keys.insert(d.canonical());
  for (const auto& d : brute) {
    std::string key;
    for (const auto& s : d.steps) key += s + '\x1f';
    brute_keys.insert(key);
  }
  CHECK(chart_keys == brute_keys);
}

TEST_CASE("enumeration limit") {
  Stsg g = grammar_of(kSingle);
  DerivationForest f(g, {"a", "b"});
  CHECK_THROWS_AS(enumerate_derivations(f, 3), LimitExceeded);
  CHECK(enumerate_derivations(f, 3, /*allow_truncation=*/true).size() == 3);
}

TEST_CASE("most probable derivation") {
  Stsg g = grammar_of(kWeighted);
  DerivationForest f(g, {"a", "b"});
  Derivation mpd = most_probable_derivation(f);
  CHECK(mpd.probability == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(tree_to_string(mpd.result) == kSingle);
  // Tie-break: the canonically least among the four 1/6 derivations.
  auto derivs = enumerate_derivations(f, 100);
  CHECK(mpd.canonical() == derivs[0].canonical());

  Stsg single = grammar_of(kSingle);
  DerivationForest sf(single, {"a", "b"});
  CHECK(most_probable_derivation(sf).probability == doctest::Approx(0.25).epsilon(1e-12));

  DerivationForest empty(single, {"b", "a"});
  CHECK_THROWS_AS(most_probable_derivation(empty), NoParse);
}

TEST_CASE("derivation steps rebuild the result in leftmost order") {
  Stsg g = grammar_of(kWeighted);
  DerivationForest f(g, {"a", "b"});
  for (const auto& d : enumerate_derivations(f, 100)) {
    // Replay: substitute each step into the leftmost open site.
    Tree current = d.steps[0];
    for (std::size_t s = 1; s < d.steps.size(); ++s) {
      std::function<bool(Tree&)> fill = [&](Tree& node) -> bool {
        if (node.site()) {
          REQUIRE(node.label == d.steps[s].label);
          node = d.steps[s];
          return true;
        }
        for (Tree& child : node.children)
          if (fill(child)) return true;
        return false;
      };
      REQUIRE(fill(current));
    }
    CHECK(current == d.result);
    double p = 1.0;
    for (const auto& step : d.steps) p *= g.probability(fragment_to_string(step));
    CHECK(p == doctest::Approx(d.probability).epsilon(1e-12));
  }
}

TEST_CASE("tree probability") {
  Stsg g = grammar_of(kWeighted);
  DerivationForest f(g, {"a", "b"});
  Tree t1 = parse_bracketed(kSingle)[0];
  Tree t2 = parse_bracketed("(S (C a) (D b))")[0];
  CHECK(tree_probability(t1, f) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(tree_probability(t2, f) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(tree_probability(parse_bracketed("(S (A a) (D b))")[0], f) == 0.0);

  Stsg single = grammar_of(kSingle);
  DerivationForest sf(single, {"a", "b"});
  CHECK(tree_probability(parse_bracketed(kSingle)[0], sf) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact most probable tree") {
  Stsg g = grammar_of(kWeighted);
  DerivationForest f(g, {"a", "b"});
  ExactMptResult mpt = exact_most_probable_tree(f, 1000);
  CHECK(tree_to_string(mpt.tree) == kSingle);
  CHECK(mpt.probability == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK_FALSE(mpt.tied);

  // Exact tie: equal counts make both trees 1/2; canonical-least returned.
  Stsg tie = grammar_of("(S (A a) (B b)) (S (C a) (D b))");
  DerivationForest tf(tie, {"a", "b"});
  ExactMptResult tied = exact_most_probable_tree(tf, 1000);
  CHECK(tied.tied);
  CHECK(tied.probability == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(tree_to_string(tied.tree) == kSingle);  // "(S (A a)..." < "(S (C a)..."

  CHECK_THROWS_AS(exact_most_probable_tree(f, 3), BudgetExceeded);
  try {
    exact_most_probable_tree(f, 3);
  } catch (const BudgetExceeded& e) {
    CHECK(e.count == 8);
  }
}

TEST_CASE("sampling is proportional to derivation probability") {
  // Chi-square goodness of fit at alpha = 0.001, fixed seeds.
  for (auto [corpus_text, seed] :
       std::vector<std::pair<std::string, std::uint64_t>>{{kSingle, 1}, {kWeighted, 2}}) {
    Stsg g = grammar_of(corpus_text);
    DerivationForest f(g, {"a", "b"});
    std::map<std::string, double> expected;
    for (const auto& d : enumerate_derivations(f, 1000)) expected[d.canonical()] = d.probability;

    const std::size_t n = 10000;
    std::map<std::string, std::size_t> observed;
    for (std::size_t s = 0; s < n; ++s) {
      std::uint64_t state = seed * 1000003 + s;
      ++observed[sample_derivation(f, state).canonical()];
    }
    double stat = oracle::chi_square_statistic(observed, expected, n);
    int df = static_cast<int>(expected.size()) - 1;
    CHECK(oracle::chi_square_pvalue(stat, df) > 0.001);

    // Each empirical frequency sits within 3 sigma of its true probability.
    for (const auto& [key, p] : expected) {
      double freq = static_cast<double>(observed[key]) / n;
      CHECK(std::abs(freq - p) < 3 * std::sqrt(p * (1 - p) / n));
    }
  }
}

TEST_CASE("monte carlo most probable tree") {
  Stsg g = grammar_of(kWeighted);
  DerivationForest f(g, {"a", "b"});
  MonteCarloResult mc = monte_carlo_mpt(f, 10000, 7);
  CHECK(tree_to_string(mc.tree) == kSingle);
  double sigma = std::sqrt((2.0 / 3) * (1.0 / 3) / 10000);
  CHECK(std::abs(mc.frequency - 2.0 / 3) < 3 * sigma);
  CHECK(mc.standard_error == doctest::Approx(std::sqrt(mc.frequency * (1 - mc.frequency) / 10000))
                                  .epsilon(1e-12));
  CHECK_FALSE(mc.contested);

  // Deterministic for a fixed seed.
  MonteCarloResult again = monte_carlo_mpt(f, 10000, 7);
  CHECK(again.frequency == mc.frequency);
  CHECK(tree_to_string(again.tree) == tree_to_string(mc.tree));

  // One sample: the sampled derivation's tree, zero standard error.
  MonteCarloResult one = monte_carlo_mpt(f, 1, 3);
  CHECK(one.samples == 1);
  CHECK(one.standard_error == 0.0);

  // Exact tie: frequencies within 3 sigma of each other get flagged.
  Stsg tie = grammar_of("(S (A a) (B b)) (S (C a) (D b))");
  DerivationForest tf(tie, {"a", "b"});
  MonteCarloResult contested = monte_carlo_mpt(tf, 10000, 11);
  CHECK(contested.contested);
}

TEST_CASE("sequential sampling stops early on clear leaders") {
  Stsg g = grammar_of(kSingle);
  DerivationForest f(g, {"a", "b"});
  MonteCarloResult mc = monte_carlo_mpt_sequential(f, 100000, 64, 5);
  CHECK(mc.samples < 100000);  // only one result tree; separation is instant
  CHECK(tree_to_string(mc.tree) == kSingle);
}

TEST_CASE("forest invariants on random corpora") {
  std::uint64_t state = 1234;
  oracle::GenOptions opt;
  int rounds = 0;
  while (rounds < 40) {
    Corpus corpus = oracle::random_corpus(state, opt);
    Stsg g = extract_subtrees(corpus, oracle::rng_range(state, 0, 3));
    // Parse each distinct corpus yield.
    std::set<std::vector<std::string>> sentences;
    for (const Tree& t : corpus) sentences.insert(yield_of(t));
    for (const auto& words : sentences) {
      if (words.size() > 4) continue;
      DerivationForest f(g, words);
      REQUIRE_FALSE(f.empty());
      ++rounds;

      double mass = f.inside_mass();
      std::uint64_t count = f.derivation_count();
      if (count <= 10000) {
        double sum = 0.0;
        double best = 0.0;
        std::map<std::string, double> by_tree;
        f.for_each_derivation([&](Derivation&& d) {
          sum += d.probability;
          best = std::max(best, d.probability);
          by_tree[tree_to_string(d.result)] += d.probability;
        });
        CHECK(sum == doctest::Approx(mass).epsilon(1e-9));

        ExactMptResult mpt = exact_most_probable_tree(f, 10000);
        Derivation mpd = most_probable_derivation(f);
        CHECK(mpd.probability == doctest::Approx(best).epsilon(1e-9));
        CHECK(mpd.probability <= mpt.probability + 1e-12);
        CHECK(mpt.probability <= mass + 1e-12);
        // The u-recursion agrees with enumeration per tree.
        for (const auto& [key, sum_mass] : by_tree) {
          Tree t = parse_bracketed(key)[0];
          CHECK(tree_probability(t, f) == doctest::Approx(sum_mass).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("chart derivations equal the brute oracle on random corpora") {
  std::uint64_t state = 555;
  oracle::GenOptions opt;
  int rounds = 0;
  while (rounds < 15) {
    Corpus corpus = oracle::random_corpus(state, opt);
    Stsg g = extract_subtrees(corpus);
    std::set<std::vector<std::string>> sentences;
    for (const Tree& t : corpus) sentences.insert(yield_of(t));
    // Also try a random unseen word string.
    std::vector<std::string> random_words;
    for (int i = 0, n = oracle::rng_range(state, 1, 3); i < n; ++i)
      random_words.push_back(std::string(1, static_cast<char>('a' + oracle::rng_range(state, 0, 3))));
    sentences.insert(random_words);
    for (const auto& words : sentences) {
      if (words.size() > 3) continue;
      bool known = true;
      for (const auto& w : words) {
        bool found = false;
        for (const auto& [key, entry] : g.entries())
          for (const auto& sym : frontier_of(entry.fragment))
            if (sym.terminal && sym.text == w) found = true;
        known &= found;
      }
      if (!known) continue;
      DerivationForest f(g, words);
      auto brute = oracle::brute_derivations(g, words);
      CHECK(f.derivation_count() == brute.size());
      std::multiset<std::string> brute_keys;
      for (const auto& d : brute) {
        std::string key;
        for (const auto& s : d.steps) key += s + '\x1f';
        brute_keys.insert(key);
      }
      std::multiset<std::string> chart_keys;
      f.for_each_derivation([&](Derivation&& d) { chart_keys.insert(d.canonical()); });
      CHECK(chart_keys == brute_keys);
      ++rounds;
    }
  }
}

TEST_CASE("monte carlo matches exact MPT when the gap is wide") {
  std::uint64_t state = 31337;
  oracle::GenOptions opt;
  int rounds = 0;
  while (rounds < 10) {
    Corpus corpus = oracle::random_corpus(state, opt);
    Stsg g = extract_subtrees(corpus);
    std::set<std::vector<std::string>> sentences;
    for (const Tree& t : corpus) sentences.insert(yield_of(t));
    for (const auto& words : sentences) {
      if (words.size() > 3) continue;
      DerivationForest f(g, words);
      if (f.derivation_count() > 10000) continue;
      std::map<std::string, double> masses;
      f.for_each_derivation(
          [&](Derivation&& d) { masses[tree_to_string(d.result)] += d.probability; });
      std::vector<double> sorted;
      for (const auto& [key, mass] : masses) sorted.push_back(mass);
      std::sort(sorted.rbegin(), sorted.rend());
      const std::size_t n = 2000;
      double top = sorted[0];
      double gap = sorted.size() > 1 ? top - sorted[1] : top;
      double sigma = std::sqrt(top * (1 - top) / n);
      if (sorted.size() > 1 && gap < 5 * sigma) continue;  // not a 5-sigma instance
      MonteCarloResult mc = monte_carlo_mpt(f, n, oracle::rng_next(state));
      ExactMptResult exact = exact_most_probable_tree(f, 10000);
      CHECK(tree_to_string(mc.tree) == tree_to_string(exact.tree));
      ++rounds;
    }
  }
}

TEST_CASE("a small corpus separates MPD from exact MPT") {
  // Brute-force search over corpora of <= 3 trees of depth <= 3: all
  // multisets of parses of "a b" built from the shape family below.
  std::vector<std::string> shapes = {
      "(S (A a) (B b))",
      "(S (C (A a)) (B b))",
      "(S (A a) (D (B b)))",
      "(S (C (A a)) (D (B b)))",
  };
  std::optional<Corpus> witness;
  for (std::size_t i = 0; i < shapes.size() && !witness; ++i)
    for (std::size_t j = i; j < shapes.size() && !witness; ++j)
      for (std::size_t k = j; k <= shapes.size() && !witness; ++k) {
        std::string text = shapes[i] + " " + shapes[j];
        if (k < shapes.size()) text += " " + shapes[k];
        Corpus corpus = parse_bracketed(text);
        Stsg g = extract_subtrees(corpus);
        DerivationForest f(g, {"a", "b"});
        if (f.empty()) continue;
        Derivation mpd = most_probable_derivation(f);
        ExactMptResult mpt = exact_most_probable_tree(f, 100000);
        if (mpt.tied) continue;
        if (!(mpd.result == mpt.tree)) witness = corpus;
      }
  REQUIRE(witness.has_value());

  // The first witness the search finds: {flat x2, both-deep x1}.
  Stsg g = extract_subtrees(*witness);
  DerivationForest f(g, {"a", "b"});
  Derivation mpd = most_probable_derivation(f);
  ExactMptResult mpt = exact_most_probable_tree(f, 100000);
  CHECK_FALSE(mpd.result == mpt.tree);
  CHECK(tree_probability(mpd.result, f) < mpt.probability);

  // Pin the arithmetic of the canonical witness: flat wins MPD at 2/17,
  // the doubly-unary tree wins the sum at 9/17 (vs the flat tree's 8/17).
  Corpus fixed = parse_bracketed("(S (A a) (B b)) (S (A a) (B b)) (S (C (A a)) (D (B b)))");
  Stsg gf = extract_subtrees(fixed);
  DerivationForest ff(gf, {"a", "b"});
  Derivation fixed_mpd = most_probable_derivation(ff);
  ExactMptResult fixed_mpt = exact_most_probable_tree(ff, 100000);
  CHECK(tree_to_string(fixed_mpd.result) == "(S (A a) (B b))");
  CHECK(fixed_mpd.probability == doctest::Approx(2.0 / 17).epsilon(1e-12));
  CHECK(tree_to_string(fixed_mpt.tree) == "(S (C (A a)) (D (B b)))");
  CHECK(fixed_mpt.probability == doctest::Approx(9.0 / 17).epsilon(1e-12));
  CHECK(tree_probability(parse_bracketed("(S (A a) (B b))")[0], ff) ==
        doctest::Approx(8.0 / 17).epsilon(1e-12));
}

TEST_CASE("cyclic unary fragments are reported, not summed") {
  Stsg g = grammar_of("(A (B (A a)))");
  DerivationForest f(g, {"a"});
  CHECK_THROWS_AS(f.inside_mass(), CyclicGrammar);
}
