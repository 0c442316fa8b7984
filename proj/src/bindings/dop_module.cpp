#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dop/errors.hpp"
#include "dop/eval.hpp"
#include "dop/inside_outside.hpp"
#include "dop/parser.hpp"
#include "dop/reduction.hpp"
#include "dop/stsg.hpp"
#include "dop/treebank.hpp"

namespace py = pybind11;
using namespace dop;

namespace {

EpsilonMode mode_from_string(const std::string& mode) {
  if (mode == "strip") return EpsilonMode::kStrip;
  if (mode == "keep") return EpsilonMode::kKeep;
  throw Error("epsilon mode must be 'strip' or 'keep'");
}

}  // namespace

PYBIND11_MODULE(_dop, m) {
  m.doc() = "Data-oriented parsing: all-subtrees tree-substitution grammars";

  py::register_exception<Error>(m, "DopError", PyExc_RuntimeError);

  py::class_<Tree>(m, "Tree")
      .def(py::init([](const std::string& text) { return parse_fragment(text); }), py::arg("text"))
      .def_readonly("label", &Tree::label)
      .def_readonly("terminal", &Tree::terminal)
      .def_readonly("children", &Tree::children)
      .def("is_leaf", &Tree::leaf)
      .def("is_site", &Tree::site)
      .def("yield_", [](const Tree& t) { return yield_of(t); })
      .def("productions",
           [](const Tree& t) {
             std::vector<std::pair<std::string, std::vector<std::string>>> out;
             for (const auto& p : productions(t)) {
               std::vector<std::string> rhs;
               for (const auto& sym : p.rhs) rhs.push_back(sym.text);
               out.emplace_back(p.lhs, std::move(rhs));
             }
             return out;
           })
      .def("depth", &depth_of)
      .def("__str__", [](const Tree& t) { return fragment_to_string(t); })
      .def("__repr__", [](const Tree& t) { return "Tree('" + fragment_to_string(t) + "')"; })
      .def("__eq__", [](const Tree& a, const Tree& b) { return a == b; });

  m.def("parse_corpus", &parse_bracketed, py::arg("text"),
        "Read a whitespace-separated sequence of bracketed trees");
  m.def(
      "normalize_epsilon",
      [](const Tree& t, const std::string& mode, const std::string& token) {
        return normalize_epsilon(t, mode_from_string(mode), token);
      },
      py::arg("tree"), py::arg("mode") = "strip", py::arg("token") = kDefaultEpsilonToken);
  m.def(
      "random_split",
      [](const Corpus& corpus, double fraction, std::uint64_t seed) {
        return random_split(corpus, fraction, seed);
      },
      py::arg("corpus"), py::arg("test_fraction"), py::arg("seed"));

  py::class_<Stsg>(m, "Stsg")
      .def_property_readonly("start_symbol", &Stsg::start_symbol)
      .def_property_readonly("max_depth", &Stsg::max_depth)
      .def("__len__", [](const Stsg& g) { return g.entries().size(); })
      .def("entries",
           [](const Stsg& g) {
             std::vector<std::pair<std::string, std::uint64_t>> out;
             for (const auto& [key, entry] : g.entries()) out.emplace_back(key, entry.count);
             return out;
           })
      .def("count",
           [](const Stsg& g, const std::string& key) {
             auto it = g.entries().find(key);
             return it == g.entries().end() ? std::uint64_t{0} : it->second.count;
           })
      .def("probability", py::overload_cast<const std::string&>(&Stsg::probability, py::const_))
      .def("root_total",
           [](const Stsg& g, const std::string& label) {
             auto it = g.root_totals().find(label);
             return it == g.root_totals().end() ? std::uint64_t{0} : it->second;
           })
      .def("is_producible", [](const Stsg& g, const Tree& t) { return is_producible(t, g); })
      .def("save", [](const Stsg& g) { return serialize_grammar(g); });

  m.def(
      "extract_subtrees",
      [](const Corpus& corpus, int max_depth, const std::optional<std::string>& start) {
        return extract_subtrees(corpus, max_depth, start);
      },
      py::arg("corpus"), py::arg("max_depth") = 0, py::arg("start_symbol") = std::nullopt);
  m.def("subtree_count_per_node", &subtree_count_per_node, py::arg("tree"),
        py::arg("max_depth") = 0);
  m.def("total_fragment_count", &total_fragment_count, py::arg("tree"), py::arg("max_depth") = 0);
  m.def("load_grammar", &load_grammar, py::arg("text"));

  py::class_<Derivation>(m, "Derivation")
      .def_readonly("steps", &Derivation::steps)
      .def_readonly("result", &Derivation::result)
      .def_readonly("probability", &Derivation::probability)
      .def_readonly("log_probability", &Derivation::log_probability);

  py::class_<MonteCarloResult>(m, "MonteCarloResult")
      .def_readonly("tree", &MonteCarloResult::tree)
      .def_readonly("frequency", &MonteCarloResult::frequency)
      .def_readonly("standard_error", &MonteCarloResult::standard_error)
      .def_readonly("samples", &MonteCarloResult::samples)
      .def_readonly("contested", &MonteCarloResult::contested);

  py::class_<ExactMptResult>(m, "ExactMptResult")
      .def_readonly("tree", &ExactMptResult::tree)
      .def_readonly("probability", &ExactMptResult::probability)
      .def_readonly("tied", &ExactMptResult::tied);

  py::class_<DerivationForest>(m, "DerivationForest")
      .def(py::init<const Stsg&, std::vector<std::string>>(), py::arg("grammar"),
           py::arg("sentence"), py::keep_alive<1, 2>())
      .def("empty", &DerivationForest::empty)
      .def("inside_mass", &DerivationForest::inside_mass)
      .def("derivation_count",
           [](const DerivationForest& f) { return f.derivation_count(); })
      .def("enumerate",
           [](const DerivationForest& f, std::uint64_t limit) {
             return enumerate_derivations(f, limit);
           },
           py::arg("limit") = 100000)
      .def("most_probable_derivation",
           [](const DerivationForest& f) { return most_probable_derivation(f); })
      .def("tree_probability",
           [](const DerivationForest& f, const Tree& t) { return tree_probability(t, f); })
      .def("exact_most_probable_tree",
           [](const DerivationForest& f, std::uint64_t budget) {
             return exact_most_probable_tree(f, budget);
           },
           py::arg("budget") = 1000000)
      .def("monte_carlo_mpt",
           [](const DerivationForest& f, std::size_t samples, std::uint64_t seed) {
             return monte_carlo_mpt(f, samples, seed);
           },
           py::arg("samples"), py::arg("seed"));

  py::class_<IndexedPcfg>(m, "IndexedPcfg")
      .def_property_readonly("start", &IndexedPcfg::start_name)
      .def("rule_count", [](const IndexedPcfg& g) { return g.rules().size(); })
      .def("save", [](const IndexedPcfg& g) { return serialize_rules(g); });

  m.def(
      "reduce",
      [](const Corpus& corpus, int max_depth, const std::optional<std::string>& start) {
        return reduce(corpus, max_depth, start);
      },
      py::arg("corpus"), py::arg("max_depth") = 0, py::arg("start_symbol") = std::nullopt);
  m.def("load_rules", &load_rules, py::arg("text"));
  m.def("project", &project, py::arg("indexed_tree"));

  m.def("sentence_mass", [](const IndexedPcfg& pcfg, const std::vector<std::string>& sentence) {
    return inside(pcfg, sentence).sentence_mass;
  });
  m.def("pcfg_viterbi", [](const IndexedPcfg& pcfg, const std::vector<std::string>& sentence) {
    return pcfg_viterbi(pcfg, sentence);
  });
  m.def(
      "constituent_posteriors",
      [](const IndexedPcfg& pcfg, const std::vector<std::string>& sentence) {
        InsideOutsideTables tables = inside(pcfg, sentence);
        std::map<std::tuple<int, int, std::string>, double> out;
        if (!(tables.sentence_mass > 0.0)) return out;
        outside(pcfg, tables);
        return constituent_posteriors(tables, pcfg).table;
      },
      py::arg("pcfg"), py::arg("sentence"));
  m.def(
      "maximum_constituents_parse",
      [](const IndexedPcfg& pcfg, const std::vector<std::string>& sentence, bool labeled) {
        InsideOutsideTables tables = inside(pcfg, sentence);
        if (!(tables.sentence_mass > 0.0)) throw NoParse();
        outside(pcfg, tables);
        ConstituentPosterior post = constituent_posteriors(tables, pcfg);
        return maximum_constituents_parse(post, sentence, labeled);
      },
      py::arg("pcfg"), py::arg("sentence"), py::arg("labeled") = true);

  m.def("crossing_brackets", &crossing_brackets, py::arg("gold"), py::arg("proposed"));
  m.def("poisson_binomial_tail", &poisson_binomial_tail, py::arg("probs"),
        py::arg("min_successes"));
  m.def("producibility_simulation", &producibility_simulation, py::arg("corpus"),
        py::arg("test_fraction"), py::arg("trials"), py::arg("seed"));
  m.def("chance_of_test_set",
        py::overload_cast<const std::vector<double>&, double>(&chance_of_test_set),
        py::arg("probs"), py::arg("threshold_fraction"));

  m.attr("__version__") = "0.1.0";
}
