"""Data-oriented parsing: every treebank subtree is a grammar unit."""

try:
    from . import _dop as _impl  # installed layout: extension inside the package
except ImportError:  # build-tree layout: extension beside the package on sys.path
    import _dop as _impl

Tree = _impl.Tree
Stsg = _impl.Stsg
Derivation = _impl.Derivation
DerivationForest = _impl.DerivationForest
ExactMptResult = _impl.ExactMptResult
MonteCarloResult = _impl.MonteCarloResult
IndexedPcfg = _impl.IndexedPcfg
DopError = _impl.DopError

parse_corpus = _impl.parse_corpus
normalize_epsilon = _impl.normalize_epsilon
random_split = _impl.random_split
extract_subtrees = _impl.extract_subtrees
subtree_count_per_node = _impl.subtree_count_per_node
total_fragment_count = _impl.total_fragment_count
load_grammar = _impl.load_grammar
reduce = _impl.reduce
load_rules = _impl.load_rules
project = _impl.project
sentence_mass = _impl.sentence_mass
pcfg_viterbi = _impl.pcfg_viterbi
constituent_posteriors = _impl.constituent_posteriors
maximum_constituents_parse = _impl.maximum_constituents_parse
crossing_brackets = _impl.crossing_brackets
poisson_binomial_tail = _impl.poisson_binomial_tail
producibility_simulation = _impl.producibility_simulation
chance_of_test_set = _impl.chance_of_test_set

__version__ = _impl.__version__

__all__ = [name for name in dir() if not name.startswith("_")]
