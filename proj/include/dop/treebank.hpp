#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dop/tree.hpp"

namespace dop {

using Corpus = std::vector<Tree>;

inline constexpr const char* kDefaultEpsilonToken = "-EPS-";

enum class EpsilonMode { kStrip, kKeep };

/// Reads a whitespace-separated sequence of bracketed trees. Blank lines are
/// ignored and ";" starts a comment line. Every tree is validated: internal
/// nodes have at least one child, terminals appear only as the single child
/// of a preterminal, and no symbol contains bracket characters.
Corpus parse_bracketed(const std::string& text);

Corpus load_corpus(std::istream& in);
Corpus load_corpus_file(const std::string& path);
std::string corpus_to_string(const Corpus& corpus);

/// strip removes every subtree whose yield consists entirely of the epsilon
/// token, recursively removing nodes left childless; keep is the identity.
/// Throws EmptyTreeAfterStrip if the whole tree is epsilon-yield.
Tree normalize_epsilon(const Tree& tree, EpsilonMode mode,
                       const std::string& epsilon_token = kDefaultEpsilonToken);

/// Yield with epsilon leaves excluded in strip mode.
std::vector<std::string> yield_of(const Tree& tree, EpsilonMode mode,
                                  const std::string& epsilon_token = kDefaultEpsilonToken);

/// Deterministic seeded partition. Test size is round(n * test_fraction);
/// both sides keep the corpus order of their members.
std::pair<Corpus, Corpus> random_split(const Corpus& corpus, double test_fraction,
                                       std::uint64_t seed);

/// The test-membership indicator used by random_split, exposed so analyses
/// can rerun many splits without copying trees.
std::vector<bool> split_test_mask(std::size_t n, double test_fraction, std::uint64_t seed);

}  // namespace dop
