#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dop {

// Base class for all domain errors thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnbalancedBrackets : Error {
  std::size_t position;
  explicit UnbalancedBrackets(std::size_t pos)
      : Error("unbalanced brackets at offset " + std::to_string(pos)), position(pos) {}
};

struct EmptyNode : Error {
  std::size_t position;
  explicit EmptyNode(std::size_t pos)
      : Error("empty node at offset " + std::to_string(pos)), position(pos) {}
};

struct BadToken : Error {
  std::size_t position;
  BadToken(std::size_t pos, const std::string& what)
      : Error("bad token at offset " + std::to_string(pos) + ": " + what), position(pos) {}
};

struct EmptyTreeAfterStrip : Error {
  EmptyTreeAfterStrip() : Error("tree has an all-epsilon yield; nothing left after strip") {}
};

struct DegenerateSplit : Error {
  DegenerateSplit() : Error("split would leave an empty test or training set") {}
};

struct EmptyCorpus : Error {
  EmptyCorpus() : Error("corpus is empty") {}
};

struct UnknownElementaryTree : Error {
  explicit UnknownElementaryTree(const std::string& key)
      : Error("elementary tree not in grammar: " + key) {}
};

struct BadGrammarFile : Error {
  std::size_t line;
  BadGrammarFile(std::size_t line_no, const std::string& what)
      : Error("bad grammar file, line " + std::to_string(line_no) + ": " + what), line(line_no) {}
};

struct UnknownWord : Error {
  std::string word;
  std::size_t position;
  UnknownWord(std::string w, std::size_t pos)
      : Error("unknown word \"" + w + "\" at position " + std::to_string(pos)),
        word(std::move(w)),
        position(pos) {}
};

struct NoParse : Error {
  NoParse() : Error("sentence has no parse") {}
};

struct LimitExceeded : Error {
  std::uint64_t count;
  explicit LimitExceeded(std::uint64_t n)
      : Error("derivation count " + std::to_string(n) + " exceeds limit"), count(n) {}
};

struct BudgetExceeded : Error {
  std::uint64_t count;
  explicit BudgetExceeded(std::uint64_t n)
      : Error("derivation count " + std::to_string(n) + " exceeds enumeration budget"), count(n) {}
};

struct YieldMismatch : Error {
  YieldMismatch() : Error("trees have different yields") {}
};

struct BadProbability : Error {
  explicit BadProbability(double p)
      : Error("probability out of [0,1]: " + std::to_string(p)) {}
};

// Derivation sets are infinite when unary fragment chains form a label cycle.
struct CyclicGrammar : Error {
  CyclicGrammar() : Error("grammar admits cyclic unary derivations; derivation set is infinite") {}
};

}  // namespace dop
