#pragma once

// Private chart internals shared by forest.cpp and parser.cpp.

#include <string>
#include <vector>

#include "dop/parser.hpp"

namespace dop {

struct DerivationForest::Fragment {
  Tree tree;
  std::string canonical;
  std::vector<Symbol> frontier;
  double log_prob = 0.0;
  double prob = 0.0;
};

// Dotted item: the first `dot` frontier symbols of `frag` match (start, end).
struct DerivationForest::Partial {
  int frag = -1;
  int dot = 0;
  int start = 0;
  int end = 0;
  struct In {
    int prev;      // predecessor partial
    int complete;  // complete item consumed by this step, -1 for a terminal
  };
  std::vector<In> incoming;
};

struct DerivationForest::Complete {
  int start = 0;
  int end = 0;
  std::string label;
  struct Edge {
    int frag;
    int final_partial;
  };
  std::vector<Edge> edges;
};

struct ForestOps {
  static const std::vector<DerivationForest::Fragment>& fragments(const DerivationForest& f) {
    return f.fragments_;
  }
  static const std::vector<DerivationForest::Partial>& partials(const DerivationForest& f) {
    return f.partials_;
  }
  static const std::vector<DerivationForest::Complete>& completes(const DerivationForest& f) {
    return f.completes_;
  }
  static int start_item(const DerivationForest& f) { return f.start_item_; }
  static double inside_complete(const DerivationForest& f, int c) {
    f.ensure_inside();
    return f.inside_complete_[c];
  }
  static double inside_partial(const DerivationForest& f, int p) {
    f.ensure_inside();
    return f.inside_partial_[p];
  }
};

}  // namespace dop
