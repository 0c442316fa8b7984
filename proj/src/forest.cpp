#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

#include "dop/errors.hpp"
#include "dop/parser.hpp"
#include "forest_detail.hpp"

namespace dop {

DerivationForest::DerivationForest(const Stsg& grammar, std::vector<std::string> sentence)
    : grammar_(&grammar), sentence_(std::move(sentence)) {
  if (sentence_.empty()) throw Error("cannot parse an empty sentence");
  build();
}

DerivationForest::DerivationForest(DerivationForest&&) noexcept = default;
DerivationForest& DerivationForest::operator=(DerivationForest&&) noexcept = default;
DerivationForest::~DerivationForest() = default;

void DerivationForest::build() {
  // Lexicon check before anything else.
  std::set<std::string> lexicon;
  for (const auto& [key, entry] : grammar_->entries())
    for (const Symbol& sym : frontier_of(entry.fragment))
      if (sym.terminal) lexicon.insert(sym.text);
  for (std::size_t i = 0; i < sentence_.size(); ++i)
    if (!lexicon.count(sentence_[i])) throw UnknownWord(sentence_[i], i);

  // Compile fragments whose frontier terminals all occur in the sentence.
  std::set<std::string> words(sentence_.begin(), sentence_.end());
  for (const auto& [key, entry] : grammar_->entries()) {
    Fragment f;
    f.frontier = frontier_of(entry.fragment);
    bool usable = true;
    for (const Symbol& sym : f.frontier)
      if (sym.terminal && !words.count(sym.text)) usable = false;
    if (!usable) continue;
    f.tree = entry.fragment;
    f.canonical = key;
    f.log_prob = grammar_->log_probability(key);
    f.prob = grammar_->probability(key);
    fragments_.push_back(std::move(f));
  }

  const int n = static_cast<int>(sentence_.size());
  std::map<std::tuple<int, int, int, int>, int> partial_index;  // (frag, dot, start, end)
  std::map<std::tuple<int, int, int>, int> complete_index;      // (start, end, label id)
  std::map<std::string, int> label_ids;
  std::vector<std::string> label_names;
  auto label_id = [&](const std::string& s) {
    auto [it, fresh] = label_ids.try_emplace(s, static_cast<int>(label_names.size()));
    if (fresh) label_names.push_back(s);
    return it->second;
  };

  // waiting[(end, label id)]: partials whose next frontier symbol is a site.
  std::map<std::pair<int, int>, std::vector<int>> waiting;
  // scanning[(end, word)]: partials whose next frontier symbol is a terminal.
  std::map<std::pair<int, std::string>, std::vector<int>> scanning;

  auto index_partial = [&](int p) {
    const Partial& part = partials_[p];
    const Symbol& next = fragments_[part.frag].frontier[part.dot];
    if (next.terminal)
      scanning[{part.end, next.text}].push_back(p);
    else
      waiting[{part.end, label_id(next.text)}].push_back(p);
  };

  std::deque<int> fresh_partials;
  std::deque<int> fresh_completes;

  auto get_or_extend_partial = [&](int frag, int dot, int start, int end, int prev,
                                   int complete) {
    auto key = std::make_tuple(frag, dot, start, end);
    auto it = partial_index.find(key);
    if (it == partial_index.end()) {
      Partial part;
      part.frag = frag;
      part.dot = dot;
      part.start = start;
      part.end = end;
      if (prev >= 0) part.incoming.push_back({prev, complete});
      int id = static_cast<int>(partials_.size());
      partials_.push_back(std::move(part));
      partial_index.emplace(key, id);
      fresh_partials.push_back(id);
    } else if (prev >= 0) {
      partials_[it->second].incoming.push_back({prev, complete});
    }
  };

  for (int i = 0; i < n; ++i)
    for (int f = 0; f < static_cast<int>(fragments_.size()); ++f)
      get_or_extend_partial(f, 0, i, i, -1, -1);
  // Initial states are indexed as part of the first boundary's worklist.

  for (int j = 0; j <= n; ++j) {
    if (j > 0)
      if (auto it = scanning.find({j - 1, sentence_[j - 1]}); it != scanning.end())
        for (int p : it->second) {
          const Partial& part = partials_[p];
          get_or_extend_partial(part.frag, part.dot + 1, part.start, j, p, -1);
        }
    while (!fresh_partials.empty() || !fresh_completes.empty()) {
      if (!fresh_partials.empty()) {
        int p = fresh_partials.front();
        fresh_partials.pop_front();
        const Partial part = partials_[p];
        const Fragment& frag = fragments_[part.frag];
        if (part.dot == static_cast<int>(frag.frontier.size())) {
          int lid = label_id(frag.tree.label);
          auto key = std::make_tuple(part.start, part.end, lid);
          auto it = complete_index.find(key);
          int c;
          if (it == complete_index.end()) {
            Complete comp;
            comp.start = part.start;
            comp.end = part.end;
            comp.label = frag.tree.label;
            c = static_cast<int>(completes_.size());
            completes_.push_back(std::move(comp));
            complete_index.emplace(key, c);
            fresh_completes.push_back(c);
          } else {
            c = it->second;
          }
          completes_[c].edges.push_back({part.frag, p});
        } else {
          index_partial(p);
        }
        continue;
      }
      int c = fresh_completes.front();
      fresh_completes.pop_front();
      const Complete& comp = completes_[c];
      int lid = label_id(comp.label);
      if (auto it = waiting.find({comp.start, lid}); it != waiting.end())
        for (int p : it->second) {
          const Partial& part = partials_[p];
          get_or_extend_partial(part.frag, part.dot + 1, part.start, comp.end, p, c);
        }
    }
  }

  auto it = complete_index.find(std::make_tuple(0, n, label_id(grammar_->start_symbol())));
  start_item_ = it == complete_index.end() ? -1 : it->second;
}

void DerivationForest::ensure_inside() const {
  if (inside_ready_) return;
  inside_complete_.assign(completes_.size(), 0.0);
  inside_partial_.assign(partials_.size(), 0.0);
  state_complete_.assign(completes_.size(), 0);
  state_partial_.assign(partials_.size(), 0);
  if (start_item_ >= 0) inside_of_complete(start_item_);
  inside_ready_ = true;
}

double DerivationForest::inside_of_complete(int c) const {
  if (state_complete_[c] == 2) return inside_complete_[c];
  if (state_complete_[c] == 1) throw CyclicGrammar();
  state_complete_[c] = 1;
  double total = 0.0;
  for (const auto& edge : completes_[c].edges)
    total += fragments_[edge.frag].prob * inside_of_partial(edge.final_partial);
  inside_complete_[c] = total;
  state_complete_[c] = 2;
  return total;
}

double DerivationForest::inside_of_partial(int p) const {
  if (state_partial_[p] == 2) return inside_partial_[p];
  if (state_partial_[p] == 1) throw CyclicGrammar();
  state_partial_[p] = 1;
  const Partial& part = partials_[p];
  double total = 0.0;
  if (part.dot == 0) {
    total = 1.0;
  } else {
    for (const auto& in : part.incoming) {
      double mass = inside_of_partial(in.prev);
      if (in.complete >= 0) mass *= inside_of_complete(in.complete);
      total += mass;
    }
  }
  inside_partial_[p] = total;
  state_partial_[p] = 2;
  return total;
}

double DerivationForest::inside_mass() const {
  if (start_item_ < 0) return 0.0;
  ensure_inside();
  return inside_complete_[start_item_];
}

namespace {

constexpr std::uint64_t kSat = std::numeric_limits<std::uint64_t>::max() / 2;

std::uint64_t cap_add(std::uint64_t a, std::uint64_t b, std::uint64_t cap) {
  std::uint64_t c = std::min(cap, kSat);
  return (a > c - std::min(b, c)) ? c : std::min(a + b, c);
}

std::uint64_t cap_mul(std::uint64_t a, std::uint64_t b, std::uint64_t cap) {
  std::uint64_t c = std::min(cap, kSat);
  if (a == 0 || b == 0) return 0;
  if (a > c / b) return c;
  return std::min(a * b, c);
}

}  // namespace

std::uint64_t DerivationForest::derivation_count(std::uint64_t cap) const {
  if (start_item_ < 0) return 0;
  ensure_inside();  // also proves acyclicity before the uncached recursion
  // Memoized counting mirrors the inside recursion.
  std::vector<std::uint64_t> memo_c(completes_.size(), UINT64_MAX);
  std::vector<std::uint64_t> memo_p(partials_.size(), UINT64_MAX);
  std::function<std::uint64_t(int)> cc, cp;
  cc = [&](int c) -> std::uint64_t {
    if (memo_c[c] != UINT64_MAX) return memo_c[c];
    std::uint64_t total = 0;
    for (const auto& edge : completes_[c].edges)
      total = cap_add(total, cp(edge.final_partial), cap);
    return memo_c[c] = total;
  };
  cp = [&](int p) -> std::uint64_t {
    if (memo_p[p] != UINT64_MAX) return memo_p[p];
    const Partial& part = partials_[p];
    if (part.dot == 0) return memo_p[p] = 1;
    std::uint64_t total = 0;
    for (const auto& in : part.incoming) {
      std::uint64_t ways = cp(in.prev);
      if (in.complete >= 0) ways = cap_mul(ways, cc(in.complete), cap);
      total = cap_add(total, ways, cap);
    }
    return memo_p[p] = total;
  };
  return cc(start_item_);
}

DerivationForest build_forest(const Stsg& grammar, const std::vector<std::string>& sentence) {
  return DerivationForest(grammar, sentence);
}

}  // namespace dop
