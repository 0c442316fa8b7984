#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>

#include "dop/errors.hpp"
#include "dop/parser.hpp"
#include "forest_detail.hpp"

namespace dop {

namespace {

constexpr char kSep = '\x1f';

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) {
  return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

// Replaces the fragment's substitution sites, left to right, by the results
// of the site subderivations.
Tree substitute(const Tree& fragment, const std::vector<Tree>& fillers, std::size_t* next) {
  if (fragment.site()) return fillers.at((*next)++);
  Tree out;
  out.label = fragment.label;
  out.terminal = fragment.terminal;
  out.children.reserve(fragment.children.size());
  for (const Tree& child : fragment.children) out.children.push_back(substitute(child, fillers, next));
  return out;
}

Derivation assemble(const DerivationForest::Fragment& frag, std::vector<Derivation>&& sites) {
  Derivation d;
  d.steps.push_back(frag.tree);
  d.log_probability = frag.log_prob;
  std::vector<Tree> fillers;
  fillers.reserve(sites.size());
  for (Derivation& sub : sites) {
    d.log_probability += sub.log_probability;
    for (Tree& step : sub.steps) d.steps.push_back(std::move(step));
    fillers.push_back(std::move(sub.result));
  }
  std::size_t next = 0;
  d.result = substitute(frag.tree, fillers, &next);
  d.probability = std::exp(d.log_probability);
  return d;
}

}  // namespace

std::string Derivation::canonical() const {
  std::string out;
  for (const Tree& step : steps) {
    out += fragment_to_string(step);
    out += kSep;
  }
  return out;
}

void DerivationForest::for_each_derivation(const std::function<void(Derivation&&)>& fn) const {
  if (start_item_ < 0) return;
  ensure_inside();

  // Walk a final partial back to its init state, collecting the site
  // subderivations (right to left), then hand the reversed list on.
  std::function<void(int, const std::function<void(Derivation&&)>&)> derivations_of_complete;
  std::function<void(int, std::vector<Derivation>*, const std::function<void()>&)> paths;
  paths = [&](int p, std::vector<Derivation>* acc, const std::function<void()>& done) {
    const Partial& part = partials_[p];
    if (part.dot == 0) {
      done();
      return;
    }
    for (const auto& in : part.incoming) {
      if (in.complete < 0) {
        paths(in.prev, acc, done);
      } else {
        derivations_of_complete(in.complete, [&](Derivation&& sub) {
          acc->push_back(std::move(sub));
          paths(in.prev, acc, done);
          acc->pop_back();
        });
      }
    }
  };
  derivations_of_complete = [&](int c, const std::function<void(Derivation&&)>& emit) {
    for (const auto& edge : completes_[c].edges) {
      std::vector<Derivation> acc;
      paths(edge.final_partial, &acc, [&] {
        std::vector<Derivation> sites(acc.rbegin(), acc.rend());
        emit(assemble(fragments_[edge.frag], std::move(sites)));
      });
    }
  };
  derivations_of_complete(start_item_, fn);
}

std::vector<Derivation> enumerate_derivations(const DerivationForest& forest, std::uint64_t limit,
                                              bool allow_truncation) {
  std::uint64_t count = forest.derivation_count();
  if (count > limit && !allow_truncation) throw LimitExceeded(count);
  std::vector<Derivation> out;
  out.reserve(static_cast<std::size_t>(std::min(count, limit)));
  try {
    forest.for_each_derivation([&](Derivation&& d) {
      if (out.size() >= limit) throw LimitExceeded(count);
      out.push_back(std::move(d));
    });
  } catch (const LimitExceeded&) {
    if (!allow_truncation) throw;
  }
  std::stable_sort(out.begin(), out.end(), [](const Derivation& a, const Derivation& b) {
    if (a.log_probability != b.log_probability) return a.log_probability > b.log_probability;
    return a.canonical() < b.canonical();
  });
  return out;
}

Derivation DerivationForest::most_probable() const {
  if (start_item_ < 0) throw NoParse();
  ensure_inside();

  // Max-product over the same graph inside() sums over. Ties resolve to the
  // lexicographically least canonical step sequence; keys concatenate with a
  // separator so the order is consistent under composition.
  struct Best {
    double lp = 0.0;
    std::string key;
    int choice = -1;  // edge index (completes) or incoming index (partials)
  };
  std::vector<std::optional<Best>> best_c(completes_.size());
  std::vector<std::optional<Best>> best_p(partials_.size());

  std::function<const Best&(int)> solve_c, solve_p;
  solve_p = [&](int p) -> const Best& {
    if (best_p[p]) return *best_p[p];
    const Partial& part = partials_[p];
    Best best;
    if (part.dot == 0) {
      best_p[p] = std::move(best);
      return *best_p[p];
    }
    bool have = false;
    for (std::size_t k = 0; k < part.incoming.size(); ++k) {
      const auto& in = part.incoming[k];
      const Best& prev = solve_p(in.prev);
      double lp = prev.lp;
      std::string key = prev.key;
      if (in.complete >= 0) {
        const Best& sub = solve_c(in.complete);
        lp += sub.lp;
        key += sub.key;
      }
      if (!have || lp > best.lp || (lp == best.lp && key < best.key)) {
        best.lp = lp;
        best.key = std::move(key);
        best.choice = static_cast<int>(k);
        have = true;
      }
    }
    best_p[p] = std::move(best);
    return *best_p[p];
  };
  solve_c = [&](int c) -> const Best& {
    if (best_c[c]) return *best_c[c];
    Best best;
    bool have = false;
    for (std::size_t k = 0; k < completes_[c].edges.size(); ++k) {
      const auto& edge = completes_[c].edges[k];
      const Fragment& frag = fragments_[edge.frag];
      const Best& fin = solve_p(edge.final_partial);
      double lp = frag.log_prob + fin.lp;
      std::string key = frag.canonical + kSep + fin.key;
      if (!have || lp > best.lp || (lp == best.lp && key < best.key)) {
        best.lp = lp;
        best.key = std::move(key);
        best.choice = static_cast<int>(k);
        have = true;
      }
    }
    best_c[c] = std::move(best);
    return *best_c[c];
  };
  solve_c(start_item_);

  std::function<Derivation(int)> extract_c = [&](int c) -> Derivation {
    const auto& edge = completes_[c].edges[best_c[c]->choice];
    std::vector<Derivation> sites;
    int p = edge.final_partial;
    while (partials_[p].dot > 0) {
      const auto& in = partials_[p].incoming[best_p[p]->choice];
      if (in.complete >= 0) sites.push_back(extract_c(in.complete));
      p = in.prev;
    }
    std::reverse(sites.begin(), sites.end());
    return assemble(fragments_[edge.frag], std::move(sites));
  };
  return extract_c(start_item_);
}

Derivation most_probable_derivation(const DerivationForest& forest) {
  return forest.most_probable();
}

Derivation DerivationForest::sample(std::uint64_t& rng_state) const {
  if (start_item_ < 0) throw NoParse();
  ensure_inside();

  std::function<Derivation(int)> draw_c = [&](int c) -> Derivation {
    double target = uniform01(rng_state) * inside_complete_[c];
    double running = 0.0;
    const auto* chosen = &completes_[c].edges.back();
    for (const auto& edge : completes_[c].edges) {
      running += fragments_[edge.frag].prob * inside_partial_[edge.final_partial];
      if (running >= target) {
        chosen = &edge;
        break;
      }
    }
    std::vector<Derivation> sites;
    int p = chosen->final_partial;
    while (partials_[p].dot > 0) {
      double ptarget = uniform01(rng_state) * inside_partial_[p];
      double prunning = 0.0;
      const auto* pick = &partials_[p].incoming.back();
      for (const auto& in : partials_[p].incoming) {
        double mass = inside_partial_[in.prev];
        if (in.complete >= 0) mass *= inside_complete_[in.complete];
        prunning += mass;
        if (prunning >= ptarget) {
          pick = &in;
          break;
        }
      }
      if (pick->complete >= 0) sites.push_back(draw_c(pick->complete));
      p = pick->prev;
    }
    std::reverse(sites.begin(), sites.end());
    return assemble(fragments_[chosen->frag], std::move(sites));
  };
  return draw_c(start_item_);
}

Derivation sample_derivation(const DerivationForest& forest, std::uint64_t& rng_state) {
  return forest.sample(rng_state);
}

double tree_probability(const Tree& tree, const DerivationForest& forest) {
  const Stsg& grammar = forest.grammar();
  if (tree.label != grammar.start_symbol()) return 0.0;
  if (yield_of(tree) != forest.sentence()) return 0.0;

  // Sum over derivations of the tree: at each node, every bank fragment that
  // is a prefix of the tree contributes its probability times the mass of
  // the subderivations at its substitution sites.
  std::map<const Tree*, double> memo;
  std::function<double(const Tree&)> mass = [&](const Tree& node) -> double {
    if (auto it = memo.find(&node); it != memo.end()) return it->second;
    double total = 0.0;
    // Walk fragment and tree in lockstep; a site in the fragment points at
    // the tree node whose derivation mass multiplies in.
    std::function<double(const Tree&, const Tree&)> site_mass = [&](const Tree& frag,
                                                                    const Tree& at) -> double {
      if (frag.site()) return mass(at);
      double product = 1.0;
      for (std::size_t i = 0; i < frag.children.size(); ++i)
        product *= site_mass(frag.children[i], at.children[i]);
      return product;
    };
    for (const Tree& frag : fragments_rooted_at(node, grammar.max_depth())) {
      std::string key = fragment_to_string(frag);
      if (!grammar.contains(key)) continue;
      total += grammar.probability(key) * site_mass(frag, node);
    }
    memo[&node] = total;
    return total;
  };
  return mass(tree);
}

ExactMptResult exact_most_probable_tree(const DerivationForest& forest, std::uint64_t budget) {
  if (forest.empty()) throw NoParse();
  std::uint64_t count = forest.derivation_count();
  if (count > budget) throw BudgetExceeded(count);

  std::map<std::string, std::pair<Tree, double>> mass_by_tree;
  forest.for_each_derivation([&](Derivation&& d) {
    std::string key = tree_to_string(d.result);
    auto [it, fresh] = mass_by_tree.try_emplace(std::move(key));
    if (fresh) it->second.first = std::move(d.result);
    it->second.second += d.probability;
  });

  ExactMptResult out;
  double runner_up = -1.0;
  // std::map iteration is already in canonical order, so on equal mass the
  // canonically least tree wins.
  for (auto& [key, entry] : mass_by_tree) {
    if (entry.second > out.probability) {
      runner_up = out.probability;
      out.probability = entry.second;
      out.tree = std::move(entry.first);
    } else if (entry.second > runner_up) {
      runner_up = entry.second;
    }
  }
  out.tied = runner_up >= 0.0 && out.probability - runner_up <= 1e-12;
  return out;
}

namespace {

MonteCarloResult tally_to_result(const std::map<std::string, std::pair<Tree, std::size_t>>& tally,
                                 std::size_t samples) {
  MonteCarloResult out;
  std::size_t best = 0, second = 0;
  for (const auto& [key, entry] : tally) {
    if (entry.second > best) {
      second = best;
      best = entry.second;
      out.tree = entry.first;
    } else if (entry.second > second) {
      second = entry.second;
    }
  }
  out.samples = samples;
  out.frequency = static_cast<double>(best) / static_cast<double>(samples);
  out.standard_error =
      std::sqrt(out.frequency * (1.0 - out.frequency) / static_cast<double>(samples));
  double f2 = static_cast<double>(second) / static_cast<double>(samples);
  double se2 = std::sqrt(f2 * (1.0 - f2) / static_cast<double>(samples));
  double combined = std::sqrt(out.standard_error * out.standard_error + se2 * se2);
  out.contested = tally.size() > 1 && (out.frequency - f2) < 3.0 * combined;
  return out;
}

// Stream for sample s of seed: decorrelated by hashing the pair.
std::uint64_t sample_stream(std::uint64_t seed, std::uint64_t sample) {
  std::uint64_t state = seed ^ (0x9e3779b97f4a7c15ULL * (sample + 1));
  splitmix64(state);
  return state;
}

}  // namespace

MonteCarloResult monte_carlo_mpt(const DerivationForest& forest, std::size_t samples,
                                 std::uint64_t seed) {
  if (forest.empty()) throw NoParse();
  if (samples == 0) throw Error("samples must be >= 1");
  std::map<std::string, std::pair<Tree, std::size_t>> tally;
  for (std::size_t s = 0; s < samples; ++s) {
    std::uint64_t state = sample_stream(seed, s);
    Derivation d = forest.sample(state);
    std::string key = tree_to_string(d.result);
    auto [it, fresh] = tally.try_emplace(std::move(key));
    if (fresh) it->second.first = std::move(d.result);
    ++it->second.second;
  }
  return tally_to_result(tally, samples);
}

MonteCarloResult monte_carlo_mpt_sequential(const DerivationForest& forest,
                                            std::size_t max_samples, std::size_t batch,
                                            std::uint64_t seed) {
  if (forest.empty()) throw NoParse();
  if (max_samples == 0) throw Error("samples must be >= 1");
  batch = std::max<std::size_t>(1, batch);
  std::map<std::string, std::pair<Tree, std::size_t>> tally;
  std::size_t done = 0;
  while (done < max_samples) {
    std::size_t stop = std::min(max_samples, done + batch);
    for (; done < stop; ++done) {
      std::uint64_t state = sample_stream(seed, done);
      Derivation d = forest.sample(state);
      std::string key = tree_to_string(d.result);
      auto [it, fresh] = tally.try_emplace(std::move(key));
      if (fresh) it->second.first = std::move(d.result);
      ++it->second.second;
    }
    MonteCarloResult result = tally_to_result(tally, done);
    if (!result.contested) return result;
  }
  return tally_to_result(tally, done);
}

}  // namespace dop
