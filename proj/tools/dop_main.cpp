// dop: treebank in, grammars and parses out.
//
// Subcommands: extract, reduce, parse, evaluate, split, analyze. Outputs are
// deterministic for a fixed command line (including seeds and --workers).

#include <atomic>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "dop/errors.hpp"
#include "dop/eval.hpp"
#include "dop/inside_outside.hpp"
#include "dop/parser.hpp"
#include "dop/reduction.hpp"
#include "dop/stsg.hpp"
#include "dop/treebank.hpp"

namespace {

using namespace dop;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp);
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot move output to " + path);
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty())
    std::cout << content;
  else
    write_atomic(out_path, content);
}

std::string read_file(const std::string& path) {
  if (path == "-") {
    std::ostringstream buf;
    buf << std::cin.rdbuf();
    return buf.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

enum class ModelKind { kTreebank, kStsgFile, kRuleFile };

ModelKind detect_model(const std::string& content) {
  if (content.rfind("stsg\t1", 0) == 0) return ModelKind::kStsgFile;
  if (content.rfind("pcfg\t1", 0) == 0) return ModelKind::kRuleFile;
  return ModelKind::kTreebank;
}

EpsilonMode parse_epsilon_mode(const std::string& mode) {
  if (mode == "strip") return EpsilonMode::kStrip;
  if (mode == "keep") return EpsilonMode::kKeep;
  throw CLI::ValidationError("--epsilon-mode must be strip or keep");
}

Corpus load_normalized_corpus(const std::string& text, EpsilonMode mode,
                              const std::string& eps_token) {
  Corpus corpus = parse_bracketed(text);
  if (mode == EpsilonMode::kKeep) return corpus;
  Corpus normalized;
  normalized.reserve(corpus.size());
  for (const Tree& tree : corpus) normalized.push_back(normalize_epsilon(tree, mode, eps_token));
  return normalized;
}

std::vector<std::string> tokenize(const std::string& sentence) {
  std::istringstream in(sentence);
  std::vector<std::string> words;
  std::string word;
  while (in >> word) words.push_back(word);
  return words;
}

// Runs fn(i) over [0, n) on `workers` threads; any exception is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n == 0 ? 1 : n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct ParseOptions {
  std::string method = "mpd";
  std::size_t samples = 10000;
  std::optional<std::uint64_t> seed;
  bool sequential = false;
  std::uint64_t budget = 1000000;
  int max_depth = 0;
  std::size_t workers = 1;
};

// One sentence parsed under one method against whichever model is loaded.
struct MethodResult {
  std::optional<Tree> tree;
  std::vector<std::pair<std::string, std::string>> fields;
};

class Model {
 public:
  Model(const std::string& content, const ParseOptions& opt, EpsilonMode eps_mode,
        const std::string& eps_token, const std::optional<std::string>& start) {
    kind_ = detect_model(content);
    bool stsg_method = opt.method == "mpd" || opt.method == "mpt-exact" || opt.method == "mpt-mc";
    switch (kind_) {
      case ModelKind::kTreebank: {
        Corpus corpus = load_normalized_corpus(content, eps_mode, eps_token);
        if (corpus.empty()) throw EmptyCorpus();
        if (stsg_method)
          stsg_ = extract_subtrees(corpus, opt.max_depth, start);
        else
          pcfg_ = reduce(corpus, opt.max_depth, start);
        // Production inventory for structural-consistency checks.
        producibility_check_ = extract_subtrees(corpus, 1, start);
        break;
      }
      case ModelKind::kStsgFile:
        if (!stsg_method)
          throw Error("method " + opt.method +
                      " needs a treebank or a rule file; a fragment bank has no node counts");
        stsg_ = load_grammar(content);
        producibility_check_ = stsg_;
        break;
      case ModelKind::kRuleFile:
        if (stsg_method) throw Error("method " + opt.method + " needs a treebank or .stsg grammar");
        pcfg_ = load_rules(content);
        break;
    }
  }

  MethodResult run(const std::vector<std::string>& words, const ParseOptions& opt) const {
    MethodResult res;
    try {
      if (opt.method == "mpd" || opt.method == "mpt-exact" || opt.method == "mpt-mc") {
        DerivationForest forest(*stsg_, words);
        if (forest.empty()) return res;
        if (opt.method == "mpd") {
          Derivation d = most_probable_derivation(forest);
          res.tree = d.result;
          res.fields = {{"probability", fmt(d.probability)},
                        {"steps", std::to_string(d.steps.size())}};
        } else if (opt.method == "mpt-exact") {
          ExactMptResult mpt = exact_most_probable_tree(forest, opt.budget);
          res.tree = mpt.tree;
          res.fields = {{"probability", fmt(mpt.probability)}, {"tied", mpt.tied ? "yes" : "no"}};
        } else {
          MonteCarloResult mc =
              opt.sequential ? monte_carlo_mpt_sequential(forest, opt.samples, 256, *opt.seed)
                             : monte_carlo_mpt(forest, opt.samples, *opt.seed);
          res.tree = mc.tree;
          res.fields = {{"frequency", fmt(mc.frequency)},
                        {"standard_error", fmt(mc.standard_error)},
                        {"samples", std::to_string(mc.samples)},
                        {"contested", mc.contested ? "yes" : "no"}};
        }
      } else if (opt.method == "pcfg-viterbi") {
        auto [tree, prob] = pcfg_viterbi(*pcfg_, words);
        res.tree = tree;
        res.fields = {{"probability", fmt(prob)}};
      } else if (opt.method == "mcp") {
        InsideOutsideTables tables = inside(*pcfg_, words);
        if (!(tables.sentence_mass > 0.0)) return res;
        outside(*pcfg_, tables);
        ConstituentPosterior post = constituent_posteriors(tables, *pcfg_);
        Tree tree = maximum_constituents_parse(post, words);
        double score = maximum_constituents_score(post, words);
        res.tree = tree;
        res.fields = {{"mcp_score", fmt(score)}, {"sentence_mass", fmt(tables.sentence_mass)}};
      } else {
        throw Error("unknown method " + opt.method);
      }
    } catch (const NoParse&) {
      return res;
    } catch (const UnknownWord&) {
      return res;
    }
    return res;
  }

  // Whether gold sits in the model's parse set: its root is the start symbol
  // and every production occurs in the bank. Exact for DOP1 grammars of any
  // depth cap; unavailable for bare rule files.
  std::optional<bool> gold_among_found(const Tree& gold) const {
    if (!producibility_check_) return std::nullopt;
    return gold.label == producibility_check_->start_symbol() &&
           is_producible(gold, *producibility_check_);
  }

 private:
  ModelKind kind_;
  std::optional<Stsg> stsg_;
  std::optional<IndexedPcfg> pcfg_;
  std::optional<Stsg> producibility_check_;
};

std::string render_result(const std::string& sentence, const std::string& method,
                          const MethodResult& res) {
  std::string out;
  out += "sentence\t" + sentence + "\n";
  out += "method\t" + method + "\n";
  if (!res.tree) {
    out += "no-parse\ttrue\n";
  } else {
    out += "tree\t" + tree_to_string(*res.tree) + "\n";
    for (const auto& [key, value] : res.fields) out += key + "\t" + value + "\n";
  }
  out += "\n";
  return out;
}

int command_extract(const std::string& corpus_path, int max_depth,
                    const std::optional<std::string>& start, const std::string& eps_mode,
                    const std::string& eps_token, const std::string& out_path) {
  Corpus corpus = load_normalized_corpus(read_file(corpus_path), parse_epsilon_mode(eps_mode),
                                         eps_token);
  Stsg grammar = extract_subtrees(corpus, max_depth, start);
  emit(out_path, serialize_grammar(grammar));
  return 0;
}

int command_reduce(const std::string& corpus_path, int max_depth,
                   const std::optional<std::string>& start, const std::string& eps_mode,
                   const std::string& eps_token, const std::string& out_path) {
  Corpus corpus = load_normalized_corpus(read_file(corpus_path), parse_epsilon_mode(eps_mode),
                                         eps_token);
  IndexedPcfg pcfg = reduce(corpus, max_depth, start);
  emit(out_path, serialize_rules(pcfg));
  return 0;
}

int command_parse(const std::string& model_path, std::vector<std::string> sentences,
                  const std::string& input_path, const ParseOptions& opt,
                  const std::optional<std::string>& start, const std::string& eps_mode,
                  const std::string& eps_token, const std::string& out_path) {
  if (!input_path.empty()) {
    std::istringstream in(read_file(input_path));
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) sentences.push_back(line);
  }
  if (sentences.empty()) throw Error("no sentences to parse");
  Model model(read_file(model_path), opt, parse_epsilon_mode(eps_mode), eps_token, start);

  std::vector<MethodResult> results(sentences.size());
  parallel_for(sentences.size(), opt.workers,
               [&](std::size_t i) { results[i] = model.run(tokenize(sentences[i]), opt); });

  std::string out;
  bool any_parse = false;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    any_parse |= results[i].tree.has_value();
    out += render_result(sentences[i], opt.method, results[i]);
  }
  emit(out_path, out);
  return any_parse ? 0 : 1;
}

int command_evaluate(const std::string& model_path, const std::string& test_path,
                     const ParseOptions& opt, const std::optional<std::string>& start,
                     const std::string& eps_mode, const std::string& eps_token,
                     const std::string& out_path) {
  EpsilonMode mode = parse_epsilon_mode(eps_mode);
  Model model(read_file(model_path), opt, mode, eps_token, start);
  Corpus test = load_normalized_corpus(read_file(test_path), mode, eps_token);
  if (test.empty()) throw EmptyCorpus();

  std::vector<SentenceResult> results(test.size());
  parallel_for(test.size(), opt.workers, [&](std::size_t i) {
    SentenceResult r;
    r.gold = test[i];
    MethodResult m = model.run(yield_of(test[i]), opt);
    r.proposed = m.tree;
    r.gold_among_found = model.gold_among_found(test[i]);
    if (r.gold_among_found && !r.parsable()) r.gold_among_found = false;
    results[i] = std::move(r);
  });

  EvalReport report = evaluate(results);
  std::string out = report_to_table(report) + "\n" + report_to_kv(report);
  emit(out_path, out);
  return report.coverage > 0.0 ? 0 : 1;
}

int command_split(const std::string& corpus_path, double fraction, std::uint64_t seed,
                  const std::string& train_out, const std::string& test_out) {
  Corpus corpus = parse_bracketed(read_file(corpus_path));
  auto [train, test] = random_split(corpus, fraction, seed);
  write_atomic(train_out, corpus_to_string(train));
  write_atomic(test_out, corpus_to_string(test));
  return 0;
}

int command_analyze(const std::string& corpus_path, double fraction, std::size_t trials,
                    double threshold, std::uint64_t seed, const std::string& eps_mode,
                    const std::string& eps_token, const std::string& out_path) {
  Corpus corpus = load_normalized_corpus(read_file(corpus_path), parse_epsilon_mode(eps_mode),
                                         eps_token);
  std::vector<double> estimates = producibility_simulation(corpus, fraction, trials, seed);

  // The seeded canonical split picks the test set the tail is computed over.
  std::vector<bool> mask = split_test_mask(corpus.size(), fraction, seed);
  std::vector<double> test_probs;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (mask[i]) test_probs.push_back(estimates[i]);

  double raw = threshold * static_cast<double>(test_probs.size());
  auto min_successes = static_cast<std::size_t>(std::max(0.0, std::ceil(raw - 1e-9)));
  SplitAnalysis analysis = make_split_analysis(std::move(test_probs), threshold);

  std::string out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out += "sentence\t" + std::to_string(i) + "\testimate\t" + fmt(estimates[i]) + "\tin-test\t" +
           (mask[i] ? "yes" : "no") + "\n";
  }
  out += "trials\t" + std::to_string(trials) + "\n";
  out += "seed\t" + std::to_string(seed) + "\n";
  out += "test_size\t" + std::to_string(analysis.per_sentence_producibility.size()) + "\n";
  out += "threshold\t" + fmt(threshold) + "\n";
  out += "min_successes\t" + std::to_string(min_successes) + "\n";
  out += "tail_probability\t" + fmt(analysis.tail_probability) + "\n";
  emit(out_path, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-oriented parsing over all-subtrees tree-substitution grammars"};
  app.require_subcommand(1);

  std::string corpus_path, model_path, test_path, input_path, out_path;
  std::string train_out, test_out;
  std::string eps_mode = "strip";
  std::string eps_token = kDefaultEpsilonToken;
  std::optional<std::string> start;
  ParseOptions opt;
  std::vector<std::string> sentences;
  double fraction = 0.1;
  double threshold = 0.96;
  std::size_t trials = 1000;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* cmd, bool with_depth) {
    cmd->add_option("--epsilon-mode", eps_mode, "strip | keep (default strip)");
    cmd->add_option("--epsilon-token", eps_token, "reserved empty-element token");
    if (with_depth)
      cmd->add_option("--max-depth", opt.max_depth, "fragment depth cap; 0 = unbounded")
          ->check(CLI::NonNegativeNumber);
  };

  CLI::App* extract = app.add_subcommand("extract", "treebank -> .stsg fragment bank");
  extract->add_option("corpus", corpus_path)->required();
  extract->add_option("--start-symbol", [&](const auto& v) { start = v[0]; return true; },
                      "override the start symbol");
  extract->add_option("-o,--output", out_path);
  add_common(extract, true);

  CLI::App* reduce_cmd = app.add_subcommand("reduce", "treebank -> node-indexed PCFG rule file");
  reduce_cmd->add_option("corpus", corpus_path)->required();
  reduce_cmd->add_option("--start-symbol", [&](const auto& v) { start = v[0]; return true; }, "");
  reduce_cmd->add_option("-o,--output", out_path);
  add_common(reduce_cmd, true);

  CLI::App* parse_cmd = app.add_subcommand("parse", "parse sentences with a model");
  parse_cmd->add_option("model", model_path, "treebank, .stsg, or rule file")->required();
  parse_cmd->add_option("sentences", sentences, "sentences (space-separated tokens)");
  parse_cmd->add_option("--input", input_path, "file with one sentence per line");
  parse_cmd->add_option("--method", opt.method, "mpd | mpt-exact | mpt-mc | mcp | pcfg-viterbi");
  parse_cmd->add_option("--samples", opt.samples);
  parse_cmd->add_option("--seed", [&](const auto& v) { seed = std::stoull(v[0]); return true; },
                        "RNG seed (required for mpt-mc)");
  parse_cmd->add_flag("--sequential", opt.sequential, "stop sampling at 3 combined SEs");
  parse_cmd->add_option("--budget", opt.budget, "exact-MPT enumeration budget");
  parse_cmd->add_option("--workers", opt.workers);
  parse_cmd->add_option("--start-symbol", [&](const auto& v) { start = v[0]; return true; }, "");
  parse_cmd->add_option("-o,--output", out_path);
  add_common(parse_cmd, true);

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "parse a test treebank and report metrics");
  eval_cmd->add_option("model", model_path)->required();
  eval_cmd->add_option("test", test_path)->required();
  eval_cmd->add_option("--method", opt.method);
  eval_cmd->add_option("--samples", opt.samples);
  eval_cmd->add_option("--seed", [&](const auto& v) { seed = std::stoull(v[0]); return true; }, "");
  eval_cmd->add_option("--budget", opt.budget);
  eval_cmd->add_option("--workers", opt.workers);
  eval_cmd->add_option("--start-symbol", [&](const auto& v) { start = v[0]; return true; }, "");
  eval_cmd->add_option("-o,--output", out_path);
  add_common(eval_cmd, true);

  CLI::App* split_cmd = app.add_subcommand("split", "seeded random train/test split");
  split_cmd->add_option("corpus", corpus_path)->required();
  split_cmd->add_option("--test-fraction", fraction)->required();
  split_cmd->add_option("--seed", [&](const auto& v) { seed = std::stoull(v[0]); return true; })
      ->required();
  split_cmd->add_option("--train-out", train_out)->required();
  split_cmd->add_option("--test-out", test_out)->required();

  CLI::App* analyze_cmd =
      app.add_subcommand("analyze", "producibility simulation and chance-of-test-set tail");
  analyze_cmd->add_option("corpus", corpus_path)->required();
  analyze_cmd->add_option("--test-fraction", fraction);
  analyze_cmd->add_option("--trials", trials);
  analyze_cmd->add_option("--threshold", threshold, "required parse-accuracy fraction");
  analyze_cmd->add_option("--seed", [&](const auto& v) { seed = std::stoull(v[0]); return true; })
      ->required();
  analyze_cmd->add_option("-o,--output", out_path);
  add_common(analyze_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2; --help exits 0
  }

  // The producibility analysis is about subtree statistics, where empty
  // elements count; surface parsing strips them.
  if (analyze_cmd->parsed() && analyze_cmd->count("--epsilon-mode") == 0) eps_mode = "keep";

  try {
    if (extract->parsed())
      return command_extract(corpus_path, opt.max_depth, start, eps_mode, eps_token, out_path);
    if (reduce_cmd->parsed())
      return command_reduce(corpus_path, opt.max_depth, start, eps_mode, eps_token, out_path);
    if (parse_cmd->parsed() || eval_cmd->parsed()) {
      if (opt.method == "mpt-mc") {
        if (!seed) {
          std::cerr << "error: --method mpt-mc draws samples; provide an explicit --seed\n";
          return 2;
        }
        opt.seed = seed;
      }
      if (parse_cmd->parsed())
        return command_parse(model_path, sentences, input_path, opt, start, eps_mode, eps_token,
                             out_path);
      return command_evaluate(model_path, test_path, opt, start, eps_mode, eps_token, out_path);
    }
    if (split_cmd->parsed()) return command_split(corpus_path, fraction, *seed, train_out, test_out);
    if (analyze_cmd->parsed())
      return command_analyze(corpus_path, fraction, trials, threshold, *seed, eps_mode, eps_token,
                             out_path);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
