#include "dekompost/cli.h"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <unordered_set>

#include "dekompost/common.h"
#include "dekompost/corpus.h"
#include "dekompost/embeddings.h"
#include "dekompost/evalx.h"
#include "dekompost/idiom.h"
#include "dekompost/model_file.h"
#include "dekompost/neuro.h"
#include "dekompost/splitters.h"
#include "dekompost/tokenize.h"

namespace dekompost::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kFormats = R"(File formats:
  split file       UTF-8 TSV: surface, modifier, head[, frequency]; '#' comments;
                   alternative modifier readings separated by '|'
  annotated file   UTF-8 TSV: frequency, surface, modifier, head, category (0-3)
  frequency file   UTF-8 TSV: word, count
  vector file      first line "count dim", then "word v1 ... v_dim"
  merges file      one "left right" pair per line in merge order
  transforms file  lines "strip:<suffix>", "add:<suffix>" or "deumlaut"
  features file    "# dim=<n> ..." header, then surface TAB label TAB space-separated values
  model file       binary "DKMP" container (labeler, logreg or gbdt)
  config file      "key = value" lines ('#' comments); keys are long flag names,
                   flags given on the command line win
Metric lines start with "RESULT " and hold key=value pairs.
Exit codes: 0 ok, 1 usage error, 2 data error.)";

struct SplitterOptions {
  std::string method;
  std::string model;
  std::string lexicon;
  std::string train;
  std::string transforms;
};

using Splitter = std::function<splitters::SplitResult(const std::string&)>;

std::string result_line(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string s = "RESULT";
  for (const auto& [k, v] : kv) s += " " + k + "=" + v;
  return s;
}

std::string num(double v) { return format_double(v); }
std::string num(std::size_t v) { return std::to_string(v); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> out;
  for (auto line : split_string(corpus::read_file(path), '\n')) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::vector<std::optional<corpus::BoundaryLabel>> gold_boundaries(const std::vector<corpus::CompoundEntry>& entries) {
  std::vector<std::optional<corpus::BoundaryLabel>> out;
  for (const auto& e : entries) {
    try {
      out.push_back(corpus::derive_boundary(e));
    } catch (const corpus::UnalignableError&) {
      out.push_back(std::nullopt);
    }
  }
  return out;
}

Splitter make_splitter(const SplitterOptions& o) {
  const auto method = splitters::parse_method(o.method);
  if (method == splitters::Method::neural) {
    if (o.model.empty()) throw UsageError("--method neural needs --model");
    auto model = std::make_shared<neuro::LoadedLabeler>(neuro::load_params(o.model));
    return [model](const std::string& w) { return splitters::neural_split(*model, w); };
  }
  if (method == splitters::Method::none) throw UsageError("--method must be frequency, ngram or neural");
  if (o.lexicon.empty() && o.train.empty()) throw UsageError("--method " + o.method + " needs --lexicon or --train");
  corpus::Lexicon lexicon;
  if (o.train.empty()) {
    lexicon = corpus::parse_frequency_file(o.lexicon);
  } else {
    std::optional<fs::path> extra;
    if (!o.lexicon.empty()) extra = o.lexicon;
    lexicon = corpus::build_lexicon(corpus::parse_split_file(o.train), extra);
  }
  if (method == splitters::Method::frequency) {
    auto table = o.transforms.empty() ? splitters::TransformTable::defaults()
                                      : splitters::TransformTable::load(o.transforms);
    auto shared = std::make_shared<std::pair<corpus::Lexicon, splitters::TransformTable>>(std::move(lexicon), table);
    return [shared](const std::string& w) { return splitters::frequency_split(w, shared->first, shared->second); };
  }
  auto stats = std::make_shared<splitters::NgramStats>(splitters::collect_ngram_stats(lexicon));
  return [stats](const std::string& w) { return splitters::ngram_split(w, *stats); };
}

void add_splitter_options(CLI::App* sub, SplitterOptions& o) {
  sub->add_option("--method", o.method, "Splitter")
      ->required()
      ->check(CLI::IsMember({"frequency", "ngram", "neural"}));
  sub->add_option("--model", o.model, "Labeler model file (neural)");
  sub->add_option("--lexicon", o.lexicon, "Frequency file (frequency, ngram)");
  sub->add_option("--train", o.train, "Split file whose modifiers and heads are counted into the lexicon");
  sub->add_option("--transforms", o.transforms, "Transforms file (frequency; default: built-in table)");
}

// Feature files: a header comment, then surface TAB label TAB values.
std::string serialize_features(const std::vector<corpus::AnnotatedCompound>& compounds,
                               const std::vector<idiom::FeatureVector>& features, const std::string& provenance) {
  std::string out = "# dim=" + std::to_string(features.empty() ? 0 : features.front().values.size()) +
                    " order=" + std::string(idiom::kFeatureOrder) + " provenance=" + provenance + "\n";
  for (std::size_t i = 0; i < compounds.size(); ++i) {
    out += compounds[i].entry.surface + '\t' + std::to_string(idiom::binarize_category(compounds[i].category)) + '\t';
    for (std::size_t j = 0; j < features[i].values.size(); ++j) {
      if (j) out += ' ';
      out += format_double(features[i].values[j]);
    }
    out += '\n';
  }
  return out;
}

struct FeatureSet {
  std::vector<std::string> surfaces;
  std::vector<int> labels;
  idiom::Matrix X;
};

FeatureSet load_features(const fs::path& path) {
  FeatureSet fsx;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  for (auto line : split_string(corpus::read_file(path), '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cols = split_string(line, '\t');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (cols.size() != 3) throw DataError(where + "expected 3 columns, got " + std::to_string(cols.size()));
    if (cols[1] != "0" && cols[1] != "1") throw DataError(where + "label must be 0 or 1");
    std::vector<double> values;
    for (const auto& f : split_string(cols[2], ' ')) {
      if (f.empty()) continue;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) throw DataError(where + "bad value '" + f + "'");
      values.push_back(v);
    }
    if (!rows.empty() && values.size() != rows.front().size()) {
      throw DataError(where + "expected " + std::to_string(rows.front().size()) + " values");
    }
    fsx.surfaces.push_back(cols[0]);
    fsx.labels.push_back(cols[1] == "1");
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError("no feature rows in " + path.string());
  fsx.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) fsx.X(i, j) = rows[i][j];
  }
  return fsx;
}

struct Classifier {
  std::string kind;
  idiom::LogRegModel logreg;
  idiom::GbdtModel gbdt;

  idiom::Prediction predict(std::span<const double> x) const {
    return kind == "logreg" ? idiom::predict_logreg(logreg, x) : idiom::predict_gbdt(gbdt, x);
  }
};

Classifier load_classifier(const fs::path& path) {
  auto file = model_file::load(path);
  Classifier c;
  c.kind = file.get("kind");
  if (c.kind == "logreg") c.logreg = idiom::logreg_from_model_file(file);
  else if (c.kind == "gbdt") c.gbdt = idiom::gbdt_from_model_file(file);
  else throw DataError("model kind '" + c.kind + "' is not a classifier");
  return c;
}

std::vector<int> predict_all(const Classifier& c, const idiom::Matrix& X) {
  std::vector<int> out;
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) row[j] = X(i, j);
    out.push_back(c.predict(row).label);
  }
  return out;
}

std::unordered_set<std::string> lookup_forms(const std::vector<std::string>& words) {
  std::unordered_set<std::string> keep{std::string(embeddings::kUnkWord)};
  for (const auto& w : words) {
    keep.insert(w);
    keep.insert(utf8::to_lower(w));
    keep.insert(utf8::capitalize(w));
  }
  return keep;
}

// Config files become "--key=value" arguments placed right after the
// subcommand path, so that flags typed by the user come later and win.
struct ConfigInjection {
  std::vector<std::string> args;
  std::vector<std::pair<std::string, std::string>> entries;
};

ConfigInjection extract_config(std::vector<std::string>& args) {
  ConfigInjection inj;
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      --i;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      --i;
    }
  }
  if (!path) return inj;
  std::size_t line_no = 0;
  for (auto line : split_string(corpus::read_file(*path), '\n')) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("config line " + std::to_string(line_no) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    inj.entries.emplace_back(key, value);
  }
  return inj;
}

void print_resolved(const CLI::App* leaf, std::ostream& err) {
  err << "config: command = " << leaf->get_parent()->get_name() << " " << leaf->get_name() << "\n";
  for (const CLI::Option* opt : leaf->get_options()) {
    const auto name = opt->get_single_name();
    if (name == "help") continue;
    std::string value;
    if (opt->get_type_size() == 0) {
      value = opt->count() ? "true" : "false";
    } else if (opt->count()) {
      value = opt->results().back();
    } else {
      value = opt->get_default_str();
    }
    err << "config: " << name << " = " << value << "\n";
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"German compound splitting and idiomaticity classification", "dekompost"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(kFormats);
  std::string config_path;
  app.add_option("--config", config_path, "Config file of \"key = value\" lines");

  std::map<const CLI::App*, std::function<int()>> handlers;
  std::uint64_t seed = corpus::kDefaultSeed;
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Random seed")->envname("DEKOMPOST_SEED");
  };

  // corpus
  auto* corpus_cmd = app.add_subcommand("corpus", "Inspect and partition datasets");
  corpus_cmd->require_subcommand(1);
  std::string data, format = "split", out_path;
  corpus::Ratios ratios;

  auto* stats_cmd = corpus_cmd->add_subcommand("stats", "Dataset statistics");
  stats_cmd->add_option("--data", data, "Split or annotated file")->required();
  stats_cmd->add_option("--format", format, "Input format")->check(CLI::IsMember({"split", "annotated"}));
  add_seed(stats_cmd);
  handlers[stats_cmd] = [&] {
    std::vector<corpus::CompoundEntry> entries;
    std::vector<corpus::AnnotatedCompound> annotated;
    if (format == "annotated") {
      annotated = corpus::parse_annotated_file(data);
      for (const auto& a : annotated) entries.push_back(a.entry);
    } else {
      entries = corpus::parse_split_file(data);
    }
    const auto s = corpus::compute_stats(entries);
    std::vector<std::pair<std::string, std::string>> kv{
        {"entries", num(s.entries)},
        {"distinct_modifiers", num(s.distinct_modifiers)},
        {"distinct_heads", num(s.distinct_heads)},
        {"hapax_modifiers", num(s.hapax_modifiers)},
        {"hapax_heads", num(s.hapax_heads)},
        {"unalignable", num(s.unalignable)}};
    if (format == "annotated") {
      std::array<std::size_t, 4> cats{};
      for (const auto& a : annotated) ++cats[static_cast<std::size_t>(a.category)];
      for (std::size_t c = 0; c < 4; ++c) kv.emplace_back("category" + std::to_string(c), num(cats[c]));
      const double positives = static_cast<double>(cats[1] + cats[2] + cats[3]);
      kv.emplace_back("idiomatic_rate", num(annotated.empty() ? 0.0 : positives / static_cast<double>(annotated.size())));
    }
    out << result_line(kv) << "\n";
    return 0;
  };

  auto* partition_cmd = corpus_cmd->add_subcommand("partition", "Deterministic train/dev/test partition");
  partition_cmd->add_option("--data", data, "Split or annotated file")->required();
  partition_cmd->add_option("--format", format, "Input format")->check(CLI::IsMember({"split", "annotated"}));
  partition_cmd->add_option("--out", out_path, "Output directory (train.tsv, dev.tsv, test.tsv)")->required();
  partition_cmd->add_option("--train-ratio", ratios.train, "Training share");
  partition_cmd->add_option("--dev-ratio", ratios.dev, "Development share");
  partition_cmd->add_option("--test-ratio", ratios.test, "Test share");
  add_seed(partition_cmd);
  handlers[partition_cmd] = [&] {
    std::array<std::size_t, 3> sizes{};
    std::array<std::string, 3> texts;
    if (format == "annotated") {
      auto p = corpus::partition(corpus::parse_annotated_file(data), ratios, seed);
      texts = {corpus::serialize_annotated(p.train), corpus::serialize_annotated(p.dev),
               corpus::serialize_annotated(p.test)};
      sizes = {p.train.size(), p.dev.size(), p.test.size()};
    } else {
      auto p = corpus::partition(corpus::parse_split_file(data), ratios, seed);
      texts = {corpus::serialize_split(p.train), corpus::serialize_split(p.dev), corpus::serialize_split(p.test)};
      sizes = {p.train.size(), p.dev.size(), p.test.size()};
    }
    const std::array<const char*, 3> names{"train.tsv", "dev.tsv", "test.tsv"};
    for (std::size_t k = 0; k < 3; ++k) write_text(fs::path(out_path) / names[k], texts[k]);
    out << result_line({{"train", num(sizes[0])}, {"dev", num(sizes[1])}, {"test", num(sizes[2])},
                        {"seed", std::to_string(seed)}})
        << "\n";
    return 0;
  };

  // bpe
  auto* bpe_cmd = app.add_subcommand("bpe", "Byte-pair encoding");
  bpe_cmd->require_subcommand(1);
  std::size_t bpe_vocab = 1000;
  auto* bpe_train_cmd = bpe_cmd->add_subcommand("train", "Learn BPE merges from compound surfaces");
  bpe_train_cmd->add_option("--data", data, "Split file")->required();
  bpe_train_cmd->add_option("--vocab-size", bpe_vocab, "Target vocabulary size");
  bpe_train_cmd->add_option("--out", out_path, "Merges file")->required();
  add_seed(bpe_train_cmd);
  handlers[bpe_train_cmd] = [&] {
    std::vector<std::string> words;
    for (const auto& e : corpus::parse_split_file(data)) words.push_back(e.surface);
    auto model = tokenize::bpe_train(words, bpe_vocab);
    tokenize::save_merges(model, out_path);
    out << result_line({{"merges", num(model.merges.size())}, {"vocab", num(model.vocab.size())}}) << "\n";
    return 0;
  };

  // split
  auto* split_cmd = app.add_subcommand("split", "Compound splitting");
  split_cmd->require_subcommand(1);
  neuro::LabelerConfig lc;
  std::string dev_path, tokenizer_mode = "char", merges_path, subword_vectors, cell_name = "gru";
  double target_accuracy = 0.0;
  bool frozen = false;

  auto* split_train_cmd = split_cmd->add_subcommand("train", "Train a neural boundary labeler");
  split_train_cmd->add_option("--train", data, "Training split file")->required();
  split_train_cmd->add_option("--dev", dev_path, "Development split file (model selection)");
  split_train_cmd->add_option("--out", out_path, "Output directory (model.dkmp, best.dkmp, train.log)")->required();
  split_train_cmd->add_option("--cell", cell_name, "Recurrent cell")->check(CLI::IsMember({"rnn", "vanilla", "gru", "lstm"}));
  split_train_cmd->add_option("--tokenizer", tokenizer_mode, "Input units")->check(CLI::IsMember({"char", "bpe"}));
  split_train_cmd->add_option("--merges", merges_path, "BPE merges file (default: learn from the training surfaces)");
  split_train_cmd->add_option("--bpe-vocab", bpe_vocab, "BPE vocabulary size when learning merges");
  split_train_cmd->add_option("--hidden", lc.hidden_dim, "Hidden size per direction");
  split_train_cmd->add_option("--embed-dim", lc.embed_dim, "Input embedding size");
  split_train_cmd->add_option("--epochs", lc.epochs, "Training epochs");
  split_train_cmd->add_option("--lr", lc.learning_rate, "Adam learning rate");
  split_train_cmd->add_option("--batch-size", lc.batch_size, "Mini-batch size");
  split_train_cmd->add_option("--clip-norm", lc.clip_norm, "Global gradient norm clip (0 = off)");
  split_train_cmd->add_option("--target-accuracy", target_accuracy, "Stop once selection accuracy reaches this (0 = off)");
  split_train_cmd->add_flag("--frozen-embeddings", frozen, "Do not update input embeddings");
  split_train_cmd->add_option("--subword-vectors", subword_vectors, "Pretrained unit vectors (vector file)");
  add_seed(split_train_cmd);
  handlers[split_train_cmd] = [&] {
    lc.cell = neuro::parse_cell_kind(cell_name);
    lc.seed = seed;
    lc.embeddings_trainable = !frozen;
    if (target_accuracy > 0) lc.target_accuracy = target_accuracy;
    const fs::path dir(out_path);
    fs::create_directories(dir);
    const auto train_entries = corpus::parse_split_file(data);
    tokenize::Tokenizer tokenizer;
    if (tokenizer_mode == "bpe") {
      tokenize::BpeModel bpe;
      if (!merges_path.empty()) {
        bpe = tokenize::load_merges(merges_path);
      } else {
        std::vector<std::string> words;
        for (const auto& e : train_entries) words.push_back(e.surface);
        bpe = tokenize::bpe_train(words, bpe_vocab);
      }
      tokenize::save_merges(bpe, dir / "merges.txt");
      tokenizer = tokenize::Tokenizer(std::move(bpe));
    }
    struct Counts {
      std::size_t unalignable = 0, single = 0, lossy = 0;
    };
    auto build = [&](const std::vector<corpus::CompoundEntry>& entries, const neuro::Vocab& vocab, Counts& c) {
      std::vector<neuro::TrainExample> examples;
      for (const auto& e : entries) {
        std::optional<corpus::BoundaryLabel> b;
        try {
          b = corpus::derive_boundary(e);
        } catch (const corpus::UnalignableError&) {
          ++c.unalignable;
          continue;
        }
        bool lossy = false;
        auto ex = neuro::make_example(vocab, tokenizer.encode(e.surface), *b, &lossy);
        if (!ex) {
          ++c.single;
          continue;
        }
        c.lossy += lossy;
        examples.push_back(std::move(*ex));
      }
      return examples;
    };
    std::vector<tokenize::TokenSequence> seqs;
    for (const auto& e : train_entries) seqs.push_back(tokenizer.encode(e.surface));
    lc.vocab = neuro::Vocab::build(seqs);
    Counts tc, dc;
    auto train_set = build(train_entries, lc.vocab, tc);
    std::vector<neuro::TrainExample> dev_set;
    if (!dev_path.empty()) dev_set = build(corpus::parse_split_file(dev_path), lc.vocab, dc);
    if (tc.unalignable + tc.single) {
      err << "warning: dropped " << tc.unalignable << " unalignable and " << tc.single
          << " single-token training compounds\n";
    }
    if (train_set.empty()) throw DataError("no usable training compounds");
    std::optional<neuro::Matrix> init;
    if (!subword_vectors.empty()) {
      init = neuro::load_subword_embeddings(subword_vectors, lc.vocab, lc.embed_dim, seed).matrix;
    }
    auto result = neuro::train(lc, train_set, dev_set, init);
    std::string log = "epoch\ttrain_loss\tselection_accuracy\n";
    for (const auto& e : result.log) {
      log += std::to_string(e.epoch) + '\t' + format_double(e.train_loss) + '\t' + format_double(e.dev_accuracy) + '\n';
      err << "epoch " << e.epoch << " loss " << format_double(e.train_loss) << " accuracy "
          << format_double(e.dev_accuracy) << "\n";
    }
    write_text(dir / "train.log", log);
    neuro::save_params(result.params, lc, tokenizer, dir / "model.dkmp");
    neuro::save_params(result.best_params, lc, tokenizer, dir / "best.dkmp");
    const double best = result.log.empty() ? 0.0 : result.log[static_cast<std::size_t>(result.best_epoch - 1)].dev_accuracy;
    out << result_line({{"epochs", num(result.log.size())},
                        {"best_epoch", std::to_string(result.best_epoch)},
                        {"selection_accuracy", num(best)},
                        {"train_examples", num(train_set.size())},
                        {"dev_examples", num(dev_set.size())},
                        {"dropped", num(tc.unalignable + tc.single)},
                        {"lossy", num(tc.lossy)},
                        {"vocab", std::to_string(lc.vocab.size())}})
        << "\n";
    return 0;
  };

  SplitterOptions so;
  std::vector<std::string> words;
  std::string input_path;
  auto* split_run_cmd = split_cmd->add_subcommand("run", "Split words");
  add_splitter_options(split_run_cmd, so);
  split_run_cmd->add_option("--input", input_path, "File with one word per line");
  split_run_cmd->add_option("words", words, "Words to split");
  add_seed(split_run_cmd);
  handlers[split_run_cmd] = [&] {
    auto splitter = make_splitter(so);
    auto all = words;
    if (!input_path.empty()) {
      for (auto& w : read_lines(input_path)) all.push_back(std::move(w));
    }
    if (all.empty()) throw UsageError("no words given (positional or --input)");
    for (const auto& w : all) {
      if (!utf8::valid(w)) throw DataError("invalid UTF-8 input word");
      auto r = splitter(w);
      out << w << '\t' << (r.method == splitters::Method::none ? w : r.left + "|" + r.right) << '\t'
          << splitters::to_string(r.method) << '\t' << format_double(r.score) << "\n";
    }
    return 0;
  };

  std::string errors_path;
  auto* split_eval_cmd = split_cmd->add_subcommand("eval", "Split accuracy on a gold split file");
  add_splitter_options(split_eval_cmd, so);
  split_eval_cmd->add_option("--data", data, "Gold split file")->required();
  split_eval_cmd->add_option("--errors", errors_path, "Write the error TSV here");
  add_seed(split_eval_cmd);
  handlers[split_eval_cmd] = [&] {
    auto splitter = make_splitter(so);
    const auto entries = corpus::parse_split_file(data);
    const auto gold = gold_boundaries(entries);
    std::vector<splitters::SplitResult> preds;
    for (const auto& e : entries) preds.push_back(splitter(e.surface));
    const auto m = evalx::split_accuracy(preds, gold);
    out << result_line({{"accuracy", num(m.accuracy)}, {"n", num(m.n)}, {"dropped", num(m.unalignable_dropped)}})
        << "\n";
    out << so.method << ": " << m.correct << " of " << m.n << " compounds split correctly\n";
    if (!errors_path.empty()) {
      std::vector<evalx::GoldSplit> gs;
      for (std::size_t i = 0; i < entries.size(); ++i) gs.push_back({entries[i], gold[i]});
      write_text(errors_path, evalx::error_report(preds, gs).to_tsv());
    }
    return 0;
  };

  // idiom
  auto* idiom_cmd = app.add_subcommand("idiom", "Idiomaticity classification");
  idiom_cmd->require_subcommand(1);
  std::string vectors, ngram_vectors, oov = "zero", provenance = "gold", split_model, features_path, model_path;
  std::string classifier = "logreg";
  double C = 1.0;
  idiom::GbdtParams gp;

  auto* featurize_cmd = idiom_cmd->add_subcommand("featurize", "Build compound|modifier|head feature vectors");
  featurize_cmd->add_option("--data", data, "Annotated file")->required();
  featurize_cmd->add_option("--vectors", vectors, "Word vector file")->required();
  featurize_cmd->add_option("--ngram-vectors", ngram_vectors, "Character n-gram vector file");
  featurize_cmd->add_option("--oov", oov, "Out-of-vocabulary policy")->check(CLI::IsMember({"unk", "zero", "ngram"}));
  featurize_cmd->add_option("--provenance", provenance, "Component source")->check(CLI::IsMember({"gold", "neural"}));
  featurize_cmd->add_option("--split-model", split_model, "Labeler model for neural provenance");
  featurize_cmd->add_option("--out", out_path, "Features file")->required();
  add_seed(featurize_cmd);
  handlers[featurize_cmd] = [&] {
    const auto compounds = corpus::parse_annotated_file(data);
    std::vector<splitters::SplitResult> splits;
    std::vector<std::string> needed;
    if (provenance == "neural") {
      if (split_model.empty()) throw UsageError("--provenance neural needs --split-model");
      const auto model = neuro::load_params(split_model);
      for (const auto& c : compounds) {
        splits.push_back(splitters::neural_split(model, c.entry.surface));
        needed.push_back(splits.back().left);
        needed.push_back(splits.back().right);
      }
    }
    for (const auto& c : compounds) {
      needed.push_back(c.entry.surface);
      needed.push_back(c.entry.modifier);
      needed.push_back(c.entry.head);
    }
    const auto keep = lookup_forms(needed);
    auto table = embeddings::load_text_vectors(vectors, &keep);
    if (!ngram_vectors.empty()) embeddings::load_ngram_vectors(table, ngram_vectors);
    table.set_policy(embeddings::parse_oov_policy(oov));
    std::vector<idiom::FeatureVector> features;
    std::size_t oov_words = 0;
    for (std::size_t i = 0; i < compounds.size(); ++i) {
      const auto& e = compounds[i].entry;
      if (splits.empty()) {
        features.push_back(idiom::build_features(compounds[i], table));
        for (const std::string* w : {&e.surface, &e.modifier, &e.head}) oov_words += table.find(*w) == nullptr;
      } else {
        features.push_back(idiom::build_features(compounds[i], splits[i], table));
        for (const std::string* w : std::initializer_list<const std::string*>{&e.surface, &splits[i].left, &splits[i].right}) oov_words += table.find(*w) == nullptr;
      }
    }
    write_text(out_path, serialize_features(compounds, features, provenance));
    out << result_line({{"rows", num(features.size())}, {"dim", num(3 * table.dim())}, {"oov_words", num(oov_words)}})
        << "\n";
    return 0;
  };

  auto* idiom_train_cmd = idiom_cmd->add_subcommand("train", "Train a classifier on a features file");
  idiom_train_cmd->add_option("--features", features_path, "Features file")->required();
  idiom_train_cmd->add_option("--classifier", classifier, "Classifier")->check(CLI::IsMember({"logreg", "gbdt"}));
  idiom_train_cmd->add_option("--out", out_path, "Model file")->required();
  idiom_train_cmd->add_option("--C", C, "Inverse regularization strength (logreg)");
  idiom_train_cmd->add_option("--estimators", gp.n_estimators, "Boosting rounds (gbdt)");
  idiom_train_cmd->add_option("--min-leaf", gp.min_leaf, "Minimum weighted leaf size (gbdt)");
  idiom_train_cmd->add_option("--shrinkage", gp.shrinkage, "Learning rate (gbdt)");
  idiom_train_cmd->add_option("--max-depth", gp.max_depth, "Tree depth (gbdt)");
  idiom_train_cmd->add_option("--w0", gp.class_weight0, "Weight of class 0 (gbdt)");
  idiom_train_cmd->add_option("--w1", gp.class_weight1, "Weight of class 1 (gbdt)");
  add_seed(idiom_train_cmd);
  handlers[idiom_train_cmd] = [&] {
    const auto f = load_features(features_path);
    Classifier c;
    c.kind = classifier;
    model_file::ModelFile file;
    if (classifier == "logreg") {
      c.logreg = idiom::train_logreg(f.X, f.labels, C);
      file = idiom::to_model_file(c.logreg);
    } else {
      c.gbdt = idiom::train_gbdt(f.X, f.labels, gp);
      file = idiom::to_model_file(c.gbdt);
    }
    model_file::save(file, out_path);
    const auto m = evalx::binary_prf1(predict_all(c, f.X), f.labels);
    out << result_line({{"train_f1", num(m.f1)}, {"n", num(f.labels.size())}}) << "\n";
    return 0;
  };

  auto* idiom_eval_cmd = idiom_cmd->add_subcommand("eval", "F1 of the idiomatic class");
  idiom_eval_cmd->add_option("--classifier", classifier, "Classifier")
      ->check(CLI::IsMember({"dummy", "logreg", "gbdt"}));
  idiom_eval_cmd->add_option("--data", data, "Annotated file (labels for the dummy baseline)");
  idiom_eval_cmd->add_option("--features", features_path, "Features file");
  idiom_eval_cmd->add_option("--model", model_path, "Classifier model file");
  add_seed(idiom_eval_cmd);
  handlers[idiom_eval_cmd] = [&] {
    std::vector<int> gold, preds;
    if (classifier == "dummy") {
      if (!data.empty()) {
        for (const auto& c : corpus::parse_annotated_file(data)) gold.push_back(idiom::binarize_category(c.category));
      } else if (!features_path.empty()) {
        gold = load_features(features_path).labels;
      } else {
        throw UsageError("the dummy baseline needs --data or --features");
      }
      preds = idiom::dummy_predict(gold.size());
    } else {
      if (features_path.empty() || model_path.empty()) throw UsageError("--classifier " + classifier + " needs --features and --model");
      const auto f = load_features(features_path);
      const auto c = load_classifier(model_path);
      if (c.kind != classifier) throw UsageError("model file holds a " + c.kind + " model");
      gold = f.labels;
      preds = predict_all(c, f.X);
    }
    const auto m = evalx::binary_prf1(preds, gold);
    out << result_line({{"f1", num(m.f1)}, {"precision", num(m.precision)}, {"recall", num(m.recall)},
                        {"n", num(gold.size())}, {"positives", num(m.tp + m.fn)}})
        << "\n";
    out << "tp " << m.tp << " fp " << m.fp << " fn " << m.fn << " tn " << m.tn << "\n";
    return 0;
  };

  auto* predict_cmd = idiom_cmd->add_subcommand("predict", "Label feature rows");
  predict_cmd->add_option("--model", model_path, "Classifier model file")->required();
  predict_cmd->add_option("--features", features_path, "Features file")->required();
  predict_cmd->add_option("--out", out_path, "Output file (default: stdout)");
  add_seed(predict_cmd);
  handlers[predict_cmd] = [&] {
    const auto f = load_features(features_path);
    const auto c = load_classifier(model_path);
    std::string text;
    std::vector<double> row(static_cast<std::size_t>(f.X.cols()));
    for (Eigen::Index i = 0; i < f.X.rows(); ++i) {
      for (Eigen::Index j = 0; j < f.X.cols(); ++j) row[j] = f.X(i, j);
      const auto p = c.predict(row);
      text += f.surfaces[i] + '\t' + std::to_string(p.label) + '\t' + format_double(p.probability) + '\n';
    }
    if (out_path.empty()) out << text;
    else write_text(out_path, text);
    return 0;
  };

  // report
  auto* report_cmd = app.add_subcommand("report", "Error analysis");
  report_cmd->require_subcommand(1);
  std::string predictions_path;
  std::size_t top_k = 10;
  SplitterOptions ro;
  auto* errors_cmd = report_cmd->add_subcommand("errors", "Splitting errors and misclassified components");
  errors_cmd->add_option("--data", data, "Gold split file (splitting errors)");
  errors_cmd->add_option("--method", ro.method, "Splitter")->check(CLI::IsMember({"frequency", "ngram", "neural"}));
  errors_cmd->add_option("--model", ro.model, "Labeler model file (neural)");
  errors_cmd->add_option("--lexicon", ro.lexicon, "Frequency file (frequency, ngram)");
  errors_cmd->add_option("--train", ro.train, "Split file counted into the lexicon");
  errors_cmd->add_option("--transforms", ro.transforms, "Transforms file");
  errors_cmd->add_option("--annotated", features_path, "Annotated file (idiomaticity errors)");
  errors_cmd->add_option("--predictions", predictions_path, "Output of idiom predict, same order as --annotated");
  errors_cmd->add_option("--top-k", top_k, "Rows in the component tables");
  errors_cmd->add_option("--out", out_path, "Error TSV (default: stdout)");
  add_seed(errors_cmd);
  handlers[errors_cmd] = [&] {
    if (data.empty() && features_path.empty()) throw UsageError("give --data and/or --annotated");
    evalx::ErrorReport report;
    if (!data.empty()) {
      if (ro.method.empty()) throw UsageError("--data needs --method");
      auto splitter = make_splitter(ro);
      const auto entries = corpus::parse_split_file(data);
      const auto gold = gold_boundaries(entries);
      std::vector<splitters::SplitResult> preds;
      std::vector<evalx::GoldSplit> gs;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        preds.push_back(splitter(entries[i].surface));
        gs.push_back({entries[i], gold[i]});
      }
      report = evalx::error_report(preds, gs);
    }
    if (!features_path.empty()) {
      if (predictions_path.empty()) throw UsageError("--annotated needs --predictions");
      const auto compounds = corpus::parse_annotated_file(features_path);
      const auto lines = read_lines(predictions_path);
      if (lines.size() != compounds.size()) throw DataError("predictions and annotated file differ in length");
      std::vector<int> preds;
      for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto cols = split_string(lines[i], '\t');
        if (cols.size() < 2 || cols[0] != compounds[i].entry.surface || (cols[1] != "0" && cols[1] != "1")) {
          throw DataError("predictions line " + std::to_string(i + 1) + " does not match the annotated file");
        }
        preds.push_back(cols[1] == "1");
      }
      evalx::add_idiom_errors(report, compounds, preds, top_k);
    }
    if (out_path.empty()) out << report.to_tsv();
    else write_text(out_path, report.to_tsv());
    out << report.summary();
    return 0;
  };

  for (auto* group : app.get_subcommands({})) {
    group->footer(kFormats);
    for (auto* sub : group->get_subcommands({})) sub->footer(kFormats);
  }

  std::vector<std::string> args(argv, argv + argc);
  try {
    auto injection = extract_config(args);
    if (!injection.entries.empty()) {
      // Walk the subcommand path to find where the injected flags go.
      const CLI::App* node = &app;
      std::size_t pos = 1;
      while (pos < args.size()) {
        const CLI::App* next = nullptr;
        for (const CLI::App* s : node->get_subcommands({})) {
          if (s->check_name(args[pos])) next = s;
        }
        if (!next) break;
        node = next;
        ++pos;
      }
      std::vector<std::string> inject;
      for (const auto& [key, value] : injection.entries) {
        if (node->get_option_no_throw("--" + key)) {
          inject.push_back("--" + key + "=" + value);
        } else {
          err << "warning: config key '" << key << "' is not used by this command\n";
        }
      }
      args.insert(args.begin() + static_cast<std::ptrdiff_t>(pos), inject.begin(), inject.end());
    }
    std::vector<const char*> cargv;
    for (const auto& a : args) cargv.push_back(a.c_str());
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  const CLI::App* leaf = nullptr;
  for (const auto& [sub, fn] : handlers) {
    if (sub->parsed()) leaf = sub;
  }
  if (!leaf) {
    err << app.help();
    return 1;
  }
  print_resolved(leaf, err);
  try {
    return handlers.at(leaf)();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dekompost::cli
