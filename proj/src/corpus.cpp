#include "dekompost/corpus.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace dekompost::corpus {

namespace {

std::string line_error(std::size_t line_no, const std::string& what) {
  return "line " + std::to_string(line_no) + ": " + what;
}

std::uint64_t parse_count(std::string_view field, std::size_t line_no) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw DataError(line_error(line_no, "invalid count '" + std::string(field) + "'"));
  }
  return value;
}

// Calls fn(line_no, fields) for every non-comment, non-blank line.
template <typename Fn>
void for_each_record(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    if (!utf8::valid(line)) throw DataError(line_error(line_no, "invalid UTF-8"));
    fn(line_no, split_string(line, '\t'));
  }
}

void check_fields(const std::vector<std::string>& fields, std::size_t line_no) {
  for (const auto& f : fields) {
    if (f.empty()) throw DataError(line_error(line_no, "empty field"));
  }
}

void check_surface(const std::string& surface, std::size_t line_no) {
  if (utf8::length(surface) < 2) {
    throw DataError(line_error(line_no, "compound shorter than 2 characters"));
  }
}

bool ends_with(std::u32string_view s, std::u32string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::u32string deumlaut(std::u32string s) {
  for (auto& c : s) {
    if (c == U'ä') c = U'a';
    else if (c == U'ö') c = U'o';
    else if (c == U'ü') c = U'u';
  }
  return s;
}

// Boundary if `head` is a proper suffix of `surface`.
std::optional<std::size_t> suffix_boundary(std::u32string_view surface, std::u32string_view head) {
  if (head.empty() || head.size() >= surface.size()) return std::nullopt;
  if (!ends_with(surface, head)) return std::nullopt;
  return surface.size() - head.size();
}

std::optional<std::size_t> stripped_boundary(std::u32string_view surface, std::u32string_view head) {
  static const std::u32string kStrip[] = {U"e", U"en", U"n", U"s"};
  for (const auto& suffix : kStrip) {
    if (!ends_with(head, suffix) || head.size() == suffix.size()) continue;
    if (auto b = suffix_boundary(surface, head.substr(0, head.size() - suffix.size()))) return b;
  }
  return std::nullopt;
}

}  // namespace

void Lexicon::add(std::string_view word, std::uint64_t count) {
  if (count == 0) return;
  auto it = counts.find(word);
  if (it == counts.end()) {
    counts.emplace(std::string(word), count);
  } else {
    it->second += count;
  }
}

std::uint64_t Lexicon::freq(std::string_view lowered) const {
  auto it = counts.find(lowered);
  return it == counts.end() ? 0 : it->second;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<CompoundEntry> parse_split_text(std::string_view text) {
  std::vector<CompoundEntry> out;
  for_each_record(text, [&](std::size_t line_no, const std::vector<std::string>& fields) {
    if (fields.size() != 3 && fields.size() != 4) {
      throw DataError(line_error(line_no, "expected 3 or 4 columns, got " +
                                              std::to_string(fields.size())));
    }
    check_fields(fields, line_no);
    check_surface(fields[0], line_no);
    std::optional<std::uint64_t> freq;
    if (fields.size() == 4) freq = parse_count(fields[3], line_no);
    for (const auto& modifier : split_string(fields[1], '|')) {
      if (modifier.empty()) throw DataError(line_error(line_no, "empty modifier reading"));
      out.push_back(CompoundEntry{fields[0], modifier, fields[2], freq});
    }
  });
  return out;
}

std::vector<CompoundEntry> parse_split_file(const std::filesystem::path& path) {
  return parse_split_text(read_file(path));
}

std::string serialize_split(const std::vector<CompoundEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += e.surface + '\t' + e.modifier + '\t' + e.head;
    if (e.frequency) out += '\t' + std::to_string(*e.frequency);
    out += '\n';
  }
  return out;
}

std::vector<AnnotatedCompound> parse_annotated_text(std::string_view text) {
  std::vector<AnnotatedCompound> out;
  for_each_record(text, [&](std::size_t line_no, const std::vector<std::string>& fields) {
    if (fields.size() != 5) {
      throw DataError(line_error(line_no, "expected 5 columns, got " + std::to_string(fields.size())));
    }
    check_fields(fields, line_no);
    auto freq = parse_count(fields[0], line_no);
    auto category = parse_count(fields[4], line_no);
    if (category > 3) throw DataError("category out of range, line " + std::to_string(line_no));
    check_surface(fields[1], line_no);
    out.push_back(AnnotatedCompound{CompoundEntry{fields[1], fields[2], fields[3], freq},
                                    static_cast<int>(category)});
  });
  return out;
}

std::vector<AnnotatedCompound> parse_annotated_file(const std::filesystem::path& path) {
  return parse_annotated_text(read_file(path));
}

std::string serialize_annotated(const std::vector<AnnotatedCompound>& entries) {
  std::string out;
  for (const auto& a : entries) {
    out += std::to_string(a.entry.frequency.value_or(0)) + '\t' + a.entry.surface + '\t' +
           a.entry.modifier + '\t' + a.entry.head + '\t' + std::to_string(a.category) + '\n';
  }
  return out;
}

Lexicon parse_frequency_text(std::string_view text) {
  Lexicon lex;
  for_each_record(text, [&](std::size_t line_no, const std::vector<std::string>& fields) {
    if (fields.size() != 2) {
      throw DataError(line_error(line_no, "expected 2 columns, got " + std::to_string(fields.size())));
    }
    check_fields(fields, line_no);
    lex.add(utf8::to_lower(fields[0]), parse_count(fields[1], line_no));
  });
  return lex;
}

Lexicon parse_frequency_file(const std::filesystem::path& path) {
  return parse_frequency_text(read_file(path));
}

std::string serialize_lexicon(const Lexicon& lexicon) {
  std::string out;
  for (const auto& [word, count] : lexicon.counts) out += word + '\t' + std::to_string(count) + '\n';
  return out;
}

Alignment align(const CompoundEntry& entry) {
  const auto surface = utf8::to_lower(utf8::decode(entry.surface));
  const auto head = utf8::to_lower(utf8::decode(entry.head));
  if (auto b = suffix_boundary(surface, head)) return {BoundaryLabel{*b}, AlignRule::direct_suffix};
  if (auto b = stripped_boundary(surface, head)) return {BoundaryLabel{*b}, AlignRule::stripped_head};
  // De-umlauting is length-preserving, so offsets carry over to the surface.
  const auto plain_surface = deumlaut(surface);
  const auto plain_head = deumlaut(head);
  if (auto b = suffix_boundary(plain_surface, plain_head)) {
    return {BoundaryLabel{*b}, AlignRule::deumlauted_head};
  }
  if (auto b = stripped_boundary(plain_surface, plain_head)) {
    return {BoundaryLabel{*b}, AlignRule::deumlauted_head};
  }
  throw UnalignableError(entry.surface);
}

BoundaryLabel derive_boundary(const CompoundEntry& entry) { return align(entry).boundary; }

Lexicon build_lexicon(const std::vector<CompoundEntry>& entries,
                      const std::optional<std::filesystem::path>& extra) {
  Lexicon lex;
  for (const auto& e : entries) {
    lex.add(utf8::to_lower(e.modifier));
    lex.add(utf8::to_lower(e.head));
  }
  if (extra) {
    for (const auto& [word, count] : parse_frequency_file(*extra).counts) lex.add(word, count);
  }
  return lex;
}

void validate_ratios(const Ratios& r) {
  for (double x : {r.train, r.dev, r.test}) {
    if (!(x >= 0.0 && x <= 1.0)) throw UsageError("partition ratios must lie in [0, 1]");
  }
  if (std::abs(r.train + r.dev + r.test - 1.0) > 1e-9) {
    throw UsageError("partition ratios must sum to 1");
  }
}

PartitionIndices partition_indices(std::size_t n, const Ratios& ratios, std::uint64_t seed) {
  validate_ratios(ratios);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  // The small epsilon keeps exact products like 10 * 0.1 from flooring down.
  auto portion = [n](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
  };
  const std::size_t n_dev = portion(ratios.dev);
  const std::size_t n_test = portion(ratios.test);
  const std::size_t n_train = n - n_dev - n_test;
  PartitionIndices out;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.dev.assign(order.begin() + n_train, order.begin() + n_train + n_dev);
  out.test.assign(order.begin() + n_train + n_dev, order.end());
  return out;
}

CorpusStats compute_stats(const std::vector<CompoundEntry>& entries) {
  CorpusStats stats;
  stats.entries = entries.size();
  std::unordered_map<std::string, std::size_t> modifiers, heads;
  for (const auto& e : entries) {
    ++modifiers[e.modifier];
    ++heads[e.head];
    try {
      align(e);
    } catch (const UnalignableError&) {
      ++stats.unalignable;
    }
  }
  stats.distinct_modifiers = modifiers.size();
  stats.distinct_heads = heads.size();
  for (const auto& [_, n] : modifiers) stats.hapax_modifiers += (n == 1);
  for (const auto& [_, n] : heads) stats.hapax_heads += (n == 1);
  return stats;
}

}  // namespace dekompost::corpus
