#include "dekompost/evalx.h"

#include <algorithm>
#include <map>
#include <sstream>

namespace dekompost::evalx {

namespace {

double safe_div(double a, double b, bool& undefined) {
  if (b == 0) {
    undefined = true;
    return 0.0;
  }
  return a / b;
}

std::vector<std::pair<std::string, std::size_t>> top_k(const std::map<std::string, std::size_t>& counts,
                                                        std::size_t k) {
  std::vector<std::pair<std::string, std::size_t>> v(counts.begin(), counts.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (v.size() > k) v.resize(k);
  return v;
}

std::string split_at(const std::string& surface, std::optional<std::size_t> boundary) {
  if (!boundary) return surface + "|";
  return utf8::substr(surface, 0, *boundary) + "|" + utf8::substr(surface, *boundary, std::string::npos);
}

}  // namespace

SplitMetrics split_accuracy(const std::vector<splitters::SplitResult>& preds,
                            const std::vector<std::optional<corpus::BoundaryLabel>>& gold) {
  if (preds.size() != gold.size()) throw UsageError("prediction and gold counts differ");
  SplitMetrics m;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!gold[i]) {
      ++m.unalignable_dropped;
      continue;
    }
    ++m.n;
    if (auto b = preds[i].boundary(); b && *b == gold[i]->split_index) ++m.correct;
  }
  m.accuracy = m.n ? static_cast<double>(m.correct) / static_cast<double>(m.n) : 0.0;
  return m;
}

ClassMetrics binary_prf1(const std::vector<int>& preds, const std::vector<int>& gold, int positive_class) {
  if (preds.size() != gold.size()) throw UsageError("prediction and gold counts differ");
  ClassMetrics m;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == positive_class;
    const bool g = gold[i] == positive_class;
    if (p && g) ++m.tp;
    else if (p) ++m.fp;
    else if (g) ++m.fn;
    else ++m.tn;
  }
  m.precision = safe_div(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fp), m.undefined);
  m.recall = safe_div(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fn), m.undefined);
  m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall, m.undefined);
  return m;
}

bool is_linking_confusion(std::string_view surface, std::size_t gold, std::size_t predicted,
                          const splitters::TransformTable& transforms) {
  const std::size_t lo = std::min(gold, predicted);
  const std::size_t hi = std::max(gold, predicted);
  if (hi == lo || hi - lo > 2) return false;
  const auto skipped = utf8::to_lower(utf8::decode(surface)).substr(lo, hi - lo);
  for (const auto& s : transforms.strip_suffixes()) {
    if (s == skipped) return true;
  }
  return false;
}

ErrorReport error_report(const std::vector<splitters::SplitResult>& preds, const std::vector<GoldSplit>& gold,
                         const splitters::TransformTable& transforms) {
  if (preds.size() != gold.size()) throw UsageError("prediction and gold counts differ");
  ErrorReport report;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!gold[i].boundary) continue;
    ++report.evaluated;
    const auto predicted = preds[i].boundary();
    const auto g = gold[i].boundary->split_index;
    if (predicted && *predicted == g) continue;
    SplitError e{gold[i].entry.surface, *gold[i].boundary, predicted, false};
    if (predicted) e.linking_confusion = is_linking_confusion(e.surface, g, *predicted, transforms);
    report.linking_confusions += e.linking_confusion;
    report.errors.push_back(std::move(e));
  }
  return report;
}

void add_idiom_errors(ErrorReport& report, const std::vector<corpus::AnnotatedCompound>& compounds,
                      const std::vector<int>& preds, std::size_t k) {
  if (preds.size() != compounds.size()) throw UsageError("prediction and gold counts differ");
  std::map<std::string, std::size_t> modifiers, heads;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int gold = compounds[i].category == 0 ? 0 : 1;
    if (preds[i] == gold) continue;
    ++modifiers[compounds[i].entry.modifier];
    ++heads[compounds[i].entry.head];
  }
  report.top_modifiers = top_k(modifiers, k);
  report.top_heads = top_k(heads, k);
}

std::string ErrorReport::to_tsv() const {
  std::string out;
  for (const auto& e : errors) {
    const char* category = !e.predicted ? "no-split" : e.linking_confusion ? "linking-element" : "other";
    out += e.surface + '\t' + split_at(e.surface, e.gold.split_index) + '\t' + split_at(e.surface, e.predicted) +
           '\t' + category + '\n';
  }
  return out;
}

std::string ErrorReport::summary() const {
  std::ostringstream os;
  os << errors.size() << " errors";
  if (evaluated) os << " out of " << evaluated;
  os << "\nlinking-element confusions: " << linking_confusions << '\n';
  if (!top_modifiers.empty() || !top_heads.empty()) {
    os << "most frequent components of misclassified compounds:\n";
    for (const auto& [w, n] : top_modifiers) os << "  modifier\t" << w << '\t' << n << '\n';
    for (const auto& [w, n] : top_heads) os << "  head\t" << w << '\t' << n << '\n';
  }
  os << "reference split accuracy: CharSplit " << kReferenceCharSplitAccuracy << ", SECOS "
     << kReferenceSecosAccuracy << ", Char-GRU " << kReferenceCharGruAccuracy << '\n';
  return os.str();
}

}  // namespace dekompost::evalx
