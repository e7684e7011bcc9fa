#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dekompost/corpus.h"
#include "dekompost/splitters.h"

namespace dekompost::evalx {

// Published scores of the reference systems, for report footers.
inline constexpr double kReferenceCharSplitAccuracy = 0.879;
inline constexpr double kReferenceSecosAccuracy = 0.914;
inline constexpr double kReferenceCharGruAccuracy = 0.956;
inline constexpr double kReferenceDummyF1 = 0.21;
inline constexpr double kReferenceGoldFastTextGbdtF1 = 0.584;

struct SplitMetrics {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::size_t unalignable_dropped = 0;
};

// gold[i] == nullopt marks an entry that could not be aligned; it is excluded
// from n and counted as dropped.
SplitMetrics split_accuracy(const std::vector<splitters::SplitResult>& preds,
                            const std::vector<std::optional<corpus::BoundaryLabel>>& gold);

struct ClassMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when a zero denominator forced a metric to 0.
  bool undefined = false;
};

ClassMetrics binary_prf1(const std::vector<int>& preds, const std::vector<int>& gold, int positive_class = 1);

struct SplitError {
  std::string surface;
  corpus::BoundaryLabel gold;
  std::optional<std::size_t> predicted;  // nullopt when no split was produced
  bool linking_confusion = false;
};

struct ErrorReport {
  std::vector<SplitError> errors;
  std::size_t evaluated = 0;
  std::size_t linking_confusions = 0;
  std::vector<std::pair<std::string, std::size_t>> top_modifiers;
  std::vector<std::pair<std::string, std::size_t>> top_heads;

  // surface TAB gold_left|gold_right TAB pred_left|pred_right TAB category
  std::string to_tsv() const;
  std::string summary() const;
};

struct GoldSplit {
  corpus::CompoundEntry entry;
  std::optional<corpus::BoundaryLabel> boundary;
};

// True when the boundaries differ by at most two characters and the skipped
// characters form a known linking suffix.
bool is_linking_confusion(std::string_view surface, std::size_t gold, std::size_t predicted,
                          const splitters::TransformTable& transforms);

ErrorReport error_report(const std::vector<splitters::SplitResult>& preds, const std::vector<GoldSplit>& gold,
                         const splitters::TransformTable& transforms = splitters::TransformTable::defaults());

// Fills the top-k modifier and head tables from misclassified idiomaticity examples.
void add_idiom_errors(ErrorReport& report, const std::vector<corpus::AnnotatedCompound>& compounds,
                      const std::vector<int>& preds, std::size_t top_k = 10);

}  // namespace dekompost::evalx
