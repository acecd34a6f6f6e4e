#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xmodal/encoder.hpp"

namespace xmodal {

// Ordered label space. Class ids are contiguous from 1; names are unique
// and stored lowercase.
class ClassCatalog {
 public:
  static ClassCatalog from_names(const std::vector<std::string>& names);
  // One class name per line; blank lines ignored.
  static ClassCatalog load(const std::filesystem::path& path);

  int num_classes() const { return static_cast<int>(names_.size()); }
  const std::string& name(int class_id) const;  // class_id in 1..C
  const std::vector<std::string>& names() const { return names_; }
  bool contains_name(const std::string& name) const;
  // 0 if not found, else the 1-based class id.
  int id_of(const std::string& name) const;

 private:
  std::vector<std::string> names_;
};

// Format strings with exactly one "{}" noun slot, validated at load.
class PromptTemplateSet {
 public:
  explicit PromptTemplateSet(std::vector<std::string> templates);

  std::size_t size() const { return templates_.size(); }
  const std::vector<std::string>& templates() const { return templates_; }

  // One prompt per template, in template order. Noun must be non-empty.
  std::vector<std::string> apply(const std::string& noun) const;

 private:
  std::vector<std::string> templates_;
};

enum class LexiconSourceKind { kWordnetLive, kOfflineSnapshot, kMockLexicon };

enum class LexRelation { kSynonym, kHypernym, kSibling, kDistractor };

struct LexRow {
  std::string class_name;  // "*" for the global pool
  LexRelation relation = LexRelation::kSynonym;
  std::string noun;
};

// Offline lexicon: either a snapshot file (lines
// `class_name<TAB>relation<TAB>noun`) or the builtin mock table.
struct LexiconTable {
  LexiconSourceKind source = LexiconSourceKind::kMockLexicon;
  std::vector<LexRow> rows;
};

LexiconTable load_snapshot(const std::filesystem::path& path);
LexiconTable builtin_mock_lexicon();

struct NounCandidateSet {
  std::vector<std::string> nouns;  // unique, lowercase, non-empty
  LexiconSourceKind source = LexiconSourceKind::kMockLexicon;
};

struct HarvestReport {
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, int>> per_class_counts;
  int global_pool_count = 0;
};

// Per class: synonyms, hypernyms and siblings up to per_class_limit, in
// table order, excluding every exact catalog class name (the mechanism
// that blocks direct label tokens). Distractor rows and "*" rows join as
// an uncapped global pool. The union is deduplicated in first-appearance
// order. A class missing from the table is skipped with a warning in the
// report.
NounCandidateSet harvest_candidates(const ClassCatalog& catalog,
                                    const LexiconTable& table,
                                    int per_class_limit,
                                    HarvestReport* report = nullptr);

struct ShuffledNames {
  std::vector<std::string> name_by_class;  // index class_id - 1
  int fixed_points = 0;
};

// Uniform seeded permutation of class names (identity permitted).
// C must be >= 2.
ShuffledNames shuffle_class_names(const ClassCatalog& catalog,
                                  std::uint64_t seed);

// Registry for the mock encoder: class names plus every table row mapped
// onto its class anchor with relation-graded affinity (class name >
// synonym > hypernym/sibling > distractor).
std::vector<MockNoun> mock_registry_from(const ClassCatalog& catalog,
                                         const LexiconTable& table);

}  // namespace xmodal
