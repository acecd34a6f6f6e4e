#include "xmodal/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "xmodal/common.hpp"
#include "xmodal/recordio.hpp"

namespace xmodal {

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

LexRelation parse_relation(const std::string& s, const std::string& context) {
  if (s == "synonym") return LexRelation::kSynonym;
  if (s == "hypernym") return LexRelation::kHypernym;
  if (s == "sibling") return LexRelation::kSibling;
  if (s == "distractor") return LexRelation::kDistractor;
  throw ConfigError("unknown lexicon relation '" + s + "' " + context);
}

}  // namespace

ClassCatalog ClassCatalog::from_names(const std::vector<std::string>& names) {
  ClassCatalog cat;
  std::set<std::string> seen;
  for (const auto& raw : names) {
    const std::string name = lowercase(trim(raw));
    if (name.empty()) throw ConfigError("catalog: empty class name");
    if (!seen.insert(name).second)
      throw ConfigError("catalog: duplicate class name '" + name + "'");
    cat.names_.push_back(name);
  }
  if (cat.names_.empty()) throw ConfigError("catalog: no classes");
  return cat;
}

ClassCatalog ClassCatalog::load(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (!line.empty()) names.push_back(line);
  }
  return from_names(names);
}

const std::string& ClassCatalog::name(int class_id) const {
  if (class_id < 1 || class_id > num_classes())
    throw InputError("catalog: class id " + std::to_string(class_id) +
                     " out of range 1.." + std::to_string(num_classes()));
  return names_[static_cast<std::size_t>(class_id - 1)];
}

bool ClassCatalog::contains_name(const std::string& name) const {
  return id_of(name) != 0;
}

int ClassCatalog::id_of(const std::string& name) const {
  const std::string needle = lowercase(name);
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == needle) return static_cast<int>(i + 1);
  return 0;
}

PromptTemplateSet::PromptTemplateSet(std::vector<std::string> templates)
    : templates_(std::move(templates)) {
  if (templates_.empty())
    throw ConfigError("prompt templates: need at least one template");
  for (const auto& t : templates_) {
    const auto first = t.find("{}");
    if (first == std::string::npos)
      throw ConfigError("prompt template '" + t + "' has no {} noun slot");
    if (t.find("{}", first + 2) != std::string::npos)
      throw ConfigError("prompt template '" + t +
                        "' has more than one {} slot");
  }
}

std::vector<std::string> PromptTemplateSet::apply(
    const std::string& noun) const {
  if (trim(noun).empty())
    throw InputError("apply_templates: empty noun");
  std::vector<std::string> prompts;
  prompts.reserve(templates_.size());
  for (const auto& t : templates_) {
    std::string p = t;
    p.replace(p.find("{}"), 2, noun);
    prompts.push_back(std::move(p));
  }
  return prompts;
}

LexiconTable load_snapshot(const std::filesystem::path& path) {
  LexiconTable table;
  table.source = LexiconSourceKind::kOfflineSnapshot;
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string cls, rel, noun;
    if (!std::getline(ls, cls, '\t') || !std::getline(ls, rel, '\t') ||
        !std::getline(ls, noun))
      throw ConfigError("snapshot " + path.string() + ": line " +
                        std::to_string(lineno) +
                        " is not class<TAB>relation<TAB>noun");
    LexRow row;
    row.class_name = lowercase(trim(cls));
    row.relation = parse_relation(lowercase(trim(rel)),
                                  "at " + path.string() + ":" +
                                      std::to_string(lineno));
    row.noun = lowercase(trim(noun));
    if (row.noun.empty())
      throw ConfigError("snapshot " + path.string() + ": empty noun at line " +
                        std::to_string(lineno));
    table.rows.push_back(std::move(row));
  }
  return table;
}

LexiconTable builtin_mock_lexicon() {
  // Tiny WordNet-flavored table for tests and demos. Relations follow the
  // synonym / hypernym / sibling scheme; distractors form the noise pool
  // that alignment filtering is expected to prune.
  LexiconTable table;
  table.source = LexiconSourceKind::kMockLexicon;
  auto add = [&table](const char* cls, LexRelation rel, const char* noun) {
    table.rows.push_back({cls, rel, noun});
  };
  using R = LexRelation;

  add("telephone", R::kSynonym, "desk phone");
  add("telephone", R::kSynonym, "handset");
  add("telephone", R::kSynonym, "blower");
  add("telephone", R::kHypernym, "communication device");
  add("telephone", R::kSibling, "telephone booth");
  add("telephone", R::kSibling, "intercom");

  add("automobile", R::kSynonym, "motorcar");
  add("automobile", R::kSynonym, "auto");
  add("automobile", R::kSynonym, "sedan");
  add("automobile", R::kHypernym, "motor vehicle");
  add("automobile", R::kSibling, "roadster");
  add("automobile", R::kSibling, "coupe");

  add("dog", R::kSynonym, "hound");
  add("dog", R::kSynonym, "pooch");
  add("dog", R::kSynonym, "canine");
  add("dog", R::kHypernym, "domestic animal");
  add("dog", R::kSibling, "puppy");
  add("dog", R::kSibling, "mutt");

  add("chair", R::kSynonym, "armchair");
  add("chair", R::kSynonym, "seat");
  add("chair", R::kSynonym, "recliner");
  add("chair", R::kHypernym, "furniture");
  add("chair", R::kSibling, "stool");
  add("chair", R::kSibling, "bench");

  add("airplane", R::kSynonym, "aeroplane");
  add("airplane", R::kSynonym, "airliner");
  add("airplane", R::kSynonym, "jet");
  add("airplane", R::kHypernym, "aircraft");
  add("airplane", R::kSibling, "biplane");
  add("airplane", R::kSibling, "glider");

  add("flower", R::kSynonym, "blossom");
  add("flower", R::kSynonym, "bloom");
  add("flower", R::kSynonym, "floret");
  add("flower", R::kHypernym, "plant organ");
  add("flower", R::kSibling, "bud");
  add("flower", R::kSibling, "petal");

  add("computer", R::kSynonym, "workstation");
  add("computer", R::kSynonym, "laptop");
  add("computer", R::kSynonym, "mainframe");
  add("computer", R::kHypernym, "computing machine");
  add("computer", R::kSibling, "calculator");
  add("computer", R::kSibling, "server");

  add("fish", R::kSynonym, "trout");
  add("fish", R::kSynonym, "salmon");
  add("fish", R::kSynonym, "carp");
  add("fish", R::kHypernym, "aquatic vertebrate");
  add("fish", R::kSibling, "minnow");
  add("fish", R::kSibling, "eel");

  add("telephone", R::kDistractor, "gadget");
  add("automobile", R::kDistractor, "widget");

  return table;
}

NounCandidateSet harvest_candidates(const ClassCatalog& catalog,
                                    const LexiconTable& table,
                                    int per_class_limit,
                                    HarvestReport* report) {
  if (per_class_limit <= 0) throw Error("harvest_candidates: no candidates");

  NounCandidateSet out;
  out.source = table.source;
  std::set<std::string> seen;
  auto push = [&](const std::string& noun) {
    if (catalog.contains_name(noun)) return false;  // exclusion invariant
    if (!seen.insert(noun).second) return false;
    out.nouns.push_back(noun);
    return true;
  };

  for (int c = 1; c <= catalog.num_classes(); ++c) {
    const std::string& cls = catalog.name(c);
    int taken = 0;
    bool any_row = false;
    for (const auto& row : table.rows) {
      if (row.class_name != cls || row.relation == LexRelation::kDistractor)
        continue;
      any_row = true;
      if (taken >= per_class_limit) break;
      if (push(row.noun)) ++taken;
    }
    if (report) report->per_class_counts.emplace_back(cls, taken);
    if (!any_row && report)
      report->warnings.push_back("class '" + cls +
                                 "' absent from lexicon; skipped");
  }

  int pool = 0;
  for (const auto& row : table.rows) {
    const bool global = row.class_name == "*";
    const bool distract = row.relation == LexRelation::kDistractor;
    if (!global && !distract) continue;
    if (!global && !catalog.contains_name(row.class_name)) continue;
    if (push(row.noun)) ++pool;
  }
  if (report) report->global_pool_count = pool;

  if (out.nouns.empty()) throw Error("harvest_candidates: no candidates");
  return out;
}

ShuffledNames shuffle_class_names(const ClassCatalog& catalog,
                                  std::uint64_t seed) {
  const int c = catalog.num_classes();
  if (c < 2)
    throw InputError("shuffle_class_names: need at least 2 classes");
  ShuffledNames out;
  out.name_by_class = catalog.names();
  Rng rng(seed);
  seeded_shuffle(out.name_by_class, rng);
  for (int i = 0; i < c; ++i)
    if (out.name_by_class[static_cast<std::size_t>(i)] == catalog.name(i + 1))
      ++out.fixed_points;
  return out;
}

std::vector<MockNoun> mock_registry_from(const ClassCatalog& catalog,
                                         const LexiconTable& table) {
  std::vector<MockNoun> nouns;
  for (int c = 1; c <= catalog.num_classes(); ++c)
    nouns.push_back({catalog.name(c), c, MockKind::kClassName});
  for (const auto& row : table.rows) {
    MockNoun n;
    n.noun = row.noun;
    if (row.relation == LexRelation::kDistractor) {
      n.kind = MockKind::kDistractor;
      n.class_id = row.class_name == "*" ? 0 : catalog.id_of(row.class_name);
    } else {
      n.kind = row.relation == LexRelation::kSynonym ? MockKind::kSynonym
                                                     : MockKind::kRelated;
      n.class_id = catalog.id_of(row.class_name);
      if (n.class_id == 0) continue;  // row for a class outside the catalog
    }
    nouns.push_back(std::move(n));
  }
  return nouns;
}

}  // namespace xmodal
