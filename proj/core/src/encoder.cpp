#include "xmodal/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <nlohmann/json.hpp>

#include "xmodal/common.hpp"
#include "xmodal/recordio.hpp"

namespace xmodal {

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Whole-word occurrence of `noun` in lowercase `text`.
bool contains_word(const std::string& text, const std::string& noun) {
  std::size_t pos = 0;
  while ((pos = text.find(noun, pos)) != std::string::npos) {
    const bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
    const std::size_t end = pos + noun.size();
    const bool right_ok = end == text.size() || !is_word_char(text[end]);
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

std::vector<double> unit_gaussian(std::uint64_t seed, std::size_t dim) {
  Rng rng(seed);
  std::vector<double> g = gaussian_vector(rng, dim);
  double n = l2_norm(g);
  // A fully zero draw is practically impossible; redraw just in case.
  while (n == 0.0) {
    g = gaussian_vector(rng, dim);
    n = l2_norm(g);
  }
  for (auto& x : g) x /= n;
  return g;
}

// Orthonormalize seeded Gaussians; project to each modality dim by
// truncation + renormalization.
// Classes come in neighbor pairs: consecutive catalog entries share a
// group direction, so cos(anchor_2k, anchor_2k+1) = kNeighborCos* while
// anchors of different pairs stay orthogonal. Confusions then
// concentrate inside a pair the way fine-grained classes confuse each
// other, which gives classifier logits a second-choice structure worth
// transferring. The pairing is much tighter on the text side: a language
// model states that two classes are kin far more legibly than one noisy
// image ever shows it, so text carries relational structure the image
// modality only hints at.
constexpr double kNeighborCosText = 0.7;
constexpr double kNeighborCosImage = 0.35;

std::vector<std::vector<double>> orthonormal_basis(std::uint64_t seed, int n,
                                                   int dim) {
  std::vector<std::vector<double>> basis;
  basis.reserve(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    Rng rng(mix_seed(seed, "basis:" + std::to_string(c)));
    std::vector<double> v = gaussian_vector(rng, static_cast<std::size_t>(dim));
    for (int round = 0; round < 2; ++round) {  // twice for stability
      for (const auto& a : basis) {
        const double proj = dot(v, a);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * a[i];
      }
    }
    const double n2 = l2_norm(v);
    if (n2 < 1e-8)
      throw ConfigError("mock encoder: anchor construction degenerated");
    for (auto& x : v) x /= n2;
    basis.push_back(std::move(v));
  }
  return basis;
}

std::vector<std::vector<double>> make_anchors(const SemanticMockSpec& spec,
                                              double neighbor_cos) {
  const int dim = std::max(spec.dim_text, spec.dim_image);
  if (spec.num_classes < 1)
    throw ConfigError("mock encoder: num_classes must be >= 1");
  const int groups = (spec.num_classes + 1) / 2;
  if (dim < spec.num_classes + groups)
    throw ConfigError(
        "mock encoder: embedding dim must be >= num_classes + "
        "num_classes/2 for paired anchors (got dim " +
        std::to_string(dim) + ", classes " +
        std::to_string(spec.num_classes) + ")");

  const auto basis = orthonormal_basis(spec.anchor_seed,
                                       spec.num_classes + groups, dim);
  const double w_own = std::sqrt(1.0 - neighbor_cos);
  const double w_grp = std::sqrt(neighbor_cos);
  std::vector<std::vector<double>> anchors;
  anchors.reserve(static_cast<std::size_t>(spec.num_classes));
  for (int c = 0; c < spec.num_classes; ++c) {
    const auto& own = basis[static_cast<std::size_t>(c)];
    const auto& grp =
        basis[static_cast<std::size_t>(spec.num_classes + c / 2)];
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = w_own * own[i] + w_grp * grp[i];
    anchors.push_back(std::move(v));
  }
  return anchors;
}

EmbeddingVector project(const std::vector<double>& anchor, int dim) {
  std::vector<double> v(anchor.begin(), anchor.begin() + dim);
  return normalize(v);
}

void check_pair_geometry(const std::vector<EmbeddingVector>& anchors,
                         double neighbor_cos, const char* what) {
  for (std::size_t a = 0; a < anchors.size(); ++a)
    for (std::size_t b = a + 1; b < anchors.size(); ++b) {
      const double c = cosine(anchors[a], anchors[b]);
      const bool neighbors = (a / 2 == b / 2);
      // Projection to a smaller modality dim distorts the exact values,
      // so the bands are loose. Neighbors must stay clearly closer than
      // strangers for the pair structure to survive.
      const bool ok = neighbors ? std::abs(c - neighbor_cos) < 0.2
                                : std::abs(c) < 0.2;
      if (!ok)
        throw ConfigError(std::string("mock encoder: ") + what +
                          " anchors lost their pair geometry after "
                          "projection (cos = " +
                          std::to_string(c) + " for classes " +
                          std::to_string(a + 1) + "," + std::to_string(b + 1) +
                          "); increase the embedding dim");
    }
}

}  // namespace

SemanticMockEncoder::SemanticMockEncoder(SemanticMockSpec spec,
                                         std::vector<MockNoun> lexicon)
    : spec_(spec) {
  if (spec_.synonym_noise < 0.0 || spec_.synonym_noise >= 1.0)
    throw ConfigError("mock encoder: synonym_noise must be in [0,1)");
  if (spec_.dim_text < 1 || spec_.dim_image < 1)
    throw ConfigError("mock encoder: dims must be positive");

  const auto raw_text = make_anchors(spec_, kNeighborCosText);
  const auto raw_image = make_anchors(spec_, kNeighborCosImage);
  for (std::size_t c = 0; c < raw_text.size(); ++c) {
    text_anchors_.push_back(project(raw_text[c], spec_.dim_text));
    image_anchors_.push_back(project(raw_image[c], spec_.dim_image));
  }
  check_pair_geometry(text_anchors_, kNeighborCosText, "text");
  check_pair_geometry(image_anchors_, kNeighborCosImage, "image");

  std::uint64_t lex_hash = 0xcbf29ce484222325ull;
  std::sort(lexicon.begin(), lexicon.end(),
            [](const MockNoun& a, const MockNoun& b) { return a.noun < b.noun; });
  for (auto& entry : lexicon) {
    entry.noun = lowercase(entry.noun);
    if (entry.noun.empty())
      throw ConfigError("mock encoder: empty noun in lexicon");
    const bool floating = entry.kind == MockKind::kDistractor;
    if (!floating &&
        (entry.class_id < 1 || entry.class_id > spec_.num_classes))
      throw ConfigError("mock encoder: noun '" + entry.noun +
                        "' has out-of-range class id");
    if (floating && (entry.class_id < 0 || entry.class_id > spec_.num_classes))
      throw ConfigError("mock encoder: distractor '" + entry.noun +
                        "' has out-of-range class id");
    const char kind_tag[] = {'c', 's', 'r', 'd'};
    lex_hash ^= fnv1a64(entry.noun + ":" + std::to_string(entry.class_id) +
                        ":" + kind_tag[static_cast<int>(entry.kind)]);
    lex_hash *= 0x100000001b3ull;
    registry_[entry.noun] = entry;
  }

  std::uint64_t spec_hash = mix_seed(spec_.anchor_seed, lex_hash);
  spec_hash = mix_seed(spec_hash, std::to_string(spec_.synonym_noise) + "|" +
                                      std::to_string(spec_.distractor_noise) +
                                      "|" + std::to_string(spec_.image_noise) +
                                      "|nbr:" + std::to_string(kNeighborCosText) +
                                      "/" + std::to_string(kNeighborCosImage));
  identity_ = "mock-c" + std::to_string(spec_.num_classes) + "-t" +
              std::to_string(spec_.dim_text) + "-i" +
              std::to_string(spec_.dim_image) + "-" + to_hex(spec_hash);
}

const EmbeddingVector& SemanticMockEncoder::text_anchor(int class_id) const {
  if (class_id < 1 || class_id > spec_.num_classes)
    throw InputError("text_anchor: class id out of range");
  return text_anchors_[static_cast<std::size_t>(class_id - 1)];
}

const EmbeddingVector& SemanticMockEncoder::image_anchor(int class_id) const {
  if (class_id < 1 || class_id > spec_.num_classes)
    throw InputError("image_anchor: class id out of range");
  return image_anchors_[static_cast<std::size_t>(class_id - 1)];
}

EmbeddingVector SemanticMockEncoder::encode_text(
    const std::string& prompt) const {
  if (prompt.empty()) throw InputError("encode_text: empty prompt");
  const std::string text = lowercase(prompt);

  // Longest registered whole-word match; ties resolve to the
  // lexicographically smallest noun. Registry iteration order is
  // unordered, so collect matches first.
  const MockNoun* best = nullptr;
  for (const auto& [noun, entry] : registry_) {
    if (!contains_word(text, noun)) continue;
    if (best == nullptr || noun.size() > best->noun.size() ||
        (noun.size() == best->noun.size() && noun < best->noun))
      best = &entry;
  }

  const std::size_t dim = static_cast<std::size_t>(spec_.dim_text);
  const std::vector<double> u =
      unit_gaussian(mix_seed(spec_.anchor_seed, "text:" + text), dim);

  if (best == nullptr) return normalize(u);

  std::vector<double> v(dim);
  if (best->kind == MockKind::kDistractor) {
    const double w = spec_.distractor_noise;
    for (std::size_t i = 0; i < dim; ++i) v[i] = u[i];
    if (best->class_id >= 1) {
      const auto& a = text_anchor(best->class_id);
      for (std::size_t i = 0; i < dim; ++i) v[i] += w * a.values[i];
    }
  } else if (best->kind == MockKind::kRelated) {
    const auto& a = text_anchor(best->class_id);
    for (std::size_t i = 0; i < dim; ++i) v[i] = a.values[i] + u[i];
  } else {
    const auto& a = text_anchor(best->class_id);
    const double s = best->kind == MockKind::kClassName
                         ? 0.5 * spec_.synonym_noise
                         : spec_.synonym_noise;
    for (std::size_t i = 0; i < dim; ++i) v[i] = a.values[i] + s * u[i];
  }
  return normalize(v);
}

EmbeddingVector SemanticMockEncoder::encode_image(
    const ImageInput& input) const {
  if (!input.class_id.has_value())
    throw InputError(
        "encode_image: mock backend needs a class id (got pixel/feature "
        "input)");
  const int c = *input.class_id;
  if (c < 1 || c > spec_.num_classes)
    throw InputError("encode_image: class id out of range");
  const auto& a = image_anchor(c);
  if (spec_.image_noise == 0.0) return a;

  const std::size_t dim = static_cast<std::size_t>(spec_.dim_image);
  const std::vector<double> u = unit_gaussian(
      mix_seed(spec_.anchor_seed,
               "image:" + std::to_string(c) + ":" + input.sample_id + ":" +
                   std::to_string(input.sample_key)),
      dim);
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < dim; ++i)
    v[i] = a.values[i] + spec_.image_noise * u[i];
  return normalize(v);
}

PrecomputedVlmEncoder::PrecomputedVlmEncoder(
    const std::filesystem::path& store_root)
    : root_(store_root) {
  const auto manifest_path = root_ / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw BackendError("vlm backend unavailable: no embedding store at " +
                       manifest_path.string() +
                       " (precompute embeddings with a real encoder first)");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text_file(manifest_path));
    identity_ = m.at("identity").get<std::string>();
    dim_text_ = m.at("dim_text").get<int>();
    dim_image_ = m.at("dim_image").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError("vlm backend: malformed store manifest: " +
                       std::string(e.what()));
  }
  if (dim_text_ < 1 || dim_image_ < 1)
    throw BackendError("vlm backend: store manifest has invalid dims");
}

EmbeddingVector PrecomputedVlmEncoder::lookup(const std::string& ns,
                                              const std::string& key) const {
  const auto manifest_path = root_ / "manifest.json";
  nlohmann::json m = nlohmann::json::parse(read_text_file(manifest_path));
  const auto& table = m.at(ns);
  auto it = table.find(key);
  if (it == table.end())
    throw BackendError("vlm backend: no precomputed embedding for " + ns +
                       " key '" + key + "'");
  const std::size_t len = (*it).at("len").get<std::size_t>();
  const std::string checksum = (*it).at("checksum").get<std::string>();
  const std::string file = (*it).at("file").get<std::string>();
  EmbeddingVector out;
  out.values = read_f32_file(root_ / file, len, checksum, "vlm store");
  return out;
}

EmbeddingVector PrecomputedVlmEncoder::encode_text(
    const std::string& prompt) const {
  if (prompt.empty()) throw InputError("encode_text: empty prompt");
  return lookup("text", prompt);
}

EmbeddingVector PrecomputedVlmEncoder::encode_image(
    const ImageInput& input) const {
  if (input.feature.has_value()) {
    if (static_cast<int>(input.feature->size()) != dim_image_)
      throw InputError("encode_image: feature dim mismatch");
    return normalize(*input.feature);
  }
  return lookup("image", input.sample_id);
}

}  // namespace xmodal
