#include "xmodal/models.hpp"

#include <algorithm>
#include <cmath>

#include "xmodal/common.hpp"
#include "xmodal/recordio.hpp"

namespace xmodal {

namespace {

void check_dim(const Vec& x, int dim, const char* what) {
  if (static_cast<int>(x.size()) != dim)
    throw InputError(std::string(what) + ": expected dim " +
                     std::to_string(dim) + ", got " +
                     std::to_string(x.size()));
}

}  // namespace

MlpHead::MlpHead(MlpSpec spec, std::uint64_t init_seed) : spec_(std::move(spec)) {
  if (spec_.input_dim < 1 || spec_.output_dim < 1)
    throw ConfigError("mlp: input and output dims must be positive");
  for (int h : spec_.hidden)
    if (h < 1) throw ConfigError("mlp: hidden widths must be positive");

  std::vector<int> widths;
  widths.push_back(spec_.input_dim);
  widths.insert(widths.end(), spec_.hidden.begin(), spec_.hidden.end());
  widths.push_back(spec_.output_dim);

  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer;
    layer.in = widths[l];
    layer.out = widths[l + 1];
    layer.W.assign(static_cast<std::size_t>(layer.in) * layer.out, 0.0);
    layer.b.assign(static_cast<std::size_t>(layer.out), 0.0);
    const bool output_layer = l + 2 == widths.size();
    if (!output_layer) {
      Rng rng(mix_seed(init_seed, "layer:" + std::to_string(l)));
      const double scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
      for (auto& w : layer.W) w = scale * rng.next_gaussian();
    }
    layers_.push_back(std::move(layer));
  }
}

Vec MlpHead::forward(const Vec& x) const {
  Tape tape;
  return forward(x, tape);
}

Vec MlpHead::forward(const Vec& x, Tape& tape) const {
  check_dim(x, spec_.input_dim, "mlp forward");
  tape.input = x;
  tape.hidden.clear();

  Vec a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Vec z(static_cast<std::size_t>(layer.out));
    for (int o = 0; o < layer.out; ++o) {
      double acc = layer.b[static_cast<std::size_t>(o)];
      const double* row =
          layer.W.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) acc += row[i] * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = acc;
    }
    if (l + 1 < layers_.size()) {
      for (auto& v : z) v = std::tanh(v);
      tape.hidden.push_back(z);
    }
    a = std::move(z);
  }
  return a;
}

MlpHead::Grads MlpHead::zero_grads() const {
  Grads g;
  for (const Layer& layer : layers_) {
    g.dW.emplace_back(layer.W.size(), 0.0);
    g.db.emplace_back(layer.b.size(), 0.0);
  }
  return g;
}

Vec MlpHead::backward(const Tape& tape, const Vec& dlogits,
                      Grads& grads) const {
  check_dim(dlogits, spec_.output_dim, "mlp backward");
  if (grads.dW.size() != layers_.size())
    throw InputError("mlp backward: grads shape mismatch");

  Vec delta = dlogits;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const Vec& a_in = l == 0 ? tape.input : tape.hidden[l - 1];

    auto& dW = grads.dW[l];
    auto& db = grads.db[l];
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      db[static_cast<std::size_t>(o)] += d;
      double* row = dW.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i)
        row[i] += d * a_in[static_cast<std::size_t>(i)];
    }

    Vec prev(static_cast<std::size_t>(layer.in), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[static_cast<std::size_t>(o)];
      const double* row =
          layer.W.data() + static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i)
        prev[static_cast<std::size_t>(i)] += d * row[i];
    }
    if (l > 0) {
      // tanh'(z) = 1 - a^2 with a the stored post-activation.
      const Vec& a = tape.hidden[l - 1];
      for (int i = 0; i < layer.in; ++i) {
        const double ai = a[static_cast<std::size_t>(i)];
        prev[static_cast<std::size_t>(i)] *= 1.0 - ai * ai;
      }
    }
    delta = std::move(prev);
  }
  return delta;
}

Vec MlpHead::input_grad(const Vec& x, int target) const {
  if (target < 0 || target >= spec_.output_dim)
    throw InputError("input_grad: target out of range");
  Tape tape;
  forward(x, tape);
  Vec dlogits(static_cast<std::size_t>(spec_.output_dim), 0.0);
  dlogits[static_cast<std::size_t>(target)] = 1.0;
  Grads scratch = zero_grads();
  return backward(tape, dlogits, scratch);
}

void MlpHead::sgd_step(const Grads& grads, double lr) {
  if (grads.dW.size() != layers_.size())
    throw InputError("sgd_step: grads shape mismatch");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Layer& layer = layers_[l];
    for (std::size_t i = 0; i < layer.W.size(); ++i)
      layer.W[i] -= lr * grads.dW[l][i];
    for (std::size_t i = 0; i < layer.b.size(); ++i)
      layer.b[i] -= lr * grads.db[l][i];
  }
}

std::size_t MlpHead::param_count() const {
  std::size_t n = 0;
  for (const Layer& layer : layers_) n += layer.W.size() + layer.b.size();
  return n;
}

std::vector<float> MlpHead::serialize() const {
  std::vector<float> out;
  out.reserve(param_count());
  for (const Layer& layer : layers_) {
    for (double w : layer.W) out.push_back(static_cast<float>(w));
    for (double b : layer.b) out.push_back(static_cast<float>(b));
  }
  return out;
}

void MlpHead::deserialize(const std::vector<float>& params) {
  if (params.size() != param_count())
    throw InputError("mlp deserialize: expected " +
                     std::to_string(param_count()) + " params, got " +
                     std::to_string(params.size()));
  std::size_t idx = 0;
  for (Layer& layer : layers_) {
    for (double& w : layer.W) w = static_cast<double>(params[idx++]);
    for (double& b : layer.b) b = static_cast<double>(params[idx++]);
  }
}

std::string MlpHead::checksum() const { return f32_checksum(serialize()); }

void save_head(const MlpHead& head, const std::filesystem::path& dir,
               const nlohmann::json& manifest_extra) {
  std::filesystem::create_directories(dir);
  const std::vector<float> params = head.serialize();
  write_f32_file(dir / "params.f32", params);

  nlohmann::json manifest;
  if (manifest_extra.is_object()) manifest = manifest_extra;
  manifest["arch"] = {{"input_dim", head.spec().input_dim},
                      {"hidden", head.spec().hidden},
                      {"output_dim", head.spec().output_dim}};
  manifest["params"] = {{"record", "params"},
                        {"len", params.size()},
                        {"checksum", f32_checksum(params)}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

MlpHead load_head(const std::filesystem::path& dir,
                  nlohmann::json* manifest_out) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw CacheIntegrityError("checkpoint manifest " + dir.string() + ": " +
                              e.what());
  }
  MlpSpec spec;
  spec.input_dim = manifest.at("arch").at("input_dim").get<int>();
  spec.hidden = manifest.at("arch").at("hidden").get<std::vector<int>>();
  spec.output_dim = manifest.at("arch").at("output_dim").get<int>();

  MlpHead head(spec, 0);
  head.deserialize(read_f32_file(
      dir / "params.f32", manifest.at("params").at("len").get<std::size_t>(),
      manifest.at("params").at("checksum").get<std::string>(),
      "checkpoint " + dir.string()));
  if (manifest_out) *manifest_out = std::move(manifest);
  return head;
}

Vec augment(const Vec& x, double strength, std::uint64_t seed) {
  if (strength == 0.0) return x;
  Rng rng(seed);
  Vec g = gaussian_vector(rng, x.size());
  const double gn = l2_norm(g);
  if (gn == 0.0) return x;
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = x[i] + strength * g[i] / gn;
  const double n = l2_norm(out);
  if (n == 0.0) return x;
  for (auto& v : out) v /= n;
  return out;
}

Vec ensemble_logits(const std::vector<Vec>& members) {
  if (members.empty()) throw InputError("ensemble_logits: no members");
  const std::size_t c = members.front().size();
  Vec out(c, 0.0);
  for (const Vec& m : members) {
    if (m.size() != c)
      throw InputError("ensemble_logits: member length mismatch");
    for (std::size_t i = 0; i < c; ++i) out[i] += m[i];
  }
  for (auto& v : out) v /= static_cast<double>(members.size());
  return out;
}

TeacherInputMode parse_input_mode(const std::string& name) {
  if (name == "concat") return TeacherInputMode::kConcat;
  if (name == "text-only") return TeacherInputMode::kTextOnly;
  throw ConfigError("unknown teacher input mode '" + name + "'");
}

std::string input_mode_name(TeacherInputMode mode) {
  return mode == TeacherInputMode::kConcat ? "concat" : "text-only";
}

namespace {

// Accept unit vectors as-is (1e-6), re-normalize mild drift (1e-3,
// counted), reject anything farther off.
void append_normalized(Vec& dst, const Vec& v, std::uint64_t* warnings,
                       const char* what) {
  const double n = l2_norm(v);
  const double dev = std::abs(n - 1.0);
  if (dev <= 1e-6) {
    dst.insert(dst.end(), v.begin(), v.end());
    return;
  }
  if (dev > 1e-3)
    throw InputError(std::string(what) + ": input norm " + std::to_string(n) +
                     " too far from 1");
  ++*warnings;
  for (double x : v) dst.push_back(x / n);
}

}  // namespace

Vec MultimodalTeacher::assemble(const Vec& image_vec, const Vec& text_vec) {
  Vec input;
  if (mode == TeacherInputMode::kConcat) {
    check_dim(image_vec, d_img, "multimodal image input");
    check_dim(text_vec, d_txt, "multimodal text input");
    input.reserve(static_cast<std::size_t>(d_img + d_txt));
    append_normalized(input, image_vec, &norm_warnings, "multimodal image");
    append_normalized(input, text_vec, &norm_warnings, "multimodal text");
  } else {
    check_dim(text_vec, d_txt, "multimodal text input");
    append_normalized(input, text_vec, &norm_warnings, "multimodal text");
  }
  return input;
}

Vec MultimodalTeacher::forward(const Vec& image_vec, const Vec& text_vec) {
  return head.forward(assemble(image_vec, text_vec));
}

Vec MultimodalTeacher::forward(const Vec& image_vec, const Vec& text_vec,
                               MlpHead::Tape& tape) {
  return head.forward(assemble(image_vec, text_vec), tape);
}

const char* text_source_name(TextSource s) {
  switch (s) {
    case TextSource::kGt: return "gt";
    case TextSource::kWn: return "wn";
    case TextSource::kNoise: return "noise";
  }
  return "?";
}

void validate(const TextMixPolicy& policy) {
  const double ps[3] = {policy.p_gt, policy.p_wn, policy.p_noise};
  for (double p : ps)
    if (p < 0.0 || p > 1.0)
      throw ConfigError("mix policy: proportions must be in [0,1]");
  const double sum = policy.p_gt + policy.p_wn + policy.p_noise;
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("mix policy: proportions sum to " +
                      std::to_string(sum) + ", expected 1");
}

std::map<int, TextSource> assign_sources(const std::vector<int>& sample_ids,
                                         const TextMixPolicy& policy,
                                         std::uint64_t seed) {
  validate(policy);
  if (sample_ids.empty()) throw InputError("assign_sources: no samples");

  std::vector<int> ids = sample_ids;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw InputError("assign_sources: duplicate sample ids");
  const std::size_t n = ids.size();

  // Largest-remainder rounding of the target counts.
  const double targets[3] = {policy.p_gt * static_cast<double>(n),
                             policy.p_wn * static_cast<double>(n),
                             policy.p_noise * static_cast<double>(n)};
  std::size_t counts[3];
  double fracs[3];
  std::size_t used = 0;
  for (int s = 0; s < 3; ++s) {
    counts[s] = static_cast<std::size_t>(std::floor(targets[s]));
    fracs[s] = targets[s] - static_cast<double>(counts[s]);
    used += counts[s];
  }
  int order[3] = {0, 1, 2};
  std::stable_sort(order, order + 3,
                   [&fracs](int a, int b) { return fracs[a] > fracs[b]; });
  // Fractional parts each lie in [0,1), so the shortfall is 0, 1 or 2.
  for (std::size_t r = 0; r < n - used; ++r) ++counts[order[r]];

  std::vector<TextSource> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < counts[0]; ++i) labels.push_back(TextSource::kGt);
  for (std::size_t i = 0; i < counts[1]; ++i) labels.push_back(TextSource::kWn);
  for (std::size_t i = 0; i < counts[2]; ++i)
    labels.push_back(TextSource::kNoise);

  Rng rng(mix_seed(seed, "mix-assign"));
  seeded_shuffle(labels, rng);

  std::map<int, TextSource> out;
  for (std::size_t i = 0; i < n; ++i) out[ids[i]] = labels[i];
  return out;
}

Vec prompt_embedding(const std::string& noun,
                     const PromptTemplateSet& templates,
                     const EncoderBackend& backend) {
  Vec acc(static_cast<std::size_t>(backend.text_dim()), 0.0);
  for (const auto& prompt : templates.apply(noun)) {
    const EmbeddingVector v = backend.encode_text(prompt);
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] += static_cast<double>(v.values[i]);
  }
  for (auto& x : acc) x /= static_cast<double>(templates.size());
  const double n = l2_norm(acc);
  if (n == 0.0) throw InputError("prompt_embedding: zero average for '" + noun + "'");
  for (auto& x : acc) x /= n;
  return acc;
}

ResolvedText resolve_text_input(const TextContext& ctx, TextSource source,
                                int class_id, int sample_id,
                                const Vec& image_vec) {
  if (ctx.catalog == nullptr || ctx.templates == nullptr ||
      ctx.backend == nullptr)
    throw InputError("resolve_text_input: missing catalog/templates/backend");

  ResolvedText out;
  out.source = source;
  switch (source) {
    case TextSource::kGt:
      out.vec = prompt_embedding(ctx.catalog->name(class_id), *ctx.templates,
                                 *ctx.backend);
      break;
    case TextSource::kWn: {
      if (ctx.bank == nullptr || ctx.clusters == nullptr)
        throw InputError("resolve_text_input: wn source needs a bank");
      const std::size_t idx = select_relaxed_for_sample(
          *ctx.bank, image_vec, *ctx.clusters, ctx.select_mode,
          mix_seed(ctx.select_seed, "select:" + std::to_string(sample_id)));
      out.vec = ctx.bank->entries[idx].current;
      out.bank_index = idx;
      break;
    }
    case TextSource::kNoise: {
      if (ctx.noise_names == nullptr)
        throw InputError("resolve_text_input: noise source needs a name map");
      const auto& names = *ctx.noise_names;
      if (class_id < 1 || class_id > static_cast<int>(names.size()))
        throw InputError("resolve_text_input: class id out of range");
      out.vec = prompt_embedding(names[static_cast<std::size_t>(class_id - 1)],
                                 *ctx.templates, *ctx.backend);
      break;
    }
  }
  return out;
}

}  // namespace xmodal
